//! Dataset resolution and the split manifest.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use ltlp_core::dataset::io::{
    file_digest, load_edge_list, load_features, load_linqs_content, one_hot_features, row_normalize, EdgeList,
};
use ltlp_core::dataset::synthetic::{citation_like, sbm_graph, CitationConfig};
use ltlp_core::dataset::{split_dataset, Dataset, LabeledPair};
use ltlp_core::encoder::Features;
use ltlp_core::NodePair;
use ndarray::Array2;
use serde::Serialize;

use crate::config::RunConfig;

/// A split dataset plus what was read to build it.
pub struct LoadedData {
    pub dataset: Dataset,
    /// Block membership for SBM data.
    pub blocks: Option<Vec<usize>>,
    pub source: String,
    /// SHA-256 of every input file, keyed by path.
    pub inputs: BTreeMap<String, String>,
}

struct RawGraph {
    num_nodes: usize,
    edges: Vec<NodePair>,
    features: Array2<f64>,
    blocks: Option<Vec<usize>>,
    source: String,
    inputs: Vec<PathBuf>,
}

/// Builds the dataset for `cfg` (already seeded).
///
/// Names resolve in order: `sbm`, `cora-like`, an existing edge-list path,
/// then `<data_dir>/<name>/` holding either `<name>.cites` with
/// `<name>.content` or `edges.txt` with an optional `features.csv`.
pub fn load(cfg: &RunConfig) -> Result<LoadedData> {
    let raw = resolve(cfg)?;
    let mut features = raw.features;
    if cfg.normalize_features {
        row_normalize(&mut features);
    }
    let dataset = split_dataset(raw.num_nodes, &raw.edges, Features::new(features), &cfg.split)
        .with_context(|| format!("splitting {}", raw.source))?;
    let inputs = raw
        .inputs
        .iter()
        .map(|p| Ok((p.display().to_string(), file_digest(p)?)))
        .collect::<Result<_>>()?;
    Ok(LoadedData { dataset, blocks: raw.blocks, source: raw.source, inputs })
}

fn resolve(cfg: &RunConfig) -> Result<RawGraph> {
    let name = cfg.dataset.as_str();
    match name.to_ascii_lowercase().as_str() {
        "sbm" => {
            let g = sbm_graph(&cfg.sbm)?;
            return Ok(RawGraph {
                num_nodes: g.num_nodes,
                edges: g.edges,
                features: g.features,
                blocks: Some(g.blocks),
                source: format!("sbm(seed={})", cfg.sbm.seed),
                inputs: Vec::new(),
            });
        }
        "cora-like" => {
            // one fixed graph; seeds only vary the split and training
            let g = citation_like(&CitationConfig::default())?;
            return Ok(RawGraph {
                num_nodes: g.num_nodes,
                edges: g.edges,
                features: g.features,
                blocks: None,
                source: "cora-like".into(),
                inputs: Vec::new(),
            });
        }
        _ => {}
    }
    let as_path = Path::new(name);
    if as_path.is_file() {
        return from_edge_list(as_path, cfg.features.as_deref());
    }
    let dir = cfg.data_dir.join(name);
    let cites = dir.join(format!("{name}.cites"));
    let content = dir.join(format!("{name}.content"));
    if cites.is_file() && content.is_file() {
        let edges = load_edge_list(&cites)?;
        let (features, _) = load_linqs_content(&content, &edges)?;
        return Ok(RawGraph {
            num_nodes: edges.num_nodes,
            edges: edges.edges,
            features,
            blocks: None,
            source: cites.display().to_string(),
            inputs: vec![cites, content],
        });
    }
    let edge_file = dir.join("edges.txt");
    if edge_file.is_file() {
        let feats = cfg.features.clone().or_else(|| Some(dir.join("features.csv")).filter(|p| p.is_file()));
        return from_edge_list(&edge_file, feats.as_deref());
    }
    bail!(
        "dataset `{name}` not found: expected {} and {}, or {}; use `cora-like` or `sbm` for synthetic data",
        cites.display(),
        content.display(),
        edge_file.display()
    )
}

fn from_edge_list(path: &Path, features: Option<&Path>) -> Result<RawGraph> {
    let edges: EdgeList = load_edge_list(path)?;
    let mut inputs = vec![path.to_path_buf()];
    let x = match features {
        Some(f) => {
            inputs.push(f.to_path_buf());
            load_features(f, edges.num_nodes)?
        }
        None => one_hot_features(edges.num_nodes),
    };
    Ok(RawGraph {
        num_nodes: edges.num_nodes,
        edges: edges.edges,
        features: x,
        blocks: None,
        source: path.display().to_string(),
        inputs,
    })
}

#[derive(Debug, Serialize)]
pub struct SplitManifest {
    pub source: String,
    pub seed: u64,
    pub train_frac: f64,
    pub val_frac: f64,
    pub neg_ratio: f64,
    pub num_nodes: usize,
    pub counts: BTreeMap<String, usize>,
    /// SHA-256 of inputs and written split files.
    pub digests: BTreeMap<String, String>,
}

/// Writes `train.tsv`, `val.tsv`, `test.tsv` (`u v label`) and
/// `manifest.json` into `dir`.
pub fn write_split(dir: &Path, cfg: &RunConfig, data: &LoadedData) -> Result<SplitManifest> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let d = &data.dataset;
    let mut counts = BTreeMap::new();
    let mut digests = data.inputs.clone();
    for (name, pairs) in [("train", &d.train), ("val", &d.val), ("test", &d.test)] {
        let path = dir.join(format!("{name}.tsv"));
        fs::write(&path, pairs_tsv(pairs)).with_context(|| format!("writing {}", path.display()))?;
        digests.insert(format!("{name}.tsv"), file_digest(&path)?);
        counts.insert(format!("{name}_positive"), pairs.iter().filter(|p| p.label).count());
        counts.insert(format!("{name}_negative"), pairs.iter().filter(|p| !p.label).count());
    }
    let manifest = SplitManifest {
        source: data.source.clone(),
        seed: cfg.split.seed,
        train_frac: cfg.split.train_frac,
        val_frac: cfg.split.val_frac,
        neg_ratio: cfg.split.neg_ratio,
        num_nodes: d.num_nodes(),
        counts,
        digests,
    };
    crate::report::write_json(&dir.join("manifest.json"), &manifest)?;
    Ok(manifest)
}

fn pairs_tsv(pairs: &[LabeledPair]) -> String {
    let mut s = String::new();
    for p in pairs {
        s.push_str(&format!("{}\t{}\t{}\n", p.pair.u(), p.pair.v(), p.label as u8));
    }
    s
}
