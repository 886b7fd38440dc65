//! Synthetic graphs: a stochastic block model with a ground-truth plausibility
//! oracle, and a citation-network generator shaped like Cora.

use std::collections::HashSet;

use ndarray::Array2;
use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::Normal;
use serde::{Deserialize, Serialize};

use super::split::{split_dataset, SplitConfig};
use super::Dataset;
use crate::encoder::Features;
use crate::error::{Error, Result};
use crate::graph::NodePair;
use crate::seed::stage_rng;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SbmConfig {
    pub num_blocks: usize,
    pub block_size: usize,
    pub p_in: f64,
    pub p_out: f64,
    pub feature_dim: usize,
    /// Standard deviation of the Gaussian noise added to every feature.
    pub noise_std: f64,
    pub seed: u64,
}

impl Default for SbmConfig {
    fn default() -> Self {
        SbmConfig {
            num_blocks: 4,
            block_size: 50,
            p_in: 0.15,
            p_out: 0.01,
            feature_dim: 16,
            noise_std: 1.0,
            seed: 0,
        }
    }
}

impl SbmConfig {
    fn validate(&self) -> Result<()> {
        if self.num_blocks == 0 || self.block_size == 0 {
            return Err(Error::Config("SBM needs at least one non-empty block".into()));
        }
        if self.feature_dim < self.num_blocks {
            return Err(Error::Config(format!(
                "feature_dim {} cannot hold a one-hot over {} blocks",
                self.feature_dim, self.num_blocks
            )));
        }
        if !(0.0 <= self.p_out && self.p_out < self.p_in && self.p_in <= 1.0) {
            return Err(Error::Config(format!(
                "SBM probabilities must satisfy 0 <= p_out < p_in <= 1 (got {}, {})",
                self.p_out, self.p_in
            )));
        }
        if !(self.noise_std >= 0.0) {
            return Err(Error::Config("noise_std must be non-negative".into()));
        }
        Ok(())
    }
}

/// An unsplit SBM draw.
#[derive(Clone, Debug)]
pub struct SbmGraph {
    pub num_nodes: usize,
    pub edges: Vec<NodePair>,
    pub blocks: Vec<usize>,
    pub features: Array2<f64>,
}

pub fn sbm_graph(cfg: &SbmConfig) -> Result<SbmGraph> {
    cfg.validate()?;
    let n = cfg.num_blocks * cfg.block_size;
    let blocks: Vec<usize> = (0..n).map(|v| v / cfg.block_size).collect();
    let mut rng = stage_rng(cfg.seed, "sbm-edges");
    let mut edges = Vec::new();
    for u in 0..n {
        for v in (u + 1)..n {
            let p = if blocks[u] == blocks[v] { cfg.p_in } else { cfg.p_out };
            if rng.random::<f64>() < p {
                edges.push(NodePair::new(u, v)?);
            }
        }
    }
    let mut frng = stage_rng(cfg.seed, "sbm-features");
    let mut features = Array2::zeros((n, cfg.feature_dim));
    if cfg.noise_std > 0.0 {
        let normal = Normal::new(0.0, cfg.noise_std).map_err(|e| Error::Config(e.to_string()))?;
        features.mapv_inplace(|_: f64| normal.sample(&mut frng));
    }
    for v in 0..n {
        features[[v, blocks[v]]] += 1.0;
    }
    Ok(SbmGraph {
        num_nodes: n,
        edges,
        blocks,
        features,
    })
}

/// A split SBM dataset that remembers block membership.
#[derive(Clone, Debug)]
pub struct SbmDataset {
    pub dataset: Dataset,
    pub blocks: Vec<usize>,
}

impl SbmDataset {
    /// Ground-truth plausibility: both endpoints lie in the same block.
    pub fn is_plausible(&self, p: &NodePair) -> bool {
        self.blocks[p.u()] == self.blocks[p.v()]
    }
}

pub fn generate_sbm(cfg: &SbmConfig, split: &SplitConfig) -> Result<SbmDataset> {
    let g = sbm_graph(cfg)?;
    let dataset = split_dataset(g.num_nodes, &g.edges, Features::new(g.features), split)?;
    Ok(SbmDataset {
        dataset,
        blocks: g.blocks,
    })
}

/// Parameters of the citation-like generator. Defaults match Cora's node,
/// edge, class and vocabulary sizes.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CitationConfig {
    pub class_sizes: Vec<usize>,
    pub num_edges: usize,
    pub feature_dim: usize,
    pub words_per_node: usize,
    /// Size of each class's topical vocabulary.
    pub topic_words: usize,
    /// Probability that a word is drawn from the node's class vocabulary.
    pub topic_prob: f64,
    /// Probability that a non-closure edge stays inside the source's class.
    pub homophily: f64,
    /// Probability that an edge closes a triangle through an existing neighbor.
    pub closure: f64,
    /// Tail exponent of the Pareto node-activity weights.
    pub degree_exponent: f64,
    pub seed: u64,
}

impl Default for CitationConfig {
    fn default() -> Self {
        CitationConfig {
            class_sizes: vec![351, 217, 418, 818, 426, 298, 180],
            num_edges: 5278,
            feature_dim: 1433,
            words_per_node: 18,
            topic_words: 60,
            topic_prob: 0.9,
            homophily: 0.8,
            closure: 0.5,
            degree_exponent: 2.5,
            seed: 0,
        }
    }
}

#[derive(Clone, Debug)]
pub struct CitationGraph {
    pub num_nodes: usize,
    pub edges: Vec<NodePair>,
    pub classes: Vec<usize>,
    pub features: Array2<f64>,
}

/// Degree-heterogeneous, homophilous graph with triadic closure and sparse
/// bag-of-words features. Every node has at least one edge.
pub fn citation_like(cfg: &CitationConfig) -> Result<CitationGraph> {
    let n: usize = cfg.class_sizes.iter().sum();
    if n < 3 || cfg.class_sizes.iter().any(|&s| s == 0) {
        return Err(Error::Config("citation generator needs non-empty classes".into()));
    }
    if cfg.num_edges < n / 2 || cfg.num_edges > n * (n - 1) / 4 {
        return Err(Error::Config(format!("edge count {} unreachable for {n} nodes", cfg.num_edges)));
    }
    if cfg.topic_words == 0 || cfg.topic_words > cfg.feature_dim || cfg.words_per_node > cfg.feature_dim {
        return Err(Error::Config("vocabulary sizes inconsistent".into()));
    }
    let mut rng = stage_rng(cfg.seed, "citation-graph");

    let mut classes: Vec<usize> = cfg
        .class_sizes
        .iter()
        .enumerate()
        .flat_map(|(c, &s)| std::iter::repeat_n(c, s))
        .collect();
    classes.shuffle(&mut rng);
    let members: Vec<Vec<usize>> = (0..cfg.class_sizes.len())
        .map(|c| (0..n).filter(|&v| classes[v] == c).collect())
        .collect();

    let shape = 1.0 / (cfg.degree_exponent - 1.0);
    let weights: Vec<f64> = (0..n)
        .map(|_| (1.0 - rng.random::<f64>()).powf(-shape).min(50.0))
        .collect();
    let global = WeightedIndex::new(&weights).map_err(|e| Error::Config(e.to_string()))?;
    let per_class: Vec<WeightedIndex<f64>> = members
        .iter()
        .map(|m| WeightedIndex::new(m.iter().map(|&v| weights[v])))
        .collect::<std::result::Result<_, _>>()
        .map_err(|e| Error::Config(e.to_string()))?;

    let mut adj: Vec<Vec<usize>> = vec![Vec::new(); n];
    let mut seen: HashSet<NodePair> = HashSet::new();
    let mut add = |a: usize, b: usize, adj: &mut Vec<Vec<usize>>| -> bool {
        if a == b {
            return false;
        }
        let p = NodePair::new(a, b).expect("distinct");
        if !seen.insert(p) {
            return false;
        }
        adj[a].push(b);
        adj[b].push(a);
        true
    };
    let num_classes = cfg.class_sizes.len();
    let pick_target = |u: usize, rng: &mut rand_chacha::ChaCha8Rng| -> usize {
        let class = if num_classes == 1 || rng.random::<f64>() < cfg.homophily {
            classes[u]
        } else {
            let mut c = rng.random_range(0..num_classes - 1);
            if c >= classes[u] {
                c += 1;
            }
            c
        };
        members[class][per_class[class].sample(rng)]
    };

    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng);
    let mut count = 0;
    for &u in &order {
        if !adj[u].is_empty() {
            continue;
        }
        loop {
            let v = pick_target(u, &mut rng);
            if add(u, v, &mut adj) {
                count += 1;
                break;
            }
        }
    }
    while count < cfg.num_edges {
        let u = global.sample(&mut rng);
        let v = if !adj[u].is_empty() && rng.random::<f64>() < cfg.closure {
            let w = adj[u][rng.random_range(0..adj[u].len())];
            adj[w][rng.random_range(0..adj[w].len())]
        } else {
            pick_target(u, &mut rng)
        };
        if add(u, v, &mut adj) {
            count += 1;
        }
    }
    let mut edges: Vec<NodePair> = seen.into_iter().collect();
    edges.sort_unstable();

    let mut frng = stage_rng(cfg.seed, "citation-features");
    let topics: Vec<Vec<usize>> = (0..num_classes)
        .map(|_| {
            let mut vocab: Vec<usize> = (0..cfg.feature_dim).collect();
            vocab.shuffle(&mut frng);
            vocab.truncate(cfg.topic_words);
            vocab
        })
        .collect();
    let mut features = Array2::zeros((n, cfg.feature_dim));
    for v in 0..n {
        let mut placed = 0;
        while placed < cfg.words_per_node {
            let word = if frng.random::<f64>() < cfg.topic_prob {
                topics[classes[v]][frng.random_range(0..cfg.topic_words)]
            } else {
                frng.random_range(0..cfg.feature_dim)
            };
            if features[[v, word]] == 0.0 {
                features[[v, word]] = 1.0;
                placed += 1;
            }
        }
    }

    Ok(CitationGraph {
        num_nodes: n,
        edges,
        classes,
        features,
    })
}
