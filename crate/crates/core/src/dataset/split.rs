use std::collections::HashSet;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{Dataset, LabeledPair};
use crate::encoder::Features;
use crate::error::{Error, Result};
use crate::graph::{Graph, NodePair};
use crate::seed::stage_rng;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SplitConfig {
    pub train_frac: f64,
    pub val_frac: f64,
    pub seed: u64,
    /// Negatives per positive in every split.
    pub neg_ratio: f64,
}

impl Default for SplitConfig {
    fn default() -> Self {
        SplitConfig {
            train_frac: 0.85,
            val_frac: 0.05,
            seed: 0,
            neg_ratio: 1.0,
        }
    }
}

impl SplitConfig {
    pub fn validate(&self) -> Result<()> {
        let ok = self.train_frac > 0.0
            && self.val_frac > 0.0
            && self.train_frac + self.val_frac <= 1.0
            && self.neg_ratio > 0.0
            && self.neg_ratio.is_finite();
        if ok {
            Ok(())
        } else {
            Err(Error::Config(format!(
                "split fractions must be positive with train+val <= 1 (got train={}, val={}, neg_ratio={})",
                self.train_frac, self.val_frac, self.neg_ratio
            )))
        }
    }

    /// Positive counts `(train, val, test)` for a graph with `num_edges` edges.
    pub fn counts(&self, num_edges: usize) -> (usize, usize, usize) {
        // the epsilon absorbs representation error such as 0.85 * 20 = 16.999...
        let floor = |frac: f64| ((frac * num_edges as f64) + 1e-9).floor() as usize;
        let train = floor(self.train_frac).min(num_edges);
        let val = floor(self.val_frac).min(num_edges - train);
        (train, val, num_edges - train - val)
    }

    fn negatives_for(&self, positives: usize) -> usize {
        (self.neg_ratio * positives as f64).round() as usize
    }
}

/// Splits the edges into train/val/test positives and attaches sampled
/// negatives.
///
/// Edges are canonicalized and sorted before the seeded shuffle, so the
/// result depends only on the edge set, the features and `cfg`.
pub fn split_dataset(
    num_nodes: usize,
    edges: &[NodePair],
    features: Features,
    cfg: &SplitConfig,
) -> Result<Dataset> {
    cfg.validate()?;
    if features.rows() != num_nodes {
        return Err(Error::Shape(format!(
            "feature rows {} != node count {num_nodes}",
            features.rows()
        )));
    }
    let full_graph = Graph::build(num_nodes, edges)?;
    let mut all: Vec<NodePair> = full_graph.edges().collect();
    let mut rng = stage_rng(cfg.seed, "split");
    all.shuffle(&mut rng);

    let (n_train, n_val, n_test) = cfg.counts(all.len());
    if n_train == 0 || n_val == 0 || n_test == 0 {
        return Err(Error::InvalidInput(format!(
            "graph with {} edges yields an empty split ({n_train}/{n_val}/{n_test})",
            all.len()
        )));
    }
    let train_pos = &all[..n_train];
    let val_pos = &all[n_train..n_train + n_val];
    let test_pos = &all[n_train + n_val..];

    let counts = [
        cfg.negatives_for(n_train),
        cfg.negatives_for(n_val),
        cfg.negatives_for(n_test),
    ];
    let mut neg_rng = stage_rng(cfg.seed, "split-negatives");
    let negatives = sample_non_edges(
        &full_graph,
        counts.iter().sum(),
        &HashSet::new(),
        &mut neg_rng,
    )?;
    let (train_neg, rest) = negatives.split_at(counts[0]);
    let (val_neg, test_neg) = rest.split_at(counts[1]);

    let label = |pos: &[NodePair], neg: &[NodePair]| -> Vec<LabeledPair> {
        pos.iter()
            .map(|&p| LabeledPair::positive(p))
            .chain(neg.iter().map(|&p| LabeledPair::negative(p)))
            .collect()
    };

    Ok(Dataset {
        graph: Graph::build(num_nodes, train_pos)?,
        full_graph,
        features,
        train: label(train_pos, train_neg),
        val: label(val_pos, val_neg),
        test: label(test_pos, test_neg),
    })
}

/// Samples `count` distinct node pairs that are not edges of `graph` and not
/// in `exclude`. Order of the returned pairs follows the sampling order.
pub fn sample_non_edges<R: Rng>(
    graph: &Graph,
    count: usize,
    exclude: &HashSet<NodePair>,
    rng: &mut R,
) -> Result<Vec<NodePair>> {
    let n = graph.num_nodes();
    let total_pairs = n * n.saturating_sub(1) / 2;
    let excluded_non_edges = exclude.iter().filter(|p| !graph.contains(p)).count();
    let available = total_pairs - graph.num_edges() - excluded_non_edges;
    if count > available {
        return Err(Error::InsufficientNonEdges {
            requested: count,
            available,
        });
    }
    if count == 0 {
        return Ok(Vec::new());
    }

    if count * 2 > available {
        // dense regime: enumerate and shuffle
        let mut pool: Vec<NodePair> = (0..n)
            .flat_map(|u| ((u + 1)..n).map(move |v| (u, v)))
            .filter(|&(u, v)| !graph.has_edge(u, v))
            .map(|(u, v)| NodePair::new(u, v).expect("u < v"))
            .filter(|p| !exclude.contains(p))
            .collect();
        pool.shuffle(rng);
        pool.truncate(count);
        return Ok(pool);
    }

    let mut seen = HashSet::with_capacity(count);
    let mut out = Vec::with_capacity(count);
    while out.len() < count {
        let a = rng.random_range(0..n);
        let b = rng.random_range(0..n);
        if a == b || graph.has_edge(a, b) {
            continue;
        }
        let p = NodePair::new(a, b)?;
        if exclude.contains(&p) || !seen.insert(p) {
            continue;
        }
        out.push(p);
    }
    Ok(out)
}

/// Keeps `ceil(ratio * |train positives|)` training positives (and the same
/// fraction of training negatives) chosen uniformly, rebuilding the training
/// graph. Validation and test splits are untouched.
pub fn downsample_edges(dataset: &Dataset, ratio: f64, seed: u64) -> Result<Dataset> {
    if !(ratio > 0.0 && ratio <= 1.0) {
        return Err(Error::Config(format!("downsampling ratio {ratio} outside (0, 1]")));
    }
    let positives: Vec<LabeledPair> = dataset.train.iter().copied().filter(|p| p.label).collect();
    let negatives: Vec<LabeledPair> = dataset.train.iter().copied().filter(|p| !p.label).collect();
    let mut rng = stage_rng(seed, "downsample");

    let mut keep = |items: &[LabeledPair]| -> Vec<LabeledPair> {
        let target = (ratio * items.len() as f64 - 1e-9).ceil() as usize;
        let mut idx: Vec<usize> = (0..items.len()).collect();
        idx.shuffle(&mut rng);
        idx.truncate(target);
        idx.sort_unstable();
        idx.into_iter().map(|i| items[i]).collect()
    };
    let kept_pos = keep(&positives);
    let kept_neg = keep(&negatives);

    let graph_edges: Vec<NodePair> = kept_pos.iter().map(|p| p.pair).collect();
    let mut train = kept_pos;
    train.extend(kept_neg);
    Ok(Dataset {
        graph: Graph::build(dataset.num_nodes(), &graph_edges)?,
        full_graph: dataset.full_graph.clone(),
        features: dataset.features.clone(),
        train,
        val: dataset.val.clone(),
        test: dataset.test.clone(),
    })
}
