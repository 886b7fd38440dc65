use std::collections::VecDeque;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{normalized_variance, select_tau};
use crate::dataset::Dataset;
use crate::encoder::{forward, pair_forward, ModelParams, NormalizedAdjacency};
use crate::error::{Error, Result};
use crate::graph::NodePair;
use crate::seed::stage_rng;
use crate::trainer::SNAPSHOT_COUNT;

/// Which end of the variance ranking the diagnostic discards.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DiscardDirection {
    Lowest,
    Highest,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HardNegativeConfig {
    pub levels: Vec<usize>,
    pub discard_fraction: f64,
    pub direction: DiscardDirection,
    /// Fixed acceptance threshold; `None` picks it on the validation split
    /// at every epoch.
    pub tau: Option<f64>,
    pub seed: u64,
}

impl Default for HardNegativeConfig {
    fn default() -> Self {
        HardNegativeConfig {
            levels: vec![1, 2, 4, 8],
            discard_fraction: 0.6,
            direction: DiscardDirection::Lowest,
            tau: None,
            seed: 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HardNegativeRow {
    pub epoch: usize,
    pub difficulty: usize,
    pub r_ler_raw: f64,
    pub r_ler_after_variance_filter: f64,
}

impl HardNegativeRow {
    pub fn csv_header() -> &'static str {
        "epoch,difficulty,R_ler_raw,R_ler_after_variance_filter"
    }

    pub fn csv_line(&self) -> String {
        format!(
            "{},{},{},{}",
            self.epoch, self.difficulty, self.r_ler_raw, self.r_ler_after_variance_filter
        )
    }
}

struct Level {
    difficulty: usize,
    /// `difficulty` candidate pairs per training positive, flattened.
    pairs: Vec<NodePair>,
    /// Scores of `pairs` over the trailing epochs.
    window: VecDeque<Vec<f64>>,
}

/// Label-error-rate diagnostic for negatives of increasing difficulty.
///
/// For each level `s`, every training positive `(u, v)` gets `s` random
/// nodes `j` that are not neighbors of `u` in the full graph. At each
/// observed epoch the highest-scoring `(u, j)` per positive forms the hard
/// negative set, and the rate of those scoring at least the threshold is
/// reported, both raw and after discarding a fraction ranked by normalized
/// variance over the last five epochs.
pub struct HardNegativeExperiment<'a> {
    dataset: &'a Dataset,
    adj: NormalizedAdjacency,
    cfg: HardNegativeConfig,
    levels: Vec<Level>,
    num_positives: usize,
}

impl<'a> HardNegativeExperiment<'a> {
    pub fn new(dataset: &'a Dataset, cfg: HardNegativeConfig) -> Result<Self> {
        if cfg.levels.is_empty() || cfg.levels.contains(&0) {
            return Err(Error::Config("difficulty levels must be positive".into()));
        }
        if !(0.0..1.0).contains(&cfg.discard_fraction) {
            return Err(Error::Config(format!("discard fraction {} outside [0, 1)", cfg.discard_fraction)));
        }
        let full = &dataset.full_graph;
        let n = full.num_nodes();
        let positives: Vec<NodePair> = dataset.train_positives().collect();
        let mut levels = Vec::with_capacity(cfg.levels.len());
        for &s in &cfg.levels {
            let mut rng = stage_rng(cfg.seed, &format!("hard-negatives/{s}"));
            let mut pairs = Vec::with_capacity(positives.len() * s);
            for p in &positives {
                let u = p.u();
                let available = n - 1 - full.degree(u);
                if available < s {
                    return Err(Error::InsufficientNonEdges { requested: s, available });
                }
                let mut chosen: Vec<usize> = Vec::with_capacity(s);
                while chosen.len() < s {
                    let j = rng.random_range(0..n);
                    if j != u && !full.has_edge(u, j) && !chosen.contains(&j) {
                        chosen.push(j);
                    }
                }
                pairs.extend(chosen.into_iter().map(|j| NodePair::new(u, j).expect("j != u")));
            }
            levels.push(Level { difficulty: s, pairs, window: VecDeque::new() });
        }
        Ok(HardNegativeExperiment {
            dataset,
            adj: NormalizedAdjacency::new(&dataset.graph),
            cfg,
            levels,
            num_positives: positives.len(),
        })
    }

    /// Scores every level under `params`. Rows are produced once five epochs
    /// have been observed.
    pub fn observe(&mut self, epoch: usize, params: &ModelParams) -> Result<Vec<HardNegativeRow>> {
        let fwd = forward(params, &self.dataset.features, &self.adj)?;
        let h = fwd.embeddings();
        let tau = match self.cfg.tau {
            Some(t) => t,
            None => {
                let scores: Vec<f64> = self.dataset.val.iter().map(|p| pair_forward(params, h, &p.pair).p).collect();
                let labels: Vec<bool> = self.dataset.val.iter().map(|p| p.label).collect();
                select_tau(&scores, &labels)?.tau
            }
        };
        let mut rows = Vec::new();
        for level in &mut self.levels {
            let scores: Vec<f64> = level.pairs.iter().map(|p| pair_forward(params, h, p).p).collect();
            if level.window.len() == SNAPSHOT_COUNT {
                level.window.pop_front();
            }
            level.window.push_back(scores);
            if level.window.len() < SNAPSHOT_COUNT {
                continue;
            }
            let current = level.window.back().expect("window is full");
            let s = level.difficulty;
            // hardest candidate per positive at this epoch
            let hardest: Vec<usize> = (0..self.num_positives)
                .map(|i| {
                    (i * s..(i + 1) * s)
                        .max_by(|&a, &b| current[a].total_cmp(&current[b]).then(b.cmp(&a)))
                        .expect("s >= 1")
                })
                .collect();
            let above = |idx: &[usize]| idx.iter().filter(|&&k| current[k] >= tau).count();
            let raw = above(&hardest) as f64 / hardest.len() as f64;

            let mut ranked = hardest
                .iter()
                .map(|&k| {
                    let series: Vec<f64> = level.window.iter().map(|w| w[k]).collect();
                    normalized_variance(&series).map(|v| (v, k))
                })
                .collect::<Result<Vec<_>>>()?;
            ranked.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
            let discard = (self.cfg.discard_fraction * ranked.len() as f64).floor() as usize;
            let kept: Vec<usize> = match self.cfg.direction {
                DiscardDirection::Lowest => ranked[discard..].iter().map(|r| r.1).collect(),
                DiscardDirection::Highest => ranked[..ranked.len() - discard].iter().map(|r| r.1).collect(),
            };
            let filtered = if kept.is_empty() {
                0.0
            } else {
                above(&kept) as f64 / kept.len() as f64
            };
            rows.push(HardNegativeRow {
                epoch,
                difficulty: s,
                r_ler_raw: raw,
                r_ler_after_variance_filter: filtered,
            });
        }
        Ok(rows)
    }
}
