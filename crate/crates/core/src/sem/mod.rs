//! Structure enhancement: one-hop candidate edges, scoring by the pretrained
//! snapshots, score and variance filtering, and edge-set expansion.

mod hard_negative;

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::dataset::{Dataset, LabeledPair};
use crate::encoder::{score_pairs, NormalizedAdjacency};
use crate::error::{Error, Result};
use crate::graph::{Graph, NodePair};
use crate::trainer::{SnapshotSet, SNAPSHOT_COUNT};

pub use hard_negative::{DiscardDirection, HardNegativeConfig, HardNegativeExperiment, HardNegativeRow};

/// Candidate edges that would add a common neighbor to some sample: for a
/// sample `(u, v)`, every `(u, i)` with `i` a neighbor of `v` and every
/// `(v, j)` with `j` a neighbor of `u`. Self-loops and existing edges are
/// excluded. With `tail_only`, samples that already share a neighbor are
/// skipped. The result is sorted and deduplicated.
pub fn generate_candidates(g: &Graph, samples: &[LabeledPair], tail_only: bool) -> Result<Vec<NodePair>> {
    let mut out = BTreeSet::new();
    for s in samples {
        let (u, v) = (s.pair.u(), s.pair.v());
        let nu = g.try_neighbors(u)?;
        let nv = g.try_neighbors(v)?;
        if tail_only && g.common_neighbor_count(&s.pair)? > 0 {
            continue;
        }
        for (anchor, others) in [(u, nv), (v, nu)] {
            for &other in others {
                if other != anchor && !g.has_edge(anchor, other) {
                    out.insert(NodePair::new(anchor, other)?);
                }
            }
        }
    }
    Ok(out.into_iter().collect())
}

/// `std / mean` of a score series, with the population standard deviation.
pub fn normalized_variance(scores: &[f64]) -> Result<f64> {
    if scores.is_empty() {
        return Err(Error::InvalidInput("empty score series".into()));
    }
    let n = scores.len() as f64;
    let mean = scores.iter().sum::<f64>() / n;
    if !(mean > 0.0) {
        return Err(Error::InvalidInput(format!("score mean {mean} is not positive")));
    }
    if scores.iter().all(|&s| s == scores[0]) {
        return Ok(0.0);
    }
    let var = scores.iter().map(|s| (s - mean) * (s - mean)).sum::<f64>() / n;
    Ok(var.sqrt() / mean)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CandidateEdge {
    pub pair: NodePair,
    /// Scores under each snapshot, oldest first; the last is the final model.
    pub scores: [f64; SNAPSHOT_COUNT],
    pub mean: f64,
    pub norm_variance: f64,
}

impl CandidateEdge {
    pub fn from_scores(pair: NodePair, scores: [f64; SNAPSHOT_COUNT]) -> Result<CandidateEdge> {
        Ok(CandidateEdge {
            pair,
            scores,
            mean: scores.iter().sum::<f64>() / SNAPSHOT_COUNT as f64,
            norm_variance: normalized_variance(&scores)?,
        })
    }

    pub fn final_score(&self) -> f64 {
        self.scores[SNAPSHOT_COUNT - 1]
    }
}

/// Scores every candidate under each snapshot, passing messages over
/// `dataset.graph`.
pub fn score_candidates(snapshots: &SnapshotSet, dataset: &Dataset, candidates: &[NodePair]) -> Result<Vec<CandidateEdge>> {
    let adj = NormalizedAdjacency::new(&dataset.graph);
    let per_snapshot = snapshots
        .params()
        .iter()
        .map(|p| score_pairs(p, &dataset.features, &adj, candidates))
        .collect::<Result<Vec<_>>>()?;
    candidates
        .iter()
        .enumerate()
        .map(|(i, &pair)| CandidateEdge::from_scores(pair, std::array::from_fn(|t| per_snapshot[t][i])))
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TauSelection {
    pub tau: f64,
    /// Youden's J at `tau`; non-positive values mean the scores carry no
    /// signal on the validation split.
    pub youden: f64,
}

/// Threshold maximizing `TPR - FPR` when predicting positive for
/// `score >= tau`, over every distinct score. Ties go to the higher
/// threshold.
pub fn select_tau(scores: &[f64], labels: &[bool]) -> Result<TauSelection> {
    if scores.len() != labels.len() {
        return Err(Error::Shape(format!("{} scores for {} labels", scores.len(), labels.len())));
    }
    let pos = labels.iter().filter(|&&l| l).count();
    let neg = labels.len() - pos;
    if pos == 0 || neg == 0 {
        return Err(Error::InvalidInput("threshold selection needs both classes".into()));
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));
    let mut best = TauSelection { tau: f64::NAN, youden: f64::NEG_INFINITY };
    let (mut tp, mut fp) = (0usize, 0usize);
    let mut i = 0;
    while i < order.len() {
        let t = scores[order[i]];
        while i < order.len() && scores[order[i]] == t {
            if labels[order[i]] {
                tp += 1;
            } else {
                fp += 1;
            }
            i += 1;
        }
        let j = tp as f64 / pos as f64 - fp as f64 / neg as f64;
        // descending sweep: strict improvement keeps the higher threshold
        if j > best.youden {
            best = TauSelection { tau: t, youden: j };
        }
    }
    if best.youden <= 0.0 {
        log::warn!("validation threshold has Youden's J = {}", best.youden);
    }
    Ok(best)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FilterConfig {
    pub tau: f64,
    /// Fraction of the score-filtered set kept by the variance filter.
    pub k_percent: f64,
    pub tail_only: bool,
}

impl FilterConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.k_percent > 0.0 && self.k_percent <= 1.0) {
            return Err(Error::Config(format!("k_percent {} outside (0, 1]", self.k_percent)));
        }
        if !(0.0..=1.0).contains(&self.tau) {
            return Err(Error::Config(format!("tau {} outside [0, 1]", self.tau)));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct FilterOutcome {
    /// Kept edges, lowest variance first.
    pub selected: Vec<CandidateEdge>,
    pub num_candidates: usize,
    pub num_score_filtered: usize,
    /// Largest normalized variance among the kept edges.
    pub tau_svf: Option<f64>,
}

impl FilterOutcome {
    pub fn pairs(&self) -> Vec<NodePair> {
        self.selected.iter().map(|c| c.pair).collect()
    }
}

/// Keeps candidates whose final score reaches `tau`, then the
/// `ceil(k * |kept|)` of those with the smallest normalized variance (ties:
/// higher mean first, then pair order).
pub fn filter(candidates: &[CandidateEdge], cfg: &FilterConfig) -> Result<FilterOutcome> {
    cfg.validate()?;
    let mut above: Vec<&CandidateEdge> = candidates.iter().filter(|c| c.final_score() >= cfg.tau).collect();
    let num_score_filtered = above.len();
    above.sort_by(|a, b| {
        a.norm_variance
            .total_cmp(&b.norm_variance)
            .then(b.mean.total_cmp(&a.mean))
            .then(a.pair.cmp(&b.pair))
    });
    let keep = (cfg.k_percent * num_score_filtered as f64 - 1e-9).ceil().max(0.0) as usize;
    let selected: Vec<CandidateEdge> = above.into_iter().take(keep).cloned().collect();
    Ok(FilterOutcome {
        tau_svf: selected.last().map(|c| c.norm_variance),
        selected,
        num_candidates: candidates.len(),
        num_score_filtered,
    })
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct AugmentStats {
    pub added: usize,
    pub dropped_leaks: usize,
    pub already_present: usize,
}

/// Adds `extra` to the message-passing graph. Edges equal to a validation or
/// test positive are dropped and counted; labeled pairs are untouched.
pub fn augment(dataset: &Dataset, extra: &[NodePair]) -> Result<(Dataset, AugmentStats)> {
    let held_out = dataset.held_out_positives();
    let mut stats = AugmentStats::default();
    let mut kept = Vec::with_capacity(extra.len());
    for &p in extra {
        if held_out.contains(&p) {
            stats.dropped_leaks += 1;
        } else if dataset.graph.contains(&p) {
            stats.already_present += 1;
        } else {
            kept.push(p);
        }
    }
    let graph = dataset.graph.merge_edges(&kept)?;
    stats.added = graph.num_edges() - dataset.graph.num_edges();
    Ok((Dataset { graph, ..dataset.clone() }, stats))
}

/// Summary persisted next to the augmented edge list.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SemSidecar {
    pub tau: f64,
    pub tau_svf: Option<f64>,
    pub k: f64,
    pub tail_only: bool,
    pub num_candidates: usize,
    pub num_score_filtered: usize,
    pub num_selected: usize,
    pub dropped_leaks: usize,
    pub added: usize,
}

impl SemSidecar {
    pub fn new(cfg: &FilterConfig, outcome: &FilterOutcome, stats: &AugmentStats) -> SemSidecar {
        SemSidecar {
            tau: cfg.tau,
            tau_svf: outcome.tau_svf,
            k: cfg.k_percent,
            tail_only: cfg.tail_only,
            num_candidates: outcome.num_candidates,
            num_score_filtered: outcome.num_score_filtered,
            num_selected: outcome.selected.len(),
            dropped_leaks: stats.dropped_leaks,
            added: stats.added,
        }
    }
}
