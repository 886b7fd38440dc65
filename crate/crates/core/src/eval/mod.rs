//! Link-prediction metrics and head/tail reports.

mod buckets;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::dataset::LabeledPair;
use crate::error::{Error, Result};
use crate::graph::Graph;

pub use buckets::{bucket_analysis, bucket_sizes, cn_distribution, BucketRow, BucketTable, CnDistribution, Measure};

/// Probability threshold for the accuracy metrics.
pub const DEFAULT_THRESHOLD: f64 = 0.5;

fn check_lengths(scores: &[f64], labels: &[bool]) -> Result<()> {
    if scores.len() != labels.len() {
        return Err(Error::Shape(format!(
            "{} scores for {} labels",
            scores.len(),
            labels.len()
        )));
    }
    Ok(())
}

/// Area under the ROC curve by the Mann-Whitney rank statistic; tied scores
/// get their average rank, so a tie between classes counts one half.
pub fn auc(scores: &[f64], labels: &[bool]) -> Result<f64> {
    check_lengths(scores, labels)?;
    let pos = labels.iter().filter(|&&l| l).count();
    let neg = labels.len() - pos;
    if pos == 0 || neg == 0 {
        return Err(Error::InvalidInput("AUC needs both classes".into()));
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    let mut rank_sum = 0.0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && scores[order[j + 1]] == scores[order[i]] {
            j += 1;
        }
        // ranks are 1-based; the tie group i..=j shares the mean rank
        let mean_rank = (i + j) as f64 / 2.0 + 1.0;
        let group_pos = order[i..=j].iter().filter(|&&k| labels[k]).count();
        rank_sum += mean_rank * group_pos as f64;
        i = j + 1;
    }
    let pos = pos as f64;
    Ok((rank_sum - pos * (pos + 1.0) / 2.0) / (pos * neg as f64))
}

/// Fraction of positives scoring strictly above the `k`-th highest negative.
pub fn hits_at_k(pos_scores: &[f64], neg_scores: &[f64], k: usize) -> Result<f64> {
    if k == 0 || neg_scores.len() < k {
        return Err(Error::InvalidInput(format!(
            "Hits@{k} needs at least {k} negatives, got {}",
            neg_scores.len()
        )));
    }
    if pos_scores.is_empty() {
        return Err(Error::InvalidInput("Hits@K needs positives".into()));
    }
    let mut neg = neg_scores.to_vec();
    neg.sort_by(|a, b| b.total_cmp(a));
    let cut = neg[k - 1];
    let hits = pos_scores.iter().filter(|&&s| s > cut).count();
    Ok(hits as f64 / pos_scores.len() as f64)
}

/// Fraction of pairs whose thresholded prediction `score >= threshold`
/// matches the label.
pub fn accuracy(scores: &[f64], labels: &[bool], threshold: f64) -> Result<f64> {
    check_lengths(scores, labels)?;
    if scores.is_empty() {
        return Err(Error::InvalidInput("accuracy of an empty set".into()));
    }
    let correct = scores
        .iter()
        .zip(labels)
        .filter(|(&s, &l)| (s >= threshold) == l)
        .count();
    Ok(correct as f64 / scores.len() as f64)
}

/// Population variance of the two group accuracies.
pub fn bias(acc_head: f64, acc_tail: f64) -> f64 {
    let half = (acc_head - acc_tail) / 2.0;
    half * half
}

/// Indices of head pairs (at least one common neighbor in `g`) and tail
/// pairs (none).
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct HeadTail {
    pub head: Vec<usize>,
    pub tail: Vec<usize>,
}

/// `g` must be the training graph before any augmentation.
pub fn head_tail_split(pairs: &[LabeledPair], g: &Graph) -> Result<HeadTail> {
    let mut out = HeadTail::default();
    for (i, p) in pairs.iter().enumerate() {
        if g.common_neighbor_count(&p.pair)? >= 1 {
            out.head.push(i);
        } else {
            out.tail.push(i);
        }
    }
    Ok(out)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub auc: f64,
    pub hits_at_k: BTreeMap<usize, f64>,
    pub accuracy: f64,
    /// `None` when the group is empty.
    pub acc_head: Option<f64>,
    pub acc_tail: Option<f64>,
    pub acc_mean: Option<f64>,
    pub bias: Option<f64>,
    pub num_head: usize,
    pub num_tail: usize,
}

/// Full report for scored pairs. Head/tail membership comes from
/// `head_graph`; Hits@K entries needing more negatives than available are
/// skipped.
pub fn evaluate(pairs: &[LabeledPair], scores: &[f64], head_graph: &Graph, ks: &[usize]) -> Result<MetricsReport> {
    let labels: Vec<bool> = pairs.iter().map(|p| p.label).collect();
    check_lengths(scores, &labels)?;
    let pos: Vec<f64> = scores.iter().zip(&labels).filter(|(_, &l)| l).map(|(&s, _)| s).collect();
    let neg: Vec<f64> = scores.iter().zip(&labels).filter(|(_, &l)| !l).map(|(&s, _)| s).collect();
    let mut hits = BTreeMap::new();
    for &k in ks {
        if k >= 1 && k <= neg.len() {
            hits.insert(k, hits_at_k(&pos, &neg, k)?);
        }
    }
    let split = head_tail_split(pairs, head_graph)?;
    let group_acc = |idx: &[usize]| -> Result<Option<f64>> {
        if idx.is_empty() {
            return Ok(None);
        }
        let s: Vec<f64> = idx.iter().map(|&i| scores[i]).collect();
        let l: Vec<bool> = idx.iter().map(|&i| labels[i]).collect();
        accuracy(&s, &l, DEFAULT_THRESHOLD).map(Some)
    };
    let acc_head = group_acc(&split.head)?;
    let acc_tail = group_acc(&split.tail)?;
    let (acc_mean, group_bias) = match (acc_head, acc_tail) {
        (Some(h), Some(t)) => (Some((h + t) / 2.0), Some(bias(h, t))),
        _ => (None, None),
    };
    Ok(MetricsReport {
        auc: auc(scores, &labels)?,
        hits_at_k: hits,
        accuracy: accuracy(scores, &labels, DEFAULT_THRESHOLD)?,
        acc_head,
        acc_tail,
        acc_mean,
        bias: group_bias,
        num_head: split.head.len(),
        num_tail: split.tail.len(),
    })
}
