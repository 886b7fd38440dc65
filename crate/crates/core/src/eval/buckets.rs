use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::{accuracy, DEFAULT_THRESHOLD};
use crate::dataset::LabeledPair;
use crate::error::{Error, Result};
use crate::graph::Graph;

pub const NUM_BUCKETS: usize = 10;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Measure {
    DegreePair,
    CommonNeighbors,
}

impl Measure {
    pub fn of(self, g: &Graph, p: &LabeledPair) -> Result<usize> {
        match self {
            Measure::DegreePair => g.degree_pair(&p.pair),
            Measure::CommonNeighbors => g.common_neighbor_count(&p.pair),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Measure::DegreePair => "degree_pair",
            Measure::CommonNeighbors => "common_neighbors",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BucketRow {
    pub bucket: usize,
    /// Smallest and largest measure value in the bucket.
    pub lo: usize,
    pub hi: usize,
    pub count: usize,
    pub accuracy: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BucketTable {
    pub measure: Measure,
    pub rows: Vec<BucketRow>,
}

impl BucketTable {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("bucket,lo,hi,count,accuracy\n");
        for r in &self.rows {
            let _ = writeln!(out, "{},{},{},{},{}", r.bucket, r.lo, r.hi, r.count, r.accuracy);
        }
        out
    }
}

/// Equal-count bucket sizes for `n` items; the remainder goes one each to
/// the last buckets.
pub fn bucket_sizes(n: usize) -> [usize; NUM_BUCKETS] {
    let base = n / NUM_BUCKETS;
    let rem = n % NUM_BUCKETS;
    std::array::from_fn(|i| base + usize::from(i >= NUM_BUCKETS - rem))
}

/// Sorts pairs by `measure` on `g` (stable, ties in canonical pair order)
/// and reports the accuracy of each of ten equal-count buckets.
pub fn bucket_analysis(pairs: &[LabeledPair], scores: &[f64], g: &Graph, measure: Measure) -> Result<BucketTable> {
    if pairs.len() != scores.len() {
        return Err(Error::Shape(format!("{} scores for {} pairs", scores.len(), pairs.len())));
    }
    if pairs.len() < NUM_BUCKETS {
        return Err(Error::InvalidInput(format!(
            "bucket analysis needs at least {NUM_BUCKETS} pairs, got {}",
            pairs.len()
        )));
    }
    let values = pairs.iter().map(|p| measure.of(g, p)).collect::<Result<Vec<_>>>()?;
    let mut order: Vec<usize> = (0..pairs.len()).collect();
    order.sort_by_key(|&i| (values[i], pairs[i].pair));
    let mut rows = Vec::with_capacity(NUM_BUCKETS);
    let mut start = 0;
    for (bucket, size) in bucket_sizes(pairs.len()).into_iter().enumerate() {
        let idx = &order[start..start + size];
        start += size;
        let s: Vec<f64> = idx.iter().map(|&i| scores[i]).collect();
        let l: Vec<bool> = idx.iter().map(|&i| pairs[i].label).collect();
        rows.push(BucketRow {
            bucket,
            lo: values[idx[0]],
            hi: values[idx[size - 1]],
            count: size,
            accuracy: accuracy(&s, &l, DEFAULT_THRESHOLD)?,
        });
    }
    Ok(BucketTable { measure, rows })
}

/// Common-neighbor histograms of the same pairs on two graphs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CnDistribution {
    /// `before[c]` is the number of pairs with exactly `c` common neighbors.
    pub before: Vec<usize>,
    pub after: Vec<usize>,
    pub head_before: usize,
    pub head_after: usize,
    /// Pairs with no common neighbor before and at least one after.
    pub tail_to_head: usize,
    /// Pairs whose count dropped; zero whenever `after` contains `before`.
    pub decreased: usize,
}

pub fn cn_distribution(pairs: &[LabeledPair], before: &Graph, after: &Graph) -> Result<CnDistribution> {
    if before.num_nodes() != after.num_nodes() {
        return Err(Error::InvalidInput("graphs have different node sets".into()));
    }
    let mut out = CnDistribution {
        before: Vec::new(),
        after: Vec::new(),
        head_before: 0,
        head_after: 0,
        tail_to_head: 0,
        decreased: 0,
    };
    let bump = |hist: &mut Vec<usize>, c: usize| {
        if hist.len() <= c {
            hist.resize(c + 1, 0);
        }
        hist[c] += 1;
    };
    for p in pairs {
        let b = before.common_neighbor_count(&p.pair)?;
        let a = after.common_neighbor_count(&p.pair)?;
        bump(&mut out.before, b);
        bump(&mut out.after, a);
        out.head_before += usize::from(b > 0);
        out.head_after += usize::from(a > 0);
        out.tail_to_head += usize::from(b == 0 && a > 0);
        out.decreased += usize::from(a < b);
    }
    Ok(out)
}
