//! Serialized outputs.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use anyhow::{Context, Result};
use ltlp_core::eval::{CnDistribution, MetricsReport};
use ltlp_core::sem::SemSidecar;
use serde::Serialize;

/// Pretty JSON with a trailing newline.
pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    write_text(path, &text)
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).with_context(|| format!("creating {}", parent.display()))?;
    }
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ThresholdReport {
    pub tau: f64,
    /// `validation` or `fixed`.
    pub source: &'static str,
    /// Youden's J on validation when selected there.
    pub youden: Option<f64>,
}

/// Everything a pipeline run reports, baseline and augmented model side by
/// side. Contains no timings so reruns are byte-identical.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RunReport {
    pub dataset: String,
    pub seed: u64,
    pub baseline: MetricsReport,
    pub ltlp: MetricsReport,
    pub resumed_baseline: Option<MetricsReport>,
    pub threshold: ThresholdReport,
    pub sem: SemSidecar,
    pub cn_distribution: CnDistribution,
}

/// Wall-clock seconds per stage.
#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct Timings {
    pub stages: BTreeMap<String, f64>,
}

impl Timings {
    pub fn record(&mut self, stage: &str, secs: f64) {
        *self.stages.entry(stage.to_string()).or_insert(0.0) += secs;
    }

    pub fn total(&self) -> f64 {
        self.stages.values().sum()
    }
}

/// `name,value` table of numbers with a header.
pub fn csv_table(header: &str, rows: &[Vec<String>]) -> String {
    let mut s = String::from(header);
    s.push('\n');
    for r in rows {
        s.push_str(&r.join(","));
        s.push('\n');
    }
    s
}

/// Formats an optional number as CSV, empty when absent.
pub fn opt_cell(x: Option<f64>) -> String {
    x.map(|v| v.to_string()).unwrap_or_default()
}
