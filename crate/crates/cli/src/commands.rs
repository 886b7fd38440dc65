//! Subcommand bodies. Each takes a finished [`RunConfig`] and runs once per
//! configured seed, writing under `<out>/seed-<n>/`.

use std::collections::BTreeMap;
use std::path::Path;

use anyhow::{anyhow, bail, Context, Result};
use ltlp_core::dataset::checkpoint::{load_graph, load_params, load_snapshots, save_params};
use ltlp_core::dataset::downsample_edges;
use ltlp_core::eval::{bucket_analysis, MetricsReport, Measure};
use ltlp_core::sem::{HardNegativeExperiment, HardNegativeRow};
use ltlp_core::trainer::{continue_train, pretrain, pretrain_with, write_logs};
use rayon::prelude::*;
use serde::Serialize;

use crate::config::RunConfig;
use crate::data::{load, write_split, LoadedData};
use crate::pipeline::{persist_pretrain, persist_sem, run_pipeline, run_sem, score_with, test_report, Layout};
use crate::report::{csv_table, opt_cell, write_json, write_text, RunReport};

fn load_seeded(cfg: &RunConfig, seed: u64) -> Result<(RunConfig, LoadedData, Layout)> {
    let cfg = cfg.seeded(seed);
    let data = load(&cfg).context("stage `load` failed")?;
    let layout = Layout::new(cfg.seed_dir(seed));
    write_split(&layout.split_dir(), &cfg, &data)?;
    Ok((cfg, data, layout))
}

/// Runs `f` for every seed in parallel and returns the results in seed order.
fn per_seed<T: Send>(cfg: &RunConfig, f: impl Fn(u64) -> Result<T> + Sync) -> Result<Vec<T>> {
    cfg.seeds.par_iter().map(|&s| f(s).with_context(|| format!("seed {s}"))).collect()
}

#[derive(Debug, Serialize)]
pub struct CnHistogram {
    /// `counts[c]`: test pairs with exactly `c` common neighbors.
    pub counts: Vec<usize>,
    pub head: usize,
    pub tail: usize,
}

/// Trains the baseline and writes degree and common-neighbor bucket tables
/// plus the test-pair common-neighbor histogram.
pub fn analyze(cfg: &RunConfig) -> Result<()> {
    per_seed(cfg, |seed| {
        let (cfg, data, layout) = load_seeded(cfg, seed)?;
        let d = &data.dataset;
        let out = pretrain(d, &cfg.encoder, &cfg.train).context("stage `pretrain` failed")?;
        let scores = score_with(&out.params, d, &d.test)?;
        let dir = layout.root.join("analyze");
        for measure in [Measure::DegreePair, Measure::CommonNeighbors] {
            let table = bucket_analysis(&d.test, &scores, &d.graph, measure).context("stage `analyze` failed")?;
            write_text(&dir.join(format!("buckets_{}.csv", measure.name())), &table.to_csv())?;
        }
        let mut hist = CnHistogram { counts: Vec::new(), head: 0, tail: 0 };
        for p in &d.test {
            let c = d.graph.common_neighbor_count(&p.pair)?;
            if hist.counts.len() <= c {
                hist.counts.resize(c + 1, 0);
            }
            hist.counts[c] += 1;
            if c > 0 {
                hist.head += 1;
            } else {
                hist.tail += 1;
            }
        }
        write_json(&dir.join("cn_histogram.json"), &hist)?;
        println!("seed {seed}: wrote {}", dir.display());
        Ok(())
    })?;
    Ok(())
}

pub fn pretrain_cmd(cfg: &RunConfig) -> Result<()> {
    per_seed(cfg, |seed| {
        let (cfg, data, layout) = load_seeded(cfg, seed)?;
        let out = pretrain(&data.dataset, &cfg.encoder, &cfg.train).context("stage `pretrain` failed")?;
        persist_pretrain(&layout, &out)?;
        println!("seed {seed}: pretrained {} epochs into {}", cfg.train.epochs_pretrain, layout.root.display());
        Ok(())
    })?;
    Ok(())
}

fn missing(path: &Path, producer: &str) -> anyhow::Error {
    anyhow!("{} not found; run `ltlp {producer}` first with the same config and seed", path.display())
}

pub fn augment_cmd(cfg: &RunConfig) -> Result<()> {
    per_seed(cfg, |seed| {
        let (cfg, data, layout) = load_seeded(cfg, seed)?;
        if !layout.snapshots().is_file() {
            return Err(missing(&layout.snapshots(), "pretrain"));
        }
        let snapshots = load_snapshots(layout.snapshots())?;
        let sem = run_sem(&data.dataset, &snapshots, &cfg).context("stage `augment` failed")?;
        persist_sem(&layout, &sem)?;
        println!(
            "seed {seed}: tau {:.4}, {} candidates, {} above tau, {} added",
            sem.threshold.tau, sem.sidecar.num_candidates, sem.sidecar.num_score_filtered, sem.sidecar.added
        );
        Ok(())
    })?;
    Ok(())
}

pub fn train_cmd(cfg: &RunConfig) -> Result<()> {
    per_seed(cfg, |seed| {
        let (cfg, data, layout) = load_seeded(cfg, seed)?;
        for (path, producer) in [(layout.pretrain_params(), "pretrain"), (layout.augmented_graph(), "augment")] {
            if !path.is_file() {
                return Err(missing(&path, producer));
            }
        }
        let init = load_params(layout.pretrain_params())?;
        let graph = load_graph(layout.augmented_graph())?;
        let augmented = ltlp_core::dataset::Dataset { graph, ..data.dataset.clone() };
        augmented.validate().context("augmented graph does not match this split")?;
        let (params, logs) = continue_train(&augmented, &init, &cfg.train).context("stage `continue` failed")?;
        std::fs::create_dir_all(layout.final_params().parent().expect("has parent"))?;
        save_params(layout.final_params(), &params)?;
        write_logs(layout.continue_log(), &logs)?;
        println!("seed {seed}: trained {} epochs into {}", cfg.train.epochs_continue, layout.root.display());
        Ok(())
    })?;
    Ok(())
}

#[derive(Debug, Serialize)]
pub struct EvalReport {
    pub baseline: MetricsReport,
    pub ltlp: Option<MetricsReport>,
}

pub fn eval_cmd(cfg: &RunConfig) -> Result<()> {
    per_seed(cfg, |seed| {
        let (cfg, data, layout) = load_seeded(cfg, seed)?;
        let d = &data.dataset;
        if !layout.pretrain_params().is_file() {
            return Err(missing(&layout.pretrain_params(), "pretrain"));
        }
        let baseline = test_report(&load_params(layout.pretrain_params())?, d, d, &cfg.hits_k)?;
        let ltlp = if layout.final_params().is_file() && layout.augmented_graph().is_file() {
            let augmented = ltlp_core::dataset::Dataset { graph: load_graph(layout.augmented_graph())?, ..d.clone() };
            Some(test_report(&load_params(layout.final_params())?, &augmented, d, &cfg.hits_k)?)
        } else {
            None
        };
        let report = EvalReport { baseline, ltlp };
        write_json(&layout.root.join("eval.json"), &report)?;
        print_metrics(seed, "baseline", &report.baseline);
        if let Some(l) = &report.ltlp {
            print_metrics(seed, "ltlp", l);
        }
        Ok(())
    })?;
    Ok(())
}

fn print_metrics(seed: u64, name: &str, m: &MetricsReport) {
    println!(
        "seed {seed} {name:>8}: auc {:.4}  acc {:.4}  head {}  tail {}  bias {}",
        m.auc,
        m.accuracy,
        opt_cell(m.acc_head),
        opt_cell(m.acc_tail),
        opt_cell(m.bias)
    );
}

/// Mean of every seed's headline numbers.
#[derive(Debug, Serialize)]
pub struct SweepSummary {
    pub seeds: Vec<u64>,
    pub mean: BTreeMap<String, f64>,
}

fn mean_of(reports: &[RunReport], f: impl Fn(&RunReport) -> Option<f64>) -> Option<f64> {
    let xs: Vec<f64> = reports.iter().filter_map(f).collect();
    (!xs.is_empty()).then(|| xs.iter().sum::<f64>() / xs.len() as f64)
}

pub fn summarize(reports: &[RunReport]) -> SweepSummary {
    let mut mean = BTreeMap::new();
    let fields: [(&str, fn(&RunReport) -> Option<f64>); 8] = [
        ("baseline_auc", |r| Some(r.baseline.auc)),
        ("baseline_acc_head", |r| r.baseline.acc_head),
        ("baseline_acc_tail", |r| r.baseline.acc_tail),
        ("baseline_bias", |r| r.baseline.bias),
        ("ltlp_auc", |r| Some(r.ltlp.auc)),
        ("ltlp_acc_head", |r| r.ltlp.acc_head),
        ("ltlp_acc_tail", |r| r.ltlp.acc_tail),
        ("ltlp_bias", |r| r.ltlp.bias),
    ];
    for (name, f) in fields {
        if let Some(m) = mean_of(reports, f) {
            mean.insert(name.to_string(), m);
        }
    }
    SweepSummary { seeds: reports.iter().map(|r| r.seed).collect(), mean }
}

pub fn pipeline_cmd(cfg: &RunConfig) -> Result<Vec<RunReport>> {
    let reports = per_seed(cfg, |seed| {
        let (cfg, data, layout) = load_seeded(cfg, seed)?;
        let run = run_pipeline(&data.dataset, &cfg, Some(&layout))?;
        print_metrics(seed, "baseline", &run.report.baseline);
        print_metrics(seed, "ltlp", &run.report.ltlp);
        Ok(run.report)
    })?;
    if reports.len() > 1 {
        write_json(&cfg.out.join("summary.json"), &summarize(&reports))?;
    }
    Ok(reports)
}

/// Per-level label-error-rate trajectories during pretraining.
pub fn hard_negatives_cmd(cfg: &RunConfig) -> Result<()> {
    per_seed(cfg, |seed| {
        let (cfg, data, layout) = load_seeded(cfg, seed)?;
        let rows = hard_negative_rows(&data, &cfg)?;
        let dir = layout.root.join("hard_negatives");
        for &s in &cfg.hard_negative.levels {
            let lines: Vec<Vec<String>> =
                rows.iter().filter(|r| r.difficulty == s).map(|r| vec![r.csv_line()]).collect();
            write_text(&dir.join(format!("level_{s}.csv")), &csv_table(HardNegativeRow::csv_header(), &lines))?;
        }
        println!("seed {seed}: wrote {} levels to {}", cfg.hard_negative.levels.len(), dir.display());
        Ok(())
    })?;
    Ok(())
}

/// Pretrains on `data` while recording the label-error rates.
pub fn hard_negative_rows(data: &LoadedData, cfg: &RunConfig) -> Result<Vec<HardNegativeRow>> {
    let mut exp = HardNegativeExperiment::new(&data.dataset, cfg.hard_negative.clone())
        .context("stage `hard-negatives` failed")?;
    let mut rows = Vec::new();
    pretrain_with(&data.dataset, &cfg.encoder, &cfg.train, |epoch, params| {
        rows.extend(exp.observe(epoch, params)?);
        Ok(())
    })
    .context("stage `pretrain` failed")?;
    if rows.is_empty() {
        bail!("no label-error rows: pretraining ran fewer than five epochs");
    }
    Ok(rows)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SparsityRow {
    pub ratio: f64,
    pub baseline_auc: f64,
    pub baseline_tail_acc: Option<f64>,
    pub ltlp_auc: f64,
    pub ltlp_tail_acc: Option<f64>,
}

pub const SPARSITY_HEADER: &str = "ratio,baseline_auc,baseline_tail_acc,ltlp_auc,ltlp_tail_acc";

/// Downsamples the training edges at every ratio and runs the pipeline.
pub fn sparsity_rows(data: &LoadedData, cfg: &RunConfig) -> Result<Vec<SparsityRow>> {
    cfg.sparsity_ratios
        .iter()
        .map(|&ratio| {
            let d = downsample_edges(&data.dataset, ratio, cfg.split.seed)?;
            let run = run_pipeline(&d, cfg, None).with_context(|| format!("ratio {ratio}"))?;
            Ok(SparsityRow {
                ratio,
                baseline_auc: run.report.baseline.auc,
                baseline_tail_acc: run.report.baseline.acc_tail,
                ltlp_auc: run.report.ltlp.auc,
                ltlp_tail_acc: run.report.ltlp.acc_tail,
            })
        })
        .collect()
}

pub fn sparsity_cmd(cfg: &RunConfig) -> Result<()> {
    per_seed(cfg, |seed| {
        let (cfg, data, layout) = load_seeded(cfg, seed)?;
        let rows = sparsity_rows(&data, &cfg)?;
        let lines: Vec<Vec<String>> = rows
            .iter()
            .map(|r| {
                vec![
                    r.ratio.to_string(),
                    r.baseline_auc.to_string(),
                    opt_cell(r.baseline_tail_acc),
                    r.ltlp_auc.to_string(),
                    opt_cell(r.ltlp_tail_acc),
                ]
            })
            .collect();
        let path = layout.root.join("sparsity.csv");
        write_text(&path, &csv_table(SPARSITY_HEADER, &lines))?;
        println!("seed {seed}: wrote {}", path.display());
        Ok(())
    })?;
    Ok(())
}
