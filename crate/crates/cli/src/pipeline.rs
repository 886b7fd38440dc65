//! The end-to-end run: pretrain, select and add edges, continue training,
//! evaluate. Each stage can also be driven on its own from persisted
//! artifacts.

use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{Context, Result};
use ltlp_core::dataset::checkpoint::{save_graph, save_params, save_snapshots};
use ltlp_core::dataset::io::write_edge_list;
use ltlp_core::dataset::Dataset;
use ltlp_core::encoder::{score_pairs, ModelParams, NormalizedAdjacency};
use ltlp_core::eval::{cn_distribution, evaluate, MetricsReport};
use ltlp_core::sem::{
    augment, filter, generate_candidates, score_candidates, select_tau, FilterConfig, FilterOutcome, SemSidecar,
};
use ltlp_core::trainer::{continue_train, pretrain, resume_train, write_logs, EpochLog, PretrainOutput, SnapshotSet};

use crate::config::{RunConfig, TauChoice};
use crate::report::{write_json, RunReport, ThresholdReport, Timings};

/// Artifact locations inside one seed's output directory.
#[derive(Clone, Debug)]
pub struct Layout {
    pub root: PathBuf,
}

impl Layout {
    pub fn new(root: impl Into<PathBuf>) -> Layout {
        Layout { root: root.into() }
    }
    pub fn split_dir(&self) -> PathBuf {
        self.root.join("split")
    }
    pub fn pretrain_params(&self) -> PathBuf {
        self.root.join("pretrain").join("params.ckpt")
    }
    pub fn snapshots(&self) -> PathBuf {
        self.root.join("pretrain").join("snapshots.ckpt")
    }
    pub fn pretrain_log(&self) -> PathBuf {
        self.root.join("pretrain").join("log.jsonl")
    }
    pub fn augmented_graph(&self) -> PathBuf {
        self.root.join("augment").join("graph.ckpt")
    }
    pub fn augmented_edges(&self) -> PathBuf {
        self.root.join("augment").join("edges.txt")
    }
    pub fn added_edges(&self) -> PathBuf {
        self.root.join("augment").join("added_edges.txt")
    }
    pub fn sidecar(&self) -> PathBuf {
        self.root.join("augment").join("sidecar.json")
    }
    pub fn threshold(&self) -> PathBuf {
        self.root.join("augment").join("threshold.json")
    }
    pub fn final_params(&self) -> PathBuf {
        self.root.join("train").join("params.ckpt")
    }
    pub fn continue_log(&self) -> PathBuf {
        self.root.join("train").join("log.jsonl")
    }
    pub fn report(&self) -> PathBuf {
        self.root.join("report.json")
    }
    pub fn timings(&self) -> PathBuf {
        self.root.join("timings.json")
    }
}

fn ensure_parent(path: &Path) -> Result<()> {
    if let Some(p) = path.parent() {
        std::fs::create_dir_all(p).with_context(|| format!("creating {}", p.display()))?;
    }
    Ok(())
}

pub fn persist_pretrain(layout: &Layout, out: &PretrainOutput) -> Result<()> {
    ensure_parent(&layout.pretrain_params())?;
    save_params(layout.pretrain_params(), &out.params)?;
    save_snapshots(layout.snapshots(), &out.snapshots)?;
    write_logs(layout.pretrain_log(), &out.logs)?;
    Ok(())
}

/// Result of selecting and adding edges.
pub struct SemOutput {
    pub augmented: Dataset,
    pub threshold: ThresholdReport,
    pub outcome: FilterOutcome,
    pub sidecar: SemSidecar,
}

/// Chooses the threshold, scores candidates with the snapshots, filters
/// them and merges the survivors into the message-passing graph.
pub fn run_sem(dataset: &Dataset, snapshots: &SnapshotSet, cfg: &RunConfig) -> Result<SemOutput> {
    let threshold = match cfg.tau {
        TauChoice::Fixed(tau) => ThresholdReport { tau, source: "fixed", youden: None },
        TauChoice::Validation => {
            let scores = score_with(snapshots.last(), dataset, &dataset.val)?;
            let labels: Vec<bool> = dataset.val.iter().map(|p| p.label).collect();
            let sel = select_tau(&scores, &labels)?;
            ThresholdReport { tau: sel.tau, source: "validation", youden: Some(sel.youden) }
        }
    };
    let filter_cfg = FilterConfig { tau: threshold.tau, k_percent: cfg.k_percent, tail_only: cfg.tail_only };
    let candidates = generate_candidates(&dataset.graph, &dataset.train, cfg.tail_only)?;
    let scored = score_candidates(snapshots, dataset, &candidates)?;
    let outcome = filter(&scored, &filter_cfg)?;
    let (augmented, stats) = augment(dataset, &outcome.pairs())?;
    let sidecar = SemSidecar::new(&filter_cfg, &outcome, &stats);
    Ok(SemOutput { augmented, threshold, outcome, sidecar })
}

pub fn persist_sem(layout: &Layout, sem: &SemOutput) -> Result<()> {
    ensure_parent(&layout.augmented_graph())?;
    save_graph(layout.augmented_graph(), &sem.augmented.graph)?;
    let edges: Vec<_> = sem.augmented.graph.edges().collect();
    write_edge_list(layout.augmented_edges(), &edges)?;
    write_edge_list(layout.added_edges(), &sem.outcome.pairs())?;
    write_json(&layout.sidecar(), &sem.sidecar)?;
    write_json(&layout.threshold(), &sem.threshold)?;
    Ok(())
}

/// Scores `pairs` with messages passed over `dataset.graph`.
pub fn score_with(params: &ModelParams, dataset: &Dataset, pairs: &[ltlp_core::dataset::LabeledPair]) -> Result<Vec<f64>> {
    let adj = NormalizedAdjacency::new(&dataset.graph);
    let ps: Vec<_> = pairs.iter().map(|p| p.pair).collect();
    Ok(score_pairs(params, &dataset.features, &adj, &ps)?)
}

/// Test metrics for `params` with messages over `message_graph`'s graph.
/// Head/tail groups always come from `original`'s training graph.
pub fn test_report(params: &ModelParams, message_graph: &Dataset, original: &Dataset, ks: &[usize]) -> Result<MetricsReport> {
    let scores = score_with(params, message_graph, &original.test)?;
    Ok(evaluate(&original.test, &scores, &original.graph, ks)?)
}

pub struct PipelineRun {
    pub report: RunReport,
    pub pretrain: PretrainOutput,
    pub sem: SemOutput,
    pub final_params: ModelParams,
    pub continue_logs: Vec<EpochLog>,
    pub resumed_logs: Option<Vec<EpochLog>>,
    pub timings: Timings,
}

fn stage<T>(name: &str, timings: &mut Timings, f: impl FnOnce() -> Result<T>) -> Result<T> {
    let start = Instant::now();
    let out = f().with_context(|| format!("stage `{name}` failed"));
    timings.record(name, start.elapsed().as_secs_f64());
    out
}

/// Runs every stage for one seed. `cfg` must already be seeded. Artifacts
/// are written as each stage completes when `layout` is given.
pub fn run_pipeline(dataset: &Dataset, cfg: &RunConfig, layout: Option<&Layout>) -> Result<PipelineRun> {
    let mut timings = Timings::default();
    let pre = stage("pretrain", &mut timings, || {
        let out = pretrain(dataset, &cfg.encoder, &cfg.train)?;
        if let Some(l) = layout {
            persist_pretrain(l, &out)?;
        }
        Ok(out)
    })?;
    let baseline = stage("evaluate", &mut timings, || test_report(&pre.params, dataset, dataset, &cfg.hits_k))?;
    let sem = stage("augment", &mut timings, || {
        let sem = run_sem(dataset, &pre.snapshots, cfg)?;
        if let Some(l) = layout {
            persist_sem(l, &sem)?;
        }
        Ok(sem)
    })?;
    let (final_params, continue_logs) = stage("continue", &mut timings, || {
        let (p, logs) = continue_train(&sem.augmented, &pre.params, &cfg.train)?;
        if let Some(l) = layout {
            ensure_parent(&l.final_params())?;
            save_params(l.final_params(), &p)?;
            write_logs(l.continue_log(), &logs)?;
        }
        Ok((p, logs))
    })?;
    let ltlp = stage("evaluate", &mut timings, || test_report(&final_params, &sem.augmented, dataset, &cfg.hits_k))?;
    let (resumed_baseline, resumed_logs) = if cfg.resumed_baseline {
        let (report, logs) = stage("resumed-baseline", &mut timings, || {
            let (p, logs) = resume_train(dataset, &pre.params, &cfg.train)?;
            Ok((test_report(&p, dataset, dataset, &cfg.hits_k)?, logs))
        })?;
        (Some(report), Some(logs))
    } else {
        (None, None)
    };
    let cn = cn_distribution(&dataset.test, &dataset.graph, &sem.augmented.graph)?;
    let report = RunReport {
        dataset: cfg.dataset.clone(),
        seed: cfg.train.seed,
        baseline,
        ltlp,
        resumed_baseline,
        threshold: sem.threshold.clone(),
        sem: sem.sidecar.clone(),
        cn_distribution: cn,
    };
    if let Some(l) = layout {
        write_json(&l.report(), &report)?;
        write_json(&l.timings(), &timings)?;
    }
    Ok(PipelineRun { report, pretrain: pre, sem, final_params, continue_logs, resumed_logs, timings })
}
