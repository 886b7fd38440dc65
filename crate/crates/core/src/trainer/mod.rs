//! Losses and the two training phases.
//!
//! Pretraining minimizes cross-entropy on the training graph and memorizes
//! the parameters of its last five epochs. Continued training starts from
//! the final pretrained parameters with fresh optimizer moments and
//! minimizes the combined loss while passing messages over the augmented
//! graph. Labeled training pairs are the same in both phases.

mod loss;

use std::collections::{HashSet, VecDeque};
use std::io::Write as _;
use std::path::Path;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::dataset::{sample_non_edges, Dataset, LabeledPair};
use crate::encoder::{
    backward, forward, score_pairs, Adam, AdamConfig, EncoderConfig, ModelParams, NormalizedAdjacency,
};
use crate::error::{Error, Result};
use crate::eval::auc;
use crate::graph::{Graph, NodePair};
use crate::seed::stage_rng;

pub use loss::{batch_objective, ce_loss, loss_and_grads, re_loss, BatchLoss, Objective};

/// Number of trailing pretraining epochs kept for scoring.
pub const SNAPSHOT_COUNT: usize = 5;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum CenterUpdate {
    /// Centers are parameters updated by the optimizer.
    Optimizer,
    /// Centers follow an exponential moving average of batch class means.
    Ema { decay: f64 },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs_pretrain: usize,
    pub epochs_continue: usize,
    pub varphi: f64,
    pub lr: f64,
    pub batch_size: usize,
    pub seed: u64,
    pub center_update: CenterUpdate,
    pub adam: AdamConfig,
    /// Score the validation split after every epoch for the log.
    pub log_val_auc: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs_pretrain: 120,
            epochs_continue: 50,
            varphi: 0.7,
            lr: 0.001,
            batch_size: 1024,
            seed: 0,
            center_update: CenterUpdate::Optimizer,
            adam: AdamConfig::default(),
            log_val_auc: true,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs_pretrain < SNAPSHOT_COUNT {
            return Err(Error::Config(format!(
                "epochs_pretrain must be at least {SNAPSHOT_COUNT}, got {}",
                self.epochs_pretrain
            )));
        }
        if !(0.0..=1.0).contains(&self.varphi) {
            return Err(Error::Config(format!("varphi {} outside [0, 1]", self.varphi)));
        }
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return Err(Error::Config(format!("learning rate {} must be positive", self.lr)));
        }
        if self.batch_size == 0 {
            return Err(Error::Config("batch_size must be positive".into()));
        }
        if let CenterUpdate::Ema { decay } = self.center_update {
            if !(0.0..1.0).contains(&decay) {
                return Err(Error::Config(format!("center decay {decay} outside [0, 1)")));
            }
        }
        Ok(())
    }
}

/// Parameters of the last five pretraining epochs, oldest first.
#[derive(Clone, Debug, PartialEq)]
pub struct SnapshotSet {
    epochs: Vec<usize>,
    params: Vec<ModelParams>,
}

impl SnapshotSet {
    pub fn new(epochs: Vec<usize>, params: Vec<ModelParams>) -> Result<SnapshotSet> {
        if epochs.len() != SNAPSHOT_COUNT || params.len() != SNAPSHOT_COUNT {
            return Err(Error::InvalidInput(format!(
                "snapshot set needs exactly {SNAPSHOT_COUNT} states, got {} epochs and {} params",
                epochs.len(),
                params.len()
            )));
        }
        if epochs.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidInput(format!("snapshot epochs {epochs:?} not increasing")));
        }
        Ok(SnapshotSet { epochs, params })
    }

    pub fn epochs(&self) -> &[usize] {
        &self.epochs
    }

    pub fn params(&self) -> &[ModelParams] {
        &self.params
    }

    /// The final pretrained model.
    pub fn last(&self) -> &ModelParams {
        &self.params[SNAPSHOT_COUNT - 1]
    }
}

/// Rolling window that turns a stream of epoch states into a [`SnapshotSet`].
#[derive(Clone, Debug, Default)]
pub struct SnapshotWindow {
    items: VecDeque<(usize, ModelParams)>,
}

impl SnapshotWindow {
    pub fn push(&mut self, epoch: usize, params: &ModelParams) {
        if self.items.len() == SNAPSHOT_COUNT {
            self.items.pop_front();
        }
        self.items.push_back((epoch, params.clone()));
    }

    pub fn is_full(&self) -> bool {
        self.items.len() == SNAPSHOT_COUNT
    }

    pub fn to_set(&self) -> Result<SnapshotSet> {
        let (epochs, params) = self.items.iter().cloned().unzip();
        SnapshotSet::new(epochs, params)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochLog {
    pub phase: String,
    pub epoch: usize,
    pub loss: f64,
    pub l_ce: f64,
    pub l_re: f64,
    pub val_auc: Option<f64>,
}

pub fn write_logs(path: impl AsRef<Path>, logs: &[EpochLog]) -> Result<()> {
    let path = path.as_ref();
    let mut out = Vec::new();
    for log in logs {
        serde_json::to_writer(&mut out, log).map_err(|e| Error::InvalidInput(e.to_string()))?;
        out.push(b'\n');
    }
    std::fs::File::create(path)
        .and_then(|mut f| f.write_all(&out))
        .map_err(|e| Error::io(path, e))
}

pub struct PretrainOutput {
    pub params: ModelParams,
    pub snapshots: SnapshotSet,
    pub logs: Vec<EpochLog>,
}

/// Pretraining with cross-entropy only. `on_epoch` sees the parameters at
/// the end of every epoch.
pub fn pretrain_with(
    dataset: &Dataset,
    encoder: &EncoderConfig,
    cfg: &TrainConfig,
    mut on_epoch: impl FnMut(usize, &ModelParams) -> Result<()>,
) -> Result<PretrainOutput> {
    cfg.validate()?;
    let mut params = ModelParams::init(encoder, dataset.features.dim());
    let mut window = SnapshotWindow::default();
    let logs = run_phase(
        dataset,
        &mut params,
        Objective::CrossEntropy,
        "pretrain",
        cfg.epochs_pretrain,
        cfg,
        |epoch, p| {
            window.push(epoch, p);
            on_epoch(epoch, p)
        },
    )?;
    Ok(PretrainOutput {
        params,
        snapshots: window.to_set()?,
        logs,
    })
}

pub fn pretrain(dataset: &Dataset, encoder: &EncoderConfig, cfg: &TrainConfig) -> Result<PretrainOutput> {
    pretrain_with(dataset, encoder, cfg, |_, _| Ok(()))
}

/// Continued training on `dataset.graph` (normally the augmented graph)
/// with the combined loss.
pub fn continue_train(dataset: &Dataset, init: &ModelParams, cfg: &TrainConfig) -> Result<(ModelParams, Vec<EpochLog>)> {
    cfg.validate()?;
    let mut params = init.clone();
    let objective = Objective::Combined { varphi: cfg.varphi };
    let logs = run_phase(dataset, &mut params, objective, "continue", cfg.epochs_continue, cfg, |_, _| Ok(()))?;
    Ok((params, logs))
}

/// Plain cross-entropy training resumed from `init` for `epochs_continue`
/// epochs, drawing the same random stream as [`continue_train`].
pub fn resume_train(dataset: &Dataset, init: &ModelParams, cfg: &TrainConfig) -> Result<(ModelParams, Vec<EpochLog>)> {
    cfg.validate()?;
    let mut params = init.clone();
    let logs = run_phase(
        dataset,
        &mut params,
        Objective::CrossEntropy,
        "continue",
        cfg.epochs_continue,
        cfg,
        |_, _| Ok(()),
    )?;
    Ok((params, logs))
}

fn at_epoch(err: Error, epoch: usize) -> Error {
    match err {
        Error::Diverged { what, .. } => Error::Diverged { epoch, what },
        other => other,
    }
}

fn run_phase(
    dataset: &Dataset,
    params: &mut ModelParams,
    objective: Objective,
    phase: &str,
    epochs: usize,
    cfg: &TrainConfig,
    mut on_epoch: impl FnMut(usize, &ModelParams) -> Result<()>,
) -> Result<Vec<EpochLog>> {
    let n = dataset.num_nodes();
    let adj = NormalizedAdjacency::new(&dataset.graph);
    let positives: Vec<LabeledPair> = dataset.train.iter().copied().filter(|p| p.label).collect();
    if positives.is_empty() {
        return Err(Error::InvalidInput("no training positives".into()));
    }
    // negatives are drawn against the labeled training edges, so they do not
    // depend on edges added for message passing
    let label_graph = Graph::build(n, &positives.iter().map(|p| p.pair).collect::<Vec<_>>())?;
    let num_negatives = dataset.num_train_negatives();
    let no_exclusions: HashSet<NodePair> = HashSet::new();
    let val_pairs: Vec<NodePair> = dataset.val.iter().map(|p| p.pair).collect();
    let val_labels: Vec<bool> = dataset.val.iter().map(|p| p.label).collect();

    let mut adam = Adam::new(cfg.adam);
    let mut logs = Vec::with_capacity(epochs);
    for epoch in 1..=epochs {
        let mut rng = stage_rng(cfg.seed, &format!("{phase}/epoch/{epoch}"));
        let mut pairs = positives.clone();
        pairs.extend(
            sample_non_edges(&label_graph, num_negatives, &no_exclusions, &mut rng)?
                .into_iter()
                .map(LabeledPair::negative),
        );
        pairs.shuffle(&mut rng);

        let (mut total, mut ce, mut re) = (0.0, 0.0, 0.0);
        for batch in pairs.chunks(cfg.batch_size) {
            let fwd = forward(params, &dataset.features, &adj).map_err(|e| at_epoch(e, epoch))?;
            let (loss, up) = batch_objective(params, &fwd, batch, objective)?;
            if !loss.total.is_finite() {
                return Err(Error::Diverged { epoch, what: "loss" });
            }
            let w = batch.len() as f64;
            total += loss.total * w;
            ce += loss.ce * w;
            re += loss.re * w;
            let mut grads = backward(params, &dataset.features, &adj, &fwd, up)?;
            match cfg.center_update {
                CenterUpdate::Optimizer => adam.step(params, &grads, cfg.lr),
                CenterUpdate::Ema { decay } => {
                    grads.centers.fill(0.0);
                    let step = adam.step(params, &grads, cfg.lr);
                    if matches!(objective, Objective::Combined { .. }) {
                        loss::ema_centers(params, &fwd, batch, decay);
                    }
                    step
                }
            }
            .map_err(|e| at_epoch(e, epoch))?;
        }
        let count = pairs.len() as f64;
        let val_auc = if cfg.log_val_auc && !val_pairs.is_empty() {
            let scores = score_pairs(params, &dataset.features, &adj, &val_pairs).map_err(|e| at_epoch(e, epoch))?;
            auc(&scores, &val_labels).ok()
        } else {
            None
        };
        let log = EpochLog {
            phase: phase.to_string(),
            epoch,
            loss: total / count,
            l_ce: ce / count,
            l_re: re / count,
            val_auc,
        };
        log::debug!("{phase} epoch {epoch}: loss {:.6}", log.loss);
        logs.push(log);
        on_epoch(epoch, params)?;
    }
    Ok(logs)
}
