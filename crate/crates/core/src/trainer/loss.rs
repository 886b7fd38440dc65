use ndarray::{Array1, ArrayView1, Zip};
use serde::{Deserialize, Serialize};

use crate::dataset::LabeledPair;
use crate::encoder::{
    backward, forward, pair_forward, Features, Forward, ModelParams, NormalizedAdjacency, ParamGrads,
    UpstreamGrads,
};
use crate::error::{Error, Result};

/// Which loss a training phase minimizes.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Objective {
    CrossEntropy,
    /// `varphi * L_ce + (1 - varphi) * L_re`.
    Combined { varphi: f64 },
}

impl Objective {
    fn weights(self) -> (f64, f64) {
        match self {
            Objective::CrossEntropy => (1.0, 0.0),
            Objective::Combined { varphi } => (varphi, 1.0 - varphi),
        }
    }
}

/// Cross-entropy of one prediction and its derivative in `p`.
pub fn ce_loss(p: f64, y: f64) -> (f64, f64) {
    let loss = -(y * p.ln() + (1.0 - y) * (1.0 - p).ln());
    let grad = -y / p + (1.0 - y) / (1.0 - p);
    (loss, grad)
}

/// Squared distance to the class center, with gradients in `z` and in the
/// center.
pub fn re_loss(z: &ArrayView1<f64>, center: &ArrayView1<f64>) -> Result<(f64, Array1<f64>, Array1<f64>)> {
    if z.len() != center.len() {
        return Err(Error::Shape(format!("embedding {} vs center {}", z.len(), center.len())));
    }
    let diff = z - center;
    let loss = diff.dot(&diff);
    let dz = &diff * 2.0;
    let dc = &diff * -2.0;
    Ok((loss, dz, dc))
}

/// Batch means of the loss components.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct BatchLoss {
    pub total: f64,
    pub ce: f64,
    pub re: f64,
}

/// Loss of `batch` given a cached forward pass, plus the upstream gradient
/// for [`backward`].
pub fn batch_objective(
    params: &ModelParams,
    fwd: &Forward,
    batch: &[LabeledPair],
    objective: Objective,
) -> Result<(BatchLoss, UpstreamGrads)> {
    if batch.is_empty() {
        return Err(Error::InvalidInput("empty batch".into()));
    }
    let h = fwd.embeddings();
    let (w_ce, w_re) = objective.weights();
    let scale = 1.0 / batch.len() as f64;
    let mut up = UpstreamGrads::zeros(params, h.nrows());
    let (mut ce_sum, mut re_sum) = (0.0, 0.0);
    for lp in batch {
        let e = pair_forward(params, h, &lp.pair);
        let (ce, dce_dp) = ce_loss(e.p, lp.y());
        let center = params.centers.row(lp.class());
        let (re, dre_dz, dre_dc) = re_loss(&e.z.view(), &center)?;
        ce_sum += ce;
        re_sum += re;

        let dlogit = w_ce * scale * dce_dp * e.dp_dlogit();
        up.decoder_bias += dlogit;
        up.decoder_weight.scaled_add(dlogit, &e.z);
        let mut dz = &params.decoder_weight * dlogit;
        if w_re != 0.0 {
            dz.scaled_add(w_re * scale, &dre_dz);
            up.centers.row_mut(lp.class()).scaled_add(w_re * scale, &dre_dc);
        }
        up.add_pair(h, &lp.pair, &dz.view());
    }
    let ce = ce_sum * scale;
    let re = re_sum * scale;
    let loss = BatchLoss {
        total: w_ce * ce + w_re * re,
        ce,
        re,
    };
    Ok((loss, up))
}

/// Forward, loss and backward for one batch.
pub fn loss_and_grads(
    params: &ModelParams,
    features: &Features,
    adj: &NormalizedAdjacency,
    batch: &[LabeledPair],
    objective: Objective,
) -> Result<(BatchLoss, ParamGrads)> {
    let fwd = forward(params, features, adj)?;
    let (loss, up) = batch_objective(params, &fwd, batch, objective)?;
    let grads = backward(params, features, adj, &fwd, up)?;
    Ok((loss, grads))
}

/// Moves each center toward the batch mean embedding of its class.
pub(crate) fn ema_centers(params: &mut ModelParams, fwd: &Forward, batch: &[LabeledPair], decay: f64) {
    let h = fwd.embeddings();
    for class in 0..2 {
        let mut sum = Array1::<f64>::zeros(params.hidden());
        let mut count = 0usize;
        for lp in batch.iter().filter(|lp| lp.class() == class) {
            sum += &pair_forward(params, h, &lp.pair).z;
            count += 1;
        }
        if count > 0 {
            sum /= count as f64;
            Zip::from(params.centers.row_mut(class))
                .and(&sum)
                .for_each(|c, &m| *c = decay * *c + (1.0 - decay) * m);
        }
    }
}
