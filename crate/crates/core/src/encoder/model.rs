use ndarray::{Array1, Array2, ArrayView1, Zip};
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{Features, NormalizedAdjacency};
use crate::dataset::checkpoint::{find, Tensor};
use crate::error::{Error, Result};
use crate::graph::NodePair;
use crate::seed::stage_rng;

/// Predicted probabilities are clamped to `[PROB_CLAMP, 1 - PROB_CLAMP]`.
pub const PROB_CLAMP: f64 = 1e-7;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Decoder {
    /// `σ(w · (h_u ⊙ h_v) + b)` with trainable `w`, `b`.
    HadamardLinear,
    /// `σ(h_u · h_v + b)`; the decoder weight is fixed at one.
    InnerProduct,
}

impl std::str::FromStr for Decoder {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "hadamard" | "hadamard_linear" => Ok(Decoder::HadamardLinear),
            "inner_product" | "dot" => Ok(Decoder::InnerProduct),
            other => Err(Error::Config(format!("unknown decoder {other:?}"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EncoderConfig {
    pub layers: usize,
    pub hidden: usize,
    pub decoder: Decoder,
    pub init_seed: u64,
}

impl Default for EncoderConfig {
    fn default() -> Self {
        EncoderConfig {
            layers: 3,
            hidden: 256,
            decoder: Decoder::HadamardLinear,
            init_seed: 0,
        }
    }
}

/// Trainable state: GCN weights, pair decoder and the two class centers
/// (row 0 negative, row 1 positive).
#[derive(Clone, Debug, PartialEq)]
pub struct ModelParams {
    pub decoder_kind: Decoder,
    pub layers: Vec<Array2<f64>>,
    pub decoder_weight: Array1<f64>,
    pub decoder_bias: f64,
    pub centers: Array2<f64>,
}

/// Gradient with the same layout as [`ModelParams`].
#[derive(Clone, Debug, PartialEq)]
pub struct ParamGrads {
    pub layers: Vec<Array2<f64>>,
    pub decoder_weight: Array1<f64>,
    pub decoder_bias: f64,
    pub centers: Array2<f64>,
}

impl ModelParams {
    /// Glorot-uniform layer weights, unit decoder weight, zero bias and centers.
    pub fn init(cfg: &EncoderConfig, in_dim: usize) -> ModelParams {
        let mut rng = stage_rng(cfg.init_seed, "encoder-init");
        let m = cfg.hidden;
        let mut glorot = |rows: usize, cols: usize| {
            let limit = (6.0 / (rows + cols) as f64).sqrt();
            Array2::from_shape_fn((rows, cols), |_| rng.random_range(-limit..limit))
        };
        let layers: Vec<Array2<f64>> = (0..cfg.layers)
            .map(|l| glorot(if l == 0 { in_dim } else { m }, m))
            .collect();
        // both decoders start as the inner product; only the Hadamard one trains it
        let decoder_weight = Array1::ones(m);
        ModelParams {
            decoder_kind: cfg.decoder,
            layers,
            decoder_weight,
            decoder_bias: 0.0,
            centers: Array2::zeros((2, m)),
        }
    }

    pub fn hidden(&self) -> usize {
        self.decoder_weight.len()
    }

    pub fn in_dim(&self) -> usize {
        self.layers[0].nrows()
    }

    pub fn zero_grads(&self) -> ParamGrads {
        ParamGrads {
            layers: self.layers.iter().map(|w| Array2::zeros(w.raw_dim())).collect(),
            decoder_weight: Array1::zeros(self.decoder_weight.raw_dim()),
            decoder_bias: 0.0,
            centers: Array2::zeros(self.centers.raw_dim()),
        }
    }

    pub fn is_finite(&self) -> bool {
        self.layers.iter().all(|w| w.iter().all(|x| x.is_finite()))
            && self.decoder_weight.iter().all(|x| x.is_finite())
            && self.decoder_bias.is_finite()
            && self.centers.iter().all(|x| x.is_finite())
    }

    /// Every tensor as a flat mutable slice, in a fixed order shared with
    /// [`ParamGrads::slices`].
    pub fn slices_mut(&mut self) -> Vec<&mut [f64]> {
        let mut out: Vec<&mut [f64]> = self
            .layers
            .iter_mut()
            .map(|w| w.as_slice_mut().expect("standard layout"))
            .collect();
        out.push(self.decoder_weight.as_slice_mut().expect("standard layout"));
        out.push(std::slice::from_mut(&mut self.decoder_bias));
        out.push(self.centers.as_slice_mut().expect("standard layout"));
        out
    }

    pub fn to_tensors(&self, prefix: &str) -> Vec<Tensor> {
        let kind = match self.decoder_kind {
            Decoder::HadamardLinear => 0.0,
            Decoder::InnerProduct => 1.0,
        };
        let mut out = vec![
            Tensor::scalar(format!("{prefix}num_layers"), self.layers.len() as f64),
            Tensor::scalar(format!("{prefix}decoder.kind"), kind),
        ];
        for (l, w) in self.layers.iter().enumerate() {
            out.push(Tensor {
                name: format!("{prefix}layer.{l}"),
                shape: vec![w.nrows(), w.ncols()],
                data: w.iter().copied().collect(),
            });
        }
        out.push(Tensor {
            name: format!("{prefix}decoder.weight"),
            shape: vec![self.decoder_weight.len()],
            data: self.decoder_weight.to_vec(),
        });
        out.push(Tensor::scalar(format!("{prefix}decoder.bias"), self.decoder_bias));
        out.push(Tensor {
            name: format!("{prefix}centers"),
            shape: vec![2, self.centers.ncols()],
            data: self.centers.iter().copied().collect(),
        });
        out
    }

    pub fn from_tensors(tensors: &[Tensor], prefix: &str) -> Result<ModelParams> {
        let get = |name: &str| find(tensors, &format!("{prefix}{name}"));
        let num_layers = get("num_layers")?.data[0] as usize;
        let decoder_kind = match get("decoder.kind")?.data[0] {
            k if k == 0.0 => Decoder::HadamardLinear,
            k if k == 1.0 => Decoder::InnerProduct,
            k => return Err(Error::Corrupt(format!("unknown decoder kind {k}"))),
        };
        let matrix = |t: &Tensor| -> Result<Array2<f64>> {
            if t.shape.len() != 2 {
                return Err(Error::Corrupt(format!("{} is not a matrix", t.name)));
            }
            Array2::from_shape_vec((t.shape[0], t.shape[1]), t.data.clone())
                .map_err(|e| Error::Corrupt(e.to_string()))
        };
        let layers = (0..num_layers)
            .map(|l| get(&format!("layer.{l}")).and_then(matrix))
            .collect::<Result<Vec<_>>>()?;
        let params = ModelParams {
            decoder_kind,
            layers,
            decoder_weight: Array1::from(get("decoder.weight")?.data.clone()),
            decoder_bias: get("decoder.bias")?.data[0],
            centers: matrix(get("centers")?)?,
        };
        params.check_shapes()?;
        Ok(params)
    }

    pub fn check_shapes(&self) -> Result<()> {
        let m = self.hidden();
        if self.layers.is_empty() {
            return Err(Error::Shape("encoder needs at least one layer".into()));
        }
        for (l, w) in self.layers.iter().enumerate() {
            if w.ncols() != m || (l > 0 && w.nrows() != m) {
                return Err(Error::Shape(format!("layer {l} has shape {:?}", w.dim())));
            }
        }
        if self.centers.dim() != (2, m) {
            return Err(Error::Shape(format!("centers have shape {:?}", self.centers.dim())));
        }
        Ok(())
    }
}

impl ParamGrads {
    pub fn slices(&self) -> Vec<&[f64]> {
        let mut out: Vec<&[f64]> = self
            .layers
            .iter()
            .map(|w| w.as_slice().expect("standard layout"))
            .collect();
        out.push(self.decoder_weight.as_slice().expect("standard layout"));
        out.push(std::slice::from_ref(&self.decoder_bias));
        out.push(self.centers.as_slice().expect("standard layout"));
        out
    }

    pub fn max_abs(&self) -> f64 {
        self.slices()
            .into_iter()
            .flat_map(|s| s.iter())
            .fold(0.0, |m, x| m.max(x.abs()))
    }
}

/// Output of a full-graph forward pass plus what backward needs.
#[derive(Clone, Debug)]
pub struct Forward {
    /// `H_1 ..= H_L`.
    pub hidden: Vec<Array2<f64>>,
    /// Pre-activations `Â H_{l-1} W_l`; the last equals `H_L`.
    pub pre: Vec<Array2<f64>>,
}

impl Forward {
    pub fn embeddings(&self) -> &Array2<f64> {
        self.hidden.last().expect("at least one layer")
    }
}

pub fn forward(params: &ModelParams, features: &Features, adj: &NormalizedAdjacency) -> Result<Forward> {
    if features.dim() != params.in_dim() || features.rows() != adj.num_nodes() {
        return Err(Error::Shape(format!(
            "features {}x{} vs encoder input {} and graph of {} nodes",
            features.rows(),
            features.dim(),
            params.in_dim(),
            adj.num_nodes()
        )));
    }
    let num_layers = params.layers.len();
    let mut hidden: Vec<Array2<f64>> = Vec::with_capacity(num_layers);
    let mut pre = Vec::with_capacity(num_layers);
    for (l, w) in params.layers.iter().enumerate() {
        let xw = if l == 0 {
            features.matmul(&w.view())
        } else {
            hidden[l - 1].dot(w)
        };
        let a = adj.spmm(&xw.view());
        if a.iter().any(|x| !x.is_finite()) {
            return Err(Error::Diverged { epoch: 0, what: "activation" });
        }
        let h = if l + 1 < num_layers {
            a.mapv(|x| x.max(0.0))
        } else {
            a.clone()
        };
        pre.push(a);
        hidden.push(h);
    }
    Ok(Forward { hidden, pre })
}

#[derive(Clone, Debug, PartialEq)]
pub struct PairEmbedding {
    pub z: Array1<f64>,
    pub logit: f64,
    /// Clamped probability.
    pub p: f64,
}

impl PairEmbedding {
    /// `dp/dlogit`; zero where the clamp is active.
    pub fn dp_dlogit(&self) -> f64 {
        let raw = logistic(self.logit);
        if raw < PROB_CLAMP || raw > 1.0 - PROB_CLAMP {
            0.0
        } else {
            raw * (1.0 - raw)
        }
    }
}

#[inline]
pub(crate) fn logistic(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

pub fn pair_forward(params: &ModelParams, h: &Array2<f64>, pair: &NodePair) -> PairEmbedding {
    let z = &h.row(pair.u()) * &h.row(pair.v());
    let logit = params.decoder_weight.dot(&z) + params.decoder_bias;
    let p = logistic(logit).clamp(PROB_CLAMP, 1.0 - PROB_CLAMP);
    PairEmbedding { z, logit, p }
}

/// Probabilities for `pairs` under `params` with message passing over `adj`.
pub fn score_pairs(
    params: &ModelParams,
    features: &Features,
    adj: &NormalizedAdjacency,
    pairs: &[NodePair],
) -> Result<Vec<f64>> {
    let fwd = forward(params, features, adj)?;
    let h = fwd.embeddings();
    Ok(pairs.iter().map(|p| pair_forward(params, h, p).p).collect())
}

/// Gradients of a scalar loss with respect to the encoder output and the
/// decoder/center parameters, produced by the pair-level loss.
#[derive(Clone, Debug)]
pub struct UpstreamGrads {
    pub embeddings: Array2<f64>,
    pub decoder_weight: Array1<f64>,
    pub decoder_bias: f64,
    pub centers: Array2<f64>,
}

impl UpstreamGrads {
    pub fn zeros(params: &ModelParams, num_nodes: usize) -> UpstreamGrads {
        UpstreamGrads {
            embeddings: Array2::zeros((num_nodes, params.hidden())),
            decoder_weight: Array1::zeros(params.hidden()),
            decoder_bias: 0.0,
            centers: Array2::zeros(params.centers.raw_dim()),
        }
    }

    /// Accumulates `dL/dz` of one pair into the two endpoint rows.
    pub fn add_pair(&mut self, h: &Array2<f64>, pair: &NodePair, dz: &ArrayView1<f64>) {
        let (u, v) = (pair.u(), pair.v());
        let hv = h.row(v);
        let hu = h.row(u);
        Zip::from(self.embeddings.row_mut(u)).and(dz).and(&hv).for_each(|g, &d, &x| *g += d * x);
        Zip::from(self.embeddings.row_mut(v)).and(dz).and(&hu).for_each(|g, &d, &x| *g += d * x);
    }
}

/// Backpropagates `upstream` through the GCN stack.
pub fn backward(
    params: &ModelParams,
    features: &Features,
    adj: &NormalizedAdjacency,
    fwd: &Forward,
    upstream: UpstreamGrads,
) -> Result<ParamGrads> {
    let num_layers = params.layers.len();
    if fwd.hidden.len() != num_layers || upstream.embeddings.dim() != fwd.embeddings().dim() {
        return Err(Error::Shape("forward cache does not match parameters".into()));
    }
    let mut layer_grads = vec![Array2::zeros((0, 0)); num_layers];
    let mut grad_h = upstream.embeddings;
    for l in (0..num_layers).rev() {
        if l + 1 < num_layers {
            Zip::from(&mut grad_h).and(&fwd.pre[l]).for_each(|g, &a| {
                if a <= 0.0 {
                    *g = 0.0;
                }
            });
        }
        let s = adj.spmm(&grad_h.view());
        layer_grads[l] = if l == 0 {
            features.transpose_matmul(&s.view())
        } else {
            fwd.hidden[l - 1].t().dot(&s)
        };
        if l > 0 {
            grad_h = s.dot(&params.layers[l].t());
        }
    }
    let decoder_weight = match params.decoder_kind {
        Decoder::HadamardLinear => upstream.decoder_weight,
        Decoder::InnerProduct => Array1::zeros(params.hidden()),
    };
    Ok(ParamGrads {
        layers: layer_grads,
        decoder_weight,
        decoder_bias: upstream.decoder_bias,
        centers: upstream.centers,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::Graph;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn random_instance(seed: u64, n: usize, f: usize, layers: usize, m: usize) -> (Graph, Features, ModelParams) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let edges: Vec<_> = (0..2 * n)
            .map(|_| (rng.random_range(0..n), rng.random_range(0..n)))
            .filter(|(a, b)| a != b)
            .collect();
        let g = Graph::from_edges(n, &edges).unwrap();
        let x = Array2::from_shape_fn((n, f), |_| rng.random_range(-1.0..1.0));
        let cfg = EncoderConfig { layers, hidden: m, decoder: Decoder::HadamardLinear, init_seed: seed };
        (g, Features::new(x), ModelParams::init(&cfg, f))
    }

    /// Dense reimplementation: explicit Â, ndarray products, explicit ReLU.
    fn dense_forward(params: &ModelParams, x: &Array2<f64>, g: &Graph) -> Array2<f64> {
        let n = g.num_nodes();
        let mut a = Array2::<f64>::eye(n);
        for p in g.edges() {
            a[[p.u(), p.v()]] = 1.0;
            a[[p.v(), p.u()]] = 1.0;
        }
        let d: Vec<f64> = a.rows().into_iter().map(|r| r.sum()).collect();
        let a_hat = Array2::from_shape_fn((n, n), |(i, j)| a[[i, j]] / (d[i] * d[j]).sqrt());
        let mut h = x.clone();
        for (l, w) in params.layers.iter().enumerate() {
            h = a_hat.dot(&h).dot(w);
            if l + 1 < params.layers.len() {
                h.mapv_inplace(|v| if v > 0.0 { v } else { 0.0 });
            }
        }
        h
    }

    #[test]
    fn zero_weights_give_zero_embeddings() {
        let (g, x, mut p) = random_instance(1, 8, 5, 3, 4);
        for w in &mut p.layers {
            w.fill(0.0);
        }
        let out = forward(&p, &x, &NormalizedAdjacency::new(&g)).unwrap();
        assert!(out.embeddings().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn sparse_forward_matches_dense_oracle() {
        for seed in 0..30 {
            let n = 5 + (seed as usize % 28);
            let layers = 1 + (seed as usize % 3);
            let (g, x, p) = random_instance(seed, n, 6, layers, 8);
            let got = forward(&p, &x, &NormalizedAdjacency::new(&g)).unwrap();
            let want = dense_forward(&p, x.dense(), &g);
            for (a, b) in got.embeddings().iter().zip(want.iter()) {
                assert!((a - b).abs() < 1e-10, "{a} vs {b}");
            }
        }
    }

    #[test]
    fn forward_is_permutation_equivariant() {
        let (g, x, p) = random_instance(7, 12, 4, 2, 4);
        let perm: Vec<usize> = (0..12).map(|i| (i * 5 + 3) % 12).collect(); // new i <- old perm[i]
        let mut inv = vec![0; 12];
        for (i, &o) in perm.iter().enumerate() {
            inv[o] = i;
        }
        let edges: Vec<(usize, usize)> = g.edges().map(|e| (inv[e.u()], inv[e.v()])).collect();
        let g2 = Graph::from_edges(12, &edges).unwrap();
        let x2 = x.permute_rows(&perm);
        let h1 = forward(&p, &x, &NormalizedAdjacency::new(&g)).unwrap();
        let h2 = forward(&p, &x2, &NormalizedAdjacency::new(&g2)).unwrap();
        for i in 0..12 {
            for k in 0..4 {
                assert!((h2.embeddings()[[i, k]] - h1.embeddings()[[perm[i], k]]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn pair_forward_basics() {
        let cfg = EncoderConfig { layers: 1, hidden: 3, decoder: Decoder::HadamardLinear, init_seed: 0 };
        let p = ModelParams::init(&cfg, 2);
        let h = Array2::zeros((4, 3));
        let e = pair_forward(&p, &h, &NodePair::new(0, 2).unwrap());
        assert_eq!(e.p, 0.5);

        let (g, x, p) = random_instance(3, 10, 4, 2, 8);
        let out = forward(&p, &x, &NormalizedAdjacency::new(&g)).unwrap();
        let h = out.embeddings();
        for (a, b) in [(0, 1), (3, 9), (4, 5)] {
            let e1 = pair_forward(&p, h, &NodePair::new(a, b).unwrap());
            let e2 = pair_forward(&p, h, &NodePair::new(b, a).unwrap());
            assert_eq!(e1, e2);
            // scalar loop oracle
            let mut logit = p.decoder_bias;
            for k in 0..8 {
                let z = h[[a, k]] * h[[b, k]];
                assert_eq!(e1.z[k], z);
                logit += p.decoder_weight[k] * z;
            }
            let prob = (1.0 / (1.0 + (-logit).exp())).clamp(1e-7, 1.0 - 1e-7);
            assert!((e1.p - prob).abs() < 1e-15);
        }
    }

    #[test]
    fn clamped_probabilities_have_zero_slope() {
        let cfg = EncoderConfig { layers: 1, hidden: 1, decoder: Decoder::HadamardLinear, init_seed: 0 };
        let mut p = ModelParams::init(&cfg, 1);
        p.decoder_bias = 40.0;
        let e = pair_forward(&p, &Array2::zeros((2, 1)), &NodePair::new(0, 1).unwrap());
        assert_eq!(e.p, 1.0 - 1e-7);
        assert_eq!(e.dp_dlogit(), 0.0);
    }

    #[test]
    fn zero_upstream_gives_zero_grads() {
        let (g, x, p) = random_instance(9, 10, 3, 3, 4);
        let adj = NormalizedAdjacency::new(&g);
        let fwd = forward(&p, &x, &adj).unwrap();
        let grads = backward(&p, &x, &adj, &fwd, UpstreamGrads::zeros(&p, 10)).unwrap();
        assert_eq!(grads.max_abs(), 0.0);
    }

    #[test]
    fn backward_rejects_mismatched_cache() {
        let (g, x, p) = random_instance(9, 10, 3, 3, 4);
        let adj = NormalizedAdjacency::new(&g);
        let mut fwd = forward(&p, &x, &adj).unwrap();
        fwd.hidden.pop();
        assert!(matches!(
            backward(&p, &x, &adj, &fwd, UpstreamGrads::zeros(&p, 10)),
            Err(Error::Shape(_))
        ));
    }
}
