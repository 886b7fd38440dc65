//! Dense brute-force oracles shared by integration and acceptance tests.
//! Nothing here calls into the library's numeric code.

#![allow(dead_code)]

use std::collections::BTreeSet;

use ltlp_core::encoder::{Decoder, EncoderConfig, ModelParams};
use ndarray::Array2;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

pub type Dense = Vec<Vec<bool>>;

/// Erdos-Renyi edge list with canonical `(a, b)`, `a < b`.
pub fn random_edges(rng: &mut ChaCha8Rng, n: usize, p: f64) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    for a in 0..n {
        for b in a + 1..n {
            if rng.random::<f64>() < p {
                out.push((a, b));
            }
        }
    }
    out
}

pub fn dense(n: usize, edges: &[(usize, usize)]) -> Dense {
    let mut m = vec![vec![false; n]; n];
    for &(a, b) in edges {
        m[a][b] = true;
        m[b][a] = true;
    }
    m
}

pub fn common_neighbors(adj: &Dense, u: usize, v: usize) -> Vec<usize> {
    (0..adj.len()).filter(|&w| adj[u][w] && adj[v][w]).collect()
}

pub fn degree(adj: &Dense, u: usize) -> usize {
    adj[u].iter().filter(|&&x| x).count()
}

/// `D̃^{-1/2}(A+I)D̃^{-1/2}` as a dense matrix.
pub fn normalized(adj: &Dense) -> Vec<Vec<f64>> {
    let n = adj.len();
    let deg: Vec<usize> = (0..n).map(|u| degree(adj, u) + 1).collect();
    let mut out = vec![vec![0.0; n]; n];
    for u in 0..n {
        for v in 0..n {
            if u == v || adj[u][v] {
                out[u][v] = 1.0 / ((deg[u] * deg[v]) as f64).sqrt();
            }
        }
    }
    out
}

/// Every non-edge `{a, b}` for which some sample `(u, v)` has `a = u` and
/// `b` adjacent to `v` (or the mirrored cases).
pub fn candidates(adj: &Dense, samples: &[(usize, usize)], tail_only: bool) -> BTreeSet<(usize, usize)> {
    let n = adj.len();
    let active: Vec<(usize, usize)> = samples
        .iter()
        .copied()
        .filter(|&(u, v)| !tail_only || common_neighbors(adj, u, v).is_empty())
        .collect();
    let mut out = BTreeSet::new();
    for a in 0..n {
        for b in a + 1..n {
            if adj[a][b] {
                continue;
            }
            let hit = active.iter().any(|&(u, v)| {
                (a == u && adj[v][b]) || (b == u && adj[v][a]) || (a == v && adj[u][b]) || (b == v && adj[u][a])
            });
            if hit {
                out.insert((a, b));
            }
        }
    }
    out
}

/// Parameters with every entry drawn from `U(-scale, scale)`. The inner
/// product decoder keeps its unit weights.
pub fn random_params(rng: &mut ChaCha8Rng, layers: usize, hidden: usize, in_dim: usize, decoder: Decoder, scale: f64) -> ModelParams {
    let cfg = EncoderConfig { layers, hidden, decoder, init_seed: rng.random() };
    let mut p = ModelParams::init(&cfg, in_dim);
    let keep_weight = decoder == Decoder::InnerProduct;
    let n_slices = p.slices_mut().len();
    for (i, s) in p.slices_mut().into_iter().enumerate() {
        if keep_weight && i == n_slices - 3 {
            continue;
        }
        for x in s.iter_mut() {
            *x = rng.random_range(-scale..scale);
        }
    }
    p
}

fn matmul(a: &[Vec<f64>], b: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let (n, k, m) = (a.len(), b.len(), b[0].len());
    let mut out = vec![vec![0.0; m]; n];
    for i in 0..n {
        for t in 0..k {
            for j in 0..m {
                out[i][j] += a[i][t] * b[t][j];
            }
        }
    }
    out
}

fn rows(a: &Array2<f64>) -> Vec<Vec<f64>> {
    a.outer_iter().map(|r| r.to_vec()).collect()
}

/// Node embeddings by dense triple loops: ReLU on every layer but the last.
pub fn embeddings(params: &ModelParams, x: &Array2<f64>, norm: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let mut h = rows(x);
    let last = params.layers.len() - 1;
    for (l, w) in params.layers.iter().enumerate() {
        h = matmul(norm, &matmul(&h, &rows(w)));
        if l < last {
            for r in h.iter_mut() {
                for v in r.iter_mut() {
                    *v = v.max(0.0);
                }
            }
        }
    }
    h
}

/// `w_ce * mean CE + w_re * mean squared center distance` over `batch`.
pub fn loss(params: &ModelParams, x: &Array2<f64>, norm: &[Vec<f64>], batch: &[(usize, usize, bool)], w_ce: f64, w_re: f64) -> f64 {
    let h = embeddings(params, x, norm);
    let m = params.hidden();
    let mut ce = 0.0;
    let mut re = 0.0;
    for &(u, v, label) in batch {
        let z: Vec<f64> = (0..m).map(|k| h[u][k] * h[v][k]).collect();
        let logit: f64 = match params.decoder_kind {
            Decoder::HadamardLinear => (0..m).map(|k| params.decoder_weight[k] * z[k]).sum::<f64>(),
            Decoder::InnerProduct => z.iter().sum::<f64>(),
        } + params.decoder_bias;
        let p = (1.0 / (1.0 + (-logit).exp())).clamp(1e-7, 1.0 - 1e-7);
        ce += if label { -p.ln() } else { -(1.0 - p).ln() };
        let c = label as usize;
        re += (0..m).map(|k| (z[k] - params.centers[[c, k]]).powi(2)).sum::<f64>();
    }
    let b = batch.len() as f64;
    w_ce * ce / b + w_re * re / b
}

pub struct GradCheck {
    pub max_rel_err: f64,
    /// `|library loss - oracle loss|` at the unperturbed point.
    pub loss_gap: f64,
    pub entries: usize,
}

/// Denominator floor of the relative error, so entries whose true gradient
/// is zero compare by absolute error.
pub const REL_FLOOR: f64 = 1e-3;

/// Central differences of [`loss`] against the library's analytic gradient
/// for one random instance drawn from `seed`.
pub fn gradient_check(seed: u64, step: f64) -> GradCheck {
    use ltlp_core::dataset::LabeledPair;
    use ltlp_core::encoder::{Features, NormalizedAdjacency};
    use ltlp_core::trainer::{loss_and_grads, Objective};
    use ltlp_core::{Graph, NodePair};
    use rand::SeedableRng;

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = rng.random_range(5..=20);
    let layers = rng.random_range(1..=3);
    let hidden = if rng.random::<bool>() { 4 } else { 8 };
    let in_dim = rng.random_range(2..=6);
    let decoder = if rng.random::<f64>() < 0.75 { Decoder::HadamardLinear } else { Decoder::InnerProduct };
    let objective = match seed % 3 {
        0 => Objective::CrossEntropy,
        1 => Objective::Combined { varphi: 0.0 },
        _ => Objective::Combined { varphi: rng.random() },
    };
    let (w_ce, w_re) = match objective {
        Objective::CrossEntropy => (1.0, 0.0),
        Objective::Combined { varphi } => (varphi, 1.0 - varphi),
    };

    let edges = random_edges(&mut rng, n, 0.3);
    let adj = dense(n, &edges);
    let g = Graph::from_edges(n, &edges).expect("valid edges");
    let x = Array2::from_shape_fn((n, in_dim), |_| rng.random_range(-1.0..1.0));
    let params = random_params(&mut rng, layers, hidden, in_dim, decoder, 0.6);
    let batch_len = rng.random_range(1..=8);
    let mut batch = Vec::new();
    while batch.len() < batch_len {
        let a = rng.random_range(0..n);
        let b = rng.random_range(0..n);
        if a != b {
            batch.push((a, b, rng.random::<bool>()));
        }
    }
    let labeled: Vec<LabeledPair> = batch
        .iter()
        .map(|&(a, b, l)| LabeledPair { pair: NodePair::new(a, b).unwrap(), label: l })
        .collect();

    let norm = normalized(&adj);
    let features = Features::new(x.clone());
    let (lib_loss, grads) =
        loss_and_grads(&params, &features, &NormalizedAdjacency::new(&g), &labeled, objective).expect("finite");
    let oracle = |p: &ModelParams| loss(p, &x, &norm, &batch, w_ce, w_re);
    let loss_gap = (lib_loss.total - oracle(&params)).abs();

    let analytic: Vec<Vec<f64>> = grads.slices().into_iter().map(|s| s.to_vec()).collect();
    let mut max_rel_err: f64 = 0.0;
    let mut entries = 0;
    for (si, g_slice) in analytic.iter().enumerate() {
        for (i, &a) in g_slice.iter().enumerate() {
            let mut plus = params.clone();
            plus.slices_mut()[si][i] += step;
            let mut minus = params.clone();
            minus.slices_mut()[si][i] -= step;
            let numeric = (oracle(&plus) - oracle(&minus)) / (2.0 * step);
            let rel = (a - numeric).abs() / a.abs().max(numeric.abs()).max(REL_FLOOR);
            max_rel_err = max_rel_err.max(rel);
            entries += 1;
        }
    }
    GradCheck { max_rel_err, loss_gap, entries }
}

/// Compares common neighbors, degree sums, the normalized adjacency and
/// candidate generation against dense enumeration on one random graph with
/// at most 64 nodes.
pub fn structural_check(seed: u64) -> Result<(), String> {
    use ltlp_core::dataset::LabeledPair;
    use ltlp_core::encoder::NormalizedAdjacency;
    use ltlp_core::sem::generate_candidates;
    use ltlp_core::{Graph, NodePair};
    use rand::SeedableRng;

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = rng.random_range(2..=64);
    let density = rng.random_range(0.02..0.3);
    let edges = random_edges(&mut rng, n, density);
    let adj = dense(n, &edges);
    let g = Graph::from_edges(n, &edges).map_err(|e| e.to_string())?;

    for u in 0..n {
        for v in u + 1..n {
            let p = NodePair::new(u, v).unwrap();
            if g.common_neighbors(&p).unwrap() != common_neighbors(&adj, u, v) {
                return Err(format!("common neighbors of ({u},{v})"));
            }
            if g.degree_pair(&p).unwrap() != degree(&adj, u) + degree(&adj, v) {
                return Err(format!("degree pair of ({u},{v})"));
            }
        }
    }

    let lib = NormalizedAdjacency::new(&g).to_dense();
    let oracle = normalized(&adj);
    for u in 0..n {
        for v in 0..n {
            if lib[[u, v]] != oracle[u][v] {
                return Err(format!("normalized adjacency entry ({u},{v})"));
            }
        }
    }

    let samples: Vec<(usize, usize)> = (0..rng.random_range(1..10))
        .map(|_| {
            let a = rng.random_range(0..n);
            (a, (a + rng.random_range(1..n)) % n)
        })
        .collect();
    let labeled: Vec<LabeledPair> = samples
        .iter()
        .map(|&(a, b)| LabeledPair { pair: NodePair::new(a, b).unwrap(), label: rng.random() })
        .collect();
    for tail_only in [false, true] {
        let got: Vec<(usize, usize)> = generate_candidates(&g, &labeled, tail_only)
            .map_err(|e| e.to_string())?
            .into_iter()
            .map(|p| (p.u(), p.v()))
            .collect();
        let want: Vec<(usize, usize)> = candidates(&adj, &samples, tail_only).into_iter().collect();
        if got != want {
            return Err(format!("candidates (tail_only = {tail_only})"));
        }
    }
    Ok(())
}
