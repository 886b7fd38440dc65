use ndarray::{Array2, ArrayView2};

use crate::graph::Graph;

/// `D̃^{-1/2}(A+I)D̃^{-1/2}` in CSR form, self-loops included.
///
/// The matrix is symmetric, so it is its own transpose in backward passes.
#[derive(Clone, Debug)]
pub struct NormalizedAdjacency {
    offsets: Vec<usize>,
    cols: Vec<usize>,
    coefs: Vec<f64>,
}

impl NormalizedAdjacency {
    pub fn new(g: &Graph) -> NormalizedAdjacency {
        let n = g.num_nodes();
        let coef = |a: usize, b: usize| 1.0 / (((g.degree(a) + 1) * (g.degree(b) + 1)) as f64).sqrt();
        let mut offsets = Vec::with_capacity(n + 1);
        let mut cols = Vec::with_capacity(2 * g.num_edges() + n);
        let mut coefs = Vec::with_capacity(2 * g.num_edges() + n);
        offsets.push(0);
        for u in 0..n {
            let mut self_done = false;
            for &v in g.neighbors(u) {
                if !self_done && v > u {
                    cols.push(u);
                    coefs.push(coef(u, u));
                    self_done = true;
                }
                cols.push(v);
                coefs.push(coef(u, v));
            }
            if !self_done {
                cols.push(u);
                coefs.push(coef(u, u));
            }
            offsets.push(cols.len());
        }
        NormalizedAdjacency { offsets, cols, coefs }
    }

    pub fn num_nodes(&self) -> usize {
        self.offsets.len() - 1
    }

    /// `(column, coefficient)` entries of row `u`, columns ascending.
    pub fn row(&self, u: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let r = self.offsets[u]..self.offsets[u + 1];
        self.cols[r.clone()].iter().copied().zip(self.coefs[r].iter().copied())
    }

    /// `Â · X`.
    pub fn spmm(&self, x: &ArrayView2<f64>) -> Array2<f64> {
        let mut out = Array2::zeros((self.num_nodes(), x.ncols()));
        for u in 0..self.num_nodes() {
            let mut out_row = out.row_mut(u);
            for (v, c) in self.row(u) {
                out_row.scaled_add(c, &x.row(v));
            }
        }
        out
    }

    pub fn to_dense(&self) -> Array2<f64> {
        let n = self.num_nodes();
        let mut a = Array2::zeros((n, n));
        for u in 0..n {
            for (v, c) in self.row(u) {
                a[[u, v]] = c;
            }
        }
        a
    }
}
