use ndarray::{Array2, ArrayView2};

/// Node feature matrix.
///
/// Bag-of-words style inputs are mostly zero, so a row-compressed copy is
/// kept whenever fewer than a quarter of the entries are non-zero; the first
/// GCN layer's products then cost O(nnz · m) instead of O(N · f · m).
#[derive(Clone, Debug, PartialEq)]
pub struct Features {
    dense: Array2<f64>,
    sparse: Option<SparseRows>,
}

#[derive(Clone, Debug, PartialEq)]
struct SparseRows {
    offsets: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<f64>,
}

impl Features {
    pub fn new(dense: Array2<f64>) -> Features {
        let nnz = dense.iter().filter(|&&x| x != 0.0).count();
        let sparse = (nnz * 4 < dense.len()).then(|| {
            let mut offsets = Vec::with_capacity(dense.nrows() + 1);
            let mut cols = Vec::with_capacity(nnz);
            let mut vals = Vec::with_capacity(nnz);
            offsets.push(0);
            for row in dense.rows() {
                for (j, &x) in row.iter().enumerate() {
                    if x != 0.0 {
                        cols.push(j);
                        vals.push(x);
                    }
                }
                offsets.push(cols.len());
            }
            SparseRows { offsets, cols, vals }
        });
        Features { dense, sparse }
    }

    pub fn rows(&self) -> usize {
        self.dense.nrows()
    }

    pub fn dim(&self) -> usize {
        self.dense.ncols()
    }

    pub fn dense(&self) -> &Array2<f64> {
        &self.dense
    }

    pub fn is_sparse(&self) -> bool {
        self.sparse.is_some()
    }

    /// `X · W`.
    pub fn matmul(&self, w: &ArrayView2<f64>) -> Array2<f64> {
        match &self.sparse {
            None => self.dense.dot(w),
            Some(s) => {
                let m = w.ncols();
                let mut out = Array2::zeros((self.rows(), m));
                for i in 0..self.rows() {
                    let mut out_row = out.row_mut(i);
                    for k in s.offsets[i]..s.offsets[i + 1] {
                        out_row.scaled_add(s.vals[k], &w.row(s.cols[k]));
                    }
                }
                out
            }
        }
    }

    /// `Xᵀ · G`.
    pub fn transpose_matmul(&self, g: &ArrayView2<f64>) -> Array2<f64> {
        match &self.sparse {
            None => self.dense.t().dot(g),
            Some(s) => {
                let mut out = Array2::zeros((self.dim(), g.ncols()));
                for i in 0..self.rows() {
                    let g_row = g.row(i);
                    for k in s.offsets[i]..s.offsets[i + 1] {
                        out.row_mut(s.cols[k]).scaled_add(s.vals[k], &g_row);
                    }
                }
                out
            }
        }
    }

    /// Rows reordered so that new row `i` is old row `perm[i]`.
    pub fn permute_rows(&self, perm: &[usize]) -> Features {
        let mut dense = Array2::zeros(self.dense.raw_dim());
        for (i, &src) in perm.iter().enumerate() {
            dense.row_mut(i).assign(&self.dense.row(src));
        }
        Features::new(dense)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn sparse_and_dense_paths_agree() {
        let mut x = Array2::zeros((6, 10));
        x[[0, 3]] = 1.0;
        x[[2, 9]] = -2.5;
        x[[5, 0]] = 0.5;
        let f = Features::new(x.clone());
        assert!(f.is_sparse());
        let w = Array2::from_shape_fn((10, 4), |(i, j)| (i * 4 + j) as f64 * 0.1 - 1.0);
        let g = Array2::from_shape_fn((6, 4), |(i, j)| (i + 2 * j) as f64 - 3.0);
        let dx = x.dot(&w);
        let dt = x.t().dot(&g);
        assert!((&f.matmul(&w.view()) - &dx).iter().all(|d| d.abs() < 1e-12));
        assert!((&f.transpose_matmul(&g.view()) - &dt).iter().all(|d| d.abs() < 1e-12));

        let dense = Features::new(array![[1.0, 2.0], [3.0, 4.0]]);
        assert!(!dense.is_sparse());
    }
}
