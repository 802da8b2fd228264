use std::sync::OnceLock;

use crate::matrix::{dot, DenseMatrix};
use crate::types::Dataset;

/// Flattened predictors and covariates of a dataset, shared read-only by
/// every level fitted on it. The Gram matrix is built on first use.
pub struct Design {
    n: usize,
    d1: usize,
    d2: usize,
    p: usize,
    x: Vec<f64>,
    w: Vec<f64>,
    gram: OnceLock<Vec<f64>>,
}

impl Design {
    pub fn from_dataset(data: &Dataset) -> Self {
        let (d1, d2, p) = data.dims();
        let n = data.len();
        let mut x = Vec::with_capacity(n * d1 * d2);
        let mut w = Vec::with_capacity(n * p);
        for s in data.samples() {
            x.extend_from_slice(s.predictor.as_slice());
            w.extend_from_slice(&s.covariates);
        }
        Design {
            n,
            d1,
            d2,
            p,
            x,
            w,
            gram: OnceLock::new(),
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn dims(&self) -> (usize, usize, usize) {
        (self.d1, self.d2, self.p)
    }

    fn width(&self) -> usize {
        self.d1 * self.d2
    }

    #[inline]
    pub fn x(&self, i: usize) -> &[f64] {
        let d = self.width();
        &self.x[i * d..(i + 1) * d]
    }

    #[inline]
    pub fn w(&self, i: usize) -> &[f64] {
        &self.w[i * self.p..(i + 1) * self.p]
    }

    /// Kᵢⱼ = ⟨Xᵢ, Xⱼ⟩, row-major n×n.
    pub fn gram(&self) -> &[f64] {
        self.gram.get_or_init(|| {
            let n = self.n;
            let mut k = vec![0.0; n * n];
            for i in 0..n {
                for j in 0..=i {
                    let v = dot(self.x(i), self.x(j));
                    k[i * n + j] = v;
                    k[j * n + i] = v;
                }
            }
            k
        })
    }

    /// ⟨Xᵢ, B⟩ for every sample.
    pub fn trace_values(&self, b: &DenseMatrix) -> Vec<f64> {
        (0..self.n).map(|i| dot(self.x(i), b.as_slice())).collect()
    }

    /// Wᵢᵀc for every sample.
    pub fn covariate_values(&self, c: &[f64]) -> Vec<f64> {
        (0..self.n).map(|i| dot(self.w(i), c)).collect()
    }

    /// ⟨Xᵢ, B⟩ + b + Wᵢᵀc for every sample.
    pub fn decisions(&self, b: &DenseMatrix, intercept: f64, c: &[f64]) -> Vec<f64> {
        (0..self.n)
            .map(|i| dot(self.x(i), b.as_slice()) + intercept + dot(self.w(i), c))
            .collect()
    }

    /// Σᵢ coefᵢ Xᵢ as a d1×d2 matrix.
    pub fn combine(&self, coefs: &[f64]) -> DenseMatrix {
        let mut out = vec![0.0; self.width()];
        for (i, &c) in coefs.iter().enumerate() {
            if c == 0.0 {
                continue;
            }
            for (o, x) in out.iter_mut().zip(self.x(i)) {
                *o += c * x;
            }
        }
        DenseMatrix::from_vec_unchecked(self.d1, self.d2, out)
    }
}
