use super::dictionary::{dot, Mat};

/// Sparse code over a dictionary: `coefficients[i]` weights atom
/// `support[i]`, in selection order.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SparseCode {
    pub support: Vec<usize>,
    pub coefficients: Vec<f64>,
}

impl SparseCode {
    pub fn is_empty(&self) -> bool {
        self.support.is_empty()
    }

    pub fn len(&self) -> usize {
        self.support.len()
    }

    /// `D x`.
    pub fn apply(&self, dict: &Mat) -> Vec<f64> {
        let mut out = vec![0.0; dict.rows()];
        for (&k, &c) in self.support.iter().zip(&self.coefficients) {
            for (o, d) in out.iter_mut().zip(dict.col(k)) {
                *o += c * d;
            }
        }
        out
    }

    /// `z - D x`.
    pub fn residual(&self, z: &[f64], dict: &Mat) -> Vec<f64> {
        let mut r = z.to_vec();
        for (&k, &c) in self.support.iter().zip(&self.coefficients) {
            for (o, d) in r.iter_mut().zip(dict.col(k)) {
                *o -= c * d;
            }
        }
        r
    }
}

/// OMP against a fixed dictionary with a precomputed Gram matrix
/// (Cholesky-updated batch OMP).
pub struct Coder<'a> {
    dict: &'a Mat,
    gram: Vec<f64>,
}

impl<'a> Coder<'a> {
    pub fn new(dict: &'a Mat) -> Self {
        Self { dict, gram: dict.gram() }
    }

    pub fn dict(&self) -> &Mat {
        self.dict
    }

    /// Greedy selection of up to `max_atoms` atoms; stops early once the
    /// residual norm is at most `eps * |z|`, or when the next atom is
    /// linearly dependent on the chosen ones.
    pub fn code(&self, z: &[f64], max_atoms: usize, eps: f64) -> SparseCode {
        let alpha = self.dict.t_mul(z);
        self.code_from_correlations(&alpha, dot(z, z), max_atoms, eps)
    }

    /// As [`Coder::code`] given `alpha = D^T z` and `|z|^2`.
    pub fn code_from_correlations(&self, alpha: &[f64], z_norm2: f64, max_atoms: usize, eps: f64) -> SparseCode {
        let k = self.dict.cols();
        let g = &self.gram;
        let tol2 = eps * eps * z_norm2;
        let mut support: Vec<usize> = Vec::with_capacity(max_atoms);
        let mut chol: Vec<Vec<f64>> = Vec::with_capacity(max_atoms);
        let mut x: Vec<f64> = Vec::new();
        let mut corr = alpha.to_vec();
        let mut res2 = z_norm2;
        while support.len() < max_atoms.min(k) && res2 > tol2 && z_norm2 > 0.0 {
            let mut best = None;
            let mut best_v = 0.0;
            for (i, &c) in corr.iter().enumerate() {
                if c.abs() > best_v && !support.contains(&i) {
                    best_v = c.abs();
                    best = Some(i);
                }
            }
            let Some(j) = best else { break };
            let col: Vec<f64> = support.iter().map(|&s| g[s * k + j]).collect();
            let w = forward(&chol, &col);
            let gjj = g[j * k + j];
            let pivot = gjj - dot(&w, &w);
            if pivot <= 1e-10 * gjj {
                break;
            }
            let mut row = w;
            row.push(pivot.sqrt());
            chol.push(row);
            support.push(j);
            let rhs: Vec<f64> = support.iter().map(|&s| alpha[s]).collect();
            x = backward(&chol, &forward(&chol, &rhs));
            for (i, c) in corr.iter_mut().enumerate() {
                *c = alpha[i] - support.iter().zip(&x).map(|(&s, &xs)| g[i * k + s] * xs).sum::<f64>();
            }
            res2 = (z_norm2 - dot(&rhs, &x)).max(0.0);
        }
        SparseCode { support, coefficients: x }
    }
}

/// Solves `L y = b` for lower-triangular `L` stored by rows.
fn forward(l: &[Vec<f64>], b: &[f64]) -> Vec<f64> {
    let mut y = Vec::with_capacity(b.len());
    for (i, row) in l.iter().enumerate() {
        let s: f64 = (0..i).map(|j| row[j] * y[j]).sum();
        y.push((b[i] - s) / row[i]);
    }
    y
}

/// Solves `L^T x = y`.
fn backward(l: &[Vec<f64>], y: &[f64]) -> Vec<f64> {
    let n = y.len();
    let mut x = vec![0.0; n];
    for i in (0..n).rev() {
        let s: f64 = (i + 1..n).map(|j| l[j][i] * x[j]).sum();
        x[i] = (y[i] - s) / l[i][i];
    }
    x
}

/// One-off OMP of `feature` over `dl`. Build a [`Coder`] instead when many
/// vectors share a dictionary.
pub fn sparse_code(feature: &[f64], dl: &Mat, max_atoms: usize, eps: f64) -> SparseCode {
    Coder::new(dl).code(feature, max_atoms, eps)
}
