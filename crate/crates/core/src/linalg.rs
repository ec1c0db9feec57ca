//! Growable Cholesky factors.
//!
//! Posterior updates append one conditioning point at a time, so the factor
//! of `K + sigma^2 I` is stored packed and extended by a single forward
//! substitution per point instead of being recomputed from scratch.

use crate::error::{Error, Result};

/// Jitter ladder used when a pivot comes out non-positive, as multiples of
/// the kernel's signal variance. The first rung is "no jitter".
const EXTEND_LADDER: [f64; 3] = [0.0, 1e-10, 1e-8];

/// Lower-triangular Cholesky factor stored packed row-major: row `i`
/// occupies `i + 1` entries starting at `i * (i + 1) / 2`.
#[derive(Debug, Clone, PartialEq, Default)]
pub(crate) struct CholeskyFactor {
    data: Vec<f64>,
    n: usize,
}

impl CholeskyFactor {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn row(&self, i: usize) -> &[f64] {
        let start = i * (i + 1) / 2;
        &self.data[start..start + i + 1]
    }

    pub fn diag(&self, i: usize) -> f64 {
        self.data[i * (i + 1) / 2 + i]
    }

    /// Sum of the log diagonal entries, i.e. half the log determinant of the
    /// factored matrix.
    pub fn sum_log_diag(&self) -> f64 {
        (0..self.n).map(|i| self.diag(i).ln()).sum()
    }

    /// Extend the factored matrix by one row/column. `cross[j]` is the new
    /// matrix entry against existing row `j` and `diag` the new diagonal
    /// entry. On a non-positive pivot the jitter ladder is applied to the
    /// new diagonal entry, scaled by `jitter_unit`; the jitter actually used
    /// is returned.
    pub fn extend(&mut self, cross: &[f64], diag: f64, jitter_unit: f64) -> Result<f64> {
        debug_assert_eq!(cross.len(), self.n);
        let mut w = cross.to_vec();
        self.solve_lower(&mut w);
        let residual = diag - w.iter().map(|v| v * v).sum::<f64>();
        for rung in EXTEND_LADDER {
            let jitter = rung * jitter_unit;
            let pivot_sq = residual + jitter;
            if pivot_sq > 0.0 {
                self.data.extend_from_slice(&w);
                self.data.push(pivot_sq.sqrt());
                self.n += 1;
                return Ok(jitter);
            }
        }
        Err(Error::Factorization {
            size: self.n + 1,
            pivot: residual,
            jitter: EXTEND_LADDER[EXTEND_LADDER.len() - 1] * jitter_unit,
        })
    }

    /// Forward substitution: overwrite `rhs` with `L^-1 rhs`.
    pub fn solve_lower(&self, rhs: &mut [f64]) {
        debug_assert_eq!(rhs.len(), self.n);
        for i in 0..self.n {
            let row = self.row(i);
            let mut acc = rhs[i];
            for (lij, rj) in row[..i].iter().zip(rhs.iter()) {
                acc -= lij * rj;
            }
            rhs[i] = acc / row[i];
        }
    }

    /// Backward substitution: overwrite `rhs` with `L^-T rhs`.
    #[allow(clippy::needless_range_loop)]
    pub fn solve_lower_transpose(&self, rhs: &mut [f64]) {
        debug_assert_eq!(rhs.len(), self.n);
        for i in (0..self.n).rev() {
            let mut acc = rhs[i];
            for k in i + 1..self.n {
                acc -= self.data[k * (k + 1) / 2 + i] * rhs[k];
            }
            rhs[i] = acc / self.diag(i);
        }
    }

    /// Solve `(L L^T) x = rhs` in place.
    pub fn solve(&self, rhs: &mut [f64]) {
        self.solve_lower(rhs);
        self.solve_lower_transpose(rhs);
    }
}

/// Factor a dense symmetric matrix given by `entry(i, j)`, restarting with a
/// progressively larger global diagonal jitter if a pivot fails. Returns the
/// factor and the jitter applied to the whole diagonal.
pub(crate) fn factor_dense(
    n: usize,
    entry: impl Fn(usize, usize) -> f64,
    jitter_unit: f64,
) -> Result<(CholeskyFactor, f64)> {
    // One more rung than the incremental ladder: full kernel matrices over
    // dense grids are far worse conditioned than noise-regularized ones.
    const LADDER: [f64; 4] = [0.0, 1e-10, 1e-8, 1e-6];
    let mut cross = Vec::with_capacity(n.saturating_sub(1));
    let mut last_err = Error::Internal("empty jitter ladder".into());
    for rung in LADDER {
        let jitter = rung * jitter_unit;
        let mut factor = CholeskyFactor::new();
        let mut ok = true;
        for i in 0..n {
            cross.clear();
            cross.extend((0..i).map(|j| entry(i, j)));
            // Per-entry ladder disabled (unit 0): restart globally instead.
            match factor.extend(&cross, entry(i, i) + jitter, 0.0) {
                Ok(_) => {}
                Err(e) => {
                    ok = false;
                    last_err = e;
                    break;
                }
            }
        }
        if ok {
            return Ok((factor, jitter));
        }
    }
    Err(last_err)
}
