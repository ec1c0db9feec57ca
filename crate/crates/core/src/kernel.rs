//! Covariance functions and the finite decision set they are evaluated on.
//!
//! Three kernel families are supported, all with per-dimension (ARD)
//! lengthscales:
//!
//! * squared exponential: `k(x, x') = s * exp(-1/2 * sum_j ((x_j - x'_j) / l_j)^2)`
//! * Matern with smoothness 1/2, 3/2 or 5/2 over the scaled distance
//!   `r = sqrt(sum_j ((x_j - x'_j) / l_j)^2)`
//! * linear ARD: `k(x, x') = sum_j x_j * x'_j / l_j^2`
//!
//! Evaluation is pure; matrices are built one unordered pair at a time and
//! mirrored so symmetry holds exactly.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Finite, indexed collection of candidate decisions in `R^d`.
///
/// Points are stored flat; index `i` refers to the `i`-th point for the
/// lifetime of the set.
#[derive(Debug, Clone, PartialEq)]
pub struct DecisionSet {
    data: Vec<f64>,
    dim: usize,
}

impl DecisionSet {
    /// Build from explicit points. All points must share one dimension and
    /// the set must be non-empty.
    pub fn new(points: Vec<Vec<f64>>) -> Result<Self> {
        let Some(first) = points.first() else {
            return Err(Error::InvalidInput("decision set must be non-empty".into()));
        };
        let dim = first.len();
        if dim == 0 {
            return Err(Error::InvalidInput("decision points must have dimension >= 1".into()));
        }
        let mut data = Vec::with_capacity(points.len() * dim);
        for p in &points {
            if p.len() != dim {
                return Err(Error::DimensionMismatch { expected: dim, got: p.len() });
            }
            data.extend_from_slice(p);
        }
        Ok(Self { data, dim })
    }

    /// Build from a flat row-major buffer of `len * dim` coordinates.
    pub fn from_flat(data: Vec<f64>, dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidInput("decision points must have dimension >= 1".into()));
        }
        if data.is_empty() || !data.len().is_multiple_of(dim) {
            return Err(Error::InvalidInput(format!(
                "flat buffer of length {} is not a non-empty multiple of dim {}",
                data.len(),
                dim
            )));
        }
        Ok(Self { data, dim })
    }

    /// Evenly spaced product grid. `bounds[j] = (lo, hi)` and
    /// `resolution[j]` points per axis, endpoints included (a single point
    /// sits at `lo`).
    pub fn grid(bounds: &[(f64, f64)], resolution: &[usize]) -> Result<Self> {
        if bounds.is_empty() || bounds.len() != resolution.len() {
            return Err(Error::InvalidInput(
                "grid needs matching, non-empty bounds and resolution lists".into(),
            ));
        }
        let mut axes: Vec<Vec<f64>> = Vec::with_capacity(bounds.len());
        for (&(lo, hi), &n) in bounds.iter().zip(resolution) {
            if n == 0 {
                return Err(Error::InvalidInput("grid resolution must be >= 1".into()));
            }
            if !(lo < hi) && n > 1 {
                return Err(Error::InvalidInput(format!(
                    "grid bounds ({lo}, {hi}) must satisfy lo < hi"
                )));
            }
            let axis = if n == 1 {
                vec![lo]
            } else {
                (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect()
            };
            axes.push(axis);
        }
        let dim = axes.len();
        let total: usize = axes.iter().map(Vec::len).product();
        let mut data = Vec::with_capacity(total * dim);
        let mut idx = vec![0usize; dim];
        loop {
            for (j, &i) in idx.iter().enumerate() {
                data.push(axes[j][i]);
            }
            // Odometer increment, last axis fastest.
            let mut j = dim;
            loop {
                if j == 0 {
                    return Self::from_flat(data, dim);
                }
                j -= 1;
                idx[j] += 1;
                if idx[j] < axes[j].len() {
                    break;
                }
                idx[j] = 0;
            }
        }
    }

    pub fn len(&self) -> usize {
        self.data.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty() // construction forbids this; kept for len/is_empty symmetry
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn points(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks_exact(self.dim)
    }
}

/// Covariance function family.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum KernelFamily {
    RbfArd,
    Matern,
    LinearArd,
}

/// Matern smoothness; only the closed-form orders are supported.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub enum MaternSmoothness {
    Half,
    ThreeHalves,
    FiveHalves,
}

impl TryFrom<f64> for MaternSmoothness {
    type Error = String;

    fn try_from(v: f64) -> std::result::Result<Self, String> {
        if v == 0.5 {
            Ok(Self::Half)
        } else if v == 1.5 {
            Ok(Self::ThreeHalves)
        } else if v == 2.5 {
            Ok(Self::FiveHalves)
        } else {
            Err(format!("matern smoothness must be 0.5, 1.5 or 2.5, got {v}"))
        }
    }
}

impl From<MaternSmoothness> for f64 {
    fn from(s: MaternSmoothness) -> f64 {
        match s {
            MaternSmoothness::Half => 0.5,
            MaternSmoothness::ThreeHalves => 1.5,
            MaternSmoothness::FiveHalves => 2.5,
        }
    }
}

fn default_smoothness() -> MaternSmoothness {
    MaternSmoothness::FiveHalves
}

/// Covariance function with its hyperparameters.
///
/// `signal_variance` is the value of `k(x, x)` for the stationary families;
/// the linear family ignores it. Lengthscales are per-dimension; the linear
/// family uses weights `1 / l_j^2`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KernelSpec {
    pub family: KernelFamily,
    pub signal_variance: f64,
    pub lengthscales: Vec<f64>,
    #[serde(default = "default_smoothness")]
    pub matern_smoothness: MaternSmoothness,
}

impl KernelSpec {
    pub fn new(family: KernelFamily, signal_variance: f64, lengthscales: Vec<f64>) -> Result<Self> {
        let spec = Self {
            family,
            signal_variance,
            lengthscales,
            matern_smoothness: default_smoothness(),
        };
        spec.validated()
    }

    pub fn with_smoothness(mut self, smoothness: MaternSmoothness) -> Self {
        self.matern_smoothness = smoothness;
        self
    }

    /// Consume and re-check the invariants; used after deserialization.
    pub fn validated(self) -> Result<Self> {
        let problems = self.validation_errors();
        if problems.is_empty() {
            Ok(self)
        } else {
            Err(Error::Config(problems.join("; ")))
        }
    }

    /// All invariant violations, for callers that collect every problem.
    pub fn validation_errors(&self) -> Vec<String> {
        let mut problems = Vec::new();
        if !(self.signal_variance > 0.0) {
            problems.push(format!(
                "kernel signal_variance must be > 0, got {}",
                self.signal_variance
            ));
        }
        if self.lengthscales.is_empty() {
            problems.push("kernel lengthscales must be non-empty".into());
        }
        for (j, l) in self.lengthscales.iter().enumerate() {
            if !(*l > 0.0) {
                problems.push(format!("kernel lengthscale[{j}] must be > 0, got {l}"));
            }
        }
        problems
    }

    /// Dimension the kernel is defined over.
    pub fn dim(&self) -> usize {
        self.lengthscales.len()
    }

    fn check_dim(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), got: x.len() });
        }
        Ok(())
    }
}

/// Evaluate `k(x, y)`.
pub fn eval(spec: &KernelSpec, x: &[f64], y: &[f64]) -> Result<f64> {
    spec.check_dim(x)?;
    spec.check_dim(y)?;
    Ok(eval_unchecked(spec, x, y))
}

/// `eval` without dimension checks, for hot paths that validated up front.
pub(crate) fn eval_unchecked(spec: &KernelSpec, x: &[f64], y: &[f64]) -> f64 {
    match spec.family {
        KernelFamily::RbfArd => {
            let d2 = scaled_sq_dist(x, y, &spec.lengthscales);
            spec.signal_variance * (-0.5 * d2).exp()
        }
        KernelFamily::Matern => {
            let r = scaled_sq_dist(x, y, &spec.lengthscales).sqrt();
            let s = spec.signal_variance;
            match spec.matern_smoothness {
                MaternSmoothness::Half => s * (-r).exp(),
                MaternSmoothness::ThreeHalves => {
                    let a = 3f64.sqrt() * r;
                    s * (1.0 + a) * (-a).exp()
                }
                MaternSmoothness::FiveHalves => {
                    let a = 5f64.sqrt() * r;
                    s * (1.0 + a + a * a / 3.0) * (-a).exp()
                }
            }
        }
        KernelFamily::LinearArd => x
            .iter()
            .zip(y)
            .zip(&spec.lengthscales)
            .map(|((xi, yi), l)| xi * yi / (l * l))
            .sum(),
    }
}

fn scaled_sq_dist(x: &[f64], y: &[f64], lengthscales: &[f64]) -> f64 {
    x.iter()
        .zip(y)
        .zip(lengthscales)
        .map(|((xi, yi), l)| {
            let d = (xi - yi) / l;
            d * d
        })
        .sum()
}

/// Row vector `[k(x, p) for p in points]`.
pub fn eval_vector(spec: &KernelSpec, x: &[f64], points: &DecisionSet) -> Result<Vec<f64>> {
    spec.check_dim(x)?;
    if points.dim() != spec.dim() {
        return Err(Error::DimensionMismatch { expected: spec.dim(), got: points.dim() });
    }
    Ok(points.points().map(|p| eval_unchecked(spec, x, p)).collect())
}

/// Full kernel matrix over `points`, exactly symmetric: each unordered pair
/// is evaluated once and mirrored.
#[allow(clippy::needless_range_loop)]
pub fn eval_matrix(spec: &KernelSpec, points: &DecisionSet) -> Result<Vec<Vec<f64>>> {
    if points.dim() != spec.dim() {
        return Err(Error::DimensionMismatch { expected: spec.dim(), got: points.dim() });
    }
    let n = points.len();
    let mut m = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in i..n {
            let v = eval_unchecked(spec, points.point(i), points.point(j));
            m[i][j] = v;
            m[j][i] = v;
        }
    }
    Ok(m)
}
