//! Objectives with exact and stochastic first-order oracles.
//!
//! Three kinds are provided:
//!
//! * separable quadratics `F(w) = 1/2 sum_j d_j (w_j - s_j)^2` with additive
//!   isotropic Gaussian gradient noise of total variance `sigma^2`;
//! * l2-regularized logistic regression over a [`Dataset`], whose stochastic
//!   oracle samples one example uniformly with replacement;
//! * an l2-augmented wrapper `F(w) + lambda/2 ||w - w0||^2` around any of the
//!   above, which turns a convex objective into a `lambda`-strongly convex one.
//!
//! Each objective carries estimates `mu_est <= l_est` of its strong convexity
//! and smoothness. Third-order smoothness only enters convergence rates and
//! has no representation here.
//!
//! Oracle draw accounting: a quadratic with `sigma > 0` consumes `dim`
//! Gaussian draws per call (`dim` counter steps), a noiseless quadratic none;
//! a logistic objective consumes one index draw; the augmented wrapper
//! consumes whatever its inner objective does.

use std::sync::Arc;

use thiserror::Error;

use crate::dataio::{dataset_stats, Dataset};
use crate::rng::RngStream;
use crate::vector::{dist_sq, norm_sq};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ObjectiveError {
    #[error("dimension mismatch: objective has dim {expected}, got vector of length {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("input vector has non-finite entries")]
    NonFinite,
    #[error("invalid objective parameter: {0}")]
    InvalidParameter(String),
    #[error("dataset has no samples")]
    EmptyDataset,
}

/// Anything that can hand out unbiased stochastic gradients.
///
/// Implementations read randomness only from the caller's streams, so one
/// oracle can be shared across threads. `sample_into` trusts that `w` and
/// `out` have length [`dim`](GradientOracle::dim); callers validate once up
/// front.
pub trait GradientOracle: Sync {
    fn dim(&self) -> usize;

    /// Number of independent streams consumed per query.
    fn streams_per_query(&self) -> usize {
        1
    }

    fn sample_into(&self, w: &[f64], streams: &mut [RngStream], out: &mut [f64]);
}

/// Exact-gradient access, used by deterministic methods.
pub trait DeterministicGradient {
    fn dim(&self) -> usize;
    fn gradient_into(&self, w: &[f64], out: &mut [f64]);
}

#[derive(Clone, Debug)]
pub struct Objective {
    dim: usize,
    mu_est: f64,
    l_est: f64,
    kind: Kind,
}

#[derive(Clone, Debug)]
enum Kind {
    Quadratic {
        spectrum: Vec<f64>,
        shift: Vec<f64>,
        sigma: f64,
    },
    Logistic {
        data: Arc<Dataset>,
        lambda: f64,
    },
    Augmented {
        inner: Box<Objective>,
        lambda: f64,
        anchor: Vec<f64>,
    },
}

fn invalid(msg: impl Into<String>) -> ObjectiveError {
    ObjectiveError::InvalidParameter(msg.into())
}

impl Objective {
    /// Separable quadratic with `mu_est = min(spectrum)`, `l_est = max(spectrum)`.
    pub fn quadratic(
        spectrum: Vec<f64>,
        shift: Vec<f64>,
        sigma: f64,
    ) -> Result<Self, ObjectiveError> {
        let mu = spectrum.iter().copied().fold(f64::INFINITY, f64::min);
        let l = spectrum.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        Self::quadratic_with_bounds(spectrum, shift, sigma, mu, l)
    }

    /// Separable quadratic with explicitly supplied `(mu_est, l_est)`; every
    /// spectrum entry must lie in `[mu_est, l_est]`.
    pub fn quadratic_with_bounds(
        spectrum: Vec<f64>,
        shift: Vec<f64>,
        sigma: f64,
        mu_est: f64,
        l_est: f64,
    ) -> Result<Self, ObjectiveError> {
        let dim = spectrum.len();
        if dim == 0 {
            return Err(invalid("quadratic needs a nonempty spectrum"));
        }
        if shift.len() != dim {
            return Err(ObjectiveError::DimensionMismatch {
                expected: dim,
                got: shift.len(),
            });
        }
        if !(sigma >= 0.0 && sigma.is_finite()) {
            return Err(invalid(format!(
                "noise level must be finite and >= 0, got {sigma}"
            )));
        }
        if !(mu_est >= 0.0 && l_est > 0.0 && mu_est <= l_est && l_est.is_finite()) {
            return Err(invalid(format!(
                "need 0 <= mu_est <= l_est, l_est > 0; got ({mu_est}, {l_est})"
            )));
        }
        if spectrum.iter().any(|&d| !(d >= mu_est && d <= l_est)) {
            return Err(invalid("spectrum entries must lie in [mu_est, l_est]"));
        }
        if !shift.iter().all(|x| x.is_finite()) {
            return Err(ObjectiveError::NonFinite);
        }
        Ok(Self {
            dim,
            mu_est,
            l_est,
            kind: Kind::Quadratic {
                spectrum,
                shift,
                sigma,
            },
        })
    }

    /// Identically zero function on `R^dim`. Any positive `L` is a valid
    /// smoothness estimate; 1 is used.
    pub fn zero(dim: usize) -> Result<Self, ObjectiveError> {
        Self::quadratic_with_bounds(vec![0.0; dim], vec![0.0; dim], 0.0, 0.0, 1.0)
    }

    /// `(1/n) sum log(1 + exp(-y <x, w>)) + lambda/2 ||w||^2`.
    pub fn logistic(data: Arc<Dataset>, lambda: f64) -> Result<Self, ObjectiveError> {
        if data.dim() == 0 {
            return Err(invalid("dataset has zero features"));
        }
        let (mu_est, l_est) = smoothness_bounds(&data, lambda)?;
        Ok(Self {
            dim: data.dim(),
            mu_est,
            l_est,
            kind: Kind::Logistic { data, lambda },
        })
    }

    /// Wrap with `lambda/2 ||w - anchor||^2`.
    pub fn augment(&self, lambda: f64, anchor: Vec<f64>) -> Result<Self, ObjectiveError> {
        if !(lambda > 0.0 && lambda.is_finite()) {
            return Err(invalid(format!(
                "augmentation strength must be positive, got {lambda}"
            )));
        }
        self.check(&anchor)?;
        Ok(Self {
            dim: self.dim,
            mu_est: self.mu_est + lambda,
            l_est: self.l_est + lambda,
            kind: Kind::Augmented {
                inner: Box::new(self.clone()),
                lambda,
                anchor,
            },
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn mu_est(&self) -> f64 {
        self.mu_est
    }

    pub fn l_est(&self) -> f64 {
        self.l_est
    }

    /// Gradient-noise level `sigma` where it is known in closed form.
    pub fn noise_level(&self) -> Option<f64> {
        match &self.kind {
            Kind::Quadratic { sigma, .. } => Some(*sigma),
            Kind::Logistic { .. } => None,
            Kind::Augmented { inner, .. } => inner.noise_level(),
        }
    }

    /// Training set of a logistic objective (possibly wrapped).
    pub fn dataset(&self) -> Option<&Arc<Dataset>> {
        match &self.kind {
            Kind::Logistic { data, .. } => Some(data),
            Kind::Quadratic { .. } => None,
            Kind::Augmented { inner, .. } => inner.dataset(),
        }
    }

    fn check(&self, w: &[f64]) -> Result<(), ObjectiveError> {
        if w.len() != self.dim {
            return Err(ObjectiveError::DimensionMismatch {
                expected: self.dim,
                got: w.len(),
            });
        }
        if !w.iter().all(|x| x.is_finite()) {
            return Err(ObjectiveError::NonFinite);
        }
        Ok(())
    }

    pub fn eval(&self, w: &[f64]) -> Result<f64, ObjectiveError> {
        self.check(w)?;
        Ok(self.eval_unchecked(w))
    }

    pub fn grad(&self, w: &[f64]) -> Result<Vec<f64>, ObjectiveError> {
        self.check(w)?;
        let mut out = vec![0.0; self.dim];
        self.grad_unchecked(w, &mut out);
        Ok(out)
    }

    pub fn stoch_grad(
        &self,
        w: &[f64],
        stream: &mut RngStream,
    ) -> Result<Vec<f64>, ObjectiveError> {
        self.check(w)?;
        let mut out = vec![0.0; self.dim];
        self.stoch_grad_unchecked(w, stream, &mut out);
        Ok(out)
    }

    pub(crate) fn eval_unchecked(&self, w: &[f64]) -> f64 {
        match &self.kind {
            Kind::Quadratic {
                spectrum, shift, ..
            } => {
                0.5 * spectrum
                    .iter()
                    .zip(shift)
                    .zip(w)
                    .map(|((d, s), x)| d * (x - s) * (x - s))
                    .sum::<f64>()
            }
            Kind::Logistic { data, lambda } => {
                let loss: f64 = (0..data.n())
                    .map(|i| logistic_loss(data.label(i) * data.row(i).dot(w)))
                    .sum();
                loss / data.n() as f64 + 0.5 * lambda * norm_sq(w)
            }
            Kind::Augmented {
                inner,
                lambda,
                anchor,
            } => inner.eval_unchecked(w) + 0.5 * lambda * dist_sq(w, anchor),
        }
    }

    pub(crate) fn grad_unchecked(&self, w: &[f64], out: &mut [f64]) {
        match &self.kind {
            Kind::Quadratic {
                spectrum, shift, ..
            } => {
                for (((o, d), s), x) in out.iter_mut().zip(spectrum).zip(shift).zip(w) {
                    *o = d * (x - s);
                }
            }
            Kind::Logistic { data, lambda } => {
                out.iter_mut().for_each(|o| *o = 0.0);
                for i in 0..data.n() {
                    let row = data.row(i);
                    let y = data.label(i);
                    row.add_scaled_to(-y * sigmoid_neg(y * row.dot(w)), out);
                }
                let inv_n = 1.0 / data.n() as f64;
                for (o, x) in out.iter_mut().zip(w) {
                    *o = *o * inv_n + lambda * x;
                }
            }
            Kind::Augmented {
                inner,
                lambda,
                anchor,
            } => {
                inner.grad_unchecked(w, out);
                for ((o, x), a) in out.iter_mut().zip(w).zip(anchor) {
                    *o += lambda * (x - a);
                }
            }
        }
    }

    pub(crate) fn stoch_grad_unchecked(&self, w: &[f64], stream: &mut RngStream, out: &mut [f64]) {
        match &self.kind {
            Kind::Quadratic { sigma, .. } => {
                self.grad_unchecked(w, out);
                if *sigma > 0.0 {
                    // per-coordinate variance sigma^2 / dim, total sigma^2
                    let scale = sigma / (self.dim as f64).sqrt();
                    let mut noise = vec![0.0; self.dim];
                    stream.gaussian(&mut noise);
                    for (o, z) in out.iter_mut().zip(&noise) {
                        *o += scale * z;
                    }
                }
            }
            Kind::Logistic { data, lambda } => {
                let i = stream.draw_index(data.n());
                let row = data.row(i);
                let y = data.label(i);
                for (o, x) in out.iter_mut().zip(w) {
                    *o = lambda * x;
                }
                row.add_scaled_to(-y * sigmoid_neg(y * row.dot(w)), out);
            }
            Kind::Augmented {
                inner,
                lambda,
                anchor,
            } => {
                inner.stoch_grad_unchecked(w, stream, out);
                for ((o, x), a) in out.iter_mut().zip(w).zip(anchor) {
                    *o += lambda * (x - a);
                }
            }
        }
    }
}

impl GradientOracle for Objective {
    fn dim(&self) -> usize {
        self.dim
    }

    fn sample_into(&self, w: &[f64], streams: &mut [RngStream], out: &mut [f64]) {
        self.stoch_grad_unchecked(w, &mut streams[0], out);
    }
}

impl DeterministicGradient for Objective {
    fn dim(&self) -> usize {
        self.dim
    }

    fn gradient_into(&self, w: &[f64], out: &mut [f64]) {
        self.grad_unchecked(w, out);
    }
}

/// `log(1 + exp(-z))` without overflow.
#[inline]
pub fn logistic_loss(z: f64) -> f64 {
    (-z.abs()).exp().ln_1p() + (-z).max(0.0)
}

/// `1 / (1 + exp(z))`, the logistic sigmoid evaluated at `-z`.
#[inline]
pub fn sigmoid_neg(z: f64) -> f64 {
    if z >= 0.0 {
        let e = (-z).exp();
        e / (1.0 + e)
    } else {
        1.0 / (1.0 + z.exp())
    }
}

/// `(mu, L)` for l2-regularized logistic loss: `mu = lambda` and
/// `L = (1/(4n)) sum ||x_i||^2 + lambda`, which bounds the largest Hessian
/// eigenvalue through its trace.
pub fn smoothness_bounds(data: &Dataset, lambda: f64) -> Result<(f64, f64), ObjectiveError> {
    if data.n() == 0 {
        return Err(ObjectiveError::EmptyDataset);
    }
    if !(lambda >= 0.0 && lambda.is_finite()) {
        return Err(invalid(format!(
            "regularization must be finite and >= 0, got {lambda}"
        )));
    }
    let stats = dataset_stats(data);
    Ok((lambda, stats.mean_row_norm_sq / 4.0 + lambda))
}
