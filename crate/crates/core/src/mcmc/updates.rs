//! Single-block updates used by every model sweep.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::{Beta, Distribution, StandardNormal};

use crate::error::{GmcError, Result};
use crate::priors::BetaParams;

/// Acceptance rate the adaptive random-walk steps aim for.
pub const TARGET_ACCEPTANCE: f64 = 0.44;
const MAX_STEP_OUT: usize = 200;
const MAX_SHRINK: usize = 500;

/// Gaussian likelihood cross-products `X^T X`, `X^T y` and the noise precision.
#[derive(Debug, Clone)]
pub struct ObsTerms {
    pub xtx: DMatrix<f64>,
    pub xty: DVector<f64>,
    pub noise_precision: f64,
}

/// Draws from `N(Q^{-1} h, Q^{-1})` given the canonical parameters.
pub fn sample_canonical_gaussian<R: Rng + ?Sized>(
    precision: DMatrix<f64>,
    linear: &DVector<f64>,
    rng: &mut R,
) -> Result<DVector<f64>> {
    let chol = precision.cholesky().ok_or(GmcError::NotPositiveDefinite)?;
    let mean = chol.solve(linear);
    let z = DVector::from_fn(linear.len(), |_, _| rng.sample::<f64, _>(StandardNormal));
    // Q = L L^T; L^{-T} z has covariance Q^{-1}
    let noise = chol
        .l()
        .transpose()
        .solve_upper_triangular(&z)
        .ok_or(GmcError::NotPositiveDefinite)?;
    Ok(mean + noise)
}

/// Conjugate Gaussian block: prior `N(m, P^{-1})` combined with the
/// likelihood terms `obs`, if any.
pub fn update_gaussian_block<R: Rng + ?Sized>(
    prior_mean: &DVector<f64>,
    prior_precision: &DMatrix<f64>,
    obs: Option<&ObsTerms>,
    rng: &mut R,
) -> Result<DVector<f64>> {
    let n = prior_mean.len();
    if prior_precision.shape() != (n, n) {
        return Err(GmcError::DimensionMismatch {
            expected: n,
            actual: prior_precision.nrows(),
        });
    }
    let mut q = prior_precision.clone();
    let mut h = prior_precision * prior_mean;
    if let Some(obs) = obs {
        if obs.xtx.shape() != (n, n) || obs.xty.len() != n {
            return Err(GmcError::DimensionMismatch {
                expected: n,
                actual: obs.xty.len(),
            });
        }
        q += &obs.xtx * obs.noise_precision;
        h += &obs.xty * obs.noise_precision;
    }
    sample_canonical_gaussian(q, &h, rng)
}

/// Random-walk proposal scale tuned by Robbins-Monro during burn-in.
#[derive(Debug, Clone, PartialEq)]
pub struct AdaptiveStep {
    log_scale: f64,
    adapt_steps: u64,
    frozen: bool,
    proposed: u64,
    accepted: u64,
}

impl AdaptiveStep {
    pub fn new(scale: f64) -> Self {
        Self {
            log_scale: scale.ln(),
            adapt_steps: 0,
            frozen: false,
            proposed: 0,
            accepted: 0,
        }
    }

    pub fn scale(&self) -> f64 {
        self.log_scale.exp()
    }

    /// Stops adaptation and resets the acceptance counters.
    pub fn freeze(&mut self) {
        self.frozen = true;
        self.proposed = 0;
        self.accepted = 0;
    }

    pub fn is_frozen(&self) -> bool {
        self.frozen
    }

    /// Acceptance fraction since [`AdaptiveStep::freeze`] (or since creation).
    pub fn acceptance_rate(&self) -> f64 {
        if self.proposed == 0 {
            0.0
        } else {
            self.accepted as f64 / self.proposed as f64
        }
    }

    fn record(&mut self, accept_prob: f64, accepted: bool) {
        self.proposed += 1;
        self.accepted += accepted as u64;
        if !self.frozen {
            self.adapt_steps += 1;
            let gain = (self.adapt_steps as f64).powf(-0.6);
            self.log_scale = (self.log_scale + gain * (accept_prob - TARGET_ACCEPTANCE))
                .clamp(-30.0, 10.0);
        }
    }
}

/// One symmetric Gaussian random-walk Metropolis step.
pub fn update_metropolis_scalar<R, F>(
    current: f64,
    mut logpost: F,
    step: &mut AdaptiveStep,
    rng: &mut R,
) -> Result<(f64, bool)>
where
    R: Rng + ?Sized,
    F: FnMut(f64) -> f64,
{
    let lp0 = logpost(current);
    if !lp0.is_finite() {
        return Err(GmcError::NonfiniteLogPosterior(current));
    }
    metropolis_from(current, lp0, logpost, step, rng).map(|(x, _, a)| (x, a))
}

/// Like [`update_metropolis_scalar`] with a cached log posterior at
/// `current`; returns the log posterior at the emitted value too.
pub fn metropolis_from<R, F>(
    current: f64,
    lp0: f64,
    mut logpost: F,
    step: &mut AdaptiveStep,
    rng: &mut R,
) -> Result<(f64, f64, bool)>
where
    R: Rng + ?Sized,
    F: FnMut(f64) -> f64,
{
    if !lp0.is_finite() {
        return Err(GmcError::NonfiniteLogPosterior(current));
    }
    let z: f64 = rng.sample(StandardNormal);
    let proposal = current + step.scale() * z;
    let lp1 = logpost(proposal);
    let delta = lp1 - lp0;
    let accept_prob = if delta.is_nan() { 0.0 } else { delta.min(0.0).exp() };
    let u: f64 = rng.random();
    let accepted = delta >= 0.0 || u < accept_prob;
    step.record(accept_prob, accepted);
    Ok(if accepted {
        (proposal, lp1, true)
    } else {
        (current, lp0, false)
    })
}

/// One univariate slice-sampling step (stepping out, then shrinkage) on
/// `(lower, upper)` with initial bracket width `width`.
pub fn update_sigma_slice<R, F>(
    current: f64,
    mut logpost: F,
    lower: f64,
    upper: f64,
    width: f64,
    rng: &mut R,
) -> Result<f64>
where
    R: Rng + ?Sized,
    F: FnMut(f64) -> f64,
{
    if !(current > lower && current < upper) {
        return Err(GmcError::BoundsViolation {
            value: current,
            lower,
            upper,
        });
    }
    let lp0 = logpost(current);
    if !lp0.is_finite() {
        return Err(GmcError::NonfiniteLogPosterior(current));
    }
    let u: f64 = rng.random();
    let level = lp0 + (1.0 - u).ln();
    let w = width.min(upper - lower);
    let mut left = current - w * rng.random::<f64>();
    let mut right = left + w;
    let mut steps = 0;
    while left > lower && steps < MAX_STEP_OUT && logpost(left) > level {
        left -= w;
        steps += 1;
    }
    steps = 0;
    while right < upper && steps < MAX_STEP_OUT && logpost(right) > level {
        right += w;
        steps += 1;
    }
    left = left.max(lower);
    right = right.min(upper);
    for _ in 0..MAX_SHRINK {
        let x = left + (right - left) * rng.random::<f64>();
        if x > lower && x < upper && logpost(x) > level {
            return Ok(x);
        }
        if x < current {
            left = x;
        } else {
            right = x;
        }
    }
    // the bracket collapsed onto the current point
    Ok(current)
}

pub fn sample_bernoulli<R: Rng + ?Sized>(p: f64, rng: &mut R) -> bool {
    rng.random::<f64>() < p
}

pub fn sample_beta<R: Rng + ?Sized>(params: BetaParams, rng: &mut R) -> Result<f64> {
    let dist = Beta::new(params.a, params.b)
        .map_err(|e| GmcError::ModelError(format!("beta({}, {}): {e}", params.a, params.b)))?;
    Ok(dist.sample(rng))
}
