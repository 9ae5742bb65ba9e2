//! Spike-and-slab commensurate priors, the generalized mixture commensurate
//! (GMC) prior, and the random-walk prior on log-hazards.
//!
//! Everything here is a log-density or a conjugate update; the samplers in
//! the model modules assemble these into full conditionals.

use serde::{Deserialize, Serialize};

use crate::error::{GmcError, Result};

/// Precision of every vague `N(0, 1e4)` component.
pub const VAGUE_PRECISION: f64 = 1e-4;

const LN_2PI: f64 = 1.837_877_066_409_345_3;

/// Hyperparameters of a single spike-and-slab commensurate prior.
///
/// The slab precision `tau` is uniform on `[s_l, s_u]`, the spike precision
/// is `r`, and `p0` is the prior probability of the spike.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CommensurateHyper {
    pub s_l: f64,
    pub s_u: f64,
    pub r: f64,
    pub p0: f64,
}

impl CommensurateHyper {
    pub fn new(s_l: f64, s_u: f64, r: f64, p0: f64) -> Result<Self> {
        let h = Self { s_l, s_u, r, p0 };
        h.validate()?;
        Ok(h)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.s_l >= 0.0 && self.s_l < self.s_u && self.s_u < self.r) {
            return Err(GmcError::InvalidHyper(format!(
                "need 0 <= s_l < s_u < R, got s_l={}, s_u={}, R={}",
                self.s_l, self.s_u, self.r
            )));
        }
        if !(0.0..=1.0).contains(&self.p0) {
            return Err(GmcError::InvalidHyper(format!(
                "p0 must lie in [0, 1], got {}",
                self.p0
            )));
        }
        Ok(())
    }
}

/// Hyperparameters of a GMC prior: spike precision and the Beta prior on the
/// shared spike probability `nu`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GmcHyper {
    pub r: f64,
    pub a1: f64,
    pub a2: f64,
}

impl GmcHyper {
    pub fn new(r: f64, a1: f64, a2: f64) -> Result<Self> {
        let h = Self { r, a1, a2 };
        h.validate()?;
        Ok(h)
    }

    /// Log-hazard borrowing default: `R = 10000`, `nu ~ Beta(0.1, 0.9)`.
    pub const fn survival_default() -> Self {
        Self {
            r: 10_000.0,
            a1: 0.1,
            a2: 0.9,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.r > 0.0 && self.a1 > 0.0 && self.a2 > 0.0) {
            return Err(GmcError::InvalidHyper(format!(
                "need R, a1, a2 > 0, got R={}, a1={}, a2={}",
                self.r, self.a1, self.a2
            )));
        }
        Ok(())
    }
}

/// Spike memberships and their shared probability.
#[derive(Debug, Clone, PartialEq)]
pub struct IndicatorState {
    pub iota: Vec<bool>,
    pub nu: f64,
}

/// Shape parameters of a Beta distribution.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BetaParams {
    pub a: f64,
    pub b: f64,
}

impl BetaParams {
    pub fn mean(&self) -> f64 {
        self.a / (self.a + self.b)
    }
}

/// `ln N(x | mean, 1/precision)`.
pub fn gaussian_logdensity(x: f64, mean: f64, precision: f64) -> Result<f64> {
    if !(precision > 0.0) {
        return Err(GmcError::NonpositivePrecision(precision));
    }
    Ok(gaussian_lpdf(x, mean, precision))
}

/// Unchecked kernel behind [`gaussian_logdensity`] for hot loops.
#[inline]
pub(crate) fn gaussian_lpdf(x: f64, mean: f64, precision: f64) -> f64 {
    let d = x - mean;
    0.5 * (precision.ln() - LN_2PI) - 0.5 * precision * d * d
}

/// Log prior of `theta` under the spike (`iota = true`) or the slab with
/// precision `tau`, both centred on `theta0`.
pub fn spike_slab_logprior(
    theta: f64,
    theta0: f64,
    tau: f64,
    iota: bool,
    hyper: &CommensurateHyper,
) -> Result<f64> {
    if iota {
        gaussian_logdensity(theta, theta0, hyper.r)
    } else {
        if !(tau >= hyper.s_l && tau <= hyper.s_u) {
            return Err(GmcError::TauOutOfSlab {
                tau,
                lower: hyper.s_l,
                upper: hyper.s_u,
            });
        }
        gaussian_logdensity(theta, theta0, tau)
    }
}

/// Posterior probability of the spike component given the two component
/// log-densities at the current coefficient value.
pub fn mixture_indicator_prob(log_spike: f64, log_slab: f64, prior_spike: f64) -> f64 {
    if prior_spike <= 0.0 {
        return 0.0;
    }
    if prior_spike >= 1.0 {
        return 1.0;
    }
    if log_spike == log_slab {
        return prior_spike;
    }
    let a = prior_spike.ln() + log_spike;
    let b = (1.0 - prior_spike).ln() + log_slab;
    if a == b {
        return 0.5;
    }
    // logistic(a - b), stable for either sign
    let x = a - b;
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Conjugate Beta update of `nu` from Bernoulli indicators.
pub fn nu_full_conditional(iota: &[bool], hyper: &GmcHyper) -> BetaParams {
    let ones = iota.iter().filter(|&&i| i).count();
    BetaParams {
        a: hyper.a1 + ones as f64,
        b: hyper.a2 + (iota.len() - ones) as f64,
    }
}

/// First-order random-walk prior: `gamma_1 ~ N(0, 1e4)` and
/// `gamma_k ~ N(gamma_{k-1}, sigma^2)`.
pub fn random_walk_logprior(gamma: &[f64], sigma: f64) -> Result<f64> {
    if !(sigma > 0.0) {
        return Err(GmcError::NonpositiveSigma(sigma));
    }
    if gamma.is_empty() {
        return Err(GmcError::DimensionMismatch {
            expected: 1,
            actual: 0,
        });
    }
    let prec = 1.0 / (sigma * sigma);
    let mut lp = gaussian_lpdf(gamma[0], 0.0, VAGUE_PRECISION);
    for w in gamma.windows(2) {
        lp += gaussian_lpdf(w[1], w[0], prec);
    }
    Ok(lp)
}

/// Log prior of the shape coefficients `(b_1..b_K)` under the GMC prior.
///
/// Component 1's slab is the vague `N(0, 1e4)`; components `k >= 2` use
/// `N(0, sigma_b^2)`. Every spike is `N(b0_k, 1/R)`. `state.iota[k-1]`
/// selects the component for `b_k`.
pub fn gmc_curve_logprior(
    b: &[f64],
    b0: &[f64],
    state: &IndicatorState,
    sigma_b: f64,
    hyper: &GmcHyper,
) -> Result<f64> {
    if b0.len() != b.len() {
        return Err(GmcError::DimensionMismatch {
            expected: b.len(),
            actual: b0.len(),
        });
    }
    if state.iota.len() != b.len() {
        return Err(GmcError::DimensionMismatch {
            expected: b.len(),
            actual: state.iota.len(),
        });
    }
    if !(sigma_b > 0.0) {
        return Err(GmcError::NonpositiveSigma(sigma_b));
    }
    let slab_prec = 1.0 / (sigma_b * sigma_b);
    let lp = b
        .iter()
        .zip(b0)
        .zip(&state.iota)
        .enumerate()
        .map(|(k, ((&bk, &b0k), &spike))| {
            if spike {
                gaussian_lpdf(bk, b0k, hyper.r)
            } else if k == 0 {
                gaussian_lpdf(bk, 0.0, VAGUE_PRECISION)
            } else {
                gaussian_lpdf(bk, 0.0, slab_prec)
            }
        })
        .sum();
    Ok(lp)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Beta, Distribution};

    fn slab_hyper() -> CommensurateHyper {
        CommensurateHyper::new(0.0, 2.0, 2000.0, 0.5).unwrap()
    }

    #[test]
    fn gaussian_hand_values() {
        assert_abs_diff_eq!(
            gaussian_logdensity(0.0, 0.0, 1.0).unwrap(),
            -0.918_938_533_204_672_8,
            epsilon = 1e-12
        );
        assert_abs_diff_eq!(
            gaussian_logdensity(1.0, 0.0, 2.0).unwrap(),
            -1.572_364_942_924_700_1,
            epsilon = 1e-12
        );
        for m in [-3.0, 0.0, 7.5] {
            assert_abs_diff_eq!(
                gaussian_logdensity(m, m, 3.0).unwrap(),
                0.5 * (3.0 / (2.0 * std::f64::consts::PI)).ln(),
                epsilon = 1e-14
            );
        }
        assert!(matches!(
            gaussian_logdensity(0.0, 0.0, 0.0),
            Err(GmcError::NonpositivePrecision(_))
        ));
    }

    #[test]
    fn spike_slab_hand_values() {
        let h = slab_hyper();
        // 0.5 ln(2000 / 2 pi)
        assert_abs_diff_eq!(
            spike_slab_logprior(1.2, 1.2, 1.0, true, &h).unwrap(),
            2.881_512_696_566_368,
            epsilon = 1e-9
        );
        assert_abs_diff_eq!(
            spike_slab_logprior(2.0, 1.0, 1.0, false, &h).unwrap(),
            -1.418_938_533_204_672_8,
            epsilon = 1e-12
        );
        assert!(matches!(
            spike_slab_logprior(0.0, 0.0, 3.0, false, &h),
            Err(GmcError::TauOutOfSlab { .. })
        ));
        // tau is ignored on the spike
        assert!(spike_slab_logprior(0.0, 0.0, 3.0, true, &h).is_ok());
    }

    /// Composite Simpson quadrature of the p0-weighted two-component mixture.
    #[test]
    fn scalar_mixture_integrates_to_one() {
        let h = CommensurateHyper::new(0.0, 2.0, 50.0, 0.3).unwrap();
        let (theta0, tau) = (0.7, 0.8);
        let dens = |x: f64| {
            h.p0 * spike_slab_logprior(x, theta0, tau, true, &h).unwrap().exp()
                + (1.0 - h.p0) * spike_slab_logprior(x, theta0, tau, false, &h).unwrap().exp()
        };
        let (a, b, n) = (theta0 - 40.0, theta0 + 40.0, 400_000);
        let step = (b - a) / n as f64;
        let mut s = dens(a) + dens(b);
        for i in 1..n {
            let w = if i % 2 == 1 { 4.0 } else { 2.0 };
            s += w * dens(a + i as f64 * step);
        }
        assert_abs_diff_eq!(s * step / 3.0, 1.0, epsilon = 1e-6);
    }

    #[test]
    fn indicator_prob_cases() {
        assert_eq!(mixture_indicator_prob(3.0, -1.0, 0.0), 0.0);
        assert_eq!(mixture_indicator_prob(-3.0, 1.0, 1.0), 1.0);
        for p in [0.1, 0.5, 0.9] {
            assert_abs_diff_eq!(mixture_indicator_prob(-2.0, -2.0, p), p, epsilon = 1e-14);
        }
        // common mean: ratio of normalizers sqrt(2000) : 1
        let h = slab_hyper();
        let ls = spike_slab_logprior(0.0, 0.0, 1.0, true, &h).unwrap();
        let lb = spike_slab_logprior(0.0, 0.0, 1.0, false, &h).unwrap();
        let s = 2000f64.sqrt();
        assert_abs_diff_eq!(mixture_indicator_prob(ls, lb, 0.5), s / (s + 1.0), epsilon = 1e-12);
        assert_abs_diff_eq!(s / (s + 1.0), 0.97813, epsilon = 1e-5);
    }

    #[test]
    fn indicator_prob_is_stable_for_large_gaps() {
        let hi = mixture_indicator_prob(700.0, 0.0, 0.5);
        let lo = mixture_indicator_prob(-700.0, 0.0, 0.5);
        assert!(hi.is_finite() && lo.is_finite());
        assert_eq!(hi, 1.0);
        assert!(lo >= 0.0 && lo < 1e-300);
        assert_eq!(mixture_indicator_prob(f64::NEG_INFINITY, f64::NEG_INFINITY, 0.3), 0.3);
    }

    #[test]
    fn equal_precisions_return_prior() {
        let h = CommensurateHyper::new(0.0, 2.0, 5.0, 0.37).unwrap();
        for theta in [-4.0, -0.1, 0.0, 2.5, 10.0] {
            let ls = spike_slab_logprior(theta, 0.3, 5.0, true, &h).unwrap();
            let lb = gaussian_logdensity(theta, 0.3, 5.0).unwrap();
            assert_eq!(mixture_indicator_prob(ls, lb, h.p0), h.p0);
        }
    }

    proptest! {
        #[test]
        fn indicator_prob_monotone(
            ls in -700.0f64..700.0, lb in -700.0f64..700.0,
            d in 0.0f64..5.0, p in 0.01f64..0.99, dp in 0.0f64..0.5,
        ) {
            let base = mixture_indicator_prob(ls, lb, p);
            prop_assert!((0.0..=1.0).contains(&base));
            prop_assert!(mixture_indicator_prob(ls + d, lb, p) >= base);
            prop_assert!(mixture_indicator_prob(ls, lb, (p + dp).min(1.0)) >= base);
        }
    }

    #[test]
    fn nu_conditional_parameters() {
        let iota: Vec<bool> = [1, 1, 0, 1, 1, 1, 1, 0, 0, 1].iter().map(|&v| v == 1).collect();
        let h = GmcHyper::new(2000.0, 0.5, 0.5).unwrap();
        assert_eq!(nu_full_conditional(&iota, &h), BetaParams { a: 7.5, b: 3.5 });
        let h = GmcHyper::new(2000.0, 0.1, 0.9).unwrap();
        let out = nu_full_conditional(&[false; 10], &h);
        assert_abs_diff_eq!(out.a, 0.1, epsilon = 1e-15);
        assert_abs_diff_eq!(out.b, 10.9, epsilon = 1e-12);
    }

    /// Exhaustive check: p(nu | iota) computed by quadrature of prior x
    /// Bernoulli likelihood agrees with the conjugate Beta for every iota.
    #[test]
    fn nu_conditional_is_exact_conjugacy() {
        let h = GmcHyper::new(100.0, 1.7, 1.3).unwrap();
        let k = 6;
        let grid: Vec<f64> = (1..2000).map(|i| i as f64 / 2000.0).collect();
        for mask in 0u32..(1 << k) {
            let iota: Vec<bool> = (0..k).map(|j| mask & (1 << j) != 0).collect();
            let ones = iota.iter().filter(|&&v| v).count() as f64;
            let unnorm: Vec<f64> = grid
                .iter()
                .map(|&nu| {
                    nu.powf(h.a1 - 1.0)
                        * (1.0 - nu).powf(h.a2 - 1.0)
                        * nu.powf(ones)
                        * (1.0 - nu).powf(k as f64 - ones)
                })
                .collect();
            let z: f64 = unnorm.iter().sum();
            let mean: f64 = grid.iter().zip(&unnorm).map(|(v, w)| v * w).sum::<f64>() / z;
            let post = nu_full_conditional(&iota, &h);
            assert_abs_diff_eq!(mean, post.mean(), epsilon = 2e-3);
        }
    }

    #[test]
    fn nu_conditional_monte_carlo_mean() {
        let iota = [true, false, true, true, false, false, true, true];
        let h = GmcHyper::new(100.0, 0.5, 0.5).unwrap();
        let p = nu_full_conditional(&iota, &h);
        let dist = Beta::new(p.a, p.b).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let n = 20_000;
        let draws: Vec<f64> = (0..n).map(|_| dist.sample(&mut rng)).collect();
        let mean = draws.iter().sum::<f64>() / n as f64;
        let var = draws.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        let se = (var / n as f64).sqrt();
        assert!((mean - (h.a1 + 5.0) / (h.a1 + h.a2 + 8.0)).abs() < 3.0 * se);
    }

    #[test]
    fn random_walk_cases() {
        let vague_at_zero = 0.5 * (1e-4f64.ln() - LN_2PI);
        assert_abs_diff_eq!(random_walk_logprior(&[0.0], 1.0).unwrap(), vague_at_zero);
        let sigma = 0.5;
        let inc = 0.5 * (1.0 / (2.0 * std::f64::consts::PI * sigma * sigma)).ln();
        let lp = random_walk_logprior(&[1.5, 1.5, 1.5, 1.5], sigma).unwrap();
        assert_abs_diff_eq!(
            lp,
            gaussian_lpdf(1.5, 0.0, VAGUE_PRECISION) + 3.0 * inc,
            epsilon = 1e-12
        );
        let lp = random_walk_logprior(&[0.0, 1.0], 1.0).unwrap();
        assert_abs_diff_eq!(lp, vague_at_zero + (-0.918_938_533_204_672_8 - 0.5), epsilon = 1e-12);
        assert!(matches!(
            random_walk_logprior(&[0.0], 0.0),
            Err(GmcError::NonpositiveSigma(_))
        ));
    }

    #[test]
    fn gmc_curve_prior_cases() {
        let h = GmcHyper::new(2000.0, 0.5, 0.5).unwrap();
        let b = [0.3, -1.0, 0.4, 2.0];
        let b0 = [0.1, 0.2, -0.3, 0.0];
        let sigma_b = 1.7;
        let slab = IndicatorState { iota: vec![false; 4], nu: 0.3 };
        let conventional = gaussian_lpdf(b[0], 0.0, VAGUE_PRECISION)
            + b[1..]
                .iter()
                .map(|&x| gaussian_lpdf(x, 0.0, 1.0 / (sigma_b * sigma_b)))
                .sum::<f64>();
        assert_abs_diff_eq!(
            gmc_curve_logprior(&b, &b0, &slab, sigma_b, &h).unwrap(),
            conventional,
            epsilon = 1e-12
        );
        let spike = IndicatorState { iota: vec![true; 4], nu: 0.3 };
        assert_abs_diff_eq!(
            gmc_curve_logprior(&b0, &b0, &spike, sigma_b, &h).unwrap(),
            4.0 * 0.5 * (2000.0 / (2.0 * std::f64::consts::PI)).ln(),
            epsilon = 1e-12
        );
        // K = 1: spike centred on b0, slab vague and not centred on b0
        let one = IndicatorState { iota: vec![false], nu: 0.5 };
        assert_abs_diff_eq!(
            gmc_curve_logprior(&[2.0], &[1.0], &one, sigma_b, &h).unwrap(),
            gaussian_lpdf(2.0, 0.0, VAGUE_PRECISION)
        );
        assert!(gmc_curve_logprior(&b, &b0[..3], &slab, sigma_b, &h).is_err());
    }

    #[test]
    fn hyper_validation() {
        assert!(CommensurateHyper::new(0.0, 2.0, 2000.0, 0.5).is_ok());
        assert!(CommensurateHyper::new(2.0, 2.0, 2000.0, 0.5).is_err());
        assert!(CommensurateHyper::new(0.0, 2.0, 1.0, 0.5).is_err());
        assert!(CommensurateHyper::new(0.0, 2.0, 2000.0, 1.5).is_err());
        assert!(GmcHyper::new(-1.0, 0.5, 0.5).is_err());
        assert!(GmcHyper::new(10.0, 0.0, 0.5).is_err());
    }
}
