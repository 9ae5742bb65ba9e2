use nalgebra::DVector;
use rand::Rng;

use super::coupled::{sample_theta, update_indicators_collapsed, Coupling, CurveLik};
use super::{
    coef_names, init_sd, sd_slice, ForceIndicators, GmcRegressionSpec, IndicatorMove, LinearSuff,
    RegressionDataset,
};
use crate::error::{GmcError, Result};
use crate::mcmc::rng::ChainRng;
use crate::mcmc::updates::{sample_bernoulli, sample_beta, update_sigma_slice};
use crate::mcmc::{run_chains, ChainSet, PosteriorModel, SamplerConfig, SweepContext};
use crate::priors::{gaussian_lpdf, mixture_indicator_prob, nu_full_conditional, VAGUE_PRECISION};
use crate::spline::SplineBasis;

const TAU_SLICE_WIDTH: f64 = 0.5;

pub(crate) struct GmcModel {
    n: usize,
    prim: LinearSuff,
    supp: LinearSuff,
    spec: GmcRegressionSpec,
}

pub(crate) struct GmcState {
    /// `(b, b0)` stacked.
    theta: DVector<f64>,
    sigma: f64,
    sigma0: f64,
    coupling: Coupling,
    nu: f64,
}

impl GmcModel {
    pub fn new(
        primary: &RegressionDataset,
        supplemental: &RegressionDataset,
        spec: &GmcRegressionSpec,
    ) -> Result<Self> {
        spec.validate()?;
        if primary.is_empty() || supplemental.is_empty() {
            return Err(GmcError::InvalidData(
                "both primary and supplemental data must be nonempty".into(),
            ));
        }
        let basis = SplineBasis::new(spec.partition.clone())?;
        Ok(Self {
            n: basis.dim(),
            prim: LinearSuff::new(&basis.b_design(&primary.t)?, &primary.y),
            supp: LinearSuff::new(&basis.b_design(&supplemental.t)?, &supplemental.y),
            spec: spec.clone(),
        })
    }

    fn free(&self) -> bool {
        self.spec.force_indicators == ForceIndicators::Free
    }
}

fn lik(s: &LinearSuff, sigma: f64) -> CurveLik {
    let w = sigma.powi(-2);
    CurveLik {
        a: &s.xtx * w,
        c: &s.xty * w,
    }
}

/// Conditional indicator draws from prior-density ratios at the current
/// coefficients.
fn update_indicators_conditional(
    b: &[f64],
    b0: &[f64],
    c: &mut Coupling,
    p0: f64,
    nu: f64,
    rng: &mut ChainRng,
) {
    let slab0 = gaussian_lpdf(b[0], b0[0], c.tau);
    let spike0 = gaussian_lpdf(b[0], b0[0], c.r0);
    c.iota0 = sample_bernoulli(mixture_indicator_prob(spike0, slab0, p0), rng);
    let slab_prec = c.sigma_b.powi(-2);
    for k in 1..b.len() {
        let spike = gaussian_lpdf(b[k], b0[k], c.r_b);
        let slab = if k == 1 {
            gaussian_lpdf(b[k], 0.0, VAGUE_PRECISION)
        } else {
            gaussian_lpdf(b[k], 0.0, slab_prec)
        };
        c.iota[k - 1] = sample_bernoulli(mixture_indicator_prob(spike, slab, nu), rng);
    }
}

/// Slice step for the slab precision `tau` on `(s_l, s_u)`.
pub(crate) fn tau_slice(
    tau: f64,
    iota0: bool,
    gap: f64,
    s_l: f64,
    s_u: f64,
    rng: &mut impl Rng,
) -> Result<f64> {
    let sq = gap * gap;
    update_sigma_slice(
        tau,
        |t| if iota0 { 0.0 } else { 0.5 * t.ln() - 0.5 * t * sq },
        s_l,
        s_u,
        TAU_SLICE_WIDTH.min(s_u - s_l),
        rng,
    )
}

impl PosteriorModel for GmcModel {
    type State = GmcState;

    fn parameter_names(&self) -> Vec<String> {
        let n = self.n;
        let mut names = coef_names("b", n);
        names.extend(coef_names("b0", n));
        for s in ["sigma", "sigma0", "sigma_b", "sigma_b0", "tau", "iota0"] {
            names.push(s.into());
        }
        names.extend((1..n).map(|k| format!("iota[{k}]")));
        names.push("nu".into());
        names
    }

    fn initial_state(&self, _chain: usize, rng: &mut ChainRng) -> Result<Self::State> {
        let h = &self.spec.intercept_hyper;
        let coupling = Coupling {
            r0: h.r,
            r_b: self.spec.curve_hyper.r,
            tau: h.s_l + (h.s_u - h.s_l) * rng.random_range(0.1..0.9),
            iota0: self.spec.initial_indicator(rng),
            iota: (1..self.n).map(|_| self.spec.initial_indicator(rng)).collect(),
            sigma_b: init_sd(rng),
            sigma_b0: init_sd(rng),
        };
        Ok(GmcState {
            theta: DVector::zeros(2 * self.n),
            sigma: init_sd(rng) * self.prim.y_scale(),
            sigma0: init_sd(rng) * self.supp.y_scale(),
            coupling,
            nu: rng.random_range(0.2..0.8),
        })
    }

    fn sweep(&self, s: &mut Self::State, ctx: &mut SweepContext<'_>) -> Result<()> {
        let n = self.n;
        let p0 = self.spec.intercept_hyper.p0;
        let collapsed = self.spec.indicator_move == IndicatorMove::Collapsed;
        let (lp, ls) = (lik(&self.prim, s.sigma), lik(&self.supp, s.sigma0));
        if collapsed && self.free() {
            update_indicators_collapsed(&lp, &ls, &mut s.coupling, p0, s.nu, &vec![true; n], ctx.rng())?;
        }
        s.theta = sample_theta(&lp, &ls, &s.coupling, ctx.rng())?;

        let b = s.theta.rows(0, n).into_owned();
        let b0 = s.theta.rows(n, n).into_owned();
        let rng = ctx.rng();
        s.sigma = sd_slice(s.sigma, self.prim.n_obs as f64, self.prim.rss(&b), rng)?;
        s.sigma0 = sd_slice(s.sigma0, self.supp.n_obs as f64, self.supp.rss(&b0), rng)?;
        let (mut m, mut ss) = (0.0, 0.0);
        for k in 2..n {
            if !s.coupling.iota[k - 1] {
                m += 1.0;
                ss += b[k] * b[k];
            }
        }
        s.coupling.sigma_b = sd_slice(s.coupling.sigma_b, m, ss, rng)?;
        let ss0: f64 = b0.rows(2, n - 2).norm_squared();
        s.coupling.sigma_b0 = sd_slice(s.coupling.sigma_b0, (n - 2) as f64, ss0, rng)?;
        let h = &self.spec.intercept_hyper;
        s.coupling.tau = tau_slice(s.coupling.tau, s.coupling.iota0, b[0] - b0[0], h.s_l, h.s_u, rng)?;

        if !collapsed && self.free() {
            update_indicators_conditional(b.as_slice(), b0.as_slice(), &mut s.coupling, p0, s.nu, rng);
        }
        s.nu = sample_beta(nu_full_conditional(&s.coupling.iota, &self.spec.curve_hyper), rng)?;
        Ok(())
    }

    fn write_draw(&self, s: &Self::State, out: &mut [f64]) {
        let n = self.n;
        out[..2 * n].copy_from_slice(s.theta.as_slice());
        let c = &s.coupling;
        let tail = [s.sigma, s.sigma0, c.sigma_b, c.sigma_b0, c.tau, c.iota0 as u8 as f64];
        out[2 * n..2 * n + 6].copy_from_slice(&tail);
        for (o, &i) in out[2 * n + 6..].iter_mut().zip(&c.iota) {
            *o = i as u8 as f64;
        }
        out[3 * n + 5] = s.nu;
    }

    fn deviance(&self, draw: &[f64]) -> f64 {
        let n = self.n;
        let b = DVector::from_column_slice(&draw[..n]);
        let b0 = DVector::from_column_slice(&draw[n..2 * n]);
        self.prim.deviance(&b, draw[2 * n]) + self.supp.deviance(&b0, draw[2 * n + 1])
    }
}

/// Two-source GMC spline fit.
///
/// Parameters are `b[k]` (primary curve), `b0[k]` (supplemental curve),
/// `sigma`, `sigma0`, `sigma_b`, `sigma_b0`, `tau`, `iota0`, `iota[1..=K]`
/// and `nu`. Indicators are stored as 0/1. The deviance covers both sources.
pub fn fit_regression_gmc(
    primary: &RegressionDataset,
    supplemental: &RegressionDataset,
    spec: &GmcRegressionSpec,
    config: &SamplerConfig,
) -> Result<ChainSet> {
    run_chains(&GmcModel::new(primary, supplemental, spec)?, config)
}
