use rand::Rng;

use super::likelihood::Exposure;
use super::{gamma_names, rho_names, SurvivalDataset};
use crate::error::{GmcError, Result};
use crate::mcmc::rng::ChainRng;
use crate::mcmc::{run_chains, ChainSet, PosteriorModel, SamplerConfig, SweepContext};
use crate::priors::{gaussian_lpdf, VAGUE_PRECISION};
use crate::regression::{init_sd, sd_slice};
use crate::spline::Partition;

pub(crate) struct PweModel {
    pub ex: Exposure,
    k: usize,
    n_rho: usize,
    names: Vec<String>,
}

pub(crate) struct PweState {
    gamma: Vec<f64>,
    rho: Vec<f64>,
    sigma: f64,
}

/// Rough log event rate, used to start chains.
pub(crate) fn crude_log_rate(ex: &Exposure) -> f64 {
    ((ex.total_events() + 0.5) / ex.total_time().max(1e-12)).ln()
}

/// Random-walk log prior terms that involve `gamma[k]`, as a function of
/// `g = gamma[k]`.
pub(crate) fn rw_terms(gamma: &[f64], k: usize, g: f64, prec: f64) -> f64 {
    let prev = if k == 0 {
        gaussian_lpdf(g, 0.0, VAGUE_PRECISION)
    } else {
        gaussian_lpdf(g, gamma[k - 1], prec)
    };
    let next = if k + 1 < gamma.len() {
        gaussian_lpdf(gamma[k + 1], g, prec)
    } else {
        0.0
    };
    prev + next
}

pub(crate) fn rw_sum_sq(gamma: &[f64]) -> f64 {
    gamma.windows(2).map(|w| (w[1] - w[0]).powi(2)).sum()
}

impl PweModel {
    pub fn new(data: &SurvivalDataset, p: &Partition) -> Result<Self> {
        if data.n_events() == 0 {
            return Err(GmcError::NoEvents("primary".into()));
        }
        let mut names = gamma_names("gamma", p.intervals());
        names.extend(rho_names(&data.treatments));
        names.push("sigma_gamma".into());
        Ok(Self {
            ex: Exposure::new(data, p),
            k: p.intervals(),
            n_rho: data.treatments.len(),
            names,
        })
    }
}

impl PosteriorModel for PweModel {
    type State = PweState;

    fn parameter_names(&self) -> Vec<String> {
        self.names.clone()
    }

    fn metropolis_blocks(&self) -> Vec<(String, f64)> {
        let mut b: Vec<(String, f64)> = self.names[..self.k + self.n_rho]
            .iter()
            .map(|n| (n.clone(), 0.3))
            .collect();
        b.iter_mut().skip(self.k).for_each(|x| x.1 = 0.2);
        b
    }

    fn initial_state(&self, _chain: usize, rng: &mut ChainRng) -> Result<PweState> {
        let base = crude_log_rate(&self.ex);
        Ok(PweState {
            gamma: (0..self.k).map(|_| base + rng.random_range(-0.5..0.5)).collect(),
            rho: (0..self.n_rho).map(|_| rng.random_range(-0.3..0.3)).collect(),
            sigma: init_sd(rng),
        })
    }

    fn sweep(&self, s: &mut PweState, ctx: &mut SweepContext<'_>) -> Result<()> {
        let prec = s.sigma.powi(-2);
        let e = self.ex.hazard_exposure(&s.rho);
        for k in 0..self.k {
            let gamma = &s.gamma;
            let ex = &self.ex;
            let lp = |g: f64| ex.interval_loglik(k, g, e[k]) + rw_terms(gamma, k, g, prec);
            s.gamma[k] = ctx.metropolis(k, s.gamma[k], lp)?;
        }
        s.sigma = sd_slice(s.sigma, (self.k - 1) as f64, rw_sum_sq(&s.gamma), ctx.rng())?;
        let base = self.ex.baseline_exposure(&s.gamma);
        for j in 0..self.n_rho {
            let mut rho = s.rho.clone();
            let ex = &self.ex;
            let lp = |r: f64| {
                rho[j] = r;
                ex.rho_loglik(&rho, &base) + gaussian_lpdf(r, 0.0, VAGUE_PRECISION)
            };
            s.rho[j] = ctx.metropolis(self.k + j, s.rho[j], lp)?;
        }
        Ok(())
    }

    fn write_draw(&self, s: &PweState, out: &mut [f64]) {
        out[..self.k].copy_from_slice(&s.gamma);
        out[self.k..self.k + self.n_rho].copy_from_slice(&s.rho);
        out[self.k + self.n_rho] = s.sigma;
    }

    fn deviance(&self, draw: &[f64]) -> f64 {
        -2.0 * self.ex.loglik(&draw[..self.k], &draw[self.k..self.k + self.n_rho])
    }
}

/// Conventional piecewise-exponential fit with a random-walk prior on the
/// log-hazards.
///
/// Parameters are `gamma[1..=K]`, `rho[<treatment>]` per treatment and
/// `sigma_gamma`.
pub fn fit_pwe_conventional(
    data: &SurvivalDataset,
    p: &Partition,
    config: &SamplerConfig,
) -> Result<ChainSet> {
    run_chains(&PweModel::new(data, p)?, config)
}
