use nalgebra::{DMatrix, DVector};

use super::{coef_names, init_sd, sd_slice, LinearSuff, RegressionDataset};
use crate::error::{GmcError, Result};
use crate::mcmc::rng::ChainRng;
use crate::mcmc::updates::{update_gaussian_block, ObsTerms};
use crate::mcmc::{run_chains, ChainSet, PosteriorModel, SamplerConfig, SweepContext};
use crate::priors::VAGUE_PRECISION;
use crate::spline::{Partition, SplineBasis};

pub(crate) struct ConventionalModel {
    n: usize,
    suff: LinearSuff,
}

pub(crate) struct ConventionalState {
    b: DVector<f64>,
    sigma_b: f64,
    sigma: f64,
}

impl ConventionalModel {
    pub fn new(data: &RegressionDataset, partition: &Partition) -> Result<Self> {
        if data.is_empty() {
            return Err(GmcError::InvalidData("empty regression dataset".into()));
        }
        let basis = SplineBasis::new(partition.clone())?;
        let n = basis.dim();
        if data.len() < n + 1 {
            log::warn!("{} observations for {} spline coefficients", data.len(), n);
        }
        Ok(Self {
            n,
            suff: LinearSuff::new(&basis.b_design(&data.t)?, &data.y),
        })
    }
}

impl PosteriorModel for ConventionalModel {
    type State = ConventionalState;

    fn parameter_names(&self) -> Vec<String> {
        let mut names = coef_names("b", self.n);
        names.push("sigma_b".into());
        names.push("sigma".into());
        names
    }

    fn initial_state(&self, _chain: usize, rng: &mut ChainRng) -> Result<Self::State> {
        Ok(ConventionalState {
            b: DVector::zeros(self.n),
            sigma_b: init_sd(rng),
            sigma: init_sd(rng) * self.suff.y_scale(),
        })
    }

    fn sweep(&self, s: &mut Self::State, ctx: &mut SweepContext<'_>) -> Result<()> {
        let n = self.n;
        let mut prior = DMatrix::zeros(n, n);
        prior[(0, 0)] = VAGUE_PRECISION;
        prior[(1, 1)] = VAGUE_PRECISION;
        for k in 2..n {
            prior[(k, k)] = s.sigma_b.powi(-2);
        }
        let obs = ObsTerms {
            xtx: self.suff.xtx.clone(),
            xty: self.suff.xty.clone(),
            noise_precision: s.sigma.powi(-2),
        };
        s.b = update_gaussian_block(&DVector::zeros(n), &prior, Some(&obs), ctx.rng())?;

        let rss = self.suff.rss(&s.b);
        s.sigma = sd_slice(s.sigma, self.suff.n_obs as f64, rss, ctx.rng())?;
        let ss: f64 = s.b.rows(2, n - 2).norm_squared();
        s.sigma_b = sd_slice(s.sigma_b, (n - 2) as f64, ss, ctx.rng())?;
        Ok(())
    }

    fn write_draw(&self, s: &Self::State, out: &mut [f64]) {
        out[..self.n].copy_from_slice(s.b.as_slice());
        out[self.n] = s.sigma_b;
        out[self.n + 1] = s.sigma;
    }

    fn deviance(&self, draw: &[f64]) -> f64 {
        let b = DVector::from_column_slice(&draw[..self.n]);
        self.suff.deviance(&b, draw[self.n + 1])
    }
}

/// Conventional penalized-spline fit to every row of `data` (one source
/// or pooled sources).
///
/// Parameters are `b[0..=K]`, `sigma_b`, `sigma` with vague priors on
/// `b[0]`, `b[1]`, `b[k] ~ N(0, sigma_b^2)` for `k >= 2` and uniform
/// priors on both standard deviations.
pub fn fit_regression_conventional(
    data: &RegressionDataset,
    partition: &Partition,
    config: &SamplerConfig,
) -> Result<ChainSet> {
    run_chains(&ConventionalModel::new(data, partition)?, config)
}
