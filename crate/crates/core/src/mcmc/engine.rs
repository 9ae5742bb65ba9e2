use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::rng::{stream_rng, ChainRng};
use super::updates::{metropolis_from, update_metropolis_scalar, AdaptiveStep};
use crate::error::{GmcError, Result};

/// Chain counts and seed for one fit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SamplerConfig {
    pub chains: usize,
    pub burn_in: usize,
    /// Post-burn-in iterations per chain, before thinning.
    pub iterations: usize,
    pub thin: usize,
    pub seed: u64,
}

impl SamplerConfig {
    /// Desk-scale regression default: 2 chains, 1000 burn-in, 5000 kept.
    pub const fn regression_default(seed: u64) -> Self {
        Self {
            chains: 2,
            burn_in: 1000,
            iterations: 5000,
            thin: 1,
            seed,
        }
    }

    /// Desk-scale GMC survival default: 2 chains, 2000 burn-in, 10,000 kept.
    pub const fn survival_default(seed: u64) -> Self {
        Self {
            chains: 2,
            burn_in: 2000,
            iterations: 10_000,
            thin: 1,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.chains < 1 || self.iterations < 1 || self.thin < 1 {
            return Err(GmcError::InvalidConfig(format!(
                "chains, iterations and thin must be >= 1 (got {}, {}, {})",
                self.chains, self.iterations, self.thin
            )));
        }
        if self.iterations / self.thin == 0 {
            return Err(GmcError::InvalidConfig(
                "thin exceeds the number of kept iterations".into(),
            ));
        }
        Ok(())
    }

    pub fn stored(&self) -> usize {
        self.iterations / self.thin
    }
}

/// Frozen proposal scale and post-burn-in acceptance of one Metropolis block.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlockTuning {
    pub name: String,
    pub scale: f64,
    pub acceptance: f64,
}

/// Stored draws of one chain, row-major `stored x params`.
#[derive(Debug, Clone, PartialEq)]
pub struct ChainDraws {
    pub draws: Vec<f64>,
    pub deviance: Vec<f64>,
    pub tuning: Vec<BlockTuning>,
}

/// Multi-chain posterior draws with parameter labels.
#[derive(Debug, Clone, PartialEq)]
pub struct ChainSet {
    names: Vec<String>,
    chains: Vec<ChainDraws>,
}

impl ChainSet {
    pub fn new(names: Vec<String>, chains: Vec<ChainDraws>) -> Result<Self> {
        if chains.is_empty() {
            return Err(GmcError::EmptyDraws);
        }
        let p = names.len();
        let stored = chains[0].deviance.len();
        for c in &chains {
            if c.deviance.len() != stored || c.draws.len() != stored * p {
                return Err(GmcError::DimensionMismatch {
                    expected: stored * p,
                    actual: c.draws.len(),
                });
            }
        }
        Ok(Self { names, chains })
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn n_chains(&self) -> usize {
        self.chains.len()
    }

    pub fn n_stored(&self) -> usize {
        self.chains[0].deviance.len()
    }

    pub fn n_params(&self) -> usize {
        self.names.len()
    }

    pub fn chain(&self, c: usize) -> &ChainDraws {
        &self.chains[c]
    }

    pub fn chains(&self) -> &[ChainDraws] {
        &self.chains
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    /// One stored draw (all parameters).
    pub fn draw(&self, chain: usize, iteration: usize) -> &[f64] {
        let p = self.n_params();
        &self.chains[chain].draws[iteration * p..(iteration + 1) * p]
    }

    /// Iterates every stored draw, chain by chain.
    pub fn iter_draws(&self) -> impl Iterator<Item = &[f64]> + '_ {
        let p = self.n_params();
        self.chains.iter().flat_map(move |c| c.draws.chunks_exact(p))
    }

    /// Per-chain trace of parameter `idx`.
    pub fn trace(&self, idx: usize) -> Vec<Vec<f64>> {
        let p = self.n_params();
        self.chains
            .iter()
            .map(|c| c.draws.iter().skip(idx).step_by(p).copied().collect())
            .collect()
    }

    /// Draws of parameter `idx` pooled across chains in chain order.
    pub fn pooled(&self, idx: usize) -> Vec<f64> {
        self.trace(idx).into_iter().flatten().collect()
    }

    pub fn pooled_by_name(&self, name: &str) -> Option<Vec<f64>> {
        self.index_of(name).map(|i| self.pooled(i))
    }

    pub fn deviance(&self) -> Vec<f64> {
        self.chains.iter().flat_map(|c| c.deviance.iter().copied()).collect()
    }

    /// Posterior mean of every parameter.
    pub fn posterior_mean(&self) -> Vec<f64> {
        let p = self.n_params();
        let mut acc = vec![0.0; p];
        let mut n = 0usize;
        for d in self.iter_draws() {
            for (a, v) in acc.iter_mut().zip(d) {
                *a += v;
            }
            n += 1;
        }
        acc.iter_mut().for_each(|a| *a /= n as f64);
        acc
    }
}

/// Per-iteration handle a model uses to reach its random stream and its
/// adaptive Metropolis blocks.
pub struct SweepContext<'a> {
    rng: &'a mut ChainRng,
    steps: &'a mut [AdaptiveStep],
    adapting: bool,
    chain: usize,
    iteration: usize,
}

impl<'a> SweepContext<'a> {
    pub fn rng(&mut self) -> &mut ChainRng {
        self.rng
    }

    pub fn adapting(&self) -> bool {
        self.adapting
    }

    pub fn chain(&self) -> usize {
        self.chain
    }

    pub fn iteration(&self) -> usize {
        self.iteration
    }

    pub fn step_scale(&self, block: usize) -> f64 {
        self.steps[block].scale()
    }

    /// Adaptive random-walk Metropolis on block `block`.
    pub fn metropolis<F: FnMut(f64) -> f64>(
        &mut self,
        block: usize,
        current: f64,
        logpost: F,
    ) -> Result<f64> {
        update_metropolis_scalar(current, logpost, &mut self.steps[block], self.rng).map(|r| r.0)
    }

    /// Same as [`SweepContext::metropolis`] with the current log posterior
    /// supplied; returns `(value, logpost at value)`.
    pub fn metropolis_cached<F: FnMut(f64) -> f64>(
        &mut self,
        block: usize,
        current: f64,
        current_lp: f64,
        logpost: F,
    ) -> Result<(f64, f64)> {
        metropolis_from(current, current_lp, logpost, &mut self.steps[block], self.rng)
            .map(|(x, lp, _)| (x, lp))
    }
}

/// A posterior the engine can sweep.
///
/// A sweep is a fixed sequence of block updates (conjugate Gaussian blocks,
/// slice updates of bounded scales, exact indicator and Beta draws, adaptive
/// Metropolis scalars) built from [`super::updates`].
pub trait PosteriorModel: Sync {
    type State: Send;

    fn parameter_names(&self) -> Vec<String>;

    /// Labels of the adaptive Metropolis blocks, indexed as in
    /// [`SweepContext::metropolis`].
    fn metropolis_blocks(&self) -> Vec<(String, f64)> {
        Vec::new()
    }

    fn initial_state(&self, chain: usize, rng: &mut ChainRng) -> Result<Self::State>;

    fn sweep(&self, state: &mut Self::State, ctx: &mut SweepContext<'_>) -> Result<()>;

    fn write_draw(&self, state: &Self::State, out: &mut [f64]);

    /// `-2 log likelihood` at a stored draw.
    fn deviance(&self, draw: &[f64]) -> f64;
}

fn run_chain<M: PosteriorModel>(
    model: &M,
    config: &SamplerConfig,
    chain: usize,
    n_params: usize,
) -> Result<ChainDraws> {
    let mut rng = stream_rng(config.seed, chain as u64);
    let blocks = model.metropolis_blocks();
    let mut steps: Vec<AdaptiveStep> = blocks.iter().map(|(_, s)| AdaptiveStep::new(*s)).collect();
    let mut state = model.initial_state(chain, &mut rng)?;
    let stored = config.stored();
    let mut draws = vec![0.0; stored * n_params];
    let mut deviance = Vec::with_capacity(stored);
    let total = config.burn_in + config.iterations;
    let mut row = 0;
    for it in 0..total {
        if it == config.burn_in {
            steps.iter_mut().for_each(AdaptiveStep::freeze);
        }
        let mut ctx = SweepContext {
            rng: &mut rng,
            steps: &mut steps,
            adapting: it < config.burn_in,
            chain,
            iteration: it,
        };
        model.sweep(&mut state, &mut ctx)?;
        if it >= config.burn_in && (it - config.burn_in) % config.thin == config.thin - 1 && row < stored {
            let out = &mut draws[row * n_params..(row + 1) * n_params];
            model.write_draw(&state, out);
            let dev = model.deviance(out);
            if !dev.is_finite() {
                return Err(GmcError::NonfiniteDeviance {
                    chain,
                    iteration: it,
                });
            }
            deviance.push(dev);
            row += 1;
        }
    }
    let tuning = blocks
        .into_iter()
        .zip(&steps)
        .map(|((name, _), s)| BlockTuning {
            name,
            scale: s.scale(),
            acceptance: s.acceptance_rate(),
        })
        .collect();
    Ok(ChainDraws {
        draws,
        deviance,
        tuning,
    })
}

/// Runs every chain of `model`, concurrently when a thread pool is
/// available. Output depends only on `(model, config)`.
pub fn run_chains<M: PosteriorModel>(model: &M, config: &SamplerConfig) -> Result<ChainSet> {
    config.validate()?;
    let names = model.parameter_names();
    let p = names.len();
    let chains = (0..config.chains)
        .into_par_iter()
        .map(|c| run_chain(model, config, c, p))
        .collect::<Result<Vec<_>>>()?;
    ChainSet::new(names, chains)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mcmc::updates::{update_gaussian_block, ObsTerms};
    use nalgebra::{DMatrix, DVector};
    use rand_distr::{Distribution, Normal};

    /// Normal mean with known unit variance and a N(0, 1e4) prior.
    struct NormalMean {
        sum: f64,
        n: f64,
    }

    impl PosteriorModel for NormalMean {
        type State = f64;
        fn parameter_names(&self) -> Vec<String> {
            vec!["mu".into()]
        }
        fn initial_state(&self, chain: usize, _: &mut ChainRng) -> Result<f64> {
            Ok(if chain == 0 { -50.0 } else { 50.0 })
        }
        fn sweep(&self, state: &mut f64, ctx: &mut SweepContext<'_>) -> Result<()> {
            let obs = ObsTerms {
                xtx: DMatrix::from_element(1, 1, self.n),
                xty: DVector::from_element(1, self.sum),
                noise_precision: 1.0,
            };
            *state = update_gaussian_block(
                &DVector::zeros(1),
                &DMatrix::from_element(1, 1, 1e-4),
                Some(&obs),
                ctx.rng(),
            )?[0];
            Ok(())
        }
        fn write_draw(&self, state: &f64, out: &mut [f64]) {
            out[0] = *state;
        }
        fn deviance(&self, draw: &[f64]) -> f64 {
            self.n * (draw[0] - self.sum / self.n).powi(2)
        }
    }

    /// Standard normal explored by one adaptive Metropolis block; draws also
    /// record the block's scale.
    struct RwNormal;

    impl PosteriorModel for RwNormal {
        type State = (f64, f64);
        fn parameter_names(&self) -> Vec<String> {
            vec!["x".into(), "scale".into()]
        }
        fn metropolis_blocks(&self) -> Vec<(String, f64)> {
            vec![("x".into(), 0.05)]
        }
        fn initial_state(&self, chain: usize, _: &mut ChainRng) -> Result<(f64, f64)> {
            Ok((chain as f64 * 8.0 - 4.0, 0.0))
        }
        fn sweep(&self, state: &mut (f64, f64), ctx: &mut SweepContext<'_>) -> Result<()> {
            state.0 = ctx.metropolis(0, state.0, |v| -0.5 * v * v)?;
            state.1 = ctx.step_scale(0);
            Ok(())
        }
        fn write_draw(&self, state: &(f64, f64), out: &mut [f64]) {
            out[0] = state.0;
            out[1] = state.1;
        }
        fn deviance(&self, draw: &[f64]) -> f64 {
            draw[0] * draw[0]
        }
    }

    struct Broken;

    impl PosteriorModel for Broken {
        type State = ();
        fn parameter_names(&self) -> Vec<String> {
            vec!["x".into()]
        }
        fn initial_state(&self, _: usize, _: &mut ChainRng) -> Result<()> {
            Ok(())
        }
        fn sweep(&self, _: &mut (), _: &mut SweepContext<'_>) -> Result<()> {
            Ok(())
        }
        fn write_draw(&self, _: &(), out: &mut [f64]) {
            out[0] = 0.0;
        }
        fn deviance(&self, _: &[f64]) -> f64 {
            f64::NAN
        }
    }

    fn cfg(chains: usize, burn_in: usize, iterations: usize, thin: usize, seed: u64) -> SamplerConfig {
        SamplerConfig {
            chains,
            burn_in,
            iterations,
            thin,
            seed,
        }
    }

    #[test]
    fn same_seed_is_bit_identical() {
        let mut rng = stream_rng(99, 0);
        let data: Vec<f64> = Normal::new(1.5, 1.0).unwrap().sample_iter(&mut rng).take(20).collect();
        let model = NormalMean {
            sum: data.iter().sum(),
            n: 20.0,
        };
        let a = run_chains(&model, &cfg(3, 10, 200, 1, 5)).unwrap();
        let b = run_chains(&model, &cfg(3, 10, 200, 1, 5)).unwrap();
        assert_eq!(a, b);
        let c = run_chains(&model, &cfg(3, 10, 200, 1, 6)).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn conjugate_mean_matches_closed_form() {
        let model = NormalMean { sum: 30.0, n: 10.0 };
        let set = run_chains(&model, &cfg(2, 100, 10_000, 1, 17)).unwrap();
        let draws = set.pooled(0);
        let mean = draws.iter().sum::<f64>() / draws.len() as f64;
        let exact = 30.0 / (10.0 + 1e-4);
        let se = (1.0 / (10.0 + 1e-4) / draws.len() as f64).sqrt();
        assert!((mean - exact).abs() < 3.0 * se);
    }

    #[test]
    fn thinning_and_burn_in_layout() {
        let model = NormalMean { sum: 0.0, n: 1.0 };
        let set = run_chains(&model, &cfg(2, 7, 103, 10, 1)).unwrap();
        assert_eq!(set.n_chains(), 2);
        assert_eq!(set.n_stored(), 10);
        assert_eq!(set.n_params(), 1);
        assert_eq!(set.deviance().len(), 20);
    }

    #[test]
    fn overdispersed_chains_converge() {
        let set = run_chains(&RwNormal, &cfg(2, 1000, 5000, 1, 3)).unwrap();
        let r = crate::mcmc::diagnostics::compute_rhat(&set.trace(0)).unwrap();
        assert!(r < 1.05, "rhat {r}");
    }

    #[test]
    fn adaptation_freezes_after_burn_in() {
        let set = run_chains(&RwNormal, &cfg(2, 500, 2000, 1, 8)).unwrap();
        for (c, trace) in set.trace(1).iter().enumerate() {
            assert!(trace.iter().all(|&s| s == trace[0]));
            assert_eq!(set.chain(c).tuning[0].scale, trace[0]);
            let acc = set.chain(c).tuning[0].acceptance;
            assert!((0.25..=0.6).contains(&acc), "acceptance {acc}");
        }
    }

    #[test]
    fn nonfinite_deviance_aborts() {
        let r = run_chains(&Broken, &cfg(1, 0, 5, 1, 0));
        assert!(matches!(r, Err(GmcError::NonfiniteDeviance { chain: 0, .. })));
    }

    #[test]
    fn config_validation() {
        assert!(cfg(0, 0, 10, 1, 0).validate().is_err());
        assert!(cfg(1, 0, 10, 11, 0).validate().is_err());
        assert!(cfg(1, 0, 10, 10, 0).validate().is_ok());
    }
}
