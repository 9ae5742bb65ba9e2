use rand::Rng;
use rand_distr::StandardNormal;

use super::conventional::{crude_log_rate, rw_sum_sq, rw_terms};
use super::likelihood::Exposure;
use super::{gamma_names, rho_names, SurvivalDataset};
use crate::error::{GmcError, Result};
use crate::mcmc::rng::ChainRng;
use crate::mcmc::updates::sample_beta;
use crate::mcmc::{run_chains, ChainSet, PosteriorModel, SamplerConfig, SweepContext};
use crate::priors::{gaussian_lpdf, nu_full_conditional, GmcHyper, VAGUE_PRECISION};
use crate::regression::{init_sd, sd_slice, ForceIndicators};
use crate::spline::Partition;

const NEWTON_ITERS: usize = 100;

pub(crate) struct PweGmcModel {
    prim: Exposure,
    supp: Exposure,
    k: usize,
    n_rho: usize,
    hyper: GmcHyper,
    force: ForceIndicators,
    names: Vec<String>,
}

pub(crate) struct PweGmcState {
    gamma: Vec<f64>,
    gamma0: Vec<f64>,
    rho: Vec<f64>,
    sigma: f64,
    sigma0: f64,
    iota: Vec<bool>,
    nu: f64,
}

/// Mode and curvature of `d g - exp(g) e - a (g - m)^2 / 2`.
fn laplace(d: f64, e: f64, a: f64, m: f64) -> (f64, f64) {
    let mut g = if e > 0.0 && d > 0.0 { (d / e).ln() } else { m };
    for _ in 0..NEWTON_ITERS {
        let h = g.exp() * e;
        let grad = d - h - a * (g - m);
        let curv = h + a;
        let step = (grad / curv).clamp(-2.0, 2.0);
        g += step;
        if step.abs() < 1e-12 {
            break;
        }
    }
    (g, g.exp() * e + a)
}

impl PweGmcModel {
    pub fn new(
        primary: &SurvivalDataset,
        supplemental: &SurvivalDataset,
        hyper: &GmcHyper,
        p: &Partition,
        force: ForceIndicators,
    ) -> Result<Self> {
        hyper.validate()?;
        if primary.is_empty() || supplemental.is_empty() {
            return Err(GmcError::InvalidData(
                "both primary and supplemental data must be nonempty".into(),
            ));
        }
        if supplemental.z.iter().flatten().any(|&v| v) {
            return Err(GmcError::InvalidData(
                "supplemental data must not carry treatment indicators".into(),
            ));
        }
        if primary.n_events() == 0 {
            return Err(GmcError::NoEvents("primary".into()));
        }
        if supplemental.n_events() == 0 {
            return Err(GmcError::NoEvents("supplemental".into()));
        }
        let k = p.intervals();
        let mut names = gamma_names("gamma", k);
        names.extend(gamma_names("gamma0", k));
        names.extend(rho_names(&primary.treatments));
        names.push("sigma_gamma".into());
        names.push("sigma_gamma0".into());
        names.extend(gamma_names("iota", k));
        names.push("nu_gamma".into());
        Ok(Self {
            prim: Exposure::new(primary, p),
            supp: Exposure::new(&supplemental.without_treatments(), p),
            k,
            n_rho: primary.treatments.len(),
            hyper: *hyper,
            force,
            names,
        })
    }

    fn slab_params(&self, s: &PweGmcState, k: usize, prec: f64) -> (f64, f64) {
        if k == 0 {
            (VAGUE_PRECISION, 0.0)
        } else {
            (prec, s.gamma[k - 1])
        }
    }

    /// Slab term of `gamma[k+1]`, which is centred on `gamma[k] = g`.
    fn next_term(&self, s: &PweGmcState, k: usize, g: f64, prec: f64) -> f64 {
        if k + 1 < self.k && !s.iota[k + 1] {
            gaussian_lpdf(s.gamma[k + 1], g, prec)
        } else {
            0.0
        }
    }

    fn own_prior(&self, s: &PweGmcState, k: usize, g: f64, prec: f64) -> f64 {
        if s.iota[k] {
            gaussian_lpdf(g, s.gamma0[k], self.hyper.r)
        } else {
            let (a, m) = self.slab_params(s, k, prec);
            gaussian_lpdf(g, m, a)
        }
    }

    /// Joint Metropolis-Hastings flip of `(iota[k], gamma[k])`. Entering the
    /// spike draws `gamma[k]` from the spike itself; leaving it draws from a
    /// Laplace approximation of the slab conditional.
    fn flip(&self, s: &mut PweGmcState, k: usize, e_k: f64, prec: f64, rng: &mut ChainRng) {
        let (a1, m1) = self.slab_params(s, k, prec);
        let (a2, m2) = if k + 1 < self.k && !s.iota[k + 1] {
            (prec, s.gamma[k + 1])
        } else {
            (0.0, 0.0)
        };
        let a = a1 + a2;
        let m = (a1 * m1 + a2 * m2) / a;
        let (mode, curv) = laplace(self.prim.events_by_interval[k], e_k, a, m);
        let q0 = |g: f64| gaussian_lpdf(g, mode, curv);
        let ll = |g: f64| self.prim.interval_loglik(k, g, e_k);
        let slab = |g: f64| gaussian_lpdf(g, m1, a1);
        let g = s.gamma[k];
        let (ln_nu, ln_1m) = (s.nu.ln(), (1.0 - s.nu).ln());
        let z: f64 = rng.sample(StandardNormal);
        let (proposal, log_ratio) = if s.iota[k] {
            let g1 = mode + z / curv.sqrt();
            let r = ll(g1) + slab(g1) + self.next_term(s, k, g1, prec) + ln_1m
                - ll(g)
                - self.next_term(s, k, g, prec)
                - ln_nu
                - q0(g1);
            (g1, r)
        } else {
            let g1 = s.gamma0[k] + z / self.hyper.r.sqrt();
            let r = ll(g1) + self.next_term(s, k, g1, prec) + ln_nu
                - ll(g)
                - slab(g)
                - self.next_term(s, k, g, prec)
                - ln_1m
                + q0(g);
            (g1, r)
        };
        let u: f64 = rng.random();
        if !log_ratio.is_nan() && u.ln() < log_ratio {
            s.iota[k] = !s.iota[k];
            s.gamma[k] = proposal;
        }
    }
}

impl PosteriorModel for PweGmcModel {
    type State = PweGmcState;

    fn parameter_names(&self) -> Vec<String> {
        self.names.clone()
    }

    fn metropolis_blocks(&self) -> Vec<(String, f64)> {
        let k = self.k;
        let spike_sd = self.hyper.r.sqrt().recip();
        let mut b = Vec::with_capacity(4 * k + self.n_rho);
        for (tag, scale) in [("slab", 0.3), ("spike", 2.0 * spike_sd), ("gamma0", 0.3), ("shift", 0.2)] {
            b.extend((1..=k).map(|j| (format!("{tag}[{j}]"), scale)));
        }
        b.extend(self.names[2 * k..2 * k + self.n_rho].iter().map(|n| (n.clone(), 0.2)));
        b
    }

    fn initial_state(&self, _chain: usize, rng: &mut ChainRng) -> Result<PweGmcState> {
        let base0 = crude_log_rate(&self.supp);
        let base = crude_log_rate(&self.prim);
        let gamma0: Vec<f64> = (0..self.k).map(|_| base0 + rng.random_range(-0.5..0.5)).collect();
        let iota: Vec<bool> = (0..self.k)
            .map(|_| match self.force {
                ForceIndicators::Free => rng.random::<bool>(),
                ForceIndicators::AllZero => false,
                ForceIndicators::AllOne => true,
            })
            .collect();
        let gamma = (0..self.k)
            .map(|k| {
                if iota[k] {
                    gamma0[k]
                } else {
                    base + rng.random_range(-0.5..0.5)
                }
            })
            .collect();
        Ok(PweGmcState {
            gamma,
            gamma0,
            rho: (0..self.n_rho).map(|_| rng.random_range(-0.3..0.3)).collect(),
            sigma: init_sd(rng),
            sigma0: init_sd(rng),
            iota,
            nu: rng.random_range(0.2..0.8),
        })
    }

    fn sweep(&self, s: &mut PweGmcState, ctx: &mut SweepContext<'_>) -> Result<()> {
        let k_all = self.k;
        let prec = s.sigma.powi(-2);
        let prec0 = s.sigma0.powi(-2);
        let r = self.hyper.r;
        let e = self.prim.hazard_exposure(&s.rho);
        let e0 = self.supp.hazard_exposure(&[]);
        let free = self.force == ForceIndicators::Free;
        for k in 0..k_all {
            if free {
                self.flip(s, k, e[k], prec, ctx.rng());
            }

            let block = if s.iota[k] { k_all + k } else { k };
            let lp = |g: f64| {
                self.prim.interval_loglik(k, g, e[k])
                    + self.own_prior(s, k, g, prec)
                    + self.next_term(s, k, g, prec)
            };
            let g = ctx.metropolis(block, s.gamma[k], lp)?;
            s.gamma[k] = g;

            let lp0 = |x: f64| {
                let spike = if s.iota[k] {
                    gaussian_lpdf(s.gamma[k], x, r)
                } else {
                    0.0
                };
                self.supp.interval_loglik(k, x, e0[k]) + rw_terms(&s.gamma0, k, x, prec0) + spike
            };
            let x = ctx.metropolis(2 * k_all + k, s.gamma0[k], lp0)?;
            s.gamma0[k] = x;

            if s.iota[k] {
                let offset = s.gamma[k] - s.gamma0[k];
                let lp = |x: f64| {
                    let g = x + offset;
                    self.prim.interval_loglik(k, g, e[k])
                        + self.next_term(s, k, g, prec)
                        + self.supp.interval_loglik(k, x, e0[k])
                        + rw_terms(&s.gamma0, k, x, prec0)
                };
                let x = ctx.metropolis(3 * k_all + k, s.gamma0[k], lp)?;
                s.gamma0[k] = x;
                s.gamma[k] = x + offset;
            }
        }

        let base = self.prim.baseline_exposure(&s.gamma);
        for j in 0..self.n_rho {
            let mut rho = s.rho.clone();
            let lp = |v: f64| {
                rho[j] = v;
                self.prim.rho_loglik(&rho, &base) + gaussian_lpdf(v, 0.0, VAGUE_PRECISION)
            };
            s.rho[j] = ctx.metropolis(4 * k_all + j, s.rho[j], lp)?;
        }

        let (mut m, mut ss) = (0.0, 0.0);
        for k in 1..k_all {
            if !s.iota[k] {
                m += 1.0;
                ss += (s.gamma[k] - s.gamma[k - 1]).powi(2);
            }
        }
        let rng = ctx.rng();
        s.sigma = sd_slice(s.sigma, m, ss, rng)?;
        s.sigma0 = sd_slice(s.sigma0, (k_all - 1) as f64, rw_sum_sq(&s.gamma0), rng)?;
        s.nu = sample_beta(nu_full_conditional(&s.iota, &self.hyper), rng)?;
        Ok(())
    }

    fn write_draw(&self, s: &PweGmcState, out: &mut [f64]) {
        let (k, p) = (self.k, self.n_rho);
        out[..k].copy_from_slice(&s.gamma);
        out[k..2 * k].copy_from_slice(&s.gamma0);
        out[2 * k..2 * k + p].copy_from_slice(&s.rho);
        out[2 * k + p] = s.sigma;
        out[2 * k + p + 1] = s.sigma0;
        for (o, &i) in out[2 * k + p + 2..3 * k + p + 2].iter_mut().zip(&s.iota) {
            *o = i as u8 as f64;
        }
        out[3 * k + p + 2] = s.nu;
    }

    fn deviance(&self, draw: &[f64]) -> f64 {
        let (k, p) = (self.k, self.n_rho);
        let ll = self.prim.loglik(&draw[..k], &draw[2 * k..2 * k + p])
            + self.supp.loglik(&draw[k..2 * k], &[]);
        -2.0 * ll
    }
}

/// Two-source piecewise-exponential fit with the GMC prior on the primary
/// log-hazards.
///
/// Parameters are `gamma[1..=K]`, `gamma0[1..=K]`, `rho[<treatment>]`,
/// `sigma_gamma`, `sigma_gamma0`, `iota[1..=K]` (0/1) and `nu_gamma`. The
/// deviance covers both sources.
pub fn fit_pwe_gmc(
    primary: &SurvivalDataset,
    supplemental: &SurvivalDataset,
    hyper: &GmcHyper,
    p: &Partition,
    config: &SamplerConfig,
) -> Result<ChainSet> {
    fit_pwe_gmc_forced(primary, supplemental, hyper, p, ForceIndicators::Free, config)
}

/// [`fit_pwe_gmc`] with the indicators optionally pinned.
pub fn fit_pwe_gmc_forced(
    primary: &SurvivalDataset,
    supplemental: &SurvivalDataset,
    hyper: &GmcHyper,
    p: &Partition,
    force: ForceIndicators,
    config: &SamplerConfig,
) -> Result<ChainSet> {
    run_chains(&PweGmcModel::new(primary, supplemental, hyper, p, force)?, config)
}
