//! Average tissue curves plus smooth per-individual deviation curves.
//!
//! `y = phi_r(t) + psi_{r,i}(t) + e` with `phi_T` (cancerous) borrowing its
//! shape and intercept from `phi_N` (noncancerous) through the GMC and
//! commensurate priors. Deviation curves use raw coefficients
//! `alpha_{r,i,k} ~ N(0, sigma_{a,r,i}^2)`, `k = 0..=K`, and are integrated
//! out analytically when the average curves are drawn.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use serde::Serialize;

use super::coupled::{sample_theta, update_indicators_collapsed, Coupling, CurveLik};
use super::gmc::tau_slice;
use super::predict::{predict_curve, CurveSelector};
use super::{
    coef_names, init_sd, sd_slice, ForceIndicators, GmcRegressionSpec, IndicatorMove,
    RegressionDataset, Tissue,
};
use crate::error::{GmcError, Result};
use crate::mcmc::rng::ChainRng;
use crate::mcmc::updates::{sample_bernoulli, sample_beta, sample_canonical_gaussian};
use crate::mcmc::{run_chains, ChainSet, PosteriorModel, SamplerConfig, SweepContext};
use crate::priors::{gaussian_lpdf, mixture_indicator_prob, nu_full_conditional, VAGUE_PRECISION};
use crate::spline::{design_matrix, Partition, SplineBasis};

const TISSUES: [Tissue; 2] = [Tissue::Cancerous, Tissue::Noncancerous];

fn slot(t: Tissue) -> usize {
    match t {
        Tissue::Cancerous => 0,
        Tissue::Noncancerous => 1,
    }
}

/// Cross-products of one (tissue, individual) group in raw coefficients.
struct Group {
    tissue: Tissue,
    individual: i64,
    g: DMatrix<f64>,
    u: DVector<f64>,
    yty: f64,
}

pub(crate) struct CtpModel {
    n: usize,
    whitening: DMatrix<f64>,
    groups: Vec<Group>,
    n_obs: [usize; 2],
    y_scale: [f64; 2],
    spec: GmcRegressionSpec,
}

pub(crate) struct CtpState {
    /// `(bT, bN)` stacked, whitened.
    theta: DVector<f64>,
    sigma_e: [f64; 2],
    coupling: Coupling,
    nu: f64,
    alpha: Vec<DVector<f64>>,
    sigma_a: Vec<f64>,
}

impl CtpModel {
    pub fn new(data: &RegressionDataset, spec: &GmcRegressionSpec) -> Result<Self> {
        spec.validate()?;
        let h = data
            .hierarchy
            .as_ref()
            .ok_or_else(|| GmcError::MissingHierarchy("individual, region and tissue labels".into()))?;
        let basis = SplineBasis::new(spec.partition.clone())?;
        let n = basis.dim();
        let mut rows: BTreeMap<(Tissue, i64), Vec<usize>> = BTreeMap::new();
        for i in 0..data.len() {
            rows.entry((h.tissue[i], h.individual[i])).or_default().push(i);
        }
        for t in TISSUES {
            if !rows.keys().any(|(r, _)| *r == t) {
                return Err(GmcError::MissingHierarchy(format!("no {t} readings")));
            }
        }
        let mut n_obs = [0; 2];
        let mut ys: [Vec<f64>; 2] = [Vec::new(), Vec::new()];
        let mut groups = Vec::with_capacity(rows.len());
        for ((tissue, individual), idx) in rows {
            let t: Vec<f64> = idx.iter().map(|&i| data.t[i]).collect();
            let y = DVector::from_iterator(idx.len(), idx.iter().map(|&i| data.y[i]));
            let z = design_matrix(&t, &spec.partition)?;
            n_obs[slot(tissue)] += idx.len();
            ys[slot(tissue)].extend(y.iter());
            groups.push(Group {
                tissue,
                individual,
                g: z.transpose() * &z,
                u: z.transpose() * &y,
                yty: y.norm_squared(),
            });
        }
        let sd = |v: &[f64]| {
            let m = v.iter().sum::<f64>() / v.len() as f64;
            (v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / v.len() as f64).sqrt().clamp(0.1, 10.0)
        };
        Ok(Self {
            n,
            whitening: basis.whitening().clone(),
            groups,
            n_obs,
            y_scale: [sd(&ys[0]), sd(&ys[1])],
            spec: spec.clone(),
        })
    }

    fn free(&self) -> bool {
        self.spec.force_indicators == ForceIndicators::Free
    }

    /// Likelihood of each average curve with deviations integrated out.
    fn marginal_liks(&self, s: &CtpState) -> Result<[CurveLik; 2]> {
        let n = self.n;
        let mut a = [DMatrix::zeros(n, n), DMatrix::zeros(n, n)];
        let mut c = [DVector::zeros(n), DVector::zeros(n)];
        for (grp, &sa) in self.groups.iter().zip(&s.sigma_a) {
            let r = slot(grp.tissue);
            let se2 = s.sigma_e[r] * s.sigma_e[r];
            let m = &grp.g + DMatrix::identity(n, n) * (se2 / (sa * sa));
            let chol = m.cholesky().ok_or(GmcError::NotPositiveDefinite)?;
            let mg = chol.solve(&grp.g);
            let mu = chol.solve(&grp.u);
            a[r] += (&grp.g - &grp.g * mg) / se2;
            c[r] += (&grp.u - &grp.g * mu) / se2;
        }
        let w = &self.whitening;
        let lik = |r: usize| {
            let mut aw = w.transpose() * &a[r] * w;
            // restore exact symmetry lost in the products
            aw = (&aw + aw.transpose()) * 0.5;
            CurveLik {
                a: aw,
                c: w.transpose() * &c[r],
            }
        };
        Ok([lik(0), lik(1)])
    }

    fn rss(&self, beta: &[DVector<f64>; 2], alpha: &[DVector<f64>]) -> [f64; 2] {
        let mut rss = [0.0; 2];
        for (grp, a) in self.groups.iter().zip(alpha) {
            let r = slot(grp.tissue);
            let w = &beta[r] + a;
            rss[r] += (grp.yty - 2.0 * w.dot(&grp.u) + (w.transpose() * &grp.g * &w)[(0, 0)]).max(0.0);
        }
        rss
    }

    fn betas(&self, theta: &[f64]) -> [DVector<f64>; 2] {
        let n = self.n;
        [
            &self.whitening * DVector::from_column_slice(&theta[..n]),
            &self.whitening * DVector::from_column_slice(&theta[n..2 * n]),
        ]
    }

    fn group_label(g: &Group) -> String {
        format!("{}_{}", g.tissue.code(), g.individual)
    }

    fn head_len(&self) -> usize {
        3 * self.n + 6
    }
}

impl PosteriorModel for CtpModel {
    type State = CtpState;

    fn parameter_names(&self) -> Vec<String> {
        let n = self.n;
        let mut names = coef_names("bT", n);
        names.extend(coef_names("bN", n));
        for s in ["sigma_eT", "sigma_eN", "sigma_bT", "sigma_bN", "tau", "iota0"] {
            names.push(s.into());
        }
        names.extend((1..n).map(|k| format!("iota[{k}]")));
        names.push("nu".into());
        for g in &self.groups {
            let label = Self::group_label(g);
            names.push(format!("sigma_a_{label}"));
            names.extend(coef_names(&format!("alpha_{label}"), n));
        }
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
        Ok(CtpState {
            theta: DVector::zeros(2 * self.n),
            sigma_e: [init_sd(rng) * self.y_scale[0], init_sd(rng) * self.y_scale[1]],
            coupling,
            nu: rng.random_range(0.2..0.8),
            alpha: vec![DVector::zeros(self.n); self.groups.len()],
            sigma_a: (0..self.groups.len()).map(|_| init_sd(rng) * 0.5).collect(),
        })
    }

    fn sweep(&self, s: &mut Self::State, ctx: &mut SweepContext<'_>) -> Result<()> {
        let n = self.n;
        let p0 = self.spec.intercept_hyper.p0;
        let collapsed = self.spec.indicator_move == IndicatorMove::Collapsed;
        let [lt, ln] = self.marginal_liks(s)?;
        if collapsed && self.free() {
            update_indicators_collapsed(&lt, &ln, &mut s.coupling, p0, s.nu, &vec![true; n], ctx.rng())?;
        }
        s.theta = sample_theta(&lt, &ln, &s.coupling, ctx.rng())?;
        let beta = self.betas(s.theta.as_slice());
        let rng = ctx.rng();

        for (k, grp) in self.groups.iter().enumerate() {
            let r = slot(grp.tissue);
            let inv_se2 = s.sigma_e[r].powi(-2);
            let q = &grp.g * inv_se2 + DMatrix::identity(n, n) * s.sigma_a[k].powi(-2);
            let h = (&grp.u - &grp.g * &beta[r]) * inv_se2;
            s.alpha[k] = sample_canonical_gaussian(q, &h, rng)?;
        }

        let rss = self.rss(&beta, &s.alpha);
        for r in 0..2 {
            s.sigma_e[r] = sd_slice(s.sigma_e[r], self.n_obs[r] as f64, rss[r], rng)?;
        }
        for k in 0..self.groups.len() {
            s.sigma_a[k] = sd_slice(s.sigma_a[k], n as f64, s.alpha[k].norm_squared(), rng)?;
        }
        let b = s.theta.rows(0, n).into_owned();
        let b0 = s.theta.rows(n, n).into_owned();
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
            let c = &mut s.coupling;
            let spike0 = gaussian_lpdf(b[0], b0[0], c.r0);
            let slab0 = gaussian_lpdf(b[0], b0[0], c.tau);
            c.iota0 = sample_bernoulli(mixture_indicator_prob(spike0, slab0, p0), rng);
            let slab_prec = c.sigma_b.powi(-2);
            for k in 1..n {
                let spike = gaussian_lpdf(b[k], b0[k], c.r_b);
                let prec = if k == 1 { VAGUE_PRECISION } else { slab_prec };
                let slab = gaussian_lpdf(b[k], 0.0, prec);
                c.iota[k - 1] = sample_bernoulli(mixture_indicator_prob(spike, slab, s.nu), rng);
            }
        }
        s.nu = sample_beta(nu_full_conditional(&s.coupling.iota, &self.spec.curve_hyper), rng)?;
        Ok(())
    }

    fn write_draw(&self, s: &Self::State, out: &mut [f64]) {
        let n = self.n;
        out[..2 * n].copy_from_slice(s.theta.as_slice());
        let c = &s.coupling;
        let tail = [
            s.sigma_e[0],
            s.sigma_e[1],
            c.sigma_b,
            c.sigma_b0,
            c.tau,
            c.iota0 as u8 as f64,
        ];
        out[2 * n..2 * n + 6].copy_from_slice(&tail);
        for (o, &i) in out[2 * n + 6..3 * n + 5].iter_mut().zip(&c.iota) {
            *o = i as u8 as f64;
        }
        out[3 * n + 5] = s.nu;
        let mut pos = self.head_len();
        for (a, &sa) in s.alpha.iter().zip(&s.sigma_a) {
            out[pos] = sa;
            out[pos + 1..pos + 1 + n].copy_from_slice(a.as_slice());
            pos += n + 1;
        }
    }

    fn deviance(&self, draw: &[f64]) -> f64 {
        let n = self.n;
        let beta = self.betas(draw);
        let head = self.head_len();
        let alpha: Vec<DVector<f64>> = (0..self.groups.len())
            .map(|k| {
                let pos = head + k * (n + 1) + 1;
                DVector::from_column_slice(&draw[pos..pos + n])
            })
            .collect();
        let rss = self.rss(&beta, &alpha);
        let sigma_e = [draw[2 * n], draw[2 * n + 1]];
        (0..2)
            .map(|r| {
                let s2 = sigma_e[r] * sigma_e[r];
                self.n_obs[r] as f64 * (2.0 * std::f64::consts::PI * s2).ln() + rss[r] / s2
            })
            .sum()
    }
}

/// Sum of posterior-mean deviation curves within one tissue compared with
/// the range of that tissue's average curve.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IdentifiabilityReport {
    pub tissue: Tissue,
    pub individuals: usize,
    pub max_abs_sum: f64,
    pub average_range: f64,
    /// `max_abs_sum > 0.25 * average_range`.
    pub flagged: bool,
}

/// Checks that deviation curves do not absorb the average curves.
pub fn deviation_identifiability(
    chains: &ChainSet,
    partition: &Partition,
    grid: &[f64],
) -> Result<Vec<IdentifiabilityReport>> {
    let x = design_matrix(grid, partition)?;
    let n = partition.intervals() + 1;
    let means = chains.posterior_mean();
    let mut out = Vec::new();
    for tissue in TISSUES {
        let prefix = format!("alpha_{}_", tissue.code());
        let mut sum = DVector::zeros(n);
        let mut individuals = 0;
        for (i, name) in chains.names().iter().enumerate() {
            if let Some(rest) = name.strip_prefix(&prefix) {
                if let Some(k) = rest.rfind('[').and_then(|p| rest[p + 1..rest.len() - 1].parse::<usize>().ok()) {
                    sum[k] += means[i];
                    if k == 0 {
                        individuals += 1;
                    }
                }
            }
        }
        let which = match tissue {
            Tissue::Cancerous => CurveSelector::Cancerous,
            Tissue::Noncancerous => CurveSelector::Noncancerous,
        };
        let avg = predict_curve(chains, which, partition, grid, 0.95)?;
        let hi = avg.mean.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let lo = avg.mean.iter().cloned().fold(f64::INFINITY, f64::min);
        let max_abs_sum = (&x * &sum).amax();
        let average_range = hi - lo;
        out.push(IdentifiabilityReport {
            tissue,
            individuals,
            max_abs_sum,
            average_range,
            flagged: max_abs_sum > 0.25 * average_range,
        });
    }
    Ok(out)
}

/// Hierarchical CTp fit with GMC borrowing from noncancerous to cancerous
/// tissue.
///
/// Parameters are `bT[k]`, `bN[k]` (whitened average curves), `sigma_eT`,
/// `sigma_eN`, `sigma_bT`, `sigma_bN`, `tau`, `iota0`, `iota[1..=K]`,
/// `nu`, then per (tissue, individual) group `sigma_a_<T|N>_<id>` and
/// `alpha_<T|N>_<id>[k]`. The `source` column of `data` is ignored.
pub fn fit_ctp_gmc(
    data: &RegressionDataset,
    spec: &GmcRegressionSpec,
    config: &SamplerConfig,
) -> Result<ChainSet> {
    let model = CtpModel::new(data, spec)?;
    let chains = run_chains(&model, config)?;
    let grid: Vec<f64> = (0..=100).map(|i| i as f64 / 100.0).collect();
    for r in deviation_identifiability(&chains, &spec.partition, &grid)? {
        if r.flagged {
            log::warn!(
                "{} deviation curves sum to {:.3}, more than a quarter of the average-curve range {:.3}",
                r.tissue,
                r.max_abs_sum,
                r.average_range
            );
        }
    }
    Ok(chains)
}
