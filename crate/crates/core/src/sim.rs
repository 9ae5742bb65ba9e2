//! Simulation study of borrowing behavior as the supplemental curve drifts
//! away from the primary one.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{GmcError, Result};
use crate::mcmc::rng::{derive_seed, stream_rng};
use crate::mcmc::SamplerConfig;
use crate::priors::{CommensurateHyper, GmcHyper};
use crate::regression::{
    fit_regression_conventional, fit_regression_gmc, predict_curve, CurveSelector, CurveSummary,
    GmcRegressionSpec, RegressionDataset, Source,
};
use crate::spline::Partition;

/// Discordance values the replicates draw from by default.
pub const DEFAULT_D_GRID: [f64; 13] = [0.0, 0.05, 0.10, 0.20, 0.35, 0.50, 0.75, 1.0, 1.50, 2.0, 3.0, 4.0, 5.0];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Estimator {
    PrimaryAlone,
    Pooled,
    Gmc,
}

impl Estimator {
    pub const ALL: [Estimator; 3] = [Estimator::PrimaryAlone, Estimator::Pooled, Estimator::Gmc];
}

impl fmt::Display for Estimator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Estimator::PrimaryAlone => "primary_alone",
            Estimator::Pooled => "pooled",
            Estimator::Gmc => "gmc",
        })
    }
}

impl FromStr for Estimator {
    type Err = GmcError;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "primary_alone" => Ok(Estimator::PrimaryAlone),
            "pooled" => Ok(Estimator::Pooled),
            "gmc" => Ok(Estimator::Gmc),
            other => Err(GmcError::InvalidData(format!("unknown estimator `{other}`"))),
        }
    }
}

/// How each replicate picks its discordance value.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DMode {
    /// Uniform draw from the grid.
    Uniform,
    /// Replicate `m` uses `d_grid[m % len]`.
    Stratified,
}

impl FromStr for DMode {
    type Err = GmcError;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "uniform" => Ok(DMode::Uniform),
            "stratified" => Ok(DMode::Stratified),
            other => Err(GmcError::InvalidConfig(format!("unknown d mode `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub d_grid: Vec<f64>,
    /// Primary sample size.
    pub n: usize,
    /// Supplemental sample size.
    pub n0: usize,
    pub sigma: f64,
    pub sigma0: f64,
    /// Number of replicates.
    pub m: usize,
    pub seed: u64,
    pub mode: DMode,
    pub sampler: SamplerConfig,
    /// Equal-spaced interval count for every fit.
    pub intervals: usize,
    pub curve_hyper: GmcHyper,
    pub intercept_hyper: CommensurateHyper,
}

impl SimConfig {
    /// `N = N0 = 50`, unit noise, 200 uniform replicates, `K = 10`.
    pub fn desk_default(seed: u64) -> Self {
        let spec = GmcRegressionSpec::simulation_default(Partition::equal(10).expect("K = 10"));
        Self {
            d_grid: DEFAULT_D_GRID.to_vec(),
            n: 50,
            n0: 50,
            sigma: 1.0,
            sigma0: 1.0,
            m: 200,
            seed,
            mode: DMode::Uniform,
            sampler: SamplerConfig::regression_default(seed),
            intervals: 10,
            curve_hyper: spec.curve_hyper,
            intercept_hyper: spec.intercept_hyper,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n < 2 || self.n0 < 2 || self.m < 1 {
            return Err(GmcError::InvalidConfig(format!(
                "need N, N0 >= 2 and M >= 1, got N={}, N0={}, M={}",
                self.n, self.n0, self.m
            )));
        }
        if !(self.sigma >= 0.0 && self.sigma0 >= 0.0) {
            return Err(GmcError::InvalidConfig("noise standard deviations must be >= 0".into()));
        }
        if self.d_grid.is_empty() || self.d_grid.iter().any(|d| !(*d >= 0.0)) {
            return Err(GmcError::InvalidConfig("d grid must be nonempty and nonnegative".into()));
        }
        self.sampler.validate()?;
        self.curve_hyper.validate()?;
        self.intercept_hyper.validate()
    }

    fn spec(&self) -> Result<GmcRegressionSpec> {
        let mut spec = GmcRegressionSpec::simulation_default(Partition::equal(self.intervals)?);
        spec.curve_hyper = self.curve_hyper;
        spec.intercept_hyper = self.intercept_hyper;
        Ok(spec)
    }
}

/// `(5 + d) t sin((5 + d) t)`; `d = 0` is the primary mean.
pub fn true_mean(t: f64, d: f64) -> f64 {
    let w = 5.0 + d;
    w * t * (w * t).sin()
}

fn grid(n: usize) -> Vec<f64> {
    (0..n).map(|i| i as f64 / (n - 1) as f64).collect()
}

/// Primary and supplemental samples on equally spaced `t` over `[0, 1]`.
pub fn generate_pair(d: f64, cfg: &SimConfig, replicate_seed: u64) -> Result<(RegressionDataset, RegressionDataset)> {
    let mut rng = stream_rng(replicate_seed, 0);
    let mut draw = |n: usize, shift: f64, sd: f64| -> Result<(Vec<f64>, Vec<f64>)> {
        let t = grid(n);
        let noise = Normal::new(0.0, sd).map_err(|e| GmcError::InvalidConfig(e.to_string()))?;
        let y = t.iter().map(|&ti| true_mean(ti, shift) + noise.sample(&mut rng)).collect();
        Ok((y, t))
    };
    let (y, t) = draw(cfg.n, 0.0, cfg.sigma)?;
    let (y0, t0) = draw(cfg.n0, d, cfg.sigma0)?;
    Ok((
        RegressionDataset::single(y, t, Source::Primary)?,
        RegressionDataset::single(y0, t0, Source::Supplemental)?,
    ))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Criteria {
    pub me: f64,
    pub rmse: f64,
    pub criw: f64,
    pub cp: f64,
}

/// Mean error, root-mean-square error, mean interval width and mean
/// pointwise coverage of `fit` against `truth`.
pub fn compute_criteria(fit: &CurveSummary, truth: &[f64]) -> Result<Criteria> {
    let n = truth.len();
    for len in [fit.mean.len(), fit.lower.len(), fit.upper.len()] {
        if len != n {
            return Err(GmcError::DimensionMismatch {
                expected: n,
                actual: len,
            });
        }
    }
    if n == 0 {
        return Err(GmcError::InvalidData("no evaluation points".into()));
    }
    let nf = n as f64;
    let mut c = Criteria {
        me: 0.0,
        rmse: 0.0,
        criw: 0.0,
        cp: 0.0,
    };
    for i in 0..n {
        let e = fit.mean[i] - truth[i];
        c.me += e;
        c.rmse += e * e;
        c.criw += fit.upper[i] - fit.lower[i];
        c.cp += (fit.lower[i] <= truth[i] && truth[i] <= fit.upper[i]) as u8 as f64;
    }
    c.me /= nf;
    c.rmse = (c.rmse / nf).sqrt();
    c.criw /= nf;
    c.cp /= nf;
    Ok(c)
}

/// One estimator on one replicate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CriteriaRecord {
    pub replicate: usize,
    pub seed: u64,
    pub d: f64,
    pub estimator: Estimator,
    pub me: f64,
    pub rmse: f64,
    pub criw: f64,
    pub cp: f64,
}

/// A replicate that could not be completed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicateFailure {
    pub replicate: usize,
    pub seed: u64,
    pub d: f64,
    pub message: String,
}

/// Sampling averages of the criteria for one `(d, estimator)` cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateRow {
    pub d: f64,
    pub estimator: Estimator,
    pub replicates: usize,
    pub me: f64,
    pub me_se: f64,
    pub rmse: f64,
    pub rmse_se: f64,
    pub criw: f64,
    pub criw_se: f64,
    pub cp: f64,
    pub cp_se: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyResult {
    pub records: Vec<CriteriaRecord>,
    pub aggregate: Vec<AggregateRow>,
    pub failures: Vec<ReplicateFailure>,
}

impl StudyResult {
    pub fn cell(&self, d: f64, estimator: Estimator) -> Option<&AggregateRow> {
        self.aggregate.iter().find(|r| r.d == d && r.estimator == estimator)
    }
}

/// `(d, data seed)` of replicate `m`.
fn schedule(cfg: &SimConfig, m: usize) -> (f64, u64) {
    let mut rng = stream_rng(cfg.seed, m as u64);
    let d = match cfg.mode {
        DMode::Uniform => cfg.d_grid[rng.random_range(0..cfg.d_grid.len())],
        DMode::Stratified => cfg.d_grid[m % cfg.d_grid.len()],
    };
    (d, rng.random())
}

fn run_replicate(cfg: &SimConfig, spec: &GmcRegressionSpec, m: usize) -> std::result::Result<Vec<CriteriaRecord>, ReplicateFailure> {
    let (d, seed) = schedule(cfg, m);
    let fail = |e: GmcError| ReplicateFailure {
        replicate: m,
        seed,
        d,
        message: e.to_string(),
    };
    let (prim, supp) = generate_pair(d, cfg, seed).map_err(fail)?;
    let truth: Vec<f64> = prim.t.iter().map(|&t| true_mean(t, 0.0)).collect();
    let pooled = prim.concat(&supp);
    let mut out = Vec::with_capacity(3);
    for (i, est) in Estimator::ALL.into_iter().enumerate() {
        let sampler = SamplerConfig {
            seed: derive_seed(seed, i as u64 + 1),
            ..cfg.sampler
        };
        let chains = match est {
            Estimator::PrimaryAlone => fit_regression_conventional(&prim, &spec.partition, &sampler),
            Estimator::Pooled => fit_regression_conventional(&pooled, &spec.partition, &sampler),
            Estimator::Gmc => fit_regression_gmc(&prim, &supp, spec, &sampler),
        }
        .map_err(fail)?;
        let fit = predict_curve(&chains, CurveSelector::Primary, &spec.partition, &prim.t, 0.95).map_err(fail)?;
        let c = compute_criteria(&fit, &truth).map_err(fail)?;
        out.push(CriteriaRecord {
            replicate: m,
            seed,
            d,
            estimator: est,
            me: c.me,
            rmse: c.rmse,
            criw: c.criw,
            cp: c.cp,
        });
    }
    Ok(out)
}

fn mean_se(x: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let m = x.iter().sum::<f64>() / n;
    if x.len() < 2 {
        return (m, 0.0);
    }
    let var = x.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (n - 1.0);
    (m, (var / n).sqrt())
}

/// Per-`(d, estimator)` averages of `records`, sorted by `d` then estimator.
pub fn aggregate(records: &[CriteriaRecord]) -> Vec<AggregateRow> {
    let mut keys: Vec<(f64, Estimator)> = records.iter().map(|r| (r.d, r.estimator)).collect();
    keys.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    keys.dedup();
    keys.into_iter()
        .map(|(d, estimator)| {
            let cell: Vec<&CriteriaRecord> =
                records.iter().filter(|r| r.d == d && r.estimator == estimator).collect();
            let col = |f: fn(&CriteriaRecord) -> f64| mean_se(&cell.iter().map(|r| f(r)).collect::<Vec<_>>());
            let (me, me_se) = col(|r| r.me);
            let (rmse, rmse_se) = col(|r| r.rmse);
            let (criw, criw_se) = col(|r| r.criw);
            let (cp, cp_se) = col(|r| r.cp);
            AggregateRow {
                d,
                estimator,
                replicates: cell.len(),
                me,
                me_se,
                rmse,
                rmse_se,
                criw,
                criw_se,
                cp,
                cp_se,
            }
        })
        .collect()
}

/// Runs every replicate (concurrently when a thread pool is available) and
/// aggregates by `d`. Failed replicates are logged and excluded.
pub fn run_study(cfg: &SimConfig) -> Result<StudyResult> {
    cfg.validate()?;
    let spec = cfg.spec()?;
    let outcomes: Vec<_> = (0..cfg.m)
        .into_par_iter()
        .map(|m| run_replicate(cfg, &spec, m))
        .collect();
    let mut records = Vec::with_capacity(3 * cfg.m);
    let mut failures = Vec::new();
    for o in outcomes {
        match o {
            Ok(r) => records.extend(r),
            Err(f) => {
                log::warn!("replicate {} (seed {}) failed: {}", f.replicate, f.seed, f.message);
                failures.push(f);
            }
        }
    }
    Ok(StudyResult {
        aggregate: aggregate(&records),
        records,
        failures,
    })
}
