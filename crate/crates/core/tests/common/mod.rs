#![allow(dead_code)]

use std::fmt::Write as _;
use std::path::Path;

use gmc_core::mcmc::rng::{stream_rng, ChainRng};
use gmc_core::mcmc::SamplerConfig;
use gmc_core::regression::{Hierarchy, RegressionDataset, Source, Tissue};
use gmc_core::survival::SurvivalDataset;
use rand::Rng;
use rand_distr::{Distribution, Normal};

pub fn rng(seed: u64) -> ChainRng {
    stream_rng(seed, 0)
}

pub fn quick_sampler(seed: u64) -> SamplerConfig {
    SamplerConfig {
        chains: 2,
        burn_in: 500,
        iterations: 2000,
        thin: 1,
        seed,
    }
}

fn exponential(rate: f64, rng: &mut impl Rng) -> f64 {
    -(1.0 - rng.random::<f64>()).ln() / rate
}

/// Exponential event times with hazard `h` on the rescaled axis, optional
/// exponential censoring at rate `censor`, administrative censoring at 1.
pub fn cohort_times(n: usize, h: f64, censor: f64, rng: &mut impl Rng) -> (Vec<f64>, Vec<bool>) {
    let mut time = Vec::with_capacity(n);
    let mut event = Vec::with_capacity(n);
    for _ in 0..n {
        let x = exponential(h, rng);
        let c = if censor > 0.0 { exponential(censor, rng) } else { f64::INFINITY };
        let (t, e) = if x <= c { (x, true) } else { (c, false) };
        if t >= 1.0 {
            time.push(1.0);
            event.push(false);
        } else {
            time.push(t.max(1e-9));
            event.push(e);
        }
    }
    (time, event)
}

pub fn cohort(n: usize, h: f64, censor: f64, src: Source, rng: &mut impl Rng) -> SurvivalDataset {
    let (t, e) = cohort_times(n, h, censor, rng);
    SurvivalDataset::single(t, e, src).unwrap()
}

/// Primary cohort with one binary treatment `z_F`; treated hazards are
/// multiplied by `hr`.
pub fn treated_cohort(n: usize, h: f64, hr: f64, rng: &mut impl Rng) -> SurvivalDataset {
    let mut time = Vec::with_capacity(n);
    let mut event = Vec::with_capacity(n);
    let mut z = Vec::with_capacity(n);
    for i in 0..n {
        let treated = i % 2 == 1;
        let (t, e) = cohort_times(1, if treated { h * hr } else { h }, 0.0, rng);
        time.push(t[0]);
        event.push(e[0]);
        z.push(vec![treated]);
    }
    SurvivalDataset::new(time, event, vec!["z_F".into()], z, vec![Source::Primary; n]).unwrap()
}

/// Hazard mimicking 197 events among 211 subjects over the horizon.
pub fn primary_hazard() -> f64 {
    -(14.0f64 / 211.0).ln()
}

/// Matched primary (211 subjects) and supplemental (224) cohorts; the
/// supplemental hazard is `mult` times the primary one and is censored at
/// a rate giving roughly 172 events when `mult = 1`.
pub fn survival_pair(mult: f64, seed: u64) -> (SurvivalDataset, SurvivalDataset) {
    let mut r = rng(seed);
    let h = primary_hazard();
    let prim = cohort(211, h, 0.0, Source::Primary, &mut r);
    let supp = cohort(224, h * mult, 0.7, Source::Supplemental, &mut r);
    (prim, supp)
}

pub fn phi_n(t: f64) -> f64 {
    (2.0 * std::f64::consts::PI * t).sin()
}

/// Two-tissue hierarchical data: `individuals` persons, one region per
/// tissue, `points` equally spaced observations per region. `phi_t` is the
/// cancerous average curve; the noncancerous one is `phi_n`.
pub fn ctp_fixture(
    individuals: usize,
    points: usize,
    noise: f64,
    phi_t: impl Fn(f64) -> f64,
    seed: u64,
) -> RegressionDataset {
    let mut r = rng(seed);
    let dev = Normal::new(0.0, 0.1).unwrap();
    let eps = Normal::new(0.0, noise).unwrap();
    let (mut y, mut t, mut src) = (vec![], vec![], vec![]);
    let (mut ind, mut reg, mut tis) = (vec![], vec![], vec![]);
    for i in 0..individuals {
        for (region, tissue) in [(1, Tissue::Cancerous), (2, Tissue::Noncancerous)] {
            let a = dev.sample(&mut r);
            let c = dev.sample(&mut r);
            for j in 0..points {
                let tj = j as f64 / (points - 1) as f64;
                let mean = match tissue {
                    Tissue::Cancerous => phi_t(tj),
                    Tissue::Noncancerous => phi_n(tj),
                };
                y.push(mean + a + c * (tj - 0.5) + eps.sample(&mut r));
                t.push(tj);
                src.push(match tissue {
                    Tissue::Cancerous => Source::Primary,
                    Tissue::Noncancerous => Source::Supplemental,
                });
                ind.push(i as i64 + 1);
                reg.push(region);
                tis.push(tissue);
            }
        }
    }
    let h = Hierarchy {
        individual: ind,
        region: reg,
        tissue: tis,
    };
    RegressionDataset::new(y, t, src, Some(h)).unwrap()
}

pub fn mean_of(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

pub fn write_regression_csv(path: &Path, data: &RegressionDataset) {
    let mut s = String::from("y,t,source\n");
    for i in 0..data.len() {
        writeln!(s, "{},{},{}", data.y[i], data.t[i], data.source[i]).unwrap();
    }
    std::fs::write(path, s).unwrap();
}

/// Writes `time_days,event,source` rows; rescaled times are mapped back to
/// days over `horizon`.
pub fn write_survival_csv(path: &Path, data: &SurvivalDataset, horizon: f64) {
    let mut s = String::from("time_days,event,source\n");
    for i in 0..data.len() {
        writeln!(s, "{},{},{}", data.time[i] * horizon, data.event[i] as u8, data.source[i]).unwrap();
    }
    std::fs::write(path, s).unwrap();
}

/// Posterior mean of a per-draw functional and its Monte Carlo standard
/// error from the multi-chain ESS.
pub fn mc_mean_se(traces: &[Vec<f64>]) -> (f64, f64) {
    let all: Vec<f64> = traces.iter().flatten().copied().collect();
    let m = mean_of(&all);
    let var = all.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (all.len() - 1) as f64;
    let ess = gmc_core::mcmc::compute_ess(traces).unwrap();
    (m, (var / ess).sqrt())
}

/// Per-chain traces of `f(draw)`.
pub fn functional_traces(chains: &gmc_core::mcmc::ChainSet, f: impl Fn(&[f64]) -> f64) -> Vec<Vec<f64>> {
    (0..chains.n_chains())
        .map(|c| (0..chains.n_stored()).map(|i| f(chains.draw(c, i))).collect())
        .collect()
}

/// True when two independent estimates agree within 3 combined MC SE.
pub fn agree(a: (f64, f64), b: (f64, f64)) -> bool {
    (a.0 - b.0).abs() <= 3.0 * (a.1 * a.1 + b.1 * b.1).sqrt()
}
