use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::SurvivalDataset;
use crate::error::{GmcError, Result};
use crate::spline::Partition;

/// Days of follow-up mapped onto `t = 1`.
pub const DEFAULT_HORIZON_DAYS: f64 = 730.0;

/// Log-hazards per interval and log hazard ratios per treatment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PweParams {
    pub gamma: Vec<f64>,
    pub rho: Vec<f64>,
}

/// Divides follow-up times by the horizon.
pub fn rescale_time(times: &[f64], horizon: f64) -> Result<Vec<f64>> {
    if !(horizon > 0.0 && horizon.is_finite()) {
        return Err(GmcError::InvalidConfig(format!("horizon must be positive, got {horizon}")));
    }
    times
        .iter()
        .map(|&t| {
            if t > horizon {
                Err(GmcError::OutOfHorizon { time: t, horizon })
            } else if !(t > 0.0) {
                Err(GmcError::InvalidData(format!("time must be positive, got {t}")))
            } else {
                Ok(t / horizon)
            }
        })
        .collect()
}

/// Time spent in each interval of `p` by a subject followed up to `t`.
pub(crate) fn overlaps(t: f64, p: &Partition) -> Vec<f64> {
    p.knots()
        .windows(2)
        .map(|w| (t.min(w[1]) - w[0]).max(0.0))
        .collect()
}

fn linear_predictor(rho: &[f64], z: &[bool]) -> f64 {
    rho.iter().zip(z).filter(|(_, &zi)| zi).map(|(r, _)| r).sum()
}

fn check_dims(params: &PweParams, data: &SurvivalDataset, p: &Partition) -> Result<()> {
    if params.gamma.len() != p.intervals() {
        return Err(GmcError::DimensionMismatch {
            expected: p.intervals(),
            actual: params.gamma.len(),
        });
    }
    if params.rho.len() != data.treatments.len() {
        return Err(GmcError::DimensionMismatch {
            expected: data.treatments.len(),
            actual: params.rho.len(),
        });
    }
    Ok(())
}

/// Piecewise-exponential proportional-hazards log likelihood.
///
/// Intervals are right-closed, so an event on a knot belongs to the earlier
/// interval.
pub fn pwe_loglik(params: &PweParams, data: &SurvivalDataset, p: &Partition) -> Result<f64> {
    check_dims(params, data, p)?;
    let mut ll = 0.0;
    for i in 0..data.len() {
        let lin = linear_predictor(&params.rho, &data.z[i]);
        let t = data.time[i];
        if data.event[i] {
            ll += params.gamma[p.interval_of(t)] + lin;
        }
        for (g, d) in params.gamma.iter().zip(overlaps(t, p)) {
            if d > 0.0 {
                ll -= (g + lin).exp() * d;
            }
        }
    }
    Ok(ll)
}

/// Event counts and exposure per (covariate pattern, interval); the
/// likelihood only depends on data through these.
#[derive(Debug, Clone)]
pub(crate) struct Exposure {
    pub patterns: Vec<Vec<bool>>,
    /// `events[p][k]`
    pub events: Vec<Vec<f64>>,
    /// `time[p][k]`
    pub time: Vec<Vec<f64>>,
    pub events_by_interval: Vec<f64>,
    pub events_by_pattern: Vec<f64>,
}

impl Exposure {
    pub fn new(data: &SurvivalDataset, p: &Partition) -> Self {
        let k = p.intervals();
        let mut index: BTreeMap<&[bool], usize> = BTreeMap::new();
        let mut patterns = Vec::new();
        let mut events = Vec::new();
        let mut time = Vec::new();
        for i in 0..data.len() {
            let z = data.z[i].as_slice();
            let j = *index.entry(z).or_insert_with(|| {
                patterns.push(z.to_vec());
                events.push(vec![0.0; k]);
                time.push(vec![0.0; k]);
                patterns.len() - 1
            });
            if data.event[i] {
                events[j][p.interval_of(data.time[i])] += 1.0;
            }
            for (acc, d) in time[j].iter_mut().zip(overlaps(data.time[i], p)) {
                *acc += d;
            }
        }
        let events_by_interval = (0..k).map(|kk| events.iter().map(|e| e[kk]).sum()).collect();
        let events_by_pattern = events.iter().map(|e| e.iter().sum()).collect();
        Self {
            patterns,
            events,
            time,
            events_by_interval,
            events_by_pattern,
        }
    }

    pub fn intervals(&self) -> usize {
        self.events_by_interval.len()
    }

    pub fn total_events(&self) -> f64 {
        self.events_by_pattern.iter().sum()
    }

    pub fn total_time(&self) -> f64 {
        self.time.iter().flatten().sum()
    }

    pub fn linear(&self, rho: &[f64]) -> Vec<f64> {
        self.patterns.iter().map(|z| linear_predictor(rho, z)).collect()
    }

    /// `sum_p exp(rho.z_p) time[p][k]` for every `k`.
    pub fn hazard_exposure(&self, rho: &[f64]) -> Vec<f64> {
        let w: Vec<f64> = self.linear(rho).iter().map(|l| l.exp()).collect();
        (0..self.intervals())
            .map(|k| w.iter().zip(&self.time).map(|(wp, tp)| wp * tp[k]).sum())
            .collect()
    }

    /// `sum_k exp(gamma_k) time[p][k]` for every pattern.
    pub fn baseline_exposure(&self, gamma: &[f64]) -> Vec<f64> {
        self.time
            .iter()
            .map(|tp| tp.iter().zip(gamma).map(|(t, g)| t * g.exp()).sum())
            .collect()
    }

    /// Log likelihood in `gamma_k` alone: `d_k g - exp(g) E_k`.
    pub fn interval_loglik(&self, k: usize, g: f64, e_k: f64) -> f64 {
        self.events_by_interval[k] * g - g.exp() * e_k
    }

    /// Log likelihood as a function of `rho` with the baseline summarized by
    /// [`Exposure::baseline_exposure`].
    pub fn rho_loglik(&self, rho: &[f64], baseline: &[f64]) -> f64 {
        self.linear(rho)
            .iter()
            .zip(&self.events_by_pattern)
            .zip(baseline)
            .map(|((l, d), h)| d * l - l.exp() * h)
            .sum()
    }

    pub fn loglik(&self, gamma: &[f64], rho: &[f64]) -> f64 {
        let mut ll = 0.0;
        for (j, lin) in self.linear(rho).into_iter().enumerate() {
            for (k, g) in gamma.iter().enumerate() {
                let d = self.events[j][k];
                let t = self.time[j][k];
                ll += d * (g + lin);
                if t > 0.0 {
                    ll -= (g + lin).exp() * t;
                }
            }
        }
        ll
    }
}
