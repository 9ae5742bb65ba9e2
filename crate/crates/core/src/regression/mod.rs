//! Gaussian nonparametric regression: conventional penalized splines,
//! two-source GMC borrowing and the hierarchical CTp variant.

mod conventional;
mod coupled;
mod ctp;
mod data;
mod gmc;
mod predict;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use serde::{Deserialize, Serialize};

pub use conventional::fit_regression_conventional;
pub use ctp::{deviation_identifiability, fit_ctp_gmc, IdentifiabilityReport};
pub use data::{Hierarchy, RegressionDataset, Source, Tissue};
pub use gmc::fit_regression_gmc;
pub use predict::{predict_curve, predict_derivative, CurveSelector, CurveSummary};
pub(crate) use predict::check_level;

use crate::error::{GmcError, Result};
use crate::mcmc::updates::update_sigma_slice;
use crate::priors::{CommensurateHyper, GmcHyper};
use crate::spline::Partition;

/// Bounds of the uniform prior on every standard deviation.
pub const SD_LOWER: f64 = 0.01;
pub const SD_UPPER: f64 = 100.0;
const SD_SLICE_WIDTH: f64 = 1.0;

/// Override for the borrowing indicators.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ForceIndicators {
    #[default]
    Free,
    AllZero,
    AllOne,
}

impl std::str::FromStr for ForceIndicators {
    type Err = GmcError;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "free" => Ok(Self::Free),
            "all_zero" => Ok(Self::AllZero),
            "all_one" => Ok(Self::AllOne),
            other => Err(GmcError::InvalidConfig(format!("unknown indicator override `{other}`"))),
        }
    }
}

/// How the spike indicators are resampled.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IndicatorMove {
    /// Each indicator from its prior-density ratio given the current
    /// coefficients.
    Conditional,
    /// Each indicator given the others with the curve coefficients
    /// integrated out, followed by a fresh coefficient draw.
    #[default]
    Collapsed,
}

impl std::str::FromStr for IndicatorMove {
    type Err = GmcError;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "conditional" => Ok(Self::Conditional),
            "collapsed" => Ok(Self::Collapsed),
            other => Err(GmcError::InvalidConfig(format!("unknown indicator move `{other}`"))),
        }
    }
}

/// Prior settings for a two-curve GMC fit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GmcRegressionSpec {
    pub partition: Partition,
    /// Shape spike precision and the Beta prior on `nu`.
    pub curve_hyper: GmcHyper,
    /// Spike-and-slab commensurate prior on the intercept.
    pub intercept_hyper: CommensurateHyper,
    pub force_indicators: ForceIndicators,
    pub indicator_move: IndicatorMove,
}

impl GmcRegressionSpec {
    /// `s_l = 0, s_u = 2, R = 2000, p0 = 0.5, nu ~ Beta(0.5, 0.5)`.
    pub fn simulation_default(partition: Partition) -> Self {
        Self {
            partition,
            curve_hyper: GmcHyper {
                r: 2000.0,
                a1: 0.5,
                a2: 0.5,
            },
            intercept_hyper: CommensurateHyper {
                s_l: 0.0,
                s_u: 2.0,
                r: 2000.0,
                p0: 0.5,
            },
            force_indicators: ForceIndicators::Free,
            indicator_move: IndicatorMove::Collapsed,
        }
    }

    /// `R = 500, s_l = 0.01, s_u = 0.5, p0 = 0.1, nu ~ Beta(0.1, 0.9)`.
    pub fn ctp_default(partition: Partition) -> Self {
        Self {
            partition,
            curve_hyper: GmcHyper {
                r: 500.0,
                a1: 0.1,
                a2: 0.9,
            },
            intercept_hyper: CommensurateHyper {
                s_l: 0.01,
                s_u: 0.5,
                r: 500.0,
                p0: 0.1,
            },
            force_indicators: ForceIndicators::Free,
            indicator_move: IndicatorMove::Collapsed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.curve_hyper.validate()?;
        self.intercept_hyper.validate()
    }

    pub(crate) fn initial_indicator(&self, rng: &mut impl Rng) -> bool {
        match self.force_indicators {
            ForceIndicators::Free => rng.random::<bool>(),
            ForceIndicators::AllZero => false,
            ForceIndicators::AllOne => true,
        }
    }
}

/// `prefix[0]`, ..., `prefix[n-1]`.
pub(crate) fn coef_names(prefix: &str, n: usize) -> Vec<String> {
    (0..n).map(|k| format!("{prefix}[{k}]")).collect()
}

/// Overdispersed starting value for a standard deviation.
pub(crate) fn init_sd(rng: &mut impl Rng) -> f64 {
    rng.random_range(0.5..2.0)
}

/// Slice update of a standard deviation with a uniform prior, given `m`
/// zero-mean Gaussian terms with sum of squares `ss`.
pub(crate) fn sd_slice(current: f64, m: f64, ss: f64, rng: &mut impl Rng) -> Result<f64> {
    update_sigma_slice(
        current,
        |s| -m * s.ln() - ss / (2.0 * s * s),
        SD_LOWER,
        SD_UPPER,
        SD_SLICE_WIDTH,
        rng,
    )
}

/// Gaussian linear-model sufficient statistics.
#[derive(Debug, Clone)]
pub(crate) struct LinearSuff {
    pub xtx: DMatrix<f64>,
    pub xty: DVector<f64>,
    pub yty: f64,
    pub n_obs: usize,
    y_sd: f64,
}

impl LinearSuff {
    pub fn new(x: &DMatrix<f64>, y: &[f64]) -> Self {
        let yv = DVector::from_column_slice(y);
        let n = y.len();
        let mean = y.iter().sum::<f64>() / n as f64;
        let var = y.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n as f64;
        Self {
            xtx: x.transpose() * x,
            xty: x.transpose() * &yv,
            yty: yv.norm_squared(),
            n_obs: n,
            y_sd: var.sqrt(),
        }
    }

    /// Rough scale for starting the noise standard deviation.
    pub fn y_scale(&self) -> f64 {
        self.y_sd.clamp(0.1, 10.0)
    }

    pub fn rss(&self, b: &DVector<f64>) -> f64 {
        (self.yty - 2.0 * b.dot(&self.xty) + (b.transpose() * &self.xtx * b)[(0, 0)]).max(0.0)
    }

    pub fn deviance(&self, b: &DVector<f64>, sigma: f64) -> f64 {
        let n = self.n_obs as f64;
        n * (2.0 * std::f64::consts::PI * sigma * sigma).ln() + self.rss(b) / (sigma * sigma)
    }
}
