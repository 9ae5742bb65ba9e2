//! Joint Gaussian block for a primary curve `b` and a supplemental curve
//! `b0` tied together by spike-and-slab coupling terms.
//!
//! The stacked vector is `theta = (b, b0)` of length `2n`, `n = K + 1`.

use nalgebra::{DMatrix, DVector};
use rand::Rng;

use crate::error::{GmcError, Result};
use crate::mcmc::updates::sample_canonical_gaussian;
use crate::priors::{mixture_indicator_prob, VAGUE_PRECISION};

/// Gaussian likelihood of one curve in canonical form: precision `a`,
/// linear term `c`.
#[derive(Debug, Clone)]
pub(crate) struct CurveLik {
    pub a: DMatrix<f64>,
    pub c: DVector<f64>,
}

/// Current values of everything the prior on `theta` depends on.
#[derive(Debug, Clone)]
pub(crate) struct Coupling {
    /// Intercept spike precision.
    pub r0: f64,
    /// Shape spike precision.
    pub r_b: f64,
    pub tau: f64,
    pub iota0: bool,
    /// Shared-shape indicators for `k = 1..=K`.
    pub iota: Vec<bool>,
    pub sigma_b: f64,
    pub sigma_b0: f64,
}

fn tie(p: &mut DMatrix<f64>, i: usize, j: usize, kappa: f64) {
    p[(i, i)] += kappa;
    p[(j, j)] += kappa;
    p[(i, j)] -= kappa;
    p[(j, i)] -= kappa;
}

impl Coupling {
    pub fn prior_precision(&self, n: usize) -> DMatrix<f64> {
        let mut p = DMatrix::zeros(2 * n, 2 * n);
        p[(n, n)] += VAGUE_PRECISION;
        p[(n + 1, n + 1)] += VAGUE_PRECISION;
        for k in 2..n {
            p[(n + k, n + k)] += self.sigma_b0.powi(-2);
        }
        tie(&mut p, 0, n, if self.iota0 { self.r0 } else { self.tau });
        for k in 1..n {
            if self.iota[k - 1] {
                tie(&mut p, k, n + k, self.r_b);
            } else {
                p[(k, k)] += if k == 1 {
                    VAGUE_PRECISION
                } else {
                    self.sigma_b.powi(-2)
                };
            }
        }
        p
    }
}

fn canonical(prim: &CurveLik, supp: &CurveLik, prior: DMatrix<f64>) -> (DMatrix<f64>, DVector<f64>) {
    let n = prim.c.len();
    let mut q = prior;
    let mut top = q.view_mut((0, 0), (n, n));
    top += &prim.a;
    let mut bottom = q.view_mut((n, n), (n, n));
    bottom += &supp.a;
    let mut h = DVector::zeros(2 * n);
    h.rows_mut(0, n).copy_from(&prim.c);
    h.rows_mut(n, n).copy_from(&supp.c);
    (q, h)
}

fn log_det(m: DMatrix<f64>) -> Result<f64> {
    let chol = m.cholesky().ok_or(GmcError::NotPositiveDefinite)?;
    Ok(2.0 * chol.l_dirty().diagonal().iter().map(|d| d.ln()).sum::<f64>())
}

/// `log p(data | coupling)` up to terms that do not involve the coupling.
pub(crate) fn log_marginal(prim: &CurveLik, supp: &CurveLik, coupling: &Coupling) -> Result<f64> {
    let n = prim.c.len();
    let prior = coupling.prior_precision(n);
    let ld_prior = log_det(prior.clone())?;
    let (q, h) = canonical(prim, supp, prior);
    let chol = q.cholesky().ok_or(GmcError::NotPositiveDefinite)?;
    let ld_q = 2.0 * chol.l_dirty().diagonal().iter().map(|d| d.ln()).sum::<f64>();
    let w = chol
        .l_dirty()
        .solve_lower_triangular(&h)
        .ok_or(GmcError::NotPositiveDefinite)?;
    Ok(0.5 * (ld_prior - ld_q + w.norm_squared()))
}

/// Draws `theta | coupling, data`.
pub(crate) fn sample_theta<R: Rng + ?Sized>(
    prim: &CurveLik,
    supp: &CurveLik,
    coupling: &Coupling,
    rng: &mut R,
) -> Result<DVector<f64>> {
    let n = prim.c.len();
    let (q, h) = canonical(prim, supp, coupling.prior_precision(n));
    sample_canonical_gaussian(q, &h, rng)
}

/// Gibbs sweep over `iota0, iota_1..iota_K` with `theta` integrated out.
/// Entries with `free[k] == false` are left alone (index 0 is `iota0`).
pub(crate) fn update_indicators_collapsed<R: Rng + ?Sized>(
    prim: &CurveLik,
    supp: &CurveLik,
    coupling: &mut Coupling,
    p0: f64,
    nu: f64,
    free: &[bool],
    rng: &mut R,
) -> Result<()> {
    let mut current = log_marginal(prim, supp, coupling)?;
    for k in 0..=coupling.iota.len() {
        if !free[k] {
            continue;
        }
        let was = flag(coupling, k);
        set_flag(coupling, k, !was);
        let other = log_marginal(prim, supp, coupling)?;
        let (spike, slab) = if was { (current, other) } else { (other, current) };
        let prior = if k == 0 { p0 } else { nu };
        let now = rng.random::<f64>() < mixture_indicator_prob(spike, slab, prior);
        set_flag(coupling, k, now);
        if now != was {
            current = other;
        }
    }
    Ok(())
}

fn flag(c: &Coupling, k: usize) -> bool {
    if k == 0 {
        c.iota0
    } else {
        c.iota[k - 1]
    }
}

fn set_flag(c: &mut Coupling, k: usize, v: bool) {
    if k == 0 {
        c.iota0 = v;
    } else {
        c.iota[k - 1] = v;
    }
}
