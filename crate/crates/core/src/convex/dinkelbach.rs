//! Dinkelbach's parametric method for `max N(x) / D(x)` with `D > 0`.
//!
//! Each iteration solves the parametric problem `max N(x) - q D(x)` and
//! updates `q <- N(x*) / D(x*)`. The auxiliary value
//! `F(q) = max N - qD` is nonincreasing in `q` and vanishes at the optimum.

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DinkelbachOptions {
    /// Stop once `|N(x) - q D(x)| <= tol * max(1, |N(x)|)`.
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for DinkelbachOptions {
    fn default() -> Self {
        DinkelbachOptions {
            tol: 1e-6,
            max_iter: 30,
        }
    }
}

/// Point returned by the inner parametric solve, with its numerator and
/// denominator evaluated by the caller's model.
#[derive(Debug, Clone, PartialEq)]
pub struct Fractional<X> {
    pub x: X,
    pub numerator: f64,
    pub denominator: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DinkelbachStep {
    pub q: f64,
    /// `N(x_t) - q_t D(x_t)` at the parametric optimum.
    pub aux: f64,
}

#[derive(Debug, Clone)]
pub struct DinkelbachResult<X> {
    pub x: X,
    /// Fractional value `N(x) / D(x)` of the returned point.
    pub q: f64,
    pub converged: bool,
    pub history: Vec<DinkelbachStep>,
}

/// Runs Dinkelbach's iteration starting from `q_init`.
///
/// `inner(q)` must return a maximizer of `N(x) - q D(x)` over the feasible
/// set. Inner failures are propagated. If `max_iter` is exhausted the point
/// with the best ratio seen so far is returned with `converged = false`.
pub fn dinkelbach<X, F>(q_init: f64, opts: &DinkelbachOptions, mut inner: F) -> Result<DinkelbachResult<X>>
where
    F: FnMut(f64) -> Result<Fractional<X>>,
{
    let mut q = q_init;
    let mut history = Vec::new();
    let mut best: Option<(f64, X)> = None;

    for _ in 0..opts.max_iter.max(1) {
        let Fractional {
            x,
            numerator,
            denominator,
        } = inner(q)?;
        if !(denominator > 0.0) || !numerator.is_finite() {
            return Err(Error::SolverFailure(format!(
                "fractional denominator must be positive (got {denominator})"
            )));
        }
        let aux = numerator - q * denominator;
        history.push(DinkelbachStep { q, aux });
        let ratio = numerator / denominator;
        if best.as_ref().is_none_or(|(r, _)| ratio > *r) {
            best = Some((ratio, x));
        }
        // A negative auxiliary value can only come from inexact inner solves
        // once q is already attained; treat it as converged.
        let scale = opts.tol * numerator.abs().max(1.0);
        if aux.abs() <= scale || (history.len() > 1 && aux <= scale) {
            let (q, x) = best.expect("at least one iteration");
            return Ok(DinkelbachResult {
                x,
                q,
                converged: true,
                history,
            });
        }
        q = ratio;
    }

    let (q, x) = best.expect("at least one iteration");
    Ok(DinkelbachResult {
        x,
        q,
        converged: false,
        history,
    })
}
