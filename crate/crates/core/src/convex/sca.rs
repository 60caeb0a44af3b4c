//! Successive convex approximation driver.
//!
//! The caller supplies a step that solves the convex surrogate built around
//! the current iterate and an evaluator of the true objective (maximized).
//! A valid surrogate never lowers the true objective; a drop beyond the
//! configured slack aborts with [`Error::SurrogateViolation`].

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScaOptions {
    /// Stop when the relative improvement falls below this threshold.
    pub eps: f64,
    pub max_iter: usize,
    /// Allowed decrease of the true objective, relative to `max(1, |f|)`.
    /// Decreases within this slack end the run at the previous iterate.
    pub validity_slack: f64,
}

impl Default for ScaOptions {
    fn default() -> Self {
        ScaOptions {
            eps: 1e-3,
            max_iter: 50,
            validity_slack: 1e-9,
        }
    }
}

#[derive(Debug, Clone)]
pub struct ScaTrace<X> {
    /// Accepted iterates, starting with the initial point.
    pub iterates: Vec<X>,
    /// True objective of each accepted iterate (nondecreasing).
    pub objectives: Vec<f64>,
    pub converged: bool,
}

impl<X> ScaTrace<X> {
    pub fn last(&self) -> &X {
        self.iterates.last().expect("trace holds the initial point")
    }

    pub fn into_last(mut self) -> X {
        self.iterates.pop().expect("trace holds the initial point")
    }

    pub fn last_objective(&self) -> f64 {
        *self.objectives.last().expect("trace holds the initial point")
    }

    pub fn steps(&self) -> usize {
        self.iterates.len() - 1
    }
}

/// Runs SCA from `x0` until the relative improvement drops below `eps`.
pub fn sca_drive<X, S, O>(x0: X, opts: &ScaOptions, mut step: S, objective: O) -> Result<ScaTrace<X>>
where
    S: FnMut(&X, usize) -> Result<X>,
    O: Fn(&X) -> f64,
{
    let f0 = objective(&x0);
    let mut trace = ScaTrace {
        iterates: vec![x0],
        objectives: vec![f0],
        converged: false,
    };
    for it in 0..opts.max_iter {
        let prev = trace.last_objective();
        let next = step(trace.last(), it)?;
        let f = objective(&next);
        let slack = opts.validity_slack * prev.abs().max(1.0);
        if !f.is_finite() || f < prev - slack {
            return Err(Error::SurrogateViolation {
                previous: prev,
                current: f,
            });
        }
        if f < prev {
            // Within numerical slack of the previous point: nothing left to gain.
            trace.converged = true;
            return Ok(trace);
        }
        trace.iterates.push(next);
        trace.objectives.push(f);
        if f - prev <= opts.eps * prev.abs().max(f64::MIN_POSITIVE) {
            trace.converged = true;
            return Ok(trace);
        }
    }
    Ok(trace)
}
