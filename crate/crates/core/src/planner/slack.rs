//! Slack variables that upper-bound the rotor power terms, and the
//! first-order expansions that make their defining inequalities convex.

use crate::propulsion::AeroParams;
use crate::Vec3;

/// Per-slot slacks `M1, S1, M2, S2`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Slacks {
    pub m1: f64,
    pub s1: f64,
    pub m2: f64,
    pub s2: f64,
}

impl Slacks {
    /// Tight values for a given `M1` and squared speed `||v||^2`.
    pub fn tight(m1: f64, speed_sq: f64, p: &AeroParams) -> Slacks {
        let r = 2.0 * m1 / p.c_t;
        let s1 = (r + 3.0 * speed_sq) * r.sqrt();
        let y = 0.5 * speed_sq;
        // sqrt(M1^2 + y^2) - y, evaluated without cancellation.
        let m2 = if y == 0.0 { m1 } else { m1 * m1 / ((m1 * m1 + y * y).sqrt() + y) };
        Slacks {
            m1,
            s1,
            m2,
            s2: m1 * m2.sqrt(),
        }
    }

    /// Largest relative residual of the three defining relations.
    pub fn tightness_gap(&self, speed_sq: f64, p: &AeroParams) -> f64 {
        let t = Slacks::tight(self.m1, speed_sq, p);
        let rel = |a: f64, b: f64| (a - b).abs() / b.abs().max(1e-12);
        rel(self.s1, t.s1).max(rel(self.m2, t.m2)).max(rel(self.s2, t.s2))
    }
}

/// `M1 = (||m a - m g|| + 1/2 rho S_FP E||v - v_w||^2) / (2 rho A)`.
pub fn m1_value(a: &Vec3, mean_rel_sq: f64, p: &AeroParams) -> f64 {
    let lift = (p.m * a + Vec3::new(0.0, 0.0, p.weight())).norm();
    (lift + 0.5 * p.rho * p.s_fp * mean_rel_sq) / (2.0 * p.rho * p.a_disc)
}

/// Sample-averaged upper bound on the slot power with the climb term
/// bounded by `m g ||v||`.
pub fn p_ub(v: &Vec3, s: &Slacks, mean_rel_cube: f64, p: &AeroParams) -> f64 {
    let (blade, induced) = slack_power_coefs(p);
    blade * s.s1 + induced * s.s2 + p.weight() * v.norm() + 0.5 * p.rho * p.s_fp * mean_rel_cube
}

/// Coefficients of `S1` and `S2` in the power bound.
pub fn slack_power_coefs(p: &AeroParams) -> (f64, f64) {
    (
        p.delta * p.rho * p.s_solidity * p.a_disc / 8.0,
        2.0 * (1.0 + p.c_f) * p.rho * p.a_disc,
    )
}

/// Linear minorant of the jointly convex `x^2 / y` at `(xt, yt)`, returned
/// as coefficients `(cx, cy)` of `cx x + cy y`.
pub fn quad_over_lin_tangent(xt: f64, yt: f64) -> (f64, f64) {
    let r = xt / yt;
    (2.0 * r, -r * r)
}

/// Right-hand side of the convexified `S1`/`M1` relation:
/// `(c_T / 2) * tangent(S1^2 / M1)`.
pub fn s1m1_rhs(t: &Slacks, s1: f64, m1: f64, p: &AeroParams) -> f64 {
    let (cs, cm) = quad_over_lin_tangent(t.s1, t.m1);
    0.5 * p.c_t * (cs * s1 + cm * m1)
}

/// Exact counterpart `(c_T / 2) S1^2 / M1`.
pub fn s1m1_exact(s1: f64, m1: f64, p: &AeroParams) -> f64 {
    0.5 * p.c_t * s1 * s1 / m1
}

/// Linear minorant of `||v||^2` at `vt`.
pub fn speed_sq_tangent(vt: &Vec3, v: &Vec3) -> f64 {
    2.0 * vt.dot(v) - vt.norm_squared()
}

/// Tangent of `S2^2 / M2` at the expansion point.
pub fn s2m2_rhs(t: &Slacks, s2: f64, m2: f64) -> f64 {
    let (cs, cm) = quad_over_lin_tangent(t.s2, t.m2);
    cs * s2 + cm * m2
}
