//! Rate floor `P_L R_L` and its concave minorants used by the trajectory
//! subproblems.

use std::f64::consts::{FRAC_PI_2, LOG2_E};

use crate::airlink::ChannelParams;

/// `(A3 + A4 / (1 + e^{-u})) log2(1 + gamma0 phi^{-alpha_L / 2})` with
/// `u = A1 + A2 theta`, `phi` the squared UAV-user distance.
pub fn rate_floor_at(theta_deg: f64, phi: f64, ch: &ChannelParams) -> f64 {
    let u = ch.a1 + ch.a2 * theta_deg;
    let xi = 1.0 + (-u).exp();
    (ch.a3 + ch.a4 / xi) * (ch.gamma0() * phi.powf(-0.5 * ch.alpha_l)).ln_1p() * LOG2_E
}

/// First-order expansion of the rate floor in `(e^{-u}, phi)`, which is a
/// global minorant because the floor is jointly convex in
/// `(1 + e^{-u}, phi)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RateExpansion {
    pub value: f64,
    /// Coefficient of `e^{-u} - e^{-u_t}` (nonnegative, enters negated).
    pub c_exp: f64,
    /// Coefficient of `phi - phi_t` (nonnegative, enters negated).
    pub c_phi: f64,
    pub exp_t: f64,
    pub phi_t: f64,
}

impl RateExpansion {
    pub fn at(theta_t_deg: f64, phi_t: f64, ch: &ChannelParams) -> Self {
        let u_t = ch.a1 + ch.a2 * theta_t_deg;
        let exp_t = (-u_t).exp();
        let xi = 1.0 + exp_t;
        let g0 = ch.gamma0();
        let half = 0.5 * ch.alpha_l;
        let pw = phi_t.powf(half);
        let ln_term = (g0 / pw).ln_1p();
        let c_exp = ch.a4 * LOG2_E / (xi * xi) * ln_term;
        let c_phi = (ch.a3 + ch.a4 / xi) * LOG2_E * half * g0 / (phi_t * (pw + g0));
        RateExpansion {
            value: (ch.a3 + ch.a4 / xi) * ln_term * LOG2_E,
            c_exp,
            c_phi,
            exp_t,
            phi_t,
        }
    }

    /// Minorant at `u` (through `e^{-u}`) and `phi`.
    pub fn lower_bound(&self, exp_neg_u: f64, phi: f64) -> f64 {
        self.value - self.c_exp * (exp_neg_u - self.exp_t) - self.c_phi * (phi - self.phi_t)
    }
}

/// Elevation in radians, `atan(z / x)`, with the overhead limit.
pub fn elevation_rad(z: f64, x: f64) -> f64 {
    if x <= 0.0 {
        FRAC_PI_2
    } else {
        (z / x).atan()
    }
}

/// Tangent minorant of `atan(z / x)` in the horizontal distance `x` around
/// `x_t`, valid for all `x >= 0` because `atan(z / x)` is convex there.
/// Returns `(value_t, slope)` so that the bound is `value_t + slope (x - x_t)`.
pub fn elevation_tangent_in_x(z: f64, x_t: f64) -> (f64, f64) {
    (elevation_rad(z, x_t), -z / (z * z + x_t * x_t))
}

/// Chord minorant of the concave `z -> atan(z / x)` on the breakpoints,
/// as affine pieces `(slope, intercept)` in radians. Their pointwise
/// minimum interpolates the function at every breakpoint.
pub fn elevation_chords_in_z(x: f64, breakpoints: &[f64]) -> Vec<(f64, f64)> {
    breakpoints
        .windows(2)
        .map(|w| {
            let (z0, z1) = (w[0], w[1]);
            let (f0, f1) = (elevation_rad(z0, x), elevation_rad(z1, x));
            let slope = (f1 - f0) / (z1 - z0);
            (slope, f0 - slope * z0)
        })
        .collect()
}

/// Breakpoints for the chord bound around `z_t`, clipped to the band.
pub fn chord_breakpoints(z_t: f64, h_min: f64, h_max: f64) -> Vec<f64> {
    let mut pts = vec![h_min, h_max, z_t];
    for d in [5.0, 20.0, 60.0] {
        pts.push(z_t - d);
        pts.push(z_t + d);
    }
    let mut pts: Vec<f64> = pts.into_iter().map(|z| z.clamp(h_min, h_max)).collect();
    pts.sort_by(f64::total_cmp);
    pts.dedup_by(|a, b| (*a - *b).abs() < 1e-9);
    pts
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn expansion_is_exact_at_center() {
        let ch = ChannelParams::default();
        let (theta, phi) = (35.0, 120.0f64.powi(2) + 100.0f64.powi(2));
        let e = RateExpansion::at(theta, phi, &ch);
        assert_relative_eq!(e.value, rate_floor_at(theta, phi, &ch), max_relative = 1e-14);
        assert_relative_eq!(e.lower_bound(e.exp_t, phi), e.value, max_relative = 1e-14);
    }

    #[test]
    fn phi_slope_matches_finite_difference() {
        let ch = ChannelParams::default();
        let (theta, phi) = (50.0, 3.0e4);
        let e = RateExpansion::at(theta, phi, &ch);
        let h = 1e-2;
        let fd = (rate_floor_at(theta, phi + h, &ch) - rate_floor_at(theta, phi - h, &ch)) / (2.0 * h);
        assert_relative_eq!(-e.c_phi, fd, max_relative = 1e-6);
    }

    #[test]
    fn chords_interpolate_breakpoints() {
        let pts = chord_breakpoints(100.0, 50.0, 300.0);
        assert_eq!(pts, vec![50.0, 80.0, 95.0, 100.0, 105.0, 120.0, 160.0, 300.0]);
        let x = 70.0;
        let chords = elevation_chords_in_z(x, &pts);
        for &z in &pts {
            let lb = chords.iter().map(|(s, c)| s * z + c).fold(f64::INFINITY, f64::min);
            assert_relative_eq!(lb, elevation_rad(z, x), max_relative = 1e-12);
        }
        assert_eq!(chord_breakpoints(100.0, 100.0, 100.0), vec![100.0]);
    }

    #[test]
    fn tangent_in_x_is_a_minorant() {
        let (z, xt) = (100.0, 80.0);
        let (f0, s) = elevation_tangent_in_x(z, xt);
        for i in 0..200 {
            let x = i as f64 * 2.5;
            assert!(f0 + s * (x - xt) <= elevation_rad(z, x) + 1e-15);
        }
    }
}
