//! Wind-aware 3D propulsion power of a rotary-wing UAV and its reductions to
//! earlier windless models.

use std::io::{BufRead, Write};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::Vec3;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AeroParams {
    /// Mass (kg).
    pub m: f64,
    /// Gravitational acceleration (m/s^2).
    pub g_mag: f64,
    /// Air density (kg/m^3).
    pub rho: f64,
    /// Rotor disc area (m^2).
    pub a_disc: f64,
    pub s_solidity: f64,
    /// Profile drag coefficient.
    pub delta: f64,
    pub c_t: f64,
    /// Induced power correction.
    pub c_f: f64,
    /// Fuselage equivalent flat-plate area (m^2).
    pub s_fp: f64,
}

impl Default for AeroParams {
    fn default() -> Self {
        AeroParams {
            m: 2.0,
            g_mag: 9.8,
            rho: 1.225,
            a_disc: 0.79,
            s_solidity: 0.1,
            delta: 0.012,
            c_t: 0.3,
            c_f: 0.13,
            s_fp: 0.01,
        }
    }
}

impl AeroParams {
    pub fn validate(&self) -> Result<()> {
        let fields = [
            ("m", self.m),
            ("g", self.g_mag),
            ("rho", self.rho),
            ("A", self.a_disc),
            ("s", self.s_solidity),
            ("delta", self.delta),
            ("c_T", self.c_t),
            ("c_f", self.c_f),
            ("S_FP", self.s_fp),
        ];
        for (name, v) in fields {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::InvalidParameter(format!("{name} must be positive, got {v}")));
            }
        }
        Ok(())
    }

    /// Weight `m g` (N).
    pub fn weight(&self) -> f64 {
        self.m * self.g_mag
    }

    /// Fuselage drag ratio `S_FP / (s A)`.
    pub fn d0(&self) -> f64 {
        self.s_fp / (self.s_solidity * self.a_disc)
    }

    /// Hover tip speed `sqrt(m g / (c_T rho A))`.
    pub fn v_tip(&self) -> f64 {
        (self.weight() / (self.c_t * self.rho * self.a_disc)).sqrt()
    }

    /// Mean induced velocity in hover, `sqrt(m g / (2 rho A))`.
    pub fn v_o(&self) -> f64 {
        (self.weight() / (2.0 * self.rho * self.a_disc)).sqrt()
    }

    /// Windless hover power.
    pub fn hover_power(&self) -> f64 {
        power(&KinState::default(), &Vec3::zeros(), self).total
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct KinState {
    pub v: Vec3,
    pub a: Vec3,
}

impl KinState {
    pub fn new(v: Vec3, a: Vec3) -> Self {
        KinState { v, a }
    }

    pub fn cruise(v: Vec3) -> Self {
        KinState { v, a: Vec3::zeros() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct PowerBreakdown {
    pub p_blade: f64,
    pub p_induced: f64,
    /// Signed: negative while descending.
    pub p_climb: f64,
    pub p_drag: f64,
    pub total: f64,
}

/// `1/2 rho S_FP ||v - v_w||^2`.
pub fn drag_magnitude(v: &Vec3, wind: &Vec3, p: &AeroParams) -> f64 {
    0.5 * p.rho * p.s_fp * (v - wind).norm_squared()
}

/// Thrust `m a + 1/2 rho S_FP ||v - v_w|| (v - v_w) - m g` with `g = (0, 0, -g)`.
pub fn thrust_vector(state: &KinState, wind: &Vec3, p: &AeroParams) -> (Vec3, f64) {
    let rel = state.v - wind;
    let t = p.m * state.a + 0.5 * p.rho * p.s_fp * rel.norm() * rel + Vec3::new(0.0, 0.0, p.weight());
    let n = t.norm();
    (t, n)
}

/// Blade profile power for thrust magnitude `t` and airspeed `speed`.
pub fn blade_power(t: f64, speed: f64, p: &AeroParams) -> f64 {
    p.delta / 8.0
        * (t / (p.c_t * p.rho * p.a_disc) + 3.0 * speed * speed)
        * (p.rho * p.s_solidity * p.s_solidity * p.a_disc * t / p.c_t).sqrt()
}

/// Induced power for thrust magnitude `t` and speed `speed`.
pub fn induced_power(t: f64, speed: f64, p: &AeroParams) -> f64 {
    let x = t / (2.0 * p.rho * p.a_disc);
    let y = 0.5 * speed * speed;
    // sqrt(x^2 + y^2) - y without cancellation.
    let inner = if y == 0.0 { x } else { x * x / ((x * x + y * y).sqrt() + y) };
    (1.0 + p.c_f) * t * inner.sqrt()
}

/// GPECM with the thrust magnitude supplied by the caller.
pub fn power_given_thrust(v: &Vec3, t: f64, wind: &Vec3, p: &AeroParams) -> PowerBreakdown {
    let speed = v.norm();
    let p_blade = blade_power(t, speed, p);
    let p_induced = induced_power(t, speed, p);
    let p_climb = p.weight() * v.z;
    let p_drag = 0.5 * p.rho * p.s_fp * (v - wind).norm().powi(3);
    PowerBreakdown {
        p_blade,
        p_induced,
        p_climb,
        p_drag,
        total: p_blade + p_induced + p_climb + p_drag,
    }
}

/// Propulsion power (W) in wind `wind`.
pub fn power(state: &KinState, wind: &Vec3, p: &AeroParams) -> PowerBreakdown {
    let (_, t) = thrust_vector(state, wind, p);
    power_given_thrust(&state.v, t, wind, p)
}

/// Windless model, written out term by term.
pub fn reduce_windless(state: &KinState, p: &AeroParams) -> f64 {
    let v = state.v;
    let vn = v.norm();
    let t = (p.m * state.a + 0.5 * p.rho * p.s_fp * vn * v + Vec3::new(0.0, 0.0, p.m * p.g_mag)).norm();
    let blade = p.delta / 8.0
        * (t / (p.c_t * p.rho * p.a_disc) + 3.0 * vn * vn)
        * (p.rho * p.s_solidity.powi(2) * p.a_disc * t / p.c_t).sqrt();
    let induced = (1.0 + p.c_f)
        * t
        * ((t * t / (2.0 * p.rho * p.a_disc).powi(2) + vn.powi(4) / 4.0).sqrt() - vn * vn / 2.0).sqrt();
    blade + induced + p.m * p.g_mag * v.z + 0.5 * p.rho * p.s_fp * vn.powi(3)
}

/// Level flight with thrust equal to weight, in tip-speed form.
pub fn reduce_zeng(v_horiz: f64, p: &AeroParams) -> f64 {
    reduce_kappa_form(1.0, v_horiz, p)
}

/// Thrust-to-weight ratio of planar windless flight.
pub fn thrust_to_weight(state: &KinState, p: &AeroParams) -> f64 {
    let (m, rho, sfp) = (p.m, p.rho, p.s_fp);
    let vn = state.v.norm();
    let mg = p.m * p.g_mag;
    (1.0 + (4.0 * m * m * state.a.norm_squared()
        + rho * rho * sfp * sfp * vn.powi(4)
        + 4.0 * m * rho * sfp * state.a.dot(&state.v) * vn)
        / (4.0 * mg * mg))
        .sqrt()
}

/// Planar windless flight with the thrust-to-weight substitution.
pub fn reduce_kappa(state: &KinState, p: &AeroParams) -> f64 {
    reduce_kappa_form(thrust_to_weight(state, p), state.v.norm(), p)
}

fn reduce_kappa_form(kappa: f64, v: f64, p: &AeroParams) -> f64 {
    let mg = p.m * p.g_mag;
    let v_tip = p.v_tip();
    let v_o = p.v_o();
    let blade_scale = v_tip * v_tip * (p.rho * p.s_solidity.powi(2) * p.a_disc * mg / p.c_t).sqrt();
    let blade = p.delta / 8.0 * (kappa + 3.0 * v * v / (v_tip * v_tip)) * kappa.sqrt() * blade_scale;
    let induced = (1.0 + p.c_f) * mg.powf(1.5) / (2.0 * p.rho * p.a_disc).sqrt()
        * kappa
        * ((kappa * kappa + v.powi(4) / (4.0 * v_o.powi(4))).sqrt() - v * v / (2.0 * v_o * v_o)).sqrt();
    let drag = 0.5 * p.d0() * p.rho * p.s_solidity * p.a_disc * v.powi(3);
    blade + induced + drag
}

/// Decoupled horizontal/vertical model: level-flight terms in the
/// horizontal speed plus climb power `m g v_z`.
pub fn reduce_3d(vx: f64, vy: f64, vz: f64, p: &AeroParams) -> f64 {
    let vh2 = vx * vx + vy * vy;
    let mg = p.m * p.g_mag;
    let v_tip = p.v_tip();
    let v_o = p.v_o();
    let blade_scale = v_tip * v_tip * (p.rho * p.s_solidity.powi(2) * p.a_disc * mg / p.c_t).sqrt();
    let blade = p.delta / 8.0 * (1.0 + 3.0 * vh2 / (v_tip * v_tip)) * blade_scale;
    let induced = (1.0 + p.c_f) * mg.powf(1.5) / (2.0 * p.rho * p.a_disc).sqrt()
        * ((1.0 + vh2 * vh2 / (4.0 * v_o.powi(4))).sqrt() - vh2 / (2.0 * v_o * v_o)).sqrt();
    blade + induced + mg * vz + 0.5 * p.d0() * p.rho * p.s_solidity * p.a_disc * vh2.powf(1.5)
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ReduceReport {
    pub states: usize,
    pub windless: f64,
    pub zeng: f64,
    pub kappa: f64,
    pub three_d: f64,
}

impl ReduceReport {
    pub fn max(&self) -> f64 {
        self.windless.max(self.zeng).max(self.kappa).max(self.three_d)
    }
}

fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(f64::MIN_POSITIVE)
}

/// Compares each reduction against the GPECM under its assumptions on
/// `n` random states, returning the worst relative error per model.
pub fn reduce_check(n: usize, seed: u64, p: &AeroParams) -> ReduceReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let zero = Vec3::zeros();
    let mg = p.weight();
    let mut r = ReduceReport {
        states: n,
        ..Default::default()
    };
    for _ in 0..n {
        let mut u = |lo: f64, hi: f64| rng.gen_range(lo..hi);
        let v3 = Vec3::new(u(-30.0, 30.0), u(-30.0, 30.0), u(-10.0, 10.0));
        let a3 = Vec3::new(u(-5.0, 5.0), u(-5.0, 5.0), u(-3.0, 3.0));
        let s3 = KinState::new(v3, a3);
        r.windless = r.windless.max(rel_err(reduce_windless(&s3, p), power(&s3, &zero, p).total));

        let speed = u(0.0, 30.0);
        let level = Vec3::new(speed, 0.0, 0.0);
        r.zeng = r.zeng.max(rel_err(reduce_zeng(speed, p), power_given_thrust(&level, mg, &zero, p).total));

        let planar = KinState::new(Vec3::new(v3.x, v3.y, 0.0), Vec3::new(a3.x, a3.y, 0.0));
        r.kappa = r.kappa.max(rel_err(reduce_kappa(&planar, p), power(&planar, &zero, p).total));

        let vz = u(-2.0, 10.0);
        let horiz = Vec3::new(v3.x, v3.y, 0.0);
        let split = power_given_thrust(&horiz, mg, &zero, p).total + mg * vz;
        r.three_d = r.three_d.max(rel_err(reduce_3d(v3.x, v3.y, vz, p), split));
    }
    r
}

/// Reads `vx,vy,vz,ax,ay,az,wx,wy` rows and writes the power breakdown.
/// Blank lines and `#` comments are skipped; a non-numeric first row is
/// treated as a header.
pub fn power_eval_csv<R: BufRead, W: Write>(input: R, mut out: W, p: &AeroParams) -> Result<usize> {
    writeln!(out, "# uav-wind power_eval v1")?;
    writeln!(out, "vx,vy,vz,ax,ay,az,wx,wy,p_blade,p_induced,p_climb,p_drag,p_total")?;
    let mut rows = 0;
    for (i, line) in input.lines().enumerate() {
        let line = line?;
        let t = line.trim();
        if t.is_empty() || t.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = t.split(',').map(str::trim).collect();
        let parsed: std::result::Result<Vec<f64>, _> = fields.iter().map(|f| f.parse::<f64>()).collect();
        let vals = match parsed {
            Ok(v) => v,
            Err(_) if rows == 0 && fields.first().is_some_and(|f| f.starts_with('v')) => continue,
            Err(e) => {
                return Err(Error::Parse {
                    line: i + 1,
                    message: e.to_string(),
                })
            }
        };
        if vals.len() != 8 {
            return Err(Error::Parse {
                line: i + 1,
                message: format!("expected 8 columns, found {}", vals.len()),
            });
        }
        let s = KinState::new(Vec3::new(vals[0], vals[1], vals[2]), Vec3::new(vals[3], vals[4], vals[5]));
        let w = Vec3::new(vals[6], vals[7], 0.0);
        let b = power(&s, &w, p);
        writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{},{},{}",
            vals[0], vals[1], vals[2], vals[3], vals[4], vals[5], vals[6], vals[7],
            b.p_blade, b.p_induced, b.p_climb, b.p_drag, b.total
        )?;
        rows += 1;
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn p() -> AeroParams {
        AeroParams::default()
    }

    #[test]
    fn drag_examples() {
        let z = Vec3::zeros();
        let v = Vec3::new(10.0, 0.0, 0.0);
        assert_eq!(drag_magnitude(&v, &v, &p()), 0.0);
        assert_relative_eq!(drag_magnitude(&v, &z, &p()), 0.6125, max_relative = 1e-14);
        assert_relative_eq!(drag_magnitude(&z, &-v, &p()), 0.6125, max_relative = 1e-14);
    }

    #[test]
    fn thrust_examples() {
        let z = Vec3::zeros();
        let (t, n) = thrust_vector(&KinState::default(), &z, &p());
        assert_eq!(t, Vec3::new(0.0, 0.0, 19.6));
        assert_relative_eq!(n, 19.6, max_relative = 1e-15);

        let w = Vec3::new(3.0, -7.0, 0.0);
        let (_, n) = thrust_vector(&KinState::default(), &w, &p());
        let d = 0.5 * 1.225 * 0.01 * w.norm_squared();
        assert_relative_eq!(n, (19.6f64.powi(2) + d * d).sqrt(), max_relative = 1e-14);

        let (_, n) = thrust_vector(&KinState::cruise(w), &w, &p());
        assert_relative_eq!(n, 19.6, max_relative = 1e-15);
    }

    #[test]
    fn hover_power_is_induced_plus_blade() {
        let b = power(&KinState::default(), &Vec3::zeros(), &p());
        let pi = 1.13 * 19.6f64.powf(1.5) / (2.0f64 * 1.225 * 0.79).sqrt();
        assert_relative_eq!(b.p_induced, pi, max_relative = 1e-13);
        assert_eq!(b.p_climb, 0.0);
        assert_eq!(b.p_drag, 0.0);
        assert_relative_eq!(b.total, b.p_blade + b.p_induced + b.p_climb + b.p_drag, max_relative = 1e-15);
    }

    #[test]
    fn hover_in_stronger_wind_costs_more() {
        let h = |w: f64| power(&KinState::default(), &Vec3::new(w, 0.0, 0.0), &p()).total;
        assert!(h(10.0) > h(5.0));
    }

    #[test]
    fn windless_power_matches_reduction() {
        let s = KinState::new(Vec3::new(3.0, -2.0, 1.0), Vec3::new(0.5, 0.1, -0.2));
        assert_relative_eq!(power(&s, &Vec3::zeros(), &p()).total, reduce_windless(&s, &p()), max_relative = 1e-12);
    }

    #[test]
    fn zeng_examples() {
        assert_relative_eq!(reduce_zeng(0.0, &p()), p().hover_power(), max_relative = 1e-12);
        let ratio = |v: f64| 0.5 * p().rho * p().s_fp * v.powi(3) / reduce_zeng(v, &p());
        assert!(ratio(100.0) > 0.99);
        assert!(ratio(100.0) > ratio(50.0));
    }

    #[test]
    fn kappa_examples() {
        let v = Vec3::new(12.0, 5.0, 0.0);
        let k = thrust_to_weight(&KinState::cruise(v), &p());
        let expect = (1.0 + (1.225f64 * 0.01).powi(2) * v.norm().powi(4) / (4.0 * 19.6f64.powi(2))).sqrt();
        assert_relative_eq!(k, expect, max_relative = 1e-14);
        assert_eq!(thrust_to_weight(&KinState::default(), &p()), 1.0);
    }

    #[test]
    fn three_d_examples() {
        let pp = p();
        assert_relative_eq!(reduce_3d(3.0, 4.0, 0.0, &pp), reduce_zeng(5.0, &pp), max_relative = 1e-12);
        assert_relative_eq!(reduce_3d(0.0, 0.0, 2.0, &pp), pp.hover_power() + 19.6 * 2.0, max_relative = 1e-12);
        let down = reduce_3d(0.0, 0.0, -1.0, &pp);
        assert!(down < pp.hover_power() && down > 0.0);
    }

    #[test]
    fn reductions_agree() {
        let r = reduce_check(300, 7, &p());
        assert!(r.max() < 1e-9, "{r:?}");
    }

    #[test]
    fn power_eval_round_trip() {
        let input = "vx,vy,vz,ax,ay,az,wx,wy\n0,0,0,0,0,0,0,0\n10,0,0,0,0,0,-5,0\n";
        let mut out = Vec::new();
        let n = power_eval_csv(input.as_bytes(), &mut out, &p()).unwrap();
        assert_eq!(n, 2);
        let s = String::from_utf8(out).unwrap();
        assert_eq!(s.lines().count(), 4);
        assert!(power_eval_csv("1,2,3\n".as_bytes(), Vec::new(), &p()).is_err());
    }
}
