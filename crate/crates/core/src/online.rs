//! Online phase: per-slot velocity re-optimization against the measured
//! wind, tethered to the offline plan.

use std::io::Write;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::airlink::{realized_rate, CityModel};
use crate::convex::{solve, Affine, ConvexProgram, SolveStatus, SolverSettings};
use crate::error::{Error, Result};
use crate::planner::slack::{m1_value, p_ub, slack_power_coefs, Slacks};
use crate::planner::{Scenario, Schedule, Trajectory};
use crate::propulsion::{power, AeroParams, KinState};
use crate::wind::{WindSample, WindStats};
use crate::Vec3;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OnlineConfig {
    /// Position tube radius around the offline trajectory (m).
    pub eps_q: f64,
    /// Velocity tether radius around the offline velocity (m/s).
    pub eps_v: f64,
    /// Relative improvement that ends the per-slot SCA loop.
    pub eps3: f64,
    pub sca_cap: usize,
    /// Also enforce the speed caps and the altitude band online.
    pub safety_limits: bool,
}

impl Default for OnlineConfig {
    fn default() -> Self {
        OnlineConfig {
            eps_q: 100.0,
            eps_v: 20.0,
            eps3: 1e-3,
            sca_cap: 1,
            safety_limits: true,
        }
    }
}

impl OnlineConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.eps_q >= 0.0 && self.eps_v >= 0.0) || !self.eps_q.is_finite() || !self.eps_v.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "tolerances must be finite and nonnegative, got eps_Q={} eps_v={}",
                self.eps_q, self.eps_v
            )));
        }
        if self.sca_cap == 0 {
            return Err(Error::InvalidParameter("sca_cap must be at least 1".into()));
        }
        Ok(())
    }
}

/// Geometry of one online slot. Positions are split into the offline
/// reference plus a deviation so that zero corrections reproduce the
/// offline plan exactly.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SlotInput {
    /// Current deviation `Q[n] - Q_off[n]`.
    pub dev: Vec3,
    pub q_off_now: Vec3,
    pub q_off_next: Vec3,
    pub v_off: Vec3,
    /// Previously flown velocity.
    pub v_prev: Vec3,
    /// Measured wind at the current altitude.
    pub wind: Vec3,
    pub q_f: Vec3,
    /// Largest admissible deviation at the next slot.
    pub tube_next: f64,
}

impl SlotInput {
    pub fn q_now(&self) -> Vec3 {
        self.q_off_now + self.dev
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SlotLimits {
    pub v_h_max: f64,
    pub v_v_max: f64,
    pub h_min: f64,
    pub h_max: f64,
    pub delta: f64,
}

impl SlotLimits {
    pub fn from_scenario(s: &Scenario) -> Self {
        SlotLimits {
            v_h_max: s.v_h_max,
            v_v_max: s.v_v_max,
            h_min: s.h_min,
            h_max: s.h_max,
            delta: s.delta,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SlotDecision {
    pub v: Vec3,
    pub fallback: bool,
    pub sca_passes: usize,
}

/// Power bound at tight slacks for a single wind vector, the quantity the
/// per-slot program minimizes.
pub fn slot_objective(v: &Vec3, v_prev: &Vec3, wind: &Vec3, delta: f64, aero: &AeroParams) -> f64 {
    let a = (v - v_prev) / delta;
    let rel = (v - wind).norm();
    let sl = Slacks::tight(m1_value(&a, rel * rel, aero), v.norm_squared(), aero);
    p_ub(v, &sl, rel * rel * rel, aero)
}

/// Deviation at the next slot for a correction `u = v - v_off`.
fn next_dev(inp: &SlotInput, u: &Vec3, delta: f64) -> Vec3 {
    inp.dev + u * delta
}

fn check_slot(inp: &SlotInput, v: &Vec3, cfg: &OnlineConfig, lim: &SlotLimits, aero_tol: f64) -> bool {
    let u = v - inp.v_off;
    let d = next_dev(inp, &u, lim.delta);
    let q_next = inp.q_off_next + d;
    let mut ok = u.norm() <= cfg.eps_v + aero_tol
        && d.norm() <= inp.tube_next + aero_tol
        && (q_next - inp.q_f).norm() <= (inp.q_off_next - inp.q_f).norm() + aero_tol;
    if cfg.safety_limits {
        ok &= v.xy().norm() <= lim.v_h_max + aero_tol
            && v.z.abs() <= lim.v_v_max + aero_tol
            && q_next.z >= lim.h_min - aero_tol
            && q_next.z <= lim.h_max + aero_tol;
    }
    ok
}

/// One convexified per-slot program around the expansion velocity `vt`.
fn slot_program(inp: &SlotInput, vt: &Vec3, cfg: &OnlineConfig, lim: &SlotLimits, aero: &AeroParams) -> Result<Vec3> {
    let dt = lim.delta;
    let mut p = ConvexProgram::new();
    let uv = p.add_vars("u", 3);
    let v: Vec<Affine> = (0..3).map(|i| Affine::var(uv[i]).plus_const(inp.v_off[i])).collect();
    let u: Vec<Affine> = uv.iter().map(|&x| Affine::var(x)).collect();

    p.norm_le(u.clone(), Affine::constant(cfg.eps_v));
    let dev: Vec<Affine> = (0..3).map(|i| (&u[i] * dt).plus_const(inp.dev[i])).collect();
    p.norm_le(dev.clone(), Affine::constant(inp.tube_next));
    let to_goal: Vec<Affine> = (0..3)
        .map(|i| dev[i].clone().plus_const(inp.q_off_next[i] - inp.q_f[i]))
        .collect();
    p.norm_le(to_goal, Affine::constant((inp.q_off_next - inp.q_f).norm()));
    if cfg.safety_limits {
        p.norm_le(v[..2].to_vec(), Affine::constant(lim.v_h_max));
        p.le(v[2].clone(), Affine::constant(lim.v_v_max));
        p.le(&v[2] * -1.0, Affine::constant(lim.v_v_max));
        let z_next = dev[2].clone().plus_const(inp.q_off_next.z);
        p.le(Affine::constant(lim.h_min), z_next.clone());
        p.le(z_next, Affine::constant(lim.h_max));
    }

    // Expansion slacks at vt.
    let a_t = (vt - inp.v_prev) / dt;
    let rel_t = (vt - inp.wind).norm();
    let tight = Slacks::tight(m1_value(&a_t, rel_t * rel_t, aero), vt.norm_squared(), aero);
    let sv = vt.norm().max(1.0);
    let sr = rel_t.max(1.0);

    let nu_h = p.add_bounded_var("nu", Some(0.0), None);
    let t_h = p.add_bounded_var("t", Some(0.0), None);
    let w_h = p.add_bounded_var("w", Some(0.0), None);
    let r_h = p.add_bounded_var("r", Some(0.0), None);
    let s_h = p.add_bounded_var("s", Some(0.0), None);
    let vs: Vec<Affine> = v.iter().map(|e| e * (1.0 / sv)).collect();
    p.sq_norm_le(vs.clone(), nu_h);
    p.norm_le(vs, t_h);
    let rel: Vec<Affine> = (0..3).map(|i| (&v[i] * (1.0 / sr)).plus_const(-inp.wind[i] / sr)).collect();
    p.sq_norm_le(rel.clone(), w_h);
    p.cube_of_norm_le(rel, r_h);
    let mg = aero.weight();
    let lift: Vec<Affine> = (0..3)
        .map(|i| {
            let e = (&v[i] * (aero.m / (dt * mg))).plus_const(-aero.m * inp.v_prev[i] / (dt * mg));
            if i == 2 {
                e.plus_const(1.0)
            } else {
                e
            }
        })
        .collect();
    p.norm_le(lift, s_h);

    let m1 = p.add_bounded_var("m1", Some(0.0), None);
    let s1 = p.add_bounded_var("s1", Some(0.0), None);
    let m2 = p.add_bounded_var("m2", Some(0.0), None);
    let s2 = p.add_bounded_var("s2", Some(0.0), None);
    let (m1e, s1e, m2e, s2e) = (
        Affine::term(tight.m1, m1),
        Affine::term(tight.s1, s1),
        Affine::term(tight.m2, m2),
        Affine::term(tight.s2, s2),
    );
    let nu = Affine::term(sv * sv, nu_h);

    let k1 = 1.0 / (2.0 * aero.rho * aero.a_disc * tight.m1);
    let rhs = Affine::term(mg * k1, s_h).plus(0.5 * aero.rho * aero.s_fp * sr * sr * k1, w_h);
    p.le(rhs, Affine::var(m1));

    let r1 = tight.s1 / tight.m1;
    let psi_t = 2.0 * tight.m1 / aero.c_t + 3.0 * vt.norm_squared();
    let psi = (&m1e * (2.0 / aero.c_t) + &nu * 3.0) * (1.0 / psi_t);
    let b1 = (&s1e * (aero.c_t * r1) - &m1e * (0.5 * aero.c_t * r1 * r1)) * (1.0 / (psi_t * psi_t));
    p.sq_norm_le(vec![psi], b1);

    let mut b2 = m2e.clone().plus_const(-vt.norm_squared());
    for i in 0..3 {
        b2.add_expr(2.0 * vt[i], &v[i]);
    }
    let q2 = tight.m1 * tight.m1 / tight.m2;
    p.quad_over_lin_le(vec![Affine::var(m1)], Affine::var(m2), b2 * (1.0 / q2));

    let r2 = tight.s2 / tight.m2;
    let b3 = (&s2e * (2.0 * r2) - &m2e * (r2 * r2)) * (1.0 / (tight.m1 * tight.m1));
    p.sq_norm_le(vec![Affine::var(m1)], b3);

    let (cb, ci) = slack_power_coefs(aero);
    let obj = &s1e * cb + &s2e * ci + Affine::term(mg * sv, t_h) + Affine::term(0.5 * aero.rho * aero.s_fp * sr.powi(3), r_h);
    let scale = 1.0 / slot_objective(vt, &inp.v_prev, &inp.wind, dt, aero).max(1.0);
    p.minimize(obj * scale);

    let sol = solve(&p, &SolverSettings::default())?;
    let sol = if sol.status == SolveStatus::Inaccurate && sol.residual <= 1e-6 {
        sol
    } else {
        sol.into_optimal()?
    };
    Ok(Vec3::new(sol.value(uv[0]), sol.value(uv[1]), sol.value(uv[2])) + inp.v_off)
}

/// Clipped offline velocity used when the slot program fails: steer back
/// toward the offline position within the tether.
pub fn fallback_velocity(inp: &SlotInput, cfg: &OnlineConfig, delta: f64) -> Vec3 {
    let want = -inp.dev / delta;
    let n = want.norm();
    let u = if n > cfg.eps_v && n > 0.0 { want * (cfg.eps_v / n) } else { want };
    inp.v_off + u
}

/// Chooses the velocity of one slot.
pub fn adapt_slot(inp: &SlotInput, cfg: &OnlineConfig, lim: &SlotLimits, aero: &AeroParams) -> SlotDecision {
    // A zero tube pins the vehicle to the offline plan.
    if cfg.eps_v == 0.0 || (inp.tube_next == 0.0 && inp.dev == Vec3::zeros()) {
        return SlotDecision {
            v: inp.v_off,
            fallback: false,
            sca_passes: 0,
        };
    }
    let tol = 1e-7;
    let mut best = inp.v_off;
    let mut best_obj = if check_slot(inp, &inp.v_off, cfg, lim, 0.0) {
        slot_objective(&inp.v_off, &inp.v_prev, &inp.wind, lim.delta, aero)
    } else {
        f64::INFINITY
    };
    let mut vt = inp.v_off;
    let mut passes = 0;
    for _ in 0..cfg.sca_cap {
        let Ok(v) = slot_program(inp, &vt, cfg, lim, aero) else {
            break;
        };
        passes += 1;
        if !check_slot(inp, &v, cfg, lim, tol) {
            break;
        }
        let f = slot_objective(&v, &inp.v_prev, &inp.wind, lim.delta, aero);
        let gain = best_obj - f;
        if f < best_obj {
            best = v;
            best_obj = f;
        }
        vt = v;
        if !(gain > cfg.eps3 * f) {
            break;
        }
    }
    if best_obj.is_finite() {
        SlotDecision {
            v: best,
            fallback: false,
            sca_passes: passes,
        }
    } else {
        SlotDecision {
            v: fallback_velocity(inp, cfg, lim.delta),
            fallback: true,
            sca_passes: passes,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LogRow {
    pub q: Vec3,
    /// Velocity flown out of this slot (zero in the last slot).
    pub v: Vec3,
    pub wind: WindSample,
    /// Wind resolved at the slot altitude.
    pub wind_vec: Vec3,
    /// Exact propulsion power (W); zero in the last slot.
    pub power: f64,
    /// Scheduled user, zero-based.
    pub user: Option<usize>,
    /// Realized spectral efficiency (bits/s/Hz).
    pub rate: f64,
    pub los: bool,
    pub fallback: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FlightLog {
    pub rows: Vec<LogRow>,
    pub delta: f64,
    /// Mean wall time of the per-slot decision (s).
    pub mean_slot_seconds: f64,
}

impl FlightLog {
    pub fn energy(&self) -> f64 {
        self.rows.iter().map(|r| r.power).sum::<f64>() * self.delta
    }

    pub fn user_rates(&self, k: usize) -> Vec<f64> {
        let mut out = vec![0.0; k];
        for r in &self.rows {
            if let Some(u) = r.user {
                out[u] += r.rate;
            }
        }
        out
    }

    /// `min_k sum_n a_k[n] R_k[n]`.
    pub fn min_user_rate(&self, k: usize) -> f64 {
        self.user_rates(k).into_iter().fold(f64::INFINITY, f64::min)
    }

    pub fn fallbacks(&self) -> usize {
        self.rows.iter().filter(|r| r.fallback).count()
    }

    pub fn mean_altitude(&self) -> f64 {
        self.rows.iter().map(|r| r.q.z).sum::<f64>() / self.rows.len() as f64
    }

    pub fn trajectory(&self) -> Trajectory {
        Trajectory {
            pos: self.rows.iter().map(|r| r.q).collect(),
            delta: self.delta,
        }
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "{FLIGHT_LOG_HEADER}")?;
        writeln!(w, "n,x,y,z,vx,vy,vz,wind_vref,wind_beta,P_exact,R_realized,los_flag,fallback_flag")?;
        for (i, r) in self.rows.iter().enumerate() {
            writeln!(
                w,
                "{},{},{},{},{},{},{},{},{},{},{},{},{}",
                i + 1,
                r.q.x,
                r.q.y,
                r.q.z,
                r.v.x,
                r.v.y,
                r.v.z,
                r.wind.v_ref,
                r.wind.beta,
                r.power,
                r.rate,
                u8::from(r.los),
                u8::from(r.fallback)
            )?;
        }
        Ok(())
    }
}

pub const FLIGHT_LOG_HEADER: &str = "# uav-wind flight_log v1";

/// Largest admissible deviation at slot `m` (zero-based) so the tether can
/// still bring the vehicle back onto the offline endpoint.
fn tube_radius(m: usize, n: usize, cfg: &OnlineConfig, delta: f64) -> f64 {
    let remaining = (n - 1 - m) as f64;
    cfg.eps_q.min(cfg.eps_v * delta * remaining)
}

/// Flies the offline plan with per-slot adaptation to the realized wind
/// `wind[n]`, communicating under the offline schedule.
#[allow(clippy::too_many_arguments)]
pub fn fly_online(
    s: &Scenario,
    traj: &Trajectory,
    sched: &Schedule,
    wind: &[WindSample],
    stats: &WindStats,
    city: &CityModel,
    cfg: &OnlineConfig,
) -> Result<FlightLog> {
    cfg.validate()?;
    let n = traj.n();
    if wind.len() < n {
        return Err(Error::InvalidParameter(format!("wind realization has {} slots, need {n}", wind.len())));
    }
    if sched.n() != n || sched.k() != s.k() {
        return Err(Error::InvalidParameter("schedule does not match trajectory and users".into()));
    }
    let v_off = traj.velocities();
    let lim = SlotLimits::from_scenario(s);
    let mut rows = Vec::with_capacity(n);
    let mut dev = Vec3::zeros();
    let mut v_prev = v_off[0];
    let mut spent = 0.0;

    for m in 0..n {
        let q = traj.pos[m] + dev;
        let ws = wind[m];
        let wv = ws.at(q.z, stats);
        let user = sched.assigned(m);
        let (rate, los) = match user {
            Some(k) => realized_rate(&q.xy(), q.z, &s.users[k].position, city, &s.channel)?,
            None => (0.0, false),
        };
        let mut row = LogRow {
            q,
            v: Vec3::zeros(),
            wind: ws,
            wind_vec: wv,
            power: 0.0,
            user,
            rate,
            los,
            fallback: false,
        };
        if m + 1 < n {
            let inp = SlotInput {
                dev,
                q_off_now: traj.pos[m],
                q_off_next: traj.pos[m + 1],
                v_off: v_off[m],
                v_prev,
                wind: wv,
                q_f: s.q_f,
                tube_next: tube_radius(m + 1, n, cfg, s.delta),
            };
            let t0 = Instant::now();
            let d = if m + 2 == n {
                // The last move must land on Q_F.
                SlotDecision {
                    v: v_off[m] - dev / s.delta,
                    fallback: false,
                    sca_passes: 0,
                }
            } else {
                adapt_slot(&inp, cfg, &lim, &s.aero)
            };
            spent += t0.elapsed().as_secs_f64();
            let u = d.v - v_off[m];
            dev = if m + 2 == n { Vec3::zeros() } else { dev + u * s.delta };
            let st = KinState::new(d.v, (d.v - v_prev) / s.delta);
            row.v = d.v;
            row.power = power(&st, &wv, &s.aero).total;
            row.fallback = d.fallback;
            v_prev = d.v;
        }
        rows.push(row);
    }
    Ok(FlightLog {
        rows,
        delta: s.delta,
        mean_slot_seconds: spent / (n - 1) as f64,
    })
}

/// Flies the offline plan open loop (no adaptation).
pub fn fly_offline(
    s: &Scenario,
    traj: &Trajectory,
    sched: &Schedule,
    wind: &[WindSample],
    stats: &WindStats,
    city: &CityModel,
) -> Result<FlightLog> {
    let cfg = OnlineConfig {
        eps_q: 0.0,
        eps_v: 0.0,
        ..OnlineConfig::default()
    };
    fly_online(s, traj, sched, wind, stats, city, &cfg)
}

/// Unsigned angle (deg) between the horizontal velocity and the wind in each
/// slot; slots without horizontal motion or wind are skipped.
pub fn angular_deviation(log: &FlightLog) -> Vec<f64> {
    log.rows
        .iter()
        .filter_map(|r| {
            let v = r.v.xy();
            let w = r.wind_vec.xy();
            if v.norm() == 0.0 || w.norm() == 0.0 {
                return None;
            }
            let c = (v.dot(&w) / (v.norm() * w.norm())).clamp(-1.0, 1.0);
            Some(c.acos().to_degrees())
        })
        .collect()
}

pub fn median(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return f64::NAN;
    }
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    if v.len() % 2 == 1 {
        v[m]
    } else {
        0.5 * (v[m - 1] + v[m])
    }
}
