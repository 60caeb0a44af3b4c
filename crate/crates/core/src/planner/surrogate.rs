//! Convex surrogates of the fractional design problem around a feasible
//! iterate, for the horizontal and the vertical trajectory blocks.
//!
//! Every surrogate is conservative: its numerator never exceeds the true
//! minimum rate and its denominator never falls below the true power bound,
//! and both are exact at the expansion point.

use crate::convex::{
    dinkelbach, solve, Affine, ConvexProgram, DinkelbachOptions, Fractional, SolveStatus, SolverSettings, Var,
};
use crate::error::{Error, Result};
use crate::propulsion::AeroParams;
use crate::Vec3;

use super::model::{energy_profile, Scenario, Schedule, Trajectory, WindSet};
use super::rates::{
    chord_breakpoints, elevation_chords_in_z, elevation_rad, elevation_tangent_in_x, rate_floor_at,
    RateExpansion,
};
use super::slack::{slack_power_coefs, Slacks};

/// Schedule weights below this do not get rate constraints.
const ACTIVE_WEIGHT: f64 = 1e-9;

/// Margin (m) kept from the geometric limits so solver round-off cannot
/// produce a slightly infeasible trajectory.
const EDGE: f64 = 1e-5;

/// Largest residual of a stalled solve that is still used as a proposal.
const INACCURATE_OK: f64 = 1e-4;

/// A surrogate program with its fractional objective pieces.
#[derive(Debug, Clone)]
pub struct Surrogate {
    pub program: ConvexProgram,
    pub numerator: Affine,
    pub denominator: Affine,
    /// Slot positions as expressions in the program variables.
    pub positions: Vec<[Affine; 3]>,
    /// Slack variables per move.
    pub slacks: Vec<[Affine; 4]>,
    /// Surrogate objective at the expansion point, used as scale.
    pub scale: f64,
}

impl Surrogate {
    pub fn trajectory(&self, x: &[f64], delta: f64) -> Trajectory {
        Trajectory {
            pos: self
                .positions
                .iter()
                .map(|p| Vec3::new(p[0].eval(x), p[1].eval(x), p[2].eval(x)))
                .collect(),
            delta,
        }
    }
}

fn vec_expr(p: &[[Affine; 3]], j: usize, delta: f64) -> [Affine; 3] {
    let d = |i: usize| (&p[j + 1][i] - &p[j][i]) * (1.0 / delta);
    [d(0), d(1), d(2)]
}

fn velocities(pos: &[[Affine; 3]], delta: f64) -> Vec<[Affine; 3]> {
    (0..pos.len() - 1).map(|j| vec_expr(pos, j, delta)).collect()
}

fn accelerations(vel: &[[Affine; 3]], delta: f64) -> Vec<[Affine; 3]> {
    let mut acc: Vec<[Affine; 3]> = (0..vel.len() - 1).map(|j| vec_expr(vel, j, delta)).collect();
    let last = acc.last().cloned().unwrap_or_else(|| {
        [Affine::constant(0.0), Affine::constant(0.0), Affine::constant(0.0)]
    });
    acc.push(last);
    acc
}

/// Nonnegative variable measured in units of `scale`, returned with its
/// expression in natural units.
fn scaled_var(p: &mut ConvexProgram, name: String, scale: f64) -> (Var, Affine) {
    let v = p.add_bounded_var(name, Some(0.0), None);
    (v, Affine::term(scale, v))
}

fn scaled(args: &[Affine], k: f64) -> Vec<Affine> {
    args.iter().map(|a| a * (1.0 / k)).collect()
}

/// Speed expressions `nu >= ||v||^2` and `t >= ||v||`.
fn speed_vars(p: &mut ConvexProgram, j: usize, v: &[Affine; 3], vt: &Vec3) -> (Affine, Affine) {
    let sc = vt.norm().max(1.0);
    let (nu_h, nu) = scaled_var(p, format!("nu_{j}"), sc * sc);
    let (t_h, t) = scaled_var(p, format!("t_{j}"), sc);
    let vs = scaled(v, sc);
    p.sq_norm_le(vs.clone(), nu_h);
    p.norm_le(vs, t_h);
    (nu, t)
}

/// Slack block of one move. `rel_sq` must upper-bound the sample mean of
/// `||v - v_w||^2`. Returns the slack variables and the rotor-plus-climb
/// part of the power bound.
#[allow(clippy::too_many_arguments)]
fn slack_block(
    p: &mut ConvexProgram,
    j: usize,
    aero: &AeroParams,
    acc: &[Affine; 3],
    nu: &Affine,
    t: &Affine,
    rel_sq: Affine,
    vt: &Vec3,
    v: &[Affine; 3],
    tight: &Slacks,
) -> ([Affine; 4], Affine) {
    // Every variable and row is normalized by its value at the expansion
    // point so the conic rows stay well conditioned.
    let lift = [
        &acc[0] * aero.m,
        &acc[1] * aero.m,
        (&acc[2] * aero.m).plus_const(aero.weight()),
    ];
    let lift_scale = aero.weight();
    let (s_h, s) = scaled_var(p, format!("s_{j}"), lift_scale);
    p.norm_le(scaled(&lift, lift_scale), s_h);

    let (_, m1) = scaled_var(p, format!("m1_{j}"), tight.m1);
    let (_, s1) = scaled_var(p, format!("s1_{j}"), tight.s1);
    let (_, m2) = scaled_var(p, format!("m2_{j}"), tight.m2);
    let (_, s2) = scaled_var(p, format!("s2_{j}"), tight.s2);

    // 2 rho A M1 >= ||m a - m g|| + rho S_FP / 2 * E||v - v_w||^2
    let k1 = 1.0 / (2.0 * aero.rho * aero.a_disc * tight.m1);
    let mut rhs = s * k1;
    rhs.add_expr(0.5 * aero.rho * aero.s_fp * k1, &rel_sq);
    p.le(rhs, &m1 * (2.0 * aero.rho * aero.a_disc * k1));

    // (2 M1 / c_T + 3 ||v||^2)^2 <= c_T / 2 * tangent(S1^2 / M1)
    let r1 = tight.s1 / tight.m1;
    let psi_t = 2.0 * tight.m1 / aero.c_t + 3.0 * vt.norm_squared();
    let psi = (&m1 * (2.0 / aero.c_t) + nu * 3.0) * (1.0 / psi_t);
    let bound1 = (&s1 * (aero.c_t * r1) - &m1 * (0.5 * aero.c_t * r1 * r1)) * (1.0 / (psi_t * psi_t));
    p.sq_norm_le(vec![psi], bound1);

    // M1^2 / M2 <= M2 + tangent(||v||^2)
    let mut bound2 = m2.clone().plus_const(-vt.norm_squared());
    for (i, vi) in v.iter().enumerate() {
        bound2.add_expr(2.0 * vt[i], vi);
    }
    let q2 = tight.m1 * tight.m1 / tight.m2;
    p.quad_over_lin_le(vec![&m1 * (1.0 / tight.m1)], &m2 * (1.0 / tight.m2), bound2 * (1.0 / q2));

    // M1^2 <= tangent(S2^2 / M2)
    let r2 = tight.s2 / tight.m2;
    let bound3 = (&s2 * (2.0 * r2) - &m2 * (r2 * r2)) * (1.0 / (tight.m1 * tight.m1));
    p.sq_norm_le(vec![&m1 * (1.0 / tight.m1)], bound3);

    let (cb, ci) = slack_power_coefs(aero);
    let power = &s1 * cb + &s2 * ci + t * aero.weight();
    ([m1, s1, m2, s2], power)
}

/// Position expressions with fixed endpoints.
fn position_exprs(
    p: &mut ConvexProgram,
    traj: &Trajectory,
    horizontal: bool,
    s: &Scenario,
) -> Vec<[Affine; 3]> {
    let n = traj.n();
    traj.pos
        .iter()
        .enumerate()
        .map(|(j, q)| {
            let fixed = [Affine::constant(q.x), Affine::constant(q.y), Affine::constant(q.z)];
            if j == 0 || j == n - 1 {
                return fixed;
            }
            let [x, y, z] = fixed;
            if horizontal {
                let xv = p.add_var(format!("x_{j}"));
                let yv = p.add_var(format!("y_{j}"));
                [Affine::var(xv), Affine::var(yv), z]
            } else {
                let zv = p.add_bounded_var(format!("z_{j}"), Some(s.h_min + EDGE.min(0.5 * (s.h_max - s.h_min))), Some(s.h_max - EDGE.min(0.5 * (s.h_max - s.h_min))));
                [x, y, Affine::var(zv)]
            }
        })
        .collect()
}

fn rate_lower_bound(exp_var: Var, phi: Affine, e: &RateExpansion) -> Affine {
    let mut r = Affine::constant(e.value + e.c_exp * e.exp_t + e.c_phi * e.phi_t);
    r.add_term(-e.c_exp, exp_var);
    r.add_expr(-e.c_phi, &phi);
    r
}

/// Adds `R_min <= sum_n a_k[n] Rlb_k[n]` for every user, with per-slot
/// lower bounds produced by `slot_bound` (or exact constants at fixed slots).
fn add_rate_rows<F>(p: &mut ConvexProgram, s: &Scenario, traj: &Trajectory, sched: &Schedule, mut slot_bound: F) -> Var
where
    F: FnMut(&mut ConvexProgram, usize, usize) -> Affine,
{
    let r_min = p.add_bounded_var("r_min", Some(0.0), None);
    let n = traj.n();
    for (k, u) in s.users.iter().enumerate() {
        let mut tot = Affine::constant(0.0);
        for j in 0..n {
            let a = sched.a[k][j];
            if a <= ACTIVE_WEIGHT {
                continue;
            }
            if j == 0 || j == n - 1 {
                let q = traj.pos[j];
                let x = (q.xy() - u.position).norm();
                let theta = elevation_rad(q.z, x).to_degrees();
                tot = tot.plus_const(a * rate_floor_at(theta, q.z * q.z + x * x, &s.channel));
            } else {
                let lb = slot_bound(p, k, j);
                tot.add_expr(a, &lb);
            }
        }
        p.le(Affine::var(r_min), tot);
    }
    r_min
}

/// Surrogate for the horizontal block with altitudes held fixed.
pub fn build_horizontal(s: &Scenario, winds: &WindSet, traj: &Trajectory, sched: &Schedule) -> Surrogate {
    let aero = &s.aero;
    let ch = &s.channel;
    let mut p = ConvexProgram::new();
    let pos = position_exprs(&mut p, traj, true, s);
    let vel = velocities(&pos, s.delta);
    let acc = accelerations(&vel, s.delta);
    let (tight, _, _) = energy_profile(s, winds, traj);
    let vt = traj.velocities();

    let mut denom = Affine::constant(0.0);
    let mut slacks = Vec::with_capacity(vel.len());
    for j in 0..vel.len() {
        let v = &vel[j];
        let step_h = [&pos[j + 1][0] - &pos[j][0], &pos[j + 1][1] - &pos[j][1]];
        p.norm_le(step_h.to_vec(), Affine::constant(s.v_h_max * s.delta - EDGE));

        let (nu, t) = speed_vars(&mut p, j, v, &vt[j]);
        let c = winds.stats.altitude_factor(traj.pos[j].z);
        let wbar = winds.mean_ref(j);
        let mut rel_sq = nu.clone().plus_const(c * c * winds.mean_ref_sq(j));
        rel_sq.add_expr(-2.0 * c * wbar.x, &v[0]);
        rel_sq.add_expr(-2.0 * c * wbar.y, &v[1]);

        let ns = winds.samples[j].len() as f64;
        let drag = 0.5 * aero.rho * aero.s_fp / ns;
        for (i, w) in winds.samples[j].iter().enumerate() {
            let sc = (vt[j] - Vec3::new(c * w.x, c * w.y, 0.0)).norm().max(1.0);
            let (r_h, r) = scaled_var(&mut p, format!("r_{j}_{i}"), sc * sc * sc);
            let rel = [v[0].clone().plus_const(-c * w.x), v[1].clone().plus_const(-c * w.y), v[2].clone()];
            p.cube_of_norm_le(scaled(&rel, sc), r_h);
            denom.add_expr(drag, &r);
        }

        let (sv, power) = slack_block(&mut p, j, aero, &acc[j], &nu, &t, rel_sq, &vt[j], v, &tight[j]);
        denom.add_expr(1.0, &power);
        slacks.push(sv);
    }

    let r_min = add_rate_rows(&mut p, s, traj, sched, |p, k, j| {
        let g = s.users[k].position;
        let q = traj.pos[j];
        let z = q.z;
        let x_t = (q.xy() - g).norm();
        let rel = [
            pos[j][0].clone().plus_const(-g.x),
            pos[j][1].clone().plus_const(-g.y),
        ];
        let sc = x_t.max(1.0);
        let (d_h, dist) = scaled_var(p, format!("d_{k}_{j}"), sc);
        p.norm_le(scaled(&rel, sc), d_h);
        let (phi_v, phi_h) = scaled_var(p, format!("phi_{k}_{j}"), sc * sc);
        p.sq_norm_le(scaled(&rel, sc), phi_v);
        let (th0, slope) = elevation_tangent_in_x(z, x_t);
        let deg = 180.0 / std::f64::consts::PI;
        // u = A1 + A2 theta_lb with theta_lb affine in the distance.
        let u = Affine::constant(ch.a1 + ch.a2 * deg * (th0 - slope * x_t))+ &dist * (ch.a2 * deg * slope);
        let e = p.add_bounded_var(format!("e_{k}_{j}"), Some(0.0), None);
        p.exp_le(u * -1.0, e);
        let theta_t = th0.to_degrees();
        let exp = RateExpansion::at(theta_t, z * z + x_t * x_t, ch);
        rate_lower_bound(e, phi_h.plus_const(z * z), &exp)
    });

    finish(p, pos, slacks, r_min, denom, traj, s, winds, sched)
}

/// Surrogate for the vertical block with horizontal positions held fixed.
pub fn build_vertical(s: &Scenario, winds: &WindSet, traj: &Trajectory, sched: &Schedule) -> Surrogate {
    let aero = &s.aero;
    let ch = &s.channel;
    let stats = winds.stats;
    let (h, pe) = (stats.h_ref, stats.p_exp);
    let mut p = ConvexProgram::new();
    let pos = position_exprs(&mut p, traj, false, s);
    let vel = velocities(&pos, s.delta);
    let acc = accelerations(&vel, s.delta);
    let (tight, _, _) = energy_profile(s, winds, traj);
    let vt = traj.velocities();

    let mut denom = Affine::constant(0.0);
    let mut slacks = Vec::with_capacity(vel.len());
    for j in 0..vel.len() {
        let v = &vel[j];
        let dz = &pos[j + 1][2] - &pos[j][2];
        p.le(dz.clone(), Affine::constant(s.v_v_max * s.delta - EDGE));
        p.le(dz * -1.0, Affine::constant(s.v_v_max * s.delta - EDGE));

        let (nu, t) = speed_vars(&mut p, j, v, &vt[j]);
        let vh = (v[0].constant_part(), v[1].constant_part());
        let z = &pos[j][2];
        let zt = traj.pos[j].z;
        let calm = winds.is_calm();

        // c_lo <= c(z) <= c_hi, both exact at z_t.
        let (c_lo, c_hi, c_sq) = if calm {
            (Affine::constant(0.0), Affine::constant(0.0), Affine::constant(0.0))
        } else if z.is_constant() {
            let c = stats.altitude_factor(zt);
            (Affine::constant(c), Affine::constant(c), Affine::constant(c * c))
        } else {
            let ct = stats.altitude_factor(zt);
            let dc = pe * ct / zt;
            let c_hi = (z.clone() * dc).plus_const(ct - dc * zt);
            let c_lo = if (pe - 1.0).abs() < 1e-12 {
                z.clone() * (1.0 / h)
            } else {
                let y = p.add_bounded_var(format!("cy_{j}"), Some(0.0), None);
                p.power_ge(z.clone() * (1.0 / h), pe, y);
                Affine::var(y)
            };
            let q = 2.0 * pe;
            let c_sq = if (q - 1.0).abs() < 1e-12 {
                z.clone() * (1.0 / h)
            } else if q < 1.0 {
                let d2 = q * ct * ct / zt;
                (z.clone() * d2).plus_const(ct * ct - d2 * zt)
            } else {
                let y2 = p.add_bounded_var(format!("cq_{j}"), Some(0.0), None);
                p.power_ge(y2, 1.0 / q, z.clone() * (1.0 / h));
                Affine::var(y2)
            };
            (c_lo, c_hi, c_sq)
        };

        let wbar = winds.mean_ref(j);
        let b = vh.0 * wbar.x + vh.1 * wbar.y;
        let mut rel_sq = nu.clone();
        rel_sq.add_expr(winds.mean_ref_sq(j), &c_sq);
        rel_sq.add_expr(-2.0 * b, if b >= 0.0 { &c_lo } else { &c_hi });

        let ns = winds.samples[j].len() as f64;
        let drag = 0.5 * aero.rho * aero.s_fp / ns;
        for (i, w) in winds.samples[j].iter().enumerate() {
            let wn = w.norm();
            let ct = stats.altitude_factor(zt);
            let sc = (vt[j] - Vec3::new(ct * w.x, ct * w.y, 0.0)).norm().max(1.0);
            let (r_h, r) = scaled_var(&mut p, format!("r_{j}_{i}"), sc * sc * sc);
            if wn < 1e-12 || calm {
                let rel = [Affine::constant(vh.0), Affine::constant(vh.1), v[2].clone()];
                p.cube_of_norm_le(scaled(&rel, sc), r_h);
            } else {
                let (ux, uy) = (w.x / wn, w.y / wn);
                let alpha = vh.0 * ux + vh.1 * uy;
                let beta = -vh.0 * uy + vh.1 * ux;
                let e = p.add_bounded_var(format!("ew_{j}_{i}"), Some(0.0), None);
                p.le((c_lo.clone() * -wn).plus_const(alpha), e);
                p.le((c_hi.clone() * wn).plus_const(-alpha), e);
                let rel = [v[2].clone(), Affine::constant(beta), Affine::var(e)];
                p.cube_of_norm_le(scaled(&rel, sc), r_h);
            }
            denom.add_expr(drag, &r);
        }

        let (sv, power) = slack_block(&mut p, j, aero, &acc[j], &nu, &t, rel_sq, &vt[j], v, &tight[j]);
        denom.add_expr(1.0, &power);
        slacks.push(sv);
    }

    let r_min = add_rate_rows(&mut p, s, traj, sched, |p, k, j| {
        let g = s.users[k].position;
        let q = traj.pos[j];
        let x = (q.xy() - g).norm();
        let z = pos[j][2].clone();
        let theta = p.add_var(format!("th_{k}_{j}"));
        let deg = 180.0 / std::f64::consts::PI;
        if x < 1e-9 {
            p.equal(theta, Affine::constant(90.0));
        } else {
            for (slope, icpt) in elevation_chords_in_z(x, &chord_breakpoints(q.z, s.h_min, s.h_max)) {
                p.le(Affine::var(theta), (z.clone() * (deg * slope)).plus_const(deg * icpt));
            }
        }
        let e = p.add_bounded_var(format!("e_{k}_{j}"), Some(0.0), None);
        p.exp_le(Affine::constant(-ch.a1).plus(-ch.a2, theta), e);
        let sc = (q.z * q.z + x * x).sqrt();
        let (phi_v, phi) = scaled_var(p, format!("phi_{k}_{j}"), sc * sc);
        p.sq_norm_le(vec![z * (1.0 / sc)], Affine::var(phi_v).plus_const(-x * x / (sc * sc)));
        let exp = RateExpansion::at(elevation_rad(q.z, x).to_degrees(), q.z * q.z + x * x, ch);
        rate_lower_bound(e, phi, &exp)
    });

    finish(p, pos, slacks, r_min, denom, traj, s, winds, sched)
}

#[allow(clippy::too_many_arguments)]
fn finish(
    program: ConvexProgram,
    positions: Vec<[Affine; 3]>,
    slacks: Vec<[Affine; 4]>,
    r_min: Var,
    denominator: Affine,
    traj: &Trajectory,
    s: &Scenario,
    winds: &WindSet,
    sched: &Schedule,
) -> Surrogate {
    let ev = super::model::evaluate(s, winds, traj, sched);
    Surrogate {
        program,
        numerator: Affine::var(r_min),
        denominator,
        positions,
        slacks,
        scale: ev.r_min.max(1e-3),
    }
}

/// Solver output of one surrogate step.
#[derive(Debug, Clone)]
pub struct StepResult {
    pub trajectory: Trajectory,
    /// Solver slacks per move.
    pub slacks: Vec<Slacks>,
    pub dinkelbach_iters: usize,
    pub converged: bool,
}

/// Maximizes the surrogate ratio by Dinkelbach's method starting at `q_init`.
pub fn solve_surrogate(sur: &Surrogate, q_init: f64, delta: f64, opts: &DinkelbachOptions) -> Result<StepResult> {
    let settings = SolverSettings::default().with_gap_tol(1e-8);
    let inner = |q: f64| -> Result<Fractional<Vec<f64>>> {
        let mut p = sur.program.clone();
        let mut obj = sur.numerator.clone();
        obj.add_expr(-q, &sur.denominator);
        p.maximize(obj * (1.0 / sur.scale));
        let sol = solve(&p, &settings)?;
        // The surrogate only proposes a point; the caller re-evaluates it
        // with the exact model, so a slightly inaccurate solve is usable.
        let sol = if sol.status == SolveStatus::Inaccurate && sol.residual <= INACCURATE_OK {
            sol
        } else {
            sol.into_optimal()?
        };
        Ok(Fractional {
            numerator: sol.eval(&sur.numerator),
            denominator: sol.eval(&sur.denominator),
            x: sol.x,
        })
    };
    let res = dinkelbach(q_init, opts, inner)?;
    if res.x.iter().any(|v| !v.is_finite()) {
        return Err(Error::SolverFailure("non-finite surrogate solution".into()));
    }
    let slacks = sur
        .slacks
        .iter()
        .map(|v| Slacks {
            m1: v[0].eval(&res.x),
            s1: v[1].eval(&res.x),
            m2: v[2].eval(&res.x),
            s2: v[3].eval(&res.x),
        })
        .collect();
    Ok(StepResult {
        trajectory: sur.trajectory(&res.x, delta),
        slacks,
        dinkelbach_iters: res.history.len(),
        converged: res.converged,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::planner::model::{evaluate, init_plan};

    fn small() -> Scenario {
        Scenario {
            t0: 20.0,
            q_f: Vec3::new(200.0, 500.0, 100.0),
            users: vec![crate::airlink::GroundUser::new(1, 100.0, 450.0)],
            ..Scenario::default()
        }
    }

    #[test]
    fn horizontal_step_does_not_lower_objective() {
        let s = small();
        let (traj, sched) = init_plan(&s).unwrap();
        let winds = WindSet::calm(traj.n() - 1, &s.wind);
        let before = evaluate(&s, &winds, &traj, &sched).objective;
        let sur = build_horizontal(&s, &winds, &traj, &sched);
        let r = solve_surrogate(&sur, before, s.delta, &DinkelbachOptions::default()).unwrap();
        let after = evaluate(&s, &winds, &r.trajectory, &sched).objective;
        assert!(after >= before * (1.0 - 1e-7), "{after} < {before}");
        assert!(r.trajectory.max_violation(&s) < 1e-6);
    }

    #[test]
    fn vertical_step_does_not_lower_objective() {
        let s = small();
        let (traj, sched) = init_plan(&s).unwrap();
        let trace = crate::wind::sample_trace(&s.wind, traj.n(), 8, 3).unwrap();
        let winds = WindSet::from_trace(&trace, &s.wind, traj.n() - 1).unwrap();
        let before = evaluate(&s, &winds, &traj, &sched).objective;
        let sur = build_vertical(&s, &winds, &traj, &sched);
        let r = solve_surrogate(&sur, before, s.delta, &DinkelbachOptions::default()).unwrap();
        let after = evaluate(&s, &winds, &r.trajectory, &sched).objective;
        assert!(after >= before * (1.0 - 1e-7), "{after} < {before}");
        assert!(r.trajectory.max_violation(&s) < 1e-6);
    }
}
