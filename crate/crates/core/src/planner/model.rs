use crate::airlink::{ChannelParams, GroundUser};
use crate::error::{Error, Result};
use crate::propulsion::{power, AeroParams, KinState};
use crate::wind::{WindStats, WindTrace};
use crate::{Vec2, Vec3};

use super::rates::rate_floor_at;
use super::slack::{m1_value, p_ub, Slacks};

/// Mission, vehicle, channel and wind description.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    /// Flight duration (s).
    pub t0: f64,
    /// Slot length (s).
    pub delta: f64,
    pub q_i: Vec3,
    pub q_f: Vec3,
    pub v_h_max: f64,
    pub v_v_max: f64,
    pub h_min: f64,
    pub h_max: f64,
    pub users: Vec<GroundUser>,
    pub wind: WindStats,
    pub aero: AeroParams,
    pub channel: ChannelParams,
    /// Wind samples per slot used by the offline design.
    pub s_mcsaa: usize,
}

impl Default for Scenario {
    fn default() -> Self {
        Scenario {
            t0: 150.0,
            delta: 1.0,
            q_i: Vec3::new(0.0, 500.0, 100.0),
            q_f: Vec3::new(1000.0, 500.0, 100.0),
            v_h_max: 40.0,
            v_v_max: 20.0,
            h_min: 50.0,
            h_max: 300.0,
            users: vec![
                GroundUser::new(1, 100.0, 300.0),
                GroundUser::new(2, 500.0, 800.0),
                GroundUser::new(3, 500.0, 200.0),
                GroundUser::new(4, 900.0, 600.0),
            ],
            wind: WindStats::default(),
            aero: AeroParams::default(),
            channel: ChannelParams::default(),
            s_mcsaa: 300,
        }
    }
}

impl Scenario {
    pub fn n_slots(&self) -> usize {
        (self.t0 / self.delta).round() as usize
    }

    pub fn k(&self) -> usize {
        self.users.len()
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidScenario(m));
        if !(self.t0 > 0.0 && self.delta > 0.0) {
            return bad("T0 and Delta must be positive".into());
        }
        let n = self.n_slots();
        if ((self.t0 / self.delta) - n as f64).abs() > 1e-9 * n as f64 {
            return bad(format!("T0 / Delta = {} is not an integer", self.t0 / self.delta));
        }
        if n < 3 {
            return bad(format!("need at least 3 slots, got {n}"));
        }
        if !(self.h_min > 0.0 && self.h_min <= self.h_max) {
            return bad(format!("altitude band [{}, {}] invalid", self.h_min, self.h_max));
        }
        for (name, q) in [("Q_I", self.q_i), ("Q_F", self.q_f)] {
            if q.z < self.h_min || q.z > self.h_max {
                return bad(format!("{name} altitude {} outside the band", q.z));
            }
        }
        if !(self.v_h_max > 0.0 && self.v_v_max > 0.0) {
            return bad("speed caps must be positive".into());
        }
        let moves = (n - 1) as f64;
        let dh = (self.q_f - self.q_i).xy().norm() / moves;
        let dv = (self.q_f.z - self.q_i.z).abs() / moves;
        if dh > self.v_h_max * self.delta * (1.0 + 1e-12) || dv > self.v_v_max * self.delta * (1.0 + 1e-12) {
            return bad("straight line from Q_I to Q_F violates the speed caps".into());
        }
        if self.users.is_empty() {
            return bad("at least one ground user is required".into());
        }
        for (i, u) in self.users.iter().enumerate() {
            if u.id != i + 1 {
                return bad(format!("user ids must be 1..K in order, found {} at {}", u.id, i + 1));
            }
        }
        if self.s_mcsaa == 0 {
            return bad("S_mcsaa must be at least 1".into());
        }
        self.aero.validate()?;
        self.channel.validate()?;
        self.wind.validate_with(true)?;
        Ok(())
    }
}

/// Slot positions `Q[0..N)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub pos: Vec<Vec3>,
    pub delta: f64,
}

impl Trajectory {
    pub fn n(&self) -> usize {
        self.pos.len()
    }

    /// `v[n] = (Q[n+1] - Q[n]) / Delta`, one per move (`N - 1`).
    pub fn velocities(&self) -> Vec<Vec3> {
        self.pos.windows(2).map(|w| (w[1] - w[0]) / self.delta).collect()
    }

    /// Second differences for `n <= N - 3`; the last move reuses the
    /// previous acceleration.
    pub fn accelerations(&self) -> Vec<Vec3> {
        let v = self.velocities();
        let mut a: Vec<Vec3> = v.windows(2).map(|w| (w[1] - w[0]) / self.delta).collect();
        let last = a.last().copied().unwrap_or_else(Vec3::zeros);
        a.push(last);
        a
    }

    pub fn mean_altitude(&self) -> f64 {
        self.pos.iter().map(|p| p.z).sum::<f64>() / self.n() as f64
    }

    /// Largest violation of endpoints, speed caps and altitude band (m).
    pub fn max_violation(&self, s: &Scenario) -> f64 {
        let n = self.n();
        let mut worst = (self.pos[0] - s.q_i).norm().max((self.pos[n - 1] - s.q_f).norm());
        for w in self.pos.windows(2) {
            worst = worst.max((w[1] - w[0]).xy().norm() - s.v_h_max * s.delta);
            worst = worst.max((w[1].z - w[0].z).abs() - s.v_v_max * s.delta);
        }
        for p in &self.pos {
            worst = worst.max(s.h_min - p.z).max(p.z - s.h_max);
        }
        worst.max(0.0)
    }
}

/// Scheduling weights `a[k][n]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Schedule {
    pub a: Vec<Vec<f64>>,
}

impl Schedule {
    pub fn k(&self) -> usize {
        self.a.len()
    }

    pub fn n(&self) -> usize {
        self.a.first().map_or(0, |r| r.len())
    }

    /// Scheduled user (zero-based) per slot, if any.
    pub fn assigned(&self, n: usize) -> Option<usize> {
        let mut best: Option<(usize, f64)> = None;
        for (k, row) in self.a.iter().enumerate() {
            if row[n] > 0.0 && best.is_none_or(|(_, b)| row[n] > b) {
                best = Some((k, row[n]));
            }
        }
        best.map(|(k, _)| k)
    }

    pub fn is_binary(&self) -> bool {
        self.a.iter().flatten().all(|&x| x == 0.0 || x == 1.0)
    }
}

/// Straight line at uniform speed plus `K` contiguous scheduling blocks.
pub fn init_plan(s: &Scenario) -> Result<(Trajectory, Schedule)> {
    s.validate()?;
    let n = s.n_slots();
    let pos = (0..n)
        .map(|i| {
            let t = i as f64 / (n - 1) as f64;
            if i == n - 1 {
                s.q_f
            } else {
                s.q_i + (s.q_f - s.q_i) * t
            }
        })
        .collect();
    let k = s.k();
    let mut a = vec![vec![0.0; n]; k];
    for i in 0..n {
        a[(i * k / n).min(k - 1)][i] = 1.0;
    }
    Ok((Trajectory { pos, delta: s.delta }, Schedule { a }))
}

/// Largest weight per slot wins, ties to the lowest index, all-zero slots
/// stay idle.
pub fn round_schedule(sched: &Schedule) -> Schedule {
    let (k, n) = (sched.k(), sched.n());
    let mut a = vec![vec![0.0; n]; k];
    for i in 0..n {
        if let Some(best) = sched.assigned(i) {
            a[best][i] = 1.0;
        }
    }
    Schedule { a }
}

/// Reference-altitude wind vectors per move, used for sample averages.
#[derive(Debug, Clone)]
pub struct WindSet {
    /// `[move][sample]`
    pub samples: Vec<Vec<Vec2>>,
    pub stats: WindStats,
}

impl WindSet {
    /// Collapses an all-calm trace to a single zero sample per move.
    pub fn from_trace(trace: &WindTrace, stats: &WindStats, n_moves: usize) -> Result<Self> {
        if trace.n_slots() < n_moves {
            return Err(Error::InvalidParameter(format!(
                "wind trace has {} slots, need {n_moves}",
                trace.n_slots()
            )));
        }
        let samples = if trace.is_calm() {
            vec![vec![Vec2::zeros()]; n_moves]
        } else {
            (0..n_moves)
                .map(|j| trace.slot(j).map(|w| w.reference_vector().xy()).collect())
                .collect()
        };
        Ok(WindSet { samples, stats: *stats })
    }

    pub fn calm(n_moves: usize, stats: &WindStats) -> Self {
        WindSet {
            samples: vec![vec![Vec2::zeros()]; n_moves],
            stats: *stats,
        }
    }

    pub fn is_calm(&self) -> bool {
        self.samples.iter().flatten().all(|w| w.x == 0.0 && w.y == 0.0)
    }

    /// Wind vectors of move `j` at altitude `z`.
    pub fn at(&self, j: usize, z: f64) -> impl Iterator<Item = Vec3> + '_ {
        let c = self.stats.altitude_factor(z);
        self.samples[j].iter().map(move |w| Vec3::new(c * w.x, c * w.y, 0.0))
    }

    pub fn mean_ref(&self, j: usize) -> Vec2 {
        let s = &self.samples[j];
        s.iter().fold(Vec2::zeros(), |acc, w| acc + w) / s.len() as f64
    }

    pub fn mean_ref_sq(&self, j: usize) -> f64 {
        let s = &self.samples[j];
        s.iter().map(|w| w.norm_squared()).sum::<f64>() / s.len() as f64
    }

    /// `(E||v - v_w||^2, E||v - v_w||^3)` at altitude `z`.
    pub fn rel_moments(&self, j: usize, z: f64, v: &Vec3) -> (f64, f64) {
        let n = self.samples[j].len() as f64;
        let (mut sq, mut cube) = (0.0, 0.0);
        for w in self.at(j, z) {
            let d = (v - w).norm();
            sq += d * d;
            cube += d * d * d;
        }
        (sq / n, cube / n)
    }
}

/// Exact-model assessment of a trajectory and schedule.
#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    /// `[k][n]` rate floors.
    pub rates: Vec<Vec<f64>>,
    pub user_rate: Vec<f64>,
    pub r_min: f64,
    /// Tight slacks per move.
    pub slacks: Vec<Slacks>,
    /// Sample-averaged power bound per move (W).
    pub p_ub: Vec<f64>,
    /// Sample-averaged exact power per move (W).
    pub p_exact: Vec<f64>,
    /// `R_min / sum(P_ub)`.
    pub objective: f64,
}

impl Evaluation {
    pub fn p_ub_sum(&self) -> f64 {
        self.p_ub.iter().sum()
    }

    pub fn p_exact_sum(&self) -> f64 {
        self.p_exact.iter().sum()
    }
}

/// Rate floors `P_L R_L` for every user and slot.
pub fn rate_table(s: &Scenario, traj: &Trajectory) -> Vec<Vec<f64>> {
    s.users
        .iter()
        .map(|u| {
            traj.pos
                .iter()
                .map(|q| {
                    let x = (q.xy() - u.position).norm();
                    let theta = super::rates::elevation_rad(q.z, x).to_degrees();
                    rate_floor_at(theta, q.z * q.z + x * x, &s.channel)
                })
                .collect()
        })
        .collect()
}

pub fn user_rates(rates: &[Vec<f64>], sched: &Schedule) -> Vec<f64> {
    rates
        .iter()
        .zip(&sched.a)
        .map(|(r, a)| r.iter().zip(a).map(|(r, a)| r * a).sum())
        .collect()
}

/// Tight slacks, power bound and exact power of every move.
pub fn energy_profile(s: &Scenario, winds: &WindSet, traj: &Trajectory) -> (Vec<Slacks>, Vec<f64>, Vec<f64>) {
    let v = traj.velocities();
    let a = traj.accelerations();
    let mut slacks = Vec::with_capacity(v.len());
    let mut ub = Vec::with_capacity(v.len());
    let mut exact = Vec::with_capacity(v.len());
    for j in 0..v.len() {
        let z = traj.pos[j].z;
        let (sq, cube) = winds.rel_moments(j, z, &v[j]);
        let sl = Slacks::tight(m1_value(&a[j], sq, &s.aero), v[j].norm_squared(), &s.aero);
        ub.push(p_ub(&v[j], &sl, cube, &s.aero));
        let st = KinState::new(v[j], a[j]);
        let n = winds.samples[j].len() as f64;
        exact.push(winds.at(j, z).map(|w| power(&st, &w, &s.aero).total).sum::<f64>() / n);
        slacks.push(sl);
    }
    (slacks, ub, exact)
}

pub fn evaluate(s: &Scenario, winds: &WindSet, traj: &Trajectory, sched: &Schedule) -> Evaluation {
    let rates = rate_table(s, traj);
    let user_rate = user_rates(&rates, sched);
    let r_min = user_rate.iter().copied().fold(f64::INFINITY, f64::min);
    let (slacks, p_ub, p_exact) = energy_profile(s, winds, traj);
    let denom: f64 = p_ub.iter().sum();
    Evaluation {
        rates,
        user_rate,
        r_min,
        slacks,
        objective: r_min / denom,
        p_ub,
        p_exact,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn straight_line_init() {
        let s = Scenario::default();
        let (t, a) = init_plan(&s).unwrap();
        assert_eq!(t.n(), 150);
        assert_relative_eq!(t.pos[1].x - t.pos[0].x, 1000.0 / 149.0, max_relative = 1e-12);
        assert!(t.pos.iter().all(|p| p.y == 500.0 && p.z == 100.0));
        assert_eq!(t.pos[149], s.q_f);
        assert!(a.is_binary());
        for n in 0..150 {
            assert_eq!(a.a.iter().map(|r| r[n]).sum::<f64>(), 1.0);
        }
        assert_eq!(t.max_violation(&s), 0.0);
    }

    #[test]
    fn single_user_gets_every_slot() {
        let s = Scenario {
            users: vec![GroundUser::new(1, 500.0, 500.0)],
            ..Scenario::default()
        };
        let (_, a) = init_plan(&s).unwrap();
        assert!(a.a[0].iter().all(|&x| x == 1.0));
    }

    #[test]
    fn equal_endpoints_hover() {
        let s = Scenario {
            q_f: Scenario::default().q_i,
            ..Scenario::default()
        };
        let (t, _) = init_plan(&s).unwrap();
        assert!(t.velocities().iter().all(|v| v.norm() == 0.0));
    }

    #[test]
    fn rounding_rules() {
        let s = Schedule {
            a: vec![vec![0.6, 0.5, 0.0, 1.0], vec![0.4, 0.5, 0.0, 0.0]],
        };
        let r = round_schedule(&s);
        assert_eq!(r.a, vec![vec![1.0, 1.0, 0.0, 1.0], vec![0.0, 0.0, 0.0, 0.0]]);
        assert_eq!(round_schedule(&r), r);
    }

    #[test]
    fn infeasible_scenarios_rejected() {
        let mut s = Scenario::default();
        s.v_h_max = 5.0;
        assert!(s.validate().is_err());
        let mut s = Scenario::default();
        s.t0 = 150.5;
        assert!(s.validate().is_err());
        let mut s = Scenario::default();
        s.q_i.z = 20.0;
        assert!(s.validate().is_err());
    }
}
