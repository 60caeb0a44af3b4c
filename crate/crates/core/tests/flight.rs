//! Planner and online-flight behavior on reduced scenarios.

use proptest::prelude::*;

use uav_wind::airlink::{CityModel, GroundUser};
use uav_wind::online::{adapt_slot, fly_offline, fly_online, slot_objective, OnlineConfig, SlotInput, SlotLimits};
use uav_wind::planner::model::{init_plan, round_schedule, Schedule};
use uav_wind::planner::{plan_offline, plan_violation, Scenario};
use uav_wind::wind::{sample_trace, WindStats};
use uav_wind::Vec3;

fn short() -> Scenario {
    Scenario {
        t0: 25.0,
        q_f: Vec3::new(300.0, 500.0, 100.0),
        users: vec![GroundUser::new(1, 120.0, 430.0), GroundUser::new(2, 220.0, 560.0)],
        s_mcsaa: 3,
        ..Scenario::default()
    }
}

#[test]
fn planning_is_deterministic_and_feasible() {
    let s = short();
    let a = plan_offline(&s, 5).unwrap();
    let b = plan_offline(&s, 5).unwrap();
    assert_eq!(a.trajectory, b.trajectory);
    assert_eq!(a.schedule, b.schedule);
    assert_eq!(a.objective, b.objective);
    assert!(plan_violation(&s, &a) <= 1e-6, "{}", plan_violation(&s, &a));
    assert_eq!(a.trajectory.pos[0], s.q_i);
    assert_eq!(*a.trajectory.pos.last().unwrap(), s.q_f);
    for w in a.trace.windows(2) {
        assert!(w[1].objective >= w[0].objective * (1.0 - 1e-9));
    }
    assert!(a.trace.last().unwrap().objective >= a.trace[0].objective);
}

#[test]
fn zero_tolerances_fly_the_plan_exactly() {
    let s = Scenario::default();
    let (traj, sched) = init_plan(&s).unwrap();
    let wind = sample_trace(&s.wind, traj.n(), 1, 3).unwrap();
    let log = fly_offline(&s, &traj, &sched, wind.scenario(0), &s.wind, &CityModel::empty()).unwrap();
    for (r, q) in log.rows.iter().zip(&traj.pos) {
        assert_eq!(r.q, *q);
    }
    assert_eq!(log.fallbacks(), 0);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn online_flight_respects_tube_tether_and_progress(
        seed in 0u64..1000,
        eps_q in 0.0..150.0f64,
        eps_v in 0.0..30.0f64,
        mu in 0.0..360.0f64,
    ) {
        let s = Scenario { wind: WindStats { mu_dir: mu, ..WindStats::default() }, ..Scenario::default() };
        let (traj, sched) = init_plan(&s).unwrap();
        let cfg = OnlineConfig { eps_q, eps_v, ..OnlineConfig::default() };
        let wind = sample_trace(&s.wind, traj.n(), 1, seed).unwrap();
        let log = fly_online(&s, &traj, &sched, wind.scenario(0), &s.wind, &CityModel::empty(), &cfg).unwrap();
        let v_off = traj.velocities();
        let n = traj.n();
        let tol = 1e-6;
        for m in 0..n - 1 {
            let q_next = log.rows[m + 1].q;
            prop_assert!((log.rows[m].v - v_off[m]).norm() <= eps_v + tol);
            prop_assert!((q_next - traj.pos[m + 1]).norm() <= eps_q + tol);
            prop_assert!((q_next - s.q_f).norm() <= (traj.pos[m + 1] - s.q_f).norm() + tol);
        }
        prop_assert!((log.rows[n - 1].q - s.q_f).norm() <= 1e-9);
        prop_assert!(log.energy().is_finite());
    }

    #[test]
    fn adapted_velocity_never_costs_more_than_the_plan(
        vx in -20.0..20.0f64, vy in -20.0..20.0f64, vz in -5.0..5.0f64,
        wx in -15.0..15.0f64, wy in -15.0..15.0f64,
        dx in -30.0..30.0f64, dy in -30.0..30.0f64,
    ) {
        let s = Scenario::default();
        let v_off = Vec3::new(vx, vy, vz);
        let q = Vec3::new(400.0, 500.0, 120.0);
        let inp = SlotInput {
            dev: Vec3::new(dx, dy, 0.0),
            q_off_now: q,
            q_off_next: q + v_off,
            v_off,
            v_prev: v_off,
            wind: Vec3::new(wx, wy, 0.0),
            q_f: s.q_f,
            tube_next: 100.0,
        };
        let cfg = OnlineConfig::default();
        let d = adapt_slot(&inp, &cfg, &SlotLimits::from_scenario(&s), &s.aero);
        let f = |v: &Vec3| slot_objective(v, &inp.v_prev, &inp.wind, s.delta, &s.aero);
        let plan_ok = (inp.q_off_next + inp.dev - s.q_f).norm() <= (inp.q_off_next - s.q_f).norm();
        if plan_ok {
            prop_assert!(!d.fallback);
            prop_assert!(f(&d.v) <= f(&v_off) * (1.0 + 1e-12));
        }
        prop_assert!((d.v - v_off).norm() <= cfg.eps_v + 1e-6);
    }

    #[test]
    fn rounding_yields_a_valid_binary_schedule(a in proptest::collection::vec(proptest::collection::vec(0.0..1.0f64, 8), 3)) {
        let r = round_schedule(&Schedule { a: a.clone() });
        prop_assert!(r.is_binary());
        for n in 0..8 {
            let col: f64 = r.a.iter().map(|row| row[n]).sum();
            prop_assert!(col <= 1.0);
            let best = (0..3).fold(0, |b, k| if a[k][n] > a[b][n] { k } else { b });
            if a[best][n] > 0.0 {
                prop_assert_eq!(r.a[best][n], 1.0);
            }
        }
    }
}
