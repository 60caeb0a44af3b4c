//! Offline design: block coordinate ascent over the user schedule, the
//! horizontal trajectory and the altitude profile, maximizing the
//! sample-averaged energy efficiency `R_min / sum P_ub`.

pub mod io;
pub mod model;
pub mod rates;
pub mod schedule;
pub mod slack;
pub mod surrogate;

pub use model::{
    energy_profile, evaluate, init_plan, rate_table, round_schedule, user_rates, Evaluation, Scenario, Schedule,
    Trajectory, WindSet,
};
pub use schedule::optimize_schedule;
pub use slack::Slacks;

use crate::convex::DinkelbachOptions;
use crate::error::{Error, Result};
use crate::wind::{sample_trace, WindTrace};

use surrogate::{build_horizontal, build_vertical, solve_surrogate, Surrogate};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlanOptions {
    /// Outer relative-improvement threshold.
    pub eps_outer: f64,
    pub max_outer: usize,
    /// Per-block SCA relative-improvement threshold.
    pub eps_inner: f64,
    pub max_inner: usize,
    pub dinkelbach: DinkelbachOptions,
    /// Target relative slack gap for the final polish steps.
    pub slack_tol: f64,
    pub max_polish: usize,
}

impl Default for PlanOptions {
    fn default() -> Self {
        PlanOptions {
            eps_outer: 1e-3,
            max_outer: 50,
            eps_inner: 1e-3,
            max_inner: 20,
            dinkelbach: DinkelbachOptions {
                tol: 1e-6,
                max_iter: 20,
            },
            slack_tol: 1e-5,
            max_polish: 10,
        }
    }
}

/// One outer iteration of the design loop.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OuterRecord {
    pub iter: usize,
    /// Ratio with the relaxed schedule.
    pub objective: f64,
    pub r_min: f64,
    /// Sample-averaged exact propulsion energy (J).
    pub energy: f64,
    pub sca_steps: usize,
}

#[derive(Debug, Clone)]
pub struct OfflinePlan {
    pub trajectory: Trajectory,
    /// Binary schedule after rounding.
    pub schedule: Schedule,
    pub relaxed_schedule: Schedule,
    /// Minimum aggregate rate at the binary schedule (bits/s/Hz summed over slots).
    pub r_min: f64,
    /// `R_min / sum P_ub` at the binary schedule.
    pub objective: f64,
    pub evaluation: Evaluation,
    pub trace: Vec<OuterRecord>,
    pub converged: bool,
    /// SCA steps abandoned after a solver failure.
    pub solver_stalls: usize,
    /// Largest relative gap between the last solver slacks and their tight values.
    pub slack_gap: f64,
    pub wind: WindTrace,
}

impl OfflinePlan {
    /// Energy efficiency in bits per joule for bandwidth `b`.
    pub fn bits_per_joule(&self, bandwidth: f64, delta: f64) -> f64 {
        bandwidth * self.r_min * delta / (self.evaluation.p_ub_sum() * delta)
    }
}

/// Plans against `S_mcsaa` wind samples per slot drawn from `seed`.
pub fn plan_offline(s: &Scenario, seed: u64) -> Result<OfflinePlan> {
    s.validate()?;
    let trace = sample_trace(&s.wind, s.n_slots(), s.s_mcsaa, seed)?;
    plan_offline_with(s, trace, &PlanOptions::default())
}

/// Plans for calm air, the windless baseline.
pub fn plan_windless(s: &Scenario) -> Result<OfflinePlan> {
    s.validate()?;
    plan_offline_with(s, WindTrace::calm(1, s.n_slots()), &PlanOptions::default())
}

#[derive(Clone, Copy)]
enum Block {
    Horizontal,
    Vertical,
}

impl Block {
    fn name(self) -> &'static str {
        match self {
            Block::Horizontal => "horizontal trajectory",
            Block::Vertical => "vertical trajectory",
        }
    }

    fn build(self, s: &Scenario, w: &WindSet, t: &Trajectory, a: &Schedule) -> Surrogate {
        match self {
            Block::Horizontal => build_horizontal(s, w, t, a),
            Block::Vertical => build_vertical(s, w, t, a),
        }
    }
}

struct BlockOutcome {
    traj: Trajectory,
    objective: f64,
    slacks: Option<Vec<Slacks>>,
    steps: usize,
    stalled: bool,
}

/// SCA on one trajectory block. Steps that fail to raise the true
/// objective are discarded and end the block, as does a solver failure on
/// any step but the very first of the design.
#[allow(clippy::too_many_arguments)]
fn sca_block(
    block: Block,
    s: &Scenario,
    winds: &WindSet,
    traj: Trajectory,
    sched: &Schedule,
    objective: f64,
    opts: &PlanOptions,
    outer: usize,
) -> Result<BlockOutcome> {
    let mut out = BlockOutcome {
        traj,
        objective,
        slacks: None,
        steps: 0,
        stalled: false,
    };
    for _ in 0..opts.max_inner {
        let sur = block.build(s, winds, &out.traj, sched);
        let step = match solve_surrogate(&sur, out.objective, s.delta, &opts.dinkelbach) {
            Ok(step) => step,
            Err(e) if outer == 1 && out.steps == 0 && matches!(block, Block::Horizontal) => {
                return Err(Error::Subproblem {
                    stage: block.name(),
                    iteration: outer,
                    source: Box::new(e),
                })
            }
            Err(_) => {
                out.stalled = true;
                break;
            }
        };
        let f = evaluate(s, winds, &step.trajectory, sched).objective;
        if !(f > out.objective) || step.trajectory.max_violation(s) > 1e-6 {
            break;
        }
        let gain = f - out.objective;
        out.traj = step.trajectory;
        out.objective = f;
        out.slacks = Some(step.slacks);
        out.steps += 1;
        if gain <= opts.eps_inner * out.objective.abs() {
            break;
        }
    }
    Ok(out)
}

fn slack_gap(s: &Scenario, traj: &Trajectory, slacks: &[Slacks]) -> f64 {
    traj.velocities()
        .iter()
        .zip(slacks)
        .map(|(v, sl)| sl.tightness_gap(v.norm_squared(), &s.aero))
        .fold(0.0, f64::max)
}

/// Runs the design loop against a given wind trace.
pub fn plan_offline_with(s: &Scenario, wind: WindTrace, opts: &PlanOptions) -> Result<OfflinePlan> {
    let (mut traj, mut sched) = init_plan(s)?;
    let winds = WindSet::from_trace(&wind, &s.wind, traj.n() - 1)?;
    let record = |iter: usize, ev: &Evaluation, steps: usize| OuterRecord {
        iter,
        objective: ev.objective,
        r_min: ev.r_min,
        energy: ev.p_exact_sum() * s.delta,
        sca_steps: steps,
    };
    let mut ev = evaluate(s, &winds, &traj, &sched);
    let mut trace = vec![record(0, &ev, 0)];
    let mut converged = false;
    let mut last_slacks: Option<Vec<Slacks>> = None;
    let mut stalls = 0;

    for outer in 1..=opts.max_outer {
        let start = ev.objective;

        let (cand, _) = optimize_schedule(&ev.rates).map_err(|e| Error::Subproblem {
            stage: "user scheduling",
            iteration: outer,
            source: Box::new(e),
        })?;
        let cand_ev = evaluate(s, &winds, &traj, &cand);
        if cand_ev.objective > ev.objective {
            sched = cand;
            ev = cand_ev;
        }

        let mut steps = 0;
        let mut blocks = vec![Block::Horizontal];
        if s.h_max > s.h_min {
            blocks.push(Block::Vertical);
        }
        for block in blocks {
            let out = sca_block(block, s, &winds, traj.clone(), &sched, ev.objective, opts, outer)?;
            stalls += out.stalled as usize;
            if out.steps > 0 {
                traj = out.traj;
                last_slacks = out.slacks;
                ev = evaluate(s, &winds, &traj, &sched);
            }
            steps += out.steps;
        }

        trace.push(record(outer, &ev, steps));
        if ev.objective - start <= opts.eps_outer * start.abs() {
            converged = true;
            break;
        }
    }

    // Polish: keep stepping until the solver slacks meet their defining
    // relations; the linearization error shrinks with the step length.
    let mut gap = last_slacks.as_ref().map_or(f64::INFINITY, |sl| slack_gap(s, &traj, sl));
    let mut polish_steps = 0;
    for _ in 0..opts.max_polish {
        if gap <= opts.slack_tol {
            break;
        }
        let single = PlanOptions { max_inner: 1, eps_inner: 0.0, ..*opts };
        let mut moved = false;
        for block in [Block::Horizontal, Block::Vertical] {
            if matches!(block, Block::Vertical) && s.h_max <= s.h_min {
                continue;
            }
            let out = sca_block(block, s, &winds, traj.clone(), &sched, ev.objective, &single, opts.max_outer + 1)?;
            stalls += out.stalled as usize;
            if out.steps > 0 {
                traj = out.traj;
                ev = evaluate(s, &winds, &traj, &sched);
                gap = out.slacks.as_ref().map_or(gap, |sl| slack_gap(s, &traj, sl));
                last_slacks = out.slacks;
                polish_steps += out.steps;
                moved = true;
            }
        }
        if !moved {
            break;
        }
    }
    if polish_steps > 0 {
        let iter = trace.last().map_or(0, |r| r.iter) + 1;
        trace.push(record(iter, &ev, polish_steps));
    }

    let relaxed = sched;
    let schedule = round_schedule(&relaxed);
    let final_ev = evaluate(s, &winds, &traj, &schedule);
    if last_slacks.is_none() {
        gap = 0.0;
    }
    Ok(OfflinePlan {
        r_min: final_ev.r_min,
        objective: final_ev.objective,
        evaluation: final_ev,
        trajectory: traj,
        schedule,
        relaxed_schedule: relaxed,
        trace,
        converged,
        solver_stalls: stalls,
        slack_gap: gap,
        wind,
    })
}

/// Checks the plan against the mission constraints, returning the largest
/// violation (m for geometry, dimensionless for the schedule).
pub fn plan_violation(s: &Scenario, plan: &OfflinePlan) -> f64 {
    let geo = plan.trajectory.max_violation(s);
    let mut sched: f64 = 0.0;
    for n in 0..plan.schedule.n() {
        let col: f64 = plan.schedule.a.iter().map(|r| r[n]).sum();
        sched = sched.max(col - 1.0);
    }
    if !plan.schedule.is_binary() {
        sched = sched.max(1.0);
    }
    geo.max(sched)
}
