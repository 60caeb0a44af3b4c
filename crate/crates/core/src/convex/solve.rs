//! Interior-point backend for [`ConvexProgram`].
//!
//! Programs are lowered to the conic standard form `A x + s = b, s in K`
//! and handed to Clarabel's primal-dual interior-point solver.

use clarabel::algebra::CscMatrix;
use clarabel::solver::{
    DefaultSettings, DefaultSolver, IPSolver, SolverStatus, SupportedConeT,
    SupportedConeT::{ExponentialConeT, NonnegativeConeT, PowerConeT, SecondOrderConeT, ZeroConeT},
};

use super::program::{Affine, Constraint, ConvexProgram, Sense};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverSettings {
    /// Primal/dual feasibility tolerance.
    pub feas_tol: f64,
    /// Relative duality-gap tolerance.
    pub gap_tol: f64,
    pub max_iter: u32,
}

impl Default for SolverSettings {
    fn default() -> Self {
        SolverSettings {
            feas_tol: 1e-8,
            gap_tol: 1e-6,
            max_iter: 200,
        }
    }
}

impl SolverSettings {
    pub fn with_gap_tol(mut self, tol: f64) -> Self {
        self.gap_tol = tol;
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolveStatus {
    Optimal,
    Infeasible,
    MaxIterations,
    /// The solver stopped short of its tolerances with a point whose
    /// residual is too large to accept.
    Inaccurate,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Solution {
    pub x: Vec<f64>,
    pub objective: f64,
    pub status: SolveStatus,
    /// Largest constraint violation at `x`. For an infeasible program this is
    /// the residual of the returned certificate.
    pub residual: f64,
    pub iterations: u32,
}

impl Solution {
    pub fn value(&self, v: super::Var) -> f64 {
        self.x[v.index()]
    }

    pub fn eval(&self, e: &Affine) -> f64 {
        e.eval(&self.x)
    }

    /// Converts a non-optimal status into an error.
    pub fn into_optimal(self) -> Result<Solution> {
        match self.status {
            SolveStatus::Optimal => Ok(self),
            SolveStatus::Infeasible => Err(Error::Infeasible {
                residual: self.residual,
            }),
            SolveStatus::MaxIterations => Err(Error::MaxIterations {
                iterations: self.iterations,
            }),
            SolveStatus::Inaccurate => Err(Error::SolverFailure(format!(
                "inaccurate solution (residual {:.2e} after {} iterations)",
                self.residual, self.iterations
            ))),
        }
    }
}

struct Lowering {
    rows: Vec<(usize, usize, f64)>,
    b: Vec<f64>,
    cones: Vec<SupportedConeT<f64>>,
    n_vars: usize,
}

impl Lowering {
    fn new(n_vars: usize) -> Self {
        Lowering {
            rows: Vec::new(),
            b: Vec::new(),
            cones: Vec::new(),
            n_vars,
        }
    }

    fn aux(&mut self) -> usize {
        self.n_vars += 1;
        self.n_vars - 1
    }

    /// Row with slack `s = -e`, used for `e == 0` and `e <= 0`.
    fn push_neg(&mut self, e: &Affine) {
        let e = &e.compacted();
        let r = self.b.len();
        for &(i, c) in &e.terms {
            self.rows.push((r, i, c));
        }
        self.b.push(-e.constant);
    }

    /// Row with slack `s = e`, used for cone membership.
    fn push_pos(&mut self, e: &Affine) {
        let e = &e.compacted();
        let r = self.b.len();
        for &(i, c) in &e.terms {
            self.rows.push((r, i, -c));
        }
        self.b.push(e.constant);
    }

    fn push_cone(&mut self, members: &[Affine], cone: SupportedConeT<f64>) {
        for m in members {
            self.push_pos(m);
        }
        self.cones.push(cone);
    }
}

fn lower(prog: &ConvexProgram) -> Lowering {
    let mut low = Lowering::new(prog.num_vars());

    let eqs: Vec<&Affine> = prog
        .constraints
        .iter()
        .filter_map(|c| match c {
            Constraint::Eq(e) => Some(e),
            _ => None,
        })
        .collect();
    if !eqs.is_empty() {
        for e in &eqs {
            low.push_neg(e);
        }
        low.cones.push(ZeroConeT(eqs.len()));
    }

    let mut n_nonneg = 0;
    for c in &prog.constraints {
        if let Constraint::Le(e) = c {
            low.push_neg(e);
            n_nonneg += 1;
        }
    }
    for (i, v) in prog.vars.iter().enumerate() {
        if let Some(l) = v.lower {
            let e = Affine::constant(l).plus(-1.0, super::Var(i));
            low.push_neg(&e);
            n_nonneg += 1;
        }
        if let Some(u) = v.upper {
            let e = Affine::constant(-u).plus(1.0, super::Var(i));
            low.push_neg(&e);
            n_nonneg += 1;
        }
    }
    if n_nonneg > 0 {
        low.cones.push(NonnegativeConeT(n_nonneg));
    }

    let one = Affine::constant(1.0);
    for c in &prog.constraints {
        match c {
            Constraint::Eq(_) | Constraint::Le(_) => {}
            Constraint::NormLe { args, bound } => {
                let mut members = Vec::with_capacity(args.len() + 1);
                members.push(bound.clone());
                members.extend(args.iter().cloned());
                low.push_cone(&members, SecondOrderConeT(members.len()));
            }
            Constraint::QuadOverLin { args, den, bound } => {
                let mut sum = den.clone();
                sum.add_expr(1.0, bound);
                let mut diff = den.clone();
                diff.add_expr(-1.0, bound);
                let mut members = Vec::with_capacity(args.len() + 2);
                members.push(sum);
                members.push(diff);
                members.extend(args.iter().map(|a| a.scaled(2.0)));
                low.push_cone(&members, SecondOrderConeT(members.len()));
            }
            Constraint::CubeOfNorm { args, bound } => {
                let u = super::Var(low.aux());
                let mut members = Vec::with_capacity(args.len() + 1);
                members.push(Affine::var(u));
                members.extend(args.iter().cloned());
                low.push_cone(&members, SecondOrderConeT(members.len()));
                low.push_cone(
                    &[bound.clone(), one.clone(), Affine::var(u)],
                    PowerConeT(1.0 / 3.0),
                );
            }
            Constraint::PowerGe { base, p, y } => {
                low.push_cone(&[base.clone(), one.clone(), y.clone()], PowerConeT(*p));
            }
            Constraint::ExpLe { arg, bound } => {
                low.push_cone(&[arg.clone(), one.clone(), bound.clone()], ExponentialConeT());
            }
        }
    }
    low
}

/// Solves `prog` to the tolerances in `settings`.
///
/// Identical programs produce bit-identical solutions.
pub fn solve(prog: &ConvexProgram, settings: &SolverSettings) -> Result<Solution> {
    prog.validate().map_err(Error::MalformedProgram)?;
    let low = lower(prog);
    let n = low.n_vars;
    let m = low.b.len();

    let sign = match prog.sense {
        Sense::Minimize => 1.0,
        Sense::Maximize => -1.0,
    };
    let mut q = vec![0.0; n];
    for &(i, c) in &prog.objective.compacted().terms {
        q[i] += sign * c;
    }

    let (ri, (ci, vi)): (Vec<usize>, (Vec<usize>, Vec<f64>)) =
        low.rows.iter().map(|&(r, c, v)| (r, (c, v))).unzip();
    let a = CscMatrix::new_from_triplets(m, n, ri, ci, vi);
    let p = CscMatrix::zeros((n, n));

    let cs = DefaultSettings {
        verbose: false,
        max_iter: settings.max_iter,
        tol_feas: settings.feas_tol,
        tol_gap_abs: settings.feas_tol,
        tol_gap_rel: settings.gap_tol,
        ..DefaultSettings::default()
    };
    let mut solver = DefaultSolver::new(&p, &q, &a, &low.b, &low.cones, cs)
        .map_err(|e| Error::MalformedProgram(format!("{e:?}")))?;
    solver.solve();
    let sol = &solver.solution;

    let x: Vec<f64> = sol.x[..prog.num_vars()].to_vec();
    let residual = prog.max_violation(&x).max(0.0);
    let status = match sol.status {
        SolverStatus::Solved => SolveStatus::Optimal,
        SolverStatus::AlmostSolved | SolverStatus::InsufficientProgress
            if residual <= 1e-5 =>
        {
            SolveStatus::Optimal
        }
        SolverStatus::PrimalInfeasible | SolverStatus::AlmostPrimalInfeasible => {
            SolveStatus::Infeasible
        }
        SolverStatus::MaxIterations | SolverStatus::MaxTime => SolveStatus::MaxIterations,
        SolverStatus::AlmostSolved | SolverStatus::InsufficientProgress => SolveStatus::Inaccurate,
        other => {
            return Err(Error::SolverFailure(format!("{other:?} (residual {residual:.2e}, {} iterations)", sol.iterations)));
        }
    };
    let objective = prog.objective.eval(&x);
    Ok(Solution {
        x,
        objective,
        status,
        residual,
        iterations: sol.iterations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::convex::Var;

    fn settings() -> SolverSettings {
        SolverSettings::default()
    }

    #[test]
    fn active_lower_bound_on_square() {
        // min x^2 s.t. x >= 3
        let mut p = ConvexProgram::new();
        let x = p.add_bounded_var("x", Some(3.0), None);
        let t = p.add_var("t");
        p.sq_norm_le(vec![x.into()], t);
        p.minimize(t);
        let s = solve(&p, &settings()).unwrap().into_optimal().unwrap();
        assert!((s.value(x) - 3.0).abs() < 1e-6, "{}", s.value(x));
        assert!((s.objective - 9.0).abs() < 1e-5);
        assert!(s.residual <= 1e-6);
    }

    #[test]
    fn distance_to_point_over_box_is_clamped() {
        let c = [2.5, -4.0, 0.3];
        let mut p = ConvexProgram::new();
        let xs: Vec<Var> = (0..3)
            .map(|i| p.add_bounded_var(format!("x{i}"), Some(-1.0), Some(1.0)))
            .collect();
        let t = p.add_var("t");
        let args = xs
            .iter()
            .zip(c)
            .map(|(&x, ci)| Affine::var(x).plus_const(-ci))
            .collect();
        p.norm_le(args, t);
        p.minimize(t);
        let s = solve(&p, &settings()).unwrap().into_optimal().unwrap();
        let expect = [1.0, -1.0, 0.3];
        // The objective is flat in directions tangent to the optimum, so the
        // point itself is only determined to about sqrt(gap).
        for (x, e) in xs.iter().zip(expect) {
            assert!((s.value(*x) - e).abs() < 1e-3);
        }
        assert!((s.objective - 45f64.sqrt() / 2.0).abs() < 1e-6);
    }

    #[test]
    fn cube_of_fixed_norm() {
        let mut p = ConvexProgram::new();
        let v: Vec<Var> = p.add_vars("v", 3);
        for (&vi, val) in v.iter().zip([3.0, 4.0, 0.0]) {
            p.equal(vi, val);
        }
        let t = p.add_var("t");
        p.cube_of_norm_le(v.iter().map(|&x| x.into()).collect(), t);
        p.minimize(t);
        let s = solve(&p, &settings()).unwrap().into_optimal().unwrap();
        assert!((s.value(t) - 125.0).abs() < 1e-4, "{}", s.value(t));
    }

    #[test]
    fn exponential_and_power_epigraphs() {
        // min t s.t. exp(x) <= t, x >= 1 ; max y s.t. y <= 16^0.5
        let mut p = ConvexProgram::new();
        let x = p.add_bounded_var("x", Some(1.0), None);
        let t = p.add_var("t");
        p.exp_le(x, t);
        p.minimize(t);
        let s = solve(&p, &settings()).unwrap().into_optimal().unwrap();
        assert!((s.value(t) - 1f64.exp()).abs() < 1e-5);

        let mut p = ConvexProgram::new();
        let y = p.add_var("y");
        p.power_ge(16.0, 0.5, y);
        p.maximize(y);
        let s = solve(&p, &settings()).unwrap().into_optimal().unwrap();
        assert!((s.value(y) - 4.0).abs() < 1e-5);
    }

    #[test]
    fn infeasible_program_is_reported() {
        let mut p = ConvexProgram::new();
        let x = p.add_bounded_var("x", Some(2.0), Some(1.0));
        p.minimize(x);
        assert!(solve(&p, &settings()).is_err());

        let mut p = ConvexProgram::new();
        let x = p.add_var("x");
        p.le(x, 1.0);
        p.le(2.0, x);
        p.minimize(x);
        let s = solve(&p, &settings()).unwrap();
        assert_eq!(s.status, SolveStatus::Infeasible);
        assert!(s.into_optimal().is_err());
    }

    #[test]
    fn repeated_solves_are_bit_identical() {
        let mut p = ConvexProgram::new();
        let v = p.add_vars("v", 2);
        let t = p.add_var("t");
        p.norm_le(
            vec![Affine::var(v[0]).plus_const(-1.3), Affine::var(v[1]).plus_const(0.7)],
            t,
        );
        p.le(Affine::var(v[0]).plus(1.0, v[1]), 0.2);
        p.minimize(t);
        let a = solve(&p, &settings()).unwrap();
        let b = solve(&p, &settings()).unwrap();
        assert_eq!(
            a.x.iter().map(|x| x.to_bits()).collect::<Vec<_>>(),
            b.x.iter().map(|x| x.to_bits()).collect::<Vec<_>>()
        );
    }
}
