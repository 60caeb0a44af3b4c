//! Solver-facing description of a convex subproblem.
//!
//! A [`ConvexProgram`] is assembled from a closed catalog of constraint
//! shapes, each of which is convex by construction:
//!
//! * affine equalities and inequalities,
//! * Euclidean norm bounded by an affine expression,
//! * quadratic-over-linear bounded by an affine expression,
//! * cube of a norm bounded by an epigraph expression,
//! * concave powers `y <= x^p` and exponential epigraphs `exp(x) <= t`.
//!
//! The objective is affine; nonlinear objective terms are expressed through
//! epigraph variables built with the same catalog.

use std::fmt;

/// Handle to a scalar decision variable.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Var(pub(crate) usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

/// Sparse affine expression `constant + sum(coef * var)`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Affine {
    pub(crate) terms: Vec<(usize, f64)>,
    pub(crate) constant: f64,
}

impl Affine {
    pub fn constant(c: f64) -> Self {
        Affine {
            terms: Vec::new(),
            constant: c,
        }
    }

    pub fn var(v: Var) -> Self {
        Affine {
            terms: vec![(v.0, 1.0)],
            constant: 0.0,
        }
    }

    pub fn term(coef: f64, v: Var) -> Self {
        Affine {
            terms: vec![(v.0, coef)],
            constant: 0.0,
        }
    }

    /// Adds `coef * v` in place and returns `self` for chaining.
    pub fn plus(mut self, coef: f64, v: Var) -> Self {
        if coef != 0.0 {
            self.terms.push((v.0, coef));
        }
        self
    }

    pub fn plus_const(mut self, c: f64) -> Self {
        self.constant += c;
        self
    }

    pub fn add_term(&mut self, coef: f64, v: Var) {
        if coef != 0.0 {
            self.terms.push((v.0, coef));
        }
    }

    pub fn add_expr(&mut self, scale: f64, other: &Affine) {
        for &(i, c) in &other.terms {
            if c * scale != 0.0 {
                self.terms.push((i, c * scale));
            }
        }
        self.constant += scale * other.constant;
    }

    pub fn scaled(&self, scale: f64) -> Affine {
        let mut out = Affine::constant(0.0);
        out.add_expr(scale, self);
        out
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        self.terms
            .iter()
            .fold(self.constant, |acc, &(i, c)| acc + c * x[i])
    }

    /// Merges repeated variables and drops zero coefficients.
    pub fn compacted(&self) -> Affine {
        let mut terms = self.terms.clone();
        terms.sort_by_key(|&(i, _)| i);
        let mut out: Vec<(usize, f64)> = Vec::with_capacity(terms.len());
        for (i, c) in terms {
            match out.last_mut() {
                Some((j, acc)) if *j == i => *acc += c,
                _ => out.push((i, c)),
            }
        }
        out.retain(|&(_, c)| c != 0.0);
        Affine {
            terms: out,
            constant: self.constant,
        }
    }

    pub fn is_constant(&self) -> bool {
        self.terms.iter().all(|&(_, c)| c == 0.0)
    }

    pub fn constant_part(&self) -> f64 {
        self.constant
    }

    fn max_index(&self) -> Option<usize> {
        self.terms.iter().map(|&(i, _)| i).max()
    }
}

impl From<Var> for Affine {
    fn from(v: Var) -> Self {
        Affine::var(v)
    }
}

impl std::ops::Add<&Affine> for Affine {
    type Output = Affine;
    fn add(mut self, rhs: &Affine) -> Affine {
        self.add_expr(1.0, rhs);
        self
    }
}

impl std::ops::Add<Affine> for Affine {
    type Output = Affine;
    fn add(self, rhs: Affine) -> Affine {
        self + &rhs
    }
}

impl std::ops::Sub<&Affine> for Affine {
    type Output = Affine;
    fn sub(mut self, rhs: &Affine) -> Affine {
        self.add_expr(-1.0, rhs);
        self
    }
}

impl std::ops::Sub<Affine> for Affine {
    type Output = Affine;
    fn sub(self, rhs: Affine) -> Affine {
        self - &rhs
    }
}

impl std::ops::Sub<&Affine> for &Affine {
    type Output = Affine;
    fn sub(self, rhs: &Affine) -> Affine {
        self.clone() - rhs
    }
}

impl std::ops::Mul<f64> for &Affine {
    type Output = Affine;
    fn mul(self, k: f64) -> Affine {
        self.scaled(k)
    }
}

impl std::ops::Mul<f64> for Affine {
    type Output = Affine;
    fn mul(self, k: f64) -> Affine {
        self.scaled(k)
    }
}

impl From<f64> for Affine {
    fn from(c: f64) -> Self {
        Affine::constant(c)
    }
}

/// One member of the constraint catalog.
#[derive(Debug, Clone, PartialEq)]
pub enum Constraint {
    /// `expr == 0`
    Eq(Affine),
    /// `expr <= 0`
    Le(Affine),
    /// `||args|| <= bound`
    NormLe { args: Vec<Affine>, bound: Affine },
    /// `||args||^2 <= den * bound` with `den, bound >= 0`
    QuadOverLin {
        args: Vec<Affine>,
        den: Affine,
        bound: Affine,
    },
    /// `||args||^3 <= bound`
    CubeOfNorm { args: Vec<Affine>, bound: Affine },
    /// `|y| <= base^p` with `0 < p < 1` and `base >= 0`
    PowerGe { base: Affine, p: f64, y: Affine },
    /// `exp(arg) <= bound`
    ExpLe { arg: Affine, bound: Affine },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sense {
    Minimize,
    Maximize,
}

#[derive(Debug, Clone, PartialEq)]
pub(crate) struct VarInfo {
    pub name: String,
    pub lower: Option<f64>,
    pub upper: Option<f64>,
}

/// A convex program built from the catalog. Construction never yields a
/// nonconvex problem: malformed inputs are rejected by [`ConvexProgram::validate`].
#[derive(Debug, Clone, PartialEq)]
pub struct ConvexProgram {
    pub(crate) vars: Vec<VarInfo>,
    pub(crate) constraints: Vec<Constraint>,
    pub(crate) objective: Affine,
    pub(crate) sense: Sense,
}

impl Default for ConvexProgram {
    fn default() -> Self {
        Self::new()
    }
}

impl ConvexProgram {
    pub fn new() -> Self {
        ConvexProgram {
            vars: Vec::new(),
            constraints: Vec::new(),
            objective: Affine::constant(0.0),
            sense: Sense::Minimize,
        }
    }

    pub fn num_vars(&self) -> usize {
        self.vars.len()
    }

    pub fn num_constraints(&self) -> usize {
        self.constraints.len()
    }

    pub fn constraints(&self) -> &[Constraint] {
        &self.constraints
    }

    pub fn add_var(&mut self, name: impl Into<String>) -> Var {
        self.vars.push(VarInfo {
            name: name.into(),
            lower: None,
            upper: None,
        });
        Var(self.vars.len() - 1)
    }

    pub fn add_bounded_var(
        &mut self,
        name: impl Into<String>,
        lower: Option<f64>,
        upper: Option<f64>,
    ) -> Var {
        let v = self.add_var(name);
        self.vars[v.0].lower = lower;
        self.vars[v.0].upper = upper;
        v
    }

    pub fn add_vars(&mut self, name: &str, n: usize) -> Vec<Var> {
        (0..n).map(|i| self.add_var(format!("{name}[{i}]"))).collect()
    }

    pub fn set_bounds(&mut self, v: Var, lower: Option<f64>, upper: Option<f64>) {
        self.vars[v.0].lower = lower;
        self.vars[v.0].upper = upper;
    }

    pub fn add(&mut self, c: Constraint) {
        self.constraints.push(c);
    }

    /// `lhs == rhs`
    pub fn equal(&mut self, lhs: impl Into<Affine>, rhs: impl Into<Affine>) {
        let mut e = lhs.into();
        e.add_expr(-1.0, &rhs.into());
        self.add(Constraint::Eq(e));
    }

    /// `lhs <= rhs`
    pub fn le(&mut self, lhs: impl Into<Affine>, rhs: impl Into<Affine>) {
        let mut e = lhs.into();
        e.add_expr(-1.0, &rhs.into());
        self.add(Constraint::Le(e));
    }

    pub fn norm_le(&mut self, args: Vec<Affine>, bound: impl Into<Affine>) {
        self.add(Constraint::NormLe {
            args,
            bound: bound.into(),
        });
    }

    pub fn quad_over_lin_le(
        &mut self,
        args: Vec<Affine>,
        den: impl Into<Affine>,
        bound: impl Into<Affine>,
    ) {
        self.add(Constraint::QuadOverLin {
            args,
            den: den.into(),
            bound: bound.into(),
        });
    }

    /// `||args||^2 <= bound`
    pub fn sq_norm_le(&mut self, args: Vec<Affine>, bound: impl Into<Affine>) {
        self.quad_over_lin_le(args, Affine::constant(1.0), bound);
    }

    pub fn cube_of_norm_le(&mut self, args: Vec<Affine>, bound: impl Into<Affine>) {
        self.add(Constraint::CubeOfNorm {
            args,
            bound: bound.into(),
        });
    }

    /// `y <= base^p` for `0 < p < 1`.
    pub fn power_ge(&mut self, base: impl Into<Affine>, p: f64, y: impl Into<Affine>) {
        self.add(Constraint::PowerGe {
            base: base.into(),
            p,
            y: y.into(),
        });
    }

    pub fn exp_le(&mut self, arg: impl Into<Affine>, bound: impl Into<Affine>) {
        self.add(Constraint::ExpLe {
            arg: arg.into(),
            bound: bound.into(),
        });
    }

    pub fn minimize(&mut self, objective: impl Into<Affine>) {
        self.objective = objective.into();
        self.sense = Sense::Minimize;
    }

    pub fn maximize(&mut self, objective: impl Into<Affine>) {
        self.objective = objective.into();
        self.sense = Sense::Maximize;
    }

    pub fn objective(&self) -> &Affine {
        &self.objective
    }

    pub fn sense(&self) -> Sense {
        self.sense
    }

    /// Checks indices, finiteness, and catalog parameters.
    pub fn validate(&self) -> Result<(), String> {
        let n = self.vars.len();
        let check = |e: &Affine, what: &str| -> Result<(), String> {
            if let Some(i) = e.max_index() {
                if i >= n {
                    return Err(format!("{what}: variable index {i} out of range ({n} vars)"));
                }
            }
            if !e.constant.is_finite() || e.terms.iter().any(|&(_, c)| !c.is_finite()) {
                return Err(format!("{what}: non-finite coefficient"));
            }
            Ok(())
        };
        check(&self.objective, "objective")?;
        for (k, v) in self.vars.iter().enumerate() {
            if let (Some(l), Some(u)) = (v.lower, v.upper) {
                if l > u {
                    return Err(format!("variable {} ({k}) has lower {l} > upper {u}", v.name));
                }
            }
        }
        for (k, c) in self.constraints.iter().enumerate() {
            let what = format!("constraint {k}");
            match c {
                Constraint::Eq(e) | Constraint::Le(e) => check(e, &what)?,
                Constraint::NormLe { args, bound } | Constraint::CubeOfNorm { args, bound } => {
                    if args.is_empty() {
                        return Err(format!("{what}: empty norm argument"));
                    }
                    for a in args {
                        check(a, &what)?;
                    }
                    check(bound, &what)?;
                }
                Constraint::QuadOverLin { args, den, bound } => {
                    if args.is_empty() {
                        return Err(format!("{what}: empty norm argument"));
                    }
                    for a in args {
                        check(a, &what)?;
                    }
                    check(den, &what)?;
                    check(bound, &what)?;
                }
                Constraint::PowerGe { base, p, y } => {
                    if !(*p > 0.0 && *p < 1.0) {
                        return Err(format!("{what}: power {p} outside (0, 1)"));
                    }
                    check(base, &what)?;
                    check(y, &what)?;
                }
                Constraint::ExpLe { arg, bound } => {
                    check(arg, &what)?;
                    check(bound, &what)?;
                }
            }
        }
        Ok(())
    }

    /// Largest violation of any constraint or bound at `x`.
    pub fn max_violation(&self, x: &[f64]) -> f64 {
        let mut worst: f64 = 0.0;
        for (v, &xi) in self.vars.iter().zip(x) {
            if let Some(l) = v.lower {
                worst = worst.max(l - xi);
            }
            if let Some(u) = v.upper {
                worst = worst.max(xi - u);
            }
        }
        for c in &self.constraints {
            worst = worst.max(violation(c, x));
        }
        worst
    }

    /// Index and violation of the most violated constraint, ignoring bounds.
    pub fn worst_constraint(&self, x: &[f64]) -> Option<(usize, f64)> {
        self.constraints
            .iter()
            .map(|c| violation(c, x))
            .enumerate()
            .max_by(|a, b| a.1.total_cmp(&b.1))
    }
}

/// Violation of one constraint at `x` (nonpositive when satisfied).
pub fn violation(c: &Constraint, x: &[f64]) -> f64 {
    let norm = |args: &[Affine]| args.iter().map(|a| a.eval(x).powi(2)).sum::<f64>().sqrt();
    match c {
        Constraint::Eq(e) => e.eval(x).abs(),
        Constraint::Le(e) => e.eval(x),
        Constraint::NormLe { args, bound } => norm(args) - bound.eval(x),
        Constraint::QuadOverLin { args, den, bound } => {
            let d = den.eval(x);
            let b = bound.eval(x);
            let q = norm(args).powi(2);
            // Expressed on the square-root scale so residuals are comparable to SOC rows.
            (-d).max(-b).max(q.sqrt() - (d.max(0.0) * b.max(0.0)).sqrt())
        }
        Constraint::CubeOfNorm { args, bound } => {
            norm(args) - bound.eval(x).max(0.0).cbrt()
        }
        Constraint::PowerGe { base, p, y } => {
            let b = base.eval(x);
            (-b).max(y.eval(x).abs() - b.max(0.0).powf(*p))
        }
        Constraint::ExpLe { arg, bound } => {
            let t = bound.eval(x);
            arg.eval(x).exp() - t
        }
    }
}

impl fmt::Display for Affine {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut first = true;
        for &(i, c) in &self.terms {
            if first {
                write!(f, "{c} x{i}")?;
                first = false;
            } else if c < 0.0 {
                write!(f, " - {} x{i}", -c)?;
            } else {
                write!(f, " + {c} x{i}")?;
            }
        }
        if first {
            write!(f, "{}", self.constant)
        } else if self.constant != 0.0 {
            write!(f, " + {}", self.constant)
        } else {
            Ok(())
        }
    }
}

fn list(args: &[Affine]) -> String {
    args.iter()
        .map(|a| a.to_string())
        .collect::<Vec<_>>()
        .join(", ")
}

/// LP-like debug listing. Not a stable format.
impl fmt::Display for ConvexProgram {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let sense = match self.sense {
            Sense::Minimize => "minimize",
            Sense::Maximize => "maximize",
        };
        writeln!(f, "{sense}\n  {}", self.objective)?;
        writeln!(f, "subject to")?;
        for (k, c) in self.constraints.iter().enumerate() {
            match c {
                Constraint::Eq(e) => writeln!(f, "  c{k}: {e} = 0")?,
                Constraint::Le(e) => writeln!(f, "  c{k}: {e} <= 0")?,
                Constraint::NormLe { args, bound } => {
                    writeln!(f, "  c{k}: norm({}) <= {bound}", list(args))?
                }
                Constraint::QuadOverLin { args, den, bound } => {
                    writeln!(f, "  c{k}: sqnorm({}) / ({den}) <= {bound}", list(args))?
                }
                Constraint::CubeOfNorm { args, bound } => {
                    writeln!(f, "  c{k}: norm({})^3 <= {bound}", list(args))?
                }
                Constraint::PowerGe { base, p, y } => {
                    writeln!(f, "  c{k}: |{y}| <= ({base})^{p}")?
                }
                Constraint::ExpLe { arg, bound } => writeln!(f, "  c{k}: exp({arg}) <= {bound}")?,
            }
        }
        writeln!(f, "bounds")?;
        for (i, v) in self.vars.iter().enumerate() {
            let lo = v.lower.map_or("-inf".to_string(), |l| l.to_string());
            let hi = v.upper.map_or("+inf".to_string(), |u| u.to_string());
            writeln!(f, "  {lo} <= x{i} ({}) <= {hi}", v.name)?;
        }
        writeln!(f, "end")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn affine_eval_and_chaining() {
        let mut p = ConvexProgram::new();
        let x = p.add_var("x");
        let y = p.add_var("y");
        let e = Affine::term(2.0, x).plus(-1.0, y).plus_const(3.0);
        assert_eq!(e.eval(&[1.0, 4.0]), 1.0);
    }

    #[test]
    fn validate_rejects_bad_power_and_index() {
        let mut p = ConvexProgram::new();
        let x = p.add_var("x");
        p.power_ge(x, 1.5, 0.0);
        assert!(p.validate().is_err());

        let mut q = ConvexProgram::new();
        q.le(Affine::var(Var(3)), 0.0);
        assert!(q.validate().is_err());
    }

    #[test]
    fn violation_of_norm_constraint() {
        let mut p = ConvexProgram::new();
        let x = p.add_var("x");
        let t = p.add_var("t");
        p.norm_le(vec![x.into(), Affine::constant(4.0)], t);
        assert!((p.max_violation(&[3.0, 5.0])).abs() < 1e-12);
        assert!((p.max_violation(&[3.0, 4.0]) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn listing_mentions_every_constraint() {
        let mut p = ConvexProgram::new();
        let x = p.add_var("x");
        let t = p.add_var("t");
        p.cube_of_norm_le(vec![x.into()], t);
        p.exp_le(x, t);
        p.minimize(t);
        let s = p.to_string();
        assert!(s.contains("^3"));
        assert!(s.contains("exp("));
        assert!(s.contains("(x)"));
    }
}
