//! Relaxed user-scheduling linear program for a fixed trajectory.

use crate::convex::{solve, Affine, ConvexProgram, SolverSettings, Var};
use crate::error::Result;

use super::model::Schedule;

/// Weights below this are snapped to zero after the solve.
const ZERO_SNAP: f64 = 1e-6;

/// Maximizes `R_min` over relaxed weights given per-slot rates `rates[k][n]`.
///
/// A second stage keeps `R_min` within a relative `1e-7` of its optimum and
/// maximizes the total rate, which removes most of the LP's degeneracy.
pub fn optimize_schedule(rates: &[Vec<f64>]) -> Result<(Schedule, f64)> {
    let k = rates.len();
    let n = rates.first().map_or(0, |r| r.len());
    let settings = SolverSettings::default().with_gap_tol(1e-9);

    let build = |p: &mut ConvexProgram| -> (Vec<Vec<Var>>, Var) {
        let a: Vec<Vec<Var>> = (0..k)
            .map(|ki| {
                (0..n)
                    .map(|ni| p.add_bounded_var(format!("a_{ki}_{ni}"), Some(0.0), Some(1.0)))
                    .collect()
            })
            .collect();
        let r_min = p.add_var("r_min");
        for ni in 0..n {
            let mut col = Affine::constant(0.0);
            for row in &a {
                col.add_term(1.0, row[ni]);
            }
            p.le(col, Affine::constant(1.0));
        }
        for (row, r) in a.iter().zip(rates) {
            let mut tot = Affine::constant(0.0);
            for (v, &rv) in row.iter().zip(r) {
                if rv != 0.0 {
                    tot.add_term(rv, *v);
                }
            }
            p.le(Affine::var(r_min), tot);
        }
        (a, r_min)
    };

    let mut p1 = ConvexProgram::new();
    let (_, r1) = build(&mut p1);
    p1.maximize(Affine::var(r1));
    let s1 = solve(&p1, &settings)?.into_optimal()?;
    let r_star = s1.value(r1).max(0.0);

    let mut p2 = ConvexProgram::new();
    let (a, r2) = build(&mut p2);
    p2.le(Affine::constant(r_star * (1.0 - 1e-7)), Affine::var(r2));
    let mut total = Affine::constant(0.0);
    for (row, r) in a.iter().zip(rates) {
        for (v, &rv) in row.iter().zip(r) {
            total.add_term(rv, *v);
        }
    }
    p2.maximize(total);
    let s2 = solve(&p2, &settings)?.into_optimal()?;

    let weights: Vec<Vec<f64>> = a
        .iter()
        .map(|row| {
            row.iter()
                .map(|&v| {
                    let x = s2.value(v).clamp(0.0, 1.0);
                    if x < ZERO_SNAP {
                        0.0
                    } else {
                        x
                    }
                })
                .collect()
        })
        .collect();
    // Renormalize columns pushed above one by solver round-off.
    let mut weights = weights;
    for ni in 0..n {
        let col: f64 = weights.iter().map(|r| r[ni]).sum();
        if col > 1.0 {
            for r in weights.iter_mut() {
                r[ni] /= col;
            }
        }
    }
    let sched = Schedule { a: weights };
    let r_min = super::model::user_rates(rates, &sched)
        .into_iter()
        .fold(f64::INFINITY, f64::min);
    Ok((sched, r_min))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn single_user_takes_every_slot() {
        let rates = vec![vec![1.0, 2.0, 0.5, 3.0]];
        let (s, r) = optimize_schedule(&rates).unwrap();
        for &x in &s.a[0] {
            assert_relative_eq!(x, 1.0, epsilon = 1e-6);
        }
        assert_relative_eq!(r, 6.5, max_relative = 1e-6);
    }

    #[test]
    fn symmetric_users_share_equally() {
        let rates = vec![vec![3.0, 1.0, 2.0, 2.0], vec![1.0, 3.0, 2.0, 2.0]];
        let (s, r) = optimize_schedule(&rates).unwrap();
        let u: Vec<f64> = super::super::model::user_rates(&rates, &s);
        assert_relative_eq!(u[0], u[1], max_relative = 1e-6);
        assert_relative_eq!(r, 5.0, max_relative = 1e-6);
        for n in 0..4 {
            assert!(s.a[0][n] + s.a[1][n] <= 1.0 + 1e-12);
        }
    }

    #[test]
    fn zero_rates_give_zero() {
        let rates = vec![vec![0.0; 5]; 3];
        let (s, r) = optimize_schedule(&rates).unwrap();
        assert_eq!(r, 0.0);
        for n in 0..5 {
            assert!(s.a.iter().map(|row| row[n]).sum::<f64>() <= 1.0 + 1e-12);
        }
    }
}
