//! CSV output of offline plans and their convergence traces.

use std::io::{BufRead, Write};

use crate::error::{Error, Result};
use crate::Vec3;

use super::model::{Scenario, Schedule, Trajectory};
use super::{OfflinePlan, OuterRecord};

pub const PLAN_HEADER: &str = "# uav-wind offline_plan v1";
pub const CONVERGENCE_HEADER: &str = "# uav-wind convergence v1";

/// Azimuth in degrees `[0, 360)` from the UAV to the user, counterclockwise from +x.
fn azimuth_deg(from: &Vec3, to: &crate::Vec2) -> f64 {
    let d = to - from.xy();
    let az = d.y.atan2(d.x).to_degrees();
    if az < 0.0 {
        az + 360.0
    } else {
        az
    }
}

/// One row per slot: `n,x,y,z,vx,vy,vz,az_user,scheduled_k`. The last slot
/// has no outgoing velocity; idle slots leave `az_user` empty and use `k = 0`.
pub fn write_plan_csv<W: Write>(mut w: W, s: &Scenario, traj: &Trajectory, sched: &Schedule) -> Result<()> {
    writeln!(w, "{PLAN_HEADER}")?;
    writeln!(w, "n,x,y,z,vx,vy,vz,az_user,scheduled_k")?;
    let v = traj.velocities();
    for (i, q) in traj.pos.iter().enumerate() {
        write!(w, "{},{},{},{}", i + 1, q.x, q.y, q.z)?;
        match v.get(i) {
            Some(v) => write!(w, ",{},{},{}", v.x, v.y, v.z)?,
            None => write!(w, ",,,")?,
        }
        match sched.assigned(i) {
            Some(k) => writeln!(w, ",{},{}", azimuth_deg(q, &s.users[k].position), k + 1)?,
            None => writeln!(w, ",,0")?,
        }
    }
    Ok(())
}

pub fn write_convergence_csv<W: Write>(mut w: W, trace: &[OuterRecord]) -> Result<()> {
    writeln!(w, "{CONVERGENCE_HEADER}")?;
    writeln!(w, "outer_iter,objective,R_min,energy")?;
    for r in trace {
        writeln!(w, "{},{},{},{}", r.iter, r.objective, r.r_min, r.energy)?;
    }
    Ok(())
}

pub fn write_plan<W: Write>(w: W, s: &Scenario, plan: &OfflinePlan) -> Result<()> {
    write_plan_csv(w, s, &plan.trajectory, &plan.schedule)
}

/// Reads a plan written by [`write_plan_csv`] back into a trajectory and a
/// binary schedule for `k` users.
pub fn read_plan_csv<R: BufRead>(r: R, k: usize, delta: f64) -> Result<(Trajectory, Schedule)> {
    let mut pos = Vec::new();
    let mut assigned = Vec::new();
    let mut saw_header = false;
    for (i, line) in r.lines().enumerate() {
        let line = line?;
        let lineno = i + 1;
        let t = line.trim();
        if t.is_empty() || t.starts_with('#') {
            continue;
        }
        if !saw_header {
            if t != "n,x,y,z,vx,vy,vz,az_user,scheduled_k" {
                return Err(Error::Parse {
                    line: lineno,
                    message: format!("unexpected plan header `{t}`"),
                });
            }
            saw_header = true;
            continue;
        }
        let f: Vec<&str> = t.split(',').collect();
        if f.len() != 9 {
            return Err(Error::Parse {
                line: lineno,
                message: format!("expected 9 fields, found {}", f.len()),
            });
        }
        let num = |s: &str| -> Result<f64> {
            s.parse::<f64>().map_err(|e| Error::Parse {
                line: lineno,
                message: format!("bad number `{s}`: {e}"),
            })
        };
        pos.push(Vec3::new(num(f[1])?, num(f[2])?, num(f[3])?));
        let kk: usize = f[8].parse().map_err(|e| Error::Parse {
            line: lineno,
            message: format!("bad user index `{}`: {e}", f[8]),
        })?;
        if kk > k {
            return Err(Error::Parse {
                line: lineno,
                message: format!("user {kk} exceeds K = {k}"),
            });
        }
        assigned.push(kk);
    }
    if pos.len() < 3 {
        return Err(Error::Parse {
            line: 0,
            message: "plan has fewer than 3 slots".into(),
        });
    }
    let mut a = vec![vec![0.0; pos.len()]; k];
    for (n, &kk) in assigned.iter().enumerate() {
        if kk > 0 {
            a[kk - 1][n] = 1.0;
        }
    }
    Ok((Trajectory { pos, delta }, Schedule { a }))
}
