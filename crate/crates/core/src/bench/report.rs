//! Report files: `ee_summary.csv`, `runs.csv`, `comparison.csv`,
//! `manifest.toml` and optional per-run flight logs.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::Serialize;

use crate::error::{Error, Result};

use super::config::ExperimentConfig;
use super::experiment::{Comparison, EEReport, RunRecord};

pub const SUMMARY_HEADER: &str = "# uav-wind ee_summary v1";
pub const RUNS_HEADER: &str = "# uav-wind runs v1";
pub const COMPARISON_HEADER: &str = "# uav-wind comparison v1";

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn axis_name(cfg: &ExperimentConfig) -> &'static str {
    cfg.experiment.sweep_axis.map_or("none", |a| a.name())
}

pub fn write_summary_csv<W: Write>(mut w: W, rep: &EEReport) -> Result<()> {
    writeln!(w, "{SUMMARY_HEADER}")?;
    writeln!(
        w,
        "sweep_axis,sweep_value,scheme,runs,failed,complete,ee_mean,ee_std,ee_bpj_mean,ee_bpj_std,\
         energy_mean_j,energy_std_j,throughput_mean_bits,throughput_std_bits,altitude_mean_m,altitude_std_m,\
         angdev_mean_deg,angdev_std_deg,angdev_median_deg,fallbacks,plan_objective"
    )?;
    let axis = axis_name(&rep.config);
    for r in &rep.summary {
        writeln!(
            w,
            "{axis},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
            opt(r.sweep_value),
            r.scheme.name(),
            r.runs,
            r.failed,
            u8::from(r.complete()),
            r.ee.mean,
            r.ee.std,
            r.ee_bits_per_joule.mean,
            r.ee_bits_per_joule.std,
            r.energy.mean,
            r.energy.std,
            r.throughput_bits.mean,
            r.throughput_bits.std,
            r.mean_altitude.mean,
            r.mean_altitude.std,
            r.angular_deviation.mean,
            r.angular_deviation.std,
            r.median_angular_deviation,
            r.fallbacks,
            r.plan_objective
        )?;
    }
    Ok(())
}

pub fn write_runs_csv<W: Write>(mut w: W, rep: &EEReport) -> Result<()> {
    writeln!(w, "{RUNS_HEADER}")?;
    writeln!(
        w,
        "sweep_value,scheme,rep,wind_seed,city_seed,status,ee,ee_bpj,energy_j,R_min,throughput_bits,\
         altitude_mean_m,angdev_mean_deg,angdev_median_deg,fallbacks,error"
    )?;
    for r in &rep.records {
        write!(
            w,
            "{},{},{},{},{}",
            opt(r.sweep_value),
            r.scheme.name(),
            r.seeds.rep,
            r.seeds.wind,
            r.seeds.city
        )?;
        match &r.outcome {
            Ok(m) => writeln!(
                w,
                ",ok,{},{},{},{},{},{},{},{},{},",
                m.ee,
                m.ee_bits_per_joule,
                m.energy,
                m.r_min,
                m.throughput_bits,
                m.mean_altitude,
                m.mean_angular_deviation,
                m.median_angular_deviation,
                m.fallbacks
            )?,
            Err(e) => writeln!(w, ",failed,,,,,,,,,,\"{}\"", e.replace('"', "'"))?,
        }
    }
    Ok(())
}

pub fn write_comparison_csv<W: Write>(mut w: W, rep: &EEReport, cmp: &[Comparison]) -> Result<()> {
    let schemes = &rep.config.experiment.schemes;
    writeln!(w, "{COMPARISON_HEADER}")?;
    writeln!(w, "sweep_value,scheme,rank,vs_scheme,frac_ge")?;
    for c in cmp {
        for &(slot, scheme, rank) in &c.ranking {
            let others: Vec<_> = c.pairs.iter().filter(|p| p.0 == slot).collect();
            if others.is_empty() {
                writeln!(w, "{},{},{rank},,", opt(c.sweep_value), scheme.name())?;
            }
            for &&(_, b, f) in &others {
                writeln!(w, "{},{},{rank},{},{f}", opt(c.sweep_value), scheme.name(), schemes[b].name())?;
            }
        }
        if let Some(f) = c.chain {
            writeln!(w, "{},oboa>=offline>=windless,,,{f}", opt(c.sweep_value))?;
        }
    }
    Ok(())
}

#[derive(Serialize)]
struct ManifestRun {
    rep: usize,
    // Decimal strings: derived seeds use all 64 bits and TOML integers are signed.
    wind_seed: String,
    city_seed: String,
}

#[derive(Serialize)]
struct Manifest<'a> {
    format: &'static str,
    /// Every sweep point and scheme reuses the per-repeat seeds below.
    plan_seed: u64,
    root_seed: u64,
    runs: Vec<ManifestRun>,
    files: Vec<String>,
    config: &'a ExperimentConfig,
}

fn log_name(r: &RunRecord) -> String {
    format!("flight_p{}_{}_r{}.csv", r.point, r.scheme.name(), r.seeds.rep)
}

/// Writes every report file under `dir`, creating it if needed. Returns the
/// file names written, relative to `dir`.
pub fn write_report(dir: &Path, rep: &EEReport, cmp: &[Comparison]) -> Result<Vec<String>> {
    fs::create_dir_all(dir).map_err(|e| Error::Config(format!("cannot create {}: {e}", dir.display())))?;
    let create = |name: &str| -> Result<BufWriter<File>> { Ok(BufWriter::new(File::create(dir.join(name))?)) };
    let mut files = vec!["ee_summary.csv".to_string(), "runs.csv".into(), "comparison.csv".into()];
    write_summary_csv(create("ee_summary.csv")?, rep)?;
    write_runs_csv(create("runs.csv")?, rep)?;
    write_comparison_csv(create("comparison.csv")?, rep, cmp)?;
    if rep.records.iter().any(|r| r.log.is_some()) {
        fs::create_dir_all(dir.join("logs"))?;
        for r in &rep.records {
            if let Some(log) = &r.log {
                let name = format!("logs/{}", log_name(r));
                log.write_csv(create(&name)?)?;
                files.push(name);
            }
        }
    }
    let manifest = Manifest {
        format: "uav-wind manifest v1",
        plan_seed: rep.config.experiment.plan_seed,
        root_seed: rep.config.experiment.seed,
        runs: rep
            .seeds
            .iter()
            .map(|s| ManifestRun {
                rep: s.rep,
                wind_seed: s.wind.to_string(),
                city_seed: s.city.to_string(),
            })
            .collect(),
        files: files.clone(),
        config: &rep.config,
    };
    let text = toml::to_string(&manifest).map_err(|e| Error::Config(e.to_string()))?;
    fs::write(dir.join("manifest.toml"), text)?;
    files.push("manifest.toml".into());
    Ok(files)
}
