//! Experiment configuration in TOML. Sections are `scenario`, `wind`,
//! `aero`, `channel`, `online`, `city` and `experiment`; every key is
//! optional and defaults to the reference scenario.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::airlink::{db_to_linear, dbm_to_watts, ChannelParams, CityGenParams, GroundUser};
use crate::error::{Error, Result};
use crate::online::OnlineConfig;
use crate::planner::Scenario;
use crate::propulsion::AeroParams;
use crate::wind::WindStats;
use crate::Vec3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioSection {
    #[serde(rename = "T0")]
    pub t0: f64,
    #[serde(rename = "Delta")]
    pub delta: f64,
    #[serde(rename = "Q_I")]
    pub q_i: [f64; 3],
    #[serde(rename = "Q_F")]
    pub q_f: [f64; 3],
    #[serde(rename = "V_H_max")]
    pub v_h_max: f64,
    #[serde(rename = "V_V_max")]
    pub v_v_max: f64,
    #[serde(rename = "H_min")]
    pub h_min: f64,
    #[serde(rename = "H_max")]
    pub h_max: f64,
    #[serde(rename = "S_mcsaa")]
    pub s_mcsaa: usize,
    /// Ground users `[x, y]` (m), numbered from 1 in order.
    pub users: Vec<[f64; 2]>,
}

impl Default for ScenarioSection {
    fn default() -> Self {
        let s = Scenario::default();
        ScenarioSection {
            t0: s.t0,
            delta: s.delta,
            q_i: s.q_i.into(),
            q_f: s.q_f.into(),
            v_h_max: s.v_h_max,
            v_v_max: s.v_v_max,
            h_min: s.h_min,
            h_max: s.h_max,
            s_mcsaa: s.s_mcsaa,
            users: s.users.iter().map(|u| [u.position.x, u.position.y]).collect(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WindSection {
    /// Weibull scale (m/s).
    pub lambda: f64,
    /// Weibull shape.
    pub c: f64,
    /// Mean direction (deg).
    pub mu: f64,
    pub kappa: f64,
    /// Reference altitude (m).
    pub h_ref: f64,
    pub p: f64,
    /// Accept exponents outside the urban band [0.4, 0.6] (still p <= 1).
    pub allow_any_p: bool,
}

impl Default for WindSection {
    fn default() -> Self {
        let w = WindStats::default();
        WindSection {
            lambda: w.lambda_scale,
            c: w.c_shape,
            mu: w.mu_dir,
            kappa: w.kappa_conc,
            h_ref: w.h_ref,
            p: w.p_exp,
            allow_any_p: false,
        }
    }
}

impl WindSection {
    pub fn stats(&self) -> WindStats {
        WindStats {
            lambda_scale: self.lambda,
            c_shape: self.c,
            mu_dir: self.mu,
            kappa_conc: self.kappa,
            h_ref: self.h_ref,
            p_exp: self.p,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AeroSection {
    /// kg
    pub m: f64,
    /// m/s^2
    pub g: f64,
    /// kg/m^3
    pub rho: f64,
    /// Rotor disc area (m^2).
    #[serde(rename = "A")]
    pub a: f64,
    pub s: f64,
    pub delta: f64,
    #[serde(rename = "c_T")]
    pub c_t: f64,
    pub c_f: f64,
    /// m^2
    #[serde(rename = "S_FP")]
    pub s_fp: f64,
}

impl Default for AeroSection {
    fn default() -> Self {
        let a = AeroParams::default();
        AeroSection {
            m: a.m,
            g: a.g_mag,
            rho: a.rho,
            a: a.a_disc,
            s: a.s_solidity,
            delta: a.delta,
            c_t: a.c_t,
            c_f: a.c_f,
            s_fp: a.s_fp,
        }
    }
}

impl AeroSection {
    pub fn params(&self) -> AeroParams {
        AeroParams {
            m: self.m,
            g_mag: self.g,
            rho: self.rho,
            a_disc: self.a,
            s_solidity: self.s,
            delta: self.delta,
            c_t: self.c_t,
            c_f: self.c_f,
            s_fp: self.s_fp,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ChannelSection {
    #[serde(rename = "A1")]
    pub a1: f64,
    #[serde(rename = "A2")]
    pub a2: f64,
    #[serde(rename = "A3")]
    pub a3: f64,
    #[serde(rename = "A4")]
    pub a4: f64,
    /// Channel gain at 1 m (dB).
    pub rho0_db: f64,
    /// Extra NLoS attenuation (dB).
    pub mu0_db: f64,
    pub alpha_l: f64,
    pub alpha_n: f64,
    /// Noise power (dBm).
    pub sigma2_dbm: f64,
    /// SNR gap (dB).
    pub gamma_db: f64,
    /// Transmit power (W).
    #[serde(rename = "P0")]
    pub p0: f64,
    /// Bandwidth (Hz).
    #[serde(rename = "B")]
    pub b: f64,
}

impl Default for ChannelSection {
    fn default() -> Self {
        let c = ChannelParams::default();
        ChannelSection {
            a1: c.a1,
            a2: c.a2,
            a3: c.a3,
            a4: c.a4,
            rho0_db: -60.0,
            mu0_db: -20.0,
            alpha_l: c.alpha_l,
            alpha_n: c.alpha_n,
            sigma2_dbm: -110.0,
            gamma_db: 8.2,
            p0: c.p0,
            b: c.bandwidth,
        }
    }
}

impl ChannelSection {
    pub fn params(&self) -> ChannelParams {
        ChannelParams {
            a1: self.a1,
            a2: self.a2,
            a3: self.a3,
            a4: self.a4,
            rho0: db_to_linear(self.rho0_db),
            mu0: db_to_linear(self.mu0_db),
            alpha_l: self.alpha_l,
            alpha_n: self.alpha_n,
            sigma2: dbm_to_watts(self.sigma2_dbm),
            gamma: db_to_linear(self.gamma_db),
            p0: self.p0,
            bandwidth: self.b,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OnlineSection {
    /// m
    #[serde(rename = "eps_Q")]
    pub eps_q: f64,
    /// m/s
    pub eps_v: f64,
    pub eps3: f64,
    pub sca_cap: usize,
    pub safety_limits: bool,
}

impl Default for OnlineSection {
    fn default() -> Self {
        let o = OnlineConfig::default();
        OnlineSection {
            eps_q: o.eps_q,
            eps_v: o.eps_v,
            eps3: o.eps3,
            sca_cap: o.sca_cap,
            safety_limits: o.safety_limits,
        }
    }
}

impl OnlineSection {
    pub fn config(&self) -> OnlineConfig {
        OnlineConfig {
            eps_q: self.eps_q,
            eps_v: self.eps_v,
            eps3: self.eps3,
            sca_cap: self.sca_cap,
            safety_limits: self.safety_limits,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CitySection {
    pub built_ratio: f64,
    pub density_per_km2: f64,
    /// m
    pub height_scale: f64,
}

impl Default for CitySection {
    fn default() -> Self {
        let g = CityGenParams::default();
        CitySection {
            built_ratio: g.built_ratio,
            density_per_km2: g.density_per_km2,
            height_scale: g.height_scale,
        }
    }
}

impl CitySection {
    pub fn params(&self) -> CityGenParams {
        CityGenParams {
            built_ratio: self.built_ratio,
            density_per_km2: self.density_per_km2,
            height_scale: self.height_scale,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scheme {
    Windless,
    Offline,
    Oboa,
}

impl Scheme {
    pub fn name(self) -> &'static str {
        match self {
            Scheme::Windless => "windless",
            Scheme::Offline => "offline",
            Scheme::Oboa => "oboa",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SweepAxis {
    #[serde(rename = "mu")]
    Mu,
    #[serde(rename = "lambda")]
    Lambda,
    #[serde(rename = "kappa")]
    Kappa,
    #[serde(rename = "c")]
    C,
    #[serde(rename = "eps_Q")]
    EpsQ,
}

impl SweepAxis {
    pub fn name(self) -> &'static str {
        match self {
            SweepAxis::Mu => "mu",
            SweepAxis::Lambda => "lambda",
            SweepAxis::Kappa => "kappa",
            SweepAxis::C => "c",
            SweepAxis::EpsQ => "eps_Q",
        }
    }
}

/// How the rates of a flown trajectory are scored.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RateModel {
    /// Line of sight decided by the generated city.
    City,
    /// The statistical rate the planner optimizes.
    Expected,
}

/// Wind used when flying the evaluation runs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EvalWind {
    /// Fresh draws from the configured statistics.
    Stochastic,
    /// No wind at all.
    Calm,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentSection {
    pub schemes: Vec<Scheme>,
    pub sweep_axis: Option<SweepAxis>,
    pub sweep_values: Vec<f64>,
    /// Evaluation repeats per sweep value.
    pub repeats: usize,
    /// Rayon worker threads; 0 uses every core.
    pub workers: usize,
    /// Root of every evaluation seed.
    pub seed: u64,
    /// Seed of the planning wind samples.
    pub plan_seed: u64,
    pub eval_wind: EvalWind,
    pub rate_model: RateModel,
    /// Keep and write one flight log per run.
    pub flight_logs: bool,
}

impl Default for ExperimentSection {
    fn default() -> Self {
        ExperimentSection {
            schemes: vec![Scheme::Windless, Scheme::Offline, Scheme::Oboa],
            sweep_axis: None,
            sweep_values: Vec::new(),
            repeats: 300,
            workers: 0,
            seed: 1,
            plan_seed: 7,
            eval_wind: EvalWind::Stochastic,
            rate_model: RateModel::City,
            flight_logs: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub scenario: ScenarioSection,
    pub wind: WindSection,
    pub aero: AeroSection,
    pub channel: ChannelSection,
    pub online: OnlineSection,
    pub city: CitySection,
    pub experiment: ExperimentSection,
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn scenario(&self) -> Scenario {
        let sc = &self.scenario;
        Scenario {
            t0: sc.t0,
            delta: sc.delta,
            q_i: Vec3::from(sc.q_i),
            q_f: Vec3::from(sc.q_f),
            v_h_max: sc.v_h_max,
            v_v_max: sc.v_v_max,
            h_min: sc.h_min,
            h_max: sc.h_max,
            users: sc
                .users
                .iter()
                .enumerate()
                .map(|(i, u)| GroundUser::new(i + 1, u[0], u[1]))
                .collect(),
            wind: self.wind.stats(),
            aero: self.aero.params(),
            channel: self.channel.params(),
            s_mcsaa: sc.s_mcsaa,
        }
    }

    /// Scenario and online settings at one sweep value.
    pub fn at(&self, value: Option<f64>) -> (Scenario, OnlineConfig) {
        let mut s = self.scenario();
        let mut o = self.online.config();
        if let (Some(axis), Some(v)) = (self.experiment.sweep_axis, value) {
            match axis {
                SweepAxis::Mu => s.wind.mu_dir = v,
                SweepAxis::Lambda => s.wind.lambda_scale = v,
                SweepAxis::Kappa => s.wind.kappa_conc = v,
                SweepAxis::C => s.wind.c_shape = v,
                SweepAxis::EpsQ => o.eps_q = v,
            }
        }
        (s, o)
    }

    /// Sweep points; a single `None` when no axis is configured.
    pub fn sweep_points(&self) -> Vec<Option<f64>> {
        match self.experiment.sweep_axis {
            Some(_) => self.experiment.sweep_values.iter().map(|&v| Some(v)).collect(),
            None => vec![None],
        }
    }

    pub fn validate(&self) -> Result<()> {
        let cfg_err = |e: Error| Error::Config(e.to_string());
        let e = &self.experiment;
        if e.schemes.is_empty() {
            return Err(Error::Config("experiment.schemes must not be empty".into()));
        }
        if e.repeats == 0 {
            return Err(Error::Config("experiment.repeats must be at least 1".into()));
        }
        if e.sweep_axis.is_some() && e.sweep_values.is_empty() {
            return Err(Error::Config("experiment.sweep_values must not be empty when sweep_axis is set".into()));
        }
        if e.sweep_axis.is_none() && !e.sweep_values.is_empty() {
            return Err(Error::Config("experiment.sweep_values given without sweep_axis".into()));
        }
        if e.seed > i64::MAX as u64 || e.plan_seed > i64::MAX as u64 {
            return Err(Error::Config("experiment.seed and plan_seed must not exceed 2^63 - 1".into()));
        }
        self.wind.stats().validate_with(self.wind.allow_any_p).map_err(cfg_err)?;
        for v in self.sweep_points() {
            let (s, o) = self.at(v);
            s.validate().map_err(cfg_err)?;
            s.wind.validate_with(self.wind.allow_any_p).map_err(cfg_err)?;
            o.validate().map_err(cfg_err)?;
        }
        let c = self.city.params();
        if !(c.built_ratio > 0.0 && c.built_ratio < 1.0 && c.density_per_km2 > 0.0 && c.height_scale > 0.0) {
            return Err(Error::Config("city parameters must be positive with built_ratio < 1".into()));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_is_reference_scenario() {
        let cfg = ExperimentConfig::from_toml_str("").unwrap();
        assert_eq!(cfg.scenario(), Scenario::default());
        assert_eq!(cfg.online.config(), OnlineConfig::default());
    }

    #[test]
    fn round_trip() {
        let mut cfg = ExperimentConfig::default();
        cfg.experiment.sweep_axis = Some(SweepAxis::Kappa);
        cfg.experiment.sweep_values = vec![1.0, 3.0];
        let text = cfg.to_toml_string().unwrap();
        assert_eq!(ExperimentConfig::from_toml_str(&text).unwrap(), cfg);
    }

    #[test]
    fn dotted_sections_and_sweeps() {
        let text = r#"
            [wind]
            lambda = 14.0
            mu = 270.0
            [online]
            eps_Q = 50.0
            [experiment]
            schemes = ["offline", "oboa"]
            sweep_axis = "eps_Q"
            sweep_values = [0.0, 100.0]
            repeats = 3
        "#;
        let cfg = ExperimentConfig::from_toml_str(text).unwrap();
        assert_eq!(cfg.scenario().wind.lambda_scale, 14.0);
        let (_, o) = cfg.at(Some(100.0));
        assert_eq!(o.eps_q, 100.0);
        assert_eq!(cfg.sweep_points().len(), 2);
    }

    #[test]
    fn config_errors() {
        assert!(matches!(
            ExperimentConfig::from_toml_str("[wind]\nbogus = 1"),
            Err(Error::Config(_))
        ));
        assert!(ExperimentConfig::from_toml_str("[wind]\np = 0.9").is_err());
        assert!(ExperimentConfig::from_toml_str("[wind]\np = 0.9\nallow_any_p = true").is_ok());
        assert!(ExperimentConfig::from_toml_str("[experiment]\nrepeats = 0").is_err());
        assert!(ExperimentConfig::from_toml_str("[experiment]\nschemes = []").is_err());
        assert!(ExperimentConfig::from_toml_str("[scenario]\nV_H_max = 1.0").is_err());
    }
}
