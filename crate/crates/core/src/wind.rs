//! Stochastic horizontal wind: Weibull speed, von Mises direction and a
//! power-law altitude profile.
//!
//! Angles are degrees at every public boundary and radians internally.

use std::f64::consts::PI;
use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::Vec3;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WindStats {
    /// Weibull scale (m/s).
    pub lambda_scale: f64,
    /// Weibull shape.
    pub c_shape: f64,
    /// Mean direction (degrees).
    pub mu_dir: f64,
    /// Von Mises concentration.
    pub kappa_conc: f64,
    /// Reference altitude (m).
    pub h_ref: f64,
    /// Altitude exponent.
    pub p_exp: f64,
}

impl Default for WindStats {
    fn default() -> Self {
        WindStats {
            lambda_scale: 10.0,
            c_shape: 5.0,
            mu_dir: 180.0,
            kappa_conc: 5.0,
            h_ref: 50.0,
            p_exp: 0.5,
        }
    }
}

impl WindStats {
    /// Validates with the urban exponent band `p in [0.4, 0.6]`.
    pub fn validate(&self) -> Result<()> {
        self.validate_with(false)
    }

    /// `allow_any_p` relaxes the urban band to `0 < p <= 1`. Larger
    /// exponents are always rejected: the planner needs `(z/h)^p` concave.
    pub fn validate_with(&self, allow_any_p: bool) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidParameter(m));
        if !(self.lambda_scale > 0.0 && self.lambda_scale.is_finite()) {
            return bad(format!("lambda_scale must be positive, got {}", self.lambda_scale));
        }
        if !(self.c_shape > 0.0 && self.c_shape.is_finite()) {
            return bad(format!("c_shape must be positive, got {}", self.c_shape));
        }
        if !(self.kappa_conc >= 0.0 && self.kappa_conc.is_finite()) {
            return bad(format!("kappa_conc must be nonnegative, got {}", self.kappa_conc));
        }
        if !(self.h_ref > 0.0 && self.h_ref.is_finite()) {
            return bad(format!("h_ref must be positive, got {}", self.h_ref));
        }
        if !self.mu_dir.is_finite() {
            return bad("mu_dir must be finite".into());
        }
        let p = self.p_exp;
        if !(p > 0.0 && p <= 1.0) {
            return bad(format!("p_exp must lie in (0, 1], got {p}"));
        }
        if !allow_any_p && !(0.4..=0.6).contains(&p) {
            return bad(format!("p_exp {p} outside [0.4, 0.6]"));
        }
        Ok(())
    }

    /// Altitude scaling `(z / h_ref)^p`.
    pub fn altitude_factor(&self, z: f64) -> f64 {
        (z / self.h_ref).powf(self.p_exp)
    }

    /// Mean of the Weibull speed, `lambda * Gamma(1 + 1/c)`.
    pub fn mean_speed(&self) -> f64 {
        self.lambda_scale * gamma(1.0 + 1.0 / self.c_shape)
    }
}

/// Speed and direction at the reference altitude.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct WindSample {
    pub v_ref: f64,
    /// Degrees.
    pub beta: f64,
}

impl WindSample {
    pub const CALM: WindSample = WindSample { v_ref: 0.0, beta: 0.0 };

    /// Wind vector at altitude `z` (m). Panics-free for `z > 0`; see
    /// [`wind_vector`] for the checked variant.
    pub fn at(&self, z: f64, stats: &WindStats) -> Vec3 {
        let s = self.v_ref * stats.altitude_factor(z);
        let b = self.beta.to_radians();
        Vec3::new(s * b.cos(), s * b.sin(), 0.0)
    }

    /// Horizontal wind at the reference altitude.
    pub fn reference_vector(&self) -> Vec3 {
        let b = self.beta.to_radians();
        Vec3::new(self.v_ref * b.cos(), self.v_ref * b.sin(), 0.0)
    }
}

/// Wind samples indexed by (scenario, slot), both zero-based.
#[derive(Debug, Clone, PartialEq)]
pub struct WindTrace {
    samples: Vec<WindSample>,
    n_scenarios: usize,
    n_slots: usize,
    pub seed: u64,
}

impl WindTrace {
    /// All-calm trace; used for the windless baseline.
    pub fn calm(n_scenarios: usize, n_slots: usize) -> Self {
        WindTrace {
            samples: vec![WindSample::CALM; n_scenarios * n_slots],
            n_scenarios,
            n_slots,
            seed: 0,
        }
    }

    pub fn from_samples(n_scenarios: usize, n_slots: usize, samples: Vec<WindSample>, seed: u64) -> Result<Self> {
        if samples.len() != n_scenarios * n_slots {
            return Err(Error::InvalidParameter(format!(
                "trace needs {}x{} samples, got {}",
                n_scenarios,
                n_slots,
                samples.len()
            )));
        }
        Ok(WindTrace {
            samples,
            n_scenarios,
            n_slots,
            seed,
        })
    }

    pub fn n_scenarios(&self) -> usize {
        self.n_scenarios
    }

    pub fn n_slots(&self) -> usize {
        self.n_slots
    }

    pub fn get(&self, scenario: usize, slot: usize) -> WindSample {
        self.samples[scenario * self.n_slots + slot]
    }

    /// Samples of one slot across scenarios.
    pub fn slot(&self, slot: usize) -> impl Iterator<Item = WindSample> + '_ {
        (0..self.n_scenarios).map(move |i| self.get(i, slot))
    }

    /// Samples of one scenario across slots.
    pub fn scenario(&self, scenario: usize) -> &[WindSample] {
        &self.samples[scenario * self.n_slots..(scenario + 1) * self.n_slots]
    }

    pub fn is_calm(&self) -> bool {
        self.samples.iter().all(|s| s.v_ref == 0.0)
    }

    /// Writes `scenario,slot,v_ref_mps,beta_deg` rows (one-based indices).
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "# uav-wind wind_samples v1 seed={}", self.seed)?;
        writeln!(w, "scenario,slot,v_ref_mps,beta_deg")?;
        for i in 0..self.n_scenarios {
            for n in 0..self.n_slots {
                let s = self.get(i, n);
                writeln!(w, "{},{},{},{}", i + 1, n + 1, s.v_ref, s.beta)?;
            }
        }
        Ok(())
    }
}

/// Per-draw wind generator. The stock generator is i.i.d.; correlated
/// models can be plugged into [`sample_trace_with`].
pub trait WindGenerator {
    fn next_sample(&mut self, rng: &mut ChaCha8Rng) -> WindSample;
}

/// Independent Weibull speed and von Mises direction per draw.
#[derive(Debug, Clone, Copy)]
pub struct IidGenerator {
    pub stats: WindStats,
}

impl WindGenerator for IidGenerator {
    fn next_sample(&mut self, rng: &mut ChaCha8Rng) -> WindSample {
        let u: f64 = rng.gen();
        let v_ref = weibull_inverse_cdf(u, self.stats.lambda_scale, self.stats.c_shape);
        let beta = sample_von_mises(rng, self.stats.mu_dir.to_radians(), self.stats.kappa_conc);
        WindSample {
            v_ref,
            beta: beta.to_degrees().rem_euclid(360.0),
        }
    }
}

/// Draws an `n_scenarios x n_slots` trace of i.i.d. samples.
pub fn sample_trace(stats: &WindStats, n_slots: usize, n_scenarios: usize, seed: u64) -> Result<WindTrace> {
    stats.validate_with(true)?;
    sample_trace_with(&mut IidGenerator { stats: *stats }, n_slots, n_scenarios, seed)
}

pub fn sample_trace_with<G: WindGenerator>(
    generator: &mut G,
    n_slots: usize,
    n_scenarios: usize,
    seed: u64,
) -> Result<WindTrace> {
    if n_slots == 0 || n_scenarios == 0 {
        return Err(Error::InvalidParameter("trace dimensions must be at least 1".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let samples = (0..n_slots * n_scenarios)
        .map(|_| generator.next_sample(&mut rng))
        .collect();
    WindTrace::from_samples(n_scenarios, n_slots, samples, seed)
}

/// `lambda (-ln(1-u))^(1/c)` for `u in [0, 1)`.
pub fn weibull_inverse_cdf(u: f64, lambda: f64, c: f64) -> f64 {
    lambda * (-(-u).ln_1p()).powf(1.0 / c)
}

pub fn weibull_cdf(v: f64, stats: &WindStats) -> f64 {
    if v <= 0.0 {
        return 0.0;
    }
    -(-(v / stats.lambda_scale).powf(stats.c_shape)).exp_m1()
}

pub fn weibull_pdf(v: f64, stats: &WindStats) -> Result<f64> {
    stats.validate_with(true)?;
    if !(v > 0.0) {
        return Err(Error::InvalidParameter(format!("speed must be positive, got {v}")));
    }
    let (l, c) = (stats.lambda_scale, stats.c_shape);
    let r = v / l;
    Ok(c / l * r.powf(c - 1.0) * (-r.powf(c)).exp())
}

/// Von Mises density at `beta` degrees, per radian.
pub fn vonmises_pdf(beta: f64, stats: &WindStats) -> Result<f64> {
    stats.validate_with(true)?;
    let k = stats.kappa_conc;
    let d = (beta - stats.mu_dir).to_radians();
    // e^{k cos d} / I0(k) = e^{k (cos d - 1)} / (e^{-k} I0(k)), stable for large k.
    Ok((k * (d.cos() - 1.0)).exp() / (2.0 * PI * bessel_i0_scaled(k)))
}

/// Best-Fisher rejection sampler; returns radians.
pub fn sample_von_mises<R: Rng + ?Sized>(rng: &mut R, mu: f64, kappa: f64) -> f64 {
    if kappa < 1e-8 {
        return mu + PI * (2.0 * rng.gen::<f64>() - 1.0);
    }
    let tau = 1.0 + (1.0 + 4.0 * kappa * kappa).sqrt();
    let rho = (tau - (2.0 * tau).sqrt()) / (2.0 * kappa);
    let r = (1.0 + rho * rho) / (2.0 * rho);
    loop {
        let u1: f64 = rng.gen();
        let u2: f64 = rng.gen();
        let u3: f64 = rng.gen();
        let z = (PI * u1).cos();
        let f = (1.0 + r * z) / (r + z);
        let c = kappa * (r - f);
        if c * (2.0 - c) - u2 > 0.0 || (c / u2).ln() + 1.0 - c >= 0.0 {
            let theta = f.clamp(-1.0, 1.0).acos();
            return if u3 > 0.5 { mu + theta } else { mu - theta };
        }
    }
}

/// Modified Bessel function of the first kind, order zero.
pub fn bessel_i0(x: f64) -> f64 {
    let x = x.abs();
    if x < 15.0 {
        i0_series(x)
    } else {
        x.exp() * i0_asymptotic_scaled(x)
    }
}

/// `e^{-x} I0(x)`.
pub fn bessel_i0_scaled(x: f64) -> f64 {
    let x = x.abs();
    if x < 15.0 {
        (-x).exp() * i0_series(x)
    } else {
        i0_asymptotic_scaled(x)
    }
}

fn i0_series(x: f64) -> f64 {
    let q = 0.25 * x * x;
    let mut term = 1.0;
    let mut sum = 1.0;
    let mut k = 1.0;
    while term > sum * 1e-17 {
        term *= q / (k * k);
        sum += term;
        k += 1.0;
    }
    sum
}

fn i0_asymptotic_scaled(x: f64) -> f64 {
    let mut term = 1.0;
    let mut sum = 1.0;
    for k in 1..60 {
        let kf = k as f64;
        let next = term * (2.0 * kf - 1.0).powi(2) / (kf * 8.0 * x);
        if next >= term || next < 1e-17 {
            break;
        }
        term = next;
        sum += term;
    }
    sum / (2.0 * PI * x).sqrt()
}

/// Lanczos approximation (g = 7, n = 9), relative error about 1e-15.
pub fn gamma(x: f64) -> f64 {
    const G: [f64; 9] = [
        0.999_999_999_999_809_9,
        676.520_368_121_885_1,
        -1_259.139_216_722_402_8,
        771.323_428_777_653_1,
        -176.615_029_162_140_6,
        12.507_343_278_686_905,
        -0.138_571_095_265_720_12,
        9.984_369_578_019_572e-6,
        1.505_632_735_149_311_6e-7,
    ];
    if x < 0.5 {
        return PI / ((PI * x).sin() * gamma(1.0 - x));
    }
    let x = x - 1.0;
    let mut a = G[0];
    let t = x + 7.5;
    for (i, g) in G.iter().enumerate().skip(1) {
        a += g / (x + i as f64);
    }
    (2.0 * PI).sqrt() * t.powf(x + 0.5) * (-t).exp() * a
}

/// Checked wind vector at altitude `z`; the vertical component is zero.
pub fn wind_vector(sample: &WindSample, z: f64, stats: &WindStats) -> Result<Vec3> {
    if !(z > 0.0) {
        return Err(Error::InvalidParameter(format!("altitude must be positive, got {z}")));
    }
    Ok(sample.at(z, stats))
}
