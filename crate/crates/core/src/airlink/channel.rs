use std::f64::consts::LOG2_E;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::Vec2;

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

pub fn dbm_to_watts(dbm: f64) -> f64 {
    db_to_linear(dbm - 30.0)
}

/// Channel constants, all linear scale.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChannelParams {
    pub a1: f64,
    pub a2: f64,
    pub a3: f64,
    pub a4: f64,
    /// Reference channel gain at 1 m.
    pub rho0: f64,
    /// Extra NLoS attenuation.
    pub mu0: f64,
    pub alpha_l: f64,
    pub alpha_n: f64,
    /// Noise power (W).
    pub sigma2: f64,
    /// SNR gap.
    pub gamma: f64,
    /// Transmit power (W).
    pub p0: f64,
    /// Bandwidth (Hz), used only for throughput reporting.
    pub bandwidth: f64,
}

impl Default for ChannelParams {
    fn default() -> Self {
        ChannelParams {
            a1: -1.0,
            a2: 0.05,
            a3: 0.1,
            a4: 0.9,
            rho0: db_to_linear(-60.0),
            mu0: db_to_linear(-20.0),
            alpha_l: 2.5,
            alpha_n: 5.0,
            sigma2: dbm_to_watts(-110.0),
            gamma: db_to_linear(8.2),
            p0: 0.1,
            bandwidth: 1e6,
        }
    }
}

impl ChannelParams {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidParameter(m));
        if !(self.a1 < 0.0 && self.a2 > 0.0 && self.a4 > 0.0 && self.a3 >= 0.0) {
            return bad("LoS constants need A1 < 0, A2 > 0, A3 >= 0, A4 > 0".into());
        }
        if (self.a3 + self.a4 - 1.0).abs() > 1e-12 {
            return bad(format!("A3 + A4 must equal 1, got {}", self.a3 + self.a4));
        }
        if !(self.alpha_n > self.alpha_l && self.alpha_l > 0.0) {
            return bad("path-loss exponents need alpha_N > alpha_L > 0".into());
        }
        for (n, v) in [
            ("rho0", self.rho0),
            ("mu0", self.mu0),
            ("sigma2", self.sigma2),
            ("Gamma", self.gamma),
            ("P0", self.p0),
            ("B", self.bandwidth),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return bad(format!("{n} must be positive, got {v}"));
            }
        }
        Ok(())
    }

    /// Reference SNR `rho0 P0 / (sigma^2 Gamma)`.
    pub fn gamma0(&self) -> f64 {
        self.rho0 * self.p0 / (self.sigma2 * self.gamma)
    }

    /// LoS probability without range checks.
    pub fn plos_at(&self, theta_deg: f64) -> f64 {
        self.a3 + self.a4 / (1.0 + (-(self.a1 + self.a2 * theta_deg)).exp())
    }

    /// LoS and NLoS spectral efficiencies at distance `d` without checks.
    pub fn rates_at(&self, d: f64) -> (f64, f64) {
        let g0 = self.gamma0();
        let rl = (g0 * d.powf(-self.alpha_l)).ln_1p() * LOG2_E;
        let rn = (self.mu0 * g0 * d.powf(-self.alpha_n)).ln_1p() * LOG2_E;
        (rl, rn)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GroundUser {
    /// One-based index.
    pub id: usize,
    pub position: Vec2,
}

impl GroundUser {
    pub fn new(id: usize, x: f64, y: f64) -> Self {
        GroundUser {
            id,
            position: Vec2::new(x, y),
        }
    }
}

/// Elevation angle in degrees; 90 directly overhead.
pub fn elevation_deg(q: &Vec2, z: f64, gk: &Vec2) -> f64 {
    let r = (q - gk).norm();
    if r == 0.0 {
        90.0
    } else {
        (z / r).atan().to_degrees()
    }
}

pub fn plos(theta_deg: f64, p: &ChannelParams) -> Result<f64> {
    if !(0.0..=90.0).contains(&theta_deg) {
        return Err(Error::InvalidParameter(format!("elevation {theta_deg} outside [0, 90]")));
    }
    Ok(p.plos_at(theta_deg))
}

/// `(R_L, R_N)` in bits/s/Hz.
pub fn rates(d: f64, p: &ChannelParams) -> Result<(f64, f64)> {
    if !(d > 0.0) {
        return Err(Error::InvalidParameter(format!("distance must be positive, got {d}")));
    }
    Ok(p.rates_at(d))
}

fn check_altitude(z: f64) -> Result<()> {
    if !(z > 0.0) {
        return Err(Error::InvalidParameter(format!("altitude must be positive, got {z}")));
    }
    Ok(())
}

/// LoS-probability weighted rate.
pub fn expected_rate(q: &Vec2, z: f64, gk: &Vec2, p: &ChannelParams) -> Result<f64> {
    check_altitude(z)?;
    let pl = p.plos_at(elevation_deg(q, z, gk));
    let (rl, rn) = p.rates_at((z * z + (q - gk).norm_squared()).sqrt());
    Ok(pl * rl + (1.0 - pl) * rn)
}

/// `P_L R_L`, the rate with the NLoS contribution dropped.
pub fn rate_floor(q: &Vec2, z: f64, gk: &Vec2, p: &ChannelParams) -> Result<f64> {
    check_altitude(z)?;
    let pl = p.plos_at(elevation_deg(q, z, gk));
    let (rl, _) = p.rates_at((z * z + (q - gk).norm_squared()).sqrt());
    Ok(pl * rl)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn elevation_examples() {
        let g = Vec2::new(10.0, 20.0);
        assert_eq!(elevation_deg(&g, 50.0, &g), 90.0);
        assert_relative_eq!(elevation_deg(&Vec2::new(10.0, 120.0), 100.0, &g), 45.0, max_relative = 1e-14);
        let q = g + Vec2::new(100.0 * 3f64.sqrt(), 0.0);
        assert_relative_eq!(elevation_deg(&q, 100.0, &g), 30.0, max_relative = 1e-13);
    }

    #[test]
    fn plos_examples() {
        let p = ChannelParams::default();
        assert_relative_eq!(plos(20.0, &p).unwrap(), 0.55, max_relative = 1e-15);
        assert_relative_eq!(plos(90.0, &p).unwrap(), 0.1 + 0.9 / (1.0 + (-3.5f64).exp()), max_relative = 1e-15);
        assert!(plos(-1.0, &p).is_err());
        assert!(plos(90.5, &p).is_err());
        let flat = ChannelParams { a4: 1e-300, a3: 1.0, ..p };
        assert_relative_eq!(plos(45.0, &flat).unwrap(), 1.0);
    }

    #[test]
    fn gamma0_is_61_8_db() {
        let p = ChannelParams::default();
        assert_relative_eq!(10.0 * p.gamma0().log10(), 61.8, max_relative = 1e-12);
    }

    #[test]
    fn rate_examples() {
        let p = ChannelParams::default();
        let d1 = p.gamma0().powf(1.0 / p.alpha_l);
        assert_relative_eq!(rates(d1, &p).unwrap().0, 1.0, max_relative = 1e-12);
        let (rl, rn) = rates(100.0, &p).unwrap();
        assert_relative_eq!(rl, (1.0 + db_to_linear(61.8) * 1e-5).log2(), max_relative = 1e-12);
        assert!(rl > rn);
        let (rl, rn) = rates(1e12, &p).unwrap();
        assert!(rl < 1e-20 && rn < 1e-20);
        assert!(rates(0.0, &p).is_err());
    }

    #[test]
    fn expected_rate_overhead() {
        let p = ChannelParams::default();
        let g = Vec2::new(500.0, 800.0);
        let pl = p.plos_at(90.0);
        let (rl, rn) = p.rates_at(100.0);
        assert_relative_eq!(expected_rate(&g, 100.0, &g, &p).unwrap(), pl * rl + (1.0 - pl) * rn, max_relative = 1e-14);
        assert_relative_eq!(rate_floor(&g, 100.0, &g, &p).unwrap(), pl * rl, max_relative = 1e-14);
        assert!(expected_rate(&g, 0.0, &g, &p).is_err());
    }

    #[test]
    fn default_params_validate() {
        assert!(ChannelParams::default().validate().is_ok());
        let bad = ChannelParams { a3: 0.2, ..ChannelParams::default() };
        assert!(bad.validate().is_err());
    }
}
