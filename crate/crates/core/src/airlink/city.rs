use std::io::{BufRead, Write};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::channel::ChannelParams;
use crate::error::{Error, Result};
use crate::Vec2;

/// Axis-aligned area in the horizontal plane (m).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Rect {
    pub x0: f64,
    pub y0: f64,
    pub x1: f64,
    pub y1: f64,
}

impl Rect {
    pub fn new(x0: f64, y0: f64, x1: f64, y1: f64) -> Self {
        Rect { x0, y0, x1, y1 }
    }

    pub fn width(&self) -> f64 {
        self.x1 - self.x0
    }

    pub fn height(&self) -> f64 {
        self.y1 - self.y0
    }

    /// Closed containment.
    pub fn contains(&self, p: &Vec2) -> bool {
        p.x >= self.x0 && p.x <= self.x1 && p.y >= self.y0 && p.y <= self.y1
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Building {
    pub footprint: Rect,
    pub height: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CityGenParams {
    /// Fraction of land covered by buildings.
    pub built_ratio: f64,
    /// Buildings per square kilometre.
    pub density_per_km2: f64,
    /// Rayleigh scale of building heights (m).
    pub height_scale: f64,
}

// Empirical LoS frequency of these cities follows `plos_at` to within a
// few percent above 20 degrees elevation.
impl Default for CityGenParams {
    fn default() -> Self {
        CityGenParams {
            built_ratio: 0.2,
            density_per_km2: 200.0,
            height_scale: 12.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CityModel {
    pub buildings: Vec<Building>,
    pub gen: CityGenParams,
    pub seed: u64,
}

impl CityModel {
    pub fn empty() -> Self {
        CityModel {
            buildings: Vec::new(),
            gen: CityGenParams {
                built_ratio: 0.0,
                density_per_km2: 0.0,
                height_scale: 0.0,
            },
            seed: 0,
        }
    }

    pub fn write_text<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "# uav-wind city v1")?;
        writeln!(
            w,
            "# seed={} built_ratio={} density_per_km2={} height_scale={}",
            self.seed, self.gen.built_ratio, self.gen.density_per_km2, self.gen.height_scale
        )?;
        writeln!(w, "x0,y0,x1,y1,height")?;
        for b in &self.buildings {
            let f = b.footprint;
            writeln!(w, "{},{},{},{},{}", f.x0, f.y0, f.x1, f.y1, b.height)?;
        }
        Ok(())
    }

    pub fn read_text<R: BufRead>(r: R) -> Result<Self> {
        let mut city = CityModel::empty();
        for (i, line) in r.lines().enumerate() {
            let line = line?;
            let t = line.trim();
            let perr = |message: String| Error::Parse { line: i + 1, message };
            if let Some(meta) = t.strip_prefix('#') {
                for kv in meta.split_whitespace() {
                    let Some((k, v)) = kv.split_once('=') else { continue };
                    let num = || v.parse::<f64>().map_err(|e| perr(format!("{k}: {e}")));
                    match k {
                        "seed" => city.seed = v.parse().map_err(|e| perr(format!("seed: {e}")))?,
                        "built_ratio" => city.gen.built_ratio = num()?,
                        "density_per_km2" => city.gen.density_per_km2 = num()?,
                        "height_scale" => city.gen.height_scale = num()?,
                        _ => {}
                    }
                }
                continue;
            }
            if t.is_empty() || t.starts_with("x0") {
                continue;
            }
            let vals = t
                .split(',')
                .map(|f| f.trim().parse::<f64>())
                .collect::<std::result::Result<Vec<_>, _>>()
                .map_err(|e| perr(e.to_string()))?;
            if vals.len() != 5 {
                return Err(perr(format!("expected 5 columns, found {}", vals.len())));
            }
            if !(vals[2] > vals[0] && vals[3] > vals[1] && vals[4] > 0.0) {
                return Err(perr("degenerate building".into()));
            }
            city.buildings.push(Building {
                footprint: Rect::new(vals[0], vals[1], vals[2], vals[3]),
                height: vals[4],
            });
        }
        Ok(city)
    }
}

/// Grid-with-jitter city: `round(density * area)` square footprints of side
/// `sqrt(built_ratio / density)` dropped into distinct grid cells, with
/// Rayleigh heights. Footprints covering any of `keep_clear` are removed.
pub fn generate_city(gen: &CityGenParams, bounds: &Rect, keep_clear: &[Vec2], seed: u64) -> Result<CityModel> {
    let area_km2 = bounds.width() * bounds.height() / 1e6;
    if !(bounds.width() > 0.0 && bounds.height() > 0.0) {
        return Err(Error::InvalidParameter("city bounds must have positive area".into()));
    }
    if !(gen.density_per_km2 >= 0.0 && gen.built_ratio >= 0.0 && gen.height_scale >= 0.0) {
        return Err(Error::InvalidParameter("city densities must be nonnegative".into()));
    }
    let n = (gen.density_per_km2 * area_km2).round() as usize;
    let mut city = CityModel {
        buildings: Vec::new(),
        gen: *gen,
        seed,
    };
    if n == 0 || gen.built_ratio == 0.0 {
        return Ok(city);
    }
    if gen.built_ratio >= 1.0 {
        return Err(Error::InvalidParameter("built_ratio must be below 1".into()));
    }
    let side = (gen.built_ratio / gen.density_per_km2).sqrt() * 1000.0;
    let cols = ((n as f64 * bounds.width() / bounds.height()).sqrt().ceil() as usize).max(1);
    let rows = n.div_ceil(cols);
    let (cw, ch) = (bounds.width() / cols as f64, bounds.height() / rows as f64);
    if side > cw || side > ch {
        return Err(Error::InvalidParameter(format!(
            "footprint side {side:.1} m does not fit grid cell {cw:.1} x {ch:.1} m"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut cells: Vec<usize> = (0..rows * cols).collect();
    cells.shuffle(&mut rng);
    cells.truncate(n);
    cells.sort_unstable();
    for c in cells {
        let (r, k) = (c / cols, c % cols);
        let x0 = bounds.x0 + k as f64 * cw + rng.gen::<f64>() * (cw - side);
        let y0 = bounds.y0 + r as f64 * ch + rng.gen::<f64>() * (ch - side);
        let u: f64 = rng.gen();
        let height = (gen.height_scale * (-2.0 * (-u).ln_1p()).sqrt()).max(1.0);
        let footprint = Rect::new(x0, y0, x0 + side, y0 + side);
        if keep_clear.iter().any(|g| footprint.contains(g)) {
            continue;
        }
        city.buildings.push(Building { footprint, height });
    }
    Ok(city)
}

/// Slab test of the closed segment `a -> b` against a closed box.
fn segment_hits_box(a: [f64; 3], b: [f64; 3], lo: [f64; 3], hi: [f64; 3]) -> bool {
    let (mut t0, mut t1) = (0.0f64, 1.0f64);
    for i in 0..3 {
        let d = b[i] - a[i];
        if d == 0.0 {
            if a[i] < lo[i] || a[i] > hi[i] {
                return false;
            }
            continue;
        }
        let (mut ta, mut tb) = ((lo[i] - a[i]) / d, (hi[i] - a[i]) / d);
        if ta > tb {
            std::mem::swap(&mut ta, &mut tb);
        }
        t0 = t0.max(ta);
        t1 = t1.min(tb);
        if t0 > t1 {
            return false;
        }
    }
    true
}

/// True if the straight link from the UAV at `(q, z)` to the ground user at
/// `gk` touches any building.
pub fn los_blocked(q: &Vec2, z: f64, gk: &Vec2, city: &CityModel) -> bool {
    let a = [q.x, q.y, z];
    let b = [gk.x, gk.y, 0.0];
    let (bx0, bx1) = (q.x.min(gk.x), q.x.max(gk.x));
    let (by0, by1) = (q.y.min(gk.y), q.y.max(gk.y));
    city.buildings.iter().any(|bld| {
        let f = &bld.footprint;
        if f.x1 < bx0 || f.x0 > bx1 || f.y1 < by0 || f.y0 > by1 {
            return false;
        }
        segment_hits_box(a, b, [f.x0, f.y0, 0.0], [f.x1, f.y1, bld.height])
    })
}

/// `R_L` if the link is clear, else `R_N`.
pub fn realized_rate(q: &Vec2, z: f64, gk: &Vec2, city: &CityModel, p: &ChannelParams) -> Result<(f64, bool)> {
    if !(z > 0.0) {
        return Err(Error::InvalidParameter(format!("altitude must be positive, got {z}")));
    }
    let d = (z * z + (q - gk).norm_squared()).sqrt();
    let (rl, rn) = p.rates_at(d);
    let blocked = los_blocked(q, z, gk, city);
    Ok((if blocked { rn } else { rl }, !blocked))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit_km() -> Rect {
        Rect::new(0.0, 0.0, 1000.0, 1000.0)
    }

    fn tower(x0: f64, y0: f64, x1: f64, y1: f64, h: f64) -> CityModel {
        CityModel {
            buildings: vec![Building {
                footprint: Rect::new(x0, y0, x1, y1),
                height: h,
            }],
            ..CityModel::empty()
        }
    }

    #[test]
    fn zero_density_is_empty() {
        let g = CityGenParams {
            density_per_km2: 0.0,
            ..Default::default()
        };
        assert!(generate_city(&g, &unit_km(), &[], 1).unwrap().buildings.is_empty());
    }

    #[test]
    fn generation_is_deterministic_and_counts_match() {
        let users = [Vec2::new(100.0, 300.0), Vec2::new(500.0, 800.0)];
        let a = generate_city(&CityGenParams::default(), &unit_km(), &users, 5).unwrap();
        let b = generate_city(&CityGenParams::default(), &unit_km(), &users, 5).unwrap();
        assert_eq!(a, b);
        assert!((185..=200).contains(&a.buildings.len()), "{}", a.buildings.len());
        for bld in &a.buildings {
            assert!(users.iter().all(|u| !bld.footprint.contains(u)));
            assert!(bld.height > 0.0);
        }
    }

    #[test]
    fn footprints_do_not_overlap() {
        let c = generate_city(&CityGenParams::default(), &unit_km(), &[], 11).unwrap();
        for (i, a) in c.buildings.iter().enumerate() {
            for b in &c.buildings[i + 1..] {
                let (fa, fb) = (a.footprint, b.footprint);
                let overlap = fa.x0 < fb.x1 && fb.x0 < fa.x1 && fa.y0 < fb.y1 && fb.y0 < fa.y1;
                assert!(!overlap);
            }
        }
    }

    #[test]
    fn oversized_footprints_are_rejected() {
        let g = CityGenParams {
            built_ratio: 0.99,
            density_per_km2: 300.0,
            height_scale: 10.0,
        };
        assert!(generate_city(&g, &unit_km(), &[], 1).is_err());
    }

    #[test]
    fn blockage_geometry() {
        let q = Vec2::new(0.0, 0.0);
        let g = Vec2::new(100.0, 0.0);
        assert!(!los_blocked(&q, 100.0, &g, &CityModel::empty()));
        // Ray height at x = 50 is 50 m.
        assert!(los_blocked(&q, 100.0, &g, &tower(45.0, -5.0, 55.0, 5.0, 60.0)));
        assert!(!los_blocked(&q, 100.0, &g, &tower(45.0, -5.0, 55.0, 5.0, 40.0)));
        // Touching the roof edge counts as blocked.
        assert!(los_blocked(&q, 100.0, &g, &tower(50.0, -5.0, 60.0, 5.0, 50.0)));
        assert!(!los_blocked(&g, 80.0, &g, &tower(110.0, -5.0, 120.0, 5.0, 500.0)));
    }

    #[test]
    fn walled_user_gets_nlos_rate() {
        let p = ChannelParams::default();
        let g = Vec2::new(0.0, 0.0);
        let q = Vec2::new(100.0, 0.0);
        let walls = CityModel {
            buildings: vec![
                Building { footprint: Rect::new(5.0, -10.0, 6.0, 10.0), height: 500.0 },
                Building { footprint: Rect::new(-6.0, -10.0, -5.0, 10.0), height: 500.0 },
                Building { footprint: Rect::new(-10.0, 5.0, 10.0, 6.0), height: 500.0 },
                Building { footprint: Rect::new(-10.0, -6.0, 10.0, -5.0), height: 500.0 },
            ],
            ..CityModel::empty()
        };
        let (rl, rn) = p.rates_at((100.0f64.powi(2) * 2.0).sqrt());
        assert_eq!(realized_rate(&q, 100.0, &g, &walls, &p).unwrap(), (rn, false));
        assert_eq!(realized_rate(&q, 100.0, &g, &CityModel::empty(), &p).unwrap(), (rl, true));
    }

    #[test]
    fn text_round_trip() {
        let c = generate_city(&CityGenParams::default(), &unit_km(), &[], 3).unwrap();
        let mut buf = Vec::new();
        c.write_text(&mut buf).unwrap();
        let back = CityModel::read_text(buf.as_slice()).unwrap();
        assert_eq!(back, c);
        assert!(CityModel::read_text("1,2,3\n".as_bytes()).is_err());
    }
}
