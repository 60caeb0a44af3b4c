//! Properties of the wind, propulsion and link models.

use approx::assert_relative_eq;
use proptest::prelude::*;

use uav_wind::airlink::{
    expected_rate, generate_city, plos, rate_floor, rates, realized_rate, ChannelParams, CityGenParams, CityModel,
    Rect,
};
use uav_wind::planner::slack::{m1_value, p_ub, Slacks};
use uav_wind::propulsion::{power, AeroParams, KinState};
use uav_wind::wind::{sample_trace, WindSample, WindStats};
use uav_wind::{Vec2, Vec3};

fn vec3(r: f64) -> impl Strategy<Value = Vec3> {
    (-r..r, -r..r, -r..r).prop_map(|(x, y, z)| Vec3::new(x, y, z))
}

fn rotate_z(v: &Vec3, a: f64) -> Vec3 {
    Vec3::new(v.x * a.cos() - v.y * a.sin(), v.x * a.sin() + v.y * a.cos(), v.z)
}

proptest! {
    #[test]
    fn wind_grows_with_altitude(v in 0.0..30.0f64, beta in 0.0..360.0f64, z in 1.0..300.0f64, dz in 0.0..200.0f64) {
        let stats = WindStats::default();
        let s = WindSample { v_ref: v, beta };
        prop_assert!(s.at(z + dz, &stats).norm() >= s.at(z, &stats).norm());
    }

    #[test]
    fn wind_points_along_beta(v in 0.1..30.0f64, beta in 0.0..360.0f64, z in 1.0..300.0f64) {
        let w = WindSample { v_ref: v, beta }.at(z, &WindStats::default());
        let got = w.y.atan2(w.x).to_degrees().rem_euclid(360.0);
        let d = ((got - beta + 180.0).rem_euclid(360.0) - 180.0).abs();
        prop_assert!(d < 1e-9);
        prop_assert_eq!(w.z, 0.0);
    }

    #[test]
    fn power_terms_have_physical_signs(v in vec3(40.0), a in vec3(5.0), w in vec3(20.0)) {
        let w = Vec3::new(w.x, w.y, 0.0);
        let p = power(&KinState::new(v, a), &w, &AeroParams::default());
        prop_assert!(p.p_blade > 0.0 && p.p_induced > 0.0 && p.p_drag >= 0.0);
        prop_assert!(p.p_climb.signum() == v.z.signum() || v.z == 0.0);
        prop_assert!((p.total - (p.p_blade + p.p_induced + p.p_climb + p.p_drag)).abs() <= 1e-9 * p.total.abs().max(1.0));
    }

    #[test]
    fn power_is_invariant_to_heading(v in vec3(40.0), a in vec3(5.0), w in vec3(20.0), ang in 0.0..6.3f64) {
        let w = Vec3::new(w.x, w.y, 0.0);
        let p = AeroParams::default();
        let base = power(&KinState::new(v, a), &w, &p).total;
        let rot = power(&KinState::new(rotate_z(&v, ang), rotate_z(&a, ang)), &rotate_z(&w, ang), &p).total;
        prop_assert!((base - rot).abs() <= 1e-9 * base.abs().max(1.0));
    }

    #[test]
    fn bound_dominates_exact_power(v in vec3(30.0), a in vec3(3.0), w in vec3(15.0)) {
        let w = Vec3::new(w.x, w.y, 0.0);
        let p = AeroParams::default();
        let rel = (v - w).norm();
        let sl = Slacks::tight(m1_value(&a, rel * rel, &p), v.norm_squared(), &p);
        let ub = p_ub(&v, &sl, rel.powi(3), &p);
        let exact = power(&KinState::new(v, a), &w, &p).total;
        prop_assert!(ub >= exact - 1e-9 * exact.abs().max(1.0), "{ub} < {exact}");
    }

    #[test]
    fn plos_increases_with_elevation(a in 0.0..90.0f64, b in 0.0..90.0f64) {
        let ch = ChannelParams::default();
        let (lo, hi) = if a < b { (a, b) } else { (b, a) };
        prop_assert!(plos(lo, &ch).unwrap() <= plos(hi, &ch).unwrap());
        prop_assert!((0.0..=1.0).contains(&plos(lo, &ch).unwrap()));
    }

    #[test]
    fn rate_floor_below_expected_below_los(x in -500.0..500.0f64, y in -500.0..500.0f64, z in 50.0..300.0f64) {
        let ch = ChannelParams::default();
        let q = Vec2::new(x, y);
        let g = Vec2::zeros();
        let floor = rate_floor(&q, z, &g, &ch).unwrap();
        let exp = expected_rate(&q, z, &g, &ch).unwrap();
        let (rl, rn) = rates((z * z + x * x + y * y).sqrt(), &ch).unwrap();
        prop_assert!(floor <= exp && exp <= rl);
        prop_assert!(rn <= rl);
    }
}

#[test]
fn sampling_is_reproducible_per_seed() {
    let s = WindStats::default();
    let a = sample_trace(&s, 40, 3, 11).unwrap();
    assert_eq!(a, sample_trace(&s, 40, 3, 11).unwrap());
    assert_ne!(a, sample_trace(&s, 40, 3, 12).unwrap());
    assert!(a.scenario(1).iter().all(|w| w.v_ref >= 0.0 && (0.0..360.0).contains(&w.beta)));
}

#[test]
fn hover_power_rises_with_any_wind() {
    let p = AeroParams::default();
    let calm = power(&KinState::default(), &Vec3::zeros(), &p).total;
    assert_relative_eq!(calm, p.hover_power(), max_relative = 1e-12);
    for w in [1.0, 5.0, 12.0] {
        assert!(power(&KinState::default(), &Vec3::new(0.0, -w, 0.0), &p).total > calm);
    }
}

#[test]
fn city_file_round_trips() {
    let b = Rect::new(0.0, 0.0, 600.0, 600.0);
    let users = [Vec2::new(100.0, 100.0)];
    let city = generate_city(&CityGenParams::default(), &b, &users, 4).unwrap();
    let mut buf = Vec::new();
    city.write_text(&mut buf).unwrap();
    let back = CityModel::read_text(&buf[..]).unwrap();
    assert_eq!(back.buildings.len(), city.buildings.len());
    assert_eq!(back.seed, city.seed);
    for (x, y) in back.buildings.iter().zip(&city.buildings) {
        assert_relative_eq!(x.height, y.height, max_relative = 1e-12);
    }
}

#[test]
fn open_sky_is_always_line_of_sight() {
    let ch = ChannelParams::default();
    let g = Vec2::new(10.0, 20.0);
    let (r, los) = realized_rate(&Vec2::new(300.0, -50.0), 80.0, &g, &CityModel::empty(), &ch).unwrap();
    let d = (80.0f64.powi(2) + (Vec2::new(300.0, -50.0) - g).norm_squared()).sqrt();
    assert!(los);
    assert_relative_eq!(r, rates(d, &ch).unwrap().0, max_relative = 1e-12);
}
