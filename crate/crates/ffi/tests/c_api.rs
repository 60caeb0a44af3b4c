use std::ffi::{CStr, CString};
use std::process::Command;
use std::ptr;

use uav_wind_ffi::*;

const SMALL: &str = r#"
[scenario]
T0 = 30.0
Q_F = [300.0, 500.0, 100.0]
users = [[100.0, 450.0], [250.0, 550.0]]
S_mcsaa = 3
"#;

#[test]
fn plan_and_fly_through_handles() {
    let text = CString::new(SMALL).unwrap();
    let mut cfg = ptr::null_mut();
    unsafe {
        assert_eq!(uw_config_from_toml(text.as_ptr(), &mut cfg), UwStatus::Ok);
        assert_eq!(uw_config_slots(cfg), 30);
        assert_eq!(uw_config_users(cfg), 2);

        let mut plan = ptr::null_mut();
        assert_eq!(uw_plan_offline(cfg, 7, 0, &mut plan), UwStatus::Ok);
        assert_eq!(uw_plan_slots(plan), 30);
        assert!(uw_plan_objective(plan) > 0.0);
        let mut q = [0.0; 3];
        assert_eq!(uw_plan_position(plan, 29, q.as_mut_ptr()), UwStatus::Ok);
        assert_eq!(q, [300.0, 500.0, 100.0]);
        assert_eq!(uw_plan_position(plan, 30, q.as_mut_ptr()), UwStatus::OutOfRange);
        assert!((1..=2).contains(&uw_plan_user(plan, 0)));
        assert_eq!(uw_plan_user(plan, 99), 0);

        let mut open = ptr::null_mut();
        let mut adapted = ptr::null_mut();
        assert_eq!(uw_fly(cfg, plan, 3, 4, 0, &mut open), UwStatus::Ok);
        assert_eq!(uw_fly(cfg, plan, 3, 4, 1, &mut adapted), UwStatus::Ok);
        assert_eq!(uw_log_slots(adapted), 30);
        assert!(uw_log_energy(open) > 0.0 && uw_log_energy(adapted) > 0.0);
        assert!(uw_log_min_rate(open, 2) >= 0.0);
        assert_eq!(uw_log_position(adapted, 29, q.as_mut_ptr()), UwStatus::Ok);
        assert_eq!(q, [300.0, 500.0, 100.0]);

        let dir = tempfile::tempdir().unwrap();
        let path = CString::new(dir.path().join("log.csv").to_str().unwrap()).unwrap();
        assert_eq!(uw_log_write_csv(adapted, path.as_ptr()), UwStatus::Ok);
        let body = std::fs::read_to_string(dir.path().join("log.csv")).unwrap();
        assert_eq!(body.lines().count(), 32);

        uw_log_free(open);
        uw_log_free(adapted);
        uw_plan_free(plan);
        uw_config_free(cfg);
    }
}

#[test]
fn wind_samples_are_reproducible() {
    let cfg = uw_config_default();
    let (mut a, mut b) = ([0.0; 8], [0.0; 8]);
    let (mut c, mut d) = ([0.0; 8], [0.0; 8]);
    unsafe {
        assert_eq!(uw_sample_wind(cfg, 5, 8, a.as_mut_ptr(), b.as_mut_ptr()), UwStatus::Ok);
        assert_eq!(uw_sample_wind(cfg, 5, 8, c.as_mut_ptr(), d.as_mut_ptr()), UwStatus::Ok);
        assert_eq!(uw_sample_wind(cfg, 5, 8, ptr::null_mut(), d.as_mut_ptr()), UwStatus::NullPointer);
        assert_eq!(uw_config_set_samples(cfg, 0), UwStatus::InvalidArgument);
        uw_config_free(cfg);
    }
    assert_eq!(a, c);
    assert_eq!(b, d);
    assert!(a.iter().all(|&v| v >= 0.0) && b.iter().all(|&x| (0.0..360.0).contains(&x)));
}

#[test]
fn version_is_crate_version() {
    let v = unsafe { CStr::from_ptr(uw_version()) }.to_str().unwrap();
    assert_eq!(v, env!("CARGO_PKG_VERSION"));
}

#[test]
fn header_declares_every_export() {
    let dir = env!("CARGO_MANIFEST_DIR");
    let header = std::fs::read_to_string(format!("{dir}/include/uav_wind.h")).unwrap();
    let src = std::fs::read_to_string(format!("{dir}/src/lib.rs")).unwrap();
    let mut n = 0;
    for line in src.lines().filter(|l| l.contains("extern \"C\" fn ")) {
        let name = line.split("fn ").nth(1).unwrap().split('(').next().unwrap();
        assert!(header.contains(&format!("{name}(")), "{name} missing from header");
        n += 1;
    }
    assert!(n >= 15);
    for ty in ["typedef struct UwConfig UwConfig", "typedef struct UwPlan UwPlan", "UW_STATUS_SOLVER = 4"] {
        assert!(header.contains(ty), "{ty}");
    }
}

#[test]
fn header_compiles_as_c() {
    let dir = env!("CARGO_MANIFEST_DIR");
    let Ok(out) = Command::new("cc")
        .args(["-fsyntax-only", "-Wall", "-Werror", "-x", "c"])
        .arg(format!("{dir}/include/uav_wind.h"))
        .output()
    else {
        eprintln!("no C compiler; skipped");
        return;
    };
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
}
