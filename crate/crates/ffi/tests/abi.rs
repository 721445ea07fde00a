use std::ffi::{CStr, CString};
use std::ptr;

use ddetc_ffi::*;

fn last_error() -> String {
    let p = ddetc_last_error();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

#[test]
fn version_is_the_crate_version() {
    let v = unsafe { CStr::from_ptr(ddetc_version()) };
    assert_eq!(v.to_str().unwrap(), env!("CARGO_PKG_VERSION"));
}

#[test]
fn plant_handles_evaluate_and_step() {
    unsafe {
        let mut p: *mut DdetcPlant = ptr::null_mut();
        assert_eq!(ddetc_plant_switching(12, 1.0, &mut p), DdetcStatus::Ok);
        let (mut nx, mut nu) = (0, 0);
        assert_eq!(ddetc_plant_dims(p, &mut nx, &mut nu), DdetcStatus::Ok);
        assert_eq!((nx, nu), (2, 2));
        let (mut a, mut b) = ([0.0; 4], [0.0; 4]);
        assert_eq!(ddetc_plant_eval(p, 13, a.as_mut_ptr(), 4, b.as_mut_ptr(), 4), DdetcStatus::Ok);
        assert_eq!(a, [1.1, 0.1, 0.1, 0.2]);
        assert_eq!(b, [0.5, -1.0, 0.1, -0.2]);
        let mut xn = [0.0; 2];
        assert_eq!(ddetc_plant_step(p, 0, [1.0, 0.0].as_ptr(), [0.0, 0.0].as_ptr(), xn.as_mut_ptr()), DdetcStatus::Ok);
        assert!((xn[0] - 1.1).abs() < 1e-15 && (xn[1] - 0.1).abs() < 1e-15);
        assert_eq!(ddetc_plant_eval(p, 0, a.as_mut_ptr(), 3, b.as_mut_ptr(), 4), DdetcStatus::InvalidArgument);
        assert!(last_error().contains("buffers"));
        ddetc_plant_free(p);
    }
}

#[test]
fn errors_are_reported() {
    unsafe {
        let mut p: *mut DdetcPlant = ptr::null_mut();
        assert_eq!(ddetc_plant_switching(12, 1.0, ptr::null_mut()), DdetcStatus::NullPointer);
        assert_eq!(ddetc_plant_constant(0, 1, ptr::null(), ptr::null(), &mut p), DdetcStatus::InvalidArgument);
        assert!(p.is_null());
        assert_eq!(ddetc_plant_constant(1, 1, ptr::null(), [1.0].as_ptr(), &mut p), DdetcStatus::NullPointer);
        assert!(last_error().contains("a is null"));
        let bad = CString::new("[plant]\nkind = warp\n").unwrap();
        let mut s: *mut DdetcScenario = ptr::null_mut();
        assert_eq!(ddetc_scenario_from_str(bad.as_ptr(), &mut s), DdetcStatus::Config);
        assert!(last_error().contains("warp"));
        assert_eq!(ddetc_run_num_records(ptr::null(), &mut 0), DdetcStatus::NullPointer);
        ddetc_plant_free(ptr::null_mut());
        ddetc_scenario_free(ptr::null_mut());
        ddetc_run_free(ptr::null_mut());
        ddetc_string_free(ptr::null_mut());
    }
}

#[test]
fn simulate_matches_the_library() {
    unsafe {
        let mut p: *mut DdetcPlant = ptr::null_mut();
        assert_eq!(ddetc_plant_switching(12, 1.0, &mut p), DdetcStatus::Ok);
        let mut params = ddetc_engine_params_default(2, 2);
        assert_eq!(params.window, 4);
        params.seed = 42;
        let mut run: *mut DdetcRun = ptr::null_mut();
        assert_eq!(ddetc_simulate(p, &params, [1.0, 1.0].as_ptr(), 2, &mut run), DdetcStatus::Ok, "{}", last_error());

        let lib_plant = ddetc::plant::LtvPlant::switching(12, 1.0).unwrap();
        let mut cfg = ddetc::hybrid::EngineConfig::new(4, vec![1.0, 1.0]);
        cfg.seed = 42;
        let traj = ddetc::hybrid::run(&lib_plant, &cfg).unwrap();

        let mut n = 0;
        assert_eq!(ddetc_run_num_records(run, &mut n), DdetcStatus::Ok);
        assert_eq!(n, traj.records.len());
        let (mut k, mut j, mut x) = (0u64, 0u64, [0.0; 2]);
        assert_eq!(ddetc_run_record(run, n - 1, &mut k, &mut j, x.as_mut_ptr(), 2), DdetcStatus::Ok);
        let last = traj.records.last().unwrap();
        assert_eq!((k, j, x.to_vec()), (last.k, last.j, last.x.clone()));
        assert_eq!(ddetc_run_record(run, n, &mut k, &mut j, x.as_mut_ptr(), 2), DdetcStatus::InvalidArgument);

        let mut buf = [0u64; 4];
        let mut count = 0;
        assert_eq!(ddetc_run_episodes(run, buf.as_mut_ptr(), buf.len(), &mut count), DdetcStatus::Ok);
        assert_eq!(count, traj.episodes.len());
        assert_eq!(&buf[..], &traj.episodes[..4]);

        let (mut fin, mut max) = (0.0, 0.0);
        assert_eq!(ddetc_run_norms(run, &mut fin, &mut max), DdetcStatus::Ok);
        assert_eq!(fin, traj.final_norm());
        let (mut div, mut ok) = (-1, -1);
        assert_eq!(ddetc_run_status(run, &mut div, &mut ok), DdetcStatus::Ok);
        assert_eq!((div, ok), (0, 1));

        let mut csv: *mut std::ffi::c_char = ptr::null_mut();
        assert_eq!(ddetc_run_trajectory_csv(run, &mut csv), DdetcStatus::Ok);
        assert_eq!(CStr::from_ptr(csv).to_str().unwrap(), traj.to_csv());
        ddetc_string_free(csv);
        ddetc_run_free(run);
        ddetc_plant_free(p);
    }
}

#[test]
fn scenarios_run_and_take_seed_overrides() {
    unsafe {
        let text = CString::new("[plant]\nkind = constant\na = 0.5 0; 0 0.4\nb = 1; 1\n[run]\nhorizon = 20\nseed = 3\n").unwrap();
        let mut s: *mut DdetcScenario = ptr::null_mut();
        assert_eq!(ddetc_scenario_from_str(text.as_ptr(), &mut s), DdetcStatus::Ok);
        let mut runs = Vec::new();
        for seed in [3, 3, 4] {
            assert_eq!(ddetc_scenario_set_seed(s, seed), DdetcStatus::Ok);
            let mut r: *mut DdetcRun = ptr::null_mut();
            assert_eq!(ddetc_scenario_run(s, ptr::null(), &mut r), DdetcStatus::Ok);
            let mut csv: *mut std::ffi::c_char = ptr::null_mut();
            assert_eq!(ddetc_run_trajectory_csv(r, &mut csv), DdetcStatus::Ok);
            runs.push(CStr::from_ptr(csv).to_string_lossy().into_owned());
            ddetc_string_free(csv);
            ddetc_run_free(r);
        }
        assert_eq!(runs[0], runs[1]);
        assert_ne!(runs[0], runs[2]);
        ddetc_scenario_free(s);
    }
}

#[test]
fn header_declares_every_export() {
    let header = std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/include/ddetc.h")).unwrap();
    let src = std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/src/lib.rs")).unwrap();
    let exports: Vec<&str> = src
        .lines()
        .filter_map(|l| l.split("extern \"C\" fn ").nth(1))
        .map(|rest| rest.split('(').next().unwrap())
        .collect();
    assert!(exports.len() >= 20, "{exports:?}");
    for e in exports {
        assert!(header.contains(&format!("{e}(")), "{e} missing from header");
    }
    assert!(header.contains("DDETC_STATUS_OK = 0"));
}
