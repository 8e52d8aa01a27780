use std::ffi::{CStr, CString};
use std::ptr;

use mdkit_ffi::*;

const SMALL: &str = "preset.name = steady_state\ngrid.n = 8\ntime.dt = 1/64\ntime.t_final = 1/16\n";

fn new_sim(text: &str) -> (MdkitStatus, *mut MdkitSimulation) {
    let c = CString::new(text).unwrap();
    let mut out = ptr::null_mut();
    let st = unsafe { mdkit_simulation_new(c.as_ptr(), &mut out) };
    (st, out)
}

fn last_error() -> String {
    let p = mdkit_last_error();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_str().unwrap().to_string()
}

#[test]
fn lifecycle_steps_and_conserves_charge() {
    let (st, sim) = new_sim(SMALL);
    assert_eq!(st, MdkitStatus::Ok);
    assert!(!sim.is_null());
    let (mut q0, mut q1, mut t, mut n) = (0.0, 0.0, 0.0, 0usize);
    unsafe {
        assert_eq!(mdkit_simulation_charge(sim, &mut q0), MdkitStatus::Ok);
        assert_eq!(mdkit_simulation_step(sim, 4), MdkitStatus::Ok);
        assert_eq!(mdkit_simulation_charge(sim, &mut q1), MdkitStatus::Ok);
        assert_eq!(mdkit_simulation_time(sim, &mut t), MdkitStatus::Ok);
        assert_eq!(mdkit_simulation_grid_len(sim, &mut n), MdkitStatus::Ok);
    }
    assert!(q0 > 0.0);
    assert!(((q1 - q0) / q0).abs() < 1e-12);
    assert!((t - 4.0 / 64.0).abs() < 1e-15);
    assert_eq!(n, 512);

    let mut rho = vec![0.0; n];
    unsafe {
        assert_eq!(mdkit_simulation_density(sim, rho.as_mut_ptr(), n), MdkitStatus::Ok);
        assert_eq!(mdkit_simulation_density(sim, rho.as_mut_ptr(), n - 1), MdkitStatus::BufferTooSmall);
    }
    let total: f64 = rho.iter().sum::<f64>() / n as f64;
    assert!((total - q1).abs() < 1e-12 * q1.max(1.0));
    unsafe { mdkit_simulation_free(sim) };
}

#[test]
fn writes_readable_dumps() {
    let (_, sim) = new_sim(SMALL);
    let dir = tempfile::tempdir().unwrap();
    let d = CString::new(dir.path().to_str().unwrap()).unwrap();
    assert_eq!(unsafe { mdkit_simulation_write_dumps(sim, d.as_ptr()) }, MdkitStatus::Ok);
    let rec = mdkit::runner::DumpRecord::read_file(&dir.path().join("psi_000000.mdk")).unwrap();
    assert_eq!(rec.header.n, [8, 8, 8]);
    assert_eq!(rec.values.len(), 512 * 8);
    unsafe { mdkit_simulation_free(sim) };
}

#[test]
fn errors_are_reported() {
    let (st, sim) = new_sim("md.bogus = 1\n");
    assert_eq!(st, MdkitStatus::Config);
    assert!(sim.is_null());
    assert!(last_error().contains("md.bogus"));

    let mut out = ptr::null_mut();
    assert_eq!(unsafe { mdkit_simulation_new(ptr::null(), &mut out) }, MdkitStatus::NullPointer);
    let mut t = 0.0;
    assert_eq!(unsafe { mdkit_simulation_time(ptr::null(), &mut t) }, MdkitStatus::NullPointer);
    let bad = [0xffu8, 0];
    assert_eq!(unsafe { mdkit_simulation_new(bad.as_ptr().cast(), &mut out) }, MdkitStatus::InvalidUtf8);
    unsafe { mdkit_simulation_free(ptr::null_mut()) };
}

#[test]
fn version_matches_crate() {
    let v = unsafe { CStr::from_ptr(mdkit_version()) }.to_str().unwrap();
    assert_eq!(v, env!("CARGO_PKG_VERSION"));
}

#[test]
fn header_declares_every_export() {
    let h = std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/include/mdkit.h")).unwrap();
    for name in [
        "mdkit_version",
        "mdkit_last_error",
        "mdkit_simulation_new",
        "mdkit_simulation_free",
        "mdkit_simulation_step",
        "mdkit_simulation_time",
        "mdkit_simulation_charge",
        "mdkit_simulation_grid_len",
        "mdkit_simulation_density",
        "mdkit_simulation_write_dumps",
        "typedef struct MdkitSimulation MdkitSimulation",
    ] {
        assert!(h.contains(name), "{name}");
    }
}
