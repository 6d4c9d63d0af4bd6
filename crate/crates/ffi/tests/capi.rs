use std::ffi::{CStr, CString};
use std::path::{Path, PathBuf};
use std::process::Command;
use std::ptr;

use elastinet_ffi::*;

fn scenario(name: &str, grid: usize, mu: f64) -> *mut ElnNetwork {
    let name = CString::new(name).unwrap();
    let mut out = ptr::null_mut();
    let status = unsafe { eln_network_from_scenario(name.as_ptr(), grid, mu, -1.0, &mut out) };
    assert_eq!(status, ELN_OK, "{}", last_error());
    out
}

fn last_error() -> String {
    unsafe { CStr::from_ptr(eln_last_error()) }
        .to_string_lossy()
        .into_owned()
}

fn energy(net: *const ElnNetwork) -> f64 {
    let mut e = 0.0;
    assert_eq!(unsafe { eln_network_energy(net, &mut e) }, ELN_OK);
    e
}

#[test]
fn json_round_trip_through_handles() {
    let net = scenario("theta-symmetric", 64, 1.0);
    let mut text = ptr::null_mut();
    assert_eq!(unsafe { eln_network_to_json(net, &mut text) }, ELN_OK);
    let mut back = ptr::null_mut();
    assert_eq!(unsafe { eln_network_from_json(text, &mut back) }, ELN_OK);
    let mut n = 0;
    assert_eq!(unsafe { eln_network_grid(back, &mut n) }, ELN_OK);
    assert_eq!(n, 64);
    let mut a = vec![0.0; 2 * (n + 1)];
    let mut b = vec![0.0; 2 * (n + 1)];
    for curve in 0..3 {
        unsafe {
            assert_eq!(eln_network_points(net, curve, a.as_mut_ptr(), a.len()), ELN_OK);
            assert_eq!(eln_network_points(back, curve, b.as_mut_ptr(), b.len()), ELN_OK);
        }
        assert_eq!(a, b);
    }
    assert_eq!(energy(net).to_bits(), energy(back).to_bits());
    unsafe {
        eln_string_free(text);
        eln_network_free(back);
        eln_network_free(net);
    }
}

#[test]
fn errors_map_to_status_codes() {
    let mut out = ptr::null_mut();
    let bad = CString::new("{\"topology\": 3}").unwrap();
    assert_eq!(unsafe { eln_network_from_json(bad.as_ptr(), &mut out) }, ELN_ERR_PARSE);
    assert!(!last_error().is_empty());
    assert!(out.is_null());

    let unknown = CString::new("square").unwrap();
    let status = unsafe { eln_network_from_scenario(unknown.as_ptr(), 64, 1.0, -1.0, &mut out) };
    assert_eq!(status, ELN_ERR_INVALID);
    assert_eq!(unsafe { eln_network_from_json(ptr::null(), &mut out) }, ELN_ERR_NULL);

    let net = scenario("triod-straight", 16, 1.0);
    let mut short = [0.0; 4];
    assert_eq!(
        unsafe { eln_network_points(net, 0, short.as_mut_ptr(), 4) },
        ELN_ERR_INVALID
    );
    assert_eq!(
        unsafe { eln_network_points(net, 3, short.as_mut_ptr(), 4) },
        ELN_ERR_INVALID
    );
    let (mut g, mut p) = (false, false);
    assert_eq!(
        unsafe { eln_check(net, ELN_FLAVOR_C0, 0.0, &mut g, &mut p) },
        ELN_ERR_TOPOLOGY
    );
    assert_eq!(unsafe { eln_check(net, 7, 0.0, &mut g, &mut p) }, ELN_ERR_INVALID);
    // a successful call clears the message
    assert_eq!(unsafe { eln_check(net, ELN_FLAVOR_C1, 0.0, &mut g, &mut p) }, ELN_OK);
    assert!(g && p);
    assert!(last_error().is_empty());
    unsafe { eln_network_free(net) };
}

#[test]
fn checks_and_verifier_verdicts() {
    let degenerate = scenario("theta-degenerate", 64, 1.0);
    let (mut g, mut p) = (true, true);
    assert_eq!(
        unsafe { eln_check(degenerate, ELN_FLAVOR_C0, 0.0, &mut g, &mut p) },
        ELN_OK
    );
    assert!(!g && !p);
    let (mut ratio, mut pass) = (1.0, true);
    assert_eq!(
        unsafe { eln_ls_verify(degenerate, ELN_FLAVOR_C0, &mut ratio, &mut pass) },
        ELN_OK
    );
    assert!(!pass && ratio < 1e-10);

    let theta = scenario("theta-symmetric", 64, 1.0);
    assert_eq!(
        unsafe { eln_ls_verify(theta, ELN_FLAVOR_C0, &mut ratio, &mut pass) },
        ELN_OK
    );
    assert!(pass && ratio > 1e-6);
    let mut re = ptr::null_mut();
    assert_eq!(unsafe { eln_reparametrize(theta, &mut re) }, ELN_OK);
    assert_eq!(unsafe { eln_check(re, ELN_FLAVOR_C0, 1e-6, &mut g, &mut p) }, ELN_OK);
    assert!(g && p);
    unsafe {
        eln_network_free(re);
        eln_network_free(theta);
        eln_network_free(degenerate);
    }
}

#[test]
fn stepping_lowers_the_energy() {
    let net = scenario("triod-perturbed", 32, 0.2);
    let mut next = ptr::null_mut();
    assert_eq!(unsafe { eln_step(net, 1e-4, &mut next) }, ELN_OK);
    assert!(energy(next) < energy(net));
    let mut fin = ptr::null_mut();
    let (mut steps, mut reached) = (0, false);
    assert_eq!(
        unsafe { eln_simulate(net, 0.01, 1e-3, &mut fin, &mut steps, &mut reached) },
        ELN_OK
    );
    assert!(reached && steps >= 10);
    assert!(energy(fin) < energy(next));
    unsafe {
        eln_network_free(fin);
        eln_network_free(next);
        eln_network_free(net);
    }
}

fn static_lib() -> Option<PathBuf> {
    // the test binary lives in target/<profile>/deps
    let exe = std::env::current_exe().ok()?;
    let lib = exe.parent()?.parent()?.join("libelastinet_ffi.a");
    lib.exists().then_some(lib)
}

#[test]
fn header_compiles_and_links_from_c() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR"));
    let include = dir.join("include");
    let source = dir.join("tests/c/smoke.c");
    let Ok(status) = Command::new("cc").arg("--version").output() else {
        eprintln!("no C compiler, skipping");
        return;
    };
    assert!(status.status.success());
    let syntax = Command::new("cc")
        .args(["-std=c99", "-Wall", "-Werror", "-fsyntax-only", "-I"])
        .arg(&include)
        .arg(&source)
        .status()
        .unwrap();
    assert!(syntax.success());
    let Some(lib) = static_lib() else {
        eprintln!("static library not built, skipping link step");
        return;
    };
    let exe = std::env::temp_dir().join(format!("eln_smoke_{}", std::process::id()));
    let link = Command::new("cc")
        .args(["-std=c99", "-I"])
        .arg(&include)
        .arg(&source)
        .arg(&lib)
        .args(["-lm", "-lpthread", "-ldl", "-o"])
        .arg(&exe)
        .status()
        .unwrap();
    assert!(link.success());
    let out = Command::new(&exe).output().unwrap();
    let _ = std::fs::remove_file(&exe);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(String::from_utf8_lossy(&out.stdout).trim(), "1 1");
}
