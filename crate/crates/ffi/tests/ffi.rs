use std::ffi::{CStr, CString};
use std::path::{Path, PathBuf};
use std::process::Command;
use std::ptr;

use isospec_ffi::*;

fn last_error() -> String {
    let p = iso_last_error_message();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

#[test]
fn oscillator_counting_through_the_abi() {
    unsafe {
        let mut t = ptr::null_mut();
        assert_eq!(iso_spectrum_oscillator(2, 40.0, &mut t), IsoStatus::Ok);
        let mut n = 0u64;
        assert_eq!(iso_counting(t, 10.5, &mut n), IsoStatus::Ok);
        assert_eq!(n, 55);
        let (mut ev, mut m) = (0.0, 0u64);
        assert_eq!(iso_spectrum_get(t, 3, &mut ev, &mut m), IsoStatus::Ok);
        assert_eq!((ev, m), (4.0, 4));
        let mut len = 0usize;
        assert_eq!(iso_spectrum_len(t, &mut len), IsoStatus::Ok);
        assert_eq!(iso_spectrum_get(t, len, &mut ev, &mut m), IsoStatus::InvalidArgument);
        assert!(last_error().contains("out of range"));
        iso_spectrum_free(t);
    }
}

#[test]
fn trust_violation_is_reported() {
    unsafe {
        let mut t = ptr::null_mut();
        assert_eq!(iso_spectrum_oscillator(1, 20.0, &mut t), IsoStatus::Ok);
        let mut trust = 0.0;
        assert_eq!(iso_spectrum_lambda_trust(t, &mut trust), IsoStatus::Ok);
        let mut n = 0u64;
        assert_eq!(iso_counting(t, trust + 100.0, &mut n), IsoStatus::TrustViolation);
        assert!(!last_error().is_empty());
        iso_spectrum_free(t);
    }
}

#[test]
fn null_pointers_and_bad_json() {
    unsafe {
        let mut n = 0u64;
        assert_eq!(iso_counting(ptr::null(), 1.0, &mut n), IsoStatus::NullPointer);
        assert!(last_error().contains("table"));
        let mut s = ptr::null_mut();
        assert_eq!(iso_symbol_from_json(ptr::null(), &mut s), IsoStatus::NullPointer);
        let bad = CString::new(r#"{"d":1,"terms":[{"kind":"nope"}]}"#).unwrap();
        assert_eq!(iso_symbol_from_json(bad.as_ptr(), &mut s), IsoStatus::Parse);
        assert!(s.is_null());
        iso_symbol_free(ptr::null_mut());
        iso_spectrum_free(ptr::null_mut());
    }
}

#[test]
fn symbol_round_trip() {
    let json = CString::new(r#"{"d":1,"terms":[{"kind":"radial_power","degree":2,"coeff":1.0}]}"#).unwrap();
    let core = isospec::symbols::Symbol::from_json(json.to_str().unwrap()).unwrap();
    unsafe {
        let mut s = ptr::null_mut();
        assert_eq!(iso_symbol_from_json(json.as_ptr(), &mut s), IsoStatus::Ok);
        let mut d = 0usize;
        assert_eq!(iso_symbol_dimension(s, &mut d), IsoStatus::Ok);
        assert_eq!(d, 1);
        let w = [0.3, -1.2];
        let mut v = 0.0;
        assert_eq!(iso_symbol_evaluate(s, w.as_ptr(), 2, &mut v), IsoStatus::Ok);
        assert_eq!(v, core.value(&w).unwrap());
        assert_eq!(iso_symbol_evaluate(s, w.as_ptr(), 1, &mut v), IsoStatus::InvalidArgument);
        iso_symbol_free(s);
    }
}

#[test]
fn kernels_and_transforms_match_core() {
    unsafe {
        let mut m = 0u64;
        assert_eq!(iso_multiplicity(3, 3, &mut m), IsoStatus::Ok);
        assert_eq!(m, 10);
        assert_eq!(iso_multiplicity(-1, 3, &mut m), IsoStatus::Domain);

        let (x, y) = ([0.2], [-0.4]);
        let (mut re, mut im) = (0.0, 0.0);
        assert_eq!(iso_mehler_kernel(0.7, x.as_ptr(), y.as_ptr(), 1, &mut re, &mut im), IsoStatus::Ok);
        let k = isospec::trace::mehler_kernel(0.7, &x, &y).unwrap();
        assert_eq!((re, im), (k.re, k.im));

        let mut t = ptr::null_mut();
        assert_eq!(iso_spectrum_diagonal([0.3, 0.7].as_ptr(), 2, 400.0, &mut t), IsoStatus::Ok);
        let grid = [60.0, 80.0, 100.0];
        let mut smooth = [0.0; 3];
        assert_eq!(iso_mollified_counting(t, 0.3, grid.as_ptr(), 3, smooth.as_mut_ptr()), IsoStatus::Ok);
        assert!(smooth[0] < smooth[1] && smooth[1] < smooth[2]);
        let (mut tr, mut ti) = ([0.0; 3], [0.0; 3]);
        let st = iso_trace_transform(t, 1, std::f64::consts::PI / 8.0, grid.as_ptr(), 3, tr.as_mut_ptr(), ti.as_mut_ptr());
        assert_eq!(st, IsoStatus::Ok, "{}", last_error());
        assert!(tr.iter().zip(&ti).all(|(a, b)| a.is_finite() && b.is_finite()));
        iso_spectrum_free(t);
    }
}

fn crate_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
}

#[test]
fn header_declares_every_export() {
    let header = std::fs::read_to_string(crate_dir().join("include/isospec.h")).unwrap();
    let src = std::fs::read_to_string(crate_dir().join("src/lib.rs")).unwrap();
    let mut seen = 0;
    for line in src.lines() {
        if let Some(rest) = line.split("extern \"C\" fn ").nth(1) {
            let name = rest.split('(').next().unwrap();
            assert!(header.contains(&format!("{name}(")), "{name} missing from header");
            seen += 1;
        }
    }
    assert!(seen >= 17);
    assert!(header.contains("ISO_STATUS_TRUST_VIOLATION = 4"));
}

// Links a small C program against the static library when a C compiler is around.
#[test]
fn c_program_links_and_runs() {
    if Command::new("cc").arg("--version").output().is_err() {
        eprintln!("no C compiler, skipping");
        return;
    }
    let exe = std::env::current_exe().unwrap();
    let profile_dir = exe.parent().and_then(Path::parent).unwrap();
    let lib = profile_dir.join("libisospec_ffi.a");
    if !lib.exists() {
        eprintln!("{} not built, skipping", lib.display());
        return;
    }
    let dir = tempfile::tempdir().unwrap();
    let c_src = dir.path().join("smoke.c");
    std::fs::write(
        &c_src,
        r#"#include <stdio.h>
#include "isospec.h"
int main(void) {
    IsoSpectrumTable *t = NULL;
    uint64_t n = 0;
    if (iso_spectrum_oscillator(2, 40.0, &t) != ISO_STATUS_OK) return 1;
    if (iso_counting(t, 10.5, &n) != ISO_STATUS_OK) return 2;
    if (iso_counting(NULL, 1.0, &n) != ISO_STATUS_NULL_POINTER) return 3;
    printf("%llu %s\n", (unsigned long long)n, iso_last_error_message());
    iso_spectrum_free(t);
    return 0;
}
"#,
    )
    .unwrap();
    let bin = dir.path().join("smoke");
    let status = Command::new("cc")
        .arg(&c_src)
        .arg("-I")
        .arg(crate_dir().join("include"))
        .arg(&lib)
        .args(["-lpthread", "-ldl", "-lm", "-o"])
        .arg(&bin)
        .status()
        .unwrap();
    assert!(status.success());
    let out = Command::new(&bin).output().unwrap();
    assert!(out.status.success(), "exit {:?}", out.status);
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.starts_with("55 "), "{text}");
}
