use std::ffi::{CStr, CString};
use std::path::Path;
use std::process::Command;
use std::ptr;

use marsm_ffi::*;

fn last_error() -> String {
    unsafe { CStr::from_ptr(marsm_last_error()) }.to_string_lossy().into_owned()
}

fn mat(rows: usize, cols: usize, data: &[f64]) -> *mut MarsmMat {
    let mut out = ptr::null_mut();
    let s = unsafe { marsm_mat_new(rows, cols, data.as_ptr(), &mut out) };
    assert_eq!(s, MarsmStatus::Ok, "{}", last_error());
    out
}

fn values(m: *const MarsmMat) -> Vec<f64> {
    let n = unsafe { marsm_mat_rows(m) * marsm_mat_cols(m) };
    let mut buf = vec![0.0; n];
    assert_eq!(unsafe { marsm_mat_copy_to(m, buf.as_mut_ptr(), n) }, MarsmStatus::Ok);
    buf
}

#[test]
fn matrix_round_trip_and_errors() {
    let m = mat(2, 3, &[1.0, 2.0, 3.0, 4.0, 5.0, 6.0]);
    unsafe {
        assert_eq!((marsm_mat_rows(m), marsm_mat_cols(m)), (2, 3));
        assert_eq!(values(m), vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0]);
        let mut small = [0.0; 2];
        assert_eq!(marsm_mat_copy_to(m, small.as_mut_ptr(), 2), MarsmStatus::InvalidArgument);
        let mut norm = 0.0;
        assert_eq!(marsm_fro_norm(m, &mut norm), MarsmStatus::Ok);
        assert!((norm - 91f64.sqrt()).abs() < 1e-14);
        marsm_mat_free(m);

        let mut out = ptr::null_mut();
        let bad = [1.0, f64::NAN];
        assert_eq!(marsm_mat_new(1, 2, bad.as_ptr(), &mut out), MarsmStatus::NonFinite);
        assert!(out.is_null());
        assert!(!last_error().is_empty());
        assert_eq!(marsm_mat_new(1, 2, ptr::null(), &mut out), MarsmStatus::NullPointer);
        assert_eq!(marsm_mat_rows(ptr::null()), 0);
        marsm_mat_free(ptr::null_mut());
    }
}

#[test]
fn polar_functions() {
    let m = mat(2, 2, &[0.0, -2.0, 2.0, 0.0]);
    unsafe {
        let mut p = ptr::null_mut();
        assert_eq!(marsm_exact_polar(m, &mut p), MarsmStatus::Ok);
        let want = [0.0, -1.0, 1.0, 0.0];
        assert!(values(p).iter().zip(want).all(|(a, b)| (a - b).abs() < 1e-12));
        let mut q = ptr::null_mut();
        assert_eq!(marsm_newton_schulz(m, MarsmNsVariant::Cubic, 30, &mut q), MarsmStatus::Ok);
        assert!(values(q).iter().zip(want).all(|(a, b)| (a - b).abs() < 1e-6));
        marsm_mat_free(p);
        marsm_mat_free(q);

        let z = mat(2, 2, &[0.0; 4]);
        let mut out = ptr::null_mut();
        assert_eq!(marsm_exact_polar(z, &mut out), MarsmStatus::Degenerate);
        assert_eq!(marsm_newton_schulz(z, MarsmNsVariant::Quintic, 5, &mut out), MarsmStatus::Ok);
        assert_eq!(values(out), vec![0.0; 4]);
        marsm_mat_free(out);
        let mut c = ptr::null_mut();
        let big = mat(1, 2, &[3.0, 4.0]);
        assert_eq!(marsm_clip_fro(big, 1.0, &mut c), MarsmStatus::Ok);
        let v = values(c);
        assert!((v[0] - 0.6).abs() < 1e-15 && (v[1] - 0.8).abs() < 1e-15);
        assert_eq!(marsm_clip_fro(big, 0.0, &mut c), MarsmStatus::InvalidArgument);
        for h in [z, big, c, m] {
            marsm_mat_free(h);
        }
    }
}

#[test]
fn scalar_mars_m_step_matches_hand_computation() {
    // one approximate step from zero state on a 1×1 parameter: C = g, clipped
    // to 1, M = 0.05, O = sign(M) = 1, direction = 0.2·1 + 0.1·x.
    let mut cfg = marsm_mars_m_default_config();
    cfg.ns_steps = 0;
    unsafe {
        let mut opt = ptr::null_mut();
        assert_eq!(marsm_mars_m_new(1, 1, &cfg, &mut opt), MarsmStatus::Ok);
        let x = mat(1, 1, &[0.0]);
        let g = mat(1, 1, &[3.0]);
        let mut next = ptr::null_mut();
        let mut rms = 0.0;
        assert_eq!(
            marsm_mars_m_step(opt, x, g, ptr::null(), &mut next, &mut rms),
            MarsmStatus::Ok,
            "{}",
            last_error()
        );
        assert!((values(next)[0] + 0.002).abs() < 1e-15);
        assert!((rms - 0.2).abs() < 1e-15);
        assert_eq!(marsm_mars_m_steps_taken(opt), 1);
        // approximate mode refuses a reference gradient
        let mut again = ptr::null_mut();
        assert_eq!(
            marsm_mars_m_step(opt, next, g, g, &mut again, ptr::null_mut()),
            MarsmStatus::InvalidArgument
        );
        assert!(last_error().contains("mode"));
        for h in [x, g, next] {
            marsm_mat_free(h);
        }
        marsm_mars_m_free(opt);
    }
}

#[test]
fn exact_mode_prev_point_tracks_iterates() {
    let mut cfg = marsm_mars_m_default_config();
    cfg.mode = MarsmMode::Exact;
    unsafe {
        let mut opt = ptr::null_mut();
        assert_eq!(marsm_mars_m_new(2, 2, &cfg, &mut opt), MarsmStatus::Ok);
        let x0 = mat(2, 2, &[1.0, 0.0, 0.0, 1.0]);
        let g = mat(2, 2, &[0.5, 0.1, -0.2, 0.3]);
        let mut p = ptr::null_mut();
        assert_eq!(marsm_mars_m_prev_point(opt, x0, &mut p), MarsmStatus::Ok);
        assert_eq!(values(p), values(x0));
        let mut x1 = ptr::null_mut();
        assert_eq!(marsm_mars_m_step(opt, x0, g, ptr::null(), &mut x1, ptr::null_mut()), MarsmStatus::InvalidArgument);
        assert_eq!(marsm_mars_m_step(opt, x0, g, g, &mut x1, ptr::null_mut()), MarsmStatus::Ok);
        let mut p1 = ptr::null_mut();
        assert_eq!(marsm_mars_m_prev_point(opt, x1, &mut p1), MarsmStatus::Ok);
        assert_eq!(values(p1), values(x0));
        let wrong = mat(3, 2, &[0.0; 6]);
        let mut x2 = ptr::null_mut();
        assert_eq!(marsm_mars_m_step(opt, x1, wrong, g, &mut x2, ptr::null_mut()), MarsmStatus::ShapeMismatch);
        for h in [x0, g, p, x1, p1, wrong] {
            marsm_mat_free(h);
        }
        marsm_mars_m_free(opt);
    }
}

#[test]
fn invalid_config_is_rejected() {
    let mut cfg = marsm_mars_m_default_config();
    cfg.beta = 1.5;
    let mut opt = ptr::null_mut();
    assert_eq!(unsafe { marsm_mars_m_new(2, 2, &cfg, &mut opt) }, MarsmStatus::InvalidArgument);
    assert!(opt.is_null());
    assert!(last_error().contains("beta"));
}

#[test]
fn run_config_and_fit_slope() {
    let dir = tempfile::tempdir().unwrap();
    let cfg_path = dir.path().join("c.ini");
    std::fs::write(
        &cfg_path,
        "[run]\nname = ffi\nsteps = 120\n[problem]\nname = quadratic\nm = 3\nn = 3\n[optimizer]\nname = mars_m\n",
    )
    .unwrap();
    let c = CString::new(cfg_path.to_str().unwrap()).unwrap();
    let out = CString::new(dir.path().to_str().unwrap()).unwrap();
    let seed = 5u64;
    unsafe {
        assert_eq!(marsm_run_config(c.as_ptr(), out.as_ptr(), &seed), MarsmStatus::Ok, "{}", last_error());
        let csv = CString::new(dir.path().join("ffi_seed5.csv").to_str().unwrap()).unwrap();
        let col = CString::new("true_grad_norm").unwrap();
        let mut slope = f64::NAN;
        assert_eq!(marsm_fit_slope(csv.as_ptr(), col.as_ptr(), 0.1, &mut slope), MarsmStatus::Ok);
        assert!(slope.is_finite());
        let missing = CString::new("nope").unwrap();
        assert_eq!(marsm_fit_slope(csv.as_ptr(), missing.as_ptr(), 0.1, &mut slope), MarsmStatus::Config);

        std::fs::write(&cfg_path, "[run]\nsteps = 1\nbogus = 2\n").unwrap();
        assert_eq!(marsm_run_config(c.as_ptr(), ptr::null(), ptr::null()), MarsmStatus::Config);
        assert!(last_error().contains("bogus"));
        assert_eq!(marsm_run_config(ptr::null(), ptr::null(), ptr::null()), MarsmStatus::NullPointer);
    }
}

#[test]
fn version_is_a_c_string() {
    let v = unsafe { CStr::from_ptr(marsm_version()) };
    assert_eq!(v.to_str().unwrap(), env!("CARGO_PKG_VERSION"));
}

#[test]
fn header_declares_every_export_and_compiles() {
    let header = Path::new(env!("CARGO_MANIFEST_DIR")).join("include/marsm.h");
    let text = std::fs::read_to_string(&header).unwrap();
    let src = std::fs::read_to_string(Path::new(env!("CARGO_MANIFEST_DIR")).join("src/lib.rs")).unwrap();
    for line in src.lines() {
        if let Some(rest) = line.split("extern \"C\" fn ").nth(1) {
            let name = rest.split('(').next().unwrap();
            assert!(text.contains(&format!("{name}(")), "header lacks {name}");
        }
    }
    for (compiler, lang) in [("cc", "c"), ("c++", "c++")] {
        let Ok(status) = Command::new(compiler)
            .args(["-fsyntax-only", "-Wall", "-Werror", "-x", lang])
            .arg(&header)
            .status()
        else {
            eprintln!("{compiler} not available; skipping compile check");
            continue;
        };
        assert!(status.success(), "{compiler} rejected the header");
    }
}
