use liouville_area_ffi::*;
use std::ffi::{CStr, CString};
use std::path::PathBuf;
use std::process::Command;
use std::ptr;

fn grid(n: usize, h: f64, x0: f64, y0: f64) -> LaGrid {
    LaGrid { nx: n, ny: n, h, x0, y0 }
}

fn last_error() -> String {
    unsafe { CStr::from_ptr(la_last_error()) }.to_string_lossy().into_owned()
}

#[test]
fn version_is_crate_version() {
    let v = unsafe { CStr::from_ptr(la_version()) }.to_str().unwrap();
    assert_eq!(v, env!("CARGO_PKG_VERSION"));
}

#[test]
fn sampler_and_gmc_round_trip() {
    let g = grid(16, 1.0 / 16.0, 0.0, 0.0);
    let mut s = ptr::null_mut();
    assert_eq!(la_sampler_new(LaKernel::PureLog, 0.0, 0.0, g, &mut s), LaStatus::Ok);
    assert!(la_sampler_clipped_fraction(s) >= 0.0);

    let mut a = ptr::null_mut();
    let mut b = ptr::null_mut();
    assert_eq!(la_gmc_sample(s, 0.5, 7, 3, &mut a), LaStatus::Ok);
    assert_eq!(la_gmc_sample(s, 0.5, 7, 3, &mut b), LaStatus::Ok);
    let mut ma = vec![0.0; 256];
    let mut mb = vec![0.0; 256];
    assert_eq!(la_gmc_masses(a, ma.as_mut_ptr(), ma.len()), LaStatus::Ok);
    assert_eq!(la_gmc_masses(b, mb.as_mut_ptr(), mb.len()), LaStatus::Ok);
    assert_eq!(ma, mb);
    let total: f64 = ma.iter().sum();
    assert!((total - la_gmc_total_mass(a)).abs() < 1e-12);
    assert!(ma.iter().all(|&m| m > 0.0));

    let mut small = vec![0.0; 10];
    assert_eq!(la_gmc_masses(a, small.as_mut_ptr(), small.len()), LaStatus::BufferTooSmall);
    assert!(last_error().contains("need 256"));

    la_gmc_free(a);
    la_gmc_free(b);
    la_sampler_free(s);
}

#[test]
fn null_pointers_are_reported() {
    let g = grid(8, 0.125, 0.0, 0.0);
    assert_eq!(la_sampler_new(LaKernel::PureLog, 0.0, 0.0, g, ptr::null_mut()), LaStatus::NullPointer);
    let mut out = ptr::null_mut();
    assert_eq!(la_gmc_sample(ptr::null(), 0.5, 0, 0, &mut out), LaStatus::NullPointer);
    assert!(last_error().contains("sampler"));
    assert!(la_gmc_total_mass(ptr::null()).is_nan());
    assert_eq!(la_report_passed(ptr::null()), -1);
    assert!(la_report_json(ptr::null()).is_null());
    la_gmc_free(ptr::null_mut());
    la_sampler_free(ptr::null_mut());
}

#[test]
fn invalid_arguments_are_reported() {
    let mut s = ptr::null_mut();
    let bad = grid(0, 0.1, 0.0, 0.0);
    assert_eq!(la_sampler_new(LaKernel::PureLog, 0.0, 0.0, bad, &mut s), LaStatus::InvalidArgument);
    assert!(s.is_null());
    assert!(!last_error().is_empty());

    let g = grid(8, 0.125, 0.0, 0.0);
    assert_eq!(la_sampler_new(LaKernel::PureLog, 0.0, 0.0, g, &mut s), LaStatus::Ok);
    let mut m = ptr::null_mut();
    assert_ne!(la_gmc_sample(s, 3.0, 0, 0, &mut m), LaStatus::Ok);
    la_sampler_free(s);
}

#[test]
fn square_winding_and_area() {
    let xs = [0.25, 0.75, 0.75, 0.25];
    let ys = [0.25, 0.25, 0.75, 0.75];
    let mut p = ptr::null_mut();
    assert_eq!(la_polyline_new(xs.as_ptr(), ys.as_ptr(), 4, true, &mut p), LaStatus::Ok);

    let g = grid(32, 1.0 / 32.0, 0.0, 0.0);
    let mut w = vec![0i32; 32 * 32];
    assert_eq!(la_winding_numbers(p, g, w.as_mut_ptr(), w.len()), LaStatus::Ok);
    assert_eq!(w.iter().filter(|&&v| v == 1).count(), 16 * 16);
    assert!(w.iter().all(|&v| v == 0 || v == 1));

    let mut leb = ptr::null_mut();
    assert_eq!(la_gmc_lebesgue(g, &mut leb), LaStatus::Ok);
    let mut area = 0.0;
    assert_eq!(la_levy_area(p, leb, &mut area), LaStatus::Ok);
    assert!((area - 0.25).abs() < 1e-9, "area {area}");

    la_gmc_free(leb);
    la_polyline_free(p);
}

#[test]
fn brownian_polyline_is_seeded() {
    let g = grid(64, 4.0 / 64.0, -2.0, -2.0);
    let run = |seed| {
        let mut p = ptr::null_mut();
        assert_eq!(la_polyline_brownian(256, seed, &mut p), LaStatus::Ok);
        let mut w = vec![0i32; 64 * 64];
        assert_eq!(la_winding_numbers(p, g, w.as_mut_ptr(), w.len()), LaStatus::Ok);
        la_polyline_free(p);
        w
    };
    assert_eq!(run(5), run(5));
}

#[test]
fn run_experiment_json() {
    let cfg = CString::new(r#"{"experiment":"phi-map","seed":3,"params":{"phi_n":[1,3],"phi_pairs":2000}}"#).unwrap();
    let mut r = ptr::null_mut();
    assert_eq!(la_run_experiment(cfg.as_ptr(), &mut r), LaStatus::Ok);
    assert_eq!(la_report_passed(r), 1);
    let json = unsafe { CStr::from_ptr(la_report_json(r)) }.to_str().unwrap();
    let v: serde_json::Value = serde_json::from_str(json).unwrap();
    assert_eq!(v["experiment"], "phi-map");
    la_report_free(r);

    let bad = CString::new(r#"{"experiment":"phi-map","params":{"phi_pairz":1}}"#).unwrap();
    assert_eq!(la_run_experiment(bad.as_ptr(), &mut r), LaStatus::Config);
    assert!(last_error().contains("phi_pairz"));
    assert_eq!(la_run_experiment(ptr::null(), &mut r), LaStatus::NullPointer);
}

fn header() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("include/liouville_area.h")
}

#[test]
fn header_declares_the_surface() {
    let text = std::fs::read_to_string(header()).unwrap();
    for name in [
        "la_last_error",
        "la_version",
        "la_sampler_new",
        "la_sampler_free",
        "la_gmc_sample",
        "la_gmc_lebesgue",
        "la_gmc_masses",
        "la_gmc_free",
        "la_polyline_new",
        "la_polyline_brownian",
        "la_winding_numbers",
        "la_levy_area",
        "la_run_experiment",
        "la_report_json",
        "la_report_free",
        "LaStatus_BufferTooSmall = 6",
        "typedef struct LaSampler LaSampler",
    ] {
        assert!(text.contains(name), "header lacks {name}");
    }
}

#[test]
fn header_compiles_as_c() {
    let Ok(cc) = which_cc() else { return };
    let dir = tempdir();
    let src = dir.join("use_header.c");
    std::fs::write(
        &src,
        "#include \"liouville_area.h\"\n\
         int main(void) {\n\
           LaGrid g = {8, 8, 0.125, 0.0, 0.0};\n\
           LaSampler *s = 0;\n\
           LaStatus st = la_sampler_new(LaKernel_PureLog, 0.0, 0.0, g, &s);\n\
           la_sampler_free(s);\n\
           return st == LaStatus_Ok ? 0 : 1;\n\
         }\n",
    )
    .unwrap();
    let inc = header().parent().unwrap().to_path_buf();
    let status = Command::new(cc)
        .args(["-std=c99", "-Wall", "-Werror", "-fsyntax-only", "-I"])
        .arg(&inc)
        .arg(&src)
        .status()
        .unwrap();
    assert!(status.success());
}

fn which_cc() -> Result<String, ()> {
    let cc = std::env::var("CC").unwrap_or_else(|_| "cc".into());
    match Command::new(&cc).arg("--version").output() {
        Ok(o) if o.status.success() => Ok(cc),
        _ => Err(()),
    }
}

fn tempdir() -> PathBuf {
    let d = std::env::temp_dir().join(format!("la-ffi-{}", std::process::id()));
    std::fs::create_dir_all(&d).unwrap();
    d
}
