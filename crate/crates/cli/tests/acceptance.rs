//! One line per acceptance criterion; exits non-zero if any fails.

use std::f64::consts::{FRAC_PI_2, TAU};
use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::Instant;

use grushin_cli::selftest::{classification_mismatches, cut_time_error, monotonicity, oracle_sup_error, ray_grid};
use grushin_core::asymptotics::{
    corner_fit, default_rho_grid, default_s_grid, default_scaling_s_grid, default_theta_grid, perturbed_scaling_check,
    series_report, Coupling,
};
use grushin_core::exact::cusp_normal_form_check;
use grushin_core::heat::{heat_report, GridPolicy};
use grushin_core::loci::{cut_locus_with, scan_conjugate_locus, CutFinder, CutSearchOptions, ScanOptions};
use grushin_core::stats::geometric_grid;
use grushin_core::{FrameSpec, Point};

struct Line {
    pass: bool,
    text: String,
}

fn criterion(n: u32, f: impl FnOnce() -> Result<(bool, String), String>) -> Line {
    let start = Instant::now();
    let (pass, detail) = f().unwrap_or_else(|e| (false, format!("error: {e}")));
    let text = format!(
        "criterion {n}: {} {detail} [{:.1} s]",
        if pass { "PASS" } else { "FAIL" },
        start.elapsed().as_secs_f64()
    );
    println!("{text}");
    Line { pass, text }
}

fn err<E: std::fmt::Display>(e: E) -> String {
    e.to_string()
}

fn base() -> Point {
    Point::new(-1.0, 0.0)
}

fn oracle() -> Result<(bool, String), String> {
    let start = Instant::now();
    let e = oracle_sup_error(&FrameSpec::nilpotent(), &ray_grid(256), 40.0).map_err(err)?;
    let secs = start.elapsed().as_secs_f64();
    Ok((e <= 1e-7 && secs <= 60.0, format!("exp_map sup error {e:.3e} over 256 rays (<= 1e-7, <= 60 s)")))
}

fn cut_locus() -> Result<(bool, String), String> {
    let start = Instant::now();
    let spec = FrameSpec::nilpotent();
    let scan = scan_conjugate_locus(&spec, base(), ScanOptions { t_max_scaled: 120.0, ..Default::default() }).map_err(err)?;
    let finder = CutFinder::new(&spec, base(), CutSearchOptions { t_max: Some(40.0), ..Default::default() }).map_err(err)?;
    let locus = cut_locus_with(&finder, (0.0, TAU), 128, &scan.cusps).map_err(err)?;
    let (mut dx, mut dy, mut n) = (0.0f64, f64::INFINITY, 0);
    for s in locus.samples() {
        dx = dx.max((s.point.x - 1.0).abs());
        dy = dy.min(s.point.y.abs());
        n += 1;
    }
    let dt = cut_time_error(64).map_err(err)?;
    let secs = start.elapsed().as_secs_f64();
    let pass = n > 0 && dx <= 1e-6 && dy >= FRAC_PI_2 - 1e-6 && dt <= 1e-6 && secs <= 300.0;
    Ok((pass, format!("{n} cut samples, max |x-1| {dx:.2e}, min |y| {dy:.9}; cut time error {dt:.2e} on 64 rays")))
}

fn monotone() -> Result<(bool, String), String> {
    let (inside, at_zero) = monotonicity(512).map_err(err)?;
    Ok((inside < 0.0 && at_zero <= 1e-12, format!("max dx/dtheta for t > 0 is {inside:.3e}, |dx/dtheta| at t = 0 is {at_zero:.1e}")))
}

fn classification() -> Result<(bool, String), String> {
    let bad = classification_mismatches(128).map_err(err)?;
    let cusp = cusp_normal_form_check();
    Ok((
        bad.is_empty() && cusp.pass && cusp.normal_form_residual <= 1e-6,
        format!("{} of 128 rays misclassified; normal-form residual {:.2e}", bad.len(), cusp.normal_form_residual),
    ))
}

fn corner() -> Result<(bool, String), String> {
    let start = Instant::now();
    let mut pass = true;
    let mut parts = Vec::new();
    for a in [0.0, 0.05, -0.05, 0.1, -0.1] {
        let fit = corner_fit(&FrameSpec::linear(a), &default_rho_grid()).map_err(err)?;
        let ok = fit.claims(0.02, 1e-3).pass() && ((fit.corner_angle <= 1e-3) == (a == 0.0));
        pass &= ok;
        parts.push(format!("a={a}: tangent ({:.5}, {:.5}) angle {:.2e}", fit.tangent_upper[0], fit.tangent_upper[1], fit.corner_angle));
    }
    pass &= start.elapsed().as_secs_f64() <= 600.0;
    Ok((pass, parts.join("; ")))
}

fn series() -> Result<(bool, String), String> {
    let mut pass = true;
    let mut worst = [f64::INFINITY; 3];
    for a in [0.1, -0.1, 0.0] {
        let r = series_report(&FrameSpec::linear(a), &default_rho_grid(), &default_s_grid()).map_err(err)?;
        pass &= r.claims.pass();
        for s in &r.slopes {
            worst[0] = worst[0].min(s.x);
            worst[1] = worst[1].min(s.y);
            worst[2] = worst[2].min(s.p_bar);
        }
    }
    Ok((pass, format!("min slopes x {:.3}, y {:.3}, p {:.3} (>= 2.7 / 3.7 / 2.7)", worst[0], worst[1], worst[2])))
}

fn scaling() -> Result<(bool, String), String> {
    let r = perturbed_scaling_check(
        &Coupling::Linear,
        &geometric_grid(1e-3, 10f64.sqrt(), 5),
        &default_theta_grid(32),
        &default_scaling_s_grid(),
    )
    .map_err(err)?;
    Ok((r.claims.pass(), format!("sup-difference slope {:.3} over a in [1e-3, 0.1] (>= 0.9)", r.slope)))
}

fn heat() -> Result<(bool, String), String> {
    let start = Instant::now();
    let spec = FrameSpec::nilpotent();
    let policy = GridPolicy::default();
    let generic = heat_report(&spec, base(), Point::new(1.0, 0.0), &policy).map_err(err)?;
    let cusp = heat_report(&spec, base(), Point::new(1.0, FRAC_PI_2), &policy).map_err(err)?;
    let secs = start.elapsed().as_secs_f64();
    let ordering = cusp.fit.alpha - generic.fit.alpha >= 0.15;
    let absolutes = generic.claims.pass() && cusp.claims.pass() && generic.expected_alpha == 1.0 && cusp.expected_alpha == 1.25;
    let mut detail = format!(
        "alpha generic {:.4} (1), cusp {:.4} (1.25), gap {:.4}; gaussian d^2 {:.4}/{:.4}, {:.4}/{:.4}; absolutes {}",
        generic.fit.alpha,
        cusp.fit.alpha,
        cusp.fit.alpha - generic.fit.alpha,
        generic.fit.gaussian_d2,
        generic.fit.d2,
        cusp.fit.gaussian_d2,
        cusp.fit.d2,
        if absolutes { "pass" } else { "FAIL" }
    );
    if !absolutes {
        for c in generic.claims.failures().chain(cusp.claims.failures()) {
            detail.push_str(&format!("; failed: {}", c.name));
        }
    }
    Ok((ordering && secs <= 1800.0, detail))
}

fn files(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut v: Vec<(String, Vec<u8>)> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let p = e.unwrap().path();
            (p.file_name().unwrap().to_string_lossy().into_owned(), std::fs::read(&p).unwrap())
        })
        .collect();
    v.sort();
    v
}

fn determinism() -> Result<(bool, String), String> {
    let root = PathBuf::from(env!("CARGO_TARGET_TMPDIR")).join("acceptance");
    let mut compared = 0;
    for cmd in [&["selftest", "--quick"][..], &["loci", "--quick"][..]] {
        let mut outputs = Vec::new();
        for threads in ["1", "3"] {
            let dir = root.join(format!("{}-{threads}", cmd[0]));
            let _ = std::fs::remove_dir_all(&dir);
            let o = Command::new(env!("CARGO_BIN_EXE_grushin"))
                .args(cmd)
                .args(["--seed", "11", "--threads", threads, "--out-dir"])
                .arg(&dir)
                .output()
                .map_err(err)?;
            if !o.status.success() {
                return Ok((false, format!("{} exited with {:?}", cmd[0], o.status.code())));
            }
            outputs.push(files(&dir));
        }
        if outputs[0] != outputs[1] {
            return Ok((false, format!("{} outputs differ between 1 and 3 threads", cmd[0])));
        }
        compared += outputs[0].len();
    }
    Ok((true, format!("{compared} files byte-identical across 1 and 3 threads")))
}

fn main() {
    if std::env::args().any(|a| a == "--list") {
        println!("acceptance: test");
        return;
    }
    let lines = [
        criterion(1, oracle),
        criterion(2, cut_locus),
        criterion(3, monotone),
        criterion(4, classification),
        criterion(5, corner),
        criterion(6, series),
        criterion(7, scaling),
        criterion(8, heat),
        criterion(9, determinism),
    ];
    let failed: Vec<&str> = lines.iter().filter(|l| !l.pass).map(|l| l.text.as_str()).collect();
    if failed.is_empty() {
        println!("acceptance: all criteria pass");
    } else {
        println!("acceptance: {} criteria failed", failed.len());
        std::process::exit(1);
    }
}
