//! Oracle-agreement and invariant checks, sized for a quick run or a full
//! one. Each check function is also usable on its own at any resolution.

use std::f64::consts::{PI, TAU};
use std::fmt::Write as _;

use grushin_core::asymptotics::{
    corner_fit, default_rho_grid, default_s_grid, default_scaling_s_grid, default_theta_grid, perturbed_scaling_check,
    series_report, Coupling,
};
use grushin_core::exact::{cusp_normal_form_check, exact_cut_time, exact_geodesic, exact_x_theta_derivative};
use grushin_core::heat::{build_operator, solve_heat, Grid2D, SolverOptions};
use grushin_core::integrator::integrate;
use grushin_core::loci::{distance, scan_conjugate_locus, CutFinder, CutSearchOptions, ScanOptions};
use grushin_core::stats::geometric_grid;
use grushin_core::{FrameSpec, GeodesicState, HamiltonianFlow, Point, Result, SingularityClass, DEFAULT_TOL};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::config::{Fault, Settings};

/// A flow with a deliberate defect, for mutation checks.
pub struct FaultyFlow<'a> {
    pub spec: &'a FrameSpec,
    pub fault: Fault,
}

impl HamiltonianFlow for FaultyFlow<'_> {
    fn hamiltonian(&self, s: &[f64; 4]) -> f64 {
        self.spec.hamiltonian(s)
    }

    fn rhs(&self, s: &[f64; 4]) -> [f64; 4] {
        let mut r = self.spec.rhs(s);
        match self.fault {
            Fault::PxSign => r[2] = -r[2],
        }
        r
    }

    fn rhs_jacobian(&self, s: &[f64; 4]) -> [[f64; 4]; 4] {
        let mut j = self.spec.rhs_jacobian(s);
        match self.fault {
            Fault::PxSign => j[2].iter_mut().for_each(|v| *v = -*v),
        }
        j
    }
}

fn grushin_base() -> Point {
    Point::new(-1.0, 0.0)
}

/// Largest gap between integrated and closed-form geodesics from `(−1, 0)`
/// over the ray angles, at every integrator node up to
/// `min(π/|sin θ|, t_cap)`.
pub fn oracle_sup_error<F: HamiltonianFlow + ?Sized>(flow: &F, thetas: &[f64], t_cap: f64) -> Result<f64> {
    let spec = FrameSpec::nilpotent();
    let mut worst = 0.0f64;
    for &theta in thetas {
        let base = grushin_base();
        let s0 = GeodesicState { point: base, covector: spec.unit_covector(base, theta)? };
        let t_end = (PI / theta.sin().abs()).min(t_cap);
        let traj = integrate(flow, s0, t_end, DEFAULT_TOL)?;
        for (i, &t) in traj.times().iter().enumerate() {
            let p = traj.node_state(i).point;
            let e = exact_geodesic(theta, t);
            worst = worst.max((p.x - e.x).abs()).max((p.y - e.y).abs());
        }
    }
    Ok(worst)
}

/// Uniform angles `2πk/n`.
pub fn ray_grid(n: usize) -> Vec<f64> {
    (0..n).map(|k| TAU * k as f64 / n as f64).collect()
}

/// Largest `|cut_time − π/|sin θ||` over the rays of `ray_grid(n)` at least
/// `0.1` from the horizontal.
pub fn cut_time_error(n: usize) -> Result<f64> {
    let finder = CutFinder::new(
        &FrameSpec::nilpotent(),
        grushin_base(),
        CutSearchOptions { t_max: Some(40.0), ..Default::default() },
    )?;
    let mut worst = 0.0f64;
    for theta in ray_grid(n) {
        if theta.sin().abs().asin() < 0.1 {
            continue;
        }
        let c = finder.cut_time(theta)?;
        worst = worst.max((c.t_cut - exact_cut_time(theta)).abs());
    }
    Ok(worst)
}

/// Largest `∂x/∂θ` over `t > 0` and largest `|∂x/∂θ|` at `t = 0`, on an
/// `n × n` grid of `θ ∈ (0, π)` and `t ∈ [0, t_cut(θ)]`.
pub fn monotonicity(n: usize) -> Result<(f64, f64)> {
    let (mut inside, mut at_zero) = (f64::NEG_INFINITY, 0.0f64);
    for i in 0..n {
        let th = PI * (i as f64 + 0.5) / n as f64;
        let t_cut = exact_cut_time(th);
        for j in 0..n {
            let t = t_cut * j as f64 / (n - 1) as f64;
            let d = exact_x_theta_derivative(th, t)?;
            if j == 0 {
                at_zero = at_zero.max(d.abs());
            } else {
                inside = inside.max(d);
            }
        }
    }
    Ok((inside, at_zero))
}

/// Rays of an `n`-ray scan from `(−1, 0)` whose class differs from
/// fold, or cusp on the vertical rays. Horizontal rays must have no
/// conjugate point.
pub fn classification_mismatches(n: usize) -> Result<Vec<f64>> {
    let scan = scan_conjugate_locus(
        &FrameSpec::nilpotent(),
        grushin_base(),
        ScanOptions { rays: n, t_max_scaled: 120.0, ..Default::default() },
    )?;
    Ok(scan
        .rays
        .iter()
        .filter(|r| {
            let expected = if r.theta.sin().abs() < 1e-12 {
                None
            } else if r.theta.cos().abs() < 1e-12 {
                Some(SingularityClass::CuspA3)
            } else {
                Some(SingularityClass::FoldA2)
            };
            r.report.map(|p| p.class) != expected
        })
        .map(|r| r.theta)
        .collect())
}

/// Max relative gap to the Euclidean kernel near `(−1, 0)` at small time.
pub fn euclidean_kernel_error() -> Result<f64> {
    let spec = FrameSpec::nilpotent();
    let src = grushin_base();
    let grid = Grid2D::aligned(&[src], (-1.2, -0.8), (-0.2, 0.2), 0.0025)?;
    let op = build_operator(&spec, grid);
    let t = 1e-3;
    let targets = [Point::new(-1.0, 0.0), Point::new(-0.95, 0.0), Point::new(-1.0, 0.07), Point::new(-1.06, -0.06)];
    let run = solve_heat(&op, src, &targets, &[t], SolverOptions::default())?;
    Ok(targets
        .iter()
        .zip(&run.values[0])
        .map(|(p, v)| {
            let r2 = (p.x - src.x).powi(2) + (p.y - src.y).powi(2);
            let e = (-r2 / (4.0 * t)).exp() / (4.0 * PI * t);
            (v / e - 1.0).abs()
        })
        .fold(0.0, f64::max))
}

/// Largest mass increase between consecutive times and the smallest kernel
/// value, on a coarse perturbed grid.
pub fn heat_mass_and_positivity() -> Result<(f64, f64)> {
    let src = Point::new(-0.5, 0.0);
    let grid = Grid2D::aligned(&[src], (-1.5, 1.5), (-1.5, 1.5), 0.0625)?;
    let op = build_operator(&FrameSpec::linear(0.2), grid);
    let times: Vec<f64> = (1..=8).map(|k| 0.05 * f64::from(k)).collect();
    let run = solve_heat(&op, src, &[Point::new(0.4, 0.3)], &times, SolverOptions::default())?;
    let rise = run.mass.windows(2).map(|w| w[1] - w[0]).fold(f64::NEG_INFINITY, f64::max);
    let min = run.values.iter().map(|v| v[0]).fold(f64::INFINITY, f64::min);
    Ok((rise.max(run.mass[0] - 1.0), min))
}

#[derive(Debug, Clone, Serialize)]
pub struct CheckRow {
    pub name: String,
    pub value: f64,
    /// Human-readable acceptance condition.
    pub condition: String,
    pub pass: bool,
    pub detail: Option<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct SelftestReport {
    pub quick: bool,
    pub seed: u64,
    pub rows: Vec<CheckRow>,
}

impl SelftestReport {
    pub fn pass(&self) -> bool {
        self.rows.iter().all(|r| r.pass)
    }

    pub fn failures(&self) -> Vec<String> {
        self.rows.iter().filter(|r| !r.pass).map(|r| r.name.clone()).collect()
    }

    pub fn table(&self) -> String {
        let mut out = String::new();
        writeln!(out, "{:<28} {:>14}  {:<26} result", "check", "value", "condition").unwrap();
        for r in &self.rows {
            writeln!(
                out,
                "{:<28} {:>14.6e}  {:<26} {}{}",
                r.name,
                r.value,
                r.condition,
                if r.pass { "PASS" } else { "FAIL" },
                r.detail.as_ref().map_or(String::new(), |d| format!("  ({d})"))
            )
            .unwrap();
        }
        out
    }
}

struct Rows(Vec<CheckRow>);

impl Rows {
    /// Records `value` against `ok`, or the error if the check failed to run.
    fn push(&mut self, name: &str, condition: &str, value: Result<f64>, ok: impl Fn(f64) -> bool) {
        let row = match value {
            Ok(v) => CheckRow { name: name.into(), value: v, condition: condition.into(), pass: ok(v), detail: None },
            Err(e) => CheckRow {
                name: name.into(),
                value: f64::NAN,
                condition: condition.into(),
                pass: false,
                detail: Some(e.to_string()),
            },
        };
        self.0.push(row);
    }
}

pub fn run(s: &Settings) -> SelftestReport {
    let q = s.quick;
    let spec = FrameSpec::nilpotent();
    let mut rows = Rows(Vec::new());

    let mut rng = ChaCha8Rng::seed_from_u64(s.seed);
    let mut thetas = ray_grid(if q { 32 } else { 256 });
    thetas.extend((0..if q { 8 } else { 32 }).map(|_| rng.gen_range(0.0..TAU)));
    let oracle = match s.fault {
        Some(fault) => oracle_sup_error(&FaultyFlow { spec: &spec, fault }, &thetas, 40.0),
        None => oracle_sup_error(&spec, &thetas, 40.0),
    };
    rows.push("oracle_exp_map", "<= 1e-7", oracle, |v| v <= 1e-7);
    rows.push("cut_time", "<= 1e-6", cut_time_error(if q { 8 } else { 32 }), |v| v <= 1e-6);
    let mono = monotonicity(if q { 64 } else { 128 });
    rows.push("x_theta_monotone", "< -1e-12 for t > 0", mono.clone().map(|m| m.0), |v| v < -1e-12);
    rows.push("x_theta_zero_at_t0", "<= 1e-12", mono.map(|m| m.1), |v| v <= 1e-12);
    rows.push(
        "fold_cusp_classification",
        "== 0 mismatched rays",
        classification_mismatches(if q { 16 } else { 64 }).map(|m| m.len() as f64),
        |v| v == 0.0,
    );
    let cusp = cusp_normal_form_check();
    rows.push("cusp_normal_form", "<= 1e-6", Ok(cusp.normal_form_residual), |v| v <= 1e-6 && cusp.pass);
    rows.push(
        "distance_line",
        "|d - 2| <= 1e-8, mult 1",
        distance(&spec, grushin_base(), Point::new(1.0, 0.0)).map(|d| if d.multiplicity == 1 { (d.d - 2.0).abs() } else { f64::INFINITY }),
        |v| v <= 1e-8,
    );
    rows.push("heat_euclidean_kernel", "<= 0.05", euclidean_kernel_error(), |v| v <= 0.05);
    let heat = heat_mass_and_positivity();
    rows.push("heat_mass_monotone", "<= 1e-12", heat.clone().map(|h| h.0), |v| v <= 1e-12);
    rows.push("heat_positive", ">= 0", heat.map(|h| h.1), |v| v >= 0.0);

    if !q {
        let corner = corner_fit(&FrameSpec::linear(0.1), &default_rho_grid()).map(|f| f.claims(0.02, 1e-3));
        rows.push("corner_a_0.1", "== 0 failed claims", corner.map(|c| c.failures().count() as f64), |v| v == 0.0);
        let series = series_report(&FrameSpec::linear(0.1), &default_rho_grid(), &default_s_grid());
        rows.push("series_a_0.1", "== 0 failed claims", series.map(|r| r.claims.failures().count() as f64), |v| v == 0.0);
        let scaling = perturbed_scaling_check(
            &Coupling::Linear,
            &geometric_grid(1e-3, 10f64.sqrt(), 5),
            &default_theta_grid(8),
            &default_scaling_s_grid(),
        );
        rows.push("scaling_slope", ">= 0.9", scaling.map(|r| r.slope), |v| v >= 0.9);
    }
    SelftestReport { quick: q, seed: s.seed, rows: rows.0 }
}
