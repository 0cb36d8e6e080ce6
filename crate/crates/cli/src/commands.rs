use std::f64::consts::{FRAC_PI_2, PI, TAU};
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use grushin_core::asymptotics::{corner_fit, default_rho_grid, default_s_grid, series_report, CornerFit, SeriesReport};
use grushin_core::frame::grushin_initial;
use grushin_core::heat::{heat_report, ExponentFit, Grid2D, GridPolicy};
use grushin_core::integrator::integrate;
use grushin_core::loci::{
    compute_front, cut_locus_csv, cut_locus_json, cut_locus_with, loci_svg, scan_conjugate_locus, trajectory_svg,
    ConjugatePointRecord, CutFinder, CutSearchOptions, DistanceResult, ScanOptions, SvgView,
};
use grushin_core::report::ClaimReport;
use grushin_core::stats::geometric_grid;
use grushin_core::{FrameSpec, GeodesicState, Point, DEFAULT_TOL};
use serde::Serialize;

use crate::config::{CornerArgs, GeodesicArgs, HeatArgs, LociArgs, SeriesArgs, Settings};
use crate::error::{CliError, CliResult};

/// Files written by a subcommand and the text it prints.
#[derive(Debug, Default)]
pub struct Output {
    pub files: Vec<PathBuf>,
    pub stdout: String,
}

impl Output {
    pub(crate) fn write(&mut self, dir: &Path, name: &str, contents: &str) -> CliResult<()> {
        std::fs::create_dir_all(dir).map_err(|source| CliError::Io { path: dir.display().to_string(), source })?;
        let path = dir.join(name);
        std::fs::write(&path, contents).map_err(|source| CliError::Io { path: path.display().to_string(), source })?;
        self.files.push(path);
        Ok(())
    }

    pub(crate) fn write_json<T: Serialize>(&mut self, dir: &Path, name: &str, value: &T) -> CliResult<()> {
        let mut text = serde_json::to_string_pretty(value).expect("report serialises");
        text.push('\n');
        self.write(dir, name, &text)
    }
}

fn claims_outcome(out: Output, claims: &ClaimReport) -> CliResult<Output> {
    if claims.pass() {
        Ok(out)
    } else {
        print!("{}", out.stdout);
        Err(CliError::Threshold(claims.failures().map(|c| c.name.clone()).collect()))
    }
}

/// Square window around `pts`, padded by 10%.
fn view_around(pts: impl Iterator<Item = Point>) -> SvgView {
    let (mut x0, mut x1, mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
    for p in pts.filter(|p| p.is_finite()) {
        x0 = x0.min(p.x);
        x1 = x1.max(p.x);
        y0 = y0.min(p.y);
        y1 = y1.max(p.y);
    }
    if !x0.is_finite() {
        return SvgView::default();
    }
    let half = (0.5 * (x1 - x0).max(y1 - y0) * 1.1).max(0.5);
    let (cx, cy) = (0.5 * (x0 + x1), 0.5 * (y0 + y1));
    SvgView { x_min: cx - half, x_max: cx + half, y_min: cy - half, y_max: cy + half }
}

pub fn geodesic(s: &Settings, a: GeodesicArgs) -> CliResult<Output> {
    let t = a.t.unwrap_or(1.0);
    let tol = a.tol.unwrap_or(DEFAULT_TOL);
    let s0 = match a.rho {
        Some(rho) => grushin_initial(rho, a.sign.unwrap_or(1.0))?,
        None => {
            let base = Point::new(a.base_x.unwrap_or(-1.0), a.base_y.unwrap_or(0.0));
            GeodesicState { point: base, covector: s.spec.unit_covector(base, a.theta.unwrap_or(0.0))? }
        }
    };
    let traj = integrate(&s.spec, s0, t, tol)?;
    let mut out = Output::default();
    out.write(&s.out_dir, "geodesic.csv", &traj.to_csv())?;
    let pts: Vec<Point> = (0..=400).map(|k| traj.state_at(t * f64::from(k) / 400.0).point).collect();
    out.write(&s.out_dir, "geodesic.svg", &trajectory_svg(&pts, view_around(pts.iter().copied())))?;
    let end = traj.end_state().point;
    writeln!(out.stdout, "endpoint {:.10} {:.10}", end.x, end.y).unwrap();
    Ok(out)
}

#[derive(Serialize)]
struct BranchSummary {
    samples: usize,
    first: Point,
    last: Point,
    start_at_cusp: bool,
    end_at_cusp: bool,
    tangent_start: [f64; 2],
    tangent_end: [f64; 2],
}

#[derive(Serialize)]
struct LociSummary {
    base: Point,
    cusp_count: usize,
    fold_count: usize,
    cusps: Vec<ConjugatePointRecord>,
    branches: Vec<BranchSummary>,
    unresolved_rays: usize,
}

pub fn loci(s: &Settings, a: LociArgs) -> CliResult<Output> {
    let base = Point::new(a.base_x.unwrap_or(-1.0), a.base_y.unwrap_or(0.0));
    if !s.spec.is_riemannian(base) {
        return Err(grushin_core::Error::SingularPoint { x: base.x, y: base.y }.into());
    }
    let lambda = s.spec.frame_coefficient(base).abs();
    let default_rays = if s.quick { 32 } else { 128 };
    let scan = scan_conjugate_locus(
        &s.spec,
        base,
        ScanOptions { rays: a.rays.unwrap_or(default_rays), t_max_scaled: 120.0, ..Default::default() },
    )?;
    let finder = CutFinder::new(
        &s.spec,
        base,
        CutSearchOptions { t_max: Some(a.t_max.unwrap_or(40.0 * lambda)), ..Default::default() },
    )?;
    let locus = cut_locus_with(&finder, (0.0, TAU), a.resolution.unwrap_or(default_rays), &scan.cusps)?;
    let front_samples = if s.quick { 128 } else { 256 };
    let fronts = [0.5, 1.0, 1.5]
        .iter()
        .map(|k| compute_front(&s.spec, base, k * PI * lambda, front_samples))
        .collect::<grushin_core::Result<Vec<_>>>()?;

    let records = scan.records();
    let mut conj = String::from("theta,t_conj,x,y,class\n");
    for r in &records {
        writeln!(conj, "{:.16e},{:.16e},{:.16e},{:.16e},{}", r.theta, r.t_conj, r.point.x, r.point.y, r.class).unwrap();
    }
    let cx = base.x - base.x.signum() * lambda;
    let view = SvgView { x_min: cx - 3.0 * lambda, x_max: cx + 3.0 * lambda, y_min: base.y - 3.0 * lambda, y_max: base.y + 3.0 * lambda };
    let summary = LociSummary {
        base,
        cusp_count: scan.cusp_count,
        fold_count: scan.fold_count,
        cusps: scan.cusps.clone(),
        branches: locus
            .branches
            .iter()
            .map(|b| BranchSummary {
                samples: b.samples.len(),
                first: b.samples[0].point,
                last: b.samples[b.samples.len() - 1].point,
                start_at_cusp: b.start_at_cusp,
                end_at_cusp: b.end_at_cusp,
                tangent_start: b.tangent_start,
                tangent_end: b.tangent_end,
            })
            .collect(),
        unresolved_rays: locus.unresolved.len(),
    };

    let mut out = Output::default();
    out.write(&s.out_dir, "conjugate.csv", &conj)?;
    out.write(&s.out_dir, "cut_locus.csv", &cut_locus_csv(&locus))?;
    out.write(&s.out_dir, "cut_locus.json", &(cut_locus_json(&locus) + "\n"))?;
    out.write(&s.out_dir, "loci.svg", &loci_svg(&fronts, Some(&locus), &records, view))?;
    out.write_json(&s.out_dir, "summary.json", &summary)?;
    writeln!(out.stdout, "cusps {} folds {} cut branches {}", summary.cusp_count, summary.fold_count, summary.branches.len()).unwrap();
    for c in &summary.cusps {
        writeln!(out.stdout, "cusp at ({:.8}, {:.8}) theta {:.8}", c.point.x, c.point.y, c.theta).unwrap();
    }
    Ok(out)
}

fn spec_with_a(s: &Settings, a: Option<f64>) -> FrameSpec {
    a.map_or_else(|| s.spec.clone(), FrameSpec::linear)
}

fn rho_grid(quick: bool) -> Vec<f64> {
    if quick {
        geometric_grid(4e-3, 2.0, 5)
    } else {
        default_rho_grid()
    }
}

#[derive(Serialize)]
struct CornerOutput<'a> {
    fit: &'a CornerFit,
    expected_tangent: [f64; 2],
    expected_alpha: f64,
    claims: &'a ClaimReport,
}

pub fn corner(s: &Settings, a: CornerArgs) -> CliResult<Output> {
    let spec = spec_with_a(s, a.a);
    let fit = corner_fit(&spec, &rho_grid(s.quick))?;
    let claims = fit.claims(a.rel_tol.unwrap_or(0.02), 1e-3);
    let mut out = Output::default();
    out.write_json(
        &s.out_dir,
        "corner.json",
        &CornerOutput {
            fit: &fit,
            expected_tangent: CornerFit::expected_tangent(spec.a()),
            expected_alpha: CornerFit::expected_alpha(spec.a()),
            claims: &claims,
        },
    )?;
    out.stdout = claims.to_text();
    claims_outcome(out, &claims)
}

pub fn series(s: &Settings, a: SeriesArgs) -> CliResult<Output> {
    let spec = spec_with_a(s, a.a);
    let report: SeriesReport = series_report(&spec, &rho_grid(s.quick), &default_s_grid())?;
    let mut out = Output::default();
    out.write_json(&s.out_dir, "series.json", &report)?;
    out.stdout = report.claims.to_text();
    claims_outcome(out, &report.claims)
}

#[derive(Serialize)]
struct HeatOutput<'a> {
    source: Point,
    target: Point,
    distance: &'a DistanceResult,
    conjugate: bool,
    expected_alpha: f64,
    grid: Grid2D,
    fit: ExponentFit,
    cg_iterations: usize,
    claims: &'a ClaimReport,
}

pub fn heat(s: &Settings, a: HeatArgs) -> CliResult<Output> {
    let x = Point::new(a.source_x.unwrap_or(-1.0), a.source_y.unwrap_or(0.0));
    let y = Point::new(a.target_x.unwrap_or(1.0), a.target_y.unwrap_or(FRAC_PI_2));
    let default = if s.quick { GridPolicy::quick() } else { GridPolicy::default() };
    let policy = GridPolicy { cells: a.cells.unwrap_or(default.cells), margin: a.margin.unwrap_or(default.margin), ..default };
    let r = heat_report(&s.spec, x, y, &policy)?;
    let mut out = Output::default();
    out.write_json(
        &s.out_dir,
        "heat.json",
        &HeatOutput {
            source: r.source,
            target: r.target,
            distance: &r.distance,
            conjugate: r.conjugate,
            expected_alpha: r.expected_alpha,
            grid: r.grid,
            fit: r.fit,
            cg_iterations: r.run.cg_iterations,
            claims: &r.claims,
        },
    )?;
    out.write(&s.out_dir, "heat.csv", &r.run.to_csv())?;
    writeln!(
        out.stdout,
        "d = {:.8}, multiplicity {}, conjugate {}, alpha = {:.4} (expected {}), gaussian d^2 = {:.4} (loci {:.4})",
        r.distance.d, r.distance.multiplicity, r.conjugate, r.fit.alpha, r.expected_alpha, r.fit.gaussian_d2, r.fit.d2
    )
    .unwrap();
    out.stdout.push_str(&r.claims.to_text());
    claims_outcome(out, &r.claims)
}
