//! Heat equation of the structure with Lebesgue volume, and the small-time
//! exponents of its kernel.
//!
//! The generator is `Δu = ∂_x² u + ∂_y((x f)² ∂_y u)` on a Dirichlet box,
//! integrated from a discrete delta. Kernel values at a target are fitted to
//! `C t^{−α} e^{−d²/4t}` over a window where `d²/4t` runs from 12 down to 3.

mod evolve;
mod fit;
mod operator;

pub use evolve::{solve_heat, HeatRun, SolverOptions};
pub use fit::{fit_exponent, ExponentFit, MIN_R2};
pub use operator::{build_operator, Grid2D, HeatOperator, BOUNDARY_CELLS};

use serde::Serialize;

use crate::error::{Error, Result};
use crate::frame::{FrameSpec, Point};
use crate::loci::{conjugate_time, distance, DistanceResult};
use crate::report::{Claim, ClaimReport};

/// Grid and window choices for [`heat_report`].
#[derive(Debug, Clone, Copy)]
pub struct GridPolicy {
    /// Cells along the longer box side.
    pub cells: usize,
    /// Box half-width about the midpoint of source and target, in units of
    /// `d + 4√t_max`.
    pub margin: f64,
    /// Number of fit times, geometric over the window.
    pub times: usize,
    pub solver: SolverOptions,
}

impl Default for GridPolicy {
    fn default() -> Self {
        Self { cells: 512, margin: 1.0, times: 8, solver: SolverOptions::default() }
    }
}

impl GridPolicy {
    pub fn quick() -> Self {
        Self { cells: 160, ..Self::default() }
    }
}

/// Fit window `[d²/48, d²/12]`: `d²/4t` from 12 down to 3.
pub fn fit_window(d2: f64) -> (f64, f64) {
    (d2 / 48.0, d2 / 12.0)
}

pub fn window_times(d2: f64, n: usize) -> Vec<f64> {
    let (lo, hi) = fit_window(d2);
    (0..n).map(|k| lo * (hi / lo).powf(k as f64 / (n - 1) as f64)).collect()
}

/// Square-celled box centred between `p` and `q`, with both on grid nodes.
pub fn grid_for_pair(p: Point, q: Point, d: f64, t_max: f64, policy: &GridPolicy) -> Result<Grid2D> {
    let l = policy.margin * (d + 4.0 * t_max.sqrt());
    let (cx, cy) = (0.5 * (p.x + q.x), 0.5 * (p.y + q.y));
    Grid2D::aligned(&[p, q], (cx - l, cx + l), (cy - l, cy + l), 2.0 * l / policy.cells as f64)
}

#[derive(Debug, Clone, Serialize)]
pub struct HeatReport {
    pub source: Point,
    pub target: Point,
    pub distance: DistanceResult,
    /// Whether the optimal geodesic ends at a conjugate point.
    pub conjugate: bool,
    pub expected_alpha: f64,
    pub grid: Grid2D,
    pub fit: ExponentFit,
    pub run: HeatRun,
    pub claims: ClaimReport,
}

pub const ALPHA_TOL: f64 = 0.15;
pub const GAUSSIAN_REL_TOL: f64 = 0.05;

/// Kernel exponent at `(x, y)` against the value predicted from the
/// optimal geodesics: `5/4` when a single minimiser is conjugate at `y`,
/// `1` otherwise.
pub fn heat_report(spec: &FrameSpec, x: Point, y: Point, policy: &GridPolicy) -> Result<HeatReport> {
    if !spec.is_riemannian(x) {
        return Err(Error::SingularPoint { x: x.x, y: x.y });
    }
    let dist = distance(spec, x, y)?;
    let d = dist.d;
    let optimal: Vec<_> = dist.roots.iter().filter(|r| r.t - d <= 1e-6 * (1.0 + d)).collect();
    let mut conjugate = false;
    for r in &optimal {
        match conjugate_time(spec, x, r.theta, 2.0 * d + 1.0) {
            Ok(tc) if (tc - r.t).abs() <= 1e-4 * (1.0 + d) => conjugate = true,
            Ok(_) | Err(Error::NoConjugatePoint { .. }) => {}
            Err(e) => return Err(e),
        }
    }
    let expected_alpha = if conjugate && dist.multiplicity == 1 { 1.25 } else { 1.0 };
    let d2 = d * d;
    let times = window_times(d2, policy.times);
    let t_max = times[times.len() - 1];
    let grid = grid_for_pair(x, y, d, t_max, policy)?;
    let op = build_operator(spec, grid);
    let run = solve_heat(&op, x, &[y], &times, policy.solver)?;
    let fit = fit_exponent(&run, 0, d2)?;
    let mut claims = ClaimReport::default();
    claims.push(Claim::close(format!("kernel exponent alpha at ({}, {})", y.x, y.y), expected_alpha, fit.alpha, 0.0, ALPHA_TOL));
    claims.push(Claim::close(format!("gaussian d^2 at ({}, {})", y.x, y.y), d2, fit.gaussian_d2, GAUSSIAN_REL_TOL, 0.0));
    Ok(HeatReport { source: x, target: y, distance: dist, conjugate, expected_alpha, grid, fit, run, claims })
}
