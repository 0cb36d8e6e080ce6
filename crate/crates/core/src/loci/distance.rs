use rayon::prelude::*;
use serde::Serialize;

use super::{angle_diff, wrap_angle, Scaled, StoredRay, LOCI_TOL};
use crate::error::{Error, Result};
use crate::frame::{FrameSpec, HamiltonianFlow, Point};
use crate::solve::{newton2, Newton2Options};

#[derive(Debug, Clone, Copy)]
pub struct DistanceOptions {
    pub starts: usize,
    /// Longest geodesic tried; defaults to `2(|Δx| + 2√|Δy|)`, at least `1`.
    pub horizon: Option<f64>,
    pub tol: f64,
}

impl Default for DistanceOptions {
    fn default() -> Self {
        Self { starts: 64, horizon: None, tol: LOCI_TOL }
    }
}

/// A geodesic from `p` reaching the target.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ShootingRoot {
    pub theta: f64,
    pub t: f64,
    pub residual: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DistanceResult {
    pub d: f64,
    pub theta: f64,
    pub t: f64,
    /// Number of distinct minimising geodesics found.
    pub multiplicity: usize,
    /// All distinct roots, sorted by length.
    pub roots: Vec<ShootingRoot>,
}

/// Roots whose lengths agree within this count towards the multiplicity.
const TIE_TOL: f64 = 1e-6;
/// Roots closer than this in `θ` are the same geodesic.
const SAME_RAY: f64 = 1e-3;

pub fn distance(spec: &FrameSpec, p: Point, q: Point) -> Result<DistanceResult> {
    distance_with(spec, p, q, DistanceOptions::default())
}

/// Sub-Riemannian distance by multi-start shooting from `p`.
///
/// Each start ray is followed to its closest approach to `q`, then Newton
/// on `(θ, t)` drives `exp_p(θ, t) − q` to zero. The shortest root is a
/// minimiser, so its length is the distance.
pub fn distance_with(spec: &FrameSpec, p: Point, q: Point, opts: DistanceOptions) -> Result<DistanceResult> {
    if !q.is_finite() {
        return Err(Error::InvalidArgument("target is not finite".into()));
    }
    if p == q {
        return Err(Error::InvalidArgument("distance needs p != q".into()));
    }
    if opts.starts < 4 {
        return Err(Error::InvalidArgument("distance needs at least 4 starts".into()));
    }
    let ctx = Scaled::for_base(spec, p)?;
    let dspec = ctx.dilated_spec();
    let l = ctx.lambda;
    let horizon = opts
        .horizon
        .unwrap_or_else(|| (2.0 * ((q.x - p.x).abs() + 2.0 * (q.y - p.y).abs().sqrt())).max(1.0));
    let tau_max = horizon / l;
    let target = ctx.point_to_scaled(q);
    let scale = 1.0 + target.x.abs() + target.y.abs();

    let solve = |theta0: f64| -> Result<Option<ShootingRoot>> {
        let ray = StoredRay::new(&ctx, &dspec, theta0, tau_max, opts.tol)?;
        let samples = 400;
        let tau0 = (1..=samples)
            .map(|k| tau_max * k as f64 / samples as f64)
            .map(|t| {
                let r = ray.raw_interp(t);
                (t, (r[0] - target.x).hypot(r[1] - target.y))
            })
            .min_by(|a, b| a.1.total_cmp(&b.1))
            .map(|(t, _)| t)
            .expect("non-empty sample set");
        let out = newton2(
            |x| {
                let (th, t) = (x[0], x[1]);
                if !(t > 0.0) || t > 1.5 * tau_max {
                    return Err(Error::InvalidArgument("outside shooting window".into()));
                }
                let traj = ctx.trajectory(&dspec, th, t, opts.tol)?;
                let raw = traj.node_raw(traj.len() - 1);
                let v = dspec.rhs(&[raw[0], raw[1], raw[2], raw[3]]);
                Ok(([raw[0] - target.x, raw[1] - target.y], [[raw[4], v[0]], [raw[5], v[1]]]))
            },
            [theta0, tau0],
            Newton2Options { tol: 1e-11 * scale, max_iter: 200, max_step: [0.3, 0.25 * tau_max] },
        );
        match out {
            Ok(o) if o.converged => Ok(Some(ShootingRoot { theta: wrap_angle(o.x[0]), t: o.x[1] * l, residual: o.residual })),
            Ok(_) | Err(Error::InvalidArgument(_)) => Ok(None),
            Err(e) => Err(e),
        }
    };

    let found: Vec<Option<ShootingRoot>> = (0..opts.starts)
        .into_par_iter()
        .map(|k| solve(std::f64::consts::TAU * k as f64 / opts.starts as f64))
        .collect::<Result<_>>()?;
    let mut roots: Vec<ShootingRoot> = found.into_iter().flatten().collect();
    if roots.is_empty() {
        return Err(Error::NoGeodesicFound(p.x, p.y, q.x, q.y));
    }
    roots.sort_by(|a, b| a.t.total_cmp(&b.t).then(a.theta.total_cmp(&b.theta)));
    let mut distinct: Vec<ShootingRoot> = Vec::new();
    for r in roots {
        let dup = distinct
            .iter()
            .any(|d| angle_diff(d.theta, r.theta).abs() < SAME_RAY && (d.t - r.t).abs() < 1e-6 * (1.0 + r.t));
        if !dup {
            distinct.push(r);
        }
    }
    let best = distinct[0];
    let multiplicity = distinct.iter().filter(|r| r.t - best.t <= TIE_TOL * (1.0 + best.t)).count();
    Ok(DistanceResult { d: best.t, theta: best.theta, t: best.t, multiplicity, roots: distinct })
}
