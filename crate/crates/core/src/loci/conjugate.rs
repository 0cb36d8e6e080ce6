use rayon::prelude::*;
use serde::Serialize;

use super::{jacobian_and_rate, Scaled, StoredRay};
use crate::error::{Error, Result};
use crate::exact::{fold_threshold, SingularityClass};
use crate::frame::{FrameSpec, Point};

/// Integration tolerance for conjugate times and their classification.
pub const CLASSIFY_TOL: f64 = 1e-12;

/// First conjugate point of a ray.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ConjugatePointRecord {
    pub theta: f64,
    pub t_conj: f64,
    pub point: Point,
    pub class: SingularityClass,
}

/// Classification data at the first conjugate point of a ray.
///
/// With `J(θ, t) = det(∂γ/∂θ, ∂γ/∂t)`, the fold test uses
/// `∂J/∂θ / (t_c |∂J/∂t|)` and the cusp test `∂²J/∂θ² / (t_c |∂J/∂t|)`,
/// both dimensionless and computed in the dilated frame.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SingularityReport {
    pub theta: f64,
    pub t_conj: f64,
    pub point: Point,
    pub d_normalized: f64,
    pub second_normalized: f64,
    pub threshold: f64,
    pub class: SingularityClass,
}

impl SingularityReport {
    pub fn record(&self) -> ConjugatePointRecord {
        ConjugatePointRecord {
            theta: self.theta,
            t_conj: self.t_conj,
            point: self.point,
            class: self.class,
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct ScanOptions {
    pub rays: usize,
    /// Search horizon in units of `|x f(base)|`.
    pub t_max_scaled: f64,
    pub tol: f64,
}

impl Default for ScanOptions {
    fn default() -> Self {
        Self { rays: 128, t_max_scaled: 40.0, tol: CLASSIFY_TOL }
    }
}

/// First zero of `J` along ray `θ` in dilated time, and the state there.
pub(crate) fn first_conjugate(
    ctx: &Scaled,
    dspec: &FrameSpec,
    theta: f64,
    tau_max: f64,
    tol: f64,
) -> Result<(f64, Vec<f64>)> {
    let ray = StoredRay::new(ctx, dspec, theta, tau_max, tol)?;
    first_conjugate_on(&ray, dspec)?.ok_or(Error::NoConjugatePoint { theta, t_max: tau_max * ctx.lambda })
}

/// First zero of `J` along an integrated ray, if it has one.
pub(crate) fn first_conjugate_on(ray: &StoredRay, dspec: &FrameSpec) -> Result<Option<(f64, Vec<f64>)>> {
    let times = ray.traj.times();
    let js: Vec<f64> = (0..times.len()).map(|i| jacobian_and_rate(dspec, ray.traj.node_raw(i)).0).collect();
    let Some(start) = (1..times.len()).find(|&i| js[i] != 0.0) else {
        return Ok(None);
    };
    let sign0 = js[start].signum();
    let Some(hit) = (start + 1..times.len()).find(|&i| js[i] * sign0 <= 0.0) else {
        return Ok(None);
    };
    let (mut lo, mut hi) = (times[hit - 1], times[hit]);
    if js[hit] == 0.0 {
        return Ok(Some((hi, ray.traj.node_raw(hit).to_vec())));
    }
    let mut t = 0.5 * (lo + hi);
    let mut raw = ray.raw_at(dspec, t)?;
    for _ in 0..200 {
        let (j, jt) = jacobian_and_rate(dspec, &raw);
        if j == 0.0 {
            break;
        }
        if j * sign0 > 0.0 {
            lo = t;
        } else {
            hi = t;
        }
        let newton = t - j / jt;
        let next = if newton > lo && newton < hi { newton } else { 0.5 * (lo + hi) };
        let step = (next - t).abs();
        let done = step <= 1e-14 * t.max(1.0) || hi - lo <= 1e-13 * t.max(1.0);
        t = next;
        raw = ray.raw_at(dspec, t)?;
        if done {
            break;
        }
    }
    Ok(Some((t, raw)))
}

/// First zero of `det(∂γ/∂θ, ∂γ/∂t)` along ray `θ` from `base`, searched up
/// to `t_max`.
pub fn conjugate_time(spec: &FrameSpec, base: Point, theta: f64, t_max: f64) -> Result<f64> {
    Ok(conjugate_point(spec, base, theta, t_max, CLASSIFY_TOL)?.0)
}

/// Conjugate time and point along ray `θ`.
pub fn conjugate_point(spec: &FrameSpec, base: Point, theta: f64, t_max: f64, tol: f64) -> Result<(f64, Point)> {
    let ctx = Scaled::for_base(spec, base)?;
    let dspec = ctx.dilated_spec();
    let (tau, raw) = first_conjugate(&ctx, &dspec, theta, t_max / ctx.lambda, tol)?;
    Ok((tau * ctx.lambda, ctx.point_to_orig(raw[0], raw[1])))
}

fn ray_jacobian(ctx: &Scaled, dspec: &FrameSpec, theta: f64, tau: f64, tol: f64) -> Result<f64> {
    let traj = ctx.trajectory(dspec, theta, tau, tol)?;
    Ok(jacobian_and_rate(dspec, traj.node_raw(traj.len() - 1)).0)
}

pub(crate) fn report_scaled(
    ctx: &Scaled,
    dspec: &FrameSpec,
    theta: f64,
    tau_max: f64,
    tol: f64,
) -> Result<SingularityReport> {
    let (tau, raw) = first_conjugate(ctx, dspec, theta, tau_max, tol)?;
    let (j0, jt) = jacobian_and_rate(dspec, &raw);
    let h1 = 1e-4;
    let h2 = 2e-3;
    let jp1 = ray_jacobian(ctx, dspec, theta + h1, tau, tol)?;
    let jm1 = ray_jacobian(ctx, dspec, theta - h1, tau, tol)?;
    let jp2 = ray_jacobian(ctx, dspec, theta + h2, tau, tol)?;
    let jm2 = ray_jacobian(ctx, dspec, theta - h2, tau, tol)?;
    let scale = tau * jt.abs();
    let d = (jp1 - jm1) / (2.0 * h1) / scale;
    let s = (jp2 - 2.0 * j0 + jm2) / (h2 * h2) / scale;
    let threshold = fold_threshold(tau);
    let class = if d.abs() > threshold {
        SingularityClass::FoldA2
    } else if s.abs() > threshold {
        SingularityClass::CuspA3
    } else {
        return Err(Error::UnclassifiedDegeneracy(theta));
    };
    Ok(SingularityReport {
        theta,
        t_conj: tau * ctx.lambda,
        point: ctx.point_to_orig(raw[0], raw[1]),
        d_normalized: d,
        second_normalized: s,
        threshold,
        class,
    })
}

/// Type of the first conjugate point on ray `θ` from `base`.
pub fn classify_singularity(spec: &FrameSpec, base: Point, theta: f64) -> Result<SingularityClass> {
    Ok(classify_singularity_with(spec, base, theta, ScanOptions::default())?.class)
}

pub fn classify_singularity_with(
    spec: &FrameSpec,
    base: Point,
    theta: f64,
    opts: ScanOptions,
) -> Result<SingularityReport> {
    let ctx = Scaled::for_base(spec, base)?;
    let dspec = ctx.dilated_spec();
    report_scaled(&ctx, &dspec, theta, opts.t_max_scaled, opts.tol)
}

/// Outcome for one ray of a conjugate-locus scan.
#[derive(Debug, Clone, Serialize)]
pub struct RayClassification {
    pub theta: f64,
    pub report: Option<SingularityReport>,
    /// Why no report was produced.
    pub note: Option<String>,
}

/// First conjugate locus sampled on a uniform ray grid, with cusps located
/// between grid rays by bisection on the sign of `∂J/∂θ`.
#[derive(Debug, Clone, Serialize)]
pub struct ConjugateScan {
    pub base: Point,
    pub rays: Vec<RayClassification>,
    pub cusps: Vec<ConjugatePointRecord>,
    pub fold_count: usize,
    pub cusp_count: usize,
}

impl ConjugateScan {
    pub fn records(&self) -> Vec<ConjugatePointRecord> {
        self.rays.iter().filter_map(|r| r.report.map(|p| p.record())).collect()
    }
}

pub fn scan_conjugate_locus(spec: &FrameSpec, base: Point, opts: ScanOptions) -> Result<ConjugateScan> {
    let ctx = Scaled::for_base(spec, base)?;
    let dspec = ctx.dilated_spec();
    let n = opts.rays;
    if n < 4 {
        return Err(Error::InvalidArgument(format!("scan needs at least 4 rays, got {n}")));
    }
    let rays: Vec<RayClassification> = (0..n)
        .into_par_iter()
        .map(|k| {
            let theta = std::f64::consts::TAU * k as f64 / n as f64;
            match report_scaled(&ctx, &dspec, theta, opts.t_max_scaled, opts.tol) {
                Ok(r) => Ok(RayClassification { theta, report: Some(r), note: None }),
                Err(e @ (Error::NoConjugatePoint { .. } | Error::UnclassifiedDegeneracy(_))) => {
                    Ok(RayClassification { theta, report: None, note: Some(e.to_string()) })
                }
                Err(e) => Err(e),
            }
        })
        .collect::<Result<_>>()?;

    let mut cusps: Vec<ConjugatePointRecord> = rays
        .iter()
        .filter_map(|r| r.report)
        .filter(|r| r.class == SingularityClass::CuspA3)
        .map(|r| r.record())
        .collect();

    let brackets: Vec<(f64, f64, f64, f64)> = (0..n)
        .filter_map(|k| {
            let a = rays[k].report?;
            let b = rays[(k + 1) % n].report?;
            let folds = a.class == SingularityClass::FoldA2 && b.class == SingularityClass::FoldA2;
            (folds && a.d_normalized * b.d_normalized < 0.0).then(|| {
                let hi = if k + 1 == n { b.theta + std::f64::consts::TAU } else { b.theta };
                (a.theta, hi, a.d_normalized, a.t_conj.max(b.t_conj) / ctx.lambda)
            })
        })
        .collect();
    let found: Vec<Option<ConjugatePointRecord>> = brackets
        .par_iter()
        .map(|&(lo, hi, d_lo, tau_c)| locate_cusp(&ctx, &dspec, lo, hi, d_lo, 2.0 * tau_c, opts.tol))
        .collect::<Result<_>>()?;
    cusps.extend(found.into_iter().flatten());
    for c in &mut cusps {
        c.theta = super::wrap_angle(c.theta);
    }
    cusps.sort_by(|a, b| a.theta.total_cmp(&b.theta));

    let fold_count = rays
        .iter()
        .filter(|r| r.report.map(|p| p.class) == Some(SingularityClass::FoldA2))
        .count();
    let cusp_count = cusps.len();
    Ok(ConjugateScan { base, rays, cusps, fold_count, cusp_count })
}

/// Bisection on the sign of the normalised `∂J/∂θ`; `None` when the sign
/// change turns out to be a jump of the first conjugate branch.
fn locate_cusp(
    ctx: &Scaled,
    dspec: &FrameSpec,
    mut lo: f64,
    mut hi: f64,
    d_lo: f64,
    tau_max: f64,
    tol: f64,
) -> Result<Option<ConjugatePointRecord>> {
    for _ in 0..60 {
        if hi - lo <= 1e-10 {
            break;
        }
        let mid = 0.5 * (lo + hi);
        let r = match report_scaled(ctx, dspec, mid, tau_max, tol) {
            Ok(r) => r,
            Err(Error::UnclassifiedDegeneracy(_)) => return Ok(None),
            Err(e) => return Err(e),
        };
        if r.class == SingularityClass::CuspA3 {
            return Ok(Some(r.record()));
        }
        if (r.d_normalized < 0.0) == (d_lo < 0.0) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let mid = 0.5 * (lo + hi);
    let r = report_scaled(ctx, dspec, mid, tau_max, tol)?;
    if r.class == SingularityClass::CuspA3 {
        return Ok(Some(r.record()));
    }
    Ok(None)
}
