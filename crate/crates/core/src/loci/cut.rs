use rayon::prelude::*;
use serde::Serialize;

use super::conjugate::{first_conjugate_on, report_scaled, ConjugatePointRecord, SingularityReport, CLASSIFY_TOL};
use super::front::{branch_angle, CutSample};
use super::{angle_diff, wrap_angle, Scaled, StoredRay, LOCI_TOL};
use crate::error::{Error, Result};
use crate::frame::{FrameSpec, Point};
use crate::solve::{newton2, Newton2Options};

#[derive(Debug, Clone, Copy)]
pub struct CutSearchOptions {
    /// Partner rays integrated once and shared by all queries.
    pub fan: usize,
    /// Time samples per query for locating candidate crossings.
    pub time_samples: usize,
    /// Search horizon; defaults to `4π |x f(base)|`.
    pub t_max: Option<f64>,
    pub tol: f64,
}

impl Default for CutSearchOptions {
    fn default() -> Self {
        Self { fan: 256, time_samples: 600, t_max: None, tol: LOCI_TOL }
    }
}

/// Cut time of one ray and the ray it meets there.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CutTime {
    pub theta: f64,
    pub t_cut: f64,
    /// Equal to `theta` when the cut point is also the first conjugate point.
    pub partner: f64,
    pub point: Point,
    pub cut_conjugate: bool,
    pub t_conj: Option<f64>,
    /// Angle between the arriving velocities; zero at a cut-conjugate point.
    pub branch_angle: f64,
}

/// Cut-time search for rays from one base point.
///
/// The cut time of ray `θ` is the smallest `t` at which it meets another
/// ray of the same length, or its first conjugate time if that comes first.
/// Meetings are roots of `G(δ, t) = (γ(θ + δ, t) − γ(θ, t)) / δ`; dividing
/// by `δ` removes the trivial solution `δ = 0`, and the first conjugate
/// point is the limit `δ → 0` of the roots.
pub struct CutFinder {
    ctx: Scaled,
    dspec: FrameSpec,
    opts: CutSearchOptions,
    tau_max: f64,
    fan: Vec<StoredRay>,
}

/// Small partner offsets added to every query to resolve meetings near cusps.
const NEAR_OFFSETS: [f64; 6] = [-6e-3, -3e-3, -1e-3, 1e-3, 3e-3, 6e-3];

impl CutFinder {
    pub fn new(spec: &FrameSpec, base: Point, opts: CutSearchOptions) -> Result<Self> {
        let ctx = Scaled::for_base(spec, base)?;
        let dspec = ctx.dilated_spec();
        let tau_max = opts.t_max.map_or(4.0 * std::f64::consts::PI, |t| t / ctx.lambda);
        if !(tau_max > 0.0) || !tau_max.is_finite() {
            return Err(Error::InvalidArgument(format!("cut search horizon {tau_max}")));
        }
        if opts.fan < 16 || opts.time_samples < 16 {
            return Err(Error::InvalidArgument("cut search needs fan and time_samples >= 16".into()));
        }
        let fan = (0..opts.fan)
            .into_par_iter()
            .map(|k| {
                let theta = std::f64::consts::TAU * k as f64 / opts.fan as f64;
                StoredRay::new(&ctx, &dspec, theta, tau_max, opts.tol)
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { ctx, dspec, opts, tau_max, fan })
    }

    pub fn base(&self) -> Point {
        match self.ctx.launch {
            super::Launch::Ray { base } => base,
            super::Launch::GrushinFan { .. } => unreachable!("cut finder is built from a base point"),
        }
    }

    /// Type of the first conjugate point of ray `θ`, searched up to the
    /// finder's horizon.
    pub fn classify(&self, theta: f64) -> Result<SingularityReport> {
        report_scaled(&self.ctx, &self.dspec, theta, self.tau_max, CLASSIFY_TOL)
    }

    pub fn t_max(&self) -> f64 {
        self.tau_max * self.ctx.lambda
    }

    pub fn cut_time(&self, theta: f64) -> Result<CutTime> {
        let theta = wrap_angle(theta);
        let dspec = &self.dspec;
        let ray = StoredRay::new(&self.ctx, dspec, theta, self.tau_max, self.opts.tol)?;
        let conj = first_conjugate_on(&ray, dspec)?;
        let horizon = conj.as_ref().map_or(self.tau_max, |c| c.0);
        // Meetings just before a cusp sit close to the conjugate time, so the
        // scan runs a little past it.
        let scan_end = (1.1 * horizon).min(self.tau_max);

        // Partner rays, sorted by offset δ from θ.
        let mut near: Vec<StoredRay> = NEAR_OFFSETS
            .par_iter()
            .map(|&d| StoredRay::new(&self.ctx, dspec, theta + d, scan_end, self.opts.tol))
            .collect::<Result<_>>()?;
        let mut partners: Vec<(f64, &StoredRay)> = self
            .fan
            .iter()
            .map(|r| (angle_diff(r.param, theta), r))
            .filter(|(d, _)| d.abs() >= 5e-4)
            .collect();
        near.sort_by(|a, b| a.param.total_cmp(&b.param));
        for r in &near {
            partners.push((r.param - theta, r));
        }
        partners.sort_by(|a, b| a.0.total_cmp(&b.0));

        let m = self.opts.time_samples;
        let dt = scan_end / m as f64;
        let times: Vec<f64> = (1..=m).map(|k| dt * k as f64).collect();
        let own: Vec<Vec<f64>> = times.iter().map(|&t| ray.raw_interp(t)).collect();
        let g: Vec<Vec<f64>> = partners
            .par_iter()
            .map(|(d, r)| {
                times
                    .iter()
                    .zip(&own)
                    .map(|(&t, o)| {
                        let p = r.raw_interp(t);
                        (p[0] - o[0]).hypot(p[1] - o[1]) / d.abs()
                    })
                    .collect()
            })
            .collect();

        // Interior local minima of |G| on the (δ, t) grid, kept when small
        // compared with the change of G across one grid cell.
        let mut candidates = Vec::new();
        for j in 0..partners.len() {
            for k in 1..m - 1 {
                let v = g[j][k];
                let mut is_min = v <= g[j][k - 1] && v <= g[j][k + 1];
                for jj in [j.wrapping_sub(1), j + 1] {
                    if jj < partners.len() {
                        is_min &= v <= g[jj][k - 1] && v <= g[jj][k] && v <= g[jj][k + 1];
                    }
                }
                if !is_min {
                    continue;
                }
                let (d, r) = partners[j];
                let p = r.raw_interp(times[k]);
                let o = &own[k];
                let spacing = [j.wrapping_sub(1), j + 1]
                    .iter()
                    .filter(|&&jj| jj < partners.len())
                    .map(|&jj| (partners[jj].0 - d).abs())
                    .fold(0.0, f64::max);
                let dgd = p[4].hypot(p[5]) / d.abs() + v / d.abs();
                let vp = crate::frame::HamiltonianFlow::rhs(dspec, &[p[0], p[1], p[2], p[3]]);
                let vo = crate::frame::HamiltonianFlow::rhs(dspec, &[o[0], o[1], o[2], o[3]]);
                let dgt = (vp[0] - vo[0]).hypot(vp[1] - vo[1]) / d.abs();
                if v <= 3.0 * (dgd * spacing + dgt * dt) {
                    candidates.push((times[k], d));
                }
            }
        }
        candidates.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));

        let mut best: Option<(f64, f64)> = None;
        for &(t0, d0) in &candidates {
            if let Some((tb, _)) = best {
                if t0 > tb + 10.0 * dt {
                    break;
                }
            }
            if let Some((t, d)) = self.refine(&ray, theta, d0, t0, dt, horizon, scan_end)? {
                if best.is_none_or(|(tb, _)| t < tb) {
                    best = Some((t, d));
                }
            }
        }

        let t_conj = conj.as_ref().map(|c| c.0 * self.ctx.lambda);
        match (best, conj) {
            (Some((t, d)), c) if c.as_ref().is_none_or(|c| t < c.0) => {
                let own_end = self.ctx.end_from_raw(dspec, &ray.raw_at(dspec, t)?);
                let other = self.ctx.trajectory(dspec, theta + d, t, self.opts.tol)?;
                let other_end = self.ctx.end_from_raw(dspec, other.node_raw(other.len() - 1));
                Ok(CutTime {
                    theta,
                    t_cut: t * self.ctx.lambda,
                    partner: wrap_angle(theta + d),
                    point: own_end.point,
                    cut_conjugate: false,
                    t_conj,
                    branch_angle: branch_angle(own_end.velocity, other_end.velocity),
                })
            }
            (_, Some((tc, raw))) => Ok(CutTime {
                theta,
                t_cut: tc * self.ctx.lambda,
                partner: theta,
                point: self.ctx.point_to_orig(raw[0], raw[1]),
                cut_conjugate: true,
                t_conj,
                branch_angle: 0.0,
            }),
            (None, None) => Err(Error::NoCutFound { theta, t_max: self.t_max() }),
            (Some(_), None) => unreachable!("handled by the first arm"),
        }
    }

    /// Newton on `G(δ, t) = 0` from `(δ0, t0)`. Returns `None` when the
    /// iteration fails or collapses onto `δ = 0`.
    #[allow(clippy::too_many_arguments)]
    fn refine(
        &self,
        ray: &StoredRay,
        theta: f64,
        d0: f64,
        t0: f64,
        dt: f64,
        horizon: f64,
        scan_end: f64,
    ) -> Result<Option<(f64, f64)>> {
        let dspec = &self.dspec;
        let opts = Newton2Options {
            tol: 1e-11,
            max_iter: 50,
            max_step: [0.5 * d0.abs().max(1e-3), 5.0 * dt],
        };
        let out = newton2(
            |x| {
                let (d, t) = (x[0], x[1]);
                if d.abs() < 1e-9 || !(t > 0.0) || t > scan_end {
                    return Err(Error::InvalidArgument("outside search region".into()));
                }
                let o = ray.raw_at(dspec, t)?;
                let traj = self.ctx.trajectory(dspec, theta + d, t, self.opts.tol)?;
                let p = traj.node_raw(traj.len() - 1);
                let vo = crate::frame::HamiltonianFlow::rhs(dspec, &[o[0], o[1], o[2], o[3]]);
                let vp = crate::frame::HamiltonianFlow::rhs(dspec, &[p[0], p[1], p[2], p[3]]);
                let gx = (p[0] - o[0]) / d;
                let gy = (p[1] - o[1]) / d;
                Ok((
                    [gx, gy],
                    [[(p[4] - gx) / d, (vp[0] - vo[0]) / d], [(p[5] - gy) / d, (vp[1] - vo[1]) / d]],
                ))
            },
            [d0, t0],
            opts,
        );
        let out = match out {
            Ok(o) => o,
            Err(Error::InvalidArgument(_)) => return Ok(None),
            Err(e) => return Err(e),
        };
        let (d, t) = (out.x[0], out.x[1]);
        if !out.converged || d.abs() < 1e-6 || t > horizon || t < 1e-3 * horizon {
            return Ok(None);
        }
        Ok(Some((t, d)))
    }
}

/// Cut time of ray `θ` from `base` with default search options.
pub fn cut_time(spec: &FrameSpec, base: Point, theta: f64) -> Result<CutTime> {
    cut_time_with(spec, base, theta, CutSearchOptions::default())
}

pub fn cut_time_with(spec: &FrameSpec, base: Point, theta: f64, opts: CutSearchOptions) -> Result<CutTime> {
    CutFinder::new(spec, base, opts)?.cut_time(theta)
}

/// A connected run of cut samples.
#[derive(Debug, Clone, Serialize)]
pub struct CutBranch {
    pub samples: Vec<CutSample>,
    pub start_at_cusp: bool,
    pub end_at_cusp: bool,
    /// Unit direction of the branch leaving its first sample.
    pub tangent_start: [f64; 2],
    /// Unit direction of the branch arriving at its last sample.
    pub tangent_end: [f64; 2],
}

#[derive(Debug, Clone, Serialize)]
pub struct CutLocus {
    pub base: Point,
    pub branches: Vec<CutBranch>,
    pub cusps: Vec<ConjugatePointRecord>,
    /// Rays whose cut search ran out of horizon.
    pub unresolved: Vec<f64>,
}

impl CutLocus {
    pub fn samples(&self) -> impl Iterator<Item = &CutSample> {
        self.branches.iter().flat_map(|b| b.samples.iter())
    }
}

fn unit(a: Point, b: Point) -> [f64; 2] {
    let (dx, dy) = (b.x - a.x, b.y - a.y);
    let n = dx.hypot(dy);
    if n == 0.0 {
        [0.0, 0.0]
    } else {
        [dx / n, dy / n]
    }
}

/// Cut locus from `base` sampled on `resolution` rays over `θ_range`, with
/// cusps taken from a default conjugate-locus scan.
pub fn cut_locus(spec: &FrameSpec, base: Point, theta_range: (f64, f64), resolution: usize) -> Result<CutLocus> {
    let scan = super::scan_conjugate_locus(spec, base, super::ScanOptions::default())?;
    let finder = CutFinder::new(spec, base, CutSearchOptions::default())?;
    cut_locus_with(&finder, theta_range, resolution, &scan.cusps)
}

/// Cut locus sampled on `resolution` rays over `θ_range`, plus the given
/// cusp rays that fall in the range.
///
/// Each meeting is reached from both rays of its pair; only the ray from
/// which the partner lies at most `π` counter-clockwise is kept.
pub fn cut_locus_with(
    finder: &CutFinder,
    theta_range: (f64, f64),
    resolution: usize,
    cusps: &[ConjugatePointRecord],
) -> Result<CutLocus> {
    let (lo, hi) = theta_range;
    if resolution < 2 || !(hi > lo) {
        return Err(Error::InvalidArgument("cut locus needs resolution >= 2 and a non-empty range".into()));
    }
    let full = hi - lo >= std::f64::consts::TAU - 1e-12;
    let count = if full { resolution } else { resolution - 1 };
    let mut thetas: Vec<f64> = (0..=count)
        .filter(|&k| !(full && k == count))
        .map(|k| lo + (hi - lo) * k as f64 / count as f64)
        .collect();
    let in_range = |th: f64| {
        let off = (th - lo).rem_euclid(std::f64::consts::TAU);
        off <= hi - lo
    };
    let cusps_in: Vec<ConjugatePointRecord> = cusps.iter().copied().filter(|c| in_range(c.theta)).collect();
    for c in &cusps_in {
        let off = (c.theta - lo).rem_euclid(std::f64::consts::TAU);
        thetas.push(lo + off);
    }
    thetas.sort_by(f64::total_cmp);
    thetas.dedup_by(|a, b| (*a - *b).abs() < 1e-12);

    let results: Vec<Result<CutTime>> = thetas.par_iter().map(|&th| finder.cut_time(th)).collect();
    let mut kept: Vec<Option<CutSample>> = Vec::with_capacity(thetas.len());
    let mut unresolved = Vec::new();
    for (th, r) in thetas.iter().zip(results) {
        match r {
            Ok(c) => {
                let ccw = (c.partner - c.theta).rem_euclid(std::f64::consts::TAU);
                let keep = c.cut_conjugate || ccw <= std::f64::consts::PI;
                kept.push(keep.then_some(CutSample {
                    theta1: c.theta,
                    theta2: c.partner,
                    t_cut: c.t_cut,
                    point: c.point,
                    branch_angle: c.branch_angle,
                    arc1: 0,
                    arc2: 0,
                }));
            }
            Err(Error::NoCutFound { .. }) => {
                unresolved.push(*th);
                kept.push(None);
            }
            Err(e) => return Err(e),
        }
    }

    let mut runs: Vec<Vec<CutSample>> = Vec::new();
    let mut current: Vec<CutSample> = Vec::new();
    for s in kept {
        match s {
            Some(s) => current.push(s),
            None => {
                if !current.is_empty() {
                    runs.push(std::mem::take(&mut current));
                }
            }
        }
    }
    if !current.is_empty() {
        runs.push(current);
    }
    if full && runs.len() > 1 {
        let first = &runs[0][0];
        let last = runs.last().and_then(|r| r.last()).expect("non-empty run");
        if first.theta1 == wrap_angle(thetas[0]) && last.theta1 == wrap_angle(*thetas.last().expect("non-empty")) {
            let head = runs.remove(0);
            runs.last_mut().expect("non-empty").extend(head);
        }
    }

    let near_cusp = |p: Point| cusps_in.iter().any(|c| c.point.dist(&p) <= 1e-5);
    let branches = runs
        .into_iter()
        .map(|samples| {
            let n = samples.len();
            let first = samples[0].point;
            let last = samples[n - 1].point;
            let (ts, te) = if n >= 2 {
                (unit(first, samples[1].point), unit(samples[n - 2].point, last))
            } else {
                ([0.0, 0.0], [0.0, 0.0])
            };
            CutBranch {
                start_at_cusp: near_cusp(first),
                end_at_cusp: near_cusp(last),
                tangent_start: ts,
                tangent_end: te,
                samples,
            }
        })
        .collect();
    Ok(CutLocus { base: finder.base(), branches, cusps: cusps_in, unresolved })
}
