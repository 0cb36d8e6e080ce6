use rayon::prelude::*;
use serde::Serialize;

use super::{wrap_angle, Launch, Scaled, LOCI_TOL};
use crate::error::{Error, Result};
use crate::frame::{FrameSpec, Point};
use crate::integrator::RayEnd;
use crate::solve::{newton2, Newton2Options};

/// One launch parameter of a front with its endpoint data.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FrontSample {
    /// `θ` for rays from a Riemannian point, `p_y` for a Grushin fan.
    pub theta: f64,
    pub point: Point,
    /// `∂γ/∂t`.
    pub velocity: [f64; 2],
    /// Derivative of the endpoint with respect to the launch parameter.
    pub dparam: [f64; 2],
}

/// A curve of the front traced by one launch family.
#[derive(Debug, Clone, Serialize)]
pub struct FrontArc {
    #[serde(skip)]
    pub launch: Launch,
    /// Closed arcs join the last sample back to the first (periodic `θ`).
    pub closed: bool,
    pub samples: Vec<FrontSample>,
}

/// Time-`t` image of one or more launch families.
#[derive(Debug, Clone, Serialize)]
pub struct Front {
    #[serde(skip)]
    pub spec: FrameSpec,
    pub t: f64,
    pub arcs: Vec<FrontArc>,
    pub lambda: f64,
    pub tol: f64,
}

impl Front {
    pub fn base(&self) -> Option<Point> {
        match self.arcs.first()?.launch {
            Launch::Ray { base } => Some(base),
            Launch::GrushinFan { .. } => None,
        }
    }

    /// Samples of the first arc.
    pub fn samples(&self) -> &[FrontSample] {
        &self.arcs[0].samples
    }

    pub fn sample_count(&self) -> usize {
        self.arcs.iter().map(|a| a.samples.len()).sum()
    }

    fn eval(&self, arc: usize, param: f64) -> Result<RayEnd> {
        let ctx = Scaled::new(&self.spec, self.arcs[arc].launch, self.lambda)?;
        let dspec = ctx.dilated_spec();
        let traj = ctx.trajectory(&dspec, param, self.t / self.lambda, self.tol)?;
        Ok(ctx.end_from_raw(&dspec, traj.node_raw(traj.len() - 1)))
    }
}

/// Crossings of a front, split by how transversal they are.
#[derive(Debug, Clone, Default, Serialize)]
pub struct FrontCrossings {
    pub crossings: Vec<CutSample>,
    /// Refined coincidences whose arriving velocities are within `1e-3` rad.
    pub near_misses: Vec<CutSample>,
}

/// Point reached at the same time by two distinct geodesics.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CutSample {
    pub theta1: f64,
    pub theta2: f64,
    pub t_cut: f64,
    pub point: Point,
    /// Angle in `[0, π]` between the two arriving velocities.
    pub branch_angle: f64,
    #[serde(skip)]
    pub arc1: usize,
    #[serde(skip)]
    pub arc2: usize,
}

pub(crate) fn branch_angle(v1: [f64; 2], v2: [f64; 2]) -> f64 {
    let cross = v1[0] * v2[1] - v1[1] * v2[0];
    let dot = v1[0] * v2[0] + v1[1] * v2[1];
    cross.abs().atan2(dot)
}

/// Front of rays from a Riemannian `base` at time `t`, sampled at
/// `θ_k = 2πk/n`.
pub fn compute_front(spec: &FrameSpec, base: Point, t: f64, n: usize) -> Result<Front> {
    if n < 16 {
        return Err(Error::InvalidArgument(format!("front needs at least 16 samples, got {n}")));
    }
    let ctx = Scaled::for_base(spec, base)?;
    let params: Vec<f64> = (0..n).map(|k| std::f64::consts::TAU * k as f64 / n as f64).collect();
    compute_front_with(spec, &[(Launch::Ray { base }, params, true)], t, ctx.lambda, LOCI_TOL)
}

/// Front of several launch families, each given by its parameter samples
/// and whether it closes up. `lambda` is the dilation used internally.
pub fn compute_front_with(
    spec: &FrameSpec,
    families: &[(Launch, Vec<f64>, bool)],
    t: f64,
    lambda: f64,
    tol: f64,
) -> Result<Front> {
    if !t.is_finite() || t < 0.0 {
        return Err(Error::InvalidArgument(format!("front time {t}")));
    }
    let mut arcs = Vec::with_capacity(families.len());
    for (launch, params, closed) in families {
        if params.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidArgument("front parameters must increase".into()));
        }
        let ctx = Scaled::new(spec, *launch, lambda)?;
        let dspec = ctx.dilated_spec();
        let samples = params
            .par_iter()
            .map(|&u| {
                let traj = ctx.trajectory(&dspec, u, t / lambda, tol)?;
                let end = ctx.end_from_raw(&dspec, traj.node_raw(traj.len() - 1));
                Ok(FrontSample { theta: u, point: end.point, velocity: end.velocity, dparam: end.dparam })
            })
            .collect::<Result<Vec<_>>>()?;
        arcs.push(FrontArc { launch: *launch, closed: *closed, samples });
    }
    Ok(Front { spec: spec.clone(), t, arcs, lambda, tol })
}

#[derive(Debug, Clone, Copy)]
struct Segment {
    arc: usize,
    index: usize,
    global: usize,
    p0: Point,
    p1: Point,
    u0: f64,
    u1: f64,
    lo: [f64; 2],
    hi: [f64; 2],
}

fn segments(front: &Front) -> Vec<Segment> {
    let mut out = Vec::new();
    for (a, arc) in front.arcs.iter().enumerate() {
        let n = arc.samples.len();
        let count = if arc.closed { n } else { n.saturating_sub(1) };
        for i in 0..count {
            let s0 = arc.samples[i];
            let (s1, u1) = if i + 1 < n {
                (arc.samples[i + 1], arc.samples[i + 1].theta)
            } else {
                (arc.samples[0], arc.samples[0].theta + std::f64::consts::TAU)
            };
            let global = out.len();
            out.push(Segment {
                arc: a,
                index: i,
                global,
                p0: s0.point,
                p1: s1.point,
                u0: s0.theta,
                u1,
                lo: [s0.point.x.min(s1.point.x), s0.point.y.min(s1.point.y)],
                hi: [s0.point.x.max(s1.point.x), s0.point.y.max(s1.point.y)],
            });
        }
    }
    out
}

fn adjacent(front: &Front, a: &Segment, b: &Segment) -> bool {
    if a.arc != b.arc {
        return false;
    }
    let d = a.index.abs_diff(b.index);
    let arc = &front.arcs[a.arc];
    d <= 1 || (arc.closed && d + 1 == arc.samples.len())
}

/// Parameters `(s, u)` of the intersection of two segments, if any.
fn segment_hit(a: &Segment, b: &Segment) -> Option<(f64, f64)> {
    let d1 = [a.p1.x - a.p0.x, a.p1.y - a.p0.y];
    let d2 = [b.p1.x - b.p0.x, b.p1.y - b.p0.y];
    let denom = d1[0] * d2[1] - d1[1] * d2[0];
    if denom == 0.0 {
        return None;
    }
    let w = [b.p0.x - a.p0.x, b.p0.y - a.p0.y];
    let s = (w[0] * d2[1] - w[1] * d2[0]) / denom;
    let u = (w[0] * d1[1] - w[1] * d1[0]) / denom;
    ((0.0..=1.0).contains(&s) && (0.0..=1.0).contains(&u)).then_some((s, u))
}

/// Candidate segment pairs by a sweep over bounding boxes sorted in `x`.
fn candidate_pairs(front: &Front, segs: &[Segment]) -> Vec<(usize, usize, f64, f64)> {
    let mut order: Vec<usize> = (0..segs.len()).collect();
    order.sort_by(|&i, &j| segs[i].lo[0].total_cmp(&segs[j].lo[0]).then(i.cmp(&j)));
    let mut out = Vec::new();
    for (k, &i) in order.iter().enumerate() {
        let a = &segs[i];
        for &j in &order[k + 1..] {
            let b = &segs[j];
            if b.lo[0] > a.hi[0] {
                break;
            }
            if b.lo[1] > a.hi[1] || a.lo[1] > b.hi[1] || adjacent(front, a, b) {
                continue;
            }
            if let Some((s, u)) = segment_hit(a, b) {
                let (first, second, s1, s2) = if a.global < b.global { (a, b, s, u) } else { (b, a, u, s) };
                out.push((first.global, second.global, s1, s2));
            }
        }
    }
    out.sort_by_key(|x| (x.0, x.1));
    out
}

/// Refined transverse self-intersections of `front`.
///
/// Each polygon crossing is refined by Newton's method on
/// `γ(u₁, t) − γ(u₂, t)`. Refinements that collapse onto a single ray are
/// sampling artefacts and are dropped.
pub fn front_self_intersections(front: &Front) -> Result<FrontCrossings> {
    if front.sample_count() < 64 {
        return Err(Error::InvalidArgument("front needs at least 64 samples for crossings".into()));
    }
    let segs = segments(front);
    let pairs = candidate_pairs(front, &segs);
    let res_tol = 1e-10 * front.lambda.min(1.0).powi(2);
    let refined: Vec<Result<Option<CutSample>>> = pairs
        .par_iter()
        .map(|&(ia, ib, s, u)| {
            let (a, b) = (&segs[ia], &segs[ib]);
            let x0 = [a.u0 + s * (a.u1 - a.u0), b.u0 + u * (b.u1 - b.u0)];
            let opts = Newton2Options {
                tol: res_tol,
                max_iter: 50,
                max_step: [2.0 * (a.u1 - a.u0), 2.0 * (b.u1 - b.u0)],
            };
            let out = newton2(
                |x| {
                    let e1 = front.eval(a.arc, x[0])?;
                    let e2 = front.eval(b.arc, x[1])?;
                    Ok((
                        [e1.point.x - e2.point.x, e1.point.y - e2.point.y],
                        [[e1.dparam[0], -e2.dparam[0]], [e1.dparam[1], -e2.dparam[1]]],
                    ))
                },
                x0,
                opts,
            )?;
            if !out.converged {
                return Err(Error::RefinementDiverged { seg_a: ia, seg_b: ib });
            }
            let periodic = |arc: usize| front.arcs[arc].launch.is_periodic();
            let norm = |arc: usize, v: f64| if periodic(arc) { wrap_angle(v) } else { v };
            let (u1, u2) = (norm(a.arc, out.x[0]), norm(b.arc, out.x[1]));
            let gap = if a.arc == b.arc && periodic(a.arc) {
                super::angle_diff(u1, u2).abs()
            } else {
                (u1 - u2).abs()
            };
            if a.arc == b.arc && gap < 1e-7 {
                return Ok(None);
            }
            let e1 = front.eval(a.arc, u1)?;
            let e2 = front.eval(b.arc, u2)?;
            let (mut s1, mut s2, mut c1, mut c2) = (u1, u2, a.arc, b.arc);
            if (c1, s1) > (c2, s2) {
                std::mem::swap(&mut s1, &mut s2);
                std::mem::swap(&mut c1, &mut c2);
            }
            Ok(Some(CutSample {
                theta1: s1,
                theta2: s2,
                t_cut: front.t,
                point: Point::new(0.5 * (e1.point.x + e2.point.x), 0.5 * (e1.point.y + e2.point.y)),
                branch_angle: branch_angle(e1.velocity, e2.velocity),
                arc1: c1,
                arc2: c2,
            }))
        })
        .collect();
    let mut all = Vec::new();
    for r in refined {
        if let Some(c) = r? {
            all.push(c);
        }
    }
    all.sort_by(|p, q| (p.arc1, p.arc2).cmp(&(q.arc1, q.arc2)).then(p.theta1.total_cmp(&q.theta1)).then(p.theta2.total_cmp(&q.theta2)));
    let mut out = FrontCrossings::default();
    for c in all {
        let dup = out
            .crossings
            .iter()
            .chain(out.near_misses.iter())
            .any(|d| d.arc1 == c.arc1 && d.arc2 == c.arc2 && (d.theta1 - c.theta1).abs() + (d.theta2 - c.theta2).abs() < 1e-7);
        if dup {
            continue;
        }
        if c.branch_angle < 1e-3 {
            out.near_misses.push(c);
        } else {
            out.crossings.push(c);
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::{FRAC_PI_2, PI};

    fn base() -> Point {
        Point::new(-1.0, 0.0)
    }

    #[test]
    fn short_time_front_is_a_simple_loop_around_base() {
        let front = compute_front(&FrameSpec::nilpotent(), base(), 0.5, 128).unwrap();
        let s = front.samples();
        let mut winding = 0.0;
        for k in 0..s.len() {
            let a = s[k].point;
            let b = s[(k + 1) % s.len()].point;
            let ta = (a.y - base().y).atan2(a.x - base().x);
            let tb = (b.y - base().y).atan2(b.x - base().x);
            winding += super::super::angle_diff(tb, ta);
        }
        assert!((winding / std::f64::consts::TAU - 1.0).abs() < 1e-9);
        assert!(front_self_intersections(&front).unwrap().crossings.is_empty());
    }

    #[test]
    fn front_at_pi_passes_through_cusps() {
        let front = compute_front(&FrameSpec::nilpotent(), base(), PI, 16).unwrap();
        let up = front.samples()[4];
        let down = front.samples()[12];
        assert!((up.theta - FRAC_PI_2).abs() < 1e-15);
        assert!(up.point.dist(&Point::new(1.0, FRAC_PI_2)) < 1e-6);
        assert!(down.point.dist(&Point::new(1.0, -FRAC_PI_2)) < 1e-6);
    }

    #[test]
    fn coarse_and_fine_fronts_agree_on_shared_rays() {
        let spec = FrameSpec::nilpotent();
        let coarse = compute_front(&spec, base(), 2.0, 16).unwrap();
        let fine = compute_front(&spec, base(), 2.0, 4096).unwrap();
        for (k, s) in coarse.samples().iter().enumerate() {
            let f = fine.samples()[k * 256];
            assert_eq!(s.theta, f.theta);
            assert!(s.point.dist(&f.point) < 1e-10);
        }
    }

    #[test]
    fn front_before_pi_has_no_crossings() {
        let front = compute_front(&FrameSpec::nilpotent(), base(), 3.0, 256).unwrap();
        let c = front_self_intersections(&front).unwrap();
        assert!(c.crossings.is_empty(), "{:?}", c.crossings);
    }

    #[test]
    fn front_just_after_pi_crosses_twice_near_cusps() {
        let t = PI + 0.05;
        let front = compute_front(&FrameSpec::nilpotent(), base(), t, 512).unwrap();
        let c = front_self_intersections(&front).unwrap();
        assert_eq!(c.crossings.len(), 2, "{:?}", c.crossings);
        for s in &c.crossings {
            assert!((s.point.x - 1.0).abs() < 1e-8, "{s:?}");
            assert!((s.point.y.abs() - FRAC_PI_2).abs() < 0.1, "{s:?}");
            let e1 = crate::exact::exact_geodesic(s.theta1, t);
            let e2 = crate::exact::exact_geodesic(s.theta2, t);
            assert!(e1.dist(&e2) < 1e-9);
            let g1 = crate::integrator::exp_map_tol(&front.spec, base(), s.theta1, t, 1e-12).unwrap();
            let g2 = crate::integrator::exp_map_tol(&front.spec, base(), s.theta2, t, 1e-12).unwrap();
            assert!(g1.dist(&g2) <= 1e-10);
            // Crossing rays are the mirror pair θ, π − θ.
            assert!((super::super::angle_diff(s.theta1 + s.theta2, PI)).abs() < 1e-8
                || (super::super::angle_diff(s.theta1 + s.theta2, 3.0 * PI)).abs() < 1e-8);
        }
        let fine = compute_front(&FrameSpec::nilpotent(), base(), t, 1024).unwrap();
        let c2 = front_self_intersections(&fine).unwrap();
        assert_eq!(c2.crossings.len(), 2);
        for (a, b) in c.crossings.iter().zip(&c2.crossings) {
            assert!(a.point.dist(&b.point) <= 1e-8);
        }
    }

    #[test]
    fn too_few_samples_rejected() {
        let front = compute_front(&FrameSpec::nilpotent(), base(), 1.0, 32).unwrap();
        assert!(matches!(front_self_intersections(&front), Err(Error::InvalidArgument(_))));
        assert!(matches!(compute_front(&FrameSpec::nilpotent(), base(), 1.0, 8), Err(Error::InvalidArgument(_))));
        assert!(matches!(
            compute_front(&FrameSpec::nilpotent(), Point::new(0.0, 1.0), 1.0, 64),
            Err(Error::SingularPoint { .. })
        ));
    }
}
