//! Wave fronts, cut and conjugate loci, singularity types and distances for
//! an arbitrary [`FrameSpec`].
//!
//! Every computation runs in the dilated frame `x = λX`, `y = λ²Y`,
//! `t = λτ` with `λ` chosen so the launch point sits at unit scale, and is
//! mapped back on output. The dilated structure is again in normal form
//! (see [`FrameSpec::dilated`]), and covector angles are unchanged by it.

mod conjugate;
mod cut;
mod distance;
mod export;
mod front;

pub use conjugate::{
    classify_singularity, classify_singularity_with, conjugate_point, conjugate_time, scan_conjugate_locus, ConjugatePointRecord,
    ConjugateScan, RayClassification, ScanOptions, SingularityReport, CLASSIFY_TOL,
};
pub use cut::{cut_locus, cut_locus_with, cut_time, cut_time_with, CutBranch, CutFinder, CutLocus, CutSearchOptions, CutTime};
pub use distance::{distance, distance_with, DistanceOptions, DistanceResult};
pub use export::{cut_locus_csv, cut_locus_json, front_svg, loci_svg, trajectory_svg, SvgView};
pub use front::{
    compute_front, compute_front_with, front_self_intersections, CutSample, Front, FrontArc, FrontCrossings,
    FrontSample,
};

use crate::error::{Error, Result};
use crate::frame::{FrameSpec, GeodesicState, Point};
use crate::integrator::{integrate_raw, integrate_with_sensitivity, RayEnd, Trajectory};

/// Default integration tolerance for loci computations.
pub const LOCI_TOL: f64 = 1e-11;

/// One-parameter family of unit-speed initial conditions.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Launch {
    /// Unit covectors at a Riemannian point, parametrised by the angle `θ`.
    Ray { base: Point },
    /// Covectors `(sign, p_y)` at the origin, parametrised by `p_y`.
    GrushinFan { sign: f64 },
}

impl Launch {
    /// Initial state and its derivative with respect to the parameter.
    pub fn initial(&self, spec: &FrameSpec, param: f64) -> Result<(GeodesicState, [f64; 4])> {
        match *self {
            Launch::Ray { base } => {
                let c = spec.unit_covector(base, param)?;
                let d = spec.unit_covector_dtheta(base, param)?;
                Ok((GeodesicState { point: base, covector: c }, d))
            }
            Launch::GrushinFan { sign } => {
                Ok((GeodesicState::new(0.0, 0.0, sign.signum(), param), [0.0, 0.0, 0.0, 1.0]))
            }
        }
    }

    pub fn is_periodic(&self) -> bool {
        matches!(self, Launch::Ray { .. })
    }
}

/// The dilation `x = λX`, `y = λ²Y`, `t = λτ`, `p_x = P_X`, `p_y = P_Y/λ`.
#[derive(Debug, Clone)]
pub(crate) struct Scaled {
    pub spec: FrameSpec,
    pub launch: Launch,
    pub lambda: f64,
}

impl Scaled {
    pub fn new(spec: &FrameSpec, launch: Launch, lambda: f64) -> Result<Self> {
        if !(lambda > 0.0) || !lambda.is_finite() {
            return Err(Error::InvalidArgument(format!("dilation factor {lambda}")));
        }
        if let Launch::Ray { base } = launch {
            if !base.is_finite() || !spec.is_riemannian(base) {
                return Err(Error::SingularPoint { x: base.x, y: base.y });
            }
        }
        Ok(Self { spec: spec.clone(), launch, lambda })
    }

    /// Dilation adapted to a Riemannian base: `λ = |x f(base)|`.
    pub fn for_base(spec: &FrameSpec, base: Point) -> Result<Self> {
        let g = spec.frame_coefficient(base);
        if g == 0.0 || !g.is_finite() {
            return Err(Error::SingularPoint { x: base.x, y: base.y });
        }
        Self::new(spec, Launch::Ray { base }, g.abs())
    }

    pub fn dilated_spec(&self) -> FrameSpec {
        self.spec.dilated(self.lambda)
    }

    fn to_scaled(&self, v: [f64; 4]) -> [f64; 4] {
        let l = self.lambda;
        [v[0] / l, v[1] / (l * l), v[2], v[3] * l]
    }

    pub fn point_to_orig(&self, x: f64, y: f64) -> Point {
        Point::new(self.lambda * x, self.lambda * self.lambda * y)
    }

    pub fn point_to_scaled(&self, p: Point) -> Point {
        Point::new(p.x / self.lambda, p.y / (self.lambda * self.lambda))
    }

    /// Ray in dilated variables integrated to dilated time `tau`.
    pub fn trajectory(&self, dspec: &FrameSpec, param: f64, tau: f64, tol: f64) -> Result<Trajectory> {
        let (s0, d0) = self.launch.initial(&self.spec, param)?;
        let s = GeodesicState::from_array(self.to_scaled(s0.to_array()));
        let d = self.to_scaled(d0);
        integrate_with_sensitivity(dspec, s, d, tau, tol)
    }

    /// Endpoint data in original variables from a dilated augmented state.
    pub fn end_from_raw(&self, dspec: &FrameSpec, raw: &[f64]) -> RayEnd {
        use crate::frame::HamiltonianFlow;
        let l = self.lambda;
        let s = [raw[0], raw[1], raw[2], raw[3]];
        let v = dspec.rhs(&s);
        RayEnd {
            point: self.point_to_orig(s[0], s[1]),
            velocity: [v[0], l * v[1]],
            dparam: [l * raw[4], l * l * raw[5]],
            state: GeodesicState::new(l * s[0], l * l * s[1], s[2], s[3] / l),
        }
    }
}

/// A stored ray that can be evaluated accurately at any time in its range by
/// re-integrating from the preceding node.
pub(crate) struct StoredRay {
    pub param: f64,
    pub traj: Trajectory,
}

impl StoredRay {
    pub fn new(ctx: &Scaled, dspec: &FrameSpec, param: f64, tau: f64, tol: f64) -> Result<Self> {
        Ok(Self { param, traj: ctx.trajectory(dspec, param, tau, tol)? })
    }

    /// Augmented dilated state at dilated time `tau`, to integration accuracy.
    pub fn raw_at(&self, dspec: &FrameSpec, tau: f64) -> Result<Vec<f64>> {
        let times = self.traj.times();
        let i = times.partition_point(|&v| v <= tau).saturating_sub(1);
        if times[i] == tau {
            return Ok(self.traj.node_raw(i).to_vec());
        }
        let seg = integrate_raw(dspec, 1, self.traj.node_raw(i), times[i], tau, self.traj.tol())?;
        Ok(seg.node_raw(seg.len() - 1).to_vec())
    }

    /// Hermite-interpolated augmented state, for coarse scans.
    pub fn raw_interp(&self, tau: f64) -> Vec<f64> {
        self.traj.raw_at(tau)
    }
}

/// `det(∂γ/∂θ, ∂γ/∂t)` and its time derivative from a dilated augmented
/// state `(s, δs)`.
pub(crate) fn jacobian_and_rate(dspec: &FrameSpec, raw: &[f64]) -> (f64, f64) {
    use crate::frame::HamiltonianFlow;
    let s = [raw[0], raw[1], raw[2], raw[3]];
    let ds = [raw[4], raw[5], raw[6], raw[7]];
    let v = dspec.rhs(&s);
    let jac = dspec.rhs_jacobian(&s);
    let mul = |row: &[f64; 4], w: &[f64; 4]| row[0] * w[0] + row[1] * w[1] + row[2] * w[2] + row[3] * w[3];
    let acc = [mul(&jac[0], &v), mul(&jac[1], &v)];
    let dv = [mul(&jac[0], &ds), mul(&jac[1], &ds)];
    let j = ds[0] * v[1] - ds[1] * v[0];
    let jt = dv[0] * v[1] + ds[0] * acc[1] - dv[1] * v[0] - ds[1] * acc[0];
    (j, jt)
}

/// `θ` reduced to `[0, 2π)`.
pub(crate) fn wrap_angle(theta: f64) -> f64 {
    let tau = std::f64::consts::TAU;
    let r = theta.rem_euclid(tau);
    if r >= tau {
        0.0
    } else {
        r
    }
}

/// Signed difference `a − b` reduced to `(−π, π]`.
pub(crate) fn angle_diff(a: f64, b: f64) -> f64 {
    let tau = std::f64::consts::TAU;
    let mut d = (a - b).rem_euclid(tau);
    if d > std::f64::consts::PI {
        d -= tau;
    }
    d
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dilation_preserves_endpoints() {
        let spec = FrameSpec::linear(0.3);
        let base = Point::new(-0.2, 0.01);
        let ctx = Scaled::for_base(&spec, base).unwrap();
        let dspec = ctx.dilated_spec();
        let t = 0.37;
        let traj = ctx.trajectory(&dspec, 0.8, t / ctx.lambda, 1e-12).unwrap();
        let end = ctx.end_from_raw(&dspec, traj.node_raw(traj.len() - 1));
        let direct = crate::integrator::exp_map_jet(&spec, base, 0.8, t, 1e-12).unwrap();
        assert!(end.point.dist(&direct.point) < 1e-11);
        for k in 0..2 {
            assert!((end.velocity[k] - direct.velocity[k]).abs() < 1e-10);
            assert!((end.dparam[k] - direct.dparam[k]).abs() < 1e-10);
        }
    }

    #[test]
    fn jacobian_rate_matches_difference_quotient() {
        let spec = FrameSpec::nilpotent();
        let ctx = Scaled::for_base(&spec, Point::new(-1.0, 0.0)).unwrap();
        let dspec = ctx.dilated_spec();
        let ray = StoredRay::new(&ctx, &dspec, 1.1, 3.0, 1e-12).unwrap();
        let h = 1e-5;
        let (_, jt) = jacobian_and_rate(&dspec, &ray.raw_at(&dspec, 2.0).unwrap());
        let jp = jacobian_and_rate(&dspec, &ray.raw_at(&dspec, 2.0 + h).unwrap()).0;
        let jm = jacobian_and_rate(&dspec, &ray.raw_at(&dspec, 2.0 - h).unwrap()).0;
        assert!((jt - (jp - jm) / (2.0 * h)).abs() < 1e-6);
    }

    #[test]
    fn angle_helpers() {
        assert_eq!(wrap_angle(-0.5), std::f64::consts::TAU - 0.5);
        assert!((angle_diff(0.1, 6.2) - (0.1 + std::f64::consts::TAU - 6.2)).abs() < 1e-15);
    }
}
