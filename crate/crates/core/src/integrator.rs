//! Geodesic flow integration with forward sensitivities.
//!
//! Sensitivities are carried as an augmented system: each tracked direction
//! adds a 4-vector `δs` obeying `δs' = D(rhs)(s) δs`.

use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::frame::{FrameSpec, GeodesicState, HamiltonianFlow, Point};
use crate::ode::{self, OdeSystem, Solution};

/// Default integration tolerance.
pub const DEFAULT_TOL: f64 = 1e-10;

struct GeodesicOde<'a, F: HamiltonianFlow + ?Sized> {
    flow: &'a F,
    n_sens: usize,
}

impl<F: HamiltonianFlow + ?Sized> OdeSystem for GeodesicOde<'_, F> {
    fn dim(&self) -> usize {
        4 + 4 * self.n_sens
    }

    fn rhs(&self, y: &[f64], d: &mut [f64]) {
        let s = [y[0], y[1], y[2], y[3]];
        d[..4].copy_from_slice(&self.flow.rhs(&s));
        if self.n_sens == 0 {
            return;
        }
        let jac = self.flow.rhs_jacobian(&s);
        for k in 0..self.n_sens {
            let off = 4 + 4 * k;
            let v = &y[off..off + 4];
            for (i, row) in jac.iter().enumerate() {
                d[off + i] = row[0] * v[0] + row[1] * v[1] + row[2] * v[2] + row[3] * v[3];
            }
        }
    }
}

/// Dense-output geodesic, optionally with sensitivity directions.
#[derive(Debug, Clone)]
pub struct Trajectory {
    tol: f64,
    n_sens: usize,
    sol: Solution,
}

/// Trajectory launched with at least one tracked sensitivity direction.
pub type SensitivityTrajectory = Trajectory;

impl Trajectory {
    pub fn tol(&self) -> f64 {
        self.tol
    }

    pub fn sensitivity_count(&self) -> usize {
        self.n_sens
    }

    pub fn len(&self) -> usize {
        self.sol.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sol.is_empty()
    }

    pub fn times(&self) -> &[f64] {
        &self.sol.t
    }

    pub fn t_start(&self) -> f64 {
        self.sol.t[0]
    }

    pub fn t_end(&self) -> f64 {
        *self.sol.t.last().expect("non-empty")
    }

    pub fn node_state(&self, i: usize) -> GeodesicState {
        GeodesicState::from_slice(self.sol.node(i))
    }

    /// Sensitivity direction `k` at node `i`.
    pub fn node_sensitivity(&self, i: usize, k: usize) -> [f64; 4] {
        let v = self.sol.node(i);
        let off = 4 + 4 * k;
        [v[off], v[off + 1], v[off + 2], v[off + 3]]
    }

    /// Full augmented vector at node `i`.
    pub fn node_raw(&self, i: usize) -> &[f64] {
        self.sol.node(i)
    }

    pub fn node_velocity(&self, i: usize) -> [f64; 2] {
        let d = self.sol.node_derivative(i);
        [d[0], d[1]]
    }

    pub fn end_state(&self) -> GeodesicState {
        GeodesicState::from_slice(self.sol.last())
    }

    pub fn end_sensitivity(&self, k: usize) -> [f64; 4] {
        self.node_sensitivity(self.len() - 1, k)
    }

    pub fn end_velocity(&self) -> [f64; 2] {
        self.node_velocity(self.len() - 1)
    }

    /// Interpolated state at `t` within the integrated range.
    pub fn state_at(&self, t: f64) -> GeodesicState {
        let v = self.sol.interpolate(t);
        GeodesicState::from_slice(&v)
    }

    pub fn raw_at(&self, t: f64) -> Vec<f64> {
        self.sol.interpolate(t)
    }

    pub fn sensitivity_at(&self, t: f64, k: usize) -> [f64; 4] {
        let v = self.sol.interpolate(t);
        let off = 4 + 4 * k;
        [v[off], v[off + 1], v[off + 2], v[off + 3]]
    }

    /// `sup |H(t) − H(0)|` over the stored nodes.
    pub fn energy_drift<F: HamiltonianFlow + ?Sized>(&self, flow: &F) -> f64 {
        let h0 = flow.hamiltonian(&self.node_state(0).to_array());
        (0..self.len())
            .map(|i| (flow.hamiltonian(&self.node_state(i).to_array()) - h0).abs())
            .fold(0.0, f64::max)
    }

    /// CSV with header `t,x,y,px,py` plus `d{k}_x,...` per sensitivity,
    /// 17 significant digits.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("t,x,y,px,py");
        for k in 0..self.n_sens {
            write!(out, ",d{k}_x,d{k}_y,d{k}_px,d{k}_py").unwrap();
        }
        out.push('\n');
        for i in 0..self.len() {
            write!(out, "{:.16e}", self.sol.t[i]).unwrap();
            for v in self.sol.node(i) {
                write!(out, ",{v:.16e}").unwrap();
            }
            out.push('\n');
        }
        out
    }
}

fn check_tol(tol: f64) -> Result<()> {
    if (1e-14..=1e-4).contains(&tol) {
        Ok(())
    } else {
        Err(Error::BadTolerance(tol))
    }
}

fn check_state(s0: &GeodesicState) -> Result<()> {
    if s0.to_array().iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFiniteState { t: 0.0 })
    }
}

/// Integrates the geodesic flow from `s0` at `t = 0` to `t_end`.
pub fn integrate<F: HamiltonianFlow + ?Sized>(
    flow: &F,
    s0: GeodesicState,
    t_end: f64,
    tol: f64,
) -> Result<Trajectory> {
    check_tol(tol)?;
    check_state(&s0)?;
    if !t_end.is_finite() {
        return Err(Error::InvalidArgument(format!("t_end = {t_end}")));
    }
    let sys = GeodesicOde { flow, n_sens: 0 };
    let sol = ode::integrate(&sys, &s0.to_array(), 0.0, t_end, tol)?;
    Ok(Trajectory { tol, n_sens: 0, sol })
}

/// Integrates the flow together with one sensitivity direction `ds0`.
pub fn integrate_with_sensitivity<F: HamiltonianFlow + ?Sized>(
    flow: &F,
    s0: GeodesicState,
    ds0: [f64; 4],
    t_end: f64,
    tol: f64,
) -> Result<SensitivityTrajectory> {
    integrate_with_sensitivities(flow, s0, &[ds0], t_end, tol)
}

/// Integrates the flow with several sensitivity directions.
pub fn integrate_with_sensitivities<F: HamiltonianFlow + ?Sized>(
    flow: &F,
    s0: GeodesicState,
    ds0: &[[f64; 4]],
    t_end: f64,
    tol: f64,
) -> Result<SensitivityTrajectory> {
    check_tol(tol)?;
    check_state(&s0)?;
    if !t_end.is_finite() {
        return Err(Error::InvalidArgument(format!("t_end = {t_end}")));
    }
    let mut y0 = s0.to_array().to_vec();
    for d in ds0 {
        y0.extend_from_slice(d);
    }
    integrate_raw(flow, ds0.len(), &y0, 0.0, t_end, tol)
}

/// Continues an augmented state `y0` (as stored by a trajectory) from
/// `t0` to `t1`.
pub fn integrate_raw<F: HamiltonianFlow + ?Sized>(
    flow: &F,
    n_sens: usize,
    y0: &[f64],
    t0: f64,
    t1: f64,
    tol: f64,
) -> Result<Trajectory> {
    check_tol(tol)?;
    let sys = GeodesicOde { flow, n_sens };
    let sol = ode::integrate(&sys, y0, t0, t1, tol)?;
    Ok(Trajectory { tol, n_sens, sol })
}

/// Endpoint of a ray with its first-order data.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RayEnd {
    pub point: Point,
    /// `∂γ/∂t`.
    pub velocity: [f64; 2],
    /// `∂γ/∂θ` (or the derivative with respect to whichever launch
    /// parameter the sensitivity tracked).
    pub dparam: [f64; 2],
    pub state: GeodesicState,
}

impl RayEnd {
    /// `det(∂γ/∂θ, ∂γ/∂t)`.
    pub fn jacobian(&self) -> f64 {
        self.dparam[0] * self.velocity[1] - self.dparam[1] * self.velocity[0]
    }

    pub(crate) fn from_trajectory(traj: &Trajectory) -> Self {
        let s = traj.end_state();
        let d = traj.end_sensitivity(0);
        Self {
            point: s.point,
            velocity: traj.end_velocity(),
            dparam: [d[0], d[1]],
            state: s,
        }
    }
}

/// Endpoint of the arclength geodesic from `base` with initial covector
/// angle `theta`, at time `t`.
pub fn exp_map(spec: &FrameSpec, base: Point, theta: f64, t: f64) -> Result<Point> {
    exp_map_tol(spec, base, theta, t, DEFAULT_TOL)
}

pub fn exp_map_tol(spec: &FrameSpec, base: Point, theta: f64, t: f64, tol: f64) -> Result<Point> {
    let c = spec.unit_covector(base, theta)?;
    let traj = integrate(spec, GeodesicState { point: base, covector: c }, t, tol)?;
    Ok(traj.end_state().point)
}

/// Launch state and its `θ`-derivative for a Riemannian base.
pub fn ray_launch(spec: &FrameSpec, base: Point, theta: f64) -> Result<(GeodesicState, [f64; 4])> {
    let c = spec.unit_covector(base, theta)?;
    let d = spec.unit_covector_dtheta(base, theta)?;
    Ok((GeodesicState { point: base, covector: c }, d))
}

/// Ray from `base` with its `θ`-sensitivity, integrated to `t`.
pub fn ray_trajectory(
    spec: &FrameSpec,
    base: Point,
    theta: f64,
    t: f64,
    tol: f64,
) -> Result<SensitivityTrajectory> {
    let (s0, d0) = ray_launch(spec, base, theta)?;
    integrate_with_sensitivity(spec, s0, d0, t, tol)
}

/// Exponential map with first-order data at `(θ, t)`.
pub fn exp_map_jet(spec: &FrameSpec, base: Point, theta: f64, t: f64, tol: f64) -> Result<RayEnd> {
    let traj = ray_trajectory(spec, base, theta, t, tol)?;
    Ok(RayEnd::from_trajectory(&traj))
}
