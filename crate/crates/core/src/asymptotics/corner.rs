use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::frame::{FrameSpec, GeodesicState, HamiltonianFlow, Point};
use crate::integrator::integrate_with_sensitivity;
use crate::report::{Claim, ClaimReport};
use crate::solve::{newton2, Newton2Options};

/// Upper (`p_y > 0`) or lower (`p_y < 0`) half of the cut locus.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Branch {
    Upper,
    Lower,
}

impl Branch {
    fn sign(self) -> f64 {
        match self {
            Branch::Upper => 1.0,
            Branch::Lower => -1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GrushinCutPoint {
    pub rho0: f64,
    pub point: Point,
    /// `ρ` of the geodesics leaving with `p_x = +1` and `p_x = −1`.
    pub rho_plus: f64,
    pub rho_minus: f64,
    /// Endpoint mismatch in original coordinates.
    pub residual: f64,
    pub iterations: usize,
}

/// Endpoint at dilated time `π` and its derivative in `r = ρ/ρ0`, in the
/// frame dilated by `ρ0`.
fn endpoint(dspec: &FrameSpec, px: f64, py_sign: f64, r: f64, tol: f64) -> Result<([f64; 2], [f64; 2])> {
    if !(r > 0.0) {
        return Err(Error::NonPositiveRho(r));
    }
    let s0 = GeodesicState::new(0.0, 0.0, px, py_sign / r);
    let d0 = [0.0, 0.0, 0.0, -py_sign / (r * r)];
    let traj = integrate_with_sensitivity(dspec, s0, d0, std::f64::consts::PI, tol)?;
    let raw = traj.node_raw(traj.len() - 1);
    Ok(([raw[0], raw[1]], [raw[4], raw[5]]))
}

/// Point where the geodesics leaving the origin with `p_x = ±1` meet at
/// time `πρ0`, found by Newton on the two launch parameters `ρ±`.
pub fn grushin_cut_point(spec: &FrameSpec, rho0: f64, branch: Branch) -> Result<GrushinCutPoint> {
    grushin_cut_point_tol(spec, rho0, branch, 1e-13)
}

pub fn grushin_cut_point_tol(spec: &FrameSpec, rho0: f64, branch: Branch, tol: f64) -> Result<GrushinCutPoint> {
    if !(rho0 > 0.0 && rho0 <= 0.2) {
        return Err(Error::InvalidArgument(format!("rho0 = {rho0} outside (0, 0.2]")));
    }
    let dspec = spec.dilated(rho0);
    let sg = branch.sign();
    let out = newton2(
        |r| {
            let (gp, dp) = endpoint(&dspec, 1.0, sg, r[0], tol)?;
            let (gm, dm) = endpoint(&dspec, -1.0, sg, r[1], tol)?;
            Ok(([gp[0] - gm[0], gp[1] - gm[1]], [[dp[0], -dm[0]], [dp[1], -dm[1]]]))
        },
        [1.0, 1.0],
        Newton2Options { tol: 1e-14, max_iter: 50, max_step: [0.2, 0.2] },
    )?;
    let (gp, _) = endpoint(&dspec, 1.0, sg, out.x[0], tol)?;
    let (gm, _) = endpoint(&dspec, -1.0, sg, out.x[1], tol)?;
    let residual = (rho0 * (gp[0] - gm[0])).hypot(rho0 * rho0 * (gp[1] - gm[1]));
    // The fixed-point mismatch is limited by the integrator, not by Newton.
    if out.residual > 1e-10 {
        return Err(Error::NewtonDiverged(format!(
            "cut point at rho0 = {rho0}: residual {} after {} iterations",
            out.residual, out.iterations
        )));
    }
    let mid = [0.5 * (gp[0] + gm[0]), 0.5 * (gp[1] + gm[1])];
    Ok(GrushinCutPoint {
        rho0,
        point: Point::new(rho0 * mid[0], rho0 * rho0 * mid[1]),
        rho_plus: rho0 * out.x[0],
        rho_minus: rho0 * out.x[1],
        residual,
        iterations: out.iterations,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct CornerFit {
    pub a: f64,
    pub rho_grid: Vec<f64>,
    /// Extrapolated `lim cut point / ρ0²` for each branch.
    pub tangent_upper: [f64; 2],
    pub tangent_lower: [f64; 2],
    /// Deviation from a straight line through the Grushin point.
    pub corner_angle: f64,
    /// Extrapolated `lim (ρ± − ρ0)/ρ0²` on the upper branch.
    pub alpha_plus: f64,
    pub alpha_minus: f64,
    pub upper: Vec<GrushinCutPoint>,
    pub lower: Vec<GrushinCutPoint>,
    /// `|cut point/ρ0² − extrapolated tangent|` per grid value.
    pub residuals_upper: Vec<f64>,
    pub residuals_lower: Vec<f64>,
}

impl CornerFit {
    pub fn expected_tangent(a: f64) -> [f64; 2] {
        [-4.0 * a / 3.0, std::f64::consts::FRAC_PI_2]
    }

    pub fn expected_alpha(a: f64) -> f64 {
        8.0 * a / (3.0 * std::f64::consts::PI)
    }

    pub fn expected_corner_angle(a: f64) -> f64 {
        2.0 * ((4.0 * a.abs() / 3.0) / std::f64::consts::FRAC_PI_2).atan()
    }

    /// Tangents and `α` coefficients against their closed forms at relative
    /// tolerance `rel`, and the corner angle against `0` within `zero_tol`
    /// when `a = 0`.
    pub fn claims(&self, rel: f64, zero_tol: f64) -> ClaimReport {
        let a = self.a;
        let e = Self::expected_tangent(a);
        let mut r = ClaimReport::default();
        let scale = e[0].hypot(e[1]);
        let tag = format!("a={a}");
        r.push(Claim::close(format!("upper tangent x ({tag})"), e[0], self.tangent_upper[0], rel, rel * scale));
        r.push(Claim::close(format!("upper tangent y ({tag})"), e[1], self.tangent_upper[1], rel, 0.0));
        r.push(Claim::close(format!("lower tangent x ({tag})"), e[0], self.tangent_lower[0], rel, rel * scale));
        r.push(Claim::close(format!("lower tangent y ({tag})"), -e[1], self.tangent_lower[1], rel, 0.0));
        let ea = Self::expected_alpha(a);
        r.push(Claim::close(format!("alpha plus ({tag})"), ea, self.alpha_plus, 0.05, 1e-3));
        r.push(Claim::close(format!("alpha minus ({tag})"), -ea, self.alpha_minus, 0.05, 1e-3));
        if a == 0.0 {
            r.push(Claim::at_most(format!("corner angle vanishes ({tag})"), zero_tol, self.corner_angle));
        } else {
            r.push(Claim::close(format!("corner angle ({tag})"), Self::expected_corner_angle(a), self.corner_angle, rel, 0.0));
            r.push(Claim {
                name: format!("corner angle nonzero ({tag})"),
                expected: Some(zero_tol),
                fitted: Some(self.corner_angle),
                slope: None,
                pass: self.corner_angle > zero_tol,
            });
        }
        r
    }
}

/// Two-term Richardson extrapolation to `ρ → 0` from the two smallest grid
/// values, for the model `c0 + c1 ρ`.
fn extrapolate(rho: &[f64], v: &[f64]) -> f64 {
    let (h1, h2) = (rho[0], rho[1]);
    (h2 * v[0] - h1 * v[1]) / (h2 - h1)
}

fn angle_between(u: [f64; 2], v: [f64; 2]) -> f64 {
    let cross = u[0] * v[1] - u[1] * v[0];
    let dot = u[0] * v[0] + u[1] * v[1];
    cross.abs().atan2(dot)
}

/// Extrapolated tangents of both cut branches at the Grushin point.
pub fn corner_fit(spec: &FrameSpec, rho_grid: &[f64]) -> Result<CornerFit> {
    if rho_grid.len() < 2 || rho_grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidArgument("corner fit needs an increasing grid of >= 2 values".into()));
    }
    let solve = |b: Branch| -> Result<Vec<GrushinCutPoint>> {
        rho_grid.par_iter().map(|&r| grushin_cut_point(spec, r, b)).collect()
    };
    let upper = solve(Branch::Upper)?;
    let lower = solve(Branch::Lower)?;
    let tangent = |pts: &[GrushinCutPoint]| -> [f64; 2] {
        let xs: Vec<f64> = pts.iter().map(|p| p.point.x / (p.rho0 * p.rho0)).collect();
        let ys: Vec<f64> = pts.iter().map(|p| p.point.y / (p.rho0 * p.rho0)).collect();
        [extrapolate(rho_grid, &xs), extrapolate(rho_grid, &ys)]
    };
    let tu = tangent(&upper);
    let tl = tangent(&lower);
    let alpha = |f: fn(&GrushinCutPoint) -> f64| {
        let v: Vec<f64> = upper.iter().map(|p| (f(p) - p.rho0) / (p.rho0 * p.rho0)).collect();
        extrapolate(rho_grid, &v)
    };
    let alpha_plus = alpha(|p| p.rho_plus);
    let alpha_minus = alpha(|p| p.rho_minus);
    let resid = |pts: &[GrushinCutPoint], t: [f64; 2]| -> Vec<f64> {
        pts.iter()
            .map(|p| (p.point.x / (p.rho0 * p.rho0) - t[0]).hypot(p.point.y / (p.rho0 * p.rho0) - t[1]))
            .collect()
    };
    Ok(CornerFit {
        a: spec.a(),
        rho_grid: rho_grid.to_vec(),
        tangent_upper: tu,
        tangent_lower: tl,
        corner_angle: std::f64::consts::PI - angle_between(tu, tl),
        alpha_plus,
        alpha_minus,
        residuals_upper: resid(&upper, tu),
        residuals_lower: resid(&lower, tl),
        upper,
        lower,
    })
}

/// Velocity at the cut point of the `p_x = ±1` geodesics, original units.
pub fn cut_point_velocities(spec: &FrameSpec, c: &GrushinCutPoint, branch: Branch) -> Result<[[f64; 2]; 2]> {
    let sg = branch.sign();
    let t = std::f64::consts::PI * c.rho0;
    let mut out = [[0.0; 2]; 2];
    for (k, (px, rho)) in [(1.0, c.rho_plus), (-1.0, c.rho_minus)].into_iter().enumerate() {
        let traj = crate::integrator::integrate(spec, GeodesicState::new(0.0, 0.0, px, sg / rho), t, 1e-12)?;
        let v = spec.rhs(&traj.end_state().to_array());
        out[k] = [v[0], v[1]];
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::FRAC_PI_2;

    fn grid() -> Vec<f64> {
        crate::stats::geometric_grid(1e-3, 2.0, 7)
    }

    #[test]
    fn nilpotent_cut_point() {
        for &r in &[1e-3, 0.01, 0.2] {
            let c = grushin_cut_point(&FrameSpec::nilpotent(), r, Branch::Upper).unwrap();
            assert!(c.point.x.abs() <= 1e-9 * r * r, "{c:?}");
            assert!((c.point.y - FRAC_PI_2 * r * r).abs() <= 1e-9 * r * r, "{c:?}");
        }
    }

    #[test]
    fn residual_at_convergence() {
        for &r in &[1e-3, 0.01, 0.1] {
            let c = grushin_cut_point(&FrameSpec::linear(0.1), r, Branch::Upper).unwrap();
            assert!(c.residual <= 1e-11 * r * r, "{c:?}");
        }
    }

    #[test]
    fn branches_mirror_in_y() {
        let spec = FrameSpec::linear(0.1);
        for &r in &[0.005, 0.05] {
            let u = grushin_cut_point(&spec, r, Branch::Upper).unwrap();
            let l = grushin_cut_point(&spec, r, Branch::Lower).unwrap();
            assert!((u.point.x - l.point.x).abs() <= 1e-9 * r * r);
            assert!((u.point.y + l.point.y).abs() <= 1e-9 * r * r);
        }
    }

    #[test]
    fn corner_matches_closed_form() {
        for &a in &[0.0, 0.1, -0.1] {
            let fit = corner_fit(&FrameSpec::linear(a), &grid()).unwrap();
            let claims = fit.claims(0.02, 1e-3);
            assert!(claims.pass(), "{}", claims.to_text());
        }
    }

    #[test]
    fn extrapolation_is_stable_when_smallest_rho_dropped() {
        let spec = FrameSpec::linear(0.1);
        let g = grid();
        let full = corner_fit(&spec, &g).unwrap();
        let cut = corner_fit(&spec, &g[1..]).unwrap();
        for k in 0..2 {
            let rel = (full.tangent_upper[k] - cut.tangent_upper[k]).abs() / full.tangent_upper[k].abs();
            assert!(rel <= 0.005, "component {k}: {rel}");
        }
    }

    #[test]
    fn rejects_large_rho() {
        assert!(grushin_cut_point(&FrameSpec::nilpotent(), 0.3, Branch::Upper).is_err());
    }
}
