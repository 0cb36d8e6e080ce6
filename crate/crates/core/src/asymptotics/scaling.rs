use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::exact::exact_geodesic;
use crate::frame::{FrameSpec, Point};
use crate::loci::{Launch, Scaled};
use crate::report::{Claim, ClaimReport};
use crate::stats::loglog_slope;

/// How the structure depends on the base distance `a`.
#[derive(Debug, Clone)]
pub enum Coupling {
    /// One structure, bases `(−a, 0)` approaching its Grushin point.
    Fixed(FrameSpec),
    /// `f = 1 + a x` with base `(−a, 0)`, the same `a` in both places.
    Linear,
}

impl Coupling {
    fn spec(&self, a: f64) -> FrameSpec {
        match self {
            Coupling::Fixed(s) => s.clone(),
            Coupling::Linear => FrameSpec::linear(a),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ScalingReport {
    pub a_grid: Vec<f64>,
    /// `sup |(x_a/a, y_a/a²)(θ, a s) − γ(θ, s)|` for each `a`.
    pub sup_diff: Vec<f64>,
    pub slope: f64,
    /// Largest deviation of the `θ = 0` ray from `(−1 + s, 0)`.
    pub horizontal_ray_error: f64,
    pub claims: ClaimReport,
}

pub const SCALING_SLOPE: f64 = 0.9;

/// Compares the exponential map from `(−a, 0)`, rescaled by `(a, a²)` in
/// space and `a` in time, with the nilpotent map from `(−1, 0)`.
pub fn perturbed_scaling_check(coupling: &Coupling, a_grid: &[f64], theta_grid: &[f64], s_grid: &[f64]) -> Result<ScalingReport> {
    if a_grid.len() < 2 || a_grid.iter().any(|&a| !(a > 0.0 && a <= 0.1 + 1e-12)) {
        return Err(Error::InvalidArgument("a grid needs >= 2 values in (0, 0.1]".into()));
    }
    let s_max = s_grid.iter().copied().fold(0.0, f64::max);
    if !(s_max <= 2.0 * std::f64::consts::PI + 1e-12) || s_grid.iter().any(|&s| s < 0.0) {
        return Err(Error::InvalidArgument("s grid must lie in [0, 2π]".into()));
    }
    let per_a: Vec<(f64, f64)> = a_grid
        .par_iter()
        .map(|&a| {
            let spec = coupling.spec(a);
            let base = Point::new(-a, 0.0);
            let ctx = Scaled::new(&spec, Launch::Ray { base }, a)?;
            let dspec = ctx.dilated_spec();
            let mut sup = 0.0f64;
            let mut horizontal = 0.0f64;
            for &th in theta_grid {
                let traj = ctx.trajectory(&dspec, th, s_max, 1e-12)?;
                for &s in s_grid {
                    let st = traj.state_at(s);
                    let e = exact_geodesic(th, s);
                    sup = sup.max((st.point.x - e.x).hypot(st.point.y - e.y));
                }
            }
            let traj = ctx.trajectory(&dspec, 0.0, s_max, 1e-12)?;
            for &s in s_grid {
                let st = traj.state_at(s);
                horizontal = horizontal.max((st.point.x - (-1.0 + s)).hypot(st.point.y));
            }
            Ok((sup, horizontal))
        })
        .collect::<Result<_>>()?;
    let sup_diff: Vec<f64> = per_a.iter().map(|v| v.0).collect();
    let horizontal_ray_error = per_a.iter().map(|v| v.1).fold(0.0, f64::max);
    let slope = loglog_slope(a_grid, &sup_diff)?.slope;
    let mut claims = ClaimReport::default();
    claims.push(Claim::slope_at_least("rescaled perturbed map converges to nilpotent map", SCALING_SLOPE, slope));
    claims.push(Claim::at_most("sup-difference at smallest a", 0.05, sup_diff[0]));
    Ok(ScalingReport { a_grid: a_grid.to_vec(), sup_diff, slope, horizontal_ray_error, claims })
}

/// `θ_k = 2πk/n`, skipping `θ ≡ 0 (mod π)`.
pub fn default_theta_grid(n: usize) -> Vec<f64> {
    (0..n)
        .map(|k| std::f64::consts::TAU * k as f64 / n as f64)
        .filter(|t| t.sin().abs() > 1e-9)
        .collect()
}

/// Sixteen points spanning `(0, 2π]`.
pub fn default_scaling_s_grid() -> Vec<f64> {
    (1..=16).map(|k| std::f64::consts::TAU * f64::from(k) / 16.0).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn a_grid() -> Vec<f64> {
        crate::stats::geometric_grid(1e-3, 10f64.powf(0.5), 5)
    }

    #[test]
    fn fixed_structure_converges_at_first_order() {
        let spec = FrameSpec::linear(1.0);
        let r = perturbed_scaling_check(&Coupling::Fixed(spec), &a_grid(), &default_theta_grid(16), &default_scaling_s_grid()).unwrap();
        assert!(r.claims.pass(), "{}", r.claims.to_text());
        assert!((r.slope - 1.0).abs() < 0.15, "{}", r.slope);
        assert!(r.horizontal_ray_error < 1e-9);
    }

    #[test]
    fn coupled_linear_structure_converges_faster() {
        let r = perturbed_scaling_check(&Coupling::Linear, &a_grid(), &default_theta_grid(16), &default_scaling_s_grid()).unwrap();
        assert!(r.claims.pass(), "{}", r.claims.to_text());
        assert!(r.slope > 1.7, "{}", r.slope);
    }
}
