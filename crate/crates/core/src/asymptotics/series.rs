use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::frame::{FrameSpec, HamiltonianFlow};
use crate::ode::{self, OdeSystem, Solution};
use crate::report::{Claim, ClaimReport};
use crate::stats::loglog_slope;

/// Leading terms of the small-`ρ` expansion of the geodesics leaving a
/// Grushin point with `p_x = 1`, `p_y = 1/ρ`, in the time `s = p_y t`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SeriesTerms {
    pub x1: f64,
    pub x2: f64,
    pub y2: f64,
    pub y3: f64,
    pub p1: f64,
    pub p2: f64,
}

pub fn series_terms(a: f64, s: f64) -> SeriesTerms {
    let h = (0.5 * s).sin();
    let h2 = h * h;
    let h4 = h2 * h2;
    SeriesTerms {
        x1: s.sin(),
        p1: s.cos(),
        y2: 0.25 * (2.0 * s - (2.0 * s).sin()),
        x2: -4.0 * a * h4,
        p2: -4.0 * a * h2 * s.sin(),
        y3: 8.0 * a / 3.0 * (1.0 + 2.0 * s.cos()) * h4,
    }
}

impl SeriesTerms {
    /// Right-hand side of the first-order system the terms satisfy, in the
    /// order `(x1, x2, y2, y3, p1, p2)`.
    pub fn system_rhs(&self, a: f64) -> [f64; 6] {
        [
            self.p1,
            self.p2,
            self.x1 * self.x1,
            2.0 * a * self.x1.powi(3) + 2.0 * self.x1 * self.x2,
            -self.x1,
            -3.0 * a * self.x1 * self.x1 - self.x2,
        ]
    }

    pub fn as_array(&self) -> [f64; 6] {
        [self.x1, self.x2, self.y2, self.y3, self.p1, self.p2]
    }
}

/// Geodesic flow reparametrised by `s` with `ds/dt = p_y`.
struct STime<'a>(&'a FrameSpec);

impl OdeSystem for STime<'_> {
    fn dim(&self) -> usize {
        4
    }

    fn rhs(&self, y: &[f64], dydt: &mut [f64]) {
        let s = [y[0], y[1], y[2], y[3]];
        let v = self.0.rhs(&s);
        for k in 0..4 {
            dydt[k] = v[k] / s[3];
        }
    }
}

/// Geodesic from the origin with `p_x = sign`, `p_y = 1/ρ`, sampled in the
/// time `s = ∫ p_y dt`.
///
/// Integration runs in the frame dilated by `ρ`, where the launch is at unit
/// scale, so the small quantities `x ~ ρ`, `y ~ ρ²` keep full relative
/// accuracy.
pub struct RescaledCurve {
    pub rho: f64,
    sol: Solution,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RescaledPoint {
    pub s: f64,
    pub x: f64,
    pub y: f64,
    /// `p_x / p_y`.
    pub p_bar: f64,
}

impl RescaledCurve {
    /// `(x/ρ, y/ρ², p̄/ρ)` at `s`.
    pub fn normalised_at(&self, s: f64) -> [f64; 3] {
        let v = self.sol.interpolate(s);
        [v[0], v[1], v[2] / v[3]]
    }

    pub fn at(&self, s: f64) -> RescaledPoint {
        let [x, y, p] = self.normalised_at(s);
        let r = self.rho;
        RescaledPoint { s, x: r * x, y: r * r * y, p_bar: r * p }
    }

    pub fn s_end(&self) -> f64 {
        self.sol.t[self.sol.len() - 1]
    }
}

pub fn rescaled_flow(spec: &FrameSpec, rho: f64, s_end: f64, sign: f64, tol: f64) -> Result<RescaledCurve> {
    if !(rho > 0.0 && rho <= 0.5) {
        return Err(Error::NonPositiveRho(rho));
    }
    if !(s_end >= 0.0) || !s_end.is_finite() {
        return Err(Error::InvalidArgument(format!("s_end = {s_end}")));
    }
    let dspec = spec.dilated(rho);
    let sol = ode::integrate(&STime(&dspec), &[0.0, 0.0, sign.signum(), 1.0], 0.0, s_end, tol)?;
    Ok(RescaledCurve { rho, sol })
}

/// `(x/ρ, y/ρ², p̄/ρ)` at each `s` of an increasing grid, integrating
/// node to node so every sample is a true integration endpoint.
pub fn rescaled_samples(spec: &FrameSpec, rho: f64, s_grid: &[f64], tol: f64) -> Result<Vec<[f64; 3]>> {
    if !(rho > 0.0 && rho <= 0.5) {
        return Err(Error::NonPositiveRho(rho));
    }
    if s_grid.first().is_some_and(|&s| s < 0.0) || s_grid.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::InvalidArgument("s grid must be non-negative and increasing".into()));
    }
    let dspec = spec.dilated(rho);
    let sys = STime(&dspec);
    let mut y = vec![0.0, 0.0, 1.0, 1.0];
    let mut s0 = 0.0;
    let mut out = Vec::with_capacity(s_grid.len());
    for &s in s_grid {
        if s > s0 {
            let sol = ode::integrate(&sys, &y, s0, s, tol)?;
            y = sol.last().to_vec();
            s0 = s;
        }
        out.push([y[0], y[1], y[2] / y[3]]);
    }
    Ok(out)
}

/// Normalised remainders below this are integration noise.
const REMAINDER_FLOOR: f64 = 1e-12;

/// Log-log slope of `scale·|remainder|` against `ρ` over the values whose
/// normalised remainder clears the noise floor; `+∞` when fewer than two
/// do, i.e. the expansion is exact to working precision.
fn remainder_slope(v: &[(f64, f64, f64)]) -> Result<f64> {
    let (h, e): (Vec<f64>, Vec<f64>) = v
        .iter()
        .filter(|(_, r, _)| r.abs() > REMAINDER_FLOOR)
        .map(|&(rho, r, scale)| (rho, scale * r.abs()))
        .unzip();
    if h.len() < 2 {
        return Ok(f64::INFINITY);
    }
    Ok(loglog_slope(&h, &e)?.slope)
}

#[derive(Debug, Clone, Serialize)]
pub struct SeriesSlopes {
    pub s: f64,
    pub x: f64,
    pub y: f64,
    pub p_bar: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct SeriesReport {
    pub a: f64,
    pub rho_grid: Vec<f64>,
    pub slopes: Vec<SeriesSlopes>,
    pub claims: ClaimReport,
}

pub const SERIES_X_SLOPE: f64 = 2.7;
pub const SERIES_Y_SLOPE: f64 = 3.7;
pub const SERIES_P_SLOPE: f64 = 2.7;

/// Empirical orders of the remainders `x − ρx₁ − ρ²x₂`, `y − ρ²y₂ − ρ³y₃`
/// and `p̄ − ρp̄₁ − ρ²p̄₂` at each `s`, with `a` read from `spec`.
pub fn series_report(spec: &FrameSpec, rho_grid: &[f64], s_grid: &[f64]) -> Result<SeriesReport> {
    if rho_grid.len() < 5 {
        return Err(Error::InvalidArgument("series check needs at least 5 rho values".into()));
    }
    let a = spec.a();
    let samples: Vec<Vec<[f64; 3]>> = rho_grid
        .par_iter()
        .map(|&r| rescaled_samples(spec, r, s_grid, 1e-13))
        .collect::<Result<_>>()?;
    let mut slopes = Vec::with_capacity(s_grid.len());
    let mut claims = ClaimReport::default();
    for (k, &s) in s_grid.iter().enumerate() {
        let t = series_terms(a, s);
        let mut ex = Vec::new();
        let mut ey = Vec::new();
        let mut ep = Vec::new();
        for (&r, v) in rho_grid.iter().zip(&samples) {
            let [x, y, p] = v[k];
            ex.push((r, x - t.x1 - r * t.x2, r));
            ey.push((r, y - t.y2 - r * t.y3, r * r));
            ep.push((r, p - t.p1 - r * t.p2, r));
        }
        let sx = remainder_slope(&ex)?;
        let sy = remainder_slope(&ey)?;
        let sp = remainder_slope(&ep)?;
        claims.push(Claim::slope_at_least(format!("series x remainder order at s={s:.4}"), SERIES_X_SLOPE, sx));
        claims.push(Claim::slope_at_least(format!("series y remainder order at s={s:.4}"), SERIES_Y_SLOPE, sy));
        claims.push(Claim::slope_at_least(format!("series p_bar remainder order at s={s:.4}"), SERIES_P_SLOPE, sp));
        slopes.push(SeriesSlopes { s, x: sx, y: sy, p_bar: sp });
    }
    Ok(SeriesReport { a, rho_grid: rho_grid.to_vec(), slopes, claims })
}

/// [`series_report`], failing with the first slope below its threshold.
pub fn verify_series(spec: &FrameSpec, rho_grid: &[f64], s_grid: &[f64]) -> Result<SeriesReport> {
    let r = series_report(spec, rho_grid, s_grid)?;
    for s in &r.slopes {
        for (name, v, th) in [("x", s.x, SERIES_X_SLOPE), ("y", s.y, SERIES_Y_SLOPE), ("p_bar", s.p_bar, SERIES_P_SLOPE)] {
            if v < th {
                return Err(Error::SlopeBelowThreshold { label: format!("{name} at s = {}", s.s), slope: v, threshold: th });
            }
        }
    }
    Ok(r)
}

/// Sixteen points spanning `(0, π]`.
pub fn default_s_grid() -> Vec<f64> {
    (1..=16).map(|k| std::f64::consts::PI * f64::from(k) / 16.0).collect()
}

/// `1e-3·2ᵏ` for `k = 0..7`, inside `[1e-3, 0.1]`.
pub fn default_rho_grid() -> Vec<f64> {
    crate::stats::geometric_grid(1e-3, 2.0, 7)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frame::Monomial;
    use std::f64::consts::{FRAC_PI_2, PI};

    #[test]
    fn terms_at_pi() {
        let a = 0.3;
        let t = series_terms(a, PI);
        assert!(t.x1.abs() < 1e-15);
        assert!((t.y2 - FRAC_PI_2).abs() < 1e-15);
        assert!((t.x2 + 4.0 * a).abs() < 1e-15);
        assert!((t.y3 + 8.0 * a / 3.0).abs() < 1e-14);
    }

    #[test]
    fn nilpotent_terms_vanish() {
        for k in 0..20 {
            let t = series_terms(0.0, 0.37 * f64::from(k));
            assert_eq!((t.x2, t.y3, t.p2), (0.0, 0.0, 0.0));
        }
    }

    #[test]
    fn terms_solve_their_system() {
        let a = 0.7;
        let h = 1e-5;
        for k in 0..25 {
            let s = 0.26 * f64::from(k);
            let p = series_terms(a, s + h).as_array();
            let m = series_terms(a, s - h).as_array();
            let rhs = series_terms(a, s).system_rhs(a);
            for i in 0..6 {
                assert!(((p[i] - m[i]) / (2.0 * h) - rhs[i]).abs() < 1e-9, "s {s} component {i}");
            }
        }
        let t0 = series_terms(a, 0.0);
        assert_eq!(t0.as_array(), [0.0, 0.0, 0.0, 0.0, 1.0, 0.0]);
    }

    #[test]
    fn rescaled_flow_limits() {
        let spec = FrameSpec::nilpotent();
        let c = rescaled_flow(&spec, 1e-3, PI, 1.0, 1e-13).unwrap();
        let p = c.at(PI);
        assert!(p.x.abs() < 1e-12);
        assert!((p.y / 1e-6 - FRAC_PI_2).abs() < 1e-9);
        let q = c.at(1.0);
        assert!((q.p_bar / 1e-3 - 1f64.cos()).abs() < 1e-9);
    }

    #[test]
    fn linear_term_shifts_x_at_pi() {
        let a = 0.1;
        let rho = 0.01;
        let c = rescaled_flow(&FrameSpec::linear(a), rho, PI, 1.0, 1e-13).unwrap();
        assert!((c.at(PI).x + 4.0 * a * rho * rho).abs() < 20.0 * rho.powi(3));
    }

    #[test]
    fn orders_hold_for_linear_f() {
        let r = verify_series(&FrameSpec::linear(0.1), &default_rho_grid(), &default_s_grid()).unwrap();
        assert!(r.claims.pass());
    }

    #[test]
    fn orders_unchanged_by_higher_jets() {
        let spec = FrameSpec::with_coeffs(0.1, vec![Monomial { i: 2, j: 0, c: 0.5 }, Monomial { i: 1, j: 1, c: 0.3 }]).unwrap();
        verify_series(&spec, &default_rho_grid(), &default_s_grid()).unwrap();
    }

    #[test]
    fn nilpotent_remainder_is_third_order() {
        let r = verify_series(&FrameSpec::nilpotent(), &default_rho_grid(), &default_s_grid()).unwrap();
        for s in &r.slopes {
            assert!(s.x > 2.7, "{s:?}");
        }
        let v = rescaled_samples(&FrameSpec::nilpotent(), 0.01, &default_s_grid(), 1e-13).unwrap();
        for (s, p) in default_s_grid().iter().zip(&v) {
            assert!((p[0] - s.sin()).abs() < 1e-11);
        }
    }
}
