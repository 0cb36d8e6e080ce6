//! Closed-form geodesics of the Grushin plane `(∂x, x ∂y)` from `(−1, 0)`.
//!
//! The ray with initial covector angle `θ` is
//!
//! ```text
//! x(θ, t) = −sin(θ − t sin θ) / sin θ
//! y(θ, t) = (2 t sin θ − 2 cos θ sin θ + sin(2θ − 2 t sin θ)) / (4 sin² θ)
//! ```
//!
//! and degenerates to the horizontal line `x = −1 ± t` when `sin θ = 0`.
//! Writing `u = t sin θ`, the same map is
//! `x = −cos u + t cos θ sinc u`,
//! `y = 2 t³ sin θ ψ(2u) − t² cos θ sin θ sinc² u + sin(2u)/2`
//! with `ψ(w) = (w − sin w)/w³`; this form has no cancellation near the
//! horizontal rays and is used there.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::frame::Point;
use crate::jet::{invert_near_identity, Jet3};

/// Below this `|sin θ|` the cancellation-free form is evaluated.
pub const SMALL_SIN: f64 = 1e-4;

/// `|sin θ|` at or below this is treated as a horizontal ray.
const SINGULAR_SIN: f64 = 1e-12;

/// Local type of the exponential map at a point of its domain.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SingularityClass {
    Regular,
    #[serde(rename = "Fold_A2")]
    FoldA2,
    #[serde(rename = "Cusp_A3")]
    CuspA3,
}

impl std::fmt::Display for SingularityClass {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            SingularityClass::Regular => "Regular",
            SingularityClass::FoldA2 => "Fold_A2",
            SingularityClass::CuspA3 => "Cusp_A3",
        })
    }
}

/// Parameters of a ray of the closed-form exponential map.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExactGeodesicParams {
    pub theta: f64,
    pub t: f64,
}

fn sinc(w: f64) -> f64 {
    if w.abs() < 1e-3 {
        let w2 = w * w;
        1.0 - w2 / 6.0 + w2 * w2 / 120.0
    } else {
        w.sin() / w
    }
}

/// `(w − sin w) / w³`.
fn psi(w: f64) -> f64 {
    if w.abs() < 0.1 {
        let w2 = w * w;
        1.0 / 6.0 - w2 / 120.0 + w2 * w2 / 5040.0 - w2 * w2 * w2 / 362_880.0
    } else {
        (w - w.sin()) / (w * w * w)
    }
}

fn nonsingular_sin(theta: f64) -> Result<f64> {
    let s = theta.sin();
    if s.abs() <= SINGULAR_SIN {
        Err(Error::SingularTheta(theta))
    } else {
        Ok(s)
    }
}

/// Point `γ(θ, t)` of the closed-form geodesic.
pub fn exact_geodesic(theta: f64, t: f64) -> Point {
    let (s, c) = theta.sin_cos();
    let u = t * s;
    if s.abs() < SMALL_SIN {
        let x = -u.cos() + c * t * sinc(u);
        let y = 2.0 * t * t * t * s * psi(2.0 * u) - c * s * t * t * sinc(u).powi(2)
            + (2.0 * u).sin() / 2.0;
        return Point::new(x, y);
    }
    let x = -(theta - u).sin() / s;
    let y = (2.0 * u - 2.0 * c * s + (2.0 * theta - 2.0 * u).sin()) / (4.0 * s * s);
    Point::new(x, y)
}

/// `∂γ/∂t(θ, t) = (cos(θ − u), sin²(θ − u) / sin θ)`.
pub fn exact_velocity(theta: f64, t: f64) -> [f64; 2] {
    let (s, c) = theta.sin_cos();
    let u = t * s;
    // sin(θ − u) / sin θ, kept finite as sin θ → 0.
    let ratio = u.cos() - c * t * sinc(u);
    [(theta - u).cos(), s * ratio * ratio]
}

/// `∂x/∂θ` from `−sin²θ ∂x/∂θ = sin u − u cos θ cos(θ − u)`.
pub fn exact_x_theta_derivative(theta: f64, t: f64) -> Result<f64> {
    let s = nonsingular_sin(theta)?;
    let u = t * s;
    Ok(-(u.sin() - u * theta.cos() * (theta - u).cos()) / (s * s))
}

/// `Jac(θ, t) = (t cos θ cos(θ − t sin θ) sin θ − sin(t sin θ)) / sin³θ`,
/// which equals `det(∂γ/∂θ, ∂γ/∂t)`.
pub fn exact_jacobian(theta: f64, t: f64) -> Result<f64> {
    let s = nonsingular_sin(theta)?;
    let u = t * s;
    Ok((u * theta.cos() * (theta - u).cos() - u.sin()) / (s * s * s))
}

/// `∂γ/∂θ(θ, t) = Jac(θ, t) · (sin θ, −cos(θ − t sin θ))`.
pub fn exact_dgamma_dtheta(theta: f64, t: f64) -> Result<[f64; 2]> {
    let jac = exact_jacobian(theta, t)?;
    let s = theta.sin();
    Ok([jac * s, -jac * (theta - t * s).cos()])
}

/// Analytic `∂Jac/∂θ` at any `(θ, t)`.
pub fn exact_djac_dtheta(theta: f64, t: f64) -> Result<f64> {
    let s = nonsingular_sin(theta)?;
    let c = theta.cos();
    let u = t * s;
    let n = u * c * (theta - u).cos() - u.sin();
    let dn = t
        * (-(t * c - 1.0) * s * c * (u - theta).sin() - s * s * (u - theta).cos()
            + c * c * (u - theta).cos()
            - c * u.cos());
    Ok(dn / (s * s * s) - 3.0 * c * n / (s * s * s * s))
}

/// The factorised expression
/// `(t sin θ / 4)(sin u (2 − 3t cos θ + 6 cos 2θ − t cos 3θ)
///  + cos u (t sin θ − 6 sin 2θ + t sin 2θ))`.
///
/// On the first conjugate curve it shares sign and zero set with
/// [`exact_djac_dtheta`], but not its magnitude, so it is only used as a
/// cross-check of the degeneracy locus.
pub fn factorised_djac(theta: f64, t: f64) -> Result<f64> {
    nonsingular_sin(theta)?;
    let (s, c) = theta.sin_cos();
    let u = t * s;
    let a = 2.0 - 3.0 * t * c + 6.0 * (2.0 * theta).cos() - t * (3.0 * theta).cos();
    let b = t * s - 6.0 * (2.0 * theta).sin() + t * (2.0 * theta).sin();
    Ok(t * s / 4.0 * (u.sin() * a + u.cos() * b))
}

/// `−(6 + t² − 6 t cos θ + t² cos 2θ) sin 2θ`.
pub fn exact_degeneracy_indicator(theta: f64, t: f64) -> f64 {
    -(6.0 + t * t - 6.0 * t * theta.cos() + t * t * (2.0 * theta).cos()) * (2.0 * theta).sin()
}

/// `π / |sin θ|`, or `+∞` on horizontal rays.
pub fn exact_cut_time(theta: f64) -> f64 {
    let s = theta.sin().abs();
    if s <= SINGULAR_SIN {
        f64::INFINITY
    } else {
        std::f64::consts::PI / s
    }
}

/// `(1, π / (2 sin θ |sin θ|))`.
pub fn exact_cut_point(theta: f64) -> Result<Point> {
    let s = nonsingular_sin(theta)?;
    Ok(Point::new(1.0, std::f64::consts::PI / (2.0 * s * s.abs())))
}

/// First positive zero of [`exact_jacobian`] along the ray.
pub fn exact_conjugate_time(theta: f64) -> Result<f64> {
    let s = nonsingular_sin(theta)?.abs();
    let step = 0.1 / s;
    let t_max = 4.0 * std::f64::consts::PI / s;
    let jac = |t: f64| exact_jacobian(theta, t).expect("checked");
    let mut lo = step;
    let mut j_lo = jac(lo);
    loop {
        let hi = lo + step;
        if hi > t_max {
            return Err(Error::RootNotBracketed { lo: 0.0, hi: t_max });
        }
        let j_hi = jac(hi);
        if j_lo == 0.0 {
            return Ok(lo);
        }
        if j_lo * j_hi <= 0.0 {
            return Ok(bisect(jac, lo, hi, j_lo, 0.0));
        }
        lo = hi;
        j_lo = j_hi;
    }
}

pub(crate) fn bisect(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64, mut f_lo: f64, tol: f64) -> f64 {
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if hi - lo <= tol || mid <= lo || mid >= hi {
            break;
        }
        let fm = f(mid);
        if fm == 0.0 {
            return mid;
        }
        if (fm < 0.0) == (f_lo < 0.0) {
            lo = mid;
            f_lo = fm;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Fold threshold `1e-6 (1 + |t_θ|)`.
pub fn fold_threshold(t_conj: f64) -> f64 {
    1e-6 * (1.0 + t_conj.abs())
}

/// Type of the first conjugate point on ray `θ`.
pub fn classify_exact(theta: f64) -> Result<SingularityClass> {
    let t_c = exact_conjugate_time(theta)?;
    let tau = fold_threshold(t_c);
    let d1 = exact_djac_dtheta(theta, t_c)?;
    if d1.abs() > tau {
        return Ok(SingularityClass::FoldA2);
    }
    let h = 1e-5;
    let d2 = (exact_djac_dtheta(theta + h, t_c)? - exact_djac_dtheta(theta - h, t_c)?) / (2.0 * h);
    if d2.abs() > tau {
        Ok(SingularityClass::CuspA3)
    } else {
        Err(Error::UnclassifiedDegeneracy(theta))
    }
}

fn exact_geodesic_complex(theta: Complex64, t: Complex64) -> (Complex64, Complex64) {
    let s = theta.sin();
    let c = theta.cos();
    let u = t * s;
    let x = -(theta - u).sin() / s;
    let y = (u * 2.0 - c * s * 2.0 + (theta * 2.0 - u * 2.0).sin()) / (s * s * 4.0);
    (x, y)
}

/// Degree-3 Taylor jet of the closed-form map at `(θ0, t0)` in the shifted
/// variables `(θ − θ0, t − t0)`, by trapezoidal Cauchy integrals on a
/// polydisc of radius `r` with `n` nodes per circle.
pub fn exact_taylor_jet(theta0: f64, t0: f64, r: f64, n: usize) -> (Jet3, Jet3) {
    let mut jx = Jet3::zero();
    let mut jy = Jet3::zero();
    let nodes: Vec<Complex64> = (0..n)
        .map(|k| Complex64::from_polar(1.0, 2.0 * std::f64::consts::PI * k as f64 / n as f64))
        .collect();
    let mut samples = Vec::with_capacity(n * n);
    for za in &nodes {
        for zb in &nodes {
            let (x, y) = exact_geodesic_complex(
                Complex64::new(theta0, 0.0) + za * r,
                Complex64::new(t0, 0.0) + zb * r,
            );
            samples.push((x, y));
        }
    }
    for i in 0..=3usize {
        for j in 0..=(3 - i) {
            let mut ax = Complex64::new(0.0, 0.0);
            let mut ay = Complex64::new(0.0, 0.0);
            for (ka, za) in nodes.iter().enumerate() {
                for (kb, zb) in nodes.iter().enumerate() {
                    let w = za.powi(-(i as i32)) * zb.powi(-(j as i32));
                    let (x, y) = samples[ka * n + kb];
                    ax += x * w;
                    ay += y * w;
                }
            }
            let norm = (n * n) as f64 * r.powi((i + j) as i32);
            jx.c[i][j] = ax.re / norm;
            jy.c[i][j] = ay.re / norm;
        }
    }
    (jx, jy)
}

/// Outcome of reducing the cut-conjugate singularity at `(π/2, π)` to the
/// cusp normal form.
#[derive(Debug, Clone, Serialize)]
pub struct CuspNormalFormReport {
    /// Max coefficient gap between the extracted jet and
    /// `(1 − s²/2 + θs + π(sθ² − θ³)/2, π/2 + s − s³/3 + θs² − θ²s/2)`.
    pub taylor_residual: f64,
    /// Gap between the jet after the target change of coordinates and
    /// `x₁ = θ s + π(s θ² − θ³)/2` (with `y₁` compared to `s₂(θ₁, s₁)`).
    pub first_change_residual: f64,
    /// Gap between the jet in `(θ₂, s₂)` and `(θ₂ s₂ − π θ₂³ / 2, s₂)`.
    pub second_change_residual: f64,
    /// Gap to `(θ₃³ − θ₃ s₃, s₃)` after `x₂ = −(2/π) x₁`, `y₂ = (2/π) y₁`,
    /// `s₃ = (2/π) s₂`, `θ₃ = θ₂`.
    pub normal_form_residual: f64,
    /// The same gap when the last rescaling uses the factor `π/2` in
    /// place of `2/π` (`x₂ = −(π/2) x₁`, `y₂ = −(π/2) y₁`, `s₃ = (π/2) s₂`).
    /// It does not reach the normal form; kept for the record.
    pub half_pi_scaling_residual: f64,
    /// Coefficient of `s₃` in the second component.
    pub s3_linear_coefficient: f64,
    pub final_x: [[f64; 4]; 4],
    pub final_y: [[f64; 4]; 4],
    pub pass: bool,
}

/// Reduces the degree-3 jet of the exact map at `(θ, t) = (π/2, π)` to
/// `(θ³ − θ s, s)`.
pub fn cusp_normal_form_check() -> CuspNormalFormReport {
    use std::f64::consts::{FRAC_PI_2, PI};
    let (jx, jy) = exact_taylor_jet(FRAC_PI_2, PI, 0.5, 32);

    let th = Jet3::u();
    let s = Jet3::v();
    let expected_x = Jet3::from_terms(&[
        (0, 0, 1.0),
        (0, 2, -0.5),
        (1, 1, 1.0),
        (2, 1, PI / 2.0),
        (3, 0, -PI / 2.0),
    ]);
    let expected_y = Jet3::from_terms(&[
        (0, 0, FRAC_PI_2),
        (0, 1, 1.0),
        (0, 3, -1.0 / 3.0),
        (1, 2, 1.0),
        (2, 1, -0.5),
    ]);
    let taylor_residual = jx.max_abs_diff(&expected_x).max(jy.max_abs_diff(&expected_y));

    // x₁ = x − 1 + (y − π/2)²/2, y₁ = y − π/2.
    let y1 = jy - Jet3::constant(FRAC_PI_2);
    let x1 = jx - Jet3::constant(1.0) + (y1 * y1).scale(0.5);
    let expected_x1 = Jet3::from_terms(&[(1, 1, 1.0), (2, 1, PI / 2.0), (3, 0, -PI / 2.0)]);

    // θ₂ = θ₁ + π θ₁²/2, s₂ = s₁ − s₁³/3 + θ₁ s₁² − θ₁² s₁/2.
    let theta2 = th + (th * th).scale(PI / 2.0);
    let s2 = s - s.powi(3).scale(1.0 / 3.0) + th * s * s - (th * th * s).scale(0.5);
    let first_change_residual = x1.max_abs_diff(&expected_x1).max(y1.max_abs_diff(&s2));

    let (inv_theta, inv_s) = invert_near_identity(&theta2, &s2);
    let x1_new = x1.compose(&inv_theta, &inv_s);
    let y1_new = y1.compose(&inv_theta, &inv_s);
    let expected_x2 = Jet3::from_terms(&[(1, 1, 1.0), (3, 0, -PI / 2.0)]);
    let second_change_residual = x1_new
        .max_abs_diff(&expected_x2)
        .max(y1_new.max_abs_diff(&Jet3::v()));

    let target_x = Jet3::from_terms(&[(3, 0, 1.0), (1, 1, -1.0)]);
    let target_y = Jet3::v();
    let rescale = |kx: f64, ky: f64, ks: f64| {
        // Source change s₃ = ks s₂ means s₂ = s₃ / ks.
        let sub_theta = Jet3::u();
        let sub_s = Jet3::v().scale(1.0 / ks);
        let fx = x1_new.compose(&sub_theta, &sub_s).scale(kx);
        let fy = y1_new.compose(&sub_theta, &sub_s).scale(ky);
        (fx, fy)
    };
    let (fx, fy) = rescale(-2.0 / PI, 2.0 / PI, 2.0 / PI);
    let normal_form_residual = fx.max_abs_diff(&target_x).max(fy.max_abs_diff(&target_y));
    let (hx, hy) = rescale(-PI / 2.0, -PI / 2.0, PI / 2.0);
    let half_pi_scaling_residual = hx.max_abs_diff(&target_x).max(hy.max_abs_diff(&target_y));
    let s3_linear_coefficient = fy.coeff(0, 1);

    CuspNormalFormReport {
        taylor_residual,
        first_change_residual,
        second_change_residual,
        normal_form_residual,
        half_pi_scaling_residual,
        s3_linear_coefficient,
        final_x: fx.c,
        final_y: fy.c,
        pass: taylor_residual <= 1e-6
            && first_change_residual <= 1e-6
            && normal_form_residual <= 1e-6
            && (s3_linear_coefficient - 1.0).abs() <= 1e-9,
    }
}
