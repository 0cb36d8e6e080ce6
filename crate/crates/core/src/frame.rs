//! Almost-Riemannian structure in Grushin normal form.
//!
//! The orthonormal frame is `X = ∂x`, `Y = x f(x, y) ∂y` where `f` is a
//! polynomial with `f(0, y) = 1`. Every stored monomial carries a factor of
//! `x`, so the normalisation holds structurally.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A point in normal-form coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn dist(&self, other: &Point) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Covector {
    pub px: f64,
    pub py: f64,
}

/// Phase-space point `(x, y, p_x, p_y)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeodesicState {
    pub point: Point,
    pub covector: Covector,
}

impl GeodesicState {
    pub fn new(x: f64, y: f64, px: f64, py: f64) -> Self {
        Self {
            point: Point { x, y },
            covector: Covector { px, py },
        }
    }

    pub fn to_array(self) -> [f64; 4] {
        [self.point.x, self.point.y, self.covector.px, self.covector.py]
    }

    pub fn from_array(v: [f64; 4]) -> Self {
        Self::new(v[0], v[1], v[2], v[3])
    }

    pub fn from_slice(v: &[f64]) -> Self {
        Self::new(v[0], v[1], v[2], v[3])
    }
}

/// One monomial `c x^i y^j` of `f`, with `i >= 1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Monomial {
    pub i: u32,
    pub j: u32,
    pub c: f64,
}

/// Values and partial derivatives of `f` up to second order.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct FValues {
    pub f: f64,
    pub fx: f64,
    pub fy: f64,
    pub fxx: f64,
    pub fxy: f64,
    pub fyy: f64,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSpec {
    a: f64,
    #[serde(default)]
    coeffs: Vec<Monomial>,
}

/// `f(x, y) = 1 + a x + Σ c_ij x^i y^j`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawSpec")]
pub struct FrameSpec {
    a: f64,
    coeffs: Vec<Monomial>,
}

impl TryFrom<RawSpec> for FrameSpec {
    type Error = Error;

    fn try_from(raw: RawSpec) -> Result<Self> {
        FrameSpec::with_coeffs(raw.a, raw.coeffs)
    }
}

impl FrameSpec {
    /// The Grushin plane `(∂x, x ∂y)`.
    pub fn nilpotent() -> Self {
        Self { a: 0.0, coeffs: Vec::new() }
    }

    /// `f = 1 + a x`.
    pub fn linear(a: f64) -> Self {
        Self { a, coeffs: Vec::new() }
    }

    pub fn with_coeffs(a: f64, coeffs: Vec<Monomial>) -> Result<Self> {
        if !a.is_finite() {
            return Err(Error::InvalidSpec(format!("a = {a} is not finite")));
        }
        for m in &coeffs {
            if m.i == 0 {
                return Err(Error::InvalidSpec(format!(
                    "monomial x^{} y^{} has no x factor; f(0, y) must stay 1",
                    m.i, m.j
                )));
            }
            if m.i == 1 && m.j == 0 {
                return Err(Error::InvalidSpec(
                    "the x^1 y^0 coefficient is the field `a`".into(),
                ));
            }
            if !m.c.is_finite() {
                return Err(Error::InvalidSpec(format!("coefficient of x^{} y^{}", m.i, m.j)));
            }
        }
        Ok(Self { a, coeffs })
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::InvalidSpec(e.to_string()))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("FrameSpec serialises")
    }

    pub fn a(&self) -> f64 {
        self.a
    }

    pub fn coeffs(&self) -> &[Monomial] {
        &self.coeffs
    }

    pub fn is_nilpotent(&self) -> bool {
        self.a == 0.0 && self.coeffs.iter().all(|m| m.c == 0.0)
    }

    /// True when `f` does not depend on `y`.
    pub fn is_y_independent(&self) -> bool {
        self.coeffs.iter().all(|m| m.j == 0 || m.c == 0.0)
    }

    /// `(f, ∂x f, ∂y f)` at `p`.
    pub fn eval_f(&self, p: Point) -> (f64, f64, f64) {
        let v = self.eval_f2(p);
        (v.f, v.fx, v.fy)
    }

    /// `f` with all first and second partials.
    pub fn eval_f2(&self, p: Point) -> FValues {
        let (x, y) = (p.x, p.y);
        let mut v = FValues {
            f: 1.0 + self.a * x,
            fx: self.a,
            ..FValues::default()
        };
        for m in &self.coeffs {
            let (i, j) = (m.i as i32, m.j as i32);
            let c = m.c;
            v.f += c * x.powi(i) * y.powi(j);
            v.fx += c * f64::from(i) * x.powi(i - 1) * y.powi(j);
            if i >= 2 {
                v.fxx += c * f64::from(i * (i - 1)) * x.powi(i - 2) * y.powi(j);
            }
            if j >= 1 {
                v.fy += c * f64::from(j) * x.powi(i) * y.powi(j - 1);
                v.fxy += c * f64::from(i * j) * x.powi(i - 1) * y.powi(j - 1);
            }
            if j >= 2 {
                v.fyy += c * f64::from(j * (j - 1)) * x.powi(i) * y.powi(j - 2);
            }
        }
        v
    }

    /// Coefficient of `∂y` in the second frame field, `x f(x, y)`.
    pub fn frame_coefficient(&self, p: Point) -> f64 {
        p.x * self.eval_f2(p).f
    }

    pub fn is_riemannian(&self, p: Point) -> bool {
        self.frame_coefficient(p) != 0.0
    }

    /// Structure seen through the anisotropic dilation `x = λ X`, `y = λ² Y`,
    /// `t = λ τ`, `p_y = P_Y / λ`. Its coefficient function is
    /// `f(λ X, λ² Y)`, so the dilated flow is again in normal form.
    pub fn dilated(&self, lambda: f64) -> Self {
        let coeffs = self
            .coeffs
            .iter()
            .map(|m| Monomial {
                c: m.c * lambda.powi((m.i + 2 * m.j) as i32),
                ..*m
            })
            .collect();
        Self { a: self.a * lambda, coeffs }
    }

    /// Unit covector at a Riemannian point: `p_x = cos θ`,
    /// `p_y = sin θ / |x f(x, y)|`, so that `(λ·X, |λ·Y|) = (cos θ, |sin θ|)`
    /// and the Hamiltonian equals 1/2.
    pub fn unit_covector(&self, p: Point, theta: f64) -> Result<Covector> {
        let g = self.frame_coefficient(p);
        if g == 0.0 || !g.is_finite() {
            return Err(Error::SingularPoint { x: p.x, y: p.y });
        }
        Ok(Covector {
            px: theta.cos(),
            py: theta.sin() / g.abs(),
        })
    }

    /// `∂/∂θ` of [`FrameSpec::unit_covector`], as a 4-vector in phase space.
    pub fn unit_covector_dtheta(&self, p: Point, theta: f64) -> Result<[f64; 4]> {
        let g = self.frame_coefficient(p);
        if g == 0.0 || !g.is_finite() {
            return Err(Error::SingularPoint { x: p.x, y: p.y });
        }
        Ok([0.0, 0.0, -theta.sin(), theta.cos() / g.abs()])
    }
}

/// Initial state at the Grushin point for the series parameter `ρ = 1/p_y(0)`:
/// `(0, 0, sign, 1/ρ)`, so `p̄ = p_x / p_y = sign·ρ`.
pub fn grushin_initial(rho: f64, sign: f64) -> Result<GeodesicState> {
    if !(rho > 0.0) || !rho.is_finite() {
        return Err(Error::NonPositiveRho(rho));
    }
    Ok(GeodesicState::new(0.0, 0.0, sign.signum(), 1.0 / rho))
}

/// A Hamiltonian vector field on `T*R²` with its linearisation.
///
/// [`FrameSpec`] is the only production implementor; the trait exists so
/// the integrator can be exercised against deliberately broken dynamics.
pub trait HamiltonianFlow: Sync {
    fn hamiltonian(&self, s: &[f64; 4]) -> f64;
    fn rhs(&self, s: &[f64; 4]) -> [f64; 4];
    /// `∂ rhs_i / ∂ s_j`.
    fn rhs_jacobian(&self, s: &[f64; 4]) -> [[f64; 4]; 4];
}

impl HamiltonianFlow for FrameSpec {
    fn hamiltonian(&self, s: &[f64; 4]) -> f64 {
        let g = self.frame_coefficient(Point::new(s[0], s[1]));
        0.5 * (s[2] * s[2] + g * g * s[3] * s[3])
    }

    fn rhs(&self, s: &[f64; 4]) -> [f64; 4] {
        let x = s[0];
        let v = self.eval_f2(Point::new(s[0], s[1]));
        let (px, py) = (s[2], s[3]);
        let g = x * v.f;
        let gx = v.f + x * v.fx;
        let gy = x * v.fy;
        [px, py * g * g, -py * py * g * gx, -py * py * g * gy]
    }

    fn rhs_jacobian(&self, s: &[f64; 4]) -> [[f64; 4]; 4] {
        let x = s[0];
        let v = self.eval_f2(Point::new(s[0], s[1]));
        let py = s[3];
        let g = x * v.f;
        let gx = v.f + x * v.fx;
        let gy = x * v.fy;
        let gxx = 2.0 * v.fx + x * v.fxx;
        let gxy = v.fy + x * v.fxy;
        let gyy = x * v.fyy;
        let py2 = py * py;
        [
            [0.0, 0.0, 1.0, 0.0],
            [2.0 * py * g * gx, 2.0 * py * g * gy, 0.0, g * g],
            [
                -py2 * (gx * gx + g * gxx),
                -py2 * (gx * gy + g * gxy),
                0.0,
                -2.0 * py * g * gx,
            ],
            [
                -py2 * (gx * gy + g * gxy),
                -py2 * (gy * gy + g * gyy),
                0.0,
                -2.0 * py * g * gy,
            ],
        ]
    }
}

/// `½ (p_x² + (x f)² p_y²)`.
pub fn hamiltonian(spec: &FrameSpec, s: &GeodesicState) -> f64 {
    spec.hamiltonian(&s.to_array())
}

/// Right-hand side `(ẋ, ẏ, ṗ_x, ṗ_y)` of the geodesic equations.
pub fn hamiltonian_rhs(spec: &FrameSpec, s: &GeodesicState) -> [f64; 4] {
    spec.rhs(&s.to_array())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn xy_spec() -> FrameSpec {
        FrameSpec::with_coeffs(0.0, vec![Monomial { i: 1, j: 1, c: 2.0 }]).unwrap()
    }

    fn rich_spec() -> FrameSpec {
        FrameSpec::with_coeffs(
            0.3,
            vec![
                Monomial { i: 2, j: 0, c: -0.4 },
                Monomial { i: 1, j: 1, c: 0.25 },
                Monomial { i: 2, j: 2, c: 0.1 },
                Monomial { i: 3, j: 1, c: -0.05 },
            ],
        )
        .unwrap()
    }

    #[test]
    fn eval_f_examples() {
        assert_eq!(FrameSpec::nilpotent().eval_f(Point::new(3.7, -2.0)), (1.0, 0.0, 0.0));
        let (f, fx, fy) = FrameSpec::linear(0.1).eval_f(Point::new(1.0, 0.0));
        assert!((f - 1.1).abs() < 1e-15 && (fx - 0.1).abs() < 1e-15 && fy == 0.0);
        assert_eq!(xy_spec().eval_f(Point::new(1.0, 3.0)), (7.0, 6.0, 2.0));
    }

    #[test]
    fn f_is_one_on_singular_set() {
        let spec = rich_spec();
        for k in 0..=200 {
            let y = -10.0 + 0.1 * f64::from(k);
            assert_eq!(spec.eval_f(Point::new(0.0, y)).0, 1.0);
        }
    }

    #[test]
    fn pure_y_monomial_rejected() {
        let err = FrameSpec::with_coeffs(0.0, vec![Monomial { i: 0, j: 2, c: 1.0 }]);
        assert!(matches!(err, Err(Error::InvalidSpec(_))));
        let err = FrameSpec::from_json(r#"{"a":0.1,"coeffs":[{"i":0,"j":1,"c":1}]}"#);
        assert!(matches!(err, Err(Error::InvalidSpec(_))));
    }

    #[test]
    fn json_round_trip() {
        let spec = rich_spec();
        let text = spec.to_json();
        assert_eq!(FrameSpec::from_json(&text).unwrap(), spec);
        let parsed = FrameSpec::from_json(r#"{"a": 0.05, "coeffs": []}"#).unwrap();
        assert_eq!(parsed, FrameSpec::linear(0.05));
        assert!(FrameSpec::from_json(r#"{"a": 0.05, "extra": 1}"#).is_err());
    }

    #[test]
    fn hamiltonian_examples() {
        let nil = FrameSpec::nilpotent();
        assert_eq!(hamiltonian(&nil, &GeodesicState::new(0.0, 0.0, 1.0, 5.0)), 0.5);
        assert_eq!(hamiltonian(&nil, &GeodesicState::new(1.0, 0.0, 0.0, 1.0)), 0.5);
        let spec = FrameSpec::linear(0.1);
        let py = 0.8 / 1.1;
        let h = hamiltonian(&spec, &GeodesicState::new(1.0, 0.0, 0.6, py));
        assert!((h - 0.5).abs() < 1e-15);
    }

    #[test]
    fn rhs_examples() {
        let nil = FrameSpec::nilpotent();
        assert_eq!(
            hamiltonian_rhs(&nil, &GeodesicState::new(0.0, 0.0, 1.0, 7.0)),
            [1.0, 0.0, 0.0, 0.0]
        );
        assert_eq!(
            hamiltonian_rhs(&nil, &GeodesicState::new(1.0, 0.0, 0.0, 1.0)),
            [0.0, 1.0, -1.0, 0.0]
        );
    }

    #[test]
    fn unit_covector_examples() {
        let nil = FrameSpec::nilpotent();
        let b = Point::new(-1.0, 0.0);
        let c = nil.unit_covector(b, 0.0).unwrap();
        assert_eq!((c.px, c.py), (1.0, 0.0));
        let c = nil.unit_covector(b, std::f64::consts::FRAC_PI_2).unwrap();
        assert!(c.px.abs() < 1e-16 && (c.py - 1.0).abs() < 1e-16);
        assert!(matches!(
            rich_spec().unit_covector(Point::new(0.0, 0.4), 1.0),
            Err(Error::SingularPoint { .. })
        ));
    }

    #[test]
    fn grushin_initial_examples() {
        assert_eq!(grushin_initial(0.5, 1.0).unwrap().to_array(), [0.0, 0.0, 1.0, 2.0]);
        assert_eq!(grushin_initial(1.0, -1.0).unwrap().to_array(), [0.0, 0.0, -1.0, 1.0]);
        assert_eq!(grushin_initial(0.0, 1.0), Err(Error::NonPositiveRho(0.0)));
    }

    #[test]
    fn dilation_rescales_coefficients() {
        let spec = rich_spec();
        let lam = 0.2;
        let d = spec.dilated(lam);
        let p = Point::new(0.7, -1.3);
        let lifted = Point::new(lam * p.x, lam * lam * p.y);
        assert!((d.eval_f(p).0 - spec.eval_f(lifted).0).abs() < 1e-14);
    }

    fn state_strategy() -> impl Strategy<Value = [f64; 4]> {
        (-2.0..2.0f64, -2.0..2.0f64, -2.0..2.0f64, -3.0..3.0f64).prop_map(|(a, b, c, d)| [a, b, c, d])
    }

    proptest! {
        #[test]
        fn rhs_is_symplectic_gradient(s in state_strategy()) {
            let spec = rich_spec();
            let rhs = spec.rhs(&s);
            let h = 1e-6;
            let grad = |k: usize| {
                let (mut a, mut b) = (s, s);
                a[k] += h;
                b[k] -= h;
                (spec.hamiltonian(&a) - spec.hamiltonian(&b)) / (2.0 * h)
            };
            let expected = [grad(2), grad(3), -grad(0), -grad(1)];
            for k in 0..4 {
                let scale = 1.0 + expected[k].abs();
                prop_assert!((rhs[k] - expected[k]).abs() <= 1e-6 * scale,
                    "component {k}: {} vs {}", rhs[k], expected[k]);
            }
        }

        #[test]
        fn jacobian_matches_finite_differences(s in state_strategy()) {
            let spec = rich_spec();
            let jac = spec.rhs_jacobian(&s);
            let h = 1e-6;
            for j in 0..4 {
                let (mut a, mut b) = (s, s);
                a[j] += h;
                b[j] -= h;
                let (ra, rb) = (spec.rhs(&a), spec.rhs(&b));
                for i in 0..4 {
                    let fd = (ra[i] - rb[i]) / (2.0 * h);
                    prop_assert!((jac[i][j] - fd).abs() <= 1e-6 * (1.0 + fd.abs()));
                }
            }
        }

        #[test]
        fn unit_covector_has_half_energy(x in -3.0..3.0f64, y in -3.0..3.0f64, th in 0.0..6.3f64) {
            prop_assume!(x.abs() > 1e-3);
            let spec = FrameSpec::linear(0.1);
            let p = Point::new(x, y);
            prop_assume!(spec.is_riemannian(p));
            let c = spec.unit_covector(p, th).unwrap();
            let h = hamiltonian(&spec, &GeodesicState { point: p, covector: c });
            prop_assert!((h - 0.5).abs() < 1e-14);
        }
    }
}
