//! Truncated bivariate polynomials of total degree at most 3.

use std::ops::{Add, Mul, Sub};

/// `Σ c[i][j] u^i v^j` with `i + j <= 3`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Jet3 {
    pub c: [[f64; 4]; 4],
}

pub const DEGREE: usize = 3;

impl Jet3 {
    pub fn zero() -> Self {
        Self::default()
    }

    pub fn constant(v: f64) -> Self {
        let mut j = Self::zero();
        j.c[0][0] = v;
        j
    }

    pub fn u() -> Self {
        let mut j = Self::zero();
        j.c[1][0] = 1.0;
        j
    }

    pub fn v() -> Self {
        let mut j = Self::zero();
        j.c[0][1] = 1.0;
        j
    }

    pub fn from_terms(terms: &[(usize, usize, f64)]) -> Self {
        let mut j = Self::zero();
        for &(a, b, c) in terms {
            assert!(a + b <= DEGREE);
            j.c[a][b] += c;
        }
        j
    }

    pub fn coeff(&self, i: usize, j: usize) -> f64 {
        self.c[i][j]
    }

    pub fn scale(&self, s: f64) -> Self {
        let mut out = *self;
        for_each_index(|i, j| out.c[i][j] *= s);
        out
    }

    pub fn eval(&self, u: f64, v: f64) -> f64 {
        let mut acc = 0.0;
        for_each_index(|i, j| acc += self.c[i][j] * u.powi(i as i32) * v.powi(j as i32));
        acc
    }

    /// Largest coefficient magnitude of `self − other`.
    pub fn max_abs_diff(&self, other: &Jet3) -> f64 {
        let mut m: f64 = 0.0;
        for_each_index(|i, j| m = m.max((self.c[i][j] - other.c[i][j]).abs()));
        m
    }

    pub fn powi(&self, n: u32) -> Self {
        let mut out = Self::constant(1.0);
        for _ in 0..n {
            out = out * *self;
        }
        out
    }

    /// `self(p(u, v), q(u, v))`; `p` and `q` must have no constant term.
    pub fn compose(&self, p: &Jet3, q: &Jet3) -> Self {
        assert!(p.c[0][0] == 0.0 && q.c[0][0] == 0.0, "composition needs p(0) = q(0) = 0");
        let mut out = Self::zero();
        let p_pows: Vec<Jet3> = (0..=DEGREE as u32).map(|n| p.powi(n)).collect();
        let q_pows: Vec<Jet3> = (0..=DEGREE as u32).map(|n| q.powi(n)).collect();
        for_each_index(|i, j| {
            if self.c[i][j] != 0.0 {
                out = out + (p_pows[i] * q_pows[j]).scale(self.c[i][j]);
            }
        });
        out
    }
}

fn for_each_index(mut f: impl FnMut(usize, usize)) {
    for i in 0..=DEGREE {
        for j in 0..=(DEGREE - i) {
            f(i, j);
        }
    }
}

impl Add for Jet3 {
    type Output = Jet3;
    fn add(mut self, rhs: Jet3) -> Jet3 {
        for_each_index(|i, j| self.c[i][j] += rhs.c[i][j]);
        self
    }
}

impl Sub for Jet3 {
    type Output = Jet3;
    fn sub(mut self, rhs: Jet3) -> Jet3 {
        for_each_index(|i, j| self.c[i][j] -= rhs.c[i][j]);
        self
    }
}

impl Mul for Jet3 {
    type Output = Jet3;
    fn mul(self, rhs: Jet3) -> Jet3 {
        let mut out = Jet3::zero();
        for_each_index(|i, j| {
            if self.c[i][j] == 0.0 {
                return;
            }
            for_each_index(|k, l| {
                if i + j + k + l <= DEGREE {
                    out.c[i + k][j + l] += self.c[i][j] * rhs.c[k][l];
                }
            });
        });
        out
    }
}

/// Jet of the inverse of a map whose linear part is the identity.
pub fn invert_near_identity(p: &Jet3, q: &Jet3) -> (Jet3, Jet3) {
    let (hp, hq) = (*p - Jet3::u(), *q - Jet3::v());
    let (mut a, mut b) = (Jet3::u(), Jet3::v());
    for _ in 0..DEGREE {
        let na = Jet3::u() - hp.compose(&a, &b);
        let nb = Jet3::v() - hq.compose(&a, &b);
        a = na;
        b = nb;
    }
    (a, b)
}
