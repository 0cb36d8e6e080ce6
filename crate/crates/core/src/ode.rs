//! Dormand–Prince 5(4) with adaptive steps and cubic Hermite dense output.

use crate::error::{Error, Result};

/// Autonomous first-order system `y' = F(y)`.
pub trait OdeSystem {
    fn dim(&self) -> usize;
    fn rhs(&self, y: &[f64], dydt: &mut [f64]);
}

// Autonomous systems only, so the nodes c_i are not needed.
const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const B1: f64 = 35.0 / 384.0;
const B3: f64 = 500.0 / 1113.0;
const B4: f64 = 125.0 / 192.0;
const B5: f64 = -2187.0 / 6784.0;
const B6: f64 = 11.0 / 84.0;
// Difference between the fifth- and fourth-order weights.
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

const MAX_STEPS: usize = 2_000_000;

/// Discrete solution with node values and derivatives, row-major by node.
#[derive(Debug, Clone)]
pub struct Solution {
    pub dim: usize,
    pub t: Vec<f64>,
    pub y: Vec<f64>,
    pub dy: Vec<f64>,
}

impl Solution {
    pub fn len(&self) -> usize {
        self.t.len()
    }

    pub fn is_empty(&self) -> bool {
        self.t.is_empty()
    }

    pub fn node(&self, i: usize) -> &[f64] {
        &self.y[i * self.dim..(i + 1) * self.dim]
    }

    pub fn node_derivative(&self, i: usize) -> &[f64] {
        &self.dy[i * self.dim..(i + 1) * self.dim]
    }

    pub fn last(&self) -> &[f64] {
        self.node(self.len() - 1)
    }

    /// Index `i` with `t` between nodes `i` and `i + 1`.
    fn bracket(&self, t: f64) -> usize {
        let n = self.len();
        if n < 2 {
            return 0;
        }
        let forward = self.t[n - 1] >= self.t[0];
        let key = |v: f64| if forward { v } else { -v };
        let target = key(t);
        let pos = self.t.partition_point(|&v| key(v) <= target);
        pos.clamp(1, n - 1) - 1
    }

    /// Cubic Hermite interpolation between bracketing nodes.
    pub fn interpolate(&self, t: f64) -> Vec<f64> {
        let mut out = vec![0.0; self.dim];
        self.interpolate_into(t, &mut out);
        out
    }

    pub fn interpolate_into(&self, t: f64, out: &mut [f64]) {
        if self.len() == 1 {
            out.copy_from_slice(self.node(0));
            return;
        }
        let i = self.bracket(t);
        let (t0, t1) = (self.t[i], self.t[i + 1]);
        let h = t1 - t0;
        let s = (t - t0) / h;
        let h00 = (1.0 + 2.0 * s) * (1.0 - s) * (1.0 - s);
        let h10 = s * (1.0 - s) * (1.0 - s);
        let h01 = s * s * (3.0 - 2.0 * s);
        let h11 = s * s * (s - 1.0);
        let (y0, y1) = (self.node(i), self.node(i + 1));
        let (d0, d1) = (self.node_derivative(i), self.node_derivative(i + 1));
        for k in 0..self.dim {
            out[k] = h00 * y0[k] + h10 * h * d0[k] + h01 * y1[k] + h11 * h * d1[k];
        }
    }
}

fn error_norm(y0: &[f64], y1: &[f64], err: &[f64], tol: f64) -> f64 {
    let mut acc = 0.0;
    for k in 0..y0.len() {
        let sc = tol + tol * y0[k].abs().max(y1[k].abs());
        let e = err[k] / sc;
        acc += e * e;
    }
    (acc / y0.len() as f64).sqrt()
}

fn initial_step<S: OdeSystem>(sys: &S, y0: &[f64], f0: &[f64], span: f64, tol: f64) -> f64 {
    let n = y0.len();
    let mut d0 = 0.0;
    let mut d1 = 0.0;
    for k in 0..n {
        let sc = tol + tol * y0[k].abs();
        d0 += (y0[k] / sc).powi(2);
        d1 += (f0[k] / sc).powi(2);
    }
    let (d0, d1) = ((d0 / n as f64).sqrt(), (d1 / n as f64).sqrt());
    let h0 = if d0 < 1e-5 || d1 < 1e-5 { 1e-6 } else { 0.01 * d0 / d1 };
    let h0 = h0.min(span.abs());
    let y1: Vec<f64> = (0..n).map(|k| y0[k] + h0 * f0[k]).collect();
    let mut f1 = vec![0.0; n];
    sys.rhs(&y1, &mut f1);
    let mut d2 = 0.0;
    for k in 0..n {
        let sc = tol + tol * y0[k].abs();
        d2 += ((f1[k] - f0[k]) / sc).powi(2);
    }
    let d2 = (d2 / n as f64).sqrt() / h0;
    let h1 = if d1.max(d2) <= 1e-15 {
        (h0 * 1e-3).max(1e-6)
    } else {
        (0.01 / d1.max(d2)).powf(0.2)
    };
    (100.0 * h0).min(h1).min(span.abs())
}

/// Integrates from `t0` to `t1` (either direction) to mixed tolerance `tol`.
pub fn integrate<S: OdeSystem>(sys: &S, y0: &[f64], t0: f64, t1: f64, tol: f64) -> Result<Solution> {
    let n = sys.dim();
    assert_eq!(y0.len(), n, "initial state has wrong dimension");
    let mut f0 = vec![0.0; n];
    sys.rhs(y0, &mut f0);
    let mut sol = Solution {
        dim: n,
        t: vec![t0],
        y: y0.to_vec(),
        dy: f0.clone(),
    };
    if t1 == t0 {
        return Ok(sol);
    }
    if y0.iter().chain(f0.iter()).any(|v| !v.is_finite()) {
        return Err(Error::NonFiniteState { t: t0 });
    }
    let dir = (t1 - t0).signum();
    let span = t1 - t0;
    let mut h = initial_step(sys, y0, &f0, span, tol) * dir;

    let mut y = y0.to_vec();
    let mut f = f0;
    let mut t = t0;
    let mut k2 = vec![0.0; n];
    let mut k3 = vec![0.0; n];
    let mut k4 = vec![0.0; n];
    let mut k5 = vec![0.0; n];
    let mut k6 = vec![0.0; n];
    let mut k7 = vec![0.0; n];
    let mut tmp = vec![0.0; n];
    let mut ynew = vec![0.0; n];
    let mut err = vec![0.0; n];
    let mut steps = 0usize;
    let mut last_rejected = false;

    loop {
        if steps > MAX_STEPS {
            return Err(Error::StepSizeUnderflow { t });
        }
        steps += 1;
        let remaining = t1 - t;
        let mut finishing = false;
        if (h.abs() * 1.0001) >= remaining.abs() {
            h = remaining;
            finishing = true;
        }
        let h_floor = 1e-14 * t.abs().max(1.0);
        if h.abs() < h_floor && !finishing {
            return Err(Error::StepSizeUnderflow { t });
        }

        for k in 0..n {
            tmp[k] = y[k] + h * A21 * f[k];
        }
        sys.rhs(&tmp, &mut k2);
        for k in 0..n {
            tmp[k] = y[k] + h * (A31 * f[k] + A32 * k2[k]);
        }
        sys.rhs(&tmp, &mut k3);
        for k in 0..n {
            tmp[k] = y[k] + h * (A41 * f[k] + A42 * k2[k] + A43 * k3[k]);
        }
        sys.rhs(&tmp, &mut k4);
        for k in 0..n {
            tmp[k] = y[k] + h * (A51 * f[k] + A52 * k2[k] + A53 * k3[k] + A54 * k4[k]);
        }
        sys.rhs(&tmp, &mut k5);
        for k in 0..n {
            tmp[k] = y[k]
                + h * (A61 * f[k] + A62 * k2[k] + A63 * k3[k] + A64 * k4[k] + A65 * k5[k]);
        }
        sys.rhs(&tmp, &mut k6);
        for k in 0..n {
            ynew[k] = y[k]
                + h * (B1 * f[k] + B3 * k3[k] + B4 * k4[k] + B5 * k5[k] + B6 * k6[k]);
        }
        sys.rhs(&ynew, &mut k7);
        for k in 0..n {
            err[k] = h
                * (E1 * f[k] + E3 * k3[k] + E4 * k4[k] + E5 * k5[k] + E6 * k6[k] + E7 * k7[k]);
        }
        let en = error_norm(&y, &ynew, &err, tol);

        if !en.is_finite() {
            if ynew.iter().any(|v| !v.is_finite()) && h.abs() < h_floor * 10.0 {
                return Err(Error::NonFiniteState { t });
            }
            h *= 0.25;
            last_rejected = true;
            continue;
        }

        if en <= 1.0 {
            t = if finishing { t1 } else { t + h };
            std::mem::swap(&mut y, &mut ynew);
            std::mem::swap(&mut f, &mut k7);
            if y.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFiniteState { t });
            }
            sol.t.push(t);
            sol.y.extend_from_slice(&y);
            sol.dy.extend_from_slice(&f);
            if finishing {
                return Ok(sol);
            }
            let mut fac = if en == 0.0 { 5.0 } else { 0.9 * en.powf(-0.2) };
            fac = fac.clamp(0.2, 5.0);
            if last_rejected {
                fac = fac.min(1.0);
            }
            h *= fac;
            last_rejected = false;
        } else {
            let fac = (0.9 * en.powf(-0.2)).clamp(0.1, 0.9);
            h *= fac;
            last_rejected = true;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    struct Oscillator;

    impl OdeSystem for Oscillator {
        fn dim(&self) -> usize {
            2
        }
        fn rhs(&self, y: &[f64], d: &mut [f64]) {
            d[0] = y[1];
            d[1] = -y[0];
        }
    }

    #[test]
    fn harmonic_oscillator_to_tolerance() {
        let sol = integrate(&Oscillator, &[0.0, 1.0], 0.0, 10.0, 1e-10).unwrap();
        let end = sol.last();
        assert!((end[0] - 10f64.sin()).abs() < 1e-8);
        assert!((end[1] - 10f64.cos()).abs() < 1e-8);
        assert_eq!(*sol.t.last().unwrap(), 10.0);
    }

    #[test]
    fn backward_integration() {
        let sol = integrate(&Oscillator, &[0.0, 1.0], 0.0, -3.0, 1e-11).unwrap();
        let end = sol.last();
        assert!((end[0] - (-3f64).sin()).abs() < 1e-9);
        let mid = sol.interpolate(-1.3);
        assert!((mid[0] - (-1.3f64).sin()).abs() < 1e-6);
    }

    #[test]
    fn zero_span_is_single_node() {
        let sol = integrate(&Oscillator, &[0.3, 0.4], 2.0, 2.0, 1e-10).unwrap();
        assert_eq!(sol.len(), 1);
        assert_eq!(sol.interpolate(2.0), vec![0.3, 0.4]);
    }
}
