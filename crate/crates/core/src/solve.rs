//! Damped Newton iteration for square 2×2 systems.

use crate::error::Result;

#[derive(Debug, Clone, Copy)]
pub struct Newton2Options {
    /// Converged once the Euclidean residual is at or below this.
    pub tol: f64,
    pub max_iter: usize,
    /// Per-component cap on a single step, before damping.
    pub max_step: [f64; 2],
}

impl Default for Newton2Options {
    fn default() -> Self {
        Self {
            tol: 1e-10,
            max_iter: 50,
            max_step: [f64::INFINITY, f64::INFINITY],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Newton2Outcome {
    pub x: [f64; 2],
    pub residual: f64,
    pub iterations: usize,
    pub converged: bool,
}

fn norm(r: [f64; 2]) -> f64 {
    r[0].hypot(r[1])
}

/// Newton step for `J dx = −r`, falling back to a Levenberg–Marquardt step
/// when `J` is numerically singular.
fn step(r: [f64; 2], j: [[f64; 2]; 2]) -> [f64; 2] {
    let det = j[0][0] * j[1][1] - j[0][1] * j[1][0];
    let scale = j.iter().flatten().map(|v| v * v).sum::<f64>();
    if det.abs() > 1e-12 * scale && det.is_finite() {
        return [
            -(j[1][1] * r[0] - j[0][1] * r[1]) / det,
            -(-j[1][0] * r[0] + j[0][0] * r[1]) / det,
        ];
    }
    // (JᵀJ + μ I) dx = −Jᵀ r
    let a00 = j[0][0] * j[0][0] + j[1][0] * j[1][0];
    let a01 = j[0][0] * j[0][1] + j[1][0] * j[1][1];
    let a11 = j[0][1] * j[0][1] + j[1][1] * j[1][1];
    let g0 = j[0][0] * r[0] + j[1][0] * r[1];
    let g1 = j[0][1] * r[0] + j[1][1] * r[1];
    let mu = 1e-8 * (a00 + a11) + 1e-300;
    let (b00, b11) = (a00 + mu, a11 + mu);
    let d = b00 * b11 - a01 * a01;
    [-(b11 * g0 - a01 * g1) / d, -(-a01 * g0 + b00 * g1) / d]
}

/// Solves `F(x) = 0` from `x0`, where `f` returns `(F(x), DF(x))` with
/// `DF[i][k] = ∂F_i/∂x_k`. Steps are halved while the residual does not
/// decrease.
pub fn newton2<F>(mut f: F, x0: [f64; 2], opts: Newton2Options) -> Result<Newton2Outcome>
where
    F: FnMut([f64; 2]) -> Result<([f64; 2], [[f64; 2]; 2])>,
{
    let mut x = x0;
    let (mut r, mut j) = f(x)?;
    let mut res = norm(r);
    for it in 0..opts.max_iter {
        if res <= opts.tol {
            return Ok(Newton2Outcome { x, residual: res, iterations: it, converged: true });
        }
        let mut dx = step(r, j);
        for k in 0..2 {
            if dx[k].abs() > opts.max_step[k] {
                let s = opts.max_step[k] / dx[k].abs();
                dx = [dx[0] * s, dx[1] * s];
            }
        }
        let mut lambda = 1.0;
        let mut accepted = None;
        for _ in 0..30 {
            let trial = [x[0] + lambda * dx[0], x[1] + lambda * dx[1]];
            if let Ok((rt, jt)) = f(trial) {
                let rn = norm(rt);
                if rn.is_finite() && rn < res {
                    accepted = Some((trial, rt, jt, rn));
                    break;
                }
            }
            lambda *= 0.5;
        }
        match accepted {
            Some((xt, rt, jt, rn)) => {
                x = xt;
                r = rt;
                j = jt;
                res = rn;
            }
            None => {
                return Ok(Newton2Outcome { x, residual: res, iterations: it, converged: res <= opts.tol });
            }
        }
    }
    Ok(Newton2Outcome {
        x,
        residual: res,
        iterations: opts.max_iter,
        converged: res <= opts.tol,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn solves_circle_line_intersection() {
        let out = newton2(
            |x| Ok(([x[0] * x[0] + x[1] * x[1] - 1.0, x[0] - x[1]], [[2.0 * x[0], 2.0 * x[1]], [1.0, -1.0]])),
            [1.0, 0.2],
            Newton2Options { tol: 1e-14, ..Default::default() },
        )
        .unwrap();
        assert!(out.converged);
        let h = std::f64::consts::FRAC_1_SQRT_2;
        assert!((out.x[0] - h).abs() < 1e-14 && (out.x[1] - h).abs() < 1e-14);
    }

    #[test]
    fn degenerate_root_still_converges() {
        // (u³, v) has a singular Jacobian at its root.
        let out = newton2(
            |x| Ok(([x[0].powi(3), x[1]], [[3.0 * x[0] * x[0], 0.0], [0.0, 1.0]])),
            [0.5, 0.5],
            Newton2Options { tol: 1e-12, max_iter: 200, ..Default::default() },
        )
        .unwrap();
        assert!(out.converged, "{out:?}");
        assert!(out.x[0].abs() < 1e-3);
    }
}
