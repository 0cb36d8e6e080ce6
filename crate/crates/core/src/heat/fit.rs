use serde::Serialize;

use super::evolve::HeatRun;
use crate::error::{Error, Result};
use crate::stats::linear_fit;

/// Small-time fit of `p_t ≈ C t^{−α} e^{−d²/4t}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ExponentFit {
    pub d2: f64,
    pub alpha: f64,
    /// `log C` from the fit with `d²` fixed; reported, not verified.
    pub log_c: f64,
    /// `d²` from the refit with `α`, `C` and `d²` all free.
    pub gaussian_d2: f64,
    /// `α` from the same free refit.
    pub alpha_free: f64,
    pub window: (f64, f64),
    pub r2: f64,
}

pub const MIN_R2: f64 = 0.99;

/// Least squares for `y ≈ c0 + c1 u + c2 w`.
fn three_term(u: &[f64], w: &[f64], y: &[f64]) -> Result<[f64; 3]> {
    let mut m = [[0.0; 3]; 3];
    let mut r = [0.0; 3];
    for k in 0..y.len() {
        let row = [1.0, u[k], w[k]];
        for a in 0..3 {
            r[a] += row[a] * y[k];
            for b in 0..3 {
                m[a][b] += row[a] * row[b];
            }
        }
    }
    // Gaussian elimination with partial pivoting.
    let mut aug = [[0.0; 4]; 3];
    for a in 0..3 {
        aug[a][..3].copy_from_slice(&m[a]);
        aug[a][3] = r[a];
    }
    for col in 0..3 {
        let piv = (col..3).max_by(|&i, &j| aug[i][col].abs().total_cmp(&aug[j][col].abs())).expect("non-empty");
        aug.swap(col, piv);
        if aug[col][col].abs() < 1e-300 {
            return Err(Error::LinearSolveFailure("singular normal equations in Gaussian refit".into()));
        }
        for row in col + 1..3 {
            let f = aug[row][col] / aug[col][col];
            let pivot = aug[col];
            for (a, p) in aug[row][col..].iter_mut().zip(&pivot[col..]) {
                *a -= f * p;
            }
        }
    }
    let mut x = [0.0; 3];
    for a in (0..3).rev() {
        let s: f64 = (a + 1..3).map(|b| aug[a][b] * x[b]).sum();
        x[a] = (aug[a][3] - s) / aug[a][a];
    }
    Ok(x)
}

/// Regresses `log p_t + d²/4t` on `log t` for the target `target` of `run`;
/// the slope is `−α`. Also refits with `d²` free.
pub fn fit_exponent(run: &HeatRun, target: usize, d2: f64) -> Result<ExponentFit> {
    let t = &run.times;
    if t.len() < 6 || t[t.len() - 1] < 4.0 * t[0] * (1.0 - 1e-9) {
        return Err(Error::InvalidArgument("exponent fit needs >= 6 times spanning a factor >= 4".into()));
    }
    let p = run.series(target);
    if let Some(v) = p.iter().find(|v| !(**v > 0.0)) {
        return Err(Error::InvalidArgument(format!("non-positive kernel value {v}")));
    }
    let lt: Vec<f64> = t.iter().map(|t| t.ln()).collect();
    let lp: Vec<f64> = p.iter().map(|p| p.ln()).collect();
    let y: Vec<f64> = lp.iter().zip(t).map(|(l, t)| l + d2 / (4.0 * t)).collect();
    let fit = linear_fit(&lt, &y)?;
    if fit.r2 < MIN_R2 {
        return Err(Error::PoorFit(fit.r2));
    }
    let w: Vec<f64> = t.iter().map(|t| -1.0 / (4.0 * t)).collect();
    let free = three_term(&lt, &w, &lp)?;
    Ok(ExponentFit {
        d2,
        alpha: -fit.slope,
        log_c: fit.intercept,
        gaussian_d2: free[2],
        alpha_free: -free[1],
        window: (t[0], t[t.len() - 1]),
        r2: fit.r2,
    })
}
