use std::fmt::Write;

use serde::Serialize;

use super::operator::HeatOperator;
use crate::error::{Error, Result};
use crate::frame::Point;

#[derive(Debug, Clone, Copy)]
pub struct SolverOptions {
    /// Time steps per smallest requested time.
    pub steps_per_min_time: usize,
    /// Implicit Euler half steps replacing the first Crank–Nicolson steps.
    pub startup_half_steps: usize,
    /// Relative residual for the conjugate-gradient solves.
    pub cg_tol: f64,
    pub cg_max_iter: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self { steps_per_min_time: 50, startup_half_steps: 4, cg_tol: 1e-12, cg_max_iter: 5000 }
    }
}

/// Kernel values from one source at a set of targets and times.
#[derive(Debug, Clone, Serialize)]
pub struct HeatRun {
    pub source: Point,
    pub targets: Vec<Point>,
    /// Times actually reached: the requested ones rounded to the step grid.
    pub times: Vec<f64>,
    /// `values[k][m]` is the kernel at `times[k]` and `targets[m]`.
    pub values: Vec<Vec<f64>>,
    pub mass: Vec<f64>,
    pub dt: f64,
    pub cg_iterations: usize,
}

impl HeatRun {
    /// CSV with header `t,target_index,value,mass`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("t,target_index,value,mass\n");
        for (k, t) in self.times.iter().enumerate() {
            for (m, v) in self.values[k].iter().enumerate() {
                writeln!(out, "{t:.16e},{m},{v:.16e},{:.16e}", self.mass[k]).unwrap();
            }
        }
        out
    }

    pub fn series(&self, target: usize) -> Vec<f64> {
        self.values.iter().map(|row| row[target]).collect()
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Preconditioned CG for `(I − β A) u = b`, warm-started from `u`.
fn pcg(op: &HeatOperator, beta: f64, pre: &super::operator::LineFactors, b: &[f64], u: &mut [f64], opts: &SolverOptions, work: &mut Work) -> Result<usize> {
    let n = b.len();
    let Work { r, z, p, q } = work;
    op.apply(u, q);
    for k in 0..n {
        r[k] = b[k] - (u[k] - beta * q[k]);
    }
    let bnorm = dot(b, b).sqrt();
    if bnorm == 0.0 {
        u.fill(0.0);
        return Ok(0);
    }
    let target = opts.cg_tol * bnorm;
    pre.solve(r, z);
    p.copy_from_slice(z);
    let mut rz = dot(r, z);
    for it in 0..opts.cg_max_iter {
        if dot(r, r).sqrt() <= target {
            return Ok(it);
        }
        op.apply(p, q);
        for k in 0..n {
            q[k] = p[k] - beta * q[k];
        }
        let pq = dot(p, q);
        if !(pq > 0.0) {
            return Err(Error::LinearSolveFailure(format!("non-positive curvature {pq} at iteration {it}")));
        }
        let alpha = rz / pq;
        for k in 0..n {
            u[k] += alpha * p[k];
            r[k] -= alpha * q[k];
        }
        pre.solve(r, z);
        let rz_new = dot(r, z);
        let ratio = rz_new / rz;
        rz = rz_new;
        for k in 0..n {
            p[k] = z[k] + ratio * p[k];
        }
    }
    if dot(r, r).sqrt() <= target {
        return Ok(opts.cg_max_iter);
    }
    Err(Error::LinearSolveFailure(format!(
        "no convergence in {} iterations, residual {:e}",
        opts.cg_max_iter,
        dot(r, r).sqrt() / bnorm
    )))
}

struct Work {
    r: Vec<f64>,
    z: Vec<f64>,
    p: Vec<f64>,
    q: Vec<f64>,
}

/// Evolves `∂_t u = A u` from a discrete delta at `source` and records the
/// values at `targets` for each requested time.
///
/// Fixed step `δt = min(times)/steps_per_min_time`; Crank–Nicolson after a
/// short implicit Euler start that damps the delta's high frequencies.
pub fn solve_heat(op: &HeatOperator, source: Point, targets: &[Point], times: &[f64], opts: SolverOptions) -> Result<HeatRun> {
    let grid = op.grid;
    if times.is_empty() || times.windows(2).any(|w| w[1] <= w[0]) || !(times[0] > 0.0) {
        return Err(Error::InvalidArgument("times must be positive and increasing".into()));
    }
    let floor = grid.stability_floor();
    if times[0] < 10.0 * floor {
        return Err(Error::StabilityFloorViolated { t: times[0], floor: 10.0 * floor });
    }
    for p in std::iter::once(&source).chain(targets) {
        if !grid.contains_interior(*p) {
            return Err(Error::InvalidArgument(format!("point ({}, {}) too close to the grid boundary", p.x, p.y)));
        }
    }
    if opts.steps_per_min_time < 1 || !opts.startup_half_steps.is_multiple_of(2) {
        return Err(Error::InvalidArgument("need >= 1 step per time and an even number of startup half steps".into()));
    }
    let dt = times[0] / opts.steps_per_min_time as f64;
    let marks: Vec<usize> = times.iter().map(|t| ((t / dt).round() as usize).max(1)).collect();
    if marks.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidArgument("requested times collapse onto the same step".into()));
    }
    let n = op.len();
    let mut u = vec![0.0; n];
    let (si, sj) = grid.nearest(source);
    u[grid.index(si, sj)] = 1.0 / (grid.hx() * grid.hy());

    let beta = 0.5 * dt;
    let pre = op.line_factors(beta);
    let mut work = Work { r: vec![0.0; n], z: vec![0.0; n], p: vec![0.0; n], q: vec![0.0; n] };
    let mut rhs = vec![0.0; n];
    let mut au = vec![0.0; n];
    let startup_steps = opts.startup_half_steps / 2;
    let cell = grid.hx() * grid.hy();

    let mut values = Vec::with_capacity(times.len());
    let mut mass = Vec::with_capacity(times.len());
    let mut iterations = 0;
    let mut step = 0;
    for &mark in &marks {
        while step < mark {
            if step < startup_steps {
                // Two implicit Euler steps of δt/2 share the Crank–Nicolson matrix.
                for _ in 0..2 {
                    rhs.copy_from_slice(&u);
                    iterations += pcg(op, beta, &pre, &rhs, &mut u, &opts, &mut work)?;
                }
            } else {
                op.apply(&u, &mut au);
                for k in 0..n {
                    rhs[k] = u[k] + beta * au[k];
                }
                iterations += pcg(op, beta, &pre, &rhs, &mut u, &opts, &mut work)?;
            }
            step += 1;
        }
        values.push(targets.iter().map(|p| grid.interpolate(&u, *p)).collect());
        mass.push(cell * u.iter().sum::<f64>());
    }
    Ok(HeatRun {
        source,
        targets: targets.to_vec(),
        times: marks.iter().map(|&m| m as f64 * dt).collect(),
        values,
        mass,
        dt,
        cg_iterations: iterations,
    })
}
