use grushin_core::heat::{build_operator, heat_report, solve_heat, GridPolicy, Grid2D, HeatOperator, SolverOptions};
use grushin_core::{FrameSpec, Point};

/// Largest eigenvalue of a symmetric tridiagonal matrix by Sturm bisection.
fn tridiagonal_max_eigenvalue(diag: &[f64], off: &[f64]) -> f64 {
    let bound = diag.iter().enumerate().map(|(i, d)| {
        let l = if i > 0 { off[i - 1].abs() } else { 0.0 };
        let r = off.get(i).map_or(0.0, |v| v.abs());
        d.abs() + l + r
    });
    let b = bound.fold(0.0, f64::max);
    // Number of eigenvalues below `s`.
    let below = |s: f64| {
        let mut count = 0;
        let mut q = 1.0;
        for i in 0..diag.len() {
            let prev = if i > 0 { off[i - 1] * off[i - 1] } else { 0.0 };
            q = diag[i] - s - if i > 0 { prev / q } else { 0.0 };
            if q == 0.0 {
                q = -1e-300;
            }
            if q < 0.0 {
                count += 1;
            }
        }
        count
    };
    let (mut lo, mut hi) = (-b - 1.0, b + 1.0);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if below(mid) < diag.len() {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    hi
}

/// Largest Ritz value after `steps` Lanczos iterations, relative to the
/// operator's largest diagonal magnitude.
fn lanczos_max_rayleigh(op: &HeatOperator, steps: usize) -> f64 {
    let n = op.len();
    let mut v: Vec<f64> = (0..n).map(|k| ((k * 7919 % 104729) as f64 / 104729.0) - 0.3).collect();
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    v.iter_mut().for_each(|x| *x /= norm);
    let mut prev = vec![0.0; n];
    let mut w = vec![0.0; n];
    let (mut alphas, mut betas) = (Vec::new(), Vec::new());
    let mut beta = 0.0;
    for _ in 0..steps {
        op.apply(&v, &mut w);
        let alpha: f64 = w.iter().zip(&v).map(|(a, b)| a * b).sum();
        for k in 0..n {
            w[k] -= alpha * v[k] + beta * prev[k];
        }
        alphas.push(alpha);
        beta = w.iter().map(|x| x * x).sum::<f64>().sqrt();
        if beta < 1e-14 {
            break;
        }
        betas.push(beta);
        prev.copy_from_slice(&v);
        for k in 0..n {
            v[k] = w[k] / beta;
        }
    }
    betas.truncate(alphas.len() - 1);
    let scale = op.diagonal().iter().fold(0.0f64, |m, d| m.max(d.abs()));
    tridiagonal_max_eigenvalue(&alphas, &betas) / scale
}

#[test]
fn operator_is_negative_semidefinite() {
    let grid = Grid2D::new((-2.0, 2.0), (-2.0, 2.0), 64, 64).unwrap();
    for spec in [FrameSpec::nilpotent(), FrameSpec::linear(0.2)] {
        let op = build_operator(&spec, grid);
        let m = lanczos_max_rayleigh(&op, 40);
        assert!(m <= 1e-10, "max Rayleigh quotient {m}");
    }
}

fn kernel(op: &HeatOperator, src: Point, targets: &[Point], times: &[f64]) -> Vec<Vec<f64>> {
    solve_heat(op, src, targets, times, SolverOptions::default()).unwrap().values
}

#[test]
fn values_converge_under_refinement() {
    let spec = FrameSpec::nilpotent();
    let src = Point::new(-1.0, 0.0);
    let targets = [Point::new(1.0, 0.0), Point::new(0.5, 0.75)];
    let times = [0.3, 0.6, 1.0];
    let run = |h: f64| {
        let grid = Grid2D::aligned(&[src, targets[0]], (-4.5, 4.5), (-4.5, 4.5), h).unwrap();
        kernel(&build_operator(&spec, grid), src, &targets, &times)
    };
    let (coarse, fine) = (run(0.05), run(0.025));
    for (c, f) in coarse.iter().flatten().zip(fine.iter().flatten()) {
        assert!((c / f - 1.0).abs() <= 0.02, "{c} vs {f}");
    }
}

#[test]
fn kernel_is_symmetric() {
    let spec = FrameSpec::linear(0.2);
    let (p, q) = (Point::new(-1.0, 0.25), Point::new(0.75, -0.5));
    let grid = Grid2D::aligned(&[p, q], (-4.5, 4.5), (-4.5, 4.5), 0.03).unwrap();
    let op = build_operator(&spec, grid);
    let times = [0.4, 0.8];
    let pq = kernel(&op, p, &[q], &times);
    let qp = kernel(&op, q, &[p], &times);
    for (a, b) in pq.iter().zip(&qp) {
        assert!((a[0] / b[0] - 1.0).abs() <= 0.03, "{} vs {}", a[0], b[0]);
    }
}

#[test]
fn cut_point_away_from_cusps_has_generic_exponent() {
    let r = heat_report(&FrameSpec::nilpotent(), Point::new(-1.0, 0.0), Point::new(1.0, 8.0), &GridPolicy::default()).unwrap();
    assert_eq!(r.distance.multiplicity, 2);
    assert!(!r.conjugate);
    assert_eq!(r.expected_alpha, 1.0);
    assert!(r.claims.pass(), "{}", r.claims.to_text());
}

#[test]
fn cusp_target_selects_five_quarters() {
    let r = heat_report(&FrameSpec::nilpotent(), Point::new(-1.0, 0.0), Point::new(1.0, std::f64::consts::FRAC_PI_2), &GridPolicy::quick()).unwrap();
    assert_eq!(r.distance.multiplicity, 1);
    assert!(r.conjugate);
    assert_eq!(r.expected_alpha, 1.25);
    assert!(r.run.mass.windows(2).all(|w| w[1] <= w[0] + 1e-12));
}
