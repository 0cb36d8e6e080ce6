use grushin_core::asymptotics::{
    corner_fit, default_rho_grid, default_s_grid, default_scaling_s_grid, default_theta_grid, grushin_cut_point,
    perturbed_scaling_check, verify_series, Branch, CornerFit, Coupling,
};
use grushin_core::loci::{compute_front_with, front_self_intersections, Launch, LOCI_TOL};
use grushin_core::FrameSpec;

#[test]
fn series_orders_for_several_structures() {
    for a in [0.1, -0.1, 0.0] {
        let r = verify_series(&FrameSpec::linear(a), &default_rho_grid(), &default_s_grid()).unwrap();
        assert!(r.claims.pass(), "{}", r.claims.to_text());
    }
}

#[test]
fn corner_tangents_for_small_linear_coefficients() {
    for a in [0.0, 0.05, -0.05, 0.1, -0.1] {
        let fit = corner_fit(&FrameSpec::linear(a), &default_rho_grid()).unwrap();
        let c = fit.claims(0.02, 1e-3);
        assert!(c.pass(), "{}", c.to_text());
        assert_eq!(fit.corner_angle <= 1e-3, a == 0.0);
        let e = CornerFit::expected_tangent(a);
        assert!((fit.tangent_upper[1] - e[1]).abs() < 1e-6);
    }
}

#[test]
fn fan_front_crossing_matches_cut_point() {
    let spec = FrameSpec::linear(0.1);
    for rho0 in [0.01, 0.04] {
        let n = 200;
        let params: Vec<f64> = (0..n).map(|k| (0.6 + 1.0 * f64::from(k) / f64::from(n - 1)) / rho0).collect();
        let fams = vec![
            (Launch::GrushinFan { sign: 1.0 }, params.clone(), false),
            (Launch::GrushinFan { sign: -1.0 }, params, false),
        ];
        let t = std::f64::consts::PI * rho0;
        let front = compute_front_with(&spec, &fams, t, rho0, LOCI_TOL).unwrap();
        let crossings = front_self_intersections(&front).unwrap().crossings;
        let c = grushin_cut_point(&spec, rho0, Branch::Upper).unwrap();
        let hit = crossings
            .iter()
            .filter(|s| s.arc1 != s.arc2)
            .min_by(|a, b| a.point.dist(&c.point).total_cmp(&b.point.dist(&c.point)))
            .expect("a crossing between the two families");
        let scale = c.point.x.hypot(c.point.y);
        assert!(hit.point.dist(&c.point) <= 1e-4 * scale, "{hit:?} vs {c:?}");
    }
}

#[test]
fn scaling_converges_with_the_coupled_linear_structure() {
    let a = grushin_core::stats::geometric_grid(1e-3, 10f64.sqrt(), 5);
    let r = perturbed_scaling_check(&Coupling::Linear, &a, &default_theta_grid(32), &default_scaling_s_grid()).unwrap();
    assert!(r.claims.pass(), "{}", r.claims.to_text());
    assert!(r.horizontal_ray_error < 1e-9);
}
