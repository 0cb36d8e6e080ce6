use std::f64::consts::{FRAC_PI_2, PI, TAU};

use grushin_core::exact::{exact_cut_time, SingularityClass};
use grushin_core::loci::{
    cut_locus_with, distance, scan_conjugate_locus, CutFinder, CutSearchOptions, ScanOptions,
};
use grushin_core::{FrameSpec, Point};
use proptest::prelude::*;

fn base() -> Point {
    Point::new(-1.0, 0.0)
}

fn grushin_finder() -> CutFinder {
    CutFinder::new(
        &FrameSpec::nilpotent(),
        base(),
        CutSearchOptions { t_max: Some(40.0), ..Default::default() },
    )
    .unwrap()
}

#[test]
fn grushin_cut_times_on_ray_grid() {
    let finder = grushin_finder();
    for k in 0..64 {
        let theta = TAU * f64::from(k) / 64.0;
        let off = theta.sin().abs().asin();
        if off < 0.1 {
            continue;
        }
        let c = finder.cut_time(theta).unwrap();
        let e = exact_cut_time(theta);
        assert!((c.t_cut - e).abs() <= 1e-6, "theta {theta}: {} vs {e}", c.t_cut);
    }
}

#[test]
fn grushin_cut_locus_lies_on_the_two_half_lines() {
    let spec = FrameSpec::nilpotent();
    let scan = scan_conjugate_locus(&spec, base(), ScanOptions { t_max_scaled: 120.0, ..Default::default() }).unwrap();
    let locus = cut_locus_with(&grushin_finder(), (0.0, TAU), 64, &scan.cusps).unwrap();
    let mut n = 0;
    for s in locus.samples() {
        assert!((s.point.x - 1.0).abs() <= 1e-6, "{s:?}");
        assert!(s.point.y.abs() >= FRAC_PI_2 - 1e-6, "{s:?}");
        n += 1;
    }
    assert!(n >= 20);
    assert_eq!(locus.branches.len(), 2, "{:#?}", locus.branches.iter().map(|b| b.samples.len()).collect::<Vec<_>>());
    for b in &locus.branches {
        assert!(b.start_at_cusp || b.end_at_cusp, "{b:?}");
    }
}

#[test]
fn fold_rays_are_cut_before_conjugate_and_cusps_at_it() {
    let finder = grushin_finder();
    for k in 0..32 {
        let theta = 0.3 + (PI - 0.6) * f64::from(k) / 31.0;
        let c = finder.cut_time(theta).unwrap();
        let tc = c.t_conj.unwrap();
        let class = finder.classify(theta).unwrap().class;
        match class {
            SingularityClass::FoldA2 => assert!(tc > c.t_cut, "{theta}: {c:?}"),
            SingularityClass::CuspA3 => assert!((tc - c.t_cut).abs() <= 1e-6),
            SingularityClass::Regular => unreachable!(),
        }
    }
    let c = finder.cut_time(FRAC_PI_2).unwrap();
    assert!((c.t_conj.unwrap() - c.t_cut).abs() <= 1e-6);
}

#[test]
fn perturbed_structure_has_two_cusps() {
    let a = 0.05;
    let scan = scan_conjugate_locus(
        &FrameSpec::linear(a),
        Point::new(-a, 0.0),
        ScanOptions { rays: 128, t_max_scaled: 120.0, ..Default::default() },
    )
    .unwrap();
    assert_eq!(scan.cusp_count, 2, "{:?}", scan.cusps);
    let unclassified: Vec<_> = scan.rays.iter().filter(|r| r.report.is_none()).map(|r| r.theta).collect();
    assert!(unclassified.iter().all(|t| t.sin().abs() < 0.05), "{unclassified:?}");
    for c in &scan.cusps {
        assert!((c.theta.sin().abs() - 1.0).abs() < 0.05, "{c:?}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 6, .. ProptestConfig::default() })]

    #[test]
    fn distance_is_symmetric(x1 in -1.5f64..-0.5, y1 in -0.5f64..0.5, x2 in 0.5f64..1.5, y2 in -0.5f64..0.5) {
        let spec = FrameSpec::nilpotent();
        let p = Point::new(x1, y1);
        let q = Point::new(x2, y2);
        let d1 = distance(&spec, p, q).unwrap().d;
        let d2 = distance(&spec, q, p).unwrap().d;
        prop_assert!((d1 - d2).abs() <= 1e-6, "{} vs {}", d1, d2);
    }

    #[test]
    fn distance_triangle_inequality(
        x1 in -1.5f64..-0.5, y1 in -0.5f64..0.5,
        x2 in 0.5f64..1.5, y2 in -0.5f64..0.5,
        x3 in -1.5f64..1.5, y3 in -0.5f64..0.5,
    ) {
        prop_assume!(x3.abs() > 0.2);
        let spec = FrameSpec::nilpotent();
        let (p, q, r) = (Point::new(x1, y1), Point::new(x2, y2), Point::new(x3, y3));
        let pq = distance(&spec, p, q).unwrap().d;
        let pr = distance(&spec, p, r).unwrap().d;
        let rq = distance(&spec, r, q).unwrap().d;
        prop_assert!(pq <= pr + rq + 1e-6, "{} > {} + {}", pq, pr, rq);
    }
}
