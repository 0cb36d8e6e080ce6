//! Shared fixtures for the benchmarks.

use grushin_core::heat::{build_operator, Grid2D, HeatOperator};
use grushin_core::{FrameSpec, Point};

pub fn grushin_base() -> Point {
    Point::new(-1.0, 0.0)
}

/// Operator of the Grushin plane on a `n × n` grid of `[-3, 3]²`.
pub fn grushin_operator(n: usize) -> HeatOperator {
    let grid = Grid2D::new((-3.0, 3.0), (-3.0, 3.0), n, n).expect("valid grid");
    build_operator(&FrameSpec::nilpotent(), grid)
}
