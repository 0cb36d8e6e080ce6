use serde::Serialize;

use crate::error::{Error, Result};
use crate::frame::{FrameSpec, Point};

/// Uniform node grid on `[x_min, x_max] × [y_min, y_max]` with `nx × ny`
/// cells. Boundary nodes carry the Dirichlet value zero; unknowns live on
/// the `(nx − 1)(ny − 1)` interior nodes, stored column by column so each
/// `x = const` line is contiguous.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Grid2D {
    pub x_min: f64,
    pub x_max: f64,
    pub y_min: f64,
    pub y_max: f64,
    pub nx: usize,
    pub ny: usize,
}

/// Points closer than this many cells to the boundary are rejected.
pub const BOUNDARY_CELLS: usize = 4;

impl Grid2D {
    pub fn new(x: (f64, f64), y: (f64, f64), nx: usize, ny: usize) -> Result<Self> {
        let g = Self { x_min: x.0, x_max: x.1, y_min: y.0, y_max: y.1, nx, ny };
        let finite = [x.0, x.1, y.0, y.1].iter().all(|v| v.is_finite());
        if !finite || !(x.1 > x.0) || !(y.1 > y.0) || nx < 2 * BOUNDARY_CELLS + 2 || ny < 2 * BOUNDARY_CELLS + 2 {
            return Err(Error::InvalidArgument(format!("invalid grid {g:?}")));
        }
        Ok(g)
    }

    /// Grid with spacing close to `h` covering `[x.0, x.1] × [y.0, y.1]`
    /// (widened as needed) such that every point of `anchors` is a node.
    ///
    /// Spacings are chosen as `Δ/k` for the anchors' coordinate differences
    /// `Δ`; anchors must therefore share a common lattice, which holds for
    /// one or two anchors.
    pub fn aligned(anchors: &[Point], x: (f64, f64), y: (f64, f64), h: f64) -> Result<Self> {
        if !(h > 0.0) || !h.is_finite() {
            return Err(Error::InvalidArgument(format!("grid spacing {h}")));
        }
        if anchors.is_empty() || anchors.len() > 2 {
            return Err(Error::InvalidArgument("aligned grid takes one or two anchors".into()));
        }
        let axis = |lo: f64, hi: f64, a: f64, b: Option<f64>| -> (f64, f64, usize) {
            let target = h;
            let h = match b {
                Some(b) if (b - a).abs() > 0.0 => {
                    let span = (b - a).abs();
                    span / (span / target).round().max(1.0)
                }
                _ => target,
            };
            let below = ((a - lo) / h).ceil();
            let above = ((hi - a) / h).ceil();
            (a - below * h, a + above * h, (below + above) as usize)
        };
        let p = anchors[0];
        let q = anchors.get(1).copied();
        let (x0, x1, nx) = axis(x.0, x.1, p.x, q.map(|q| q.x));
        let (y0, y1, ny) = axis(y.0, y.1, p.y, q.map(|q| q.y));
        Self::new((x0, x1), (y0, y1), nx, ny)
    }

    pub fn hx(&self) -> f64 {
        (self.x_max - self.x_min) / self.nx as f64
    }

    pub fn hy(&self) -> f64 {
        (self.y_max - self.y_min) / self.ny as f64
    }

    pub fn x(&self, i: usize) -> f64 {
        self.x_min + i as f64 * self.hx()
    }

    pub fn y(&self, j: usize) -> f64 {
        self.y_min + j as f64 * self.hy()
    }

    /// Interior nodes per column.
    pub fn col_len(&self) -> usize {
        self.ny - 1
    }

    pub fn unknowns(&self) -> usize {
        (self.nx - 1) * (self.ny - 1)
    }

    /// Storage index of interior node `(i, j)`, `1 ≤ i < nx`, `1 ≤ j < ny`.
    pub fn index(&self, i: usize, j: usize) -> usize {
        (i - 1) * self.col_len() + (j - 1)
    }

    /// Whether `p` lies at least [`BOUNDARY_CELLS`] cells inside.
    pub fn contains_interior(&self, p: Point) -> bool {
        let mx = BOUNDARY_CELLS as f64 * self.hx();
        let my = BOUNDARY_CELLS as f64 * self.hy();
        p.x >= self.x_min + mx && p.x <= self.x_max - mx && p.y >= self.y_min + my && p.y <= self.y_max - my
    }

    /// Nearest node and its distance in cells along each axis.
    pub fn nearest(&self, p: Point) -> (usize, usize) {
        let i = ((p.x - self.x_min) / self.hx()).round() as usize;
        let j = ((p.y - self.y_min) / self.hy()).round() as usize;
        (i.min(self.nx), j.min(self.ny))
    }

    /// Bilinear interpolation of interior data `u` at `p`.
    pub fn interpolate(&self, u: &[f64], p: Point) -> f64 {
        let fx = (p.x - self.x_min) / self.hx();
        let fy = (p.y - self.y_min) / self.hy();
        let i = (fx.floor() as usize).min(self.nx - 1);
        let j = (fy.floor() as usize).min(self.ny - 1);
        let (sx, sy) = (fx - i as f64, fy - j as f64);
        let val = |i: usize, j: usize| {
            if i == 0 || j == 0 || i >= self.nx || j >= self.ny {
                0.0
            } else {
                u[self.index(i, j)]
            }
        };
        (1.0 - sx) * (1.0 - sy) * val(i, j)
            + sx * (1.0 - sy) * val(i + 1, j)
            + (1.0 - sx) * sy * val(i, j + 1)
            + sx * sy * val(i + 1, j + 1)
    }

    /// Smallest time step scale resolved by the grid: `max(hx, hy)²`.
    pub fn stability_floor(&self) -> f64 {
        self.hx().max(self.hy()).powi(2)
    }
}

/// Divergence-form discretisation of `∂_x² + ∂_y (x f)² ∂_y` with zero
/// Dirichlet data: five-point fluxes with `(x f)²` sampled at y-face
/// midpoints.
#[derive(Debug, Clone)]
pub struct HeatOperator {
    pub grid: Grid2D,
    /// `1/hx²`.
    cx: f64,
    /// `(x f)²/hy²` on the face between interior row `j` and `j + 1` of each
    /// column, `ny` faces per column including the two boundary faces.
    cy: Vec<f64>,
}

pub fn build_operator(spec: &FrameSpec, grid: Grid2D) -> HeatOperator {
    let ny = grid.ny;
    let hy2 = grid.hy() * grid.hy();
    let mut cy = vec![0.0; (grid.nx - 1) * ny];
    for i in 1..grid.nx {
        let x = grid.x(i);
        for f in 0..ny {
            let y = grid.y_min + (f as f64 + 0.5) * grid.hy();
            let g = spec.frame_coefficient(Point::new(x, y));
            cy[(i - 1) * ny + f] = g * g / hy2;
        }
    }
    HeatOperator { grid, cx: 1.0 / (grid.hx() * grid.hx()), cy }
}

impl HeatOperator {
    pub fn len(&self) -> usize {
        self.grid.unknowns()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Face coefficient below interior node `(i, j)`; the face above is `j`.
    #[inline]
    fn face(&self, i: usize, f: usize) -> f64 {
        self.cy[(i - 1) * self.grid.ny + f]
    }

    /// `out = A u`.
    pub fn apply(&self, u: &[f64], out: &mut [f64]) {
        let m = self.grid.col_len();
        let nxi = self.grid.nx - 1;
        for c in 0..nxi {
            let i = c + 1;
            let col = &u[c * m..(c + 1) * m];
            let left = (c > 0).then(|| &u[(c - 1) * m..c * m]);
            let right = (c + 1 < nxi).then(|| &u[(c + 1) * m..(c + 2) * m]);
            let o = &mut out[c * m..(c + 1) * m];
            for j in 0..m {
                let uc = col[j];
                let l = left.map_or(0.0, |v| v[j]);
                let r = right.map_or(0.0, |v| v[j]);
                let s = if j > 0 { col[j - 1] } else { 0.0 };
                let n = if j + 1 < m { col[j + 1] } else { 0.0 };
                let cs = self.face(i, j);
                let cn = self.face(i, j + 1);
                o[j] = self.cx * (l + r - 2.0 * uc) + cn * (n - uc) - cs * (uc - s);
            }
        }
    }

    /// Diagonal of `A`.
    pub fn diagonal(&self) -> Vec<f64> {
        let m = self.grid.col_len();
        let mut d = Vec::with_capacity(self.len());
        for i in 1..self.grid.nx {
            for j in 0..m {
                d.push(-2.0 * self.cx - self.face(i, j) - self.face(i, j + 1));
            }
        }
        d
    }

    /// Entry `A[(i, j), (k, l)]` for interior nodes; used by tests.
    pub fn entry(&self, a: (usize, usize), b: (usize, usize)) -> f64 {
        let (i, j) = a;
        let (k, l) = b;
        if a == b {
            return -2.0 * self.cx - self.face(i, j - 1) - self.face(i, j);
        }
        if j == l && (i as isize - k as isize).abs() == 1 {
            return self.cx;
        }
        if i == k && l == j + 1 {
            return self.face(i, j);
        }
        if i == k && l + 1 == j {
            return self.face(i, l);
        }
        0.0
    }

    /// Tridiagonal factors of `I − β A` restricted to each y-line, for the
    /// line-Jacobi preconditioner.
    pub(crate) fn line_factors(&self, beta: f64) -> LineFactors {
        let m = self.grid.col_len();
        let nxi = self.grid.nx - 1;
        let mut c_prime = vec![0.0; nxi * m];
        let mut inv_denom = vec![0.0; nxi * m];
        let mut sub = vec![0.0; nxi * m];
        for col in 0..nxi {
            let i = col + 1;
            let mut prev_c = 0.0;
            for j in 0..m {
                let diag = 1.0 + beta * (2.0 * self.cx + self.face(i, j) + self.face(i, j + 1));
                let lower = if j > 0 { -beta * self.face(i, j) } else { 0.0 };
                let upper = if j + 1 < m { -beta * self.face(i, j + 1) } else { 0.0 };
                let denom = diag - lower * prev_c;
                let k = col * m + j;
                inv_denom[k] = 1.0 / denom;
                c_prime[k] = upper / denom;
                sub[k] = lower;
                prev_c = c_prime[k];
            }
        }
        LineFactors { m, c_prime, inv_denom, sub }
    }
}

/// Thomas-algorithm factors for one tridiagonal system per y-line.
pub(crate) struct LineFactors {
    m: usize,
    c_prime: Vec<f64>,
    inv_denom: Vec<f64>,
    sub: Vec<f64>,
}

impl LineFactors {
    pub fn solve(&self, r: &[f64], z: &mut [f64]) {
        let m = self.m;
        for col in 0..r.len() / m {
            let base = col * m;
            let mut prev = 0.0;
            for j in 0..m {
                let k = base + j;
                prev = (r[k] - self.sub[k] * prev) * self.inv_denom[k];
                z[k] = prev;
            }
            for j in (0..m - 1).rev() {
                let k = base + j;
                z[k] -= self.c_prime[k] * z[k + 1];
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> (FrameSpec, Grid2D) {
        (FrameSpec::linear(0.3), Grid2D::new((-1.0, 1.2), (-0.7, 0.9), 12, 10).unwrap())
    }

    #[test]
    fn interior_rows_annihilate_constants() {
        let grid = Grid2D::new((-1.0, 1.0), (-1.0, 1.0), 12, 12).unwrap();
        let op = build_operator(&FrameSpec::nilpotent(), grid);
        let u = vec![1.0; op.len()];
        let mut out = vec![0.0; op.len()];
        op.apply(&u, &mut out);
        for i in 2..grid.nx - 1 {
            for j in 2..grid.ny - 1 {
                assert!(out[grid.index(i, j)].abs() < 1e-9);
            }
        }
        assert!(out[grid.index(1, 1)] < 0.0);
    }

    #[test]
    fn operator_is_symmetric_and_matches_apply() {
        let (spec, grid) = small();
        let op = build_operator(&spec, grid);
        let n = op.len();
        let nodes: Vec<(usize, usize)> = (1..grid.nx).flat_map(|i| (1..grid.ny).map(move |j| (i, j))).collect();
        for (ka, &a) in nodes.iter().enumerate() {
            let mut e = vec![0.0; n];
            e[ka] = 1.0;
            let mut col = vec![0.0; n];
            op.apply(&e, &mut col);
            for (kb, &b) in nodes.iter().enumerate() {
                assert_eq!(op.entry(a, b), op.entry(b, a));
                assert_eq!(col[kb], op.entry(b, a), "{a:?} {b:?}");
            }
        }
    }

    #[test]
    fn reduces_to_second_difference_in_x() {
        let grid = Grid2D::new((-2.0, 2.0), (-1.0, 1.0), 16, 12).unwrap();
        let op = build_operator(&FrameSpec::nilpotent(), grid);
        let mut u = vec![0.0; op.len()];
        for i in 1..grid.nx {
            for j in 1..grid.ny {
                u[grid.index(i, j)] = grid.x(i).powi(2);
            }
        }
        let mut out = vec![0.0; op.len()];
        op.apply(&u, &mut out);
        for i in 2..grid.nx - 1 {
            for j in 2..grid.ny - 1 {
                assert!((out[grid.index(i, j)] - 2.0).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn line_factors_invert_line_operator() {
        let (spec, grid) = small();
        let op = build_operator(&spec, grid);
        let beta = 0.01;
        let lf = op.line_factors(beta);
        let m = grid.col_len();
        let r: Vec<f64> = (0..op.len()).map(|k| (k as f64 * 0.37).sin()).collect();
        let mut z = vec![0.0; op.len()];
        lf.solve(&r, &mut z);
        for col in 0..grid.nx - 1 {
            let i = col + 1;
            for j in 0..m {
                let mut v = (1.0 + beta * (2.0 * op.cx + op.face(i, j) + op.face(i, j + 1))) * z[col * m + j];
                if j > 0 {
                    v -= beta * op.face(i, j) * z[col * m + j - 1];
                }
                if j + 1 < m {
                    v -= beta * op.face(i, j + 1) * z[col * m + j + 1];
                }
                assert!((v - r[col * m + j]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn aligned_grid_puts_anchors_on_nodes() {
        let p = Point::new(-1.0, 0.0);
        let q = Point::new(1.0, std::f64::consts::FRAC_PI_2);
        let g = Grid2D::aligned(&[p, q], (-4.0, 4.0), (-6.0, 8.0), 0.05).unwrap();
        for a in [p, q] {
            let (i, j) = g.nearest(a);
            assert!((g.x(i) - a.x).abs() < 1e-12 && (g.y(j) - a.y).abs() < 1e-12);
        }
        assert!(g.x_min <= -4.0 && g.x_max >= 4.0 && g.y_min <= -6.0 && g.y_max >= 8.0);
    }

    #[test]
    fn bilinear_is_exact_for_bilinear_data() {
        let grid = Grid2D::new((0.0, 1.0), (0.0, 1.0), 10, 10).unwrap();
        let mut u = vec![0.0; grid.unknowns()];
        for i in 1..grid.nx {
            for j in 1..grid.ny {
                u[grid.index(i, j)] = 1.0 + grid.x(i) + 2.0 * grid.y(j) + grid.x(i) * grid.y(j);
            }
        }
        let p = Point::new(0.43, 0.57);
        assert!((grid.interpolate(&u, p) - (1.0 + 0.43 + 1.14 + 0.43 * 0.57)).abs() < 1e-12);
    }
}
