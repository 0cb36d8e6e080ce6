use std::fmt::Write;

use super::conjugate::ConjugatePointRecord;
use super::cut::CutLocus;
use super::front::Front;
use crate::exact::SingularityClass;
use crate::frame::Point;

/// CSV with header `theta1,theta2,t,x,y,branch_angle`, one row per cut
/// sample in branch order.
pub fn cut_locus_csv(locus: &CutLocus) -> String {
    let mut out = String::from("theta1,theta2,t,x,y,branch_angle\n");
    for s in locus.samples() {
        writeln!(
            out,
            "{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e}",
            s.theta1, s.theta2, s.t_cut, s.point.x, s.point.y, s.branch_angle
        )
        .unwrap();
    }
    out
}

pub fn cut_locus_json(locus: &CutLocus) -> String {
    serde_json::to_string_pretty(locus).expect("cut locus serialises")
}

/// World window mapped onto the fixed 800×800 canvas.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SvgView {
    pub x_min: f64,
    pub x_max: f64,
    pub y_min: f64,
    pub y_max: f64,
}

impl Default for SvgView {
    fn default() -> Self {
        Self { x_min: -2.0, x_max: 2.0, y_min: -2.0, y_max: 2.0 }
    }
}

const CANVAS: f64 = 800.0;

impl SvgView {
    fn map(&self, p: Point) -> (f64, f64) {
        let u = (p.x - self.x_min) / (self.x_max - self.x_min) * CANVAS;
        let v = (self.y_max - p.y) / (self.y_max - self.y_min) * CANVAS;
        (u, v)
    }

    fn visible(&self, p: Point) -> bool {
        p.is_finite() && (-1.0..=CANVAS + 1.0).contains(&self.map(p).0) && (-1.0..=CANVAS + 1.0).contains(&self.map(p).1)
    }
}

struct Svg {
    body: String,
    view: SvgView,
}

impl Svg {
    fn new(view: SvgView) -> Self {
        let mut body = String::new();
        writeln!(
            body,
            r#"<svg xmlns="http://www.w3.org/2000/svg" width="800" height="800" viewBox="0 0 800 800">"#
        )
        .unwrap();
        body.push_str(r##"<rect width="800" height="800" fill="#ffffff"/>"##);
        body.push('\n');
        let mut svg = Self { body, view };
        svg.axes();
        svg
    }

    fn axes(&mut self) {
        let v = self.view;
        if v.y_min < 0.0 && v.y_max > 0.0 {
            self.polyline(&[Point::new(v.x_min, 0.0), Point::new(v.x_max, 0.0)], "#cccccc", 1.0, false);
        }
        if v.x_min < 0.0 && v.x_max > 0.0 {
            self.polyline(&[Point::new(0.0, v.y_min), Point::new(0.0, v.y_max)], "#cccccc", 1.0, false);
        }
    }

    /// Draws a path, breaking it wherever it leaves the window.
    fn polyline(&mut self, pts: &[Point], color: &str, width: f64, closed: bool) {
        let mut d = String::new();
        let mut pen_down = false;
        for p in pts {
            if !self.view.visible(*p) {
                pen_down = false;
                continue;
            }
            let (u, v) = self.view.map(*p);
            write!(d, "{}{u:.2},{v:.2} ", if pen_down { "L" } else { "M" }).unwrap();
            pen_down = true;
        }
        if d.is_empty() {
            return;
        }
        if closed && pts.iter().all(|p| self.view.visible(*p)) {
            d.push('Z');
        }
        writeln!(
            self.body,
            r#"<path d="{}" fill="none" stroke="{color}" stroke-width="{width}"/>"#,
            d.trim_end()
        )
        .unwrap();
    }

    fn dot(&mut self, p: Point, r: f64, color: &str) {
        if self.view.visible(p) {
            let (u, v) = self.view.map(p);
            writeln!(self.body, r#"<circle cx="{u:.2}" cy="{v:.2}" r="{r}" fill="{color}"/>"#).unwrap();
        }
    }

    fn finish(mut self) -> String {
        self.body.push_str("</svg>\n");
        self.body
    }
}

fn draw_front(svg: &mut Svg, front: &Front) {
    for arc in &front.arcs {
        let pts: Vec<Point> = arc.samples.iter().map(|s| s.point).collect();
        svg.polyline(&pts, "#1f77b4", 1.0, arc.closed);
    }
}

pub fn front_svg(front: &Front, view: SvgView) -> String {
    let mut svg = Svg::new(view);
    draw_front(&mut svg, front);
    if let Some(b) = front.base() {
        svg.dot(b, 3.0, "#000000");
    }
    svg.finish()
}

/// One geodesic path, with its start marked.
pub fn trajectory_svg(points: &[Point], view: SvgView) -> String {
    let mut svg = Svg::new(view);
    svg.polyline(points, "#1f77b4", 1.5, false);
    if let Some(p) = points.first() {
        svg.dot(*p, 3.0, "#000000");
    }
    svg.finish()
}

/// Fronts, cut-locus branches and conjugate points on one canvas. Cusps are
/// drawn larger than folds.
pub fn loci_svg(fronts: &[Front], cut: Option<&CutLocus>, conjugate: &[ConjugatePointRecord], view: SvgView) -> String {
    let mut svg = Svg::new(view);
    for f in fronts {
        draw_front(&mut svg, f);
    }
    let conj: Vec<Point> = conjugate.iter().map(|c| c.point).collect();
    svg.polyline(&conj, "#2ca02c", 1.0, false);
    for c in conjugate {
        if c.class == SingularityClass::CuspA3 {
            svg.dot(c.point, 4.0, "#9467bd");
        }
    }
    if let Some(locus) = cut {
        for b in &locus.branches {
            let pts: Vec<Point> = b.samples.iter().map(|s| s.point).collect();
            svg.polyline(&pts, "#d62728", 2.0, false);
        }
        svg.dot(locus.base, 3.0, "#000000");
    }
    svg.finish()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frame::FrameSpec;
    use crate::loci::compute_front;

    #[test]
    fn front_svg_has_fixed_canvas_and_one_path() {
        let f = compute_front(&FrameSpec::nilpotent(), Point::new(-1.0, 0.0), 0.5, 64).unwrap();
        let s = front_svg(&f, SvgView::default());
        assert!(s.starts_with("<svg") && s.ends_with("</svg>\n"));
        assert!(s.contains(r#"viewBox="0 0 800 800""#));
        assert_eq!(s.matches("stroke=\"#1f77b4\"").count(), 1);
        assert!(s.contains('Z'));
    }

    #[test]
    fn view_maps_corners() {
        let v = SvgView::default();
        assert_eq!(v.map(Point::new(-2.0, 2.0)), (0.0, 0.0));
        assert_eq!(v.map(Point::new(2.0, -2.0)), (800.0, 800.0));
    }
}
