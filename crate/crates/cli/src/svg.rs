//! SVG figure of a path and its frontier: two `<path>` layers plus axes.

use std::fmt::Write;

use frontier_core::geometry::{BitGrid, OccupancyGrid, Point2, Rect};

const SIZE: f64 = 800.0;
const MARGIN: f64 = 60.0;

struct View {
    frame: Rect,
    scale: f64,
}

impl View {
    fn new(frame: Rect) -> Self {
        let scale = (SIZE - 2.0 * MARGIN) / frame.width().max(frame.height());
        Self { frame, scale }
    }

    fn x(&self, x: f64) -> f64 {
        MARGIN + (x - self.frame.min.x) * self.scale
    }

    fn y(&self, y: f64) -> f64 {
        SIZE - MARGIN - (y - self.frame.min.y) * self.scale
    }
}

/// Path polyline (light, thinned to at most `max_points` vertices) under the
/// frontier cells (dark), over the region `frame`.
pub fn render(points: &[Point2], max_points: usize, grid: &OccupancyGrid, frontier: &BitGrid, frame: Rect) -> String {
    let v = View::new(frame);
    let mut out = String::new();
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{SIZE}" height="{SIZE}" viewBox="0 0 {SIZE} {SIZE}">"#
    );
    let _ = writeln!(out, r#"<rect width="100%" height="100%" fill="white"/>"#);
    axes(&mut out, &v);

    let stride = points.len().div_ceil(max_points.max(2)).max(1);
    let mut d = String::new();
    let last = points.len().saturating_sub(1);
    for (i, p) in points.iter().enumerate().filter(|(i, _)| i % stride == 0 || *i == last) {
        let _ = write!(d, "{}{:.2} {:.2} ", if i == 0 { 'M' } else { 'L' }, v.x(p.x), v.y(p.y));
    }
    let _ = writeln!(
        out,
        r##"<path id="path" d="{}" fill="none" stroke="#b8c4d6" stroke-width="0.5"/>"##,
        d.trim_end()
    );

    let w = grid.cell_size * v.scale;
    let mut d = String::new();
    for (x, y) in frontier.iter_ones() {
        let r = grid.cell_rect(x, y);
        let _ = write!(d, "M{:.2} {:.2}h{w:.3}v{w:.3}h{:.3}z", v.x(r.min.x), v.y(r.max.y), -w);
    }
    let _ = writeln!(out, r##"<path id="frontier" d="{d}" fill="#1a2a44" stroke="none"/>"##);
    out.push_str("</svg>\n");
    out
}

fn axes(out: &mut String, v: &View) {
    let (x0, x1) = (v.frame.min.x, v.frame.max.x);
    let (y0, y1) = (v.frame.min.y, v.frame.max.y);
    let style = r##"stroke="#444" stroke-width="1""##;
    let _ = writeln!(out, r#"<line x1="{:.2}" y1="{:.2}" x2="{:.2}" y2="{:.2}" {style}/>"#, v.x(x0), v.y(y0), v.x(x1), v.y(y0));
    let _ = writeln!(out, r#"<line x1="{:.2}" y1="{:.2}" x2="{:.2}" y2="{:.2}" {style}/>"#, v.x(x0), v.y(y0), v.x(x0), v.y(y1));
    for i in 0..=4 {
        let t = i as f64 / 4.0;
        let (x, y) = (x0 + t * (x1 - x0), y0 + t * (y1 - y0));
        let _ = writeln!(
            out,
            r#"<text x="{:.2}" y="{:.2}" font-size="12" text-anchor="middle">{x:.2}</text>"#,
            v.x(x),
            v.y(y0) + 20.0
        );
        let _ = writeln!(
            out,
            r#"<text x="{:.2}" y="{:.2}" font-size="12" text-anchor="end">{y:.2}</text>"#,
            v.x(x0) - 8.0,
            v.y(y) + 4.0
        );
    }
    let _ = writeln!(out, r#"<text x="{:.2}" y="{:.2}" font-size="14" text-anchor="middle">x</text>"#, SIZE / 2.0, SIZE - 15.0);
    let _ = writeln!(out, r#"<text x="15" y="{:.2}" font-size="14" text-anchor="middle">y</text>"#, SIZE / 2.0);
}
