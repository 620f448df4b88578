//! Static SVG figures, drawn in Cartesian `(ξ, η) = (r cosθ, r sinθ)`.

use std::f64::consts::{FRAC_PI_2, FRAC_PI_4};
use std::fmt::Write as _;

use pgrad_core::boundary::{exterior_field, EXTERIOR_REGION_NOTE};
use pgrad_core::coords::PolarPoint;
use pgrad_core::solver::CharGrid;
use pgrad_core::vacuum::{DecayFit, LevelCurve};
use pgrad_core::verify::NetInterpolator;

use crate::format::num;

const MARGIN: f64 = 48.0;
const ARC_POINTS: usize = 128;
/// At most this many lines per family are drawn.
const MAX_LINES: usize = 65;

/// Affine map from a data box onto the canvas, `y` pointing up.
#[derive(Debug, Clone, Copy)]
pub struct Canvas {
    pub width: u32,
    pub height: u32,
    x_range: (f64, f64),
    y_range: (f64, f64),
}

impl Canvas {
    pub fn new(width: u32, height: u32, x_range: (f64, f64), y_range: (f64, f64)) -> Self {
        Self {
            width,
            height,
            x_range,
            y_range,
        }
    }

    pub fn map(&self, x: f64, y: f64) -> (f64, f64) {
        let (w, h) = (self.width as f64 - 2.0 * MARGIN, self.height as f64 - 2.0 * MARGIN);
        (
            MARGIN + (x - self.x_range.0) / (self.x_range.1 - self.x_range.0) * w,
            self.height as f64 - MARGIN - (y - self.y_range.0) / (self.y_range.1 - self.y_range.0) * h,
        )
    }

    /// Inverse of [`Canvas::map`].
    pub fn unmap(&self, px: f64, py: f64) -> (f64, f64) {
        let (w, h) = (self.width as f64 - 2.0 * MARGIN, self.height as f64 - 2.0 * MARGIN);
        (
            self.x_range.0 + (px - MARGIN) / w * (self.x_range.1 - self.x_range.0),
            self.y_range.0 + (self.height as f64 - MARGIN - py) / h * (self.y_range.1 - self.y_range.0),
        )
    }

    fn header(&self, title: &str) -> String {
        format!(
            "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{w}\" height=\"{h}\" viewBox=\"0 0 {w} {h}\">\n<title>{}</title>\n<rect width=\"{w}\" height=\"{h}\" fill=\"white\"/>\n",
            escape(title),
            w = self.width,
            h = self.height
        )
    }

    fn points(&self, pts: impl IntoIterator<Item = (f64, f64)>) -> String {
        pts.into_iter()
            .map(|(x, y)| {
                let (px, py) = self.map(x, y);
                format!("{px:.3},{py:.3}")
            })
            .collect::<Vec<_>>()
            .join(" ")
    }

    fn axes(&self, out: &mut String, x_label: &str, y_label: &str) {
        let (x0, y0) = self.map(self.x_range.0, self.y_range.0);
        let (x1, y1) = self.map(self.x_range.1, self.y_range.1);
        let _ = writeln!(
            out,
            "<g id=\"axes\" stroke=\"black\" stroke-width=\"1\" fill=\"none\"><path d=\"M {x0:.3} {y1:.3} L {x0:.3} {y0:.3} L {x1:.3} {y0:.3}\"/></g>"
        );
        let _ = writeln!(
            out,
            "<g font-family=\"sans-serif\" font-size=\"12\"><text x=\"{:.3}\" y=\"{:.3}\" text-anchor=\"end\">{}</text><text x=\"{:.3}\" y=\"{:.3}\">{}</text>",
            x1,
            y0 + 30.0,
            escape(x_label),
            x0 - 40.0,
            y1 - 12.0,
            escape(y_label)
        );
        for (v, is_x) in [(self.x_range.0, true), (self.x_range.1, true), (self.y_range.0, false), (self.y_range.1, false)] {
            let (px, py) = if is_x { (self.map(v, self.y_range.0).0, y0 + 16.0) } else { (x0 - 6.0, self.map(self.x_range.0, v).1) };
            let anchor = if is_x { "middle" } else { "end" };
            let _ = writeln!(out, "<text x=\"{px:.3}\" y=\"{py:.3}\" text-anchor=\"{anchor}\">{v:.3}</text>");
        }
        out.push_str("</g>\n");
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

fn cart(r: f64, theta: f64) -> (f64, f64) {
    PolarPoint::new(r, theta).to_cartesian()
}

/// Both data arcs as marked paths; `scale` is `√p1`.
fn data_arcs(c: &Canvas, out: &mut String, scale: f64) {
    let arc = |lower: bool| -> Vec<(f64, f64)> {
        (0..=ARC_POINTS)
            .map(|k| {
                let s = k as f64 / ARC_POINTS as f64;
                if lower {
                    let t = FRAC_PI_4 * s;
                    cart(2.0 * scale * t.sin(), t)
                } else {
                    let t = FRAC_PI_4 + FRAC_PI_4 * s;
                    cart(2.0 * scale * t.cos(), t)
                }
            })
            .collect()
    };
    let corner = format!("{},{}", num(2f64.sqrt() * scale), num(FRAC_PI_4));
    for (id, lower, from, to) in [
        ("lower-arc", true, format!("{},{}", num(0.0), num(0.0)), corner.clone()),
        ("upper-arc", false, corner.clone(), format!("{},{}", num(0.0), num(FRAC_PI_2))),
    ] {
        let pts = c.points(arc(lower));
        let _ = writeln!(
            out,
            "<polyline id=\"{id}\" class=\"data-arc\" data-from-polar=\"{from}\" data-to-polar=\"{to}\" fill=\"none\" stroke=\"crimson\" stroke-width=\"2\" points=\"{pts}\"/>"
        );
    }
}

fn net_canvas(grid: &CharGrid, width: u32, height: u32) -> Canvas {
    let l = 1.1 * grid.scale.sqrt();
    Canvas::new(width, height, (0.0, l), (0.0, l))
}

pub fn characteristics_svg(grid: &CharGrid, width: u32, height: u32) -> String {
    let c = net_canvas(grid, width, height);
    let mut out = c.header("Characteristic net");
    c.axes(&mut out, "xi", "eta");
    let n = grid.n;
    let stride = ((n - 1) / (MAX_LINES - 1)).max(1);
    let line = |pts: Vec<(f64, f64)>| {
        (pts.len() >= 2).then(|| format!("<polyline points=\"{}\"/>\n", c.points(pts)))
    };
    for (id, colour, plus) in [("plus-lines", "steelblue", true), ("minus-lines", "darkorange", false)] {
        let _ = writeln!(out, "<g id=\"{id}\" fill=\"none\" stroke=\"{colour}\" stroke-width=\"0.7\">");
        for k in (0..n).step_by(stride) {
            let pts: Vec<(f64, f64)> = (0..n)
                .map(|m| if plus { grid.node(m, k) } else { grid.node(k, m) })
                .take_while(|nd| nd.status.is_valid())
                .map(|nd| cart(nd.r, nd.theta))
                .collect();
            if let Some(s) = line(pts) {
                out.push_str(&s);
            }
        }
        out.push_str("</g>\n");
    }
    data_arcs(&c, &mut out, grid.scale.sqrt());
    out.push_str("</svg>\n");
    out
}

/// Inner edge of the solved net: the last minus line, then the last plus line
/// back toward the upper arc.
fn solved_outline(grid: &CharGrid) -> Vec<(f64, f64)> {
    let n = grid.n;
    let last_minus = (0..n).map(|j| grid.node(n - 1, j));
    let last_plus = (0..n - 1).rev().map(|i| grid.node(i, n - 1));
    last_minus
        .chain(last_plus)
        .filter(|nd| nd.status.is_valid())
        .map(|nd| cart(nd.r, nd.theta))
        .collect()
}

pub fn levels_svg(grid: &CharGrid, curves: &[LevelCurve], width: u32, height: u32) -> String {
    let c = net_canvas(grid, width, height);
    let mut out = c.header("Level curves p = epsilon");
    c.axes(&mut out, "xi", "eta");
    data_arcs(&c, &mut out, grid.scale.sqrt());
    let outline = solved_outline(grid);
    if outline.len() >= 2 {
        let _ = writeln!(
            out,
            "<polyline id=\"solved-region\" fill=\"none\" stroke=\"gray\" stroke-width=\"1\" points=\"{}\"/>",
            c.points(outline)
        );
    }
    out.push_str("<g id=\"levels\" fill=\"none\" stroke-width=\"1.2\">\n");
    let m = curves.len().max(2) - 1;
    for (k, curve) in curves.iter().enumerate() {
        if curve.points.len() < 2 {
            continue;
        }
        let pts = c.points(curve.points.iter().map(|&(t, r)| cart(r, t)));
        let _ = writeln!(
            out,
            "<polyline class=\"level\" data-epsilon=\"{}\" stroke=\"{}\" points=\"{pts}\"/>",
            num(curve.epsilon),
            ramp(k as f64 / m as f64)
        );
    }
    out.push_str("</g>\n</svg>\n");
    out
}

/// `ln p` against `1/r` with the fitted line `ln c - M0·(1/r)`.
pub fn decay_svg(samples: &[(f64, f64)], fit: Option<&DecayFit>, width: u32, height: u32) -> String {
    let xs: Vec<(f64, f64)> = samples.iter().map(|&(r, p)| (1.0 / r, p.ln())).collect();
    let bounds = |f: fn(&(f64, f64)) -> f64| {
        let (lo, hi) = xs.iter().map(f).fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
        if lo < hi {
            (lo, hi)
        } else {
            (lo - 1.0, lo + 1.0)
        }
    };
    let c = Canvas::new(width, height, bounds(|p| p.0), bounds(|p| p.1));
    let mut out = c.header("Decay along the diagonal");
    c.axes(&mut out, "1/r", "ln p");
    out.push_str("<g id=\"samples\" fill=\"steelblue\">\n");
    for &(x, y) in &xs {
        let (px, py) = c.map(x, y);
        let _ = writeln!(out, "<circle cx=\"{px:.3}\" cy=\"{py:.3}\" r=\"2\"/>");
    }
    out.push_str("</g>\n");
    if let Some(f) = fit {
        let (x0, x1) = (1.0 / f.r_range.1, 1.0 / f.r_range.0);
        let line = |x: f64| f.c.ln() - f.m0 * x;
        let (a, b) = c.x_range;
        let _ = writeln!(
            out,
            "<polyline id=\"fit-extension\" fill=\"none\" stroke=\"crimson\" stroke-width=\"1\" stroke-dasharray=\"4 4\" points=\"{}\"/>",
            c.points([(a, line(a)), (b, line(b))])
        );
        let pts = c.points([(x0, line(x0)), (x1, line(x1))]);
        let _ = writeln!(
            out,
            "<polyline id=\"fit\" data-c=\"{}\" data-m0=\"{}\" fill=\"none\" stroke=\"crimson\" stroke-width=\"2\" points=\"{pts}\"/>",
            num(f.c),
            num(f.m0)
        );
    }
    out.push_str("</svg>\n");
    out
}

/// Composite field: the net interpolant inside the interaction zone and the
/// exterior states outside, coloured by `ln p`.
pub fn field_svg(grid: &CharGrid, cells: usize, width: u32, height: u32) -> String {
    let s = grid.scale.sqrt();
    let l = 2.0 * s;
    let c = Canvas::new(width, height, (0.0, l), (0.0, l));
    let mut out = c.header("Composite pressure field");
    let _ = writeln!(out, "<desc>{}</desc>", escape(EXTERIOR_REGION_NOTE));
    let interp = NetInterpolator::new(grid);
    let p: Vec<f64> = grid.nodes.iter().map(|nd| nd.p).collect();
    let p_min = grid.valid_nodes().map(|(_, nd)| nd.p).fold(f64::INFINITY, f64::min);
    let (lo, hi) = (p_min.ln(), grid.scale.ln());
    let h = l / cells as f64;
    let colour = |x: f64, y: f64| -> Option<String> {
        let v = match exterior_field(x / s, y / s) {
            Ok(ext) => ext.pressure().map(|q| q * grid.scale).or_else(|| interp.interpolate(x, y, &p)),
            Err(_) => None,
        }?;
        let t = if hi > lo { ((v.ln() - lo) / (hi - lo)).clamp(0.0, 1.0) } else { 1.0 };
        Some(ramp((t * 63.0).round() / 63.0))
    };
    out.push_str("<g id=\"field\" shape-rendering=\"crispEdges\">\n");
    let (cw, ch) = (
        (c.map(h, 0.0).0 - c.map(0.0, 0.0).0),
        (c.map(0.0, 0.0).1 - c.map(0.0, h).1),
    );
    for iy in 0..cells {
        let y = (iy as f64 + 0.5) * h;
        // merge horizontal runs of one colour
        let mut run: Option<(usize, String)> = None;
        for ix in 0..=cells {
            let col = if ix < cells {
                Some(colour((ix as f64 + 0.5) * h, y).unwrap_or_else(|| "#cccccc".into()))
            } else {
                None
            };
            if let Some((start, ref prev)) = run {
                if col.as_ref() != Some(prev) {
                    let (px, py) = c.map(start as f64 * h, (iy + 1) as f64 * h);
                    let _ = writeln!(
                        out,
                        "<rect x=\"{px:.3}\" y=\"{py:.3}\" width=\"{:.3}\" height=\"{ch:.3}\" fill=\"{prev}\"/>",
                        cw * (ix - start) as f64
                    );
                    run = col.map(|cc| (ix, cc));
                }
            } else {
                run = col.map(|cc| (ix, cc));
            }
        }
    }
    out.push_str("</g>\n");
    data_arcs(&c, &mut out, s);
    c.axes(&mut out, "xi", "eta");
    let _ = write!(out, "<text id=\"region-note\" font-family=\"sans-serif\" font-size=\"10\">");
    for (k, part) in EXTERIOR_REGION_NOTE.split("; ").enumerate() {
        let _ = write!(out, "<tspan x=\"{MARGIN}\" y=\"{:.3}\">{}</tspan>", 14.0 + 12.0 * k as f64, escape(part));
    }
    out.push_str("</text>\n");
    out.push_str("</svg>\n");
    out
}

/// Blue-to-yellow colour ramp on `[0, 1]`.
fn ramp(t: f64) -> String {
    let stops = [(0.0, (48, 18, 59)), (0.35, (40, 130, 200)), (0.7, (120, 200, 90)), (1.0, (250, 230, 40))];
    let t = t.clamp(0.0, 1.0);
    let k = stops.windows(2).position(|w| t <= w[1].0).unwrap_or(stops.len() - 2);
    let (a, b) = (stops[k], stops[k + 1]);
    let u = (t - a.0) / (b.0 - a.0);
    let mix = |x: u8, y: u8| (x as f64 + u * (y as f64 - x as f64)).round() as u8;
    format!("#{:02x}{:02x}{:02x}", mix(a.1 .0, b.1 .0), mix(a.1 .1, b.1 .1), mix(a.1 .2, b.1 .2))
}
