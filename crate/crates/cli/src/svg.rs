//! Minimal standalone SVG charts.

use std::fmt::Write;

const W: f64 = 720.0;
const H: f64 = 440.0;
const LEFT: f64 = 70.0;
const RIGHT: f64 = 170.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 50.0;
const PALETTE: [&str; 10] =
    ["#1b9e77", "#d95f02", "#7570b3", "#e7298a", "#66a61e", "#e6ab02", "#a6761d", "#666666", "#1f78b4", "#b2df8a"];

pub fn color(i: usize) -> &'static str {
    PALETTE[i % PALETTE.len()]
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

struct Frame {
    x: (f64, f64),
    y: (f64, f64),
}

impl Frame {
    fn new(xs: impl Iterator<Item = f64> + Clone, ys: impl Iterator<Item = f64> + Clone) -> Frame {
        let span = |it: &mut dyn Iterator<Item = f64>| {
            let (lo, hi) = it.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
            if !lo.is_finite() {
                (0.0, 1.0)
            } else if hi - lo < 1e-12 {
                (lo - 0.5, hi + 0.5)
            } else {
                let pad = 0.05 * (hi - lo);
                (lo - pad, hi + pad)
            }
        };
        Frame { x: span(&mut xs.clone()), y: span(&mut ys.clone()) }
    }

    fn px(&self, x: f64) -> f64 {
        LEFT + (x - self.x.0) / (self.x.1 - self.x.0) * (W - LEFT - RIGHT)
    }

    fn py(&self, y: f64) -> f64 {
        H - BOTTOM - (y - self.y.0) / (self.y.1 - self.y.0) * (H - TOP - BOTTOM)
    }
}

fn open(title: &str) -> String {
    let mut s = String::new();
    let _ = writeln!(s, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}" font-family="sans-serif" font-size="11">"#);
    let _ = writeln!(s, r#"<rect width="{W}" height="{H}" fill="white"/>"#);
    let _ = writeln!(s, r#"<text x="{}" y="22" font-size="14" text-anchor="middle">{}</text>"#, W / 2.0, escape(title));
    s
}

fn axes(s: &mut String, f: &Frame, x_label: &str, y_label: &str) {
    let (x0, x1, y0, y1) = (LEFT, W - RIGHT, TOP, H - BOTTOM);
    let _ = writeln!(s, r#"<path d="M{x0} {y0} V{y1} H{x1}" fill="none" stroke="black"/>"#);
    for i in 0..=4 {
        let t = i as f64 / 4.0;
        let xv = f.x.0 + t * (f.x.1 - f.x.0);
        let yv = f.y.0 + t * (f.y.1 - f.y.0);
        let _ = writeln!(s, r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">{}</text>"#, f.px(xv), y1 + 16.0, tick(xv));
        let _ = writeln!(s, r#"<text x="{:.1}" y="{:.1}" text-anchor="end">{}</text>"#, x0 - 6.0, f.py(yv) + 4.0, tick(yv));
    }
    let _ = writeln!(s, r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">{}</text>"#, (x0 + x1) / 2.0, H - 10.0, escape(x_label));
    let _ = writeln!(
        s,
        r#"<text x="16" y="{:.1}" text-anchor="middle" transform="rotate(-90 16 {:.1})">{}</text>"#,
        (y0 + y1) / 2.0,
        (y0 + y1) / 2.0,
        escape(y_label)
    );
}

fn tick(v: f64) -> String {
    if v.abs() >= 100.0 || (v.fract().abs() < 1e-9 && v.abs() >= 1.0) {
        format!("{v:.0}")
    } else {
        format!("{v:.2}")
    }
}

fn legend(s: &mut String, names: &[&str]) {
    for (i, name) in names.iter().enumerate() {
        let y = TOP + 14.0 * i as f64;
        let _ = writeln!(s, r#"<rect x="{}" y="{:.1}" width="10" height="10" fill="{}"/>"#, W - RIGHT + 12.0, y, color(i));
        let _ = writeln!(s, r#"<text x="{}" y="{:.1}">{}</text>"#, W - RIGHT + 26.0, y + 9.0, escape(name));
    }
}

pub struct Series {
    pub name: String,
    pub points: Vec<(f64, f64)>,
    pub dashed: bool,
}

pub fn line_chart(title: &str, x_label: &str, y_label: &str, series: &[Series]) -> String {
    let all = || series.iter().flat_map(|s| s.points.iter());
    let f = Frame::new(all().map(|p| p.0), all().map(|p| p.1));
    let mut s = open(title);
    axes(&mut s, &f, x_label, y_label);
    for (i, ser) in series.iter().enumerate() {
        let d: Vec<String> = ser.points.iter().map(|&(x, y)| format!("{:.2},{:.2}", f.px(x), f.py(y))).collect();
        let dash = if ser.dashed { r#" stroke-dasharray="4 3""# } else { "" };
        let _ = writeln!(s, r#"<polyline points="{}" fill="none" stroke="{}" stroke-width="1.5"{dash}/>"#, d.join(" "), color(i));
    }
    let names: Vec<&str> = series.iter().map(|x| x.name.as_str()).collect();
    legend(&mut s, &names);
    s.push_str("</svg>\n");
    s
}

pub fn bar_chart(title: &str, y_label: &str, bars: &[(String, f64)]) -> String {
    let f = Frame { x: (0.0, bars.len().max(1) as f64), y: (0.0, bars.iter().map(|b| b.1).fold(0.0, f64::max).max(1e-9) * 1.05) };
    let mut s = open(title);
    let _ = writeln!(s, r#"<path d="M{LEFT} {TOP} V{} H{}" fill="none" stroke="black"/>"#, H - BOTTOM, W - RIGHT);
    let bw = (W - LEFT - RIGHT) / bars.len().max(1) as f64;
    for (i, (label, v)) in bars.iter().enumerate() {
        let (x, y) = (f.px(i as f64) + 0.1 * bw, f.py(*v));
        let _ = writeln!(s, r#"<rect x="{x:.2}" y="{y:.2}" width="{:.2}" height="{:.2}" fill="{}"/>"#, 0.8 * bw, H - BOTTOM - y, color(0));
        let _ = writeln!(s, r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">{}</text>"#, x + 0.4 * bw, H - BOTTOM + 14.0, escape(label));
        let _ = writeln!(s, r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">{v:.1}</text>"#, x + 0.4 * bw, y - 3.0);
    }
    let _ = writeln!(s, r#"<text x="16" y="{0:.1}" text-anchor="middle" transform="rotate(-90 16 {0:.1})">{1}</text>"#, (TOP + H - BOTTOM) / 2.0, escape(y_label));
    s.push_str("</svg>\n");
    s
}

pub struct Bubble {
    pub label: String,
    pub x: f64,
    pub y: f64,
    /// Radius in pixels.
    pub radius: f64,
    pub group: usize,
}

pub fn bubble_chart(title: &str, x_label: &str, y_label: &str, bubbles: &[Bubble]) -> String {
    let f = Frame::new(bubbles.iter().map(|b| b.x), bubbles.iter().map(|b| b.y));
    let mut s = open(title);
    axes(&mut s, &f, x_label, y_label);
    for b in bubbles {
        let (x, y) = (f.px(b.x), f.py(b.y));
        let _ = writeln!(s, r#"<circle cx="{x:.2}" cy="{y:.2}" r="{:.2}" fill="{}" fill-opacity="0.55" stroke="black" stroke-width="0.5"/>"#, b.radius, color(b.group));
        let _ = writeln!(s, r#"<text x="{x:.2}" y="{:.2}" text-anchor="middle">{}</text>"#, y + 4.0, escape(&b.label));
    }
    s.push_str("</svg>\n");
    s
}
