//! Minimal standalone SVG line and bar charts.

use std::fmt::Write;

const WIDTH: f64 = 720.0;
const HEIGHT: f64 = 400.0;
const LEFT: f64 = 70.0;
const RIGHT: f64 = 170.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 50.0;

pub struct Series<'a> {
    pub name: &'a str,
    pub color: &'a str,
    /// One value per x position; `None` leaves a gap.
    pub values: Vec<Option<f64>>,
}

struct Frame {
    x_max: f64,
    y_min: f64,
    y_max: f64,
}

impl Frame {
    fn x(&self, i: f64) -> f64 {
        LEFT + (WIDTH - LEFT - RIGHT) * if self.x_max > 0.0 { i / self.x_max } else { 0.5 }
    }

    fn y(&self, v: f64) -> f64 {
        let span = self.y_max - self.y_min;
        HEIGHT - BOTTOM - (HEIGHT - TOP - BOTTOM) * (v - self.y_min) / span
    }
}

fn open(out: &mut String, title: &str, x_label: &str, y_label: &str) {
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(out, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(out, r#"<text x="{}" y="22" text-anchor="middle" font-size="14">{}</text>"#, WIDTH / 2.0, escape(title));
    let _ = writeln!(
        out,
        r#"<text x="{:.1}" y="{}" text-anchor="middle">{}</text>"#,
        (LEFT + WIDTH - RIGHT) / 2.0,
        HEIGHT - 12.0,
        escape(x_label)
    );
    let _ = writeln!(
        out,
        r#"<text transform="translate(16 {:.1}) rotate(-90)" text-anchor="middle">{}</text>"#,
        (TOP + HEIGHT - BOTTOM) / 2.0,
        escape(y_label)
    );
}

fn axes(out: &mut String, f: &Frame, x_ticks: usize) {
    let (x0, x1) = (LEFT, WIDTH - RIGHT);
    let (y0, y1) = (HEIGHT - BOTTOM, TOP);
    let _ = writeln!(out, r#"<g class="axes" stroke="black" fill="none">"#);
    let _ = writeln!(out, r#"<line x1="{x0}" y1="{y0}" x2="{x1}" y2="{y0}"/>"#);
    let _ = writeln!(out, r#"<line x1="{x0}" y1="{y0}" x2="{x0}" y2="{y1}"/>"#);
    let _ = writeln!(out, "</g>");
    for k in 0..=4 {
        let v = f.y_min + (f.y_max - f.y_min) * k as f64 / 4.0;
        let y = f.y(v);
        let _ = writeln!(
            out,
            r##"<line x1="{x0}" y1="{y:.1}" x2="{x1}" y2="{y:.1}" stroke="#ddd"/><text x="{}" y="{:.1}" text-anchor="end">{}</text>"##,
            x0 - 6.0,
            y + 4.0,
            tick_label(v)
        );
    }
    let step = x_ticks.div_ceil(10).max(1);
    for i in (0..x_ticks).step_by(step) {
        let _ = writeln!(
            out,
            r#"<text x="{:.1}" y="{}" text-anchor="middle">{}</text>"#,
            f.x(i as f64),
            y0 + 18.0,
            i + 1
        );
    }
}

fn legend(out: &mut String, entries: &[(&str, &str)]) {
    for (k, (name, color)) in entries.iter().enumerate() {
        let y = TOP + 10.0 + 20.0 * k as f64;
        let x = WIDTH - RIGHT + 15.0;
        let _ = writeln!(
            out,
            r#"<line x1="{x}" y1="{y}" x2="{}" y2="{y}" stroke="{color}" stroke-width="2"/><text x="{}" y="{}">{}</text>"#,
            x + 20.0,
            x + 26.0,
            y + 4.0,
            escape(name)
        );
    }
}

/// Line chart over x = 1..=len. Each series is drawn as one `<g>` of
/// class `series`; gaps split its polyline.
pub fn line_chart(title: &str, x_label: &str, y_label: &str, series: &[Series]) -> String {
    let len = series.iter().map(|s| s.values.len()).max().unwrap_or(0);
    let finite = series.iter().flat_map(|s| s.values.iter().flatten().copied());
    let (lo, hi) = finite.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)));
    let (y_min, y_max) = padded(lo, hi);
    let frame = Frame {
        x_max: len.saturating_sub(1) as f64,
        y_min,
        y_max,
    };
    let mut out = String::new();
    open(&mut out, title, x_label, y_label);
    axes(&mut out, &frame, len);
    for s in series {
        let _ = writeln!(
            out,
            r#"<g class="series" data-name="{}" stroke="{}" fill="{}">"#,
            escape(s.name),
            s.color,
            s.color
        );
        let mut run: Vec<(f64, f64)> = Vec::new();
        let flush = |out: &mut String, run: &mut Vec<(f64, f64)>| {
            if run.len() > 1 {
                let pts: Vec<String> = run.iter().map(|(x, y)| format!("{x:.1},{y:.1}")).collect();
                let _ = writeln!(out, r#"<polyline fill="none" stroke-width="2" points="{}"/>"#, pts.join(" "));
            }
            for (x, y) in run.iter() {
                let _ = writeln!(out, r#"<circle cx="{x:.1}" cy="{y:.1}" r="2.5"/>"#);
            }
            run.clear();
        };
        for (i, v) in s.values.iter().enumerate() {
            match v {
                Some(v) => run.push((frame.x(i as f64), frame.y(*v))),
                None => flush(&mut out, &mut run),
            }
        }
        flush(&mut out, &mut run);
        let _ = writeln!(out, "</g>");
    }
    let entries: Vec<(&str, &str)> = series.iter().map(|s| (s.name, s.color)).collect();
    legend(&mut out, &entries);
    out.push_str("</svg>\n");
    out
}

/// Bar chart of values in [0, 1] with a dashed reference line.
pub fn fraction_chart(title: &str, x_label: &str, y_label: &str, values: &[f64], reference: f64) -> String {
    let frame = Frame {
        x_max: values.len().saturating_sub(1) as f64,
        y_min: 0.0,
        y_max: 1.0,
    };
    let mut out = String::new();
    open(&mut out, title, x_label, y_label);
    axes(&mut out, &frame, values.len());
    let slot = (WIDTH - LEFT - RIGHT) / values.len().max(1) as f64;
    let bar = (slot * 0.6).max(1.0);
    let _ = writeln!(out, r##"<g class="bars" fill="#4477aa">"##);
    for (i, v) in values.iter().enumerate() {
        let y = frame.y(*v);
        let _ = writeln!(
            out,
            r#"<rect x="{:.1}" y="{y:.1}" width="{bar:.1}" height="{:.1}"/>"#,
            frame.x(i as f64) - bar / 2.0,
            frame.y(0.0) - y
        );
    }
    let _ = writeln!(out, "</g>");
    let y = frame.y(reference);
    let _ = writeln!(
        out,
        r##"<line class="reference" x1="{LEFT}" y1="{y:.1}" x2="{}" y2="{y:.1}" stroke="#cc3311" stroke-dasharray="6 4"/>"##,
        WIDTH - RIGHT
    );
    legend(&mut out, &[("per episode", "#4477aa"), ("reference", "#cc3311")]);
    out.push_str("</svg>\n");
    out
}

fn padded(lo: f64, hi: f64) -> (f64, f64) {
    if !lo.is_finite() || !hi.is_finite() {
        return (0.0, 1.0);
    }
    let pad = if hi > lo { 0.05 * (hi - lo) } else { 1.0f64.max(hi.abs() * 0.05) };
    (lo - pad, hi + pad)
}

fn tick_label(v: f64) -> String {
    if v.abs() >= 100.0 {
        format!("{v:.0}")
    } else {
        format!("{v:.2}")
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}
