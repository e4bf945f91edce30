//! Minimal SVG line plots of trajectories.

use std::fmt::Write as _;

const W: f64 = 720.0;
const H: f64 = 450.0;
const LEFT: f64 = 70.0;
const RIGHT: f64 = 150.0;
const TOP: f64 = 20.0;
const BOTTOM: f64 = 50.0;
const COLORS: [&str; 8] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#e377c2", "#17becf"];

#[derive(Debug, Clone, Default)]
pub struct PlotOptions {
    /// Logarithmic time axis; nonpositive times are dropped.
    pub log_time: bool,
    pub x_label: String,
    pub y_label: String,
}

/// A line plot of `series[j][i]` against `times[i]`, one line per name.
pub fn line_plot(times: &[f64], names: &[String], series: &[Vec<f64>], opts: &PlotOptions) -> String {
    let tx = |t: f64| if opts.log_time { t.log10() } else { t };
    let keep: Vec<usize> = (0..times.len()).filter(|&i| !opts.log_time || times[i] > 0.0).collect();
    let xs: Vec<f64> = keep.iter().map(|&i| tx(times[i])).collect();
    let (x0, x1) = padded_range(xs.iter().copied());
    let (y0, y1) = padded_range(series.iter().flat_map(|s| keep.iter().map(move |&i| s[i])).filter(|v| v.is_finite()));
    let (pw, ph) = (W - LEFT - RIGHT, H - TOP - BOTTOM);
    let px = |x: f64| LEFT + (x - x0) / (x1 - x0) * pw;
    let py = |y: f64| TOP + ph - (y - y0) / (y1 - y0) * ph;

    let mut svg = String::new();
    writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" font-family="sans-serif" font-size="12">"#
    )
    .unwrap();
    writeln!(svg, r#"<rect width="{W}" height="{H}" fill="white"/>"#).unwrap();
    writeln!(svg, r#"<rect x="{LEFT}" y="{TOP}" width="{pw}" height="{ph}" fill="none" stroke="black"/>"#).unwrap();
    for (v, last) in ticks(x0, x1) {
        let x = px(v);
        let label = if opts.log_time { format!("1e{}", v.round()) } else { tick_label(v, last) };
        writeln!(svg, r#"<line x1="{x:.2}" y1="{}" x2="{x:.2}" y2="{}" stroke="black"/>"#, TOP + ph, TOP + ph + 5.0)
            .unwrap();
        writeln!(svg, r#"<text x="{x:.2}" y="{}" text-anchor="middle">{label}</text>"#, TOP + ph + 18.0).unwrap();
    }
    for (v, last) in ticks(y0, y1) {
        let y = py(v);
        writeln!(svg, r#"<line x1="{}" y1="{y:.2}" x2="{LEFT}" y2="{y:.2}" stroke="black"/>"#, LEFT - 5.0).unwrap();
        writeln!(
            svg,
            r#"<text x="{}" y="{:.2}" text-anchor="end">{}</text>"#,
            LEFT - 8.0,
            y + 4.0,
            tick_label(v, last)
        )
        .unwrap();
    }
    let xl = if opts.x_label.is_empty() { "t" } else { &opts.x_label };
    writeln!(svg, r#"<text x="{:.2}" y="{}" text-anchor="middle">{}</text>"#, LEFT + pw / 2.0, H - 10.0, escape(xl))
        .unwrap();
    if !opts.y_label.is_empty() {
        writeln!(
            svg,
            r#"<text transform="translate(16,{:.2}) rotate(-90)" text-anchor="middle">{}</text>"#,
            TOP + ph / 2.0,
            escape(&opts.y_label)
        )
        .unwrap();
    }
    for (j, (name, s)) in names.iter().zip(series).enumerate() {
        let color = COLORS[j % COLORS.len()];
        let mut d = String::new();
        let mut pen_down = false;
        for (&i, &x) in keep.iter().zip(&xs) {
            if !s[i].is_finite() {
                pen_down = false;
                continue;
            }
            write!(d, "{}{:.2},{:.2} ", if pen_down { "L" } else { "M" }, px(x), py(s[i])).unwrap();
            pen_down = true;
        }
        writeln!(svg, r#"<path d="{}" fill="none" stroke="{color}" stroke-width="1.5"/>"#, d.trim_end()).unwrap();
        let ly = TOP + 10.0 + 18.0 * j as f64;
        let lx = W - RIGHT + 15.0;
        writeln!(svg, r#"<line x1="{lx}" y1="{ly}" x2="{}" y2="{ly}" stroke="{color}" stroke-width="2"/>"#, lx + 20.0)
            .unwrap();
        writeln!(svg, r#"<text x="{}" y="{}">{}</text>"#, lx + 26.0, ly + 4.0, escape(name)).unwrap();
    }
    svg.push_str("</svg>\n");
    svg
}

fn padded_range(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let (lo, hi) = values.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
    if !lo.is_finite() {
        return (0.0, 1.0);
    }
    if hi - lo <= 1e-300 * lo.abs().max(1.0) {
        let d = if lo == 0.0 { 1.0 } else { lo.abs() * 0.1 };
        return (lo - d, hi + d);
    }
    (lo, hi)
}

/// Round tick values inside `[lo, hi]`; the flag marks the step size for
/// labeling.
fn ticks(lo: f64, hi: f64) -> impl Iterator<Item = (f64, f64)> {
    let raw = (hi - lo) / 6.0;
    let mag = 10f64.powf(raw.log10().floor());
    let step = [1.0, 2.0, 5.0, 10.0].iter().map(|m| m * mag).find(|s| *s >= raw).unwrap_or(10.0 * mag);
    let first = (lo / step).ceil() as i64;
    let last = (hi / step).floor() as i64;
    (first..=last).map(move |i| (i as f64 * step, step))
}

fn tick_label(v: f64, step: f64) -> String {
    if v == 0.0 {
        return "0".into();
    }
    if v.abs() >= 1e5 || step < 1e-3 {
        return format!("{v:.1e}");
    }
    let decimals = (-step.log10().floor()).max(0.0) as usize;
    format!("{v:.decimals$}")
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}
