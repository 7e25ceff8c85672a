//! Minimal SVG line plots.

use std::fmt::Write;

const W: f64 = 720.0;
const H: f64 = 440.0;
const LEFT: f64 = 80.0;
const RIGHT: f64 = 170.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 50.0;
const COLORS: [&str; 8] = ["#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#17becf"];

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Plots each series against `xs`; non-finite points are skipped.
pub fn line_plot(title: &str, x_label: &str, xs: &[f64], series: &[(String, Vec<f64>)], log_x: bool) -> String {
    let tx = |x: f64| if log_x { x.ln() } else { x };
    let usable = |x: f64, y: f64| x.is_finite() && y.is_finite() && (!log_x || x > 0.0);
    let mut xr = (f64::INFINITY, f64::NEG_INFINITY);
    let mut yr = (f64::INFINITY, f64::NEG_INFINITY);
    for (_, ys) in series {
        for (&x, &y) in xs.iter().zip(ys) {
            if usable(x, y) {
                xr = (xr.0.min(tx(x)), xr.1.max(tx(x)));
                yr = (yr.0.min(y), yr.1.max(y));
            }
        }
    }
    if !xr.0.is_finite() {
        xr = (0.0, 1.0);
        yr = (0.0, 1.0);
    }
    if xr.1 == xr.0 {
        xr.1 = xr.0 + 1.0;
    }
    if yr.1 == yr.0 {
        let pad = yr.0.abs().max(1e-12);
        yr = (yr.0 - pad, yr.1 + pad);
    }
    let (pw, ph) = (W - LEFT - RIGHT, H - TOP - BOTTOM);
    let px = |x: f64| LEFT + (tx(x) - xr.0) / (xr.1 - xr.0) * pw;
    let py = |y: f64| TOP + (yr.1 - y) / (yr.1 - yr.0) * ph;

    let mut s = String::new();
    let _ = writeln!(s, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" font-family="sans-serif" font-size="12">"#);
    let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(s, r#"<text x="{}" y="22" text-anchor="middle" font-size="15">{}</text>"#, LEFT + pw / 2.0, escape(title));
    let _ = writeln!(s, r#"<rect x="{LEFT}" y="{TOP}" width="{pw}" height="{ph}" fill="none" stroke="black"/>"#);
    for i in 0..=4 {
        let f = i as f64 / 4.0;
        let xv = xr.0 + f * (xr.1 - xr.0);
        let xv = if log_x { xv.exp() } else { xv };
        let yv = yr.0 + f * (yr.1 - yr.0);
        let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="middle">{:.3e}</text>"#, LEFT + f * pw, TOP + ph + 18.0, xv);
        let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="end">{:.3e}</text>"#, LEFT - 6.0, TOP + (1.0 - f) * ph + 4.0, yv);
    }
    if yr.0 < 0.0 && yr.1 > 0.0 {
        let _ = writeln!(s, r##"<line x1="{LEFT}" x2="{}" y1="{y}" y2="{y}" stroke="#999" stroke-dasharray="4 3"/>"##, LEFT + pw, y = py(0.0));
    }
    let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#, LEFT + pw / 2.0, H - 10.0, escape(x_label));
    for (i, (name, ys)) in series.iter().enumerate() {
        let color = COLORS[i % COLORS.len()];
        let pts: Vec<String> = xs
            .iter()
            .zip(ys)
            .filter(|(x, y)| usable(**x, **y))
            .map(|(&x, &y)| format!("{:.2},{:.2}", px(x), py(y)))
            .collect();
        let _ = writeln!(s, r#"<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{}"/>"#, pts.join(" "));
        let ly = TOP + 14.0 + 18.0 * i as f64;
        let _ = writeln!(s, r#"<line x1="{}" x2="{}" y1="{ly}" y2="{ly}" stroke="{color}" stroke-width="2"/>"#, W - RIGHT + 10.0, W - RIGHT + 30.0);
        let _ = writeln!(s, r#"<text x="{}" y="{}">{}</text>"#, W - RIGHT + 35.0, ly + 4.0, escape(name));
    }
    s.push_str("</svg>\n");
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn plot_is_wellformed_and_skips_nan() {
        let s = line_plot("t<1>", "x", &[1.0, 2.0, 3.0], &[("a".into(), vec![0.0, f64::NAN, 1.0])], false);
        assert!(s.starts_with("<svg") && s.trim_end().ends_with("</svg>"));
        assert!(s.contains("t&lt;1&gt;"));
        assert_eq!(s.matches("<polyline").count(), 1);
        assert!(!s.contains("NaN"));
    }
}
