//! Minimal SVG writers for the zero scatter and log p plots.

use std::fmt::Write;

use num_complex::Complex64;

const PANEL: f64 = 400.0;
const PAD: f64 = 20.0;

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn header(out: &mut String, width: f64, height: f64, metadata: &str) {
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" viewBox="0 0 {width} {height}">"#
    );
    let _ = writeln!(out, "<metadata>{}</metadata>", escape(metadata));
}

/// One panel per point set, each showing D_R with one marker per point.
/// Markers carry the class given with their panel.
pub fn scatter(radius: f64, panels: &[(&str, &str, Vec<Complex64>)], metadata: &str) -> String {
    let mut out = String::new();
    let width = PANEL * panels.len().max(1) as f64;
    header(&mut out, width, PANEL + PAD, metadata);
    let scale = (PANEL / 2.0 - PAD) / radius;
    for (k, (title, class, points)) in panels.iter().enumerate() {
        let cx = PANEL * (k as f64 + 0.5);
        let cy = PANEL / 2.0;
        let _ = writeln!(out, r#"<g id="{class}-panel">"#);
        let _ = writeln!(
            out,
            r#"<text x="{cx:.1}" y="{:.1}" text-anchor="middle" font-size="14">{}</text>"#,
            PANEL + 5.0,
            escape(title)
        );
        let _ = writeln!(
            out,
            r#"<circle class="disk" cx="{cx:.1}" cy="{cy:.1}" r="{:.4}" fill="none" stroke="black"/>"#,
            radius * scale
        );
        for z in points {
            let _ = writeln!(
                out,
                r#"<circle class="{class}" cx="{:.4}" cy="{:.4}" r="3"/>"#,
                cx + z.re * scale,
                cy - z.im * scale
            );
        }
        let _ = writeln!(out, "</g>");
    }
    out.push_str("</svg>\n");
    out
}

/// log p against T, one polyline per series with a marker per point.
pub fn log_p_plot(series: &[(String, Vec<(f64, f64)>)], metadata: &str) -> String {
    let mut out = String::new();
    let (w, h) = (600.0, 400.0);
    header(&mut out, w, h, metadata);
    let pts = series.iter().flat_map(|s| s.1.iter().copied());
    let (mut x0, mut x1, mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
    for (x, y) in pts {
        x0 = x0.min(x);
        x1 = x1.max(x);
        y0 = y0.min(y);
        y1 = y1.max(y);
    }
    if !x0.is_finite() {
        (x0, x1, y0, y1) = (0.0, 1.0, -1.0, 0.0);
    }
    if x1 <= x0 {
        x1 = x0 + 1.0;
    }
    if y1 <= y0 {
        y1 = y0 + 1.0;
    }
    let m = 50.0;
    let sx = |x: f64| m + (x - x0) / (x1 - x0) * (w - 2.0 * m);
    let sy = |y: f64| h - m - (y - y0) / (y1 - y0) * (h - 2.0 * m);
    let _ = writeln!(
        out,
        r#"<path class="axes" d="M{m} {m} V{:.1} H{:.1}" fill="none" stroke="black"/>"#,
        h - m,
        w - m
    );
    let _ = writeln!(out, r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">T</text>"#, w / 2.0, h - 10.0);
    let _ = writeln!(out, r#"<text x="15" y="{:.1}">log p</text>"#, h / 2.0);
    let _ = writeln!(out, r#"<text x="{m}" y="{:.1}" font-size="10">{x0:.4}</text>"#, h - m + 15.0);
    let _ = writeln!(out, r#"<text x="{:.1}" y="{:.1}" font-size="10">{x1:.4}</text>"#, w - m, h - m + 15.0);
    let _ = writeln!(out, r#"<text x="5" y="{:.1}" font-size="10">{y0:.4}</text>"#, h - m);
    let _ = writeln!(out, r#"<text x="5" y="{m}" font-size="10">{y1:.4}</text>"#);
    for (label, s) in series {
        let _ = writeln!(out, r#"<g class="series"><title>{}</title>"#, escape(label));
        let d: Vec<String> = s.iter().map(|&(x, y)| format!("{:.4},{:.4}", sx(x), sy(y))).collect();
        let _ = writeln!(out, r#"<polyline points="{}" fill="none" stroke="steelblue"/>"#, d.join(" "));
        for &(x, y) in s {
            let _ = writeln!(out, r#"<circle class="point" cx="{:.4}" cy="{:.4}" r="3"/>"#, sx(x), sy(y));
        }
        let _ = writeln!(out, "</g>");
    }
    out.push_str("</svg>\n");
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn one_marker_per_point() {
        let pts = vec![Complex64::new(0.5, 0.5), Complex64::new(-1.0, 0.0)];
        let svg = scatter(2.0, &[("zeros", "zero", pts), ("poisson", "poisson", vec![])], "{\"a\":1}");
        assert_eq!(svg.matches(r#"class="zero""#).count(), 2);
        assert_eq!(svg.matches(r#"class="poisson""#).count(), 0);
        assert_eq!(svg.matches(r#"class="disk""#).count(), 2);
        assert!(svg.contains("<metadata>{\"a\":1}</metadata>"));
    }

    #[test]
    fn markers_are_placed_inside_the_disk() {
        let svg = scatter(1.0, &[("z", "zero", vec![Complex64::new(1.0, 0.0)])], "");
        // disk radius 180 px around (200, 200)
        assert!(svg.contains(r#"cx="380.0000" cy="200.0000""#));
    }

    #[test]
    fn plot_handles_degenerate_ranges() {
        let svg = log_p_plot(&[("one".into(), vec![(1.0, -2.0)])], "<x>");
        assert!(svg.contains("&lt;x&gt;"));
        assert_eq!(svg.matches(r#"class="point""#).count(), 1);
    }
}
