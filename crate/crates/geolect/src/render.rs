//! Publication-style SVG output: count maps, relative-distribution maps,
//! the frequency-comparison scatter, and the angle histogram.
//!
//! Maps project lon/lat linearly onto a square canvas (equirectangular;
//! fine at city scale) with north up. Marker area encodes magnitude:
//! radius ∝ √value, scaled so the largest value in the grid reaches
//! `max_marker_px`. Zero bins draw nothing. Output is deterministic:
//! identical inputs produce byte-identical documents.

use std::fmt::Write as _;

use crate::grid::{CountGrid, DeltaGrid, GridSpec};
use crate::stats::{AngleHistogram, ComparisonStats};

/// Visual knobs shared by all renderers.
#[derive(Debug, Clone, PartialEq)]
pub struct MapStyle {
    /// Canvas width and height in pixels (square).
    pub canvas_px: u32,
    /// Radius of the largest marker.
    pub max_marker_px: f64,
    /// Marker fill opacity in (0, 1]; semi-transparent so overlaps deepen.
    pub alpha: f64,
    /// Fill for positive relative-distribution bins.
    pub color_pos: String,
    /// Fill for negative relative-distribution bins.
    pub color_neg: String,
    /// Fill for count-map markers.
    pub color_mono: String,
    /// Optional raster reference drawn under the markers (not fetched,
    /// embedded as an href).
    pub background: Option<String>,
}

impl Default for MapStyle {
    fn default() -> Self {
        MapStyle {
            canvas_px: 800,
            max_marker_px: 12.0,
            alpha: 0.45,
            color_pos: "#d62728".into(),
            color_neg: "#1f77b4".into(),
            color_mono: "#4878a8".into(),
            background: None,
        }
    }
}

impl MapStyle {
    pub fn validate(&self) -> crate::error::Result<()> {
        if !(self.max_marker_px > 0.0) {
            return Err(crate::error::Error::invalid("style", "max_marker_px must be positive"));
        }
        if !(self.alpha > 0.0 && self.alpha <= 1.0) {
            return Err(crate::error::Error::invalid("style", "alpha must be in (0, 1]"));
        }
        if self.canvas_px == 0 {
            return Err(crate::error::Error::invalid("style", "canvas_px must be positive"));
        }
        Ok(())
    }
}

fn svg_open(out: &mut String, size: u32, title: &str) {
    let _ = writeln!(out, r#"<?xml version="1.0" encoding="UTF-8"?>"#);
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{size}" height="{size}" viewBox="0 0 {size} {size}">"#
    );
    let _ = writeln!(out, "<title>{title}</title>");
    let _ = writeln!(out, r#"<rect width="{size}" height="{size}" fill="white"/>"#);
}

fn svg_background(out: &mut String, style: &MapStyle) {
    if let Some(bg) = &style.background {
        let size = style.canvas_px;
        let _ = writeln!(
            out,
            r#"<image href="{bg}" x="0" y="0" width="{size}" height="{size}" preserveAspectRatio="none"/>"#
        );
    }
}

/// Canvas position of a bin center: x = (i + 0.5)/n · width, latitude
/// axis inverted so north is up.
fn bin_px(spec: &GridSpec, i: usize, j: usize, size: f64) -> (f64, f64) {
    let x = (i as f64 + 0.5) / spec.n as f64 * size;
    let y = size - (j as f64 + 0.5) / spec.m as f64 * size;
    (x, y)
}

/// Marker-radius legend: reference circles at the full, half, and quarter
/// radius with the values they encode (area-proportional, so the value
/// falls by 4× per halving).
fn legend(out: &mut String, style: &MapStyle, color: &str, max_value: f64, fmt: impl Fn(f64) -> String) {
    if max_value <= 0.0 {
        return;
    }
    let size = style.canvas_px as f64;
    let r_full = style.max_marker_px;
    let x = 14.0 + r_full;
    let mut y = size - 12.0;
    let _ = writeln!(out, r#"<g class="legend" font-family="sans-serif" font-size="11">"#);
    for divisor in [1.0f64, 4.0, 16.0] {
        let r = r_full / divisor.sqrt();
        let _ = writeln!(
            out,
            r#"<circle cx="{:.2}" cy="{:.2}" r="{:.2}" fill="{}" fill-opacity="{}"/>"#,
            x,
            y - r,
            r,
            color,
            style.alpha
        );
        let _ = writeln!(
            out,
            r#"<text x="{:.2}" y="{:.2}" fill="black">{}</text>"#,
            x + r_full + 6.0,
            y - r,
            fmt(max_value / divisor)
        );
        y -= 2.0 * r + 8.0;
    }
    let _ = writeln!(out, "</g>");
}

/// SVG map of a count grid: one semi-transparent circle per nonzero bin,
/// area proportional to the count.
pub fn render_counts(grid: &CountGrid, style: &MapStyle) -> String {
    let mut out = String::new();
    let size = style.canvas_px as f64;
    svg_open(&mut out, style.canvas_px, "count map");
    svg_background(&mut out, style);
    let max = grid.max_count();
    let _ = writeln!(out, r#"<g class="markers">"#);
    if max > 0 {
        let spec = *grid.spec();
        for i in 0..spec.n {
            for j in 0..spec.m {
                let c = grid.count(i, j);
                if c == 0 {
                    continue;
                }
                let (x, y) = bin_px(&spec, i, j, size);
                let r = style.max_marker_px * (c as f64 / max as f64).sqrt();
                let _ = writeln!(
                    out,
                    r#"<circle cx="{x:.2}" cy="{y:.2}" r="{r:.3}" fill="{}" fill-opacity="{}"/>"#,
                    style.color_mono, style.alpha
                );
            }
        }
    }
    let _ = writeln!(out, "</g>");
    legend(&mut out, style, &style.color_mono, grid.max_count() as f64, |v| format!("{v:.1}"));
    out.push_str("</svg>\n");
    out
}

/// SVG map of a relative distribution: positive bins in `color_pos`,
/// negative in `color_neg`, zero bins invisible; the largest |Δf| maps to
/// `max_marker_px`.
pub fn render_delta(delta: &DeltaGrid, style: &MapStyle) -> String {
    let mut out = String::new();
    let size = style.canvas_px as f64;
    svg_open(&mut out, style.canvas_px, "relative distribution");
    svg_background(&mut out, style);
    let max_abs = delta.max_abs();
    let _ = writeln!(out, r#"<g class="markers">"#);
    if max_abs > 0.0 {
        let spec = *delta.spec();
        for i in 0..spec.n {
            for j in 0..spec.m {
                let v = delta.value(i, j);
                if v == 0.0 {
                    continue;
                }
                let (x, y) = bin_px(&spec, i, j, size);
                let r = style.max_marker_px * (v.abs() / max_abs).sqrt();
                let color = if v > 0.0 { &style.color_pos } else { &style.color_neg };
                let _ = writeln!(
                    out,
                    r#"<circle cx="{x:.2}" cy="{y:.2}" r="{r:.3}" fill="{color}" fill-opacity="{}"/>"#,
                    style.alpha
                );
            }
        }
    }
    let _ = writeln!(out, "</g>");
    legend(&mut out, style, &style.color_pos, max_abs, |v| format!("{v:.2e}"));
    out.push_str("</svg>\n");
    out
}

const PLOT_MARGIN_LEFT: f64 = 64.0;
const PLOT_MARGIN_BOTTOM: f64 = 48.0;
const PLOT_MARGIN_TOP: f64 = 24.0;
const PLOT_MARGIN_RIGHT: f64 = 24.0;

struct PlotFrame {
    x0: f64,
    y0: f64, // canvas y of the data origin (bottom-left)
    w: f64,
    h: f64,
    x_max: f64,
    y_max: f64,
}

impl PlotFrame {
    fn new(size: f64, x_max: f64, y_max: f64) -> Self {
        PlotFrame {
            x0: PLOT_MARGIN_LEFT,
            y0: size - PLOT_MARGIN_BOTTOM,
            w: size - PLOT_MARGIN_LEFT - PLOT_MARGIN_RIGHT,
            h: size - PLOT_MARGIN_TOP - PLOT_MARGIN_BOTTOM,
            x_max,
            y_max,
        }
    }

    fn px(&self, x: f64, y: f64) -> (f64, f64) {
        (self.x0 + x / self.x_max * self.w, self.y0 - y / self.y_max * self.h)
    }

    fn axes(&self, out: &mut String, x_label: &str, y_label: &str) {
        let _ = writeln!(
            out,
            r#"<g class="axes" stroke="black" fill="none" stroke-width="1">"#
        );
        let _ = writeln!(
            out,
            r#"<path d="M {:.2} {:.2} L {:.2} {:.2} L {:.2} {:.2}"/>"#,
            self.x0,
            self.y0 - self.h,
            self.x0,
            self.y0,
            self.x0 + self.w,
            self.y0
        );
        let _ = writeln!(out, "</g>");
        let _ = writeln!(out, r#"<g class="ticks" font-family="sans-serif" font-size="11" fill="black">"#);
        for k in 0..=4 {
            let fx = k as f64 / 4.0;
            let (tx, _) = self.px(fx * self.x_max, 0.0);
            let _ = writeln!(
                out,
                r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">{:.0}</text>"#,
                tx,
                self.y0 + 16.0,
                fx * self.x_max
            );
            let (_, ty) = self.px(0.0, fx * self.y_max);
            let _ = writeln!(
                out,
                r#"<text x="{:.2}" y="{:.2}" text-anchor="end">{:.0}</text>"#,
                self.x0 - 6.0,
                ty + 4.0,
                fx * self.y_max
            );
        }
        let _ = writeln!(
            out,
            r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">{x_label}</text>"#,
            self.x0 + self.w / 2.0,
            self.y0 + 34.0
        );
        let (lx, ly) = (16.0, self.y0 - self.h / 2.0);
        let _ = writeln!(
            out,
            r#"<text x="{lx:.2}" y="{ly:.2}" text-anchor="middle" transform="rotate(-90 {lx:.2} {ly:.2})">{y_label}</text>"#
        );
        let _ = writeln!(out, "</g>");
    }
}

/// Frequency-comparison scatter: per-bin (c_ref, c_target) points, the
/// least-squares line (red, solid), the exact-correlation line `y = kx`
/// (green, dashed), and grey shot-noise curves `y = kx ± k√x`.
pub fn render_scatter(stats: &ComparisonStats, style: &MapStyle) -> String {
    let mut out = String::new();
    let size = style.canvas_px as f64;
    svg_open(&mut out, style.canvas_px, "frequency comparison");

    let x_data_max = stats.points.iter().map(|p| p.c_ref).max().unwrap_or(0) as f64;
    let y_data_max = stats.points.iter().map(|p| p.c_target).max().unwrap_or(0) as f64;
    let frame = PlotFrame::new(size, (x_data_max * 1.05).max(1.0), (y_data_max * 1.05).max(1.0));

    let _ = writeln!(
        out,
        r#"<clipPath id="plot"><rect x="{:.2}" y="{:.2}" width="{:.2}" height="{:.2}"/></clipPath>"#,
        frame.x0,
        frame.y0 - frame.h,
        frame.w,
        frame.h
    );
    frame.axes(&mut out, "reference count", "target count");

    let _ = writeln!(out, r#"<g class="points">"#);
    for p in &stats.points {
        let (x, y) = frame.px(p.c_ref as f64, p.c_target as f64);
        let _ = writeln!(
            out,
            r#"<circle cx="{x:.2}" cy="{y:.2}" r="2" fill="{}" fill-opacity="{}"/>"#,
            style.color_mono, style.alpha
        );
    }
    let _ = writeln!(out, "</g>");

    let _ = writeln!(out, r#"<g class="lines" fill="none" clip-path="url(#plot)">"#);
    // Shot-noise band around the exact-correlation line.
    let band = stats.noise_band();
    for sign in [-1.0, 1.0] {
        let mut pts = String::new();
        for s in 0..=128 {
            let x = frame.x_max * s as f64 / 128.0;
            let y = stats.k_exact * x + sign * band.band(x);
            let (px, py) = frame.px(x, y);
            let _ = write!(pts, "{px:.2},{py:.2} ");
        }
        let _ = writeln!(out, r##"<polyline points="{}" stroke="#9a9a9a" stroke-width="1"/>"##, pts.trim_end());
    }
    // Exact-correlation line y = kx.
    let (ex0, ey0) = frame.px(0.0, 0.0);
    let (ex1, ey1) = frame.px(frame.x_max, stats.k_exact * frame.x_max);
    let _ = writeln!(
        out,
        r##"<line x1="{ex0:.2}" y1="{ey0:.2}" x2="{ex1:.2}" y2="{ey1:.2}" stroke="#2ca02c" stroke-width="1.5" stroke-dasharray="6 4"/>"##
    );
    // Least-squares fit.
    let (fx0, fy0) = frame.px(0.0, stats.regression.intercept);
    let (fx1, fy1) = frame.px(
        frame.x_max,
        stats.regression.intercept + stats.regression.slope * frame.x_max,
    );
    let _ = writeln!(
        out,
        r#"<line x1="{fx0:.2}" y1="{fy0:.2}" x2="{fx1:.2}" y2="{fy1:.2}" stroke="{}" stroke-width="1.5"/>"#,
        style.color_pos
    );
    let _ = writeln!(out, "</g>");

    let r = stats.regression.pearson_r;
    let df = stats.regression.df;
    let _ = writeln!(
        out,
        r#"<text x="{:.2}" y="{:.2}" font-family="sans-serif" font-size="12" fill="black">r({df}) = {r:.3}, k = {:.3}</text>"#,
        frame.x0 + 8.0,
        frame.y0 - frame.h + 16.0,
        stats.k_exact
    );
    out.push_str("</svg>\n");
    out
}

/// 1°-bin histogram of scatter angles over 0–90° with the mean and
/// population standard deviation annotated.
pub fn render_angle_histogram(hist: &AngleHistogram, style: &MapStyle) -> String {
    let mut out = String::new();
    let size = style.canvas_px as f64;
    svg_open(&mut out, style.canvas_px, "angle histogram");

    let max = hist.bin_counts.iter().copied().max().unwrap_or(0).max(1) as f64;
    let frame = PlotFrame::new(size, 90.0, max);
    frame.axes(&mut out, "angle (degrees)", "bins");

    let _ = writeln!(out, r#"<g class="bars" fill="{}" fill-opacity="{}">"#, style.color_mono, style.alpha);
    let bar_w = frame.w / 90.0;
    for (deg, &count) in hist.bin_counts.iter().enumerate() {
        if count == 0 {
            continue;
        }
        let (x, y) = frame.px(deg as f64, count as f64);
        let h = frame.y0 - y;
        let _ = writeln!(
            out,
            r#"<rect x="{x:.2}" y="{y:.2}" width="{bar_w:.3}" height="{h:.2}"/>"#
        );
    }
    let _ = writeln!(out, "</g>");
    let _ = writeln!(
        out,
        r#"<text x="{:.2}" y="{:.2}" font-family="sans-serif" font-size="12" fill="black">mean {:.1}°, std {:.1}°, n = {}</text>"#,
        frame.x0 + 8.0,
        frame.y0 - frame.h + 16.0,
        hist.mean_deg,
        hist.std_deg,
        hist.n_points
    );
    out.push_str("</svg>\n");
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{delta, CountGrid, Extent, GridSpec};
    use crate::stats::{angle_histogram, frequency_comparison};

    fn spec(n: usize, m: usize) -> GridSpec {
        GridSpec::new(Extent::new(0.0, 1.0, 0.0, 1.0).unwrap(), n, m).unwrap()
    }

    fn markers_section(svg: &str) -> &str {
        let start = svg.find(r#"<g class="markers">"#).expect("markers group");
        let end = svg[start..].find("</g>").expect("markers close") + start;
        &svg[start..end]
    }

    fn marker_radii(svg: &str) -> Vec<f64> {
        markers_section(svg)
            .split(" r=\"")
            .skip(1)
            .map(|s| s.split('"').next().unwrap().parse().unwrap())
            .collect()
    }

    #[test]
    fn zero_grid_renders_no_markers() {
        let g = CountGrid::from_counts(spec(3, 3), vec![0; 9]).unwrap();
        let svg = render_counts(&g, &MapStyle::default());
        assert!(!markers_section(&svg).contains("<circle"));
    }

    #[test]
    fn count_radii_follow_sqrt_rule() {
        // Counts 9 and 1 in one grid: area-proportional radii at ratio 3:1.
        let g = CountGrid::from_counts(spec(2, 1), vec![9, 1]).unwrap();
        let radii = marker_radii(&render_counts(&g, &MapStyle::default()));
        assert_eq!(radii.len(), 2);
        assert!((radii[0] / radii[1] - 3.0).abs() < 1e-6);
        assert!((radii[0] - MapStyle::default().max_marker_px).abs() < 1e-6);

        // Equal counts, equal radii.
        let g = CountGrid::from_counts(spec(2, 1), vec![4, 4]).unwrap();
        let radii = marker_radii(&render_counts(&g, &MapStyle::default()));
        assert_eq!(radii[0], radii[1]);
    }

    #[test]
    fn delta_map_colors_and_scaling() {
        let style = MapStyle::default();
        let target = CountGrid::from_counts(spec(2, 2), vec![2, 0, 0, 0]).unwrap();
        let reference = CountGrid::from_counts(spec(2, 2), vec![0, 2, 0, 0]).unwrap();
        let d = delta(&target, &reference).unwrap();
        let svg = render_delta(&d, &style);
        let section = markers_section(&svg);
        assert_eq!(section.matches("<circle").count(), 2);
        assert!(section.contains(&style.color_pos));
        assert!(section.contains(&style.color_neg));
        let radii = marker_radii(&svg);
        assert_eq!(radii[0], radii[1]);
        assert!((radii[0] - style.max_marker_px).abs() < 1e-6);
    }

    #[test]
    fn delta_zero_bins_are_invisible() {
        let g = CountGrid::from_counts(spec(2, 2), vec![1, 2, 3, 4]).unwrap();
        let d = delta(&g, &g).unwrap();
        let svg = render_delta(&d, &MapStyle::default());
        assert!(!markers_section(&svg).contains("<circle"));
    }

    #[test]
    fn circle_count_equals_nonzero_bins() {
        let target = CountGrid::from_counts(spec(3, 3), vec![5, 0, 1, 0, 2, 0, 0, 0, 7]).unwrap();
        let reference = CountGrid::from_counts(spec(3, 3), vec![1, 1, 1, 1, 1, 1, 1, 1, 1]).unwrap();
        let d = delta(&target, &reference).unwrap();
        let nonzero = d.values().iter().filter(|&&v| v != 0.0).count();
        let svg = render_delta(&d, &MapStyle::default());
        assert_eq!(markers_section(&svg).matches("<circle").count(), nonzero);
    }

    #[test]
    fn bin_geometry_maps_to_canvas() {
        // 2×2 grid on an 800px canvas: bin (0, 0) sits at (200, 600) --
        // south row near the bottom since north is up.
        let g = CountGrid::from_counts(spec(2, 2), vec![1, 0, 0, 0]).unwrap();
        let svg = render_counts(&g, &MapStyle::default());
        assert!(markers_section(&svg).contains(r#"cx="200.00" cy="600.00""#));
    }

    #[test]
    fn rendering_is_deterministic() {
        let target = CountGrid::from_counts(spec(4, 4), (0..16).map(|v| v % 5).collect()).unwrap();
        let reference = CountGrid::from_counts(spec(4, 4), (0..16).map(|v| v % 3 + 1).collect()).unwrap();
        let style = MapStyle::default();
        assert_eq!(render_counts(&target, &style), render_counts(&target, &style));
        let d = delta(&target, &reference).unwrap();
        assert_eq!(render_delta(&d, &style), render_delta(&d, &style));
        let s = frequency_comparison(&target, &reference).unwrap();
        assert_eq!(render_scatter(&s, &style), render_scatter(&s, &style));
        let h = angle_histogram(&target, &reference).unwrap();
        assert_eq!(render_angle_histogram(&h, &style), render_angle_histogram(&h, &style));
    }

    #[test]
    fn scatter_has_fit_exact_and_band() {
        let target = CountGrid::from_counts(spec(3, 3), vec![1, 2, 3, 4, 5, 6, 7, 8, 9]).unwrap();
        let reference = CountGrid::from_counts(spec(3, 3), vec![2, 2, 3, 4, 4, 6, 7, 9, 9]).unwrap();
        let s = frequency_comparison(&target, &reference).unwrap();
        let svg = render_scatter(&s, &MapStyle::default());
        assert_eq!(svg.matches("<polyline").count(), 2); // ± noise band
        assert!(svg.contains("stroke-dasharray")); // exact-correlation line
        assert_eq!(svg.matches("<line").count(), 2); // exact + fit
        assert_eq!(svg.matches("<circle").count(), 9);
    }

    #[test]
    fn histogram_bars_match_nonzero_bins() {
        let g = CountGrid::from_counts(spec(2, 2), vec![1, 2, 0, 1]).unwrap();
        let h = angle_histogram(&g, &g).unwrap();
        let svg = render_angle_histogram(&h, &MapStyle::default());
        let nonzero = h.bin_counts.iter().filter(|&&c| c > 0).count();
        let bars = svg.split(r#"<g class="bars""#).nth(1).unwrap();
        let bars = &bars[..bars.find("</g>").unwrap()];
        assert_eq!(bars.matches("<rect").count(), nonzero);
    }

    #[test]
    fn style_validation() {
        let mut style = MapStyle::default();
        assert!(style.validate().is_ok());
        style.alpha = 0.0;
        assert!(style.validate().is_err());
        style.alpha = 0.5;
        style.max_marker_px = -1.0;
        assert!(style.validate().is_err());
    }

    #[test]
    fn background_reference_is_embedded() {
        let style = MapStyle { background: Some("city.png".into()), ..MapStyle::default() };
        let g = CountGrid::from_counts(spec(1, 1), vec![1]).unwrap();
        let svg = render_counts(&g, &style);
        assert!(svg.contains(r#"<image href="city.png""#));
    }
}
