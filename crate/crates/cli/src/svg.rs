//! Minimal deterministic SVG plots: log-log scatter with lines, and
//! side-by-side histograms. Coordinates are printed with two decimals so the
//! bytes depend only on the input data.

use std::fmt::Write;

use gaussrot::Histogram;

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 440.0;
const MARGIN_L: f64 = 70.0;
const MARGIN_R: f64 = 160.0;
const MARGIN_T: f64 = 40.0;
const MARGIN_B: f64 = 55.0;

pub const PALETTE: [&str; 8] = [
    "#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f",
];

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Style {
    Points,
    Line,
    Dashed,
}

#[derive(Debug, Clone)]
pub struct Series {
    pub name: String,
    pub color: &'static str,
    pub style: Style,
    pub points: Vec<(f64, f64)>,
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn header(out: &mut String, w: f64, h: f64) {
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w:.0}" height="{h:.0}" viewBox="0 0 {w:.0} {h:.0}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(out, r#"<rect width="{w:.0}" height="{h:.0}" fill="white"/>"#);
}

/// Decades covering `[lo, hi]`, widened to at least one decade.
fn log_range(lo: f64, hi: f64) -> (f64, f64) {
    let (mut a, mut b) = (lo.log10().floor(), hi.log10().ceil());
    if b <= a {
        b = a + 1.0;
    }
    if !a.is_finite() || !b.is_finite() {
        a = 0.0;
        b = 1.0;
    }
    (a, b)
}

/// Log-log plot of all series.
pub fn loglog_plot(title: &str, xlabel: &str, ylabel: &str, series: &[Series]) -> String {
    let finite = |v: f64| v.is_finite() && v > 0.0;
    let pts: Vec<(f64, f64)> = series
        .iter()
        .flat_map(|s| s.points.iter().copied())
        .filter(|&(x, y)| finite(x) && finite(y))
        .collect();
    let (xmin, xmax) = pts.iter().fold((f64::INFINITY, 0.0f64), |(a, b), p| (a.min(p.0), b.max(p.0)));
    let (ymin, ymax) = pts.iter().fold((f64::INFINITY, 0.0f64), |(a, b), p| (a.min(p.1), b.max(p.1)));
    let (x0, x1) = log_range(xmin, xmax);
    let (y0, y1) = log_range(ymin, ymax);
    let pw = WIDTH - MARGIN_L - MARGIN_R;
    let ph = HEIGHT - MARGIN_T - MARGIN_B;
    let sx = |x: f64| MARGIN_L + (x.log10() - x0) / (x1 - x0) * pw;
    let sy = |y: f64| MARGIN_T + ph - (y.log10() - y0) / (y1 - y0) * ph;

    let mut out = String::new();
    header(&mut out, WIDTH, HEIGHT);
    let _ = writeln!(
        out,
        r#"<text x="{:.2}" y="22" text-anchor="middle" font-size="14">{}</text>"#,
        MARGIN_L + pw / 2.0,
        escape(title)
    );
    let _ = writeln!(
        out,
        r#"<rect x="{MARGIN_L:.2}" y="{MARGIN_T:.2}" width="{pw:.2}" height="{ph:.2}" fill="none" stroke="black"/>"#
    );
    for e in x0 as i32..=x1 as i32 {
        for m in 1..10 {
            let v = m as f64 * 10f64.powi(e);
            if v.log10() > x1 + 1e-12 {
                break;
            }
            let x = sx(v);
            let tick = if m == 1 { 6.0 } else { 3.0 };
            let _ = writeln!(
                out,
                r#"<line x1="{x:.2}" y1="{:.2}" x2="{x:.2}" y2="{:.2}" stroke="black"/>"#,
                MARGIN_T + ph,
                MARGIN_T + ph - tick
            );
            if m == 1 || m == 2 || m == 5 {
                let _ = writeln!(
                    out,
                    r#"<text x="{x:.2}" y="{:.2}" text-anchor="middle">{}</text>"#,
                    MARGIN_T + ph + 16.0,
                    tick_label(v)
                );
            }
        }
    }
    for e in y0 as i32..=y1 as i32 {
        for m in 1..10 {
            let v = m as f64 * 10f64.powi(e);
            if v.log10() > y1 + 1e-12 {
                break;
            }
            let y = sy(v);
            let tick = if m == 1 { 6.0 } else { 3.0 };
            let _ = writeln!(
                out,
                r#"<line x1="{MARGIN_L:.2}" y1="{y:.2}" x2="{:.2}" y2="{y:.2}" stroke="black"/>"#,
                MARGIN_L + tick
            );
            if m == 1 || m == 2 || m == 5 {
                let _ = writeln!(
                    out,
                    r#"<text x="{:.2}" y="{:.2}" text-anchor="end">{}</text>"#,
                    MARGIN_L - 6.0,
                    y + 4.0,
                    tick_label(v)
                );
            }
        }
    }
    let _ = writeln!(
        out,
        r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">{}</text>"#,
        MARGIN_L + pw / 2.0,
        HEIGHT - 12.0,
        escape(xlabel)
    );
    let _ = writeln!(
        out,
        r#"<text x="16" y="{:.2}" text-anchor="middle" transform="rotate(-90 16 {:.2})">{}</text>"#,
        MARGIN_T + ph / 2.0,
        MARGIN_T + ph / 2.0,
        escape(ylabel)
    );

    for (k, s) in series.iter().enumerate() {
        let visible: Vec<(f64, f64)> = s.points.iter().copied().filter(|&(x, y)| finite(x) && finite(y)).collect();
        match s.style {
            Style::Points => {
                for (x, y) in &visible {
                    let _ = writeln!(
                        out,
                        r#"<circle cx="{:.2}" cy="{:.2}" r="2.5" fill="{}" fill-opacity="0.6"/>"#,
                        sx(*x),
                        sy(*y),
                        s.color
                    );
                }
            }
            Style::Line | Style::Dashed => {
                let path: Vec<String> = visible.iter().map(|&(x, y)| format!("{:.2},{:.2}", sx(x), sy(y))).collect();
                let dash = if s.style == Style::Dashed { r#" stroke-dasharray="6 4""# } else { "" };
                let _ = writeln!(
                    out,
                    r#"<polyline points="{}" fill="none" stroke="{}" stroke-width="1.8"{dash}/>"#,
                    path.join(" "),
                    s.color
                );
            }
        }
        let ly = MARGIN_T + 14.0 + 18.0 * k as f64;
        let lx = WIDTH - MARGIN_R + 12.0;
        match s.style {
            Style::Points => {
                let _ = writeln!(out, r#"<circle cx="{:.2}" cy="{:.2}" r="3" fill="{}"/>"#, lx + 8.0, ly - 4.0, s.color);
            }
            _ => {
                let _ = writeln!(
                    out,
                    r#"<line x1="{lx:.2}" y1="{:.2}" x2="{:.2}" y2="{:.2}" stroke="{}" stroke-width="1.8"/>"#,
                    ly - 4.0,
                    lx + 16.0,
                    ly - 4.0,
                    s.color
                );
            }
        }
        let _ = writeln!(out, r#"<text x="{:.2}" y="{ly:.2}">{}</text>"#, lx + 22.0, escape(&s.name));
    }
    out.push_str("</svg>\n");
    out
}

fn tick_label(v: f64) -> String {
    if (1e-3..1e5).contains(&v) {
        let s = format!("{v:.3}");
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        format!("{v:.0e}")
    }
}

/// Histograms side by side, each with an optional reference density curve
/// given as `(x, density)` pairs.
pub fn histogram_panels(panels: &[(String, &Histogram, Option<Vec<(f64, f64)>>)]) -> String {
    let pw = 300.0;
    let ph = 220.0;
    let gap = 40.0;
    let w = panels.len() as f64 * (pw + gap) + gap;
    let h = ph + 90.0;
    let mut out = String::new();
    header(&mut out, w, h);
    for (k, (title, hist, overlay)) in panels.iter().enumerate() {
        let left = gap + k as f64 * (pw + gap);
        let top = 40.0;
        let dens = hist.densities();
        let overlay_max = overlay
            .as_ref()
            .map_or(0.0, |o| o.iter().map(|p| p.1).fold(0.0, f64::max));
        let dmax = dens.iter().copied().fold(overlay_max, f64::max).max(1e-12);
        let (lo, hi) = (hist.edges[0], *hist.edges.last().expect("histogram has edges"));
        let sx = |x: f64| left + (x - lo) / (hi - lo) * pw;
        let sy = |d: f64| top + ph - d / dmax * ph;
        let _ = writeln!(
            out,
            r#"<text x="{:.2}" y="24" text-anchor="middle" font-size="13">{}</text>"#,
            left + pw / 2.0,
            escape(title)
        );
        for (d, e) in dens.iter().zip(hist.edges.windows(2)) {
            let x = sx(e[0]);
            let bw = (sx(e[1]) - x).max(0.0);
            let y = sy(*d);
            let _ = writeln!(
                out,
                r##"<rect x="{x:.2}" y="{y:.2}" width="{bw:.2}" height="{:.2}" fill="#1f77b4" fill-opacity="0.7"/>"##,
                top + ph - y
            );
        }
        if let Some(o) = overlay {
            let path: Vec<String> = o
                .iter()
                .filter(|p| p.0 >= lo && p.0 <= hi)
                .map(|&(x, d)| format!("{:.2},{:.2}", sx(x), sy(d)))
                .collect();
            let _ = writeln!(
                out,
                r##"<polyline points="{}" fill="none" stroke="#d62728" stroke-width="1.5"/>"##,
                path.join(" ")
            );
        }
        let _ = writeln!(
            out,
            r#"<line x1="{left:.2}" y1="{:.2}" x2="{:.2}" y2="{:.2}" stroke="black"/>"#,
            top + ph,
            left + pw,
            top + ph
        );
        for v in [lo, (lo + hi) / 2.0, hi] {
            let _ = writeln!(
                out,
                r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">{v:.2}</text>"#,
                sx(v),
                top + ph + 16.0
            );
        }
    }
    out.push_str("</svg>\n");
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn plot_is_deterministic_and_well_formed() {
        let s = vec![Series {
            name: "a<b".into(),
            color: PALETTE[0],
            style: Style::Points,
            points: vec![(10.0, 5.0), (100.0, 50.0), (0.0, 1.0)],
        }];
        let a = loglog_plot("t", "D", "L", &s);
        let b = loglog_plot("t", "D", "L", &s);
        assert_eq!(a, b);
        assert!(a.starts_with("<svg") && a.trim_end().ends_with("</svg>"));
        assert!(a.contains("a&lt;b"));
        assert_eq!(a.matches("<circle").count(), 3);
    }

    #[test]
    fn tick_labels() {
        assert_eq!(tick_label(20.0), "20");
        assert_eq!(tick_label(0.5), "0.5");
        assert_eq!(tick_label(1e6), "1e6");
    }
}
