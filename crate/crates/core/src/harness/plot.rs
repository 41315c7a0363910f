//! Minimal standalone SVG line charts.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};

/// One labelled curve.
#[derive(Debug, Clone, PartialEq)]
pub struct Series {
    pub label: String,
    pub points: Vec<(f64, f64)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlotLabels {
    pub title: String,
    pub x: String,
    pub y: String,
}

impl Default for PlotLabels {
    fn default() -> Self {
        Self {
            title: "Reconstruction error".into(),
            x: "latent dimension m".into(),
            y: "MSE".into(),
        }
    }
}

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 420.0;
const LEFT: f64 = 80.0;
const RIGHT: f64 = 160.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 60.0;
const TICKS: usize = 5;
const PALETTE: [&str; 8] = [
    "#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f",
];

fn escape(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for ch in s.chars() {
        match ch {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            '\'' => out.push_str("&apos;"),
            c => out.push(c),
        }
    }
    out
}

fn span(lo: f64, hi: f64) -> (f64, f64) {
    if hi > lo {
        (lo, hi)
    } else {
        let pad = if lo == 0.0 { 1.0 } else { lo.abs() * 0.05 };
        (lo - pad, hi + pad)
    }
}

fn tick_label(v: f64) -> String {
    if v == 0.0 {
        "0".into()
    } else if v.abs() >= 1e4 || v.abs() < 1e-2 {
        format!("{v:.2e}")
    } else {
        format!("{}", (v * 1e4).round() / 1e4)
    }
}

/// Renders the series as an SVG document.
pub fn render_plot(series: &[Series], labels: &PlotLabels) -> Result<String> {
    if series.is_empty() {
        return Err(Error::Plot("nothing to plot: no series".into()));
    }
    for s in series {
        if s.points.len() < 2 {
            return Err(Error::Plot(format!("series {:?} has fewer than 2 points", s.label)));
        }
        if s.points.iter().any(|(x, y)| !x.is_finite() || !y.is_finite()) {
            return Err(Error::Plot(format!("series {:?} has non-finite values", s.label)));
        }
    }
    let all = || series.iter().flat_map(|s| s.points.iter());
    let (x_lo, x_hi) = span(
        all().map(|p| p.0).fold(f64::INFINITY, f64::min),
        all().map(|p| p.0).fold(f64::NEG_INFINITY, f64::max),
    );
    let (y_lo, y_hi) = span(
        all().map(|p| p.1).fold(f64::INFINITY, f64::min).min(0.0),
        all().map(|p| p.1).fold(f64::NEG_INFINITY, f64::max),
    );
    let plot_w = WIDTH - LEFT - RIGHT;
    let plot_h = HEIGHT - TOP - BOTTOM;
    let sx = |x: f64| LEFT + (x - x_lo) / (x_hi - x_lo) * plot_w;
    let sy = |y: f64| TOP + plot_h - (y - y_lo) / (y_hi - y_lo) * plot_h;

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(svg, r#"<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#);
    let _ = writeln!(
        svg,
        r#"<text x="{}" y="24" text-anchor="middle" font-size="15">{}</text>"#,
        LEFT + plot_w / 2.0,
        escape(&labels.title)
    );
    let _ = writeln!(
        svg,
        r#"<g id="axes" data-x-min="{x_lo}" data-x-max="{x_hi}" data-y-min="{y_lo}" data-y-max="{y_hi}" stroke="black">"#
    );
    let _ = writeln!(
        svg,
        r#"<line x1="{LEFT}" y1="{0}" x2="{1}" y2="{0}"/>"#,
        TOP + plot_h,
        LEFT + plot_w
    );
    let _ = writeln!(svg, r#"<line x1="{LEFT}" y1="{TOP}" x2="{LEFT}" y2="{}"/>"#, TOP + plot_h);
    for k in 0..=TICKS {
        let f = k as f64 / TICKS as f64;
        let (xv, yv) = (x_lo + f * (x_hi - x_lo), y_lo + f * (y_hi - y_lo));
        let (px, py) = (sx(xv), sy(yv));
        let _ = writeln!(
            svg,
            r#"<line x1="{px:.2}" y1="{0}" x2="{px:.2}" y2="{1}"/><text x="{px:.2}" y="{2}" text-anchor="middle" stroke="none">{3}</text>"#,
            TOP + plot_h,
            TOP + plot_h + 5.0,
            TOP + plot_h + 20.0,
            tick_label(xv)
        );
        let _ = writeln!(
            svg,
            r#"<line x1="{0}" y1="{py:.2}" x2="{LEFT}" y2="{py:.2}"/><text x="{1}" y="{2:.2}" text-anchor="end" stroke="none">{3}</text>"#,
            LEFT - 5.0,
            LEFT - 8.0,
            py + 4.0,
            tick_label(yv)
        );
    }
    let _ = writeln!(svg, "</g>");
    let _ = writeln!(
        svg,
        r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#,
        LEFT + plot_w / 2.0,
        HEIGHT - 15.0,
        escape(&labels.x)
    );
    let _ = writeln!(
        svg,
        r#"<text x="20" y="{0}" text-anchor="middle" transform="rotate(-90 20 {0})">{1}</text>"#,
        TOP + plot_h / 2.0,
        escape(&labels.y)
    );

    for (i, s) in series.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let pts: Vec<String> = s.points.iter().map(|&(x, y)| format!("{:.2},{:.2}", sx(x), sy(y))).collect();
        let _ = writeln!(
            svg,
            r#"<polyline fill="none" stroke="{color}" stroke-width="2" points="{}"/>"#,
            pts.join(" ")
        );
        let ly = TOP + 10.0 + 20.0 * i as f64;
        let lx = WIDTH - RIGHT + 15.0;
        let _ = writeln!(
            svg,
            r#"<line x1="{lx}" y1="{ly}" x2="{}" y2="{ly}" stroke="{color}" stroke-width="2"/><text x="{}" y="{}">{}</text>"#,
            lx + 20.0,
            lx + 26.0,
            ly + 4.0,
            escape(&s.label)
        );
    }
    svg.push_str("</svg>\n");
    Ok(svg)
}

/// Writes [`render_plot`] output to `path`.
pub fn emit_plot(series: &[Series], labels: &PlotLabels, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let svg = render_plot(series, labels)?;
    fs::write(path, svg).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_series() -> Vec<Series> {
        vec![
            Series {
                label: "gft-grid".into(),
                points: vec![(16.0, 0.2), (32.0, 0.1), (64.0, 0.05)],
            },
            Series {
                label: "a<e>&".into(),
                points: vec![(16.0, 0.15), (32.0, 0.07), (64.0, 0.03)],
            },
        ]
    }

    #[test]
    fn one_polyline_per_series_and_well_formed() {
        let svg = render_plot(&two_series(), &PlotLabels::default()).unwrap();
        let doc = roxmltree::Document::parse(&svg).unwrap();
        let polylines = doc.descendants().filter(|n| n.has_tag_name("polyline")).count();
        assert_eq!(polylines, 2);
        assert!(svg.contains("a&lt;e&gt;&amp;"));
        assert!(svg.contains("latent dimension m"));
    }

    #[test]
    fn axis_range_covers_data() {
        let series = two_series();
        let svg = render_plot(&series, &PlotLabels::default()).unwrap();
        let doc = roxmltree::Document::parse(&svg).unwrap();
        let axes = doc.descendants().find(|n| n.attribute("id") == Some("axes")).unwrap();
        let attr = |k: &str| axes.attribute(k).unwrap().parse::<f64>().unwrap();
        for s in &series {
            for &(x, y) in &s.points {
                assert!(attr("data-x-min") <= x && x <= attr("data-x-max"));
                assert!(attr("data-y-min") <= y && y <= attr("data-y-max"));
            }
        }
        // every drawn vertex lies inside the plot area
        for node in doc.descendants().filter(|n| n.has_tag_name("polyline")) {
            for pair in node.attribute("points").unwrap().split(' ') {
                let (x, y) = pair.split_once(',').unwrap();
                let (x, y): (f64, f64) = (x.parse().unwrap(), y.parse().unwrap());
                assert!((LEFT - 0.01..=WIDTH - RIGHT + 0.01).contains(&x));
                assert!((TOP - 0.01..=HEIGHT - BOTTOM + 0.01).contains(&y));
            }
        }
    }

    #[test]
    fn flat_series_still_renders() {
        let s = vec![Series {
            label: "flat".into(),
            points: vec![(1.0, 0.0), (1.0, 0.0)],
        }];
        let svg = render_plot(&s, &PlotLabels::default()).unwrap();
        assert!(!svg.contains("NaN"));
        roxmltree::Document::parse(&svg).unwrap();
    }

    #[test]
    fn rejects_empty_input() {
        assert!(matches!(render_plot(&[], &PlotLabels::default()), Err(Error::Plot(_))));
        let short = vec![Series {
            label: "one".into(),
            points: vec![(1.0, 1.0)],
        }];
        assert!(render_plot(&short, &PlotLabels::default()).is_err());
    }

    #[test]
    fn emit_writes_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("p.svg");
        emit_plot(&two_series(), &PlotLabels::default(), &path).unwrap();
        assert!(fs::read_to_string(&path).unwrap().starts_with("<svg"));
        let missing = dir.path().join("no/such/dir/p.svg");
        let err = emit_plot(&two_series(), &PlotLabels::default(), &missing).unwrap_err();
        assert!(err.to_string().contains("no/such/dir"), "{err}");
    }
}
