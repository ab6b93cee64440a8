//! Semilog residual plots as standalone SVG.

use std::fmt::Write as _;
use std::path::Path;

use diging::solvers::parse_trace_csv;

use crate::{write_file, BenchError};

const WIDTH: f64 = 720.0;
const HEIGHT: f64 = 480.0;
const MARGIN_LEFT: f64 = 70.0;
const MARGIN_RIGHT: f64 = 160.0;
const MARGIN_Y: f64 = 40.0;
const COLORS: [&str; 6] = [
    "#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf",
];

/// One curve: label and normalized residuals indexed by iteration.
#[derive(Debug, Clone, PartialEq)]
pub struct PlotSeries {
    pub label: String,
    pub values: Vec<f64>,
}

/// Renders residual-vs-iteration curves with a logarithmic y axis. Non-positive
/// values are dropped since they have no logarithm.
pub fn emit_plot(series: &[PlotSeries]) -> Result<String, BenchError> {
    if series.is_empty() {
        return Err(BenchError::Plot("no traces to plot".into()));
    }
    let positive = |s: &PlotSeries| {
        s.values
            .iter()
            .enumerate()
            .filter(|(_, v)| **v > 0.0 && v.is_finite())
            .map(|(k, v)| (k, v.log10()))
            .collect::<Vec<_>>()
    };
    let points: Vec<Vec<(usize, f64)>> = series.iter().map(positive).collect();
    let all = points.iter().flatten();
    let k_max = all.clone().map(|p| p.0).max().unwrap_or(0).max(1) as f64;
    let mut lo = all.clone().map(|p| p.1).fold(f64::INFINITY, f64::min);
    let mut hi = all.map(|p| p.1).fold(f64::NEG_INFINITY, f64::max);
    if !lo.is_finite() {
        return Err(BenchError::Plot(
            "traces contain no positive residuals".into(),
        ));
    }
    lo = lo.floor();
    hi = hi.ceil();
    if hi <= lo {
        hi = lo + 1.0;
    }
    let plot_w = WIDTH - MARGIN_LEFT - MARGIN_RIGHT;
    let plot_h = HEIGHT - 2.0 * MARGIN_Y;
    let sx = |k: f64| MARGIN_LEFT + k / k_max * plot_w;
    let sy = |l: f64| MARGIN_Y + (hi - l) / (hi - lo) * plot_h;

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(
        svg,
        r#"<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#
    );
    let _ = writeln!(
        svg,
        r#"<rect x="{MARGIN_LEFT}" y="{MARGIN_Y}" width="{plot_w}" height="{plot_h}" fill="none" stroke="black"/>"#
    );
    let mut decade = lo;
    while decade <= hi {
        let y = sy(decade);
        let _ = writeln!(
            svg,
            r##"<line x1="{MARGIN_LEFT}" y1="{y:.3}" x2="{:.3}" y2="{y:.3}" stroke="#dddddd"/><text x="{:.3}" y="{:.3}" text-anchor="end">1e{}</text>"##,
            MARGIN_LEFT + plot_w,
            MARGIN_LEFT - 6.0,
            y + 4.0,
            decade as i64
        );
        decade += 1.0;
    }
    let _ = writeln!(
        svg,
        r#"<text x="{:.3}" y="{:.3}" text-anchor="middle">iteration k (max {})</text>"#,
        MARGIN_LEFT + plot_w / 2.0,
        HEIGHT - 10.0,
        k_max as usize
    );
    for (idx, (s, pts)) in series.iter().zip(&points).enumerate() {
        let color = COLORS[idx % COLORS.len()];
        let coords: Vec<String> = pts
            .iter()
            .map(|&(k, l)| format!("{:.3},{:.3}", sx(k as f64), sy(l)))
            .collect();
        let _ = writeln!(
            svg,
            r#"<polyline data-label="{}" fill="none" stroke="{color}" stroke-width="1.5" points="{}"/>"#,
            escape(&s.label),
            coords.join(" ")
        );
        let ly = MARGIN_Y + 16.0 * idx as f64 + 8.0;
        let lx = WIDTH - MARGIN_RIGHT + 12.0;
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

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

/// Reads trace CSVs and writes their normalized residual curves to `out`,
/// labelling each curve with its file stem.
pub fn plot_csv_files(inputs: &[impl AsRef<Path>], out: &Path) -> Result<(), BenchError> {
    let mut series = Vec::with_capacity(inputs.len());
    for path in inputs {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| BenchError::io(path, e))?;
        let records = parse_trace_csv(&text)
            .map_err(|e| BenchError::Plot(format!("{}: {e}", path.display())))?;
        series.push(PlotSeries {
            label: path
                .file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_else(|| path.display().to_string()),
            values: records.iter().map(|r| r.normalized_residual).collect(),
        });
    }
    let svg = emit_plot(&series)?;
    write_file(out, &svg)
}
