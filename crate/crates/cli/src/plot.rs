//! Standalone SVG line plots of a frequency profile.

use std::fmt::Write as _;
use std::path::Path;

use plap_core::frequency::FrequencyProfile;

use crate::config::Series;
use crate::error::CliError;

const WIDTH: f64 = 720.0;
const HEIGHT: f64 = 440.0;
const MARGIN: f64 = 60.0;
const COLORS: [&str; 3] = ["#1f77b4", "#d62728", "#2ca02c"];

fn values(profile: &FrequencyProfile, s: Series) -> Vec<Option<f64>> {
    match s {
        Series::I => profile.i.iter().map(|v| Some(*v)).collect(),
        Series::D => profile.d.iter().map(|v| Some(*v)).collect(),
        Series::F => profile.f.clone(),
    }
}

fn padded(lo: f64, hi: f64) -> (f64, f64) {
    if hi > lo {
        (lo, hi)
    } else {
        let pad = 0.5 * lo.abs().max(1.0);
        (lo - pad, hi + pad)
    }
}

/// SVG with `r` on the horizontal axis and one polyline per run of defined
/// values; an isolated defined value becomes a marker.
pub fn render_svg(profile: &FrequencyProfile, series: &[Series]) -> String {
    let data: Vec<(Series, Vec<Option<f64>>)> = series
        .iter()
        .map(|s| (*s, values(profile, *s).into_iter().map(|v| v.filter(|x| x.is_finite())).collect()))
        .collect();
    let (x0, x1) = padded(
        profile.radii.iter().cloned().fold(f64::INFINITY, f64::min),
        profile.radii.iter().cloned().fold(f64::NEG_INFINITY, f64::max),
    );
    let ys = data.iter().flat_map(|(_, v)| v.iter().flatten().cloned());
    let (lo, hi) = ys.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), y| (a.min(y), b.max(y)));
    let (y0, y1) = if lo.is_finite() { padded(lo, hi) } else { (0.0, 1.0) };
    let sx = |x: f64| MARGIN + (x - x0) / (x1 - x0) * (WIDTH - 2.0 * MARGIN);
    let sy = |y: f64| HEIGHT - MARGIN - (y - y0) / (y1 - y0) * (HEIGHT - 2.0 * MARGIN);

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}">"#
    );
    let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let (left, right, top, bottom) = (MARGIN, WIDTH - MARGIN, MARGIN, HEIGHT - MARGIN);
    let _ = writeln!(
        s,
        r#"<path class="axes" d="M{left},{top} L{left},{bottom} L{right},{bottom}" stroke="black" fill="none"/>"#
    );
    for k in 0..=4 {
        let t = k as f64 / 4.0;
        let (xv, yv) = (x0 + t * (x1 - x0), y0 + t * (y1 - y0));
        let _ = writeln!(
            s,
            r#"<text x="{:.2}" y="{:.2}" font-size="11" text-anchor="middle">{xv:.3}</text>"#,
            sx(xv),
            bottom + 16.0
        );
        let _ = writeln!(
            s,
            r#"<text x="{:.2}" y="{:.2}" font-size="11" text-anchor="end">{yv:.3e}</text>"#,
            left - 6.0,
            sy(yv) + 4.0
        );
    }
    let _ = writeln!(
        s,
        r#"<text x="{:.2}" y="{:.2}" font-size="13" text-anchor="middle">r</text>"#,
        0.5 * (left + right),
        HEIGHT - 12.0
    );
    for (n, (series, vals)) in data.iter().enumerate() {
        let color = COLORS[n % COLORS.len()];
        let label = series.label();
        let mut runs: Vec<Vec<(f64, f64)>> = vec![Vec::new()];
        for (r, v) in profile.radii.iter().zip(vals) {
            match v {
                Some(y) => runs.last_mut().unwrap().push((sx(*r), sy(*y))),
                None if runs.last().is_some_and(|run| !run.is_empty()) => runs.push(Vec::new()),
                None => {}
            }
        }
        for run in runs.iter().filter(|r| !r.is_empty()) {
            if let [(x, y)] = run.as_slice() {
                let _ = writeln!(
                    s,
                    r#"<circle class="series-{label}" cx="{x:.2}" cy="{y:.2}" r="3" fill="{color}"/>"#
                );
            } else {
                let pts: Vec<String> = run.iter().map(|(x, y)| format!("{x:.2},{y:.2}")).collect();
                let _ = writeln!(
                    s,
                    r#"<polyline class="series-{label}" points="{}" stroke="{color}" fill="none" stroke-width="1.5"/>"#,
                    pts.join(" ")
                );
            }
        }
        let _ = writeln!(
            s,
            r#"<text x="{:.2}" y="{:.2}" font-size="12" fill="{color}">{label}</text>"#,
            right - 40.0,
            top + 16.0 * (n as f64 + 1.0)
        );
    }
    s.push_str("</svg>\n");
    s
}

pub fn emit_plot(profile: &FrequencyProfile, series: &[Series], path: &Path) -> Result<(), CliError> {
    if profile.is_empty() {
        return Err(CliError::Config("cannot plot an empty profile".into()));
    }
    std::fs::write(path, render_svg(profile, series)).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
}
