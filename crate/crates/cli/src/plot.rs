//! Plot-ready output: whitespace-separated data files for gnuplot and a
//! small hand-written SVG chart for rate studies.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use kac_core::io::write_atomic;
use kac_core::{CharGrid64, RateReport, Result};

/// Writes `<name>.dat` and, when `svg` is set, `<name>.svg`. An empty report
/// writes nothing and warns on stderr.
pub fn emit_rate_plot(
    report: &RateReport,
    dir: &Path,
    name: &str,
    svg: bool,
) -> Result<Vec<PathBuf>> {
    if report.t_grid.is_empty() {
        eprintln!("warning: empty rate report, no plot data written");
        return Ok(Vec::new());
    }
    let fmt = |v: Option<f64>| match v {
        Some(x) if x.is_finite() => format!("{x:.8e}"),
        _ => "NaN".to_string(),
    };
    let mut dat = String::from("# t distance min_sigma_distance dkw bound_general bound_be\n");
    for i in 0..report.t_grid.len() {
        let _ = writeln!(
            dat,
            "{} {} {} {} {} {}",
            report.t_grid[i],
            fmt(Some(report.distances[i])),
            fmt(Some(report.min_sigma_distances[i])),
            fmt(Some(report.dkw_half_width)),
            fmt(report.bound_general[i]),
            fmt(report.bound_berry_esseen[i])
        );
    }
    let mut written = Vec::new();
    let dat_path = dir.join(format!("{name}.dat"));
    write_atomic(&dat_path, dat.as_bytes())?;
    written.push(dat_path);
    if svg {
        let svg_path = dir.join(format!("{name}.svg"));
        write_atomic(&svg_path, rate_svg(report).as_bytes())?;
        written.push(svg_path);
    }
    Ok(written)
}

/// `ξ Re Im` columns, one block per grid, blocks separated by two blank
/// lines (gnuplot `index`).
pub fn emit_grid_plot(
    grids: &[(&str, &CharGrid64)],
    dir: &Path,
    name: &str,
) -> Result<Vec<PathBuf>> {
    if grids.is_empty() {
        eprintln!("warning: no grids, no plot data written");
        return Ok(Vec::new());
    }
    let mut dat = String::new();
    for (b, (label, grid)) in grids.iter().enumerate() {
        if b > 0 {
            dat.push_str("\n\n");
        }
        let _ = writeln!(dat, "# {label}\n# xi re im");
        for (k, v) in grid.values().iter().enumerate() {
            let _ = writeln!(dat, "{:.10e} {:.15e} {:.15e}", grid.xi(k), v.re, v.im);
        }
    }
    let path = dir.join(format!("{name}.dat"));
    write_atomic(&path, dat.as_bytes())?;
    Ok(vec![path])
}

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 400.0;
const MARGIN: f64 = 56.0;

/// Distance and the tightest available bound against `t`, log-scaled `y`,
/// with the DKW half-width as a dashed reference line.
pub fn rate_svg(report: &RateReport) -> String {
    let bound: Vec<Option<f64>> = report
        .bound_general
        .iter()
        .zip(&report.bound_berry_esseen)
        .map(|(g, b)| match (g, b) {
            (Some(g), Some(b)) => Some(g.min(*b)),
            (g, b) => g.or(*b),
        })
        .collect();
    let distance: Vec<Option<f64>> = report
        .distances
        .iter()
        .zip(&report.min_sigma_distances)
        .map(|(&d, &m)| Some(if d.is_finite() { d } else { m }))
        .collect();
    let positive = distance
        .iter()
        .chain(&bound)
        .flatten()
        .copied()
        .chain([report.dkw_half_width])
        .filter(|v| *v > 0.0 && v.is_finite());
    let (lo, hi) = positive.fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), v| {
        (l.min(v), h.max(v))
    });
    let (y_lo, y_hi) = (
        lo.log10().floor(),
        hi.log10().ceil().max(lo.log10().floor() + 1.0),
    );
    let t0 = report.t_grid[0];
    let t1 = *report.t_grid.last().expect("nonempty");
    let span = if t1 > t0 { t1 - t0 } else { 1.0 };
    let px = |t: f64| MARGIN + (t - t0) / span * (WIDTH - 2.0 * MARGIN);
    let py =
        |v: f64| HEIGHT - MARGIN - (v.log10() - y_lo) / (y_hi - y_lo) * (HEIGHT - 2.0 * MARGIN);

    let mut out = String::new();
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="11">"#
    );
    let _ = writeln!(out, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(
        out,
        r#"<path class="axis" d="M{m} {m} V{b} H{r}" stroke="black" fill="none"/>"#,
        m = MARGIN,
        b = HEIGHT - MARGIN,
        r = WIDTH - MARGIN
    );
    let mut decade = y_lo as i32;
    while decade <= y_hi as i32 {
        let y = py(10f64.powi(decade));
        let _ = writeln!(
            out,
            r##"<path d="M{MARGIN} {y:.1} H{:.1}" stroke="#ddd"/><text x="{:.1}" y="{:.1}" text-anchor="end">1e{decade}</text>"##,
            WIDTH - MARGIN,
            MARGIN - 4.0,
            y + 4.0
        );
        decade += 1;
    }
    for &t in &report.t_grid {
        let _ = writeln!(
            out,
            r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">{t}</text>"#,
            px(t),
            HEIGHT - MARGIN + 16.0
        );
    }
    let _ = writeln!(
        out,
        r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">t</text>"#,
        WIDTH / 2.0,
        HEIGHT - 12.0
    );
    let floor = py(report.dkw_half_width);
    let _ = writeln!(
        out,
        r##"<path class="floor" d="M{MARGIN} {floor:.1} H{:.1}" stroke="#888" stroke-dasharray="4 3"/>"##,
        WIDTH - MARGIN
    );
    for (label, series, colour) in [
        ("distance", &distance, "#1f77b4"),
        ("bound", &bound, "#d62728"),
    ] {
        let mut d = String::new();
        for (&t, v) in report.t_grid.iter().zip(series.iter()) {
            if let Some(v) = v.filter(|v| *v > 0.0 && v.is_finite()) {
                let cmd = if d.is_empty() { 'M' } else { 'L' };
                let _ = write!(d, "{cmd}{:.1} {:.1} ", px(t), py(v));
            }
        }
        if !d.is_empty() {
            let _ = writeln!(
                out,
                r#"<path class="curve" data-label="{label}" d="{}" stroke="{colour}" fill="none" stroke-width="1.5"/>"#,
                d.trim_end()
            );
        }
    }
    let _ = writeln!(
        out,
        r##"<text x="{:.1}" y="{:.1}" fill="#1f77b4">distance</text><text x="{:.1}" y="{:.1}" fill="#d62728">bound</text>"##,
        WIDTH - MARGIN - 120.0,
        MARGIN - 12.0,
        WIDTH - MARGIN - 50.0,
        MARGIN - 12.0
    );
    out.push_str("</svg>\n");
    out
}
