//! Minimal SVG line plots of sweep reports.

use std::collections::BTreeMap;
use std::fmt::Write;

use anyhow::{bail, Context};

const W: f64 = 640.0;
const H: f64 = 400.0;
const MARGIN: f64 = 60.0;
const COLORS: [&str; 6] = [
    "#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b",
];

/// Plots `mean_e_x` against the first key column, one line per value of the
/// second key column when there is one. Non-numeric keys are placed at
/// their row index.
pub fn sweep_svg(title: &str, csv: &str) -> anyhow::Result<String> {
    let mut lines = csv.lines();
    let header: Vec<&str> = lines.next().context("empty report")?.split(',').collect();
    let y_col = header
        .iter()
        .position(|h| *h == "mean_e_x")
        .context("report has no mean_e_x column")?;
    if y_col == 0 {
        bail!("report has no key column");
    }
    let mut series: BTreeMap<String, Vec<(f64, f64)>> = BTreeMap::new();
    let mut labels = Vec::new();
    for (row, line) in lines.enumerate() {
        let cells: Vec<&str> = line.split(',').collect();
        let x = cells[0].parse::<f64>().unwrap_or(row as f64);
        labels.push((x, cells[0].to_string()));
        let y: f64 = cells[y_col].parse().context("non-numeric mean_e_x")?;
        let name = if y_col > 1 {
            format!("{}={}", header[1], cells[1])
        } else {
            header[y_col].to_string()
        };
        series.entry(name).or_default().push((x, y));
    }
    let pts: Vec<(f64, f64)> = series
        .values()
        .flatten()
        .copied()
        .filter(|p| p.1.is_finite())
        .collect();
    if pts.is_empty() {
        bail!("nothing to plot");
    }
    let (x0, x1) = span(pts.iter().map(|p| p.0));
    let (_, y1) = span(pts.iter().map(|p| p.1));
    let y0 = 0.0f64.min(span(pts.iter().map(|p| p.1)).0);
    let sx = |x: f64| MARGIN + (x - x0) / (x1 - x0) * (W - 2.0 * MARGIN);
    let sy = |y: f64| H - MARGIN - (y - y0) / (y1 - y0) * (H - 2.0 * MARGIN);

    let mut s = String::new();
    writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" font-family="sans-serif" font-size="12">"#
    )?;
    writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#)?;
    writeln!(
        s,
        r#"<text x="{}" y="24" text-anchor="middle" font-size="16">{title}</text>"#,
        W / 2.0
    )?;
    writeln!(
        s,
        r#"<path d="M{m} {t} L{m} {b} L{r} {b}" stroke="black" fill="none"/>"#,
        m = MARGIN,
        t = MARGIN,
        b = H - MARGIN,
        r = W - MARGIN
    )?;
    labels.dedup_by(|a, b| a.1 == b.1);
    for (x, label) in &labels {
        writeln!(
            s,
            r#"<text x="{:.1}" y="{}" text-anchor="middle">{label}</text>"#,
            sx(*x),
            H - MARGIN + 18.0
        )?;
    }
    for k in 0..=4 {
        let y = y0 + (y1 - y0) * k as f64 / 4.0;
        writeln!(
            s,
            r#"<text x="{}" y="{:.1}" text-anchor="end">{:.3}</text>"#,
            MARGIN - 6.0,
            sy(y) + 4.0,
            y
        )?;
    }
    writeln!(
        s,
        r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#,
        W / 2.0,
        H - 16.0,
        header[0]
    )?;
    writeln!(
        s,
        r#"<text x="16" y="{}" transform="rotate(-90 16 {})" text-anchor="middle">mean_e_x</text>"#,
        H / 2.0,
        H / 2.0
    )?;
    for (i, (name, pts)) in series.iter().enumerate() {
        let color = COLORS[i % COLORS.len()];
        let path: Vec<String> = pts
            .iter()
            .filter(|p| p.1.is_finite())
            .map(|&(x, y)| format!("{:.1},{:.1}", sx(x), sy(y)))
            .collect();
        writeln!(
            s,
            r#"<polyline points="{}" stroke="{color}" fill="none" stroke-width="2"/>"#,
            path.join(" ")
        )?;
        for p in &path {
            let (x, y) = p.split_once(',').expect("formatted point");
            writeln!(s, r#"<circle cx="{x}" cy="{y}" r="3" fill="{color}"/>"#)?;
        }
        writeln!(
            s,
            r#"<text x="{}" y="{}" fill="{color}">{name}</text>"#,
            W - MARGIN + 4.0 - 120.0,
            MARGIN + 16.0 * i as f64
        )?;
    }
    s += "</svg>\n";
    Ok(s)
}

fn span(it: impl Iterator<Item = f64>) -> (f64, f64) {
    let (lo, hi) = it.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| {
        (lo.min(v), hi.max(v))
    });
    if hi > lo {
        (lo, hi)
    } else {
        (lo - 0.5, hi + 0.5)
    }
}
