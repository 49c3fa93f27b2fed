//! Minimal static SVG rendering of summary and diagnostic plot data.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::summaries::{FitSummary, GlobalTest};

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn save(path: &Path, svg: String) -> Result<()> {
    std::fs::write(path, svg).map_err(|e| Error::io(path, e))
}

/// Grouped bar chart: one group per covariate, one bar per cluster count.
pub fn global_bars(title: &str, tests: &[GlobalTest]) -> String {
    let (w, h, pad) = (120.0 * tests.len().max(1) as f64 + 80.0, 260.0, 40.0);
    let mut s = format!(r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" font-family="sans-serif" font-size="11">"#);
    let _ = write!(s, r#"<text x="{}" y="16" text-anchor="middle">{}</text>"#, w / 2.0, escape(title));
    let base = h - pad;
    let span = base - 30.0;
    for (g, t) in tests.iter().enumerate() {
        let x0 = pad + g as f64 * 120.0;
        let bw = 100.0 / t.probs.len().max(1) as f64;
        for (k, &p) in t.probs.iter().enumerate() {
            let bh = p * span;
            let shade = 60 + (140 * k / t.probs.len().max(1)) as u32;
            let _ = write!(
                s,
                r#"<rect x="{:.1}" y="{:.1}" width="{:.1}" height="{:.1}" fill="rgb({shade},{shade},220)"><title>{} clusters: {p:.3}</title></rect>"#,
                x0 + k as f64 * bw,
                base - bh,
                bw - 2.0,
                bh,
                k + 1
            );
            let _ = write!(s, r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">{}</text>"#, x0 + (k as f64 + 0.5) * bw, base + 12.0, k + 1);
        }
        let _ = write!(s, r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">{}</text>"#, x0 + 50.0, base + 28.0, escape(&t.covariate));
    }
    s.push_str("</svg>\n");
    s
}

/// Heatmap of a `[row][col]` matrix with values in [0, 1].
pub fn heatmap(title: &str, labels: &[String], m: &[Vec<f64>]) -> String {
    let n = labels.len() as f64;
    let cell = 40.0;
    let (w, h) = (cell * n + 80.0, cell * n + 70.0);
    let mut s = format!(r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" font-family="sans-serif" font-size="11">"#);
    let _ = write!(s, r#"<text x="{}" y="16" text-anchor="middle">{}</text>"#, w / 2.0, escape(title));
    for (i, row) in m.iter().enumerate() {
        for (j, &v) in row.iter().enumerate() {
            let c = (255.0 * (1.0 - v.clamp(0.0, 1.0))) as u32;
            let (x, y) = (50.0 + j as f64 * cell, 30.0 + i as f64 * cell);
            let _ = write!(s, r#"<rect x="{x}" y="{y}" width="{cell}" height="{cell}" fill="rgb(255,{c},{c})"/>"#);
            let _ = write!(s, r#"<text x="{}" y="{}" text-anchor="middle">{v:.2}</text>"#, x + cell / 2.0, y + cell / 2.0 + 4.0);
        }
    }
    for (i, l) in labels.iter().enumerate() {
        let _ = write!(s, r#"<text x="44" y="{}" text-anchor="end">{}</text>"#, 30.0 + (i as f64 + 0.5) * cell + 4.0, escape(l));
        let _ = write!(s, r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#, 50.0 + (i as f64 + 0.5) * cell, 30.0 + n * cell + 14.0, escape(l));
    }
    s.push_str("</svg>\n");
    s
}

/// Line plot of a series against its index.
pub fn line(title: &str, ys: &[f64]) -> String {
    let (w, h, pad) = (600.0, 220.0, 40.0);
    let lo = ys.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = ys.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let range = if hi > lo { hi - lo } else { 1.0 };
    let n = ys.len().max(2) as f64 - 1.0;
    let pts: Vec<String> = ys
        .iter()
        .enumerate()
        .map(|(i, &y)| format!("{:.2},{:.2}", pad + i as f64 / n * (w - 2.0 * pad), h - pad - (y - lo) / range * (h - 2.0 * pad)))
        .collect();
    format!(
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" font-family="sans-serif" font-size="11"><text x="{}" y="16" text-anchor="middle">{}</text><text x="4" y="{}">{lo:.3}</text><text x="4" y="{}">{hi:.3}</text><polyline fill="none" stroke="steelblue" points="{}"/></svg>
"#,
        w / 2.0,
        escape(title),
        h - pad,
        pad,
        pts.join(" ")
    )
}

/// Writes SVG figures for a summary into `dir`.
pub fn render_summary(summary: &FitSummary, dir: impl AsRef<Path>) -> Result<()> {
    let dir = dir.as_ref();
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    if !summary.trans_global.is_empty() {
        save(&dir.join("global_trans.svg"), global_bars("Transitions: number of clusters", &summary.trans_global))?;
    }
    if let Some(g) = &summary.dur_global {
        save(&dir.join("global_dur.svg"), global_bars("Durations: number of clusters", g))?;
    }
    for (i, (m, sd)) in summary.trans_probs_mean.iter().zip(&summary.trans_probs_sd).enumerate() {
        let tag = m.levels.join(", ");
        save(&dir.join(format!("mean_{}.svg", i + 1)), heatmap(&format!("Posterior mean ({tag})"), &summary.state_labels, &m.matrix))?;
        save(&dir.join(format!("sd_{}.svg", i + 1)), heatmap(&format!("Posterior sd ({tag})"), &summary.state_labels, &sd.matrix))?;
    }
    Ok(())
}

/// Writes an SVG trace plot.
pub fn render_trace(path: impl AsRef<Path>, title: &str, series: &[f64]) -> Result<()> {
    save(path.as_ref(), line(title, series))
}
