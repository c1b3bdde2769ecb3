//! Minimal deterministic log–log SVG plots.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{invalid, Error, Result};
use crate::stats::{loglog_slope, SlopeFit};

#[derive(Debug, Clone, PartialEq)]
pub struct Series {
    pub label: String,
    pub x: Vec<f64>,
    pub y: Vec<f64>,
}

const W: f64 = 640.0;
const H: f64 = 440.0;
const MARGIN: f64 = 70.0;
const COLOURS: [&str; 4] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd"];

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Scatter of each series on log–log axes, with the fitted line `ln y = a + b ln x` when given.
/// Empty series are skipped; non-positive points are dropped.
pub fn loglog_svg(title: &str, xlabel: &str, ylabel: &str, series: &[Series], fit: Option<&SlopeFit>) -> Result<String> {
    let pts: Vec<Vec<(f64, f64)>> = series
        .iter()
        .map(|s| {
            if s.x.len() != s.y.len() {
                return Err(invalid(format!("series `{}` has mismatched lengths", s.label)));
            }
            Ok(s.x.iter().zip(&s.y).filter(|(x, y)| **x > 0.0 && **y > 0.0).map(|(x, y)| (x.ln(), y.ln())).collect())
        })
        .collect::<Result<_>>()?;
    let all: Vec<(f64, f64)> = pts.iter().flatten().copied().collect();
    if all.is_empty() {
        return Err(invalid("nothing to plot"));
    }
    let (mut x0, mut x1, mut y0, mut y1) = all.iter().fold((f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY), |a, p| {
        (a.0.min(p.0), a.1.max(p.0), a.2.min(p.1), a.3.max(p.1))
    });
    if x1 - x0 < 1e-12 {
        x0 -= 0.5;
        x1 += 0.5;
    }
    if y1 - y0 < 1e-12 {
        y0 -= 0.5;
        y1 += 0.5;
    }
    let pad_x = 0.05 * (x1 - x0);
    let pad_y = 0.05 * (y1 - y0);
    let (x0, x1, y0, y1) = (x0 - pad_x, x1 + pad_x, y0 - pad_y, y1 + pad_y);
    let sx = |x: f64| MARGIN + (x - x0) / (x1 - x0) * (W - 2.0 * MARGIN);
    let sy = |y: f64| H - MARGIN - (y - y0) / (y1 - y0) * (H - 2.0 * MARGIN);

    let mut out = String::new();
    let _ = writeln!(out, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}">"#);
    let _ = writeln!(out, r#"<rect width="{W}" height="{H}" fill="white"/>"#);
    let _ = writeln!(out, r#"<text x="{:.2}" y="30" text-anchor="middle" font-size="15">{}</text>"#, W / 2.0, escape(title));
    let _ = writeln!(
        out,
        r#"<rect x="{MARGIN}" y="{MARGIN}" width="{:.2}" height="{:.2}" fill="none" stroke="black"/>"#,
        W - 2.0 * MARGIN,
        H - 2.0 * MARGIN
    );
    for k in 0..=4 {
        let fx = x0 + (x1 - x0) * k as f64 / 4.0;
        let fy = y0 + (y1 - y0) * k as f64 / 4.0;
        let _ = writeln!(out, r#"<text x="{:.2}" y="{:.2}" text-anchor="middle" font-size="11">{:.3e}</text>"#, sx(fx), H - MARGIN + 18.0, fx.exp());
        let _ = writeln!(out, r#"<text x="{:.2}" y="{:.2}" text-anchor="end" font-size="11">{:.3e}</text>"#, MARGIN - 6.0, sy(fy) + 4.0, fy.exp());
    }
    let _ = writeln!(out, r#"<text x="{:.2}" y="{:.2}" text-anchor="middle" font-size="13">{} (log)</text>"#, W / 2.0, H - 20.0, escape(xlabel));
    let _ = writeln!(
        out,
        r#"<text x="18" y="{:.2}" text-anchor="middle" font-size="13" transform="rotate(-90 18 {:.2})">{} (log)</text>"#,
        H / 2.0,
        H / 2.0,
        escape(ylabel)
    );
    for (i, (s, p)) in series.iter().zip(&pts).enumerate() {
        if p.is_empty() {
            continue;
        }
        let c = COLOURS[i % COLOURS.len()];
        for &(x, y) in p {
            let _ = writeln!(out, r#"<circle cx="{:.2}" cy="{:.2}" r="4" fill="{c}"/>"#, sx(x), sy(y));
        }
        let _ = writeln!(out, r#"<text x="{:.2}" y="{:.2}" font-size="12" fill="{c}">{}</text>"#, W - MARGIN - 150.0, MARGIN + 18.0 * (i as f64 + 1.0), escape(&s.label));
    }
    if let Some(f) = fit {
        let xa = x0 + pad_x;
        let xb = x1 - pad_x;
        let _ = writeln!(
            out,
            r#"<line x1="{:.2}" y1="{:.2}" x2="{:.2}" y2="{:.2}" stroke="black" stroke-dasharray="6 4"/>"#,
            sx(xa),
            sy(f.intercept + f.slope * xa),
            sx(xb),
            sy(f.intercept + f.slope * xb)
        );
        let _ = writeln!(
            out,
            r#"<text x="{:.2}" y="{:.2}" font-size="13">slope = {:.3} ± {:.3}</text>"#,
            MARGIN + 10.0,
            MARGIN + 20.0,
            f.slope,
            f.slope_se
        );
    }
    out.push_str("</svg>\n");
    Ok(out)
}

/// Reads a report CSV (lines starting with `#` are comments) and plots `y_cols` against `x_col`
/// with a fit of the first y column.
pub fn plot_csv(path: &Path, x_col: &str, y_cols: &[&str]) -> Result<String> {
    let mut reader = csv::ReaderBuilder::new().comment(Some(b'#')).from_path(path)?;
    let header = reader.headers()?.clone();
    let index = |name: &str| header.iter().position(|h| h == name).ok_or_else(|| Error::Parse(format!("column `{name}` not found")));
    let xi = index(x_col)?;
    let yis = y_cols.iter().map(|c| index(c)).collect::<Result<Vec<_>>>()?;
    let mut x = Vec::new();
    let mut ys = vec![Vec::new(); yis.len()];
    for rec in reader.records() {
        let rec = rec?;
        let num = |i: usize| rec[i].trim().parse::<f64>().map_err(|e| Error::Parse(format!("{}: {e}", &rec[i])));
        x.push(num(xi)?);
        for (y, &i) in ys.iter_mut().zip(&yis) {
            y.push(num(i)?);
        }
    }
    let series: Vec<Series> = y_cols.iter().zip(ys).map(|(c, y)| Series { label: c.to_string(), x: x.clone(), y }).collect();
    let fit = series.first().and_then(|s| {
        let (fx, fy): (Vec<f64>, Vec<f64>) = s.x.iter().zip(&s.y).filter(|(a, b)| **a > 0.0 && **b > 0.0).map(|(a, b)| (*a, *b)).unzip();
        loglog_slope(&fx, &fy).ok()
    });
    let title = path.file_stem().and_then(|s| s.to_str()).unwrap_or("report");
    loglog_svg(title, x_col, y_cols.first().copied().unwrap_or(""), &series, fit.as_ref())
}
