//! Minimal self-contained SVG line plots of trace columns.

use std::fmt::Write as _;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::formats::TraceTable;

const WIDTH: f64 = 720.0;
const HEIGHT: f64 = 440.0;
const LEFT: f64 = 80.0;
const RIGHT: f64 = 20.0;
const TOP: f64 = 36.0;
const BOTTOM: f64 = 48.0;
/// Points kept per polyline; longer traces are strided.
const MAX_POINTS: usize = 2000;

const PALETTE: [&str; 8] =
    ["#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b", "#e377c2", "#17becf"];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Series {
    Residual,
    Cost,
    FeasGap,
    States,
    Momenta,
}

impl Series {
    pub fn name(self) -> &'static str {
        match self {
            Self::Residual => "residual",
            Self::Cost => "cost",
            Self::FeasGap => "feas_gap",
            Self::States => "states",
            Self::Momenta => "momenta",
        }
    }
}

impl FromStr for Series {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "residual" => Self::Residual,
            "cost" | "F" => Self::Cost,
            "feas_gap" => Self::FeasGap,
            "states" | "x" => Self::States,
            "momenta" | "y" => Self::Momenta,
            _ => {
                return Err(Error::config(format!(
                    "unknown series `{s}` (expected residual, cost, feas_gap, states or momenta)"
                )))
            }
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlotSpec {
    pub series: Series,
    pub log_scale: bool,
    pub title: String,
}

struct Line {
    label: String,
    color: &'static str,
    dashed: bool,
    values: Vec<f64>,
}

fn lines_for(table: &TraceTable, series: Series) -> Result<Vec<Line>> {
    let single = |col: &str| -> Result<Vec<Line>> {
        let values = table
            .column(col)
            .ok_or_else(|| Error::config(format!("trace has no `{col}` column")))?;
        Ok(vec![Line { label: col.into(), color: PALETTE[0], dashed: false, values }])
    };
    let family = |prefix: &str, with_mean: bool| -> Result<Vec<Line>> {
        let cols = table.family(prefix);
        if cols.is_empty() {
            return Err(Error::config(format!("trace has no `{prefix}_*` columns")));
        }
        let mut lines: Vec<Line> = Vec::new();
        if with_mean {
            let rows = cols[0].len();
            let mean = (0..rows)
                .map(|r| cols.iter().map(|c| c[r]).sum::<f64>() / cols.len() as f64)
                .collect();
            lines.push(Line { label: "average".into(), color: "#000000", dashed: true, values: mean });
        }
        for (i, values) in cols.into_iter().enumerate() {
            lines.insert(
                i,
                Line {
                    label: format!("{prefix}_{i}"),
                    color: PALETTE[i % PALETTE.len()],
                    dashed: false,
                    values,
                },
            );
        }
        Ok(lines)
    };
    match series {
        Series::Residual => single("residual"),
        Series::Cost => single("F"),
        Series::FeasGap => single("feas_gap"),
        Series::States => family("x", true),
        Series::Momenta => family("y", false),
    }
}

/// Tick positions covering `[lo, hi]`.
fn linear_ticks(lo: f64, hi: f64) -> Vec<f64> {
    let span = hi - lo;
    let raw = span / 5.0;
    let mag = 10f64.powf(raw.log10().floor());
    let step = [1.0, 2.0, 5.0, 10.0].iter().map(|m| m * mag).find(|s| *s >= raw).unwrap_or(10.0 * mag);
    let first = (lo / step).ceil() as i64;
    let last = (hi / step).floor() as i64;
    (first..=last).map(|i| i as f64 * step).collect()
}

fn tick_label(v: f64) -> String {
    if v == 0.0 {
        "0".into()
    } else if (1e-3..1e5).contains(&v.abs()) {
        let s = format!("{v:.4}");
        s.trim_end_matches('0').trim_end_matches('.').to_owned()
    } else {
        format!("{v:.1e}")
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Renders one series of a trace. Log scale drops nonpositive values.
pub fn render(table: &TraceTable, spec: &PlotSpec) -> Result<String> {
    if table.rows.is_empty() {
        return Err(Error::config("trace has no rows to plot"));
    }
    let ks = table.column("k").ok_or_else(|| Error::config("trace has no `k` column"))?;
    let lines = lines_for(table, spec.series)?;

    let tf = |v: f64| if spec.log_scale { v.log10() } else { v };
    let keep = |v: f64| v.is_finite() && (!spec.log_scale || v > 0.0);

    let (mut ylo, mut yhi) = (f64::INFINITY, f64::NEG_INFINITY);
    for l in &lines {
        for &v in l.values.iter().filter(|v| keep(**v)) {
            ylo = ylo.min(tf(v));
            yhi = yhi.max(tf(v));
        }
    }
    if !ylo.is_finite() {
        // nothing plottable; draw an empty frame
        (ylo, yhi) = (0.0, 1.0);
    }
    if yhi - ylo < 1e-12 * (1.0 + ylo.abs()) {
        let pad = if ylo == 0.0 { 1.0 } else { 0.5 * ylo.abs() };
        (ylo, yhi) = if spec.log_scale { (ylo - 1.0, yhi + 1.0) } else { (ylo - pad, yhi + pad) };
    }
    let (klo, mut khi) = (ks[0], ks[ks.len() - 1]);
    if khi <= klo {
        khi = klo + 1.0;
    }

    let pw = WIDTH - LEFT - RIGHT;
    let ph = HEIGHT - TOP - BOTTOM;
    let px = |k: f64| LEFT + (k - klo) / (khi - klo) * pw;
    let py = |v: f64| TOP + (yhi - v) / (yhi - ylo) * ph;

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="11">"#
    );
    let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<text x="{:.1}" y="20" text-anchor="middle" font-size="14">{}</text>"#,
        WIDTH / 2.0,
        escape(&spec.title)
    );
    let _ = writeln!(
        s,
        r##"<rect x="{LEFT}" y="{TOP}" width="{pw}" height="{ph}" fill="none" stroke="#444"/>"##
    );

    let yticks: Vec<f64> = if spec.log_scale {
        let (a, b) = (ylo.ceil() as i64, yhi.floor() as i64);
        let stride = ((b - a) / 8).max(1);
        (a..=b).step_by(stride as usize).map(|e| e as f64).collect()
    } else {
        linear_ticks(ylo, yhi)
    };
    for t in yticks {
        let y = py(t);
        let label = if spec.log_scale { format!("1e{}", t as i64) } else { tick_label(t) };
        let _ = writeln!(
            s,
            r##"<line x1="{LEFT}" y1="{y:.2}" x2="{:.2}" y2="{y:.2}" stroke="#ddd"/><text x="{:.1}" y="{:.2}" text-anchor="end">{label}</text>"##,
            LEFT + pw,
            LEFT - 6.0,
            y + 4.0
        );
    }
    for t in linear_ticks(klo, khi) {
        let x = px(t);
        let _ = writeln!(
            s,
            r##"<line x1="{x:.2}" y1="{:.2}" x2="{x:.2}" y2="{:.2}" stroke="#444"/><text x="{x:.2}" y="{:.2}" text-anchor="middle">{}</text>"##,
            TOP + ph,
            TOP + ph + 5.0,
            TOP + ph + 18.0,
            tick_label(t)
        );
    }
    let _ = writeln!(
        s,
        r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">round k</text>"#,
        LEFT + pw / 2.0,
        HEIGHT - 8.0
    );

    let stride = ks.len().div_ceil(MAX_POINTS).max(1);
    for l in &lines {
        let mut pts = String::new();
        let mut segments = Vec::new();
        for (r, (&k, &v)) in ks.iter().zip(&l.values).enumerate() {
            if r % stride != 0 && r + 1 != ks.len() {
                continue;
            }
            if keep(v) {
                let _ = write!(pts, "{:.2},{:.2} ", px(k), py(tf(v)));
            } else if !pts.is_empty() {
                segments.push(std::mem::take(&mut pts));
            }
        }
        if !pts.is_empty() {
            segments.push(pts);
        }
        let dash = if l.dashed { r#" stroke-dasharray="6 4""# } else { "" };
        for seg in segments {
            let _ = writeln!(
                s,
                r#"<polyline fill="none" stroke="{}" stroke-width="1.2"{dash} points="{}"><title>{}</title></polyline>"#,
                l.color,
                seg.trim_end(),
                escape(&l.label)
            );
        }
    }

    // legend only when it stays readable
    if lines.len() <= 12 {
        for (i, l) in lines.iter().enumerate() {
            let y = TOP + 14.0 + 14.0 * i as f64;
            let x = LEFT + pw - 110.0;
            let dash = if l.dashed { r#" stroke-dasharray="6 4""# } else { "" };
            let _ = writeln!(
                s,
                r#"<line x1="{x:.1}" y1="{:.1}" x2="{:.1}" y2="{:.1}" stroke="{}" stroke-width="2"{dash}/><text x="{:.1}" y="{:.1}">{}</text>"#,
                y - 4.0,
                x + 20.0,
                y - 4.0,
                l.color,
                x + 26.0,
                y,
                escape(&l.label)
            );
        }
    }
    s.push_str("</svg>\n");
    Ok(s)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn table(rows: usize) -> TraceTable {
        let headers = ["k", "F", "residual", "feas_gap", "x_0", "x_1", "y_0", "y_1"]
            .map(String::from)
            .to_vec();
        let rows = (0..rows)
            .map(|k| {
                let k = k as f64;
                vec![k, 1.0, (-k).exp(), 0.0, 1.0 + k, 3.0 - k, 0.5, -0.5]
            })
            .collect();
        TraceTable { headers, rows }
    }

    fn spec(series: Series, log_scale: bool) -> PlotSpec {
        PlotSpec { series, log_scale, title: "t".into() }
    }

    #[test]
    fn renders_every_series() {
        let t = table(50);
        for s in [Series::Residual, Series::Cost, Series::FeasGap, Series::States, Series::Momenta] {
            let svg = render(&t, &spec(s, false)).unwrap();
            assert!(svg.starts_with("<svg") && svg.ends_with("</svg>\n"));
            assert!(svg.contains("<polyline"));
        }
        assert!(render(&t, &spec(Series::States, false)).unwrap().contains("average"));
    }

    #[test]
    fn log_scale_skips_nonpositive_values() {
        let t = table(10);
        // feas_gap is all zero: an empty frame, not an error
        let svg = render(&t, &spec(Series::FeasGap, true)).unwrap();
        assert!(!svg.contains("<polyline"));
        let svg = render(&t, &spec(Series::Residual, true)).unwrap();
        assert!(svg.contains("1e-"));
    }

    #[test]
    fn single_row_and_empty_tables() {
        assert!(render(&table(1), &spec(Series::Residual, true)).is_ok());
        assert!(render(&table(0), &spec(Series::Residual, false)).is_err());
    }

    #[test]
    fn rendering_is_deterministic() {
        let t = table(5000);
        let a = render(&t, &spec(Series::States, false)).unwrap();
        let b = render(&t, &spec(Series::States, false)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn series_names_parse() {
        assert_eq!("x".parse::<Series>().unwrap(), Series::States);
        assert!("bogus".parse::<Series>().is_err());
    }
}
