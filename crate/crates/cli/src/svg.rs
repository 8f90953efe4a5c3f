//! Loss and accuracy curves as a two-panel SVG document.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use qfcn_core::training::EpochRecord;

use crate::trace_csv::{read_trace_csv, TraceCsvError};

const PANEL_W: f64 = 420.0;
const PANEL_H: f64 = 280.0;
const MARGIN_L: f64 = 64.0;
const MARGIN_T: f64 = 40.0;
const GAP: f64 = 90.0;
const LEGEND_ROW: f64 = 18.0;
const TICKS: usize = 5;
const PALETTE: [&str; 8] = [
    "#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#17becf",
];

#[derive(Debug, thiserror::Error)]
pub enum PlotError {
    #[error("no trace files given")]
    NoInputs,
    #[error(transparent)]
    Trace(#[from] TraceCsvError),
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

/// One named curve set.
#[derive(Clone, Debug, PartialEq)]
pub struct Series {
    pub name: String,
    pub records: Vec<EpochRecord>,
}

pub fn escape_xml(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for c in s.chars() {
        match c {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            '\'' => out.push_str("&apos;"),
            c if (c as u32) < 0x20 && !matches!(c, '\t' | '\n' | '\r') => out.push('?'),
            c => out.push(c),
        }
    }
    out
}

struct Axis {
    lo: f64,
    hi: f64,
}

impl Axis {
    fn fit(values: impl Iterator<Item = f64>) -> Self {
        let (lo, hi) = values.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| {
            (lo.min(v), hi.max(v))
        });
        if lo == hi {
            let pad = if lo == 0.0 { 1.0 } else { 0.05 * lo.abs() };
            Self {
                lo: lo - pad,
                hi: hi + pad,
            }
        } else {
            let pad = 0.05 * (hi - lo);
            Self {
                lo: lo - pad,
                hi: hi + pad,
            }
        }
    }

    /// Maps `v` onto `[0, 1]`.
    fn unit(&self, v: f64) -> f64 {
        (v - self.lo) / (self.hi - self.lo)
    }
}

fn panel(
    out: &mut String,
    left: f64,
    title: &str,
    series: &[Series],
    pick: fn(&EpochRecord) -> f64,
    y: &Axis,
    max_epoch: usize,
) {
    let x_axis = Axis {
        lo: 1.0,
        hi: (max_epoch as f64).max(2.0),
    };
    let top = MARGIN_T;
    let _ = writeln!(
        out,
        r##"<g class="panel"><rect x="{left}" y="{top}" width="{PANEL_W}" height="{PANEL_H}" fill="none" stroke="#444"/>"##
    );
    let _ = writeln!(
        out,
        r#"<text x="{:.1}" y="{:.1}" text-anchor="middle" font-size="14">{}</text>"#,
        left + PANEL_W / 2.0,
        top - 12.0,
        escape_xml(title)
    );
    for i in 0..=TICKS {
        let frac = i as f64 / TICKS as f64;
        let py = top + PANEL_H * (1.0 - frac);
        let value = y.lo + frac * (y.hi - y.lo);
        let _ = writeln!(
            out,
            r##"<line x1="{left}" y1="{py:.2}" x2="{:.2}" y2="{py:.2}" stroke="#ddd"/><text x="{:.1}" y="{:.1}" text-anchor="end" font-size="10">{value:.3}</text>"##,
            left + PANEL_W,
            left - 6.0,
            py + 3.0
        );
        let px = left + PANEL_W * frac;
        let epoch = x_axis.lo + frac * (x_axis.hi - x_axis.lo);
        let _ = writeln!(
            out,
            r#"<text x="{px:.1}" y="{:.1}" text-anchor="middle" font-size="10">{epoch:.0}</text>"#,
            top + PANEL_H + 14.0
        );
    }
    let _ = writeln!(
        out,
        r#"<text x="{:.1}" y="{:.1}" text-anchor="middle" font-size="11">epoch</text>"#,
        left + PANEL_W / 2.0,
        top + PANEL_H + 30.0
    );
    for (k, s) in series.iter().enumerate() {
        let points: Vec<String> = s
            .records
            .iter()
            .map(|r| {
                let px = left + PANEL_W * x_axis.unit(r.epoch as f64);
                let py = top + PANEL_H * (1.0 - y.unit(pick(r)));
                format!("{px:.2},{py:.2}")
            })
            .collect();
        let _ = writeln!(
            out,
            r#"<polyline fill="none" stroke="{}" stroke-width="1.5" points="{}"/>"#,
            PALETTE[k % PALETTE.len()],
            points.join(" ")
        );
    }
    out.push_str("</g>\n");
}

/// Renders every series into one document with a loss panel and an
/// accuracy panel.
pub fn render_svg_string(series: &[Series]) -> Result<String, PlotError> {
    if series.is_empty() {
        return Err(PlotError::NoInputs);
    }
    let max_epoch = series
        .iter()
        .flat_map(|s| s.records.iter().map(|r| r.epoch))
        .max()
        .unwrap_or(1);
    let loss_axis = Axis::fit(series.iter().flat_map(|s| s.records.iter().map(|r| r.loss)));
    let acc_axis = Axis { lo: 0.0, hi: 1.0 };
    let width = 2.0 * (MARGIN_L + PANEL_W) + GAP - MARGIN_L + 20.0;
    let legend_top = MARGIN_T + PANEL_H + 50.0;
    let height = legend_top + LEGEND_ROW * series.len() as f64 + 10.0;

    let mut out = String::new();
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width:.0}" height="{height:.0}" viewBox="0 0 {width:.0} {height:.0}" font-family="sans-serif">"#
    );
    out.push_str("<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n");
    panel(
        &mut out,
        MARGIN_L,
        "loss",
        series,
        |r| r.loss,
        &loss_axis,
        max_epoch,
    );
    panel(
        &mut out,
        MARGIN_L + PANEL_W + GAP,
        "accuracy",
        series,
        |r| r.accuracy,
        &acc_axis,
        max_epoch,
    );
    out.push_str("<g class=\"legend\">\n");
    for (k, s) in series.iter().enumerate() {
        let y = legend_top + LEGEND_ROW * k as f64;
        let _ = writeln!(
            out,
            r#"<line x1="{MARGIN_L}" y1="{y:.1}" x2="{:.1}" y2="{y:.1}" stroke="{}" stroke-width="3"/><text x="{:.1}" y="{:.1}" font-size="12">{}</text>"#,
            MARGIN_L + 24.0,
            PALETTE[k % PALETTE.len()],
            MARGIN_L + 30.0,
            y + 4.0,
            escape_xml(&s.name)
        );
    }
    out.push_str("</g>\n</svg>\n");
    Ok(out)
}

fn legend_name(path: &Path) -> String {
    path.file_stem()
        .or_else(|| path.file_name())
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| path.display().to_string())
}

/// Reads each trace CSV and writes the plot to `out`. Files without epoch
/// rows are rejected.
pub fn render_svg(inputs: &[PathBuf], out: &Path) -> Result<(), PlotError> {
    if inputs.is_empty() {
        return Err(PlotError::NoInputs);
    }
    let series = inputs
        .iter()
        .map(|p| {
            Ok(Series {
                name: legend_name(p),
                records: read_trace_csv(p)?,
            })
        })
        .collect::<Result<Vec<_>, PlotError>>()?;
    let doc = render_svg_string(&series)?;
    std::fs::write(out, doc).map_err(|source| PlotError::Io {
        path: out.display().to_string(),
        source,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::trace_csv::HEADER;

    fn csv(rows: &[(f64, f64)]) -> String {
        let mut s = format!("{HEADER}\n");
        for (i, (l, a)) in rows.iter().enumerate() {
            s.push_str(&format!("{},{l},{a},0\n", i + 1));
        }
        s
    }

    fn polylines(doc: &str) -> usize {
        let tree = roxmltree::Document::parse(doc).expect("well-formed XML");
        tree.descendants()
            .filter(|n| n.has_tag_name("polyline"))
            .count()
    }

    #[test]
    fn polyline_count_follows_inputs() {
        let dir = tempfile::tempdir().unwrap();
        let a = dir.path().join("pure.csv");
        let b = dir.path().join("hybrid & <more>.csv");
        std::fs::write(&a, csv(&[(8.0, 0.5), (7.0, 0.6), (6.5, 0.7)])).unwrap();
        std::fs::write(&b, csv(&[(9.0, 0.4), (8.5, 0.45)])).unwrap();
        let out = dir.path().join("plot.svg");

        render_svg(std::slice::from_ref(&a), &out).unwrap();
        let doc = std::fs::read_to_string(&out).unwrap();
        assert_eq!(polylines(&doc), 2);
        assert!(doc.contains(">pure</text>"));

        render_svg(&[a, b], &out).unwrap();
        let doc = std::fs::read_to_string(&out).unwrap();
        assert_eq!(polylines(&doc), 4);
        assert!(doc.contains("hybrid &amp; &lt;more&gt;"));
    }

    #[test]
    fn empty_or_missing_inputs_fail() {
        let dir = tempfile::tempdir().unwrap();
        let empty = dir.path().join("empty.csv");
        std::fs::write(&empty, format!("{HEADER}\n")).unwrap();
        let out = dir.path().join("plot.svg");
        assert!(matches!(
            render_svg(&[empty], &out),
            Err(PlotError::Trace(TraceCsvError::Empty { .. }))
        ));
        assert!(matches!(render_svg(&[], &out), Err(PlotError::NoInputs)));
        assert!(!out.exists());
    }

    #[test]
    fn single_epoch_and_flat_curves_stay_finite() {
        let series = vec![Series {
            name: "flat".into(),
            records: vec![EpochRecord {
                epoch: 1,
                loss: 0.0,
                accuracy: 1.0,
                elapsed_ms: 0.0,
            }],
        }];
        let doc = render_svg_string(&series).unwrap();
        assert_eq!(polylines(&doc), 2);
        assert!(!doc.contains("NaN") && !doc.contains("inf"));
    }

    #[test]
    fn escapes_markup() {
        assert_eq!(escape_xml(r#"a<b>&"c'"#), "a&lt;b&gt;&amp;&quot;c&apos;");
    }
}
