//! Per-epoch trace files: `epoch,loss,accuracy,elapsed_ms`, one row per
//! epoch, reals in scientific notation with 12 significant digits.

use std::fmt::Write as _;
use std::path::Path;

use qfcn_core::training::{EpochRecord, TrainingTrace};

pub const HEADER: &str = "epoch,loss,accuracy,elapsed_ms";

#[derive(Debug, thiserror::Error)]
pub enum TraceCsvError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: line {line}: {message}")]
    Malformed {
        path: String,
        line: usize,
        message: String,
    },
    #[error("{path}: no epoch rows")]
    Empty { path: String },
}

fn real(v: f64) -> String {
    format!("{v:.11e}")
}

pub fn format_trace_csv(trace: &TrainingTrace) -> String {
    let mut out = String::with_capacity(48 * (trace.records.len() + 1));
    out.push_str(HEADER);
    out.push('\n');
    for r in &trace.records {
        let _ = writeln!(
            out,
            "{},{},{},{}",
            r.epoch,
            real(r.loss),
            real(r.accuracy),
            real(r.elapsed_ms)
        );
    }
    out
}

pub fn write_trace_csv(trace: &TrainingTrace, path: &Path) -> Result<(), TraceCsvError> {
    std::fs::write(path, format_trace_csv(trace)).map_err(|source| TraceCsvError::Io {
        path: path.display().to_string(),
        source,
    })
}

/// Parses trace rows; `origin` names the source in error messages. A file
/// with a header and no rows parses to an empty list.
pub fn parse_trace_csv(text: &str, origin: &str) -> Result<Vec<EpochRecord>, TraceCsvError> {
    let malformed = |line: usize, message: String| TraceCsvError::Malformed {
        path: origin.to_string(),
        line,
        message,
    };
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, h)) if h.trim() == HEADER => {}
        Some((_, h)) => {
            return Err(malformed(
                1,
                format!("expected header `{HEADER}`, found `{h}`"),
            ))
        }
        None => return Err(malformed(1, "missing header".into())),
    }
    let mut records = Vec::new();
    for (idx, raw) in lines {
        let line = idx + 1;
        if raw.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = raw.split(',').map(str::trim).collect();
        if fields.len() != 4 {
            return Err(malformed(
                line,
                format!("expected 4 fields, found {}", fields.len()),
            ));
        }
        let epoch: usize = fields[0]
            .parse()
            .map_err(|_| malformed(line, format!("bad epoch `{}`", fields[0])))?;
        let mut reals = [0.0; 3];
        for (slot, (name, raw)) in reals.iter_mut().zip(
            ["loss", "accuracy", "elapsed_ms"]
                .into_iter()
                .zip(&fields[1..]),
        ) {
            *slot = raw
                .parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| malformed(line, format!("bad {name} `{raw}`")))?;
        }
        if epoch != records.len() + 1 {
            return Err(malformed(
                line,
                format!("expected epoch {}, found {epoch}", records.len() + 1),
            ));
        }
        records.push(EpochRecord {
            epoch,
            loss: reals[0],
            accuracy: reals[1],
            elapsed_ms: reals[2],
        });
    }
    Ok(records)
}

/// Reads a trace file, rejecting files without epoch rows.
pub fn read_trace_csv(path: &Path) -> Result<Vec<EpochRecord>, TraceCsvError> {
    let origin = path.display().to_string();
    let text = std::fs::read_to_string(path).map_err(|source| TraceCsvError::Io {
        path: origin.clone(),
        source,
    })?;
    let records = parse_trace_csv(&text, &origin)?;
    if records.is_empty() {
        return Err(TraceCsvError::Empty { path: origin });
    }
    Ok(records)
}
