//! Line-oriented dataset files.
//!
//! ```text
//! #version=1
//! #rng=chacha8-boxmuller
//! #seed=3
//! #sigma=1.0000000000000001e-1
//! #theta_a=7.8539816339744828e-1
//! #theta_b=2.3561944901923448e0
//! #n_qubits=8
//! 7.6e-1,…,2.4e0|-1,…,1
//! ```
//!
//! Angles and meta reals are written with 17 significant digits, which
//! round-trips every `f64` exactly.

use std::fmt::Write as _;
use std::path::Path;

use qfcn_core::data::{Dataset, DatasetMeta, Sample};

pub const FORMAT_VERSION: u32 = 1;
/// Generator family of [`qfcn_core::data::generate`].
pub const RNG_NAME: &str = "chacha8-boxmuller";

#[derive(Debug, thiserror::Error)]
pub enum DatasetFileError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("unsupported dataset version {found} (expected {FORMAT_VERSION})")]
    Version { found: String },
    #[error("{0}")]
    Invalid(#[from] qfcn_core::Error),
}

fn real(v: f64) -> String {
    format!("{v:.16e}")
}

pub fn format_dataset(ds: &Dataset) -> String {
    let m = ds.meta();
    let mut out = String::new();
    let _ = writeln!(out, "#version={FORMAT_VERSION}");
    let _ = writeln!(out, "#rng={RNG_NAME}");
    let _ = writeln!(out, "#seed={}", m.seed);
    let _ = writeln!(out, "#sigma={}", real(m.noise_sigma));
    let _ = writeln!(out, "#theta_a={}", real(m.theta_a));
    let _ = writeln!(out, "#theta_b={}", real(m.theta_b));
    let _ = writeln!(out, "#n_qubits={}", m.n_qubits);
    for s in ds.samples() {
        let x: Vec<String> = s.x.iter().map(|&v| real(v)).collect();
        let l: Vec<String> = s.labels.iter().map(|l| l.to_string()).collect();
        let _ = writeln!(out, "{}|{}", x.join(","), l.join(","));
    }
    out
}

fn parse_err(line: usize, message: impl Into<String>) -> DatasetFileError {
    DatasetFileError::Parse {
        line,
        message: message.into(),
    }
}

fn parse_value<T: std::str::FromStr>(
    line: usize,
    key: &str,
    raw: &str,
) -> Result<T, DatasetFileError> {
    raw.trim()
        .parse()
        .map_err(|_| parse_err(line, format!("cannot parse `{raw}` as {key}")))
}

pub fn parse_dataset(text: &str) -> Result<Dataset, DatasetFileError> {
    let mut version = None;
    let mut seed = None;
    let mut sigma = None;
    let mut theta_a = None;
    let mut theta_b = None;
    let mut n_qubits = None;
    let mut samples = Vec::new();
    let mut last_line = 0;
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        last_line = line;
        let trimmed = raw.trim();
        if trimmed.is_empty() {
            continue;
        }
        if let Some(header) = trimmed.strip_prefix('#') {
            if !samples.is_empty() {
                return Err(parse_err(line, "header line after the first sample"));
            }
            let (key, value) = header
                .split_once('=')
                .ok_or_else(|| parse_err(line, format!("header `{trimmed}` is not key=value")))?;
            match key.trim() {
                "version" => {
                    if value.trim() != FORMAT_VERSION.to_string() {
                        return Err(DatasetFileError::Version {
                            found: value.trim().to_string(),
                        });
                    }
                    version = Some(());
                }
                "rng" => {
                    if value.trim() != RNG_NAME {
                        return Err(parse_err(
                            line,
                            format!("unknown generator `{}`", value.trim()),
                        ));
                    }
                }
                "seed" => seed = Some(parse_value::<u64>(line, "seed", value)?),
                "sigma" => sigma = Some(parse_value::<f64>(line, "sigma", value)?),
                "theta_a" => theta_a = Some(parse_value::<f64>(line, "theta_a", value)?),
                "theta_b" => theta_b = Some(parse_value::<f64>(line, "theta_b", value)?),
                "n_qubits" => n_qubits = Some(parse_value::<usize>(line, "n_qubits", value)?),
                other => return Err(parse_err(line, format!("unknown header key `{other}`"))),
            }
            continue;
        }
        let width =
            n_qubits.ok_or_else(|| parse_err(line, "sample before the #n_qubits header"))?;
        let (xs, ls) = trimmed
            .split_once('|')
            .ok_or_else(|| parse_err(line, "missing `|` between angles and labels"))?;
        let x: Vec<f64> = xs
            .split(',')
            .map(|v| parse_value(line, "angle", v))
            .collect::<Result<_, _>>()?;
        let labels: Vec<i8> = ls
            .split(',')
            .map(|v| parse_value(line, "label", v))
            .collect::<Result<_, _>>()?;
        if x.len() != width {
            return Err(parse_err(
                line,
                format!("expected {width} angles, found {}", x.len()),
            ));
        }
        if labels.len() != width {
            return Err(parse_err(
                line,
                format!("expected {width} labels, found {}", labels.len()),
            ));
        }
        let sample = Sample::new(x, labels).map_err(|e| parse_err(line, e.to_string()))?;
        samples.push(sample);
    }
    let eof = last_line + 1;
    let missing = |key: &str| parse_err(eof, format!("missing #{key} header"));
    version.ok_or_else(|| missing("version"))?;
    let meta = DatasetMeta {
        seed: seed.ok_or_else(|| missing("seed"))?,
        noise_sigma: sigma.ok_or_else(|| missing("sigma"))?,
        theta_a: theta_a.ok_or_else(|| missing("theta_a"))?,
        theta_b: theta_b.ok_or_else(|| missing("theta_b"))?,
        n_qubits: n_qubits.ok_or_else(|| missing("n_qubits"))?,
    };
    if samples.is_empty() {
        return Err(parse_err(eof, "no samples"));
    }
    Ok(Dataset::new(meta, samples)?)
}

pub fn save_dataset(ds: &Dataset, path: &Path) -> Result<(), DatasetFileError> {
    std::fs::write(path, format_dataset(ds)).map_err(|source| DatasetFileError::Io {
        path: path.display().to_string(),
        source,
    })
}

pub fn load_dataset(path: &Path) -> Result<Dataset, DatasetFileError> {
    let text = std::fs::read_to_string(path).map_err(|source| DatasetFileError::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_dataset(&text)
}

#[cfg(test)]
mod tests {
    use super::*;
    use qfcn_core::data::{gen_dataset, generate, DEFAULT_THETA_A, DEFAULT_THETA_B};

    fn sample_file() -> String {
        format_dataset(&gen_dataset(5, 3, 0.1, DEFAULT_THETA_A, DEFAULT_THETA_B).unwrap())
    }

    #[test]
    fn round_trip_is_bit_exact() {
        let ds = gen_dataset(40, 3, 0.1, DEFAULT_THETA_A, DEFAULT_THETA_B).unwrap();
        let back = parse_dataset(&format_dataset(&ds)).unwrap();
        assert_eq!(back, ds);
        assert_eq!(back.fingerprint(), ds.fingerprint());
        assert_eq!(generate(back.meta(), back.len()).unwrap(), back);
    }

    #[test]
    fn header_lists_the_generator() {
        let text = sample_file();
        let header: Vec<&str> = text.lines().take(7).collect();
        assert_eq!(header[0], "#version=1");
        assert_eq!(header[1], "#rng=chacha8-boxmuller");
        assert_eq!(header[2], "#seed=3");
        assert_eq!(header[6], "#n_qubits=8");
    }

    #[test]
    fn truncated_file_names_the_line() {
        let text = sample_file();
        let cut = &text[..text.len() - 30];
        let err = parse_dataset(cut).unwrap_err();
        assert!(
            matches!(err, DatasetFileError::Parse { line: 12, .. }),
            "{err}"
        );
        assert!(err.to_string().starts_with("line 12:"));

        let header_only: String = text.lines().take(4).map(|l| format!("{l}\n")).collect();
        let err = parse_dataset(&header_only).unwrap_err();
        assert!(err.to_string().contains("missing #theta_a"), "{err}");
    }

    #[test]
    fn zero_label_is_rejected() {
        let text = sample_file()
            .replacen("|-1,", "|0,", 1)
            .replacen("|1,", "|0,", 1);
        let err = parse_dataset(&text).unwrap_err();
        assert!(err.to_string().contains("label 0"), "{err}");
    }

    #[test]
    fn version_and_header_errors() {
        let text = sample_file().replace("#version=1", "#version=2");
        assert!(matches!(
            parse_dataset(&text),
            Err(DatasetFileError::Version { .. })
        ));
        let text = sample_file().replace("#rng=chacha8-boxmuller", "#rng=mt19937");
        assert!(parse_dataset(&text)
            .unwrap_err()
            .to_string()
            .contains("line 2"));
        let text = sample_file().replace("#seed=3", "#seed=three");
        assert!(parse_dataset(&text)
            .unwrap_err()
            .to_string()
            .contains("line 3"));
        let text = sample_file().replace("#seed=3", "#colour=blue");
        assert!(parse_dataset(&text).is_err());
        let text = sample_file().replacen('|', ";", 1);
        assert!(parse_dataset(&text)
            .unwrap_err()
            .to_string()
            .contains("line 8"));
    }

    #[test]
    fn files_round_trip_through_disk() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("d.txt");
        let ds = gen_dataset(3, 9, 0.0, 0.1, 0.2).unwrap();
        save_dataset(&ds, &path).unwrap();
        assert_eq!(load_dataset(&path).unwrap(), ds);
        assert!(matches!(
            load_dataset(&dir.path().join("missing.txt")),
            Err(DatasetFileError::Io { .. })
        ));
    }
}
