//! Epoch container: one UTF-8 JSON manifest line terminated by `\n`, then the
//! raw little-endian `f64` payload, epoch-major and row-major (all samples of
//! channel 0, then channel 1, ...), sessions concatenated in manifest order.

use std::fs;
use std::io::{Read, Write};
use std::path::Path;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::{DataError, EpochSet, Result, Session};
use crate::covariance::Epoch;

pub const FORMAT_NAME: &str = "acm-epochs";
pub const FORMAT_VERSION: u64 = 1;
const DTYPE: &str = "f64le";
const ORDER: &str = "epoch-major row-major";

#[derive(Debug, Serialize, Deserialize)]
struct SessionEntry {
    id: String,
    n_epochs: usize,
    labels: Vec<usize>,
}

#[derive(Debug, Serialize, Deserialize)]
struct Manifest {
    format: String,
    version: u64,
    subject: String,
    classes: Vec<String>,
    sample_rate: f64,
    sessions: Vec<SessionEntry>,
    d: usize,
    #[serde(rename = "T")]
    t: usize,
    dtype: String,
    order: String,
}

fn format_err(offset: usize, section: &'static str, message: impl Into<String>) -> DataError {
    DataError::Format {
        offset,
        section,
        message: message.into(),
    }
}

pub fn write_epochset_to<W: Write>(set: &EpochSet, mut w: W) -> Result<()> {
    let manifest = Manifest {
        format: FORMAT_NAME.into(),
        version: FORMAT_VERSION,
        subject: set.subject().to_owned(),
        classes: set.class_names().to_vec(),
        sample_rate: set.sample_rate(),
        sessions: set
            .sessions()
            .iter()
            .map(|s| SessionEntry {
                id: s.id.clone(),
                n_epochs: s.epochs.len(),
                labels: s.labels.clone(),
            })
            .collect(),
        d: set.channels(),
        t: set.samples(),
        dtype: DTYPE.into(),
        order: ORDER.into(),
    };
    let mut header = serde_json::to_vec(&manifest).expect("manifest serializes");
    header.push(b'\n');
    w.write_all(&header)?;
    let mut buf = Vec::with_capacity(set.channels() * set.samples() * 8);
    for e in set.epochs() {
        buf.clear();
        for row in e.data().row_iter() {
            for v in row.iter() {
                buf.extend_from_slice(&v.to_le_bytes());
            }
        }
        w.write_all(&buf)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_epochset(set: &EpochSet, path: impl AsRef<Path>) -> Result<()> {
    let file = fs::File::create(path)?;
    write_epochset_to(set, std::io::BufWriter::new(file))
}

pub fn read_epochset_from<R: Read>(mut r: R) -> Result<EpochSet> {
    let mut bytes = Vec::new();
    r.read_to_end(&mut bytes)?;
    parse(&bytes)
}

pub fn read_epochset(path: impl AsRef<Path>) -> Result<EpochSet> {
    parse(&fs::read(path)?)
}

fn parse(bytes: &[u8]) -> Result<EpochSet> {
    let newline = bytes
        .iter()
        .position(|&b| b == b'\n')
        .ok_or_else(|| format_err(bytes.len(), "manifest", "missing manifest terminator"))?;
    let header = std::str::from_utf8(&bytes[..newline])
        .map_err(|e| format_err(e.valid_up_to(), "manifest", "manifest is not UTF-8"))?;
    let value: serde_json::Value = serde_json::from_str(header)
        .map_err(|e| format_err(column_offset(header, e.line(), e.column()), "manifest", e.to_string()))?;
    if value.get("format").and_then(|v| v.as_str()) != Some(FORMAT_NAME) {
        return Err(format_err(0, "manifest", format!("format is not \"{FORMAT_NAME}\"")));
    }
    match value.get("version").and_then(|v| v.as_u64()) {
        Some(FORMAT_VERSION) => {}
        Some(v) => return Err(DataError::VersionUnsupported(v)),
        None => return Err(format_err(0, "manifest", "missing version")),
    }
    let m: Manifest = serde_json::from_value(value).map_err(|e| format_err(0, "manifest", e.to_string()))?;
    if m.dtype != DTYPE {
        return Err(format_err(0, "manifest", format!("unsupported dtype {}", m.dtype)));
    }
    if m.order != ORDER {
        return Err(format_err(0, "manifest", format!("unsupported order {}", m.order)));
    }
    if m.d == 0 || m.t < 2 {
        return Err(format_err(0, "manifest", "d must be >= 1 and T >= 2"));
    }
    for s in &m.sessions {
        if s.labels.len() != s.n_epochs {
            return Err(format_err(
                0,
                "manifest",
                format!("session {}: n_epochs {} but {} labels", s.id, s.n_epochs, s.labels.len()),
            ));
        }
    }

    let start = newline + 1;
    let payload = &bytes[start..];
    let total: usize = m.sessions.iter().map(|s| s.n_epochs).sum();
    let epoch_bytes = m.d * m.t * 8;
    let expected = total * epoch_bytes;
    if payload.len() != expected {
        let section = if payload.len() < expected { "payload (truncated)" } else { "payload (trailing bytes)" };
        return Err(format_err(
            start + payload.len().min(expected),
            section,
            format!(
                "expected {expected} bytes for {total} epochs of {}x{}, found {}",
                m.d,
                m.t,
                payload.len()
            ),
        ));
    }

    let mut chunks = payload.chunks_exact(epoch_bytes);
    let mut sessions = Vec::with_capacity(m.sessions.len());
    for s in m.sessions {
        let mut epochs = Vec::with_capacity(s.n_epochs);
        for _ in 0..s.n_epochs {
            let chunk = chunks.next().expect("length checked");
            let values: Vec<f64> = chunk
                .chunks_exact(8)
                .map(|b| f64::from_le_bytes(b.try_into().expect("8 bytes")))
                .collect();
            let data = DMatrix::from_row_slice(m.d, m.t, &values);
            epochs.push(Epoch::new(data, m.sample_rate)?);
        }
        sessions.push(Session {
            id: s.id,
            epochs,
            labels: s.labels,
        });
    }
    EpochSet::new(m.subject, m.classes, m.sample_rate, sessions)
}

fn column_offset(header: &str, line: usize, column: usize) -> usize {
    if line <= 1 {
        column.saturating_sub(1).min(header.len())
    } else {
        header.len()
    }
}

/// Writes one epoch as CSV: one row per channel, one column per sample.
pub fn write_epoch_csv<W: Write>(epoch: &Epoch, mut w: W) -> std::io::Result<()> {
    for row in epoch.data().row_iter() {
        let line: Vec<String> = row.iter().map(|v| format!("{v}")).collect();
        writeln!(w, "{}", line.join(","))?;
    }
    Ok(())
}
