//! Readers and writers for every on-disk artifact.
//!
//! Binary formats are little-endian and start with an 8-byte magic:
//!
//! | magic      | header (u64)  | payload                                   |
//! |------------|---------------|-------------------------------------------|
//! | `HBFEAT01` | N, p, C       | N × u32 labels, then N × p f32 row-major  |
//! | `HBDMAT01` | n             | n × n f64 row-major                       |
//! | `HBHEAD01` | C, p          | C × p f32 weights row-major, C × f32 bias |
//!
//! Text output uses `\n` line endings and locale-independent number
//! formatting so identical inputs give identical bytes.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::collapse::{ClassifierHead, NcReport};
use crate::error::{Error, Result};
use crate::hierarchy::DistanceMatrix;
use crate::manifold::{FeatureSet, SimilarityMatrix};
use crate::metrics::{ConfusionMatrix, MetricSeries, PredictionLog, Record, Scale};

pub const FEATURES_MAGIC: &[u8; 8] = b"HBFEAT01";
pub const MATRIX_MAGIC: &[u8; 8] = b"HBDMAT01";
pub const HEAD_MAGIC: &[u8; 8] = b"HBHEAD01";

/// Formats with nine significant digits, plain notation for moderate
/// magnitudes and exponent notation otherwise.
pub fn fmt_sig9(x: f64) -> String {
    if x == 0.0 {
        return "0".into();
    }
    let exp = x.abs().log10().floor() as i32;
    if (-5..9).contains(&exp) {
        let decimals = (8 - exp).max(0) as usize;
        let s = format!("{x:.decimals$}");
        if s.contains('.') {
            s.trim_end_matches('0').trim_end_matches('.').to_string()
        } else {
            s
        }
    } else {
        format!("{x:.8e}")
    }
}

fn read_file(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).map_err(|e| Error::io(path, e))
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    /// Checks the magic and that the payload is exactly `payload_len(header)`.
    fn open(bytes: &'a [u8], magic: &[u8; 8], header_words: usize) -> Result<(Self, Vec<u64>)> {
        if bytes.len() < 8 || &bytes[..8] != magic {
            let found = String::from_utf8_lossy(&bytes[..bytes.len().min(8)]).into_owned();
            return Err(Error::UnknownFormat(found));
        }
        let header_len = 8 + 8 * header_words;
        if bytes.len() < header_len {
            return Err(Error::Truncated {
                expected: header_len as u64,
                actual: bytes.len() as u64,
            });
        }
        let mut r = Reader { bytes, pos: 8 };
        let header = (0..header_words).map(|_| r.u64()).collect();
        Ok((r, header))
    }

    fn expect_len(&self, payload: u128) -> Result<()> {
        let expected = self.pos as u128 + payload;
        let actual = self.bytes.len() as u128;
        if actual < expected {
            return Err(Error::Truncated {
                expected: expected.min(u64::MAX as u128) as u64,
                actual: actual as u64,
            });
        }
        if actual > expected {
            return Err(Error::Format(format!(
                "{} trailing bytes after payload",
                actual - expected
            )));
        }
        Ok(())
    }

    fn take<const N: usize>(&mut self) -> [u8; N] {
        let out = self.bytes[self.pos..self.pos + N].try_into().expect("length checked");
        self.pos += N;
        out
    }

    fn u64(&mut self) -> u64 {
        u64::from_le_bytes(self.take())
    }

    fn u32(&mut self) -> u32 {
        u32::from_le_bytes(self.take())
    }

    fn f32(&mut self) -> Result<f64> {
        let v = f32::from_le_bytes(self.take());
        if !v.is_finite() {
            return Err(Error::Format(format!("non-finite value at byte {}", self.pos - 4)));
        }
        Ok(v as f64)
    }

    fn f64(&mut self) -> Result<f64> {
        let v = f64::from_le_bytes(self.take());
        if !v.is_finite() {
            return Err(Error::Format(format!("non-finite value at byte {}", self.pos - 8)));
        }
        Ok(v)
    }
}

fn to_usize(v: u64, what: &str) -> Result<usize> {
    usize::try_from(v).map_err(|_| Error::Format(format!("{what} {v} too large")))
}

/// Binary feature encoding. Values are narrowed to `f32`.
pub fn encode_features(f: &FeatureSet) -> Vec<u8> {
    let mut out = Vec::with_capacity(32 + f.len() * (4 + 4 * f.dim()));
    out.extend_from_slice(FEATURES_MAGIC);
    for v in [f.len(), f.dim(), f.class_count()] {
        out.extend_from_slice(&(v as u64).to_le_bytes());
    }
    for &l in f.labels() {
        out.extend_from_slice(&(l as u32).to_le_bytes());
    }
    for &v in f.data() {
        out.extend_from_slice(&(v as f32).to_le_bytes());
    }
    out
}

pub fn decode_features(bytes: &[u8]) -> Result<FeatureSet> {
    let (mut r, h) = Reader::open(bytes, FEATURES_MAGIC, 3)?;
    let (n, p, c) = (to_usize(h[0], "N")?, to_usize(h[1], "p")?, to_usize(h[2], "C")?);
    r.expect_len(4 * n as u128 + 4 * n as u128 * p as u128)?;
    let labels: Vec<usize> = (0..n).map(|_| r.u32() as usize).collect();
    let data = (0..n * p).map(|_| r.f32()).collect::<Result<Vec<_>>>()?;
    FeatureSet::new(p, c, data, labels)
}

/// Feature CSV with header `label,f0,...,f{p-1}`; values to nine significant
/// digits. The class count is one past the largest label.
pub fn features_to_csv(f: &FeatureSet) -> String {
    let mut out = String::from("label");
    for j in 0..f.dim() {
        let _ = write!(out, ",f{j}");
    }
    out.push('\n');
    for (label, row) in f.rows() {
        let _ = write!(out, "{label}");
        for &v in row {
            let _ = write!(out, ",{}", fmt_sig9(v));
        }
        out.push('\n');
    }
    out
}

pub fn features_from_csv(text: &str) -> Result<FeatureSet> {
    let mut rdr = csv::ReaderBuilder::new().from_reader(text.as_bytes());
    let headers = rdr.headers()?.clone();
    if headers.get(0) != Some("label") {
        return Err(Error::Format("feature CSV must start with a `label` column".into()));
    }
    let dim = headers.len() - 1;
    for (j, name) in headers.iter().skip(1).enumerate() {
        if name != format!("f{j}") {
            return Err(Error::Format(format!("expected column f{j}, found `{name}`")));
        }
    }
    let mut labels = Vec::new();
    let mut data = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let line = i + 2;
        let bad = |m: String| Error::Parse { line, message: m };
        labels.push(rec[0].trim().parse::<usize>().map_err(|_| bad(format!("invalid label `{}`", &rec[0])))?);
        for v in rec.iter().skip(1) {
            let x: f64 = v.trim().parse().map_err(|_| bad(format!("invalid value `{v}`")))?;
            if !x.is_finite() {
                return Err(bad("non-finite value".into()));
            }
            data.push(x);
        }
    }
    let c = labels.iter().max().map_or(0, |m| m + 1);
    FeatureSet::new(dim, c, data, labels)
}

fn is_csv(path: &Path) -> bool {
    path.extension().is_some_and(|e| e.eq_ignore_ascii_case("csv"))
}

/// Reads features; `.csv` paths use the CSV layout, anything else binary.
pub fn read_features(path: &Path) -> Result<FeatureSet> {
    if is_csv(path) {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        features_from_csv(&text)
    } else {
        decode_features(&read_file(path)?)
    }
}

pub fn write_features(f: &FeatureSet, path: &Path) -> Result<()> {
    if is_csv(path) {
        write_file(path, features_to_csv(f).as_bytes())
    } else {
        write_file(path, &encode_features(f))
    }
}

pub fn encode_head(head: &ClassifierHead) -> Vec<u8> {
    let (c, p) = head.weights.shape();
    let mut out = Vec::with_capacity(24 + 4 * c * (p + 1));
    out.extend_from_slice(HEAD_MAGIC);
    out.extend_from_slice(&(c as u64).to_le_bytes());
    out.extend_from_slice(&(p as u64).to_le_bytes());
    for row in head.weights.row_iter() {
        for &v in row.iter() {
            out.extend_from_slice(&(v as f32).to_le_bytes());
        }
    }
    for &b in head.bias.iter() {
        out.extend_from_slice(&(b as f32).to_le_bytes());
    }
    out
}

pub fn decode_head(bytes: &[u8]) -> Result<ClassifierHead> {
    let (mut r, h) = Reader::open(bytes, HEAD_MAGIC, 2)?;
    let (c, p) = (to_usize(h[0], "C")?, to_usize(h[1], "p")?);
    r.expect_len(4 * c as u128 * (p as u128 + 1))?;
    let w = (0..c * p).map(|_| r.f32()).collect::<Result<Vec<_>>>()?;
    let b = (0..c).map(|_| r.f32()).collect::<Result<Vec<_>>>()?;
    ClassifierHead::new(DMatrix::from_row_slice(c, p, &w), DVector::from_vec(b))
}

pub fn read_head(path: &Path) -> Result<ClassifierHead> {
    decode_head(&read_file(path)?)
}

pub fn write_head(head: &ClassifierHead, path: &Path) -> Result<()> {
    write_file(path, &encode_head(head))
}

/// Binary square matrix; labels are not stored.
pub fn encode_matrix(values: &[f64], n: usize) -> Vec<u8> {
    let mut out = Vec::with_capacity(16 + 8 * values.len());
    out.extend_from_slice(MATRIX_MAGIC);
    out.extend_from_slice(&(n as u64).to_le_bytes());
    for &v in values {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

/// Decodes `HBDMAT01` as a distance matrix labelled `0..n`.
pub fn decode_distance_matrix(bytes: &[u8]) -> Result<DistanceMatrix> {
    let (mut r, h) = Reader::open(bytes, MATRIX_MAGIC, 1)?;
    let n = to_usize(h[0], "n")?;
    r.expect_len(8 * n as u128 * n as u128)?;
    let values = (0..n * n).map(|_| r.f64()).collect::<Result<Vec<_>>>()?;
    DistanceMatrix::new((0..n).collect(), values)
}

fn matrix_csv(labels: &[usize], values: &[f64]) -> String {
    let n = labels.len();
    let mut out = String::from("class");
    for l in labels {
        let _ = write!(out, ",{l}");
    }
    out.push('\n');
    for (i, l) in labels.iter().enumerate() {
        let _ = write!(out, "{l}");
        for v in &values[i * n..(i + 1) * n] {
            let _ = write!(out, ",{}", fmt_sig9(*v));
        }
        out.push('\n');
    }
    out
}

pub fn distance_matrix_csv(d: &DistanceMatrix) -> String {
    matrix_csv(&d.labels, &d.values)
}

pub fn similarity_matrix_csv(a: &SimilarityMatrix) -> String {
    matrix_csv(&a.labels, &a.values)
}

pub fn distance_matrix_from_csv(text: &str) -> Result<DistanceMatrix> {
    let mut rdr = csv::ReaderBuilder::new().from_reader(text.as_bytes());
    let headers = rdr.headers()?.clone();
    let labels = headers
        .iter()
        .skip(1)
        .map(|h| h.trim().parse::<usize>())
        .collect::<Result<Vec<_>, _>>()
        .map_err(|_| Error::Format("matrix header must list class ids".into()))?;
    let mut values = Vec::with_capacity(labels.len() * labels.len());
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let line = i + 2;
        if rec[0].trim().parse::<usize>().ok() != labels.get(i).copied() {
            return Err(Error::Parse {
                line,
                message: "row id does not match header".into(),
            });
        }
        for v in rec.iter().skip(1) {
            values.push(v.trim().parse::<f64>().map_err(|_| Error::Parse {
                line,
                message: format!("invalid value `{v}`"),
            })?);
        }
    }
    DistanceMatrix::new(labels, values)
}

/// Reads a distance matrix from `.csv` or `HBDMAT01`.
pub fn read_distance_matrix(path: &Path) -> Result<DistanceMatrix> {
    if is_csv(path) {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        distance_matrix_from_csv(&text)
    } else {
        decode_distance_matrix(&read_file(path)?)
    }
}

pub fn write_distance_matrix(d: &DistanceMatrix, path: &Path) -> Result<()> {
    if is_csv(path) {
        write_file(path, distance_matrix_csv(d).as_bytes())
    } else {
        write_file(path, &encode_matrix(&d.values, d.len()))
    }
}

const LOG_COLUMNS: [&str; 4] = ["epoch", "example_id", "true_label", "pred_label"];

/// Parses a prediction CSV. Columns may appear in any order. With
/// `label_count = None` the count is one past the largest label seen.
pub fn predictions_from_csv(text: &str, label_count: Option<usize>) -> Result<PredictionLog> {
    let mut rdr = csv::ReaderBuilder::new().from_reader(text.as_bytes());
    let headers = rdr.headers()?.clone();
    let mut col = [0usize; 4];
    for (slot, name) in col.iter_mut().zip(LOG_COLUMNS) {
        *slot = headers
            .iter()
            .position(|h| h.trim() == name)
            .ok_or_else(|| Error::Log(format!("missing column `{name}`")))?;
    }
    let mut records = Vec::new();
    let mut seen: HashMap<(u32, String), usize> = HashMap::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let line = i + 2;
        let field = |k: usize| rec.get(col[k]).unwrap_or("").trim();
        let int = |k: usize| -> Result<usize> {
            field(k).parse().map_err(|_| Error::Parse {
                line,
                message: format!("{} `{}` is not a non-negative integer", LOG_COLUMNS[k], field(k)),
            })
        };
        let epoch = u32::try_from(int(0)?).map_err(|_| Error::Parse {
            line,
            message: "epoch too large".into(),
        })?;
        let id = field(1).to_string();
        if let Some(prev) = seen.insert((epoch, id.clone()), line) {
            return Err(Error::Log(format!(
                "duplicate (epoch {epoch}, example `{id}`) on lines {prev} and {line}"
            )));
        }
        let (true_label, pred_label) = (int(2)?, int(3)?);
        if let Some(count) = label_count {
            for l in [true_label, pred_label] {
                if l >= count {
                    return Err(Error::Parse {
                        line,
                        message: format!("label {l} out of range (label count {count})"),
                    });
                }
            }
        }
        records.push(Record {
            epoch,
            example_id: id,
            true_label,
            pred_label,
        });
    }
    let count = label_count.unwrap_or_else(|| {
        records
            .iter()
            .map(|r| r.true_label.max(r.pred_label) + 1)
            .max()
            .unwrap_or(0)
    });
    PredictionLog::new(records, count)
}

pub fn predictions_to_csv(log: &PredictionLog) -> Result<String> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(Vec::new());
    w.write_record(LOG_COLUMNS)?;
    for r in log.records() {
        w.write_record([
            r.epoch.to_string(),
            r.example_id.clone(),
            r.true_label.to_string(),
            r.pred_label.to_string(),
        ])?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Format(e.to_string()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

pub fn read_predictions(path: &Path, label_count: Option<usize>) -> Result<PredictionLog> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    predictions_from_csv(&text, label_count)
}

pub fn write_predictions(log: &PredictionLog, path: &Path) -> Result<()> {
    write_file(path, predictions_to_csv(log)?.as_bytes())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TableFormat {
    Csv,
    Json,
}

/// Anything the CLI emits as a table.
pub enum Table<'a> {
    Series(&'a MetricSeries),
    Distance(&'a DistanceMatrix),
    Similarity(&'a SimilarityMatrix),
    Confusion(&'a ConfusionMatrix),
    Report(&'a NcReport),
}

#[derive(Serialize)]
struct SeriesPoint {
    epoch: u32,
    value: f64,
}

#[derive(Serialize)]
struct SeriesJson {
    series: Vec<SeriesPoint>,
    scale: Scale,
}

#[derive(Serialize)]
struct MatrixJson<'a, T> {
    labels: &'a [usize],
    values: Vec<&'a [T]>,
}

fn rows<T>(values: &[T], n: usize) -> Vec<&[T]> {
    if n == 0 {
        Vec::new()
    } else {
        values.chunks(n).collect()
    }
}

/// Epoch,value CSV; percent-scale series use six decimals, others nine
/// significant digits.
pub fn series_csv(s: &MetricSeries) -> String {
    let mut out = String::from("epoch,value\n");
    for &(e, v) in &s.points {
        let v = match s.scale {
            Scale::Percent => format!("{v:.6}"),
            _ => fmt_sig9(v),
        };
        let _ = writeln!(out, "{e},{v}");
    }
    out
}

/// Deterministic text rendering of a table.
pub fn render_table(table: &Table<'_>, format: TableFormat) -> Result<String> {
    let mut text = match (table, format) {
        (Table::Series(s), TableFormat::Csv) => return Ok(series_csv(s)),
        (Table::Series(s), TableFormat::Json) => serde_json::to_string_pretty(&SeriesJson {
            series: s
                .points
                .iter()
                .map(|&(epoch, value)| SeriesPoint { epoch, value })
                .collect(),
            scale: s.scale,
        })?,
        (Table::Distance(d), TableFormat::Csv) => return Ok(distance_matrix_csv(d)),
        (Table::Distance(d), TableFormat::Json) => serde_json::to_string_pretty(&MatrixJson {
            labels: &d.labels,
            values: rows(&d.values, d.len()),
        })?,
        (Table::Similarity(a), TableFormat::Csv) => return Ok(similarity_matrix_csv(a)),
        (Table::Similarity(a), TableFormat::Json) => serde_json::to_string_pretty(&MatrixJson {
            labels: &a.labels,
            values: rows(&a.values, a.len()),
        })?,
        (Table::Confusion(c), TableFormat::Csv) => {
            let mut out = String::from("true\\pred");
            for l in &c.order {
                let _ = write!(out, ",{l}");
            }
            out.push('\n');
            let n = c.order.len();
            for (i, l) in c.order.iter().enumerate() {
                let _ = write!(out, "{l}");
                for v in &c.counts[i * n..(i + 1) * n] {
                    let _ = write!(out, ",{v}");
                }
                out.push('\n');
            }
            return Ok(out);
        }
        (Table::Confusion(c), TableFormat::Json) => serde_json::to_string_pretty(&MatrixJson {
            labels: &c.order,
            values: rows(&c.counts, c.order.len()),
        })?,
        (Table::Report(r), TableFormat::Json) => serde_json::to_string_pretty(r)?,
        (Table::Report(r), TableFormat::Csv) => {
            let opt = |v: Option<f64>| v.map(fmt_sig9).unwrap_or_default();
            format!(
                "label_space,nc1,beta_mu,beta_w,alpha_mu,alpha_w,nc3,nc4\n{},{},{},{},{},{},{},{}",
                r.label_space,
                fmt_sig9(r.nc1),
                opt(r.beta_mu),
                opt(r.beta_w),
                opt(r.alpha_mu),
                opt(r.alpha_w),
                opt(r.nc3),
                fmt_sig9(r.nc4)
            )
        }
    };
    text.push('\n');
    Ok(text)
}

pub fn write_table(table: &Table<'_>, path: &Path, format: TableFormat) -> Result<()> {
    write_file(path, render_table(table, format)?.as_bytes())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_features() -> FeatureSet {
        FeatureSet::new(2, 3, vec![0.5, -1.25, 3.0, 4.0, 1e-3, 7.0], vec![0, 2, 1]).unwrap()
    }

    #[test]
    fn features_binary_round_trip() {
        let f = small_features();
        let bytes = encode_features(&f);
        assert_eq!(&bytes[..8], b"HBFEAT01");
        assert_eq!(bytes.len(), 32 + 3 * 4 + 6 * 4);
        let back = decode_features(&bytes).unwrap();
        assert_eq!(back.labels(), f.labels());
        assert_eq!(encode_features(&back), bytes);
    }

    #[test]
    fn bad_magic_is_named() {
        let mut bytes = encode_features(&small_features());
        bytes[..2].copy_from_slice(b"XX");
        let err = decode_features(&bytes).unwrap_err();
        assert!(err.to_string().contains("XXFEAT01"), "{err}");
        assert!(matches!(err, Error::UnknownFormat(_)));
    }

    #[test]
    fn truncated_payload_reports_sizes() {
        let bytes = encode_features(&small_features());
        let err = decode_features(&bytes[..bytes.len() - 4]).unwrap_err();
        match err {
            Error::Truncated { expected, actual } => {
                assert_eq!(expected, bytes.len() as u64);
                assert_eq!(actual, bytes.len() as u64 - 4);
            }
            other => panic!("{other}"),
        }
        let mut extra = bytes.clone();
        extra.push(0);
        assert!(matches!(decode_features(&extra), Err(Error::Format(_))));
    }

    #[test]
    fn rejects_nan_and_label_overflow() {
        let mut bytes = encode_features(&small_features());
        let last = bytes.len() - 4;
        bytes[last..].copy_from_slice(&f32::NAN.to_le_bytes());
        assert!(decode_features(&bytes).is_err());

        let mut bytes = encode_features(&small_features());
        bytes[32..36].copy_from_slice(&9u32.to_le_bytes());
        assert!(matches!(decode_features(&bytes), Err(Error::LabelOutOfRange { label: 9, .. })));
    }

    #[test]
    fn features_csv_round_trip() {
        let f = FeatureSet::new(2, 2, vec![0.1, 123456.789, -2.5e-7, 1e12], vec![1, 0]).unwrap();
        let text = features_to_csv(&f);
        assert!(text.starts_with("label,f0,f1\n"));
        let back = features_from_csv(&text).unwrap();
        for (a, b) in back.data().iter().zip(f.data()) {
            assert!((a - b).abs() <= 1e-8 * b.abs(), "{a} vs {b}");
        }
    }

    #[test]
    fn head_round_trip_and_magic() {
        let head = ClassifierHead::new(
            DMatrix::from_row_slice(2, 3, &[1.0, 2.0, 3.0, -1.0, 0.5, 0.25]),
            DVector::from_vec(vec![0.125, -4.0]),
        )
        .unwrap();
        let bytes = encode_head(&head);
        assert_eq!(decode_head(&bytes).unwrap(), head);
        assert!(matches!(decode_features(&bytes), Err(Error::UnknownFormat(_))));
        assert!(matches!(decode_head(&encode_features(&small_features())), Err(Error::UnknownFormat(_))));
    }

    #[test]
    fn matrix_round_trip() {
        let d = DistanceMatrix::new(vec![0, 1], vec![0.0, 0.1, 0.1, 0.0]).unwrap();
        let bytes = encode_matrix(&d.values, 2);
        assert_eq!(decode_distance_matrix(&bytes).unwrap(), d);
        let csv = distance_matrix_csv(&d);
        assert_eq!(csv, "class,0,1\n0,0,0.1\n1,0.1,0\n");
        assert_eq!(distance_matrix_from_csv(&csv).unwrap(), d);
    }

    #[test]
    fn predictions_round_trip_and_errors() {
        let log = PredictionLog::new(
            vec![
                Record { epoch: 1, example_id: "img,1".into(), true_label: 0, pred_label: 2 },
                Record { epoch: 2, example_id: "img,1".into(), true_label: 0, pred_label: 0 },
            ],
            3,
        )
        .unwrap();
        let text = predictions_to_csv(&log).unwrap();
        assert_eq!(predictions_from_csv(&text, Some(3)).unwrap(), log);

        let dup = "epoch,example_id,true_label,pred_label\n1,a,0,0\n1,b,0,0\n1,a,1,1\n";
        let err = predictions_from_csv(dup, None).unwrap_err().to_string();
        assert!(err.contains("lines 2 and 4"), "{err}");

        let missing = "epoch,example_id,true_label\n1,a,0\n";
        let err = predictions_from_csv(missing, None).unwrap_err().to_string();
        assert!(err.contains("pred_label"), "{err}");

        let frac = "epoch,example_id,true_label,pred_label\n1.5,a,0,0\n";
        assert!(matches!(predictions_from_csv(frac, None), Err(Error::Parse { line: 2, .. })));

        let range = "epoch,example_id,true_label,pred_label\n1,a,0,5\n";
        assert!(predictions_from_csv(range, Some(3)).is_err());
    }

    #[test]
    fn tables_are_deterministic() {
        let s = MetricSeries::new(vec![(1, 50.0), (2, 75.123456789)], Scale::Percent).unwrap();
        let a = render_table(&Table::Series(&s), TableFormat::Csv).unwrap();
        assert_eq!(a, "epoch,value\n1,50.000000\n2,75.123457\n");
        let j = render_table(&Table::Series(&s), TableFormat::Json).unwrap();
        assert_eq!(j, render_table(&Table::Series(&s), TableFormat::Json).unwrap());
        assert!(j.contains("\"scale\": \"percent\""));
    }

    #[test]
    fn report_json_has_all_keys() {
        let r = NcReport {
            nc1: 0.5,
            beta_mu: Some(0.1),
            beta_w: Some(0.2),
            alpha_mu: Some(0.3),
            alpha_w: Some(0.4),
            nc3: Some(0.6),
            nc4: 0.0,
            label_space: "hyponym".into(),
            degenerate_flags: vec![],
        };
        let j: serde_json::Value =
            serde_json::from_str(&render_table(&Table::Report(&r), TableFormat::Json).unwrap()).unwrap();
        for k in ["nc1", "beta_mu", "beta_w", "alpha_mu", "alpha_w", "nc3", "nc4", "label_space", "degenerate_flags"] {
            assert!(j.get(k).is_some(), "missing {k}");
        }
    }

    #[test]
    fn sig9_formatting() {
        assert_eq!(fmt_sig9(0.0), "0");
        assert_eq!(fmt_sig9(1.0), "1");
        assert_eq!(fmt_sig9(0.75), "0.75");
        assert_eq!(fmt_sig9(1.0 / 3.0), "0.333333333");
        assert_eq!(fmt_sig9(-123.456), "-123.456");
        assert_eq!(fmt_sig9(1e-9), "1.00000000e-9");
        assert_eq!(fmt_sig9(2.5e12), "2.50000000e12");
    }
}
