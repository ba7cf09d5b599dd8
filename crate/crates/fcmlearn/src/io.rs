//! File formats: the time-series CSV that carries response data, JSON for
//! weight matrices and any serializable report, the weight-value histogram
//! CSV, and a tab-separated import path for externally recorded runs.
//!
//! All writers emit `\n` line endings, `.` decimals, and shortest
//! round-trip float formatting, so a fixed input produces byte-identical
//! files on every platform. Parse failures carry the file path and
//! 1-based line number of the offending row.

use std::fs;
use std::io::Write as _;
use std::path::Path;

use ndarray::Array2;
use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::fcm::{ResponseSet, StateVector, WeightMatrix};

/// Weight histograms bin `[-1, 1]` into this many equal-width bins; the top
/// bin is closed so +1 is counted.
pub const HISTOGRAM_BINS: usize = 41;

fn io_err(path: &Path, source: std::io::Error) -> Error {
    Error::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn data_err(path: &Path, line: usize, message: String) -> Error {
    Error::DataFormat {
        path: path.to_path_buf(),
        line,
        message,
    }
}

/// Serialize `value` as pretty-printed JSON (stable field order, trailing
/// newline) to `path`.
pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(|source| Error::Json {
        path: path.to_path_buf(),
        source,
    })?;
    text.push('\n');
    fs::write(path, text).map_err(|source| io_err(path, source))
}

/// Deserialize a JSON file written by [`write_json`] (or compatible).
pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|source| io_err(path, source))?;
    serde_json::from_str(&text).map_err(|source| Error::Json {
        path: path.to_path_buf(),
        source,
    })
}

pub fn save_weight_matrix(path: &Path, w: &WeightMatrix) -> Result<()> {
    write_json(path, w)
}

pub fn load_weight_matrix(path: &Path) -> Result<WeightMatrix> {
    read_json(path)
}

/// Write a response set as `seq,t,c1..cn` rows: per sequence, the initial
/// vector at `t = 0` followed by the k response rows. Sequence ids count up
/// from `first_seq_id`, so a single-sequence slice can keep its original id
/// when written to its own file.
pub fn save_timeseries_csv(path: &Path, rs: &ResponseSet, first_seq_id: usize) -> Result<()> {
    let mut out = String::new();
    out.push_str("seq,t");
    for i in 1..=rs.n() {
        out.push_str(&format!(",c{i}"));
    }
    out.push('\n');
    for (s, (initial, seq)) in rs.initials().iter().zip(rs.sequences()).enumerate() {
        let id = first_seq_id + s;
        push_row(&mut out, id, 0, initial.values().iter());
        for t in 0..rs.k() {
            push_row(&mut out, id, t + 1, seq.row(t).into_iter());
        }
    }
    let mut file = fs::File::create(path).map_err(|source| io_err(path, source))?;
    file.write_all(out.as_bytes())
        .map_err(|source| io_err(path, source))
}

fn push_row<'a>(out: &mut String, seq: usize, t: usize, values: impl Iterator<Item = &'a f64>) {
    out.push_str(&format!("{seq},{t}"));
    for v in values {
        out.push_str(&format!(",{v}"));
    }
    out.push('\n');
}

/// Read a `seq,t,c1..cn` file back into a response set. Rows must arrive
/// grouped by sequence with `t` counting 0, 1, 2, … inside each group; the
/// `t = 0` row becomes the initial vector and the rest the response
/// sequence. Every sequence must be equally long.
pub fn load_timeseries_csv(path: &Path) -> Result<ResponseSet> {
    let text = fs::read_to_string(path).map_err(|source| io_err(path, source))?;
    let mut lines = text.lines().enumerate();

    let (_, header) = lines
        .next()
        .ok_or_else(|| data_err(path, 1, "empty file, expected a seq,t,c1.. header".into()))?;
    let columns: Vec<&str> = header.split(',').collect();
    if columns.len() < 3 || columns[0] != "seq" || columns[1] != "t" {
        return Err(data_err(
            path,
            1,
            format!("header must start with seq,t and at least one concept column, got {header:?}"),
        ));
    }
    let n = columns.len() - 2;
    for (i, name) in columns[2..].iter().enumerate() {
        let expected = format!("c{}", i + 1);
        if *name != expected {
            return Err(data_err(
                path,
                1,
                format!("concept column {} is named {name:?}, expected {expected:?}", i + 3),
            ));
        }
    }

    let mut initials: Vec<StateVector> = Vec::new();
    let mut sequences: Vec<Array2<f64>> = Vec::new();
    let mut seen_ids: Vec<usize> = Vec::new();
    let mut current: Option<(usize, Vec<f64>, Vec<f64>)> = None; // id, initial, rows

    let finish = |current: &mut Option<(usize, Vec<f64>, Vec<f64>)>,
                  initials: &mut Vec<StateVector>,
                  sequences: &mut Vec<Array2<f64>>|
     -> Result<()> {
        if let Some((_, initial, rows)) = current.take() {
            initials.push(StateVector::from_vec(initial)?);
            let k = rows.len() / n;
            sequences.push(
                Array2::from_shape_vec((k, n), rows).expect("rows are length n by construction"),
            );
        }
        Ok(())
    };

    for (idx, line) in lines {
        let lineno = idx + 1;
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != n + 2 {
            return Err(data_err(
                path,
                lineno,
                format!("expected {} fields, got {}", n + 2, fields.len()),
            ));
        }
        let seq: usize = fields[0].parse().map_err(|_| {
            data_err(path, lineno, format!("seq must be a nonnegative integer, got {:?}", fields[0]))
        })?;
        let t: usize = fields[1].parse().map_err(|_| {
            data_err(path, lineno, format!("t must be a nonnegative integer, got {:?}", fields[1]))
        })?;
        let mut values = Vec::with_capacity(n);
        for (c, field) in fields[2..].iter().enumerate() {
            let v: f64 = field.parse().map_err(|_| {
                data_err(
                    path,
                    lineno,
                    format!("column c{} is not a number: {field:?}", c + 1),
                )
            })?;
            values.push(v);
        }

        let start_new = match &current {
            Some((id, _, _)) => *id != seq,
            None => true,
        };
        if start_new {
            finish(&mut current, &mut initials, &mut sequences)?;
            if seen_ids.contains(&seq) {
                return Err(data_err(
                    path,
                    lineno,
                    format!("sequence {seq} appears in two separate blocks"),
                ));
            }
            seen_ids.push(seq);
            if t != 0 {
                return Err(data_err(
                    path,
                    lineno,
                    format!("sequence {seq} must start at t=0, got t={t}"),
                ));
            }
            current = Some((seq, values, Vec::new()));
        } else {
            let (_, _, rows) = current.as_mut().expect("current exists when not starting new");
            let expected_t = rows.len() / n + 1;
            if t != expected_t {
                return Err(data_err(
                    path,
                    lineno,
                    format!("sequence {seq} jumps to t={t}, expected t={expected_t}"),
                ));
            }
            rows.extend(values);
        }
    }
    finish(&mut current, &mut initials, &mut sequences)?;

    if initials.is_empty() {
        return Err(data_err(path, 1, "no data rows after the header".into()));
    }
    for (block, seq) in sequences.iter().enumerate() {
        if seq.nrows() != sequences[0].nrows() {
            return Err(data_err(
                path,
                1,
                format!(
                    "sequence {} has {} response rows but sequence {} has {}",
                    seen_ids[block],
                    seq.nrows(),
                    seen_ids[0],
                    sequences[0].nrows()
                ),
            ));
        }
    }
    ResponseSet::new(initials, sequences)
}

/// Import a tab-separated recording: first column a time stamp, remaining
/// columns the node values, one block per run. A new block starts at a
/// blank line or wherever the time stamp fails to increase. The first row
/// of each block becomes the initial vector. A non-numeric first line is
/// treated as a header and skipped.
pub fn load_timestamped_tsv(path: &Path) -> Result<ResponseSet> {
    let text = fs::read_to_string(path).map_err(|source| io_err(path, source))?;
    let mut n: Option<usize> = None;
    let mut blocks: Vec<Vec<Vec<f64>>> = Vec::new();
    let mut current: Vec<Vec<f64>> = Vec::new();
    let mut last_time = f64::NEG_INFINITY;

    for (idx, line) in text.lines().enumerate() {
        let lineno = idx + 1;
        if line.trim().is_empty() {
            if !current.is_empty() {
                blocks.push(std::mem::take(&mut current));
                last_time = f64::NEG_INFINITY;
            }
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        if lineno == 1 && fields[0].parse::<f64>().is_err() {
            continue; // header row
        }
        if fields.len() < 2 {
            return Err(data_err(
                path,
                lineno,
                format!("expected a time stamp and at least one value, got {} fields", fields.len()),
            ));
        }
        let time: f64 = fields[0].parse().map_err(|_| {
            data_err(path, lineno, format!("time stamp is not a number: {:?}", fields[0]))
        })?;
        let width = fields.len() - 1;
        match n {
            None => n = Some(width),
            Some(n) if n != width => {
                return Err(data_err(
                    path,
                    lineno,
                    format!("row has {width} values but earlier rows have {n}"),
                ));
            }
            Some(_) => {}
        }
        let mut values = Vec::with_capacity(width);
        for (c, field) in fields[1..].iter().enumerate() {
            let v: f64 = field.parse().map_err(|_| {
                data_err(path, lineno, format!("column {} is not a number: {field:?}", c + 2))
            })?;
            values.push(v);
        }
        if time <= last_time && !current.is_empty() {
            blocks.push(std::mem::take(&mut current));
        }
        last_time = time;
        current.push(values);
    }
    if !current.is_empty() {
        blocks.push(current);
    }

    let n = n.ok_or_else(|| data_err(path, 1, "no data rows".into()))?;
    let mut initials = Vec::with_capacity(blocks.len());
    let mut sequences = Vec::with_capacity(blocks.len());
    for mut block in blocks {
        let rest = block.split_off(1);
        let initial = block.into_iter().next().expect("blocks are nonempty");
        initials.push(StateVector::from_vec(initial)?);
        let k = rest.len();
        let flat: Vec<f64> = rest.into_iter().flatten().collect();
        sequences.push(
            Array2::from_shape_vec((k, n), flat).expect("row widths checked during parsing"),
        );
    }
    ResponseSet::new(initials, sequences)
}

/// Count the weights of `w` into [`HISTOGRAM_BINS`] equal bins over
/// `[-1, 1]`. Bins are half-open `[low, high)` except the last, which
/// includes +1.
pub fn weight_histogram(w: &WeightMatrix) -> Vec<usize> {
    let mut counts = vec![0usize; HISTOGRAM_BINS];
    let width = 2.0 / HISTOGRAM_BINS as f64;
    for &v in w.weights() {
        let bin = (((v + 1.0) / width) as usize).min(HISTOGRAM_BINS - 1);
        counts[bin] += 1;
    }
    counts
}

/// Write the weight-value histogram as `bin_low,bin_high,count` rows, one
/// per bin, covering `[-1, 1]`.
pub fn save_histogram_csv(path: &Path, w: &WeightMatrix) -> Result<()> {
    let counts = weight_histogram(w);
    let mut out = String::from("bin_low,bin_high,count\n");
    for (i, count) in counts.iter().enumerate() {
        let low = -1.0 + 2.0 * i as f64 / HISTOGRAM_BINS as f64;
        let high = -1.0 + 2.0 * (i + 1) as f64 / HISTOGRAM_BINS as f64;
        out.push_str(&format!("{low},{high},{count}\n"));
    }
    fs::write(path, out).map_err(|source| io_err(path, source))
}
