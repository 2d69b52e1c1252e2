//! CSV exchange of sample sets.
//!
//! Header: the parameter names in space order, then one column per figure
//! of merit. Inputs are written in native units; numbers use 17 significant
//! digits so values survive a round trip.

use std::collections::{BTreeMap, HashSet};
use std::io::{Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::sampling::SampleSet;
use crate::space::ParameterSpace;

pub fn format_value(v: f64) -> String {
    format!("{v:.16e}")
}

/// Writes a header and numeric rows.
pub fn write_table<W: Write>(out: W, header: &[String], rows: &[Vec<f64>]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(header).map_err(csv_io)?;
    for row in rows {
        w.write_record(row.iter().map(|v| format_value(*v))).map_err(csv_io)?;
    }
    w.flush()?;
    Ok(())
}

fn csv_io(e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io),
        other => Error::MalformedCsv { line: 0, reason: format!("{other:?}") },
    }
}

pub fn write_samples<W: Write>(out: W, set: &SampleSet, space: &ParameterSpace) -> Result<()> {
    let mut header = space.names();
    header.extend(set.responses.keys().cloned());
    let natives = set.native_inputs(space)?;
    let rows: Vec<Vec<f64>> = natives
        .into_iter()
        .enumerate()
        .map(|(i, mut row)| {
            row.extend(set.responses.values().map(|col| col[i]));
            row
        })
        .collect();
    write_table(out, &header, &rows)
}

pub fn save_samples(set: &SampleSet, space: &ParameterSpace, path: impl AsRef<Path>) -> Result<()> {
    let file = std::fs::File::create(path)?;
    write_samples(std::io::BufWriter::new(file), set, space)
}

fn open_with_header<R: Read>(input: R) -> Result<(csv::Reader<R>, Vec<String>)> {
    let mut reader = csv::ReaderBuilder::new().has_headers(true).flexible(false).from_reader(input);
    let header: Vec<String> = reader
        .headers()
        .map_err(|e| Error::MalformedCsv { line: 1, reason: e.to_string() })?
        .iter()
        .map(|h| h.trim().to_string())
        .collect();
    let mut seen = HashSet::new();
    for h in &header {
        if h.is_empty() {
            return Err(Error::MalformedCsv { line: 1, reason: "empty column name".into() });
        }
        if !seen.insert(h.as_str()) {
            return Err(Error::MalformedCsv { line: 1, reason: format!("duplicate column `{h}`") });
        }
    }
    Ok((reader, header))
}

fn parse_cell(text: &str, line: usize, column: &str) -> Result<f64> {
    text.trim()
        .parse::<f64>()
        .ok()
        .filter(|v| v.is_finite())
        .ok_or_else(|| Error::NonNumericCell { line, column: column.to_string() })
}

/// Reads a plain numeric table: unique non-empty header names and at least
/// one row of finite numbers.
pub fn read_table<R: Read>(input: R) -> Result<(Vec<String>, Vec<Vec<f64>>)> {
    let (mut reader, header) = open_with_header(input)?;
    let mut rows = Vec::new();
    for (idx, record) in reader.records().enumerate() {
        let line = idx + 2;
        let record = record.map_err(|e| Error::MalformedCsv { line, reason: e.to_string() })?;
        rows.push(record.iter().zip(&header).map(|(c, h)| parse_cell(c, line, h)).collect::<Result<Vec<_>>>()?);
    }
    if rows.is_empty() {
        return Err(Error::MalformedCsv { line: 2, reason: "no data rows".into() });
    }
    Ok((header, rows))
}

pub fn load_table(path: impl AsRef<Path>) -> Result<(Vec<String>, Vec<Vec<f64>>)> {
    read_table(std::io::BufReader::new(std::fs::File::open(path)?))
}

/// Parses a sample CSV against `space`. Columns are matched by name, so any
/// column order is accepted. Non-parameter columns become responses; when
/// `known_foms` is given, any other name is rejected.
pub fn read_samples<R: Read>(input: R, space: &ParameterSpace, known_foms: Option<&[String]>) -> Result<SampleSet> {
    let (mut reader, header) = open_with_header(input)?;
    let param_cols: Vec<usize> = space
        .names()
        .iter()
        .map(|name| {
            header.iter().position(|h| h == name).ok_or_else(|| Error::MalformedCsv {
                line: 1,
                reason: format!("missing parameter column `{name}`"),
            })
        })
        .collect::<Result<_>>()?;
    let mut fom_cols = BTreeMap::new();
    for (i, h) in header.iter().enumerate() {
        if space.index_of(h).is_some() {
            continue;
        }
        if let Some(known) = known_foms {
            if !known.iter().any(|k| k == h) {
                return Err(Error::UnknownColumn(h.clone()));
            }
        }
        fom_cols.insert(h.clone(), i);
    }

    let mut inputs = Vec::new();
    let mut responses: BTreeMap<String, Vec<f64>> = fom_cols.keys().map(|k| (k.clone(), Vec::new())).collect();
    for (idx, record) in reader.records().enumerate() {
        let line = idx + 2;
        let record = record.map_err(|e| Error::MalformedCsv { line, reason: e.to_string() })?;
        let cell = |col: usize| parse_cell(&record[col], line, &header[col]);
        let native: Vec<f64> = param_cols.iter().map(|&c| cell(c)).collect::<Result<_>>()?;
        inputs.push(space.normalize(&native)?);
        for (name, &col) in &fom_cols {
            responses.get_mut(name).expect("column registered").push(cell(col)?);
        }
    }
    if inputs.is_empty() {
        return Err(Error::MalformedCsv { line: 2, reason: "no data rows".into() });
    }
    let mut set = SampleSet::new(inputs, space.fingerprint(), 0)?;
    set.responses = responses;
    Ok(set)
}

pub fn load_samples(path: impl AsRef<Path>, space: &ParameterSpace, known_foms: Option<&[String]>) -> Result<SampleSet> {
    let file = std::fs::File::open(path)?;
    read_samples(std::io::BufReader::new(file), space, known_foms)
}
