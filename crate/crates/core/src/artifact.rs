//! Schema-versioned CSV artifacts exchanged between pipeline stages.
//!
//! Every artifact starts with one line `#schema=<name>/v<version>` followed by
//! an ordinary CSV header and rows.

use std::fs::File;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use crate::error::{Error, Result};

pub const SCHEMA_PREFIX: &str = "#schema=";

pub fn schema_line(schema: &str) -> String {
    format!("{SCHEMA_PREFIX}{schema}")
}

/// Writes a versioned CSV document into `out`.
pub fn write_csv<W, I, R>(out: W, schema: &str, header: &[&str], rows: I) -> std::io::Result<()>
where
    W: Write,
    I: IntoIterator<Item = R>,
    R: IntoIterator,
    R::Item: AsRef<[u8]>,
{
    let mut out = out;
    writeln!(out, "{}", schema_line(schema))?;
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(out);
    w.write_record(header)?;
    for row in rows {
        w.write_record(row)?;
    }
    w.flush()?;
    Ok(())
}

/// Renders a versioned CSV document to a string.
pub fn csv_string<I, R>(schema: &str, header: &[&str], rows: I) -> String
where
    I: IntoIterator<Item = R>,
    R: IntoIterator,
    R::Item: AsRef<[u8]>,
{
    let mut buf = Vec::new();
    write_csv(&mut buf, schema, header, rows).expect("writing to memory cannot fail");
    String::from_utf8(buf).expect("csv output is utf-8")
}

/// Opens a versioned CSV artifact, checking the schema line and the header.
pub fn open_csv(
    path: &Path,
    schema: &str,
    header: &[&str],
) -> Result<csv::Reader<BufReader<File>>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = BufReader::new(file);
    let mut first = String::new();
    reader
        .read_line(&mut first)
        .map_err(|e| Error::io(path, e))?;
    let found = first.trim_end();
    let expected = schema_line(schema);
    if found != expected {
        return Err(Error::SchemaMismatch {
            path: path.to_path_buf(),
            expected,
            found: found.to_string(),
        });
    }
    let mut csv = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_reader(reader);
    let found = csv.headers().map_err(|e| csv_error(path, e))?.clone();
    if found.len() < header.len() || header.iter().zip(found.iter()).any(|(a, b)| *a != b) {
        return Err(Error::MalformedHeader {
            path: path.to_path_buf(),
            expected: header.join(","),
            found: found.iter().collect::<Vec<_>>().join(","),
        });
    }
    Ok(csv)
}

pub(crate) fn csv_error(path: &Path, e: csv::Error) -> Error {
    let line = e.position().map(|p| p.line()).unwrap_or(0);
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(path, io),
        other => Error::parse(path, line, format!("{other:?}")),
    }
}

/// Opens a plain (unversioned) input CSV.
pub(crate) fn open_input(path: &Path) -> Result<csv::Reader<Box<dyn Read>>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let boxed: Box<dyn Read> = Box::new(BufReader::with_capacity(1 << 16, file));
    Ok(csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(boxed))
}

/// Shortest round-tripping decimal form of a float.
pub fn fmt_f64(v: f64) -> String {
    format!("{v}")
}

pub(crate) fn line_of(record: &csv::StringRecord) -> u64 {
    record.position().map(|p| p.line()).unwrap_or(0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn versioned_round_trip_and_mismatch() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("a.csv");
        let text = csv_string("thing/v1", &["a", "b"], [["1", "x"], ["2", "y,z"]]);
        assert_eq!(text, "#schema=thing/v1\na,b\n1,x\n2,\"y,z\"\n");
        std::fs::write(&path, &text).unwrap();
        let mut r = open_csv(&path, "thing/v1", &["a", "b"]).unwrap();
        let rows: Vec<_> = r.records().map(|r| r.unwrap()[1].to_string()).collect();
        assert_eq!(rows, ["x", "y,z"]);
        let err = open_csv(&path, "thing/v2", &["a", "b"]).unwrap_err();
        assert!(matches!(err, Error::SchemaMismatch { .. }));
        let err = open_csv(&path, "thing/v1", &["a", "c"]).unwrap_err();
        assert!(matches!(err, Error::MalformedHeader { .. }));
    }

    #[test]
    fn floats_round_trip() {
        for v in [0.0, 1.0, 0.1, 1e-12, 0.30000000000000004, 123456.789] {
            assert_eq!(fmt_f64(v).parse::<f64>().unwrap(), v);
        }
    }
}
