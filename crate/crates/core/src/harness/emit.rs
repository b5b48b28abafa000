use std::fs::File;
use std::io::{self, BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde_json::json;

use super::metrics::{MetricsRecord, RawOp, SCHEMA_VERSION};
use super::spec::Format;

/// Column names in output order.
pub fn columns() -> Vec<String> {
    let mut w = csv::WriterBuilder::new().from_writer(Vec::new());
    w.serialize(MetricsRecord::default())
        .expect("record serializes");
    let bytes = w.into_inner().expect("in-memory writer");
    let text = String::from_utf8(bytes).expect("utf8 header");
    text.lines()
        .next()
        .unwrap_or_default()
        .split(',')
        .map(str::to_string)
        .collect()
}

fn header_json() -> serde_json::Value {
    json!({"schema": "chbl-metrics", "schema_version": SCHEMA_VERSION, "columns": columns()})
}

/// Writes records with a schema header. Floats are rounded to 6 significant
/// digits; an empty record set still produces the header.
pub fn write_records<W: Write>(
    records: &[MetricsRecord],
    format: Format,
    out: W,
) -> io::Result<()> {
    let mut out = BufWriter::new(out);
    match format {
        Format::Jsonl => {
            writeln!(out, "{}", header_json())?;
            for r in records {
                serde_json::to_writer(&mut out, &r.clone().rounded())?;
                writeln!(out)?;
            }
        }
        Format::Csv => {
            writeln!(out, "# schema=chbl-metrics schema_version={SCHEMA_VERSION}")?;
            let mut w = csv::WriterBuilder::new()
                .has_headers(false)
                .from_writer(&mut out);
            w.write_record(columns())?;
            for r in records {
                w.serialize(r.clone().rounded())?;
            }
            w.flush()?;
        }
    }
    out.flush()
}

pub fn emit(records: &[MetricsRecord], format: Format, path: &Path) -> io::Result<()> {
    write_records(records, format, File::create(path)?)
}

fn invalid(e: impl std::fmt::Display) -> io::Error {
    io::Error::new(io::ErrorKind::InvalidData, e.to_string())
}

pub fn read_records<R: Read>(format: Format, input: R) -> io::Result<Vec<MetricsRecord>> {
    match format {
        Format::Jsonl => {
            let mut lines = BufReader::new(input).lines();
            let header: serde_json::Value = match lines.next() {
                Some(l) => serde_json::from_str(&l?).map_err(invalid)?,
                None => return Err(invalid("missing schema header")),
            };
            if header["schema_version"] != SCHEMA_VERSION {
                return Err(invalid("unsupported schema version"));
            }
            let mut out = Vec::new();
            for line in lines {
                let line = line?;
                if !line.trim().is_empty() {
                    out.push(serde_json::from_str(&line).map_err(invalid)?);
                }
            }
            Ok(out)
        }
        Format::Csv => {
            let mut r = csv::ReaderBuilder::new()
                .comment(Some(b'#'))
                .from_reader(input);
            r.deserialize()
                .collect::<Result<Vec<MetricsRecord>, _>>()
                .map_err(invalid)
        }
    }
}

pub fn load(format: Format, path: &Path) -> io::Result<Vec<MetricsRecord>> {
    read_records(format, File::open(path)?)
}

pub fn write_raw<W: Write>(ops: &[RawOp], out: W) -> io::Result<()> {
    let mut out = BufWriter::new(out);
    writeln!(
        out,
        "{}",
        json!({"schema": "chbl-raw", "schema_version": SCHEMA_VERSION})
    )?;
    for op in ops {
        serde_json::to_writer(&mut out, op)?;
        writeln!(out)?;
    }
    out.flush()
}

pub fn read_raw<R: Read>(input: R) -> io::Result<Vec<RawOp>> {
    BufReader::new(input)
        .lines()
        .skip(1)
        .filter(|l| !matches!(l, Ok(s) if s.trim().is_empty()))
        .map(|l| serde_json::from_str(&l?).map_err(invalid))
        .collect()
}
