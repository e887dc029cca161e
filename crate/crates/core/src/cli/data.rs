//! Dataset files: a `y,x1,...,xd` header, then one observation per line with
//! `y` in `{-1, 1}`.

use std::io::{Read, Write};

use crate::error::{Error, Result};
use crate::utility::{Dataset, Label};

pub fn read_dataset<R: Read>(input: R) -> Result<Dataset> {
    let mut reader = csv::ReaderBuilder::new().has_headers(false).flexible(true).trim(csv::Trim::All).from_reader(input);
    let mut records = reader.records();
    let header = match records.next() {
        None => return Err(Error::Empty),
        Some(r) => r.map_err(csv_error)?,
    };
    let d = header.len().saturating_sub(1);
    let expected: Vec<String> = std::iter::once("y".to_string()).chain((1..=d).map(|j| format!("x{j}"))).collect();
    if d == 0 || header.iter().ne(expected.iter().map(String::as_str)) {
        return Err(Error::Parse { line: 1, message: format!("header must be y,x1,...,xd, got '{}'", header.iter().collect::<Vec<_>>().join(",")) });
    }
    let (mut labels, mut x) = (Vec::new(), Vec::new());
    for (row, record) in records.enumerate() {
        let record = record.map_err(csv_error)?;
        let line = record.position().map_or(row + 2, |p| p.line() as usize);
        let parse_err = |message: String| Error::Parse { line, message: format!("row {}: {message}", row + 1) };
        if record.len() != d + 1 {
            return Err(parse_err(format!("expected {} fields, got {}", d + 1, record.len())));
        }
        let label = record[0]
            .parse::<i64>()
            .ok()
            .and_then(Label::from_i64)
            .ok_or_else(|| parse_err(format!("label '{}' is not -1 or 1", &record[0])))?;
        labels.push(label);
        for j in 1..=d {
            let v: f64 = record[j].parse().map_err(|_| parse_err(format!("x{j} = '{}' is not a number", &record[j])))?;
            if !v.is_finite() {
                return Err(parse_err(format!("x{j} is not finite")));
            }
            x.push(v);
        }
    }
    if labels.is_empty() {
        return Err(Error::Empty);
    }
    Dataset::from_parts(d, labels, x)
}

pub fn write_dataset<W: Write>(data: &Dataset, mut out: W) -> Result<()> {
    let header: Vec<String> = std::iter::once("y".to_string()).chain((1..=data.dim()).map(|j| format!("x{j}"))).collect();
    writeln!(out, "{}", header.join(","))?;
    for obs in data.iter() {
        let xs: Vec<String> = obs.x.iter().map(|v| v.to_string()).collect();
        writeln!(out, "{},{}", obs.y, xs.join(","))?;
    }
    Ok(())
}

fn csv_error(e: csv::Error) -> Error {
    let line = e.position().map_or(0, |p| p.line() as usize);
    Error::Parse { line, message: e.to_string() }
}
