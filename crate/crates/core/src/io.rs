//! JSON and CSV encodings used by the command line tool.
//!
//! Floats are written with 17 significant digits so every binary64 value
//! round-trips. CSV files have a header row, comma separators and LF endings.

use std::io::{self, Read, Write};

use serde::Serialize;
use serde_json::ser::Formatter;

use crate::emden_fowler::EfState;
use crate::error::{Error, Result};
use crate::radial_pucci::{LogGrid, Provenance, RadialFunction};

/// `x` with 17 significant digits, positional when the exponent is moderate.
pub fn format_f64(x: f64) -> String {
    if !x.is_finite() {
        return if x.is_nan() {
            "NaN".into()
        } else if x > 0.0 {
            "inf".into()
        } else {
            "-inf".into()
        };
    }
    let sci = format!("{x:.16e}");
    let exp: i32 = sci[sci.find('e').unwrap() + 1..].parse().unwrap();
    if (-5..17).contains(&exp) {
        format!("{x:.*}", (16 - exp) as usize)
    } else {
        sci
    }
}

struct Sig17;

impl Formatter for Sig17 {
    fn write_f64<W: ?Sized + Write>(&mut self, writer: &mut W, value: f64) -> io::Result<()> {
        writer.write_all(format_f64(value).as_bytes())
    }

    fn write_f32<W: ?Sized + Write>(&mut self, writer: &mut W, value: f32) -> io::Result<()> {
        self.write_f64(writer, value as f64)
    }
}

/// Single-line JSON with full-precision floats. Non-finite floats become `null`.
pub fn to_json<T: Serialize + ?Sized>(value: &T) -> String {
    let mut out = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut out, Sig17);
    value.serialize(&mut ser).expect("in-memory JSON serialization");
    String::from_utf8(out).expect("serde_json writes UTF-8")
}

/// Writes equally long columns under `header`.
pub fn write_columns<W: Write>(w: &mut W, header: &[&str], columns: &[&[f64]]) -> io::Result<()> {
    let n = columns.first().map_or(0, |c| c.len());
    debug_assert!(columns.iter().all(|c| c.len() == n) && columns.len() == header.len());
    writeln!(w, "{}", header.join(","))?;
    let mut line = String::new();
    for i in 0..n {
        line.clear();
        for (j, col) in columns.iter().enumerate() {
            if j > 0 {
                line.push(',');
            }
            line.push_str(&format_f64(col[i]));
        }
        line.push('\n');
        w.write_all(line.as_bytes())?;
    }
    Ok(())
}

/// Header and numeric columns of a CSV document.
pub fn read_columns<R: Read>(r: R) -> Result<(Vec<String>, Vec<Vec<f64>>)> {
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(r);
    let header: Vec<String> = reader
        .headers()
        .map_err(|e| Error::InvalidInput(e.to_string()))?
        .iter()
        .map(str::to_string)
        .collect();
    let mut cols = vec![Vec::new(); header.len()];
    for (line, rec) in reader.records().enumerate() {
        let rec = rec.map_err(|e| Error::InvalidInput(e.to_string()))?;
        for (j, field) in rec.iter().enumerate() {
            let x: f64 = field
                .parse()
                .map_err(|_| Error::InvalidInput(format!("row {}: `{field}` is not a number", line + 1)))?;
            cols[j].push(x);
        }
    }
    Ok((header, cols))
}

pub fn write_radial<W: Write>(w: &mut W, f: &RadialFunction, derivatives: bool) -> io::Result<()> {
    if derivatives {
        write_columns(w, &["r", "u", "du", "ddu"], &[f.r(), &f.u, &f.du, &f.ddu])
    } else {
        write_columns(w, &["r", "u"], &[f.r(), &f.u])
    }
}

/// Reads `r,u[,du,ddu]`; without derivative columns they come from finite differences.
pub fn read_radial<R: Read>(r: R) -> Result<RadialFunction> {
    let (header, mut cols) = read_columns(r)?;
    let names: Vec<&str> = header.iter().map(String::as_str).collect();
    let grid = |c: Vec<f64>| LogGrid::from_nodes(c);
    match names.as_slice() {
        ["r", "u"] => {
            let u = cols.pop().unwrap();
            RadialFunction::from_values(grid(cols.pop().unwrap())?, u)
        }
        ["r", "u", "du", "ddu"] => {
            let ddu = cols.pop().unwrap();
            let du = cols.pop().unwrap();
            let u = cols.pop().unwrap();
            Ok(RadialFunction {
                grid: grid(cols.pop().unwrap())?,
                u,
                du,
                ddu,
                provenance: Provenance::Analytic,
            })
        }
        _ => Err(Error::InvalidInput(format!(
            "expected columns r,u or r,u,du,ddu, got {}",
            header.join(",")
        ))),
    }
}

pub fn write_trajectory<W: Write>(w: &mut W, states: &[EfState]) -> io::Result<()> {
    let t: Vec<f64> = states.iter().map(|s| s.t).collect();
    let x: Vec<f64> = states.iter().map(|s| s.x).collect();
    let xp: Vec<f64> = states.iter().map(|s| s.xp).collect();
    write_columns(w, &["t", "x", "xp"], &[&t, &x, &xp])
}
