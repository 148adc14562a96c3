//! CSV and JSON writers. Every floating point number is written with 17
//! significant digits, which round-trips doubles exactly.

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::Path;

use serde::Serialize;
use serde_json::ser::{Formatter, PrettyFormatter};

use super::CliError;
use crate::evolution::Trajectory;
use crate::grid::{Grid, ScalarField};

pub fn num(v: f64) -> String {
    format!("{v:.16e}")
}

/// Pretty JSON with full-precision floats.
struct FullPrecision<'a>(PrettyFormatter<'a>);

impl Formatter for FullPrecision<'_> {
    fn write_f64<W: ?Sized + Write>(&mut self, w: &mut W, value: f64) -> io::Result<()> {
        w.write_all(num(value).as_bytes())
    }

    fn begin_array<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.begin_array(w)
    }

    fn end_array<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_array(w)
    }

    fn begin_array_value<W: ?Sized + Write>(&mut self, w: &mut W, first: bool) -> io::Result<()> {
        self.0.begin_array_value(w, first)
    }

    fn end_array_value<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_array_value(w)
    }

    fn begin_object<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.begin_object(w)
    }

    fn end_object<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_object(w)
    }

    fn begin_object_key<W: ?Sized + Write>(&mut self, w: &mut W, first: bool) -> io::Result<()> {
        self.0.begin_object_key(w, first)
    }

    fn begin_object_value<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.begin_object_value(w)
    }

    fn end_object_value<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_object_value(w)
    }
}

pub fn to_json_string<T: Serialize>(value: &T) -> Result<String, CliError> {
    let mut buf = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut buf, FullPrecision(PrettyFormatter::new()));
    value.serialize(&mut ser)?;
    buf.push(b'\n');
    Ok(String::from_utf8(buf).expect("serde_json writes UTF-8"))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let mut f = BufWriter::new(File::create(path)?);
    f.write_all(to_json_string(value)?.as_bytes())?;
    f.flush()?;
    Ok(())
}

fn coordinate_header(grid: &Grid) -> Vec<&'static str> {
    ["x", "y"][..grid.dim()].to_vec()
}

/// One row per interior node: coordinates then the value.
pub fn write_field(path: &Path, field: &ScalarField, value_name: &str) -> Result<(), CliError> {
    let grid = field.grid();
    let mut w = csv::Writer::from_path(path)?;
    let mut header = coordinate_header(grid);
    header.push(value_name);
    w.write_record(&header)?;
    for (i, v) in field.values().iter().enumerate() {
        let mut row: Vec<String> = grid.coordinates(i).into_iter().map(num).collect();
        row.push(num(*v));
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

/// Reads the value column of a field CSV written by [`write_field`],
/// checking that the node coordinates match `grid`.
pub fn read_field(path: &Path, grid: &Grid) -> Result<Vec<f64>, CliError> {
    let mut r = csv::Reader::from_path(path)?;
    let dim = grid.dim();
    let mut values = Vec::with_capacity(grid.len());
    for (i, rec) in r.records().enumerate() {
        let rec = rec?;
        let parse = |k: usize| -> Result<f64, CliError> {
            rec.get(k)
                .and_then(|s| s.trim().parse::<f64>().ok())
                .ok_or_else(|| CliError::Config(format!("{}: bad number in row {}", path.display(), i + 1)))
        };
        if i >= grid.len() {
            return Err(CliError::Config(format!("{}: more rows than grid nodes", path.display())));
        }
        let coords = grid.coordinates(i);
        for (k, c) in coords.iter().enumerate() {
            if (parse(k)? - c).abs() > 1e-9 {
                return Err(CliError::Config(format!("{}: row {} is not on the configured grid", path.display(), i + 1)));
            }
        }
        values.push(parse(dim)?);
    }
    if values.len() != grid.len() {
        return Err(CliError::Config(format!(
            "{}: {} rows, grid has {} nodes",
            path.display(),
            values.len(),
            grid.len()
        )));
    }
    Ok(values)
}

pub fn write_trajectory(path: &Path, traj: &Trajectory) -> Result<(), CliError> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["t", "ell", "l2", "linf", "min", "picard_iters"])?;
    for k in 0..traj.len() {
        w.write_record([
            num(traj.times[k]),
            num(traj.ell_series[k]),
            num(traj.l2_series[k]),
            num(traj.linf_series[k]),
            num(traj.min_series[k]),
            traj.picard_iters[k].to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_rows(path: &Path, header: &[&str], rows: impl IntoIterator<Item = Vec<f64>>) -> Result<(), CliError> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(header)?;
    for row in rows {
        w.write_record(row.into_iter().map(num))?;
    }
    w.flush()?;
    Ok(())
}

pub fn snapshot_name(t: f64) -> String {
    format!("u_t{t:.6}.csv")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn numbers_round_trip() {
        for v in [0.1, 1.0 / 3.0, -2.5e-300, 6.02214076e23, 0.0, f64::MIN_POSITIVE] {
            let s = num(v);
            assert_eq!(s.parse::<f64>().unwrap(), v, "{s}");
        }
        assert_eq!(num(0.1), "1.0000000000000001e-1");
    }

    #[test]
    fn json_uses_full_precision() {
        #[derive(Serialize)]
        struct S {
            a: f64,
            b: Vec<f64>,
            n: usize,
            nan: f64,
        }
        let s = to_json_string(&S { a: 0.1, b: vec![1.0, 2.5], n: 3, nan: f64::NAN }).unwrap();
        assert!(s.contains("\"a\": 1.0000000000000001e-1"), "{s}");
        assert!(s.contains("\"n\": 3"));
        assert!(s.contains("\"nan\": null"));
        let back: serde_json::Value = serde_json::from_str(&s).unwrap();
        assert_eq!(back["a"].as_f64(), Some(0.1));
    }
}
