//! Demonstration file format: a single JSON header line followed by a CSV
//! body of T rows by D columns in layout order.
//!
//! Floats are written in shortest round-trip decimal form, so write/read is
//! bit-exact for every finite value.

use std::io::{BufRead, Write};

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::{Demonstration, ModalityLayout};
use crate::error::{Error, Result};

#[derive(Serialize, Deserialize)]
struct DemoHeader {
    layout: ModalityLayout,
    sample_rate: f64,
    duration: usize,
}

pub fn write_demonstration<W: Write>(demo: &Demonstration, mut w: W) -> Result<()> {
    let header = DemoHeader {
        layout: demo.layout().clone(),
        sample_rate: demo.sample_rate(),
        duration: demo.duration(),
    };
    serde_json::to_writer(&mut w, &header)?;
    w.write_all(b"\n")?;
    let d = demo.dof_count();
    let mut line = String::new();
    for t in 0..demo.duration() {
        line.clear();
        for dof in 0..d {
            if dof > 0 {
                line.push(',');
            }
            line.push_str(&format_float(demo.samples()[(dof, t)]));
        }
        line.push('\n');
        w.write_all(line.as_bytes())?;
    }
    Ok(())
}

pub fn read_demonstration<R: BufRead>(mut r: R) -> Result<Demonstration> {
    let mut header_line = String::new();
    if r.read_line(&mut header_line)? == 0 {
        return Err(Error::Data("empty demonstration file".into()));
    }
    let header: DemoHeader = serde_json::from_str(header_line.trim_end())?;
    let d = header.layout.total_dofs();
    let t_total = header.duration;

    let mut samples = DMatrix::zeros(d, t_total);
    let mut t = 0usize;
    for line in r.lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        if t >= t_total {
            return Err(Error::Data(format!(
                "demonstration body has more than the declared {t_total} rows"
            )));
        }
        let mut dof = 0usize;
        for field in line.split(',') {
            if dof >= d {
                return Err(Error::Data(format!("row {t} has more than {d} columns")));
            }
            samples[(dof, t)] = field.trim().parse::<f64>().map_err(|e| {
                Error::Data(format!("row {t} column {dof}: bad float '{field}': {e}"))
            })?;
            dof += 1;
        }
        if dof != d {
            return Err(Error::Data(format!("row {t} has {dof} columns, expected {d}")));
        }
        t += 1;
    }
    if t != t_total {
        return Err(Error::Data(format!(
            "demonstration body has {t} rows, header declares {t_total}"
        )));
    }
    Demonstration::new(header.layout, samples, header.sample_rate)
}

pub fn write_demonstration_file(demo: &Demonstration, path: &std::path::Path) -> Result<()> {
    let file = std::fs::File::create(path)?;
    write_demonstration(demo, std::io::BufWriter::new(file))
}

pub fn read_demonstration_file(path: &std::path::Path) -> Result<Demonstration> {
    let file = std::fs::File::open(path)?;
    read_demonstration(std::io::BufReader::new(file))
}

/// Shortest decimal representation that parses back to the same bits.
pub(crate) fn format_float(v: f64) -> String {
    format!("{v}")
}
