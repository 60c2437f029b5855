//! Long-format panel CSV: header `unit,time,y[,g0,sigma]`, 1-based unit,
//! time and group indices, one row per observation.

use std::io::{Read, Write};
use std::path::Path;

use crate::dgp::PanelData;
use crate::error::{Error, Result};

/// A panel read from CSV together with any per-unit truth columns.
#[derive(Debug, Clone)]
pub struct PanelCsv {
    pub panel: PanelData,
    /// 0-based true labels, when a `g0` column is present.
    pub g0: Option<Vec<usize>>,
    pub sigma: Option<Vec<f64>>,
}

pub fn write_panel<W: Write>(mut out: W, panel: &PanelData) -> Result<()> {
    let truth = panel.truth.as_ref();
    if truth.is_some() {
        writeln!(out, "unit,time,y,g0,sigma")?;
    } else {
        writeln!(out, "unit,time,y")?;
    }
    for (i, row) in panel.rows().enumerate() {
        for (t, y) in row.iter().enumerate() {
            match truth {
                Some(tr) => writeln!(
                    out,
                    "{},{},{},{},{}",
                    i + 1,
                    t + 1,
                    y,
                    tr.g0.labels()[i] + 1,
                    tr.sigma[i]
                )?,
                None => writeln!(out, "{},{},{}", i + 1, t + 1, y)?,
            }
        }
    }
    out.flush()?;
    Ok(())
}

pub fn write_panel_file(path: &Path, panel: &PanelData) -> Result<()> {
    let file = std::fs::File::create(path)?;
    write_panel(std::io::BufWriter::new(file), panel)
}

fn data_err(line: u64, msg: impl std::fmt::Display) -> Error {
    Error::Data(format!("row {line}: {msg}"))
}

fn parse_index(field: &str, name: &str, line: u64) -> Result<usize> {
    if field.trim().is_empty() {
        return Err(data_err(line, format!("missing {name}")));
    }
    match field.trim().parse::<usize>() {
        Ok(v) if v >= 1 => Ok(v),
        _ => Err(data_err(line, format!("{name} must be a positive integer, got {field:?}"))),
    }
}

fn parse_real(field: &str, name: &str, line: u64) -> Result<f64> {
    if field.trim().is_empty() {
        return Err(data_err(line, format!("missing {name}")));
    }
    match field.trim().parse::<f64>() {
        Ok(v) if v.is_finite() => Ok(v),
        _ => Err(data_err(line, format!("{name} must be a finite number, got {field:?}"))),
    }
}

/// Reads a balanced long-format panel. Rows may come in any order; every
/// `(unit, time)` cell in `1..=N x 1..=T` must appear exactly once.
pub fn read_panel<R: Read>(input: R) -> Result<PanelCsv> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(input);
    let header: Vec<String> = reader.headers()?.iter().map(str::to_owned).collect();
    let col = |name: &str| header.iter().position(|h| h == name);
    let (Some(cu), Some(ct), Some(cy)) = (col("unit"), col("time"), col("y")) else {
        return Err(Error::Data(format!(
            "row 1: header must contain unit,time,y; found {}",
            header.join(",")
        )));
    };
    let (cg, cs) = (col("g0"), col("sigma"));

    struct Cell {
        unit: usize,
        time: usize,
        y: f64,
        g0: Option<usize>,
        sigma: Option<f64>,
        line: u64,
    }
    let mut cells = Vec::new();
    for record in reader.records() {
        let record = record?;
        let line = record.position().map_or(0, |p| p.line());
        if record.len() != header.len() {
            return Err(data_err(
                line,
                format!("expected {} fields, found {}", header.len(), record.len()),
            ));
        }
        cells.push(Cell {
            unit: parse_index(&record[cu], "unit", line)?,
            time: parse_index(&record[ct], "time", line)?,
            y: parse_real(&record[cy], "y", line)?,
            g0: cg.map(|c| parse_index(&record[c], "g0", line)).transpose()?,
            sigma: cs.map(|c| parse_real(&record[c], "sigma", line)).transpose()?,
            line,
        });
    }
    if cells.is_empty() {
        return Err(Error::Data("panel has no observations".into()));
    }
    let n = cells.iter().map(|c| c.unit).max().unwrap_or(0);
    let t = cells.iter().map(|c| c.time).max().unwrap_or(0);
    let mut y = vec![f64::NAN; n * t];
    let mut seen = vec![false; n * t];
    let mut g0 = cg.map(|_| vec![None::<usize>; n]);
    let mut sigma = cs.map(|_| vec![None::<f64>; n]);
    for c in &cells {
        let k = (c.unit - 1) * t + (c.time - 1);
        if std::mem::replace(&mut seen[k], true) {
            return Err(data_err(c.line, format!("duplicate cell unit {}, time {}", c.unit, c.time)));
        }
        y[k] = c.y;
        if let (Some(store), Some(v)) = (g0.as_mut(), c.g0) {
            match store[c.unit - 1] {
                Some(prev) if prev != v - 1 => {
                    return Err(data_err(c.line, format!("g0 changes within unit {}", c.unit)))
                }
                _ => store[c.unit - 1] = Some(v - 1),
            }
        }
        if let (Some(store), Some(v)) = (sigma.as_mut(), c.sigma) {
            match store[c.unit - 1] {
                Some(prev) if prev != v => {
                    return Err(data_err(c.line, format!("sigma changes within unit {}", c.unit)))
                }
                _ => store[c.unit - 1] = Some(v),
            }
        }
    }
    if let Some(k) = seen.iter().position(|s| !s) {
        return Err(Error::Data(format!(
            "missing observation for unit {}, time {} (panel must be balanced)",
            k / t + 1,
            k % t + 1
        )));
    }
    Ok(PanelCsv {
        panel: PanelData::new(n, t, y)?,
        g0: g0.map(|v| v.into_iter().map(|x| x.unwrap_or(0)).collect()),
        sigma: sigma.map(|v| v.into_iter().map(|x| x.unwrap_or(f64::NAN)).collect()),
    })
}

pub fn read_panel_file(path: &Path) -> Result<PanelCsv> {
    let file = std::fs::File::open(path)?;
    read_panel(std::io::BufReader::new(file))
}
