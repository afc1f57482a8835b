//! Comma-separated time series with a header row, floats at 17 significant
//! digits.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use crate::diffusion::Observation;
use crate::dks::DksObservation;
use crate::error::Result;

pub const DIFFUSION_COLUMNS: [&str; 13] = [
    "t", "mass", "F_total", "F_tf", "F_w", "F_h", "F_d", "F_u", "minus_TS", "S", "sigma2", "mu_spread", "dt",
];

pub fn diffusion_row(o: &Observation) -> Vec<f64> {
    let e = &o.energy;
    vec![
        o.t, o.mass, e.total, e.e_tf, e.e_w, e.e_h, e.e_d, e.e_u, e.minus_ts, o.entropy, o.sigma2, o.mu_spread, o.dt,
    ]
}

/// Columns of a damped Kohn-Sham series; per-orbital norms follow, then the
/// L1 distance to the diffusion reference when one runs alongside.
pub fn dks_columns(orbitals: usize, with_reference: bool) -> Vec<String> {
    let mut cols: Vec<String> = ["t", "mass", "E_total", "E_kin", "E_h", "E_d", "E_u", "minus_TS", "sigma2", "dt"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    cols.extend((0..orbitals).map(|k| format!("norm_{k}")));
    if with_reference {
        cols.push("l1_vs_diffusion".into());
    }
    cols
}

pub fn dks_row(o: &DksObservation, reference_l1: Option<f64>) -> Vec<f64> {
    let e = &o.energy;
    let mut row = vec![o.t, o.mass, e.total, e.kinetic, e.e_h, e.e_d, e.e_u, e.minus_ts, o.sigma2, o.dt];
    row.extend(&o.norms);
    row.extend(reference_l1);
    row
}

pub fn format_value(v: f64) -> String {
    format!("{v:.16e}")
}

pub struct SeriesWriter {
    out: BufWriter<File>,
    width: usize,
}

impl SeriesWriter {
    pub fn create<S: AsRef<str>>(path: &Path, columns: &[S]) -> Result<Self> {
        let mut out = BufWriter::new(File::create(path)?);
        let header: Vec<&str> = columns.iter().map(|c| c.as_ref()).collect();
        writeln!(out, "{}", header.join(","))?;
        Ok(Self {
            out,
            width: columns.len(),
        })
    }

    pub fn row(&mut self, values: &[f64]) -> Result<()> {
        debug_assert_eq!(values.len(), self.width);
        let cells: Vec<String> = values.iter().map(|v| format_value(*v)).collect();
        writeln!(self.out, "{}", cells.join(","))?;
        Ok(())
    }

    pub fn finish(mut self) -> Result<()> {
        self.out.flush()?;
        Ok(())
    }
}

/// Reads a series back as (header, rows).
pub fn read_series(path: &Path) -> Result<(Vec<String>, Vec<Vec<f64>>)> {
    let text = std::fs::read_to_string(path)?;
    let mut lines = text.lines();
    let header = lines
        .next()
        .unwrap_or_default()
        .split(',')
        .map(str::to_string)
        .collect();
    let rows = lines
        .filter(|l| !l.is_empty())
        .map(|l| {
            l.split(',')
                .map(|c| {
                    c.parse::<f64>()
                        .map_err(|e| crate::Error::Snapshot(format!("bad number `{c}` in series: {e}")))
                })
                .collect()
        })
        .collect::<Result<_>>()?;
    Ok((header, rows))
}
