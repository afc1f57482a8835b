//! Self-describing field snapshots.
//!
//! A snapshot is a TOML header (schema version, config hash, time, grid
//! metadata, stepper state and the embedded canonical config), a line
//! `---`, then comma-separated columns with a header row. Field values are
//! written in shortest round-trip form so a restore is bit-exact.

use std::path::Path;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::diffusion::DiffusionState;
use crate::dks::{DksState, Orbital, OrbitalSet};
use crate::error::{Error, Result};
use crate::functionals::{DensityField, FreeEnergyModel};
use crate::grid::{Boundary, Grid, ScalarField};
use crate::io::config::{config_from_value, Engine, RunConfig};

pub const SCHEMA_VERSION: u32 = 1;

const SEPARATOR: &str = "---";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Header {
    schema_version: u32,
    engine: Engine,
    config_hash: String,
    t: f64,
    dt: f64,
    streak: usize,
    n: usize,
    h: f64,
    length: f64,
    boundary: Boundary,
    columns: Vec<String>,
    occupations: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    reference: Option<ReferenceStepper>,
    config: toml::Value,
}

/// Stepper state of the diffusion run carried alongside an orbital run;
/// its density is the `reference_rho` column.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReferenceStepper {
    pub dt: f64,
    pub streak: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Snapshot {
    pub engine: Engine,
    pub config_hash: String,
    pub config: RunConfig,
    pub t: f64,
    pub dt: f64,
    pub streak: usize,
    pub grid: Grid,
    pub columns: Vec<String>,
    pub occupations: Vec<f64>,
    pub reference: Option<ReferenceStepper>,
    /// One vector per column, `x` first.
    pub data: Vec<Vec<f64>>,
}

impl Snapshot {
    pub fn from_diffusion(config: &RunConfig, state: &DiffusionState) -> Result<Self> {
        let grid = *state.grid();
        Ok(Self {
            engine: Engine::Diffusion,
            config_hash: config.hash()?,
            config: config.clone(),
            t: state.t(),
            dt: state.dt(),
            streak: state.streak(),
            grid,
            columns: vec!["x".into(), "rho".into()],
            occupations: Vec::new(),
            reference: None,
            data: vec![grid.coords(), state.rho_values().to_vec()],
        })
    }

    pub fn from_dks(config: &RunConfig, state: &DksState) -> Result<Self> {
        let grid = *state.grid();
        let mut columns = vec!["x".to_string()];
        let mut data = vec![grid.coords()];
        let mut occupations = Vec::new();
        for (k, o) in state.orbitals().orbitals().iter().enumerate() {
            columns.push(format!("re_{k}"));
            columns.push(format!("im_{k}"));
            data.push(o.values().iter().map(|v| v.re).collect());
            data.push(o.values().iter().map(|v| v.im).collect());
            occupations.push(o.occupation());
        }
        Ok(Self {
            engine: Engine::Dks,
            config_hash: config.hash()?,
            config: config.clone(),
            t: state.t(),
            dt: state.dt(),
            streak: 0,
            grid,
            columns,
            occupations,
            reference: None,
            data,
        })
    }

    /// Adds the diffusion run compared against an orbital run.
    pub fn with_reference(mut self, reference: &DiffusionState) -> Self {
        self.columns.push("reference_rho".into());
        self.data.push(reference.rho_values().to_vec());
        self.reference = Some(ReferenceStepper {
            dt: reference.dt(),
            streak: reference.streak(),
        });
        self
    }

    pub fn to_text(&self) -> Result<String> {
        let header = Header {
            schema_version: SCHEMA_VERSION,
            engine: self.engine,
            config_hash: self.config_hash.clone(),
            t: self.t,
            dt: self.dt,
            streak: self.streak,
            n: self.grid.n(),
            h: self.grid.spacing(),
            length: self.grid.length(),
            boundary: self.grid.boundary(),
            columns: self.columns.clone(),
            occupations: self.occupations.clone(),
            reference: self.reference,
            config: self.config.to_value()?,
        };
        let mut text = toml::to_string(&header).map_err(|e| Error::Snapshot(e.to_string()))?;
        text.push_str(SEPARATOR);
        text.push('\n');
        text.push_str(&self.columns.join(","));
        text.push('\n');
        for i in 0..self.grid.n() {
            let row: Vec<String> = self.data.iter().map(|c| format!("{:e}", c[i])).collect();
            text.push_str(&row.join(","));
            text.push('\n');
        }
        Ok(text)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        // Write-then-rename so a crash never leaves a truncated checkpoint.
        let tmp = path.with_extension("tmp");
        std::fs::write(&tmp, self.to_text()?)?;
        std::fs::rename(&tmp, path)?;
        Ok(())
    }

    pub fn parse(text: &str) -> Result<Self> {
        let bad = |m: String| Error::Snapshot(m);
        let split = text
            .find(&format!("\n{SEPARATOR}\n"))
            .ok_or_else(|| bad("missing `---` separator".into()))?;
        let header: Header = toml::from_str(&text[..split]).map_err(|e| bad(e.to_string()))?;
        if header.schema_version != SCHEMA_VERSION {
            return Err(bad(format!(
                "schema version {} is not supported (expected {SCHEMA_VERSION})",
                header.schema_version
            )));
        }
        let config = config_from_value(header.config)?;
        if config.hash()? != header.config_hash {
            return Err(bad("embedded config does not match its recorded hash".into()));
        }
        let grid = Grid::new(header.n, header.length, header.boundary)?;
        if (grid.spacing() - header.h).abs() > 1e-12 * header.h {
            return Err(bad(format!("spacing {} inconsistent with n and length", header.h)));
        }
        let mut lines = text[split + SEPARATOR.len() + 2..].lines();
        let names: Vec<String> = lines
            .next()
            .unwrap_or_default()
            .split(',')
            .map(str::to_string)
            .collect();
        if names != header.columns {
            return Err(bad("column header does not match metadata".into()));
        }
        let mut data = vec![Vec::with_capacity(header.n); names.len()];
        for (row, line) in lines.filter(|l| !l.is_empty()).enumerate() {
            let cells: Vec<&str> = line.split(',').collect();
            if cells.len() != names.len() {
                return Err(bad(format!("row {row} has {} cells, expected {}", cells.len(), names.len())));
            }
            for (col, cell) in cells.iter().enumerate() {
                let v: f64 = cell.parse().map_err(|e| bad(format!("row {row}: `{cell}`: {e}")))?;
                data[col].push(v);
            }
        }
        if data.iter().any(|c| c.len() != header.n) {
            return Err(bad(format!("expected {} rows", header.n)));
        }
        Ok(Self {
            engine: header.engine,
            config_hash: header.config_hash,
            config,
            t: header.t,
            dt: header.dt,
            streak: header.streak,
            grid,
            columns: names,
            occupations: header.occupations,
            reference: header.reference,
            data,
        })
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Snapshot(format!("{}: {e}", path.display())))?;
        Self::parse(&text)
    }

    fn column(&self, name: &str) -> Option<&Vec<f64>> {
        self.columns.iter().position(|c| c == name).map(|i| &self.data[i])
    }

    /// The density payload; for orbital snapshots, `Σ n_k |φ_k|²`.
    pub fn density(&self) -> Result<Vec<f64>> {
        if let Some(rho) = self.column("rho") {
            return Ok(rho.clone());
        }
        let orbitals = self.orbital_values()?;
        let mut rho = vec![0.0; self.grid.n()];
        for (occ, phi) in self.occupations.iter().zip(orbitals) {
            for (r, v) in rho.iter_mut().zip(phi) {
                *r += occ * v.norm_sqr();
            }
        }
        Ok(rho)
    }

    fn orbital_values(&self) -> Result<Vec<Vec<Complex64>>> {
        (0..self.occupations.len())
            .map(|k| {
                let re = self.column(&format!("re_{k}"));
                let im = self.column(&format!("im_{k}"));
                match (re, im) {
                    (Some(re), Some(im)) => Ok(re.iter().zip(im).map(|(a, b)| Complex64::new(*a, *b)).collect()),
                    _ => Err(Error::Snapshot(format!("orbital {k} columns missing"))),
                }
            })
            .collect()
    }

    /// Rebuilds the diffusion state under `config`.
    pub fn restore_diffusion(&self, config: &RunConfig) -> Result<DiffusionState> {
        if self.engine != Engine::Diffusion {
            return Err(Error::Snapshot("not a diffusion snapshot".into()));
        }
        let grid = self.check_grid(config)?;
        let rho = DensityField::new(ScalarField::new(grid, self.density()?)?, &config.params)?;
        let model = FreeEnergyModel::new(config.params, &config.external_potential(&grid)?)?;
        DiffusionState::restore(model, rho, config.stepper_options(), self.t, self.dt, self.streak)
    }

    pub fn restore_dks(&self, config: &RunConfig) -> Result<DksState> {
        if self.engine != Engine::Dks {
            return Err(Error::Snapshot("not an orbital snapshot".into()));
        }
        let grid = self.check_grid(config)?;
        let orbitals = self
            .orbital_values()?
            .into_iter()
            .zip(&self.occupations)
            .map(|(v, occ)| Orbital::new(grid, v, *occ))
            .collect::<Result<Vec<_>>>()?;
        let set = OrbitalSet::new(config.params, orbitals)?;
        DksState::restore(set, &config.external_potential(&grid)?, config.dks_options(), self.t, self.dt)
    }

    /// The diffusion reference of an orbital run, if one was saved.
    pub fn restore_reference(&self, config: &RunConfig) -> Result<Option<DiffusionState>> {
        let (Some(stepper), Some(rho)) = (self.reference, self.column("reference_rho")) else {
            return Ok(None);
        };
        let grid = self.check_grid(config)?;
        let rho = DensityField::new(ScalarField::new(grid, rho.clone())?, &config.params)?;
        let model = FreeEnergyModel::new(config.params, &config.external_potential(&grid)?)?;
        DiffusionState::restore(model, rho, config.stepper_options(), self.t, stepper.dt, stepper.streak).map(Some)
    }

    fn check_grid(&self, config: &RunConfig) -> Result<Grid> {
        let grid = config.make_grid()?;
        if grid != self.grid {
            return Err(Error::Snapshot("config grid differs from the snapshot grid".into()));
        }
        Ok(grid)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::io::config::parse_config;

    fn config() -> RunConfig {
        parse_config(
            r#"
engine = "diffusion"
[grid]
n = 32
length = 8.0
boundary = "no_flux"
[params]
temperature = 0.5
friction = 2.0
[initial]
kind = "gaussian"
center = 4.0
sigma2 = 0.7
[schedule]
t_end = 0.1
"#,
        )
        .unwrap()
    }

    #[test]
    fn diffusion_snapshot_round_trips_exactly() {
        let cfg = config();
        let grid = cfg.make_grid().unwrap();
        let model = FreeEnergyModel::new(cfg.params, &cfg.external_potential(&grid).unwrap()).unwrap();
        let mut state =
            DiffusionState::new(model, cfg.initial_density(&grid).unwrap(), cfg.stepper_options()).unwrap();
        for _ in 0..7 {
            state.step().unwrap();
        }
        let snap = Snapshot::from_diffusion(&cfg, &state).unwrap();
        let back = Snapshot::parse(&snap.to_text().unwrap()).unwrap();
        assert_eq!(back, snap);
        let restored = back.restore_diffusion(&cfg).unwrap();
        assert_eq!(restored.rho_values(), state.rho_values());
        assert_eq!(restored.t(), state.t());
        assert_eq!(restored.dt(), state.dt());
    }

    #[test]
    fn tampered_config_is_detected() {
        let cfg = config();
        let grid = cfg.make_grid().unwrap();
        let model = FreeEnergyModel::new(cfg.params, &cfg.external_potential(&grid).unwrap()).unwrap();
        let state = DiffusionState::new(model, cfg.initial_density(&grid).unwrap(), cfg.stepper_options()).unwrap();
        let text = Snapshot::from_diffusion(&cfg, &state).unwrap().to_text().unwrap();
        let tampered = text.replace("friction = 2.0", "friction = 3.0");
        assert_ne!(tampered, text);
        assert!(matches!(Snapshot::parse(&tampered), Err(Error::Snapshot(_))));
        assert!(Snapshot::parse("no separator").is_err());
    }
}
