//! Run configuration: TOML in, canonical TOML out.
//!
//! Unknown keys are rejected. After parsing, every default is materialized
//! so that the canonical form (sorted keys, shortest round-trip floats)
//! fully describes the run and hashes stably.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::dks::{DksOptions, ThermalForm, PHASE_THRESHOLD_REL};
use crate::error::{Error, Result};
use crate::functionals::{DensityField, ModelParams};
use crate::grid::{Boundary, Grid, ScalarField, MIN_POINTS};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Engine {
    Diffusion,
    Dks,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub n: usize,
    pub length: f64,
    pub boundary: Boundary,
}

fn one() -> f64 {
    1.0
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum InitialCondition {
    Gaussian {
        center: f64,
        sigma2: f64,
        #[serde(default = "one")]
        mass: f64,
    },
    Uniform {
        value: f64,
    },
    FromSnapshot {
        path: PathBuf,
    },
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum PotentialSpec {
    #[default]
    Zero,
    /// `m ω² (x - center)² / 2`.
    Harmonic { omega: f64, center: f64 },
    /// One value per grid point.
    Tabulated { values: Vec<f64> },
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    #[default]
    Evolve,
    /// Diffusion only: relax to equilibrium, observing at the cadence.
    SteadyState,
}

/// Unit of the schedule times. `friction` reads them as `τ` with `t = b τ`,
/// which keeps strong-friction runs comparable across `b`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TimeScale {
    #[default]
    Absolute,
    Friction,
}

fn default_dt_min() -> f64 {
    1e-14
}

fn default_steady_tol() -> f64 {
    1e-7
}

fn default_max_steps() -> u64 {
    20_000_000
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Schedule {
    pub t_end: f64,
    #[serde(default)]
    pub cadence: f64,
    #[serde(default)]
    pub mode: Mode,
    #[serde(default)]
    pub time_scale: TimeScale,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dt_cap: Option<f64>,
    #[serde(default = "default_dt_min")]
    pub dt_min: f64,
    #[serde(default = "default_steady_tol")]
    pub steady_tol: f64,
    #[serde(default = "default_max_steps")]
    pub max_steps: u64,
}

fn default_dir() -> PathBuf {
    PathBuf::from("out")
}

fn default_series() -> String {
    "series.csv".into()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Outputs {
    #[serde(default = "default_dir")]
    pub dir: PathBuf,
    #[serde(default = "default_series")]
    pub series: String,
    /// Field snapshots every this much simulated time.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub snapshot_every: Option<f64>,
    /// A single resumable checkpoint, overwritten every this much time.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub checkpoint_every: Option<f64>,
}

impl Default for Outputs {
    fn default() -> Self {
        Self {
            dir: default_dir(),
            series: default_series(),
            snapshot_every: None,
            checkpoint_every: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DksSettings {
    pub thermal_form: ThermalForm,
    pub phase_threshold: f64,
    pub norm_tol: f64,
    /// Initial wavenumber `k₀` imprinted as `e^{i k₀ x}`.
    pub momentum: f64,
    /// Run the diffusion engine alongside and record the L1 distance.
    pub compare_diffusion: bool,
}

impl Default for DksSettings {
    fn default() -> Self {
        let o = DksOptions::default();
        Self {
            thermal_form: o.thermal_form,
            phase_threshold: PHASE_THRESHOLD_REL,
            norm_tol: o.norm_tol,
            momentum: 0.0,
            compare_diffusion: false,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub engine: Engine,
    #[serde(default)]
    pub seed: u64,
    pub grid: GridSpec,
    #[serde(default)]
    pub params: ModelParams,
    pub initial: InitialCondition,
    #[serde(default)]
    pub potential: PotentialSpec,
    pub schedule: Schedule,
    #[serde(default)]
    pub outputs: Outputs,
    #[serde(default)]
    pub dks: DksSettings,
}

fn positive(path: &str, v: f64) -> Result<()> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(Error::config(path, format!("must be finite and > 0, got {v}")))
    }
}

fn non_negative(path: &str, v: f64) -> Result<()> {
    if v.is_finite() && v >= 0.0 {
        Ok(())
    } else {
        Err(Error::config(path, format!("must be finite and >= 0, got {v}")))
    }
}

fn param_path(name: &str) -> String {
    match name {
        "hbar" | "mass" | "e2" | "kb" => format!("params.units.{name}"),
        _ => format!("params.{name}"),
    }
}

impl RunConfig {
    /// Checks every constraint without allocating fields.
    pub fn validate(&self) -> Result<()> {
        if self.grid.n < MIN_POINTS {
            return Err(Error::config("grid.n", format!("must be >= {MIN_POINTS}, got {}", self.grid.n)));
        }
        positive("grid.length", self.grid.length)?;
        self.params.validate().map_err(|e| match e {
            Error::InvalidParameter { name, reason } => Error::config(param_path(name), reason),
            other => other,
        })?;
        if self.engine == Engine::Diffusion && self.params.friction <= 0.0 {
            return Err(Error::config("params.friction", "the diffusion engine needs b > 0"));
        }
        if self.params.hartree_active() && self.grid.boundary == Boundary::Periodic && !self.params.background_neutralization {
            return Err(Error::config(
                "params.background_neutralization",
                "periodic Coulomb sums need a neutralizing background",
            ));
        }
        match &self.initial {
            InitialCondition::Gaussian { center, sigma2, mass } => {
                if !center.is_finite() {
                    return Err(Error::config("initial.center", "must be finite"));
                }
                positive("initial.sigma2", *sigma2)?;
                positive("initial.mass", *mass)?;
            }
            InitialCondition::Uniform { value } => positive("initial.value", *value)?,
            InitialCondition::FromSnapshot { .. } => {}
        }
        match &self.potential {
            PotentialSpec::Zero => {}
            PotentialSpec::Harmonic { omega, center } => {
                positive("potential.omega", *omega)?;
                if !center.is_finite() {
                    return Err(Error::config("potential.center", "must be finite"));
                }
            }
            PotentialSpec::Tabulated { values } => {
                if values.len() != self.grid.n {
                    return Err(Error::config(
                        "potential.values",
                        format!("expected {} values, got {}", self.grid.n, values.len()),
                    ));
                }
                if let Some(i) = values.iter().position(|v| !v.is_finite()) {
                    return Err(Error::config(format!("potential.values[{i}]"), "must be finite"));
                }
            }
        }
        let s = &self.schedule;
        non_negative("schedule.t_end", s.t_end)?;
        non_negative("schedule.cadence", s.cadence)?;
        if let Some(cap) = s.dt_cap {
            positive("schedule.dt_cap", cap)?;
        }
        positive("schedule.dt_min", s.dt_min)?;
        positive("schedule.steady_tol", s.steady_tol)?;
        if s.time_scale == TimeScale::Friction && self.params.friction <= 0.0 {
            return Err(Error::config("schedule.time_scale", "friction time needs b > 0"));
        }
        if s.mode == Mode::SteadyState && self.engine != Engine::Diffusion {
            return Err(Error::config("schedule.mode", "steady_state needs engine = \"diffusion\""));
        }
        if let Some(v) = self.outputs.snapshot_every {
            positive("outputs.snapshot_every", v)?;
        }
        if let Some(v) = self.outputs.checkpoint_every {
            positive("outputs.checkpoint_every", v)?;
        }
        if self.outputs.series.is_empty() {
            return Err(Error::config("outputs.series", "must name a file"));
        }
        positive("dks.phase_threshold", self.dks.phase_threshold)?;
        positive("dks.norm_tol", self.dks.norm_tol)?;
        if !self.dks.momentum.is_finite() {
            return Err(Error::config("dks.momentum", "must be finite"));
        }
        if self.dks.compare_diffusion && self.params.friction <= 0.0 {
            return Err(Error::config("dks.compare_diffusion", "the diffusion reference needs b > 0"));
        }
        Ok(())
    }

    /// Replaces implicit defaults by explicit values.
    fn materialize(&mut self) {
        if self.params.coulomb_softening.is_none() {
            let h = match self.grid.boundary {
                Boundary::Periodic => self.grid.length / self.grid.n as f64,
                Boundary::NoFlux => self.grid.length / (self.grid.n - 1) as f64,
            };
            self.params.coulomb_softening = Some(crate::hartree::DEFAULT_SOFTENING_CELLS * h);
        }
    }

    /// Multiplier from schedule times to simulation time.
    pub fn time_factor(&self) -> f64 {
        match self.schedule.time_scale {
            TimeScale::Absolute => 1.0,
            TimeScale::Friction => self.params.friction,
        }
    }

    pub fn make_grid(&self) -> Result<Grid> {
        Grid::new(self.grid.n, self.grid.length, self.grid.boundary)
    }

    pub fn external_potential(&self, grid: &Grid) -> Result<ScalarField> {
        let m = self.params.units.mass;
        match &self.potential {
            PotentialSpec::Zero => Ok(ScalarField::zeros(*grid)),
            PotentialSpec::Harmonic { omega, center } => {
                ScalarField::from_fn(*grid, |x| 0.5 * m * omega * omega * (x - center).powi(2))
            }
            PotentialSpec::Tabulated { values } => ScalarField::new(*grid, values.clone()),
        }
    }

    /// Initial density, clamped into the admissible band.
    pub fn initial_density(&self, grid: &Grid) -> Result<DensityField> {
        let field = match &self.initial {
            InitialCondition::Gaussian { center, sigma2, mass } => {
                // Periodic grids use the minimum-image distance so the
                // packet may sit anywhere. Normalized on the grid, so a
                // packet clipped by the domain still carries `mass`.
                let shape: Vec<f64> = grid
                    .coords()
                    .iter()
                    .map(|&x| {
                        let d = grid.displacement(x, *center);
                        (-d * d / (2.0 * sigma2)).exp()
                    })
                    .collect();
                let norm = mass / grid.integrate(&shape);
                ScalarField::new(*grid, shape.iter().map(|v| v * norm).collect())?
            }
            InitialCondition::Uniform { value } => ScalarField::constant(*grid, *value),
            InitialCondition::FromSnapshot { path } => {
                let snap = crate::io::snapshot::Snapshot::read(path)?;
                let rho = snap.density()?;
                if rho.len() != grid.n() {
                    return Err(Error::config(
                        "initial.path",
                        format!("snapshot has {} points, grid has {}", rho.len(), grid.n()),
                    ));
                }
                ScalarField::new(*grid, rho)?
            }
        };
        Ok(DensityField::clamped(field, &self.params))
    }

    pub fn dks_options(&self) -> DksOptions {
        DksOptions {
            thermal_form: self.dks.thermal_form,
            phase_threshold: self.dks.phase_threshold,
            norm_tol: self.dks.norm_tol,
            dt_min: self.schedule.dt_min,
            dt_cap: self.schedule.dt_cap,
        }
    }

    pub fn stepper_options(&self) -> crate::diffusion::StepperOptions {
        crate::diffusion::StepperOptions {
            dt_min: self.schedule.dt_min,
            dt_cap: self.schedule.dt_cap,
            ..Default::default()
        }
    }

    pub fn to_value(&self) -> Result<toml::Value> {
        toml::Value::try_from(self).map_err(|e| Error::config("", e.to_string()))
    }

    /// Sorted keys, shortest round-trip floats, every default present.
    pub fn canonical(&self) -> Result<String> {
        toml::to_string(&self.to_value()?).map_err(|e| Error::config("", e.to_string()))
    }

    /// SHA-256 of the canonical form, hex encoded.
    pub fn hash(&self) -> Result<String> {
        Ok(hex::encode(Sha256::digest(self.canonical()?.as_bytes())))
    }
}

fn from_deserializer<'de, D: serde::Deserializer<'de>>(de: D) -> Result<RunConfig>
where
    D::Error: std::fmt::Display,
{
    let mut cfg: RunConfig = serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        Error::config(if path == "." { String::new() } else { path }, e.inner().to_string())
    })?;
    cfg.validate()?;
    cfg.materialize();
    Ok(cfg)
}

pub fn parse_config(text: &str) -> Result<RunConfig> {
    let de = toml::Deserializer::parse(text).map_err(|e| Error::config("", e.to_string()))?;
    from_deserializer(de)
}

pub fn config_from_value(value: toml::Value) -> Result<RunConfig> {
    from_deserializer(value)
}

pub fn load_config(path: &Path) -> Result<RunConfig> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::config(path.display().to_string(), e.to_string()))?;
    parse_config(&text)
}

/// Sets the value at a dotted key path such as `params.friction`.
pub fn set_path(root: &mut toml::Value, path: &str, value: toml::Value) -> Result<()> {
    let mut node = root;
    let keys: Vec<&str> = path.split('.').collect();
    for (i, key) in keys.iter().enumerate() {
        let table = node
            .as_table_mut()
            .ok_or_else(|| Error::config(keys[..i].join("."), "not a table"))?;
        if i + 1 == keys.len() {
            table.insert((*key).to_string(), value);
            return Ok(());
        }
        node = table
            .entry((*key).to_string())
            .or_insert_with(|| toml::Value::Table(Default::default()));
    }
    Err(Error::config(path, "empty key path"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const MINIMAL: &str = r#"
engine = "diffusion"

[grid]
n = 64
length = 10.0
boundary = "periodic"

[initial]
kind = "gaussian"
center = 5.0
sigma2 = 0.5

[schedule]
t_end = 1.0
"#;

    #[test]
    fn minimal_config_materializes_defaults() {
        let cfg = parse_config(MINIMAL).unwrap();
        let canonical = cfg.canonical().unwrap();
        for key in ["seed", "temperature", "rho_bar", "toggles", "coulomb_softening", "dt_min", "series", "thermal_form", "mass"] {
            assert!(canonical.contains(key), "{key} missing from\n{canonical}");
        }
        assert_eq!(cfg.params.coulomb_softening, Some(5.0 * 10.0 / 64.0));
    }

    #[test]
    fn errors_name_the_key() {
        let bad = MINIMAL.replace("[schedule]", "[params]\nrho_bar = -1.0\n\n[schedule]");
        match parse_config(&bad) {
            Err(Error::Config { path, .. }) => assert_eq!(path, "params.rho_bar"),
            other => panic!("{other:?}"),
        }
        let unknown = MINIMAL.replace("[schedule]", "[schedule]\nspeed = 2");
        match parse_config(&unknown) {
            Err(Error::Config { path, message }) => {
                assert!(path.starts_with("schedule"), "{path}");
                assert!(message.contains("speed"), "{message}");
            }
            other => panic!("{other:?}"),
        }
        let nested = MINIMAL.replace("sigma2 = 0.5", "sigma2 = 0.5\nwidth = 1");
        assert!(matches!(parse_config(&nested), Err(Error::Config { .. })));
        let missing = MINIMAL.replace("t_end = 1.0", "");
        match parse_config(&missing) {
            Err(Error::Config { message, .. }) => assert!(message.contains("t_end"), "{message}"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn sweep_paths_edit_the_tree() {
        let mut v: toml::Value = toml::from_str(MINIMAL).unwrap();
        set_path(&mut v, "params.friction", toml::Value::Float(30.0)).unwrap();
        let cfg = config_from_value(v).unwrap();
        assert_eq!(cfg.params.friction, 30.0);
        let mut v: toml::Value = toml::from_str(MINIMAL).unwrap();
        assert!(set_path(&mut v, "engine.x", toml::Value::Float(1.0)).is_err());
    }

    #[test]
    fn hash_tracks_content() {
        let a = parse_config(MINIMAL).unwrap();
        let b = parse_config(&MINIMAL.replace("t_end = 1.0", "t_end = 2.0")).unwrap();
        assert_eq!(a.hash().unwrap(), parse_config(MINIMAL).unwrap().hash().unwrap());
        assert_ne!(a.hash().unwrap(), b.hash().unwrap());
        assert_eq!(a.hash().unwrap().len(), 64);
    }

    proptest! {
        #[test]
        fn canonical_form_round_trips(
            n in 8usize..600,
            length in 0.5f64..500.0,
            periodic in any::<bool>(),
            t in 0.0f64..10.0,
            b in 1e-3f64..1e3,
            kt in 0.0f64..10.0,
            sigma2 in 1e-3f64..10.0,
            tabulated in any::<bool>(),
        ) {
            let boundary = if periodic { "periodic" } else { "no_flux" };
            let potential = if tabulated {
                let vals: Vec<String> = (0..n).map(|i| format!("{}", (i as f64 * 0.37).sin())).collect();
                format!("[potential]\nkind = \"tabulated\"\nvalues = [{}]\n", vals.join(", "))
            } else {
                "[potential]\nkind = \"harmonic\"\nomega = 1.5\ncenter = 2.0\n".into()
            };
            let text = format!(
                "engine = \"diffusion\"\n[grid]\nn = {n}\nlength = {length:?}\nboundary = \"{boundary}\"\n\
                 [params]\nfriction = {b:?}\ntemperature = {kt:?}\n\
                 [initial]\nkind = \"gaussian\"\ncenter = 0.5\nsigma2 = {sigma2:?}\n{potential}\
                 [schedule]\nt_end = {t:?}\ncadence = 0.1\n"
            );
            let first = parse_config(&text).unwrap();
            let canonical = first.canonical().unwrap();
            let second = parse_config(&canonical).unwrap();
            prop_assert_eq!(&first, &second);
            prop_assert_eq!(canonical, second.canonical().unwrap());
        }
    }
}
