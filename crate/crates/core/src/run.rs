//! Run orchestration: engines driven by a [`RunConfig`], with series,
//! snapshots, checkpoints, failure records and parameter sweeps.

use std::path::{Path, PathBuf};

use num_complex::Complex64;
use serde::Serialize;

use crate::diffusion::{steady_state, DiffusionState, SteadyStateOptions};
use crate::dks::{l1_distance, DksState, Orbital, OrbitalSet};
use crate::error::{Error, Result};
use crate::functionals::FreeEnergyModel;
use crate::io::config::{config_from_value, set_path, Engine, Mode, RunConfig};
use crate::io::series::{diffusion_row, dks_columns, dks_row, SeriesWriter, DIFFUSION_COLUMNS};
use crate::io::snapshot::Snapshot;

/// Environment variable that overrides the configured output directory.
pub const OUT_DIR_ENV: &str = "DDFT_OUT_DIR";

#[derive(Clone, Debug, Default)]
pub struct RunOptions {
    /// Takes precedence over the environment and the config.
    pub out_dir: Option<PathBuf>,
    pub quiet: bool,
    pub snapshot_every: Option<f64>,
    pub seed: Option<u64>,
}

impl RunOptions {
    fn apply(&self, config: &mut RunConfig) {
        if let Some(s) = self.snapshot_every {
            config.outputs.snapshot_every = Some(s);
        }
        if let Some(seed) = self.seed {
            config.seed = seed;
        }
    }

    pub fn resolve_out_dir(&self, config: &RunConfig) -> PathBuf {
        self.out_dir
            .clone()
            .or_else(|| std::env::var_os(OUT_DIR_ENV).map(PathBuf::from))
            .unwrap_or_else(|| config.outputs.dir.clone())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RunSummary {
    pub engine: Engine,
    pub config_hash: String,
    pub out_dir: PathBuf,
    pub t_final: f64,
    pub observations: usize,
    pub mass_drift: f64,
    /// Final free energy (diffusion) or total energy (orbitals).
    pub energy_final: f64,
    pub sigma2_final: f64,
    pub mu_spread_final: Option<f64>,
    pub l1_max: Option<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
struct Event {
    observe: bool,
    snapshot: bool,
    checkpoint: bool,
}

/// Merged event times anchored at multiples of each cadence, from `t0`
/// (always observed) to `t_end` (always observed).
fn events(t0: f64, t_end: f64, observe: f64, snapshot: Option<f64>, checkpoint: Option<f64>) -> Vec<(f64, Event)> {
    let mut out: Vec<(f64, Event)> = vec![(
        t0,
        Event {
            observe: true,
            snapshot: false,
            checkpoint: false,
        },
    )];
    let close = |a: f64, b: f64| (a - b).abs() <= 1e-12 * a.abs().max(b.abs()).max(1e-300);
    let mut add = |t: f64, mark: &dyn Fn(&mut Event)| {
        if let Some((_, e)) = out.iter_mut().find(|(s, _)| close(*s, t)) {
            mark(e);
        } else {
            let mut e = Event {
                observe: false,
                snapshot: false,
                checkpoint: false,
            };
            mark(&mut e);
            out.push((t, e));
        }
    };
    let cadences: [(Option<f64>, &dyn Fn(&mut Event)); 3] = [
        ((observe > 0.0).then_some(observe), &|e| e.observe = true),
        (snapshot, &|e| e.snapshot = true),
        (checkpoint, &|e| e.checkpoint = true),
    ];
    for (cadence, mark) in cadences {
        let Some(c) = cadence else { continue };
        let mut k = (t0 / c).floor() as u64 + 1;
        loop {
            let t = k as f64 * c;
            if t >= t_end || close(t, t_end) {
                break;
            }
            if t > t0 && !close(t, t0) {
                add(t, mark);
            }
            k += 1;
        }
    }
    if t_end > t0 && !close(t_end, t0) {
        add(t_end, &|e| e.observe = true);
    }
    out.sort_by(|a, b| a.0.total_cmp(&b.0));
    out
}

struct Outputs {
    dir: PathBuf,
    snapshot_count: usize,
    quiet: bool,
}

impl Outputs {
    fn new(dir: PathBuf, quiet: bool) -> Result<Self> {
        std::fs::create_dir_all(&dir)?;
        Ok(Self {
            dir,
            snapshot_count: 0,
            quiet,
        })
    }

    fn snapshot(&mut self, snap: &Snapshot) -> Result<()> {
        let path = self.dir.join(format!("snapshot_{:04}.txt", self.snapshot_count));
        self.snapshot_count += 1;
        snap.write(&path)
    }

    fn progress(&self, msg: std::fmt::Arguments) {
        if !self.quiet {
            eprintln!("{msg}");
        }
    }
}

/// Interpretation notes recorded with every run.
fn conventions(config: &RunConfig) -> Vec<String> {
    let mut notes = vec![format!("grid boundary: {}", config.grid.boundary)];
    if config.params.toggles.hartree {
        notes.push(format!(
            "hartree: soft-core kernel e2/sqrt(x^2 + a^2) with a = {}, minimum image on periodic grids",
            config.params.coulomb_softening.unwrap_or_default()
        ));
    }
    if config.engine == Engine::Dks {
        notes.push(format!("thermal potential form: {:?}", config.dks.thermal_form).to_lowercase());
        notes.push("friction potential: hbar (b/m) theta, theta gauge-fixed to zero density-weighted mean".into());
    }
    notes
}

#[derive(Serialize)]
struct RunRecord<'a> {
    version: &'a str,
    config_hash: String,
    conventions: Vec<String>,
    resumed_from: Option<String>,
    config: toml::Value,
}

fn write_run_record(dir: &Path, config: &RunConfig, resumed_from: Option<&Path>) -> Result<()> {
    let record = RunRecord {
        version: env!("CARGO_PKG_VERSION"),
        config_hash: config.hash()?,
        conventions: conventions(config),
        resumed_from: resumed_from.map(|p| p.display().to_string()),
        config: config.to_value()?,
    };
    let text = toml::to_string(&record).map_err(|e| Error::Snapshot(e.to_string()))?;
    std::fs::write(dir.join("run.toml"), text)?;
    Ok(())
}

#[derive(Serialize)]
struct FailureRecord {
    kind: String,
    message: String,
    t: f64,
    snapshot: String,
}

fn error_kind(e: &Error) -> String {
    let debug = format!("{e:?}");
    debug
        .split(|c: char| !c.is_alphanumeric())
        .next()
        .unwrap_or("Error")
        .to_string()
}

fn record_failure(out: &Outputs, err: &Error, t: f64, snap: Result<Snapshot>) {
    let snapshot = out.dir.join("failure_snapshot.txt");
    let written = snap.and_then(|s| s.write(&snapshot)).is_ok();
    let record = FailureRecord {
        kind: error_kind(err),
        message: err.to_string(),
        t,
        snapshot: if written {
            snapshot.display().to_string()
        } else {
            String::new()
        },
    };
    if let Ok(text) = toml::to_string(&record) {
        let _ = std::fs::write(out.dir.join("failure.toml"), text);
    }
}

enum Start {
    Fresh,
    Resume(Snapshot, PathBuf),
}

/// Executes the configured engine to `schedule.t_end`.
pub fn run(config: &RunConfig, options: &RunOptions) -> Result<RunSummary> {
    let mut config = config.clone();
    options.apply(&mut config);
    config.validate()?;
    execute(&config, options, Start::Fresh)
}

/// Continues a run from a snapshot. The embedded config is used unless
/// `config` is given; a config whose hash differs from the snapshot's is
/// refused unless `force` is set.
pub fn resume(snapshot: &Path, config: Option<&RunConfig>, force: bool, options: &RunOptions) -> Result<RunSummary> {
    let snap = Snapshot::read(snapshot)?;
    let mut config = match config {
        Some(c) => {
            let hash = c.hash()?;
            if hash != snap.config_hash && !force {
                return Err(Error::Snapshot(format!(
                    "config hash {hash} does not match snapshot hash {}; pass --force to override",
                    snap.config_hash
                )));
            }
            c.clone()
        }
        None => snap.config.clone(),
    };
    options.apply(&mut config);
    config.validate()?;
    execute(&config, options, Start::Resume(snap, snapshot.to_path_buf()))
}

fn execute(config: &RunConfig, options: &RunOptions, start: Start) -> Result<RunSummary> {
    let mut out = Outputs::new(options.resolve_out_dir(config), options.quiet)?;
    let resumed_from = match &start {
        Start::Resume(_, p) => Some(p.as_path()),
        Start::Fresh => None,
    };
    write_run_record(&out.dir, config, resumed_from)?;
    match config.engine {
        Engine::Diffusion => run_diffusion(config, &mut out, start),
        Engine::Dks => run_dks(config, &mut out, start),
    }
}

fn scaled_events(config: &RunConfig, t0: f64) -> Vec<(f64, Event)> {
    let f = config.time_factor();
    let s = &config.schedule;
    events(
        t0,
        f * s.t_end,
        f * s.cadence,
        config.outputs.snapshot_every.map(|v| f * v),
        config.outputs.checkpoint_every.map(|v| f * v),
    )
}

fn run_diffusion(config: &RunConfig, out: &mut Outputs, start: Start) -> Result<RunSummary> {
    let grid = config.make_grid()?;
    let mut state = match &start {
        Start::Fresh => {
            let model = FreeEnergyModel::new(config.params, &config.external_potential(&grid)?)?;
            DiffusionState::new(model, config.initial_density(&grid)?, config.stepper_options())?
        }
        Start::Resume(snap, _) => snap.restore_diffusion(config)?,
    };
    let mass0 = state.mass();
    let mut series = SeriesWriter::create(&out.dir.join(&config.outputs.series), &DIFFUSION_COLUMNS)?;
    let mut count = 0;
    let mut last = state.observe();

    if config.schedule.mode == Mode::SteadyState {
        series.row(&diffusion_row(&last))?;
        let opts = SteadyStateOptions {
            tol: config.schedule.steady_tol,
            max_steps: config.schedule.max_steps,
            ..SteadyStateOptions::default()
        };
        match steady_state(&mut state, &opts) {
            Ok(report) => out.progress(format_args!(
                "steady state after {} steps: mu spread {:e}, max |rhs| {:e}",
                report.steps, report.mu_spread, report.rhs_max
            )),
            Err(e) => {
                series.finish()?;
                record_failure(out, &e, state.t(), Snapshot::from_diffusion(config, &state));
                return Err(e);
            }
        }
        last = state.observe();
        series.row(&diffusion_row(&last))?;
        count = 2;
    } else {
        for (t, event) in scaled_events(config, state.t()) {
            if let Err(e) = state.advance_to(t) {
                series.finish()?;
                record_failure(out, &e, state.t(), Snapshot::from_diffusion(config, &state));
                return Err(e);
            }
            if event.observe {
                last = state.observe();
                series.row(&diffusion_row(&last))?;
                count += 1;
                out.progress(format_args!(
                    "t = {:.6e}  F = {:.10e}  sigma2 = {:.6e}",
                    last.t, last.energy.total, last.sigma2
                ));
            }
            if event.snapshot {
                out.snapshot(&Snapshot::from_diffusion(config, &state)?)?;
            }
            if event.checkpoint {
                Snapshot::from_diffusion(config, &state)?.write(&out.dir.join("checkpoint.txt"))?;
            }
        }
    }
    series.finish()?;
    Snapshot::from_diffusion(config, &state)?.write(&out.dir.join("final.txt"))?;
    Ok(RunSummary {
        engine: Engine::Diffusion,
        config_hash: config.hash()?,
        out_dir: out.dir.clone(),
        t_final: state.t(),
        observations: count,
        mass_drift: (state.mass() - mass0).abs() / mass0,
        energy_final: last.energy.total,
        sigma2_final: last.sigma2,
        mu_spread_final: Some(last.mu_spread),
        l1_max: None,
    })
}

fn initial_orbitals(config: &RunConfig, grid: &crate::grid::Grid) -> Result<OrbitalSet> {
    let rho = config.initial_density(grid)?;
    let k0 = config.dks.momentum;
    let values: Vec<Complex64> = rho
        .values()
        .iter()
        .zip(grid.coords())
        .map(|(r, x)| Complex64::from_polar(r.sqrt(), k0 * x))
        .collect();
    OrbitalSet::new(config.params, vec![Orbital::new(*grid, values, 1.0)?])
}

fn run_dks(config: &RunConfig, out: &mut Outputs, start: Start) -> Result<RunSummary> {
    let grid = config.make_grid()?;
    let external = config.external_potential(&grid)?;
    let mut state = match &start {
        Start::Fresh => DksState::new(initial_orbitals(config, &grid)?, &external, config.dks_options())?,
        Start::Resume(snap, _) => snap.restore_dks(config)?,
    };
    // A snapshot without a saved reference (one written with comparison
    // off) rebuilds it from the initial density and catches up.
    let saved = match &start {
        Start::Resume(snap, _) if config.dks.compare_diffusion => snap.restore_reference(config)?,
        _ => None,
    };
    let mut reference = match (config.dks.compare_diffusion, saved) {
        (false, _) => None,
        (true, Some(r)) => Some(r),
        (true, None) => {
            let model = FreeEnergyModel::new(config.params, &external)?;
            let mut r = DiffusionState::new(model, config.initial_density(&grid)?, config.stepper_options())?;
            r.advance_to(state.t())?;
            Some(r)
        }
    };
    let snapshot = |state: &DksState, reference: &Option<DiffusionState>| {
        Snapshot::from_dks(config, state).map(|s| match reference {
            Some(r) => s.with_reference(r),
            None => s,
        })
    };
    let mass0 = state.observe().mass;
    let columns = dks_columns(state.orbitals().orbitals().len(), reference.is_some());
    let mut series = SeriesWriter::create(&out.dir.join(&config.outputs.series), &columns)?;
    let mut count = 0;
    let mut l1_max: Option<f64> = None;
    let mut last = state.observe();
    for (t, event) in scaled_events(config, state.t()) {
        let stepped = state.advance_to(t).and_then(|_| match reference.as_mut() {
            Some(r) => r.advance_to(t),
            None => Ok(()),
        });
        if let Err(e) = stepped {
            series.finish()?;
            record_failure(out, &e, state.t(), snapshot(&state, &reference));
            return Err(e);
        }
        if event.observe {
            last = state.observe();
            let l1 = reference
                .as_ref()
                .map(|r| l1_distance(&grid, &state.orbitals().raw_density(), r.rho_values()));
            if let Some(d) = l1 {
                l1_max = Some(l1_max.map_or(d, |m: f64| m.max(d)));
            }
            series.row(&dks_row(&last, l1))?;
            count += 1;
            out.progress(format_args!(
                "t = {:.6e}  E = {:.10e}  sigma2 = {:.6e}",
                last.t, last.energy.total, last.sigma2
            ));
        }
        if event.snapshot {
            out.snapshot(&snapshot(&state, &reference)?)?;
        }
        if event.checkpoint {
            snapshot(&state, &reference)?.write(&out.dir.join("checkpoint.txt"))?;
        }
    }
    series.finish()?;
    snapshot(&state, &reference)?.write(&out.dir.join("final.txt"))?;
    Ok(RunSummary {
        engine: Engine::Dks,
        config_hash: config.hash()?,
        out_dir: out.dir.clone(),
        t_final: state.t(),
        observations: count,
        mass_drift: (last.mass - mass0).abs() / mass0,
        energy_final: last.energy.total,
        sigma2_final: last.sigma2,
        mu_spread_final: None,
        l1_max,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct MemberFailure {
    pub message: String,
    pub numerical: bool,
}

#[derive(Clone, Debug)]
pub struct SweepEntry {
    pub value: String,
    pub outcome: std::result::Result<RunSummary, MemberFailure>,
}

#[derive(Clone, Debug, Default)]
pub struct SweepReport {
    pub parameter: String,
    pub entries: Vec<SweepEntry>,
}

impl SweepReport {
    pub fn failures(&self) -> usize {
        self.entries.iter().filter(|e| e.outcome.is_err()).count()
    }

    pub fn to_csv(&self) -> String {
        let opt = |v: Option<f64>| v.map(|x| format!("{x:.16e}")).unwrap_or_default();
        let mut s = String::from("value,status,t_final,mass_drift,energy_final,sigma2_final,mu_spread_final,l1_max\n");
        for e in &self.entries {
            match &e.outcome {
                Ok(r) => s.push_str(&format!(
                    "{},ok,{:.16e},{:.16e},{:.16e},{:.16e},{},{}\n",
                    e.value,
                    r.t_final,
                    r.mass_drift,
                    r.energy_final,
                    r.sigma2_final,
                    opt(r.mu_spread_final),
                    opt(r.l1_max)
                )),
                Err(f) => s.push_str(&format!("{},\"failed: {}\",,,,,,\n", e.value, f.message.replace('"', "'"))),
            }
        }
        s
    }
}

fn get_path<'a>(root: &'a toml::Value, path: &str) -> Option<&'a toml::Value> {
    path.split('.').try_fold(root, |node, key| node.get(key))
}

/// Parses a sweep value, keeping floats for parameters that are floats.
fn sweep_value(token: &str, existing: Option<&toml::Value>) -> Result<toml::Value> {
    let table: toml::Table =
        toml::from_str(&format!("v = {token}")).map_err(|e| Error::config("--values", format!("`{token}`: {e}")))?;
    let v = table["v"].clone();
    Ok(match (v, existing) {
        (toml::Value::Integer(i), Some(toml::Value::Integer(_))) => toml::Value::Integer(i),
        (toml::Value::Integer(i), _) if !matches!(existing, None) => toml::Value::Float(i as f64),
        (toml::Value::Integer(i), None) => toml::Value::Float(i as f64),
        (other, _) => other,
    })
}

/// One run per value of the dotted `parameter`, concurrently, each in its
/// own subdirectory. Failed members are recorded and the sweep continues.
pub fn sweep(base: &toml::Value, parameter: &str, values: &[String], options: &RunOptions) -> Result<SweepReport> {
    let existing = get_path(base, parameter);
    let configs: Vec<(String, Result<RunConfig>)> = values
        .iter()
        .map(|token| {
            let cfg = sweep_value(token, existing).and_then(|v| {
                let mut tree = base.clone();
                set_path(&mut tree, parameter, v)?;
                config_from_value(tree)
            });
            (token.clone(), cfg)
        })
        .collect();
    let root = match configs.iter().find_map(|(_, c)| c.as_ref().ok()) {
        Some(c) => options.resolve_out_dir(c),
        None => options.out_dir.clone().unwrap_or_else(|| PathBuf::from("out")),
    };
    let entries = std::thread::scope(|scope| {
        let handles: Vec<_> = configs
            .into_iter()
            .map(|(value, cfg)| {
                let dir = root.join(format!("{parameter}={value}"));
                let opts = RunOptions {
                    out_dir: Some(dir),
                    quiet: true,
                    ..options.clone()
                };
                scope.spawn(move || {
                    let outcome = cfg.and_then(|c| run(&c, &opts)).map_err(|e| MemberFailure {
                        message: e.to_string(),
                        numerical: e.is_numerical(),
                    });
                    SweepEntry { value, outcome }
                })
            })
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("sweep member panicked"))
            .collect()
    });
    let report = SweepReport {
        parameter: parameter.to_string(),
        entries,
    };
    if !report.entries.is_empty() {
        std::fs::create_dir_all(&root)?;
        std::fs::write(root.join("sweep_summary.csv"), report.to_csv())?;
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn events_are_anchored_and_merged() {
        let e = events(0.0, 1.0, 0.25, Some(0.5), None);
        let times: Vec<f64> = e.iter().map(|(t, _)| *t).collect();
        assert_eq!(times, vec![0.0, 0.25, 0.5, 0.75, 1.0]);
        assert!(e[2].1.snapshot && e[2].1.observe);
        assert!(!e[1].1.snapshot);
        // Resuming mid-interval keeps the absolute grid.
        let e = events(0.3, 1.0, 0.25, None, None);
        let times: Vec<f64> = e.iter().map(|(t, _)| *t).collect();
        assert_eq!(times, vec![0.3, 0.5, 0.75, 1.0]);
        assert_eq!(events(0.0, 0.0, 0.1, None, None).len(), 1);
    }

    #[test]
    fn sweep_values_keep_float_types() {
        let base: toml::Value = toml::from_str("[params]\nfriction = 1.0\n[grid]\nn = 8").unwrap();
        let f = sweep_value("10", get_path(&base, "params.friction")).unwrap();
        assert_eq!(f, toml::Value::Float(10.0));
        let n = sweep_value("64", get_path(&base, "grid.n")).unwrap();
        assert_eq!(n, toml::Value::Integer(64));
        assert_eq!(
            sweep_value("\"literal\"", None).unwrap(),
            toml::Value::String("literal".into())
        );
    }
}
