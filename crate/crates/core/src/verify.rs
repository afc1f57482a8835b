//! The acceptance suite: every analytic and property check, run at desk
//! scale, with measured values, limits and a hash of each scenario.

use std::f64::consts::PI;
use std::fmt::Write as _;
use std::time::{Duration, Instant};

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

use crate::diffusion::{
    evolve, rhs_effective_form, rhs_mu_form, steady_state, DiffusionState, SteadyStateOptions, StepperOptions,
};
use crate::dks::{compare_with_diffusion, DksOptions, DksState, Orbital, OrbitalSet};
use crate::error::Result;
use crate::functionals::{
    dirac_energy, fisher_entropy, tf_energy, weizsacker_energy, DensityField, FreeEnergyModel, ModelParams,
    Toggles,
};
use crate::grid::{Boundary, Grid, ScalarField};
use crate::hartree::CoulombKernel;
use crate::oracles::{
    dispersion_sigma2, functional_derivative_fd, harmonic_stationary_variance, measure_variance,
    zero_temperature_sigma2, zero_temperature_sigma2_from, DispersionParams,
};

pub const CRITERIA: usize = 11;

/// Uniform-gas constants at `ρ = 1`: TF and exchange energy densities and
/// the matching chemical-potential terms.
pub const TF_ENERGY_COEFF: f64 = 2.871234000188191;
pub const DIRAC_ENERGY_COEFF: f64 = 0.7385587663820223;
pub const TF_POTENTIAL_AT_ONE: f64 = 4.785390000313652;
pub const DIRAC_POTENTIAL_AT_ONE: f64 = -0.9847450218426964;

/// One measured quantity against its limit. `measured <= limit` passes.
#[derive(Clone, Debug, PartialEq)]
pub struct Check {
    pub label: String,
    pub measured: f64,
    pub limit: f64,
}

impl Check {
    fn new(label: impl Into<String>, measured: f64, limit: f64) -> Self {
        Self {
            label: label.into(),
            measured,
            limit,
        }
    }

    pub fn passed(&self) -> bool {
        self.measured <= self.limit
    }
}

#[derive(Clone, Debug)]
pub struct CriterionReport {
    pub id: usize,
    pub name: &'static str,
    pub checks: Vec<Check>,
    pub notes: Vec<String>,
    pub error: Option<String>,
    pub scenario_hash: String,
    pub elapsed: Duration,
}

impl CriterionReport {
    pub fn passed(&self) -> bool {
        self.error.is_none() && !self.checks.is_empty() && self.checks.iter().all(Check::passed)
    }

    /// The check with the largest `measured / limit`.
    pub fn worst(&self) -> Option<&Check> {
        self.checks
            .iter()
            .max_by(|a, b| (a.measured / a.limit).total_cmp(&(b.measured / b.limit)))
    }

    pub fn summary_line(&self) -> String {
        let status = if self.passed() { "PASS" } else { "FAIL" };
        let detail = match (&self.error, self.worst()) {
            (Some(e), _) => format!("error: {e}"),
            (None, Some(c)) => format!("{}: {:.3e} (limit {:.1e})", c.label, c.measured, c.limit),
            (None, None) => "no checks ran".into(),
        };
        format!("criterion {:>2} {status}  {}  {detail}  [{:.1?}]", self.id, self.name, self.elapsed)
    }
}

#[derive(Clone, Debug)]
pub struct VerifyReport {
    pub version: &'static str,
    pub os: &'static str,
    pub arch: &'static str,
    pub criteria: Vec<CriterionReport>,
    pub elapsed: Duration,
}

impl VerifyReport {
    pub fn passed(&self) -> bool {
        self.criteria.len() == CRITERIA && self.criteria.iter().all(CriterionReport::passed)
    }

    pub fn to_text(&self) -> String {
        let mut s = format!(
            "ddft {} on {}/{}, {} criteria in {:.1?}\n",
            self.version,
            self.os,
            self.arch,
            self.criteria.len(),
            self.elapsed
        );
        for c in &self.criteria {
            let _ = writeln!(s, "{}", c.summary_line());
            for check in &c.checks {
                let mark = if check.passed() { "ok " } else { "BAD" };
                let _ = writeln!(s, "    {mark} {:<48} {:>12.4e} <= {:.1e}", check.label, check.measured, check.limit);
            }
            for note in &c.notes {
                let _ = writeln!(s, "    note: {note}");
            }
            let _ = writeln!(s, "    scenario {}", c.scenario_hash);
        }
        let passed = self.criteria.iter().filter(|c| c.passed()).count();
        let _ = writeln!(s, "{passed}/{} criteria passed", self.criteria.len());
        s
    }
}

fn scenario_hash(description: &str) -> String {
    hex::encode(&Sha256::digest(description.as_bytes())[..8])
}

struct Outcome {
    checks: Vec<Check>,
    notes: Vec<String>,
    scenario: String,
}

fn report(id: usize, name: &'static str, scenario: String, body: impl FnOnce() -> Result<Outcome>) -> CriterionReport {
    let start = Instant::now();
    let (checks, notes, error, scenario) = match body() {
        Ok(o) => (o.checks, o.notes, None, o.scenario),
        Err(e) => (Vec::new(), Vec::new(), Some(e.to_string()), scenario),
    };
    CriterionReport {
        id,
        name,
        checks,
        notes,
        error,
        scenario_hash: scenario_hash(&scenario),
        elapsed: start.elapsed(),
    }
}

fn gaussian(grid: Grid, center: f64, var: f64, p: &ModelParams) -> Result<DensityField> {
    let norm = (2.0 * PI * var).sqrt();
    let f = ScalarField::from_fn(grid, |x| {
        let d = grid.displacement(center, x);
        (-d * d / (2.0 * var)).exp() / norm
    })?;
    Ok(DensityField::clamped(f, p))
}

fn max_rel(pairs: impl Iterator<Item = (f64, f64)>) -> f64 {
    pairs.map(|(a, b)| (a / b - 1.0).abs()).fold(0.0, f64::max)
}

/// Free packet in the dilute model on `n = 512`, `L = 80`, sampled every
/// 0.1 up to `t = 2`; returns `(t, σ²)` for `t ≥ 0.1`.
fn free_spreading(kt: f64, b: f64, sigma0_sq: f64) -> Result<Vec<(f64, f64)>> {
    let grid = Grid::new(512, 80.0, Boundary::Periodic)?;
    let p = ModelParams::dilute(kt, b);
    let model = FreeEnergyModel::new(p, &ScalarField::zeros(grid))?;
    let mut state = DiffusionState::new(model, gaussian(grid, 40.0, sigma0_sq, &p)?, StepperOptions::default())?;
    let traj = evolve(&mut state, 2.0, 0.1)?;
    Ok(traj
        .observations
        .iter()
        .filter(|o| o.t >= 0.1 - 1e-12)
        .map(|o| (o.t, o.sigma2))
        .collect())
}

pub fn criterion_1() -> CriterionReport {
    let (kt, b, s0) = (0.25, 0.25, 0.1);
    let scenario = format!("dispersion n=512 L=80 periodic kT={kt} b={b} sigma0^2={s0} t=[0.1,2] dt_obs=0.1");
    report(1, "thermo-quantum dispersion law", scenario.clone(), || {
        let p = ModelParams::dilute(kt, b);
        let dp = DispersionParams::from_model(&p, s0)?;
        let series = free_spreading(kt, b, s0)?;
        let err = max_rel(series.iter().map(|&(t, s)| (s, dispersion_sigma2(t, &dp))));
        Ok(Outcome {
            checks: vec![Check::new("max rel. error of sigma2, t in [0.1, 2]", err, 0.02)],
            notes: vec![format!(
                "D = {}, lambda_T^2 = {}, sigma2(2) = {:.6}",
                dp.diffusion,
                dp.lambda_t2,
                series.last().map_or(f64::NAN, |s| s.1)
            )],
            scenario,
        })
    })
}

pub fn criterion_2() -> CriterionReport {
    let (b, s0) = (0.25, 0.1);
    let scenario = format!("zero-T dispersion n=512 L=80 periodic kT=0 b={b} sigma0^2={s0} t=[0.1,2]");
    report(2, "zero-temperature law", scenario.clone(), || {
        let p = ModelParams::dilute(0.0, b);
        let series = free_spreading(0.0, b, s0)?;
        let finite = max_rel(series.iter().map(|&(t, s)| (s, zero_temperature_sigma2_from(t, s0, &p))));
        let late: Vec<_> = series.iter().filter(|(_, s)| *s >= 10.0 * s0).collect();
        let bare = max_rel(late.iter().map(|&&(t, s)| (s, zero_temperature_sigma2(t, &p))));
        Ok(Outcome {
            checks: vec![
                Check::new("max rel. error vs finite-width law", finite, 0.02),
                Check::new("max rel. error vs hbar sqrt(t/mb), sigma2 >= 10 sigma0^2", bare, 0.03),
            ],
            notes: vec![format!("{} samples with sigma2 >= 10 sigma0^2", late.len())],
            scenario,
        })
    })
}

pub fn criterion_3() -> CriterionReport {
    // λ_T² = ħ²/(4 m k_B T) = 5e-5 = 5e-4 σ₀², D = k_B T / b = 1.
    let (kt, b, s0) = (5000.0, 5000.0, 0.1);
    let scenario = format!("classical n=512 L=80 periodic kT={kt} b={b} sigma0^2={s0} t=[0.1,2]");
    report(3, "classical limit", scenario.clone(), || {
        let p = ModelParams::dilute(kt, b);
        let dp = DispersionParams::from_model(&p, s0)?;
        let series = free_spreading(kt, b, s0)?;
        let err = max_rel(series.iter().map(|&(t, s)| (s, 2.0 * dp.diffusion * t + s0)));
        Ok(Outcome {
            checks: vec![
                Check::new("lambda_T^2 / sigma0^2", dp.lambda_t2 / s0, 1e-3),
                Check::new("max rel. error vs 2Dt + sigma0^2", err, 0.02),
            ],
            notes: Vec::new(),
            scenario,
        })
    })
}

/// Domain per temperature: about seven stationary widths each side, so the
/// far tails stay resolvable by the explicit stepper.
fn harmonic_domain(kt: f64) -> (usize, f64) {
    if kt == 0.0 {
        (112, 10.0)
    } else {
        (112, 14.0)
    }
}

pub fn criterion_4() -> CriterionReport {
    let temps = [0.0, 1.0];
    let scenario = format!(
        "harmonic omega=1 b=1 no_flux domains {:?} start var=2 offset 0.5 steady tol=1e-7",
        temps.map(harmonic_domain)
    );
    report(4, "harmonic stationarity", scenario.clone(), || {
        let mut checks = Vec::new();
        let mut notes = Vec::new();
        for kt in temps {
            let (n, length) = harmonic_domain(kt);
            let center = length / 2.0;
            let grid = Grid::new(n, length, Boundary::NoFlux)?;
            let trap = ScalarField::from_fn(grid, |x| 0.5 * (x - center).powi(2))?;
            let p = ModelParams::dilute(kt, 1.0);
            let start = gaussian(grid, center + 0.5, 2.0, &p)?;
            let model = FreeEnergyModel::new(p, &trap)?;
            let mut state = DiffusionState::new(model, start, StepperOptions::default())?;
            let r = steady_state(&mut state, &SteadyStateOptions::default())?;
            let var = measure_variance(&state.density())?;
            let expected = harmonic_stationary_variance(kt, 1.0, &p)?;
            checks.push(Check::new(format!("kT = {kt}: mu spread"), r.mu_spread, 1e-6));
            checks.push(Check::new(
                format!("kT = {kt}: rel. error of variance"),
                (var / expected - 1.0).abs(),
                0.01,
            ));
            notes.push(format!(
                "kT = {kt}: variance {var:.6} vs {expected:.6} after {} steps (t = {:.1})",
                r.steps, r.t
            ));
        }
        Ok(Outcome { checks, notes, scenario })
    })
}

/// Smooth periodic test state for the derivative and form checks: all
/// toggles on, inside the Fermi-Dirac band.
fn smooth_state(n: usize) -> Result<(FreeEnergyModel, DensityField)> {
    let l = 10.0;
    let grid = Grid::new(n, l, Boundary::Periodic)?;
    let p = ModelParams {
        temperature: 0.5,
        rho_bar: 3.0,
        toggles: Toggles::all(),
        ..ModelParams::default()
    };
    let k = 2.0 * PI / l;
    let rho = DensityField::new(
        ScalarField::from_fn(grid, |x| 1.0 + 0.3 * (k * x).sin() + 0.15 * (2.0 * k * x).cos())?,
        &p,
    )?;
    let u = ScalarField::from_fn(grid, |x| 0.2 * (k * x).cos())?;
    Ok((FreeEnergyModel::new(p, &u)?, rho))
}

/// Random smooth zero-mean direction: the first few Fourier modes with
/// seeded coefficients, scaled to unit maximum.
fn smooth_direction(grid: &Grid, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let k = 2.0 * PI / grid.length();
    let coeffs: Vec<(f64, f64)> = (0..4).map(|_| (rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))).collect();
    let mut g: Vec<f64> = grid
        .coords()
        .iter()
        .map(|&x| {
            coeffs
                .iter()
                .enumerate()
                .map(|(m, (a, b))| {
                    let q = (m + 1) as f64 * k;
                    a * (q * x).cos() + b * (q * x).sin()
                })
                .sum()
        })
        .collect();
    let mean = grid.integrate(&g) / grid.length();
    g.iter_mut().for_each(|v| *v -= mean);
    let scale = g.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    g.iter_mut().for_each(|v| *v /= scale);
    g
}

pub const DERIVATIVE_DIRECTIONS: usize = 10;
pub const DERIVATIVE_SEED: u64 = 20_240_917;

/// Compares `∫ μ g` with a Richardson-extrapolated directional derivative
/// of the free energy for seeded random directions. `mu` supplies the
/// chemical potential under test.
pub fn functional_derivative_certificate(mu: &dyn Fn(&FreeEnergyModel, &[f64]) -> Vec<f64>) -> CriterionReport {
    let scenario = format!(
        "derivative n=256 L=10 periodic all toggles kT=0.5 rho_bar=3 directions={DERIVATIVE_DIRECTIONS} seed={DERIVATIVE_SEED} eta=1e-3"
    );
    report(5, "functional derivative", scenario.clone(), || {
        let (model, rho) = smooth_state(256)?;
        let grid = *model.grid();
        let rho = rho.values();
        let mu = mu(&model, rho);
        let mut rng = ChaCha8Rng::seed_from_u64(DERIVATIVE_SEED);
        let mut worst = 0.0f64;
        for _ in 0..DERIVATIVE_DIRECTIONS {
            let g = smooth_direction(&grid, &mut rng);
            let analytic = grid.integrate(&mu.iter().zip(&g).map(|(m, g)| m * g).collect::<Vec<_>>());
            let numeric = functional_derivative_fd(
                |r| model.breakdown_values(r).total,
                rho,
                &g,
                1e-3,
                model.params().density_ceiling(),
            )?;
            worst = worst.max(((analytic - numeric) / analytic).abs());
        }
        Ok(Outcome {
            checks: vec![Check::new("max |int mu g - dF/deta| / |int mu g|", worst, 1e-4)],
            notes: Vec::new(),
            scenario,
        })
    })
}

pub fn criterion_5() -> CriterionReport {
    functional_derivative_certificate(&|model, rho| model.chemical_potential_values(rho))
}

pub fn criterion_6() -> CriterionReport {
    let scenario = "forms n=256,512 L=10 periodic all toggles kT=0.5 rho_bar=3".to_string();
    report(6, "form equivalence", scenario.clone(), || {
        let err = |n: usize| -> Result<f64> {
            let (model, rho) = smooth_state(n)?;
            let u = ScalarField::new(*model.grid(), model.external().to_vec())?;
            let a = rhs_mu_form(&rho, &u, model.params())?;
            let b = rhs_effective_form(&rho, &u, model.params())?;
            let num: f64 = a.values().iter().zip(b.values()).map(|(x, y)| (x - y).powi(2)).sum();
            let den: f64 = a.values().iter().map(|x| x * x).sum();
            Ok((num / den).sqrt())
        };
        let coarse = err(256)?;
        let fine = err(512)?;
        Ok(Outcome {
            checks: vec![
                Check::new("rel. L2 difference at n = 256", coarse, 1e-3),
                // Written as 3.5 / ratio so that the check reads measured <= 1.
                Check::new("3.5 / (error ratio 256 vs 512)", 3.5 * fine / coarse, 1.0),
            ],
            notes: vec![format!("error ratio {:.3}", coarse / fine)],
            scenario,
        })
    })
}

pub const CONSERVATION_STEPS: u64 = 10_000;

pub fn criterion_7() -> CriterionReport {
    let scenario = format!("conservation n=128 L=10 periodic+no_flux all toggles kT=0.5 rho_bar=3 steps={CONSERVATION_STEPS}");
    report(7, "conservation and H-theorem", scenario.clone(), || {
        let mut checks = Vec::new();
        for boundary in [Boundary::Periodic, Boundary::NoFlux] {
            let l = 10.0;
            let n = if boundary == Boundary::Periodic { 128 } else { 129 };
            let grid = Grid::new(n, l, boundary)?;
            let p = ModelParams {
                temperature: 0.5,
                rho_bar: 3.0,
                ..ModelParams::default()
            };
            let rho = DensityField::new(
                ScalarField::from_fn(grid, |x| {
                    1.0 + 0.4 * (PI * x / l).cos() + 0.2 * (2.0 * PI * x / l).cos() + 0.1 * (6.0 * PI * x / l).cos()
                })?,
                &p,
            )?;
            let u = ScalarField::from_fn(grid, |x| 0.3 * (2.0 * PI * x / l).sin())?;
            let mut state = DiffusionState::new(FreeEnergyModel::new(p, &u)?, rho, StepperOptions::default())?;
            let m0 = state.mass();
            let mut f_prev = state.energy().total;
            let (mut drift, mut rise) = (0.0f64, f64::NEG_INFINITY);
            while state.accepted_steps() < CONSERVATION_STEPS {
                state.step()?;
                let f = state.energy().total;
                rise = rise.max((f - f_prev) / f_prev.abs());
                f_prev = f;
                drift = drift.max((state.mass() - m0).abs() / m0);
            }
            checks.push(Check::new(format!("{boundary}: max rel. mass drift"), drift, 1e-10));
            checks.push(Check::new(format!("{boundary}: max (F_new - F_old) / |F_old|"), rise.max(0.0), 1e-12));
        }
        Ok(Outcome {
            checks,
            notes: Vec::new(),
            scenario,
        })
    })
}

fn lumpy_density(grid: Grid) -> Result<ScalarField> {
    let l = grid.length();
    ScalarField::from_fn(grid, |x| {
        0.3 + (-(x - 0.3 * l).powi(2)).exp() + 0.5 * (-(x - 0.7 * l).powi(2) / 3.0).exp()
    })
}

pub fn criterion_8() -> CriterionReport {
    let scenario = "hartree periodic n=64,256,512 L=12 + no_flux n=101 L=10, default softening, uniform 0.7".to_string();
    report(8, "Hartree oracle", scenario.clone(), || {
        let mut checks = Vec::new();
        let cases = [
            (Grid::new(64, 12.0, Boundary::Periodic)?, true),
            (Grid::new(256, 12.0, Boundary::Periodic)?, true),
            (Grid::new(512, 12.0, Boundary::Periodic)?, true),
            (Grid::new(101, 10.0, Boundary::NoFlux)?, false),
        ];
        for (grid, neutral) in cases {
            let k = CoulombKernel::with_default_softening(grid, 1.0, neutral)?;
            let rho = lumpy_density(grid)?;
            let fast = k.energy(rho.values());
            let direct = k.energy_double_sum(rho.values());
            checks.push(Check::new(
                format!("{} n = {}: energy vs double sum", grid.boundary(), grid.n()),
                ((fast - direct) / direct).abs(),
                1e-10,
            ));
        }
        let grid = Grid::new(512, 12.0, Boundary::Periodic)?;
        let k = CoulombKernel::with_default_softening(grid, 1.0, true)?;
        let v = k.potential(&vec![0.7; grid.n()]);
        let vmax = v.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        checks.push(Check::new("uniform density, neutralized: max |v_H|", vmax, 1e-12));
        Ok(Outcome {
            checks,
            notes: Vec::new(),
            scenario,
        })
    })
}

fn gaussian_orbital(grid: Grid, center: f64, var: f64, k0: f64) -> Result<Orbital> {
    let norm = (2.0 * PI * var).powf(-0.25);
    Orbital::from_fn(grid, 1.0, |x| {
        Complex64::from_polar(norm * (-(x - center).powi(2) / (4.0 * var)).exp(), k0 * x)
    })
}

fn bare(friction: f64) -> ModelParams {
    ModelParams {
        friction,
        toggles: Toggles::none(),
        ..ModelParams::default()
    }
}

pub fn criterion_9() -> CriterionReport {
    let scenario = "dks norm: two free-electron orbitals b=0.5 trap 0.02(x-20)^2 k0=1,-0.5 n=256 L=40 + no_flux n=257, t=5; free b=0 n=512 L=60 sigma0^2=1 t<=4; \
                    energy b=0.5 U=0 k0=8*2pi/40 n=256 L=40 1000 steps"
        .to_string();
    report(9, "orbital dynamics", scenario.clone(), || {
        let mut checks = Vec::new();
        let mut notes = Vec::new();

        // Norm conservation, damped, two orbitals, both kinetic paths.
        for (boundary, n) in [(Boundary::Periodic, 256), (Boundary::NoFlux, 257)] {
            let grid = Grid::new(n, 40.0, boundary)?;
            let trap = ScalarField::from_fn(grid, |x| 0.02 * (x - 20.0).powi(2))?;
            let p = bare(0.5);
            let set = OrbitalSet::new(
                p,
                vec![gaussian_orbital(grid, 18.0, 1.0, 1.0)?, gaussian_orbital(grid, 22.0, 1.5, -0.5)?],
            )?;
            let norms0 = set.norms();
            let mut s = DksState::new(set, &trap, DksOptions::default())?;
            let t_end = 5.0;
            s.advance_to(t_end)?;
            let drift = s
                .orbitals()
                .norms()
                .iter()
                .zip(&norms0)
                .map(|(a, b)| (a - b).abs() / b)
                .fold(0.0, f64::max)
                / t_end;
            checks.push(Check::new(format!("{boundary}: max norm drift per unit time"), drift, 1e-8));
        }

        // Free undamped packet.
        let grid = Grid::new(512, 60.0, Boundary::Periodic)?;
        let set = OrbitalSet::new(bare(0.0), vec![gaussian_orbital(grid, 30.0, 1.0, 0.0)?])?;
        let mut s = DksState::new(set, &ScalarField::zeros(grid), DksOptions::default())?;
        let mut worst = 0.0f64;
        for t in [1.0, 2.0, 3.0, 4.0] {
            s.advance_to(t)?;
            let expected = 1.0 + (t / 2.0).powi(2);
            worst = worst.max((s.observe().sigma2 / expected - 1.0).abs());
        }
        checks.push(Check::new("free packet: max rel. error of sigma2", worst, 0.01));

        // Damped moving packet loses energy at every step.
        let grid = Grid::new(256, 40.0, Boundary::Periodic)?;
        let k0 = 2.0 * PI / 40.0 * 8.0;
        let set = OrbitalSet::new(bare(0.5), vec![gaussian_orbital(grid, 20.0, 1.0, k0)?])?;
        let mut s = DksState::new(set, &ScalarField::zeros(grid), DksOptions::default())?;
        let e0 = s.energy().total;
        let mut last = e0;
        let mut rise = f64::NEG_INFINITY;
        for _ in 0..1000 {
            s.step()?;
            let e = s.energy().total;
            rise = rise.max((e - last) / last.abs());
            last = e;
        }
        checks.push(Check::new("damped packet: max (E_new - E_old) / |E_old|", rise.max(0.0), 1e-12));
        notes.push(format!("damped packet energy {e0:.6} -> {last:.6} by t = {:.3}", s.t()));
        Ok(Outcome { checks, notes, scenario })
    })
}

pub const STRONG_FRICTION: [f64; 3] = [10.0, 30.0, 100.0];
pub const STRONG_FRICTION_TAUS: [f64; 4] = [0.1, 0.25, 0.5, 1.0];

/// Worst L1 distance over the rescaled times `t = b τ`, per friction.
pub fn strong_friction_distances() -> Result<Vec<f64>> {
    let (n, length, kt, s0) = (256, 20.0, 1.0, 0.5);
    let center = length / 2.0;
    let grid = Grid::new(n, length, Boundary::Periodic)?;
    let trap = ScalarField::from_fn(grid, |x| 0.5 * (x - center).powi(2))?;
    let run = |b: f64| -> Result<f64> {
        let p = ModelParams::dilute(kt, b);
        let rho0 = gaussian(grid, center, s0, &p)?;
        let mass = rho0.mass();
        let set = OrbitalSet::new(p, vec![Orbital::from_density(&rho0, 1.0)?])?;
        let mut dks = DksState::new(set, &trap, DksOptions::default())?;
        let mut diffusion = DiffusionState::new(FreeEnergyModel::new(p, &trap)?, rho0, StepperOptions::default())?;
        let times: Vec<f64> = STRONG_FRICTION_TAUS.iter().map(|t| b * t).collect();
        let points = compare_with_diffusion(&mut dks, &mut diffusion, &times)?;
        Ok(points.iter().map(|c| c.l1).fold(0.0, f64::max) / mass)
    };
    std::thread::scope(|scope| {
        let handles: Vec<_> = STRONG_FRICTION.iter().map(|&b| scope.spawn(move || run(b))).collect();
        handles.into_iter().map(|h| h.join().expect("strong-friction run panicked")).collect()
    })
}

pub fn criterion_10() -> CriterionReport {
    let scenario = format!(
        "strong friction n=256 L=20 periodic U=(x-10)^2/2 kT=1 sigma0^2=0.5 b={STRONG_FRICTION:?} tau={STRONG_FRICTION_TAUS:?}"
    );
    report(10, "strong-friction correspondence", scenario.clone(), || {
        let d = strong_friction_distances()?;
        let rises = d.windows(2).map(|w| (w[1] - w[0]).max(0.0)).fold(0.0, f64::max);
        Ok(Outcome {
            checks: vec![
                Check::new("b = 100: max L1 / mass over tau", d[2], 0.05),
                Check::new("largest increase of L1 with b", rises, 0.0),
            ],
            notes: vec![format!(
                "max L1 over tau: {}",
                STRONG_FRICTION
                    .iter()
                    .zip(&d)
                    .map(|(b, l)| format!("b = {b}: {l:.3e}"))
                    .collect::<Vec<_>>()
                    .join(", ")
            )],
            scenario,
        })
    })
}

pub fn criterion_11() -> CriterionReport {
    let scenario = "identities periodic n=512 L=10 rho=1+0.2sin+0.1cos2; uniform rho=1 n=64 L=10".to_string();
    report(11, "identity checks", scenario.clone(), || {
        let l = 10.0;
        let grid = Grid::new(512, l, Boundary::Periodic)?;
        let p = ModelParams::default();
        let k = 2.0 * PI / l;
        let rho = DensityField::new(
            ScalarField::from_fn(grid, |x| 1.0 + 0.2 * (k * x).sin() + 0.1 * (2.0 * k * x).cos())?,
            &p,
        )?;
        let ew = weizsacker_energy(&rho, &p);
        let sf = fisher_entropy(&rho);
        let u = &p.units;
        let mut checks = vec![Check::new(
            "|E_W - hbar^2 S_F / 8m| / E_W",
            ((ew - u.hbar * u.hbar * sf / (8.0 * u.mass)) / ew).abs(),
            1e-6,
        )];

        let flat_grid = Grid::new(64, l, Boundary::Periodic)?;
        let p = ModelParams {
            rho_bar: 2.0,
            ..ModelParams::default()
        };
        let flat = DensityField::new(ScalarField::constant(flat_grid, 1.0), &p)?;
        let model = FreeEnergyModel::new(p, &ScalarField::zeros(flat_grid))?;
        let terms = model.potential_terms(flat.values());
        let pairs = [
            ("TF energy density", tf_energy(&flat, &p) / l, TF_ENERGY_COEFF),
            ("exchange energy density", -dirac_energy(&flat, &p) / l, DIRAC_ENERGY_COEFF),
            ("TF potential", terms.tf[0], TF_POTENTIAL_AT_ONE),
            ("exchange potential", terms.dirac[0], DIRAC_POTENTIAL_AT_ONE),
        ];
        for (label, got, want) in pairs {
            checks.push(Check::new(format!("uniform gas: {label}"), (got - want).abs(), 1e-10));
        }
        Ok(Outcome {
            checks,
            notes: Vec::new(),
            scenario,
        })
    })
}

pub fn criterion(id: usize) -> Option<CriterionReport> {
    Some(match id {
        1 => criterion_1(),
        2 => criterion_2(),
        3 => criterion_3(),
        4 => criterion_4(),
        5 => criterion_5(),
        6 => criterion_6(),
        7 => criterion_7(),
        8 => criterion_8(),
        9 => criterion_9(),
        10 => criterion_10(),
        11 => criterion_11(),
        _ => return None,
    })
}

/// Runs every criterion, independent scenarios concurrently.
pub fn verify() -> VerifyReport {
    let start = Instant::now();
    let criteria = std::thread::scope(|scope| {
        let handles: Vec<_> = (1..=CRITERIA)
            .map(|id| scope.spawn(move || criterion(id).expect("criterion id in range")))
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("criterion panicked"))
            .collect()
    });
    VerifyReport {
        version: env!("CARGO_PKG_VERSION"),
        os: std::env::consts::OS,
        arch: std::env::consts::ARCH,
        criteria,
        elapsed: start.elapsed(),
    }
}
