//! Dissipative density evolution `∂ₜρ = ∇·(ρ ∇μ / b)`.
//!
//! The update is forward Euler on a finite-volume flux form whose interface
//! mobility is a mean of the neighbouring densities. A step is accepted only if the
//! density stays in its admissible band and the free energy does not rise;
//! otherwise `dt` is halved and the step retried. Because `μ` is the exact
//! discrete derivative of the discrete free energy, small enough steps always
//! dissipate, so the acceptance test is the H-theorem enforced per step.
//!
//! [`rhs_effective_form`] evaluates the same dynamics written with the
//! effective potential and diffusion coefficient; it is a cross-check only.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::functionals::{
    effective_diffusion_values, local_diffusion_values, DensityField, EnergyBreakdown,
    FreeEnergyModel, ModelParams,
};
use crate::grid::{flux_divergence_into, Grid, ScalarField};
use crate::oracles::variance_values;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StepperOptions {
    /// Fraction of the explicit stability estimate used as `dt_max`.
    pub safety: f64,
    pub dt_min: f64,
    pub growth: f64,
    /// Consecutive accepted steps before `dt` grows.
    pub growth_after: usize,
    /// Allowed free-energy rise per step, relative to the energy scale.
    pub energy_tol: f64,
    /// Hard cap on `dt`, applied on top of the stability estimate.
    pub dt_cap: Option<f64>,
    pub interface_mean: InterfaceMean,
}

/// Interface density used as the mobility of the flux `ρ ∇μ / b`.
///
/// The logarithmic mean makes the entropic part of the flux exactly
/// `D (ρ_{i+1} - ρ_i) / h`, so coarse packets do not over-diffuse.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum InterfaceMean {
    Arithmetic,
    #[default]
    Logarithmic,
}

impl InterfaceMean {
    fn eval(self, a: f64, b: f64) -> f64 {
        match self {
            InterfaceMean::Arithmetic => 0.5 * (a + b),
            InterfaceMean::Logarithmic => {
                let x = b / a - 1.0;
                if x.abs() < 1e-4 {
                    a * (1.0 + x / 2.0 - x * x / 12.0)
                } else {
                    (b - a) / x.ln_1p()
                }
            }
        }
    }
}

impl Default for StepperOptions {
    fn default() -> Self {
        Self {
            safety: 0.9,
            dt_min: 1e-14,
            growth: 1.2,
            growth_after: 10,
            energy_tol: 1e-12,
            dt_cap: None,
            interface_mean: InterfaceMean::default(),
        }
    }
}

/// Diagnostics recorded along a trajectory.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Observation {
    pub t: f64,
    pub mass: f64,
    pub energy: EnergyBreakdown,
    /// Entropy in the configured form; zero when the entropy term is off.
    pub entropy: f64,
    pub sigma2: f64,
    pub mu_spread: f64,
    pub dt: f64,
}

#[derive(Clone, Debug, Default)]
pub struct Trajectory {
    pub observations: Vec<Observation>,
}

/// Outcome of a single accepted step.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StepReport {
    pub dt: f64,
    pub rejections: usize,
    pub free_energy_before: f64,
    pub free_energy_after: f64,
}

#[derive(Clone, Debug)]
pub struct DiffusionState {
    model: Arc<FreeEnergyModel>,
    rho: Vec<f64>,
    t: f64,
    dt: f64,
    streak: usize,
    options: StepperOptions,
    energy: EnergyBreakdown,
    last_dt: f64,
    accepted: u64,
}

fn interface_fluxes(
    grid: &Grid,
    rho: &[f64],
    potential: &[f64],
    friction: f64,
    mean: InterfaceMean,
) -> Vec<f64> {
    let inv = 1.0 / (friction * grid.spacing());
    (0..grid.interfaces())
        .map(|i| {
            let r = grid.right(i);
            mean.eval(rho[i], rho[r]) * (potential[r] - potential[i]) * inv
        })
        .collect()
}

pub(crate) fn rhs_from_mu(
    grid: &Grid,
    rho: &[f64],
    mu: &[f64],
    friction: f64,
    mean: InterfaceMean,
) -> Vec<f64> {
    let flux = interface_fluxes(grid, rho, mu, friction, mean);
    let mut out = vec![0.0; grid.n()];
    flux_divergence_into(grid, &flux, &mut out);
    out
}

fn spread(values: &[f64]) -> f64 {
    let (lo, hi) = values
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
    hi - lo
}

fn energy_scale(e: &EnergyBreakdown) -> f64 {
    // Round-off in the total is set by its largest parts, not by the sum.
    e.total
        .abs()
        .max(e.e_tf.abs() + e.e_w.abs() + e.e_h.abs() + e.e_d.abs() + e.e_u.abs() + e.minus_ts.abs())
}

impl DiffusionState {
    pub fn new(model: FreeEnergyModel, rho: DensityField, options: StepperOptions) -> Result<Self> {
        if rho.grid() != model.grid() {
            return Err(Error::GridMismatch);
        }
        model.params().require_friction()?;
        model.check_band(rho.values())?;
        let energy = model.breakdown_values(rho.values());
        let mut state = Self {
            model: Arc::new(model),
            rho: rho.values().to_vec(),
            t: 0.0,
            dt: 0.0,
            streak: 0,
            options,
            energy,
            last_dt: 0.0,
            accepted: 0,
        };
        state.dt = 0.1 * state.dt_max();
        Ok(state)
    }

    /// Restores a state mid-run, including the adaptive step controller.
    pub fn restore(
        model: FreeEnergyModel,
        rho: DensityField,
        options: StepperOptions,
        t: f64,
        dt: f64,
        streak: usize,
    ) -> Result<Self> {
        let mut state = Self::new(model, rho, options)?;
        state.t = t;
        state.dt = dt;
        state.streak = streak;
        Ok(state)
    }

    pub fn model(&self) -> &FreeEnergyModel {
        &self.model
    }

    pub fn params(&self) -> &ModelParams {
        self.model.params()
    }

    pub fn grid(&self) -> &Grid {
        self.model.grid()
    }

    pub fn t(&self) -> f64 {
        self.t
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn streak(&self) -> usize {
        self.streak
    }

    pub fn accepted_steps(&self) -> u64 {
        self.accepted
    }

    pub fn rho_values(&self) -> &[f64] {
        &self.rho
    }

    pub fn density(&self) -> DensityField {
        DensityField::from_trusted(*self.grid(), self.rho.clone())
    }

    pub fn energy(&self) -> EnergyBreakdown {
        self.energy
    }

    pub fn mass(&self) -> f64 {
        self.grid().integrate(&self.rho)
    }

    pub fn chemical_potential(&self) -> Vec<f64> {
        self.model.chemical_potential_values(&self.rho)
    }

    pub fn rhs(&self) -> Vec<f64> {
        let mu = self.chemical_potential();
        rhs_from_mu(self.grid(), &self.rho, &mu, self.params().friction, self.options.interface_mean)
    }

    /// Explicit stability estimate: the local (Thomas-Fermi + entropic)
    /// diffusion bound plus the fourth-order Weizsäcker bound.
    pub fn dt_max(&self) -> f64 {
        let p = self.params();
        let h = self.grid().spacing();
        let d_max = local_diffusion_values(&self.rho, p)
            .into_iter()
            .fold(0.0, f64::max);
        let mut rate = 4.0 * d_max / (h * h);
        if p.toggles.weizsacker {
            let u = &p.units;
            rate += 4.0 * u.hbar * u.hbar / (u.mass * p.friction * h.powi(4));
        }
        let estimate = if rate > 0.0 {
            self.options.safety * 2.0 / rate
        } else {
            f64::INFINITY
        };
        match self.options.dt_cap {
            Some(cap) => estimate.min(cap),
            None if estimate.is_finite() => estimate,
            None => 1.0,
        }
    }

    /// One accepted step of at most `dt` and at most up to `t_limit`.
    pub fn step_until(&mut self, t_limit: f64) -> Result<StepReport> {
        let mu = self.chemical_potential();
        let rhs = rhs_from_mu(self.grid(), &self.rho, &mu, self.params().friction, self.options.interface_mean);
        let before = self.energy;
        let tol = self.options.energy_tol * energy_scale(&before);
        let mut rejections = 0;
        loop {
            let remaining = t_limit - self.t;
            let clipped = remaining <= self.dt;
            let dt = if clipped { remaining } else { self.dt };
            let trial: Vec<f64> = self
                .rho
                .iter()
                .zip(&rhs)
                .map(|(r, d)| r + dt * d)
                .collect();
            if self.model.check_band(&trial).is_ok() {
                let after = self.model.breakdown_values(&trial);
                if after.total <= before.total + tol {
                    self.rho = trial;
                    self.energy = after;
                    self.t = if clipped { t_limit } else { self.t + dt };
                    self.last_dt = dt;
                    self.accepted += 1;
                    self.streak += 1;
                    if self.streak >= self.options.growth_after {
                        self.streak = 0;
                        self.dt = (self.dt * self.options.growth).min(self.dt_max());
                    }
                    return Ok(StepReport {
                        dt,
                        rejections,
                        free_energy_before: before.total,
                        free_energy_after: after.total,
                    });
                }
            }
            rejections += 1;
            self.streak = 0;
            self.dt = 0.5 * dt;
            if self.dt < self.options.dt_min {
                return Err(Error::DtUnderflow {
                    t: self.t,
                    dt: self.dt,
                    dt_min: self.options.dt_min,
                });
            }
        }
    }

    pub fn step(&mut self) -> Result<StepReport> {
        self.step_until(f64::INFINITY)
    }

    /// Steps until `t` equals `target` exactly.
    pub fn advance_to(&mut self, target: f64) -> Result<()> {
        while self.t < target {
            self.step_until(target)?;
        }
        Ok(())
    }

    pub fn observe(&self) -> Observation {
        let p = self.params();
        let entropy = if p.entropy_active() {
            crate::functionals::entropy_values(self.grid(), &self.rho, p)
        } else {
            0.0
        };
        Observation {
            t: self.t,
            mass: self.mass(),
            energy: self.energy,
            entropy,
            sigma2: variance_values(self.grid(), &self.rho).unwrap_or(f64::NAN),
            mu_spread: spread(&self.chemical_potential()),
            dt: self.last_dt,
        }
    }
}

/// Observation times `t0, t0 + c, ...` up to and including `t_end`.
pub fn observation_times(t0: f64, t_end: f64, cadence: f64) -> Vec<f64> {
    let mut times = vec![t0];
    if t_end <= t0 {
        return times;
    }
    if cadence > 0.0 {
        let mut k = 1u64;
        loop {
            let t = t0 + k as f64 * cadence;
            if t >= t_end * (1.0 - 1e-12) {
                break;
            }
            times.push(t);
            k += 1;
        }
    }
    times.push(t_end);
    times
}

/// Evolves to `t_end`, observing at the cadence. `on_observation` sees every
/// record as it is produced.
pub fn evolve_with(
    state: &mut DiffusionState,
    t_end: f64,
    cadence: f64,
    mut on_observation: impl FnMut(&DiffusionState, &Observation),
) -> Result<Trajectory> {
    let mut traj = Trajectory::default();
    for target in observation_times(state.t(), t_end, cadence) {
        state.advance_to(target)?;
        let obs = state.observe();
        on_observation(state, &obs);
        traj.observations.push(obs);
    }
    Ok(traj)
}

pub fn evolve(state: &mut DiffusionState, t_end: f64, cadence: f64) -> Result<Trajectory> {
    evolve_with(state, t_end, cadence, |_, _| {})
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SteadyStateOptions {
    pub tol: f64,
    /// Relaxation time used to scale the RHS residual; `None` picks
    /// `b L² / E` with `E = max(|mean μ|, k_B T)`.
    pub t_char: Option<f64>,
    pub max_steps: u64,
    pub check_every: u64,
}

impl Default for SteadyStateOptions {
    fn default() -> Self {
        Self {
            tol: 1e-7,
            t_char: None,
            max_steps: 20_000_000,
            check_every: 500,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SteadyStateReport {
    pub mu_spread: f64,
    pub mu_mean: f64,
    pub rhs_max: f64,
    pub steps: u64,
    pub t: f64,
}

fn steady_residuals(state: &DiffusionState, opts: &SteadyStateOptions) -> (SteadyStateReport, bool) {
    let mu = state.chemical_potential();
    let rhs = rhs_from_mu(
        state.grid(),
        state.rho_values(),
        &mu,
        state.params().friction,
        state.options.interface_mean,
    );
    let mean = mu.iter().sum::<f64>() / mu.len() as f64;
    let mu_spread = spread(&mu);
    let rhs_max = rhs.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let rho_max = state.rho_values().iter().copied().fold(0.0, f64::max);
    let t_char = opts.t_char.unwrap_or_else(|| {
        let e = mean.abs().max(state.params().kt());
        let l = state.grid().length();
        if e > 0.0 {
            state.params().friction * l * l / e
        } else {
            1.0
        }
    });
    let converged = mu_spread <= opts.tol * mean.abs() && rhs_max <= opts.tol * rho_max / t_char;
    (
        SteadyStateReport {
            mu_spread,
            mu_mean: mean,
            rhs_max,
            steps: 0,
            t: state.t(),
        },
        converged,
    )
}

/// Evolves until the chemical potential is flat to `tol` (relative to its
/// mean) and the RHS residual is below `tol · max ρ / t_char`.
pub fn steady_state(state: &mut DiffusionState, opts: &SteadyStateOptions) -> Result<SteadyStateReport> {
    let mut steps = 0u64;
    loop {
        let (mut report, converged) = steady_residuals(state, opts);
        report.steps = steps;
        if converged {
            return Ok(report);
        }
        if steps >= opts.max_steps {
            return Err(Error::NotConverged {
                steps: steps as usize,
                mu_spread: report.mu_spread,
                rhs_max: report.rhs_max,
            });
        }
        for _ in 0..opts.check_every {
            state.step()?;
            steps += 1;
        }
    }
}

/// `∇·(ρ ∇μ / b)` on the finite-volume stencil.
pub fn rhs_mu_form(rho: &DensityField, u: &ScalarField, p: &ModelParams) -> Result<ScalarField> {
    p.require_friction()?;
    let model = FreeEnergyModel::new(*p, u)?;
    let mu = model.chemical_potential(rho)?;
    Ok(ScalarField::from_raw(
        *rho.grid(),
        rhs_from_mu(rho.grid(), rho.values(), mu.values(), p.friction, InterfaceMean::default()),
    ))
}

/// `∇·[ρ ∇U_eff / b + ∇(𝔻 ρ)]` with the effective potential and diffusion
/// coefficient evaluated from the density.
pub fn rhs_effective_form(rho: &DensityField, u: &ScalarField, p: &ModelParams) -> Result<ScalarField> {
    p.require_friction()?;
    let model = FreeEnergyModel::new(*p, u)?;
    if rho.grid() != model.grid() {
        return Err(Error::GridMismatch);
    }
    model.check_band(rho.values())?;
    let grid = rho.grid();
    let r = rho.values();
    let u_eff = model.effective_potential_values(r);
    let d = effective_diffusion_values(grid, r, p);
    let pressure: Vec<f64> = d.iter().zip(r).map(|(d, r)| d * r).collect();
    let mut flux = interface_fluxes(grid, r, &u_eff, p.friction, InterfaceMean::default());
    let h = grid.spacing();
    for (i, f) in flux.iter_mut().enumerate() {
        *f += (pressure[grid.right(i)] - pressure[i]) / h;
    }
    let mut out = vec![0.0; grid.n()];
    flux_divergence_into(grid, &flux, &mut out);
    Ok(ScalarField::from_raw(*grid, out))
}
