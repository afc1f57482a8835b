//! Dissipative Kohn-Sham propagation with the Kostin friction potential.
//!
//! Each orbital obeys
//! `iħ ∂ₜφ = [-ħ²∇²/2m + U_eff[ρ] + thermal(ρ) + ħ(b/m)θ] φ`
//! with `θ` the unwrapped, gauge-fixed phase of `φ`. The step is Strang
//! split: half a step of the local potential (frozen at step start), a full
//! kinetic step (spectral on periodic grids, Crank-Nicolson on no-flux
//! grids), and the second potential half-step.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::diffusion::DiffusionState;
use crate::error::{Error, Result};
use crate::functionals::{
    bohm_potential_values, dirac_energy_values, entropy_values, external_energy_values,
    thermal_potential_values, DensityField, FreeEnergyModel, ModelParams,
};
use crate::grid::{divergence_values, gradient_values, laplacian_values, Boundary, Grid, ScalarField, VectorField};
use crate::oracles::variance_values;

/// Default node threshold, relative to the density maximum.
pub const PHASE_THRESHOLD_REL: f64 = 1e-10;

/// Adjacent wrapped phase differences above this are treated as a node or
/// vortex rather than a resolved phase gradient.
pub const PHASE_JUMP_LIMIT: f64 = 0.9 * PI;

#[derive(Clone, Debug, PartialEq)]
pub struct Orbital {
    grid: Grid,
    values: Vec<Complex64>,
    occupation: f64,
}

impl Orbital {
    pub fn new(grid: Grid, values: Vec<Complex64>, occupation: f64) -> Result<Self> {
        if values.len() != grid.n() {
            return Err(Error::InvalidGrid(format!(
                "orbital has {} values on a grid of {}",
                values.len(),
                grid.n()
            )));
        }
        if let Some((index, v)) = values.iter().enumerate().find(|(_, v)| !(v.re.is_finite() && v.im.is_finite())) {
            return Err(Error::NonFinite {
                index,
                value: if v.re.is_finite() { v.im } else { v.re },
            });
        }
        if !(occupation.is_finite() && occupation > 0.0) {
            return Err(Error::param("occupation", format!("must be > 0, got {occupation}")));
        }
        let orbital = Self {
            grid,
            values,
            occupation,
        };
        if !(orbital.norm() > 0.0) {
            return Err(Error::ZeroMass);
        }
        Ok(orbital)
    }

    pub fn from_fn(grid: Grid, occupation: f64, f: impl Fn(f64) -> Complex64) -> Result<Self> {
        Self::new(grid, grid.coords().into_iter().map(f).collect(), occupation)
    }

    /// Real, nodeless orbital with `occupation · |φ|² = ρ`.
    pub fn from_density(rho: &DensityField, occupation: f64) -> Result<Self> {
        let values = rho
            .values()
            .iter()
            .map(|r| Complex64::new((r / occupation).sqrt(), 0.0))
            .collect();
        Self::new(*rho.grid(), values, occupation)
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn occupation(&self) -> f64 {
        self.occupation
    }

    /// `∫ |φ|² dx`.
    pub fn norm(&self) -> f64 {
        self.grid.integrate(&self.modulus_squared())
    }

    pub fn modulus_squared(&self) -> Vec<f64> {
        self.values.iter().map(|v| v.norm_sqr()).collect()
    }

    /// Multiplies by the global phase `e^{iα}`.
    pub fn rotated(&self, alpha: f64) -> Self {
        let w = Complex64::from_polar(1.0, alpha);
        Self {
            values: self.values.iter().map(|v| v * w).collect(),
            ..self.clone()
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct OrbitalSet {
    params: ModelParams,
    orbitals: Vec<Orbital>,
}

impl OrbitalSet {
    pub fn new(params: ModelParams, orbitals: Vec<Orbital>) -> Result<Self> {
        params.validate()?;
        let first = orbitals
            .first()
            .ok_or_else(|| Error::param("orbitals", "at least one orbital is required"))?;
        if orbitals.iter().any(|o| o.grid != first.grid) {
            return Err(Error::GridMismatch);
        }
        Ok(Self { params, orbitals })
    }

    pub fn grid(&self) -> &Grid {
        &self.orbitals[0].grid
    }

    pub fn params(&self) -> &ModelParams {
        &self.params
    }

    pub fn orbitals(&self) -> &[Orbital] {
        &self.orbitals
    }

    pub fn norms(&self) -> Vec<f64> {
        self.orbitals.iter().map(Orbital::norm).collect()
    }

    /// `Σ_k n_k |φ_k|²` without clamping.
    pub fn raw_density(&self) -> Vec<f64> {
        let mut rho = vec![0.0; self.grid().n()];
        for o in &self.orbitals {
            for (r, v) in rho.iter_mut().zip(&o.values) {
                *r += o.occupation * v.norm_sqr();
            }
        }
        rho
    }
}

/// `ρ = Σ_k n_k |φ_k|²`, clamped into the admissible band so that the
/// logarithmic terms stay finite at nodes.
pub fn density_from_orbitals(os: &OrbitalSet) -> DensityField {
    DensityField::clamped(ScalarField::from_raw(*os.grid(), os.raw_density()), os.params())
}

fn wrap(d: f64) -> f64 {
    let w = (d + PI).rem_euclid(2.0 * PI) - PI;
    // rem_euclid can return exactly 2π for tiny negative inputs.
    if w >= PI {
        w - 2.0 * PI
    } else {
        w
    }
}

fn phase_values(grid: &Grid, phi: &[Complex64], threshold_rel: f64) -> Result<Vec<f64>> {
    let rho: Vec<f64> = phi.iter().map(|v| v.norm_sqr()).collect();
    let (peak, &rho_max) = rho
        .iter()
        .enumerate()
        .fold((0, &rho[0]), |best, cur| if cur.1 > best.1 { cur } else { best });
    if !(rho_max > 0.0) {
        return Err(Error::ZeroMass);
    }
    let threshold = threshold_rel * rho_max;
    let n = phi.len();
    let mut theta = vec![0.0; n];
    theta[peak] = phi[peak].arg();
    let sweeps: [Box<dyn Iterator<Item = usize>>; 2] = [Box::new(peak + 1..n), Box::new((0..peak).rev())];
    for sweep in sweeps {
        let mut last = peak;
        for i in sweep {
            if rho[i] >= threshold {
                let jump = wrap(phi[i].arg() - phi[last].arg());
                if jump.abs() > PHASE_JUMP_LIMIT {
                    return Err(Error::PhaseAmbiguity { index: i, jump });
                }
                theta[i] = theta[last] + jump;
                last = i;
            } else {
                theta[i] = theta[last];
            }
        }
    }
    let w = grid.weights();
    let (num, den) = (0..n).fold((0.0, 0.0), |(a, b), i| (a + w[i] * rho[i] * theta[i], b + w[i] * rho[i]));
    let mean = num / den;
    theta.iter_mut().for_each(|t| *t -= mean);
    Ok(theta)
}

/// Unwrapped phase, swept outward from the density maximum and gauge-fixed
/// to zero density-weighted mean. Points below `threshold_rel · max|φ|²`
/// inherit the phase of the nearest resolved point on the side of the
/// maximum.
pub fn phase_field(phi: &Orbital, threshold_rel: f64) -> Result<ScalarField> {
    Ok(ScalarField::from_raw(phi.grid, phase_values(&phi.grid, &phi.values, threshold_rel)?))
}

/// The friction potential `ħ (b/m) θ`.
pub fn kostin_potential(phi: &Orbital, p: &ModelParams) -> Result<ScalarField> {
    if p.friction == 0.0 {
        return Ok(ScalarField::zeros(phi.grid));
    }
    let c = kostin_coefficient(p);
    let theta = phase_values(&phi.grid, &phi.values, PHASE_THRESHOLD_REL)?;
    Ok(ScalarField::from_raw(phi.grid, theta.into_iter().map(|t| c * t).collect()))
}

fn kostin_coefficient(p: &ModelParams) -> f64 {
    p.units.hbar * p.friction / p.units.mass
}

/// Argument of the logarithm in the thermal potential.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ThermalForm {
    /// `k_B T ln(ρ / (ρ̄ - sρ))`, the same term as in the chemical potential.
    #[default]
    Saturated,
    /// `k_B T ln ρ`, the single-orbital form.
    Literal,
}

fn thermal_values(rho: &[f64], p: &ModelParams, form: ThermalForm) -> Vec<f64> {
    match form {
        ThermalForm::Saturated => thermal_potential_values(rho, p),
        ThermalForm::Literal if p.entropy_active() => rho.iter().map(|r| p.kt() * r.ln()).collect(),
        ThermalForm::Literal => vec![0.0; rho.len()],
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DksOptions {
    pub thermal_form: ThermalForm,
    pub phase_threshold: f64,
    /// Allowed relative norm change per step.
    pub norm_tol: f64,
    pub dt_min: f64,
    /// Upper bound on `dt`; the kinetic and potential phase limits also apply.
    pub dt_cap: Option<f64>,
}

impl Default for DksOptions {
    fn default() -> Self {
        Self {
            thermal_form: ThermalForm::Saturated,
            phase_threshold: PHASE_THRESHOLD_REL,
            norm_tol: 1e-8,
            dt_min: 1e-14,
            dt_cap: None,
        }
    }
}

#[derive(Clone)]
enum Kinetic {
    Spectral {
        forward: Arc<dyn Fft<f64>>,
        inverse: Arc<dyn Fft<f64>>,
        k2: Vec<f64>,
    },
    CrankNicolson,
}

impl fmt::Debug for Kinetic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Kinetic::Spectral { .. } => f.write_str("Spectral"),
            Kinetic::CrankNicolson => f.write_str("CrankNicolson"),
        }
    }
}

fn wavenumbers_squared(grid: &Grid) -> Vec<f64> {
    let n = grid.n();
    let dk = 2.0 * PI / grid.length();
    (0..n)
        .map(|j| {
            let m = if j <= n / 2 { j as f64 } else { j as f64 - n as f64 };
            (m * dk).powi(2)
        })
        .collect()
}

impl Kinetic {
    fn new(grid: &Grid) -> Self {
        match grid.boundary() {
            Boundary::Periodic => {
                let mut planner = FftPlanner::new();
                Kinetic::Spectral {
                    forward: planner.plan_fft_forward(grid.n()),
                    inverse: planner.plan_fft_inverse(grid.n()),
                    k2: wavenumbers_squared(grid),
                }
            }
            Boundary::NoFlux => Kinetic::CrankNicolson,
        }
    }

    /// Free evolution `φ ← exp(iħ dt ∇²/2m) φ`.
    fn propagate(&self, grid: &Grid, p: &ModelParams, phi: &mut [Complex64], dt: f64) {
        let (hbar, m) = (p.units.hbar, p.units.mass);
        match self {
            Kinetic::Spectral { forward, inverse, k2 } => {
                forward.process(phi);
                let scale = 1.0 / grid.n() as f64;
                for (v, k2) in phi.iter_mut().zip(k2) {
                    *v *= Complex64::from_polar(scale, -0.5 * hbar * k2 * dt / m);
                }
                inverse.process(phi);
            }
            Kinetic::CrankNicolson => crank_nicolson(grid, phi, hbar * dt / (4.0 * m)),
        }
    }

    /// `(ħ²/2m) ∫ |∇φ|²` in the discretization used by the propagator.
    fn energy(&self, grid: &Grid, p: &ModelParams, phi: &[Complex64]) -> f64 {
        let c = 0.5 * p.units.hbar * p.units.hbar / p.units.mass;
        match self {
            Kinetic::Spectral { forward, k2, .. } => {
                let mut buf = phi.to_vec();
                forward.process(&mut buf);
                let sum: f64 = buf.iter().zip(k2).map(|(v, k2)| k2 * v.norm_sqr()).sum();
                c * sum * grid.spacing() / grid.n() as f64
            }
            Kinetic::CrankNicolson => {
                let re: Vec<f64> = phi.iter().map(|v| v.re).collect();
                let im: Vec<f64> = phi.iter().map(|v| v.im).collect();
                let (lre, lim) = (laplacian_values(grid, &re), laplacian_values(grid, &im));
                let f: Vec<f64> = (0..phi.len()).map(|i| -(re[i] * lre[i] + im[i] * lim[i])).collect();
                c * grid.integrate(&f)
            }
        }
    }
}

/// Solves `(1 - iβ Δ) φ' = (1 + iβ Δ) φ` with the mirror-boundary
/// Laplacian `Δ`. The scheme is unitary in the trapezoid inner product.
fn crank_nicolson(grid: &Grid, phi: &mut [Complex64], beta: f64) {
    let n = phi.len();
    let h2 = grid.spacing() * grid.spacing();
    let ib = Complex64::new(0.0, beta / h2);
    // Off-diagonal coefficients of h²Δ: row 0 and row n-1 carry the mirror 2.
    let upper = |i: usize| if i == 0 { 2.0 } else { 1.0 };
    let lower = |i: usize| if i == n - 1 { 2.0 } else { 1.0 };
    let rhs: Vec<Complex64> = (0..n)
        .map(|i| {
            let mut lap = -2.0 * phi[i];
            if i > 0 {
                lap += lower(i) * phi[i - 1];
            }
            if i + 1 < n {
                lap += upper(i) * phi[i + 1];
            }
            phi[i] + ib * lap
        })
        .collect();
    // Thomas algorithm on diag 1 + 2iβ/h², off-diagonals -iβ/h² · {1, 2}.
    let diag = Complex64::new(1.0, 0.0) + 2.0 * ib;
    let mut c_prime = vec![Complex64::new(0.0, 0.0); n];
    let mut d_prime = vec![Complex64::new(0.0, 0.0); n];
    c_prime[0] = -ib * upper(0) / diag;
    d_prime[0] = rhs[0] / diag;
    for i in 1..n {
        let a = -ib * lower(i);
        let denom = diag - a * c_prime[i - 1];
        if i + 1 < n {
            c_prime[i] = -ib * upper(i) / denom;
        }
        d_prime[i] = (rhs[i] - a * d_prime[i - 1]) / denom;
    }
    phi[n - 1] = d_prime[n - 1];
    for i in (0..n - 1).rev() {
        phi[i] = d_prime[i] - c_prime[i] * phi[i + 1];
    }
}

/// Energy of an orbital set: orbital kinetic energy plus the density terms
/// of the propagator's potential.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct DksEnergy {
    pub kinetic: f64,
    pub e_h: f64,
    pub e_d: f64,
    pub e_u: f64,
    pub minus_ts: f64,
    pub total: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct DksObservation {
    pub t: f64,
    pub mass: f64,
    pub norms: Vec<f64>,
    pub energy: DksEnergy,
    pub sigma2: f64,
    pub dt: f64,
}

#[derive(Clone, Debug, Default)]
pub struct DksTrajectory {
    pub observations: Vec<DksObservation>,
}

#[derive(Clone, Debug)]
pub struct DksState {
    model: Arc<FreeEnergyModel>,
    set: OrbitalSet,
    kinetic: Kinetic,
    options: DksOptions,
    t: f64,
    dt: f64,
    last_dt: f64,
    accepted: u64,
}

impl DksState {
    pub fn new(set: OrbitalSet, external: &ScalarField, options: DksOptions) -> Result<Self> {
        if external.grid() != set.grid() {
            return Err(Error::GridMismatch);
        }
        let model = FreeEnergyModel::new(*set.params(), external)?;
        let kinetic = Kinetic::new(set.grid());
        let mut state = Self {
            model: Arc::new(model),
            set,
            kinetic,
            options,
            t: 0.0,
            dt: 0.0,
            last_dt: 0.0,
            accepted: 0,
        };
        state.dt = state.dt_max();
        Ok(state)
    }

    pub fn restore(set: OrbitalSet, external: &ScalarField, options: DksOptions, t: f64, dt: f64) -> Result<Self> {
        let mut state = Self::new(set, external, options)?;
        state.t = t;
        state.dt = dt;
        Ok(state)
    }

    pub fn orbitals(&self) -> &OrbitalSet {
        &self.set
    }

    pub fn model(&self) -> &FreeEnergyModel {
        &self.model
    }

    pub fn grid(&self) -> &Grid {
        self.set.grid()
    }

    pub fn params(&self) -> &ModelParams {
        self.set.params()
    }

    pub fn options(&self) -> &DksOptions {
        &self.options
    }

    pub fn t(&self) -> f64 {
        self.t
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn accepted_steps(&self) -> u64 {
        self.accepted
    }

    pub fn density(&self) -> DensityField {
        density_from_orbitals(&self.set)
    }

    /// Step limit: the kinetic phase advance at the Nyquist mode stays
    /// below π/4, as does the friction relaxation `b dt / m`.
    pub fn dt_max(&self) -> f64 {
        let p = self.params();
        let h = self.grid().spacing();
        let mut dt = p.units.mass * h * h / (2.0 * PI * p.units.hbar);
        if p.friction > 0.0 {
            dt = dt.min(0.25 * PI * p.units.mass / p.friction);
        }
        match self.options.dt_cap {
            Some(cap) => dt.min(cap),
            None => dt,
        }
    }

    /// Local potential shared by all orbitals: `U_eff[ρ]` plus the thermal term.
    fn shared_potential(&self, rho: &[f64]) -> Vec<f64> {
        let mut v = self.model.effective_potential_values(rho);
        for (vi, th) in v.iter_mut().zip(thermal_values(rho, self.params(), self.options.thermal_form)) {
            *vi += th;
        }
        v
    }

    /// Per-orbital potentials frozen at the current state.
    fn potentials(&self) -> Result<Vec<Vec<f64>>> {
        let rho = self.density();
        let shared = self.shared_potential(rho.values());
        let c = kostin_coefficient(self.params());
        self.set
            .orbitals
            .iter()
            .map(|o| {
                if c == 0.0 {
                    return Ok(shared.clone());
                }
                let theta = phase_values(&o.grid, &o.values, self.options.phase_threshold)?;
                Ok(shared.iter().zip(theta).map(|(v, t)| v + c * t).collect())
            })
            .collect()
    }

    fn strang(&self, potentials: &[Vec<f64>], dt: f64) -> Vec<Orbital> {
        let grid = *self.grid();
        let p = *self.params();
        let hbar = p.units.hbar;
        self.set
            .orbitals
            .iter()
            .zip(potentials)
            .map(|(o, v)| {
                // A constant shift only rotates the global phase; removing the
                // value at the peak keeps the exponent small.
                let peak = o
                    .values
                    .iter()
                    .enumerate()
                    .fold((0, 0.0), |b, (i, x)| if x.norm_sqr() > b.1 { (i, x.norm_sqr()) } else { b })
                    .0;
                let half: Vec<Complex64> = v
                    .iter()
                    .map(|vi| Complex64::from_polar(1.0, -(vi - v[peak]) * dt / (2.0 * hbar)))
                    .collect();
                let mut phi: Vec<Complex64> = o.values.iter().zip(&half).map(|(a, b)| a * b).collect();
                self.kinetic.propagate(&grid, &p, &mut phi, dt);
                phi.iter_mut().zip(&half).for_each(|(a, b)| *a *= b);
                Orbital {
                    values: phi,
                    ..o.clone()
                }
            })
            .collect()
    }

    /// One accepted step of at most `dt`, ending no later than `t_limit`.
    pub fn step_until(&mut self, t_limit: f64) -> Result<f64> {
        let potentials = self.potentials()?;
        let norms = self.set.norms();
        // A unitary step keeps the norm at any dt, so the drift check alone
        // cannot catch an oversized step handed in from outside.
        self.dt = self.dt.min(self.dt_max());
        loop {
            let remaining = t_limit - self.t;
            let clipped = remaining <= self.dt;
            let dt = if clipped { remaining } else { self.dt };
            let next = self.strang(&potentials, dt);
            let drift = next
                .iter()
                .zip(&norms)
                .map(|(o, n0)| (o.norm() / n0 - 1.0).abs())
                .fold(0.0, f64::max);
            if drift <= self.options.norm_tol {
                self.set.orbitals = next;
                self.t = if clipped { t_limit } else { self.t + dt };
                self.last_dt = dt;
                self.accepted += 1;
                if !clipped {
                    self.dt = (self.dt * 1.2).min(self.dt_max());
                }
                return Ok(dt);
            }
            self.dt = 0.5 * dt;
            if self.dt < self.options.dt_min {
                return Err(Error::NormDrift { drift });
            }
        }
    }

    pub fn step(&mut self) -> Result<f64> {
        self.step_until(f64::INFINITY)
    }

    pub fn advance_to(&mut self, target: f64) -> Result<()> {
        while self.t < target {
            self.step_until(target)?;
        }
        Ok(())
    }

    pub fn energy(&self) -> DksEnergy {
        let grid = self.grid();
        let p = self.params();
        let kinetic = self
            .set
            .orbitals
            .iter()
            .map(|o| o.occupation * self.kinetic.energy(grid, p, &o.values))
            .sum();
        let rho = self.density();
        let r = rho.values();
        let e_h = self.model.kernel().map_or(0.0, |k| k.energy(r));
        let e_d = if p.toggles.dirac { dirac_energy_values(grid, r, p) } else { 0.0 };
        let e_u = external_energy_values(grid, r, self.model.external());
        let minus_ts = if p.entropy_active() {
            -p.temperature * entropy_values(grid, r, p)
        } else {
            0.0
        };
        DksEnergy {
            kinetic,
            e_h,
            e_d,
            e_u,
            minus_ts,
            total: kinetic + e_h + e_d + e_u + minus_ts,
        }
    }

    pub fn observe(&self) -> DksObservation {
        let rho = self.set.raw_density();
        DksObservation {
            t: self.t,
            mass: self.grid().integrate(&rho),
            norms: self.set.norms(),
            energy: self.energy(),
            sigma2: variance_values(self.grid(), &rho).unwrap_or(f64::NAN),
            dt: self.last_dt,
        }
    }
}

/// Advances by exactly `dt` in steps no longer than the stability limit.
pub fn dks_step(os: &OrbitalSet, u: &ScalarField, dt: f64, options: DksOptions) -> Result<OrbitalSet> {
    let mut state = DksState::new(os.clone(), u, options)?;
    state.dt = dt;
    state.advance_to(dt)?;
    Ok(state.set)
}

pub fn dks_evolve_with(
    state: &mut DksState,
    t_end: f64,
    cadence: f64,
    mut on_observation: impl FnMut(&DksState, &DksObservation),
) -> Result<DksTrajectory> {
    let mut traj = DksTrajectory::default();
    for target in crate::diffusion::observation_times(state.t(), t_end, cadence) {
        state.advance_to(target)?;
        let obs = state.observe();
        on_observation(state, &obs);
        traj.observations.push(obs);
    }
    Ok(traj)
}

pub fn dks_evolve(state: &mut DksState, t_end: f64, cadence: f64) -> Result<DksTrajectory> {
    dks_evolve_with(state, t_end, cadence, |_, _| {})
}

#[derive(Clone, Debug, PartialEq)]
pub struct MadelungFields {
    pub rho: DensityField,
    pub velocity: VectorField,
    pub theta: ScalarField,
}

/// Madelung fields at the middle of three consecutive states, with the
/// residuals of the continuity and force-balance equations.
#[derive(Clone, Debug, PartialEq)]
pub struct MadelungReport {
    pub fields: MadelungFields,
    /// `∂ₜρ + ∇·(ρV)`.
    pub continuity: ScalarField,
    /// `m∂ₜV + mV∇V + bV + ∇(Q + U_eff + thermal)`.
    pub force: ScalarField,
    /// `∫ρ|m∂ₜV + mV∇V| / ∫ρ|bV|`; infinite when `b = 0`.
    pub inertial_ratio: f64,
}

fn velocity_values(grid: &Grid, phi: &Orbital, p: &ModelParams, threshold: f64) -> Result<(Vec<f64>, Vec<f64>)> {
    let theta = phase_values(grid, &phi.values, threshold)?;
    let c = p.units.hbar / p.units.mass;
    let v = gradient_values(grid, &theta).into_iter().map(|g| c * g).collect();
    Ok((theta, v))
}

pub fn madelung_fields(phi: &Orbital, p: &ModelParams, threshold_rel: f64) -> Result<MadelungFields> {
    let grid = phi.grid;
    let (theta, v) = velocity_values(&grid, phi, p, threshold_rel)?;
    let rho = DensityField::clamped(ScalarField::from_raw(grid, phi.modulus_squared()), p);
    Ok(MadelungFields {
        rho,
        velocity: VectorField::new(grid, v)?,
        theta: ScalarField::from_raw(grid, theta),
    })
}

/// Madelung split of a single orbital from the states at `t - dt`, `t`,
/// `t + dt`. Residuals are zeroed where the density is below the node
/// threshold.
pub fn madelung_split(
    states: [&Orbital; 3],
    dt: f64,
    model: &FreeEnergyModel,
    options: &DksOptions,
) -> Result<MadelungReport> {
    let [prev, cur, next] = states;
    let grid = cur.grid;
    if prev.grid != grid || next.grid != grid || *model.grid() != grid {
        return Err(Error::GridMismatch);
    }
    let p = model.params();
    let m = p.units.mass;
    let thr = options.phase_threshold;
    let fields = madelung_fields(cur, p, thr)?;
    let (_, v_prev) = velocity_values(&grid, prev, p, thr)?;
    let (_, v_next) = velocity_values(&grid, next, p, thr)?;
    let rho = fields.rho.values();
    let v = fields.velocity.values();
    let rho_prev = prev.modulus_squared();
    let rho_next = next.modulus_squared();

    let flux: Vec<f64> = rho.iter().zip(v).map(|(r, v)| r * v).collect();
    let div = divergence_values(&grid, &flux);
    let mut continuity: Vec<f64> = (0..grid.n())
        .map(|i| (rho_next[i] - rho_prev[i]) / (2.0 * dt) + div[i])
        .collect();

    let mut driving = bohm_potential_values(&grid, rho, p);
    let u_eff = model.effective_potential_values(rho);
    let thermal = thermal_values(rho, p, options.thermal_form);
    for i in 0..grid.n() {
        driving[i] += u_eff[i] + thermal[i];
    }
    let grad_drive = gradient_values(&grid, &driving);
    let grad_v = gradient_values(&grid, v);
    let mut inertial = vec![0.0; grid.n()];
    let mut force = vec![0.0; grid.n()];
    for i in 0..grid.n() {
        inertial[i] = m * (v_next[i] - v_prev[i]) / (2.0 * dt) + m * v[i] * grad_v[i];
        force[i] = inertial[i] + p.friction * v[i] + grad_drive[i];
    }
    let rho_max = rho.iter().copied().fold(0.0, f64::max);
    for i in 0..grid.n() {
        if rho[i] < thr * rho_max {
            continuity[i] = 0.0;
            force[i] = 0.0;
            inertial[i] = 0.0;
        }
    }
    let num: Vec<f64> = (0..grid.n()).map(|i| rho[i] * inertial[i].abs()).collect();
    let den: Vec<f64> = (0..grid.n()).map(|i| rho[i] * (p.friction * v[i]).abs()).collect();
    let (num, den) = (grid.integrate(&num), grid.integrate(&den));
    let inertial_ratio = if den > 0.0 { num / den } else if num > 0.0 { f64::INFINITY } else { 0.0 };
    Ok(MadelungReport {
        fields,
        continuity: ScalarField::from_raw(grid, continuity),
        force: ScalarField::from_raw(grid, force),
        inertial_ratio,
    })
}

/// `∫|ρ_a - ρ_b| / ∫ρ_b`.
pub fn l1_distance(grid: &Grid, a: &[f64], b: &[f64]) -> f64 {
    let diff: Vec<f64> = a.iter().zip(b).map(|(x, y)| (x - y).abs()).collect();
    grid.integrate(&diff) / grid.integrate(b)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CorrespondencePoint {
    pub t: f64,
    pub l1: f64,
}

/// Advances both engines through `times` and records the relative L1
/// distance between their densities.
pub fn compare_with_diffusion(
    dks: &mut DksState,
    diffusion: &mut DiffusionState,
    times: &[f64],
) -> Result<Vec<CorrespondencePoint>> {
    if dks.grid() != diffusion.grid() {
        return Err(Error::GridMismatch);
    }
    times
        .iter()
        .map(|&t| {
            dks.advance_to(t)?;
            diffusion.advance_to(t)?;
            Ok(CorrespondencePoint {
                t,
                l1: l1_distance(dks.grid(), &dks.orbitals().raw_density(), diffusion.rho_values()),
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::functionals::Toggles;

    fn gaussian_orbital(grid: Grid, center: f64, var: f64, k0: f64) -> Orbital {
        let norm = (2.0 * PI * var).powf(-0.25);
        Orbital::from_fn(grid, 1.0, |x| {
            Complex64::from_polar(norm * (-(x - center).powi(2) / (4.0 * var)).exp(), k0 * x)
        })
        .unwrap()
    }

    fn free_params(friction: f64) -> ModelParams {
        ModelParams {
            friction,
            toggles: Toggles::none(),
            ..ModelParams::default()
        }
    }

    #[test]
    fn density_adds_occupations() {
        let g = Grid::new(256, 40.0, Boundary::Periodic).unwrap();
        let a = gaussian_orbital(g, 20.0, 1.0, 0.0);
        let re: Vec<Complex64> = a
            .values()
            .iter()
            .zip(g.coords())
            .map(|(v, x)| v * (x - 20.0))
            .collect();
        let b = Orbital::new(g, re, 1.0).unwrap();
        let nb = b.norm();
        let b = Orbital::new(g, b.values().iter().map(|v| v / nb.sqrt()).collect(), 1.0).unwrap();
        let set = OrbitalSet::new(free_params(0.0), vec![a.clone(), b]).unwrap();
        let rho = density_from_orbitals(&set);
        assert!((rho.mass() - 2.0).abs() < 1e-10);
        let rotated = OrbitalSet::new(free_params(0.0), vec![a.rotated(1.3)]).unwrap();
        let plain = OrbitalSet::new(free_params(0.0), vec![a]).unwrap();
        for (x, y) in rotated.raw_density().iter().zip(plain.raw_density()) {
            assert!((x - y).abs() < 1e-15);
        }
    }

    #[test]
    fn phase_of_real_and_plane_waves() {
        let g = Grid::new(64, 2.0 * PI, Boundary::Periodic).unwrap();
        let real = Orbital::from_fn(g, 1.0, |x| Complex64::new(1.0 + 0.5 * x.cos(), 0.0)).unwrap();
        assert!(phase_field(&real, PHASE_THRESHOLD_REL).unwrap().values().iter().all(|t| t.abs() < 1e-15));

        let k = 3.0;
        let wave = Orbital::from_fn(g, 1.0, |x| Complex64::from_polar(1.0, k * x)).unwrap();
        let theta = phase_field(&wave, PHASE_THRESHOLD_REL).unwrap();
        let mean = g.coords().iter().sum::<f64>() / 64.0;
        for (t, x) in theta.values().iter().zip(g.coords()) {
            assert!((t - k * (x - mean)).abs() < 1e-12);
        }
        let shifted = phase_field(&wave.rotated(2.5), PHASE_THRESHOLD_REL).unwrap();
        for (a, b) in shifted.values().iter().zip(theta.values()) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn sign_change_is_flagged() {
        let g = Grid::new(64, 10.0, Boundary::NoFlux).unwrap();
        let odd = Orbital::from_fn(g, 1.0, |x| Complex64::new((x - 5.0) * (-(x - 5.0).powi(2)).exp(), 0.0)).unwrap();
        assert!(matches!(
            phase_field(&odd, PHASE_THRESHOLD_REL),
            Err(Error::PhaseAmbiguity { .. })
        ));
    }

    #[test]
    fn kostin_potential_vanishes_for_real_states_and_zero_friction() {
        let g = Grid::new(64, 10.0, Boundary::Periodic).unwrap();
        let phi = gaussian_orbital(g, 5.0, 1.0, 0.0);
        let v = kostin_potential(&phi, &free_params(3.0)).unwrap();
        assert!(v.values().iter().all(|x| x.abs() < 1e-15));
        let moving = gaussian_orbital(g, 5.0, 1.0, 2.0 * PI / 10.0 * 3.0);
        let v = kostin_potential(&moving, &free_params(0.0)).unwrap();
        assert!(v.values().iter().all(|x| *x == 0.0));
    }

    #[test]
    fn free_plane_wave_keeps_its_norm() {
        let g = Grid::new(128, 10.0, Boundary::Periodic).unwrap();
        let k = 2.0 * PI / 10.0 * 4.0;
        let wave = Orbital::from_fn(g, 1.0, |x| Complex64::from_polar(0.1_f64.sqrt(), k * x)).unwrap();
        let set = OrbitalSet::new(free_params(0.0), vec![wave]).unwrap();
        let mut s = DksState::new(set, &ScalarField::zeros(g), DksOptions::default()).unwrap();
        s.advance_to(1.0).unwrap();
        let phi = &s.orbitals().orbitals()[0];
        assert!((phi.norm() - 1.0).abs() < 1e-10);
        // Exact free evolution of a plane wave is a phase e^{-iħk²t/2m}.
        let expected = Complex64::from_polar(0.1_f64.sqrt(), k * g.x(7) - 0.5 * k * k);
        assert!((phi.values()[7] - expected).norm() < 1e-10);
    }

    #[test]
    fn crank_nicolson_is_unitary_and_spreads_like_the_spectral_path() {
        let ng = Grid::new(401, 40.0, Boundary::NoFlux).unwrap();
        let pg = Grid::new(400, 40.0, Boundary::Periodic).unwrap();
        let run = |g: Grid| {
            let set = OrbitalSet::new(free_params(0.0), vec![gaussian_orbital(g, 20.0, 1.0, 0.0)]).unwrap();
            let mut s = DksState::new(set, &ScalarField::zeros(g), DksOptions::default()).unwrap();
            s.advance_to(2.0).unwrap();
            s.observe()
        };
        let a = run(ng);
        let b = run(pg);
        assert!((a.norms[0] - 1.0).abs() < 1e-10);
        assert!((a.sigma2 / b.sigma2 - 1.0).abs() < 2e-3, "{} vs {}", a.sigma2, b.sigma2);
        assert!((b.sigma2 - 2.0).abs() < 1e-3);
    }

    #[test]
    fn friction_dissipates_energy() {
        let g = Grid::new(256, 40.0, Boundary::Periodic).unwrap();
        let k = 2.0 * PI / 40.0 * 8.0;
        let set = OrbitalSet::new(free_params(0.5), vec![gaussian_orbital(g, 20.0, 1.0, k)]).unwrap();
        let mut s = DksState::new(set, &ScalarField::zeros(g), DksOptions::default()).unwrap();
        let mut last = s.energy().total;
        for _ in 0..400 {
            s.step().unwrap();
            let e = s.energy().total;
            assert!(e <= last + 1e-12 * last.abs(), "{e} > {last}");
            last = e;
        }
        assert!(last < 0.5 * 0.5 * k * k);
    }

    #[test]
    fn oversized_steps_are_split() {
        let g = Grid::new(128, 20.0, Boundary::Periodic).unwrap();
        let trap = ScalarField::from_fn(g, |x| 0.5 * (x - 10.0).powi(2)).unwrap();
        let set = OrbitalSet::new(free_params(50.0), vec![gaussian_orbital(g, 11.0, 0.5, 0.0)]).unwrap();
        let jumped = dks_step(&set, &trap, 2.0, DksOptions::default()).unwrap();
        let mut s = DksState::new(set, &trap, DksOptions::default()).unwrap();
        s.advance_to(2.0).unwrap();
        assert_eq!(&jumped, s.orbitals());
    }

    #[test]
    fn zero_length_evolution_is_identity() {
        let g = Grid::new(64, 10.0, Boundary::Periodic).unwrap();
        let set = OrbitalSet::new(free_params(1.0), vec![gaussian_orbital(g, 5.0, 1.0, 0.0)]).unwrap();
        let mut s = DksState::new(set.clone(), &ScalarField::zeros(g), DksOptions::default()).unwrap();
        let traj = dks_evolve(&mut s, 0.0, 0.1).unwrap();
        assert_eq!(traj.observations.len(), 1);
        assert_eq!(s.orbitals(), &set);
    }

    #[test]
    fn madelung_residuals_of_a_stationary_state() {
        let g = Grid::new(128, 16.0, Boundary::Periodic).unwrap();
        let p = ModelParams {
            friction: 1.0,
            toggles: Toggles {
                weizsacker: true,
                ..Toggles::none()
            },
            ..ModelParams::default()
        };
        let u = ScalarField::from_fn(g, |x| 0.5 * (x - 8.0).powi(2)).unwrap();
        let phi = gaussian_orbital(g, 8.0, 0.5, 0.0);
        let model = FreeEnergyModel::new(p, &u).unwrap();
        let report = madelung_split([&phi, &phi, &phi], 1e-3, &model, &DksOptions::default()).unwrap();
        assert!(report.fields.velocity.values().iter().all(|v| *v == 0.0));
        assert!(report.continuity.values().iter().all(|v| *v == 0.0));
        let rho = report.fields.rho.values();
        // ∇(Q + U) vanishes for the ground state up to the stencil error.
        let weighted: f64 = report.force.values().iter().zip(rho).map(|(f, r)| (f * r).abs()).sum::<f64>() * g.spacing();
        assert!(weighted < 1e-2, "{weighted}");
    }
}
