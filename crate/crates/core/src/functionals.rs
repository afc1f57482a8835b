//! Energy and entropy functionals of the Thomas-Fermi-Dirac-Weizsäcker
//! electron gas, the free energy built from them, and its functional
//! derivative (the local chemical potential).
//!
//! Every discrete energy here is paired with a chemical potential that is its
//! exact derivative with respect to the grid values (divided by the
//! quadrature weight). The diffusion engine relies on that pairing: it makes
//! the flux-form update a true discrete gradient flow of the reported free
//! energy.
//!
//! The Weizsäcker term is discretised as `(ħ²/2m) ∫ (D⁺√ρ)²`, whose exact
//! derivative is the three-point Bohm potential `-(ħ²/2m) Δ√ρ / √ρ`.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{laplacian_into, laplacian_values, Boundary, Grid, ScalarField, UnitSystem};
use crate::hartree::{CoulombKernel, DEFAULT_SOFTENING_CELLS};

/// Relative density floor used when clamping initial profiles.
pub const DENSITY_FLOOR_REL: f64 = 1e-12;

const THREE_PI2: f64 = 3.0 * PI * PI;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Toggles {
    pub tf: bool,
    pub weizsacker: bool,
    pub hartree: bool,
    pub dirac: bool,
    pub entropy: bool,
}

impl Default for Toggles {
    fn default() -> Self {
        Self::all()
    }
}

impl Toggles {
    pub fn all() -> Self {
        Self {
            tf: true,
            weizsacker: true,
            hartree: true,
            dirac: true,
            entropy: true,
        }
    }

    /// Low-density regime: only the Weizsäcker term and the entropy survive.
    pub fn dilute() -> Self {
        Self {
            tf: false,
            weizsacker: true,
            hartree: false,
            dirac: false,
            entropy: true,
        }
    }

    pub fn none() -> Self {
        Self {
            tf: false,
            weizsacker: false,
            hartree: false,
            dirac: false,
            entropy: false,
        }
    }
}

/// Lattice-gas (Fermi-Dirac) entropy with saturation density, or its
/// Boltzmann low-density limit.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EntropyForm {
    FermiDirac,
    Boltzmann,
}

impl EntropyForm {
    /// Weight of `ρ` in the denominator of `ln(ρ / (ρ̄ - sρ))`.
    fn exclusion(self) -> f64 {
        match self {
            EntropyForm::FermiDirac => 1.0,
            EntropyForm::Boltzmann => 0.0,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModelParams {
    pub units: UnitSystem,
    pub temperature: f64,
    /// Friction coefficient `b` (mass / time).
    pub friction: f64,
    /// Saturation density `ρ̄`.
    pub rho_bar: f64,
    pub toggles: Toggles,
    pub entropy_form: EntropyForm,
    /// Soft-core length `a`; `None` means five grid spacings.
    pub coulomb_softening: Option<f64>,
    pub background_neutralization: bool,
}

impl Default for ModelParams {
    fn default() -> Self {
        Self {
            units: UnitSystem::default(),
            temperature: 0.0,
            friction: 1.0,
            rho_bar: 1.0,
            toggles: Toggles::all(),
            entropy_form: EntropyForm::FermiDirac,
            coulomb_softening: None,
            background_neutralization: true,
        }
    }
}

impl ModelParams {
    /// Dilute single-electron model: Weizsäcker + Boltzmann entropy + U.
    pub fn dilute(temperature: f64, friction: f64) -> Self {
        Self {
            temperature,
            friction,
            toggles: Toggles::dilute(),
            entropy_form: EntropyForm::Boltzmann,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.units.validate()?;
        if !(self.temperature.is_finite() && self.temperature >= 0.0) {
            return Err(Error::param("temperature", format!("must be >= 0, got {}", self.temperature)));
        }
        if !(self.friction.is_finite() && self.friction >= 0.0) {
            return Err(Error::param("friction", format!("must be >= 0, got {}", self.friction)));
        }
        if !(self.rho_bar.is_finite() && self.rho_bar > 0.0) {
            return Err(Error::param("rho_bar", format!("must be > 0, got {}", self.rho_bar)));
        }
        if let Some(a) = self.coulomb_softening {
            if !(a.is_finite() && a > 0.0) {
                return Err(Error::param("coulomb_softening", format!("must be > 0, got {a}")));
            }
        }
        Ok(())
    }

    /// Density dynamics divide by `b`; only the wave propagator allows `b = 0`.
    pub fn require_friction(&self) -> Result<()> {
        if self.friction > 0.0 {
            Ok(())
        } else {
            Err(Error::param("friction", "density evolution needs b > 0"))
        }
    }

    pub fn kt(&self) -> f64 {
        self.units.kb * self.temperature
    }

    /// The entropy term contributes only at finite temperature.
    pub fn entropy_active(&self) -> bool {
        self.toggles.entropy && self.temperature > 0.0
    }

    pub fn hartree_active(&self) -> bool {
        self.toggles.hartree && self.units.e2 > 0.0
    }

    pub fn density_floor(&self) -> f64 {
        DENSITY_FLOOR_REL * self.rho_bar
    }

    /// Upper edge of the admissible band, if the saturation constraint applies.
    pub fn density_ceiling(&self) -> Option<f64> {
        (self.entropy_active() && self.entropy_form == EntropyForm::FermiDirac).then_some(self.rho_bar)
    }

    pub fn softening_for(&self, grid: &Grid) -> f64 {
        self.coulomb_softening
            .unwrap_or(DEFAULT_SOFTENING_CELLS * grid.spacing())
    }

    /// Builds the Coulomb kernel when the Hartree term is active.
    pub fn coulomb_kernel(&self, grid: &Grid) -> Result<Option<CoulombKernel>> {
        if !self.hartree_active() {
            return Ok(None);
        }
        if grid.boundary() == Boundary::Periodic && !self.background_neutralization {
            return Err(Error::param(
                "background_neutralization",
                "periodic Coulomb sums need a neutralizing background",
            ));
        }
        CoulombKernel::new(
            *grid,
            self.units.e2,
            self.softening_for(grid),
            self.background_neutralization,
        )
        .map(Some)
    }
}

/// Checks the open band `(0, ceiling)` in which all logarithms are finite.
pub(crate) fn check_band(values: &[f64], ceiling: Option<f64>) -> Result<()> {
    let upper = ceiling.unwrap_or(f64::INFINITY);
    for (index, &value) in values.iter().enumerate() {
        if !(value >= f64::MIN_POSITIVE && value < upper) {
            return Err(Error::DensityOutOfBand {
                index,
                value,
                lower: 0.0,
                upper,
            });
        }
    }
    Ok(())
}

/// A strictly positive electron density.
#[derive(Clone, Debug, PartialEq)]
pub struct DensityField {
    field: ScalarField,
}

impl DensityField {
    /// Validates that `field` lies in the admissible band of `params`.
    pub fn new(field: ScalarField, params: &ModelParams) -> Result<Self> {
        check_band(field.values(), params.density_ceiling())?;
        Ok(Self { field })
    }

    /// Clamps `field` into `[ε_ρ, ρ̄ - ε_ρ]` (ceiling only when the
    /// saturation constraint applies).
    pub fn clamped(field: ScalarField, params: &ModelParams) -> Self {
        let floor = params.density_floor();
        let ceiling = params.density_ceiling().map(|c| c - floor);
        let grid = *field.grid();
        let values = field
            .into_values()
            .into_iter()
            .map(|v| {
                let v = v.max(floor);
                ceiling.map_or(v, |c| v.min(c))
            })
            .collect();
        Self {
            field: ScalarField::from_raw(grid, values),
        }
    }

    pub(crate) fn from_trusted(grid: Grid, values: Vec<f64>) -> Self {
        Self {
            field: ScalarField::from_raw(grid, values),
        }
    }

    pub fn grid(&self) -> &Grid {
        self.field.grid()
    }

    pub fn values(&self) -> &[f64] {
        self.field.values()
    }

    pub fn field(&self) -> &ScalarField {
        &self.field
    }

    pub fn mass(&self) -> f64 {
        self.field.integrate()
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct EnergyBreakdown {
    pub e_tf: f64,
    pub e_w: f64,
    pub e_h: f64,
    pub e_d: f64,
    pub e_u: f64,
    pub minus_ts: f64,
    pub total: f64,
}

impl EnergyBreakdown {
    fn summed(mut self) -> Self {
        self.total = self.e_tf + self.e_w + self.e_h + self.e_d + self.e_u + self.minus_ts;
        self
    }
}

/// Per-point scalar effective diffusion coefficient (the 1D tensor).
#[derive(Clone, Debug, PartialEq)]
pub struct DiffusionTensorField {
    pub values: Vec<f64>,
}

// Pointwise coefficients.

fn tf_coefficient(u: &UnitSystem) -> f64 {
    0.3 * u.hbar * u.hbar / u.mass * THREE_PI2.powf(2.0 / 3.0)
}

fn dirac_coefficient(u: &UnitSystem) -> f64 {
    0.75 * u.e2 / PI * THREE_PI2.powf(1.0 / 3.0)
}

fn tf_potential_at(u: &UnitSystem, rho: f64) -> f64 {
    0.5 * u.hbar * u.hbar / u.mass * (THREE_PI2 * rho).powf(2.0 / 3.0)
}

fn dirac_potential_at(u: &UnitSystem, rho: f64) -> f64 {
    -u.e2 / PI * (THREE_PI2 * rho).cbrt()
}

fn thermal_potential_at(p: &ModelParams, rho: f64) -> f64 {
    let s = p.entropy_form.exclusion();
    p.kt() * (rho / (p.rho_bar - s * rho)).ln()
}

/// `k_B T ln(ρ / (ρ̄ - sρ))`, zero when the entropy term is inactive.
pub(crate) fn thermal_potential_values(rho: &[f64], p: &ModelParams) -> Vec<f64> {
    if p.entropy_active() {
        rho.iter().map(|&r| thermal_potential_at(p, r)).collect()
    } else {
        vec![0.0; rho.len()]
    }
}

// Energies on raw values.

pub(crate) fn tf_energy_values(grid: &Grid, rho: &[f64], p: &ModelParams) -> f64 {
    let c = tf_coefficient(&p.units);
    let f: Vec<f64> = rho.iter().map(|&r| c * r.powf(5.0 / 3.0)).collect();
    grid.integrate(&f)
}

pub(crate) fn weizsacker_energy_values(grid: &Grid, rho: &[f64], p: &ModelParams) -> f64 {
    let h = grid.spacing();
    let mut sum = 0.0;
    for i in 0..grid.interfaces() {
        let d = rho[grid.right(i)].sqrt() - rho[i].sqrt();
        sum += d * d;
    }
    0.5 * p.units.hbar * p.units.hbar / p.units.mass * sum / h
}

pub(crate) fn dirac_energy_values(grid: &Grid, rho: &[f64], p: &ModelParams) -> f64 {
    let c = dirac_coefficient(&p.units);
    let f: Vec<f64> = rho.iter().map(|&r| -c * r.powf(4.0 / 3.0)).collect();
    grid.integrate(&f)
}

pub(crate) fn external_energy_values(grid: &Grid, rho: &[f64], u: &[f64]) -> f64 {
    let f: Vec<f64> = rho.iter().zip(u).map(|(r, u)| r * u).collect();
    grid.integrate(&f)
}

/// Entropy in the selected form. Callers guarantee the band.
pub(crate) fn entropy_values(grid: &Grid, rho: &[f64], p: &ModelParams) -> f64 {
    let kb = p.units.kb;
    let rb = p.rho_bar;
    let f: Vec<f64> = match p.entropy_form {
        EntropyForm::FermiDirac => rho
            .iter()
            .map(|&r| {
                let hole = rb - r;
                -kb * (r * r.ln() + hole * hole.ln())
            })
            .collect(),
        EntropyForm::Boltzmann => rho
            .iter()
            .map(|&r| -kb * r * ((r / rb).ln() - 1.0))
            .collect(),
    };
    grid.integrate(&f)
}

pub(crate) fn bohm_potential_values(grid: &Grid, rho: &[f64], p: &ModelParams) -> Vec<f64> {
    let sqrt: Vec<f64> = rho.iter().map(|r| r.sqrt()).collect();
    let mut lap = vec![0.0; grid.n()];
    laplacian_into(grid, &sqrt, &mut lap);
    let c = -0.5 * p.units.hbar * p.units.hbar / p.units.mass;
    lap.iter().zip(&sqrt).map(|(l, s)| c * l / s).collect()
}

pub(crate) fn fisher_entropy_values(grid: &Grid, rho: &[f64]) -> f64 {
    let ln: Vec<f64> = rho.iter().map(|r| r.ln()).collect();
    let lap = laplacian_values(grid, &ln);
    let f: Vec<f64> = rho.iter().zip(&lap).map(|(r, l)| -r * l).collect();
    grid.integrate(&f)
}

/// Free energy evaluator with the external potential and Coulomb kernel
/// prepared once.
#[derive(Clone, Debug)]
pub struct FreeEnergyModel {
    grid: Grid,
    params: ModelParams,
    external: Vec<f64>,
    kernel: Option<CoulombKernel>,
}

/// The individual terms of the chemical potential.
#[derive(Clone, Debug, PartialEq)]
pub struct ChemicalPotentialTerms {
    pub tf: Vec<f64>,
    pub bohm: Vec<f64>,
    pub hartree: Vec<f64>,
    pub dirac: Vec<f64>,
    pub external: Vec<f64>,
    pub thermal: Vec<f64>,
}

impl ChemicalPotentialTerms {
    pub fn total(&self) -> Vec<f64> {
        (0..self.tf.len())
            .map(|i| {
                self.tf[i]
                    + self.bohm[i]
                    + self.hartree[i]
                    + self.dirac[i]
                    + self.external[i]
                    + self.thermal[i]
            })
            .collect()
    }
}

impl FreeEnergyModel {
    pub fn new(params: ModelParams, external: &ScalarField) -> Result<Self> {
        params.validate()?;
        let grid = *external.grid();
        let kernel = params.coulomb_kernel(&grid)?;
        Ok(Self {
            grid,
            params,
            external: external.values().to_vec(),
            kernel,
        })
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn params(&self) -> &ModelParams {
        &self.params
    }

    pub fn external(&self) -> &[f64] {
        &self.external
    }

    pub fn kernel(&self) -> Option<&CoulombKernel> {
        self.kernel.as_ref()
    }

    pub fn check_band(&self, rho: &[f64]) -> Result<()> {
        check_band(rho, self.params.density_ceiling())
    }

    pub fn hartree_potential(&self, rho: &[f64]) -> Vec<f64> {
        match &self.kernel {
            Some(k) => k.potential(rho),
            None => vec![0.0; self.grid.n()],
        }
    }

    /// Free energy of raw density values. The band is the caller's
    /// responsibility.
    pub fn breakdown_values(&self, rho: &[f64]) -> EnergyBreakdown {
        let p = &self.params;
        let g = &self.grid;
        let t = &p.toggles;
        EnergyBreakdown {
            e_tf: if t.tf { tf_energy_values(g, rho, p) } else { 0.0 },
            e_w: if t.weizsacker { weizsacker_energy_values(g, rho, p) } else { 0.0 },
            e_h: self.kernel.as_ref().map_or(0.0, |k| k.energy(rho)),
            e_d: if t.dirac { dirac_energy_values(g, rho, p) } else { 0.0 },
            e_u: external_energy_values(g, rho, &self.external),
            minus_ts: if p.entropy_active() {
                -p.temperature * entropy_values(g, rho, p)
            } else {
                0.0
            },
            total: 0.0,
        }
        .summed()
    }

    pub fn free_energy(&self, rho: &DensityField) -> Result<EnergyBreakdown> {
        self.check_grid(rho.grid())?;
        self.check_band(rho.values())?;
        Ok(self.breakdown_values(rho.values()))
    }

    pub fn potential_terms(&self, rho: &[f64]) -> ChemicalPotentialTerms {
        let p = &self.params;
        let t = &p.toggles;
        let n = self.grid.n();
        let pointwise = |on: bool, f: &dyn Fn(f64) -> f64| -> Vec<f64> {
            if on {
                rho.iter().map(|&r| f(r)).collect()
            } else {
                vec![0.0; n]
            }
        };
        ChemicalPotentialTerms {
            tf: pointwise(t.tf, &|r| tf_potential_at(&p.units, r)),
            bohm: if t.weizsacker {
                bohm_potential_values(&self.grid, rho, p)
            } else {
                vec![0.0; n]
            },
            hartree: self.hartree_potential(rho),
            dirac: pointwise(t.dirac, &|r| dirac_potential_at(&p.units, r)),
            external: self.external.clone(),
            thermal: pointwise(p.entropy_active(), &|r| thermal_potential_at(p, r)),
        }
    }

    pub fn chemical_potential_values(&self, rho: &[f64]) -> Vec<f64> {
        self.potential_terms(rho).total()
    }

    pub fn chemical_potential(&self, rho: &DensityField) -> Result<ScalarField> {
        self.check_grid(rho.grid())?;
        self.check_band(rho.values())?;
        ScalarField::new(self.grid, self.chemical_potential_values(rho.values()))
    }

    /// `U + v_H - (e²/π)(3π²ρ)^{1/3}`, toggles respected.
    pub fn effective_potential_values(&self, rho: &[f64]) -> Vec<f64> {
        let mut v = self.hartree_potential(rho);
        let dirac = self.params.toggles.dirac;
        for (i, vi) in v.iter_mut().enumerate() {
            *vi += self.external[i];
            if dirac {
                *vi += dirac_potential_at(&self.params.units, rho[i]);
            }
        }
        v
    }

    fn check_grid(&self, grid: &Grid) -> Result<()> {
        if *grid == self.grid {
            Ok(())
        } else {
            Err(Error::GridMismatch)
        }
    }
}

/// Thomas-Fermi and entropic parts of the effective diffusion coefficient,
/// without the Weizsäcker Hessian.
pub(crate) fn local_diffusion_values(rho: &[f64], p: &ModelParams) -> Vec<f64> {
    let u = &p.units;
    let c_tf = 0.2 * u.hbar * u.hbar / u.mass;
    rho.iter()
        .map(|&r| {
            let tf = if p.toggles.tf {
                c_tf * (THREE_PI2 * r).powf(2.0 / 3.0)
            } else {
                0.0
            };
            let ent = if p.entropy_active() {
                match p.entropy_form {
                    EntropyForm::FermiDirac => -p.kt() * (p.rho_bar / r) * (-r / p.rho_bar).ln_1p(),
                    EntropyForm::Boltzmann => p.kt(),
                }
            } else {
                0.0
            };
            (tf + ent) / p.friction
        })
        .collect()
}

pub(crate) fn effective_diffusion_values(grid: &Grid, rho: &[f64], p: &ModelParams) -> Vec<f64> {
    let mut d = local_diffusion_values(rho, p);
    if p.toggles.weizsacker {
        let ln: Vec<f64> = rho.iter().map(|r| r.ln()).collect();
        let hess = laplacian_values(grid, &ln);
        let c = 0.25 * p.units.hbar * p.units.hbar / (p.units.mass * p.friction);
        for (di, h) in d.iter_mut().zip(&hess) {
            *di -= c * h;
        }
    }
    d
}

// Public operations on fields.

pub fn tf_energy(rho: &DensityField, p: &ModelParams) -> f64 {
    tf_energy_values(rho.grid(), rho.values(), p)
}

pub fn weizsacker_energy(rho: &DensityField, p: &ModelParams) -> f64 {
    weizsacker_energy_values(rho.grid(), rho.values(), p)
}

pub fn dirac_energy(rho: &DensityField, p: &ModelParams) -> f64 {
    dirac_energy_values(rho.grid(), rho.values(), p)
}

pub fn external_energy(rho: &DensityField, u: &ScalarField) -> Result<f64> {
    if rho.grid() != u.grid() {
        return Err(Error::GridMismatch);
    }
    Ok(external_energy_values(rho.grid(), rho.values(), u.values()))
}

/// Fermi-Dirac lattice entropy; requires `0 < ρ < ρ̄` everywhere.
pub fn fd_entropy(rho: &DensityField, p: &ModelParams) -> Result<f64> {
    check_band(rho.values(), Some(p.rho_bar))?;
    let p = ModelParams {
        entropy_form: EntropyForm::FermiDirac,
        ..*p
    };
    Ok(entropy_values(rho.grid(), rho.values(), &p))
}

/// Entropy in the form selected by `p.entropy_form`.
pub fn entropy(rho: &DensityField, p: &ModelParams) -> Result<f64> {
    match p.entropy_form {
        EntropyForm::FermiDirac => fd_entropy(rho, p),
        EntropyForm::Boltzmann => Ok(entropy_values(rho.grid(), rho.values(), p)),
    }
}

pub fn free_energy(rho: &DensityField, u: &ScalarField, p: &ModelParams) -> Result<EnergyBreakdown> {
    FreeEnergyModel::new(*p, u)?.free_energy(rho)
}

pub fn bohm_potential(rho: &DensityField, p: &ModelParams) -> ScalarField {
    ScalarField::from_raw(*rho.grid(), bohm_potential_values(rho.grid(), rho.values(), p))
}

pub fn chemical_potential(rho: &DensityField, u: &ScalarField, p: &ModelParams) -> Result<ScalarField> {
    FreeEnergyModel::new(*p, u)?.chemical_potential(rho)
}

pub fn effective_potential(rho: &DensityField, u: &ScalarField, p: &ModelParams) -> Result<ScalarField> {
    let model = FreeEnergyModel::new(*p, u)?;
    model.check_grid(rho.grid())?;
    ScalarField::new(*rho.grid(), model.effective_potential_values(rho.values()))
}

pub fn effective_diffusion(rho: &DensityField, p: &ModelParams) -> DiffusionTensorField {
    DiffusionTensorField {
        values: effective_diffusion_values(rho.grid(), rho.values(), p),
    }
}

/// `S_F = -∫ ρ Δ ln ρ`.
pub fn fisher_entropy(rho: &DensityField) -> f64 {
    fisher_entropy_values(rho.grid(), rho.values())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Boundary;

    const TF_COEFF: f64 = 2.871234000188191;
    const DIRAC_COEFF: f64 = 0.7385587663820223;

    fn periodic(n: usize, l: f64) -> Grid {
        Grid::new(n, l, Boundary::Periodic).unwrap()
    }

    fn uniform(grid: Grid, v: f64) -> DensityField {
        DensityField::from_trusted(grid, vec![v; grid.n()])
    }

    fn gaussian(grid: Grid, center: f64, var: f64) -> DensityField {
        let f = ScalarField::from_fn(grid, |x| {
            (-(x - center).powi(2) / (2.0 * var)).exp() / (2.0 * PI * var).sqrt()
        })
        .unwrap();
        DensityField::clamped(f, &ModelParams::dilute(1.0, 1.0))
    }

    #[test]
    fn coefficients_match_closed_forms() {
        // (3/10)(3π²)^{2/3} and (3/4π)(3π²)^{1/3}, evaluated independently.
        let c = 3.0 * PI * PI;
        assert!((0.3 * c.powf(2.0 / 3.0) - TF_COEFF).abs() < 1e-14);
        assert!((0.75 / PI * c.cbrt() - DIRAC_COEFF).abs() < 1e-14);
    }

    #[test]
    fn uniform_gas_energies() {
        let g = periodic(64, 10.0);
        let p = ModelParams::default();
        let rho = uniform(g, 1.0);
        assert!((tf_energy(&rho, &p) - 10.0 * TF_COEFF).abs() < 1e-10);
        assert!((dirac_energy(&rho, &p) + 10.0 * DIRAC_COEFF).abs() < 1e-10);
        assert_eq!(weizsacker_energy(&rho, &p), 0.0);
        assert_eq!(fisher_entropy(&rho), 0.0);

        let rho2 = uniform(g, 2.0);
        let ratio = tf_energy(&rho2, &p) / tf_energy(&rho, &p);
        assert!((ratio - 2f64.powf(5.0 / 3.0)).abs() < 1e-12);

        let tiny = uniform(g, p.density_floor());
        assert!(tf_energy(&tiny, &p) < 1e-18);
    }

    #[test]
    fn dirac_energy_sign_and_coupling() {
        let g = periodic(32, 4.0);
        let mut p = ModelParams::default();
        let rho = gaussian(g, 2.0, 0.3);
        assert!(dirac_energy(&rho, &p) <= 0.0);
        p.units.e2 = 0.0;
        assert_eq!(dirac_energy(&rho, &p), 0.0);
    }

    #[test]
    fn gaussian_weizsacker_and_bohm() {
        let g = periodic(1024, 40.0);
        let p = ModelParams::dilute(1.0, 1.0);
        let rho = gaussian(g, 20.0, 1.0);
        let ew = weizsacker_energy(&rho, &p);
        assert!((ew - 0.125).abs() < 1e-4, "E_W = {ew}");
        let q = bohm_potential(&rho, &p);
        assert!((q.values()[512] - 0.25).abs() < 1e-3);
        for i in [480usize, 500, 540] {
            let x = g.x(i) - 20.0;
            let exact = 0.5 * (0.5 - x * x / 4.0);
            assert!((q.values()[i] - exact).abs() < 2e-3, "x = {x}");
        }
        assert!((fisher_entropy(&rho) - 1.0).abs() < 1e-3);
    }

    #[test]
    fn external_energy_moments() {
        let g = periodic(512, 20.0);
        let rho = gaussian(g, 7.5, 0.5);
        let u = ScalarField::from_fn(g, |x| x).unwrap();
        assert!((external_energy(&rho, &u).unwrap() - 7.5).abs() < 1e-8);
        let c = ScalarField::constant(g, 3.0);
        assert!((external_energy(&rho, &c).unwrap() - 3.0 * rho.mass()).abs() < 1e-12);
        assert_eq!(external_energy(&rho, &ScalarField::zeros(g)).unwrap(), 0.0);
        let other = ScalarField::zeros(periodic(512, 21.0));
        assert!(external_energy(&rho, &other).is_err());
    }

    #[test]
    fn fd_entropy_values_and_band() {
        let g = periodic(50, 10.0);
        let p = ModelParams {
            rho_bar: 1.0,
            ..ModelParams::default()
        };
        let half = uniform(g, 0.5);
        assert!((fd_entropy(&half, &p).unwrap() - 10.0 * 2f64.ln()).abs() < 1e-12);

        let eps = 1e-9;
        let low = uniform(g, eps);
        let p2 = ModelParams { rho_bar: 2.0, ..p };
        let s = fd_entropy(&low, &p2).unwrap();
        let limit = -10.0 * 2.0 * 2f64.ln();
        assert!((s - limit).abs() < 1e-6);

        assert!(fd_entropy(&uniform(g, 1.0), &p).is_err());
        assert!(fd_entropy(&uniform(g, 1.5), &p).is_err());
    }

    #[test]
    fn fd_entropy_is_concave_pointwise() {
        let kb = 1.0;
        let rb = 1.0;
        let s = |r: f64| -kb * (r * r.ln() + (rb - r) * (rb - r).ln());
        for r in [0.05, 0.3, 0.5, 0.8, 0.97] {
            let d = 1e-4;
            let second = (s(r + d) - 2.0 * s(r) + s(r - d)) / (d * d);
            let exact = -kb * rb / (r * (rb - r));
            assert!(second < 0.0);
            assert!((second - exact).abs() < 1e-4 * exact.abs());
        }
    }

    #[test]
    fn breakdown_respects_toggles() {
        let g = periodic(64, 10.0);
        let rho = uniform(g, 0.3);
        let u = ScalarField::zeros(g);
        let p = ModelParams {
            toggles: Toggles::none(),
            ..ModelParams::default()
        };
        let b = free_energy(&rho, &u, &p).unwrap();
        assert_eq!(b, EnergyBreakdown::default());

        let p = ModelParams {
            rho_bar: 2.0,
            temperature: 0.0,
            toggles: Toggles {
                dirac: false,
                ..Toggles::all()
            },
            ..ModelParams::default()
        };
        let b = free_energy(&uniform(g, 1.0), &u, &p).unwrap();
        assert!((b.total - 10.0 * TF_COEFF).abs() < 1e-10);
        assert_eq!(b.e_h, 0.0);
        assert_eq!(b.minus_ts, 0.0);
    }

    #[test]
    fn dilute_free_energy_is_w_plus_u_minus_ts() {
        let g = periodic(256, 20.0);
        let p = ModelParams::dilute(0.7, 1.0);
        let rho = gaussian(g, 10.0, 1.5);
        let u = ScalarField::from_fn(g, |x| 0.1 * (x - 10.0).powi(2)).unwrap();
        let b = free_energy(&rho, &u, &p).unwrap();
        let expected = weizsacker_energy(&rho, &p) + external_energy(&rho, &u).unwrap()
            - 0.7 * entropy(&rho, &p).unwrap();
        assert!((b.total - expected).abs() < 1e-12);
        assert_eq!((b.e_tf, b.e_h, b.e_d), (0.0, 0.0, 0.0));
    }

    #[test]
    fn uniform_chemical_potential() {
        let g = periodic(64, 10.0);
        let p = ModelParams {
            rho_bar: 2.0,
            temperature: 0.8,
            ..ModelParams::default()
        };
        let mu = chemical_potential(&uniform(g, 1.0), &ScalarField::zeros(g), &p).unwrap();
        let c = 3.0 * PI * PI;
        let expected = 0.5 * c.powf(2.0 / 3.0) - c.cbrt() / PI;
        assert!((0.5 * c.powf(2.0 / 3.0) - 4.785390000313652).abs() < 1e-12);
        assert!((c.cbrt() / PI - 0.9847450218426964).abs() < 1e-12);
        for &m in mu.values() {
            assert!((m - expected).abs() < 1e-10);
        }
        assert!((expected - 3.8007).abs() < 1e-4);
    }

    #[test]
    fn dilute_chemical_potential_is_bohm_plus_u_plus_boltzmann() {
        let g = periodic(128, 12.0);
        let p = ModelParams {
            rho_bar: 0.5,
            ..ModelParams::dilute(0.6, 1.0)
        };
        let rho = gaussian(g, 6.0, 1.0);
        let u = ScalarField::from_fn(g, |x| (x - 6.0).powi(2)).unwrap();
        let mu = chemical_potential(&rho, &u, &p).unwrap();
        let q = bohm_potential(&rho, &p);
        for i in 0..128 {
            let r = rho.values()[i];
            let exp = q.values()[i] + u.values()[i] + 0.6 * (r / 0.5).ln();
            assert!((mu.values()[i] - exp).abs() < 1e-12);
        }
    }

    #[test]
    fn chemical_potential_rejects_out_of_band() {
        let g = periodic(16, 1.0);
        let p = ModelParams {
            temperature: 1.0,
            rho_bar: 1.0,
            ..ModelParams::default()
        };
        let bad = DensityField::from_trusted(g, vec![1.2; 16]);
        assert!(matches!(
            chemical_potential(&bad, &ScalarField::zeros(g), &p),
            Err(Error::DensityOutOfBand { .. })
        ));
    }

    #[test]
    fn effective_potential_identities() {
        let g = periodic(128, 10.0);
        let p = ModelParams {
            rho_bar: 3.0,
            temperature: 0.4,
            ..ModelParams::default()
        };
        let rho = DensityField::new(
            ScalarField::from_fn(g, |x| 1.0 + 0.3 * (2.0 * PI * x / 10.0).sin()).unwrap(),
            &p,
        )
        .unwrap();
        let u = ScalarField::from_fn(g, |x| 0.2 * (2.0 * PI * x / 10.0).cos()).unwrap();
        let model = FreeEnergyModel::new(p, &u).unwrap();
        let terms = model.potential_terms(rho.values());
        let mu = terms.total();
        let ueff = effective_potential(&rho, &u, &p).unwrap();
        for i in 0..128 {
            let rest = terms.tf[i] + terms.bohm[i] + terms.thermal[i];
            assert!((ueff.values()[i] - (mu[i] - rest)).abs() < 1e-12);
        }

        let off = ModelParams {
            units: UnitSystem {
                e2: 0.0,
                ..p.units
            },
            ..p
        };
        let ueff = effective_potential(&rho, &u, &off).unwrap();
        assert_eq!(ueff.values(), u.values());

        // Uniform density with neutralization: only the exchange shift remains.
        let flat = uniform(g, 1.0);
        let ueff = effective_potential(&flat, &ScalarField::zeros(g), &p).unwrap();
        for &v in ueff.values() {
            assert!((v + 0.9847450218426964).abs() < 1e-10);
        }
    }

    #[test]
    fn effective_diffusion_limits() {
        let g = periodic(64, 10.0);
        let p = ModelParams {
            temperature: 0.0,
            friction: 1.0,
            toggles: Toggles {
                entropy: false,
                ..Toggles::all()
            },
            ..ModelParams::default()
        };
        let d = effective_diffusion(&uniform(g, 1.0), &p);
        let c = 3.0 * PI * PI;
        for &v in &d.values {
            assert!((v - 0.2 * c.powf(2.0 / 3.0)).abs() < 1e-12);
            assert!((v - 1.914156).abs() < 1e-5);
        }

        // Dilute Fermi-Dirac gas: entropic part tends to kT/b.
        let p = ModelParams {
            temperature: 2.0,
            friction: 4.0,
            rho_bar: 1.0,
            toggles: Toggles {
                tf: false,
                weizsacker: false,
                ..Toggles::all()
            },
            ..ModelParams::default()
        };
        let d = effective_diffusion(&uniform(g, 1e-8), &p);
        assert!((d.values[0] - 0.5).abs() < 1e-8);
    }

    #[test]
    fn gaussian_effective_diffusion_is_quantum_plus_einstein() {
        let g = periodic(512, 40.0);
        let (kt, b, var) = (0.5, 2.0, 1.5);
        let p = ModelParams::dilute(kt, b);
        let rho = gaussian(g, 20.0, var);
        let d = effective_diffusion(&rho, &p);
        let expected = 1.0 / (4.0 * b * var) + kt / b;
        for i in 200..312 {
            assert!((d.values[i] - expected).abs() < 1e-10, "i = {i}: {}", d.values[i]);
        }
    }

    #[test]
    fn weizsacker_matches_fisher_information() {
        let l = 10.0;
        let g = periodic(512, l);
        let p = ModelParams::default();
        let rho = DensityField::new(
            ScalarField::from_fn(g, |x| {
                let k = 2.0 * PI / l;
                1.0 + 0.2 * (k * x).sin() + 0.1 * (2.0 * k * x).cos()
            })
            .unwrap(),
            &p,
        )
        .unwrap();
        let ew = weizsacker_energy(&rho, &p);
        let sf = fisher_entropy(&rho);
        assert!((ew - sf / 8.0).abs() <= 1e-6 * ew);
    }
}
