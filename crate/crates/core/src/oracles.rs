//! Closed-form references: the thermo-quantum dispersion law and its limits,
//! stationary Gaussian widths in a harmonic trap, variance measurement, and a
//! finite-difference functional-derivative probe.
//!
//! Nothing here touches the evolution engines; these are the independent
//! side of every acceptance comparison.

use crate::error::{Error, Result};
use crate::functionals::{check_band, DensityField, ModelParams};
use crate::grid::Grid;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DispersionParams {
    /// Einstein diffusion constant `k_B T / b`.
    pub diffusion: f64,
    /// Squared thermal de Broglie length `ħ² / (4 m k_B T)`.
    pub lambda_t2: f64,
    pub sigma0_sq: f64,
}

impl DispersionParams {
    /// Derives `D` and `λ_T²` from the model. Requires `T > 0`.
    pub fn from_model(p: &ModelParams, sigma0_sq: f64) -> Result<Self> {
        if p.kt() <= 0.0 {
            return Err(Error::param("temperature", "dispersion law needs T > 0"));
        }
        p.require_friction()?;
        let u = &p.units;
        Ok(Self {
            diffusion: p.kt() / p.friction,
            lambda_t2: u.hbar * u.hbar / (4.0 * u.mass * p.kt()),
            sigma0_sq,
        })
    }
}

/// Solves `σ² - σ₀² - λ² ln[(λ² + σ²)/(λ² + σ₀²)] = 2Dt` for `σ²`.
///
/// The left side is increasing in `σ²`, so the root is bracketed by
/// `[σ₀², σ₀² + 2Dt + 4λ²]`; bisection shrinks the bracket and Newton polishes.
pub fn dispersion_sigma2(t: f64, dp: &DispersionParams) -> f64 {
    let DispersionParams {
        diffusion: d,
        lambda_t2: l2,
        sigma0_sq: s0,
    } = *dp;
    let rhs = 2.0 * d * t;
    if rhs <= 0.0 {
        return s0;
    }
    let residual = |s: f64| s - s0 - l2 * ((s - s0) / (l2 + s0)).ln_1p() - rhs;
    let mut lo = s0;
    let mut hi = s0 + rhs + 4.0 * l2;
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        if residual(mid) > 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
        if hi - lo <= 1e-6 * hi {
            break;
        }
    }
    let mut s = 0.5 * (lo + hi);
    for _ in 0..20 {
        // d/ds residual = s / (λ² + s)
        let step = residual(s) * (l2 + s) / s;
        s = (s - step).clamp(lo, hi);
        if step.abs() <= 1e-15 * s {
            break;
        }
    }
    s
}

/// The σ₀ = 0 zero-temperature law `σ² = ħ √(t / (m b))`.
pub fn zero_temperature_sigma2(t: f64, p: &ModelParams) -> f64 {
    p.units.hbar * (t / (p.units.mass * p.friction)).sqrt()
}

/// Zero-temperature law for a finite initial width,
/// `σ² = √(σ₀⁴ + ħ² t / (m b))`, from integrating `dσ²/dt = 2 D_Q(σ²)`.
pub fn zero_temperature_sigma2_from(t: f64, sigma0_sq: f64, p: &ModelParams) -> f64 {
    let u = &p.units;
    (sigma0_sq * sigma0_sq + u.hbar * u.hbar * t / (u.mass * p.friction)).sqrt()
}

/// Quantum diffusion coefficient `ħ² / (4 m b σ²)`.
pub fn quantum_diffusion_coefficient(sigma2: f64, p: &ModelParams) -> Result<f64> {
    if !(sigma2 > 0.0) {
        return Err(Error::NonPositiveVariance(sigma2));
    }
    p.require_friction()?;
    let u = &p.units;
    Ok(u.hbar * u.hbar / (4.0 * u.mass * p.friction * sigma2))
}

/// Stationary Gaussian width of the thermo-quantum diffusion equation in
/// `U = m ω² x² / 2`.
pub fn harmonic_stationary_variance(temperature: f64, omega: f64, p: &ModelParams) -> Result<f64> {
    if !(omega > 0.0) {
        return Err(Error::param("omega", format!("must be > 0, got {omega}")));
    }
    let u = &p.units;
    let kt = u.kb * temperature;
    let hw = u.hbar * omega;
    Ok((kt + (kt * kt + hw * hw).sqrt()) / (2.0 * u.mass * omega * omega))
}

/// Density-weighted mean position; periodic meshes use the circular mean.
pub fn measure_mean(grid: &Grid, rho: &[f64]) -> Result<f64> {
    let mass = grid.integrate(rho);
    if !(mass > 0.0) {
        return Err(Error::ZeroMass);
    }
    if grid.is_periodic() {
        let l = grid.length();
        let k = 2.0 * std::f64::consts::PI / l;
        let (mut c, mut s) = (0.0, 0.0);
        for (i, &r) in rho.iter().enumerate() {
            let w = grid.weight(i) * r;
            c += w * (k * grid.x(i)).cos();
            s += w * (k * grid.x(i)).sin();
        }
        Ok((s.atan2(c) / k).rem_euclid(l))
    } else {
        let m: f64 = rho
            .iter()
            .enumerate()
            .map(|(i, r)| grid.weight(i) * r * grid.x(i))
            .sum();
        Ok(m / mass)
    }
}

pub(crate) fn variance_values(grid: &Grid, rho: &[f64]) -> Result<f64> {
    let mass = grid.integrate(rho);
    let mean = measure_mean(grid, rho)?;
    let m2: f64 = rho
        .iter()
        .enumerate()
        .map(|(i, r)| {
            let d = grid.displacement(mean, grid.x(i));
            grid.weight(i) * r * d * d
        })
        .sum();
    Ok(m2 / mass)
}

pub fn measure_variance(rho: &DensityField) -> Result<f64> {
    variance_values(rho.grid(), rho.values())
}

/// Central difference `(F[ρ+ηg] - F[ρ-ηg]) / 2η`, Richardson-extrapolated
/// over `η` and `η/2`.
pub fn functional_derivative_fd<F>(
    functional: F,
    rho: &[f64],
    direction: &[f64],
    eta: f64,
    ceiling: Option<f64>,
) -> Result<f64>
where
    F: Fn(&[f64]) -> f64,
{
    let central = |e: f64| -> Result<f64> {
        let plus: Vec<f64> = rho.iter().zip(direction).map(|(r, g)| r + e * g).collect();
        let minus: Vec<f64> = rho.iter().zip(direction).map(|(r, g)| r - e * g).collect();
        check_band(&plus, ceiling)?;
        check_band(&minus, ceiling)?;
        Ok((functional(&plus) - functional(&minus)) / (2.0 * e))
    };
    let coarse = central(eta)?;
    let fine = central(0.5 * eta)?;
    Ok((4.0 * fine - coarse) / 3.0)
}
