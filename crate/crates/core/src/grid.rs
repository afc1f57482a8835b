//! Unit system, uniform 1D meshes and the discrete vector calculus shared by
//! every engine.
//!
//! All stencils are second order. On no-flux meshes the boundary is handled
//! with mirror ghost points (`f[-1] = f[1]`), which makes gradients vanish at
//! the walls and keeps flux-form updates exactly conservative under the
//! trapezoid rule.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Physical constants. Defaults are dimensionless atomic-style units.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct UnitSystem {
    pub hbar: f64,
    pub mass: f64,
    /// Coulomb coupling e².
    pub e2: f64,
    pub kb: f64,
}

impl Default for UnitSystem {
    fn default() -> Self {
        Self {
            hbar: 1.0,
            mass: 1.0,
            e2: 1.0,
            kb: 1.0,
        }
    }
}

impl UnitSystem {
    pub fn validate(&self) -> Result<()> {
        let check = |name: &'static str, v: f64| {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(Error::param(name, format!("must be finite and > 0, got {v}")))
            }
        };
        check("hbar", self.hbar)?;
        check("mass", self.mass)?;
        check("kb", self.kb)?;
        // e² = 0 is accepted as "Coulomb coupling switched off".
        if !(self.e2.is_finite() && self.e2 >= 0.0) {
            return Err(Error::param("e2", format!("must be finite and >= 0, got {}", self.e2)));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Boundary {
    Periodic,
    NoFlux,
}

impl std::fmt::Display for Boundary {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Boundary::Periodic => write!(f, "periodic"),
            Boundary::NoFlux => write!(f, "no_flux"),
        }
    }
}

pub const MIN_POINTS: usize = 8;

/// Uniform mesh on `[0, L)` (periodic, `h = L/n`) or `[0, L]` (no-flux,
/// `h = L/(n-1)`).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Grid {
    n: usize,
    length: f64,
    spacing: f64,
    boundary: Boundary,
}

impl Grid {
    pub fn new(n: usize, length: f64, boundary: Boundary) -> Result<Self> {
        if n < MIN_POINTS {
            return Err(Error::InvalidGrid(format!(
                "need at least {MIN_POINTS} points, got {n}"
            )));
        }
        if !(length.is_finite() && length > 0.0) {
            return Err(Error::InvalidGrid(format!(
                "length must be finite and positive, got {length}"
            )));
        }
        let spacing = match boundary {
            Boundary::Periodic => length / n as f64,
            Boundary::NoFlux => length / (n - 1) as f64,
        };
        Ok(Self {
            n,
            length,
            spacing,
            boundary,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn length(&self) -> f64 {
        self.length
    }

    pub fn spacing(&self) -> f64 {
        self.spacing
    }

    pub fn boundary(&self) -> Boundary {
        self.boundary
    }

    pub fn is_periodic(&self) -> bool {
        self.boundary == Boundary::Periodic
    }

    pub fn x(&self, i: usize) -> f64 {
        i as f64 * self.spacing
    }

    pub fn coords(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.x(i)).collect()
    }

    /// Quadrature weight of point `i`: rectangle rule (periodic) or
    /// trapezoid (no-flux).
    #[inline]
    pub fn weight(&self, i: usize) -> f64 {
        match self.boundary {
            Boundary::NoFlux if i == 0 || i + 1 == self.n => 0.5 * self.spacing,
            _ => self.spacing,
        }
    }

    pub fn weights(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.weight(i)).collect()
    }

    pub fn integrate(&self, values: &[f64]) -> f64 {
        debug_assert_eq!(values.len(), self.n);
        let h = self.spacing;
        let sum: f64 = values.iter().sum();
        match self.boundary {
            Boundary::Periodic => h * sum,
            Boundary::NoFlux => h * (sum - 0.5 * (values[0] + values[self.n - 1])),
        }
    }

    /// Signed displacement `x_j - x_i`, minimum image on periodic meshes.
    pub fn displacement(&self, xi: f64, xj: f64) -> f64 {
        let d = xj - xi;
        match self.boundary {
            Boundary::Periodic => d - self.length * (d / self.length).round(),
            Boundary::NoFlux => d,
        }
    }

    /// Number of cell interfaces carrying a flux.
    pub(crate) fn interfaces(&self) -> usize {
        match self.boundary {
            Boundary::Periodic => self.n,
            Boundary::NoFlux => self.n - 1,
        }
    }

    #[inline]
    pub(crate) fn right(&self, i: usize) -> usize {
        if i + 1 == self.n {
            0
        } else {
            i + 1
        }
    }

    pub(crate) fn check_len(&self, values: &[f64]) -> Result<()> {
        if values.len() != self.n {
            return Err(Error::InvalidGrid(format!(
                "expected {} values, got {}",
                self.n,
                values.len()
            )));
        }
        Ok(())
    }
}

fn check_finite(values: &[f64]) -> Result<()> {
    match values.iter().position(|v| !v.is_finite()) {
        Some(index) => Err(Error::NonFinite {
            index,
            value: values[index],
        }),
        None => Ok(()),
    }
}

/// A real field sampled on a [`Grid`].
#[derive(Clone, Debug, PartialEq)]
pub struct ScalarField {
    grid: Grid,
    values: Vec<f64>,
}

impl ScalarField {
    pub fn new(grid: Grid, values: Vec<f64>) -> Result<Self> {
        grid.check_len(&values)?;
        check_finite(&values)?;
        Ok(Self { grid, values })
    }

    pub fn from_fn(grid: Grid, f: impl Fn(f64) -> f64) -> Result<Self> {
        Self::new(grid, grid.coords().into_iter().map(f).collect())
    }

    pub fn constant(grid: Grid, c: f64) -> Self {
        Self {
            grid,
            values: vec![c; grid.n()],
        }
    }

    pub fn zeros(grid: Grid) -> Self {
        Self::constant(grid, 0.0)
    }

    /// Internal constructor for values produced by the stencils below.
    pub(crate) fn from_raw(grid: Grid, values: Vec<f64>) -> Self {
        debug_assert_eq!(values.len(), grid.n());
        Self { grid, values }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn integrate(&self) -> f64 {
        self.grid.integrate(&self.values)
    }

    pub fn gradient(&self) -> VectorField {
        VectorField {
            grid: self.grid,
            values: gradient_values(&self.grid, &self.values),
        }
    }

    pub fn laplacian(&self) -> ScalarField {
        ScalarField::from_raw(self.grid, laplacian_values(&self.grid, &self.values))
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn same_grid(&self, other: &ScalarField) -> Result<()> {
        if self.grid == other.grid {
            Ok(())
        } else {
            Err(Error::GridMismatch)
        }
    }
}

/// A 1D vector field (single component) sampled on a [`Grid`].
#[derive(Clone, Debug, PartialEq)]
pub struct VectorField {
    grid: Grid,
    values: Vec<f64>,
}

impl VectorField {
    /// On no-flux meshes the end components are forced to zero.
    pub fn new(grid: Grid, mut values: Vec<f64>) -> Result<Self> {
        grid.check_len(&values)?;
        check_finite(&values)?;
        if grid.boundary() == Boundary::NoFlux {
            values[0] = 0.0;
            let last = grid.n() - 1;
            values[last] = 0.0;
        }
        Ok(Self { grid, values })
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn divergence(&self) -> ScalarField {
        ScalarField::from_raw(self.grid, divergence_values(&self.grid, &self.values))
    }
}

pub fn gradient(f: &ScalarField) -> VectorField {
    f.gradient()
}

pub fn laplacian(f: &ScalarField) -> ScalarField {
    f.laplacian()
}

pub fn divergence(v: &VectorField) -> ScalarField {
    v.divergence()
}

pub fn integrate(f: &ScalarField) -> f64 {
    f.integrate()
}

/// Central differences; mirror ghosts give zero at no-flux walls.
pub(crate) fn gradient_values(grid: &Grid, f: &[f64]) -> Vec<f64> {
    let n = grid.n();
    let inv = 0.5 / grid.spacing();
    let mut out = vec![0.0; n];
    for i in 1..n - 1 {
        out[i] = (f[i + 1] - f[i - 1]) * inv;
    }
    if grid.is_periodic() {
        out[0] = (f[1] - f[n - 1]) * inv;
        out[n - 1] = (f[0] - f[n - 2]) * inv;
    }
    out
}

/// Three-point Laplacian.
pub(crate) fn laplacian_values(grid: &Grid, f: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; grid.n()];
    laplacian_into(grid, f, &mut out);
    out
}

pub(crate) fn laplacian_into(grid: &Grid, f: &[f64], out: &mut [f64]) {
    let n = grid.n();
    let inv = 1.0 / (grid.spacing() * grid.spacing());
    for i in 1..n - 1 {
        out[i] = (f[i + 1] - 2.0 * f[i] + f[i - 1]) * inv;
    }
    if grid.is_periodic() {
        out[0] = (f[1] - 2.0 * f[0] + f[n - 1]) * inv;
        out[n - 1] = (f[0] - 2.0 * f[n - 1] + f[n - 2]) * inv;
    } else {
        out[0] = 2.0 * (f[1] - f[0]) * inv;
        out[n - 1] = 2.0 * (f[n - 2] - f[n - 1]) * inv;
    }
}

/// Central differences, the negative adjoint of [`gradient_values`] under the
/// rectangle rule on periodic meshes. No-flux walls use odd mirror ghosts.
pub(crate) fn divergence_values(grid: &Grid, v: &[f64]) -> Vec<f64> {
    let n = grid.n();
    let inv = 0.5 / grid.spacing();
    let mut out = vec![0.0; n];
    for i in 1..n - 1 {
        out[i] = (v[i + 1] - v[i - 1]) * inv;
    }
    if grid.is_periodic() {
        out[0] = (v[1] - v[n - 1]) * inv;
        out[n - 1] = (v[0] - v[n - 2]) * inv;
    } else {
        out[0] = 2.0 * v[1] * inv;
        out[n - 1] = -2.0 * v[n - 2] * inv;
    }
    out
}

/// Divergence of interface fluxes `flux[i]` living at `x_{i+1/2}`, scaled by
/// the quadrature weight so that `sum_i w_i * out_i == 0` exactly.
pub(crate) fn flux_divergence_into(grid: &Grid, flux: &[f64], out: &mut [f64]) {
    let n = grid.n();
    out.iter_mut().for_each(|o| *o = 0.0);
    for (i, &f) in flux.iter().enumerate().take(grid.interfaces()) {
        out[i] += f;
        out[grid.right(i)] -= f;
    }
    for (i, o) in out.iter_mut().enumerate() {
        *o /= grid.weight(i);
    }
    debug_assert_eq!(out.len(), n);
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
        a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
    }

    #[test]
    fn spacing_follows_boundary_policy() {
        let g = Grid::new(256, 25.6, Boundary::Periodic).unwrap();
        assert!((g.spacing() - 0.1).abs() < 1e-15);
        let g = Grid::new(9, 8.0, Boundary::NoFlux).unwrap();
        assert_eq!(g.spacing(), 1.0);
        assert_eq!(g.x(8), 8.0);
    }

    #[test]
    fn rejects_small_or_degenerate_grids() {
        assert!(Grid::new(4, 1.0, Boundary::Periodic).is_err());
        assert!(Grid::new(16, 0.0, Boundary::Periodic).is_err());
        assert!(Grid::new(16, -2.0, Boundary::NoFlux).is_err());
        assert!(Grid::new(16, f64::NAN, Boundary::NoFlux).is_err());
    }

    #[test]
    fn scalar_field_rejects_bad_values() {
        let g = Grid::new(8, 1.0, Boundary::Periodic).unwrap();
        assert!(ScalarField::new(g, vec![0.0; 7]).is_err());
        let mut v = vec![0.0; 8];
        v[3] = f64::INFINITY;
        assert!(matches!(
            ScalarField::new(g, v),
            Err(Error::NonFinite { index: 3, .. })
        ));
    }

    #[test]
    fn constant_has_zero_derivatives() {
        for b in [Boundary::Periodic, Boundary::NoFlux] {
            let g = Grid::new(32, 3.0, b).unwrap();
            let f = ScalarField::constant(g, 2.5);
            assert!(f.gradient().values().iter().all(|&v| v == 0.0));
            assert!(f.laplacian().values().iter().all(|&v| v.abs() < 1e-12));
            assert!((f.integrate() - 7.5).abs() < 1e-12);
        }
    }

    #[test]
    fn linear_gradient_interior_is_one() {
        let g = Grid::new(17, 4.0, Boundary::NoFlux).unwrap();
        let f = ScalarField::from_fn(g, |x| x).unwrap();
        let grad = f.gradient();
        for &v in &grad.values()[1..16] {
            assert!((v - 1.0).abs() < 1e-12);
        }
        assert_eq!(grad.values()[0], 0.0);
        assert_eq!(grad.values()[16], 0.0);
    }

    #[test]
    fn quadratic_laplacian_is_two() {
        for b in [Boundary::Periodic, Boundary::NoFlux] {
            let g = Grid::new(33, 2.0, b).unwrap();
            let f = ScalarField::from_fn(g, |x| x * x).unwrap();
            let lap = f.laplacian();
            for &v in &lap.values()[1..32] {
                assert!((v - 2.0).abs() < 1e-9);
            }
        }
    }

    fn sine_errors(n: usize) -> (f64, f64) {
        let l = 3.0;
        let k = 2.0 * PI / l;
        let g = Grid::new(n, l, Boundary::Periodic).unwrap();
        let f = ScalarField::from_fn(g, |x| (k * x).sin()).unwrap();
        let dx: Vec<f64> = g.coords().iter().map(|x| k * (k * x).cos()).collect();
        let d2: Vec<f64> = g.coords().iter().map(|x| -k * k * (k * x).sin()).collect();
        (
            max_abs_diff(f.gradient().values(), &dx),
            max_abs_diff(f.laplacian().values(), &d2),
        )
    }

    #[test]
    fn stencils_converge_at_second_order() {
        let (g1, l1) = sine_errors(64);
        let (g2, l2) = sine_errors(128);
        assert!(g1 < 1e-2 && l1 < 1e-1);
        let rg = g1 / g2;
        let rl = l1 / l2;
        assert!((3.8..4.2).contains(&rg), "gradient ratio {rg}");
        assert!((3.8..4.2).contains(&rl), "laplacian ratio {rl}");
    }

    #[test]
    fn div_grad_matches_laplacian() {
        let l = 5.0;
        let g = Grid::new(256, l, Boundary::Periodic).unwrap();
        let f = ScalarField::from_fn(g, |x| (2.0 * PI * x / l).cos() + 0.3 * (4.0 * PI * x / l).sin()).unwrap();
        let a = f.gradient().divergence();
        let b = f.laplacian();
        assert!(max_abs_diff(a.values(), b.values()) < 5e-3);
    }

    #[test]
    fn divergence_integrates_to_zero() {
        let g = Grid::new(64, 2.0, Boundary::Periodic).unwrap();
        let v = VectorField::new(g, g.coords().iter().map(|x| (x * 7.1).sin() + x).collect()).unwrap();
        assert!(v.divergence().integrate().abs() < 1e-12);
        let zero = VectorField::new(g, vec![0.0; 64]).unwrap();
        assert!(zero.divergence().values().iter().all(|&d| d == 0.0));
    }

    #[test]
    fn integration_rules() {
        let g = Grid::new(128, 10.0, Boundary::Periodic).unwrap();
        let s = ScalarField::from_fn(g, |x| (2.0 * PI * x / 10.0).sin()).unwrap();
        assert!(s.integrate().abs() < 1e-13);
        let wide = Grid::new(256, 20.0, Boundary::Periodic).unwrap();
        let gauss = ScalarField::from_fn(wide, |x| {
            (-(x - 10.0) * (x - 10.0) / 2.0).exp() / (2.0 * PI).sqrt()
        })
        .unwrap();
        assert!((gauss.integrate() - 1.0).abs() < 1e-8);
        let g = Grid::new(101, 10.0, Boundary::NoFlux).unwrap();
        assert!((ScalarField::constant(g, 3.0).integrate() - 30.0).abs() < 1e-12);
    }

    #[test]
    fn no_flux_vector_field_vanishes_at_walls() {
        let g = Grid::new(8, 1.0, Boundary::NoFlux).unwrap();
        let v = VectorField::new(g, vec![1.0; 8]).unwrap();
        assert_eq!(v.values()[0], 0.0);
        assert_eq!(v.values()[7], 0.0);
    }

    #[test]
    fn flux_divergence_is_conservative() {
        for b in [Boundary::Periodic, Boundary::NoFlux] {
            let g = Grid::new(20, 2.0, b).unwrap();
            let flux: Vec<f64> = (0..20).map(|i| (i as f64 * 0.37).sin()).collect();
            let mut out = vec![0.0; 20];
            flux_divergence_into(&g, &flux, &mut out);
            let total: f64 = (0..20).map(|i| g.weight(i) * out[i]).sum();
            assert!(total.abs() < 1e-14);
        }
    }

    #[test]
    fn displacement_uses_minimum_image() {
        let g = Grid::new(10, 10.0, Boundary::Periodic).unwrap();
        assert!((g.displacement(1.0, 9.0) + 2.0).abs() < 1e-12);
        let g = Grid::new(11, 10.0, Boundary::NoFlux).unwrap();
        assert_eq!(g.displacement(1.0, 9.0), 8.0);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn summation_by_parts(coeffs in proptest::collection::vec(-1.0f64..1.0, 6)) {
                let l = 4.0;
                let g = Grid::new(64, l, Boundary::Periodic).unwrap();
                let k = 2.0 * PI / l;
                let f = ScalarField::from_fn(g, |x| coeffs[0] * (k * x).sin() + coeffs[1] * (2.0 * k * x).cos() + coeffs[2]).unwrap();
                let v = VectorField::new(g, g.coords().iter().map(|x| coeffs[3] * (3.0 * k * x).sin() + coeffs[4] * (k * x).cos() + coeffs[5]).collect()).unwrap();
                let div = v.divergence();
                let grad = f.gradient();
                let a: f64 = (0..64).map(|i| f.values()[i] * div.values()[i]).sum::<f64>() * g.spacing();
                let b: f64 = (0..64).map(|i| grad.values()[i] * v.values()[i]).sum::<f64>() * g.spacing();
                prop_assert!((a + b).abs() < 1e-12);
            }
        }
    }
}
