//! Hartree potential and energy with a soft-core 1D Coulomb kernel
//! `e² / sqrt(x² + a²)`.
//!
//! The direct O(n²) sum is the reference. Periodic meshes additionally get a
//! circular-convolution fast path through the FFT; both use minimum-image
//! distances so they evaluate the same circulant operator.

use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};
use crate::grid::{Boundary, Grid, ScalarField};

/// Default softening, in grid spacings.
pub const DEFAULT_SOFTENING_CELLS: f64 = 5.0;

#[derive(Clone)]
struct Spectral {
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
    kernel_hat: Vec<Complex64>,
}

#[derive(Clone)]
pub struct CoulombKernel {
    grid: Grid,
    e2: f64,
    softening: f64,
    neutralize: bool,
    /// `samples[d]` is the kernel at index offset `d` (minimum image when
    /// periodic).
    samples: Vec<f64>,
    spectral: Option<Spectral>,
}

impl fmt::Debug for CoulombKernel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CoulombKernel")
            .field("grid", &self.grid)
            .field("e2", &self.e2)
            .field("softening", &self.softening)
            .field("neutralize", &self.neutralize)
            .field("fast_path", &self.spectral.is_some())
            .finish()
    }
}

impl CoulombKernel {
    pub fn new(grid: Grid, e2: f64, softening: f64, neutralize: bool) -> Result<Self> {
        if !(softening.is_finite() && softening > 0.0) {
            return Err(Error::param("coulomb_softening", format!("must be > 0, got {softening}")));
        }
        if !(e2.is_finite() && e2 >= 0.0) {
            return Err(Error::param("e2", format!("must be >= 0, got {e2}")));
        }
        let n = grid.n();
        let h = grid.spacing();
        let samples: Vec<f64> = (0..n)
            .map(|d| {
                let steps = match grid.boundary() {
                    Boundary::Periodic => d.min(n - d),
                    Boundary::NoFlux => d,
                };
                let x = steps as f64 * h;
                e2 / (x * x + softening * softening).sqrt()
            })
            .collect();

        let spectral = grid.is_periodic().then(|| {
            let mut planner = FftPlanner::new();
            let forward = planner.plan_fft_forward(n);
            let inverse = planner.plan_fft_inverse(n);
            let mut kernel_hat: Vec<Complex64> =
                samples.iter().map(|&k| Complex64::new(k, 0.0)).collect();
            forward.process(&mut kernel_hat);
            Spectral {
                forward,
                inverse,
                kernel_hat,
            }
        });

        Ok(Self {
            grid,
            e2,
            softening,
            neutralize,
            samples,
            spectral,
        })
    }

    pub fn with_default_softening(grid: Grid, e2: f64, neutralize: bool) -> Result<Self> {
        Self::new(grid, e2, DEFAULT_SOFTENING_CELLS * grid.spacing(), neutralize)
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn softening(&self) -> f64 {
        self.softening
    }

    pub fn neutralizes(&self) -> bool {
        self.neutralize
    }

    /// Kernel between points `i` and `j`.
    #[inline]
    pub fn between(&self, i: usize, j: usize) -> f64 {
        self.samples[i.abs_diff(j)]
    }

    /// Uniform background density removed before convolution.
    pub fn background(&self, rho: &[f64]) -> f64 {
        if self.neutralize {
            self.grid.integrate(rho) / self.grid.length()
        } else {
            0.0
        }
    }

    fn net_charge(&self, rho: &[f64]) -> Vec<f64> {
        let bg = self.background(rho);
        rho.iter().map(|r| r - bg).collect()
    }

    /// Reference O(n²) evaluation of `v(x_i) = sum_j w_j k(x_i - x_j) (rho_j - rho_bg)`.
    pub fn potential_direct(&self, rho: &[f64]) -> Vec<f64> {
        let q = self.net_charge(rho);
        let n = self.grid.n();
        (0..n)
            .map(|i| {
                (0..n)
                    .map(|j| self.grid.weight(j) * self.between(i, j) * q[j])
                    .sum()
            })
            .collect()
    }

    /// Fast path where available, otherwise the direct sum.
    pub fn potential(&self, rho: &[f64]) -> Vec<f64> {
        let Some(sp) = &self.spectral else {
            return self.potential_direct(rho);
        };
        if self.e2 == 0.0 {
            return vec![0.0; self.grid.n()];
        }
        let n = self.grid.n();
        let h = self.grid.spacing();
        let mut buf: Vec<Complex64> = self
            .net_charge(rho)
            .into_iter()
            .map(|q| Complex64::new(q, 0.0))
            .collect();
        sp.forward.process(&mut buf);
        for (b, k) in buf.iter_mut().zip(&sp.kernel_hat) {
            *b *= k;
        }
        sp.inverse.process(&mut buf);
        let scale = h / n as f64;
        buf.into_iter().map(|c| c.re * scale).collect()
    }

    /// `½ ∫ (rho - rho_bg) v_H dr`.
    pub fn energy(&self, rho: &[f64]) -> f64 {
        let v = self.potential(rho);
        self.energy_with(rho, &v)
    }

    pub(crate) fn energy_with(&self, rho: &[f64], v: &[f64]) -> f64 {
        let bg = self.background(rho);
        let integrand: Vec<f64> = rho.iter().zip(v).map(|(r, v)| (r - bg) * v).collect();
        0.5 * self.grid.integrate(&integrand)
    }

    /// Brute-force double sum `½ sum_ij w_i w_j q_i k_ij q_j`, independent of
    /// both potential paths.
    pub fn energy_double_sum(&self, rho: &[f64]) -> f64 {
        let q = self.net_charge(rho);
        let n = self.grid.n();
        let mut total = 0.0;
        for i in 0..n {
            let wi = self.grid.weight(i) * q[i];
            for j in 0..n {
                total += wi * self.grid.weight(j) * q[j] * self.between(i, j);
            }
        }
        0.5 * total
    }

    fn check(&self, rho: &ScalarField) -> Result<()> {
        if *rho.grid() != self.grid {
            return Err(Error::GridMismatch);
        }
        Ok(())
    }
}

pub fn hartree_potential(rho: &ScalarField, kernel: &CoulombKernel) -> Result<ScalarField> {
    kernel.check(rho)?;
    ScalarField::new(kernel.grid, kernel.potential(rho.values()))
}

pub fn hartree_energy(rho: &ScalarField, kernel: &CoulombKernel) -> Result<f64> {
    kernel.check(rho)?;
    Ok(kernel.energy(rho.values()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    fn periodic(n: usize, l: f64) -> Grid {
        Grid::new(n, l, Boundary::Periodic).unwrap()
    }

    fn smooth_density(grid: Grid, seed: u64) -> ScalarField {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let l = grid.length();
        let c: Vec<f64> = (0..6).map(|_| rng.gen_range(-0.2..0.2)).collect();
        ScalarField::from_fn(grid, |x| {
            let k = 2.0 * PI / l;
            1.0 + c[0] * (k * x).sin()
                + c[1] * (k * x).cos()
                + c[2] * (2.0 * k * x).sin()
                + c[3] * (3.0 * k * x).cos()
                + c[4] * (5.0 * k * x).sin()
                + c[5] * (-(x - 0.4 * l).powi(2)).exp()
        })
        .unwrap()
    }

    #[test]
    fn uniform_density_with_background_has_no_potential() {
        let g = periodic(128, 10.0);
        let k = CoulombKernel::with_default_softening(g, 1.0, true).unwrap();
        let rho = ScalarField::constant(g, 0.7);
        let v = hartree_potential(&rho, &k).unwrap();
        assert!(v.values().iter().all(|x| x.abs() <= 1e-12));
        assert!(hartree_energy(&rho, &k).unwrap().abs() <= 1e-12);
    }

    #[test]
    fn zero_coupling_gives_zero() {
        let g = periodic(64, 10.0);
        let k = CoulombKernel::with_default_softening(g, 0.0, false).unwrap();
        let rho = smooth_density(g, 3);
        assert!(k.potential(rho.values()).iter().all(|&v| v == 0.0));
        assert!(k.potential_direct(rho.values()).iter().all(|&v| v == 0.0));
    }

    #[test]
    fn point_charge_far_field_is_coulombic() {
        let g = periodic(512, 200.0);
        let h = g.spacing();
        let k = CoulombKernel::new(g, 1.0, 2.0 * h, false).unwrap();
        let mut rho = vec![0.0; 512];
        rho[0] = 1.0 / h;
        let v = k.potential(&rho);
        for i in [64usize, 100, 150, 200] {
            let x = g.x(i);
            let rel = (v[i] - 1.0 / x).abs() * x;
            assert!(rel < 0.01, "x = {x}: rel {rel}");
        }
    }

    #[test]
    fn fast_path_matches_direct_sum() {
        for n in [64usize, 256, 512] {
            let g = periodic(n, 12.0);
            let k = CoulombKernel::with_default_softening(g, 1.0, true).unwrap();
            let rho = smooth_density(g, n as u64);
            let fast = k.potential(rho.values());
            let slow = k.potential_direct(rho.values());
            let scale = slow.iter().map(|v| v.abs()).fold(0.0, f64::max);
            for (a, b) in fast.iter().zip(&slow) {
                assert!((a - b).abs() <= 1e-12 * scale);
            }
            let e = k.energy(rho.values());
            let e_ref = k.energy_double_sum(rho.values());
            assert!(((e - e_ref) / e_ref).abs() <= 1e-10, "n = {n}");
        }
    }

    #[test]
    fn no_flux_energy_matches_double_sum() {
        let g = Grid::new(101, 10.0, Boundary::NoFlux).unwrap();
        let k = CoulombKernel::with_default_softening(g, 1.0, false).unwrap();
        let rho = ScalarField::from_fn(g, |x| (-(x - 5.0).powi(2)).exp()).unwrap();
        let e = k.energy(rho.values());
        let e_ref = k.energy_double_sum(rho.values());
        assert!(((e - e_ref) / e_ref).abs() <= 1e-12);
        assert!(e > 0.0);
    }

    #[test]
    fn grid_mismatch_is_rejected() {
        let k = CoulombKernel::with_default_softening(periodic(64, 10.0), 1.0, true).unwrap();
        let rho = ScalarField::constant(periodic(64, 11.0), 1.0);
        assert!(matches!(hartree_potential(&rho, &k), Err(Error::GridMismatch)));
        assert!(matches!(hartree_energy(&rho, &k), Err(Error::GridMismatch)));
    }

    #[test]
    fn bilinear_form_is_symmetric() {
        let g = periodic(200, 9.0);
        let k = CoulombKernel::with_default_softening(g, 1.3, true).unwrap();
        let r1 = smooth_density(g, 11);
        let r2 = smooth_density(g, 12);
        let v1 = k.potential(r1.values());
        let v2 = k.potential(r2.values());
        let bg1 = k.background(r1.values());
        let bg2 = k.background(r2.values());
        let a: f64 = (0..200).map(|i| (r1.values()[i] - bg1) * v2[i]).sum();
        let b: f64 = (0..200).map(|i| (r2.values()[i] - bg2) * v1[i]).sum();
        assert!((a - b).abs() <= 1e-12 * a.abs().max(1.0));
    }

    #[test]
    fn potential_is_linear() {
        let g = periodic(128, 8.0);
        let k = CoulombKernel::with_default_softening(g, 1.0, true).unwrap();
        let r1 = smooth_density(g, 1);
        let r2 = smooth_density(g, 2);
        let sum: Vec<f64> = r1.values().iter().zip(r2.values()).map(|(a, b)| 2.0 * a - 0.5 * b).collect();
        let lhs = k.potential(&sum);
        let v1 = k.potential(r1.values());
        let v2 = k.potential(r2.values());
        for i in 0..128 {
            assert!((lhs[i] - (2.0 * v1[i] - 0.5 * v2[i])).abs() < 1e-12);
        }
    }

    #[test]
    fn neutralized_energy_is_nonnegative_for_smooth_densities() {
        let g = periodic(256, 10.0);
        let k = CoulombKernel::with_default_softening(g, 1.0, true).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        for s in 0..20 {
            let rho = smooth_density(g, rng.gen::<u64>() ^ s);
            assert!(k.energy_double_sum(rho.values()) >= 0.0);
            assert!(k.energy(rho.values()) >= 0.0);
        }
    }
}
