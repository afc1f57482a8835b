//! Relaxation of a dilute density in a harmonic trap to its stationary
//! Gaussian, at zero and finite temperature.

use ddft::diffusion::{steady_state, DiffusionState, SteadyStateOptions, StepperOptions};
use ddft::functionals::{DensityField, FreeEnergyModel, ModelParams};
use ddft::grid::{Boundary, Grid, ScalarField};
use ddft::oracles::{harmonic_stationary_variance, measure_variance};

fn main() -> ddft::Result<()> {
    let omega = 1.0;
    // About seven stationary widths each side: wider domains leave tails
    // too thin for the explicit stepper to flatten mu in reasonable time.
    for (kt, length) in [(0.0, 10.0), (1.0, 14.0)] {
        let center = length / 2.0;
        let grid = Grid::new(112, length, Boundary::NoFlux)?;
        let trap = ScalarField::from_fn(grid, |x| 0.5 * omega * omega * (x - center).powi(2))?;
        let p = ModelParams::dilute(kt, 1.0);
        // Start away from equilibrium: wider than the answer and off-center.
        let start = ScalarField::from_fn(grid, |x| (-(x - center - 0.5).powi(2) / 4.0).exp())?;
        let mass = start.integrate();
        let start = ScalarField::new(grid, start.values().iter().map(|v| v / mass).collect())?;
        let model = FreeEnergyModel::new(p, &trap)?;
        let mut state = DiffusionState::new(model, DensityField::clamped(start, &p), StepperOptions::default())?;
        let t0 = std::time::Instant::now();
        let report = steady_state(&mut state, &SteadyStateOptions::default())?;
        let var = measure_variance(&state.density())?;
        let expected = harmonic_stationary_variance(kt, omega, &p)?;
        println!(
            "kT = {kt}: sigma2 = {var:.6} (expected {expected:.6}, rel.err {:.2e}), mu spread {:.2e}, {} steps, t = {:.1}, {:.2?}",
            var / expected - 1.0,
            report.mu_spread,
            report.steps,
            report.t,
            t0.elapsed()
        );
    }
    Ok(())
}
