//! Spreading of a free Gaussian packet in the dilute regime, compared with
//! the thermo-quantum dispersion law and its zero-temperature and classical
//! limits.

use ddft::diffusion::{evolve, DiffusionState, StepperOptions};
use ddft::functionals::{DensityField, FreeEnergyModel, ModelParams};
use ddft::grid::{Boundary, Grid, ScalarField};
use ddft::oracles::{dispersion_sigma2, zero_temperature_sigma2_from, DispersionParams};

fn gaussian(grid: Grid, center: f64, var: f64, p: &ModelParams) -> DensityField {
    let norm = (2.0 * std::f64::consts::PI * var).sqrt();
    let f = ScalarField::from_fn(grid, |x| (-(x - center).powi(2) / (2.0 * var)).exp() / norm).unwrap();
    DensityField::clamped(f, p)
}

fn run(label: &str, kt: f64, b: f64) -> ddft::Result<()> {
    let sigma0_sq = 0.1;
    let grid = Grid::new(512, 80.0, Boundary::Periodic)?;
    let p = ModelParams::dilute(kt, b);
    let model = FreeEnergyModel::new(p, &ScalarField::zeros(grid))?;
    let mut state = DiffusionState::new(model, gaussian(grid, 40.0, sigma0_sq, &p), StepperOptions::default())?;
    let start = std::time::Instant::now();
    let traj = evolve(&mut state, 2.0, 0.1)?;
    println!("{label}: kT = {kt}, b = {b}, {} steps in {:.2?}", state.accepted_steps(), start.elapsed());
    println!("{:>6} {:>14} {:>14} {:>10}", "t", "sigma2", "oracle", "rel.err");
    for obs in traj.observations.iter().filter(|o| o.t >= 0.1 - 1e-12) {
        let oracle = if kt > 0.0 {
            dispersion_sigma2(obs.t, &DispersionParams::from_model(&p, sigma0_sq)?)
        } else {
            zero_temperature_sigma2_from(obs.t, sigma0_sq, &p)
        };
        println!("{:>6.2} {:>14.6} {:>14.6} {:>10.2e}", obs.t, obs.sigma2, oracle, obs.sigma2 / oracle - 1.0);
    }
    Ok(())
}

fn main() -> ddft::Result<()> {
    run("thermo-quantum", 0.25, 0.25)?;
    run("zero temperature", 0.0, 0.25)?;
    run("classical", 5000.0, 5000.0)?;
    Ok(())
}
