//! Strong-friction limit: the damped Kohn-Sham density of a single electron
//! in a harmonic trap against the thermo-quantum diffusion equation, at
//! matched rescaled times `t = b τ`.

use ddft::diffusion::{DiffusionState, StepperOptions};
use ddft::dks::{compare_with_diffusion, DksOptions, DksState, Orbital, OrbitalSet};
use ddft::functionals::{DensityField, FreeEnergyModel, ModelParams};
use ddft::grid::{Boundary, Grid, ScalarField};

fn main() -> ddft::Result<()> {
    let args: Vec<String> = std::env::args().collect();
    let n: usize = args.get(1).map_or(256, |s| s.parse().unwrap());
    let length: f64 = args.get(2).map_or(20.0, |s| s.parse().unwrap());
    let (center, kt, sigma0_sq) = (length / 2.0, 1.0, 0.5);
    let grid = Grid::new(n, length, Boundary::Periodic)?;
    let trap = ScalarField::from_fn(grid, |x| 0.5 * (x - center).powi(2))?;
    let taus = [0.1, 0.25, 0.5, 1.0];
    println!("{:>6} {}", "b", taus.map(|t| format!("{:>10}", format!("tau={t}"))).join(""));
    for b in [10.0, 30.0, 100.0] {
        let p = ModelParams::dilute(kt, b);
        let start = ScalarField::from_fn(grid, |x| {
            (-(x - center).powi(2) / (2.0 * sigma0_sq)).exp() / (2.0 * std::f64::consts::PI * sigma0_sq).sqrt()
        })?;
        let rho0 = DensityField::clamped(start, &p);
        let set = OrbitalSet::new(p, vec![Orbital::from_density(&rho0, 1.0)?])?;
        let mut dks = DksState::new(set, &trap, DksOptions::default())?;
        let mut diffusion = DiffusionState::new(FreeEnergyModel::new(p, &trap)?, rho0, StepperOptions::default())?;
        let times: Vec<f64> = taus.iter().map(|t| b * t).collect();
        let points = compare_with_diffusion(&mut dks, &mut diffusion, &times)?;
        println!("{b:>6} {}", points.iter().map(|c| format!("{:>10.2e}", c.l1)).collect::<String>());
    }
    Ok(())
}
