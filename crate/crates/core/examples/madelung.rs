//! Madelung split of a damped orbital: continuity and force-balance
//! residuals, and how the inertial terms fade relative to friction as `b`
//! grows.

use ddft::dks::{dks_step, madelung_split, DksOptions, Orbital, OrbitalSet};
use ddft::functionals::{DensityField, FreeEnergyModel, ModelParams};
use ddft::grid::{Boundary, Grid, ScalarField};

fn main() -> ddft::Result<()> {
    let grid = Grid::new(256, 20.0, Boundary::Periodic)?;
    let trap = ScalarField::from_fn(grid, |x| 0.5 * (x - 10.0).powi(2))?;
    let options = DksOptions::default();
    println!("{:>6} {:>12} {:>12} {:>14}", "b", "|continuity|", "|force|", "inertia/fric");
    for b in [1.0, 10.0, 100.0] {
        let p = ModelParams::dilute(1.0, b);
        let start = ScalarField::from_fn(grid, |x| (-(x - 11.0).powi(2)).exp() / std::f64::consts::PI.sqrt())?;
        let rho = DensityField::clamped(start, &p);
        let mut set = OrbitalSet::new(p, vec![Orbital::from_density(&rho, 1.0)?])?;
        // Let the flow develop before sampling three consecutive states.
        set = dks_step(&set, &trap, 0.05 * b, options)?;
        let dt = 1e-3;
        let mid = dks_step(&set, &trap, dt, options)?;
        let next = dks_step(&mid, &trap, dt, options)?;
        let model = FreeEnergyModel::new(p, &trap)?;
        let r = madelung_split(
            [&set.orbitals()[0], &mid.orbitals()[0], &next.orbitals()[0]],
            dt,
            &model,
            &options,
        )?;
        let weighted = |f: &ScalarField| {
            let v: Vec<f64> = f.values().iter().zip(r.fields.rho.values()).map(|(a, w)| (a * w).abs()).collect();
            grid.integrate(&v)
        };
        println!(
            "{b:>6} {:>12.3e} {:>12.3e} {:>14.3e}",
            weighted(&r.continuity),
            weighted(&r.force),
            r.inertial_ratio
        );
    }
    Ok(())
}
