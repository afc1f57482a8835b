//! Damped Kohn-Sham propagation of a single free packet: the undamped
//! spreading law, then the same packet launched with momentum under
//! increasing friction.

use std::f64::consts::PI;

use ddft::dks::{dks_evolve, DksOptions, DksState, Orbital, OrbitalSet};
use ddft::functionals::{ModelParams, Toggles};
use ddft::grid::{Boundary, Grid, ScalarField};
use num_complex::Complex64;

fn packet(grid: Grid, center: f64, var: f64, k0: f64) -> ddft::Result<Orbital> {
    let norm = (2.0 * PI * var).powf(-0.25);
    Orbital::from_fn(grid, 1.0, |x| {
        Complex64::from_polar(norm * (-(x - center).powi(2) / (4.0 * var)).exp(), k0 * x)
    })
}

fn free(friction: f64) -> ModelParams {
    ModelParams {
        friction,
        toggles: Toggles::none(),
        ..ModelParams::default()
    }
}

fn main() -> ddft::Result<()> {
    let grid = Grid::new(512, 60.0, Boundary::Periodic)?;
    let zero = ScalarField::zeros(grid);
    let set = OrbitalSet::new(free(0.0), vec![packet(grid, 30.0, 1.0, 0.0)?])?;
    let mut s = DksState::new(set, &zero, DksOptions::default())?;
    println!("undamped: sigma2(t) against 1 + (t/2)^2");
    for o in dks_evolve(&mut s, 4.0, 1.0)?.observations {
        println!("  t = {:.1}: {:.8} vs {:.8}, norm {:.14}", o.t, o.sigma2, 1.0 + (o.t / 2.0).powi(2), o.norms[0]);
    }

    println!("moving packet, k0 = 2: energy at t = 0, 1, 2, 4");
    for b in [0.0, 0.2, 1.0, 5.0] {
        let set = OrbitalSet::new(free(b), vec![packet(grid, 30.0, 1.0, 2.0)?])?;
        let mut s = DksState::new(set, &zero, DksOptions::default())?;
        let energies: Vec<String> = [0.0, 1.0, 2.0, 4.0]
            .iter()
            .map(|&t| {
                s.advance_to(t)?;
                Ok(format!("{:.6}", s.energy().total))
            })
            .collect::<ddft::Result<_>>()?;
        println!("  b = {b:>3}: {}", energies.join("  "));
    }
    Ok(())
}
