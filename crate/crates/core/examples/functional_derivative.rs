//! Each term of the free energy against its chemical potential: the
//! analytic `∫μg` versus a Richardson-extrapolated difference quotient of
//! `F` along a smooth zero-mean direction `g`.

use std::f64::consts::PI;

use ddft::functionals::{DensityField, FreeEnergyModel, ModelParams, Toggles};
use ddft::grid::{Boundary, Grid, ScalarField};
use ddft::oracles::functional_derivative_fd;

fn main() -> ddft::Result<()> {
    let l = 10.0;
    let k = 2.0 * PI / l;
    let grid = Grid::new(256, l, Boundary::Periodic)?;
    let g: Vec<f64> = grid
        .coords()
        .iter()
        .map(|&x| 0.3 * (k * x).cos() - 0.2 * (3.0 * k * x).sin())
        .collect();
    let u = ScalarField::from_fn(grid, |x| 0.2 * (k * x).cos())?;
    let only = |f: fn(&mut Toggles)| {
        let mut t = Toggles::none();
        f(&mut t);
        t
    };
    let cases: [(&str, Toggles); 6] = [
        ("Thomas-Fermi", only(|t| t.tf = true)),
        ("Weizsacker", only(|t| t.weizsacker = true)),
        ("Hartree", only(|t| t.hartree = true)),
        ("exchange", only(|t| t.dirac = true)),
        ("entropy", only(|t| t.entropy = true)),
        ("all", Toggles::all()),
    ];
    println!("{:<14} {:>16} {:>16} {:>10}", "term", "int mu g", "dF/deta", "rel.err");
    for (name, toggles) in cases {
        let p = ModelParams {
            temperature: 0.5,
            rho_bar: 3.0,
            toggles,
            ..ModelParams::default()
        };
        let rho = DensityField::new(
            ScalarField::from_fn(grid, |x| 1.0 + 0.3 * (k * x).sin() + 0.15 * (2.0 * k * x).cos())?,
            &p,
        )?;
        let model = FreeEnergyModel::new(p, &u)?;
        let mu = model.chemical_potential_values(rho.values());
        let analytic = grid.integrate(&mu.iter().zip(&g).map(|(m, g)| m * g).collect::<Vec<_>>());
        let numeric = functional_derivative_fd(
            |r| model.breakdown_values(r).total,
            rho.values(),
            &g,
            1e-3,
            p.density_ceiling(),
        )?;
        println!(
            "{name:<14} {analytic:>16.10} {numeric:>16.10} {:>10.2e}",
            ((analytic - numeric) / analytic).abs()
        );
    }
    Ok(())
}
