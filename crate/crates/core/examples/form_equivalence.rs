//! The two forms of the density evolution (divergence of `ρ∇μ` versus the
//! effective diffusion tensor plus Bohm and potential drift) agree up to
//! the stencil error, which falls at second order.

use std::f64::consts::PI;

use ddft::diffusion::{rhs_effective_form, rhs_mu_form};
use ddft::functionals::{DensityField, ModelParams};
use ddft::grid::{Boundary, Grid, ScalarField};

fn main() -> ddft::Result<()> {
    let l = 10.0;
    let k = 2.0 * PI / l;
    let p = ModelParams {
        temperature: 0.5,
        rho_bar: 3.0,
        ..ModelParams::default()
    };
    let mut last: Option<f64> = None;
    println!("{:>6} {:>12} {:>8}", "n", "rel. L2", "ratio");
    for n in [64, 128, 256, 512, 1024] {
        let grid = Grid::new(n, l, Boundary::Periodic)?;
        let rho = DensityField::new(
            ScalarField::from_fn(grid, |x| 1.0 + 0.3 * (k * x).sin() + 0.15 * (2.0 * k * x).cos())?,
            &p,
        )?;
        let u = ScalarField::from_fn(grid, |x| 0.2 * (k * x).cos())?;
        let a = rhs_mu_form(&rho, &u, &p)?;
        let b = rhs_effective_form(&rho, &u, &p)?;
        let num: f64 = a.values().iter().zip(b.values()).map(|(x, y)| (x - y).powi(2)).sum();
        let den: f64 = a.values().iter().map(|x| x * x).sum();
        let err = (num / den).sqrt();
        let ratio = last.map_or(String::new(), |e| format!("{:.3}", e / err));
        println!("{n:>6} {err:>12.3e} {ratio:>8}");
        last = Some(err);
    }
    Ok(())
}
