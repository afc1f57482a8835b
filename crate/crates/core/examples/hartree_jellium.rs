//! Soft-core Hartree potential: FFT convolution against the direct double
//! sum, the neutralized uniform gas, and the Coulomb tail of a point charge.

use std::time::Instant;

use ddft::grid::{Boundary, Grid};
use ddft::hartree::CoulombKernel;

fn main() -> ddft::Result<()> {
    println!("{:>6} {:>14} {:>10} {:>10} {:>10}", "n", "E_H", "rel.diff", "fast", "direct");
    for n in [128, 256, 512, 1024] {
        let grid = Grid::new(n, 12.0, Boundary::Periodic)?;
        let k = CoulombKernel::with_default_softening(grid, 1.0, true)?;
        let rho: Vec<f64> = grid
            .coords()
            .iter()
            .map(|x| 0.3 + (-(x - 4.0).powi(2)).exp() + 0.5 * (-(x - 8.0).powi(2) / 3.0).exp())
            .collect();
        let t0 = Instant::now();
        let fast = k.energy(&rho);
        let t_fast = t0.elapsed();
        let t0 = Instant::now();
        let direct = k.energy_double_sum(&rho);
        let t_direct = t0.elapsed();
        println!(
            "{n:>6} {fast:>14.10} {:>10.1e} {t_fast:>10.1?} {t_direct:>10.1?}",
            ((fast - direct) / direct).abs()
        );
    }

    let grid = Grid::new(256, 12.0, Boundary::Periodic)?;
    let k = CoulombKernel::with_default_softening(grid, 1.0, true)?;
    let v = k.potential(&vec![0.7; 256]);
    println!(
        "uniform gas with background: max |v_H| = {:.1e} (softening {:.4})",
        v.iter().fold(0.0f64, |m, x| m.max(x.abs())),
        k.softening()
    );

    let grid = Grid::new(512, 200.0, Boundary::Periodic)?;
    let h = grid.spacing();
    let k = CoulombKernel::new(grid, 1.0, 2.0 * h, false)?;
    let mut point = vec![0.0; 512];
    point[0] = 1.0 / h;
    let v = k.potential(&point);
    for i in [16, 64, 128, 200] {
        println!("x = {:>6.2}: v = {:.5}, 1/x = {:.5}", grid.x(i), v[i], 1.0 / grid.x(i));
    }
    Ok(())
}
