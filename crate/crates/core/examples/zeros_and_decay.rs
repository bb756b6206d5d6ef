//! Diagnostics of a solved two-component vortex: energy by region, zeros of
//! each section with their windings, decay of the energy density and the
//! limit point on the level set.

use std::sync::Arc;

use affine_vortex::classifier::{Polynomial, VortexDatum};
use affine_vortex::diagnostics::{decay_fit, energy, limit_at_infinity, recover_zeros, Region};
use affine_vortex::pdegrid::Grid;
use affine_vortex::solver::{newton_solve, render, SolveConfig};
use affine_vortex::TorusTarget;
use num_complex::Complex64;

fn main() -> affine_vortex::Result<()> {
    // weights 1 and 1 on C^2: projective line as the quotient
    let t = TorusTarget::circle(&[1, 1], 1.0)?;
    let datum = VortexDatum::integral(
        &[2],
        vec![
            Polynomial::from_roots(&[Complex64::new(1.0, 1.0), Complex64::new(-1.0, 0.0)]),
            Polynomial::real(&[2.0, 0.0]),
        ],
    );
    let start = render(&t, &datum, Arc::new(Grid::disk(12.0, 192, 128)?))?;
    let out = newton_solve(&start, &t, &SolveConfig::default())?;
    let s = &out.state;

    let inner = energy(s, &t, &Region::Disk { radius: 3.0 })?;
    let outer = energy(s, &t, &Region::Annulus { inner: 3.0, outer: 6.0 })?;
    println!("energy on r < 3: {:.4}, on 3 < r < 6: {:.4}", inner.total, outer.total);

    let zeros = recover_zeros(s, &t, 0, Some(2))?;
    for z in &zeros.zeros {
        println!("first section vanishes at ({:.3}, {:.3}), winding {}", z.x, z.y, z.winding);
    }
    let none = recover_zeros(s, &t, 1, Some(0))?;
    println!("second section zeros: {}", none.zeros.len());

    let fit = decay_fit(s, &t, (3.0, 6.0), 1)?;
    println!("energy density decay power {:?} (r^2 = {:?})", fit.slope, fit.r_squared);
    let lim = limit_at_infinity(s, &t, None)?;
    println!("limit point {:?} with moment norm {:.2e}", lim.x0, lim.moment_norm);
    Ok(())
}
