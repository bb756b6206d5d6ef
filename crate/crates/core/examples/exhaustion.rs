//! Solves on growing disks, warm starting each from the last, and watches the
//! gauge-invariant quantities settle on a fixed ball.

use affine_vortex::classifier::{Polynomial, VortexDatum};
use affine_vortex::solver::{exhaustion_solve, Resolution, SolveConfig};
use affine_vortex::TorusTarget;
use num_complex::Complex64;

fn main() -> affine_vortex::Result<()> {
    let t = TorusTarget::circle(&[1], 0.5)?;
    let datum = VortexDatum::integral(
        &[2],
        vec![Polynomial::from_roots(&[Complex64::new(1.5, 0.0), Complex64::new(-0.5, 1.0)])],
    );
    let mut cfg = SolveConfig::default();
    cfg.exhaustion.radii = vec![4.0, 8.0, 16.0];
    cfg.exhaustion.resolution = Resolution::Spacing { h: 0.0625, ntheta: 96 };
    cfg.exhaustion.convergence_tol = 1e-2;
    let out = exhaustion_solve(&t, &datum, &cfg)?;
    println!("comparison ball radius {}", out.compare_radius);
    for (r, w) in out.radii.iter().zip(&out.work) {
        println!("radius {r:5.1}: {w} Newton iterations");
    }
    for c in &out.comparisons {
        println!(
            "{:5.1} -> {:5.1}: |u| C0 {:.2e}, curvature C0 {:.2e}",
            c.from_radius, c.to_radius, c.abs_u_c0, c.curvature_c0
        );
    }
    println!("converged {}, monotone {}", out.converged, out.cauchy);
    Ok(())
}
