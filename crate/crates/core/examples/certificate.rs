//! Quantitative existence test near an approximate solution: the inverse bound
//! of the linearization, the initial residual and its Lipschitz margin.

use std::sync::Arc;

use affine_vortex::pdegrid::{FieldState, Grid};
use affine_vortex::solver::{newton_solve, SolveConfig};
use affine_vortex::TorusTarget;
use num_complex::Complex64;

fn main() -> affine_vortex::Result<()> {
    let t = TorusTarget::circle(&[1], 0.5)?;
    let grid = Arc::new(Grid::disk(2.0, 32, 32)?);
    let mut cfg = SolveConfig::default();
    cfg.certificate.enabled = true;
    cfg.certificate.delta = 0.1;
    for eps in [0.01, 0.05, 0.3] {
        // small perturbation of the vacuum u = 1, A = 0
        let mut s = FieldState::from_section(grid.clone(), 1, |x, y| vec![Complex64::new(1.0 + eps * x.sin(), eps * y)])?;
        for node in 0..grid.len() {
            s.ax[node] = eps * grid.y()[node].cos();
        }
        let out = newton_solve(&s, &t, &cfg)?;
        let c = out.certificate.expect("certificate enabled");
        println!(
            "eps {eps}: c {:.3}, residual {:.2e} vs {:.2e}, margin {:.2e} vs {:.2e}, verdict {}, excursion {:.2e}",
            c.c,
            c.f0_norm,
            c.delta / (4.0 * c.c),
            c.lipschitz_margin,
            1.0 / (2.0 * c.c),
            c.verdict,
            out.report.max_excursion
        );
    }
    Ok(())
}
