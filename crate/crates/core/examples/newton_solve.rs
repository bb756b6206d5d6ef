//! Solves for the vortex of the datum z^2 + 1 on a disk by damped Newton and
//! reports energy, decay and vortex positions.

use std::sync::Arc;

use affine_vortex::classifier::{Polynomial, VortexDatum};
use affine_vortex::diagnostics::{solve_report, ReportOptions};
use affine_vortex::pdegrid::Grid;
use affine_vortex::solver::{newton_solve, render, SolveConfig};
use affine_vortex::TorusTarget;

fn main() -> affine_vortex::Result<()> {
    let t = TorusTarget::circle(&[1], 0.5)?;
    let datum = VortexDatum::integral(&[2], vec![Polynomial::real(&[1.0, 0.0, 1.0])]);
    let grid = Arc::new(Grid::disk(12.0, 192, 128)?);
    let start = render(&t, &datum, grid)?;
    let out = newton_solve(&start, &t, &SolveConfig::default())?;
    println!(
        "converged {} in {} iterations, residuals {:?}",
        out.report.converged,
        out.report.iterations,
        out.report.residual_history.iter().map(|r| format!("{r:.1e}")).collect::<Vec<_>>()
    );

    let opts = ReportOptions { expected_degree: Some(2), ..ReportOptions::default() };
    let rep = solve_report(&out.state, &t, &opts)?;
    println!(
        "energy on the ball of radius {}: {:.4} (quantized {:.4})",
        rep.energy_radius,
        rep.total_energy,
        4.0 * std::f64::consts::PI
    );
    if let Some(d) = &rep.decay {
        println!("decay power {:?} over {:?}, within bound {}: {}", d.slope, d.window, d.bound, d.within_bound);
    }
    if let Some(z) = &rep.zeros {
        for v in &z.zeros {
            println!("vortex at ({:.3}, {:.3}) with winding {}", v.x, v.y, v.winding);
        }
    }
    Ok(())
}
