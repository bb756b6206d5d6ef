//! Drives the same boundary value problem by the implicit gradient flow and
//! compares the limit with the Newton solution.

use std::sync::Arc;

use affine_vortex::classifier::{Polynomial, VortexDatum};
use affine_vortex::pdegrid::Grid;
use affine_vortex::solver::{heat_flow, newton_solve, render, SolveConfig};
use affine_vortex::TorusTarget;

fn main() -> affine_vortex::Result<()> {
    let t = TorusTarget::circle(&[1], 0.5)?;
    let datum = VortexDatum::integral(&[1], vec![Polynomial::real(&[0.5, 1.0])]);
    let start = render(&t, &datum, Arc::new(Grid::disk(8.0, 96, 64)?))?;
    let cfg = SolveConfig::default();
    let flow = heat_flow(&start, &t, &cfg)?;
    println!(
        "flow converged {} after {} accepted and {} rejected steps",
        flow.converged, flow.accepted, flow.rejected
    );
    for s in flow.trajectory.iter().step_by((flow.trajectory.len() / 8).max(1)) {
        println!("  t = {:10.3e}  dt = {:9.2e}  residual = {:.3e}", s.t, s.dt, s.residual);
    }
    let newton = newton_solve(&start, &t, &cfg)?;
    let diff = flow
        .state
        .xi
        .iter()
        .zip(&newton.state.xi)
        .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
    println!("max difference from the Newton solution: {diff:.2e}");
    Ok(())
}
