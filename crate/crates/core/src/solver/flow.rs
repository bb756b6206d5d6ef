use serde::{Deserialize, Serialize};

use super::newton::clamp_xi;
use super::residual::Problem;
use super::SolveConfig;
use crate::error::{Error, Result};
use crate::pdegrid::{pcg, FieldState, Preconditioner};
use crate::target::TorusTarget;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FlowSample {
    pub t: f64,
    pub dt: f64,
    pub residual: f64,
}

#[derive(Debug, Clone)]
pub struct FlowOutcome {
    pub state: FieldState,
    /// One sample per accepted step, preceded by the initial residual at `t = 0`.
    pub trajectory: Vec<FlowSample>,
    pub accepted: usize,
    pub rejected: usize,
    pub converged: bool,
    pub final_residual: f64,
}

/// Gradient-like flow `d xi / dt = -F(xi)` with linearly implicit steps
/// `(1/dt + Delta + L) delta = -F`. Steps that raise `||F||^2` are rejected and
/// retried with half the step.
pub fn heat_flow(state: &FieldState, target: &TorusTarget, config: &SolveConfig) -> Result<FlowOutcome> {
    config.validate()?;
    let cfg = &config.flow;
    let p = Problem::new(state, target)?;
    let mut xi = state.xi.clone();
    clamp_xi(state, &mut xi);
    let mut f = p.interior_residual(&xi)?;
    let mut fnorm = p.norm(&f);
    let mut t = 0.0;
    let mut dt = cfg.dt;
    let mut trajectory = vec![FlowSample { t, dt: 0.0, residual: fnorm }];
    let (mut accepted, mut rejected) = (0, 0);
    while fnorm >= cfg.residual_tol && t < cfg.t_max && accepted < cfg.max_steps {
        let step = dt.min(cfg.t_max - t);
        let op = p.operator(&xi, 1.0 / step)?;
        let pre = Preconditioner::default_for(&op)?;
        let rhs = p.weighted_rhs(&f);
        let tol = config.newton.cg_tol.max(1e-6_f64.min(fnorm));
        let delta = pcg(&op, &pre, &rhs, None, tol, config.newton.cg_max_iters)?.x;
        let trial: Vec<f64> = xi.iter().zip(&delta).map(|(x, d)| x + d).collect();
        let ft = p.interior_residual(&trial)?;
        let nt = p.norm(&ft);
        if !nt.is_finite() || (cfg.monotonicity_check && nt > fnorm) {
            rejected += 1;
            dt *= 0.5;
            if dt < cfg.dt_min {
                return Err(Error::StepUnderflow { t, dt });
            }
            continue;
        }
        xi = trial;
        f = ft;
        fnorm = nt;
        t += step;
        accepted += 1;
        trajectory.push(FlowSample { t, dt: step, residual: fnorm });
        if cfg.adaptive {
            dt = (2.0 * dt).min(cfg.dt_max);
        }
    }
    let mut out = state.clone();
    out.xi = xi;
    Ok(FlowOutcome {
        state: out,
        trajectory,
        accepted,
        rejected,
        converged: fnorm < cfg.residual_tol,
        final_residual: fnorm,
    })
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use num_complex::Complex64;

    use super::*;
    use crate::pdegrid::Grid;
    use crate::solver::newton_solve;

    fn unit_state(radius: f64, nr: usize) -> FieldState {
        let g = Arc::new(Grid::disk(radius, nr, 16).unwrap());
        FieldState::from_section(g, 1, |_, _| vec![Complex64::new(1.0, 0.0)]).unwrap()
    }

    #[test]
    fn constant_vortex_is_stationary() {
        let t = TorusTarget::circle(&[1], 0.5).unwrap();
        let out = heat_flow(&unit_state(4.0, 16), &t, &SolveConfig::default()).unwrap();
        assert_eq!(out.accepted, 0);
        assert!(out.converged);
    }

    #[test]
    fn perturbation_decays_at_the_model_rate() {
        let t = TorusTarget::circle(&[1], 0.5).unwrap();
        let mut s = unit_state(20.0, 160);
        let g = s.grid.clone();
        s.xi = g.sample(|x, y| 1e-4 * (-(x * x + y * y) / 50.0).exp());
        g.clamp_boundary(&mut s.xi);
        let mut cfg = SolveConfig::default();
        cfg.flow.adaptive = false;
        cfg.flow.dt = 0.01;
        cfg.flow.t_max = 3.0;
        let out = heat_flow(&s, &t, &cfg).unwrap();
        let tr = &out.trajectory;
        let (a, b) = (&tr[100], &tr[300]);
        let rate = -(b.residual / a.residual).ln() / (b.t - a.t);
        // lowest Dirichlet eigenvalue of Delta + 1 on disk(20) is about 1.0145
        assert!((rate - 1.0).abs() < 0.06, "{rate}");
        assert!(tr.windows(2).all(|w| w[1].residual <= w[0].residual));
    }

    #[test]
    fn flow_and_newton_share_the_fixed_point() {
        let t = TorusTarget::circle(&[1], 0.5).unwrap();
        let g = Arc::new(Grid::disk(6.0, 48, 32).unwrap());
        let s = FieldState::from_section(g, 1, |x, y| vec![Complex64::new(x, y)]).unwrap();
        let cfg = SolveConfig::default();
        let flow = heat_flow(&s, &t, &cfg).unwrap();
        assert!(flow.converged);
        assert!(flow.trajectory.windows(2).all(|w| w[1].residual <= w[0].residual));
        let newton = newton_solve(&s, &t, &cfg).unwrap();
        let diff = flow.state.xi.iter().zip(&newton.state.xi).fold(0.0_f64, |m, (a, b)| m.max((a - b).abs()));
        assert!(diff < 1e-6, "{diff}");
    }
}
