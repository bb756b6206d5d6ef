use std::sync::Arc;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::{heat_flow, newton_solve, Method, Resolution, SolveConfig};
use crate::classifier::VortexDatum;
use crate::error::{Error, Result};
use crate::pdegrid::{FieldState, Grid};
use crate::target::TorusTarget;

/// Flat connection with `u_j = p_j(z)` sampled at the nodes.
pub fn render(target: &TorusTarget, datum: &VortexDatum, grid: Arc<Grid>) -> Result<FieldState> {
    if datum.polys.len() != target.dim() {
        return Err(Error::Shape { expected: target.dim(), got: datum.polys.len() });
    }
    FieldState::from_section(grid, target.rank(), |x, y| datum.eval(Complex64::new(x, y)))
}

/// Gauge-invariant differences between the solutions on two radii, measured on
/// the comparison ball.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RadiusComparison {
    pub from_radius: f64,
    pub to_radius: f64,
    pub abs_u_c0: f64,
    pub abs_u_l2: f64,
    pub curvature_c0: f64,
    pub curvature_l2: f64,
}

#[derive(Debug, Clone)]
pub struct ExhaustionOutcome {
    pub radii: Vec<f64>,
    pub solutions: Vec<FieldState>,
    /// Newton iterations or accepted flow steps per radius.
    pub work: Vec<usize>,
    pub comparisons: Vec<RadiusComparison>,
    pub compare_radius: f64,
    /// Last differences below the configured tolerance.
    pub converged: bool,
    /// `|u|` differences strictly decreasing.
    pub cauchy: bool,
}

/// Disk grid of the given radius at the configured resolution.
pub fn grid_for(radius: f64, res: Resolution) -> Result<Grid> {
    match res {
        Resolution::Counts { nr, ntheta } => Grid::disk(radius, nr, ntheta),
        Resolution::Spacing { h, ntheta } => {
            let nr = (radius / h).round() as usize;
            if ((nr as f64) * h - radius).abs() > 1e-9 * radius {
                return Err(Error::GridMismatch(format!("radius {radius} is not a multiple of spacing {h}")));
            }
            Grid::disk(radius, nr, ntheta)
        }
    }
}

/// `(|u_xi,j|, *F_c)` of a solution, interpolated at the given points.
fn invariants_at(s: &FieldState, t: &TorusTarget, pts: &[(f64, f64)]) -> Result<(Vec<f64>, Vec<f64>)> {
    let u = s.u_xi(t);
    let f = s.curvature();
    let (k, r) = (s.dim, s.rank);
    let mut abs_u = Vec::with_capacity(pts.len() * k);
    let mut curv = Vec::with_capacity(pts.len() * r);
    let moduli: Vec<Vec<f64>> = (0..k).map(|j| u.iter().skip(j).step_by(k).map(|v| v.norm()).collect()).collect();
    let comps: Vec<Vec<f64>> = (0..r).map(|c| FieldState::component(&f, r, c)).collect();
    let miss = || Error::GridMismatch("comparison point outside the grid".into());
    for &(x, y) in pts {
        for m in &moduli {
            abs_u.push(s.grid.interpolate(x, y, m).ok_or_else(miss)?);
        }
        for c in &comps {
            curv.push(s.grid.interpolate(x, y, c).ok_or_else(miss)?);
        }
    }
    Ok((abs_u, curv))
}

/// Solves on a sequence of growing disks with `xi = 0` on each boundary and
/// compares gauge invariants on a common inner ball.
pub fn exhaustion_solve(target: &TorusTarget, datum: &VortexDatum, config: &SolveConfig) -> Result<ExhaustionOutcome> {
    config.validate()?;
    let ex = &config.exhaustion;
    let compare_radius = ex.compare_radius.unwrap_or(ex.radii[0] / 2.0);
    if compare_radius > ex.radii[0] {
        return Err(Error::InvalidDatum("comparison ball exceeds the first radius".into()));
    }
    let mut solutions: Vec<FieldState> = Vec::new();
    let mut work = Vec::new();
    for &radius in &ex.radii {
        let grid = Arc::new(grid_for(radius, ex.resolution)?);
        let mut state = render(target, datum, grid.clone())?;
        if let (true, Some(prev)) = (ex.warm_start, solutions.last()) {
            let r = state.rank;
            for c in 0..r {
                let old = prev.xi_component(c);
                let guess: Vec<f64> = (0..grid.len())
                    .map(|k| prev.grid.interpolate(grid.x()[k], grid.y()[k], &old).unwrap_or(0.0))
                    .collect();
                FieldState::set_component(&mut state.xi, r, c, &guess);
            }
        }
        let (solved, steps) = match ex.method {
            Method::Newton => {
                let o = newton_solve(&state, target, config)?;
                (o.state, o.report.iterations)
            }
            Method::Flow => {
                let o = heat_flow(&state, target, config)?;
                if !o.converged {
                    return Err(Error::Diverged { iteration: o.accepted, residual: o.final_residual });
                }
                (o.state, o.accepted)
            }
        };
        solutions.push(solved);
        work.push(steps);
    }
    let first = &solutions[0].grid;
    let nodes = first.nodes_within(compare_radius);
    let pts: Vec<(f64, f64)> = nodes.iter().map(|&k| (first.x()[k], first.y()[k])).collect();
    let weights: Vec<f64> = nodes.iter().map(|&k| first.weights()[k]).collect();
    let inv: Vec<(Vec<f64>, Vec<f64>)> = solutions.iter().map(|s| invariants_at(s, target, &pts)).collect::<Result<_>>()?;
    let dist = |a: &[f64], b: &[f64], per: usize| -> (f64, f64) {
        let mut c0: f64 = 0.0;
        let mut l2 = 0.0;
        for (i, (x, y)) in a.iter().zip(b).enumerate() {
            let d = (x - y).abs();
            c0 = c0.max(d);
            l2 += weights[i / per] * d * d;
        }
        (c0, l2.sqrt())
    };
    let (k, r) = (target.dim(), target.rank());
    let comparisons: Vec<RadiusComparison> = (1..solutions.len())
        .map(|i| {
            let (u_c0, u_l2) = dist(&inv[i - 1].0, &inv[i].0, k);
            let (f_c0, f_l2) = dist(&inv[i - 1].1, &inv[i].1, r);
            RadiusComparison {
                from_radius: ex.radii[i - 1],
                to_radius: ex.radii[i],
                abs_u_c0: u_c0,
                abs_u_l2: u_l2,
                curvature_c0: f_c0,
                curvature_l2: f_l2,
            }
        })
        .collect();
    let converged = comparisons
        .last()
        .is_some_and(|c| c.abs_u_c0 < ex.convergence_tol && c.curvature_c0 < ex.convergence_tol);
    let cauchy = comparisons.windows(2).all(|w| w[1].abs_u_c0 < w[0].abs_u_c0);
    Ok(ExhaustionOutcome {
        radii: ex.radii.clone(),
        solutions,
        work,
        comparisons,
        compare_radius,
        converged,
        cauchy,
    })
}
