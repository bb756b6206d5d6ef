use crate::error::{Error, Result};
use crate::pdegrid::{pcg, BlockOperator, FieldState, Grid, Preconditioner};

/// Largest admissible `L2` norm of the curvature after flattening.
pub const FLATNESS_TOL: f64 = 1e-9;

#[derive(Debug, Clone)]
pub struct FlattenOutcome {
    /// `rank` values per node, zero on the boundary.
    pub xi: Vec<f64>,
    /// `L2` norm over interior nodes of `*F + Delta xi`.
    pub curvature_after: f64,
}

/// Gauge potential `xi` with `Delta xi = -*F_a` and `xi = 0` on the boundary,
/// so that `a - *d xi` is flat. `ax`, `ay` hold `rank` components per node.
pub fn flatten_connection(grid: &Grid, rank: usize, ax: &[f64], ay: &[f64]) -> Result<FlattenOutcome> {
    let n = grid.len() * rank;
    if ax.len() != n || ay.len() != n {
        return Err(Error::Shape { expected: n, got: ax.len().min(ay.len()) });
    }
    let op = BlockOperator::new(grid, 1, vec![0.0; grid.len()])?;
    let pre = Preconditioner::default_for(&op)?;
    let mut xi = vec![0.0; n];
    let mut after = 0.0;
    for c in 0..rank {
        let curl = grid.curl(&FieldState::component(ax, rank, c), &FieldState::component(ay, rank, c));
        let mut b: Vec<f64> = curl.iter().zip(grid.weights()).map(|(f, w)| -f * w).collect();
        grid.clamp_boundary(&mut b);
        let sol = pcg(&op, &pre, &b, None, 1e-14, 20 * grid.len().max(100))
            .or_else(|e| match e {
                // round-off can stall the last digits; accept what the post-check allows
                Error::NonCoercive { .. } | Error::LinearSolve { .. } => {
                    pcg(&op, &pre, &b, None, 1e-12, 20 * grid.len().max(100))
                }
                other => Err(other),
            })?
            .x;
        let lap = grid.laplacian(&sol);
        for k in 0..grid.len() {
            if !grid.is_boundary(k) {
                after += grid.weights()[k] * (curl[k] + lap[k]).powi(2);
            }
        }
        FieldState::set_component(&mut xi, rank, c, &sol);
    }
    let curvature_after = after.sqrt();
    if curvature_after > FLATNESS_TOL {
        return Err(Error::LinearSolve { iterations: 0, residual: curvature_after });
    }
    Ok(FlattenOutcome { xi, curvature_after })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flat_connection_needs_no_gauge() {
        let g = Grid::disk(2.0, 16, 16).unwrap();
        let z = vec![0.0; g.len()];
        let out = flatten_connection(&g, 1, &z, &z).unwrap();
        assert!(out.xi.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn constant_curvature_gives_the_paraboloid() {
        let (radius, c) = (2.0, 1.5);
        let g = Grid::disk(radius, 32, 32).unwrap();
        let ax = g.sample(|_, y| -0.5 * c * y);
        let ay = g.sample(|x, _| 0.5 * c * x);
        let out = flatten_connection(&g, 1, &ax, &ay).unwrap();
        // the discrete radial operator is exact on quadratics
        let exact = g.sample(|x, y| -c * (radius * radius - x * x - y * y) / 4.0);
        let err = out.xi.iter().zip(&exact).fold(0.0_f64, |m, (a, b)| m.max((a - b).abs()));
        assert!(err < 1e-10, "{err}");
    }

    #[test]
    fn random_smooth_connection_is_flattened() {
        let g = Grid::disk(3.0, 48, 48).unwrap();
        let ax: Vec<f64> = g.sample(|x, y| (0.7 * x).sin() * y + 0.3 * (x * y).cos()).into_iter().flat_map(|v| [v, 0.5 * v]).collect();
        let ay: Vec<f64> = g.sample(|x, y| x * x - (1.3 * y).cos()).into_iter().flat_map(|v| [v, -v]).collect();
        let out = flatten_connection(&g, 2, &ax, &ay).unwrap();
        assert!(out.curvature_after < FLATNESS_TOL);
    }
}
