use crate::error::{Error, Result};
use crate::pdegrid::{BlockOperator, FieldState};
use crate::target::TorusTarget;

/// `sum_j |x_j|^2 mu_j mu_j^T`, row-major.
pub fn moment_matrix(t: &TorusTarget, x: &[num_complex::Complex64]) -> Vec<f64> {
    let r = t.rank();
    let mut m = vec![0.0; r * r];
    for (j, xj) in x.iter().enumerate() {
        let s = xj.norm_sqr();
        if s == 0.0 {
            continue;
        }
        let w = t.weight(j);
        for a in 0..r {
            for b in 0..r {
                m[a * r + b] += s * (w[a] * w[b]) as f64;
            }
        }
    }
    m
}

/// Residual map `xi -> *F_A + Delta xi + Phi(u_xi)` for a fixed base pair.
pub struct Problem<'a> {
    pub state: &'a FieldState,
    pub target: &'a TorusTarget,
    base: Vec<f64>,
    /// `|u_j|^2` per node.
    sq: Vec<f64>,
}

impl<'a> Problem<'a> {
    pub fn new(state: &'a FieldState, target: &'a TorusTarget) -> Result<Self> {
        state.check_target(target)?;
        let sq = state.u.iter().map(|v| v.norm_sqr()).collect();
        Ok(Self { state, target, base: state.base_curvature(), sq })
    }

    pub fn rank(&self) -> usize {
        self.state.rank
    }

    pub fn len(&self) -> usize {
        self.state.len()
    }

    pub fn is_empty(&self) -> bool {
        self.state.is_empty()
    }

    fn check(&self, xi: &[f64]) -> Result<()> {
        let want = self.len() * self.rank();
        if xi.len() != want {
            return Err(Error::Shape { expected: want, got: xi.len() });
        }
        Ok(())
    }

    /// `e^{2<mu_j, xi>} |u_j|^2` at a node.
    fn scaled_norms(&self, node: usize, xi: &[f64]) -> impl Iterator<Item = (usize, f64)> + '_ {
        let r = self.rank();
        let k = self.state.dim;
        let x: Vec<f64> = xi[node * r..(node + 1) * r].to_vec();
        (0..k).map(move |j| {
            let s = self.sq[node * k + j];
            if s == 0.0 {
                return (j, 0.0);
            }
            let p: f64 = self.target.weight(j).iter().zip(&x).map(|(&w, v)| w as f64 * v).sum();
            (j, s * (2.0 * p).exp())
        })
    }

    /// Componentwise `Delta` of a node-major field with `rank` components.
    pub fn laplacian(&self, f: &[f64]) -> Vec<f64> {
        let r = self.rank();
        if r == 1 {
            return self.state.grid.laplacian(f);
        }
        let mut out = vec![0.0; f.len()];
        for c in 0..r {
            let lap = self.state.grid.laplacian(&FieldState::component(f, r, c));
            FieldState::set_component(&mut out, r, c, &lap);
        }
        out
    }

    /// Residual at every node.
    pub fn residual(&self, xi: &[f64]) -> Result<Vec<f64>> {
        self.check(xi)?;
        let r = self.rank();
        let mut out = self.laplacian(xi);
        let tau = self.target.tau();
        for node in 0..self.len() {
            let o = &mut out[node * r..(node + 1) * r];
            for c in 0..r {
                o[c] += self.base[node * r + c] - tau[c];
            }
            for (j, s) in self.scaled_norms(node, xi) {
                for (c, &w) in self.target.weight(j).iter().enumerate() {
                    o[c] += 0.5 * s * w as f64;
                }
            }
        }
        Ok(out)
    }

    /// Residual with boundary rows zeroed; the unknowns live on interior nodes.
    pub fn interior_residual(&self, xi: &[f64]) -> Result<Vec<f64>> {
        let mut f = self.residual(xi)?;
        self.clamp(&mut f);
        Ok(f)
    }

    pub fn clamp(&self, f: &mut [f64]) {
        let r = self.rank();
        for node in 0..self.len() {
            if self.state.grid.is_boundary(node) {
                f[node * r..(node + 1) * r].iter_mut().for_each(|v| *v = 0.0);
            }
        }
    }

    /// Discrete `L2` norm over interior nodes.
    pub fn norm(&self, f: &[f64]) -> f64 {
        let r = self.rank();
        let g = &self.state.grid;
        let mut s = 0.0;
        for node in 0..self.len() {
            if !g.is_boundary(node) {
                s += g.weights()[node] * f[node * r..(node + 1) * r].iter().map(|v| v * v).sum::<f64>();
            }
        }
        s.sqrt()
    }

    /// Pointwise matrix field `L_{u_xi}`, `r x r` per node.
    pub fn moment_matrices(&self, xi: &[f64]) -> Vec<f64> {
        let r = self.rank();
        let mut out = vec![0.0; self.len() * r * r];
        for node in 0..self.len() {
            let m = &mut out[node * r * r..(node + 1) * r * r];
            for (j, s) in self.scaled_norms(node, xi) {
                let w = self.target.weight(j);
                for a in 0..r {
                    for b in 0..r {
                        m[a * r + b] += s * (w[a] * w[b]) as f64;
                    }
                }
            }
        }
        out
    }

    /// `K + W (L_{u_xi} + shift)` with Dirichlet rows.
    pub fn operator(&self, xi: &[f64], shift: f64) -> Result<BlockOperator<'_>> {
        self.check(xi)?;
        let r = self.rank();
        let mut mass = self.moment_matrices(xi);
        if shift != 0.0 {
            for node in 0..self.len() {
                for c in 0..r {
                    mass[node * r * r + c * r + c] += shift;
                }
            }
        }
        BlockOperator::new(&self.state.grid, r, mass)
    }

    /// Linearization `eta -> Delta eta + L_{u_xi} eta` at every node.
    pub fn linearized(&self, xi: &[f64], eta: &[f64]) -> Result<Vec<f64>> {
        self.check(xi)?;
        self.check(eta)?;
        let r = self.rank();
        let mut out = self.laplacian(eta);
        let m = self.moment_matrices(xi);
        for node in 0..self.len() {
            for a in 0..r {
                let mut s = 0.0;
                for b in 0..r {
                    s += m[node * r * r + a * r + b] * eta[node * r + b];
                }
                out[node * r + a] += s;
            }
        }
        Ok(out)
    }

    /// `-W f` on interior rows, zero on boundary rows.
    pub fn weighted_rhs(&self, f: &[f64]) -> Vec<f64> {
        let r = self.rank();
        let g = &self.state.grid;
        let mut b = vec![0.0; f.len()];
        for node in 0..self.len() {
            if !g.is_boundary(node) {
                let w = g.weights()[node];
                for c in 0..r {
                    b[node * r + c] = -w * f[node * r + c];
                }
            }
        }
        b
    }
}

/// Residual of `state` at its stored `xi`, every node.
pub fn residual(state: &FieldState, target: &TorusTarget) -> Result<Vec<f64>> {
    Problem::new(state, target)?.residual(&state.xi)
}

/// Linearization at the stored `xi` applied to `eta`.
pub fn linearized_apply(state: &FieldState, target: &TorusTarget, eta: &[f64]) -> Result<Vec<f64>> {
    Problem::new(state, target)?.linearized(&state.xi, eta)
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use num_complex::Complex64;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    use super::*;
    use crate::pdegrid::Grid;

    fn one() -> Complex64 {
        Complex64::new(1.0, 0.0)
    }

    #[test]
    fn constant_unit_section_is_a_vortex() {
        let t = TorusTarget::circle(&[1], 0.5).unwrap();
        let g = Arc::new(Grid::disk(3.0, 12, 16).unwrap());
        let s = FieldState::from_section(g, 1, |_, _| vec![one()]).unwrap();
        assert!(residual(&s, &t).unwrap().iter().all(|v| v.abs() < 1e-15));
    }

    #[test]
    fn zero_section_gives_minus_tau() {
        let t = TorusTarget::new(vec![vec![1, 0], vec![0, 1]], vec![0.5, 0.25]).unwrap();
        let g = Arc::new(Grid::disk(3.0, 12, 16).unwrap());
        let s = FieldState::zeros(g, 2, 2);
        let f = residual(&s, &t).unwrap();
        for node in f.chunks(2) {
            assert_eq!(node, &[-0.5, -0.25]);
        }
    }

    #[test]
    fn unit_section_linearization_is_shifted_laplacian() {
        let t = TorusTarget::circle(&[1], 0.5).unwrap();
        let g = Arc::new(Grid::disk(3.0, 12, 16).unwrap());
        let s = FieldState::from_section(g.clone(), 1, |_, _| vec![one()]).unwrap();
        let mut eta = g.sample(|x, y| (x * y).sin());
        g.clamp_boundary(&mut eta);
        let out = linearized_apply(&s, &t, &eta).unwrap();
        let lap = g.laplacian(&eta);
        for k in 0..g.len() {
            assert!((out[k] - lap[k] - eta[k]).abs() < 1e-13);
        }
        let z = FieldState::zeros(g.clone(), 1, 1);
        let out = linearized_apply(&z, &t, &eta).unwrap();
        assert_eq!(out, lap);
    }

    #[test]
    fn linearization_matches_finite_differences() {
        let t = TorusTarget::new(vec![vec![1, 0], vec![1, 1], vec![0, 2]], vec![0.7, 0.9]).unwrap();
        let g = Arc::new(Grid::disk(2.0, 16, 24).unwrap());
        let mut s = FieldState::from_section(g.clone(), 2, |x, y| {
            let z = Complex64::new(x, y);
            vec![z, z * z + 1.0, one() * 0.5]
        })
        .unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let (a, b): (f64, f64) = (rng.random(), rng.random());
        s.xi = (0..g.len() * 2)
            .map(|i| 0.3 * ((i / 2) as f64 * a * 0.01).sin() + 0.1 * b * (i % 2) as f64)
            .collect();
        s.ax = g.sample(|x, y| 0.2 * (x + y)).into_iter().flat_map(|v| [v, -v]).collect();
        s.ay = g.sample(|x, y| 0.1 * x * y).into_iter().flat_map(|v| [v, 0.5 * v]).collect();
        let p = Problem::new(&s, &t).unwrap();
        let eta: Vec<f64> = (0..g.len() * 2).map(|i| ((i * 37 % 11) as f64 - 5.0) / 5.0).collect();
        let eps = 1e-6;
        let plus: Vec<f64> = s.xi.iter().zip(&eta).map(|(x, e)| x + eps * e).collect();
        let f0 = p.residual(&s.xi).unwrap();
        let f1 = p.residual(&plus).unwrap();
        let fd: Vec<f64> = f1.iter().zip(&f0).map(|(a, b)| (a - b) / eps).collect();
        let lin = p.linearized(&s.xi, &eta).unwrap();
        let num: f64 = fd.iter().zip(&lin).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
        let den: f64 = lin.iter().map(|v| v * v).sum::<f64>().sqrt();
        assert!(num / den < 1e-5, "{}", num / den);
    }

    #[test]
    fn residual_dependence_on_xi_flips_with_its_sign() {
        let t = TorusTarget::circle(&[2], 1.0).unwrap();
        let g = Arc::new(Grid::disk(2.0, 10, 16).unwrap());
        let s = FieldState::from_section(g.clone(), 1, |x, y| vec![Complex64::new(1.0 + x, y)]).unwrap();
        let p = Problem::new(&s, &t).unwrap();
        let mut eta = g.sample(|x, y| (1.0 - (x * x + y * y) / 4.0) * (1.0 + x));
        g.clamp_boundary(&mut eta);
        let eps = 1e-6;
        let f0 = p.residual(&vec![0.0; g.len()]).unwrap();
        let fp = p.residual(&eta.iter().map(|v| eps * v).collect::<Vec<_>>()).unwrap();
        let fm = p.residual(&eta.iter().map(|v| -eps * v).collect::<Vec<_>>()).unwrap();
        let mut pairing = 0.0;
        for k in 0..g.len() {
            let (dp, dm) = (fp[k] - f0[k], fm[k] - f0[k]);
            assert!((dp + dm).abs() < 1e-9, "{}", dp + dm);
            if !g.is_boundary(k) {
                pairing += g.weights()[k] * dp * eta[k];
            }
        }
        // the derivative is a positive operator
        assert!(pairing > 0.0);
    }
}
