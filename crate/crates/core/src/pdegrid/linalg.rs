//! Preconditioned conjugate gradients for `K + W L` with Dirichlet masking, where
//! `L` is a symmetric `r x r` matrix field.

use std::sync::Arc;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::{Fft, FftPlanner};

use super::Grid;
use crate::error::{Error, Result};

/// `x -> K x + W L x` on interior nodes, identity on boundary nodes.
/// Vectors are node-major with `rank` components per node.
pub struct BlockOperator<'g> {
    grid: &'g Grid,
    rank: usize,
    /// Row-major `r x r` block per node.
    mass: Vec<f64>,
}

impl<'g> BlockOperator<'g> {
    pub fn new(grid: &'g Grid, rank: usize, mass: Vec<f64>) -> Result<Self> {
        if mass.len() != grid.len() * rank * rank {
            return Err(Error::Shape { expected: grid.len() * rank * rank, got: mass.len() });
        }
        Ok(Self { grid, rank, mass })
    }

    /// Scalar Helmholtz operator `K + W m`.
    pub fn scalar(grid: &'g Grid, m: &[f64]) -> Result<Self> {
        Self::new(grid, 1, m.to_vec())
    }

    pub fn grid(&self) -> &Grid {
        self.grid
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn dim(&self) -> usize {
        self.grid.len() * self.rank
    }

    pub fn mass_block(&self, node: usize) -> &[f64] {
        let rr = self.rank * self.rank;
        &self.mass[node * rr..(node + 1) * rr]
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        let r = self.rank;
        let g = self.grid;
        let w = g.weights();
        let mut y = vec![0.0; x.len()];
        y.par_chunks_mut(r).enumerate().for_each(|(a, ya)| {
            if g.is_boundary(a) {
                ya.copy_from_slice(&x[a * r..(a + 1) * r]);
                return;
            }
            let m = self.mass_block(a);
            for c in 0..r {
                let xa = x[a * r + c];
                let mut s = 0.0;
                for &(b, cond) in g.neighbors(a) {
                    let xb = if g.is_boundary(b) { 0.0 } else { x[b * r + c] };
                    s += cond * (xa - xb);
                }
                let mut ms = 0.0;
                for d in 0..r {
                    ms += m[c * r + d] * x[a * r + d];
                }
                ya[c] = s + w[a] * ms;
            }
        });
        y
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn invert_small(block: &[f64], r: usize) -> Option<Vec<f64>> {
    let m = DMatrix::from_row_slice(r, r, block);
    let inv = m.try_inverse()?;
    Some((0..r * r).map(|i| inv[(i / r, i % r)]).collect())
}

fn matvec(m: &[f64], x: &[Complex64], r: usize, out: &mut [Complex64]) {
    for c in 0..r {
        let mut s = Complex64::new(0.0, 0.0);
        for d in 0..r {
            s += x[d] * m[c * r + d];
        }
        out[c] = s;
    }
}

/// Ring-averaged Fourier preconditioner: per angular mode, a block tridiagonal
/// solve in the radial direction.
pub struct FftRing {
    rank: usize,
    ntheta: usize,
    /// Unknown rings (global ring indices).
    rings: Vec<usize>,
    has_center: bool,
    /// `a_i` couples row i to row i-1, `c_i` to row i+1 (scalar multiples of I).
    lower: Vec<Vec<f64>>,
    upper: Vec<f64>,
    /// Per mode, per row: inverse of the eliminated diagonal block.
    factors: Vec<Vec<f64>>,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl FftRing {
    fn build(op: &BlockOperator) -> Result<Self> {
        let g = op.grid();
        let radii = g.ring_radii().expect("polar grid").to_vec();
        let ntheta = g.ntheta().unwrap();
        let nr = radii.len() - 1;
        let has_center = g.has_center();
        let r = op.rank();
        let rings: Vec<usize> = (if has_center { 0 } else { 1 }..nr).collect();
        let h = g.spacing();
        let dtheta = g.geometry().angular_period() / ntheta as f64;
        let w = g.weights();
        // ring-averaged W L
        let avg: Vec<Vec<f64>> = rings
            .iter()
            .map(|&i| {
                let nodes = g.ring(i);
                let mut acc = vec![0.0; r * r];
                for &k in &nodes {
                    for (a, m) in acc.iter_mut().zip(op.mass_block(k)) {
                        *a += w[k] * m;
                    }
                }
                acc.iter().map(|v| v / nodes.len() as f64).collect()
            })
            .collect();
        let radial = |i: usize| 0.5 * (radii[i] + radii[i + 1]) * dtheta / h;
        let angular = |i: usize| h / (radii[i] * dtheta);
        let c0 = dtheta / 2.0;
        let n = rings.len();
        let mut factors = Vec::with_capacity(ntheta);
        let mut lower = Vec::with_capacity(ntheta);
        let mut upper = vec![0.0; n];
        for (row, &i) in rings.iter().enumerate() {
            if row + 1 < n {
                upper[row] = if has_center && i == 0 { -c0 } else { -radial(i) };
            }
        }
        for m in 0..ntheta {
            let mut lo = vec![0.0; n];
            let mut binv: Vec<f64> = Vec::with_capacity(n * r * r);
            let mut store: Vec<Vec<f64>> = Vec::with_capacity(n);
            for (row, &i) in rings.iter().enumerate() {
                let mut diag = avg[row].clone();
                let scalar = if has_center && i == 0 {
                    if m == 0 {
                        ntheta as f64 * c0
                    } else {
                        // the center only couples to mode 0; keep the row inert
                        1.0
                    }
                } else {
                    let lam = 2.0 * angular(i) * (1.0 - (m as f64 * dtheta).cos());
                    let left = if i == 0 { 0.0 } else if has_center && i == 1 { c0 } else { radial(i - 1) };
                    left + radial(i) + lam
                };
                if has_center && i == 0 && m != 0 {
                    diag.iter_mut().for_each(|v| *v = 0.0);
                }
                for c in 0..r {
                    diag[c * r + c] += scalar;
                }
                if row > 0 {
                    let a = if has_center && i == 1 {
                        if m == 0 { -c0 * ntheta as f64 } else { 0.0 }
                    } else {
                        -radial(i - 1)
                    };
                    let cup = if has_center && rings[row - 1] == 0 && m != 0 { 0.0 } else { upper[row - 1] };
                    lo[row] = a;
                    let pinv = &store[row - 1];
                    for (d, p) in diag.iter_mut().zip(pinv) {
                        *d -= a * cup * p;
                    }
                }
                let inv = invert_small(&diag, r)
                    .ok_or(Error::NonCoercive { residual: f64::NAN })?;
                store.push(inv);
            }
            for s in store {
                binv.extend(s);
            }
            factors.push(binv);
            lower.push(lo);
        }
        let mut planner = FftPlanner::new();
        Ok(Self {
            rank: r,
            ntheta,
            rings,
            has_center,
            lower,
            upper,
            factors,
            forward: planner.plan_fft_forward(ntheta),
            inverse: planner.plan_fft_inverse(ntheta),
        })
    }

    fn apply(&self, g: &Grid, x: &[f64]) -> Vec<f64> {
        let r = self.rank;
        let nt = self.ntheta;
        let n = self.rings.len();
        // spectra[row][c][m]
        let mut spectra: Vec<Vec<Vec<Complex64>>> = self
            .rings
            .par_iter()
            .map(|&i| {
                if self.has_center && i == 0 {
                    return (0..r)
                        .map(|c| {
                            let mut v = vec![Complex64::new(0.0, 0.0); nt];
                            v[0] = Complex64::new(x[c], 0.0);
                            v
                        })
                        .collect();
                }
                (0..r)
                    .map(|c| {
                        let mut buf: Vec<Complex64> = (0..nt)
                            .map(|j| Complex64::new(x[g.ring_node(i, j) * r + c], 0.0))
                            .collect();
                        self.forward.process(&mut buf);
                        buf
                    })
                    .collect()
            })
            .collect();
        let solved: Vec<Vec<Vec<Complex64>>> = (0..nt)
            .into_par_iter()
            .map(|m| {
                let rr = r * r;
                let f = &self.factors[m];
                let lo = &self.lower[m];
                let mut y: Vec<Vec<Complex64>> = (0..n)
                    .map(|row| (0..r).map(|c| spectra[row][c][m]).collect())
                    .collect();
                let mut tmp = vec![Complex64::new(0.0, 0.0); r];
                for row in 1..n {
                    if lo[row] != 0.0 {
                        matvec(&f[(row - 1) * rr..row * rr], &y[row - 1], r, &mut tmp);
                        for c in 0..r {
                            let t = tmp[c];
                            y[row][c] -= t * lo[row];
                        }
                    }
                }
                let mut xs = vec![vec![Complex64::new(0.0, 0.0); r]; n];
                for row in (0..n).rev() {
                    let mut rhs = y[row].clone();
                    if row + 1 < n {
                        let cup = if self.has_center && self.rings[row] == 0 && m != 0 { 0.0 } else { self.upper[row] };
                        for c in 0..r {
                            rhs[c] -= xs[row + 1][c] * cup;
                        }
                    }
                    let mut out = vec![Complex64::new(0.0, 0.0); r];
                    matvec(&f[row * rr..(row + 1) * rr], &rhs, r, &mut out);
                    xs[row] = out;
                }
                xs
            })
            .collect();
        for (row, ring) in spectra.iter_mut().enumerate() {
            for (c, buf) in ring.iter_mut().enumerate() {
                for (m, v) in buf.iter_mut().enumerate() {
                    *v = solved[m][row][c];
                }
            }
        }
        let mut out = vec![0.0; x.len()];
        let rows: Vec<(usize, Vec<Vec<f64>>)> = self
            .rings
            .par_iter()
            .zip(spectra.into_par_iter())
            .map(|(&i, mut ring)| {
                if self.has_center && i == 0 {
                    return (i, ring.iter().map(|b| vec![b[0].re]).collect());
                }
                let vals = ring
                    .iter_mut()
                    .map(|buf| {
                        self.inverse.process(buf);
                        buf.iter().map(|v| v.re / nt as f64).collect()
                    })
                    .collect();
                (i, vals)
            })
            .collect();
        for (i, vals) in rows {
            for (c, v) in vals.iter().enumerate() {
                if self.has_center && i == 0 {
                    out[c] = v[0];
                } else {
                    for (j, val) in v.iter().enumerate() {
                        out[g.ring_node(i, j) * r + c] = *val;
                    }
                }
            }
        }
        out
    }
}

pub enum Preconditioner {
    Identity,
    /// Inverse of the per-node diagonal block.
    Jacobi(Vec<f64>),
    FftRing(Box<FftRing>),
}

impl Preconditioner {
    /// Fourier preconditioner on polar grids, block Jacobi otherwise.
    pub fn default_for(op: &BlockOperator) -> Result<Self> {
        if op.grid().is_polar() && op.rank() <= 4 {
            Ok(Preconditioner::FftRing(Box::new(FftRing::build(op)?)))
        } else {
            Self::jacobi(op)
        }
    }

    pub fn jacobi(op: &BlockOperator) -> Result<Self> {
        let g = op.grid();
        let r = op.rank();
        let mut inv = Vec::with_capacity(g.len() * r * r);
        for a in 0..g.len() {
            let mut block: Vec<f64> = op.mass_block(a).iter().map(|m| m * g.weights()[a]).collect();
            let s: f64 = g.neighbors(a).iter().map(|&(_, c)| c).sum();
            for c in 0..r {
                block[c * r + c] += s;
            }
            if g.is_boundary(a) {
                block = (0..r * r).map(|i| f64::from(u8::from(i % (r + 1) == 0))).collect();
            }
            inv.extend(invert_small(&block, r).ok_or(Error::NonCoercive { residual: f64::NAN })?);
        }
        Ok(Preconditioner::Jacobi(inv))
    }

    fn apply(&self, op: &BlockOperator, x: &[f64]) -> Vec<f64> {
        let g = op.grid();
        let r = op.rank();
        let mut out = match self {
            Preconditioner::Identity => x.to_vec(),
            Preconditioner::Jacobi(inv) => {
                let rr = r * r;
                let mut out = vec![0.0; x.len()];
                out.par_chunks_mut(r).enumerate().for_each(|(a, oa)| {
                    let m = &inv[a * rr..(a + 1) * rr];
                    for c in 0..r {
                        oa[c] = (0..r).map(|d| m[c * r + d] * x[a * r + d]).sum();
                    }
                });
                out
            }
            Preconditioner::FftRing(f) => f.apply(g, x),
        };
        for a in 0..g.len() {
            if g.is_boundary(a) {
                out[a * r..(a + 1) * r].copy_from_slice(&x[a * r..(a + 1) * r]);
            }
        }
        out
    }
}

#[derive(Debug, Clone)]
pub struct CgOutcome {
    pub x: Vec<f64>,
    pub iterations: usize,
    pub relative_residual: f64,
}

/// Solves `op x = b` to relative residual `tol`.
pub fn pcg(
    op: &BlockOperator,
    pre: &Preconditioner,
    b: &[f64],
    x0: Option<&[f64]>,
    tol: f64,
    max_iter: usize,
) -> Result<CgOutcome> {
    let n = op.dim();
    if b.len() != n {
        return Err(Error::Shape { expected: n, got: b.len() });
    }
    let bnorm = dot(b, b).sqrt();
    if bnorm == 0.0 {
        return Ok(CgOutcome { x: vec![0.0; n], iterations: 0, relative_residual: 0.0 });
    }
    let mut x = x0.map_or_else(|| vec![0.0; n], <[f64]>::to_vec);
    let ax = op.apply(&x);
    let mut res: Vec<f64> = b.iter().zip(&ax).map(|(a, c)| a - c).collect();
    let mut z = pre.apply(op, &res);
    let mut p = z.clone();
    let mut rz = dot(&res, &z);
    let mut rel = dot(&res, &res).sqrt() / bnorm;
    let mut best = rel;
    let mut since_best = 0usize;
    for it in 0..max_iter {
        if rel <= tol {
            return Ok(CgOutcome { x, iterations: it, relative_residual: rel });
        }
        let ap = op.apply(&p);
        let pap = dot(&p, &ap);
        if !(pap > 0.0) {
            return Err(Error::NonCoercive { residual: rel });
        }
        let alpha = rz / pap;
        for i in 0..n {
            x[i] += alpha * p[i];
            res[i] -= alpha * ap[i];
        }
        rel = dot(&res, &res).sqrt() / bnorm;
        if rel < 0.5 * best {
            best = rel;
            since_best = 0;
        } else {
            since_best += 1;
            if since_best > 400 {
                return Err(Error::NonCoercive { residual: rel });
            }
        }
        z = pre.apply(op, &res);
        let rz_new = dot(&res, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
    }
    if rel <= tol {
        return Ok(CgOutcome { x, iterations: max_iter, relative_residual: rel });
    }
    Err(Error::LinearSolve { iterations: max_iter, residual: rel })
}

/// Solves `(m + Delta) f = rhs` with `f = 0` on the boundary.
pub fn dirichlet_helmholtz_solve(grid: &Grid, m: &[f64], rhs: &[f64]) -> Result<Vec<f64>> {
    if m.len() != grid.len() || rhs.len() != grid.len() {
        return Err(Error::Shape { expected: grid.len(), got: m.len().min(rhs.len()) });
    }
    if m.iter().any(|&v| v < 0.0) {
        return Err(Error::GridMismatch("Helmholtz coefficient must be nonnegative".into()));
    }
    let op = BlockOperator::scalar(grid, m)?;
    let pre = Preconditioner::default_for(&op)?;
    let mut b: Vec<f64> = rhs.iter().zip(grid.weights()).map(|(f, w)| f * w).collect();
    grid.clamp_boundary(&mut b);
    Ok(pcg(&op, &pre, &b, None, 1e-10, 20 * grid.len().max(100))?.x)
}
