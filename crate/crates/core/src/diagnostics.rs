//! Gauge-invariant measurements on computed pairs: energy, decay, limit at
//! infinity, zeros and distances between solutions.

use std::f64::consts::PI;
use std::io::Write;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pdegrid::{FieldState, Grid};
use crate::solver::Problem;
use crate::target::TorusTarget;

/// Pointwise energy densities: `|F|^2`, `|d_A u|^2` and `|Phi(u)|^2`.
#[derive(Debug, Clone)]
pub struct EnergyDensity {
    pub curvature: Vec<f64>,
    pub covariant: Vec<f64>,
    pub moment: Vec<f64>,
}

impl EnergyDensity {
    pub fn total(&self) -> Vec<f64> {
        self.curvature
            .iter()
            .zip(&self.covariant)
            .zip(&self.moment)
            .map(|((a, b), c)| a + b + c)
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Energy {
    /// `int |F|^2 + |d_A u|^2 + |Phi(u)|^2`.
    pub total: f64,
    pub curvature: f64,
    pub covariant: f64,
    pub moment: f64,
    /// The same integral with the density halved.
    pub total_half_density: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Region {
    All,
    Disk { radius: f64 },
    Annulus { inner: f64, outer: f64 },
}

impl Region {
    pub fn nodes(&self, g: &Grid) -> Vec<usize> {
        let eps = 1e-12;
        (0..g.len())
            .filter(|&k| {
                let r = g.r()[k];
                match *self {
                    Region::All => true,
                    Region::Disk { radius } => r <= radius + eps,
                    Region::Annulus { inner, outer } => r > inner + eps && r <= outer + eps,
                }
            })
            .collect()
    }
}

/// Derivatives `(d_r, d_theta)` of `log u` at a polar node from logarithms of
/// neighbour ratios; `None` when the stencil meets a zero or a fast phase change.
fn log_derivatives(g: &Grid, u: &[Complex64], i: usize, j: usize) -> Option<(Complex64, Complex64)> {
    let radii = g.ring_radii()?;
    let nr = radii.len() - 1;
    let nt = g.ntheta()?;
    let h = g.spacing();
    let dtheta = g.geometry().angular_period() / nt as f64;
    let u0 = u[g.ring_node(i, j)];
    if u0.norm() == 0.0 {
        return None;
    }
    let ratio = |k: usize| -> Option<Complex64> {
        let q = u[k] / u0;
        let l = q.ln();
        (q.norm() > 0.25 && q.norm() < 4.0 && l.im.abs() < PI / 2.0).then_some(l)
    };
    let dr = if i == 0 && !g.has_center() {
        let (a, b) = (ratio(g.ring_node(i + 1, j))?, ratio(g.ring_node(i + 2, j))?);
        (4.0 * a - b) / (2.0 * h)
    } else if i == nr {
        let (a, b) = (ratio(g.ring_node(i - 1, j))?, ratio(g.ring_node(i - 2, j))?);
        (-4.0 * a + b) / (-2.0 * h)
    } else {
        (ratio(g.ring_node(i + 1, j))? - ratio(g.ring_node(i - 1, j))?) / (2.0 * h)
    };
    let dt = (ratio(g.ring_node(i, j + 1))? - ratio(g.ring_node(i, j + nt - 1))?) / (2.0 * dtheta);
    Some((dr, dt))
}

/// Pointwise densities of the transformed pair `(a - *d xi, e^{<mu, xi>} u)`.
pub fn energy_density(state: &FieldState, target: &TorusTarget) -> Result<EnergyDensity> {
    state.check_target(target)?;
    let g = &state.grid;
    let (r, k) = (state.rank, state.dim);
    let n = g.len();
    let f = state.curvature();
    let curvature: Vec<f64> = (0..n).map(|a| f[a * r..(a + 1) * r].iter().map(|v| v * v).sum()).collect();
    let phi = state.moment(target);
    let moment: Vec<f64> = (0..n).map(|a| phi[a * r..(a + 1) * r].iter().map(|v| v * v).sum()).collect();
    let u = state.u_xi(target);
    let (ax, ay) = state.connection_xi();
    let mut covariant = vec![0.0; n];
    for j in 0..k {
        let uj: Vec<Complex64> = (0..n).map(|a| u[a * k + j]).collect();
        let pair = |v: &[f64], a: usize| target.pair(j, &v[a * r..(a + 1) * r]);
        let re: Vec<f64> = uj.iter().map(|v| v.re).collect();
        let im: Vec<f64> = uj.iter().map(|v| v.im).collect();
        let (gxr, gyr) = g.gradient(&re);
        let (gxi, gyi) = g.gradient(&im);
        for a in 0..n {
            let (bx, by) = (pair(&ax, a), pair(&ay, a));
            let ii = Complex64::i();
            let plain = || {
                let dx = Complex64::new(gxr[a], gxi[a]) - ii * bx * uj[a];
                let dy = Complex64::new(gyr[a], gyi[a]) - ii * by * uj[a];
                dx.norm_sqr() + dy.norm_sqr()
            };
            let value = if g.is_polar() && !(g.has_center() && a == 0) {
                let nt = g.ntheta().unwrap();
                let (ring, col) = if g.has_center() { ((a - 1) / nt + 1, (a - 1) % nt) } else { (a / nt, a % nt) };
                match log_derivatives(g, &uj, ring, col) {
                    Some((lr, lt)) => {
                        let (c, s) = (g.theta()[a].cos(), g.theta()[a].sin());
                        let rad = g.r()[a];
                        let br = c * bx + s * by;
                        let bt = rad * (-s * bx + c * by);
                        let dr = uj[a] * (lr - ii * br);
                        let dt = uj[a] * (lt - ii * bt);
                        dr.norm_sqr() + dt.norm_sqr() / (rad * rad)
                    }
                    None => plain(),
                }
            } else {
                plain()
            };
            covariant[a] += value;
        }
    }
    Ok(EnergyDensity { curvature, covariant, moment })
}

pub fn energy(state: &FieldState, target: &TorusTarget, region: &Region) -> Result<Energy> {
    let d = energy_density(state, target)?;
    let g = &state.grid;
    let nodes = region.nodes(g);
    let curvature = g.integrate_over(&d.curvature, &nodes);
    let covariant = g.integrate_over(&d.covariant, &nodes);
    let moment = g.integrate_over(&d.moment, &nodes);
    let total = curvature + covariant + moment;
    Ok(Energy { total, curvature, covariant, moment, total_half_density: 0.5 * total })
}

/// Maximum and mean of the energy density on each ring, `(r, max, mean)`.
pub fn decay_table(state: &FieldState, target: &TorusTarget) -> Result<Vec<(f64, f64, f64)>> {
    let g = &state.grid;
    let radii = g
        .ring_radii()
        .ok_or_else(|| Error::Diagnostic("decay tables need a polar grid".into()))?
        .to_vec();
    let e = energy_density(state, target)?.total();
    Ok(radii
        .iter()
        .enumerate()
        .map(|(i, &r)| {
            let ring = g.ring(i);
            let max = ring.iter().map(|&k| e[k]).fold(0.0, f64::max);
            let mean = ring.iter().map(|&k| e[k]).sum::<f64>() / ring.len() as f64;
            (r, max, mean)
        })
        .collect())
}

pub fn write_decay_csv<W: Write>(table: &[(f64, f64, f64)], w: W) -> Result<()> {
    let mut wr = csv::Writer::from_writer(w);
    wr.write_record(["r", "max_density", "mean_density"])?;
    for (r, m, a) in table {
        wr.write_record([format!("{r:e}"), format!("{m:e}"), format!("{a:e}")])?;
    }
    wr.flush()?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecayFit {
    pub window: (f64, f64),
    pub samples: usize,
    /// Least-squares slope of `log max_theta e` against `log r`; absent when the
    /// density vanishes on the window.
    pub slope: Option<f64>,
    pub intercept: Option<f64>,
    pub r_squared: Option<f64>,
    pub identically_zero: bool,
    /// `-(2 + 2/n) + 1/2`.
    pub bound: f64,
    pub within_bound: bool,
}

/// Least-squares fit `y = a + b x`; returns `(a, b, R^2)`.
pub fn linear_fit(x: &[f64], y: &[f64]) -> (f64, f64, f64) {
    let n = x.len() as f64;
    let (mx, my) = (x.iter().sum::<f64>() / n, y.iter().sum::<f64>() / n);
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    let syy: f64 = y.iter().map(|b| (b - my).powi(2)).sum();
    let b = sxy / sxx;
    let r2 = if syy == 0.0 { 1.0 } else { sxy * sxy / (sxx * syy) };
    (my - b * mx, b, r2)
}

/// Power-law fit of the energy density over `window`, checked against the
/// one-sided bound `-(2 + 2/n) + 1/2`.
pub fn decay_fit(state: &FieldState, target: &TorusTarget, window: (f64, f64), n: u32) -> Result<DecayFit> {
    let g = &state.grid;
    let (lo, hi) = window;
    if !(lo > 0.0 && hi > lo) || hi > g.geometry().outer_radius() + 1e-9 || lo < g.geometry().inner_radius() - 1e-9 {
        return Err(Error::Diagnostic(format!("decay window [{lo}, {hi}] is not inside the grid")));
    }
    let rows: Vec<(f64, f64)> = decay_table(state, target)?
        .into_iter()
        .filter(|(r, _, _)| *r >= lo - 1e-9 && *r <= hi + 1e-9)
        .map(|(r, m, _)| (r, m))
        .collect();
    if rows.len() < 5 {
        return Err(Error::Diagnostic(format!("only {} radial samples in the decay window", rows.len())));
    }
    let bound = -(2.0 + 2.0 / n.max(1) as f64) + 0.5;
    if rows.iter().all(|(_, m)| *m < 1e-12) {
        return Ok(DecayFit {
            window,
            samples: rows.len(),
            slope: None,
            intercept: None,
            r_squared: None,
            identically_zero: true,
            bound,
            within_bound: true,
        });
    }
    let (x, y): (Vec<f64>, Vec<f64>) = rows
        .iter()
        .filter(|(_, m)| *m > 0.0)
        .map(|(r, m)| (r.ln(), m.ln()))
        .unzip();
    if x.len() < 5 {
        return Err(Error::Diagnostic("too few positive density samples".into()));
    }
    let (a, b, r2) = linear_fit(&x, &y);
    Ok(DecayFit {
        window,
        samples: rows.len(),
        slope: Some(b),
        intercept: Some(a),
        r_squared: Some(r2),
        identically_zero: false,
        bound,
        within_bound: b <= bound,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LimitReport {
    /// Ring average of the angular connection component.
    pub lambda: Vec<f64>,
    /// Estimated limit `x_0` (as `[re, im]` pairs).
    pub x0: Vec<[f64; 2]>,
    pub moment_norm: f64,
    /// `(r, max_theta |e^{-i<mu,lambda> theta} u - x_0|)` on three rings ending at the sample ring.
    pub ring_distances: Vec<(f64, f64)>,
    pub sample_radius: f64,
    /// `max |a_theta - lambda|` over rings between half the sample radius and the sample radius.
    pub connection_defect: f64,
    /// Fitted power of the connection defect against `r`.
    pub connection_decay_power: Option<f64>,
}

fn nearest_ring(g: &Grid, r: f64) -> usize {
    let radii = g.ring_radii().unwrap();
    (0..radii.len())
        .min_by(|&a, &b| (radii[a] - r).abs().total_cmp(&(radii[b] - r).abs()))
        .unwrap()
}

/// Twisted limit `x_0 = lim e^{-i<mu, lambda> theta} u(r e^{i theta})`, sampled
/// on the ring nearest `sample_radius` (half the outer radius by default).
pub fn limit_at_infinity(state: &FieldState, target: &TorusTarget, sample_radius: Option<f64>) -> Result<LimitReport> {
    state.check_target(target)?;
    let g = &state.grid;
    let radii = g
        .ring_radii()
        .ok_or_else(|| Error::Diagnostic("limits need a polar grid".into()))?
        .to_vec();
    let (r, k) = (state.rank, state.dim);
    let rs = sample_radius.unwrap_or(0.5 * g.geometry().outer_radius());
    let top = nearest_ring(g, rs);
    if top < 4 {
        return Err(Error::Diagnostic("sample ring too close to the center".into()));
    }
    let (ax, ay) = state.connection_xi();
    let a_theta = |node: usize, c: usize| {
        let (cs, sn) = (g.theta()[node].cos(), g.theta()[node].sin());
        g.r()[node] * (-sn * ax[node * r + c] + cs * ay[node * r + c])
    };
    let ring_mean = |i: usize| -> Vec<f64> {
        let ring = g.ring(i);
        (0..r).map(|c| ring.iter().map(|&n| a_theta(n, c)).sum::<f64>() / ring.len() as f64).collect()
    };
    let lambda = ring_mean(top);
    let u = state.u_xi(target);
    let twisted = |node: usize, j: usize| {
        let phase = target.pair(j, &lambda) * g.theta()[node];
        u[node * k + j] * Complex64::from_polar(1.0, -phase)
    };
    let ring = g.ring(top);
    let x0: Vec<Complex64> = (0..k)
        .map(|j| ring.iter().map(|&n| twisted(n, j)).sum::<Complex64>() / ring.len() as f64)
        .collect();
    let distance = |i: usize| -> f64 {
        g.ring(i)
            .iter()
            .map(|&n| (0..k).map(|j| (twisted(n, j) - x0[j]).norm_sqr()).sum::<f64>().sqrt())
            .fold(0.0, f64::max)
    };
    let picks = [top / 2, (3 * top) / 4, top];
    let ring_distances: Vec<(f64, f64)> = picks.iter().map(|&i| (radii[i], distance(i))).collect();
    let scale = x0.iter().map(|v| v.norm()).fold(1.0, f64::max);
    if ring_distances.windows(2).any(|w| w[1].1 > w[0].1 + 1e-9 * scale) {
        return Err(Error::Diagnostic(format!("limit distances are not decreasing: {ring_distances:?}")));
    }
    let moment_norm = target.moment_map(&x0).iter().map(|v| v * v).sum::<f64>().sqrt();
    let mut defects = Vec::new();
    for i in top / 2..=(3 * top) / 4 {
        let d = g
            .ring(i)
            .iter()
            .map(|&n| (0..r).map(|c| (a_theta(n, c) - lambda[c]).powi(2)).sum::<f64>().sqrt())
            .fold(0.0, f64::max);
        defects.push((radii[i], d));
    }
    let connection_defect = defects.iter().map(|d| d.1).fold(0.0, f64::max);
    let positive: Vec<(f64, f64)> = defects.iter().filter(|d| d.1 > 1e-14).map(|d| (d.0.ln(), d.1.ln())).collect();
    let connection_decay_power = (positive.len() >= 3).then(|| {
        let (x, y): (Vec<f64>, Vec<f64>) = positive.into_iter().unzip();
        linear_fit(&x, &y).1
    });
    Ok(LimitReport {
        lambda,
        x0: x0.iter().map(|v| [v.re, v.im]).collect(),
        moment_norm,
        ring_distances,
        sample_radius: radii[top],
        connection_defect,
        connection_decay_power,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Zero {
    pub x: f64,
    pub y: f64,
    /// Winding number of the phase around the zero.
    pub winding: i64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ZeroReport {
    pub zeros: Vec<Zero>,
    pub total_winding: i64,
    pub expected: Option<i64>,
    pub matches_expected: bool,
}

fn winding(loop_values: &[Complex64]) -> f64 {
    let n = loop_values.len();
    (0..n).map(|a| (loop_values[(a + 1) % n] / loop_values[a]).arg()).sum::<f64>() / (2.0 * PI)
}

/// Root of the least-squares affine fit `u ~ a + b x + c y` through the corners,
/// kept only when it falls near them.
fn affine_root(pts: &[(f64, f64)], vals: &[Complex64]) -> (f64, f64) {
    let n = pts.len() as f64;
    let (cx, cy) = (pts.iter().map(|p| p.0).sum::<f64>() / n, pts.iter().map(|p| p.1).sum::<f64>() / n);
    let mut m = nalgebra::DMatrix::<f64>::zeros(pts.len(), 3);
    for (row, p) in pts.iter().enumerate() {
        m[(row, 0)] = 1.0;
        m[(row, 1)] = p.0 - cx;
        m[(row, 2)] = p.1 - cy;
    }
    let svd = m.svd(true, true);
    let solve = |rhs: Vec<f64>| svd.solve(&nalgebra::DVector::from_vec(rhs), 1e-14).ok();
    let re = solve(vals.iter().map(|v| v.re).collect());
    let im = solve(vals.iter().map(|v| v.im).collect());
    let (Some(re), Some(im)) = (re, im) else { return (cx, cy) };
    // a + b dx + c dy = 0 with complex a, b, c
    let (br, cr, bi, ci) = (re[1], re[2], im[1], im[2]);
    let det = br * ci - cr * bi;
    if det.abs() < 1e-300 {
        return (cx, cy);
    }
    let dx = (-re[0] * ci + cr * im[0]) / det;
    let dy = (-br * im[0] + bi * re[0]) / det;
    let size = pts.iter().map(|p| (p.0 - cx).hypot(p.1 - cy)).fold(0.0, f64::max);
    if dx.hypot(dy) > 2.0 * size {
        return (cx, cy);
    }
    (cx + dx, cy + dy)
}

/// Zeros of component `j` of `u_xi` by plaquette winding numbers on a polar grid.
pub fn recover_zeros(state: &FieldState, target: &TorusTarget, j: usize, expected: Option<i64>) -> Result<ZeroReport> {
    state.check_target(target)?;
    let g = &state.grid;
    if j >= state.dim {
        return Err(Error::Shape { expected: state.dim, got: j });
    }
    let radii = g
        .ring_radii()
        .ok_or_else(|| Error::Diagnostic("zero recovery needs a polar grid".into()))?
        .to_vec();
    if g.geometry().angular_period() > 2.0 * PI + 1e-12 {
        return Err(Error::Diagnostic("zero recovery runs on the base disk, not a cover".into()));
    }
    let nt = g.ntheta().unwrap();
    let k = state.dim;
    let u: Vec<Complex64> = state.u_xi(target).iter().skip(j).step_by(k).copied().collect();
    let scale = u.iter().map(|v| v.norm()).fold(0.0, f64::max);
    let vanish = |node: usize| u[node].norm() <= 1e-12 * scale.max(1e-300);
    let pos = |node: usize| (g.x()[node], g.y()[node]);
    let nr = radii.len() - 1;
    let mut zeros = Vec::new();
    // nodes where u vanishes: winding along the surrounding ring of nodes
    for node in 0..g.len() {
        if !vanish(node) || g.is_boundary(node) {
            continue;
        }
        let around: Vec<usize> = if g.has_center() && node == 0 {
            g.ring(1)
        } else {
            let (i, c) = if g.has_center() { ((node - 1) / nt + 1, (node - 1) % nt) } else { (node / nt, node % nt) };
            let lo = i - 1;
            let mut l = Vec::new();
            for s in [c + nt - 1, c, c + 1] {
                l.push(g.ring_node(lo, s));
            }
            l.push(g.ring_node(i, c + 1));
            for s in [c + 1, c, c + nt - 1] {
                l.push(g.ring_node(i + 1, s));
            }
            l.push(g.ring_node(i, c + nt - 1));
            l.dedup();
            // counterclockwise: outward is +r, increasing column is +theta
            l.reverse();
            l
        };
        let vals: Vec<Complex64> = around.iter().map(|&n| u[n]).collect();
        if vals.iter().any(|v| v.norm() == 0.0) {
            continue;
        }
        let w = winding(&vals).round() as i64;
        if w != 0 {
            let (x, y) = pos(node);
            zeros.push(Zero { x, y, winding: w });
        }
    }
    // plaquettes with nonvanishing corners
    let mut cells: Vec<Vec<usize>> = Vec::new();
    let first = usize::from(g.has_center());
    if g.has_center() {
        for c in 0..nt {
            cells.push(vec![0, g.ring_node(1, c), g.ring_node(1, c + 1)]);
        }
    }
    for i in first..nr {
        for c in 0..nt {
            cells.push(vec![g.ring_node(i, c), g.ring_node(i + 1, c), g.ring_node(i + 1, c + 1), g.ring_node(i, c + 1)]);
        }
    }
    for cell in cells {
        if cell.iter().any(|&n| vanish(n)) {
            continue;
        }
        let vals: Vec<Complex64> = cell.iter().map(|&n| u[n]).collect();
        let w = winding(&vals).round() as i64;
        if w != 0 {
            let pts: Vec<(f64, f64)> = cell.iter().map(|&n| pos(n)).collect();
            let (x, y) = affine_root(&pts, &vals);
            zeros.push(Zero { x, y, winding: w });
        }
    }
    let total_winding = zeros.iter().map(|z| z.winding).sum();
    Ok(ZeroReport { zeros, total_winding, expected, matches_expected: expected.is_none_or(|d| d == total_winding) })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InvariantDistance {
    pub abs_u_c0: f64,
    pub abs_u_l2: f64,
    pub curvature_c0: f64,
    pub curvature_l2: f64,
}

impl InvariantDistance {
    pub fn c0(&self) -> f64 {
        self.abs_u_c0.max(self.curvature_c0)
    }
}

/// Distances between `(|u_j|)_j` and between `*F` of two pairs on the same grid.
pub fn gauge_invariant_compare(a: &FieldState, b: &FieldState, target: &TorusTarget) -> Result<InvariantDistance> {
    a.check_target(target)?;
    b.check_target(target)?;
    if !a.grid.compatible(&b.grid) {
        return Err(Error::GridMismatch("states live on different grids".into()));
    }
    let g = &a.grid;
    let w = g.weights();
    let (k, r) = (a.dim, a.rank);
    let (ua, ub) = (a.u_xi(target), b.u_xi(target));
    let (fa, fb) = (a.curvature(), b.curvature());
    let mut out = InvariantDistance { abs_u_c0: 0.0, abs_u_l2: 0.0, curvature_c0: 0.0, curvature_l2: 0.0 };
    for node in 0..g.len() {
        for j in 0..k {
            let d = (ua[node * k + j].norm() - ub[node * k + j].norm()).abs();
            out.abs_u_c0 = out.abs_u_c0.max(d);
            out.abs_u_l2 += w[node] * d * d;
        }
        for c in 0..r {
            let d = (fa[node * r + c] - fb[node * r + c]).abs();
            out.curvature_c0 = out.curvature_c0.max(d);
            out.curvature_l2 += w[node] * d * d;
        }
    }
    out.abs_u_l2 = out.abs_u_l2.sqrt();
    out.curvature_l2 = out.curvature_l2.sqrt();
    Ok(out)
}

/// Interior `L2` norm of `dbar_A u = ((D_x + i D_y) u) / 2` for the transformed
/// pair, with `D = d - i <mu_j, a>`.
pub fn dbar_defect(state: &FieldState, target: &TorusTarget) -> Result<f64> {
    state.check_target(target)?;
    let g = &state.grid;
    let (r, k) = (state.rank, state.dim);
    let u = state.u_xi(target);
    let (ax, ay) = state.connection_xi();
    let w = g.weights();
    let mut total = 0.0;
    for j in 0..k {
        let re: Vec<f64> = (0..g.len()).map(|a| u[a * k + j].re).collect();
        let im: Vec<f64> = (0..g.len()).map(|a| u[a * k + j].im).collect();
        let (gxr, gyr) = g.gradient(&re);
        let (gxi, gyi) = g.gradient(&im);
        for a in (0..g.len()).filter(|&a| !g.is_boundary(a)) {
            let ii = Complex64::i();
            let bx = target.pair(j, &ax[a * r..(a + 1) * r]);
            let by = target.pair(j, &ay[a * r..(a + 1) * r]);
            let dx = Complex64::new(gxr[a], gxi[a]) - ii * bx * u[a * k + j];
            let dy = Complex64::new(gyr[a], gyi[a]) - ii * by * u[a * k + j];
            total += w[a] * (0.5 * (dx + ii * dy)).norm_sqr();
        }
    }
    Ok(total.sqrt())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MaximumPrinciple {
    pub interior_max: f64,
    pub boundary_max: f64,
    pub holds: bool,
}

/// For a flat connection and holomorphic `u`, each `|u_j|` peaks on the boundary.
pub fn maximum_principle(state: &FieldState, target: &TorusTarget) -> Result<Vec<MaximumPrinciple>> {
    state.check_target(target)?;
    let g = &state.grid;
    let k = state.dim;
    let u = state.u_xi(target);
    Ok((0..k)
        .map(|j| {
            let (mut inside, mut edge): (f64, f64) = (0.0, 0.0);
            for node in 0..g.len() {
                let v = u[node * k + j].norm();
                if g.is_boundary(node) {
                    edge = edge.max(v);
                } else {
                    inside = inside.max(v);
                }
            }
            MaximumPrinciple { interior_max: inside, boundary_max: edge, holds: inside <= edge * (1.0 + 1e-12) }
        })
        .collect())
}

/// Options for [`solve_report`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportOptions {
    /// Energy region; half the outer radius by default.
    pub energy_radius: Option<f64>,
    pub decay_window: Option<(f64, f64)>,
    /// Orbifold order entering the decay bound.
    pub orbifold_order: u32,
    pub limit_radius: Option<f64>,
    pub expected_degree: Option<i64>,
}

impl Default for ReportOptions {
    fn default() -> Self {
        Self { energy_radius: None, decay_window: None, orbifold_order: 1, limit_radius: None, expected_degree: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveReport {
    pub total_energy: f64,
    /// `(int |F|^2, int |d_A u|^2, int |Phi(u)|^2)`.
    pub energy_by_term: (f64, f64, f64),
    pub total_energy_half_density: f64,
    pub energy_radius: f64,
    pub decay: Option<DecayFit>,
    pub decay_error: Option<String>,
    pub limit: Option<LimitReport>,
    pub limit_error: Option<String>,
    pub zeros: Option<ZeroReport>,
    pub residual_final: f64,
}

/// Collects the diagnostics of a solved pair; failures of individual
/// measurements are recorded rather than propagated.
pub fn solve_report(state: &FieldState, target: &TorusTarget, opts: &ReportOptions) -> Result<SolveReport> {
    let g = &state.grid;
    let outer = g.geometry().outer_radius();
    let energy_radius = opts.energy_radius.unwrap_or(0.5 * outer);
    let e = energy(state, target, &Region::Disk { radius: energy_radius })?;
    let window = opts.decay_window.unwrap_or((outer / 4.0, outer / 2.0));
    let (decay, decay_error) = match decay_fit(state, target, window, opts.orbifold_order) {
        Ok(d) => (Some(d), None),
        Err(err) => (None, Some(err.to_string())),
    };
    let (limit, limit_error) = match limit_at_infinity(state, target, opts.limit_radius) {
        Ok(l) => (Some(l), None),
        Err(err) => (None, Some(err.to_string())),
    };
    let zeros = if target.dim() == 1 && g.is_polar() && g.geometry().angular_period() <= 2.0 * PI + 1e-12 {
        Some(recover_zeros(state, target, 0, opts.expected_degree)?)
    } else {
        None
    };
    let p = Problem::new(state, target)?;
    let residual_final = p.norm(&p.interior_residual(&state.xi)?);
    Ok(SolveReport {
        total_energy: e.total,
        energy_by_term: (e.curvature, e.covariant, e.moment),
        total_energy_half_density: e.total_half_density,
        energy_radius,
        decay,
        decay_error,
        limit,
        limit_error,
        zeros,
        residual_final,
    })
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use super::*;
    use crate::solver::{newton_solve, radial_oracle, SolveConfig};

    fn jt() -> TorusTarget {
        TorusTarget::circle(&[1], 0.5).unwrap()
    }

    fn solved(radius: f64, nr: usize, nt: usize, f: impl Fn(Complex64) -> Complex64) -> FieldState {
        let g = Arc::new(Grid::disk(radius, nr, nt).unwrap());
        let s = FieldState::from_section(g, 1, |x, y| vec![f(Complex64::new(x, y))]).unwrap();
        newton_solve(&s, &jt(), &SolveConfig::default()).unwrap().state
    }

    fn unit(radius: f64) -> FieldState {
        let g = Arc::new(Grid::disk(radius, 32, 16).unwrap());
        FieldState::from_section(g, 1, |_, _| vec![Complex64::new(1.0, 0.0)]).unwrap()
    }

    #[test]
    fn constant_vortex_has_no_energy_zeros_or_decay() {
        let t = jt();
        let s = unit(8.0);
        let e = energy(&s, &t, &Region::All).unwrap();
        assert!(e.total < 1e-24, "{e:?}");
        let fit = decay_fit(&s, &t, (2.0, 4.0), 1).unwrap();
        assert!(fit.identically_zero);
        let z = recover_zeros(&s, &t, 0, Some(0)).unwrap();
        assert!(z.zeros.is_empty() && z.matches_expected);
        let l = limit_at_infinity(&s, &t, None).unwrap();
        assert_eq!(l.x0, vec![[1.0, 0.0]]);
        assert!(l.moment_norm < 1e-15);
    }

    #[test]
    fn energy_matches_the_radial_profile() {
        let t = jt();
        let s = solved(20.0, 256, 32, |z| z);
        let e = energy(&s, &t, &Region::Disk { radius: 10.0 }).unwrap();
        let oracle = radial_oracle(1, 0.5, 1).unwrap().energy(10.0);
        assert!((e.total / oracle - 1.0).abs() < 0.01, "{} vs {}", e.total, oracle);
        assert!((e.total - (e.curvature + e.covariant + e.moment)).abs() < 1e-10 * e.total);
        // additivity over a partition
        let inner = energy(&s, &t, &Region::Disk { radius: 4.0 }).unwrap();
        let outer = energy(&s, &t, &Region::Annulus { inner: 4.0, outer: 10.0 }).unwrap();
        assert!((inner.total + outer.total - e.total).abs() < 1e-12 * e.total);
    }

    #[test]
    fn vortex_decays_and_has_unit_limit() {
        let t = jt();
        let s = solved(32.0, 256, 16, |z| z);
        let fit = decay_fit(&s, &t, (8.0, 16.0), 1).unwrap();
        assert!(fit.slope.unwrap() <= -3.5, "{fit:?}");
        let l = limit_at_infinity(&s, &t, None).unwrap();
        let x0 = Complex64::new(l.x0[0][0], l.x0[0][1]);
        assert!((x0.norm() - 1.0).abs() < 1e-3, "{l:?}");
        assert!(l.moment_norm < 1e-3);
        assert!((l.lambda[0] - 1.0).abs() < 1e-3);
        assert!(l.connection_decay_power.unwrap() <= -0.5);
    }

    #[test]
    fn unsolved_datum_fails_the_decay_bound() {
        let t = jt();
        let g = Arc::new(Grid::disk(16.0, 64, 16).unwrap());
        let s = FieldState::from_section(g, 1, |x, y| vec![Complex64::new(x, y)]).unwrap();
        let fit = decay_fit(&s, &t, (4.0, 8.0), 1).unwrap();
        assert!(fit.slope.unwrap() > 0.0 && !fit.within_bound);
        assert!(decay_fit(&s, &t, (4.0, 20.0), 1).is_err());
    }

    #[test]
    fn zeros_of_solved_vortices() {
        let t = jt();
        let s = solved(6.0, 96, 64, |z| z);
        let z = recover_zeros(&s, &t, 0, Some(1)).unwrap();
        assert_eq!(z.zeros.len(), 1);
        assert!(z.zeros[0].x.hypot(z.zeros[0].y) < 1e-12);
        let s = solved(6.0, 96, 128, |z| z * (z - 1.0));
        let z = recover_zeros(&s, &t, 0, Some(2)).unwrap();
        assert!(z.matches_expected, "{z:?}");
        let cell = 6.0 / 96.0 + 2.0 * PI / 128.0;
        for target_zero in [(0.0, 0.0), (1.0, 0.0)] {
            assert!(z.zeros.iter().any(|q| (q.x - target_zero.0).hypot(q.y - target_zero.1) < cell), "{z:?}");
        }
    }

    #[test]
    fn unitary_gauge_leaves_invariants_fixed() {
        let t = jt();
        let s = solved(6.0, 48, 32, |z| z + 0.5);
        assert_eq!(gauge_invariant_compare(&s, &s, &t).unwrap().c0(), 0.0);
        let g = s.grid.clone();
        let phase = g.sample(|x, y| (0.7 * x).sin() + x * y * 0.3);
        let (px, py) = g.gradient(&phase);
        let mut moved = s.clone();
        for k in 0..g.len() {
            moved.u[k] *= Complex64::from_polar(1.0, phase[k]);
            moved.ax[k] += px[k];
            moved.ay[k] += py[k];
        }
        let d = gauge_invariant_compare(&s, &moved, &t).unwrap();
        assert!(d.c0() < 1e-10, "{d:?}");
        let two = solved(6.0, 48, 32, |z| z * z);
        assert!(gauge_invariant_compare(&s, &two, &t).unwrap().c0() > 0.1);
    }

    #[test]
    fn holomorphic_sections_peak_on_the_boundary() {
        let t = jt();
        let g = Arc::new(Grid::disk(3.0, 24, 32).unwrap());
        let s = FieldState::from_section(g, 1, |x, y| {
            let z = Complex64::new(x, y);
            vec![z * z * z - z + 2.0]
        })
        .unwrap();
        assert!(maximum_principle(&s, &t).unwrap().iter().all(|m| m.holds));
    }

    #[test]
    fn complex_gauge_keeps_sections_holomorphic() {
        let t = TorusTarget::new(vec![vec![1, 0], vec![1, 2]], vec![1.0, 1.0]).unwrap();
        let defect = |n: usize| {
            let g = Arc::new(Grid::disk(2.0, n, 2 * n).unwrap());
            let mut s = FieldState::from_section(g.clone(), 2, |x, y| {
                let z = Complex64::new(x, y);
                vec![z * z + 1.0, (0.5 * z).exp()]
            })
            .unwrap();
            let a = g.sample(|x, y| (x - 0.3 * y).sin() * (4.0 - x * x - y * y));
            let b = g.sample(|x, y| (0.8 * x * y).cos() - 1.0);
            for node in 0..g.len() {
                s.xi[2 * node] = a[node];
                s.xi[2 * node + 1] = b[node];
            }
            dbar_defect(&s, &t).unwrap()
        };
        let (coarse, fine) = (defect(32), defect(64));
        assert!(coarse / fine > 3.5, "{coarse} {fine}");
    }
}
