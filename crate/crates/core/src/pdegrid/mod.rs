//! Grids on disks, annuli and n-fold covers, with a finite-volume Laplacian
//! `Delta = -(d_xx + d_yy)`, nodal finite differences and quadrature norms.

mod field;
mod linalg;

pub use field::{FieldState, FieldHeader};
pub use linalg::{dirichlet_helmholtz_solve, pcg, BlockOperator, CgOutcome, Preconditioner};

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Geometry {
    Disk { radius: f64 },
    Annulus { inner: f64, outer: f64 },
    /// Isometric n-fold cover of an annulus: angle runs over `[0, 2 pi n)`.
    Cover { n: u32, inner: f64, outer: f64 },
}

impl Geometry {
    pub fn outer_radius(&self) -> f64 {
        match *self {
            Geometry::Disk { radius } => radius,
            Geometry::Annulus { outer, .. } | Geometry::Cover { outer, .. } => outer,
        }
    }

    pub fn inner_radius(&self) -> f64 {
        match *self {
            Geometry::Disk { .. } => 0.0,
            Geometry::Annulus { inner, .. } | Geometry::Cover { inner, .. } => inner,
        }
    }

    pub fn angular_period(&self) -> f64 {
        match *self {
            Geometry::Cover { n, .. } => 2.0 * PI * n as f64,
            _ => 2.0 * PI,
        }
    }

    pub fn area(&self) -> f64 {
        let (a, b) = (self.inner_radius(), self.outer_radius());
        0.5 * self.angular_period() * (b * b - a * a)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Layout {
    /// `nr` radial intervals and `ntheta` angular nodes per ring.
    Polar { nr: usize, ntheta: usize },
    /// `n x n` square lattice on `[-R, R]^2` clipped to the disk.
    Cartesian { n: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub geometry: Geometry,
    pub layout: Layout,
    /// Conformal factor `lambda^2` per node; `None` is Euclidean.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub metric: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NormKind {
    L2,
    H1,
    H2,
    C0,
    Lp(u32),
}

#[derive(Debug, Clone)]
struct PolarInfo {
    radii: Vec<f64>,
    has_center: bool,
    ntheta: usize,
    h: f64,
    dtheta: f64,
}

#[derive(Debug, Clone)]
struct CartesianInfo {
    n: usize,
    h: f64,
    /// lattice slot -> node index
    slot: Vec<Option<usize>>,
    /// node -> (col, row)
    pos: Vec<(usize, usize)>,
}

#[derive(Debug, Clone)]
enum Topology {
    Polar(PolarInfo),
    Cartesian(CartesianInfo),
}

#[derive(Debug, Clone)]
pub struct Grid {
    spec: GridSpec,
    x: Vec<f64>,
    y: Vec<f64>,
    r: Vec<f64>,
    theta: Vec<f64>,
    boundary: Vec<bool>,
    area: Vec<f64>,
    weight: Vec<f64>,
    /// Per-node neighbor lists with conductances.
    adjacency: Vec<Vec<(usize, f64)>>,
    topo: Topology,
}

impl Grid {
    pub fn new(spec: GridSpec) -> Result<Self> {
        let g = spec.geometry;
        let (r0, r1) = (g.inner_radius(), g.outer_radius());
        if !(r1 > 0.0 && r1.is_finite()) || r0 < 0.0 || r0 >= r1 {
            return Err(Error::GridMismatch(format!("bad radii [{r0}, {r1}]")));
        }
        if !matches!(g, Geometry::Disk { .. }) && r0 <= 0.0 {
            return Err(Error::GridMismatch("annulus inner radius must be positive".into()));
        }
        let mut grid = match spec.layout {
            Layout::Polar { nr, ntheta } => {
                if nr < 2 || ntheta < 4 {
                    return Err(Error::GridMismatch("polar grid needs nr >= 2 and ntheta >= 4".into()));
                }
                if let Geometry::Cover { n, .. } = g {
                    if n == 0 || ntheta % n as usize != 0 {
                        return Err(Error::GridMismatch(format!(
                            "ntheta = {ntheta} must be a positive multiple of n = {n}"
                        )));
                    }
                }
                Self::polar(spec.clone(), nr, ntheta)
            }
            Layout::Cartesian { n } => {
                if !matches!(g, Geometry::Disk { .. }) {
                    return Err(Error::GridMismatch("cartesian layout supports disks only".into()));
                }
                if n < 5 {
                    return Err(Error::GridMismatch("cartesian grid needs n >= 5".into()));
                }
                Self::cartesian(spec.clone(), n)
            }
        };
        if let Some(m) = &spec.metric {
            if m.len() != grid.len() {
                return Err(Error::Shape { expected: grid.len(), got: m.len() });
            }
            if m.iter().any(|&v| !(v > 0.0)) {
                return Err(Error::GridMismatch("metric weights must be positive".into()));
            }
            grid.weight = grid.area.iter().zip(m).map(|(a, l)| a * l).collect();
        }
        Ok(grid)
    }

    pub fn disk(radius: f64, nr: usize, ntheta: usize) -> Result<Self> {
        Self::new(GridSpec {
            geometry: Geometry::Disk { radius },
            layout: Layout::Polar { nr, ntheta },
            metric: None,
        })
    }

    pub fn annulus(inner: f64, outer: f64, nr: usize, ntheta: usize) -> Result<Self> {
        Self::new(GridSpec {
            geometry: Geometry::Annulus { inner, outer },
            layout: Layout::Polar { nr, ntheta },
            metric: None,
        })
    }

    pub fn cover(n: u32, inner: f64, outer: f64, nr: usize, ntheta: usize) -> Result<Self> {
        Self::new(GridSpec {
            geometry: Geometry::Cover { n, inner, outer },
            layout: Layout::Polar { nr, ntheta },
            metric: None,
        })
    }

    pub fn cartesian_disk(radius: f64, n: usize) -> Result<Self> {
        Self::new(GridSpec {
            geometry: Geometry::Disk { radius },
            layout: Layout::Cartesian { n },
            metric: None,
        })
    }

    /// Same geometry with a conformal factor `lambda^2(x, y)`.
    pub fn with_metric(&self, f: impl Fn(f64, f64) -> f64) -> Result<Self> {
        let metric = (0..self.len()).map(|i| f(self.x[i], self.y[i])).collect();
        Self::new(GridSpec { metric: Some(metric), ..self.spec.clone() })
    }

    fn polar(spec: GridSpec, nr: usize, ntheta: usize) -> Self {
        let g = spec.geometry;
        let (r0, r1) = (g.inner_radius(), g.outer_radius());
        let h = (r1 - r0) / nr as f64;
        let dtheta = g.angular_period() / ntheta as f64;
        let has_center = matches!(g, Geometry::Disk { .. });
        let radii: Vec<f64> = (0..=nr).map(|i| r0 + i as f64 * h).collect();
        let info = PolarInfo { radii: radii.clone(), has_center, ntheta, h, dtheta };
        let count = if has_center { 1 + nr * ntheta } else { (nr + 1) * ntheta };
        let mut grid = Grid {
            spec,
            x: vec![0.0; count],
            y: vec![0.0; count],
            r: vec![0.0; count],
            theta: vec![0.0; count],
            boundary: vec![false; count],
            area: vec![0.0; count],
            weight: vec![0.0; count],
            adjacency: vec![Vec::new(); count],
            topo: Topology::Polar(info),
        };
        let first_ring = usize::from(has_center);
        if has_center {
            grid.area[0] = PI * h * h / 4.0;
        }
        for (i, &ri) in radii.iter().enumerate().skip(first_ring) {
            let inner_edge = i == 0;
            let outer_edge = i == nr;
            let cell = if inner_edge {
                (ri * h / 2.0 + h * h / 8.0) * dtheta
            } else if outer_edge {
                (ri * h / 2.0 - h * h / 8.0) * dtheta
            } else {
                ri * h * dtheta
            };
            for j in 0..ntheta {
                let k = grid.ring_node(i, j);
                let th = j as f64 * dtheta;
                grid.r[k] = ri;
                grid.theta[k] = th;
                grid.x[k] = ri * th.cos();
                grid.y[k] = ri * th.sin();
                grid.area[k] = cell;
                grid.boundary[k] = inner_edge || outer_edge;
            }
        }
        let mut edges: Vec<(usize, usize, f64)> = Vec::new();
        if has_center {
            for j in 0..ntheta {
                edges.push((0, grid.ring_node(1, j), dtheta / 2.0));
            }
        }
        for i in first_ring..nr {
            let c = 0.5 * (radii[i] + radii[i + 1]) * dtheta / h;
            for j in 0..ntheta {
                edges.push((grid.ring_node(i, j), grid.ring_node(i + 1, j), c));
            }
        }
        for (i, &ri) in radii.iter().enumerate().skip(first_ring) {
            let face = if i == 0 || i == nr { h / 2.0 } else { h };
            let c = face / (ri * dtheta);
            for j in 0..ntheta {
                edges.push((grid.ring_node(i, j), grid.ring_node(i, (j + 1) % ntheta), c));
            }
        }
        for (a, b, c) in edges {
            grid.adjacency[a].push((b, c));
            grid.adjacency[b].push((a, c));
        }
        grid.weight = grid.area.clone();
        grid
    }

    fn cartesian(spec: GridSpec, n: usize) -> Self {
        let radius = spec.geometry.outer_radius();
        let h = 2.0 * radius / (n - 1) as f64;
        let mut slot = vec![None; n * n];
        let mut pos = Vec::new();
        let (mut x, mut y) = (Vec::new(), Vec::new());
        for row in 0..n {
            for col in 0..n {
                let px = -radius + col as f64 * h;
                let py = -radius + row as f64 * h;
                if px.hypot(py) <= radius * (1.0 + 1e-12) {
                    slot[row * n + col] = Some(pos.len());
                    pos.push((col, row));
                    x.push(px);
                    y.push(py);
                }
            }
        }
        let count = pos.len();
        let mut adjacency = vec![Vec::new(); count];
        let mut boundary = vec![false; count];
        for (k, &(col, row)) in pos.iter().enumerate() {
            let nbrs = [
                (col + 1 < n).then(|| slot[row * n + col + 1]).flatten(),
                (col > 0).then(|| slot[row * n + col - 1]).flatten(),
                (row + 1 < n).then(|| slot[(row + 1) * n + col]).flatten(),
                (row > 0).then(|| slot[(row - 1) * n + col]).flatten(),
            ];
            boundary[k] = nbrs.iter().any(Option::is_none);
            adjacency[k] = nbrs.iter().flatten().map(|&b| (b, 1.0)).collect();
        }
        let r: Vec<f64> = x.iter().zip(&y).map(|(a, b)| a.hypot(*b)).collect();
        let theta = x.iter().zip(&y).map(|(a, b)| b.atan2(*a).rem_euclid(2.0 * PI)).collect();
        Grid {
            spec,
            x,
            y,
            r,
            theta,
            boundary,
            area: vec![h * h; count],
            weight: vec![h * h; count],
            adjacency,
            topo: Topology::Cartesian(CartesianInfo { n, h, slot, pos }),
        }
    }

    pub fn spec(&self) -> &GridSpec {
        &self.spec
    }

    pub fn geometry(&self) -> Geometry {
        self.spec.geometry
    }

    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }

    pub fn x(&self) -> &[f64] {
        &self.x
    }

    pub fn y(&self) -> &[f64] {
        &self.y
    }

    pub fn r(&self) -> &[f64] {
        &self.r
    }

    pub fn theta(&self) -> &[f64] {
        &self.theta
    }

    pub fn is_boundary(&self, k: usize) -> bool {
        self.boundary[k]
    }

    pub fn boundary(&self) -> &[bool] {
        &self.boundary
    }

    /// Quadrature weights including the metric factor.
    pub fn weights(&self) -> &[f64] {
        &self.weight
    }

    pub fn neighbors(&self, k: usize) -> &[(usize, f64)] {
        &self.adjacency[k]
    }

    pub fn is_polar(&self) -> bool {
        matches!(self.topo, Topology::Polar(_))
    }

    /// Radial spacing (polar) or lattice spacing (cartesian).
    pub fn spacing(&self) -> f64 {
        match &self.topo {
            Topology::Polar(p) => p.h,
            Topology::Cartesian(c) => c.h,
        }
    }

    fn polar_info(&self) -> Option<&PolarInfo> {
        match &self.topo {
            Topology::Polar(p) => Some(p),
            Topology::Cartesian(_) => None,
        }
    }

    /// Ring radii, starting with 0 for a disk's center.
    pub fn ring_radii(&self) -> Option<&[f64]> {
        self.polar_info().map(|p| p.radii.as_slice())
    }

    pub fn ntheta(&self) -> Option<usize> {
        self.polar_info().map(|p| p.ntheta)
    }

    pub fn has_center(&self) -> bool {
        self.polar_info().is_some_and(|p| p.has_center)
    }

    /// Node index of ring `i`, angle `j`; ring 0 of a disk is its center.
    pub fn ring_node(&self, i: usize, j: usize) -> usize {
        let p = self.polar_info().expect("polar grid");
        if p.has_center {
            if i == 0 {
                0
            } else {
                1 + (i - 1) * p.ntheta + j % p.ntheta
            }
        } else {
            i * p.ntheta + j % p.ntheta
        }
    }

    /// Node indices of ring `i` (a single node for a disk's center).
    pub fn ring(&self, i: usize) -> Vec<usize> {
        let p = self.polar_info().expect("polar grid");
        if p.has_center && i == 0 {
            vec![0]
        } else {
            (0..p.ntheta).map(|j| self.ring_node(i, j)).collect()
        }
    }

    pub fn nodes_within(&self, radius: f64) -> Vec<usize> {
        (0..self.len()).filter(|&k| self.r[k] <= radius + 1e-12).collect()
    }

    pub fn interior_nodes(&self) -> Vec<usize> {
        (0..self.len()).filter(|&k| !self.boundary[k]).collect()
    }

    /// `K f` where `K` is the stiffness matrix of the Dirichlet form.
    pub fn stiffness_apply(&self, f: &[f64]) -> Vec<f64> {
        self.adjacency
            .iter()
            .enumerate()
            .map(|(a, nb)| nb.iter().map(|&(b, c)| c * (f[a] - f[b])).sum())
            .collect()
    }

    /// `Delta f = W^{-1} K f` at every node.
    pub fn laplacian(&self, f: &[f64]) -> Vec<f64> {
        self.stiffness_apply(f)
            .iter()
            .zip(&self.weight)
            .map(|(kf, w)| kf / w)
            .collect()
    }

    /// Discrete Dirichlet form `<grad f, grad g>` over edges.
    pub fn dirichlet_form(&self, f: &[f64], g: &[f64]) -> f64 {
        let mut s = 0.0;
        for (a, nb) in self.adjacency.iter().enumerate() {
            for &(b, c) in nb {
                if a < b {
                    s += c * (f[a] - f[b]) * (g[a] - g[b]);
                }
            }
        }
        s
    }

    pub fn integrate(&self, f: &[f64]) -> f64 {
        f.iter().zip(&self.weight).map(|(v, w)| v * w).sum()
    }

    pub fn integrate_over(&self, f: &[f64], nodes: &[usize]) -> f64 {
        nodes.iter().map(|&k| f[k] * self.weight[k]).sum()
    }

    pub fn inner(&self, f: &[f64], g: &[f64]) -> f64 {
        f.iter().zip(g).zip(&self.weight).map(|((a, b), w)| a * b * w).sum()
    }

    /// Norm of a scalar field.
    pub fn norm(&self, f: &[f64], kind: NormKind) -> f64 {
        self.norm_components(&[f], kind)
    }

    /// Norm of a vector field given by its components (pointwise Euclidean).
    pub fn norm_components(&self, comps: &[&[f64]], kind: NormKind) -> f64 {
        let l2sq = |fs: &[&[f64]]| -> f64 {
            fs.iter().map(|f| self.inner(f, f)).sum()
        };
        match kind {
            NormKind::C0 => comps
                .iter()
                .flat_map(|f| f.iter())
                .fold(0.0f64, |m, v| m.max(v.abs())),
            NormKind::L2 => l2sq(comps).sqrt(),
            NormKind::Lp(p) => {
                let p = p as f64;
                (0..self.len())
                    .map(|k| {
                        let v: f64 = comps.iter().map(|f| f[k] * f[k]).sum::<f64>().sqrt();
                        v.powf(p) * self.weight[k]
                    })
                    .sum::<f64>()
                    .powf(1.0 / p)
            }
            NormKind::H1 | NormKind::H2 => {
                let mut total = l2sq(comps);
                let mut derivs: Vec<Vec<f64>> = Vec::new();
                for f in comps {
                    let (gx, gy) = self.gradient(f);
                    derivs.push(gx);
                    derivs.push(gy);
                }
                let refs: Vec<&[f64]> = derivs.iter().map(Vec::as_slice).collect();
                total += l2sq(&refs);
                if kind == NormKind::H2 {
                    let mut second: Vec<Vec<f64>> = Vec::new();
                    for d in &derivs {
                        let (gx, gy) = self.gradient(d);
                        second.push(gx);
                        second.push(gy);
                    }
                    let refs: Vec<&[f64]> = second.iter().map(Vec::as_slice).collect();
                    total += l2sq(&refs);
                }
                total.sqrt()
            }
        }
    }

    /// Radial and angular derivatives `(d_r f, d_theta f)` on a polar grid.
    /// The center node of a disk gets zeros; use [`Grid::gradient`] there.
    pub fn polar_derivatives(&self, f: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let p = self.polar_info().expect("polar grid");
        let nr = p.radii.len() - 1;
        let mut dr = vec![0.0; self.len()];
        let mut dt = vec![0.0; self.len()];
        let first = usize::from(p.has_center);
        for i in first..=nr {
            for j in 0..p.ntheta {
                let k = self.ring_node(i, j);
                let at = |ii: usize| f[self.ring_node(ii, j)];
                dr[k] = if i == 0 {
                    (-3.0 * at(0) + 4.0 * at(1) - at(2)) / (2.0 * p.h)
                } else if i == nr {
                    (3.0 * at(nr) - 4.0 * at(nr - 1) + at(nr - 2)) / (2.0 * p.h)
                } else {
                    (at(i + 1) - at(i - 1)) / (2.0 * p.h)
                };
                let jp = self.ring_node(i, (j + 1) % p.ntheta);
                let jm = self.ring_node(i, (j + p.ntheta - 1) % p.ntheta);
                dt[k] = (f[jp] - f[jm]) / (2.0 * p.dtheta);
            }
        }
        (dr, dt)
    }

    /// Least-squares gradient at a disk's center from the first ring.
    fn center_gradient(&self, f: &[f64]) -> (f64, f64) {
        let p = self.polar_info().expect("polar grid");
        let (mut sx, mut sy) = (0.0, 0.0);
        for j in 0..p.ntheta {
            let v = f[self.ring_node(1, j)];
            let th = j as f64 * p.dtheta;
            sx += v * th.cos();
            sy += v * th.sin();
        }
        let s = 2.0 / (p.ntheta as f64 * p.h);
        (s * sx, s * sy)
    }

    /// Nodal gradient `(d_x f, d_y f)`.
    pub fn gradient(&self, f: &[f64]) -> (Vec<f64>, Vec<f64>) {
        match &self.topo {
            Topology::Polar(p) => {
                let (dr, dt) = self.polar_derivatives(f);
                let mut gx = vec![0.0; self.len()];
                let mut gy = vec![0.0; self.len()];
                for k in 0..self.len() {
                    if p.has_center && k == 0 {
                        let (a, b) = self.center_gradient(f);
                        gx[0] = a;
                        gy[0] = b;
                        continue;
                    }
                    let (c, s) = (self.theta[k].cos(), self.theta[k].sin());
                    let dtr = dt[k] / self.r[k];
                    gx[k] = c * dr[k] - s * dtr;
                    gy[k] = s * dr[k] + c * dtr;
                }
                (gx, gy)
            }
            Topology::Cartesian(c) => {
                let n = c.n;
                let d = |k: usize, dc: isize, dr: isize| -> (Option<f64>, Option<f64>) {
                    let (col, row) = c.pos[k];
                    let get = |s: isize| -> Option<f64> {
                        let cc = col as isize + s * dc;
                        let rr = row as isize + s * dr;
                        if cc < 0 || rr < 0 || cc >= n as isize || rr >= n as isize {
                            return None;
                        }
                        c.slot[rr as usize * n + cc as usize].map(|i| f[i])
                    };
                    (get(1), get(-1))
                };
                let one = |k: usize, dc: isize, dr: isize| -> f64 {
                    match d(k, dc, dr) {
                        (Some(p), Some(m)) => (p - m) / (2.0 * c.h),
                        (Some(p), None) => (p - f[k]) / c.h,
                        (None, Some(m)) => (f[k] - m) / c.h,
                        (None, None) => 0.0,
                    }
                };
                let gx = (0..self.len()).map(|k| one(k, 1, 0)).collect();
                let gy = (0..self.len()).map(|k| one(k, 0, 1)).collect();
                (gx, gy)
            }
        }
    }

    /// `d_x a_y - d_y a_x` for a 1-form `a_x dx + a_y dy`.
    pub fn curl(&self, ax: &[f64], ay: &[f64]) -> Vec<f64> {
        match &self.topo {
            Topology::Polar(p) => {
                let (ar, ath): (Vec<f64>, Vec<f64>) = (0..self.len())
                    .map(|k| {
                        let (c, s) = (self.theta[k].cos(), self.theta[k].sin());
                        (c * ax[k] + s * ay[k], self.r[k] * (-s * ax[k] + c * ay[k]))
                    })
                    .unzip();
                let (dr_ath, _) = self.polar_derivatives(&ath);
                let (_, dt_ar) = self.polar_derivatives(&ar);
                let mut out: Vec<f64> = (0..self.len())
                    .map(|k| {
                        if self.r[k] > 0.0 {
                            (dr_ath[k] - dt_ar[k]) / self.r[k]
                        } else {
                            0.0
                        }
                    })
                    .collect();
                if p.has_center {
                    let circulation: f64 = self.ring(1).iter().map(|&k| ath[k]).sum::<f64>() * p.dtheta;
                    out[0] = circulation / (PI * p.h * p.h);
                }
                out
            }
            Topology::Cartesian(_) => {
                let (dx_ay, _) = self.gradient(ay);
                let (_, dy_ax) = self.gradient(ax);
                dx_ay.iter().zip(&dy_ax).map(|(a, b)| a - b).collect()
            }
        }
    }

    /// Bilinear interpolation at polar coordinates; `None` outside the grid.
    pub fn interpolate_polar(&self, r: f64, theta: f64, f: &[f64]) -> Option<f64> {
        let p = self.polar_info()?;
        let r0 = p.radii[0];
        let nr = p.radii.len() - 1;
        let s = (r - r0) / p.h;
        if s < -1e-9 || s > nr as f64 + 1e-9 {
            return None;
        }
        let s = s.clamp(0.0, nr as f64);
        let i = (s.floor() as usize).min(nr - 1);
        let fr = s - i as f64;
        let period = self.spec.geometry.angular_period();
        let t = theta.rem_euclid(period) / p.dtheta;
        let j = (t.floor() as usize) % p.ntheta;
        let ft = t - t.floor();
        let ring_value = |ii: usize| -> f64 {
            if p.has_center && ii == 0 {
                return f[0];
            }
            let a = f[self.ring_node(ii, j)];
            let b = f[self.ring_node(ii, j + 1)];
            a * (1.0 - ft) + b * ft
        };
        Some(ring_value(i) * (1.0 - fr) + ring_value(i + 1) * fr)
    }

    /// Interpolation at a Cartesian point (the angle is taken in `[0, 2 pi)`).
    pub fn interpolate(&self, x: f64, y: f64, f: &[f64]) -> Option<f64> {
        match &self.topo {
            Topology::Polar(_) => self.interpolate_polar(x.hypot(y), y.atan2(x), f),
            Topology::Cartesian(c) => {
                let radius = self.spec.geometry.outer_radius();
                let u = (x + radius) / c.h;
                let v = (y + radius) / c.h;
                if u < 0.0 || v < 0.0 || u > (c.n - 1) as f64 || v > (c.n - 1) as f64 {
                    return None;
                }
                let i = (u.floor() as usize).min(c.n - 2);
                let j = (v.floor() as usize).min(c.n - 2);
                let (fu, fv) = (u - i as f64, v - j as f64);
                let at = |ii: usize, jj: usize| c.slot[jj * c.n + ii].map(|k| f[k]);
                Some(
                    at(i, j)? * (1.0 - fu) * (1.0 - fv)
                        + at(i + 1, j)? * fu * (1.0 - fv)
                        + at(i, j + 1)? * (1.0 - fu) * fv
                        + at(i + 1, j + 1)? * fu * fv,
                )
            }
        }
    }

    /// Field from a function of `(x, y)`.
    pub fn sample(&self, f: impl Fn(f64, f64) -> f64) -> Vec<f64> {
        (0..self.len()).map(|k| f(self.x[k], self.y[k])).collect()
    }

    /// Zeroes the boundary nodes.
    pub fn clamp_boundary(&self, f: &mut [f64]) {
        for (v, &b) in f.iter_mut().zip(&self.boundary) {
            if b {
                *v = 0.0;
            }
        }
    }

    /// Quadrature of `f(r, theta)` with composite Simpson in `r` and the periodic
    /// trapezoid rule in `theta`; polar annulus or cover grids only.
    pub fn integrate_high_order(&self, f: &[f64]) -> Result<f64> {
        let p = self
            .polar_info()
            .filter(|p| !p.has_center)
            .ok_or_else(|| Error::GridMismatch("high-order quadrature needs an annulus or cover grid".into()))?;
        let nr = p.radii.len() - 1;
        let ring_integral: Vec<f64> = (0..=nr)
            .map(|i| {
                let s: f64 = self
                    .ring(i)
                    .iter()
                    .map(|&k| f[k] * self.metric_at(k))
                    .sum();
                s * p.dtheta * p.radii[i]
            })
            .collect();
        Ok(simpson(&ring_integral, p.h))
    }

    fn metric_at(&self, k: usize) -> f64 {
        self.spec.metric.as_ref().map_or(1.0, |m| m[k])
    }

    /// Cyclic shift of ring angles by `steps` nodes (polar grids).
    pub fn rotate(&self, f: &[f64], steps: usize) -> Vec<f64> {
        let p = self.polar_info().expect("polar grid");
        let mut out = f.to_vec();
        for i in 0..p.radii.len() {
            if p.has_center && i == 0 {
                continue;
            }
            for j in 0..p.ntheta {
                out[self.ring_node(i, (j + steps) % p.ntheta)] = f[self.ring_node(i, j)];
            }
        }
        out
    }

    /// Same layout and geometry (metric included).
    pub fn compatible(&self, other: &Grid) -> bool {
        self.spec == other.spec
    }
}

/// Composite Simpson on uniform samples; falls back to 3/8 on the last panel
/// when the number of intervals is odd.
pub fn simpson(v: &[f64], h: f64) -> f64 {
    let n = v.len() - 1;
    if n == 0 {
        return 0.0;
    }
    if n == 1 {
        return 0.5 * h * (v[0] + v[1]);
    }
    let (even_end, tail) = if n.is_multiple_of(2) { (n, 0.0) } else {
        let m = n - 3;
        (m, 3.0 * h / 8.0 * (v[m] + 3.0 * v[m + 1] + 3.0 * v[m + 2] + v[m + 3]))
    };
    let mut s = v[0] + v[even_end];
    for (i, x) in v.iter().enumerate().take(even_end).skip(1) {
        s += if i % 2 == 1 { 4.0 * x } else { 2.0 * x };
    }
    s * h / 3.0 + tail
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rel(a: f64, b: f64) -> f64 {
        (a - b).abs() / b.abs().max(1e-300)
    }

    #[test]
    fn polar_quadrature_sums_to_area() {
        for g in [
            Grid::disk(3.0, 17, 24).unwrap(),
            Grid::annulus(0.5, 2.0, 9, 16).unwrap(),
            Grid::cover(3, 1.0, 2.0, 8, 30).unwrap(),
        ] {
            let total: f64 = g.weights().iter().sum();
            assert!(rel(total, g.geometry().area()) < 1e-12, "{total}");
        }
    }

    #[test]
    fn cover_requires_divisible_angles() {
        assert!(Grid::cover(2, 1.0, 2.0, 8, 31).is_err());
    }

    #[test]
    fn constant_and_linear_norms() {
        let g = Grid::disk(2.0, 64, 64).unwrap();
        let one = vec![1.0; g.len()];
        assert!(rel(g.norm(&one, NormKind::L2), (PI * 4.0).sqrt()) < 1e-12);
        assert!(rel(g.norm(&one, NormKind::H1), g.norm(&one, NormKind::L2)) < 1e-14);
        let g = Grid::disk(1.0, 400, 128).unwrap();
        let f = g.sample(|x, _| x);
        assert!(rel(g.norm(&f, NormKind::L2), (PI / 4.0).sqrt()) < 1e-4);
    }

    #[test]
    fn laplacian_of_harmonic_is_small() {
        let mut errs = Vec::new();
        for n in [32usize, 64] {
            let g = Grid::disk(1.0, n, 2 * n).unwrap();
            let f = g.sample(|x, y| x * x - y * y);
            let lap = g.laplacian(&f);
            errs.push(g.interior_nodes().iter().map(|&k| lap[k].abs()).fold(0.0, f64::max));
        }
        assert!(errs[1] < 1e-2 && errs[0] / errs[1] > 3.5, "{errs:?}");
        let g = Grid::disk(1.0, 40, 80).unwrap();
        let f = g.sample(|x, y| x * x + y * y);
        let lap = g.laplacian(&f);
        for k in g.interior_nodes() {
            assert!((lap[k] + 4.0).abs() < 1e-9, "{}", lap[k]);
        }
    }

    #[test]
    fn gradient_and_curl_are_second_order() {
        let mut errs = Vec::new();
        for n in [32usize, 64] {
            let g = Grid::disk(1.5, n, n).unwrap();
            let f = g.sample(|x, y| (x + 0.3 * y).sin() * y.cos());
            let (gx, _) = g.gradient(&f);
            let e = (0..g.len())
                .map(|k| {
                    let (x, y) = (g.x()[k], g.y()[k]);
                    (gx[k] - (x + 0.3 * y).cos() * y.cos()).abs()
                })
                .fold(0.0, f64::max);
            let ax = g.sample(|_, y| -y * y);
            let ay = g.sample(|x, y| x * x * y);
            let cu = g.curl(&ax, &ay);
            let ce = (0..g.len())
                .map(|k| (cu[k] - (2.0 * g.x()[k] * g.y()[k] + 2.0 * g.y()[k])).abs())
                .fold(0.0, f64::max);
            errs.push((e, ce));
        }
        assert!(errs[0].0 / errs[1].0 > 3.5, "{errs:?}");
        assert!(errs[0].1 / errs[1].1 > 3.5, "{errs:?}");
    }

    #[test]
    fn integration_by_parts_is_exact() {
        let g = Grid::disk(2.0, 20, 24).unwrap();
        let mut f = g.sample(|x, y| (x * y).sin() + x);
        let mut h = g.sample(|x, y| (x - y).cos() * y);
        g.clamp_boundary(&mut f);
        g.clamp_boundary(&mut h);
        let lhs = g.inner(&g.laplacian(&f), &h);
        let rhs = g.dirichlet_form(&f, &h);
        assert!(rel(lhs, rhs) < 1e-12);
    }

    #[test]
    fn metric_scales_weights_only() {
        let g = Grid::disk(1.0, 10, 16).unwrap();
        let m = g.with_metric(|_, _| 4.0).unwrap();
        let total: f64 = m.weights().iter().sum();
        assert!(rel(total, 4.0 * PI) < 1e-12);
        let f = g.sample(|x, y| x * y);
        assert!(rel(m.dirichlet_form(&f, &f), g.dirichlet_form(&f, &f)) < 1e-15);
    }

    #[test]
    fn cartesian_grid_basics() {
        let g = Grid::cartesian_disk(1.0, 41).unwrap();
        let f = g.sample(|x, y| x * x - y * y);
        let lap = g.laplacian(&f);
        for k in g.interior_nodes() {
            assert!(lap[k].abs() < 1e-10);
        }
        let total: f64 = g.weights().iter().sum();
        assert!((total - PI).abs() < 0.2);
        let v = g.interpolate(0.1, 0.2, &f).unwrap();
        assert!((v - (0.01 - 0.04)).abs() < 1e-3);
    }

    #[test]
    fn interpolation_reproduces_nodes() {
        let g = Grid::disk(2.0, 16, 32).unwrap();
        let f = g.sample(|x, y| x + 2.0 * y);
        for k in (0..g.len()).step_by(7) {
            let v = g.interpolate_polar(g.r()[k], g.theta()[k], &f).unwrap();
            assert!((v - f[k]).abs() < 1e-12);
        }
        assert!(g.interpolate(3.0, 0.0, &f).is_none());
    }

    #[test]
    fn simpson_integrates_cubics() {
        let h = 0.1;
        for n in [10usize, 11] {
            let v: Vec<f64> = (0..=n).map(|i| (i as f64 * h).powi(3)).collect();
            let exact = (n as f64 * h).powi(4) / 4.0;
            assert!((simpson(&v, h) - exact).abs() < 1e-12);
        }
    }
}
