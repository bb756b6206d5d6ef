use std::io::{Read, Write};
use std::path::Path;
use std::sync::Arc;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::{Grid, GridSpec};
use crate::error::{Error, Result};
use crate::target::TorusTarget;

/// Gauge potential `xi`, base connection `a = a_x dx + a_y dy` and section `u` on a grid.
///
/// The physical pair is the complex gauge transform of `(a, u)` by `xi`:
/// `u_j -> exp(<mu_j, xi>) u_j` and `a -> a - *d xi`.
#[derive(Debug, Clone)]
pub struct FieldState {
    pub grid: Arc<Grid>,
    pub rank: usize,
    pub dim: usize,
    /// `rank` values per node.
    pub xi: Vec<f64>,
    pub ax: Vec<f64>,
    pub ay: Vec<f64>,
    /// `dim` values per node.
    pub u: Vec<Complex64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FieldHeader {
    pub format: String,
    pub version: u32,
    pub grid: GridSpec,
    pub rank: usize,
    pub dim: usize,
    pub nodes: usize,
    pub components: Vec<String>,
    pub endianness: String,
}

const FORMAT: &str = "affine-vortex-field";

impl FieldState {
    pub fn zeros(grid: Arc<Grid>, rank: usize, dim: usize) -> Self {
        let n = grid.len();
        Self {
            grid,
            rank,
            dim,
            xi: vec![0.0; n * rank],
            ax: vec![0.0; n * rank],
            ay: vec![0.0; n * rank],
            u: vec![Complex64::new(0.0, 0.0); n * dim],
        }
    }

    /// Flat connection and `u = f(x, y)` sampled at nodes.
    pub fn from_section(grid: Arc<Grid>, rank: usize, f: impl Fn(f64, f64) -> Vec<Complex64>) -> Result<Self> {
        let first = f(grid.x()[0], grid.y()[0]);
        let dim = first.len();
        let mut s = Self::zeros(grid.clone(), rank, dim);
        for k in 0..grid.len() {
            let v = f(grid.x()[k], grid.y()[k]);
            if v.len() != dim {
                return Err(Error::Shape { expected: dim, got: v.len() });
            }
            s.u[k * dim..(k + 1) * dim].copy_from_slice(&v);
        }
        Ok(s)
    }

    pub fn check_target(&self, t: &TorusTarget) -> Result<()> {
        if t.rank() != self.rank {
            return Err(Error::Shape { expected: t.rank(), got: self.rank });
        }
        if t.dim() != self.dim {
            return Err(Error::Shape { expected: t.dim(), got: self.dim });
        }
        let n = self.grid.len();
        for (len, want) in [
            (self.xi.len(), n * self.rank),
            (self.ax.len(), n * self.rank),
            (self.ay.len(), n * self.rank),
            (self.u.len(), n * self.dim),
        ] {
            if len != want {
                return Err(Error::Shape { expected: want, got: len });
            }
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.grid.len()
    }

    pub fn is_empty(&self) -> bool {
        self.grid.is_empty()
    }

    /// Component `c` of a node-major field with `stride` values per node.
    pub fn component(field: &[f64], stride: usize, c: usize) -> Vec<f64> {
        field.iter().skip(c).step_by(stride).copied().collect()
    }

    pub fn set_component(field: &mut [f64], stride: usize, c: usize, values: &[f64]) {
        for (k, v) in values.iter().enumerate() {
            field[k * stride + c] = *v;
        }
    }

    pub fn xi_component(&self, c: usize) -> Vec<f64> {
        Self::component(&self.xi, self.rank, c)
    }

    /// `exp(<mu_j, xi>) u_j`.
    pub fn u_xi(&self, t: &TorusTarget) -> Vec<Complex64> {
        let (r, k) = (self.rank, self.dim);
        let mut out = self.u.clone();
        for node in 0..self.len() {
            let xi = &self.xi[node * r..(node + 1) * r];
            for j in 0..k {
                let s: f64 = t.weight(j).iter().zip(xi).map(|(&w, x)| w as f64 * x).sum();
                out[node * k + j] *= s.exp();
            }
        }
        out
    }

    /// `*F` of the base connection, `rank` values per node.
    pub fn base_curvature(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.xi.len()];
        for c in 0..self.rank {
            let ax = Self::component(&self.ax, self.rank, c);
            let ay = Self::component(&self.ay, self.rank, c);
            Self::set_component(&mut out, self.rank, c, &self.grid.curl(&ax, &ay));
        }
        out
    }

    /// `*F` of the transformed connection: base curvature plus `Delta xi`.
    pub fn curvature(&self) -> Vec<f64> {
        let mut out = self.base_curvature();
        for c in 0..self.rank {
            let lap = self.grid.laplacian(&self.xi_component(c));
            for (k, v) in lap.iter().enumerate() {
                out[k * self.rank + c] += v;
            }
        }
        out
    }

    /// Transformed connection `a - *d xi = a + xi_y dx - xi_x dy`.
    pub fn connection_xi(&self) -> (Vec<f64>, Vec<f64>) {
        let (mut ax, mut ay) = (self.ax.clone(), self.ay.clone());
        for c in 0..self.rank {
            let (gx, gy) = self.grid.gradient(&self.xi_component(c));
            for k in 0..self.len() {
                ax[k * self.rank + c] += gy[k];
                ay[k * self.rank + c] -= gx[k];
            }
        }
        (ax, ay)
    }

    /// `Phi(u_xi)` per node.
    pub fn moment(&self, t: &TorusTarget) -> Vec<f64> {
        let u = self.u_xi(t);
        let mut out = Vec::with_capacity(self.xi.len());
        for node in 0..self.len() {
            out.extend(t.moment_map(&u[node * self.dim..(node + 1) * self.dim]));
        }
        out
    }

    /// Transformed pair with `xi` absorbed: `u_xi`, `a - *d xi`, and `xi = 0`.
    pub fn absorb(&self, t: &TorusTarget) -> FieldState {
        let (ax, ay) = self.connection_xi();
        FieldState {
            grid: self.grid.clone(),
            rank: self.rank,
            dim: self.dim,
            xi: vec![0.0; self.xi.len()],
            ax,
            ay,
            u: self.u_xi(t),
        }
    }

    fn component_names(&self) -> Vec<String> {
        let mut names = Vec::new();
        for c in 0..self.rank {
            names.push(format!("xi{c}"));
        }
        for c in 0..self.rank {
            names.push(format!("ax{c}"));
        }
        for c in 0..self.rank {
            names.push(format!("ay{c}"));
        }
        for j in 0..self.dim {
            names.push(format!("u{j}_re"));
            names.push(format!("u{j}_im"));
        }
        names
    }

    fn node_values(&self, k: usize) -> Vec<f64> {
        let (r, d) = (self.rank, self.dim);
        let mut v = Vec::with_capacity(3 * r + 2 * d);
        v.extend_from_slice(&self.xi[k * r..(k + 1) * r]);
        v.extend_from_slice(&self.ax[k * r..(k + 1) * r]);
        v.extend_from_slice(&self.ay[k * r..(k + 1) * r]);
        for u in &self.u[k * d..(k + 1) * d] {
            v.push(u.re);
            v.push(u.im);
        }
        v
    }

    pub fn header(&self) -> FieldHeader {
        FieldHeader {
            format: FORMAT.into(),
            version: 1,
            grid: self.grid.spec().clone(),
            rank: self.rank,
            dim: self.dim,
            nodes: self.len(),
            components: self.component_names(),
            endianness: "little".into(),
        }
    }

    /// Binary dump: `u64` header length, JSON header, then little-endian `f64`
    /// values node by node in header component order.
    pub fn write_binary<W: Write>(&self, mut w: W) -> Result<()> {
        let header = serde_json::to_vec(&self.header())?;
        w.write_all(&(header.len() as u64).to_le_bytes())?;
        w.write_all(&header)?;
        for k in 0..self.len() {
            for v in self.node_values(k) {
                w.write_all(&v.to_le_bytes())?;
            }
        }
        Ok(())
    }

    pub fn read_binary<R: Read>(mut rd: R) -> Result<Self> {
        let mut len = [0u8; 8];
        rd.read_exact(&mut len)?;
        let len = u64::from_le_bytes(len);
        if len > 1 << 32 {
            return Err(Error::Format("header length is implausible".into()));
        }
        let mut header = vec![0u8; len as usize];
        rd.read_exact(&mut header)?;
        let header: FieldHeader = serde_json::from_slice(&header)?;
        if header.format != FORMAT || header.endianness != "little" {
            return Err(Error::Format(format!("unsupported field format {:?}", header.format)));
        }
        let grid = Arc::new(Grid::new(header.grid.clone())?);
        if grid.len() != header.nodes {
            return Err(Error::GridMismatch(format!(
                "header says {} nodes, grid has {}",
                header.nodes,
                grid.len()
            )));
        }
        let mut s = FieldState::zeros(grid, header.rank, header.dim);
        if header.components != s.component_names() {
            return Err(Error::Format("unexpected component list".into()));
        }
        let per = header.components.len();
        let mut buf = vec![0u8; 8 * per];
        let (r, d) = (s.rank, s.dim);
        for k in 0..header.nodes {
            rd.read_exact(&mut buf)?;
            let v: Vec<f64> = buf
                .chunks_exact(8)
                .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
                .collect();
            s.xi[k * r..(k + 1) * r].copy_from_slice(&v[..r]);
            s.ax[k * r..(k + 1) * r].copy_from_slice(&v[r..2 * r]);
            s.ay[k * r..(k + 1) * r].copy_from_slice(&v[2 * r..3 * r]);
            for j in 0..d {
                s.u[k * d + j] = Complex64::new(v[3 * r + 2 * j], v[3 * r + 2 * j + 1]);
            }
        }
        let mut rest = Vec::new();
        rd.read_to_end(&mut rest)?;
        if !rest.is_empty() {
            return Err(Error::Format(format!("{} trailing bytes", rest.len())));
        }
        Ok(s)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let f = std::io::BufWriter::new(std::fs::File::create(path)?);
        self.write_binary(f)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::read_binary(std::io::BufReader::new(std::fs::File::open(path)?))
    }

    /// CSV with node coordinates followed by every component.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        let mut head = vec!["x".to_string(), "y".into(), "r".into(), "theta".into()];
        head.extend(self.component_names());
        wr.write_record(&head)?;
        for k in 0..self.len() {
            let mut row = vec![self.grid.x()[k], self.grid.y()[k], self.grid.r()[k], self.grid.theta()[k]];
            row.extend(self.node_values(k));
            wr.write_record(row.iter().map(|v| format!("{v:e}")))?;
        }
        wr.flush()?;
        Ok(())
    }

    /// Reads a CSV written by [`FieldState::write_csv`] onto a known grid.
    pub fn read_csv<R: Read>(grid: Arc<Grid>, rank: usize, dim: usize, rd: R) -> Result<Self> {
        let mut s = FieldState::zeros(grid, rank, dim);
        let names = s.component_names();
        let mut reader = csv::Reader::from_reader(rd);
        let head = reader.headers()?.clone();
        if head.len() != 4 + names.len() || head.iter().skip(4).zip(&names).any(|(a, b)| a != b) {
            return Err(Error::Format("CSV header does not match the field layout".into()));
        }
        let mut count = 0;
        let (r, d) = (rank, dim);
        for (k, rec) in reader.records().enumerate() {
            let rec = rec?;
            if k >= s.len() {
                return Err(Error::GridMismatch("more rows than grid nodes".into()));
            }
            let v: Vec<f64> = rec
                .iter()
                .map(|x| x.trim().parse::<f64>().map_err(|e| Error::Format(e.to_string())))
                .collect::<Result<_>>()?;
            let (x, y) = (s.grid.x()[k], s.grid.y()[k]);
            if (v[0] - x).abs() > 1e-9 * (1.0 + x.abs()) || (v[1] - y).abs() > 1e-9 * (1.0 + y.abs()) {
                return Err(Error::GridMismatch(format!("row {k} coordinates do not match the grid")));
            }
            let v = &v[4..];
            s.xi[k * r..(k + 1) * r].copy_from_slice(&v[..r]);
            s.ax[k * r..(k + 1) * r].copy_from_slice(&v[r..2 * r]);
            s.ay[k * r..(k + 1) * r].copy_from_slice(&v[2 * r..3 * r]);
            for j in 0..d {
                s.u[k * d + j] = Complex64::new(v[3 * r + 2 * j], v[3 * r + 2 * j + 1]);
            }
            count += 1;
        }
        if count != s.len() {
            return Err(Error::GridMismatch(format!("{count} rows for {} nodes", s.len())));
        }
        Ok(s)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample_state() -> FieldState {
        let g = Arc::new(Grid::disk(2.0, 6, 8).unwrap());
        let mut s = FieldState::from_section(g.clone(), 1, |x, y| vec![Complex64::new(x, y)]).unwrap();
        s.xi = g.sample(|x, y| 0.1 * x * y);
        s.ax = g.sample(|_, y| -0.5 * y);
        s.ay = g.sample(|x, _| 0.5 * x);
        s
    }

    #[test]
    fn binary_round_trip() {
        let s = sample_state();
        let mut buf = Vec::new();
        s.write_binary(&mut buf).unwrap();
        let back = FieldState::read_binary(buf.as_slice()).unwrap();
        assert_eq!(back.xi, s.xi);
        assert_eq!(back.u, s.u);
        assert_eq!(back.ay, s.ay);
        buf.push(0);
        assert!(FieldState::read_binary(buf.as_slice()).is_err());
    }

    #[test]
    fn csv_round_trip() {
        let s = sample_state();
        let mut buf = Vec::new();
        s.write_csv(&mut buf).unwrap();
        let back = FieldState::read_csv(s.grid.clone(), 1, 1, buf.as_slice()).unwrap();
        for (a, b) in back.xi.iter().zip(&s.xi) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn constant_curvature_connection() {
        let s = sample_state();
        let f = s.base_curvature();
        for v in f {
            assert!((v - 1.0).abs() < 1e-12, "{v}");
        }
    }
}
