//! Torus bundles over the weighted projective line `P(1, n)`: holonomy at
//! infinity, clutching data, norms on the n-fold covers near infinity, and the
//! reduction of a loop connection `d + a(theta) d theta` to `d + lambda d theta`.

use std::f64::consts::PI;
use std::io::Read;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pdegrid::{Geometry, Grid};

/// Tolerance for the integrality of `n * lambda`.
pub const ORBIFOLD_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OrbiBundleData {
    pub n: u32,
    pub lambda: Vec<f64>,
    #[serde(rename = "R")]
    pub radius: f64,
}

impl OrbiBundleData {
    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(Error::InvalidDatum("orbifold order must be positive".into()));
        }
        if !(self.radius > 0.0) {
            return Err(Error::InvalidDatum("chart radius must be positive".into()));
        }
        if !check_orbifold_condition(&self.lambda, self.n) {
            return Err(Error::OrbifoldCondition(
                self.lambda.iter().map(|l| l * self.n as f64).collect(),
            ));
        }
        Ok(())
    }

    /// Phases `exp(2 pi i lambda_m)`.
    pub fn holonomy(&self) -> Vec<Complex64> {
        self.lambda
            .iter()
            .map(|l| Complex64::from_polar(1.0, 2.0 * PI * l))
            .collect()
    }
}

/// Whether every component of `n * lambda` is an integer.
pub fn check_orbifold_condition(lambda: &[f64], n: u32) -> bool {
    lambda.iter().all(|l| {
        let v = l * n as f64;
        (v - v.round()).abs() <= ORBIFOLD_TOL
    })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Transition {
    /// Phases of `exp(-2 pi lambda)`.
    pub mu: Vec<Complex64>,
    pub thetas: Vec<f64>,
    /// Phases of `exp(n lambda theta)` per sample.
    pub tau: Vec<Vec<Complex64>>,
    /// Max deviation of `tau(theta + 2 pi / n)` from `tau(theta) mu^{-1}`.
    pub compatibility_defect: f64,
}

fn tau_at(lambda: &[f64], n: u32, theta: f64) -> Vec<Complex64> {
    lambda
        .iter()
        .map(|l| Complex64::from_polar(1.0, n as f64 * l * theta))
        .collect()
}

pub fn transition_functions(data: &OrbiBundleData, thetas: &[f64]) -> Result<Transition> {
    data.validate()?;
    let mu: Vec<Complex64> = data
        .lambda
        .iter()
        .map(|l| Complex64::from_polar(1.0, -2.0 * PI * l))
        .collect();
    let tau: Vec<Vec<Complex64>> = thetas.iter().map(|&t| tau_at(&data.lambda, data.n, t)).collect();
    let shift = 2.0 * PI / data.n as f64;
    let mut defect = 0.0f64;
    for (&t, tv) in thetas.iter().zip(&tau) {
        let shifted = tau_at(&data.lambda, data.n, t + shift);
        for ((s, a), m) in shifted.iter().zip(tv).zip(&mu) {
            defect = defect.max((s - a / m).norm());
        }
    }
    Ok(Transition { mu, thetas: thetas.to_vec(), tau, compatibility_defect: defect })
}

/// Recovers `lambda` from samples of the clutching loop `tau` over one sector
/// `theta in [0, 2 pi / n]` by tracking the continuous argument.
pub fn lambda_from_transition(tau: &[Vec<Complex64>]) -> Vec<f64> {
    let Some(first) = tau.first() else { return Vec::new() };
    (0..first.len())
        .map(|m| {
            let total: f64 = tau
                .windows(2)
                .map(|w| (w[1][m] / w[0][m]).arg())
                .sum();
            total / (2.0 * PI)
        })
        .collect()
}

/// Conformal weight relating the pullback under `w -> w^n` to the isometric cover.
pub fn cover_weight(form_degree: u8, n: u32, r: f64) -> Result<f64> {
    let nf = n as f64;
    let s = r.powi(2 * n as i32 - 2);
    match form_degree {
        0 => Ok(nf * nf * s),
        1 => Ok(1.0),
        2 => Ok(1.0 / (nf * nf * s)),
        _ => Err(Error::InvalidDatum(format!("form degree {form_degree} is not 0, 1 or 2"))),
    }
}

/// L2 norm on the isometric cover of a form given by its pullback to the
/// `w`-annulus, sampled on `grid` (pointwise norm from the listed components).
pub fn cover_transform_norm(form_degree: u8, n: u32, grid: &Grid, components: &[&[f64]]) -> Result<f64> {
    if n == 0 {
        return Err(Error::InvalidDatum("orbifold order must be positive".into()));
    }
    if !matches!(grid.geometry(), Geometry::Annulus { .. }) {
        return Err(Error::GridMismatch("pullback samples live on an annulus grid".into()));
    }
    if let Some(c) = components.iter().find(|c| c.len() != grid.len()) {
        return Err(Error::Shape { expected: grid.len(), got: c.len() });
    }
    let density: Vec<f64> = (0..grid.len())
        .map(|k| {
            let sq: f64 = components.iter().map(|c| c[k] * c[k]).sum();
            cover_weight(form_degree, n, grid.r()[k]).map(|w| sq * w)
        })
        .collect::<Result<_>>()?;
    Ok(grid.integrate_high_order(&density)?.sqrt())
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StandardForm {
    pub lambda: Vec<f64>,
    /// Integer part of `lambda` after choosing the fractional part in `(-1/2, 1/2]`.
    pub winding: Vec<i64>,
    pub fractional: Vec<f64>,
    pub thetas: Vec<f64>,
    /// Phases of the gauge `exp(lambda theta) k(theta)^{-1}` per sample.
    pub gauge: Vec<Vec<Complex64>>,
    /// Max deviation of the transformed loop from the constant `lambda`.
    pub residual: f64,
}

/// Gauge that takes `d + a(theta) d theta` to `d + lambda d theta`.
///
/// `thetas` must be uniform over `[0, 2 pi]`, either including the endpoint or
/// stopping one step short of it; `a[i]` holds the `r` components at `thetas[i]`.
pub fn standard_form_loop(thetas: &[f64], a: &[Vec<f64>]) -> Result<StandardForm> {
    let n_in = thetas.len();
    if n_in < 4 || a.len() != n_in {
        return Err(Error::NonUniformGrid(format!(
            "{n_in} angles for {} samples (need at least 4)",
            a.len()
        )));
    }
    let step = thetas[1] - thetas[0];
    if !(step > 0.0) || thetas[0].abs() > 1e-12 {
        return Err(Error::NonUniformGrid("angles must start at 0 and increase".into()));
    }
    for w in thetas.windows(2) {
        if ((w[1] - w[0]) - step).abs() > 1e-9 * step.max(1.0) {
            return Err(Error::NonUniformGrid(format!("spacing {} differs from {step}", w[1] - w[0])));
        }
    }
    let last = thetas[n_in - 1];
    let periodic_len = if (last - 2.0 * PI).abs() < 1e-9 {
        n_in - 1
    } else if (last + step - 2.0 * PI).abs() < 1e-9 {
        n_in
    } else {
        return Err(Error::NonUniformGrid("angles must cover [0, 2 pi]".into()));
    };
    let r = a[0].len();
    if a.iter().any(|v| v.len() != r) {
        return Err(Error::Shape { expected: r, got: a.iter().map(Vec::len).find(|&l| l != r).unwrap() });
    }
    let h = 2.0 * PI / periodic_len as f64;
    let at = |i: isize, c: usize| a[i.rem_euclid(periodic_len as isize) as usize][c];
    // phase(theta_i) = int_0^theta_i a, fourth order on each panel
    let mut phase = vec![vec![0.0; r]; periodic_len + 1];
    for i in 0..periodic_len {
        for c in 0..r {
            let ii = i as isize;
            let panel = h / 24.0 * (-at(ii - 1, c) + 13.0 * at(ii, c) + 13.0 * at(ii + 1, c) - at(ii + 2, c));
            phase[i + 1][c] = phase[i][c] + panel;
        }
    }
    let lambda: Vec<f64> = phase[periodic_len].iter().map(|p| p / (2.0 * PI)).collect();
    let winding: Vec<i64> = lambda.iter().map(|l| (l - 0.5).ceil() as i64).collect();
    let fractional: Vec<f64> = lambda.iter().zip(&winding).map(|(l, w)| l - *w as f64).collect();
    // psi = lambda theta - phase is periodic since phase(2 pi) = 2 pi lambda
    let psi: Vec<Vec<f64>> = (0..=periodic_len)
        .map(|i| (0..r).map(|c| lambda[c] * i as f64 * h - phase[i][c]).collect())
        .collect();
    let gauge = (0..n_in)
        .map(|i| psi[i].iter().map(|&v| Complex64::from_polar(1.0, v)).collect())
        .collect();
    // the transformed loop a + psi' should be the constant lambda
    let mut residual = 0.0f64;
    for i in 0..periodic_len {
        let ip = i + 1;
        let im = (i + periodic_len - 1) % periodic_len;
        for c in 0..r {
            let dpsi = (psi[ip][c] - psi[im][c]) / (2.0 * h);
            residual = residual.max((a[i][c] + dpsi - lambda[c]).abs());
        }
    }
    Ok(StandardForm {
        lambda,
        winding,
        fractional,
        thetas: thetas.to_vec(),
        gauge,
        residual,
    })
}

/// Reads a loop connection from CSV with columns `theta, a_0, ..., a_{r-1}`.
pub fn read_loop_csv<R: Read>(rd: R) -> Result<(Vec<f64>, Vec<Vec<f64>>)> {
    let mut reader = csv::ReaderBuilder::new().has_headers(true).from_reader(rd);
    let mut thetas = Vec::new();
    let mut values = Vec::new();
    for rec in reader.records() {
        let rec = rec?;
        let row: Vec<f64> = rec
            .iter()
            .map(|s| s.trim().parse::<f64>().map_err(|e| Error::Format(format!("{s:?}: {e}"))))
            .collect::<Result<_>>()?;
        if row.len() < 2 {
            return Err(Error::Format("loop rows need theta and at least one component".into()));
        }
        thetas.push(row[0]);
        values.push(row[1..].to_vec());
    }
    Ok((thetas, values))
}

/// Uniform angles `2 pi i / samples` including the endpoint.
pub fn uniform_loop_angles(samples: usize) -> Vec<f64> {
    (0..=samples).map(|i| 2.0 * PI * i as f64 / samples as f64).collect()
}
