use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::target::TorusTarget;

/// Bound on `|s|` beyond which the minimization is declared divergent.
pub const DIVERGENCE_BOUND: f64 = 1e3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KempfNess {
    /// `e^{-<mu_j, s>} x_j` lies on the zero level of the moment map.
    pub s: Vec<f64>,
    pub iterations: usize,
    pub moment_norm: f64,
}

/// Minimizes the convex function `1/4 sum_j e^{-2<mu_j,s>} |x_j|^2 + <tau, s>`,
/// whose gradient is `-Phi(e^{-s} x)`.
pub fn kempf_ness_project(t: &TorusTarget, x: &[Complex64]) -> Result<KempfNess> {
    let (r, k) = (t.rank(), t.dim());
    if x.len() != k {
        return Err(Error::Shape { expected: k, got: x.len() });
    }
    let tau = DVector::from_column_slice(t.tau());
    let scale = 1.0 + tau.norm();
    let logs: Vec<Option<f64>> = x.iter().map(|v| (v.norm() > 0.0).then(|| 2.0 * v.norm().ln())).collect();
    let mu: Vec<DVector<f64>> = (0..k).map(|j| DVector::from_iterator(r, t.weight(j).iter().map(|&w| w as f64))).collect();
    let value_grad_hess = |s: &DVector<f64>| {
        let mut f = tau.dot(s);
        let mut g = tau.clone();
        let mut h = DMatrix::<f64>::zeros(r, r);
        for (j, l) in logs.iter().enumerate() {
            if let Some(l) = l {
                let e = (l - 2.0 * mu[j].dot(s)).exp();
                f += 0.25 * e;
                g -= &mu[j] * (0.5 * e);
                h += &mu[j] * mu[j].transpose() * e;
            }
        }
        (f, g, h)
    };
    let mut s = DVector::<f64>::zeros(r);
    let (mut f, mut g, mut h) = value_grad_hess(&s);
    for it in 0..500 {
        if g.norm() < 1e-12 * scale {
            return Ok(KempfNess { s: s.iter().copied().collect(), iterations: it, moment_norm: g.norm() });
        }
        let trace = h.trace();
        let dir = if trace > 0.0 {
            let ridge = DMatrix::<f64>::identity(r, r) * (1e-14 * trace);
            (h.clone() + ridge).cholesky().map(|c| -c.solve(&g)).unwrap_or_else(|| -&g)
        } else {
            -&g * 1e3
        };
        let slope = g.dot(&dir);
        let mut step = 1.0;
        loop {
            let trial = &s + &dir * step;
            if trial.norm() > DIVERGENCE_BOUND {
                return Err(Error::Diverged { iteration: it, residual: g.norm() });
            }
            let (ft, gt, ht) = value_grad_hess(&trial);
            // near the minimum the decrease of f drowns in rounding; a shrinking
            // gradient is then the acceptance test
            let sufficient = ft <= f + 1e-4 * step * slope || gt.norm() < 0.5 * g.norm();
            if ft.is_finite() && sufficient {
                s = trial;
                f = ft;
                g = gt;
                h = ht;
                break;
            }
            step *= 0.5;
            if step < 1e-20 {
                // no decrease left in floating point: accept if already stationary
                if g.norm() < 1e-10 * scale {
                    return Ok(KempfNess { s: s.iter().copied().collect(), iterations: it, moment_norm: g.norm() });
                }
                return Err(Error::Diverged { iteration: it, residual: g.norm() });
            }
        }
    }
    Err(Error::Diverged { iteration: 500, residual: g.norm() })
}

#[cfg(test)]
mod tests {
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn scales_two_to_the_unit_circle() {
        let t = TorusTarget::circle(&[1], 0.5).unwrap();
        let kn = kempf_ness_project(&t, &[c(2.0, 0.0)]).unwrap();
        assert!((kn.s[0] - 2f64.ln()).abs() < 1e-12, "{:?}", kn.s);
    }

    #[test]
    fn level_set_points_are_fixed() {
        let t = TorusTarget::new(vec![vec![1, 0], vec![0, 1], vec![1, 1]], vec![1.0, 1.0]).unwrap();
        // Phi = 1/2 (|x0|^2 + |x2|^2, |x1|^2 + |x2|^2) - tau
        let x = [c(1.0, 0.0), c(0.0, 1.0), c(0.6, 0.8)];
        let kn = kempf_ness_project(&t, &x).unwrap();
        assert!(kn.s.iter().all(|v| v.abs() < 1e-12));
    }

    #[test]
    fn zero_point_diverges() {
        let t = TorusTarget::circle(&[1], 0.5).unwrap();
        assert!(matches!(kempf_ness_project(&t, &[c(0.0, 0.0)]), Err(Error::Diverged { .. })));
    }

    #[test]
    fn projection_lands_on_the_level_set() {
        let t = TorusTarget::new(vec![vec![1, 0], vec![1, 2], vec![-1, 1], vec![0, 1]], vec![1.0, 2.0]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..50 {
            let x: Vec<Complex64> = (0..4).map(|_| c(rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0))).collect();
            let kn = kempf_ness_project(&t, &x).unwrap();
            let moved: Vec<Complex64> = x.iter().enumerate().map(|(j, v)| v * (-t.pair(j, &kn.s)).exp()).collect();
            let phi = t.moment_map(&moved);
            assert!(phi.iter().all(|p| p.abs() < 1e-10), "{phi:?}");
        }
    }
}
