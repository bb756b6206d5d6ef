//! Linear torus targets `X = C^k` with `K = U(1)^r` acting by integer weights.
//!
//! The moment map is `Phi(x) = 1/2 sum_j mu_j |x_j|^2 - tau`. Semistability of a
//! point is the cone condition `tau in Cone{mu_j : x_j != 0}`; it is decided by
//! enumerating linearly independent subsets (Caratheodory), which is an exact
//! feasibility test for the small cones arising here.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use num_integer::Integer;
use num_rational::Ratio;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice;

/// Slack used for cone membership.
pub const CONE_TOL: f64 = 1e-9;
/// Minimum distance of `tau` from any wall spanned by `r - 1` weights.
pub const WALL_MARGIN: f64 = 1e-9;

/// Weights and level of a linear torus action.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "TargetJson", into = "TargetJson")]
pub struct TorusTarget {
    r: usize,
    k: usize,
    /// `weights[j]` is `mu_j` in `Z^r`.
    weights: Vec<Vec<i64>>,
    tau: Vec<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct TargetJson {
    r: usize,
    k: usize,
    /// `r x k`, column `j` is `mu_j`.
    mu: Vec<Vec<i64>>,
    tau: Vec<f64>,
}

impl TryFrom<TargetJson> for TorusTarget {
    type Error = Error;

    fn try_from(j: TargetJson) -> Result<Self> {
        TorusTarget::from_rows(j.mu, j.tau).and_then(|t| {
            if t.r != j.r || t.k != j.k {
                Err(Error::InvalidTarget(format!(
                    "declared (r, k) = ({}, {}) but mu is {} x {}",
                    j.r, j.k, t.r, t.k
                )))
            } else {
                Ok(t)
            }
        })
    }
}

impl From<TorusTarget> for TargetJson {
    fn from(t: TorusTarget) -> Self {
        let mu = (0..t.r)
            .map(|m| t.weights.iter().map(|w| w[m]).collect())
            .collect();
        TargetJson {
            r: t.r,
            k: t.k,
            mu,
            tau: t.tau,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StabilizerOrder {
    Finite(u64),
    Infinite,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ValidationReport {
    pub valid: bool,
    pub checks: Vec<Check>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ConvexityReport {
    pub samples: usize,
    /// Smallest value of the convexity expression found.
    pub min_value: f64,
    /// Smallest value of the expression divided by `|v|^2` (zero vectors skipped).
    pub min_ratio: f64,
    pub threshold: f64,
}

impl TorusTarget {
    /// Builds a target from weight vectors `mu_j` (one per coordinate).
    pub fn new(weights: Vec<Vec<i64>>, tau: Vec<f64>) -> Result<Self> {
        let r = tau.len();
        if r == 0 {
            return Err(Error::InvalidTarget("torus rank must be positive".into()));
        }
        if weights.is_empty() {
            return Err(Error::InvalidTarget("need at least one coordinate".into()));
        }
        if let Some(w) = weights.iter().find(|w| w.len() != r) {
            return Err(Error::InvalidTarget(format!(
                "weight {:?} has length {}, expected {}",
                w,
                w.len(),
                r
            )));
        }
        Ok(Self {
            r,
            k: weights.len(),
            weights,
            tau,
        })
    }

    /// Builds a target from the `r x k` matrix whose columns are the weights.
    pub fn from_rows(mu: Vec<Vec<i64>>, tau: Vec<f64>) -> Result<Self> {
        if mu.len() != tau.len() {
            return Err(Error::InvalidTarget(format!(
                "mu has {} rows but tau has {} entries",
                mu.len(),
                tau.len()
            )));
        }
        let k = mu.first().map_or(0, Vec::len);
        if mu.iter().any(|row| row.len() != k) {
            return Err(Error::InvalidTarget("ragged weight matrix".into()));
        }
        let weights = (0..k).map(|j| mu.iter().map(|row| row[j]).collect()).collect();
        Self::new(weights, tau)
    }

    /// Rank-one target `C^k` with weights `w_j`.
    pub fn circle(weights: &[i64], tau: f64) -> Result<Self> {
        Self::new(weights.iter().map(|&w| vec![w]).collect(), vec![tau])
    }

    pub fn rank(&self) -> usize {
        self.r
    }

    pub fn dim(&self) -> usize {
        self.k
    }

    pub fn weight(&self, j: usize) -> &[i64] {
        &self.weights[j]
    }

    pub fn weights(&self) -> &[Vec<i64>] {
        &self.weights
    }

    pub fn tau(&self) -> &[f64] {
        &self.tau
    }

    /// `<mu_j, v>` for a real vector `v`.
    pub fn pair(&self, j: usize, v: &[f64]) -> f64 {
        self.weights[j].iter().zip(v).map(|(&a, &b)| a as f64 * b).sum()
    }

    pub fn validate(&self) -> ValidationReport {
        let mut checks = Vec::new();

        let half = self.half_space_witness();
        checks.push(Check {
            name: "open_half_space".into(),
            passed: half.is_none(),
            detail: match &half {
                None => "weights lie in an open half space".into(),
                Some(c) => format!("nonnegative dependency among weights {c:?}"),
            },
        });

        let rank = lattice::rank_of_vectors(&self.weight_refs(&(0..self.k).collect::<Vec<_>>()));
        checks.push(Check {
            name: "spanning".into(),
            passed: rank == self.r,
            detail: format!("weights span a rank-{rank} sublattice of Z^{}", self.r),
        });

        let all: Vec<usize> = (0..self.k).collect();
        let in_cone = self.tau_in_cone(&all);
        let wall = self.wall_violation();
        checks.push(Check {
            name: "tau_in_cone".into(),
            passed: in_cone,
            detail: if in_cone {
                "tau is a nonnegative combination of the weights".into()
            } else {
                "tau lies outside Cone{mu_j}".into()
            },
        });
        checks.push(Check {
            name: "wall_genericity".into(),
            passed: wall.is_none(),
            detail: match &wall {
                None => format!("tau is at distance > {WALL_MARGIN:e} from every wall"),
                Some((s, d)) => format!("tau within {d:e} of the span of weights {s:?}"),
            },
        });
        checks.push(Check {
            name: "tau_interior".into(),
            passed: in_cone && wall.is_none() && rank == self.r,
            detail: "tau in the interior of Cone{mu_j}".into(),
        });
        ValidationReport {
            valid: checks.iter().all(|c| c.passed),
            checks,
        }
    }

    pub fn ensure_valid(&self) -> Result<()> {
        let report = self.validate();
        if report.valid {
            Ok(())
        } else {
            let failed: Vec<_> = report
                .checks
                .iter()
                .filter(|c| !c.passed)
                .map(|c| format!("{}: {}", c.name, c.detail))
                .collect();
            Err(Error::InvalidTarget(failed.join("; ")))
        }
    }

    fn weight_refs(&self, idx: &[usize]) -> Vec<&[i64]> {
        idx.iter().map(|&j| self.weights[j].as_slice()).collect()
    }

    /// A nonnegative dependency `sum c_j mu_j = 0` (Gordan alternative to the open
    /// half space), found among minimal dependent subsets.
    fn half_space_witness(&self) -> Option<Vec<usize>> {
        for size in 1..=(self.r + 1).min(self.k) {
            for s in lattice::subsets_of_size(self.k, size) {
                let cols = self.weight_refs(&s);
                // matrix r x size with the weights as columns
                let m: Vec<Vec<i64>> = (0..self.r).map(|i| cols.iter().map(|c| c[i]).collect()).collect();
                let ns = lattice::null_space(&m);
                if ns.len() != 1 {
                    continue;
                }
                let c = &ns[0];
                let zero = Ratio::from_integer(0);
                // a circuit has every coefficient nonzero
                if c.contains(&zero) {
                    continue;
                }
                if c.iter().all(|x| *x > zero) || c.iter().all(|x| *x < zero) {
                    return Some(s);
                }
            }
        }
        None
    }

    fn wall_violation(&self) -> Option<(Vec<usize>, f64)> {
        let tau_norm = self.tau.iter().map(|t| t * t).sum::<f64>().sqrt();
        if self.r == 1 {
            return (tau_norm <= WALL_MARGIN).then(|| (Vec::new(), tau_norm));
        }
        for s in lattice::subsets_of_size(self.k, self.r - 1) {
            let normal = lattice::hyperplane_normal(&self.weight_refs(&s), self.r);
            let nn = normal.iter().map(|&x| (x as f64).powi(2)).sum::<f64>().sqrt();
            if nn == 0.0 {
                continue;
            }
            let d = normal.iter().zip(&self.tau).map(|(&a, b)| a as f64 * b).sum::<f64>().abs() / nn;
            if d <= WALL_MARGIN {
                return Some((s, d));
            }
        }
        None
    }

    /// Whether `tau` is a nonnegative combination of the weights in `support`.
    pub fn tau_in_cone(&self, support: &[usize]) -> bool {
        cone_contains(&self.weight_refs(support), &self.tau, self.r)
    }

    pub fn moment_map(&self, x: &[Complex64]) -> Vec<f64> {
        let mut phi: Vec<f64> = self.tau.iter().map(|t| -t).collect();
        for (w, xj) in self.weights.iter().zip(x) {
            let n = 0.5 * xj.norm_sqr();
            for (p, &wm) in phi.iter_mut().zip(w) {
                *p += wm as f64 * n;
            }
        }
        phi
    }

    pub fn support(x: &[Complex64]) -> Vec<usize> {
        x.iter()
            .enumerate()
            .filter(|(_, v)| v.norm_sqr() > 0.0)
            .map(|(j, _)| j)
            .collect()
    }

    pub fn is_semistable(&self, x: &[Complex64]) -> bool {
        self.tau_in_cone(&Self::support(x))
    }

    pub fn stabilizer_order(&self, support: &[usize]) -> StabilizerOrder {
        if support.is_empty() {
            return StabilizerOrder::Infinite;
        }
        let m: Vec<Vec<i64>> = (0..self.r)
            .map(|i| support.iter().map(|&j| self.weights[j][i]).collect())
            .collect();
        match lattice::smith_normal_form(&m).index() {
            Some(ix) => StabilizerOrder::Finite(ix as u64),
            None => StabilizerOrder::Infinite,
        }
    }

    /// Supports `S` with `tau in Cone(S)` and `{mu_j : j in S}` spanning.
    pub fn semistable_supports(&self) -> Vec<Vec<usize>> {
        let mut out = Vec::new();
        for mask in 1u64..(1u64 << self.k) {
            let s: Vec<usize> = (0..self.k).filter(|j| mask >> j & 1 == 1).collect();
            if lattice::rank_of_vectors(&self.weight_refs(&s)) == self.r && self.tau_in_cone(&s) {
                out.push(s);
            }
        }
        out
    }

    /// Least common multiple of the stabilizer orders of all semistable strata.
    pub fn orbifold_order(&self) -> Result<u64> {
        let supports = self.semistable_supports();
        if supports.is_empty() {
            return Err(Error::InvalidTarget("no semistable stratum (tau outside the weight cone)".into()));
        }
        let mut n = 1u64;
        for s in &supports {
            if let StabilizerOrder::Finite(m) = self.stabilizer_order(s) {
                n = n.lcm(&m);
            }
        }
        Ok(n)
    }

    /// Samples the convexity-at-infinity expression for `f(x) = |x|^2`.
    pub fn check_convexity_sample(&self, sample_count: usize, seed: u64) -> ConvexityReport {
        let threshold = 1.0;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut min_value = f64::INFINITY;
        let mut min_ratio = f64::INFINITY;
        for s in 0..sample_count {
            let mut x: Vec<f64> = (0..2 * self.k).map(|_| rng.random_range(-3.0..3.0)).collect();
            let n2: f64 = x.iter().map(|v| v * v).sum();
            if n2 <= threshold {
                let scale = 2.0 * (threshold / n2.max(1e-12)).sqrt();
                x.iter_mut().for_each(|v| *v *= scale);
            }
            let v: Vec<f64> = if s == 0 {
                vec![0.0; 2 * self.k]
            } else {
                (0..2 * self.k).map(|_| rng.random_range(-1.0..1.0)).collect()
            };
            let value = convexity_expression(&x, &v);
            min_value = min_value.min(value);
            let vn: f64 = v.iter().map(|a| a * a).sum();
            if vn > 0.0 {
                min_ratio = min_ratio.min(value / vn);
            }
        }
        ConvexityReport {
            samples: sample_count,
            min_value,
            min_ratio,
            threshold,
        }
    }
}

/// `tau in Cone(vectors)`: some linearly independent subset represents `tau` with
/// nonnegative coefficients.
pub fn cone_contains(vectors: &[&[i64]], tau: &[f64], r: usize) -> bool {
    let tau_norm = tau.iter().map(|t| t * t).sum::<f64>().sqrt();
    if tau_norm <= CONE_TOL {
        return true;
    }
    let tol = CONE_TOL * tau_norm.max(1.0);
    for size in 1..=r.min(vectors.len()) {
        for s in lattice::subsets_of_size(vectors.len(), size) {
            let cols: Vec<&[i64]> = s.iter().map(|&i| vectors[i]).collect();
            if lattice::rank_of_vectors(&cols) != size {
                continue;
            }
            let a = DMatrix::from_fn(r, size, |i, j| cols[j][i] as f64);
            let b = DVector::from_column_slice(tau);
            let ata = a.transpose() * &a;
            let Some(c) = ata.lu().solve(&(a.transpose() * &b)) else {
                continue;
            };
            let resid = (&a * &c - &b).norm();
            if resid <= tol && c.iter().all(|&x| x >= -tol) {
                return true;
            }
        }
    }
    false
}

fn grad_sq_norm(x: &[f64]) -> Vec<f64> {
    x.iter().map(|v| 2.0 * v).collect()
}

/// Multiplication by `i` on `C^k` written as real pairs `(re, im)`.
pub fn complex_structure(v: &[f64]) -> Vec<f64> {
    v.chunks(2).flat_map(|p| [-p[1], p[0]]).collect()
}

/// Hessian-vector product of `|x|^2` by central differences of the gradient.
fn hessian_vector(x: &[f64], v: &[f64]) -> Vec<f64> {
    let eps = 1e-4;
    let xp: Vec<f64> = x.iter().zip(v).map(|(a, b)| a + eps * b).collect();
    let xm: Vec<f64> = x.iter().zip(v).map(|(a, b)| a - eps * b).collect();
    grad_sq_norm(&xp)
        .iter()
        .zip(grad_sq_norm(&xm))
        .map(|(p, m)| (p - m) / (2.0 * eps))
        .collect()
}

/// `<Hess f(v), v> + <Hess f(Jv), Jv>` for `f = |x|^2` at `x`.
pub fn convexity_expression(x: &[f64], v: &[f64]) -> f64 {
    let jv = complex_structure(v);
    let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(p, q)| p * q).sum::<f64>();
    dot(&hessian_vector(x, v), v) + dot(&hessian_vector(x, &jv), &jv)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn validation_examples() {
        assert!(TorusTarget::circle(&[1], 0.5).unwrap().validate().valid);
        let bad = TorusTarget::circle(&[1, -1], 0.5).unwrap().validate();
        assert!(!bad.valid);
        assert!(!bad.checks.iter().find(|c| c.name == "open_half_space").unwrap().passed);
        let orth = TorusTarget::new(vec![vec![1, 0], vec![0, 1]], vec![1.0, 1.0]).unwrap();
        assert!(orth.validate().valid);
    }

    #[test]
    fn validation_rejects_walls_and_outside() {
        // tau on the ray of mu_1
        let t = TorusTarget::new(vec![vec![1, 0], vec![0, 1]], vec![1.0, 0.0]).unwrap();
        let rep = t.validate();
        assert!(!rep.valid);
        assert!(!rep.checks.iter().find(|c| c.name == "wall_genericity").unwrap().passed);
        let out = TorusTarget::new(vec![vec![1, 0], vec![0, 1]], vec![-1.0, 1.0]).unwrap();
        assert!(!out.validate().valid);
        let nonspan = TorusTarget::new(vec![vec![1, 0], vec![2, 0]], vec![1.0, 0.0]).unwrap();
        assert!(!nonspan.validate().valid);
    }

    #[test]
    fn moment_map_examples() {
        let t = TorusTarget::circle(&[1], 0.5).unwrap();
        assert_eq!(t.moment_map(&[c(1.0, 0.0)]), vec![0.0]);
        assert_eq!(t.moment_map(&[c(0.0, 0.0)]), vec![-0.5]);
        let orth = TorusTarget::new(vec![vec![1, 0], vec![0, 1]], vec![1.0, 1.0]).unwrap();
        let s = 2f64.sqrt();
        let phi = orth.moment_map(&[c(s, 0.0), c(s, 0.0)]);
        assert!(phi.iter().all(|p| p.abs() < 1e-15));
    }

    #[test]
    fn semistability_examples() {
        let t = TorusTarget::circle(&[1], 0.5).unwrap();
        assert!(t.is_semistable(&[c(3.0, 4.0)]));
        assert!(!t.is_semistable(&[c(0.0, 0.0)]));
        let orth = TorusTarget::new(vec![vec![1, 0], vec![0, 1]], vec![1.0, 1.0]).unwrap();
        assert!(!orth.is_semistable(&[c(1.0, 0.0), c(0.0, 0.0)]));
        let t12 = TorusTarget::circle(&[1, 2], 1.0).unwrap();
        assert!(t12.is_semistable(&[c(0.0, 0.0), c(5.0, 0.0)]));
    }

    #[test]
    fn stabilizer_examples() {
        let t = TorusTarget::circle(&[1], 0.5).unwrap();
        assert_eq!(t.stabilizer_order(&[0]), StabilizerOrder::Finite(1));
        let t2 = TorusTarget::circle(&[2], 1.0).unwrap();
        assert_eq!(t2.stabilizer_order(&[0]), StabilizerOrder::Finite(2));
        let t3 = TorusTarget::new(vec![vec![1, 0]], vec![1.0, 1.0]).unwrap();
        assert_eq!(t3.stabilizer_order(&[0]), StabilizerOrder::Infinite);
    }

    #[test]
    fn orbifold_order_examples() {
        assert_eq!(TorusTarget::circle(&[1], 0.5).unwrap().orbifold_order().unwrap(), 1);
        assert_eq!(TorusTarget::circle(&[2], 1.0).unwrap().orbifold_order().unwrap(), 2);
        assert_eq!(TorusTarget::circle(&[1, 3], 1.0).unwrap().orbifold_order().unwrap(), 3);
        let bad = TorusTarget::circle(&[1], -1.0).unwrap();
        assert!(bad.orbifold_order().is_err());
    }

    #[test]
    fn convexity_expression_is_four_times_norm() {
        let t = TorusTarget::circle(&[1], 0.5).unwrap();
        let x = [2.0, -1.0];
        let v = [0.3, 0.7];
        let e = convexity_expression(&x, &v);
        assert!((e - 4.0 * (0.09 + 0.49)).abs() < 1e-9);
        assert_eq!(convexity_expression(&x, &[0.0, 0.0]), 0.0);
        let rep = t.check_convexity_sample(50, 1);
        assert!(rep.min_value >= -1e-12);
        let t2 = TorusTarget::new(vec![vec![1], vec![2]], vec![1.0]).unwrap();
        let rep = t2.check_convexity_sample(200, 7);
        assert!(rep.min_value >= -1e-12);
        assert!((rep.min_ratio - 4.0).abs() < 1e-6);
    }

    #[test]
    fn json_schema_round_trip() {
        let t = TorusTarget::new(vec![vec![1, 0], vec![0, 1], vec![1, 1]], vec![1.0, 2.0]).unwrap();
        let s = serde_json::to_string(&t).unwrap();
        assert!(s.contains("\"mu\":[[1,0,1],[0,1,1]]"));
        let back: TorusTarget = serde_json::from_str(&s).unwrap();
        assert_eq!(back, t);
        let bad = serde_json::from_str::<TorusTarget>(r#"{"r":2,"k":1,"mu":[[1]],"tau":[1]}"#);
        assert!(bad.is_err());
    }
}
