//! Holomorphic side of the correspondence: polynomial tuples with degree bounds
//! `deg u_j <= <mu_j, d>` and a semistable vector of leading coefficients, up to
//! the constant action of `G = (C*)^r`.

use std::cmp::Ordering;
use std::f64::consts::PI;
use std::fmt;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use num_rational::Ratio;
use serde::de::{self, Deserializer};
use serde::ser::Serializer;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice;
use crate::target::TorusTarget;

pub type Rational = Ratio<i64>;

/// Relative tolerance for comparing normalized coefficients.
pub const ORBIT_TOL: f64 = 1e-9;

/// Polynomial with complex coefficients in ascending degree order.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Polynomial {
    coeffs: Vec<Complex64>,
}

impl Polynomial {
    pub fn new(mut coeffs: Vec<Complex64>) -> Self {
        while coeffs.last().is_some_and(|c| c.norm_sqr() == 0.0) {
            coeffs.pop();
        }
        Self { coeffs }
    }

    pub fn zero() -> Self {
        Self { coeffs: Vec::new() }
    }

    pub fn constant(c: Complex64) -> Self {
        Self::new(vec![c])
    }

    /// From real coefficients, ascending.
    pub fn real(coeffs: &[f64]) -> Self {
        Self::new(coeffs.iter().map(|&c| Complex64::new(c, 0.0)).collect())
    }

    /// Monic polynomial with the given roots.
    pub fn from_roots(roots: &[Complex64]) -> Self {
        let mut c = vec![Complex64::new(1.0, 0.0)];
        for &r in roots {
            let mut next = vec![Complex64::new(0.0, 0.0); c.len() + 1];
            for (i, &a) in c.iter().enumerate() {
                next[i + 1] += a;
                next[i] -= a * r;
            }
            c = next;
        }
        Self::new(c)
    }

    pub fn coeffs(&self) -> &[Complex64] {
        &self.coeffs
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.is_empty()
    }

    pub fn degree(&self) -> Option<usize> {
        self.coeffs.len().checked_sub(1)
    }

    pub fn coeff(&self, i: usize) -> Complex64 {
        self.coeffs.get(i).copied().unwrap_or_default()
    }

    pub fn leading(&self) -> Option<Complex64> {
        self.coeffs.last().copied()
    }

    pub fn eval(&self, z: Complex64) -> Complex64 {
        self.coeffs
            .iter()
            .rev()
            .fold(Complex64::new(0.0, 0.0), |acc, &c| acc * z + c)
    }

    pub fn derivative(&self) -> Self {
        Self::new(
            self.coeffs
                .iter()
                .enumerate()
                .skip(1)
                .map(|(i, &c)| c * i as f64)
                .collect(),
        )
    }

    pub fn scale(&self, s: Complex64) -> Self {
        Self::new(self.coeffs.iter().map(|&c| c * s).collect())
    }

    /// Roots by Aberth-Ehrlich iteration.
    pub fn roots(&self) -> Vec<Complex64> {
        let Some(n) = self.degree().filter(|&n| n > 0) else {
            return Vec::new();
        };
        let lead = self.coeffs[n];
        let monic: Vec<Complex64> = self.coeffs.iter().map(|&c| c / lead).collect();
        let p = Polynomial::new(monic);
        let dp = p.derivative();
        let bound = 1.0 + p.coeffs[..n].iter().map(|c| c.norm()).fold(0.0, f64::max);
        let mut z: Vec<Complex64> = (0..n)
            .map(|i| Complex64::from_polar(0.5 * bound, 2.0 * PI * (i as f64 + 0.25) / n as f64))
            .collect();
        for _ in 0..500 {
            let mut moved = 0.0f64;
            for i in 0..n {
                let pv = p.eval(z[i]);
                if pv.norm() == 0.0 {
                    continue;
                }
                let ratio = pv / dp.eval(z[i]);
                let repulsion: Complex64 = (0..n)
                    .filter(|&j| j != i)
                    .map(|j| Complex64::new(1.0, 0.0) / (z[i] - z[j]))
                    .sum();
                let w = ratio / (Complex64::new(1.0, 0.0) - ratio * repulsion);
                if w.is_finite() {
                    z[i] -= w;
                    moved = moved.max(w.norm() / (1.0 + z[i].norm()));
                }
            }
            if moved < 1e-15 {
                break;
            }
        }
        z
    }
}

impl fmt::Display for Polynomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_zero() {
            return write!(f, "0");
        }
        let terms: Vec<String> = self
            .coeffs
            .iter()
            .enumerate()
            .rev()
            .filter(|(_, c)| c.norm_sqr() > 0.0)
            .map(|(i, c)| match i {
                0 => format!("({c})"),
                1 => format!("({c})z"),
                _ => format!("({c})z^{i}"),
            })
            .collect();
        write!(f, "{}", terms.join(" + "))
    }
}

impl Serialize for Polynomial {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let pairs: Vec<[f64; 2]> = self.coeffs.iter().map(|c| [c.re, c.im]).collect();
        pairs.serialize(s)
    }
}

impl<'de> Deserialize<'de> for Polynomial {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let pairs: Vec<[f64; 2]> = Vec::deserialize(d)?;
        Ok(Polynomial::new(
            pairs.into_iter().map(|[re, im]| Complex64::new(re, im)).collect(),
        ))
    }
}

/// Degree class entry: accepts a JSON number or a `"p/q"` string.
fn parse_rational(v: &serde_json::Value) -> std::result::Result<Rational, String> {
    match v {
        serde_json::Value::Number(n) => {
            if let Some(i) = n.as_i64() {
                return Ok(Rational::from_integer(i));
            }
            let f = n.as_f64().ok_or("not a number")?;
            Rational::approximate_float(f)
                .filter(|q| *q.denom() <= 10_000 && (*q.numer() as f64 / *q.denom() as f64 - f).abs() < 1e-12)
                .ok_or_else(|| format!("{f} is not a rational with small denominator"))
        }
        serde_json::Value::String(s) => {
            let (p, q) = s.split_once('/').unwrap_or((s.as_str(), "1"));
            let p: i64 = p.trim().parse().map_err(|_| format!("bad numerator in {s:?}"))?;
            let q: i64 = q.trim().parse().map_err(|_| format!("bad denominator in {s:?}"))?;
            if q == 0 {
                return Err(format!("zero denominator in {s:?}"));
            }
            Ok(Rational::new(p, q))
        }
        _ => Err("degree entries must be numbers or \"p/q\" strings".into()),
    }
}

fn rational_to_json(q: &Rational) -> serde_json::Value {
    if q.is_integer() {
        serde_json::Value::from(*q.numer())
    } else {
        serde_json::Value::from(format!("{}/{}", q.numer(), q.denom()))
    }
}

/// A polynomial tuple together with its degree class `d`.
#[derive(Debug, Clone, PartialEq)]
pub struct VortexDatum {
    pub d: Vec<Rational>,
    pub polys: Vec<Polynomial>,
}

#[derive(Serialize, Deserialize)]
struct DatumJson {
    d: Vec<serde_json::Value>,
    polys: Vec<Polynomial>,
}

impl Serialize for VortexDatum {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        DatumJson {
            d: self.d.iter().map(rational_to_json).collect(),
            polys: self.polys.clone(),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for VortexDatum {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let j = DatumJson::deserialize(d)?;
        let d = j
            .d
            .iter()
            .map(parse_rational)
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(de::Error::custom)?;
        Ok(VortexDatum { d, polys: j.polys })
    }
}

impl VortexDatum {
    pub fn new(d: Vec<Rational>, polys: Vec<Polynomial>) -> Self {
        Self { d, polys }
    }

    /// Datum with integer degree class.
    pub fn integral(d: &[i64], polys: Vec<Polynomial>) -> Self {
        Self::new(d.iter().map(|&x| Rational::from_integer(x)).collect(), polys)
    }

    fn check_shape(&self, t: &TorusTarget) -> Result<()> {
        if self.d.len() != t.rank() {
            return Err(Error::InvalidDatum(format!(
                "degree vector has {} entries, target rank is {}",
                self.d.len(),
                t.rank()
            )));
        }
        if self.polys.len() != t.dim() {
            return Err(Error::InvalidDatum(format!(
                "{} polynomials for a target of dimension {}",
                self.polys.len(),
                t.dim()
            )));
        }
        Ok(())
    }

    /// Evaluates all components at `z`.
    pub fn eval(&self, z: Complex64) -> Vec<Complex64> {
        self.polys.iter().map(|p| p.eval(z)).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DegreeBound {
    #[serde(serialize_with = "ser_rational", deserialize_with = "de_rational")]
    pub value: Rational,
    pub integral: bool,
}

fn ser_rational<S: Serializer>(q: &Rational, s: S) -> std::result::Result<S::Ok, S::Error> {
    rational_to_json(q).serialize(s)
}

fn de_rational<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<Rational, D::Error> {
    let v = serde_json::Value::deserialize(d)?;
    parse_rational(&v).map_err(de::Error::custom)
}

impl DegreeBound {
    /// `floor(<mu_j, d>)` when nonnegative.
    pub fn max_degree(&self) -> Option<usize> {
        (self.value >= Rational::from_integer(0)).then(|| self.value.floor().to_integer() as usize)
    }
}

/// `<mu_j, d>` for each coordinate.
pub fn degree_bounds(t: &TorusTarget, d: &[Rational]) -> Vec<DegreeBound> {
    (0..t.dim())
        .map(|j| {
            let value = t
                .weight(j)
                .iter()
                .zip(d)
                .fold(Rational::from_integer(0), |acc, (&w, q)| acc + q * w);
            DegreeBound {
                value,
                integral: value.is_integer(),
            }
        })
        .collect()
}

/// Coefficient of `z^{<mu_j, d>}` when that exponent is a nonnegative integer, else 0.
pub fn value_at_infinity(t: &TorusTarget, datum: &VortexDatum) -> Vec<Complex64> {
    degree_bounds(t, &datum.d)
        .iter()
        .zip(&datum.polys)
        .map(|(b, p)| match b.max_degree() {
            Some(n) if b.integral => p.coeff(n),
            _ => Complex64::new(0.0, 0.0),
        })
        .collect()
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Admissibility {
    pub admissible: bool,
    pub degree_bounds_hold: bool,
    pub semistable_at_infinity: bool,
    pub reasons: Vec<String>,
}

pub fn admissibility(t: &TorusTarget, datum: &VortexDatum) -> Result<Admissibility> {
    datum.check_shape(t)?;
    let mut reasons = Vec::new();
    for (j, (b, p)) in degree_bounds(t, &datum.d).iter().zip(&datum.polys).enumerate() {
        match (p.degree(), b.max_degree()) {
            (None, _) => {}
            (Some(_), None) => reasons.push(format!(
                "u_{j} must vanish since <mu_{j}, d> = {} < 0",
                b.value
            )),
            (Some(deg), Some(max)) if deg > max => reasons.push(format!(
                "deg u_{j} = {deg} exceeds <mu_{j}, d> = {}",
                b.value
            )),
            _ => {}
        }
    }
    let degree_bounds_hold = reasons.is_empty();
    let x = value_at_infinity(t, datum);
    let semistable_at_infinity = t.is_semistable(&x);
    if !semistable_at_infinity {
        reasons.push(format!(
            "u(inf) has support {:?}, which is not semistable",
            TorusTarget::support(&x)
        ));
    }
    Ok(Admissibility {
        admissible: degree_bounds_hold && semistable_at_infinity,
        degree_bounds_hold,
        semistable_at_infinity,
        reasons,
    })
}

pub fn is_admissible(t: &TorusTarget, datum: &VortexDatum) -> bool {
    admissibility(t, datum).is_ok_and(|a| a.admissible)
}

/// `g^{mu_j}` for `g = exp(zeta)`.
fn character(t: &TorusTarget, j: usize, log_g: &[Complex64]) -> Complex64 {
    t.weight(j)
        .iter()
        .zip(log_g)
        .map(|(&w, z)| z * w as f64)
        .sum::<Complex64>()
        .exp()
}

/// Acts by the constant gauge transformation `g = exp(log_g)`: `u_j -> g^{mu_j} u_j`.
pub fn act_log(t: &TorusTarget, datum: &VortexDatum, log_g: &[Complex64]) -> VortexDatum {
    VortexDatum {
        d: datum.d.clone(),
        polys: datum
            .polys
            .iter()
            .enumerate()
            .map(|(j, p)| p.scale(character(t, j, log_g)))
            .collect(),
    }
}

/// Acts by `g in (C*)^r`.
pub fn act(t: &TorusTarget, datum: &VortexDatum, g: &[Complex64]) -> VortexDatum {
    let log_g: Vec<Complex64> = g.iter().map(|z| z.ln()).collect();
    act_log(t, datum, &log_g)
}

/// Coordinates used to fix the gauge: lowest-index nonzero components whose weights
/// are linearly independent, until they span.
pub fn pivots(t: &TorusTarget, datum: &VortexDatum) -> Option<Vec<usize>> {
    let mut chosen: Vec<usize> = Vec::new();
    for (j, p) in datum.polys.iter().enumerate() {
        if p.is_zero() || chosen.len() == t.rank() {
            continue;
        }
        let mut trial: Vec<&[i64]> = chosen.iter().map(|&i| t.weight(i)).collect();
        trial.push(t.weight(j));
        if lattice::rank_of_vectors(&trial) == trial.len() {
            chosen.push(j);
        }
    }
    (chosen.len() == t.rank()).then_some(chosen)
}

/// Elements `theta in Q^r / Z^r` with `<mu_j, theta> in Z` for all pivots `j`;
/// `exp(2 pi i theta)` is the residual symmetry after fixing the pivot coefficients.
pub fn residual_group(t: &TorusTarget, pivots: &[usize]) -> Vec<Vec<f64>> {
    let m: Vec<Vec<i64>> = pivots.iter().map(|&j| t.weight(j).to_vec()).collect();
    let snf = lattice::smith_normal_form(&m);
    let r = t.rank();
    let mut out = vec![vec![0.0; r]];
    for (i, &e) in snf.diag.iter().enumerate() {
        let mut next = Vec::with_capacity(out.len() * e as usize);
        for base in &out {
            for k in 0..e {
                let mut th = base.clone();
                // theta = V * phi with phi_i = k / e_i
                for (row, th_row) in th.iter_mut().enumerate() {
                    *th_row += snf.v[row][i] as f64 * k as f64 / e as f64;
                }
                next.push(th);
            }
        }
        out = next;
    }
    for th in out.iter_mut() {
        for x in th.iter_mut() {
            *x = x.rem_euclid(1.0);
        }
    }
    out
}

fn canonical_arg(c: Complex64) -> f64 {
    let a = c.arg();
    if a > PI - ORBIT_TOL {
        -PI
    } else {
        a
    }
}

/// Canonical representative of the `(C*)^r`-orbit of an admissible datum.
///
/// Pivot leading coefficients are scaled to 1; the remaining finite ambiguity is
/// resolved by the smallest argument of the first non-pivot nonzero coefficient
/// (components in order, ascending degree), ties passed to the next coefficient.
pub fn normal_form(t: &TorusTarget, datum: &VortexDatum) -> Result<VortexDatum> {
    let adm = admissibility(t, datum)?;
    if !adm.admissible {
        return Err(Error::InvalidDatum(format!(
            "normal form requires an admissible datum: {}",
            adm.reasons.join("; ")
        )));
    }
    let piv = pivots(t, datum)
        .ok_or_else(|| Error::InvalidDatum("nonzero components do not span".into()))?;
    let r = t.rank();
    let m = DMatrix::from_fn(r, r, |i, c| t.weight(piv[i])[c] as f64);
    let logs: Vec<Complex64> = piv
        .iter()
        .map(|&j| -datum.polys[j].leading().expect("pivot is nonzero").ln())
        .collect();
    let lu = m.lu();
    let re = lu
        .solve(&DVector::from_iterator(r, logs.iter().map(|z| z.re)))
        .ok_or_else(|| Error::InvalidDatum("singular pivot weights".into()))?;
    let im = lu
        .solve(&DVector::from_iterator(r, logs.iter().map(|z| z.im)))
        .ok_or_else(|| Error::InvalidDatum("singular pivot weights".into()))?;
    let zeta: Vec<Complex64> = (0..r).map(|i| Complex64::new(re[i], im[i])).collect();

    let leading_degree: Vec<Option<usize>> = (0..t.dim())
        .map(|j| piv.contains(&j).then(|| datum.polys[j].degree().unwrap()))
        .collect();
    let tie_coeffs = |d: &VortexDatum| -> Vec<Complex64> {
        d.polys
            .iter()
            .enumerate()
            .flat_map(|(j, p)| {
                let lead = leading_degree[j];
                p.coeffs()
                    .iter()
                    .enumerate()
                    .filter(move |(i, c)| Some(*i) != lead && c.norm_sqr() > 0.0)
                    .map(|(_, &c)| c)
                    .collect::<Vec<_>>()
            })
            .collect()
    };

    let mut best: Option<(Vec<f64>, VortexDatum)> = None;
    for theta in residual_group(t, &piv) {
        let log_g: Vec<Complex64> = zeta
            .iter()
            .zip(&theta)
            .map(|(z, th)| z + Complex64::new(0.0, 2.0 * PI * th))
            .collect();
        let mut cand = act_log(t, datum, &log_g);
        for &j in &piv {
            let p = &mut cand.polys[j];
            let n = p.degree().unwrap();
            let mut c = p.coeffs().to_vec();
            c[n] = Complex64::new(1.0, 0.0);
            *p = Polynomial::new(c);
        }
        let key: Vec<f64> = tie_coeffs(&cand).into_iter().map(canonical_arg).collect();
        let better = match &best {
            None => true,
            Some((bk, _)) => compare_keys(&key, bk) == Ordering::Less,
        };
        if better {
            best = Some((key, cand));
        }
    }
    Ok(best.expect("residual group contains the identity").1)
}

fn compare_keys(a: &[f64], b: &[f64]) -> Ordering {
    for (x, y) in a.iter().zip(b) {
        if (x - y).abs() > 1e-7 {
            return x.partial_cmp(y).unwrap_or(Ordering::Equal);
        }
    }
    Ordering::Equal
}

/// Coefficient-wise comparison with relative tolerance.
pub fn data_close(a: &VortexDatum, b: &VortexDatum, tol: f64) -> bool {
    if a.d != b.d || a.polys.len() != b.polys.len() {
        return false;
    }
    a.polys.iter().zip(&b.polys).all(|(p, q)| {
        let n = p.coeffs().len().max(q.coeffs().len());
        let scale = 1.0 + p.coeffs().iter().chain(q.coeffs()).map(|c| c.norm()).fold(0.0, f64::max);
        (0..n).all(|i| (p.coeff(i) - q.coeff(i)).norm() <= tol * scale)
    })
}

/// Two admissible data are isomorphic iff their normal forms agree.
pub fn isomorphic(t: &TorusTarget, a: &VortexDatum, b: &VortexDatum) -> Result<bool> {
    Ok(data_close(&normal_form(t, a)?, &normal_form(t, b)?, ORBIT_TOL))
}

/// Expected complex dimension of admissible data of class `d` modulo gauge.
pub fn moduli_dimension(t: &TorusTarget, d: &[Rational]) -> i64 {
    degree_bounds(t, d)
        .iter()
        .filter_map(DegreeBound::max_degree)
        .map(|m| m as i64 + 1)
        .sum::<i64>()
        - t.rank() as i64
}

/// Invertibility of the leading-coefficient matrix of a matrix of polynomials whose
/// row `i` has degree at most `lambda_i`.
pub fn matrix_semistable(u: &[Vec<Polynomial>], lambda: &[i64]) -> Result<bool> {
    let n = u.len();
    if lambda.len() != n || u.iter().any(|row| row.len() != n) {
        return Err(Error::Shape {
            expected: n,
            got: lambda.len(),
        });
    }
    let mut lead = DMatrix::<Complex64>::zeros(n, n);
    for (i, row) in u.iter().enumerate() {
        for (j, p) in row.iter().enumerate() {
            if let Some(deg) = p.degree() {
                if lambda[i] < 0 || deg as i64 > lambda[i] {
                    return Err(Error::DegreeBound(format!(
                        "entry ({i}, {j}) has degree {deg} > lambda_{i} = {}",
                        lambda[i]
                    )));
                }
                lead[(i, j)] = p.coeff(lambda[i] as usize);
            }
        }
    }
    let hadamard: f64 = (0..n).map(|i| lead.row(i).norm()).product();
    if hadamard == 0.0 {
        return Ok(false);
    }
    Ok(lead.determinant().norm() > 1e-12 * hadamard)
}
