//! Rotationally symmetric vortices `u = f(r) e^{i d theta}`, `a = alpha(r) d theta`
//! for a circle acting with weight `w`, found by two-sided shooting.
//!
//! The reduced equations are `f' = (d - w alpha) f / r` and
//! `alpha' = r (tau - w f^2 / 2)`, with `f ~ c r^d` at the origin and
//! `f -> sqrt(2 tau / w)`, `w alpha -> d` at infinity.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const STEP: f64 = 1e-3;

/// Modified Bessel function `K_nu(x)` from its large-argument expansion;
/// relative accuracy better than `1e-8` for `x >= 10`.
pub fn bessel_k(nu: f64, x: f64) -> f64 {
    let mu = 4.0 * nu * nu;
    let mut term = 1.0;
    let mut sum = 1.0;
    for k in 1..60 {
        let next = term * (mu - ((2 * k - 1) as f64).powi(2)) / (8.0 * k as f64 * x);
        if next.abs() >= term.abs() {
            break;
        }
        term = next;
        sum += term;
        if term.abs() < 1e-17 * sum.abs() {
            break;
        }
    }
    (std::f64::consts::PI / (2.0 * x)).sqrt() * (-x).exp() * sum
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RadialProfile {
    pub weight: i64,
    pub tau: f64,
    pub degree: u32,
    /// `sqrt(2 tau / w)`.
    pub f_inf: f64,
    /// Decay rate `sqrt(2 tau w)` of `f_inf - f`.
    pub mass: f64,
    /// `f ~ c r^d` at the origin.
    pub c: f64,
    /// Tail `log(f / f_inf) ~ tail K_0(mass r)`.
    pub tail: f64,
    pub match_radius: f64,
    pub outer_radius: f64,
    /// Mismatch of the two shooting branches at the matching radius.
    pub matching_residual: f64,
    pub h: f64,
    f: Vec<f64>,
    alpha: Vec<f64>,
}

fn rk4<const N: usize>(y: [f64; N], r: f64, h: f64, rhs: &impl Fn(f64, &[f64; N]) -> [f64; N]) -> [f64; N] {
    let add = |a: &[f64; N], b: &[f64; N], s: f64| {
        let mut o = *a;
        for i in 0..N {
            o[i] += s * b[i];
        }
        o
    };
    let k1 = rhs(r, &y);
    let k2 = rhs(r + h / 2.0, &add(&y, &k1, h / 2.0));
    let k3 = rhs(r + h / 2.0, &add(&y, &k2, h / 2.0));
    let k4 = rhs(r + h, &add(&y, &k3, h));
    let mut o = y;
    for i in 0..N {
        o[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
    }
    o
}

struct Shooter {
    w: f64,
    tau: f64,
    d: f64,
    f_inf: f64,
    mass: f64,
}

impl Shooter {
    /// Outward state `(log f - d log r, alpha)`.
    fn outward_rhs(&self, r: f64, y: &[f64; 2]) -> [f64; 2] {
        let m = if r == 0.0 { 0.0 } else { -self.w * y[1] / r };
        let f2 = (2.0 * y[0]).exp() * r.powf(2.0 * self.d);
        [m, r * (self.tau - 0.5 * self.w * f2)]
    }

    /// Inward state `(log (f / f_inf), w alpha - d)`.
    fn inward_rhs(&self, r: f64, y: &[f64; 2]) -> [f64; 2] {
        [-y[1] / r, -self.w * r * self.tau * (2.0 * y[0]).exp_m1()]
    }

    fn outward(&self, log_c: f64, steps: usize, mut keep: Option<&mut Vec<[f64; 2]>>) -> [f64; 2] {
        let mut y = [log_c, 0.0];
        if let Some(k) = keep.as_deref_mut() {
            k.push(y);
        }
        for i in 0..steps {
            y = rk4(y, i as f64 * STEP, STEP, &|r, y| self.outward_rhs(r, y));
            if let Some(k) = keep.as_deref_mut() {
                k.push(y);
            }
        }
        y
    }

    fn inward(&self, tail: f64, from: usize, to: usize, mut keep: Option<&mut Vec<[f64; 2]>>) -> [f64; 2] {
        let r0 = from as f64 * STEP;
        let x = self.mass * r0;
        let mut y = [tail * bessel_k(0.0, x), tail * x * bessel_k(1.0, x)];
        if let Some(k) = keep.as_deref_mut() {
            k.push(y);
        }
        for i in (to..from).rev() {
            y = rk4(y, (i + 1) as f64 * STEP, -STEP, &|r, y| self.inward_rhs(r, y));
            if let Some(k) = keep.as_deref_mut() {
                k.push(y);
            }
        }
        y
    }

    /// `+1` if `f` overshoots `f_inf`, `-1` if it turns down first, `0` if neither
    /// happens before `steps`.
    fn classify(&self, log_c: f64, steps: usize) -> i32 {
        let mut y = [log_c, 0.0];
        let log_inf = self.f_inf.ln();
        for i in 0..steps {
            let r = (i + 1) as f64 * STEP;
            y = rk4(y, i as f64 * STEP, STEP, &|r, y| self.outward_rhs(r, y));
            if y[0] + self.d * r.ln() >= log_inf {
                return 1;
            }
            if self.w * y[1] >= self.d {
                return -1;
            }
        }
        0
    }

    fn mismatch(&self, log_c: f64, tail: f64, n_match: usize, n_outer: usize) -> [f64; 2] {
        let o = self.outward(log_c, n_match, None);
        let i = self.inward(tail, n_outer, n_match, None);
        let rm = n_match as f64 * STEP;
        [o[0] + self.d * rm.ln() - self.f_inf.ln() - i[0], self.w * o[1] - self.d - i[1]]
    }
}

/// Radial vortex of degree `d` for the circle acting with weight `w` and level `tau`.
pub fn radial_oracle(w: i64, tau: f64, d: u32) -> Result<RadialProfile> {
    if w <= 0 || !(tau > 0.0 && tau.is_finite()) {
        return Err(Error::InvalidTarget("radial profiles need w > 0 and tau > 0".into()));
    }
    let wf = w as f64;
    let f_inf = (2.0 * tau / wf).sqrt();
    let mass = (2.0 * tau * wf).sqrt();
    let scale = 1.0 / mass;
    let outer = (20.0 * scale.max(1.0) * (1.0 + (d as f64).sqrt() / 4.0)).max(20.0);
    let n_outer = (outer / STEP).round() as usize;
    if d == 0 {
        return Ok(RadialProfile {
            weight: w,
            tau,
            degree: 0,
            f_inf,
            mass,
            c: f_inf,
            tail: 0.0,
            match_radius: 0.0,
            outer_radius: n_outer as f64 * STEP,
            matching_residual: 0.0,
            h: STEP,
            f: vec![f_inf; n_outer + 1],
            alpha: vec![0.0; n_outer + 1],
        });
    }
    let sh = Shooter { w: wf, tau, d: d as f64, f_inf, mass };
    // bisection on the separatrix between overshooting and turning down
    let (mut lo, mut hi) = (-40.0, 10.0);
    if sh.classify(lo, n_outer) != -1 || sh.classify(hi, n_outer) != 1 {
        return Err(Error::Shooting("initial bracket does not straddle the vortex".into()));
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        match sh.classify(mid, n_outer) {
            1 => hi = mid,
            -1 => lo = mid,
            _ => {
                lo = mid;
                hi = mid;
            }
        }
    }
    let mut log_c = 0.5 * (lo + hi);
    let n_match = ((3.0 * scale * (1.0 + (d as f64).sqrt() / 2.0)) / STEP).round() as usize;
    let rm = n_match as f64 * STEP;
    let o = sh.outward(log_c, n_match, None);
    let mut tail = (o[0] + sh.d * rm.ln() - f_inf.ln()) / bessel_k(0.0, mass * rm);
    // two-sided Newton on (log c, tail)
    let mut res = sh.mismatch(log_c, tail, n_match, n_outer);
    for _ in 0..50 {
        let norm = res[0].hypot(res[1]);
        if norm < 1e-13 {
            break;
        }
        let (e1, e2) = (1e-7, 1e-7 * tail.abs().max(1e-3));
        let a = sh.mismatch(log_c + e1, tail, n_match, n_outer);
        let b = sh.mismatch(log_c, tail + e2, n_match, n_outer);
        let j = [
            [(a[0] - res[0]) / e1, (b[0] - res[0]) / e2],
            [(a[1] - res[1]) / e1, (b[1] - res[1]) / e2],
        ];
        let det = j[0][0] * j[1][1] - j[0][1] * j[1][0];
        if det == 0.0 || !det.is_finite() {
            return Err(Error::Shooting("singular matching Jacobian".into()));
        }
        let dx = (j[1][1] * res[0] - j[0][1] * res[1]) / det;
        let dy = (j[0][0] * res[1] - j[1][0] * res[0]) / det;
        let mut step = 1.0;
        loop {
            let cand = sh.mismatch(log_c - step * dx, tail - step * dy, n_match, n_outer);
            if cand[0].hypot(cand[1]) < norm || step < 1e-6 {
                log_c -= step * dx;
                tail -= step * dy;
                res = cand;
                break;
            }
            step *= 0.5;
        }
    }
    let matching_residual = res[0].hypot(res[1]);
    if !(matching_residual < 1e-10) {
        return Err(Error::Shooting(format!("matching residual {matching_residual:e}")));
    }
    let mut out_states = Vec::with_capacity(n_match + 1);
    sh.outward(log_c, n_match, Some(&mut out_states));
    let mut in_states = Vec::with_capacity(n_outer - n_match + 1);
    sh.inward(tail, n_outer, n_match, Some(&mut in_states));
    in_states.reverse();
    let mut f = Vec::with_capacity(n_outer + 1);
    let mut alpha = Vec::with_capacity(n_outer + 1);
    for (i, y) in out_states.iter().enumerate() {
        let r = i as f64 * STEP;
        f.push(y[0].exp() * r.powi(d as i32));
        alpha.push(y[1]);
    }
    for y in in_states.iter().skip(1) {
        f.push(f_inf * y[0].exp());
        alpha.push((y[1] + sh.d) / wf);
    }
    Ok(RadialProfile {
        weight: w,
        tau,
        degree: d,
        f_inf,
        mass,
        c: log_c.exp(),
        tail,
        match_radius: rm,
        outer_radius: n_outer as f64 * STEP,
        matching_residual,
        h: STEP,
        f,
        alpha,
    })
}

impl RadialProfile {
    fn derivs(&self, i: usize) -> (f64, f64) {
        let r = i as f64 * self.h;
        let (f, a) = (self.f[i], self.alpha[i]);
        let w = self.weight as f64;
        let d = self.degree as f64;
        let fp = if i == 0 {
            if self.degree == 1 { self.c } else { 0.0 }
        } else {
            (d - w * a) * f / r
        };
        (fp, r * (self.tau - 0.5 * w * f * f))
    }

    fn hermite(&self, r: f64, values: &[f64], slope: impl Fn(usize) -> f64) -> f64 {
        let s = r / self.h;
        let i = (s.floor() as usize).min(values.len() - 2);
        let t = s - i as f64;
        let (p0, p1) = (values[i], values[i + 1]);
        let (m0, m1) = (slope(i) * self.h, slope(i + 1) * self.h);
        let t2 = t * t;
        let t3 = t2 * t;
        (2.0 * t3 - 3.0 * t2 + 1.0) * p0 + (t3 - 2.0 * t2 + t) * m0 + (-2.0 * t3 + 3.0 * t2) * p1 + (t3 - t2) * m1
    }

    /// Modulus profile; beyond the integration range the linear tail is used.
    pub fn f(&self, r: f64) -> f64 {
        let r = r.abs();
        if r >= self.outer_radius {
            return self.f_inf * (self.tail * bessel_k(0.0, self.mass * r)).exp();
        }
        self.hermite(r, &self.f, |i| self.derivs(i).0)
    }

    pub fn alpha(&self, r: f64) -> f64 {
        let r = r.abs();
        let w = self.weight as f64;
        if r >= self.outer_radius {
            let x = self.mass * r;
            return (self.degree as f64 + self.tail * x * bessel_k(1.0, x)) / w;
        }
        self.hermite(r, &self.alpha, |i| self.derivs(i).1)
    }

    pub fn f_prime(&self, r: f64) -> f64 {
        let r = r.abs();
        if r == 0.0 {
            return self.derivs(0).0;
        }
        (self.degree as f64 - self.weight as f64 * self.alpha(r)) * self.f(r) / r
    }

    /// Energy density `|F|^2 + |d_A u|^2 + |Phi|^2` at radius `r`.
    pub fn energy_density(&self, r: f64) -> f64 {
        let f = self.f(r);
        let phi = 0.5 * self.weight as f64 * f * f - self.tau;
        let fp = self.f_prime(r);
        2.0 * phi * phi + 2.0 * fp * fp
    }

    /// Energy inside the disk of the given radius (Simpson on the stored mesh).
    pub fn energy(&self, radius: f64) -> f64 {
        let n = ((radius.min(self.outer_radius) / self.h).round() as usize).min(self.f.len() - 1);
        if n == 0 {
            return 0.0;
        }
        let w = self.weight as f64;
        let vals: Vec<f64> = (0..=n)
            .map(|i| {
                let r = i as f64 * self.h;
                let phi = 0.5 * w * self.f[i] * self.f[i] - self.tau;
                let fp = self.derivs(i).0;
                (2.0 * phi * phi + 2.0 * fp * fp) * r
            })
            .collect();
        2.0 * std::f64::consts::PI * crate::pdegrid::simpson(&vals, self.h)
    }

    pub fn total_energy(&self) -> f64 {
        self.energy(self.outer_radius)
    }

    /// `(r, f, alpha)` rows at the given spacing.
    pub fn table(&self, spacing: f64) -> Vec<(f64, f64, f64)> {
        let n = (self.outer_radius / spacing).floor() as usize;
        (0..=n).map(|i| {
            let r = i as f64 * spacing;
            (r, self.f(r), self.alpha(r))
        }).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bessel_tails_match_tabulated_values() {
        assert!((bessel_k(0.0, 10.0) / 1.778006231616918e-5 - 1.0).abs() < 1e-8);
        assert!((bessel_k(1.0, 10.0) / 1.864877345382558e-5 - 1.0).abs() < 1e-8);
    }

    #[test]
    fn degree_zero_is_constant() {
        let p = radial_oracle(1, 0.5, 0).unwrap();
        assert_eq!(p.f(3.7), 1.0);
        assert_eq!(p.alpha(3.7), 0.0);
        assert_eq!(p.total_energy(), 0.0);
    }

    #[test]
    fn degree_one_profile() {
        let p = radial_oracle(1, 0.5, 1).unwrap();
        assert_eq!(p.f(0.0), 0.0);
        assert!((p.f(20.0) - 1.0).abs() < 1e-6);
        let samples: Vec<f64> = (0..400).map(|i| p.f(i as f64 * 0.05)).collect();
        assert!(samples.windows(2).all(|w| w[1] > w[0]));
        assert!(p.matching_residual < 1e-10);
        // the flux through the plane is 2 pi d / w
        assert!((p.alpha(p.outer_radius) - 1.0).abs() < 1e-9);
    }

    #[test]
    fn energy_equals_twice_tau_times_flux() {
        for (w, tau, d) in [(1, 0.5, 1), (1, 0.5, 2), (2, 1.0, 1), (1, 1.5, 3)] {
            let p = radial_oracle(w, tau, d).unwrap();
            let expected = 4.0 * std::f64::consts::PI * tau * d as f64 / w as f64;
            let e = p.total_energy();
            assert!((e / expected - 1.0).abs() < 1e-6, "{w} {tau} {d}: {e} vs {expected}");
        }
    }
}
