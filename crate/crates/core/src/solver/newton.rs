use nalgebra::{DMatrix, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::residual::Problem;
use super::{CertificateConfig, NewtonConfig, SolveConfig};
use crate::error::{Error, Result};
use crate::pdegrid::{pcg, BlockOperator, FieldState, Geometry, Preconditioner};
use crate::target::TorusTarget;

/// Quantitative contraction test: an inverse bound `c`, a radius `delta`, the
/// initial residual and the measured variation of the linearization on the ball.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Certificate {
    pub c: f64,
    pub delta: f64,
    pub f0_norm: f64,
    pub lipschitz_margin: f64,
    pub verdict: bool,
}

impl Certificate {
    pub fn evaluate(c: f64, delta: f64, f0_norm: f64, lipschitz_margin: f64) -> Self {
        let verdict = f0_norm < delta / (4.0 * c) && lipschitz_margin < 1.0 / (2.0 * c);
        Self { c, delta, f0_norm, lipschitz_margin, verdict }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct NewtonReport {
    pub iterations: usize,
    pub converged: bool,
    pub residual_history: Vec<f64>,
    pub step_history: Vec<f64>,
    pub cg_iterations: Vec<usize>,
    pub final_residual: f64,
    /// Largest `L2` distance of an iterate from the initial guess.
    pub max_excursion: f64,
}

#[derive(Debug, Clone)]
pub struct NewtonOutcome {
    /// Input pair with the converged `xi`.
    pub state: FieldState,
    pub certificate: Option<Certificate>,
    pub report: NewtonReport,
}

/// Map applied to every Newton update before the line search.
pub type Projection<'a> = &'a dyn Fn(&mut [f64]);

pub(crate) fn clamp_xi(state: &FieldState, xi: &mut [f64]) {
    let r = state.rank;
    for node in 0..state.len() {
        if state.grid.is_boundary(node) {
            xi[node * r..(node + 1) * r].iter_mut().for_each(|v| *v = 0.0);
        }
    }
}

fn l2_distance(p: &Problem, a: &[f64], b: &[f64]) -> f64 {
    let d: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    p.norm(&d)
}

/// Damped Newton iteration on `xi` with `xi = 0` on the boundary.
pub fn newton_solve(state: &FieldState, target: &TorusTarget, config: &SolveConfig) -> Result<NewtonOutcome> {
    newton_solve_projected(state, target, config, None)
}

/// Newton iteration whose updates pass through `project` before the line search.
pub fn newton_solve_projected(
    state: &FieldState,
    target: &TorusTarget,
    config: &SolveConfig,
    project: Option<Projection>,
) -> Result<NewtonOutcome> {
    config.validate()?;
    let p = Problem::new(state, target)?;
    let mut xi = state.xi.clone();
    clamp_xi(state, &mut xi);
    let certificate = if config.certificate.enabled {
        Some(measure_certificate(&p, &xi, &config.certificate, &config.newton)?)
    } else {
        None
    };
    let report = newton_core(&p, &mut xi, &config.newton, project)?;
    let mut out = state.clone();
    out.xi = xi;
    Ok(NewtonOutcome { state: out, certificate, report })
}

fn newton_core(
    p: &Problem,
    xi: &mut Vec<f64>,
    cfg: &NewtonConfig,
    project: Option<Projection>,
) -> Result<NewtonReport> {
    let start = xi.clone();
    let mut f = p.interior_residual(xi)?;
    let mut fnorm = p.norm(&f);
    let mut rep = NewtonReport { residual_history: vec![fnorm], ..Default::default() };
    for it in 0..cfg.max_iters {
        if fnorm < cfg.residual_tol {
            break;
        }
        let op = p.operator(xi, 0.0)?;
        let pre = Preconditioner::default_for(&op)?;
        let rhs = p.weighted_rhs(&f);
        // inexact Newton: the linear tolerance tightens with the residual
        let tol = cfg.cg_tol.max(1e-4_f64.min(fnorm));
        let cg = pcg(&op, &pre, &rhs, None, tol, cfg.cg_max_iters)?;
        rep.cg_iterations.push(cg.iterations);
        let mut delta = cg.x;
        if let Some(proj) = project {
            proj(&mut delta);
        }
        let mut t = cfg.initial_step;
        loop {
            let trial: Vec<f64> = xi.iter().zip(&delta).map(|(x, d)| x + t * d).collect();
            let ft = p.interior_residual(&trial)?;
            let nt = p.norm(&ft);
            if nt.is_finite() && nt < (1.0 - 1e-4 * t) * fnorm {
                *xi = trial;
                f = ft;
                fnorm = nt;
                break;
            }
            t *= cfg.backtrack;
            if t < cfg.min_step {
                rep.iterations = it;
                return Err(Error::Diverged { iteration: it, residual: fnorm });
            }
        }
        rep.iterations = it + 1;
        rep.step_history.push(t);
        rep.residual_history.push(fnorm);
        rep.max_excursion = rep.max_excursion.max(l2_distance(p, xi, &start));
    }
    rep.final_residual = fnorm;
    rep.converged = fnorm < cfg.residual_tol;
    if !rep.converged {
        return Err(Error::Diverged { iteration: rep.iterations, residual: fnorm });
    }
    Ok(rep)
}

/// Smooth random interior field: uniform noise smoothed twice by `(K + W)^{-1} W`.
pub(crate) fn smooth_random_field(p: &Problem, rng: &mut ChaCha8Rng) -> Result<Vec<f64>> {
    let n = p.len() * p.rank();
    let mut v: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
    let smoother = {
        // the mass is the identity: operator K + W
        let r = p.rank();
        let mut mass = vec![0.0; p.len() * r * r];
        for node in 0..p.len() {
            for c in 0..r {
                mass[node * r * r + c * r + c] = 1.0;
            }
        }
        BlockOperator::new(&p.state.grid, r, mass)?
    };
    let pre = Preconditioner::default_for(&smoother)?;
    for _ in 0..2 {
        let mut rhs: Vec<f64> = p.weighted_rhs(&v).iter().map(|b| -b).collect();
        p.clamp(&mut rhs);
        v = pcg(&smoother, &pre, &rhs, None, 1e-10, 10_000)?.x;
    }
    Ok(v)
}

fn spectral_norm(m: &[f64], r: usize) -> f64 {
    if r == 1 {
        return m[0].abs();
    }
    let e = SymmetricEigen::new(DMatrix::from_row_slice(r, r, m));
    e.eigenvalues.iter().fold(0.0, |a, v| a.max(v.abs()))
}

/// Measures the inverse bound by inverse power iteration, and the variation of
/// the linearization over random smooth perturbations of norm `delta`.
pub fn measure_certificate(
    p: &Problem,
    xi0: &[f64],
    cfg: &CertificateConfig,
    newton: &NewtonConfig,
) -> Result<Certificate> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let f0 = p.norm(&p.interior_residual(xi0)?);
    let op = p.operator(xi0, 0.0)?;
    let pre = Preconditioner::default_for(&op)?;
    let mut v = smooth_random_field(p, &mut rng)?;
    let nv = p.norm(&v);
    v.iter_mut().for_each(|x| *x /= nv);
    let mut c = 0.0;
    for _ in 0..cfg.power_iters.max(1) {
        let mut rhs: Vec<f64> = p.weighted_rhs(&v).iter().map(|b| -b).collect();
        p.clamp(&mut rhs);
        let w = pcg(&op, &pre, &rhs, None, newton.cg_tol.max(1e-12), newton.cg_max_iters)?.x;
        let nw = p.norm(&w);
        if nw == 0.0 {
            break;
        }
        c = nw;
        v = w.into_iter().map(|x| x / nw).collect();
    }
    let r = p.rank();
    let base = p.moment_matrices(xi0);
    let mut margin: f64 = 0.0;
    for _ in 0..cfg.samples {
        let s = smooth_random_field(p, &mut rng)?;
        let ns = p.norm(&s);
        if ns == 0.0 {
            continue;
        }
        let scale = cfg.delta / ns;
        let shifted: Vec<f64> = xi0.iter().zip(&s).map(|(x, d)| x + scale * d).collect();
        let m = p.moment_matrices(&shifted);
        for node in 0..p.len() {
            if p.state.grid.is_boundary(node) {
                continue;
            }
            let blk = node * r * r..(node + 1) * r * r;
            let diff: Vec<f64> = m[blk.clone()].iter().zip(&base[blk]).map(|(a, b)| a - b).collect();
            margin = margin.max(spectral_norm(&diff, r));
        }
    }
    Ok(Certificate::evaluate(c, cfg.delta, f0, margin))
}

fn deck_shift(state: &FieldState) -> Result<(usize, usize)> {
    let n = match state.grid.geometry() {
        Geometry::Cover { n, .. } => n as usize,
        _ => return Err(Error::GridMismatch("symmetric solves need a cover grid".into())),
    };
    let nt = state.grid.ntheta().expect("cover grids are polar");
    Ok((n, nt / n))
}

/// Largest violation of `xi(theta + 2 pi) = xi(theta)` on a cover grid.
pub fn symmetry_defect(state: &FieldState, xi: &[f64]) -> Result<f64> {
    let (_, shift) = deck_shift(state)?;
    let r = state.rank;
    let mut worst: f64 = 0.0;
    for c in 0..r {
        let comp = FieldState::component(xi, r, c);
        let rot = state.grid.rotate(&comp, shift);
        worst = rot.iter().zip(&comp).fold(worst, |w, (a, b)| w.max((a - b).abs()));
    }
    Ok(worst)
}

/// Newton solve on a cover grid with every update averaged over the deck
/// rotations. `gamma` holds the angles of the deck element acting on the fibre.
pub fn symmetric_solve(
    state: &FieldState,
    gamma: &[f64],
    target: &TorusTarget,
    config: &SolveConfig,
) -> Result<NewtonOutcome> {
    let (n, shift) = deck_shift(state)?;
    if gamma.len() != state.rank {
        return Err(Error::Shape { expected: state.rank, got: gamma.len() });
    }
    let g = &state.grid;
    let (r, k) = (state.rank, state.dim);
    let tol = config.symmetry.tolerance;
    // (A, u)(theta + 2 pi) = gamma (A, u)(theta)
    let phases: Vec<num_complex::Complex64> = (0..k)
        .map(|j| num_complex::Complex64::from_polar(1.0, target.pair(j, gamma)))
        .collect();
    let nt = g.ntheta().unwrap();
    let rings = g.ring_radii().unwrap().len();
    let mut defect: f64 = 0.0;
    let mut scale: f64 = 1.0;
    for i in 0..rings {
        for jj in 0..nt {
            let a = g.ring_node(i, jj);
            let b = g.ring_node(i, jj + shift);
            for j in 0..k {
                let want = phases[j] * state.u[a * k + j];
                defect = defect.max((state.u[b * k + j] - want).norm());
                scale = scale.max(state.u[a * k + j].norm());
            }
            for c in 0..r {
                defect = defect.max((state.ax[b * r + c] - state.ax[a * r + c]).abs());
                defect = defect.max((state.ay[b * r + c] - state.ay[a * r + c]).abs());
                defect = defect.max((state.xi[b * r + c] - state.xi[a * r + c]).abs());
            }
        }
    }
    if defect > tol * scale {
        return Err(Error::Symmetry(defect));
    }
    let average = move |d: &mut [f64]| {
        for c in 0..r {
            let comp = FieldState::component(d, r, c);
            let mut acc = comp.clone();
            let mut rot = comp;
            for _ in 1..n {
                rot = g.rotate(&rot, shift);
                acc.iter_mut().zip(&rot).for_each(|(a, v)| *a += v);
            }
            acc.iter_mut().for_each(|v| *v /= n as f64);
            FieldState::set_component(d, r, c, &acc);
        }
    };
    newton_solve_projected(state, target, config, Some(&average))
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use num_complex::Complex64;

    use super::*;
    use crate::pdegrid::Grid;
    use crate::solver::residual;

    fn jt_target() -> TorusTarget {
        TorusTarget::circle(&[1], 0.5).unwrap()
    }

    #[test]
    fn constant_vortex_returns_immediately() {
        let t = jt_target();
        let g = Arc::new(Grid::disk(4.0, 16, 16).unwrap());
        let s = FieldState::from_section(g, 1, |_, _| vec![Complex64::new(1.0, 0.0)]).unwrap();
        let out = newton_solve(&s, &t, &SolveConfig::default()).unwrap();
        assert_eq!(out.report.iterations, 0);
        assert!(out.state.xi.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn certificate_inequalities() {
        let c = Certificate::evaluate(1.0, 0.4, 0.05, 0.1);
        assert!(c.verdict);
        assert!(!Certificate::evaluate(1.0, 0.4, 0.1, 0.1).verdict);
        assert!(!Certificate::evaluate(1.0, 0.4, 0.05, 0.5).verdict);
    }

    #[test]
    fn degree_one_solve_has_small_residual() {
        let t = jt_target();
        let g = Arc::new(Grid::disk(8.0, 128, 32).unwrap());
        let s = FieldState::from_section(g, 1, |x, y| vec![Complex64::new(x, y)]).unwrap();
        let out = newton_solve(&s, &t, &SolveConfig::default()).unwrap();
        let f = residual(&out.state, &t).unwrap();
        let p = Problem::new(&out.state, &t).unwrap();
        let mut f = f;
        p.clamp(&mut f);
        assert!(p.norm(&f) < 1e-8);
        assert!(out.report.converged);
        // the gauge potential lowers |u| toward the unit circle
        let u = out.state.u_xi(&t);
        let k = out.state.grid.ring_node(64, 0);
        assert!((u[k].norm() - 1.0).abs() < 0.02, "{}", u[k].norm());
    }

    #[test]
    fn certificate_passes_near_a_vortex_and_newton_stays_in_the_ball() {
        let t = jt_target();
        let g = Arc::new(Grid::disk(2.0, 24, 32).unwrap());
        let s = FieldState::from_section(g, 1, |x, y| vec![Complex64::new(1.0 + 0.005 * x, 0.003 * y)]).unwrap();
        let mut cfg = SolveConfig::default();
        cfg.certificate.enabled = true;
        cfg.certificate.delta = 0.1;
        let out = newton_solve(&s, &t, &cfg).unwrap();
        let cert = out.certificate.unwrap();
        // inverse of the lowest eigenvalue of Delta + 1 on disk(2)
        let expected = 1.0 / (1.0 + (2.404825557695773_f64 / 2.0).powi(2));
        assert!((cert.c - expected).abs() < 0.02, "{cert:?}");
        assert!(cert.verdict, "{cert:?}");
        assert!(out.report.max_excursion < cert.delta);
    }

    #[test]
    fn vanishing_section_leaves_the_dirichlet_laplacian() {
        // with u = 0 the equation is Delta xi = tau, still coercive under xi = 0 on the boundary
        let t = jt_target();
        let g = Arc::new(Grid::disk(4.0, 16, 16).unwrap());
        let s = FieldState::zeros(g.clone(), 1, 1);
        let out = newton_solve(&s, &t, &SolveConfig::default()).unwrap();
        let exact = g.sample(|x, y| 0.5 * (16.0 - x * x - y * y) / 4.0);
        let err = out.state.xi.iter().zip(&exact).fold(0.0_f64, |m, (a, b)| m.max((a - b).abs()));
        assert!(err < 1e-9, "{err}");
    }

    fn cover_state(n: u32) -> FieldState {
        let g = Arc::new(Grid::cover(n, 1.0, 3.0, 24, 32 * n as usize).unwrap());
        let mut s = FieldState::from_section(g.clone(), 1, |_, _| vec![Complex64::new(0.0, 0.0)]).unwrap();
        // u = r^{1/2} exp(i theta / 2) lifted to the cover: it changes sign after 2 pi
        for k in 0..g.len() {
            let (r, th) = (g.r()[k], g.theta()[k]);
            s.u[k] = Complex64::from_polar(r.sqrt() * (1.0 + 0.1 * th.cos()), th / 2.0);
        }
        s
    }

    #[test]
    fn symmetric_solve_keeps_deck_symmetry() {
        let t = jt_target();
        let s = cover_state(2);
        let out = symmetric_solve(&s, &[std::f64::consts::PI], &t, &SolveConfig::default()).unwrap();
        assert!(symmetry_defect(&out.state, &out.state.xi).unwrap() < 1e-10);
        let plain = newton_solve(&s, &t, &SolveConfig::default()).unwrap();
        let diff = plain.state.xi.iter().zip(&out.state.xi).fold(0.0_f64, |m, (a, b)| m.max((a - b).abs()));
        assert!(diff < 1e-8, "{diff}");
        // a wrong deck element is rejected
        assert!(matches!(symmetric_solve(&s, &[0.0], &t, &SolveConfig::default()), Err(Error::Symmetry(_))));
    }

    #[test]
    fn trivial_deck_group_matches_plain_newton() {
        let t = jt_target();
        let g = Arc::new(Grid::cover(1, 1.0, 3.0, 16, 32).unwrap());
        let s = FieldState::from_section(g, 1, |x, y| vec![Complex64::new(x, y)]).unwrap();
        let a = symmetric_solve(&s, &[0.0], &t, &SolveConfig::default()).unwrap();
        let b = newton_solve(&s, &t, &SolveConfig::default()).unwrap();
        assert_eq!(a.state.xi, b.state.xi);
    }
}
