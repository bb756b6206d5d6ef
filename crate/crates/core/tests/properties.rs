//! Property tests for the structural invariants of each module.

use std::f64::consts::PI;
use std::sync::Arc;

use affine_vortex::classifier::{
    act, data_close, is_admissible, moduli_dimension, normal_form, value_at_infinity, Polynomial, VortexDatum,
};
use affine_vortex::diagnostics::{energy, maximum_principle, recover_zeros, Region, decay_fit};
use affine_vortex::orbibundle::{cover_transform_norm, lambda_from_transition, transition_functions, OrbiBundleData};
use affine_vortex::pdegrid::{dirichlet_helmholtz_solve, FieldState, Grid, NormKind};
use affine_vortex::solver::{heat_flow, kempf_ness_project, newton_solve, Problem, SolveConfig};
use affine_vortex::{StabilizerOrder, TorusTarget};
use nalgebra::DMatrix;
use num_complex::Complex64;
use num_rational::Ratio;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

fn circle() -> TorusTarget {
    TorusTarget::circle(&[1], 0.5).unwrap()
}

/// Valid targets with `r <= 3`, `k <= 5`.
fn targets() -> impl Strategy<Value = TorusTarget> {
    (1usize..=3)
        .prop_flat_map(|r| (Just(r), r..=5usize))
        .prop_flat_map(|(r, k)| {
            (
                prop::collection::vec(prop::collection::vec(-2i64..=2, r), k),
                prop::collection::vec(-2.0f64..2.0, r),
            )
        })
        .prop_filter_map("invalid target", |(w, tau)| {
            TorusTarget::new(w, tau).ok().filter(|t| t.ensure_valid().is_ok())
        })
}

fn unit_complex() -> impl Strategy<Value = Complex64> {
    (-2.0f64..2.0, 0.0..2.0 * PI).prop_map(|(l, a)| Complex64::from_polar(l.exp(), a))
}

/// A point of `C^k` with support given by `mask`.
fn point(k: usize, mask: u32, values: &[Complex64]) -> Vec<Complex64> {
    (0..k).map(|j| if mask >> j & 1 == 1 { values[j] } else { c(0.0, 0.0) }).collect()
}

/// `g^{mu_j}` for `g in (C*)^r`.
fn character(t: &TorusTarget, j: usize, g: &[Complex64]) -> Complex64 {
    t.weight(j).iter().zip(g).map(|(&w, z)| z.powi(w as i32)).product()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn semistability_depends_only_on_support(
        t in targets(),
        mask in 0u32..32,
        values in prop::collection::vec(unit_complex(), 5),
        g in prop::collection::vec(unit_complex(), 3),
    ) {
        let x = point(t.dim(), mask, &values);
        let moved: Vec<Complex64> = x.iter().enumerate().map(|(j, v)| v * character(&t, j, &g)).collect();
        prop_assert_eq!(t.is_semistable(&x), t.is_semistable(&moved));
    }

    #[test]
    fn kempf_ness_converges_exactly_on_the_semistable_locus(
        t in targets(),
        mask in 1u32..32,
        values in prop::collection::vec(unit_complex(), 5),
    ) {
        let x = point(t.dim(), mask, &values);
        match kempf_ness_project(&t, &x) {
            Ok(kn) => {
                prop_assert!(t.is_semistable(&x));
                let y: Vec<Complex64> = x.iter().enumerate().map(|(j, v)| v * (-t.pair(j, &kn.s)).exp()).collect();
                let phi = t.moment_map(&y);
                prop_assert!(phi.iter().all(|p| p.abs() < 1e-10), "{:?}", phi);
            }
            Err(_) => prop_assert!(!t.is_semistable(&x)),
        }
    }

    #[test]
    fn stabilizer_orders_divide_the_orbifold_order(t in targets()) {
        if let Ok(n) = t.orbifold_order() {
            for s in t.semistable_supports() {
                match t.stabilizer_order(&s) {
                    StabilizerOrder::Finite(m) => prop_assert_eq!(n % m, 0),
                    StabilizerOrder::Infinite => prop_assert!(false, "semistable support {:?} with infinite stabilizer", s),
                }
            }
        }
    }

    #[test]
    fn moment_map_is_unitary_invariant(
        t in targets(),
        values in prop::collection::vec(unit_complex(), 5),
        angles in prop::collection::vec(0.0..2.0 * PI, 3),
    ) {
        let x = &values[..t.dim()];
        let g: Vec<Complex64> = angles.iter().map(|a| Complex64::from_polar(1.0, *a)).collect();
        let moved: Vec<Complex64> = x.iter().enumerate().map(|(j, v)| v * character(&t, j, &g)).collect();
        for (a, b) in t.moment_map(x).iter().zip(t.moment_map(&moved)) {
            prop_assert!((a - b).abs() <= 1e-13 * (1.0 + a.abs()));
        }
    }
}

/// Target with weights `(1,0), (0,1), (1,1)` at `tau = (1,1)` and a datum of class
/// `d` with generic coefficients.
fn rank_two_datum(d: [i64; 2], coeffs: &[Complex64]) -> (TorusTarget, VortexDatum) {
    let t = TorusTarget::new(vec![vec![1, 0], vec![0, 1], vec![1, 1]], vec![1.0, 1.0]).unwrap();
    let degrees = [d[0], d[1], d[0] + d[1]];
    let mut it = coeffs.iter().cycle();
    let polys = degrees
        .iter()
        .map(|&m| Polynomial::new((0..=m).map(|_| *it.next().unwrap()).collect()))
        .collect();
    (t, VortexDatum::integral(&d, polys))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn classification_is_gauge_invariant(
        d0 in 0i64..3,
        d1 in 0i64..3,
        coeffs in prop::collection::vec(unit_complex(), 9),
        g in prop::collection::vec(unit_complex(), 2),
    ) {
        let (t, datum) = rank_two_datum([d0, d1], &coeffs);
        let moved = act(&t, &datum, &g);
        prop_assert_eq!(is_admissible(&t, &datum), is_admissible(&t, &moved));
        let x = value_at_infinity(&t, &datum);
        let y = value_at_infinity(&t, &moved);
        for j in 0..3 {
            let want = x[j] * character(&t, j, &g);
            prop_assert!((y[j] - want).norm() <= 1e-12 * (1.0 + want.norm()));
        }
        if is_admissible(&t, &datum) {
            let a = normal_form(&t, &datum).unwrap();
            let b = normal_form(&t, &moved).unwrap();
            prop_assert!(data_close(&a, &b, 1e-9));
        }
    }

    #[test]
    fn circle_normal_forms_are_monic_polynomials_of_their_zeros(
        roots in prop::collection::vec((-3.0f64..3.0, -3.0f64..3.0), 1..6),
        scale in unit_complex(),
    ) {
        let roots: Vec<Complex64> = roots.into_iter().map(|(a, b)| c(a, b)).collect();
        let d = roots.len() as i64;
        let datum = VortexDatum::integral(&[d], vec![Polynomial::from_roots(&roots).scale(scale)]);
        let nf = normal_form(&circle(), &datum).unwrap();
        let rebuilt = VortexDatum::integral(&[d], vec![Polynomial::from_roots(&nf.polys[0].roots())]);
        prop_assert!(data_close(&nf, &rebuilt, 1e-8));
        prop_assert!((nf.polys[0].leading().unwrap() - 1.0).norm() < 1e-12);
    }
}

#[test]
fn moduli_dimension_matches_local_rank_of_the_action() {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let mut next = || rng.random_range(-2.0f64..2.0);
    let mut checked = 0;
    while checked < 10 {
        let d = [(next().abs() * 1.5) as i64, (next().abs() * 1.5) as i64];
        let coeffs: Vec<Complex64> = (0..9).map(|_| c(next(), next())).collect();
        let (t, datum) = rank_two_datum(d, &coeffs);
        if !is_admissible(&t, &datum) {
            continue;
        }
        // infinitesimal action z -> (<mu_j, z> p_j)_j as a real matrix on coefficient space
        let total: usize = datum.polys.iter().map(|p| p.coeffs().len()).sum();
        let mut m = DMatrix::<f64>::zeros(2 * total, 2 * t.rank());
        let mut row = 0;
        for (j, p) in datum.polys.iter().enumerate() {
            for coef in p.coeffs() {
                for i in 0..t.rank() {
                    let v = coef * t.weight(j)[i] as f64;
                    // multiplication by the complex number v
                    m[(2 * row, 2 * i)] = v.re;
                    m[(2 * row, 2 * i + 1)] = -v.im;
                    m[(2 * row + 1, 2 * i)] = v.im;
                    m[(2 * row + 1, 2 * i + 1)] = v.re;
                }
                row += 1;
            }
        }
        let real_rank = m.svd(false, false).rank(1e-9);
        let dq: Vec<Ratio<i64>> = d.iter().map(|&x| Ratio::from_integer(x)).collect();
        assert_eq!(moduli_dimension(&t, &dq), total as i64 - (real_rank / 2) as i64, "d = {d:?}");
        checked += 1;
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn clutching_data_round_trips(n in 1u32..6, num in prop::collection::vec(-12i64..12, 1..4)) {
        let lambda: Vec<f64> = num.iter().map(|&m| m as f64 / n as f64).collect();
        let data = OrbiBundleData { n, lambda: lambda.clone(), radius: 1.0 };
        let sector = 2.0 * PI / n as f64;
        let thetas: Vec<f64> = (0..=256).map(|i| sector * i as f64 / 256.0).collect();
        let tr = transition_functions(&data, &thetas).unwrap();
        prop_assert!(tr.compatibility_defect < 1e-12);
        let back = lambda_from_transition(&tr.tau);
        for (a, b) in back.iter().zip(&lambda) {
            prop_assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn integration_by_parts_holds_for_dirichlet_fields(
        a in -2.0f64..2.0, b in -2.0f64..2.0, p in 0.0f64..3.0, q in 0.0f64..3.0,
    ) {
        for g in [Grid::disk(2.0, 16, 24).unwrap(), Grid::annulus(0.5, 2.0, 16, 24).unwrap(), Grid::cartesian_disk(2.0, 24).unwrap()] {
            let mut f = g.sample(|x, y| (a * x + b * y + p).sin() + x * y);
            let mut h = g.sample(|x, y| (q * x * y).cos() - a * y);
            g.clamp_boundary(&mut f);
            g.clamp_boundary(&mut h);
            let lhs = g.inner(&g.laplacian(&f), &h);
            let rhs = g.dirichlet_form(&f, &h);
            prop_assert!((lhs - rhs).abs() <= 1e-9 * (lhs.abs().max(rhs.abs()) + 1e-12));
        }
    }

    #[test]
    fn helmholtz_inverse_is_a_contraction(a in 0.0f64..3.0, b in 0.0f64..2.0, shift in 1.0f64..4.0) {
        let g = Grid::disk(2.0, 16, 16).unwrap();
        let rhs = g.sample(|x, y| (a * x).sin() + b * y * y);
        let m = g.sample(|x, y| shift + (x * y).powi(2));
        let f = dirichlet_helmholtz_solve(&g, &m, &rhs).unwrap();
        let mut r = rhs.clone();
        g.clamp_boundary(&mut r);
        prop_assert!(g.norm(&f, NormKind::L2) <= g.norm(&r, NormKind::L2));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(6))]

    #[test]
    fn one_forms_pull_back_isometrically(n in 2u32..4, a in 0.2f64..1.5, b in -1.0f64..1.0) {
        let (r0, r1) = (1.0f64, 1.3f64);
        let beta = |x: f64, y: f64| ((a * x).sin() + b * y * y, (0.5 * x * y).cos());
        let base = Grid::annulus(r0.powi(n as i32), r1.powi(n as i32), 192, 256).unwrap();
        let density: Vec<f64> = (0..base.len()).map(|k| {
            let (p, q) = beta(base.x()[k], base.y()[k]);
            p * p + q * q
        }).collect();
        let base_norm = base.integrate_high_order(&density).unwrap().sqrt();
        let cover = Grid::annulus(r0, r1, 192, 256).unwrap();
        let (mut px, mut py) = (vec![0.0; cover.len()], vec![0.0; cover.len()]);
        for k in 0..cover.len() {
            let w = c(cover.x()[k], cover.y()[k]);
            let z = w.powu(n);
            let (p, q) = beta(z.re, z.im);
            let pulled = c(p, -q) * w.powu(n - 1) * n as f64;
            px[k] = pulled.re;
            py[k] = -pulled.im;
        }
        let cover_norm = cover_transform_norm(1, n, &cover, &[&px, &py]).unwrap();
        prop_assert!((cover_norm / ((n as f64).sqrt() * base_norm) - 1.0).abs() < 1e-8);
    }
}

fn random_state(t: &TorusTarget, grid: Arc<Grid>, seed: [f64; 4]) -> FieldState {
    let [a, b, p, q] = seed;
    let dim = t.dim();
    let mut s = FieldState::from_section(grid.clone(), t.rank(), |x, y| {
        let z = c(x, y);
        (0..dim).map(|j| z.powu(j as u32) * c(a, b) + c(1.0, p) * (j as f64 + 1.0)).collect()
    })
    .unwrap();
    let r = t.rank();
    for k in 0..grid.len() {
        let (x, y) = (grid.x()[k], grid.y()[k]);
        for comp in 0..r {
            s.ax[k * r + comp] = 0.2 * (p * x + comp as f64).sin();
            s.ay[k * r + comp] = 0.2 * (q * y).cos();
            if !grid.is_boundary(k) {
                s.xi[k * r + comp] = 0.3 * (a * x * y + comp as f64).sin();
            }
        }
    }
    s
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn linearization_matches_central_differences(
        t in targets(),
        seed in prop::array::uniform4(-1.0f64..1.0),
    ) {
        let grid = Arc::new(Grid::disk(2.0, 12, 16).unwrap());
        let s = random_state(&t, grid.clone(), seed);
        let p = Problem::new(&s, &t).unwrap();
        let mut eta: Vec<f64> = (0..s.xi.len()).map(|i| ((i as f64) * 0.37 + seed[0]).sin()).collect();
        p.clamp(&mut eta);
        let eps = 1e-6;
        let plus: Vec<f64> = s.xi.iter().zip(&eta).map(|(x, e)| x + eps * e).collect();
        let minus: Vec<f64> = s.xi.iter().zip(&eta).map(|(x, e)| x - eps * e).collect();
        let fp = p.interior_residual(&plus).unwrap();
        let fm = p.interior_residual(&minus).unwrap();
        let mut lin = p.linearized(&s.xi, &eta).unwrap();
        p.clamp(&mut lin);
        let diff: Vec<f64> = fp.iter().zip(&fm).zip(&lin).map(|((a, b), l)| (a - b) / (2.0 * eps) - l).collect();
        prop_assert!(p.norm(&diff) < 1e-5 * p.norm(&lin).max(1e-300));
    }

    #[test]
    fn linearization_is_positive_on_dirichlet_fields(
        seed in prop::array::uniform4(-1.0f64..1.0),
    ) {
        // at a converged vortex <DF eta, eta> = |d eta|^2 + sum e^{2<mu,xi>} |u|^2 <mu, eta>^2
        let t = circle();
        let grid = Arc::new(Grid::disk(4.0, 32, 32).unwrap());
        let start = FieldState::from_section(grid.clone(), 1, |x, y| vec![c(x, y) - c(seed[0], seed[1])]).unwrap();
        let s = newton_solve(&start, &t, &SolveConfig::default()).unwrap().state;
        let p = Problem::new(&s, &t).unwrap();
        let mut eta = grid.sample(|x, y| (seed[2] * x + 1.0).sin() * (seed[3] * y).cos() + x * y);
        p.clamp(&mut eta);
        let lin = p.linearized(&s.xi, &eta).unwrap();
        let form: f64 = (0..grid.len()).filter(|&k| !grid.is_boundary(k)).map(|k| grid.weights()[k] * lin[k] * eta[k]).sum();
        let dirichlet = grid.dirichlet_form(&eta, &eta);
        prop_assert!(form > 0.0 && form >= dirichlet * (1.0 - 1e-12));
    }

    #[test]
    fn heat_flow_never_increases_the_residual(
        roots in prop::collection::vec((-1.5f64..1.5, -1.5f64..1.5), 1..3),
    ) {
        let t = circle();
        let roots: Vec<Complex64> = roots.into_iter().map(|(a, b)| c(a, b)).collect();
        let poly = Polynomial::from_roots(&roots);
        let grid = Arc::new(Grid::disk(4.0, 24, 24).unwrap());
        let start = FieldState::from_section(grid, 1, |x, y| vec![poly.eval(c(x, y))]).unwrap();
        let out = heat_flow(&start, &t, &SolveConfig::default()).unwrap();
        prop_assert!(out.trajectory.windows(2).all(|w| w[1].residual <= w[0].residual));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn solutions_are_unique_up_to_gauge(
        zero in (-1.0f64..1.0, -1.0f64..1.0),
        bump in -0.5f64..0.5,
        damping in 0.3f64..0.9,
    ) {
        let t = circle();
        let grid = Arc::new(Grid::disk(6.0, 48, 48).unwrap());
        let start = FieldState::from_section(grid.clone(), 1, |x, y| vec![c(x - zero.0, y - zero.1)]).unwrap();
        let plain = newton_solve(&start, &t, &SolveConfig::default()).unwrap().state;
        let mut warm = start.clone();
        let shift = grid.sample(|x, y| bump * (36.0 - x * x - y * y) / 36.0);
        warm.xi = shift;
        grid.clamp_boundary(&mut warm.xi);
        let mut cfg = SolveConfig::default();
        cfg.newton.initial_step = damping;
        // a fixed damping converges only linearly
        cfg.newton.max_iters = 400;
        let other = newton_solve(&warm, &t, &cfg).unwrap().state;
        let d = affine_vortex::diagnostics::gauge_invariant_compare(&plain, &other, &t).unwrap();
        prop_assert!(d.c0() < 1e-3, "{:?}", d);
    }

    #[test]
    fn energy_is_additive_over_annuli(split in 0.5f64..3.5, seed in prop::array::uniform4(-1.0f64..1.0)) {
        let t = TorusTarget::new(vec![vec![1], vec![2]], vec![1.0]).unwrap();
        let grid = Arc::new(Grid::disk(4.0, 24, 24).unwrap());
        let s = random_state(&t, grid, seed);
        let all = energy(&s, &t, &Region::Disk { radius: 4.0 }).unwrap().total;
        let inner = energy(&s, &t, &Region::Disk { radius: split }).unwrap().total;
        let outer = energy(&s, &t, &Region::Annulus { inner: split, outer: 4.0 }).unwrap().total;
        prop_assert!((inner + outer - all).abs() <= 1e-12 * all);
    }

    #[test]
    fn holomorphic_sections_obey_the_maximum_principle(
        coeffs in prop::collection::vec((-2.0f64..2.0, -2.0f64..2.0), 1..5),
    ) {
        let t = TorusTarget::circle(&[1, 2], 1.0).unwrap();
        let p = Polynomial::new(coeffs.into_iter().map(|(a, b)| c(a, b)).collect());
        let grid = Arc::new(Grid::disk(2.0, 24, 48).unwrap());
        let s = FieldState::from_section(grid, 1, |x, y| {
            let z = c(x, y);
            vec![p.eval(z), p.eval(z) * z + 1.0]
        }).unwrap();
        prop_assert!(maximum_principle(&s, &t).unwrap().iter().all(|m| m.holds));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(4))]

    #[test]
    fn zeros_are_stable_under_refinement(zero in (-1.5f64..1.5, -1.5f64..1.5)) {
        let t = circle();
        let z0 = c(zero.0, zero.1);
        let solve = |nr: usize, nt: usize| {
            let grid = Arc::new(Grid::disk(8.0, nr, nt).unwrap());
            let start = FieldState::from_section(grid, 1, |x, y| vec![c(x, y) - z0]).unwrap();
            let s = newton_solve(&start, &t, &SolveConfig::default()).unwrap().state;
            recover_zeros(&s, &t, 0, Some(1)).unwrap()
        };
        let coarse = solve(64, 64);
        let fine = solve(128, 128);
        prop_assert!(coarse.matches_expected && fine.matches_expected);
        let cell = (8.0f64 / 64.0).hypot(z0.norm().max(0.125) * 2.0 * PI / 64.0);
        let (a, b) = (&coarse.zeros[0], &fine.zeros[0]);
        prop_assert!((a.x - b.x).hypot(a.y - b.y) < cell);
    }

    #[test]
    fn converged_vortices_satisfy_the_decay_bound(zero in (-1.0f64..1.0, -1.0f64..1.0)) {
        let t = circle();
        let grid = Arc::new(Grid::disk(24.0, 192, 32).unwrap());
        let start = FieldState::from_section(grid, 1, |x, y| vec![c(x - zero.0, y - zero.1)]).unwrap();
        let s = newton_solve(&start, &t, &SolveConfig::default()).unwrap().state;
        let fit = decay_fit(&s, &t, (6.0, 12.0), 1).unwrap();
        prop_assert!(fit.within_bound, "{:?}", fit);
    }
}

/// `|a_xi - a|_{H1} <= C |xi|_{H2}` with the discrete derivative used on both
/// sides; the shift is `-*d xi`, so the constant is one.
#[test]
fn gauge_shift_is_bounded_by_the_second_order_norm() {
    let g = Grid::disk(2.0, 24, 32).unwrap();
    let mut worst: f64 = 0.0;
    for i in 0..100 {
        let (a, b) = (0.3 + 0.02 * i as f64, 1.0 - 0.015 * i as f64);
        let mut xi = g.sample(|x, y| (a * x + b * y).sin() * (4.0 - x * x - y * y));
        g.clamp_boundary(&mut xi);
        let l2 = |f: &[f64]| g.norm(f, NormKind::L2).powi(2);
        let (dx, dy) = g.gradient(&xi);
        let (dxx, dxy) = g.gradient(&dx);
        let (dyx, dyy) = g.gradient(&dy);
        let h2 = (l2(&xi) + l2(&dx) + l2(&dy) + l2(&dxx) + l2(&dxy) + l2(&dyx) + l2(&dyy)).sqrt();
        // shift is (xi_y, -xi_x)
        let h1 = (l2(&dy) + l2(&dx) + l2(&dyx) + l2(&dyy) + l2(&dxx) + l2(&dxy)).sqrt();
        worst = worst.max(h1 / h2);
    }
    assert!(worst <= 1.0, "{worst}");
}
