//! Holomorphic side: admissibility, degree bounds, normal forms and moduli
//! dimensions for a rank-two target.

use affine_vortex::classifier::{
    act, admissibility, degree_bounds, isomorphic, moduli_dimension, normal_form, value_at_infinity, Polynomial,
    VortexDatum,
};
use affine_vortex::TorusTarget;
use num_complex::Complex64;

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

fn main() -> affine_vortex::Result<()> {
    // T^2 acting on C^3 with weights (1,0), (0,1), (1,1)
    let t = TorusTarget::new(vec![vec![1, 0], vec![0, 1], vec![1, 1]], vec![1.0, 1.0])?;
    let d = [2, 1];
    let datum = VortexDatum::integral(
        &d,
        vec![
            Polynomial::from_roots(&[c(1.0, 0.0), c(-1.0, 0.5)]),
            Polynomial::real(&[3.0, 2.0]),
            Polynomial::real(&[1.0, 0.0, 0.0, 1.0]),
        ],
    );
    let bounds: Vec<_> = degree_bounds(&t, &datum.d)
        .iter()
        .map(|b| b.max_degree())
        .collect();
    println!("degree bounds per coordinate: {bounds:?}");
    let adm = admissibility(&t, &datum)?;
    println!("admissible: {} {:?}", adm.admissible, adm.reasons);
    println!("value at infinity: {:?}", value_at_infinity(&t, &datum));

    let nf = normal_form(&t, &datum)?;
    println!("normal form coefficients:");
    for p in &nf.polys {
        println!("  {:?}", p.coeffs());
    }

    // a torus translate lands in the same orbit
    let moved = act(&t, &datum, &[c(0.3, 2.0), c(-1.5, 0.1)]);
    println!("translate isomorphic: {}", isomorphic(&t, &datum, &moved)?);
    println!("moduli dimension: {}", moduli_dimension(&t, &datum.d));

    // exceeding a degree bound breaks admissibility
    let high = VortexDatum::integral(&d, vec![Polynomial::real(&[0.0, 0.0, 0.0, 1.0]), Polynomial::real(&[1.0]), Polynomial::real(&[1.0])]);
    let adm = admissibility(&t, &high)?;
    println!("cubic first coordinate admissible: {} {:?}", adm.admissible, adm.reasons);
    Ok(())
}
