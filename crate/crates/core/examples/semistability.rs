//! Target side: semistable supports, stabilizers, the orbifold order and the
//! projection of a point onto the zero level of the moment map.

use affine_vortex::solver::kempf_ness_project;
use affine_vortex::{StabilizerOrder, TorusTarget};
use num_complex::Complex64;

fn main() -> affine_vortex::Result<()> {
    // weights (1,0), (1,2), (0,1): the middle coordinate alone has stabilizer Z/2
    let t = TorusTarget::new(vec![vec![1, 0], vec![1, 2], vec![0, 1]], vec![1.0, 1.5])?;
    let report = t.validate();
    println!("target valid: {}", report.valid);
    for s in t.semistable_supports() {
        let order = match t.stabilizer_order(&s) {
            StabilizerOrder::Finite(n) => n.to_string(),
            StabilizerOrder::Infinite => "infinite".into(),
        };
        println!("semistable support {s:?}: stabilizer order {order}");
    }
    println!("orbifold order: {}", t.orbifold_order()?);

    let x = [Complex64::new(0.2, 0.1), Complex64::new(3.0, -1.0), Complex64::new(0.0, 0.5)];
    println!("semistable: {}", t.is_semistable(&x));
    let kn = kempf_ness_project(&t, &x)?;
    let projected: Vec<Complex64> = x
        .iter()
        .enumerate()
        .map(|(j, v)| v * (-t.pair(j, &kn.s)).exp())
        .collect();
    println!("projection shift {:?} after {} iterations", kn.s, kn.iterations);
    println!("moment map at the projection: {:?}", t.moment_map(&projected));

    let conv = t.check_convexity_sample(500, 1);
    println!("convexity ratio over 500 samples: {:.3}", conv.min_ratio);

    let unstable = [Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0), Complex64::new(0.0, 0.0)];
    println!("unstable point projects: {}", kempf_ness_project(&t, &unstable).is_ok());
    Ok(())
}
