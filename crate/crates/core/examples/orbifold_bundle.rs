//! Bundles over the weighted projective line: the orbifold condition, clutching
//! data, and the reduction of a loop connection to its standard form.

use affine_vortex::orbibundle::{
    check_orbifold_condition, lambda_from_transition, standard_form_loop, transition_functions, uniform_loop_angles,
    OrbiBundleData,
};

fn main() -> affine_vortex::Result<()> {
    let data = OrbiBundleData { n: 3, lambda: vec![1.0 / 3.0, -4.0 / 3.0], radius: 1.0 };
    data.validate()?;
    println!("holonomy: {:?}", data.holonomy());

    let sector: Vec<f64> = (0..=64).map(|i| 2.0 * std::f64::consts::PI / 3.0 * i as f64 / 64.0).collect();
    let tr = transition_functions(&data, &sector)?;
    println!("clutching compatibility defect: {:.1e}", tr.compatibility_defect);
    println!("lambda read back from the clutching loop: {:?}", lambda_from_transition(&tr.tau));

    println!("lambda = 1/4 with n = 3 allowed: {}", check_orbifold_condition(&[0.25], 3));

    // a(theta) = 0.7 + 0.4 cos(theta) + 0.2 sin(3 theta) has mean 0.7
    let thetas = uniform_loop_angles(256);
    let a: Vec<Vec<f64>> = thetas.iter().map(|t| vec![0.7 + 0.4 * t.cos() + 0.2 * (3.0 * t).sin()]).collect();
    let sf = standard_form_loop(&thetas, &a)?;
    println!(
        "standard form: lambda {:.6}, winding {:?}, fractional part {:.6}, residual {:.1e}",
        sf.lambda[0], sf.winding, sf.fractional[0], sf.residual
    );
    Ok(())
}
