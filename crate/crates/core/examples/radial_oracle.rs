//! Rotationally symmetric vortex of the circle action: the shooting profile,
//! its energy density and the quantized total energy.

use affine_vortex::solver::radial_oracle;

fn main() -> affine_vortex::Result<()> {
    for degree in 1..=3 {
        let p = radial_oracle(1, 0.5, degree)?;
        let quantized = 4.0 * std::f64::consts::PI * 0.5 * degree as f64;
        println!(
            "degree {degree}: f(inf) {:.4}, mass {:.4}, energy {:.8} (quantized {:.8})",
            p.f_inf,
            p.mass,
            p.total_energy(),
            quantized
        );
    }
    let p = radial_oracle(1, 0.5, 1)?;
    println!("r, f, alpha");
    for (r, f, alpha) in p.table(1.0).into_iter().take(9) {
        println!("{r:.1}, {f:.6}, {alpha:.6}");
    }
    Ok(())
}
