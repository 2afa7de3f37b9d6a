//! Calibrate the cart mass against a known cart-acceleration gain, then
//! linearize the quadruple pendulum about its upright equilibrium.

use qip_control::dynamics::PlantParams;
use qip_control::linalg::csv::to_csv;
use qip_control::linearization::{calibrate_cart_mass, find_equilibrium, linearize, EquilibriumKind};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let guess = PlantParams::quadruple(1.0)?;
    let fit = calibrate_cart_mass(&guess, 7.76)?;
    println!("cart mass {:.6} kg after {} secant steps", fit.cart_mass, fit.iterations);

    let plant = guess.with_cart_mass(fit.cart_mass)?;
    let eq = find_equilibrium(&plant, EquilibriumKind::Upright)?;
    let ss = linearize(&plant, &eq)?;
    println!("A =\n{}", to_csv(&ss.a));
    println!("B =\n{}", to_csv(&ss.b.transpose()));

    let summary = ss.summary()?;
    println!("controllability rank {}", summary.controllability_rank);
    for [re, im] in summary.open_loop_eigenvalues {
        println!("  λ = {re:+.4} {im:+.4}i");
    }
    Ok(())
}
