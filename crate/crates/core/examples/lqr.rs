//! LQR design with Q = diag(10, 1, …) and R = 1.

use qip_control::dynamics::PlantParams;
use qip_control::linearization::{find_equilibrium, linearize, EquilibriumKind};
use qip_control::synthesis::{lqr_gain, LqrWeights};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let plant = PlantParams::quadruple_reference();
    let ss = linearize(&plant, &find_equilibrium(&plant, EquilibriumKind::Upright)?)?;
    let gains = lqr_gain(&ss, &LqrWeights::position_heavy(ss.states()))?;

    println!("K = {:.2?}", gains.k);
    println!("N = {:.4}", gains.n);
    println!("Riccati residual {:.2e}", gains.residual.unwrap_or(f64::NAN));
    println!("closed-loop poles:");
    for z in gains.poles() {
        println!("  {:+.4} {:+.4}i", z.re, z.im);
    }
    Ok(())
}
