//! Unit step of the cart reference under LQR, on the nonlinear plant.

use qip_control::dynamics::PlantParams;
use qip_control::linearization::{find_equilibrium, linearize, EquilibriumKind};
use qip_control::simulation::{metrics, simulate, SimConfig};
use qip_control::synthesis::{lqr_gain, LqrWeights};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let plant = PlantParams::quadruple_reference();
    let ss = linearize(&plant, &find_equilibrium(&plant, EquilibriumKind::Upright)?)?;
    let gains = lqr_gain(&ss, &LqrWeights::position_heavy(ss.states()))?;

    let cfg = SimConfig::default();
    let trace = simulate(&plant, &gains, &cfg)?;
    let m = metrics(&trace, cfg.reference, cfg.step_time)?;

    for k in (0..trace.len()).step_by(1000) {
        let x = &trace.states[k];
        println!("t = {:>4.1}  x = {:+.5}  θ = [{:+.4}, {:+.4}, {:+.4}, {:+.4}]", trace.t[k], x[0], x[2], x[4], x[6], x[8]);
    }
    println!("{m:#?}");
    Ok(())
}
