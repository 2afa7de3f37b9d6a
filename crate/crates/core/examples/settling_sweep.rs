//! Pole-placement designs for PO = 1 % and ts = 3…9 s, each simulated on the
//! nonlinear plant with the feedback held per step and evaluated
//! continuously.

use qip_control::dynamics::PlantParams;
use qip_control::linearization::{find_equilibrium, linearize, EquilibriumKind};
use qip_control::simulation::{sweep_settling_times, ControlUpdate, SimConfig};
use qip_control::synthesis::PoleDesign;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let plant = PlantParams::quadruple_reference();
    let ss = linearize(&plant, &find_equilibrium(&plant, EquilibriumKind::Upright)?)?;
    let base = PoleDesign::new(1.0, 6.0)?;
    let ts = [3.0, 4.0, 5.0, 6.0, 7.0, 8.0, 9.0];

    for update in [ControlUpdate::Zoh, ControlUpdate::Continuous] {
        let cfg = SimConfig { control_update: update, ..SimConfig::default() };
        println!("{update:?}:");
        for row in sweep_settling_times(&plant, &ss, &base, &ts, &cfg) {
            let settle = row
                .metrics
                .as_ref()
                .and_then(|m| m.settling_time)
                .map_or("—".to_string(), |t| format!("{t:.2} s"));
            println!("  ts = {}  stabilized = {:<5}  measured settling {settle}", row.settling_time_design, row.stabilized);
        }
    }
    Ok(())
}
