//! Free swing about the hanging equilibrium: with no input and no damping
//! the total energy should only drift by integrator error, shrinking like
//! dt⁴.

use qip_control::dynamics::{total_energy, PlantParams, State};
use qip_control::simulation::{simulate_law, SimConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let plant = PlantParams::quadruple_reference();
    let pi = std::f64::consts::PI;
    // hanging (θ₁ = π) with a small kick to every joint
    let x0 = vec![0.0, 0.0, pi + 0.1, 0.0, -0.05, 0.0, 0.05, 0.0, -0.05, 0.0];
    let e0 = energy(&plant, &x0)?;

    for dt in [1e-3, 1e-4] {
        let cfg = SimConfig {
            dt,
            duration: 10.0,
            reference: 0.0,
            initial_state: Some(x0.clone()),
            angle_limit: None,
            ..SimConfig::default()
        };
        let trace = simulate_law(&plant, &[0.0; 10], 0.0, &cfg)?;
        let mut drift = 0.0f64;
        for x in &trace.states {
            drift = drift.max((energy(&plant, x)? - e0).abs() / e0.abs());
        }
        println!("dt = {dt:e}: max |ΔE|/|E₀| = {drift:.3e}");
    }
    Ok(())
}

fn energy(p: &PlantParams, x: &[f64]) -> Result<f64, Box<dyn std::error::Error>> {
    let (t, v) = total_energy(&State::from_interleaved(x)?, p)?;
    Ok(t + v)
}
