//! Pole placement from an overshoot / settling-time specification.
//!
//! Pass `PO TS` on the command line to try other designs, e.g.
//! `cargo run --example pole_placement -- 5 4`.

use qip_control::dynamics::PlantParams;
use qip_control::linearization::{find_equilibrium, linearize, EquilibriumKind};
use qip_control::synthesis::{design_pole_placement, second_order_poles, PoleDesign};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let args: Vec<f64> = std::env::args().skip(1).map(|a| a.parse()).collect::<Result<_, _>>()?;
    let (po, ts) = match args[..] {
        [po, ts] => (po, ts),
        _ => (1.0, 6.0),
    };
    let design = PoleDesign::new(po, ts)?;
    println!(
        "PO = {po}%, ts = {ts} s: ε = {:.6}, ωn = {:.6}",
        design.damping_ratio(),
        design.natural_frequency()
    );

    let plant = PlantParams::quadruple_reference();
    let ss = linearize(&plant, &find_equilibrium(&plant, EquilibriumKind::Upright)?)?;
    println!("requested poles:");
    for z in second_order_poles(&design, ss.states())? {
        println!("  {:+.6} {:+.6}i", z.re, z.im);
    }

    let gains = design_pole_placement(&ss, &design)?;
    let diag = gains.placement.as_ref().expect("placement diagnostics");
    println!("K = {:.4?}", gains.k);
    println!("N = {:.6e}", gains.n);
    println!(
        "placement error {:.2e}, controllability condition {:.2e}{}",
        diag.placement_error,
        diag.controllability_condition.unwrap_or(f64::INFINITY),
        if diag.ill_conditioned { " (ill-conditioned)" } else { "" }
    );
    Ok(())
}
