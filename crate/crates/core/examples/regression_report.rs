//! Run the whole pipeline and compare it with the bundled reference results.

use qip_control::reference;
use qip_control::simulation::SimConfig;

fn main() -> Result<(), Box<dyn std::error::Error + Send + Sync>> {
    let report = reference::check(&SimConfig::default())?;
    print!("{}", report.render());
    Ok(())
}
