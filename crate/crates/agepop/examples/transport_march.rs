//! Characteristic march of the age profile with renewal feedback.
//!
//! ```text
//! cargo run --example transport_march
//! ```

use agepop::demography::DemographicModel;
use agepop::grid::AgeGrid;
use agepop::spectral::eigenvalue;
use agepop::transport::{ModalState, ModeDynamics};

fn main() -> agepop::Result<()> {
    let model = DemographicModel::benchmark(1.0, 0.8)?;
    let grid = AgeGrid::new(1.0, 100);
    let y0 = ModalState::from_profile(0, grid, |a| model.survival(a).unwrap_or(0.0));

    for mode in [0usize, 1] {
        let dynamics = ModeDynamics::new(&model, grid, mode, eigenvalue(mode, 1.0));
        let y0k = ModalState::new(mode, grid, y0.values().to_vec())?;
        let steps = ModeDynamics::steps_for_horizon(&grid, 2.0)?;
        let trajectory = dynamics.evolve_uncontrolled(&y0k, steps);
        let trace = dynamics.renewal_trace(&trajectory);
        println!("mode {mode} (heat damping {:.3}):", eigenvalue(mode, 1.0));
        println!("{:>6} {:>12} {:>12} {:>12}", "t", "|y|", "mass", "births");
        for n in (0..=steps).step_by(steps / 5) {
            println!(
                "{:>6.2} {:>12.5e} {:>12.5e} {:>12.5e}",
                trajectory.time(n),
                grid.norm(trajectory.state(n)),
                trajectory.mass(n),
                trace.values[n]
            );
        }
        println!();
    }
    println!("subcritical reproduction: every mode decays at its own damped rate.");
    Ok(())
}
