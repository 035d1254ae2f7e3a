//! Shrinking the control band onto the newborn boundary.
//!
//! As the band width drops, the distributed control (paired against smooth
//! test functions) converges to the pure birth control and the controlled
//! states approach the birth-controlled flow.
//!
//! ```text
//! cargo run --example band_width_limit
//! ```

use agepop::demography::{DemographicModel, FertilityRate, MortalityRate};
use agepop::grid::AgeGrid;
use agepop::nullcontrol::epsilon_limit_study;
use agepop::spectral::eigenvalue;
use agepop::transport::{ModalState, ModeDynamics};

fn main() -> agepop::Result<()> {
    let mortality = MortalityRate::reciprocal_remaining(1.0, 50.0);
    let quad = AgeGrid::new(1.0, 4096);
    let fertility = FertilityRate::hump(1.0)
        .with_support_floor(0.4)
        .rescaled_to_reproduction(&mortality, 0.8, &quad)?;
    let model = DemographicModel::new(mortality, fertility)?;
    let grid = AgeGrid::new(1.0, 200);

    for mode in [0usize, 1] {
        let dynamics = ModeDynamics::new(&model, grid, mode, eigenvalue(mode, 1.0));
        let y0 = ModalState::from_profile(mode, grid, |a| {
            let x = a * (1.0 - a);
            16.0 * x * x
        });
        let study = epsilon_limit_study(&dynamics, &y0, &[0.4, 0.2, 0.1, 0.05], 1.0)?;
        println!("mode {mode}:");
        println!("{:>10} {:>14} {:>14}", "width", "pairing gap", "state gap");
        for row in &study.rows {
            println!(
                "{:>10} {:>14.4e} {:>14.4e}",
                row.epsilon, row.weak_gap, row.state_gap
            );
        }
        println!(
            "  monotone: pairing {}, states {}\n",
            study.weak_gaps_monotone(),
            study.state_gaps_monotone()
        );
    }
    Ok(())
}
