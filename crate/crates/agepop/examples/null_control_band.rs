//! Band-distributed null control and the short-horizon obstruction.
//!
//! The control acts on ages `[0, a0]` only. For horizons `T > A - a0` the
//! closed-form quotient control empties the population; for `T < A - a0`
//! the cohort that is already past the band and not yet past the lifespan
//! cannot be touched by any admissible control.
//!
//! ```text
//! cargo run --example null_control_band
//! ```

use agepop::demography::{DemographicModel, FertilityRate, MortalityRate};
use agepop::grid::AgeGrid;
use agepop::nullcontrol::{
    distributed_controlled_state, distributed_null_control, short_horizon_obstruction,
};
use agepop::transport::{ModalState, ModeDynamics};

fn main() -> agepop::Result<()> {
    // Fertility with a support floor: nobody reproduces before a_b = 0.25,
    // so a control band [0, 0.25] never feeds back into the newborn flux.
    let mortality = MortalityRate::reciprocal_remaining(1.0, 50.0);
    let quad = AgeGrid::new(1.0, 4096);
    let fertility = FertilityRate::hump(1.0)
        .with_support_floor(0.25)
        .rescaled_to_reproduction(&mortality, 0.8, &quad)?;
    let model = DemographicModel::new(mortality, fertility)?;
    let a0 = 0.25;

    let grid = AgeGrid::new(1.0, 200);
    let dynamics = ModeDynamics::new(&model, grid, 0, 0.0);
    let y0 = ModalState::from_profile(0, grid, |a| {
        let x = a * (1.0 - a);
        16.0 * x * x
    });

    // Null control over T = A.
    let horizon = 1.0;
    let control = distributed_null_control(&dynamics, &y0, a0, horizon)?;
    let steps = ModeDynamics::steps_for_horizon(&grid, horizon)?;
    let trajectory = dynamics.evolve_controlled(&y0, &control, steps)?;
    println!("band control on [0, {a0}], horizon T = {horizon}:");
    println!("  |y0|   = {:.6}", y0.norm());
    println!("  |y(T)| = {:.3e}  (marched)", trajectory.final_norm());

    // Agreement between the march and the closed-form state mid-flight.
    let t_mid = 0.5;
    let closed = distributed_controlled_state(&dynamics, &y0, a0, t_mid)?;
    let marched = dynamics.evolve_controlled(
        &y0,
        &control,
        ModeDynamics::steps_for_horizon(&grid, t_mid)?,
    )?;
    let gap: Vec<f64> = marched
        .final_state()
        .iter()
        .zip(closed.values())
        .map(|(a, b)| a - b)
        .collect();
    println!(
        "  march vs closed form at t = {t_mid}: L2 gap = {:.3e}",
        grid.norm(&gap)
    );

    // Obstruction below the critical horizon.
    let short = 0.5;
    let witness = short_horizon_obstruction(&dynamics, &y0, a0, short)?;
    println!("\nshort horizon T = {short} < A - a0 = {}:", 1.0 - a0);
    println!(
        "  untouchable cohort on ({}, 1]: norm = {:.6}",
        short + a0,
        witness.norm
    );
    match distributed_null_control(&dynamics, &y0, a0, short) {
        Err(e) => println!("  synthesis refuses: {e}"),
        Ok(_) => unreachable!("short horizons must be rejected"),
    }
    Ok(())
}
