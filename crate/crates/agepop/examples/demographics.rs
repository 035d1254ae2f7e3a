//! Demographic primitives: survival, reproduction number, growth root.
//!
//! ```text
//! cargo run --example demographics
//! ```

use agepop::demography::{discounted_reproduction, DemographicModel, FertilityRate, MortalityRate};
use agepop::grid::AgeGrid;

fn main() -> agepop::Result<()> {
    let lifespan = 1.0;
    let quad = AgeGrid::new(lifespan, 4096);

    // Literal benchmark data: mu(a) = 1/(50(A-a)) and the mid-life
    // fertility hump with its raw amplitude.
    let mortality = MortalityRate::reciprocal_remaining(lifespan, 50.0);
    let literal = FertilityRate::hump(lifespan);
    let model = DemographicModel::new(mortality.clone(), literal)?;
    println!("survival probability (closed form vs hazard integral):");
    for a in [0.0, 0.25, 0.5, 0.75, 0.95, 1.0] {
        println!("  pi({a:4.2}) = {:.10}", model.survival(a)?);
    }

    let r_literal = model.reproduction_number(&quad)?;
    println!("\nliteral fertility amplitude: R = {r_literal:.3e}  (wildly supercritical)");

    // Rescaled to the subcritical regime used throughout the toolkit.
    let model = DemographicModel::benchmark(lifespan, 0.8)?;
    let r = model.reproduction_number(&quad)?;
    let root = model.lotka_root(&quad)?;
    println!("rescaled fertility:          R = {r:.6}");
    println!("growth root (renewal equation): lambda* = {root:.6}");
    println!(
        "check: discounted reproduction at the root = {:.12}",
        discounted_reproduction(&model.fertility, &model.mortality, root, &quad)
    );

    // The root follows the sign of R - 1.
    for target in [0.5, 1.0, 1.3] {
        let m = DemographicModel::benchmark(lifespan, target)?;
        let lambda = m.lotka_root(&quad)?;
        println!("  R = {target:3.1}  ->  lambda* = {lambda:+.6}");
    }
    Ok(())
}
