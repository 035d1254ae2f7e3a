//! Birth-control extinction: cancel the newborn flux and the population is
//! gone one lifespan later.
//!
//! ```text
//! cargo run --example null_control_birth
//! ```

use agepop::demography::DemographicModel;
use agepop::grid::AgeGrid;
use agepop::nullcontrol::{null_control_report, SynthesisKind};
use agepop::spectral::{eigenvalue, NeumannBasis};
use agepop::transport::ModalState;

fn main() -> agepop::Result<()> {
    let model = DemographicModel::benchmark(1.0, 0.8)?;
    let modes = 4;
    let basis = NeumannBasis::new(1.0, modes, 512);
    let horizon = 1.25;

    // Gaussian spatial loading so every mode carries population; the age
    // profile follows the survival curve.
    let spatial: Vec<f64> = basis
        .nodes()
        .iter()
        .map(|&x| (-(x - 0.3f64).powi(2) / 0.045).exp())
        .collect();
    let coeffs = basis.project(&spatial)?;
    let lambdas: Vec<f64> = (0..modes).map(|k| eigenvalue(k, 1.0)).collect();

    println!("grid refinement, horizon T = {horizon} > A = 1:");
    println!(
        "{:>8} {:>14} {:>14} {:>12}",
        "cells", "|y(T)|/|y0|", "|v|", "bound"
    );
    for cells in [100usize, 200, 400] {
        let grid = AgeGrid::new(1.0, cells);
        let initial: Vec<ModalState> = (0..modes)
            .map(|k| {
                let c = coeffs.get(k);
                ModalState::from_profile(k, grid, |a| c * model.survival(a).unwrap_or(0.0))
            })
            .collect();
        let report = null_control_report(
            &model,
            grid,
            &lambdas,
            &initial,
            SynthesisKind::Birth,
            horizon,
        )?;
        println!(
            "{cells:>8} {:>14.4e} {:>14.6} {:>12.6}",
            report.relative_residual(),
            report.control_norm,
            report.norm_bound
        );
    }
    println!("\nthe residual halves with the grid; the energy never exceeds the bound.");
    Ok(())
}
