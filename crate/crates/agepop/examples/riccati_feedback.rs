//! Value operator, stabilizing feedback and the Hamiltonian dichotomy.
//!
//! ```text
//! cargo run --example riccati_feedback
//! ```

use agepop::demography::DemographicModel;
use agepop::grid::AgeGrid;
use agepop::linalg::spectral_abscissa;
use agepop::lqr::{
    assemble_modal_system, build_dichotomy, closed_loop_simulate, solve_are, solve_riccati_ode,
};
use nalgebra::DVector;

fn main() -> agepop::Result<()> {
    let model = DemographicModel::benchmark(1.0, 0.8)?;
    let grid = AgeGrid::new(1.0, 20);
    let sys = assemble_modal_system(&model, grid, 0, 0.0, 1.0);

    let open = spectral_abscissa(&sys.drift)?;
    let e_hat = solve_are(&sys)?;
    let closed_matrix = &sys.drift - sys.gram() * &e_hat;
    let closed = spectral_abscissa(&closed_matrix)?;
    println!("spectral abscissa: open loop {open:.4}, closed loop {closed:.4}");
    println!(
        "algebraic Riccati residual = {:.3e}",
        agepop::lqr::are_residual(&sys, &e_hat)
    );

    // The value operator flows from the terminal pay-off down to the
    // stabilizing solution.
    let trajectory = solve_riccati_ode(&sys, 20.0, 8000)?;
    println!("\nvalue-operator flow (Frobenius distance to the limit):");
    for idx in [0usize, 400, 1600, 4000, 8000] {
        let tau = idx as f64 * trajectory.step();
        println!(
            "  tau = {tau:6.2}: |E - E_inf| = {:.3e}",
            (trajectory.at(idx) - &e_hat).norm()
        );
    }
    println!(
        "  monotone (nonincreasing) slack = {:.2e}",
        trajectory.monotonicity_margin(400)
    );

    // Closed-loop decay under v = -B' E y.
    let y0 = DVector::from_fn(sys.dim(), |i, _| 1.0 + (0.4 * i as f64).sin());
    let run = closed_loop_simulate(&sys, &e_hat, &y0, 3.0, 600)?;
    println!("\nclosed-loop decay:");
    for n in [0usize, 100, 200, 400, 600] {
        println!(
            "  t = {:4.1}: |y| = {:.4e}, v = {:+.4e}",
            run.time(n),
            run.states[n].norm(),
            run.controls[n]
        );
    }

    // Dichotomy: the transform splits the Hamiltonian into stable halves.
    let transform = build_dichotomy(&sys, &e_hat)?;
    println!(
        "\ndichotomy residual = {:.3e} (orientation {:?})",
        transform.residual, transform.orientation
    );
    Ok(())
}
