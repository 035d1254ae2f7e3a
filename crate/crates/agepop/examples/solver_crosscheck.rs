//! Two routes to the same optimum: direct transcription vs Riccati feedback.
//!
//! The dynamic LQ problem is solved once as a reduced KKT system and once
//! by integrating the value operator and closing the loop. The two
//! trajectories agree at second order in the time step, and the optimal
//! cost matches the value-operator quadratic form.
//!
//! ```text
//! cargo run --example solver_crosscheck
//! ```

use agepop::demography::DemographicModel;
use agepop::grid::AgeGrid;
use agepop::lqr::{assemble_modal_system, solve_dynamic_lq, solve_riccati_ode, TerminalWeight};
use nalgebra::{DMatrix, DVector};

fn main() -> agepop::Result<()> {
    let model = DemographicModel::benchmark(1.0, 0.8)?;
    let grid = AgeGrid::new(1.0, 10);
    let sys = assemble_modal_system(&model, grid, 0, 0.0, 1.0);
    let y0 = DVector::from_fn(sys.dim(), |i, _| {
        let a = grid.node(i);
        16.0 * (a * (1.0 - a)).powi(2)
    });
    let zero = DVector::zeros(sys.dim());
    let horizon = 1.0;

    println!(
        "{:>8} {:>14} {:>14} {:>12}",
        "steps", "L2 gap", "cost gap", "KKT resid"
    );
    let mut previous: Option<f64> = None;
    for steps in [20usize, 40, 80, 160] {
        let triple = solve_dynamic_lq(&sys, &y0, &zero, horizon, steps, TerminalWeight::HalfNorm)?;
        let refine = 8;
        let value = solve_riccati_ode(&sys, horizon, steps * refine)?;
        let dt = horizon / steps as f64;
        let h = dt / refine as f64;
        let feedback = |e: &DMatrix<f64>, y: &DVector<f64>| -> DVector<f64> {
            &sys.drift * y - &sys.input * (sys.input.dot(&(e * y)))
        };
        let mut y = y0.clone();
        let mut gap_sq = 0.0;
        for m in 0..steps {
            for sub in 0..refine {
                let idx = steps * refine - (m * refine + sub);
                let e0 = value.at(idx);
                let e1 = value.at(idx - 1);
                let mid = (e0 + e1) * 0.5;
                let k1 = feedback(e0, &y);
                let k2 = feedback(&mid, &(&y + &k1 * (0.5 * h)));
                let k3 = feedback(&mid, &(&y + &k2 * (0.5 * h)));
                let k4 = feedback(e1, &(&y + &k3 * h));
                y += (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0);
            }
            gap_sq += dt * (&y - &triple.states[m + 1]).norm_squared();
        }
        let gap = gap_sq.sqrt();
        let cost_gap = (2.0 * triple.objective - (value.at(steps * refine) * &y0).dot(&y0)).abs();
        let order = previous.map(|p: f64| format!("  (order {:.2})", (p / gap).log2()));
        println!(
            "{steps:>8} {gap:>14.5e} {cost_gap:>14.5e} {:>12.2e}{}",
            triple.kkt_residual,
            order.unwrap_or_default()
        );
        previous = Some(gap);
    }
    Ok(())
}
