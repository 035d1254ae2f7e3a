//! Cosine eigenbasis and the diagonal heat semigroup.
//!
//! ```text
//! cargo run --example spectral_basis
//! ```

use agepop::spectral::{ModeCoefficients, NeumannBasis};

fn main() -> agepop::Result<()> {
    let basis = NeumannBasis::new(1.0, 8, 512);
    println!("eigenvalues lambda_k = (k pi / L)^2:");
    for k in 0..basis.modes() {
        println!("  lambda_{k} = {:.6}", basis.eigenvalue(k));
    }

    // Project a smooth profile, truncate, reconstruct.
    let f: Vec<f64> = basis
        .nodes()
        .iter()
        .map(|&x| (2.0 * std::f64::consts::PI * x).cos().exp())
        .collect();
    let coeffs = basis.project(&f)?;
    let rec = basis.reconstruct(&coeffs);
    let err = f
        .iter()
        .zip(&rec)
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        .sqrt()
        / (basis.points() as f64).sqrt();
    println!("\nprojection of exp(cos(2 pi x)) onto 8 modes:");
    for k in 0..basis.modes() {
        println!("  c_{k} = {:+.6e}", coeffs.get(k));
    }
    println!("  rms truncation error = {err:.3e}");

    // Heat flow damps each mode by its own factor; composition is exact.
    let t = 0.05;
    let once = basis.heat_propagate(&coeffs, t)?;
    let twice = basis.heat_propagate(&basis.heat_propagate(&coeffs, 0.5 * t)?, 0.5 * t)?;
    println!("\nheat damping over t = {t}:");
    for k in 0..basis.modes() {
        println!(
            "  mode {k}: factor {:.6}  (semigroup gap {:.1e})",
            once.get(k) / coeffs.get(k).max(1e-300),
            (once.get(k) - twice.get(k)).abs()
        );
    }

    // Indicator windows project in closed form.
    let window = basis.project_indicator(0.25, 0.75)?;
    println!(
        "\nindicator of (0.25, 0.75): |c| = {:.6}",
        ModeCoefficients::norm(&window)
    );
    Ok(())
}
