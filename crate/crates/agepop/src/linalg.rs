//! Dense linear-algebra kernels for the LQ layer.
//!
//! The central routine is a Bartels–Stewart Sylvester solver
//! `A X + X B = C` built on the real Schur form: both coefficient matrices
//! are reduced to quasi-triangular form, the transformed system is solved
//! one column block at a time with complex shifted back-substitution, and
//! the result is rotated back. Lyapunov equations are the `B = Aᵀ` special
//! case. A Kronecker-product solver is kept as an independent reference for
//! small sizes.

use nalgebra::{Complex, DMatrix, DVector};

use crate::error::Error;
use crate::Result;

/// Real Schur factorization `m = U T Uᵀ` with `T` quasi upper-triangular.
pub fn real_schur(m: &DMatrix<f64>) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    nalgebra::linalg::Schur::try_new(m.clone(), 1e-14, 20_000)
        .map(|s| s.unpack())
        .ok_or_else(|| Error::Convergence("Schur iteration did not converge".into()))
}

/// Largest real part of the spectrum, read off the quasi-diagonal of the
/// Schur form.
pub fn spectral_abscissa(m: &DMatrix<f64>) -> Result<f64> {
    let (_, t) = real_schur(m)?;
    let n = t.nrows();
    let mut abscissa = f64::NEG_INFINITY;
    let mut i = 0;
    while i < n {
        if i + 1 < n && t[(i + 1, i)] != 0.0 {
            abscissa = abscissa.max(0.5 * (t[(i, i)] + t[(i + 1, i + 1)]));
            i += 2;
        } else {
            abscissa = abscissa.max(t[(i, i)]);
            i += 1;
        }
    }
    Ok(abscissa)
}

/// Complex eigenvalues from the real Schur form.
pub fn eigenvalues(m: &DMatrix<f64>) -> Result<Vec<Complex<f64>>> {
    let (_, t) = real_schur(m)?;
    let n = t.nrows();
    let mut eigs = Vec::with_capacity(n);
    let mut i = 0;
    while i < n {
        if i + 1 < n && t[(i + 1, i)] != 0.0 {
            let h = 0.5 * (t[(i, i)] + t[(i + 1, i + 1)]);
            let det = t[(i, i)] * t[(i + 1, i + 1)] - t[(i, i + 1)] * t[(i + 1, i)];
            let disc = h * h - det;
            let omega = (-disc).max(0.0).sqrt();
            eigs.push(Complex::new(h, omega));
            eigs.push(Complex::new(h, -omega));
            i += 2;
        } else {
            eigs.push(Complex::new(t[(i, i)], 0.0));
            i += 1;
        }
    }
    Ok(eigs)
}

/// Back-substitution for `(T + σ I) x = b` with `T` quasi upper-triangular
/// and a complex shift σ.
fn solve_quasi_upper_shifted(
    t: &DMatrix<f64>,
    shift: Complex<f64>,
    b: &[Complex<f64>],
) -> Result<Vec<Complex<f64>>> {
    let n = t.nrows();
    let mut x = vec![Complex::new(0.0, 0.0); n];
    let mut i = n as isize - 1;
    while i >= 0 {
        let ii = i as usize;
        let in_block = ii > 0 && t[(ii, ii - 1)] != 0.0;
        if in_block {
            let lo = ii - 1;
            let mut r0 = b[lo];
            let mut r1 = b[ii];
            for j in ii + 1..n {
                r0 -= t[(lo, j)] * x[j];
                r1 -= t[(ii, j)] * x[j];
            }
            let a00 = t[(lo, lo)] + shift;
            let a01 = Complex::new(t[(lo, ii)], 0.0);
            let a10 = Complex::new(t[(ii, lo)], 0.0);
            let a11 = t[(ii, ii)] + shift;
            let det = a00 * a11 - a01 * a10;
            if det.norm() < 1e-300 {
                return Err(Error::Singular(
                    "shifted quasi-triangular block is singular (spectrum overlap)".into(),
                ));
            }
            x[lo] = (r0 * a11 - a01 * r1) / det;
            x[ii] = (a00 * r1 - r0 * a10) / det;
            i -= 2;
        } else {
            let mut r = b[ii];
            for j in ii + 1..n {
                r -= t[(ii, j)] * x[j];
            }
            let d = t[(ii, ii)] + shift;
            if d.norm() < 1e-300 {
                return Err(Error::Singular(
                    "shifted quasi-triangular pivot vanished (spectrum overlap)".into(),
                ));
            }
            x[ii] = r / d;
            i -= 1;
        }
    }
    Ok(x)
}

/// Solve `A X + X B = C` (Bartels–Stewart). Requires the spectra of `A` and
/// `−B` to be disjoint.
pub fn solve_sylvester(
    a: &DMatrix<f64>,
    b: &DMatrix<f64>,
    c: &DMatrix<f64>,
) -> Result<DMatrix<f64>> {
    let (n, m) = (a.nrows(), b.nrows());
    if a.ncols() != n || b.ncols() != m || c.nrows() != n || c.ncols() != m {
        return Err(Error::Shape(
            "sylvester operands have inconsistent shapes".into(),
        ));
    }
    let (u, r) = real_schur(a)?;
    let (v, s) = real_schur(b)?;
    let c_tilde = u.transpose() * c * &v;
    let mut y = DMatrix::<f64>::zeros(n, m);

    let mut j = 0;
    while j < m {
        let pair = j + 1 < m && s[(j + 1, j)] != 0.0;
        let width = if pair { 2 } else { 1 };
        // Right-hand side after subtracting the already-solved columns.
        let mut rhs = DMatrix::<f64>::zeros(n, width);
        for w in 0..width {
            for row in 0..n {
                let mut acc = c_tilde[(row, j + w)];
                for k in 0..j {
                    acc -= y[(row, k)] * s[(k, j + w)];
                }
                rhs[(row, w)] = acc;
            }
        }
        if !pair {
            let shift = Complex::new(s[(j, j)], 0.0);
            let b_col: Vec<Complex<f64>> =
                (0..n).map(|row| Complex::new(rhs[(row, 0)], 0.0)).collect();
            let x = solve_quasi_upper_shifted(&r, shift, &b_col)?;
            for row in 0..n {
                y[(row, j)] = x[row].re;
            }
            j += 1;
        } else {
            // 2x2 block with a complex pair: diagonalize the block, solve one
            // complex shifted system, map back through W = [w, conj(w)].
            let (p, q) = (s[(j, j)], s[(j, j + 1)]);
            let (r2, s2) = (s[(j + 1, j)], s[(j + 1, j + 1)]);
            let h = 0.5 * (p + s2);
            let disc = 0.25 * (p - s2) * (p - s2) + q * r2;
            if disc >= 0.0 {
                return Err(Error::Convergence(
                    "unexpected real 2x2 Schur block; matrix not in canonical form".into(),
                ));
            }
            let lambda = Complex::new(h, (-disc).sqrt());
            let w = if q.abs() > r2.abs() {
                [Complex::new(q, 0.0), lambda - p]
            } else {
                [lambda - s2, Complex::new(r2, 0.0)]
            };
            let b_col: Vec<Complex<f64>> = (0..n)
                .map(|row| w[0] * rhs[(row, 0)] + w[1] * rhs[(row, 1)])
                .collect();
            let z = solve_quasi_upper_shifted(&r, lambda, &b_col)?;
            // Y_block = [z, conj(z)] · W^{-1}, real by conjugate symmetry.
            let det = w[0] * w[1].conj() - w[1] * w[0].conj();
            if det.norm() < 1e-300 {
                return Err(Error::Singular(
                    "degenerate 2x2 Schur block eigenvectors".into(),
                ));
            }
            for row in 0..n {
                let zc = z[row];
                let y0 = (zc * w[1].conj() - zc.conj() * w[1]) / det;
                let y1 = (zc.conj() * w[0] - zc * w[0].conj()) / det;
                y[(row, j)] = y0.re;
                y[(row, j + 1)] = y1.re;
            }
            j += 2;
        }
    }
    Ok(u * y * v.transpose())
}

/// Which side of the Lyapunov equation carries the transpose.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LyapunovOrientation {
    /// `M S + S Mᵀ = Q`.
    MFirst,
    /// `Mᵀ S + S M = Q`.
    TransposeFirst,
}

/// Solve the Lyapunov equation in the requested orientation, verifying the
/// residual to `1e-10` relative.
pub fn solve_lyapunov(
    m: &DMatrix<f64>,
    q: &DMatrix<f64>,
    orientation: LyapunovOrientation,
) -> Result<DMatrix<f64>> {
    let s = match orientation {
        LyapunovOrientation::MFirst => solve_sylvester(m, &m.transpose(), q)?,
        LyapunovOrientation::TransposeFirst => solve_sylvester(&m.transpose(), m, q)?,
    };
    let residual = lyapunov_residual(m, q, &s, orientation);
    if residual > 1e-10 {
        return Err(Error::Singular(format!(
            "Lyapunov residual {residual:.2e} above 1e-10 (near spectrum overlap)"
        )));
    }
    Ok(s)
}

pub fn lyapunov_residual(
    m: &DMatrix<f64>,
    q: &DMatrix<f64>,
    s: &DMatrix<f64>,
    orientation: LyapunovOrientation,
) -> f64 {
    let lhs = match orientation {
        LyapunovOrientation::MFirst => m * s + s * m.transpose(),
        LyapunovOrientation::TransposeFirst => m.transpose() * s + s * m,
    };
    (lhs - q).norm() / q.norm().max(1.0)
}

/// Reference Lyapunov solver through the `n² × n²` Kronecker system; cubic
/// in `n²`, intended for cross-checks at small sizes.
pub fn kronecker_lyapunov(
    m: &DMatrix<f64>,
    q: &DMatrix<f64>,
    orientation: LyapunovOrientation,
) -> Result<DMatrix<f64>> {
    let n = m.nrows();
    assert!(n <= 80, "Kronecker route is a small-size reference");
    let eye = DMatrix::<f64>::identity(n, n);
    let big = match orientation {
        LyapunovOrientation::MFirst => eye.kronecker(m) + m.kronecker(&eye),
        LyapunovOrientation::TransposeFirst => {
            eye.kronecker(&m.transpose()) + m.transpose().kronecker(&eye)
        }
    };
    let rhs = DVector::from_column_slice(q.as_slice());
    let solution = big
        .lu()
        .solve(&rhs)
        .ok_or_else(|| Error::Singular("Kronecker Lyapunov system is singular".into()))?;
    Ok(DMatrix::from_column_slice(n, n, solution.as_slice()))
}

/// Symmetric part `(m + mᵀ)/2`.
pub fn symmetrize(m: &DMatrix<f64>) -> DMatrix<f64> {
    (m + m.transpose()) * 0.5
}

/// Smallest eigenvalue of the symmetric part.
pub fn min_symmetric_eigenvalue(m: &DMatrix<f64>) -> f64 {
    symmetrize(m)
        .symmetric_eigenvalues()
        .iter()
        .fold(f64::INFINITY, |acc, &e| acc.min(e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};

    fn random_matrix(n: usize, seed: u64) -> DMatrix<f64> {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        DMatrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0))
    }

    fn random_stable(n: usize, seed: u64) -> DMatrix<f64> {
        let m = random_matrix(n, seed);
        let shift = spectral_abscissa(&m).unwrap() + 0.5;
        m - DMatrix::identity(n, n) * shift
    }

    #[test]
    fn abscissa_of_diagonal_and_rotation() {
        let d = DMatrix::from_diagonal(&DVector::from_vec(vec![-3.0, -0.7, -2.0]));
        assert_relative_eq!(spectral_abscissa(&d).unwrap(), -0.7, epsilon = 1e-12);
        let rot = DMatrix::from_row_slice(2, 2, &[-1.0, 2.0, -2.0, -1.0]);
        assert_relative_eq!(spectral_abscissa(&rot).unwrap(), -1.0, epsilon = 1e-10);
        let eigs = eigenvalues(&rot).unwrap();
        assert_relative_eq!(eigs[0].im.abs(), 2.0, epsilon = 1e-10);
    }

    #[test]
    fn scalar_lyapunov_orientation_pin() {
        // m = -1, q = 1  =>  m s + s m = q gives s = -1/2.
        let m = DMatrix::from_element(1, 1, -1.0);
        let q = DMatrix::from_element(1, 1, 1.0);
        let s = solve_lyapunov(&m, &q, LyapunovOrientation::MFirst).unwrap();
        assert_relative_eq!(s[(0, 0)], -0.5, epsilon = 1e-14);
    }

    #[test]
    fn sylvester_recovers_a_known_solution() {
        let a = random_stable(9, 1);
        let b = random_stable(7, 2);
        let x_true = DMatrix::from_fn(9, 7, |i, j| ((i * 7 + j) as f64 * 0.37).sin());
        let c = &a * &x_true + &x_true * &b;
        let x = solve_sylvester(&a, &b, &c).unwrap();
        assert!((x - x_true).norm() < 1e-10);
    }

    #[test]
    fn lyapunov_matches_kronecker_reference() {
        for seed in [3, 4, 5] {
            let m = random_stable(12, seed);
            let q = symmetrize(&random_matrix(12, seed + 100));
            for orientation in [
                LyapunovOrientation::MFirst,
                LyapunovOrientation::TransposeFirst,
            ] {
                let fast = solve_lyapunov(&m, &q, orientation).unwrap();
                let slow = kronecker_lyapunov(&m, &q, orientation).unwrap();
                assert!(
                    (&fast - &slow).norm() / slow.norm() < 1e-8,
                    "orientation {orientation:?} mismatch"
                );
                assert!(lyapunov_residual(&m, &q, &fast, orientation) <= 1e-10);
            }
        }
    }

    #[test]
    fn lyapunov_solution_is_symmetric_for_symmetric_rhs() {
        let m = random_stable(15, 9);
        let q = symmetrize(&random_matrix(15, 10));
        let s = solve_lyapunov(&m, &q, LyapunovOrientation::MFirst).unwrap();
        assert!((&s - s.transpose()).norm() < 1e-9 * s.norm().max(1.0));
    }

    #[test]
    fn complex_pair_blocks_are_handled() {
        // An explicit rotation block forces the 2x2 path of the solver.
        let mut m = DMatrix::<f64>::zeros(4, 4);
        m[(0, 0)] = -1.0;
        m[(0, 1)] = 5.0;
        m[(1, 0)] = -5.0;
        m[(1, 1)] = -1.0;
        m[(2, 2)] = -2.0;
        m[(3, 3)] = -4.0;
        m[(2, 3)] = 0.3;
        let q = symmetrize(&random_matrix(4, 42));
        let s = solve_lyapunov(&m, &q, LyapunovOrientation::TransposeFirst).unwrap();
        let slow = kronecker_lyapunov(&m, &q, LyapunovOrientation::TransposeFirst).unwrap();
        assert!((&s - &slow).norm() < 1e-10);
    }

    #[test]
    fn spectrum_overlap_is_reported() {
        // m and -mᵀ share the eigenvalue 0: the Lyapunov system is singular.
        let m = DMatrix::from_diagonal(&DVector::from_vec(vec![0.0, -1.0]));
        let q = DMatrix::identity(2, 2);
        assert!(solve_lyapunov(&m, &q, LyapunovOrientation::MFirst).is_err());
    }
}
