//! Neumann-Laplacian eigenbasis on `(0, L)`.
//!
//! Eigenpairs of `−φ'' = λφ` with `φ'(0) = φ'(L) = 0` are
//! `λ_k = k²π²/L²` and `φ_k(x) = A_k cos(kπx/L)`, normalized here so that
//! `⟨φ_j, φ_k⟩_{L²(0,L)} = δ_{jk}` (`A_0 = √(1/L)`, `A_k = √(2/L)`).
//! Projecting a spatial profile onto the first `K` modes turns the diffusion
//! term into the diagonal damping `c_k ↦ e^{−λ_k t} c_k`.

use crate::error::Error;
use crate::Result;

/// Truncated orthonormal cosine basis with its spatial quadrature grid.
#[derive(Debug, Clone)]
pub struct NeumannBasis {
    length: f64,
    modes: usize,
    points: usize,
}

impl NeumannBasis {
    /// `modes` retained eigenfunctions (`k = 0..modes`), sampled on `points`
    /// uniform nodes including both endpoints.
    pub fn new(length: f64, modes: usize, points: usize) -> Self {
        assert!(length > 0.0, "domain length must be positive");
        assert!(modes >= 1, "need at least the constant mode");
        assert!(points >= 8, "spatial grid too coarse");
        NeumannBasis {
            length,
            modes,
            points,
        }
    }

    pub fn length(&self) -> f64 {
        self.length
    }

    pub fn modes(&self) -> usize {
        self.modes
    }

    pub fn points(&self) -> usize {
        self.points
    }

    pub fn node(&self, i: usize) -> f64 {
        self.length * i as f64 / (self.points - 1) as f64
    }

    pub fn nodes(&self) -> Vec<f64> {
        (0..self.points).map(|i| self.node(i)).collect()
    }

    fn dx(&self) -> f64 {
        self.length / (self.points - 1) as f64
    }

    /// `λ_k = k²π²/L²`.
    pub fn eigenvalue(&self, k: usize) -> f64 {
        eigenvalue(k, self.length)
    }

    fn normalization(&self, k: usize) -> f64 {
        if k == 0 {
            (1.0 / self.length).sqrt()
        } else {
            (2.0 / self.length).sqrt()
        }
    }

    /// `φ_k(x)`.
    pub fn eigenfunction(&self, k: usize, x: f64) -> f64 {
        let wave = k as f64 * std::f64::consts::PI / self.length;
        self.normalization(k) * (wave * x).cos()
    }

    /// Trapezoid projection `c_k = ⟨f, φ_k⟩` of a profile sampled on the
    /// basis grid.
    pub fn project(&self, profile: &[f64]) -> Result<ModeCoefficients> {
        if profile.len() != self.points {
            return Err(Error::Shape(format!(
                "profile has {} samples, basis grid has {}",
                profile.len(),
                self.points
            )));
        }
        let dx = self.dx();
        let coeffs = (0..self.modes)
            .map(|k| {
                let mut acc = 0.0;
                for (i, f) in profile.iter().enumerate() {
                    let w = if i == 0 || i == self.points - 1 {
                        0.5
                    } else {
                        1.0
                    };
                    acc += w * f * self.eigenfunction(k, self.node(i));
                }
                acc * dx
            })
            .collect();
        Ok(ModeCoefficients { coeffs })
    }

    /// `Σ_k c_k φ_k(x)` on the grid.
    pub fn reconstruct(&self, coeffs: &ModeCoefficients) -> Vec<f64> {
        (0..self.points)
            .map(|i| self.evaluate(coeffs, self.node(i)))
            .collect()
    }

    /// Pointwise evaluation of the truncated expansion.
    pub fn evaluate(&self, coeffs: &ModeCoefficients, x: f64) -> f64 {
        coeffs
            .coeffs
            .iter()
            .enumerate()
            .map(|(k, c)| c * self.eigenfunction(k, x))
            .sum()
    }

    /// Heat semigroup action `c_k ↦ e^{−λ_k t} c_k`; `t` must be nonnegative.
    pub fn heat_propagate(&self, coeffs: &ModeCoefficients, t: f64) -> Result<ModeCoefficients> {
        if t < 0.0 {
            return Err(Error::Domain(format!(
                "heat semigroup needs t >= 0, got {t}"
            )));
        }
        Ok(ModeCoefficients {
            coeffs: coeffs
                .coeffs
                .iter()
                .enumerate()
                .map(|(k, c)| c * (-self.eigenvalue(k) * t).exp())
                .collect(),
        })
    }

    /// Projection of the indicator of the interval `(x_lo, x_hi) ⊂ (0, L)`,
    /// computed in closed form: `⟨1_ω, φ_0⟩ = |ω|·A_0` and
    /// `⟨1_ω, φ_k⟩ = A_k (sin(kπ x_hi/L) − sin(kπ x_lo/L)) L/(kπ)`.
    pub fn project_indicator(&self, x_lo: f64, x_hi: f64) -> Result<ModeCoefficients> {
        if !(0.0..=self.length).contains(&x_lo)
            || !(0.0..=self.length).contains(&x_hi)
            || x_lo >= x_hi
        {
            return Err(Error::Domain(format!(
                "indicator interval ({x_lo}, {x_hi}) must satisfy 0 <= lo < hi <= L"
            )));
        }
        let coeffs = (0..self.modes)
            .map(|k| {
                if k == 0 {
                    (x_hi - x_lo) * self.normalization(0)
                } else {
                    let wave = k as f64 * std::f64::consts::PI / self.length;
                    self.normalization(k) * ((wave * x_hi).sin() - (wave * x_lo).sin()) / wave
                }
            })
            .collect();
        Ok(ModeCoefficients { coeffs })
    }
}

/// `λ_k = k²π²/L²` for the Neumann Laplacian on `(0, L)`.
pub fn eigenvalue(k: usize, length: f64) -> f64 {
    let kp = k as f64 * std::f64::consts::PI / length;
    kp * kp
}

/// Coefficient vector of a spatial profile in a [`NeumannBasis`].
#[derive(Debug, Clone, PartialEq)]
pub struct ModeCoefficients {
    coeffs: Vec<f64>,
}

impl ModeCoefficients {
    pub fn new(coeffs: Vec<f64>) -> Self {
        assert!(
            coeffs.iter().all(|c| c.is_finite()),
            "coefficients must be finite"
        );
        ModeCoefficients { coeffs }
    }

    pub fn zeros(modes: usize) -> Self {
        ModeCoefficients {
            coeffs: vec![0.0; modes],
        }
    }

    pub fn unit(modes: usize, k: usize) -> Self {
        let mut coeffs = vec![0.0; modes];
        coeffs[k] = 1.0;
        ModeCoefficients { coeffs }
    }

    pub fn len(&self) -> usize {
        self.coeffs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coeffs.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn get(&self, k: usize) -> f64 {
        self.coeffs[k]
    }

    /// `ℓ²` norm; equals the `L²(0, L)` norm of the expansion by
    /// orthonormality.
    pub fn norm(&self) -> f64 {
        self.coeffs.iter().map(|c| c * c).sum::<f64>().sqrt()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn basis() -> NeumannBasis {
        NeumannBasis::new(1.0, 8, 512)
    }

    #[test]
    fn eigenvalues_match_closed_form() {
        assert_eq!(eigenvalue(0, 1.0), 0.0);
        assert_relative_eq!(
            eigenvalue(1, 1.0),
            std::f64::consts::PI.powi(2),
            epsilon = 1e-12
        );
        // k = 2 on a length-2 interval collapses back to pi^2.
        assert_relative_eq!(
            eigenvalue(2, 2.0),
            std::f64::consts::PI.powi(2),
            epsilon = 1e-12
        );
        let b = basis();
        let mut prev = -1.0;
        for k in 0..b.modes() {
            let l = b.eigenvalue(k);
            assert!(l > prev);
            prev = l;
        }
    }

    #[test]
    fn gram_matrix_is_identity_to_quadrature_tolerance() {
        let b = NeumannBasis::new(1.3, 16, 512);
        for j in 0..16 {
            for k in 0..16 {
                let fj: Vec<f64> = b.nodes().iter().map(|&x| b.eigenfunction(j, x)).collect();
                let c = b.project(&fj).unwrap();
                let expected = if j == k { 1.0 } else { 0.0 };
                assert!(
                    (c.get(k) - expected).abs() < 1e-8,
                    "gram({j},{k}) = {}",
                    c.get(k)
                );
            }
        }
    }

    #[test]
    fn projecting_a_basis_function_gives_a_unit_vector() {
        let b = basis();
        let f: Vec<f64> = b.nodes().iter().map(|&x| b.eigenfunction(1, x)).collect();
        let c = b.project(&f).unwrap();
        assert_relative_eq!(c.get(1), 1.0, epsilon = 1e-10);
        assert!(c.get(0).abs() < 1e-10 && c.get(2).abs() < 1e-10);
    }

    #[test]
    fn constant_profile_loads_only_the_mean_mode() {
        let b = basis();
        let gamma = 2.5;
        let f = vec![gamma; b.points()];
        let c = b.project(&f).unwrap();
        assert_relative_eq!(c.get(0), gamma * 1.0f64.sqrt(), epsilon = 1e-10);
        for k in 1..b.modes() {
            assert!(c.get(k).abs() < 1e-10);
        }
    }

    #[test]
    fn project_rejects_mismatched_grids() {
        assert!(basis().project(&[0.0; 7]).is_err());
    }

    #[test]
    fn reconstruct_zero_and_mean_mode() {
        let b = basis();
        let zero = b.reconstruct(&ModeCoefficients::zeros(b.modes()));
        assert!(zero.iter().all(|v| *v == 0.0));
        let mean = b.reconstruct(&ModeCoefficients::unit(b.modes(), 0));
        for v in mean {
            assert_relative_eq!(v, 1.0, epsilon = 1e-12); // A_0 = sqrt(1/L) = 1 for L = 1
        }
    }

    #[test]
    fn projection_roundtrip_error_decays_at_least_second_order_in_modes() {
        // Smooth profile with vanishing end slopes, so cosine coefficients
        // decay fast; the truncation error must drop at least like K^-2.
        let points = 1024;
        let f: Vec<f64> = (0..points)
            .map(|i| {
                let x = i as f64 / (points - 1) as f64;
                (2.0 * std::f64::consts::PI * x).cos().exp()
            })
            .collect();
        let l2 = |b: &NeumannBasis, c: &ModeCoefficients| {
            let rec = b.reconstruct(c);
            let dx = 1.0 / (points - 1) as f64;
            let mut acc = 0.0;
            for i in 0..points {
                let w = if i == 0 || i == points - 1 { 0.5 } else { 1.0 };
                let e = rec[i] - f[i];
                acc += w * e * e;
            }
            (acc * dx).sqrt()
        };
        let mut errs = Vec::new();
        for k in [4usize, 8, 16] {
            let b = NeumannBasis::new(1.0, k, points);
            let c = b.project(&f).unwrap();
            errs.push(l2(&b, &c));
        }
        assert!(errs[1] < errs[0] / 4.0, "errors {errs:?}");
        assert!(errs[2] < errs[1] / 4.0, "errors {errs:?}");
    }

    #[test]
    fn basis_roundtrip_is_identity() {
        let b = basis();
        for k in 0..b.modes() {
            let f: Vec<f64> = b.nodes().iter().map(|&x| b.eigenfunction(k, x)).collect();
            let c = b.project(&f).unwrap();
            let rec = b.reconstruct(&c);
            for (got, want) in rec.iter().zip(f.iter()) {
                assert!((got - want).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn heat_propagation_identity_and_mean_mode() {
        let b = basis();
        let c = ModeCoefficients::new((0..8).map(|k| 1.0 / (k + 1) as f64).collect());
        let same = b.heat_propagate(&c, 0.0).unwrap();
        assert_eq!(same, c);
        let later = b.heat_propagate(&c, 5.0).unwrap();
        assert_relative_eq!(later.get(0), c.get(0)); // λ_0 = 0: mean preserved
        assert!(b.heat_propagate(&c, -0.1).is_err());
    }

    #[test]
    fn heat_factor_matches_rk4_ode_oracle() {
        // Mode 1 over t = 0.1 integrates c' = -λ_1 c; RK4 with 1000 steps is
        // the oracle.
        let b = basis();
        let lambda = b.eigenvalue(1);
        let mut c = 1.0;
        let (mut t, steps) = (0.0, 1000);
        let h = 0.1 / steps as f64;
        for _ in 0..steps {
            let f = |y: f64| -lambda * y;
            let k1 = f(c);
            let k2 = f(c + 0.5 * h * k1);
            let k3 = f(c + 0.5 * h * k2);
            let k4 = f(c + h * k3);
            c += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
            t += h;
        }
        assert_relative_eq!(t, 0.1, epsilon = 1e-12);
        let prop = b
            .heat_propagate(&ModeCoefficients::unit(8, 1), 0.1)
            .unwrap();
        assert_relative_eq!(prop.get(1), c, max_relative = 1e-8);
        assert_relative_eq!(prop.get(1), (-lambda * 0.1).exp(), max_relative = 1e-12);
    }

    #[test]
    fn heat_semigroup_composes() {
        let b = basis();
        let c = ModeCoefficients::new((0..8).map(|k| (k as f64 * 0.7).sin()).collect());
        let two_step = b
            .heat_propagate(&b.heat_propagate(&c, 0.3).unwrap(), 0.45)
            .unwrap();
        let one_step = b.heat_propagate(&c, 0.75).unwrap();
        for k in 0..8 {
            assert!((two_step.get(k) - one_step.get(k)).abs() < 1e-12);
        }
        assert!(one_step.norm() <= c.norm());
    }

    #[test]
    fn indicator_projection_matches_quadrature() {
        let b = NeumannBasis::new(1.0, 8, 4096);
        let (lo, hi) = (0.2, 0.7);
        let closed = b.project_indicator(lo, hi).unwrap();
        let sampled: Vec<f64> = b
            .nodes()
            .iter()
            .map(|&x| if x >= lo && x <= hi { 1.0 } else { 0.0 })
            .collect();
        let quad = b.project(&sampled).unwrap();
        for k in 0..8 {
            assert!(
                (closed.get(k) - quad.get(k)).abs() < 2e-3,
                "mode {k}: closed {} vs quad {}",
                closed.get(k),
                quad.get(k)
            );
        }
        assert!(b.project_indicator(0.5, 0.4).is_err());
    }
}
