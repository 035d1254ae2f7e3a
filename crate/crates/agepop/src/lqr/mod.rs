//! Finite-dimensional LQ machinery for one spectral mode.
//!
//! The age equation is discretized in state space with an upwind transport
//! stencil, nodal decay `μ(a_i) + λ_k`, and the renewal integral folded into
//! the first row through the shared trapezoid weights. The birth control is
//! a Dirac at age zero, represented as `e₀/Δa` so its physical units do not
//! depend on the grid. On top of that LTI model the module provides
//!
//! * the static optimality system (one saddle solve of the Hamiltonian),
//! * the algebraic Riccati equation by Newton–Kleinman iteration,
//! * the dichotomy transform splitting the Hamiltonian into exponentially
//!   stable forward and backward halves,
//! * closed-loop simulation under the stabilizing feedback `v = −Bᵀ Ê y`,
//! * a differential Riccati integrator ([`riccati`]) and a direct
//!   discretize-then-optimize solver ([`kkt`]).
//!
//! All quadratic forms in this layer live in plain Euclidean `ℝⁿ` (the
//! discrete cost is `½N Σ|Y−Y_d|² + ½Σ|V|²`); age-weighted norms belong to
//! the transport layer.

pub mod kkt;
pub mod riccati;

pub use kkt::{solve_dynamic_lq, OptimalTriple, TerminalWeight};
pub use riccati::{solve_riccati_ode, RiccatiTrajectory};

pub use crate::linalg::{solve_lyapunov, LyapunovOrientation};

use nalgebra::{DMatrix, DVector};

use crate::demography::DemographicModel;
use crate::error::Error;
use crate::grid::AgeGrid;
use crate::linalg::{solve_lyapunov as lyapunov, spectral_abscissa, symmetrize};
use crate::Result;

/// Upwind state-space model of one spectral mode.
#[derive(Debug, Clone)]
pub struct ModalLti {
    /// Drift matrix: subdiagonal transport, diagonal decay, renewal first
    /// row.
    pub drift: DMatrix<f64>,
    /// Input column (Dirac at age zero, `e₀/Δa`).
    pub input: DVector<f64>,
    /// State weight `N > 0` of the running cost.
    pub state_weight: f64,
    pub grid: AgeGrid,
    pub mode: usize,
    pub lambda: f64,
}

impl ModalLti {
    pub fn dim(&self) -> usize {
        self.drift.nrows()
    }

    /// `B Bᵀ` (rank one).
    pub fn gram(&self) -> DMatrix<f64> {
        &self.input * self.input.transpose()
    }

    /// Hamiltonian block matrix `[[A, −BBᵀ], [−N·I, −Aᵀ]]`.
    pub fn hamiltonian(&self) -> DMatrix<f64> {
        let n = self.dim();
        let mut ham = DMatrix::<f64>::zeros(2 * n, 2 * n);
        ham.view_mut((0, 0), (n, n)).copy_from(&self.drift);
        ham.view_mut((0, n), (n, n)).copy_from(&(-self.gram()));
        ham.view_mut((n, 0), (n, n))
            .copy_from(&(DMatrix::<f64>::identity(n, n) * (-self.state_weight)));
        ham.view_mut((n, n), (n, n))
            .copy_from(&(-self.drift.transpose()));
        ham
    }
}

/// Assemble the modal LTI on `grid` with heat damping `lambda`.
///
/// Decay at the last node is evaluated half a cell inward, where mortality
/// laws with a divergent hazard stay finite.
pub fn assemble_modal_system(
    model: &DemographicModel,
    grid: AgeGrid,
    mode: usize,
    lambda: f64,
    state_weight: f64,
) -> ModalLti {
    assert!(state_weight > 0.0, "state weight must be positive");
    let n = grid.len();
    let da = grid.delta();
    let a_max = grid.lifespan();
    let mut drift = DMatrix::<f64>::zeros(n, n);
    for i in 0..n {
        let age = grid.node(i).min(a_max - 0.5 * da);
        let decay = model.mortality.rate(age) + lambda;
        if i > 0 {
            drift[(i, i - 1)] = 1.0 / da;
        }
        drift[(i, i)] = -1.0 / da - decay;
        // Renewal inflow into the newborn cell.
        drift[(0, i)] += grid.weight(i) * model.beta(grid.node(i)) / da;
    }
    let mut input = DVector::<f64>::zeros(n);
    input[0] = 1.0 / da;
    ModalLti {
        drift,
        input,
        state_weight,
        grid,
        mode,
        lambda,
    }
}

/// Optimal stationary triple `(ȳ, v̄, p̄)`.
#[derive(Debug, Clone)]
pub struct StaticTriple {
    pub state: DVector<f64>,
    pub control: f64,
    pub adjoint: DVector<f64>,
}

/// Solve the stationary optimality system
/// `−A ȳ = B v̄`, `−Aᵀ p̄ = N(ȳ − y_d)`, `v̄ = −Bᵀ p̄`
/// as one linear solve on the Hamiltonian.
///
/// A singular drift (critical reproduction number) is reported as an error:
/// at that resonance the uncontrolled steady problem has a one-parameter
/// family of solutions.
pub fn solve_static_lq(sys: &ModalLti, target: &DVector<f64>) -> Result<StaticTriple> {
    let n = sys.dim();
    if target.len() != n {
        return Err(Error::Shape("target dimension mismatch".into()));
    }
    let pivot_floor = 1e-10;
    let lu_a = sys.drift.clone().full_piv_lu();
    let diag = lu_a.u().diagonal();
    let max_pivot = diag.amax();
    if diag.iter().any(|p| p.abs() < pivot_floor * max_pivot) {
        return Err(Error::Singular(
            "static optimality system is singular: the drift matrix has a vanishing pivot \
             (reproduction number at its critical value)"
                .into(),
        ));
    }

    let ham = sys.hamiltonian();
    let mut rhs = DVector::<f64>::zeros(2 * n);
    rhs.rows_mut(n, n)
        .copy_from(&(target * (-sys.state_weight)));
    let solution = ham
        .full_piv_lu()
        .solve(&rhs)
        .ok_or_else(|| Error::Singular("stationary saddle system is singular".into()))?;
    let state = DVector::from(solution.rows(0, n));
    let adjoint = DVector::from(solution.rows(n, n));
    let control = -(sys.input.dot(&adjoint));

    let scale = target.norm().max(1.0);
    let res_state = (&sys.drift * &state + &sys.input * control).norm();
    let res_adjoint =
        (sys.drift.transpose() * &adjoint + (&state - target) * sys.state_weight).norm();
    if res_state.max(res_adjoint) > 1e-10 * scale.max(state.norm() + adjoint.norm()) {
        return Err(Error::Convergence(format!(
            "stationary optimality residual too large: state {res_state:.2e}, adjoint {res_adjoint:.2e}"
        )));
    }
    Ok(StaticTriple {
        state,
        control,
        adjoint,
    })
}

/// Stabilizing solution of `Ê A + Aᵀ Ê − Ê B Bᵀ Ê + N·I = 0` by
/// Newton–Kleinman iteration (seeded with zero when the drift is already
/// stable, otherwise from a long differential-Riccati run).
pub fn solve_are(sys: &ModalLti) -> Result<DMatrix<f64>> {
    let n = sys.dim();
    let q = DMatrix::<f64>::identity(n, n) * sys.state_weight;
    let g = sys.gram();
    let q_norm = q.norm();

    let mut e = if spectral_abscissa(&sys.drift)? < 0.0 {
        DMatrix::<f64>::zeros(n, n)
    } else {
        // Seed escalation: march the differential Riccati equation long
        // enough that the feedback stabilizes. The step must resolve both
        // the drift and the rank-one input term (amplitude |B|² from the
        // unit terminal condition).
        let tau_seed = 10.0;
        let stiffness = sys.drift.amax() + g.amax() + sys.state_weight;
        let steps = ((tau_seed * 4.0 * stiffness).ceil() as usize).clamp(100, 2_000_000);
        let traj = riccati::solve_riccati_ode(sys, tau_seed, steps)?;
        traj.matrices().last().unwrap().clone()
    };

    for _ in 0..50 {
        let closed = &sys.drift - &g * &e;
        if spectral_abscissa(&closed)? >= 0.0 {
            return Err(Error::Convergence(
                "Newton-Kleinman iterate lost stability; system may not be stabilizable".into(),
            ));
        }
        let rhs = -(&q + &e * &g * &e);
        let next = symmetrize(&lyapunov(
            &closed,
            &rhs,
            LyapunovOrientation::TransposeFirst,
        )?);
        let residual = are_residual(sys, &next);
        let step = (&next - &e).norm();
        e = next;
        if residual <= 1e-10 * q_norm && step <= 1e-9 * e.norm().max(1.0) {
            return Ok(e);
        }
        if residual <= 1e-12 * q_norm {
            return Ok(e);
        }
    }
    let residual = are_residual(sys, &e);
    if residual <= 1e-10 * q_norm {
        Ok(e)
    } else {
        Err(Error::Convergence(format!(
            "Newton-Kleinman did not reach the residual target (got {residual:.2e})"
        )))
    }
}

/// Frobenius residual of the algebraic Riccati equation.
pub fn are_residual(sys: &ModalLti, e: &DMatrix<f64>) -> f64 {
    let n = sys.dim();
    let q = DMatrix::<f64>::identity(n, n) * sys.state_weight;
    (e * &sys.drift + sys.drift.transpose() * e - e * sys.gram() * e + q).norm()
}

/// Block transform splitting the Hamiltonian flow into its exponentially
/// stable forward and backward halves.
#[derive(Debug, Clone)]
pub struct DichotomyTransform {
    pub e_hat: DMatrix<f64>,
    /// Lyapunov factor coupling the two halves.
    pub coupling: DMatrix<f64>,
    /// `Λ = [[I, S], [Ê, ÊS + I]]`.
    pub lambda: DMatrix<f64>,
    /// `Λ⁻¹ = [[I + SÊ, −S], [−Ê, I]]`.
    pub lambda_inv: DMatrix<f64>,
    /// Relative Frobenius distance of the conjugated Hamiltonian from
    /// `blockdiag(A − BBᵀÊ, −(A − BBᵀÊ)ᵀ)`.
    pub residual: f64,
    /// Which Lyapunov orientation produced the accepted transform.
    pub orientation: LyapunovOrientation,
    /// True when the accepted conjugation is `Λ⁻¹ · Ham · Λ` (the map
    /// sending state/adjoint deviations to the decoupled variables);
    /// false for `Λ · Ham · Λ⁻¹`.
    pub decouples_by_inverse: bool,
}

/// Build the dichotomy transform for a stabilizing `Ê`.
///
/// The Lyapunov equation for the coupling block is stated ambiguously with
/// respect to the adjoint placement; both orientations (and both
/// conjugation sides) are tried and the combination with the smallest
/// block-diagonalization residual is returned.
pub fn build_dichotomy(sys: &ModalLti, e_hat: &DMatrix<f64>) -> Result<DichotomyTransform> {
    let n = sys.dim();
    let g = sys.gram();
    let closed = &sys.drift - &g * e_hat;
    if spectral_abscissa(&closed)? >= 0.0 {
        return Err(Error::Precondition(
            "dichotomy needs a stabilizing Riccati solution".into(),
        ));
    }
    let ham = sys.hamiltonian();
    let ham_norm = ham.norm();
    let target = {
        let mut d = DMatrix::<f64>::zeros(2 * n, 2 * n);
        d.view_mut((0, 0), (n, n)).copy_from(&closed);
        d.view_mut((n, n), (n, n)).copy_from(&(-closed.transpose()));
        d
    };

    let eye = DMatrix::<f64>::identity(n, n);
    let mut best: Option<DichotomyTransform> = None;
    for orientation in [
        LyapunovOrientation::MFirst,
        LyapunovOrientation::TransposeFirst,
    ] {
        let s = match lyapunov(&closed, &g, orientation) {
            Ok(s) => symmetrize(&s),
            Err(_) => continue,
        };
        let mut lambda = DMatrix::<f64>::zeros(2 * n, 2 * n);
        lambda.view_mut((0, 0), (n, n)).copy_from(&eye);
        lambda.view_mut((0, n), (n, n)).copy_from(&s);
        lambda.view_mut((n, 0), (n, n)).copy_from(e_hat);
        lambda
            .view_mut((n, n), (n, n))
            .copy_from(&(e_hat * &s + &eye));
        let mut lambda_inv = DMatrix::<f64>::zeros(2 * n, 2 * n);
        lambda_inv
            .view_mut((0, 0), (n, n))
            .copy_from(&(&eye + &s * e_hat));
        lambda_inv.view_mut((0, n), (n, n)).copy_from(&(-&s));
        lambda_inv.view_mut((n, 0), (n, n)).copy_from(&(-e_hat));
        lambda_inv.view_mut((n, n), (n, n)).copy_from(&eye);

        for by_inverse in [true, false] {
            let conjugated = if by_inverse {
                &lambda_inv * &ham * &lambda
            } else {
                &lambda * &ham * &lambda_inv
            };
            let residual = (&conjugated - &target).norm() / ham_norm.max(1.0);
            if best.as_ref().is_none_or(|b| residual < b.residual) {
                best = Some(DichotomyTransform {
                    e_hat: e_hat.clone(),
                    coupling: s.clone(),
                    lambda: lambda.clone(),
                    lambda_inv: lambda_inv.clone(),
                    residual,
                    orientation,
                    decouples_by_inverse: by_inverse,
                });
            }
        }
    }
    let best = best.ok_or_else(|| {
        Error::Singular("both Lyapunov orientations failed for the dichotomy coupling".into())
    })?;
    if best.residual > 1e-8 {
        return Err(Error::Convergence(format!(
            "dichotomy failure: block-diagonalization residual {:.2e} above 1e-8 \
             in both Lyapunov orientations",
            best.residual
        )));
    }
    Ok(best)
}

/// State/control history of the closed loop `y' = (A − BBᵀÊ) y`.
#[derive(Debug, Clone)]
pub struct ClosedLoopRun {
    pub dt: f64,
    pub states: Vec<DVector<f64>>,
    /// Feedback values `v = −BᵀÊy` at the state nodes.
    pub controls: Vec<f64>,
}

impl ClosedLoopRun {
    pub fn time(&self, n: usize) -> f64 {
        n as f64 * self.dt
    }
}

/// Integrate the closed loop by RK4, recording the feedback control.
pub fn closed_loop_simulate(
    sys: &ModalLti,
    e_hat: &DMatrix<f64>,
    y0: &DVector<f64>,
    horizon: f64,
    steps: usize,
) -> Result<ClosedLoopRun> {
    if y0.len() != sys.dim() {
        return Err(Error::Shape("initial state dimension mismatch".into()));
    }
    let closed = &sys.drift - sys.gram() * e_hat;
    let gain = e_hat * &sys.input; // v = −gainᵀ y
    let h = horizon / steps as f64;
    let mut states = Vec::with_capacity(steps + 1);
    let mut controls = Vec::with_capacity(steps + 1);
    let mut y = y0.clone();
    controls.push(-gain.dot(&y));
    states.push(y.clone());
    for _ in 0..steps {
        let k1 = &closed * &y;
        let k2 = &closed * &(&y + &k1 * (0.5 * h));
        let k3 = &closed * &(&y + &k2 * (0.5 * h));
        let k4 = &closed * &(&y + &k3 * h);
        y += (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0);
        states.push(y.clone());
        controls.push(-gain.dot(&y));
    }
    Ok(ClosedLoopRun {
        dt: h,
        states,
        controls,
    })
}

/// Helpers shared by the LQ tests and the acceptance suite.
pub fn scalar_system(a: f64, b: f64, weight: f64) -> ModalLti {
    ModalLti {
        drift: DMatrix::from_element(1, 1, a),
        input: DVector::from_element(1, b),
        state_weight: weight,
        grid: AgeGrid::new(1.0, 2),
        mode: 0,
        lambda: 0.0,
    }
}
