//! Characteristic marching of the modal age-transport system.
//!
//! Each spatial mode `k` obeys
//!
//! ```text
//! ∂_t y + ∂_a y + (μ(a) + λ_k) y = 1_{[0,a₀]}(a) u(t − a)   (band control)
//! y(0, t) = ∫₀^A β(a) y(a, t) da + v(t)                      (renewal + birth control)
//! ```
//!
//! The march uses `Δt = Δa`, so transport along characteristics is exact:
//! one step multiplies by the survival ratio over one cell times the heat
//! damping `e^{−λ_k Δa}` and shifts by one node. Only the renewal quadrature
//! and the control source discretize (both trapezoid, first order overall).
//!
//! The newborn value is closed explicitly: the renewal integral at the new
//! time level uses the freshly shifted interior nodes; the age-zero node
//! (not yet known) contributes with its previous-step value. Under a
//! fertility support floor that contribution vanishes identically.

use crate::demography::DemographicModel;
use crate::error::Error;
use crate::grid::AgeGrid;
use crate::Result;

/// Nodal values of one spectral mode `y_k(a_i)` on an [`AgeGrid`].
#[derive(Debug, Clone, PartialEq)]
pub struct ModalState {
    pub mode: usize,
    pub grid: AgeGrid,
    values: Vec<f64>,
}

impl ModalState {
    pub fn new(mode: usize, grid: AgeGrid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::Shape(format!(
                "state has {} nodes, grid has {}",
                values.len(),
                grid.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Domain(
                "modal state contains non-finite entries".into(),
            ));
        }
        Ok(ModalState { mode, grid, values })
    }

    pub fn zeros(mode: usize, grid: AgeGrid) -> Self {
        ModalState {
            mode,
            grid,
            values: vec![0.0; grid.len()],
        }
    }

    pub fn from_profile(mode: usize, grid: AgeGrid, f: impl Fn(f64) -> f64) -> Self {
        let values = grid.nodes().map(f).collect();
        ModalState { mode, grid, values }
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn get(&self, i: usize) -> f64 {
        self.values[i]
    }

    /// Discrete `L²(0, A)` norm.
    pub fn norm(&self) -> f64 {
        self.grid.norm(&self.values)
    }
}

/// Aggregate `L²` norm over a family of modal states (Parseval across the
/// orthonormal spatial basis).
pub fn ensemble_norm(states: &[ModalState]) -> f64 {
    states.iter().map(|s| s.norm().powi(2)).sum::<f64>().sqrt()
}

/// Where a control acts in age.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ControlSupport {
    /// Boundary control at age zero (enters the renewal condition).
    Birth,
    /// Distributed control on the age band `[0, a₀]`, constant along
    /// characteristics.
    AgeBand { a0: f64 },
}

/// Per-mode control samples on the marching clock (`dt = Δa`).
#[derive(Debug, Clone)]
pub struct ControlSignal {
    pub mode: usize,
    pub dt: f64,
    kind: ControlKind,
}

#[derive(Debug, Clone)]
enum ControlKind {
    /// `v(t_n)`, `n = 0..=steps`.
    Birth { values: Vec<f64> },
    /// `u(s_j)` with `s_j = j·dt ≥ 0` the characteristic label `t − a`
    /// (`u ≡ 0` for `s < 0`), switched off for `t > active_until`.
    AgeBand {
        a0: f64,
        values: Vec<f64>,
        active_until: f64,
    },
}

impl ControlSignal {
    pub fn birth(mode: usize, dt: f64, values: Vec<f64>) -> Self {
        ControlSignal {
            mode,
            dt,
            kind: ControlKind::Birth { values },
        }
    }

    pub fn age_band(mode: usize, dt: f64, a0: f64, values: Vec<f64>, active_until: f64) -> Self {
        assert!(a0 > 0.0);
        ControlSignal {
            mode,
            dt,
            kind: ControlKind::AgeBand {
                a0,
                values,
                active_until,
            },
        }
    }

    pub fn zero_birth(mode: usize, dt: f64, steps: usize) -> Self {
        Self::birth(mode, dt, vec![0.0; steps + 1])
    }

    pub fn support(&self) -> ControlSupport {
        match &self.kind {
            ControlKind::Birth { .. } => ControlSupport::Birth,
            ControlKind::AgeBand { a0, .. } => ControlSupport::AgeBand { a0: *a0 },
        }
    }

    /// Birth sample at time node `n` (zero past the stored horizon).
    pub fn birth_value(&self, n: usize) -> f64 {
        match &self.kind {
            ControlKind::Birth { values } => values.get(n).copied().unwrap_or(0.0),
            ControlKind::AgeBand { .. } => 0.0,
        }
    }

    /// Band sample at characteristic index `j` (`s = j·dt`).
    pub fn band_value(&self, j: isize) -> f64 {
        match &self.kind {
            ControlKind::AgeBand { values, .. } => {
                if j < 0 {
                    0.0
                } else {
                    values.get(j as usize).copied().unwrap_or(0.0)
                }
            }
            ControlKind::Birth { .. } => 0.0,
        }
    }

    pub fn samples(&self) -> &[f64] {
        match &self.kind {
            ControlKind::Birth { values } => values,
            ControlKind::AgeBand { values, .. } => values,
        }
    }

    /// Discrete `L²(0, T)` norm of a birth signal (trapezoid in time).
    pub fn birth_l2_norm(&self) -> f64 {
        match &self.kind {
            ControlKind::Birth { values } => crate::grid::l2_norm_uniform(values, self.dt),
            ControlKind::AgeBand { .. } => 0.0,
        }
    }
}

/// Time-indexed renewal trace `b(t_n) = ∫₀^A β(a) y(a, t_n) da`.
#[derive(Debug, Clone)]
pub struct RenewalTrace {
    pub mode: usize,
    pub dt: f64,
    pub values: Vec<f64>,
}

/// Full time history of one modal march.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub mode: usize,
    pub grid: AgeGrid,
    pub dt: f64,
    states: Vec<Vec<f64>>,
}

impl Trajectory {
    pub fn steps(&self) -> usize {
        self.states.len() - 1
    }

    pub fn time(&self, n: usize) -> f64 {
        n as f64 * self.dt
    }

    pub fn state(&self, n: usize) -> &[f64] {
        &self.states[n]
    }

    pub fn final_state(&self) -> &[f64] {
        self.states.last().unwrap()
    }

    pub fn modal_state(&self, n: usize) -> ModalState {
        ModalState {
            mode: self.mode,
            grid: self.grid,
            values: self.states[n].clone(),
        }
    }

    pub fn final_norm(&self) -> f64 {
        self.grid.norm(self.final_state())
    }

    /// Discrete mass `∫₀^A y(a, t_n) da`.
    pub fn mass(&self, n: usize) -> f64 {
        self.grid.trapezoid(&self.states[n])
    }
}

/// One mode's transport dynamics with precomputed per-step factors.
pub struct ModeDynamics<'m> {
    pub model: &'m DemographicModel,
    pub grid: AgeGrid,
    pub mode: usize,
    pub lambda: f64,
    step_ratio: Vec<f64>,
    decay: f64,
    beta: Vec<f64>,
}

impl<'m> ModeDynamics<'m> {
    pub fn new(model: &'m DemographicModel, grid: AgeGrid, mode: usize, lambda: f64) -> Self {
        let da = grid.delta();
        // step_ratio[i] = π(a_i)/π(a_{i−1}); the last node gets 0 exactly
        // when the cumulative hazard diverges at A.
        let step_ratio: Vec<f64> = (0..grid.len())
            .map(|i| {
                if i == 0 {
                    0.0
                } else {
                    model
                        .survival_ratio(grid.node(i), da)
                        .expect("grid inside [0, A]")
                }
            })
            .collect();
        let beta = grid.nodes().map(|a| model.beta(a)).collect();
        ModeDynamics {
            model,
            grid,
            mode,
            lambda,
            step_ratio,
            decay: (-lambda * da).exp(),
            beta,
        }
    }

    /// Number of march steps for a horizon `t`; errors when `t` is not a
    /// node of the characteristic clock.
    pub fn steps_for_horizon(grid: &AgeGrid, t: f64) -> Result<usize> {
        let steps = (t / grid.delta()).round();
        if (steps * grid.delta() - t).abs() > 1e-9 * grid.lifespan() {
            return Err(Error::Domain(format!(
                "horizon {t} is not aligned with the characteristic step {}",
                grid.delta()
            )));
        }
        Ok(steps as usize)
    }

    pub fn evolve_uncontrolled(&self, y0: &ModalState, steps: usize) -> Trajectory {
        self.march(y0, steps, None)
    }

    pub fn evolve_controlled(
        &self,
        y0: &ModalState,
        control: &ControlSignal,
        steps: usize,
    ) -> Result<Trajectory> {
        if control.mode != y0.mode {
            return Err(Error::Shape(format!(
                "control is for mode {}, state is mode {}",
                control.mode, y0.mode
            )));
        }
        if (control.dt - self.grid.delta()).abs() > 1e-12 * self.grid.delta() {
            return Err(Error::Shape(
                "control samples not on the marching clock".into(),
            ));
        }
        if let ControlSupport::AgeBand { a0 } = control.support() {
            if a0 >= self.grid.lifespan() {
                return Err(Error::Domain(
                    "control band must be a strict sub-interval of [0, A]".into(),
                ));
            }
        }
        Ok(self.march(y0, steps, Some(control)))
    }

    #[allow(clippy::needless_range_loop)] // index arithmetic tracks the characteristic shift
    fn march(&self, y0: &ModalState, steps: usize, control: Option<&ControlSignal>) -> Trajectory {
        assert_eq!(y0.grid, self.grid, "state grid differs from dynamics grid");
        let n_nodes = self.grid.len();
        let da = self.grid.delta();
        let mut states = Vec::with_capacity(steps + 1);
        states.push(y0.values.clone());

        for n in 0..steps {
            let old = states.last().unwrap().clone();
            let mut new = vec![0.0; n_nodes];
            let t_next = (n + 1) as f64 * da;

            for i in 1..n_nodes {
                let full_factor = self.step_ratio[i] * self.decay;
                new[i] = full_factor * old[i - 1];
                if let Some(sig) = control {
                    if let ControlKind::AgeBand {
                        a0, active_until, ..
                    } = &sig.kind
                    {
                        // The source is constant along the characteristic;
                        // trapezoid of the decaying kernel over one step.
                        if t_next <= active_until + 0.5 * da {
                            let j = (n as isize + 1) - i as isize;
                            let u = sig.band_value(j);
                            if u != 0.0 {
                                let lo = if self.grid.node(i - 1) <= *a0 + 1e-12 {
                                    1.0
                                } else {
                                    0.0
                                };
                                let hi = if self.grid.node(i) <= *a0 + 1e-12 {
                                    1.0
                                } else {
                                    0.0
                                };
                                new[i] += u * 0.5 * da * (full_factor * lo + hi);
                            }
                        }
                    }
                }
            }

            // Renewal closure: interior nodes at the new level, previous
            // value for the age-zero node.
            let mut b = self.grid.weight(0) * self.beta[0] * old[0];
            for i in 1..n_nodes {
                b += self.grid.weight(i) * self.beta[i] * new[i];
            }
            new[0] = b;
            if let Some(sig) = control {
                new[0] += sig.birth_value(n + 1);
            }
            states.push(new);
        }

        Trajectory {
            mode: self.mode,
            grid: self.grid,
            dt: da,
            states,
        }
    }

    /// Renewal trace of a stored trajectory (full trapezoid at every level).
    pub fn renewal_trace(&self, trajectory: &Trajectory) -> RenewalTrace {
        let values = (0..=trajectory.steps())
            .map(|n| {
                let y = trajectory.state(n);
                (0..self.grid.len())
                    .map(|i| self.grid.weight(i) * self.beta[i] * y[i])
                    .sum()
            })
            .collect();
        RenewalTrace {
            mode: self.mode,
            dt: trajectory.dt,
            values,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::demography::{DemographicModel, FertilityRate, MortalityRate};
    use crate::spectral::eigenvalue;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn free_model() -> DemographicModel {
        DemographicModel::new(
            MortalityRate::constant(1.0, 0.0),
            FertilityRate::constant(1.0, 0.0),
        )
        .unwrap()
    }

    fn paper_model() -> DemographicModel {
        DemographicModel::benchmark(1.0, 0.8).unwrap()
    }

    fn bump(a: f64) -> f64 {
        let x = a * (1.0 - a);
        16.0 * x * x
    }

    #[test]
    fn zero_steps_returns_initial_state() {
        let model = paper_model();
        let grid = AgeGrid::new(1.0, 50);
        let dyn0 = ModeDynamics::new(&model, grid, 0, 0.0);
        let y0 = ModalState::from_profile(0, grid, bump);
        let traj = dyn0.evolve_uncontrolled(&y0, 0);
        assert_eq!(traj.state(0), y0.values());
        assert_eq!(traj.steps(), 0);
    }

    #[test]
    fn pure_shift_without_mortality_or_fertility() {
        let model = free_model();
        let grid = AgeGrid::new(1.0, 40);
        let dyn0 = ModeDynamics::new(&model, grid, 0, 0.0);
        let y0 = ModalState::from_profile(0, grid, bump);
        let steps = 10;
        let traj = dyn0.evolve_uncontrolled(&y0, steps);
        for (i, value) in traj.final_state().iter().enumerate() {
            let expected = if i >= steps {
                bump(grid.node(i - steps))
            } else {
                0.0
            };
            assert_relative_eq!(*value, expected, epsilon = 1e-14);
        }
    }

    #[test]
    fn free_flow_is_exact_along_characteristics() {
        // With β ≡ 0 the march multiplies exact per-cell survival ratios,
        // so it reproduces the closed-form flow to round-off.
        let model = DemographicModel::new(
            MortalityRate::reciprocal_remaining(1.0, 50.0),
            FertilityRate::constant(1.0, 0.0),
        )
        .unwrap();
        let grid = AgeGrid::new(1.0, 64);
        let lambda = eigenvalue(1, 1.0);
        let dyn1 = ModeDynamics::new(&model, grid, 1, lambda);
        let y0 = ModalState::from_profile(1, grid, bump);
        let steps = 16;
        let traj = dyn1.evolve_uncontrolled(&y0, steps);
        let t = steps as f64 * grid.delta();
        for i in 0..grid.len() {
            let expected = if i >= steps {
                model.survival_ratio(grid.node(i), t).unwrap()
                    * (-lambda * t).exp()
                    * bump(grid.node(i - steps))
            } else {
                0.0
            };
            assert_relative_eq!(traj.final_state()[i], expected, epsilon = 1e-12);
        }
    }

    #[test]
    fn zero_control_equals_uncontrolled() {
        let model = paper_model();
        let grid = AgeGrid::new(1.0, 32);
        let dyn0 = ModeDynamics::new(&model, grid, 0, 0.0);
        let y0 = ModalState::from_profile(0, grid, bump);
        let free = dyn0.evolve_uncontrolled(&y0, 20);
        let ctrl = ControlSignal::zero_birth(0, grid.delta(), 20);
        let forced = dyn0.evolve_controlled(&y0, &ctrl, 20).unwrap();
        for n in 0..=20 {
            assert_eq!(free.state(n), forced.state(n));
        }
    }

    #[test]
    fn unit_birth_control_transports_the_boundary_value() {
        let model = free_model();
        let grid = AgeGrid::new(1.0, 25);
        let dyn0 = ModeDynamics::new(&model, grid, 0, 0.0);
        let y0 = ModalState::zeros(0, grid);
        let steps = 15;
        let ctrl = ControlSignal::birth(0, grid.delta(), vec![1.0; steps + 1]);
        let traj = dyn0.evolve_controlled(&y0, &ctrl, steps).unwrap();
        for (i, value) in traj.final_state().iter().enumerate() {
            let expected = if i < steps { 1.0 } else { 0.0 };
            assert_relative_eq!(*value, expected, epsilon = 1e-14);
        }
    }

    #[test]
    fn renewal_trace_trivial_cases() {
        let grid = AgeGrid::new(1.0, 20);
        let model = DemographicModel::new(
            MortalityRate::constant(1.0, 0.0),
            FertilityRate::constant(1.0, 2.0),
        )
        .unwrap();
        let dyn0 = ModeDynamics::new(&model, grid, 0, 0.0);
        let zero = dyn0.evolve_uncontrolled(&ModalState::zeros(0, grid), 5);
        assert!(dyn0.renewal_trace(&zero).values.iter().all(|b| *b == 0.0));

        let ones = Trajectory {
            mode: 0,
            grid,
            dt: grid.delta(),
            states: vec![vec![1.0; grid.len()]],
        };
        let trace = dyn0.renewal_trace(&ones);
        assert_relative_eq!(trace.values[0], 2.0, epsilon = 1e-12);
    }

    #[test]
    fn renewal_trace_matches_simpson_oracle() {
        let model = paper_model();
        let grid = AgeGrid::new(1.0, 512);
        let dyn0 = ModeDynamics::new(&model, grid, 0, 0.0);
        let traj = Trajectory {
            mode: 0,
            grid,
            dt: grid.delta(),
            states: vec![grid.nodes().map(bump).collect()],
        };
        let got = dyn0.renewal_trace(&traj).values[0];

        let panels = 200_000;
        let h = 1.0 / panels as f64;
        let f = |a: f64| model.beta(a) * bump(a);
        let mut simpson = f(0.0) + f(1.0);
        for i in 1..panels {
            simpson += if i % 2 == 1 { 4.0 } else { 2.0 } * f(i as f64 * h);
        }
        simpson *= h / 3.0;
        assert_relative_eq!(got, simpson, max_relative = 1e-6);
    }

    #[test]
    fn march_composes_exactly() {
        let model = paper_model();
        let grid = AgeGrid::new(1.0, 30);
        let dyn1 = ModeDynamics::new(&model, grid, 1, eigenvalue(1, 1.0));
        let y0 = ModalState::from_profile(1, grid, bump);
        let full = dyn1.evolve_uncontrolled(&y0, 12);
        let first = dyn1.evolve_uncontrolled(&y0, 5);
        let second = dyn1.evolve_uncontrolled(&first.modal_state(5), 7);
        assert_eq!(full.final_state(), second.final_state());
    }

    #[test]
    fn mass_budget_identity_for_pure_shift() {
        let model = free_model();
        let grid = AgeGrid::new(1.0, 40);
        let dyn0 = ModeDynamics::new(&model, grid, 0, 0.0);
        let y0 = ModalState::from_profile(0, grid, |a| 1.0 + (3.0 * a).sin().powi(2));
        let traj = dyn0.evolve_uncontrolled(&y0, 25);
        let da = grid.delta();
        for n in 0..traj.steps() {
            let old = traj.state(n);
            let new = traj.state(n + 1);
            let inflow = 0.5 * da * (new[0] + old[0]);
            let outflow = 0.5 * da * (old[grid.len() - 2] + old[grid.len() - 1]);
            let budget = traj.mass(n + 1) - traj.mass(n) - inflow + outflow;
            assert!(budget.abs() < 1e-10, "budget residual {budget} at step {n}");
        }
    }

    #[test]
    fn first_order_convergence_under_grid_refinement() {
        let model = paper_model();
        let horizon = 0.5;
        let run = |cells: usize| {
            let grid = AgeGrid::new(1.0, cells);
            let dynk = ModeDynamics::new(&model, grid, 0, 0.0);
            let y0 = ModalState::from_profile(0, grid, bump);
            let steps = ModeDynamics::steps_for_horizon(&grid, horizon).unwrap();
            dynk.evolve_uncontrolled(&y0, steps)
        };
        let reference = run(640);
        let sample = |traj: &Trajectory, cells: usize| -> Vec<f64> {
            // Values at the nodes of the coarsest (80-cell) grid.
            (0..=80)
                .map(|i| traj.final_state()[i * cells / 80])
                .collect()
        };
        let coarse_grid = AgeGrid::new(1.0, 80);
        let err = |cells: usize| {
            let traj = run(cells);
            let s = sample(&traj, cells);
            let r = sample(&reference, 640);
            let diff: Vec<f64> = s.iter().zip(&r).map(|(a, b)| a - b).collect();
            coarse_grid.norm(&diff)
        };
        let e1 = err(80);
        let e2 = err(160);
        assert!(
            e1 / e2 > 1.7,
            "refinement ratio {} too small (e1={e1}, e2={e2})",
            e1 / e2
        );
    }

    #[test]
    fn rejects_mismatched_control() {
        let model = paper_model();
        let grid = AgeGrid::new(1.0, 16);
        let dyn0 = ModeDynamics::new(&model, grid, 0, 0.0);
        let y0 = ModalState::zeros(0, grid);
        let wrong_mode = ControlSignal::zero_birth(3, grid.delta(), 4);
        assert!(dyn0.evolve_controlled(&y0, &wrong_mode, 4).is_err());
        let wrong_clock = ControlSignal::birth(0, 0.9 * grid.delta(), vec![0.0; 5]);
        assert!(dyn0.evolve_controlled(&y0, &wrong_clock, 4).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]
        #[test]
        fn nonnegative_data_gives_nonnegative_trajectory(
            seed_amp in 0.1f64..4.0,
            ctrl_amp in 0.0f64..2.0,
            steps in 1usize..30
        ) {
            let model = paper_model();
            let grid = AgeGrid::new(1.0, 24);
            let dyn0 = ModeDynamics::new(&model, grid, 0, 0.0);
            let y0 = ModalState::from_profile(0, grid, |a| seed_amp * bump(a));
            let ctrl = ControlSignal::birth(0, grid.delta(), vec![ctrl_amp; steps + 1]);
            let traj = dyn0.evolve_controlled(&y0, &ctrl, steps).unwrap();
            for n in 0..=steps {
                prop_assert!(traj.state(n).iter().all(|v| *v >= 0.0));
            }
            let trace = dyn0.renewal_trace(&traj);
            prop_assert!(trace.values.iter().all(|b| *b >= 0.0));
        }
    }
}
