//! Uniform age grid and trapezoid quadrature helpers.
//!
//! Every module discretizes `[0, A]` with the same uniform node set so that
//! renewal integrals, control synthesis and the characteristic march share
//! quadrature weights exactly. Time marching always uses `Δt = Δa`, which
//! keeps transport exact along characteristics.

/// Uniform grid on `[0, A]` with `cells` intervals and `cells + 1` nodes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AgeGrid {
    lifespan: f64,
    cells: usize,
}

impl AgeGrid {
    pub fn new(lifespan: f64, cells: usize) -> Self {
        assert!(lifespan > 0.0, "lifespan must be positive");
        assert!(cells >= 2, "need at least two age cells");
        AgeGrid { lifespan, cells }
    }

    pub fn lifespan(&self) -> f64 {
        self.lifespan
    }

    pub fn cells(&self) -> usize {
        self.cells
    }

    /// Number of nodes, `cells + 1`.
    pub fn len(&self) -> usize {
        self.cells + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn delta(&self) -> f64 {
        self.lifespan / self.cells as f64
    }

    pub fn node(&self, i: usize) -> f64 {
        debug_assert!(i <= self.cells);
        self.lifespan * i as f64 / self.cells as f64
    }

    pub fn nodes(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.len()).map(move |i| self.node(i))
    }

    /// Trapezoid weight of node `i` on the full interval.
    pub fn weight(&self, i: usize) -> f64 {
        if i == 0 || i == self.cells {
            0.5 * self.delta()
        } else {
            self.delta()
        }
    }

    /// Composite trapezoid of nodal samples over `[0, A]`.
    pub fn trapezoid(&self, values: &[f64]) -> f64 {
        assert_eq!(values.len(), self.len(), "sample count must match grid");
        values
            .iter()
            .enumerate()
            .map(|(i, v)| self.weight(i) * v)
            .sum()
    }

    /// Trapezoid of `f` sampled on the nodes.
    pub fn integrate(&self, f: impl Fn(f64) -> f64) -> f64 {
        (0..self.len())
            .map(|i| self.weight(i) * f(self.node(i)))
            .sum()
    }

    /// Discrete `L²(0, A)` inner product (trapezoid-weighted).
    pub fn inner(&self, u: &[f64], v: &[f64]) -> f64 {
        assert_eq!(u.len(), self.len());
        assert_eq!(v.len(), self.len());
        (0..self.len()).map(|i| self.weight(i) * u[i] * v[i]).sum()
    }

    /// Discrete `L²(0, A)` norm (trapezoid-weighted).
    pub fn norm(&self, u: &[f64]) -> f64 {
        self.inner(u, u).sqrt()
    }

    /// Largest node index with `node(i) <= a` (clamped to the last node).
    pub fn floor_index(&self, a: f64) -> usize {
        let idx = (a / self.delta()).floor() as isize;
        idx.clamp(0, self.cells as isize) as usize
    }
}

/// Trapezoid integral over `[0, T]` for samples at uniform spacing `dt`.
pub fn trapezoid_uniform(values: &[f64], dt: f64) -> f64 {
    if values.len() < 2 {
        return 0.0;
    }
    let interior: f64 = values[1..values.len() - 1].iter().sum();
    dt * (0.5 * values[0] + interior + 0.5 * values[values.len() - 1])
}

/// `L²(0, T)` norm of a uniformly sampled series (trapezoid in time).
pub fn l2_norm_uniform(values: &[f64], dt: f64) -> f64 {
    let squares: Vec<f64> = values.iter().map(|v| v * v).collect();
    trapezoid_uniform(&squares, dt).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn node_placement_and_delta() {
        let g = AgeGrid::new(1.0, 4);
        assert_eq!(g.len(), 5);
        assert_relative_eq!(g.delta(), 0.25);
        assert_relative_eq!(g.node(0), 0.0);
        assert_relative_eq!(g.node(4), 1.0);
    }

    #[test]
    fn trapezoid_is_exact_for_linear_functions() {
        let g = AgeGrid::new(2.0, 7);
        let integral = g.integrate(|a| 3.0 * a + 1.0);
        assert_relative_eq!(integral, 3.0 * 2.0 * 2.0 / 2.0 + 2.0, epsilon = 1e-12);
    }

    #[test]
    fn trapezoid_quadratic_error_scales_second_order() {
        let coarse = AgeGrid::new(1.0, 50).integrate(|a| a * a * a) - 0.25;
        let fine = AgeGrid::new(1.0, 100).integrate(|a| a * a * a) - 0.25;
        assert!(coarse.abs() / fine.abs() > 3.5);
    }

    #[test]
    fn uniform_series_trapezoid() {
        let values = [0.0, 1.0, 2.0, 3.0];
        assert_relative_eq!(trapezoid_uniform(&values, 0.5), 2.25);
    }

    #[test]
    fn floor_index_clamps() {
        let g = AgeGrid::new(1.0, 10);
        assert_eq!(g.floor_index(-0.2), 0);
        assert_eq!(g.floor_index(0.35), 3);
        assert_eq!(g.floor_index(2.0), 10);
    }
}
