use serde::{Deserialize, Serialize};

/// Numerical knobs shared by every stage.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NumericParams {
    /// Largest grid on the circle (power of two).
    pub grid_cap: usize,
    /// Per-coefficient trimming threshold for rational tails, relative to
    /// `max(1, largest coefficient norm)`.
    pub tail_tol: f64,
    /// Largest finite section (in block rows) tried by the block factorization.
    pub section_cap: usize,
    /// Largest operator truncation tried by the Fredholm determinant.
    pub truncation_cap: usize,
    /// Convergence tolerance for residuals and stabilization checks.
    pub tol: f64,
    /// Zeros with larger modulus are rejected wherever Fourier data of `u` is needed.
    pub desk_radius: f64,
    /// Relative floor for |det a(t)| on the grid.
    pub det_floor: f64,
    /// Agreement required between successive quadrature grids.
    pub quad_tol: f64,
    /// Largest tolerated disagreement between two routes to the same quantity.
    pub route_tol: f64,
}

impl Default for NumericParams {
    fn default() -> Self {
        NumericParams {
            grid_cap: 1 << 20,
            tail_tol: 1e-14,
            section_cap: 1 << 14,
            truncation_cap: 1 << 12,
            tol: 1e-10,
            desk_radius: 0.999,
            det_floor: 1e-10,
            quad_tol: 1e-13,
            route_tol: 1e-8,
        }
    }
}

impl NumericParams {
    pub fn with_tol(mut self, tol: f64) -> Self {
        self.tol = tol;
        self
    }
}

/// Smallest power of two that is `>= n` (and at least 2).
pub(crate) fn next_pow2(n: usize) -> usize {
    n.max(2).next_power_of_two()
}
