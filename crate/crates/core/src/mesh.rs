//! Graded tensor meshes on the half-rectangle `[-L, L] x [0, Y]`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quadrature::power_integral;

/// Ordinates `Y (j/M)^gamma`, `j = 0..=M`.
pub fn graded_nodes(height: f64, cells: usize, gamma: f64) -> Vec<f64> {
    (0..=cells)
        .map(|j| {
            if j == cells {
                height
            } else {
                height * (j as f64 / cells as f64).powf(gamma)
            }
        })
        .collect()
}

/// Default vertical grading: `2 / (1 - a)` for `a >= 0`, uniform otherwise.
pub fn default_grading(a: f64) -> f64 {
    if a >= 0.0 {
        2.0 / (1.0 - a)
    } else {
        1.0
    }
}

/// Tensor mesh with the weight integrals the finite-volume scheme needs.
///
/// Dual cells have their faces at edge midpoints; the bottom row's dual cell
/// starts at `y = 0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mesh {
    pub half_width: f64,
    pub height: f64,
    pub gamma: f64,
    pub a: f64,
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    /// Width of the dual cell around each abscissa.
    pub dual_dx: Vec<f64>,
    /// `∫ y^a dy` over the dual cell of each row (weights x-fluxes).
    pub row_weight: Vec<f64>,
    /// `∫ y^-a dy` over each vertical edge `[y_j, y_(j+1)]`.
    pub edge_resistance: Vec<f64>,
}

impl Mesh {
    /// Builds a mesh with `nx` cells across `[-L, L]` and `my` graded cells on `[0, Y]`.
    pub fn new(half_width: f64, height: f64, nx: usize, my: usize, gamma: f64, a: f64) -> Result<Self> {
        if !(half_width > 0.0 && half_width.is_finite()) || !(height > 0.0 && height.is_finite()) {
            return Err(Error::InvalidMesh(format!(
                "extent must be positive, got L = {half_width}, Y = {height}"
            )));
        }
        if nx < 8 || my < 8 {
            return Err(Error::InvalidMesh(format!(
                "need at least 8 cells per direction, got {nx} x {my}"
            )));
        }
        if !(gamma >= 1.0 && gamma.is_finite()) {
            return Err(Error::InvalidMesh(format!("grading exponent {gamma} must be >= 1")));
        }
        if !(a > -1.0 && a < 1.0) {
            return Err(Error::InvalidParameter {
                name: "a",
                value: a,
                reason: "weight exponent must lie in (-1, 1)",
            });
        }
        let x: Vec<f64> = (0..=nx)
            .map(|i| -half_width + 2.0 * half_width * i as f64 / nx as f64)
            .collect();
        let y = graded_nodes(height, my, gamma);
        if y.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidMesh(
                "grading collapses adjacent ordinates; reduce gamma or my".into(),
            ));
        }

        let dual_dx = (0..=nx)
            .map(|i| {
                let lo = if i == 0 { x[0] } else { 0.5 * (x[i - 1] + x[i]) };
                let hi = if i == nx { x[nx] } else { 0.5 * (x[i] + x[i + 1]) };
                hi - lo
            })
            .collect();
        let row_weight = (0..=my)
            .map(|j| {
                let lo = if j == 0 { 0.0 } else { 0.5 * (y[j - 1] + y[j]) };
                let hi = if j == my { y[my] } else { 0.5 * (y[j] + y[j + 1]) };
                power_integral(a, lo, hi)
            })
            .collect();
        let edge_resistance = y.windows(2).map(|w| power_integral(-a, w[0], w[1])).collect();

        Ok(Mesh {
            half_width,
            height,
            gamma,
            a,
            x,
            y,
            dual_dx,
            row_weight,
            edge_resistance,
        })
    }

    /// Mesh with the default grading for the given weight exponent.
    pub fn with_default_grading(half_width: f64, height: f64, nx: usize, my: usize, a: f64) -> Result<Self> {
        Self::new(half_width, height, nx, my, default_grading(a), a)
    }

    pub fn nx(&self) -> usize {
        self.x.len() - 1
    }

    pub fn my(&self) -> usize {
        self.y.len() - 1
    }

    pub fn node_count(&self) -> usize {
        self.x.len() * self.y.len()
    }

    #[inline]
    pub fn index(&self, i: usize, j: usize) -> usize {
        j * self.x.len() + i
    }

    pub fn dx(&self) -> f64 {
        self.x[1] - self.x[0]
    }

    /// Dirichlet nodes: the sides `x = ±L` and the top `y = Y`.
    #[inline]
    pub fn is_dirichlet(&self, i: usize, j: usize) -> bool {
        i == 0 || i == self.nx() || j == self.my()
    }

    /// Index of the cell containing `v` in the sorted array `nodes` (clamped).
    pub(crate) fn locate(nodes: &[f64], v: f64) -> usize {
        let last = nodes.len() - 2;
        match nodes.binary_search_by(|n| n.partial_cmp(&v).unwrap()) {
            Ok(k) => k.min(last),
            Err(0) => 0,
            Err(k) => (k - 1).min(last),
        }
    }

    pub fn contains(&self, x: f64, y: f64) -> bool {
        x >= self.x[0] && x <= self.x[self.nx()] && y >= 0.0 && y <= self.height
    }

    /// Per-row quadrature weights `Δx_i ∫ y^a dy` for weighted L² norms.
    pub fn node_weight(&self, i: usize, j: usize) -> f64 {
        self.dual_dx[i] * self.row_weight[j]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quadrature::GaussLegendre;

    #[test]
    fn quadratic_grading() {
        let y = graded_nodes(1.0, 4, 2.0);
        assert_eq!(y, vec![0.0, 1.0 / 16.0, 0.25, 9.0 / 16.0, 1.0]);
    }

    #[test]
    fn unweighted_uniform_mesh() {
        let m = Mesh::new(1.0, 1.0, 16, 16, 1.0, 0.0).unwrap();
        assert_eq!(m.y[0], 0.0);
        let first = m.edge_resistance[0];
        assert!(m.edge_resistance.iter().all(|r| (r - first).abs() < 1e-15));
        assert!((first - 1.0 / 16.0).abs() < 1e-15);
    }

    #[test]
    fn first_cell_resistance_matches_quadrature() {
        let m = Mesh::new(1.0, 1.0, 8, 8, 1.0, 0.5).unwrap();
        let y1 = m.y[1];
        assert!((m.edge_resistance[0] - 2.0 * y1.sqrt()).abs() < 1e-15);
        // Independent check: Gauss-Legendre after u = sqrt(y) removes the singularity.
        let gl = GaussLegendre::new(10);
        let q = gl.integrate(0.0, y1.sqrt(), |u| 2.0 * u / u);
        assert!((m.edge_resistance[0] - q).abs() < 1e-14);
    }

    #[test]
    fn weights_positive_and_finite() {
        for &a in &[-0.9, -0.5, 0.0, 0.5, 0.9] {
            let m = Mesh::with_default_grading(1.0, 1.0, 16, 16, a).unwrap();
            assert!(m.edge_resistance.iter().all(|r| *r > 0.0 && r.is_finite()));
            assert!(m.row_weight.iter().all(|r| *r > 0.0 && r.is_finite()));
            assert!(m.x.windows(2).all(|w| w[1] > w[0]));
            assert!(m.y.windows(2).all(|w| w[1] > w[0]));
        }
    }

    #[test]
    fn rejects_bad_input() {
        assert!(Mesh::new(1.0, 1.0, 16, 16, 1.0, 1.0).is_err());
        assert!(Mesh::new(1.0, 1.0, 4, 16, 1.0, 0.0).is_err());
        assert!(Mesh::new(1.0, 1.0, 16, 16, 0.5, 0.0).is_err());
        assert!(Mesh::new(-1.0, 1.0, 16, 16, 1.0, 0.0).is_err());
    }

    #[test]
    fn locate_clamps() {
        let nodes = [0.0, 1.0, 2.0, 3.0];
        assert_eq!(Mesh::locate(&nodes, -1.0), 0);
        assert_eq!(Mesh::locate(&nodes, 0.5), 0);
        assert_eq!(Mesh::locate(&nodes, 1.0), 1);
        assert_eq!(Mesh::locate(&nodes, 3.0), 2);
        assert_eq!(Mesh::locate(&nodes, 9.0), 2);
    }
}
