//! Scalar fields on the upper half-plane and the quadrature hooks the
//! functionals need from them.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::mesh::Mesh;
use crate::params::Parameters;
use crate::quadrature::{power_integral, GaussLegendre, HalfCircleRule};
use crate::solver::SolveReport;

/// Resolution knobs for the radial functionals.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct QuadratureOptions {
    /// Midpoint panels on the half circle.
    pub theta_panels: usize,
    /// Composite Gauss-Legendre panels in the radial (or trace) direction.
    pub radial_panels: usize,
    /// Gauss-Legendre order per panel.
    pub gauss_order: usize,
    /// Sub-rows per half cell when clipping mesh cells to a half disk.
    pub clip_subrows: usize,
}

impl Default for QuadratureOptions {
    fn default() -> Self {
        QuadratureOptions {
            theta_panels: 256,
            radial_panels: 8,
            gauss_order: 8,
            clip_subrows: 16,
        }
    }
}

/// A field `u(x, y)` on `y >= 0` that the functionals can be evaluated on.
pub trait FieldSource: Sync {
    fn value(&self, x: f64, y: f64) -> f64;

    fn gradient(&self, x: f64, y: f64) -> [f64; 2];

    /// Exponent `a` of the weight `y^a` the field is meant for.
    fn weight_exponent(&self) -> f64;

    /// Largest radius admissible about `(x0, 0)`, if the field has a finite domain.
    fn max_radius(&self, _x0: f64) -> Option<f64> {
        None
    }

    /// Characteristic discretization length near the trace, if any.
    fn mesh_scale(&self) -> Option<f64> {
        None
    }

    /// `∫_{B_r^+(x0)} y^a |∇u|^2`.
    fn bulk_energy(&self, x0: f64, r: f64, rule: &HalfCircleRule, quad: &QuadratureOptions) -> f64 {
        polar_bulk_energy(self, x0, r, rule, quad)
    }

    /// `∫_{x0-r}^{x0+r} g(u(x, 0)) dx`.
    fn trace_integral(&self, x0: f64, r: f64, g: &dyn Fn(f64) -> f64, quad: &QuadratureOptions) -> f64 {
        // x = x0 ± r t² clusters nodes at the centre, where nodal points sit.
        let gl = GaussLegendre::new(quad.gauss_order);
        let panels = quad.radial_panels.max(1);
        let mut total = 0.0;
        for side in [-1.0, 1.0] {
            for p in 0..panels {
                let lo = p as f64 / panels as f64;
                let hi = (p + 1) as f64 / panels as f64;
                total += gl.integrate(lo, hi, |t| {
                    let x = x0 + side * r * t * t;
                    g(self.value(x, 0.0)) * 2.0 * r * t
                });
            }
        }
        total
    }
}

/// Bulk weighted energy by polar quadrature: `ρ = r t²` in the radius and the
/// product midpoint rule in the angle.
pub fn polar_bulk_energy<F: FieldSource + ?Sized>(
    f: &F,
    x0: f64,
    r: f64,
    rule: &HalfCircleRule,
    quad: &QuadratureOptions,
) -> f64 {
    let gl = GaussLegendre::new(quad.gauss_order);
    let panels = quad.radial_panels.max(1);
    let a = f.weight_exponent();
    let mut total = 0.0;
    for p in 0..panels {
        let lo = p as f64 / panels as f64;
        let hi = (p + 1) as f64 / panels as f64;
        total += gl.integrate(lo, hi, |t| {
            let rho = r * t * t;
            if rho == 0.0 {
                return 0.0;
            }
            let angular: f64 = rule
                .theta
                .iter()
                .zip(&rule.weighted)
                .map(|(&th, &w)| {
                    let [gx, gy] = f.gradient(x0 + rho * th.cos(), rho * th.sin());
                    w * (gx * gx + gy * gy)
                })
                .sum();
            rho.powf(1.0 + a) * angular * 2.0 * r * t
        });
    }
    total
}

/// Nodal values on a [`Mesh`] with a bilinear evaluator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Field {
    mesh: Arc<Mesh>,
    values: Vec<f64>,
    params: Option<Parameters>,
    /// Width of the `q = 1` smoothing used by the solve, if any.
    epsilon: Option<f64>,
    report: Option<SolveReport>,
}

impl Field {
    pub fn new(mesh: Arc<Mesh>, values: Vec<f64>) -> Self {
        assert_eq!(values.len(), mesh.node_count(), "value count does not match mesh");
        Field {
            mesh,
            values,
            params: None,
            epsilon: None,
            report: None,
        }
    }

    /// Samples `f` at every node.
    pub fn sample(mesh: Arc<Mesh>, f: &(impl FieldSource + ?Sized)) -> Self {
        let mut values = Vec::with_capacity(mesh.node_count());
        for &y in &mesh.y {
            for &x in &mesh.x {
                values.push(f.value(x, y));
            }
        }
        Field::new(mesh, values)
    }

    pub fn with_params(mut self, p: Parameters) -> Self {
        self.params = Some(p);
        self
    }

    pub(crate) fn with_solve_metadata(mut self, epsilon: Option<f64>, report: SolveReport) -> Self {
        self.epsilon = epsilon;
        self.report = Some(report);
        self
    }

    pub fn mesh(&self) -> &Mesh {
        &self.mesh
    }

    pub fn mesh_arc(&self) -> Arc<Mesh> {
        Arc::clone(&self.mesh)
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn params(&self) -> Option<&Parameters> {
        self.params.as_ref()
    }

    pub fn epsilon(&self) -> Option<f64> {
        self.epsilon
    }

    pub fn report(&self) -> Option<&SolveReport> {
        self.report.as_ref()
    }

    #[inline]
    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.values[self.mesh.index(i, j)]
    }

    /// Trace values `u(x_i, 0)`.
    pub fn trace(&self) -> &[f64] {
        &self.values[..self.mesh.x.len()]
    }

    /// Weighted L² norm `(∫ y^a u² )^½` by nodal quadrature.
    pub fn weighted_l2(&self) -> f64 {
        self.weighted_l2_against(|_, _| 0.0)
    }

    /// Weighted L² distance to an analytic function.
    pub fn weighted_l2_against(&self, exact: impl Fn(f64, f64) -> f64) -> f64 {
        let m = &*self.mesh;
        let mut acc = 0.0;
        for (j, &y) in m.y.iter().enumerate() {
            for (i, &x) in m.x.iter().enumerate() {
                let d = self.at(i, j) - exact(x, y);
                acc += m.node_weight(i, j) * d * d;
            }
        }
        acc.sqrt()
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    fn cell_coords(&self, x: f64, y: f64) -> (usize, usize, f64, f64) {
        let m = &*self.mesh;
        let i = Mesh::locate(&m.x, x);
        let j = Mesh::locate(&m.y, y);
        let xi = (x - m.x[i]) / (m.x[i + 1] - m.x[i]);
        let eta = (y - m.y[j]) / (m.y[j + 1] - m.y[j]);
        (i, j, xi, eta)
    }

    /// Per-cell energy of the finite-volume scheme restricted to `B_r^+(x0)`.
    ///
    /// Each primal cell carries half of the two vertical edges on its sides and
    /// half of the horizontal edges' row weights. Cells cut by the circle are
    /// weighted by their covered fraction, computed on sub-rows with the
    /// density profile of each part (`y^-a` for vertical fluxes, `y^a` for
    /// horizontal ones).
    fn clipped_energy(&self, x0: f64, r: f64, subrows: usize) -> f64 {
        let m = &*self.mesh;
        let a = m.a;
        let r2 = r * r;
        let i_lo = Mesh::locate(&m.x, x0 - r);
        let i_hi = Mesh::locate(&m.x, x0 + r);
        let j_hi = Mesh::locate(&m.y, r);
        let mut total = 0.0;
        for j in 0..=j_hi {
            let (y0, y1) = (m.y[j], m.y[j + 1]);
            let ymid = 0.5 * (y0 + y1);
            let res = m.edge_resistance[j];
            for i in i_lo..=i_hi {
                let (xa, xb) = (m.x[i], m.x[i + 1]);
                let xm = 0.5 * (xa + xb);
                let dx = xb - xa;
                // nearest and farthest points of the cell from the centre
                let nx = (x0.clamp(xa, xb) - x0).abs();
                let ny = y0;
                if nx * nx + ny * ny >= r2 {
                    continue;
                }
                let fx = (xa - x0).abs().max((xb - x0).abs());
                let inside = fx * fx + y1 * y1 <= r2;

                let dv_l = self.at(i, j + 1) - self.at(i, j);
                let dv_r = self.at(i + 1, j + 1) - self.at(i + 1, j);
                let dh_b = self.at(i + 1, j) - self.at(i, j);
                let dh_t = self.at(i + 1, j + 1) - self.at(i, j + 1);
                let wb = power_integral(a, y0, ymid);
                let wt = power_integral(a, ymid, y1);

                if inside {
                    total += 0.5 * dx * (dv_l * dv_l + dv_r * dv_r) / res + (dh_b * dh_b * wb + dh_t * dh_t * wt) / dx;
                    continue;
                }

                let n = subrows.max(1);
                for half in 0..2 {
                    let (ya, yb, dh) = if half == 0 { (y0, ymid, dh_b) } else { (ymid, y1, dh_t) };
                    for k in 0..n {
                        let sa = ya + (yb - ya) * k as f64 / n as f64;
                        let sb = ya + (yb - ya) * (k + 1) as f64 / n as f64;
                        let sy = 0.5 * (sa + sb);
                        if sy >= r {
                            break;
                        }
                        let c = (r2 - sy * sy).sqrt();
                        let overlap = |lo: f64, hi: f64| (hi.min(x0 + c) - lo.max(x0 - c)).max(0.0);
                        let o_l = overlap(xa, xm);
                        let o_r = overlap(xm, xb);
                        let wneg = power_integral(-a, sa, sb);
                        let wpos = power_integral(a, sa, sb);
                        total += (dv_l * dv_l * o_l + dv_r * dv_r * o_r) * wneg / (res * res)
                            + dh * dh / (dx * dx) * wpos * (o_l + o_r);
                    }
                }
            }
        }
        total
    }

    /// Linear trace on a segment, integrated with zero crossings split out.
    fn trace_segment_integral(
        &self,
        xa: f64,
        xb: f64,
        ua: f64,
        ub: f64,
        lo: f64,
        hi: f64,
        g: &dyn Fn(f64) -> f64,
        gl: &GaussLegendre,
    ) -> f64 {
        let lo = lo.max(xa);
        let hi = hi.min(xb);
        if hi <= lo {
            return 0.0;
        }
        let u = |x: f64| ua + (ub - ua) * (x - xa) / (xb - xa);
        let mut cuts = vec![lo];
        if ua * ub < 0.0 {
            let root = xa + ua / (ua - ub) * (xb - xa);
            if root > lo && root < hi {
                cuts.push(root);
            }
        }
        cuts.push(hi);
        cuts.windows(2).map(|w| gl.integrate(w[0], w[1], |x| g(u(x)))).sum()
    }
}

impl FieldSource for Field {
    fn value(&self, x: f64, y: f64) -> f64 {
        let (i, j, xi, eta) = self.cell_coords(x, y);
        let v00 = self.at(i, j);
        let v10 = self.at(i + 1, j);
        let v01 = self.at(i, j + 1);
        let v11 = self.at(i + 1, j + 1);
        (1.0 - eta) * ((1.0 - xi) * v00 + xi * v10) + eta * ((1.0 - xi) * v01 + xi * v11)
    }

    fn gradient(&self, x: f64, y: f64) -> [f64; 2] {
        let m = &*self.mesh;
        let (i, j, xi, eta) = self.cell_coords(x, y);
        let dx = m.x[i + 1] - m.x[i];
        let dy = m.y[j + 1] - m.y[j];
        let v00 = self.at(i, j);
        let v10 = self.at(i + 1, j);
        let v01 = self.at(i, j + 1);
        let v11 = self.at(i + 1, j + 1);
        let gx = ((1.0 - eta) * (v10 - v00) + eta * (v11 - v01)) / dx;
        let gy = ((1.0 - xi) * (v01 - v00) + xi * (v11 - v10)) / dy;
        [gx, gy]
    }

    fn weight_exponent(&self) -> f64 {
        self.mesh.a
    }

    fn max_radius(&self, x0: f64) -> Option<f64> {
        let m = &*self.mesh;
        let top_cell = m.y[m.my()] - m.y[m.my() - 1];
        let margin = m.dx().max(top_cell);
        let dist = (x0 - m.x[0]).min(m.x[m.nx()] - x0).min(m.height);
        Some(dist - margin)
    }

    fn mesh_scale(&self) -> Option<f64> {
        Some(self.mesh.dx())
    }

    fn bulk_energy(&self, x0: f64, r: f64, _rule: &HalfCircleRule, quad: &QuadratureOptions) -> f64 {
        self.clipped_energy(x0, r, quad.clip_subrows)
    }

    fn trace_integral(&self, x0: f64, r: f64, g: &dyn Fn(f64) -> f64, quad: &QuadratureOptions) -> f64 {
        let m = &*self.mesh;
        let gl = GaussLegendre::new(quad.gauss_order.clamp(2, 6));
        let (lo, hi) = (x0 - r, x0 + r);
        let i_lo = Mesh::locate(&m.x, lo);
        let i_hi = Mesh::locate(&m.x, hi);
        (i_lo..=i_hi)
            .map(|i| self.trace_segment_integral(m.x[i], m.x[i + 1], self.at(i, 0), self.at(i + 1, 0), lo, hi, g, &gl))
            .sum()
    }
}

/// An analytic field given by closures for value and gradient.
pub struct AnalyticField<V, G> {
    pub a: f64,
    pub value: V,
    pub gradient: G,
}

impl<V, G> AnalyticField<V, G>
where
    V: Fn(f64, f64) -> f64 + Sync,
    G: Fn(f64, f64) -> [f64; 2] + Sync,
{
    pub fn new(a: f64, value: V, gradient: G) -> Self {
        AnalyticField { a, value, gradient }
    }
}

impl<V, G> FieldSource for AnalyticField<V, G>
where
    V: Fn(f64, f64) -> f64 + Sync,
    G: Fn(f64, f64) -> [f64; 2] + Sync,
{
    fn value(&self, x: f64, y: f64) -> f64 {
        (self.value)(x, y)
    }

    fn gradient(&self, x: f64, y: f64) -> [f64; 2] {
        (self.gradient)(x, y)
    }

    fn weight_exponent(&self) -> f64 {
        self.a
    }
}

/// `Σ c_i f_i` over sources sharing one weight exponent.
pub struct Combination<'a> {
    terms: Vec<(f64, &'a dyn FieldSource)>,
}

impl<'a> Combination<'a> {
    pub fn new(terms: Vec<(f64, &'a dyn FieldSource)>) -> Self {
        assert!(!terms.is_empty());
        Combination { terms }
    }
}

impl FieldSource for Combination<'_> {
    fn value(&self, x: f64, y: f64) -> f64 {
        self.terms.iter().map(|(c, f)| c * f.value(x, y)).sum()
    }

    fn gradient(&self, x: f64, y: f64) -> [f64; 2] {
        self.terms.iter().fold([0.0, 0.0], |acc, (c, f)| {
            let g = f.gradient(x, y);
            [acc[0] + c * g[0], acc[1] + c * g[1]]
        })
    }

    fn weight_exponent(&self) -> f64 {
        self.terms[0].1.weight_exponent()
    }

    fn max_radius(&self, x0: f64) -> Option<f64> {
        self.terms.iter().filter_map(|(_, f)| f.max_radius(x0)).reduce(f64::min)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn mesh(a: f64, n: usize) -> Arc<Mesh> {
        Arc::new(Mesh::with_default_grading(1.0, 1.0, n, n, a).unwrap())
    }

    #[test]
    fn evaluator_reproduces_nodes() {
        let m = mesh(0.5, 16);
        let f = Field::sample(
            m.clone(),
            &AnalyticField::new(0.5, |x: f64, y: f64| x.sin() + y * y, |_, _| [0.0, 0.0]),
        );
        for j in [0, 3, 16] {
            for i in [0, 5, 16] {
                assert_eq!(f.value(m.x[i], m.y[j]), f.at(i, j));
            }
        }
    }

    #[test]
    fn bilinear_is_exact_on_bilinear_data() {
        let m = mesh(0.0, 16);
        let u = |x: f64, y: f64| 1.0 + 2.0 * x - 3.0 * y + 0.5 * x * y;
        let f = Field::sample(m, &AnalyticField::new(0.0, u, |_, _| [0.0, 0.0]));
        for &(x, y) in &[(0.13, 0.41), (-0.77, 0.05), (0.9, 0.93)] {
            assert!((f.value(x, y) - u(x, y)).abs() < 1e-13);
            let g = f.gradient(x, y);
            assert!((g[0] - (2.0 + 0.5 * y)).abs() < 1e-12);
            assert!((g[1] - (-3.0 + 0.5 * x)).abs() < 1e-12);
        }
    }

    #[test]
    fn clipped_energy_of_linear_field() {
        // |∇x|² = 1 on the half disk of radius 0.5: π r² / 2.
        let m = mesh(0.0, 64);
        let f = Field::sample(m, &AnalyticField::new(0.0, |x, _| x, |_, _| [1.0, 0.0]));
        let rule = HalfCircleRule::new(0.0, 64);
        let e = f.bulk_energy(0.0, 0.5, &rule, &QuadratureOptions::default());
        assert!((e - PI * 0.125).abs() < 2e-4, "{e}");
    }

    #[test]
    fn polar_energy_of_linear_field() {
        let u = AnalyticField::new(0.0, |x, _| x, |_, _| [1.0, 0.0]);
        let rule = HalfCircleRule::new(0.0, 256);
        let e = u.bulk_energy(0.0, 1.0, &rule, &QuadratureOptions::default());
        assert!((e - PI / 2.0).abs() < 1e-12);
    }

    #[test]
    fn trace_integral_splits_at_zero() {
        let m = mesh(0.0, 16);
        let f = Field::sample(m, &AnalyticField::new(0.0, |x, _| x - 0.03, |_, _| [1.0, 0.0]));
        let q = QuadratureOptions::default();
        let v = f.trace_integral(0.0, 0.5, &|t| t.abs(), &q);
        let exact = (0.53f64.powi(2) + 0.47f64.powi(2)) / 2.0;
        assert!((v - exact).abs() < 1e-13);
    }
}
