//! Finite-volume solver for `div(y^a ∇u) = 0` with Dirichlet data on the
//! sides and top and the weighted Neumann condition `-y^a ∂_y u = g` on the
//! trace `y = 0`.
//!
//! Vertical fluxes use the exact integral of `y^-a` across each edge, which
//! makes the scheme exact on `c1 + c2 x + c3 y^(1-a)`. Horizontal fluxes are
//! weighted by `∫ y^a` over the dual row.

use std::sync::{Arc, OnceLock};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{Field, FieldSource};
use crate::mesh::Mesh;
use crate::params::Parameters;

/// Assembled conductances of the weighted five-point operator.
#[derive(Debug, Clone)]
pub struct WeightedSystem {
    mesh: Arc<Mesh>,
    /// Horizontal edge `(i, j) - (i+1, j)`, indexed `j * nx + i`.
    cx: Vec<f64>,
    /// Vertical edge `(i, j) - (i, j+1)`, indexed `j * (nx+1) + i`.
    cy: Vec<f64>,
    diag: Vec<f64>,
    factor: OnceLock<BandCholesky>,
}

/// How the reduced linear system is solved.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LinearMethod {
    /// Banded Cholesky when the band fits in memory, else conjugate gradients.
    Auto,
    Cholesky,
    ConjugateGradient,
}

/// Largest band (in stored entries) the automatic choice will factor.
const AUTO_BAND_LIMIT: usize = 20_000_000;

/// Linear solver controls. `tol` and `max_iter` apply to conjugate gradients.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LinearOptions {
    pub method: LinearMethod,
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for LinearOptions {
    fn default() -> Self {
        LinearOptions {
            method: LinearMethod::Auto,
            tol: 1e-10,
            max_iter: 100_000,
        }
    }
}

/// Cholesky factor of the free-node block, stored by rows of the lower band.
/// Row `i` holds columns `i - bw ..= i` at offsets `0 ..= bw`.
#[derive(Debug, Clone)]
struct BandCholesky {
    n: usize,
    bw: usize,
    band: Vec<f64>,
}

impl BandCholesky {
    fn factor(n: usize, bw: usize, mut band: Vec<f64>) -> Result<Self> {
        let w = bw + 1;
        for i in 0..n {
            let lo = i.saturating_sub(bw);
            for j in lo..=i {
                // Columns shared by rows i and j within both bands.
                let m0 = lo.max(j.saturating_sub(bw));
                let ri = &band[i * w + (m0 + bw - i)..i * w + (j + bw - i)];
                let rj = &band[j * w + (m0 + bw - j)..j * w + bw];
                let dot: f64 = ri.iter().zip(rj).map(|(a, b)| a * b).sum();
                let v = band[i * w + (j + bw - i)] - dot;
                band[i * w + (j + bw - i)] = if i == j {
                    if v <= 0.0 {
                        return Err(Error::LinearSolve {
                            iterations: i,
                            residual: v,
                            tol: 0.0,
                        });
                    }
                    v.sqrt()
                } else {
                    v / band[j * w + bw]
                };
            }
        }
        Ok(BandCholesky { n, bw, band })
    }

    fn solve(&self, x: &mut [f64]) {
        let (n, bw, w) = (self.n, self.bw, self.bw + 1);
        for i in 0..n {
            let lo = i.saturating_sub(bw);
            let row = &self.band[i * w..(i + 1) * w];
            let dot: f64 = (lo..i).map(|m| row[m + bw - i] * x[m]).sum();
            x[i] = (x[i] - dot) / row[bw];
        }
        for i in (0..n).rev() {
            x[i] /= self.band[i * w + bw];
            let xi = x[i];
            let lo = i.saturating_sub(bw);
            for m in lo..i {
                x[m] -= self.band[i * w + (m + bw - i)] * xi;
            }
        }
    }
}

/// Values on the Dirichlet part of the boundary (sides and top).
#[derive(Debug, Clone, PartialEq)]
pub struct DirichletData {
    values: Vec<f64>,
}

impl DirichletData {
    pub fn from_fn(mesh: &Mesh, f: impl Fn(f64, f64) -> f64) -> Self {
        let mut values = vec![0.0; mesh.node_count()];
        for j in 0..=mesh.my() {
            for i in 0..=mesh.nx() {
                if mesh.is_dirichlet(i, j) {
                    values[mesh.index(i, j)] = f(mesh.x[i], mesh.y[j]);
                }
            }
        }
        DirichletData { values }
    }

    pub fn from_source(mesh: &Mesh, f: &(impl FieldSource + ?Sized)) -> Self {
        Self::from_fn(mesh, |x, y| f.value(x, y))
    }

    pub fn constant(mesh: &Mesh, c: f64) -> Self {
        Self::from_fn(mesh, |_, _| c)
    }

    pub fn scaled(&self, c: f64) -> Self {
        DirichletData {
            values: self.values.iter().map(|v| c * v).collect(),
        }
    }

    pub fn min_max(&self, mesh: &Mesh) -> (f64, f64) {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for j in 0..=mesh.my() {
            for i in 0..=mesh.nx() {
                if mesh.is_dirichlet(i, j) {
                    let v = self.values[mesh.index(i, j)];
                    lo = lo.min(v);
                    hi = hi.max(v);
                }
            }
        }
        (lo, hi)
    }
}

impl WeightedSystem {
    pub fn assemble(mesh: Arc<Mesh>) -> Self {
        let (nx, my) = (mesh.nx(), mesh.my());
        let mut cx = vec![0.0; nx * (my + 1)];
        let mut cy = vec![0.0; (nx + 1) * my];
        for j in 0..=my {
            for i in 0..nx {
                cx[j * nx + i] = mesh.row_weight[j] / (mesh.x[i + 1] - mesh.x[i]);
            }
        }
        for j in 0..my {
            for i in 0..=nx {
                cy[j * (nx + 1) + i] = mesh.dual_dx[i] / mesh.edge_resistance[j];
            }
        }
        let mut diag = vec![0.0; mesh.node_count()];
        for j in 0..=my {
            for i in 0..=nx {
                let mut d = 0.0;
                if i > 0 {
                    d += cx[j * nx + i - 1];
                }
                if i < nx {
                    d += cx[j * nx + i];
                }
                if j > 0 {
                    d += cy[(j - 1) * (nx + 1) + i];
                }
                if j < my {
                    d += cy[j * (nx + 1) + i];
                }
                diag[mesh.index(i, j)] = d;
            }
        }
        WeightedSystem {
            mesh,
            cx,
            cy,
            diag,
            factor: OnceLock::new(),
        }
    }

    /// Free nodes are `1 <= i < nx`, `0 <= j < my`, numbered row by row.
    fn free_index(&self, i: usize, j: usize) -> usize {
        j * (self.mesh.nx() - 1) + i - 1
    }

    fn band_size(&self) -> (usize, usize) {
        let m = &*self.mesh;
        let bw = m.nx() - 1;
        (bw * m.my(), bw)
    }

    fn cholesky(&self) -> Result<&BandCholesky> {
        if let Some(f) = self.factor.get() {
            return Ok(f);
        }
        let m = &*self.mesh;
        let (n, bw) = self.band_size();
        let w = bw + 1;
        let mut band = vec![0.0; n * w];
        for j in 0..m.my() {
            for i in 1..m.nx() {
                let r = self.free_index(i, j);
                let (d, [left, _, below, _]) = self.stencil(i, j);
                band[r * w + bw] = d;
                if i > 1 {
                    band[r * w + bw - 1] = -left;
                }
                if j > 0 {
                    band[r * w] = -below;
                }
            }
        }
        let f = BandCholesky::factor(n, bw, band)?;
        Ok(self.factor.get_or_init(|| f))
    }

    fn use_direct(&self, opts: &LinearOptions) -> bool {
        match opts.method {
            LinearMethod::Cholesky => true,
            LinearMethod::ConjugateGradient => false,
            LinearMethod::Auto => {
                let (n, bw) = self.band_size();
                n * (bw + 1) <= AUTO_BAND_LIMIT
            }
        }
    }

    pub fn mesh(&self) -> &Mesh {
        &self.mesh
    }

    pub fn mesh_arc(&self) -> Arc<Mesh> {
        Arc::clone(&self.mesh)
    }

    /// `(A u)_k = Σ_e c_e (u_k - u_neighbour)` at every node.
    pub fn apply(&self, u: &[f64], out: &mut [f64]) {
        let m = &*self.mesh;
        let (nx, my) = (m.nx(), m.my());
        let w = nx + 1;
        for j in 0..=my {
            for i in 0..=nx {
                let k = j * w + i;
                let uk = u[k];
                let mut acc = 0.0;
                if i > 0 {
                    acc += self.cx[j * nx + i - 1] * (uk - u[k - 1]);
                }
                if i < nx {
                    acc += self.cx[j * nx + i] * (uk - u[k + 1]);
                }
                if j > 0 {
                    acc += self.cy[(j - 1) * w + i] * (uk - u[k - w]);
                }
                if j < my {
                    acc += self.cy[j * w + i] * (uk - u[k + w]);
                }
                out[k] = acc;
            }
        }
    }

    /// Stencil coefficients at node `(i, j)`: diagonal and the neighbour
    /// conductances `[left, right, below, above]`.
    pub fn stencil(&self, i: usize, j: usize) -> (f64, [f64; 4]) {
        let m = &*self.mesh;
        let (nx, my) = (m.nx(), m.my());
        let w = nx + 1;
        let left = if i > 0 { self.cx[j * nx + i - 1] } else { 0.0 };
        let right = if i < nx { self.cx[j * nx + i] } else { 0.0 };
        let below = if j > 0 { self.cy[(j - 1) * w + i] } else { 0.0 };
        let above = if j < my { self.cy[j * w + i] } else { 0.0 };
        (self.diag[m.index(i, j)], [left, right, below, above])
    }

    fn free_mask(&self) -> Vec<bool> {
        let m = &*self.mesh;
        let mut mask = vec![false; m.node_count()];
        for j in 0..=m.my() {
            for i in 0..=m.nx() {
                mask[m.index(i, j)] = !m.is_dirichlet(i, j);
            }
        }
        mask
    }

    /// Solves with Dirichlet data and trace flux `g(x_i) = -∂^a_y u`.
    ///
    /// Returns the nodal values and the number of CG iterations (zero for the
    /// direct path, which ignores `warm`).
    pub fn solve_values(
        &self,
        dirichlet: &DirichletData,
        flux: &[f64],
        warm: Option<&[f64]>,
        opts: &LinearOptions,
    ) -> Result<(Vec<f64>, usize)> {
        let m = &*self.mesh;
        let n = m.node_count();
        assert_eq!(flux.len(), m.x.len(), "flux must be given at every trace node");
        let mask = self.free_mask();

        // Right-hand side: trace load minus the Dirichlet coupling.
        let mut ud = vec![0.0; n];
        for k in 0..n {
            if !mask[k] {
                ud[k] = dirichlet.values[k];
            }
        }
        let mut b = vec![0.0; n];
        self.apply(&ud, &mut b);
        for v in b.iter_mut() {
            *v = -*v;
        }
        for i in 0..=m.nx() {
            b[m.index(i, 0)] += flux[i] * m.dual_dx[i];
        }
        for k in 0..n {
            if !mask[k] {
                b[k] = 0.0;
            }
        }

        let mut x = vec![0.0; n];
        if self.use_direct(opts) {
            let chol = self.cholesky()?;
            let mut rhs = vec![0.0; chol.n];
            for j in 0..m.my() {
                for i in 1..m.nx() {
                    rhs[self.free_index(i, j)] = b[m.index(i, j)];
                }
            }
            chol.solve(&mut rhs);
            for j in 0..=m.my() {
                for i in 0..=m.nx() {
                    let k = m.index(i, j);
                    x[k] = if mask[k] {
                        rhs[self.free_index(i, j)]
                    } else {
                        dirichlet.values[k]
                    };
                }
            }
            return Ok((x, 0));
        }
        if let Some(w) = warm {
            for k in 0..n {
                if mask[k] {
                    x[k] = w[k];
                }
            }
        }
        let iters = self.cg(&mask, &b, &mut x, opts)?;
        for k in 0..n {
            if !mask[k] {
                x[k] = dirichlet.values[k];
            }
        }
        Ok((x, iters))
    }

    /// Jacobi-preconditioned conjugate gradients on the free nodes. All
    /// reductions run in index order, so results do not depend on threading.
    fn cg(&self, mask: &[bool], b: &[f64], x: &mut [f64], opts: &LinearOptions) -> Result<usize> {
        let n = b.len();
        let dot = |u: &[f64], v: &[f64]| -> f64 { u.iter().zip(v).map(|(a, b)| a * b).sum() };
        let bnorm = dot(b, b).sqrt();
        if bnorm == 0.0 && x.iter().all(|v| *v == 0.0) {
            return Ok(0);
        }
        let target = opts.tol * bnorm.max(f64::MIN_POSITIVE);

        let mut r = vec![0.0; n];
        let mut ap = vec![0.0; n];
        self.apply(x, &mut ap);
        for k in 0..n {
            r[k] = if mask[k] { b[k] - ap[k] } else { 0.0 };
        }
        let inv: Vec<f64> = (0..n).map(|k| if mask[k] { 1.0 / self.diag[k] } else { 0.0 }).collect();
        let mut z: Vec<f64> = r.iter().zip(&inv).map(|(r, d)| r * d).collect();
        let mut p = z.clone();
        let mut rz = dot(&r, &z);
        let mut rnorm = dot(&r, &r).sqrt();
        if rnorm <= target {
            return Ok(0);
        }
        for it in 1..=opts.max_iter {
            self.apply(&p, &mut ap);
            for k in 0..n {
                if !mask[k] {
                    ap[k] = 0.0;
                }
            }
            let pap = dot(&p, &ap);
            if pap <= 0.0 {
                return Err(Error::LinearSolve {
                    iterations: it,
                    residual: rnorm / bnorm.max(f64::MIN_POSITIVE),
                    tol: opts.tol,
                });
            }
            let alpha = rz / pap;
            for k in 0..n {
                x[k] += alpha * p[k];
                r[k] -= alpha * ap[k];
            }
            rnorm = dot(&r, &r).sqrt();
            if rnorm <= target {
                return Ok(it);
            }
            for k in 0..n {
                z[k] = r[k] * inv[k];
            }
            let rz_new = dot(&r, &z);
            let beta = rz_new / rz;
            rz = rz_new;
            for k in 0..n {
                p[k] = z[k] + beta * p[k];
            }
        }
        Err(Error::LinearSolve {
            iterations: opts.max_iter,
            residual: rnorm / bnorm.max(f64::MIN_POSITIVE),
            tol: opts.tol,
        })
    }
}

/// Assembles the weighted operator for `mesh`.
pub fn assemble(mesh: Arc<Mesh>) -> WeightedSystem {
    WeightedSystem::assemble(mesh)
}

/// Linear solve with prescribed trace flux `g(x_i)`.
pub fn solve_linear(system: &WeightedSystem, dirichlet: &DirichletData, flux: &[f64]) -> Result<Field> {
    let (values, _) = system.solve_values(dirichlet, flux, None, &LinearOptions::default())?;
    Ok(Field::new(system.mesh_arc(), values))
}

/// Controls for the damped fixed-point iteration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NonlinearOptions {
    /// Relaxation factor in `(0, 1]`.
    pub omega: f64,
    /// Stop when the sup-norm of the trace update falls below this.
    pub tol: f64,
    pub max_iter: usize,
    /// Smoothing width for `q = 1`; `None` uses the first cell height.
    pub epsilon: Option<f64>,
    pub linear: LinearOptions,
}

impl Default for NonlinearOptions {
    fn default() -> Self {
        NonlinearOptions {
            omega: 0.7,
            tol: 1e-10,
            max_iter: 500,
            epsilon: None,
            linear: LinearOptions::default(),
        }
    }
}

/// Outcome of a nonlinear solve. Non-convergence is reported here, not raised.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveReport {
    pub iterations: usize,
    pub final_update: f64,
    pub converged: bool,
    pub interior_residual: f64,
    pub boundary_residual: f64,
    pub linear_iterations: usize,
    pub omega: f64,
    pub tol: f64,
    pub epsilon: Option<f64>,
}

/// Damped fixed-point iteration on the trace nonlinearity.
///
/// Each step freezes the flux at `f(u^m)`, solves the linear problem and
/// relaxes: `u^(m+1) = ω ũ + (1 - ω) u^m`.
pub fn solve_nonlinear(
    system: &WeightedSystem,
    p: &Parameters,
    dirichlet: &DirichletData,
    opts: &NonlinearOptions,
) -> Result<(Field, SolveReport)> {
    let m = system.mesh();
    if (m.a - p.a()).abs() > 1e-12 {
        return Err(Error::WeightMismatch {
            field: m.a,
            params: p.a(),
        });
    }
    if !(opts.omega > 0.0 && opts.omega <= 1.0) {
        return Err(Error::InvalidParameter {
            name: "omega",
            value: opts.omega,
            reason: "relaxation must lie in (0, 1]",
        });
    }
    if !(opts.tol > 0.0) {
        return Err(Error::InvalidParameter {
            name: "tol",
            value: opts.tol,
            reason: "tolerance must be positive",
        });
    }
    let epsilon = if p.q() == 1.0 {
        Some(opts.epsilon.unwrap_or(m.y[1]))
    } else {
        None
    };
    let eps = epsilon.unwrap_or(0.0);
    let nt = m.x.len();

    let zero = vec![0.0; nt];
    let (mut u, mut lin_total) = system.solve_values(dirichlet, &zero, None, &opts.linear)?;
    let mut flux = vec![0.0; nt];
    let mut iterations = 0;
    let mut change = f64::INFINITY;
    let mut converged = false;
    while iterations < opts.max_iter {
        iterations += 1;
        for i in 0..nt {
            flux[i] = p.smoothed_nonlinearity(u[i], eps);
        }
        let (trial, its) = system.solve_values(dirichlet, &flux, Some(&u), &opts.linear)?;
        lin_total += its;
        change = 0.0;
        for (k, (uk, tk)) in u.iter_mut().zip(&trial).enumerate() {
            let next = opts.omega * tk + (1.0 - opts.omega) * *uk;
            if k < nt {
                change = f64::max(change, (next - *uk).abs());
            }
            *uk = next;
        }
        if change <= opts.tol {
            converged = true;
            break;
        }
    }

    let field = Field::new(system.mesh_arc(), u).with_params(*p);
    let res = residual_with(system, &field, p, eps);
    let report = SolveReport {
        iterations,
        final_update: change,
        converged,
        interior_residual: res.interior,
        boundary_residual: res.boundary,
        linear_iterations: lin_total,
        omega: opts.omega,
        tol: opts.tol,
        epsilon,
    };
    Ok((field.with_solve_metadata(epsilon, report.clone()), report))
}

/// Maximum row residuals of the discrete problem.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Residual {
    /// Max `|(A u)_k|` over interior nodes.
    pub interior: f64,
    /// Max over trace nodes of `|(A u)_i / Δx_i - f(u_i)|`.
    pub boundary: f64,
}

/// Residuals of `field` against the assembled operator and the boundary
/// nonlinearity (smoothed with the field's recorded `epsilon` when `q = 1`).
pub fn residual(field: &Field, p: &Parameters) -> Residual {
    let system = WeightedSystem::assemble(field.mesh_arc());
    residual_with(&system, field, p, field.epsilon().unwrap_or(0.0))
}

fn residual_with(system: &WeightedSystem, field: &Field, p: &Parameters, eps: f64) -> Residual {
    let m = system.mesh();
    let mut au = vec![0.0; m.node_count()];
    system.apply(field.values(), &mut au);
    let mut interior = 0.0f64;
    for j in 1..m.my() {
        for i in 1..m.nx() {
            interior = interior.max(au[m.index(i, j)].abs());
        }
    }
    let mut boundary = 0.0f64;
    for i in 1..m.nx() {
        let flux = au[m.index(i, 0)] / m.dual_dx[i];
        boundary = boundary.max((flux - p.smoothed_nonlinearity(field.at(i, 0), eps)).abs());
    }
    Residual { interior, boundary }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn system(a: f64, n: usize) -> WeightedSystem {
        WeightedSystem::assemble(Arc::new(Mesh::with_default_grading(1.0, 1.0, n, n, a).unwrap()))
    }

    fn interior_residual(s: &WeightedSystem, u: impl Fn(f64, f64) -> f64 + Sync) -> f64 {
        let m = s.mesh();
        let f = Field::sample(
            s.mesh_arc(),
            &crate::field::AnalyticField::new(m.a, u, |_, _| [0.0, 0.0]),
        );
        let p = Parameters::new((1.0 - m.a) / 2.0, 1.5, 0.0, 0.0).unwrap();
        residual_with(s, &f, &p, 0.0).interior
    }

    #[test]
    fn five_point_stencil_when_unweighted() {
        let s = WeightedSystem::assemble(Arc::new(Mesh::new(1.0, 1.0, 16, 16, 1.0, 0.0).unwrap()));
        let (d, nb) = s.stencil(5, 7);
        // dx = 1/8, dy = 1/16: horizontal conductance dy/dx, vertical dx/dy.
        assert!((nb[0] - 0.5).abs() < 1e-14 && (nb[1] - 0.5).abs() < 1e-14);
        assert!((nb[2] - 2.0).abs() < 1e-13 && (nb[3] - 2.0).abs() < 1e-13);
        assert!((d - 5.0).abs() < 1e-13);
    }

    #[test]
    fn exact_on_weighted_profiles() {
        for &a in &[-0.5, 0.0, 0.5] {
            let s = system(a, 16);
            assert!(interior_residual(&s, |_, y| y.powf(1.0 - a)) < 1e-12);
            assert!(interior_residual(&s, |x, _| x) < 1e-12);
            assert!(interior_residual(&s, |x, y| 2.0 - x + 3.0 * y.powf(1.0 - a)) < 1e-12);
        }
    }

    #[test]
    fn constants_and_linear_data() {
        let s = system(0.5, 16);
        let m = s.mesh();
        let zero = vec![0.0; m.x.len()];
        let f = solve_linear(&s, &DirichletData::constant(m, 2.5), &zero).unwrap();
        assert!(f.values().iter().all(|v| (v - 2.5).abs() < 1e-12));
        let f = solve_linear(&s, &DirichletData::from_fn(m, |x, _| x), &zero).unwrap();
        for j in 0..=m.my() {
            for i in 0..=m.nx() {
                assert!((f.at(i, j) - m.x[i]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn interior_residual_of_solution_is_small() {
        let s = system(0.5, 32);
        let m = s.mesh();
        let d = DirichletData::from_fn(m, |x, y| x * x - y * y / 1.5);
        let f = solve_linear(&s, &d, &vec![0.0; m.x.len()]).unwrap();
        let p = Parameters::new(0.25, 1.5, 0.0, 0.0).unwrap();
        let r = residual(&f, &p);
        assert!(r.interior <= 1e-9, "{r:?}");
        assert!(r.boundary <= 1e-9, "{r:?}");
    }

    #[test]
    fn direct_and_iterative_paths_agree() {
        let s = system(0.5, 24);
        let m = s.mesh();
        let d = DirichletData::from_fn(m, |x, y| (3.0 * x).sin() + y);
        let g: Vec<f64> = m.x.iter().map(|x| x * x).collect();
        let direct = LinearOptions {
            method: LinearMethod::Cholesky,
            ..Default::default()
        };
        let cg = LinearOptions {
            method: LinearMethod::ConjugateGradient,
            tol: 1e-13,
            ..Default::default()
        };
        let (u, _) = s.solve_values(&d, &g, None, &direct).unwrap();
        let (v, its) = s.solve_values(&d, &g, None, &cg).unwrap();
        assert!(its > 0);
        let diff = u.iter().zip(&v).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        assert!(diff < 1e-9, "{diff}");
    }

    #[test]
    fn prescribed_flux_enters_trace_balance() {
        let s = system(0.0, 16);
        let m = s.mesh();
        let g: Vec<f64> = m.x.iter().map(|x| 1.0 + x).collect();
        let f = solve_linear(&s, &DirichletData::constant(m, 0.0), &g).unwrap();
        let mut au = vec![0.0; m.node_count()];
        s.apply(f.values(), &mut au);
        for i in 1..m.nx() {
            assert!((au[m.index(i, 0)] / m.dual_dx[i] - g[i]).abs() < 1e-8);
        }
    }

    #[test]
    fn linear_parameters_converge_in_one_iteration() {
        let s = system(0.5, 16);
        let p = Parameters::new(0.25, 1.0, 0.0, 0.0).unwrap();
        let d = DirichletData::from_fn(s.mesh(), |x, _| x);
        let (f, rep) = solve_nonlinear(&s, &p, &d, &NonlinearOptions::default()).unwrap();
        assert!(rep.converged);
        assert_eq!(rep.iterations, 1);
        assert!((f.value(0.3, 0.2) - 0.3).abs() < 1e-10);
    }

    #[test]
    fn positive_data_keeps_trace_positive() {
        let s = system(0.5, 32);
        let p = Parameters::new(0.25, 1.5, 1.0, 1.0).unwrap();
        let d = DirichletData::constant(s.mesh(), 1.0);
        let (f, rep) = solve_nonlinear(&s, &p, &d, &NonlinearOptions::default()).unwrap();
        assert!(rep.converged, "{rep:?}");
        let min = f.trace().iter().cloned().fold(f64::INFINITY, f64::min);
        assert!(min > 0.0);
        // the source term lifts the trace above the data
        assert!(f.at(s.mesh().nx() / 2, 0) > 1.0);
    }

    #[test]
    fn rejects_bad_options() {
        let s = system(0.5, 16);
        let p = Parameters::new(0.25, 1.0, 1.0, 1.0).unwrap();
        let d = DirichletData::constant(s.mesh(), 1.0);
        let bad = NonlinearOptions {
            omega: 0.0,
            ..Default::default()
        };
        assert!(solve_nonlinear(&s, &p, &d, &bad).is_err());
        let wrong = Parameters::new(0.3, 1.0, 1.0, 1.0).unwrap();
        assert!(matches!(
            solve_nonlinear(&s, &wrong, &d, &NonlinearOptions::default()),
            Err(Error::WeightMismatch { .. })
        ));
    }

    #[test]
    fn non_convergence_is_reported() {
        let s = system(0.5, 16);
        let p = Parameters::new(0.25, 1.5, 1.0, 1.0).unwrap();
        let d = DirichletData::from_fn(s.mesh(), |x, _| x);
        let opts = NonlinearOptions {
            max_iter: 2,
            tol: 1e-14,
            ..Default::default()
        };
        let (f, rep) = solve_nonlinear(&s, &p, &d, &opts).unwrap();
        assert!(!rep.converged);
        assert_eq!(rep.iterations, 2);
        assert!(f.is_finite());
    }
}
