//! The angular problem `-(sin^a θ φ')' = μ sin^a θ φ` on `[0, π]`, written
//! as the flux system `φ' = sin^-a θ w`, `w' = -μ sin^a θ φ`.
//!
//! Close to `θ = 0` and `θ = π` the integrator hands over to a local series in
//! the distance `s` to the endpoint, so the singular factor `sin^-a` is never
//! stepped through. At `π` the series variable is the inward flux `ν = -w`.

use std::f64::consts::{FRAC_PI_2, PI};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mesh::Mesh;
use crate::params::Parameters;

/// Width of the endpoint band handled by the series closure.
pub const SERIES_RADIUS: f64 = 1e-4;

/// Default integrator tolerance for profiles.
pub const DEFAULT_TOL: f64 = 1e-11;

/// Largest eigen-parameter the bracket scan will try.
const MU_SCAN_MAX: f64 = 1e8;

/// Uniform node spacing on a half circle of profile samples.
const HALF_INTERVALS: usize = 2048;

/// Bands around endpoints and glue points skipped by the residual check.
const RESIDUAL_EXCLUSION: f64 = 0.05;

/// `k₁ = (-a + √(a² + 4 λ̂)) / 2`, the homogeneity with `k₁(k₁ + a) = λ̂`.
pub fn characteristic_exponent(lambda_hat: f64, a: f64) -> f64 {
    0.5 * (-a + (a * a + 4.0 * lambda_hat).sqrt())
}

/// Coefficients of the endpoint series: `[ψ, ν](s) = M [ψ₀, ν₀]`.
fn series_matrix(a: f64, mu: f64, s: f64) -> [[f64; 2]; 2] {
    let s1ma = s.powf(1.0 - a);
    let s1pa = s.powf(1.0 + a);
    [
        [
            1.0 - mu * s * s / (2.0 * (1.0 + a)),
            s1ma / (1.0 - a) - mu * s * s * s1ma / (2.0 * (1.0 - a) * (3.0 - a)),
        ],
        [-mu * s1pa / (1.0 + a), 1.0 - mu * s * s / (2.0 * (1.0 - a))],
    ]
}

fn series_eval(a: f64, mu: f64, s: f64, psi0: f64, nu0: f64) -> [f64; 2] {
    let m = series_matrix(a, mu, s);
    [m[0][0] * psi0 + m[0][1] * nu0, m[1][0] * psi0 + m[1][1] * nu0]
}

/// Endpoint values `(ψ₀, ν₀)` from the values at distance `s`.
fn series_invert(a: f64, mu: f64, s: f64, psi: f64, nu: f64) -> [f64; 2] {
    let m = series_matrix(a, mu, s);
    let det = m[0][0] * m[1][1] - m[0][1] * m[1][0];
    [
        (m[1][1] * psi - m[0][1] * nu) / det,
        (m[0][0] * nu - m[1][0] * psi) / det,
    ]
}

/// `(φ, w)` at `θ` inside an endpoint band, from the endpoint data.
fn band_value(a: f64, mu: f64, theta: f64, end: Endpoint, data: [f64; 2]) -> [f64; 2] {
    match end {
        Endpoint::Zero => series_eval(a, mu, theta, data[0], data[1]),
        Endpoint::Pi => {
            let [psi, nu] = series_eval(a, mu, PI - theta, data[0], -data[1]);
            [psi, -nu]
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Endpoint {
    Zero,
    Pi,
}

fn endpoint_of(theta: f64) -> Option<Endpoint> {
    if theta == 0.0 {
        Some(Endpoint::Zero)
    } else if theta == PI {
        Some(Endpoint::Pi)
    } else {
        None
    }
}

/// Dormand-Prince 5(4) on the flux system.
struct FluxSystem {
    a: f64,
    mu: f64,
    tol: f64,
}

const C: [f64; 7] = [0.0, 0.2, 0.3, 0.8, 8.0 / 9.0, 1.0, 1.0];
const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [0.2, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [
        19372.0 / 6561.0,
        -25360.0 / 2187.0,
        64448.0 / 6561.0,
        -212.0 / 729.0,
        0.0,
        0.0,
    ],
    [
        9017.0 / 3168.0,
        -355.0 / 33.0,
        46732.0 / 5247.0,
        49.0 / 176.0,
        -5103.0 / 18656.0,
        0.0,
    ],
    [
        35.0 / 384.0,
        0.0,
        500.0 / 1113.0,
        125.0 / 192.0,
        -2187.0 / 6784.0,
        11.0 / 84.0,
    ],
];
const E: [f64; 7] = [
    71.0 / 57600.0,
    0.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
];

/// Outcome of an integration leg.
struct Leg {
    theta: f64,
    y: [f64; 2],
    stopped: bool,
}

impl FluxSystem {
    fn rhs(&self, theta: f64, y: [f64; 2]) -> [f64; 2] {
        let s = theta.sin();
        let sa = s.powf(self.a);
        [y[1] / sa, -self.mu * sa * y[0]]
    }

    /// Integrates from `t0` to `t1` (either direction), landing exactly on
    /// every entry of `nodes` (ordered along the direction of travel) and
    /// pushing the state there into `out`. `stop` is checked after each step.
    fn run(
        &self,
        t0: f64,
        y0: [f64; 2],
        t1: f64,
        nodes: &[f64],
        out: &mut Vec<[f64; 2]>,
        stop: Option<&dyn Fn(&[f64; 2]) -> bool>,
        max_step: f64,
    ) -> Result<Leg> {
        let dir = if t1 >= t0 { 1.0 } else { -1.0 };
        let span = (t1 - t0).abs();
        let mut t = t0;
        let mut y = y0;
        let mut h = (0.01 * span).min(max_step).max(1e-12);
        let mut next = 0;
        while next < nodes.len() && (nodes[next] - t) * dir <= 0.0 {
            out.push(y);
            next += 1;
        }
        let mut k1 = self.rhs(t, y);
        while (t1 - t) * dir > 0.0 {
            let target = if next < nodes.len() { nodes[next] } else { t1 };
            let remaining = (target - t).abs();
            let mut land = false;
            if h >= remaining {
                h = remaining;
                land = true;
            }
            let mut k = [[0.0; 2]; 7];
            k[0] = k1;
            for s in 1..7 {
                let mut ys = y;
                for (j, kj) in k.iter().enumerate().take(s) {
                    let c = A[s][j] * h * dir;
                    ys[0] += c * kj[0];
                    ys[1] += c * kj[1];
                }
                k[s] = self.rhs(t + dir * C[s] * h, ys);
            }
            let mut ynew = y;
            let mut err = 0.0f64;
            for i in 0..2 {
                let incr: f64 = (0..6).map(|s| A[6][s] * k[s][i]).sum();
                let e: f64 = (0..7).map(|s| E[s] * k[s][i]).sum();
                ynew[i] = y[i] + h * dir * incr;
                let scale = self.tol * (1.0 + y[i].abs().max(ynew[i].abs()));
                err = err.max((h * e / scale).abs());
            }
            if !err.is_finite() {
                err = 1e10;
            }
            if err <= 1.0 {
                t = if land { target } else { t + dir * h };
                y = ynew;
                k1 = k[6];
                if land && next < nodes.len() {
                    out.push(y);
                    next += 1;
                }
                if let Some(stop) = stop {
                    if stop(&y) {
                        return Ok(Leg {
                            theta: t,
                            y,
                            stopped: true,
                        });
                    }
                }
                let grow = if err == 0.0 {
                    5.0
                } else {
                    (0.9 * err.powf(-0.2)).clamp(0.2, 5.0)
                };
                h = (h * grow).min(max_step);
            } else {
                h *= (0.9 * err.powf(-0.2)).clamp(0.1, 0.9);
            }
            if h < 1e-14 * t.abs().max(1.0) {
                return Err(Error::StepUnderflow { theta: t });
            }
        }
        while next < nodes.len() {
            out.push(y);
            next += 1;
        }
        Ok(Leg {
            theta: t,
            y,
            stopped: false,
        })
    }
}

/// State at `θ₁` of the flux system started from `(φ, w) = init` at `θ₀`.
///
/// Endpoint bands are handled by the series closure; `nodes` (ordered from
/// `θ₀` to `θ₁`) receive the state in `out`.
fn shoot(
    a: f64,
    mu: f64,
    t0: f64,
    init: [f64; 2],
    t1: f64,
    tol: f64,
    nodes: &[f64],
    out: &mut Vec<[f64; 2]>,
    stop: Option<&dyn Fn(&[f64; 2]) -> bool>,
) -> Result<Leg> {
    if !(0.0..=PI).contains(&t0) || !(0.0..=PI).contains(&t1) {
        return Err(Error::Invalid(format!("interval [{t0}, {t1}] leaves [0, π]")));
    }
    if !(a > -1.0 && a < 1.0) {
        return Err(Error::InvalidParameter {
            name: "a",
            value: a,
            reason: "weight exponent must lie in (-1, 1)",
        });
    }
    let sys = FluxSystem { a, mu, tol };
    let dir = if t1 >= t0 { 1.0 } else { -1.0 };
    let band_edge = |e: Endpoint| match e {
        Endpoint::Zero => SERIES_RADIUS,
        Endpoint::Pi => PI - SERIES_RADIUS,
    };
    let in_band = |t: f64, e: Endpoint| match e {
        Endpoint::Zero => t <= SERIES_RADIUS,
        Endpoint::Pi => t >= PI - SERIES_RADIUS,
    };
    let mut idx = 0;

    // Leaving an endpoint: series out to the band edge.
    let (mut t, mut y) = (t0, init);
    if let Some(e) = endpoint_of(t0) {
        let edge = band_edge(e);
        let stop_at = if (t1 - edge) * dir > 0.0 { edge } else { t1 };
        while idx < nodes.len() && (nodes[idx] - stop_at) * dir <= 0.0 {
            out.push(band_value(a, mu, nodes[idx], e, init));
            idx += 1;
        }
        y = band_value(a, mu, stop_at, e, init);
        t = stop_at;
    }

    // Arriving at an endpoint: integrate to the band edge, then invert.
    let end = endpoint_of(t1).filter(|&e| !in_band(t, e));
    let rk_target = end.map(band_edge).unwrap_or(t1);
    let split = nodes[idx..]
        .iter()
        .position(|&n| (n - rk_target) * dir > 0.0)
        .map(|p| idx + p)
        .unwrap_or(nodes.len());
    if (rk_target - t) * dir > 0.0 || split > idx {
        let leg = sys.run(t, y, rk_target, &nodes[idx..split], out, stop, 0.05)?;
        if leg.stopped {
            return Ok(leg);
        }
        t = leg.theta;
        y = leg.y;
    }
    idx = split;
    if let Some(e) = end {
        let s = match e {
            Endpoint::Zero => t,
            Endpoint::Pi => PI - t,
        };
        let data = match e {
            Endpoint::Zero => series_invert(a, mu, s, y[0], y[1]),
            Endpoint::Pi => {
                let [p0, n0] = series_invert(a, mu, s, y[0], -y[1]);
                [p0, -n0]
            }
        };
        while idx < nodes.len() {
            out.push(band_value(a, mu, nodes[idx], e, data));
            idx += 1;
        }
        return Ok(Leg {
            theta: t1,
            y: data,
            stopped: false,
        });
    }
    while idx < nodes.len() {
        out.push(y);
        idx += 1;
    }
    Ok(Leg {
        theta: t1,
        y,
        stopped: false,
    })
}

/// Integrates the flux system from `(θ₀, init)` to `θ₁` and samples it.
pub fn integrate_flux_system(a: f64, mu: f64, t0: f64, t1: f64, init: [f64; 2], tol: f64) -> Result<AngularProfile> {
    let (lo, hi) = if t0 <= t1 { (t0, t1) } else { (t1, t0) };
    let grid = segment_grid(lo, hi, lo == 0.0, hi == PI);
    let nodes: Vec<f64> = if t0 <= t1 {
        grid.clone()
    } else {
        grid.iter().rev().cloned().collect()
    };
    let mut out = Vec::with_capacity(nodes.len());
    shoot(a, mu, t0, init, t1, tol, &nodes, &mut out, None)?;
    if t0 > t1 {
        out.reverse();
    }
    Ok(AngularProfile::from_samples(a, mu, grid, out, Symmetry::None, vec![]))
}

fn uniform_spacing() -> f64 {
    FRAC_PI_2 / HALF_INTERVALS as f64
}

/// Nodes on `[lo, hi]`: uniform at the profile spacing, with geometric
/// refinement from the series radius when an end is `0` or `π`.
fn segment_grid(lo: f64, hi: f64, refine_lo: bool, refine_hi: bool) -> Vec<f64> {
    let delta = uniform_spacing();
    let geometric = |from: f64, sign: f64| {
        let mut v = vec![];
        let mut s = SERIES_RADIUS;
        while s < delta && s < 0.25 * (hi - lo) {
            v.push(from + sign * s);
            s *= 1.2;
        }
        v
    };
    let left = if refine_lo { geometric(lo, 1.0) } else { vec![] };
    let right = if refine_hi { geometric(hi, -1.0) } else { vec![] };
    let start = left.last().copied().unwrap_or(lo);
    let end = right.last().copied().unwrap_or(hi);
    let n = ((end - start) / delta).ceil().max(1.0) as usize;
    let mut nodes = vec![lo];
    nodes.extend(left);
    nodes.extend((1..n).map(|i| start + (end - start) * i as f64 / n as f64));
    nodes.extend(right.into_iter().rev());
    if refine_hi || *nodes.last().unwrap() != hi {
        nodes.push(hi);
    }
    if !refine_hi && nodes.len() >= 2 && nodes[nodes.len() - 2] == hi {
        nodes.pop();
    }
    nodes
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Symmetry {
    /// `φ(π - θ) = -φ(θ)`.
    Antisymmetric,
    /// `φ(π - θ) = φ(θ)`.
    Symmetric,
    None,
}

/// Sampled solution of the flux system.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AngularProfile {
    pub a: f64,
    pub mu: f64,
    pub theta: Vec<f64>,
    pub phi: Vec<f64>,
    pub w: Vec<f64>,
    pub symmetry: Symmetry,
    /// Interior points where pieces were joined.
    pub glue: Vec<f64>,
}

impl AngularProfile {
    fn from_samples(a: f64, mu: f64, theta: Vec<f64>, y: Vec<[f64; 2]>, symmetry: Symmetry, glue: Vec<f64>) -> Self {
        AngularProfile {
            a,
            mu,
            phi: y.iter().map(|v| v[0]).collect(),
            w: y.iter().map(|v| v[1]).collect(),
            theta,
            symmetry,
            glue,
        }
    }

    /// Joins a half profile on `[0, π/2]` with its reflection.
    fn mirrored(a: f64, mu: f64, half: Vec<f64>, y: Vec<[f64; 2]>, symmetry: Symmetry, mut glue: Vec<f64>) -> Self {
        let n = half.len();
        debug_assert_eq!(half[n - 1], FRAC_PI_2);
        let (sp, sw) = match symmetry {
            Symmetry::Antisymmetric => (-1.0, 1.0),
            _ => (1.0, -1.0),
        };
        let mut theta = half.clone();
        let mut phi: Vec<f64> = y.iter().map(|v| v[0]).collect();
        let mut w: Vec<f64> = y.iter().map(|v| v[1]).collect();
        // The reflection forces φ(π/2) = 0 (odd) or w(π/2) = 0 (even).
        match symmetry {
            Symmetry::Antisymmetric => phi[n - 1] = 0.0,
            _ => w[n - 1] = 0.0,
        }
        for i in (0..n - 1).rev() {
            theta.push(PI - half[i]);
            phi.push(sp * phi[i]);
            w.push(sw * w[i]);
        }
        let mirrored: Vec<f64> = glue.iter().filter(|&&g| g < FRAC_PI_2).map(|g| PI - g).collect();
        glue.push(FRAC_PI_2);
        glue.extend(mirrored.into_iter().rev());
        AngularProfile {
            a,
            mu,
            theta,
            phi,
            w,
            symmetry,
            glue,
        }
    }

    pub fn len(&self) -> usize {
        self.theta.len()
    }

    pub fn is_empty(&self) -> bool {
        self.theta.is_empty()
    }

    pub fn domain(&self) -> (f64, f64) {
        (self.theta[0], *self.theta.last().unwrap())
    }

    /// `(φ(0), w(0), φ(π), w(π))` when the profile covers the closed half circle.
    pub fn endpoint_data(&self) -> Option<[f64; 4]> {
        let (lo, hi) = self.domain();
        (lo == 0.0 && hi == PI).then(|| {
            [
                self.phi[0],
                self.w[0],
                *self.phi.last().unwrap(),
                *self.w.last().unwrap(),
            ]
        })
    }

    /// `(φ, w)` at `θ`: series in the endpoint bands, cubic Hermite elsewhere.
    /// Symmetric profiles evaluate the far half by reflection.
    pub fn eval(&self, theta: f64) -> [f64; 2] {
        let (lo, hi) = self.domain();
        let theta = theta.clamp(lo, hi);
        if theta > FRAC_PI_2 && (lo - (PI - hi)).abs() < 1e-12 {
            match self.symmetry {
                Symmetry::Antisymmetric => {
                    let [p, w] = self.eval_raw(PI - theta);
                    return [-p, w];
                }
                Symmetry::Symmetric => {
                    let [p, w] = self.eval_raw(PI - theta);
                    return [p, -w];
                }
                Symmetry::None => {}
            }
        }
        self.eval_raw(theta)
    }

    fn eval_raw(&self, theta: f64) -> [f64; 2] {
        let n = self.theta.len();
        if self.theta[0] == 0.0 && theta <= SERIES_RADIUS {
            return band_value(self.a, self.mu, theta, Endpoint::Zero, [self.phi[0], self.w[0]]);
        }
        if self.theta[n - 1] == PI && theta >= PI - SERIES_RADIUS {
            return band_value(self.a, self.mu, theta, Endpoint::Pi, [self.phi[n - 1], self.w[n - 1]]);
        }
        let i = Mesh::locate(&self.theta, theta);
        let (t0, t1) = (self.theta[i], self.theta[i + 1]);
        let h = t1 - t0;
        let x = (theta - t0) / h;
        let (h00, h10, h01, h11) = (
            (1.0 + 2.0 * x) * (1.0 - x) * (1.0 - x),
            x * (1.0 - x) * (1.0 - x),
            x * x * (3.0 - 2.0 * x),
            x * x * (x - 1.0),
        );
        let d = |k: usize| {
            let sa = self.theta[k].sin().powf(self.a);
            [self.w[k] / sa, -self.mu * sa * self.phi[k]]
        };
        let (d0, d1) = (d(i), d(i + 1));
        let phi = h00 * self.phi[i] + h10 * h * d0[0] + h01 * self.phi[i + 1] + h11 * h * d1[0];
        let w = h00 * self.w[i] + h10 * h * d0[1] + h01 * self.w[i + 1] + h11 * h * d1[1];
        [phi, w]
    }

    /// `φ'(θ) = w / sin^a θ`.
    pub fn derivative(&self, theta: f64) -> f64 {
        self.eval(theta)[1] / theta.sin().powf(self.a)
    }

    /// Max of `|w' + μ sin^a θ φ|` over nodes at least 0.05 away from the
    /// endpoints and glue points, with `w'` by 7-point finite differences.
    pub fn ode_residual(&self) -> f64 {
        let n = self.theta.len();
        let mut worst = 0.0f64;
        for i in 3..n.saturating_sub(3) {
            let t = self.theta[i];
            let (lo, hi) = (self.theta[i - 3], self.theta[i + 3]);
            let near_end = !(RESIDUAL_EXCLUSION..=PI - RESIDUAL_EXCLUSION).contains(&t);
            let near_glue = self
                .glue
                .iter()
                .any(|g| (t - g).abs() < RESIDUAL_EXCLUSION || (*g > lo && *g < hi));
            if near_end || near_glue {
                continue;
            }
            let wts = fornberg_first_derivative(t, &self.theta[i - 3..=i + 3]);
            let dw: f64 = wts.iter().zip(&self.w[i - 3..=i + 3]).map(|(c, w)| c * w).sum();
            let r = dw + self.mu * t.sin().powf(self.a) * self.phi[i];
            worst = worst.max(r.abs());
        }
        worst
    }

    /// `|-w(0) - f(φ(0))|` and `|w(π) - f(φ(π))|`.
    pub fn endpoint_defects(&self, p: &Parameters) -> Option<[f64; 2]> {
        let [p0, w0, p1, w1] = self.endpoint_data()?;
        Some([(-w0 - p.nonlinearity(p0)).abs(), (w1 - p.nonlinearity(p1)).abs()])
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("theta,phi,w\n");
        for i in 0..self.theta.len() {
            s.push_str(&format!(
                "{:.15e},{:.15e},{:.15e}\n",
                self.theta[i], self.phi[i], self.w[i]
            ));
        }
        s
    }
}

/// First-derivative weights at `x0` for the nodes `xs` (Fornberg's recursion).
fn fornberg_first_derivative(x0: f64, xs: &[f64]) -> Vec<f64> {
    let n = xs.len();
    let mut c = vec![[0.0f64; 2]; n];
    c[0][0] = 1.0;
    let mut c1 = 1.0;
    let mut c4 = xs[0] - x0;
    for i in 1..n {
        let mn = i.min(1);
        let mut c2 = 1.0;
        let c5 = c4;
        c4 = xs[i] - x0;
        for j in 0..i {
            let c3 = xs[i] - xs[j];
            c2 *= c3;
            if j == i - 1 {
                for k in (1..=mn).rev() {
                    c[i][k] = c1 * (k as f64 * c[i - 1][k - 1] - c5 * c[i - 1][k]) / c2;
                }
                c[i][0] = -c1 * c5 * c[i - 1][0] / c2;
            }
            for k in (1..=mn).rev() {
                c[j][k] = (c4 * c[j][k] - k as f64 * c[j][k - 1]) / c3;
            }
            c[j][0] = c4 * c[j][0] / c3;
        }
        c1 = c2;
    }
    c.iter().map(|v| v[1]).collect()
}

/// Which eigenproblem an [`EigenResult`] solves.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum EigenProblem {
    /// `w(0) = 0`, `φ(T) = 0`.
    Mixed { t: f64 },
    /// `φ(T) = 0 = φ(π - T)`.
    Dirichlet { t: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EigenResult {
    pub problem: EigenProblem,
    pub a: f64,
    pub lambda_hat: f64,
    pub k1: f64,
}

impl EigenResult {
    /// First eigenfunction: `φ(0) = 1` for the mixed problem, `w(T) = 1` for
    /// the Dirichlet one.
    pub fn eigenfunction(&self, tol: f64) -> Result<AngularProfile> {
        match self.problem {
            EigenProblem::Mixed { t } => integrate_flux_system(self.a, self.lambda_hat, 0.0, t, [1.0, 0.0], tol),
            EigenProblem::Dirichlet { t } => {
                let half = segment_grid(t, FRAC_PI_2, false, false);
                let mut out = Vec::with_capacity(half.len());
                shoot(
                    self.a,
                    self.lambda_hat,
                    t,
                    [0.0, 1.0],
                    FRAC_PI_2,
                    tol,
                    &half,
                    &mut out,
                    None,
                )?;
                Ok(AngularProfile::mirrored(
                    self.a,
                    self.lambda_hat,
                    half,
                    out,
                    Symmetry::Symmetric,
                    vec![],
                ))
            }
        }
    }
}

/// Smallest `μ` for which `crossed(μ)` holds, given that it is monotone.
fn bisect_mu(what: &'static str, tol: f64, crossed: impl Fn(f64) -> Result<bool>) -> Result<f64> {
    let (mut lo, mut hi) = (0.0, 1.0);
    while !crossed(hi)? {
        lo = hi;
        hi *= 2.0;
        if hi > MU_SCAN_MAX {
            return Err(Error::Bracket {
                what,
                lo: 0.0,
                hi: MU_SCAN_MAX,
            });
        }
    }
    while hi - lo > tol * hi.max(1.0) {
        let mid = 0.5 * (lo + hi);
        if crossed(mid)? {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

fn ode_tol(tol: f64) -> f64 {
    (0.1 * tol).clamp(1e-13, 1e-6)
}

/// First eigenvalue with `w(0) = 0` and `φ(T) = 0`.
pub fn eigen_mixed(t: f64, a: f64, tol: f64) -> Result<EigenResult> {
    if !(t > 0.0 && t < PI) {
        return Err(Error::InvalidParameter {
            name: "T",
            value: t,
            reason: "must lie in (0, π)",
        });
    }
    let lambda = bisect_mu("mixed eigenvalue", tol, |mu| {
        let stop = |y: &[f64; 2]| y[0] <= 0.0;
        let leg = shoot(a, mu, 0.0, [1.0, 0.0], t, ode_tol(tol), &[], &mut vec![], Some(&stop))?;
        Ok(leg.stopped || leg.y[0] <= 0.0)
    })?;
    Ok(EigenResult {
        problem: EigenProblem::Mixed { t },
        a,
        lambda_hat: lambda,
        k1: characteristic_exponent(lambda, a),
    })
}

/// First eigenvalue with `φ(T) = 0 = φ(π - T)`, by shooting to `w(π/2) = 0`.
pub fn eigen_dirichlet(t: f64, a: f64, tol: f64) -> Result<EigenResult> {
    if !(t > 0.0 && t < FRAC_PI_2) {
        return Err(Error::InvalidParameter {
            name: "T",
            value: t,
            reason: "must lie in (0, π/2)",
        });
    }
    let lambda = bisect_mu("Dirichlet eigenvalue", tol, |mu| {
        let stop = |y: &[f64; 2]| y[1] <= 0.0;
        let leg = shoot(
            a,
            mu,
            t,
            [0.0, 1.0],
            FRAC_PI_2,
            ode_tol(tol),
            &[],
            &mut vec![],
            Some(&stop),
        )?;
        Ok(leg.stopped || leg.y[1] <= 0.0)
    })?;
    Ok(EigenResult {
        problem: EigenProblem::Dirichlet { t },
        a,
        lambda_hat: lambda,
        k1: characteristic_exponent(lambda, a),
    })
}

/// `(T, λ̂, k₁)` rows for a list of `T`, evaluated in parallel.
pub fn eigen_curve(dirichlet: bool, a: f64, ts: &[f64], tol: f64) -> Result<Vec<EigenResult>> {
    ts.par_iter()
        .map(|&t| {
            if dirichlet {
                eigen_dirichlet(t, a, tol)
            } else {
                eigen_mixed(t, a, tol)
            }
        })
        .collect()
}

/// Opening `T` of the degree-2 cone, where the Dirichlet exponent is 2.
pub fn degree_two_opening(a: f64) -> f64 {
    (1.0 + a).sqrt().atan()
}

/// `T*` with `k₁(T*) = k_q` for the Dirichlet problem on `(T, π - T)`.
#[allow(non_snake_case)]
pub fn find_Tstar(a: f64, k_q: f64, tol: f64) -> Result<f64> {
    let floor = 1.0 - a;
    if !(k_q > floor && k_q < 2.0) {
        return Err(Error::OutOfRegime(format!(
            "k_q = {k_q} lies outside the attainable window ({floor}, 2) of Dirichlet exponents"
        )));
    }
    let eig_tol = (1e-3 * tol).max(1e-14);
    let k1 = |t: f64| eigen_dirichlet(t, a, eig_tol).map(|e| e.k1);
    let mut hi = degree_two_opening(a);
    let mut lo = 0.5 * hi;
    while k1(lo)? >= k_q {
        hi = lo;
        lo *= 0.5;
        if lo < 1e-12 {
            return Err(Error::Bracket { what: "T*", lo, hi });
        }
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        let k = k1(mid)?;
        if (k - k_q).abs() <= tol || hi - lo < 1e-15 {
            return Ok(mid);
        }
        if k < k_q {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Amplitude `c = (λ₊ / -w₀)^(1/(2-q))` that turns the normalized profile
/// into one satisfying `-w(0) = λ₊ φ(0)^(q-1)`.
pub fn nonlinear_amplitude(q: f64, lambda_plus: f64, w0: f64) -> Result<f64> {
    if !(w0 < 0.0) {
        return Err(Error::OutOfRegime(format!(
            "normalized flux w(0) = {w0} is not negative: μ is not below the mixed eigenvalue"
        )));
    }
    Ok((lambda_plus / -w0).powf(1.0 / (2.0 - q)))
}

/// Flux `w₀` at `0` of the solution with `ψ(0) = 1` and `ψ(T) = 0`.
pub fn mixed_shooting_flux(a: f64, mu: f64, t: f64, tol: f64) -> Result<f64> {
    let ya = shoot(a, mu, 0.0, [1.0, 0.0], t, tol, &[], &mut vec![], None)?.y;
    let yb = shoot(a, mu, 0.0, [0.0, 1.0], t, tol, &[], &mut vec![], None)?.y;
    if yb[0] == 0.0 {
        return Err(Error::Invalid(format!("shooting is singular at T = {t}")));
    }
    Ok(-ya[0] / yb[0])
}

fn check_two_phase_regime(p: &Parameters) -> Result<()> {
    if p.lambda_plus() != p.lambda_minus() || p.lambda_plus() <= 0.0 {
        return Err(Error::OutOfRegime(format!(
            "profiles are built for λ₊ = λ₋ > 0, got λ₊ = {}, λ₋ = {}",
            p.lambda_plus(),
            p.lambda_minus()
        )));
    }
    let k = p.exponents().k_q;
    if k >= 1.0 {
        return Err(Error::OutOfRegime(format!("k_q = {k} is not below 1")));
    }
    Ok(())
}

/// Odd profile with `φ(π/2) = 0`; its trace changes sign once.
pub fn build_antisymmetric(p: &Parameters, tol: f64) -> Result<AngularProfile> {
    check_two_phase_regime(p)?;
    let (a, mu) = (p.a(), p.exponents().mu);
    let w0 = mixed_shooting_flux(a, mu, FRAC_PI_2, ode_tol(tol))?;
    let c = nonlinear_amplitude(p.q(), p.lambda_plus(), w0)?;
    let half = segment_grid(0.0, FRAC_PI_2, true, false);
    let mut out = Vec::with_capacity(half.len());
    shoot(a, mu, 0.0, [c, c * w0], FRAC_PI_2, ode_tol(tol), &half, &mut out, None)?;
    Ok(AngularProfile::mirrored(
        a,
        mu,
        half,
        out,
        Symmetry::Antisymmetric,
        vec![],
    ))
}

/// Even profile with sign pattern `(+, -, +)`, glued at `T*` and `π - T*`.
pub fn build_symmetric(p: &Parameters, tol: f64) -> Result<(AngularProfile, f64)> {
    check_two_phase_regime(p)?;
    let (a, mu, k_q) = (p.a(), p.exponents().mu, p.exponents().k_q);
    let t_star = find_Tstar(a, k_q, 1e-3 * tol)?;
    let otol = ode_tol(tol);
    let w0 = mixed_shooting_flux(a, mu, t_star, otol)?;
    let c = nonlinear_amplitude(p.q(), p.lambda_plus(), w0)?;

    let left = segment_grid(0.0, t_star, true, false);
    let mut out = Vec::with_capacity(left.len());
    let leg = shoot(a, mu, 0.0, [c, c * w0], t_star, otol, &left, &mut out, None)?;
    let flux = leg.y[1];
    let n_left = out.len();
    out[n_left - 1][0] = 0.0;

    let middle = segment_grid(t_star, FRAC_PI_2, false, false);
    let mut mid_out = Vec::with_capacity(middle.len());
    shoot(a, mu, t_star, [0.0, flux], FRAC_PI_2, otol, &middle, &mut mid_out, None)?;
    let mut half = left;
    half.extend_from_slice(&middle[1..]);
    out.extend_from_slice(&mid_out[1..]);
    Ok((
        AngularProfile::mirrored(a, mu, half, out, Symmetry::Symmetric, vec![t_star]),
        t_star,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn series_round_trip() {
        let (a, mu) = (0.5, 0.7);
        let [p, n] = series_eval(a, mu, 1e-4, 1.3, -0.4);
        let [p0, n0] = series_invert(a, mu, 1e-4, p, n);
        assert!((p0 - 1.3).abs() < 1e-14 && (n0 + 0.4).abs() < 1e-14);
    }

    #[test]
    fn cosine_solves_the_weighted_problem() {
        for &a in &[-0.5, 0.0, 0.5] {
            let prof = integrate_flux_system(a, 1.0 + a, 0.0, PI, [1.0, 0.0], 1e-12).unwrap();
            for (i, &t) in prof.theta.iter().enumerate() {
                // sin(π) is not 0 in floating point; measure from the nearer end.
                let sin = if t > FRAC_PI_2 { (PI - t).sin() } else { t.sin() };
                assert!((prof.phi[i] - t.cos()).abs() < 1e-9, "a={a} θ={t}");
                assert!((prof.w[i] + sin.powf(1.0 + a)).abs() < 1e-9, "a={a} θ={t}");
            }
            let [p1, w1] = prof.eval(2.0);
            assert!((p1 - 2f64.cos()).abs() < 1e-9 && (w1 + 2f64.sin().powf(1.0 + a)).abs() < 1e-9);
        }
    }

    #[test]
    fn classical_cosine_and_constants() {
        let prof = integrate_flux_system(0.0, 1.0, 0.0, 1.0, [1.0, 0.0], 1e-12).unwrap();
        let n = prof.len() - 1;
        assert!((prof.phi[n] - 1f64.cos()).abs() < 1e-10 && (prof.w[n] + 1f64.sin()).abs() < 1e-10);
        let c = integrate_flux_system(0.5, 0.0, 0.0, PI, [2.5, 0.0], 1e-12).unwrap();
        assert!(c.phi.iter().all(|v| (v - 2.5).abs() < 1e-12));
        assert!(c.w.iter().all(|v| v.abs() < 1e-12));
    }

    #[test]
    fn backward_integration_recovers_endpoint_data() {
        let a = 0.5;
        let prof = integrate_flux_system(a, 1.0 + a, FRAC_PI_2, 0.0, [0.0, -1.0], 1e-12).unwrap();
        assert!((prof.phi[0] - 1.0).abs() < 1e-9, "{}", prof.phi[0]);
        assert!(prof.w[0].abs() < 1e-9);
        let prof = integrate_flux_system(a, 1.0 + a, FRAC_PI_2, PI, [0.0, -1.0], 1e-12).unwrap();
        let n = prof.len() - 1;
        assert!((prof.phi[n] + 1.0).abs() < 1e-9 && prof.w[n].abs() < 1e-9);
    }

    #[test]
    fn mixed_eigenvalues() {
        for &a in &[-0.5, 0.0, 0.5] {
            let e = eigen_mixed(FRAC_PI_2, a, 1e-12).unwrap();
            assert!((e.lambda_hat - (1.0 + a)).abs() < 1e-8, "a={a}: {}", e.lambda_hat);
            assert!((e.k1 - 1.0).abs() < 1e-8);
        }
        let e = eigen_mixed(1.0, 0.0, 1e-12).unwrap();
        assert!((e.lambda_hat - (PI / 2.0).powi(2)).abs() < 1e-8);
    }

    #[test]
    fn dirichlet_eigenvalues_classical() {
        for &t in &[0.2, 0.5, 1.0] {
            let e = eigen_dirichlet(t, 0.0, 1e-12).unwrap();
            let exact = (PI / (PI - 2.0 * t)).powi(2);
            assert!((e.lambda_hat - exact).abs() < 1e-8, "T={t}");
            assert!((e.k1 * (e.k1 + 0.0) - e.lambda_hat).abs() < 1e-12);
        }
    }

    #[test]
    fn degree_two_cone() {
        for &a in &[-0.5, 0.0, 0.5] {
            let e = eigen_dirichlet(degree_two_opening(a), a, 1e-12).unwrap();
            assert!((e.k1 - 2.0).abs() < 1e-8, "a={a}: {}", e.k1);
        }
    }

    #[test]
    fn exponents_are_monotone_in_opening() {
        let a = 0.3;
        let ts = [0.1, 0.3, 0.6, 0.9, 1.2];
        let d = eigen_curve(true, a, &ts, 1e-10).unwrap();
        assert!(d.windows(2).all(|w| w[1].k1 > w[0].k1));
        let m = eigen_curve(false, a, &ts, 1e-10).unwrap();
        assert!(m.windows(2).all(|w| w[1].lambda_hat < w[0].lambda_hat));
    }

    #[test]
    fn tstar_inverts_classical_formula() {
        let k = 1.4;
        let t = find_Tstar(0.0, k, 1e-10).unwrap();
        assert!((t - FRAC_PI_2 * (1.0 - 1.0 / k)).abs() < 1e-9);
        assert!(find_Tstar(0.5, 0.5, 1e-8).is_err());
        assert!(find_Tstar(0.5, 2.5, 1e-8).is_err());
    }

    #[test]
    fn amplitude_examples() {
        assert!((nonlinear_amplitude(1.0, 2.0, -4.0).unwrap() - 0.5).abs() < 1e-15);
        assert!((nonlinear_amplitude(1.7, 3.0, -3.0).unwrap() - 1.0).abs() < 1e-15);
        assert!((nonlinear_amplitude(1.5, 1.0, -2.0).unwrap() - 0.25).abs() < 1e-15);
        assert!(nonlinear_amplitude(1.5, 1.0, 0.1).is_err());
    }

    #[test]
    fn linear_shooting_matches_closed_form() {
        let mu: f64 = 0.49;
        let r = mu.sqrt();
        let w0 = mixed_shooting_flux(0.0, mu, FRAC_PI_2, 1e-13).unwrap();
        let exact = -r / (r * FRAC_PI_2).tan();
        assert!((w0 - exact).abs() < 1e-10);
    }

    #[test]
    fn antisymmetric_profile() {
        let p = Parameters::new(0.25, 1.0, 1.0, 1.0).unwrap();
        let prof = build_antisymmetric(&p, 1e-10).unwrap();
        assert_eq!(prof.symmetry, Symmetry::Antisymmetric);
        let [a1, w0, ..] = prof.endpoint_data().unwrap();
        assert!(a1 > 0.0);
        let d = prof.endpoint_defects(&p).unwrap();
        assert!(d[0] < 1e-10 && d[1] < 1e-10, "{d:?} w0 = {w0}");
        assert!(prof.ode_residual() < 1e-8, "{}", prof.ode_residual());
        let n = prof.len();
        for i in 0..n {
            assert_eq!(prof.phi[i], -prof.phi[n - 1 - i]);
            assert_eq!(prof.w[i], prof.w[n - 1 - i]);
            assert!((prof.theta[i] - (PI - prof.theta[n - 1 - i])).abs() < 1e-15);
        }
        for &t in &[0.1, 0.7, 1.3] {
            let [p1, w1] = prof.eval(t);
            let [p2, w2] = prof.eval(PI - t);
            assert!((p1 + p2).abs() < 1e-13 && (w1 - w2).abs() < 1e-13);
        }
        assert!(build_antisymmetric(&Parameters::new(0.25, 1.0, 1.0, 2.0).unwrap(), 1e-10).is_err());
        assert!(build_antisymmetric(&Parameters::new(0.4, 1.5, 1.0, 1.0).unwrap(), 1e-10).is_err());
    }

    #[test]
    fn symmetric_profile() {
        let p = Parameters::new(0.25, 1.3, 1.0, 1.0).unwrap();
        let (prof, t_star) = build_symmetric(&p, 1e-10).unwrap();
        let k = eigen_dirichlet(t_star, p.a(), 1e-13).unwrap().k1;
        assert!((k - p.exponents().k_q).abs() < 1e-6);
        assert!(prof.eval(0.5 * t_star)[0] > 0.0);
        assert!(prof.eval(FRAC_PI_2)[0] < 0.0);
        assert!(prof.eval(PI - 0.5 * t_star)[0] > 0.0);
        let d = prof.endpoint_defects(&p).unwrap();
        assert!(d[0] < 1e-10 && d[1] < 1e-10);
        assert!(prof.ode_residual() < 1e-8);
        let n = prof.len();
        for i in 0..n {
            assert_eq!(prof.phi[i], prof.phi[n - 1 - i]);
            assert_eq!(prof.w[i], -prof.w[n - 1 - i]);
        }
        for &t in &[0.05, 0.4, 1.0] {
            assert!((prof.eval(t)[0] - prof.eval(PI - t)[0]).abs() < 1e-13);
        }
        // q = 1 puts k_q on the floor of the exponent window.
        assert!(matches!(
            build_symmetric(&Parameters::new(0.25, 1.0, 1.0, 1.0).unwrap(), 1e-10),
            Err(Error::OutOfRegime(_))
        ));
    }

    #[test]
    fn fornberg_weights_are_exact_on_polynomials() {
        let xs = [0.0, 0.1, 0.25, 0.3, 0.5, 0.55, 0.7];
        let w = fornberg_first_derivative(0.3, &xs);
        let d: f64 = w.iter().zip(&xs).map(|(c, x)| c * x.powi(4)).sum();
        assert!((d - 4.0 * 0.3f64.powi(3)).abs() < 1e-10);
    }
}
