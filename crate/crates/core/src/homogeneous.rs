//! Homogeneous fields `u = r^k φ(θ)` built from angular profiles, and the
//! even-in-`y` `L_a`-harmonic polynomials of each integer degree.

use std::f64::consts::PI;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::angular::AngularProfile;
use crate::error::{Error, Result};
use crate::field::{polar_bulk_energy, FieldSource, QuadratureOptions};
use crate::quadrature::HalfCircleRule;

/// Polar angle in `[0, π]` of a point with `y >= 0`.
fn polar_angle(x: f64, y: f64) -> f64 {
    if y <= 0.0 {
        if x >= 0.0 {
            0.0
        } else {
            PI
        }
    } else {
        y.atan2(x)
    }
}

/// `u(X) = |X|^k φ(θ)` about the origin.
#[derive(Debug, Clone)]
pub struct HomogeneousField {
    k: f64,
    profile: Arc<AngularProfile>,
}

/// Wraps a profile covering `[0, π]` as a `k`-homogeneous field.
pub fn extend(profile: Arc<AngularProfile>, k: f64) -> Result<HomogeneousField> {
    if !(k > 0.0 && k.is_finite()) {
        return Err(Error::InvalidParameter {
            name: "k",
            value: k,
            reason: "homogeneity degree must be positive",
        });
    }
    if profile.endpoint_data().is_none() {
        return Err(Error::Invalid(
            "profile must cover the closed half circle [0, π]".into(),
        ));
    }
    Ok(HomogeneousField { k, profile })
}

impl HomogeneousField {
    pub fn degree(&self) -> f64 {
        self.k
    }

    pub fn profile(&self) -> &AngularProfile {
        &self.profile
    }

    /// `u(x, 0) = |x|^k φ(0)` for `x > 0` and `|x|^k φ(π)` for `x < 0`.
    pub fn trace(&self, x: f64) -> f64 {
        let [p0, _, p1, _] = self.profile.endpoint_data().expect("checked in extend");
        x.abs().powf(self.k) * if x >= 0.0 { p0 } else { p1 }
    }

    /// `∫_0^π (k² sin^a φ² + sin^-a w²) dθ`: the angular factor of the energy.
    fn angular_energy(&self, rule: &HalfCircleRule) -> f64 {
        let k2 = self.k * self.k;
        rule.theta
            .iter()
            .zip(rule.weighted.iter().zip(&rule.inverse_weighted))
            .map(|(&t, (&w, &iw))| {
                let [phi, flux] = self.profile.eval(t);
                k2 * w * phi * phi + iw * flux * flux
            })
            .sum()
    }
}

impl FieldSource for HomogeneousField {
    fn value(&self, x: f64, y: f64) -> f64 {
        let r = x.hypot(y);
        if r == 0.0 {
            return 0.0;
        }
        r.powf(self.k) * self.profile.eval(polar_angle(x, y))[0]
    }

    fn gradient(&self, x: f64, y: f64) -> [f64; 2] {
        let r = x.hypot(y);
        if r == 0.0 {
            return [0.0, 0.0];
        }
        let t = polar_angle(x, y);
        let [phi, w] = self.profile.eval(t);
        let (c, s) = (x / r, y / r);
        let dphi = w / s.max(f64::MIN_POSITIVE).powf(self.profile.a);
        let rk1 = r.powf(self.k - 1.0);
        let ur = self.k * rk1 * phi;
        let ut = rk1 * dphi;
        [ur * c - ut * s, ur * s + ut * c]
    }

    fn weight_exponent(&self) -> f64 {
        self.profile.a
    }

    /// Separates variables about the origin: `r^(2k+a) / (2k+a)` times the
    /// angular factor. Other centres fall back to polar quadrature.
    fn bulk_energy(&self, x0: f64, r: f64, rule: &HalfCircleRule, quad: &QuadratureOptions) -> f64 {
        if x0 != 0.0 {
            return polar_bulk_energy(self, x0, r, rule, quad);
        }
        let e = 2.0 * self.k + self.profile.a;
        r.powf(e) / e * self.angular_energy(rule)
    }
}

/// `Σ_m c_m x^(k-2m) y^(2m)`, even in `y` and `L_a`-harmonic.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SymmetricPoly {
    pub degree: u32,
    pub a: f64,
    pub coefficients: Vec<f64>,
}

/// The degree-`k` member with leading coefficient 1 on `x^k`.
#[allow(non_snake_case)]
pub fn sB_basis(a: f64, k: u32) -> SymmetricPoly {
    let mut c = vec![1.0];
    let kf = k as f64;
    for m in 0..(k / 2) as usize {
        let mf = m as f64;
        let next = -c[m] * (kf - 2.0 * mf) * (kf - 2.0 * mf - 1.0) / ((2.0 * mf + 2.0) * (2.0 * mf + 1.0 + a));
        c.push(next);
    }
    SymmetricPoly {
        degree: k,
        a,
        coefficients: c,
    }
}

impl SymmetricPoly {
    /// Arbitrary coefficients (not necessarily harmonic), for controls.
    pub fn from_coefficients(a: f64, degree: u32, coefficients: Vec<f64>) -> Self {
        SymmetricPoly {
            degree,
            a,
            coefficients,
        }
    }

    fn terms(&self) -> impl Iterator<Item = (f64, i32, i32)> + '_ {
        let k = self.degree as i32;
        self.coefficients
            .iter()
            .enumerate()
            .map(move |(m, &c)| (c, k - 2 * m as i32, 2 * m as i32))
    }

    /// `y^a Δp + a y^(a-1) ∂_y p` with exact derivatives.
    pub fn la_apply(&self, x: f64, y: f64) -> f64 {
        let (mut lap, mut py) = (0.0, 0.0);
        for (c, i, j) in self.terms() {
            let (fi, fj) = (i as f64, j as f64);
            if i >= 2 {
                lap += c * fi * (fi - 1.0) * x.powi(i - 2) * y.powi(j);
            }
            if j >= 2 {
                lap += c * fj * (fj - 1.0) * x.powi(i) * y.powi(j - 2);
            }
            if j >= 1 {
                py += c * fj * x.powi(i) * y.powi(j - 1);
            }
        }
        y.powf(self.a) * lap + self.a * y.powf(self.a - 1.0) * py
    }
}

impl FieldSource for SymmetricPoly {
    fn value(&self, x: f64, y: f64) -> f64 {
        self.terms().map(|(c, i, j)| c * x.powi(i) * y.powi(j)).sum()
    }

    fn gradient(&self, x: f64, y: f64) -> [f64; 2] {
        self.terms().fold([0.0, 0.0], |[gx, gy], (c, i, j)| {
            let dx = if i >= 1 {
                c * i as f64 * x.powi(i - 1) * y.powi(j)
            } else {
                0.0
            };
            let dy = if j >= 1 {
                c * j as f64 * x.powi(i) * y.powi(j - 1)
            } else {
                0.0
            };
            [gx + dx, gy + dy]
        })
    }

    fn weight_exponent(&self) -> f64 {
        self.a
    }
}

/// Anything `div(y^a ∇·)` can be applied to pointwise.
pub trait LaOperand {
    fn la_apply(&self, x: f64, y: f64) -> f64;
}

impl LaOperand for SymmetricPoly {
    fn la_apply(&self, x: f64, y: f64) -> f64 {
        SymmetricPoly::la_apply(self, x, y)
    }
}

/// Default finite-difference step for [`la_apply_fd`].
pub const LA_FD_STEP: f64 = 1e-3;

/// `y^a Δu + a y^(a-1) ∂_y u` by fourth-order central differences.
pub fn la_apply_fd(f: &(impl FieldSource + ?Sized), x: f64, y: f64, h: f64) -> f64 {
    let u = |dx: f64, dy: f64| f.value(x + dx, y + dy);
    let u0 = u(0.0, 0.0);
    let d2 = |p2: f64, p1: f64, m1: f64, m2: f64| (-p2 + 16.0 * p1 - 30.0 * u0 + 16.0 * m1 - m2) / (12.0 * h * h);
    let uxx = d2(u(2.0 * h, 0.0), u(h, 0.0), u(-h, 0.0), u(-2.0 * h, 0.0));
    let (yp2, yp1, ym1, ym2) = (u(0.0, 2.0 * h), u(0.0, h), u(0.0, -h), u(0.0, -2.0 * h));
    let uyy = d2(yp2, yp1, ym1, ym2);
    let uy = (-yp2 + 8.0 * yp1 - 8.0 * ym1 + ym2) / (12.0 * h);
    let a = f.weight_exponent();
    y.powf(a) * (uxx + uyy) + a * y.powf(a - 1.0) * uy
}

impl LaOperand for HomogeneousField {
    fn la_apply(&self, x: f64, y: f64) -> f64 {
        la_apply_fd(self, x, y, LA_FD_STEP)
    }
}

/// Max of `|div(y^a ∇u)|` over `points` (all with `y > 0`).
pub fn la_residual(f: &(impl LaOperand + ?Sized), points: &[(f64, f64)]) -> f64 {
    points.iter().map(|&(x, y)| f.la_apply(x, y).abs()).fold(0.0, f64::max)
}
