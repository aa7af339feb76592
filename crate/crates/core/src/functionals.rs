//! Radial functionals about a trace point `X0 = (x0, 0)`: boundary mass `H`,
//! energies `E_t`, frequencies `N_t`, Weiss quantities `W_{k,t}` and the
//! Monneau distance to a homogeneous comparison profile.
//!
//! Normalizations are those of the planar problem (`n = 1`):
//! `H = r^-(1+a) ∫ y^a u² dσ = ∫_0^π sin^a θ u² dθ` and
//! `E_t = r^-a [∫_{B_r^+} y^a |∇u|² - (t/q) ∫_{x0-r}^{x0+r} F(u)]`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{FieldSource, QuadratureOptions};
use crate::params::{critical_constant, Parameters};
use crate::quadrature::HalfCircleRule;

/// Below this boundary mass a frequency is not computed and the point is
/// flagged: nontrivial solutions cannot vanish on a half circle.
pub const DEGENERATE_H_FLOOR: f64 = 1e-24;

/// Cached angular rule and resolution settings.
#[derive(Debug, Clone)]
pub struct FunctionalContext {
    rule: HalfCircleRule,
    quad: QuadratureOptions,
}

impl FunctionalContext {
    pub fn new(a: f64, quad: QuadratureOptions) -> Self {
        FunctionalContext {
            rule: HalfCircleRule::new(a, quad.theta_panels.max(1)),
            quad,
        }
    }

    pub fn for_field(f: &(impl FieldSource + ?Sized)) -> Self {
        Self::new(f.weight_exponent(), QuadratureOptions::default())
    }

    pub fn rule(&self) -> &HalfCircleRule {
        &self.rule
    }

    pub fn quad(&self) -> &QuadratureOptions {
        &self.quad
    }

    fn check(&self, f: &(impl FieldSource + ?Sized), x0: f64, r: f64) -> Result<()> {
        if (f.weight_exponent() - self.rule.a).abs() > 1e-12 {
            return Err(Error::WeightMismatch {
                field: f.weight_exponent(),
                params: self.rule.a,
            });
        }
        if !(r > 0.0 && r.is_finite()) {
            return Err(Error::InvalidParameter {
                name: "r",
                value: r,
                reason: "radius must be positive",
            });
        }
        if let Some(max) = f.max_radius(x0) {
            if r > max {
                return Err(Error::RadiusOutOfRange {
                    x0,
                    radius: r,
                    max_radius: max,
                });
            }
        }
        Ok(())
    }
}

/// Samples of `u` and `∂_r u` on the half circle of radius `r` about `(x0, 0)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SphereSamples {
    pub x0: f64,
    pub r: f64,
    pub theta: Vec<f64>,
    pub u: Vec<f64>,
    pub du_dr: Vec<f64>,
    /// `∫ sin^a θ` over each angular panel.
    pub weights: Vec<f64>,
}

impl SphereSamples {
    pub fn collect(f: &(impl FieldSource + ?Sized), x0: f64, r: f64, ctx: &FunctionalContext) -> Result<Self> {
        ctx.check(f, x0, r)?;
        let rule = ctx.rule();
        let mut u = Vec::with_capacity(rule.len());
        let mut du_dr = Vec::with_capacity(rule.len());
        for &th in &rule.theta {
            let (c, s) = (th.cos(), th.sin());
            let (x, y) = (x0 + r * c, r * s);
            u.push(f.value(x, y));
            let [gx, gy] = f.gradient(x, y);
            du_dr.push(gx * c + gy * s);
        }
        Ok(SphereSamples {
            x0,
            r,
            theta: rule.theta.clone(),
            u,
            du_dr,
            weights: rule.weighted.clone(),
        })
    }

    /// `∫ sin^a θ u² dθ`.
    pub fn mass(&self) -> f64 {
        self.weights.iter().zip(&self.u).map(|(w, u)| w * u * u).sum()
    }
}

/// `F(t) = λ₊ t₊^q + λ₋ t₋^q`.
#[allow(non_snake_case)]
pub fn F_value(t: f64, p: &Parameters) -> f64 {
    p.potential(t)
}

#[allow(non_snake_case)]
pub fn H_val(f: &(impl FieldSource + ?Sized), x0: f64, r: f64, ctx: &FunctionalContext) -> Result<f64> {
    Ok(SphereSamples::collect(f, x0, r, ctx)?.mass())
}

/// `∫_{x0-r}^{x0+r} F(u(x, 0)) dx`.
pub fn trace_potential(
    f: &(impl FieldSource + ?Sized),
    x0: f64,
    r: f64,
    p: &Parameters,
    ctx: &FunctionalContext,
) -> f64 {
    if p.lambda_plus() == 0.0 && p.lambda_minus() == 0.0 {
        return 0.0;
    }
    f.trace_integral(x0, r, &|u| p.potential(u), ctx.quad())
}

/// `∫_{B_r^+} y^a |∇u|²`.
pub fn bulk_energy(f: &(impl FieldSource + ?Sized), x0: f64, r: f64, ctx: &FunctionalContext) -> Result<f64> {
    ctx.check(f, x0, r)?;
    Ok(f.bulk_energy(x0, r, ctx.rule(), ctx.quad()))
}

fn check_dimension(p: &Parameters) -> Result<()> {
    if p.n() != 1 {
        return Err(Error::InvalidParameter {
            name: "n",
            value: p.n() as f64,
            reason: "fields live on the half plane, so only n = 1 is evaluated",
        });
    }
    Ok(())
}

#[allow(non_snake_case)]
pub fn E_t_val(
    f: &(impl FieldSource + ?Sized),
    x0: f64,
    r: f64,
    t: f64,
    p: &Parameters,
    ctx: &FunctionalContext,
) -> Result<f64> {
    check_dimension(p)?;
    let bulk = bulk_energy(f, x0, r, ctx)?;
    let pot = trace_potential(f, x0, r, p, ctx);
    Ok(energy_from_parts(bulk, pot, r, t, p))
}

fn energy_from_parts(bulk: f64, trace_f: f64, r: f64, t: f64, p: &Parameters) -> f64 {
    r.powf(-p.a()) * (bulk - t / p.q() * trace_f)
}

#[allow(non_snake_case)]
pub fn N_t_val(
    f: &(impl FieldSource + ?Sized),
    x0: f64,
    r: f64,
    t: f64,
    p: &Parameters,
    ctx: &FunctionalContext,
) -> Result<f64> {
    let h = H_val(f, x0, r, ctx)?;
    if h <= DEGENERATE_H_FLOOR {
        return Err(Error::DegenerateMass { x0, radius: r, h });
    }
    Ok(E_t_val(f, x0, r, t, p, ctx)? / h)
}

/// `W_{k,t} = (E_t - k H) / r^{2k}`.
#[allow(non_snake_case)]
pub fn W_val(
    f: &(impl FieldSource + ?Sized),
    x0: f64,
    r: f64,
    k: f64,
    t: f64,
    p: &Parameters,
    ctx: &FunctionalContext,
) -> Result<f64> {
    let h = H_val(f, x0, r, ctx)?;
    let e = E_t_val(f, x0, r, t, p, ctx)?;
    Ok((e - k * h) / r.powf(2.0 * k))
}

/// `r^-2k ∫ sin^a θ (u - poly(X - X0))² dθ`; `poly` takes coordinates relative to `X0`.
pub fn monneau_val(
    f: &(impl FieldSource + ?Sized),
    x0: f64,
    poly: &(dyn Fn(f64, f64) -> f64 + Sync),
    r: f64,
    k: f64,
    ctx: &FunctionalContext,
) -> Result<f64> {
    let s = SphereSamples::collect(f, x0, r, ctx)?;
    let m: f64 = s
        .theta
        .iter()
        .zip(&s.u)
        .zip(&s.weights)
        .map(|((&th, &u), &w)| {
            let d = u - poly(r * th.cos(), r * th.sin());
            w * d * d
        })
        .sum();
    Ok(m / r.powf(2.0 * k))
}

/// A `k`-homogeneous comparison profile for the Monneau column.
pub struct MonneauSpec<'a> {
    pub poly: &'a (dyn Fn(f64, f64) -> f64 + Sync),
    pub k: f64,
}

/// What a curve should tabulate besides the always-present columns.
#[derive(Default)]
pub struct CurveSpec<'a> {
    /// Extra `t` values for `E_t` columns.
    pub ts: Vec<f64>,
    /// `(k, t)` pairs for `W_{k,t}` columns.
    pub weiss: Vec<(f64, f64)>,
    pub monneau: Option<MonneauSpec<'a>>,
}

/// One radius of a [`FunctionalCurve`]. `error` is set, and the numeric
/// columns are NaN, when the radius could not be evaluated.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurveRow {
    pub r: f64,
    pub h: f64,
    pub bulk: f64,
    pub trace_f: f64,
    pub e_q: f64,
    pub e_2: f64,
    pub e_t: Vec<f64>,
    pub n_q: Option<f64>,
    pub n_2: Option<f64>,
    pub w: Vec<f64>,
    pub monneau: Option<f64>,
    pub dhdr: Option<f64>,
    pub defect: Option<f64>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FunctionalCurve {
    pub x0: f64,
    pub q: f64,
    pub a: f64,
    pub ts: Vec<f64>,
    pub weiss: Vec<(f64, f64)>,
    pub monneau_k: Option<f64>,
    pub rows: Vec<CurveRow>,
}

/// Tabulates the functionals at each radius (evaluated in parallel, rows in
/// input order) and the identity defect `|dH/dr - 2 E_q / r|`.
pub fn curve(
    f: &(impl FieldSource + ?Sized),
    x0: f64,
    radii: &[f64],
    spec: &CurveSpec<'_>,
    p: &Parameters,
    ctx: &FunctionalContext,
) -> Result<FunctionalCurve> {
    check_dimension(p)?;
    if radii.is_empty() || radii.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::Invalid("radii must be non-empty and strictly increasing".into()));
    }
    let mut rows: Vec<CurveRow> = radii
        .par_iter()
        .map(|&r| match curve_row(f, x0, r, spec, p, ctx) {
            Ok(row) => row,
            Err(e) => failed_row(r, spec, e),
        })
        .collect();

    for i in 1..rows.len().saturating_sub(1) {
        let (r0, r1, r2) = (rows[i - 1].r, rows[i].r, rows[i + 1].r);
        let (h0, h1, h2) = (rows[i - 1].h, rows[i].h, rows[i + 1].h);
        let (d1, d2) = (r1 - r0, r2 - r1);
        let dh = -d2 / (d1 * (d1 + d2)) * h0 + (d2 - d1) / (d1 * d2) * h1 + d1 / (d2 * (d1 + d2)) * h2;
        if dh.is_finite() && rows[i].error.is_none() {
            rows[i].dhdr = Some(dh);
            rows[i].defect = Some((dh - 2.0 * rows[i].e_q / r1).abs());
        }
    }
    Ok(FunctionalCurve {
        x0,
        q: p.q(),
        a: p.a(),
        ts: spec.ts.clone(),
        weiss: spec.weiss.clone(),
        monneau_k: spec.monneau.as_ref().map(|m| m.k),
        rows,
    })
}

fn curve_row(
    f: &(impl FieldSource + ?Sized),
    x0: f64,
    r: f64,
    spec: &CurveSpec<'_>,
    p: &Parameters,
    ctx: &FunctionalContext,
) -> Result<CurveRow> {
    let samples = SphereSamples::collect(f, x0, r, ctx)?;
    let h = samples.mass();
    let bulk = f.bulk_energy(x0, r, ctx.rule(), ctx.quad());
    let trace_f = trace_potential(f, x0, r, p, ctx);
    let e = |t: f64| energy_from_parts(bulk, trace_f, r, t, p);
    let (e_q, e_2) = (e(p.q()), e(2.0));
    let live = h > DEGENERATE_H_FLOOR;
    let monneau = spec
        .monneau
        .as_ref()
        .map(|m| monneau_val(f, x0, m.poly, r, m.k, ctx))
        .transpose()?;
    Ok(CurveRow {
        r,
        h,
        bulk,
        trace_f,
        e_q,
        e_2,
        e_t: spec.ts.iter().map(|&t| e(t)).collect(),
        n_q: live.then(|| e_q / h),
        n_2: live.then(|| e_2 / h),
        w: spec
            .weiss
            .iter()
            .map(|&(k, t)| (e(t) - k * h) / r.powf(2.0 * k))
            .collect(),
        monneau,
        dhdr: None,
        defect: None,
        error: None,
    })
}

fn failed_row(r: f64, spec: &CurveSpec<'_>, e: Error) -> CurveRow {
    CurveRow {
        r,
        h: f64::NAN,
        bulk: f64::NAN,
        trace_f: f64::NAN,
        e_q: f64::NAN,
        e_2: f64::NAN,
        e_t: vec![f64::NAN; spec.ts.len()],
        n_q: None,
        n_2: None,
        w: vec![f64::NAN; spec.weiss.len()],
        monneau: spec.monneau.as_ref().map(|_| f64::NAN),
        dhdr: None,
        defect: None,
        error: Some(e.to_string()),
    }
}

impl FunctionalCurve {
    pub fn radii(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.r).collect()
    }

    /// Defect divided by `max(|E_q| / r, floor)` at rows where it is defined.
    pub fn relative_defects(&self, floor: f64) -> Vec<(f64, f64)> {
        self.rows
            .iter()
            .filter_map(|row| row.defect.map(|d| (row.r, d / (row.e_q.abs() / row.r).max(floor))))
            .collect()
    }

    /// CSV with a fixed leading column set, then `E_t`, `W` and Monneau columns.
    pub fn to_csv(&self) -> String {
        let mut header = vec!["r".to_string(), "H".into(), "E_q".into(), "E_2".into()];
        header.extend(self.ts.iter().map(|t| format!("E_t{t}")));
        header.push("N_q".into());
        header.push("N_2".into());
        header.extend(self.weiss.iter().map(|(k, t)| format!("W_k{k}_t{t}")));
        if self.monneau_k.is_some() {
            header.push("M".into());
        }
        header.extend(["dHdr".to_string(), "defect".into(), "error".into()]);

        let num = |v: f64| format!("{v:.12e}");
        let opt = |v: Option<f64>| v.map(num).unwrap_or_default();
        let mut out = header.join(",");
        out.push('\n');
        for row in &self.rows {
            let mut cells = vec![num(row.r), num(row.h), num(row.e_q), num(row.e_2)];
            cells.extend(row.e_t.iter().map(|&v| num(v)));
            cells.push(opt(row.n_q));
            cells.push(opt(row.n_2));
            cells.extend(row.w.iter().map(|&v| num(v)));
            if self.monneau_k.is_some() {
                cells.push(opt(row.monneau));
            }
            cells.push(opt(row.dhdr));
            cells.push(opt(row.defect));
            cells.push(row.error.clone().unwrap_or_default().replace(',', ";"));
            out.push_str(&cells.join(","));
            out.push('\n');
        }
        out
    }
}

/// Quantity whose monotonicity is checked along a curve.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Monotone {
    /// `W_{k,2}(r)`, non-decreasing for `k >= k_q`.
    WeissK2 { k: f64 },
    /// `exp(C̃ r^α) (N_q(r) + 1)`.
    AlmgrenPerturbed { c_tilde: f64, alpha: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MonotonicityReport {
    pub check: Monotone,
    pub values: Vec<f64>,
    /// Largest drop between consecutive radii (zero if none).
    pub max_decrease: f64,
    /// Max absolute value of the monitored quantity.
    pub scale: f64,
    pub tolerance: f64,
    pub pass: bool,
    /// Longest run of consecutive radii with no drop above tolerance.
    pub monotone_window: Option<(f64, f64)>,
}

/// Monitors the chosen quantity; `tolerance` is absolute.
pub fn check_monotonicity(curve: &FunctionalCurve, check: Monotone, tolerance: f64) -> Result<MonotonicityReport> {
    if curve.rows.len() < 3 {
        return Err(Error::Invalid("monotonicity needs at least three radii".into()));
    }
    let values: Vec<f64> = curve
        .rows
        .iter()
        .map(|row| match check {
            Monotone::WeissK2 { k } => (row.e_2 - k * row.h) / row.r.powf(2.0 * k),
            Monotone::AlmgrenPerturbed { c_tilde, alpha } => {
                (c_tilde * row.r.powf(alpha)).exp() * (row.e_q / row.h + 1.0)
            }
        })
        .collect();
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::Invalid("curve contains undefined rows".into()));
    }
    let mut max_decrease = 0.0f64;
    let (mut best, mut start) = ((0, 0), 0);
    for i in 1..values.len() {
        let drop = values[i - 1] - values[i];
        max_decrease = max_decrease.max(drop);
        if drop > tolerance {
            start = i;
        } else if i - start > best.1 - best.0 {
            best = (start, i);
        }
    }
    let scale = values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    Ok(MonotonicityReport {
        check,
        monotone_window: (best.1 > best.0).then(|| (curve.rows[best.0].r, curve.rows[best.1].r)),
        values,
        max_decrease,
        scale,
        tolerance,
        pass: max_decrease <= tolerance,
    })
}

/// Diagnostic constants for the perturbed Almgren check.
///
/// Along the curve `d/dr log(N_q + 1) >= -g(r)` with
/// `g = C_{1,q} r^-(1+a) ∫F / (q (E_q + H))`; taking `α = δ/2` and
/// `C̃ = max g(r) r^(1-α) / α` makes `C̃ r^α + log(N_q + 1)` non-decreasing
/// wherever that lower bound holds.
pub fn almgren_recipe_constants(curve: &FunctionalCurve, p: &Parameters, delta: f64) -> Result<(f64, f64)> {
    if !(delta > 0.0) {
        return Err(Error::InvalidParameter {
            name: "delta",
            value: delta,
            reason: "order gap must be positive",
        });
    }
    let alpha = 0.5 * delta;
    let c = critical_constant(1, p.q(), p.s())?;
    let mut c_tilde = 0.0f64;
    for row in &curve.rows {
        let denom = p.q() * (row.e_q + row.h);
        if !(denom > 0.0) {
            return Err(Error::Invalid(format!("E_q + H <= 0 at r = {}", row.r)));
        }
        let g = c * row.r.powf(-(1.0 + p.a())) * row.trace_f / denom;
        c_tilde = c_tilde.max(g * row.r.powf(1.0 - alpha) / alpha);
    }
    Ok((c_tilde, alpha))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::AnalyticField;
    use crate::quadrature::sin_power_total;
    use std::f64::consts::PI;

    fn linear(a: f64) -> AnalyticField<impl Fn(f64, f64) -> f64 + Sync, impl Fn(f64, f64) -> [f64; 2] + Sync> {
        AnalyticField::new(a, |x, _| x, |_, _| [1.0, 0.0])
    }

    fn p2(a: f64) -> AnalyticField<impl Fn(f64, f64) -> f64 + Sync, impl Fn(f64, f64) -> [f64; 2] + Sync> {
        AnalyticField::new(
            a,
            move |x, y| x * x - y * y / (1.0 + a),
            move |x, y| [2.0 * x, -2.0 * y / (1.0 + a)],
        )
    }

    fn harmonic(s: f64) -> Parameters {
        Parameters::new(s, 1.5, 0.0, 0.0).unwrap()
    }

    #[test]
    fn potential_values() {
        let p = Parameters::new(0.25, 1.5, 2.0, 3.0).unwrap();
        assert_eq!(F_value(0.0, &p), 0.0);
        assert!((F_value(1.0, &p) - 2.0).abs() < 1e-15);
        let p = Parameters::new(0.25, 1.0, 2.0, 3.0).unwrap();
        assert!((F_value(-1.0, &p) - 3.0).abs() < 1e-15);
    }

    #[test]
    fn mass_of_constants() {
        for &(a, expect) in &[(0.0, PI), (0.5, 2.396_280_469_471_184)] {
            let c = AnalyticField::new(a, |_, _| 1.5, |_, _| [0.0, 0.0]);
            let ctx = FunctionalContext::for_field(&c);
            let h = H_val(&c, 0.0, 0.7, &ctx).unwrap();
            assert!((h - 2.25 * expect).abs() < 1e-11, "{h}");
        }
    }

    #[test]
    fn mass_of_linear_scales_with_r_squared() {
        let f = linear(0.5);
        let ctx = FunctionalContext::for_field(&f);
        let h1 = H_val(&f, 0.0, 1.0, &ctx).unwrap();
        let h2 = H_val(&f, 0.0, 0.25, &ctx).unwrap();
        assert!((h1 / h2 - 16.0).abs() < 1e-10);
    }

    #[test]
    fn energy_of_linear_on_unit_half_disk() {
        let f = linear(0.0);
        let ctx = FunctionalContext::for_field(&f);
        let e = E_t_val(&f, 0.0, 1.0, 1.5, &harmonic(0.5), &ctx).unwrap();
        assert!((e - PI / 2.0).abs() < 1e-10);
    }

    #[test]
    fn frequencies_of_homogeneous_polynomials() {
        for &a in &[-0.5, 0.0, 0.5] {
            let p = harmonic((1.0 - a) / 2.0);
            let f1 = linear(a);
            let f2 = p2(a);
            let ctx = FunctionalContext::for_field(&f1);
            for &r in &[0.1, 0.5, 1.0] {
                let n1 = N_t_val(&f1, 0.0, r, 2.0, &p, &ctx).unwrap();
                let n2 = N_t_val(&f2, 0.0, r, 2.0, &p, &ctx).unwrap();
                assert!((n1 - 1.0).abs() < 1e-6, "a={a} r={r} {n1}");
                assert!((n2 - 2.0).abs() < 1e-6, "a={a} r={r} {n2}");
                assert!(W_val(&f2, 0.0, r, 2.0, 2.0, &p, &ctx).unwrap().abs() < 1e-6);
            }
        }
    }

    #[test]
    fn mass_is_quadratic_in_amplitude() {
        let f = p2(0.5);
        let g = AnalyticField::new(0.5, |x, y| -3.0 * (x * x - y * y / 1.5), |_, _| [0.0, 0.0]);
        let ctx = FunctionalContext::for_field(&f);
        let h = H_val(&f, 0.1, 0.6, &ctx).unwrap();
        let hg = H_val(&g, 0.1, 0.6, &ctx).unwrap();
        assert!((hg - 9.0 * h).abs() <= 1e-13 * hg);
    }

    #[test]
    fn monneau_columns() {
        let a = 0.5;
        let f = AnalyticField::new(
            a,
            move |x, y| x + x * x - y * y / (1.0 + a),
            move |x, y| [1.0 + 2.0 * x, -2.0 * y / (1.0 + a)],
        );
        let ctx = FunctionalContext::for_field(&f);
        let poly = |x: f64, _y: f64| x;
        assert_eq!(monneau_val(&linear(a), 0.0, &poly, 0.5, 1.0, &ctx).unwrap(), 0.0);
        let m1 = monneau_val(&f, 0.0, &poly, 0.1, 1.0, &ctx).unwrap();
        let m2 = monneau_val(&f, 0.0, &poly, 0.05, 1.0, &ctx).unwrap();
        assert!(((m1 / m2).log2() - 2.0).abs() < 1e-9);
        let zero = |_: f64, _: f64| 0.0;
        let h = H_val(&linear(a), 0.0, 0.3, &ctx).unwrap();
        let m = monneau_val(&linear(a), 0.0, &zero, 0.3, 1.0, &ctx).unwrap();
        assert!((m - h / 0.09).abs() < 1e-12);
    }

    #[test]
    fn identity_defect_for_linear_field() {
        let f = linear(0.5);
        let p = harmonic(0.25);
        let quad = QuadratureOptions {
            theta_panels: 512,
            ..Default::default()
        };
        let ctx = FunctionalContext::new(0.5, quad);
        let radii: Vec<f64> = (0..=10).map(|i| 0.3 + 0.01 * i as f64).collect();
        let c = curve(&f, 0.0, &radii, &CurveSpec::default(), &p, &ctx).unwrap();
        assert!(c.rows[0].dhdr.is_none() && c.rows[10].dhdr.is_none());
        for row in &c.rows[1..10] {
            assert!(row.defect.unwrap() < 1e-6, "{row:?}");
        }
        let single = curve(&f, 0.0, &[0.5], &CurveSpec::default(), &p, &ctx).unwrap();
        assert!(single.rows[0].dhdr.is_none());
    }

    #[test]
    fn weiss_of_subcritical_power_increases() {
        let f = linear(0.5);
        let p = harmonic(0.25);
        let ctx = FunctionalContext::for_field(&f);
        let radii: Vec<f64> = (1..=8).map(|i| 0.1 * i as f64).collect();
        let c = curve(&f, 0.0, &radii, &CurveSpec::default(), &p, &ctx).unwrap();
        let rep = check_monotonicity(&c, Monotone::WeissK2 { k: 0.4 }, 0.0).unwrap();
        assert!(rep.pass);
        assert!(rep.values.windows(2).all(|w| w[1] > w[0]));
        assert_eq!(rep.monotone_window, Some((0.1, 0.8)));
    }

    #[test]
    fn drops_are_located() {
        let f = linear(0.5);
        let p = harmonic(0.25);
        let ctx = FunctionalContext::for_field(&f);
        let radii: Vec<f64> = (1..=6).map(|i| 0.1 * i as f64).collect();
        let mut c = curve(&f, 0.0, &radii, &CurveSpec::default(), &p, &ctx).unwrap();
        c.rows[2].e_2 -= 1.0;
        let rep = check_monotonicity(&c, Monotone::WeissK2 { k: 0.0 }, 1e-9).unwrap();
        assert!(!rep.pass);
        assert!(rep.max_decrease > 0.9);
        assert_eq!(rep.monotone_window, Some((radii[2], radii[5])));
    }

    #[test]
    fn out_of_range_rows_are_flagged() {
        let mesh = std::sync::Arc::new(crate::mesh::Mesh::with_default_grading(1.0, 1.0, 16, 16, 0.0).unwrap());
        let field = crate::field::Field::sample(mesh, &linear(0.0));
        let p = harmonic(0.5);
        let ctx = FunctionalContext::for_field(&field);
        assert!(matches!(
            H_val(&field, 0.0, 0.99, &ctx),
            Err(Error::RadiusOutOfRange { .. })
        ));
        let c = curve(&field, 0.0, &[0.3, 0.5, 0.99], &CurveSpec::default(), &p, &ctx).unwrap();
        assert!(c.rows[2].error.is_some());
        assert!(c.rows[1].dhdr.is_none());
        assert!(c.to_csv().lines().count() == 4);
    }

    #[test]
    fn degenerate_mass_is_reported() {
        let z = AnalyticField::new(0.0, |_, _| 0.0, |_, _| [0.0, 0.0]);
        let ctx = FunctionalContext::for_field(&z);
        assert!(matches!(
            N_t_val(&z, 0.0, 0.5, 2.0, &harmonic(0.5), &ctx),
            Err(Error::DegenerateMass { .. })
        ));
    }

    #[test]
    fn sin_total_matches_rule() {
        let ctx = FunctionalContext::new(-0.5, QuadratureOptions::default());
        let s: f64 = ctx.rule().weighted.iter().sum();
        assert!((s - sin_power_total(-0.5)).abs() < 1e-12);
    }
}
