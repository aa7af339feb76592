//! Trace nodal points, vanishing orders, tangent maps, blow-up sequences and
//! the stratum classifier.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{Field, FieldSource};
use crate::functionals::{monneau_val, FunctionalContext, SphereSamples, DEGENERATE_H_FLOOR};
use crate::homogeneous::sB_basis;
use crate::params::Parameters;

/// Relative size below which a trace value counts as zero.
pub const ZERO_TOL: f64 = 1e-10;
/// Default order tolerance for stratum assignment.
pub const ORDER_TOL: f64 = 0.1;
/// Lower end of the default radius window, in mesh widths.
pub const WINDOW_MESH_WIDTHS: f64 = 8.0;
/// Radii sampled across the window.
pub const WINDOW_RADII: usize = 12;
/// Dimensionless trace slope `|u'(x0)| r / rms(u)` below which an order-one
/// point is not counted as regular.
pub const SLOPE_FLOOR: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NodalKind {
    Crossing,
    Tangential,
    IntervalEndpoint,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "stratum", rename_all = "snake_case")]
pub enum Stratum {
    Regular,
    Singular {
        k: u32,
    },
    Sublinear,
    /// Order matches both `k_q` and the integer `m`.
    Tie {
        m: u32,
    },
    Unclassified,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodalPoint {
    pub x0: f64,
    pub kind: NodalKind,
    pub order: Option<f64>,
    /// Larger of the fit standard error and the cross-estimator gap.
    pub uncertainty: Option<f64>,
    pub stratum: Option<Stratum>,
    pub tangent_coefficient: Option<f64>,
    pub trace_slope: Option<f64>,
}

impl NodalPoint {
    fn bare(x0: f64, kind: NodalKind) -> Self {
        NodalPoint {
            x0,
            kind,
            order: None,
            uncertainty: None,
            stratum: None,
            tangent_coefficient: None,
            trace_slope: None,
        }
    }
}

/// Zeros of the interpolated trace on `[x_min + margin, x_max - margin]`.
///
/// Sign changes become crossings, isolated zero nodes without a sign change
/// become tangential zeros, and runs of two or more zero nodes are returned as
/// a pair of interval endpoints.
pub fn trace_nodal_points(f: &Field, margin: f64) -> Vec<NodalPoint> {
    let m = f.mesh();
    let tr = f.trace();
    let (lo, hi) = (m.x[0] + margin, m.x[m.nx()] - margin);
    let idx: Vec<usize> = (0..=m.nx()).filter(|&i| m.x[i] >= lo && m.x[i] <= hi).collect();
    let Some(scale) = idx.iter().map(|&i| tr[i].abs()).reduce(f64::max) else {
        return Vec::new();
    };
    let tol = ZERO_TOL * scale;
    let sign = |i: usize| {
        if tr[i].abs() <= tol {
            0
        } else if tr[i] > 0.0 {
            1
        } else {
            -1
        }
    };

    let mut out = Vec::new();
    let mut k = 0;
    while k < idx.len() {
        let i = idx[k];
        if sign(i) == 0 {
            let mut end = k;
            while end + 1 < idx.len() && sign(idx[end + 1]) == 0 {
                end += 1;
            }
            if end > k {
                out.push(NodalPoint::bare(m.x[i], NodalKind::IntervalEndpoint));
                out.push(NodalPoint::bare(m.x[idx[end]], NodalKind::IntervalEndpoint));
            } else {
                let left = (k > 0).then(|| sign(idx[k - 1]));
                let right = (k + 1 < idx.len()).then(|| sign(idx[k + 1]));
                let kind = match (left, right) {
                    (Some(l), Some(r)) if l * r < 0 => NodalKind::Crossing,
                    _ => NodalKind::Tangential,
                };
                out.push(NodalPoint::bare(m.x[i], kind));
            }
            k = end + 1;
            continue;
        }
        if k + 1 < idx.len() {
            let j = idx[k + 1];
            if sign(i) * sign(j) < 0 {
                let (xa, xb, ua, ub) = (m.x[i], m.x[j], tr[i], tr[j]);
                out.push(NodalPoint::bare(xa + ua / (ua - ub) * (xb - xa), NodalKind::Crossing));
            }
        }
        k += 1;
    }
    out
}

/// True when the scan found a zero interval (a unique-continuation alarm).
pub fn has_zero_interval(points: &[NodalPoint]) -> bool {
    points.iter().any(|p| p.kind == NodalKind::IntervalEndpoint)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlowupDiagnostics {
    pub x0: f64,
    pub radii: Vec<f64>,
    pub h: Vec<f64>,
    /// `(r_lo, r_hi, ½ Δlog H / Δlog r)` per consecutive pair.
    pub slopes: Vec<(f64, f64, f64)>,
    pub n_q: Vec<f64>,
    /// Least-squares slope of `½ log H` against `log r`.
    pub slope_order: f64,
    pub slope_stderr: f64,
    /// Median of `N_q` over the lower half of the window.
    pub frequency_order: Option<f64>,
    pub gap: Option<f64>,
}

/// The `[8h, ½ dist]` window, or `None` when the field has no mesh scale.
pub fn default_window(f: &(impl FieldSource + ?Sized), x0: f64) -> Option<(f64, f64)> {
    let h = f.mesh_scale()?;
    let dist = f.max_radius(x0)?;
    Some((WINDOW_MESH_WIDTHS * h, 0.5 * dist))
}

fn geometric(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    let (a, b) = (lo.ln(), hi.ln());
    (0..n)
        .map(|i| (a + (b - a) * i as f64 / (n - 1) as f64).exp())
        .collect()
}

fn resolve_window(f: &(impl FieldSource + ?Sized), x0: f64, window: Option<(f64, f64)>) -> Result<(f64, f64)> {
    let (lo, hi) = window
        .or_else(|| default_window(f, x0))
        .ok_or_else(|| Error::Invalid("a radius window is required for fields without a mesh".into()))?;
    if !(lo > 0.0 && hi > lo) {
        return Err(Error::Invalid(format!("empty radius window [{lo}, {hi}] at x0 = {x0}")));
    }
    Ok((lo, hi))
}

fn least_squares(x: &[f64], y: &[f64]) -> (f64, f64, f64) {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|v| (v - mx) * (v - mx)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let slope = sxy / sxx;
    let icpt = my - slope * mx;
    let rss: f64 = x.iter().zip(y).map(|(a, b)| (b - icpt - slope * a).powi(2)).sum();
    let stderr = if x.len() > 2 {
        (rss / (n - 2.0) / sxx).sqrt()
    } else {
        0.0
    };
    (slope, icpt, stderr)
}

fn median(mut v: Vec<f64>) -> Option<f64> {
    if v.is_empty() {
        return None;
    }
    v.sort_by(f64::total_cmp);
    let n = v.len();
    Some(if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    })
}

/// Vanishing order at `(x0, 0)` from the growth of `H` across `window`.
pub fn vanishing_order(
    f: &(impl FieldSource + ?Sized),
    x0: f64,
    window: Option<(f64, f64)>,
    p: &Parameters,
    ctx: &FunctionalContext,
) -> Result<(f64, BlowupDiagnostics)> {
    let (lo, hi) = resolve_window(f, x0, window)?;
    let radii = geometric(lo, hi, WINDOW_RADII);
    let samples: Vec<SphereSamples> = radii
        .par_iter()
        .map(|&r| SphereSamples::collect(f, x0, r, ctx))
        .collect::<Result<_>>()?;
    let h: Vec<f64> = samples.iter().map(SphereSamples::mass).collect();
    if let Some((r, &hv)) = radii.iter().zip(&h).find(|(_, &hv)| !(hv > DEGENERATE_H_FLOOR)) {
        return Err(Error::DegenerateMass { x0, radius: *r, h: hv });
    }
    let total: f64 = ctx.rule().weighted.iter().sum();
    let rms = (h[0] / total).sqrt();
    let here = f.value(x0, 0.0);
    if here.abs() > 1e-6 * rms {
        return Err(Error::NotNodal { x0, value: here });
    }

    let lr: Vec<f64> = radii.iter().map(|r| r.ln()).collect();
    let lh: Vec<f64> = h.iter().map(|v| 0.5 * v.ln()).collect();
    let (slope, _, stderr) = least_squares(&lr, &lh);
    let slopes = (1..radii.len())
        .map(|i| (radii[i - 1], radii[i], (lh[i] - lh[i - 1]) / (lr[i] - lr[i - 1])))
        .collect();

    let n_q: Vec<f64> = radii
        .par_iter()
        .zip(&h)
        .map(|(&r, &hv)| {
            let bulk = crate::functionals::bulk_energy(f, x0, r, ctx)?;
            let pot = crate::functionals::trace_potential(f, x0, r, p, ctx);
            Ok(r.powf(-p.a()) * (bulk - pot) / hv)
        })
        .collect::<Result<_>>()?;
    let lower: Vec<f64> = n_q[..radii.len() / 2]
        .iter()
        .copied()
        .filter(|v| v.is_finite())
        .collect();
    let freq = median(lower);

    Ok((
        slope,
        BlowupDiagnostics {
            x0,
            radii,
            h,
            slopes,
            n_q,
            slope_order: slope,
            slope_stderr: stderr,
            frequency_order: freq,
            gap: freq.map(|v| (v - slope).abs()),
        },
    ))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ClassifyOptions {
    pub tol: f64,
    pub window: Option<(f64, f64)>,
}

impl Default for ClassifyOptions {
    fn default() -> Self {
        ClassifyOptions {
            tol: ORDER_TOL,
            window: None,
        }
    }
}

/// Stratum for an estimated order, given `k_q`, `β_q` and whether the trace
/// slope at the point is non-degenerate.
pub fn stratum_for(order: f64, p: &Parameters, tol: f64, slope_nonzero: bool) -> Stratum {
    let d = p.exponents();
    let sub = (order - d.k_q).abs() <= tol;
    let m = order.round();
    let tie_possible = (d.k_q - m).abs() < 2.0 * tol;
    let int = m >= 1.0 && (order - m).abs() <= tol && (m as u32 <= d.beta_q || tie_possible);
    match (sub, int) {
        (true, true) if tie_possible => Stratum::Tie { m: m as u32 },
        (true, _) => Stratum::Sublinear,
        (false, true) if m == 1.0 && slope_nonzero => Stratum::Regular,
        (false, true) => Stratum::Singular { k: m as u32 },
        (false, false) => Stratum::Unclassified,
    }
}

/// Order, stratum and (for integer strata) tangent coefficient at `(x0, 0)`.
pub fn classify(
    f: &(impl FieldSource + ?Sized),
    x0: f64,
    p: &Parameters,
    opts: &ClassifyOptions,
    ctx: &FunctionalContext,
) -> Result<(NodalPoint, BlowupDiagnostics)> {
    let (order, diag) = vanishing_order(f, x0, opts.window, p, ctx)?;
    let r = diag.radii[0];
    let total: f64 = ctx.rule().weighted.iter().sum();
    let rms = (diag.h[0] / total).sqrt();
    let (ul, ur) = (f.value(x0 - 0.5 * r, 0.0), f.value(x0 + 0.5 * r, 0.0));
    let slope = (ur - ul) / r;
    let kind = if ul * ur < 0.0 {
        NodalKind::Crossing
    } else {
        NodalKind::Tangential
    };
    let stratum = stratum_for(order, p, opts.tol, (slope * r / rms).abs() > SLOPE_FLOOR);
    let k = match stratum {
        Stratum::Regular => Some(1),
        Stratum::Singular { k } => Some(k),
        _ => None,
    };
    let coefficient = match k {
        Some(k) => Some(tangent_map(f, x0, k, &diag.radii, ctx)?.coefficient),
        None => None,
    };
    let point = NodalPoint {
        x0,
        kind,
        order: Some(order),
        uncertainty: Some(diag.slope_stderr.max(diag.gap.unwrap_or(0.0))),
        stratum: Some(stratum),
        tangent_coefficient: coefficient,
        trace_slope: Some(slope),
    };
    Ok((point, diag))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TangentFit {
    pub k: u32,
    pub coefficient: f64,
    /// Radius the coefficient was fitted on.
    pub fit_radius: f64,
    /// `(r, M(x0, u, c p_k, r))`.
    pub monneau: Vec<(f64, f64)>,
    /// Log-log slope of the Monneau curve where it is above round-off.
    pub monneau_slope: Option<f64>,
}

/// Fits `c p_k(· - x0)` to `u` on the smallest of `radii` and tabulates the
/// Monneau quantity against the fit.
pub fn tangent_map(
    f: &(impl FieldSource + ?Sized),
    x0: f64,
    k: u32,
    radii: &[f64],
    ctx: &FunctionalContext,
) -> Result<TangentFit> {
    let r0 = radii
        .iter()
        .copied()
        .reduce(f64::min)
        .ok_or_else(|| Error::Invalid("no radii".into()))?;
    let pk = sB_basis(f.weight_exponent(), k);
    let s = SphereSamples::collect(f, x0, r0, ctx)?;
    let (mut num, mut den) = (0.0, 0.0);
    for ((&th, &u), &w) in s.theta.iter().zip(&s.u).zip(&s.weights) {
        let v = FieldSource::value(&pk, r0 * th.cos(), r0 * th.sin());
        num += w * u * v;
        den += w * v * v;
    }
    if !(den > DEGENERATE_H_FLOOR) || !(s.mass() > DEGENERATE_H_FLOOR) {
        return Err(Error::DegenerateMass {
            x0,
            radius: r0,
            h: s.mass(),
        });
    }
    let c = num / den;
    let poly = |x: f64, y: f64| c * FieldSource::value(&pk, x, y);
    let kf = k as f64;
    let monneau: Vec<(f64, f64)> = radii
        .par_iter()
        .map(|&r| monneau_val(f, x0, &poly, r, kf, ctx).map(|m| (r, m)))
        .collect::<Result<_>>()?;
    let floor = 1e-20 * (c * c).max(f64::MIN_POSITIVE);
    let live: Vec<&(f64, f64)> = monneau.iter().filter(|(_, m)| *m > floor).collect();
    let monneau_slope = (live.len() >= 2).then(|| {
        let lr: Vec<f64> = live.iter().map(|(r, _)| r.ln()).collect();
        let lm: Vec<f64> = live.iter().map(|(_, m)| m.ln()).collect();
        least_squares(&lr, &lm).0
    });
    Ok(TangentFit {
        k,
        coefficient: c,
        fit_radius: r0,
        monneau,
        monneau_slope,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Normalization {
    /// `sqrt(H(r))`: unit mass on the rescaled half circle.
    H,
    /// `(r^-a ∫ y^a |∇u|² + H)^(1/2)`, the weighted Sobolev norm on `B_r^+`.
    H1a,
    /// `r^k`.
    Power { k: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlowupSequence {
    pub x0: f64,
    pub normalization: Normalization,
    pub radii: Vec<f64>,
    pub abscissae: Vec<f64>,
    /// `u(x0 + r t, 0) / norm(r)` at each abscissa, one row per radius.
    pub curves: Vec<Vec<f64>>,
    pub norms: Vec<f64>,
    /// Pairwise sup distances between the rescaled traces.
    pub distances: Vec<Vec<f64>>,
}

/// Rescaled traces on `[-1, 1]` (`samples` abscissae) for each radius.
pub fn blowup_sequence(
    f: &(impl FieldSource + ?Sized),
    x0: f64,
    radii: &[f64],
    normalization: Normalization,
    samples: usize,
    ctx: &FunctionalContext,
) -> Result<BlowupSequence> {
    if samples < 2 || radii.is_empty() {
        return Err(Error::Invalid("blow-up needs radii and at least two abscissae".into()));
    }
    let abscissae: Vec<f64> = (0..samples)
        .map(|i| -1.0 + 2.0 * i as f64 / (samples - 1) as f64)
        .collect();
    let rows: Vec<(f64, Vec<f64>)> = radii
        .par_iter()
        .map(|&r| {
            let h = SphereSamples::collect(f, x0, r, ctx)?.mass();
            let norm = match normalization {
                Normalization::H => h.sqrt(),
                Normalization::H1a => {
                    let bulk = crate::functionals::bulk_energy(f, x0, r, ctx)?;
                    (r.powf(-f.weight_exponent()) * bulk + h).sqrt()
                }
                Normalization::Power { k } => r.powf(k),
            };
            if !(norm > 0.0) {
                return Err(Error::DegenerateMass { x0, radius: r, h });
            }
            Ok((
                norm,
                abscissae.iter().map(|&t| f.value(x0 + r * t, 0.0) / norm).collect(),
            ))
        })
        .collect::<Result<_>>()?;
    let (norms, curves): (Vec<f64>, Vec<Vec<f64>>) = rows.into_iter().unzip();
    let distances = curves
        .iter()
        .map(|a| {
            curves
                .iter()
                .map(|b| a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max))
                .collect()
        })
        .collect();
    Ok(BlowupSequence {
        x0,
        normalization,
        radii: radii.to_vec(),
        abscissae,
        curves,
        norms,
        distances,
    })
}

/// Every nodal point of a field with its diagnostics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodalReport {
    pub parameters: Parameters,
    pub tol: f64,
    pub points: Vec<NodalPoint>,
    pub diagnostics: Vec<Option<BlowupDiagnostics>>,
    /// Per-point failure messages (alarms included).
    pub errors: Vec<Option<String>>,
    pub zero_interval: bool,
}

/// Scans the trace and classifies each crossing or tangential zero.
pub fn analyze(f: &Field, p: &Parameters, opts: &ClassifyOptions, margin: f64, ctx: &FunctionalContext) -> NodalReport {
    let found = trace_nodal_points(f, margin);
    let results: Vec<(NodalPoint, Option<BlowupDiagnostics>, Option<String>)> = found
        .into_par_iter()
        .map(|pt| {
            if pt.kind == NodalKind::IntervalEndpoint {
                return (pt, None, Some("zero interval on the trace".into()));
            }
            match classify(f, pt.x0, p, opts, ctx) {
                Ok((mut c, d)) => {
                    c.kind = pt.kind;
                    (c, Some(d), None)
                }
                Err(e) => (pt, None, Some(e.to_string())),
            }
        })
        .collect();
    let zero_interval = results.iter().any(|(p, _, _)| p.kind == NodalKind::IntervalEndpoint);
    let mut points = Vec::with_capacity(results.len());
    let mut diagnostics = Vec::with_capacity(results.len());
    let mut errors = Vec::with_capacity(results.len());
    for (pt, d, e) in results {
        points.push(pt);
        diagnostics.push(d);
        errors.push(e);
    }
    NodalReport {
        parameters: *p,
        tol: opts.tol,
        points,
        diagnostics,
        errors,
        zero_interval,
    }
}

impl NodalReport {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("x0,kind,order,uncertainty,stratum,k,tangent_coefficient,trace_slope,error\n");
        let num = |v: Option<f64>| v.map(|v| format!("{v:.12e}")).unwrap_or_default();
        for (pt, err) in self.points.iter().zip(&self.errors) {
            let (name, k) = match pt.stratum {
                Some(Stratum::Regular) => ("regular", "1".to_string()),
                Some(Stratum::Singular { k }) => ("singular", k.to_string()),
                Some(Stratum::Sublinear) => ("sublinear", String::new()),
                Some(Stratum::Tie { m }) => ("tie", m.to_string()),
                Some(Stratum::Unclassified) => ("unclassified", String::new()),
                None => ("", String::new()),
            };
            let kind = match pt.kind {
                NodalKind::Crossing => "crossing",
                NodalKind::Tangential => "tangential",
                NodalKind::IntervalEndpoint => "interval_endpoint",
            };
            out.push_str(&format!(
                "{:.12e},{kind},{},{},{name},{k},{},{},{}\n",
                pt.x0,
                num(pt.order),
                num(pt.uncertainty),
                num(pt.tangent_coefficient),
                num(pt.trace_slope),
                err.clone().unwrap_or_default().replace(',', ";"),
            ));
        }
        out
    }
}
