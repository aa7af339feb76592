//! The acceptance suite as library code, shared by the CLI and the tests.

use std::f64::consts::{FRAC_PI_2, PI};
use std::sync::{Arc, OnceLock};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::angular::{
    build_antisymmetric, build_symmetric, eigen_dirichlet, eigen_mixed, integrate_flux_system, mixed_shooting_flux,
    nonlinear_amplitude, DEFAULT_TOL,
};
use crate::config::{BoundaryData, MeshConfig, Tolerances};
use crate::error::{Error, Result};
use crate::field::{Field, FieldSource, QuadratureOptions};
use crate::functionals::{
    almgren_recipe_constants, check_monotonicity, curve, CurveSpec, FunctionalContext, Monotone, N_t_val, W_val,
    DEGENERATE_H_FLOOR,
};
use crate::homogeneous::{extend, sB_basis, HomogeneousField};
use crate::nodal::{classify, default_window, has_zero_interval, trace_nodal_points, ClassifyOptions, Stratum};
use crate::params::{derive_exponents, Parameters};
use crate::solver::{assemble, solve_nonlinear, DirichletData, NonlinearOptions};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Check {
    pub id: u8,
    pub name: &'static str,
}

pub const CHECKS: [Check; 11] = [
    Check {
        id: 1,
        name: "exponent algebra",
    },
    Check {
        id: 2,
        name: "angular eigenvalue anchors",
    },
    Check {
        id: 3,
        name: "opening limits of the Dirichlet exponent",
    },
    Check {
        id: 4,
        name: "antisymmetric homogeneous solution",
    },
    Check {
        id: 5,
        name: "symmetric glued profile",
    },
    Check {
        id: 6,
        name: "linear solver convergence",
    },
    Check {
        id: 7,
        name: "nonlinear round trip and classification",
    },
    Check {
        id: 8,
        name: "mass derivative identity",
    },
    Check {
        id: 9,
        name: "Weiss and perturbed Almgren monotonicity",
    },
    Check {
        id: 10,
        name: "vanishing-order estimator",
    },
    Check {
        id: 11,
        name: "unique-continuation alarms",
    },
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckOutcome {
    pub id: u8,
    pub name: String,
    pub pass: bool,
    pub detail: String,
    /// Wall time; left out of serialized reports so they stay reproducible.
    #[serde(skip)]
    pub seconds: f64,
}

impl CheckOutcome {
    pub fn line(&self) -> String {
        format!(
            "{} [{:>2}] {}: {} ({:.2} s)",
            if self.pass { "PASS" } else { "FAIL" },
            self.id,
            self.name,
            self.detail,
            self.seconds
        )
    }
}

/// Nonlinear solve with `u₁` data, its exact counterpart and timing.
pub struct RoundTrip {
    pub p: Parameters,
    pub exact: HomogeneousField,
    pub field: Field,
    pub converged: bool,
}

/// One of the seeded random solves.
pub struct RandomSolve {
    pub seed: u64,
    pub sign_definite: bool,
    pub field: Field,
    pub converged: bool,
}

/// Lazily shares the expensive solves between checks.
pub struct Suite {
    tol: Tolerances,
    roundtrip: OnceLock<std::result::Result<RoundTrip, String>>,
    random: OnceLock<std::result::Result<Vec<RandomSolve>, String>>,
}

pub const RANDOM_SOLVES: u64 = 10;
const RANDOM_MESH: usize = 64;
const ROUNDTRIP_MESH: usize = 128;

fn u1_params() -> Parameters {
    Parameters::new(0.25, 1.0, 1.0, 1.0).expect("valid")
}

fn u1_field(p: &Parameters) -> Result<HomogeneousField> {
    extend(Arc::new(build_antisymmetric(p, DEFAULT_TOL)?), p.exponents().k_q)
}

fn spread(v: &[f64]) -> f64 {
    let (lo, hi) = v
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &x| (a.min(x), b.max(x)));
    let scale = v.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    (hi - lo) / scale
}

fn geometric(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    (0..n)
        .map(|i| (lo.ln() + (hi / lo).ln() * i as f64 / (n - 1) as f64).exp())
        .collect()
}

impl Suite {
    pub fn new(tol: Tolerances) -> Self {
        Suite {
            tol,
            roundtrip: OnceLock::new(),
            random: OnceLock::new(),
        }
    }

    pub fn tolerances(&self) -> &Tolerances {
        &self.tol
    }

    pub fn roundtrip(&self) -> Result<&RoundTrip> {
        self.roundtrip
            .get_or_init(|| {
                let p = u1_params();
                let exact = u1_field(&p).map_err(|e| e.to_string())?;
                let mesh = MeshConfig {
                    nx: ROUNDTRIP_MESH,
                    my: ROUNDTRIP_MESH,
                    ..Default::default()
                }
                .build(p.a())
                .map_err(|e| e.to_string())?;
                let system = assemble(Arc::new(mesh));
                let data = DirichletData::from_source(system.mesh(), &exact);
                let (field, rep) =
                    solve_nonlinear(&system, &p, &data, &NonlinearOptions::default()).map_err(|e| e.to_string())?;
                Ok(RoundTrip {
                    p,
                    exact,
                    field,
                    converged: rep.converged,
                })
            })
            .as_ref()
            .map_err(|e| Error::Invalid(e.clone()))
    }

    pub fn random_solves(&self) -> Result<&[RandomSolve]> {
        self.random
            .get_or_init(|| {
                let p = u1_params();
                let mesh = MeshConfig {
                    nx: RANDOM_MESH,
                    my: RANDOM_MESH,
                    ..Default::default()
                }
                .build(p.a())
                .map_err(|e| e.to_string())?;
                let system = assemble(Arc::new(mesh));
                (0..RANDOM_SOLVES)
                    .into_par_iter()
                    .map(|seed| {
                        let sign_definite = seed % 2 == 1;
                        let data = if sign_definite {
                            BoundaryData::Random {
                                seed,
                                modes: 4,
                                offset: 3.0,
                                slope: 0.0,
                                amplitude: 0.3,
                            }
                        } else {
                            BoundaryData::Random {
                                seed,
                                modes: 4,
                                offset: 0.0,
                                slope: 1.0,
                                amplitude: 0.3,
                            }
                        };
                        let d = data.evaluate(system.mesh(), &p).map_err(|e| e.to_string())?;
                        let (field, rep) = solve_nonlinear(&system, &p, &d, &NonlinearOptions::default())
                            .map_err(|e| e.to_string())?;
                        Ok(RandomSolve {
                            seed,
                            sign_definite,
                            field,
                            converged: rep.converged,
                        })
                    })
                    .collect()
            })
            .as_ref()
            .map(|v| v.as_slice())
            .map_err(|e| Error::Invalid(e.clone()))
    }

    pub fn run(&self, id: u8) -> CheckOutcome {
        let start = Instant::now();
        let name = CHECKS.iter().find(|c| c.id == id).map(|c| c.name).unwrap_or("unknown");
        let result = match id {
            1 => self.exponents(),
            2 => self.eigen_anchors(),
            3 => self.opening_limits(),
            4 => self.antisymmetric(),
            5 => self.symmetric(),
            6 => self.convergence(),
            7 => self.round_trip(),
            8 => self.identity(),
            9 => self.monotonicity(),
            10 => self.estimator(),
            11 => self.alarms(),
            _ => Err(Error::Invalid(format!("no check with id {id}"))),
        };
        let (pass, detail) = result.unwrap_or_else(|e| (false, format!("error: {e}")));
        CheckOutcome {
            id,
            name: name.to_string(),
            pass,
            detail,
            seconds: start.elapsed().as_secs_f64(),
        }
    }

    pub fn run_all(&self, ids: &[u8]) -> Vec<CheckOutcome> {
        ids.iter().map(|&id| self.run(id)).collect()
    }

    fn exponents(&self) -> Result<(bool, String)> {
        let d = derive_exponents(&Parameters::new(0.25, 1.0, 1.0, 1.0)?);
        let first = (d.a, d.k_q, d.beta_q, d.mu) == (0.5, 0.5, 0, 0.5);
        let second = derive_exponents(&Parameters::new(0.5, 1.0, 1.0, 1.0)?);
        let third = derive_exponents(&Parameters::new(0.4, 1.5, 1.0, 1.0)?);
        let pass = first && second.beta_q == 0 && second.k_q_is_integer() && third.k_q == 1.6 && third.beta_q == 1;
        Ok((
            pass,
            format!(
                "(a, k_q, beta_q, mu) = ({}, {}, {}, {}); beta_q(0.5, 1) = {}; (k_q, beta_q)(0.4, 1.5) = ({}, {})",
                d.a, d.k_q, d.beta_q, d.mu, second.beta_q, third.k_q, third.beta_q
            ),
        ))
    }

    fn eigen_anchors(&self) -> Result<(bool, String)> {
        let tol = self.tol.eigen_anchor;
        let mut worst_m = 0.0f64;
        for a in [-0.5, 0.0, 0.5] {
            worst_m = worst_m.max((eigen_mixed(FRAC_PI_2, a, 1e-13)?.lambda_hat - (1.0 + a)).abs());
        }
        let mut worst_d = 0.0f64;
        for t in [0.2, 0.5, 1.0] {
            let exact = (PI / (PI - 2.0 * t)).powi(2);
            worst_d = worst_d.max((eigen_dirichlet(t, 0.0, 1e-13)?.lambda_hat - exact).abs());
        }
        Ok((
            worst_m <= tol && worst_d <= tol,
            format!(
                "max |mixed - (1+a)| = {worst_m:.2e}, max |Dirichlet - closed form| = {worst_d:.2e} (tol {tol:.0e})"
            ),
        ))
    }

    fn opening_limits(&self) -> Result<(bool, String)> {
        let mut pass = true;
        let mut parts = Vec::new();
        for a in [-0.5, 0.0, 0.5] {
            let s = 0.5 * (1.0 - a);
            let small = (eigen_dirichlet(0.01, a, 1e-12)?.k1 - 2.0 * s).abs();
            let opening = (2.0 * (1.0 - s)).sqrt().atan();
            let two = (eigen_dirichlet(opening, a, 1e-12)?.k1 - 2.0).abs();
            pass &= small <= self.tol.small_opening && two <= self.tol.degree_two;
            parts.push(format!("a={a}: |k1(0.01)-2s|={small:.3e}, |k1(T2)-2|={two:.1e}"));
        }
        Ok((pass, parts.join("; ")))
    }

    fn antisymmetric(&self) -> Result<(bool, String)> {
        let p = u1_params();
        let prof = build_antisymmetric(&p, DEFAULT_TOL)?;
        let (a1, w0) = (prof.phi[0], prof.w[0]);
        let relation = (-w0 - p.lambda_plus() * a1.powf(p.q() - 1.0)).abs();
        let u = extend(Arc::new(prof), p.exponents().k_q)?;
        let ctx = FunctionalContext::new(p.a(), QuadratureOptions::default());
        let radii: Vec<f64> = (2..=8).map(|i| 0.1 * i as f64).collect();
        let k = p.exponents().k_q;
        let n_dev = radii
            .iter()
            .map(|&r| N_t_val(&u, 0.0, r, p.q(), &p, &ctx).map(|n| (n - k).abs()))
            .collect::<Result<Vec<_>>>()?
            .into_iter()
            .fold(0.0, f64::max);
        let w: Vec<f64> = radii
            .iter()
            .map(|&r| W_val(&u, 0.0, r, k, 2.0, &p, &ctx))
            .collect::<Result<_>>()?;
        let w_spread = spread(&w);
        let t = &self.tol;
        Ok((
            relation <= t.endpoint_relation && n_dev <= t.frequency && w_spread <= t.weiss_spread,
            format!(
                "A1 = {a1:.12}, endpoint defect {relation:.1e}, max |N_q - k_q| = {n_dev:.1e}, W spread {w_spread:.1e}"
            ),
        ))
    }

    fn symmetric(&self) -> Result<(bool, String)> {
        let p = Parameters::new(0.25, 1.3, 1.0, 1.0)?;
        let (a, mu, k_q) = (p.a(), p.exponents().mu, p.exponents().k_q);
        let (prof, t_star) = build_symmetric(&p, DEFAULT_TOL)?;
        // Independent legs: the mixed piece on [0, T*] and the middle piece from T*.
        let w0 = mixed_shooting_flux(a, mu, t_star, 1e-13)?;
        let c = nonlinear_amplitude(p.q(), p.lambda_plus(), w0)?;
        let left = integrate_flux_system(a, mu, 0.0, t_star, [c, c * w0], 1e-13)?;
        let n = left.len() - 1;
        let (phi_l, w_l) = (left.phi[n], left.w[n]);
        let mid = integrate_flux_system(a, mu, t_star, FRAC_PI_2, [0.0, w_l], 1e-13)?;
        let w_half = mid.w[mid.len() - 1];
        let [_, w_r] = prof.eval(t_star + 1e-9);
        let jump = (w_r - w_l).abs().max(phi_l.abs()).max(w_half.abs());
        let k_dev = (eigen_dirichlet(t_star, a, 1e-14)?.k1 - k_q).abs();
        Ok((
            jump <= self.tol.glue_jump && k_dev <= self.tol.critical_opening,
            format!(
                "T* = {t_star:.12}, A2 = {:.12}, glue defect {jump:.1e} (phi(T*) {phi_l:.1e}, w(pi/2) {w_half:.1e}), |k1(T*) - k_q| = {k_dev:.1e}",
                prof.phi[0]
            ),
        ))
    }

    fn convergence(&self) -> Result<(bool, String)> {
        let start = Instant::now();
        let p = Parameters::new(0.25, 1.0, 0.0, 0.0)?;
        let p2 = sB_basis(p.a(), 2);
        let errs: Vec<f64> = [32, 64, 128]
            .iter()
            .map(|&n| {
                let mesh = MeshConfig {
                    nx: n,
                    my: n,
                    ..Default::default()
                }
                .build(p.a())?;
                let system = assemble(Arc::new(mesh));
                let data = DirichletData::from_source(system.mesh(), &p2);
                let (f, _) = solve_nonlinear(&system, &p, &data, &NonlinearOptions::default())?;
                Ok(f.weighted_l2_against(|x, y| p2.value(x, y)))
            })
            .collect::<Result<_>>()?;
        let elapsed = start.elapsed().as_secs_f64();
        let ratios = [errs[0] / errs[1], errs[1] / errs[2]];
        Ok((
            ratios.iter().all(|&r| r >= self.tol.convergence_ratio) && elapsed <= self.tol.runtime_seconds,
            format!(
                "errors {:.3e}, {:.3e}, {:.3e}; ratios {:.3}, {:.3}; runtime within {:.0} s: {}",
                errs[0],
                errs[1],
                errs[2],
                ratios[0],
                ratios[1],
                self.tol.runtime_seconds,
                elapsed <= self.tol.runtime_seconds
            ),
        ))
    }

    fn round_trip(&self) -> Result<(bool, String)> {
        let rt = self.roundtrip()?;
        let exact = Field::sample(rt.field.mesh_arc(), &rt.exact);
        let rel = rt.field.weighted_l2_against(|x, y| rt.exact.value(x, y)) / exact.weighted_l2();
        let pts = trace_nodal_points(&rt.field, 0.25);
        let x0 = pts
            .iter()
            .map(|p| p.x0)
            .min_by(|a, b| a.abs().total_cmp(&b.abs()))
            .ok_or_else(|| Error::Invalid("no nodal point on the round-trip trace".into()))?;
        let ctx = FunctionalContext::for_field(&rt.field);
        let (pt, d) = classify(&rt.field, x0, &rt.p, &ClassifyOptions::default(), &ctx)?;
        let order = pt.order.unwrap_or(f64::NAN);
        let pass = rt.converged
            && rel <= self.tol.roundtrip_error
            && pt.stratum == Some(Stratum::Sublinear)
            && (order - 0.5).abs() <= self.tol.order;
        Ok((
            pass,
            format!(
                "converged {}, relative error {rel:.3e}, nodal point {x0:.2e}, order {order:.4} (frequency {:.4}), stratum {:?}",
                rt.converged,
                d.frequency_order.unwrap_or(f64::NAN),
                pt.stratum
            ),
        ))
    }

    fn identity(&self) -> Result<(bool, String)> {
        let rt = self.roundtrip()?;
        let ctx = FunctionalContext::for_field(&rt.field);
        let radii: Vec<f64> = (0..=60).map(|i| 0.2 + 0.01 * i as f64).collect();
        let c = curve(&rt.field, 0.0, &radii, &CurveSpec::default(), &rt.p, &ctx)?;
        let defects = c.relative_defects(1e-12);
        let (r_at, worst) = defects
            .iter()
            .fold((0.0, 0.0f64), |m, &(r, d)| if d > m.1 { (r, d) } else { m });
        Ok((
            !defects.is_empty() && worst <= self.tol.identity_defect,
            format!(
                "max relative defect {worst:.3e} at r = {r_at:.2} over {} radii",
                defects.len()
            ),
        ))
    }

    fn monotonicity(&self) -> Result<(bool, String)> {
        let solves = self.random_solves()?;
        let p = u1_params();
        let k_q = p.exponents().k_q;
        let rows: Vec<Result<(bool, String)>> = solves
            .par_iter()
            .map(|s| {
                let f = &s.field;
                let ctx = FunctionalContext::for_field(f);
                let x0 = if s.sign_definite {
                    0.0
                } else {
                    trace_nodal_points(f, 0.25)
                        .iter()
                        .map(|p| p.x0)
                        .min_by(|a, b| a.abs().total_cmp(&b.abs()))
                        .ok_or_else(|| Error::Invalid(format!("seed {}: no nodal point", s.seed)))?
                };
                let (lo, hi) = default_window(f, x0).ok_or_else(|| Error::Invalid("no window".into()))?;
                let radii = geometric(lo, hi, 16);
                let c = curve(f, x0, &radii, &CurveSpec::default(), &p, &ctx)?;
                let w = check_monotonicity(&c, Monotone::WeissK2 { k: k_q }, 0.0)?;
                let w_tol = self.tol.monotone * w.scale;
                let mut ok = s.converged && w.max_decrease <= w_tol;
                let mut text = format!(
                    "seed {} x0={x0:.3}: W drop {:.1e}/{:.1e}",
                    s.seed, w.max_decrease, w_tol
                );
                if s.sign_definite {
                    let lr: Vec<f64> = c.rows.iter().map(|r| r.r.ln()).collect();
                    let lh: Vec<f64> = c.rows.iter().map(|r| 0.5 * r.h.ln()).collect();
                    let order = slope(&lr, &lh);
                    let delta = (k_q - order).abs();
                    let (c_tilde, alpha) = almgren_recipe_constants(&c, &p, delta)?;
                    let probe = check_monotonicity(&c, Monotone::AlmgrenPerturbed { c_tilde, alpha }, 0.0)?;
                    let tol = self.tol.monotone * probe.scale;
                    ok &= probe.max_decrease <= tol;
                    text.push_str(&format!(
                        ", Almgren (C={c_tilde:.2e}, alpha={alpha:.3}) drop {:.1e}/{tol:.1e}",
                        probe.max_decrease
                    ));
                }
                Ok((ok, text))
            })
            .collect();
        let mut pass = true;
        let mut parts = Vec::new();
        for r in rows {
            let (ok, text) = r?;
            pass &= ok;
            if !ok {
                parts.push(text);
            }
        }
        let summary = if parts.is_empty() {
            format!("{} solves monotone within 1e-3 of scale", solves.len())
        } else {
            parts.join("; ")
        };
        Ok((pass, summary))
    }

    fn estimator(&self) -> Result<(bool, String)> {
        let p = u1_params();
        let a = p.a();
        let ctx = FunctionalContext::new(a, QuadratureOptions::default());
        let window = Some((0.1, 0.8));
        let u1 = u1_field(&p)?;
        let synth = extend(
            Arc::new(integrate_flux_system(a, 1.6 * (1.6 + a), 0.0, PI, [1.0, 0.0], 1e-12)?),
            1.6,
        )?;
        let cases: [(&str, &dyn FieldSource, f64); 4] = [
            ("p1", &sB_basis(a, 1), 1.0),
            ("p2", &sB_basis(a, 2), 2.0),
            ("u1", &u1, 0.5),
            ("r^1.6 phi", &synth, 1.6),
        ];
        let mut pass = true;
        let mut parts = Vec::new();
        for (name, f, k) in cases {
            let x0 = 0.0;
            let order = crate::nodal::vanishing_order(f, x0, window, &p, &ctx)?.0;
            pass &= (order - k).abs() <= self.tol.order;
            parts.push(format!("{name}: {order:.6}"));
        }
        Ok((pass, parts.join(", ")))
    }

    fn alarms(&self) -> Result<(bool, String)> {
        let rt = self.roundtrip()?;
        let mut fields: Vec<&Field> = vec![&rt.field];
        fields.extend(self.random_solves()?.iter().map(|s| &s.field));
        let mut tested = 0usize;
        let mut problems = Vec::new();
        for (i, f) in fields.iter().enumerate() {
            let pts = trace_nodal_points(f, 0.25);
            if has_zero_interval(&pts) {
                problems.push(format!("field {i}: zero interval on the trace"));
            }
            let ctx = FunctionalContext::for_field(*f);
            let centres: Vec<f64> = std::iter::once(0.0).chain(pts.iter().map(|p| p.x0)).collect();
            for x0 in centres {
                let Some((lo, hi)) = default_window(*f, x0) else {
                    continue;
                };
                if hi <= lo {
                    continue;
                }
                for r in geometric(lo, hi, 12) {
                    let h = crate::functionals::H_val(*f, x0, r, &ctx)?;
                    tested += 1;
                    if !(h > DEGENERATE_H_FLOOR) {
                        problems.push(format!("field {i}: H = {h:.1e} at x0 = {x0:.3}, r = {r:.3}"));
                    }
                }
            }
        }
        Ok((
            problems.is_empty(),
            if problems.is_empty() {
                format!(
                    "{} fields, {tested} (x0, r) pairs, no zero interval or H floor hit",
                    fields.len()
                )
            } else {
                problems.join("; ")
            },
        ))
    }
}

fn slope(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    sxy / sxx
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fast_checks_pass() {
        let suite = Suite::new(Tolerances::default());
        for id in [1, 2, 4, 10] {
            let out = suite.run(id);
            assert!(out.pass, "{}", out.line());
        }
    }

    #[test]
    fn tightened_tolerance_fails_the_row() {
        let tol = Tolerances {
            eigen_anchor: 1e-300,
            ..Default::default()
        };
        let out = Suite::new(tol).run(2);
        assert!(!out.pass);
        assert!(out.line().starts_with("FAIL [ 2]"));
    }

    #[test]
    fn unknown_id_is_a_failure() {
        assert!(!Suite::new(Tolerances::default()).run(42).pass);
    }
}
