//! Command implementations behind the `fracnodal` binary.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::angular::{build_antisymmetric, build_symmetric, eigen_curve, EigenResult};
use crate::config::{ConfigError, Format, RunConfig};
use crate::error::Error;
use crate::field::Field;
use crate::functionals::{curve, CurveSpec, FunctionalContext};
use crate::io::{read_json, stamp_csv, stamp_json, svg_plot, write_text, PlotSpec, Series, Stamped};
use crate::nodal::{analyze, ClassifyOptions, Stratum};
use crate::solver::{assemble, solve_nonlinear};
use crate::verify::{CheckOutcome, Suite, CHECKS};

/// Failure classes with distinct exit codes.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Config(String),
    #[error("{0}")]
    Numerical(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Numerical(_) => 3,
        }
    }
}

impl From<ConfigError> for CliError {
    fn from(e: ConfigError) -> Self {
        CliError::Config(e.to_string())
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        match e {
            Error::InvalidParameter { .. } | Error::InvalidMesh(_) | Error::WeightMismatch { .. } => {
                CliError::Config(e.to_string())
            }
            _ => CliError::Numerical(e.to_string()),
        }
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;

/// Files written by a command and a one-paragraph summary for the terminal.
#[derive(Debug, Default)]
pub struct Outcome {
    pub files: Vec<PathBuf>,
    pub summary: String,
}

struct Writer<'a> {
    dir: &'a Path,
    hash: String,
    formats: &'a [Format],
    files: Vec<PathBuf>,
}

impl<'a> Writer<'a> {
    fn new(cfg: &'a RunConfig, dir: &'a Path) -> Self {
        Writer {
            dir,
            hash: cfg.hash(),
            formats: &cfg.io.formats,
            files: Vec::new(),
        }
    }

    fn put(&mut self, name: &str, text: &str) -> CliResult<()> {
        self.files.push(write_text(self.dir, name, text)?);
        Ok(())
    }

    fn csv(&mut self, name: &str, body: &str) -> CliResult<()> {
        if self.formats.contains(&Format::Csv) {
            let text = stamp_csv(&self.hash, body);
            self.put(name, &text)?;
        }
        Ok(())
    }

    fn json<T: Serialize>(&mut self, name: &str, data: &T, always: bool) -> CliResult<()> {
        if always || self.formats.contains(&Format::Json) {
            let text = stamp_json(&self.hash, data)?;
            self.put(name, &text)?;
        }
        Ok(())
    }

    fn svg(&mut self, name: &str, spec: &PlotSpec<'_>, series: &[Series<'_>]) -> CliResult<()> {
        if self.formats.contains(&Format::Svg) {
            let text = svg_plot(&self.hash, spec, series);
            self.put(name, &text)?;
        }
        Ok(())
    }
}

pub fn load_config(path: &Path) -> CliResult<RunConfig> {
    Ok(RunConfig::load(path)?)
}

fn load_field(cfg: &RunConfig, path: &Path) -> CliResult<Field> {
    let stamped: Stamped<Field> = read_json(path).map_err(|e| CliError::Config(e.to_string()))?;
    let f = stamped.data;
    let (fa, pa) = (f.mesh().a, cfg.parameters.a());
    if (fa - pa).abs() > 1e-12 {
        return Err(Error::WeightMismatch { field: fa, params: pa }.into());
    }
    Ok(f)
}

fn trace_points(f: &Field) -> Vec<(f64, f64)> {
    f.mesh().x.iter().copied().zip(f.trace().iter().copied()).collect()
}

/// Solves the configured problem; writes `field.json`, `solve_report.json`
/// and the trace.
pub fn cmd_solve(cfg: &RunConfig, out: &Path, allow_nonconverged: bool) -> CliResult<Outcome> {
    let p = &cfg.parameters;
    let mesh = cfg.mesh.build(p.a())?;
    let system = assemble(Arc::new(mesh));
    let data = cfg.boundary.evaluate(system.mesh(), p)?;
    let (field, report) = solve_nonlinear(&system, p, &data, &cfg.solver)?;

    let mut w = Writer::new(cfg, out);
    w.json("field.json", &field, true)?;
    w.json("solve_report.json", &report, true)?;
    let mut body = String::from("x,u\n");
    for (x, u) in trace_points(&field) {
        body.push_str(&format!("{x:.12e},{u:.12e}\n"));
    }
    w.csv("trace.csv", &body)?;
    w.svg(
        "trace.svg",
        &PlotSpec {
            title: "trace u(x, 0)",
            x_label: "x",
            y_label: "u",
            ..Default::default()
        },
        &[Series {
            label: "u(x,0)",
            points: trace_points(&field),
        }],
    )?;
    let summary = format!(
        "converged: {} after {} iterations (update {:.2e}, interior residual {:.2e}, boundary residual {:.2e})",
        report.converged, report.iterations, report.final_update, report.interior_residual, report.boundary_residual
    );
    if !report.converged && !allow_nonconverged {
        return Err(CliError::Numerical(format!(
            "nonlinear iteration did not converge; {summary}"
        )));
    }
    Ok(Outcome {
        files: w.files,
        summary,
    })
}

/// Which profiles `angular` should build.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProfileChoice {
    /// Build whatever the regime allows; failures are recorded, not fatal.
    Both,
    Antisymmetric,
    Symmetric,
}

/// Structured failure recorded in JSON outputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BuildError {
    pub kind: String,
    pub message: String,
}

impl From<&Error> for BuildError {
    fn from(e: &Error) -> Self {
        let kind = match e {
            Error::OutOfRegime(_) => "out_of_constructive_regime",
            Error::Bracket { .. } => "bracketing_failed",
            Error::StepUnderflow { .. } => "step_underflow",
            _ => "numerical",
        };
        BuildError {
            kind: kind.into(),
            message: e.to_string(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProfileSummary {
    /// `φ(0)`.
    pub amplitude: Option<f64>,
    pub flux_at_zero: Option<f64>,
    pub ode_residual: Option<f64>,
    pub t_star: Option<f64>,
    pub error: Option<BuildError>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AngularConstants {
    pub a: f64,
    pub k_q: f64,
    pub mu: f64,
    pub antisymmetric: Option<ProfileSummary>,
    pub symmetric: Option<ProfileSummary>,
}

fn eigen_csv(rows: &[EigenResult]) -> String {
    let mut s = String::from("T,lambda_hat,k1\n");
    for r in rows {
        let t = match r.problem {
            crate::angular::EigenProblem::Mixed { t } | crate::angular::EigenProblem::Dirichlet { t } => t,
        };
        s.push_str(&format!("{t:.12e},{:.12e},{:.12e}\n", r.lambda_hat, r.k1));
    }
    s
}

/// Eigen-curves, profiles and the constants `A₁`, `A₂`, `T*`.
pub fn cmd_angular(cfg: &RunConfig, out: &Path, choice: ProfileChoice) -> CliResult<Outcome> {
    let p = &cfg.parameters;
    let d = p.exponents();
    let tol = cfg.analysis.angular_tol;
    let mut w = Writer::new(cfg, out);

    let ts = &cfg.analysis.eigen_ts;
    let mixed = eigen_curve(false, d.a, ts, tol)?;
    let half: Vec<f64> = ts
        .iter()
        .copied()
        .filter(|&t| t < std::f64::consts::FRAC_PI_2)
        .collect();
    let dirichlet = eigen_curve(true, d.a, &half, tol)?;
    w.csv("eigen_mixed.csv", &eigen_csv(&mixed))?;
    w.csv("eigen_dirichlet.csv", &eigen_csv(&dirichlet))?;
    w.svg(
        "eigen_curves.svg",
        &PlotSpec {
            title: "first exponent k1(T)",
            x_label: "T",
            y_label: "k1",
            ..Default::default()
        },
        &[
            Series {
                label: "mixed",
                points: mixed.iter().zip(ts).map(|(r, &t)| (t, r.k1)).collect(),
            },
            Series {
                label: "Dirichlet",
                points: dirichlet.iter().zip(&half).map(|(r, &t)| (t, r.k1)).collect(),
            },
        ],
    )?;

    let mut series: Vec<(&str, Vec<(f64, f64)>)> = Vec::new();
    let mut failures = Vec::new();
    let anti = if choice != ProfileChoice::Symmetric {
        Some(match build_antisymmetric(p, tol) {
            Ok(prof) => {
                w.csv("profile_antisymmetric.csv", &prof.to_csv())?;
                series.push((
                    "phi antisymmetric",
                    prof.theta.iter().copied().zip(prof.phi.iter().copied()).collect(),
                ));
                ProfileSummary {
                    amplitude: Some(prof.phi[0]),
                    flux_at_zero: Some(prof.w[0]),
                    ode_residual: Some(prof.ode_residual()),
                    t_star: None,
                    error: None,
                }
            }
            Err(e) => {
                failures.push(format!("antisymmetric: {e}"));
                ProfileSummary {
                    amplitude: None,
                    flux_at_zero: None,
                    ode_residual: None,
                    t_star: None,
                    error: Some((&e).into()),
                }
            }
        })
    } else {
        None
    };
    let sym = if choice != ProfileChoice::Antisymmetric {
        Some(match build_symmetric(p, tol) {
            Ok((prof, t_star)) => {
                w.csv("profile_symmetric.csv", &prof.to_csv())?;
                series.push((
                    "phi symmetric",
                    prof.theta.iter().copied().zip(prof.phi.iter().copied()).collect(),
                ));
                ProfileSummary {
                    amplitude: Some(prof.phi[0]),
                    flux_at_zero: Some(prof.w[0]),
                    ode_residual: Some(prof.ode_residual()),
                    t_star: Some(t_star),
                    error: None,
                }
            }
            Err(e) => {
                failures.push(format!("symmetric: {e}"));
                ProfileSummary {
                    amplitude: None,
                    flux_at_zero: None,
                    ode_residual: None,
                    t_star: None,
                    error: Some((&e).into()),
                }
            }
        })
    } else {
        None
    };
    let consts = AngularConstants {
        a: d.a,
        k_q: d.k_q,
        mu: d.mu,
        antisymmetric: anti,
        symmetric: sym,
    };
    w.json("constants.json", &consts, true)?;
    let plotted: Vec<Series<'_>> = series
        .iter()
        .map(|(l, pts)| Series {
            label: l,
            points: pts.clone(),
        })
        .collect();
    w.svg(
        "profiles.svg",
        &PlotSpec {
            title: "angular profiles",
            x_label: "theta",
            y_label: "phi",
            ..Default::default()
        },
        &plotted,
    )?;

    let built = consts
        .antisymmetric
        .iter()
        .chain(&consts.symmetric)
        .filter(|s| s.error.is_none())
        .count();
    let summary = format!(
        "k_q = {}, mu = {}; built {built} profile(s){}",
        d.k_q,
        d.mu,
        if failures.is_empty() {
            String::new()
        } else {
            format!("; {}", failures.join("; "))
        }
    );
    if choice != ProfileChoice::Both && !failures.is_empty() {
        return Err(CliError::Numerical(summary));
    }
    if built == 0 && !failures.is_empty() {
        return Err(CliError::Numerical(summary));
    }
    Ok(Outcome {
        files: w.files,
        summary,
    })
}

/// Functional curve about `x0` (config value unless overridden).
pub fn cmd_curve(cfg: &RunConfig, field_path: &Path, x0: Option<f64>, out: &Path) -> CliResult<Outcome> {
    let f = load_field(cfg, field_path)?;
    let p = &cfg.parameters;
    let x0 = x0.unwrap_or(cfg.analysis.x0);
    let radii = cfg.analysis.radii.radii()?;
    let ctx = FunctionalContext::new(p.a(), cfg.analysis.quadrature);
    let spec = CurveSpec {
        ts: cfg.analysis.ts.clone(),
        weiss: cfg.analysis.weiss.clone(),
        monneau: None,
    };
    let c = curve(&f, x0, &radii, &spec, p, &ctx)?;

    let mut w = Writer::new(cfg, out);
    w.csv("curve.csv", &c.to_csv())?;
    let mut series = vec![
        Series {
            label: "N_q",
            points: c.rows.iter().filter_map(|r| r.n_q.map(|v| (r.r, v))).collect(),
        },
        Series {
            label: "N_2",
            points: c.rows.iter().filter_map(|r| r.n_2.map(|v| (r.r, v))).collect(),
        },
    ];
    let labels: Vec<String> = c.weiss.iter().map(|(k, t)| format!("W k={k} t={t}")).collect();
    for (i, label) in labels.iter().enumerate() {
        series.push(Series {
            label,
            points: c.rows.iter().map(|r| (r.r, r.w[i])).collect(),
        });
    }
    w.svg(
        "curve.svg",
        &PlotSpec {
            title: "functionals along r",
            x_label: "r",
            y_label: "value",
            ..Default::default()
        },
        &series,
    )?;
    let failed = c.rows.iter().filter(|r| r.error.is_some()).count();
    let defect = c.relative_defects(1e-12).iter().map(|d| d.1).fold(0.0, f64::max);
    let summary = format!(
        "{} radii about x0 = {x0} ({failed} flagged), max relative identity defect {defect:.3e}",
        c.rows.len()
    );
    if failed == c.rows.len() {
        return Err(CliError::Numerical(format!("no radius could be evaluated; {summary}")));
    }
    Ok(Outcome {
        files: w.files,
        summary,
    })
}

/// Nodal points of a stored field with orders and strata.
pub fn cmd_classify(cfg: &RunConfig, field_path: &Path, out: &Path) -> CliResult<Outcome> {
    let f = load_field(cfg, field_path)?;
    let p = &cfg.parameters;
    let ctx = FunctionalContext::new(p.a(), cfg.analysis.quadrature);
    let opts = ClassifyOptions {
        tol: cfg.analysis.order_tol,
        window: cfg.analysis.window,
    };
    let margin = cfg.analysis.margin.unwrap_or(32.0 * f.mesh().dx());
    let report = analyze(&f, p, &opts, margin, &ctx);

    let mut w = Writer::new(cfg, out);
    w.json("nodal_report.json", &report, false)?;
    w.csv("nodal_report.csv", &report.to_csv())?;
    let markers = report
        .points
        .iter()
        .map(|pt| {
            let label = match pt.stratum {
                Some(Stratum::Regular) => "R".to_string(),
                Some(Stratum::Singular { k }) => format!("S{k}"),
                Some(Stratum::Sublinear) => "T".to_string(),
                Some(Stratum::Tie { m }) => format!("T/{m}"),
                Some(Stratum::Unclassified) => "?".to_string(),
                None => "!".to_string(),
            };
            (pt.x0, 0.0, label)
        })
        .collect();
    w.svg(
        "nodal.svg",
        &PlotSpec {
            title: "trace and classified nodal points",
            x_label: "x",
            y_label: "u(x,0)",
            markers,
            ..Default::default()
        },
        &[Series {
            label: "u(x,0)",
            points: trace_points(&f),
        }],
    )?;
    let unclassified = report
        .points
        .iter()
        .filter(|p| p.stratum == Some(Stratum::Unclassified))
        .count();
    let summary = format!(
        "{} nodal point(s), {unclassified} unclassified, zero interval: {}",
        report.points.len(),
        report.zero_interval
    );
    Ok(Outcome {
        files: w.files,
        summary,
    })
}

/// One line per acceptance check.
pub fn list_checks() -> String {
    CHECKS.iter().map(|c| format!("{:>2}  {}\n", c.id, c.name)).collect()
}

/// Runs the acceptance suite (or the selected checks) with the config's tolerances.
pub fn cmd_verify(cfg: Option<&RunConfig>, only: &[u8], out: Option<&Path>) -> CliResult<(Vec<CheckOutcome>, Outcome)> {
    let tol = cfg.map(|c| c.analysis.tolerances).unwrap_or_default();
    let ids: Vec<u8> = if only.is_empty() {
        CHECKS.iter().map(|c| c.id).collect()
    } else {
        only.to_vec()
    };
    if let Some(bad) = ids.iter().find(|id| !CHECKS.iter().any(|c| c.id == **id)) {
        return Err(CliError::Config(format!("unknown check id {bad}")));
    }
    let rows = Suite::new(tol).run_all(&ids);
    let mut files = Vec::new();
    match (cfg, out) {
        (Some(cfg), Some(out)) => {
            let mut w = Writer::new(cfg, out);
            w.json("verify.json", &rows, true)?;
            files = w.files;
        }
        (None, Some(out)) => {
            let hash = RunConfig::default_verify_hash();
            files.push(write_text(out, "verify.json", &stamp_json(&hash, &rows)?)?);
        }
        _ => {}
    }
    let passed = rows.iter().filter(|r| r.pass).count();
    let summary = format!("{passed}/{} checks passed", rows.len());
    Ok((rows, Outcome { files, summary }))
}

/// SVG of chosen columns of a CSV artifact.
pub fn cmd_plot(
    cfg: &RunConfig,
    input: &Path,
    x: &str,
    ys: &[String],
    log_x: bool,
    log_y: bool,
    out: &Path,
) -> CliResult<Outcome> {
    let text = std::fs::read_to_string(input).map_err(|e| CliError::Config(format!("{}: {e}", input.display())))?;
    let mut lines = text.lines().filter(|l| !l.starts_with('#') && !l.trim().is_empty());
    let header: Vec<&str> = lines
        .next()
        .ok_or_else(|| CliError::Config("empty CSV".into()))?
        .split(',')
        .collect();
    let col = |name: &str| {
        header
            .iter()
            .position(|h| *h == name)
            .ok_or_else(|| CliError::Config(format!("column `{name}` not in {}", header.join(","))))
    };
    let xi = col(x)?;
    let yis: Vec<usize> = ys.iter().map(|y| col(y)).collect::<CliResult<_>>()?;
    let rows: Vec<Vec<&str>> = lines.map(|l| l.split(',').collect()).collect();
    let num = |s: Option<&&str>| s.and_then(|v| v.parse::<f64>().ok());
    let series: Vec<Series<'_>> = ys
        .iter()
        .zip(&yis)
        .map(|(label, &yi)| Series {
            label,
            points: rows
                .iter()
                .filter_map(|r| Some((num(r.get(xi))?, num(r.get(yi))?)))
                .collect(),
        })
        .collect();
    let stem = input.file_stem().and_then(|s| s.to_str()).unwrap_or("plot");
    let name = format!("{stem}_{}.svg", ys.join("_"));
    let title = format!("{} vs {x}", ys.join(", "));
    let mut w = Writer::new(cfg, out);
    w.formats = &[Format::Svg];
    w.svg(
        &name,
        &PlotSpec {
            title: &title,
            x_label: x,
            y_label: "",
            log_x,
            log_y,
            markers: vec![],
        },
        &series,
    )?;
    let summary = format!("plotted {} series from {}", series.len(), input.display());
    Ok(Outcome {
        files: w.files,
        summary,
    })
}
