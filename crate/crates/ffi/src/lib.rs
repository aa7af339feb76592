//! C ABI over the `fracnodal` library.
//!
//! Objects cross the boundary as opaque handles that the caller frees with the
//! matching `*_free`. Every fallible call returns an [`FnodStatus`]; on failure
//! the message is kept per thread and read back with [`fnod_last_error`].
//! Panics are caught and reported as [`FnodStatus::Panic`].

#![allow(clippy::missing_safety_doc)]

use std::cell::RefCell;
use std::ffi::{c_char, CStr};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::sync::Arc;

use fracnodal::angular::{build_antisymmetric, build_symmetric, AngularProfile, DEFAULT_TOL};
use fracnodal::config::{RunConfig, Tolerances};
use fracnodal::functionals::{FunctionalContext, H_val, N_t_val};
use fracnodal::nodal::{classify, ClassifyOptions, Stratum};
use fracnodal::solver::{assemble, solve_nonlinear};
use fracnodal::verify::Suite;
use fracnodal::{Error, Field, Parameters};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FnodStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Numerical = 3,
    NotConverged = 4,
    DegenerateMass = 5,
    NotNodal = 6,
    OutOfRegime = 7,
    BufferTooSmall = 8,
    Panic = 9,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FnodStratum {
    Regular = 0,
    Singular = 1,
    Sublinear = 2,
    Tie = 3,
    Unclassified = 4,
}

/// Problem parameters.
pub struct FnodParams(Parameters);

/// Parsed run configuration.
pub struct FnodConfig(RunConfig);

/// Discrete solution on the half-plane mesh.
pub struct FnodField(Field);

/// Angular profile on `[0, pi]`.
pub struct FnodProfile(AngularProfile);

#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct FnodExponents {
    pub a: f64,
    pub k_q: f64,
    pub beta_q: u32,
    pub mu: f64,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct FnodSolveReport {
    pub iterations: usize,
    pub final_update: f64,
    pub converged: bool,
    pub interior_residual: f64,
    pub boundary_residual: f64,
}

#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct FnodNodalPoint {
    pub x0: f64,
    pub order: f64,
    pub uncertainty: f64,
    pub stratum: FnodStratum,
    /// `k` for `Singular`, `m` for `Tie`, otherwise 0.
    pub stratum_index: u32,
}

thread_local! {
    static LAST_ERROR: RefCell<String> = const { RefCell::new(String::new()) };
}

struct Failure(FnodStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let status = match &e {
            Error::InvalidParameter { .. }
            | Error::InvalidMesh(_)
            | Error::WeightMismatch { .. }
            | Error::RadiusOutOfRange { .. }
            | Error::Invalid(_) => FnodStatus::InvalidArgument,
            Error::DegenerateMass { .. } => FnodStatus::DegenerateMass,
            Error::NotNodal { .. } => FnodStatus::NotNodal,
            Error::OutOfRegime(_) => FnodStatus::OutOfRegime,
            _ => FnodStatus::Numerical,
        };
        Failure(status, e.to_string())
    }
}

fn fail(status: FnodStatus, msg: impl Into<String>) -> Failure {
    Failure(status, msg.into())
}

fn guard(f: impl FnOnce() -> Result<(), Failure>) -> FnodStatus {
    let (status, msg) = match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => (FnodStatus::Ok, String::new()),
        Ok(Err(Failure(s, m))) => (s, m),
        Err(payload) => {
            let m = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".into());
            (FnodStatus::Panic, m)
        }
    };
    LAST_ERROR.with(|e| *e.borrow_mut() = msg);
    status
}

unsafe fn get<'a, T>(p: *const T, what: &str) -> Result<&'a T, Failure> {
    p.as_ref()
        .ok_or_else(|| fail(FnodStatus::NullPointer, format!("{what} is null")))
}

unsafe fn out<'a, T>(p: *mut T, what: &str) -> Result<&'a mut T, Failure> {
    p.as_mut()
        .ok_or_else(|| fail(FnodStatus::NullPointer, format!("{what} is null")))
}

unsafe fn text<'a>(p: *const c_char, what: &str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(fail(FnodStatus::NullPointer, format!("{what} is null")));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| fail(FnodStatus::InvalidArgument, format!("{what} is not UTF-8")))
}

/// Copies `s` and a NUL into `buf` if it fits; returns the size needed.
unsafe fn copy_str(s: &str, buf: *mut c_char, len: usize) -> usize {
    let need = s.len() + 1;
    if !buf.is_null() && len >= need {
        std::ptr::copy_nonoverlapping(s.as_ptr().cast::<c_char>(), buf, s.len());
        *buf.add(s.len()) = 0;
    }
    need
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn fnod_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Message of the last failed call on this thread. Writes it into `buf` when
/// `len` is large enough and returns the size needed, including the NUL.
#[no_mangle]
pub unsafe extern "C" fn fnod_last_error(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|e| copy_str(&e.borrow(), buf, len))
}

#[no_mangle]
pub unsafe extern "C" fn fnod_params_new(
    s: f64,
    q: f64,
    lambda_plus: f64,
    lambda_minus: f64,
    out_params: *mut *mut FnodParams,
) -> FnodStatus {
    guard(|| {
        let slot = out(out_params, "out_params")?;
        let p = Parameters::new(s, q, lambda_plus, lambda_minus)?;
        *slot = Box::into_raw(Box::new(FnodParams(p)));
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn fnod_params_free(params: *mut FnodParams) {
    if !params.is_null() {
        drop(Box::from_raw(params));
    }
}

#[no_mangle]
pub unsafe extern "C" fn fnod_params_exponents(
    params: *const FnodParams,
    out_exponents: *mut FnodExponents,
) -> FnodStatus {
    guard(|| {
        let d = get(params, "params")?.0.exponents();
        *out(out_exponents, "out_exponents")? = FnodExponents {
            a: d.a,
            k_q: d.k_q,
            beta_q: d.beta_q,
            mu: d.mu,
        };
        Ok(())
    })
}

/// Parses a TOML run configuration held in memory.
#[no_mangle]
pub unsafe extern "C" fn fnod_config_from_toml(toml: *const c_char, out_config: *mut *mut FnodConfig) -> FnodStatus {
    guard(|| {
        let slot = out(out_config, "out_config")?;
        let cfg =
            RunConfig::from_toml(text(toml, "toml")?).map_err(|e| fail(FnodStatus::InvalidArgument, e.to_string()))?;
        *slot = Box::into_raw(Box::new(FnodConfig(cfg)));
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn fnod_config_load(path: *const c_char, out_config: *mut *mut FnodConfig) -> FnodStatus {
    guard(|| {
        let slot = out(out_config, "out_config")?;
        let cfg = RunConfig::load(Path::new(text(path, "path")?))
            .map_err(|e| fail(FnodStatus::InvalidArgument, e.to_string()))?;
        *slot = Box::into_raw(Box::new(FnodConfig(cfg)));
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn fnod_config_free(config: *mut FnodConfig) {
    if !config.is_null() {
        drop(Box::from_raw(config));
    }
}

/// Hex SHA-256 of the canonical config (64 characters plus NUL).
#[no_mangle]
pub unsafe extern "C" fn fnod_config_hash(config: *const FnodConfig, buf: *mut c_char, len: usize) -> FnodStatus {
    guard(|| {
        let h = get(config, "config")?.0.hash();
        let need = copy_str(&h, buf, len);
        if buf.is_null() || len < need {
            return Err(fail(FnodStatus::BufferTooSmall, format!("need {need} bytes")));
        }
        Ok(())
    })
}

/// New parameter handle holding the config's parameters.
#[no_mangle]
pub unsafe extern "C" fn fnod_config_params(config: *const FnodConfig, out_params: *mut *mut FnodParams) -> FnodStatus {
    guard(|| {
        let p = get(config, "config")?.0.parameters;
        *out(out_params, "out_params")? = Box::into_raw(Box::new(FnodParams(p)));
        Ok(())
    })
}

/// Solves the configured problem. `out_report` may be null. A field is
/// returned even when the iteration stops short, with `NotConverged`.
#[no_mangle]
pub unsafe extern "C" fn fnod_solve(
    config: *const FnodConfig,
    out_field: *mut *mut FnodField,
    out_report: *mut FnodSolveReport,
) -> FnodStatus {
    guard(|| {
        let cfg = &get(config, "config")?.0;
        let slot = out(out_field, "out_field")?;
        let p = cfg.parameters;
        let system = assemble(Arc::new(cfg.mesh.build(p.a())?));
        let data = cfg.boundary.evaluate(system.mesh(), &p)?;
        let (field, rep) = solve_nonlinear(&system, &p, &data, &cfg.solver)?;
        if let Some(r) = out_report.as_mut() {
            *r = FnodSolveReport {
                iterations: rep.iterations,
                final_update: rep.final_update,
                converged: rep.converged,
                interior_residual: rep.interior_residual,
                boundary_residual: rep.boundary_residual,
            };
        }
        *slot = Box::into_raw(Box::new(FnodField(field)));
        if rep.converged {
            Ok(())
        } else {
            Err(fail(
                FnodStatus::NotConverged,
                format!("no convergence after {} iterations", rep.iterations),
            ))
        }
    })
}

#[no_mangle]
pub unsafe extern "C" fn fnod_field_free(field: *mut FnodField) {
    if !field.is_null() {
        drop(Box::from_raw(field));
    }
}

/// Number of trace nodes, or 0 for a null handle.
#[no_mangle]
pub unsafe extern "C" fn fnod_field_trace_len(field: *const FnodField) -> usize {
    field.as_ref().map_or(0, |f| f.0.trace().len())
}

/// Copies trace abscissae (if `xs` is non-null) and values into buffers of `len` entries.
#[no_mangle]
pub unsafe extern "C" fn fnod_field_trace(
    field: *const FnodField,
    xs: *mut f64,
    values: *mut f64,
    len: usize,
) -> FnodStatus {
    guard(|| {
        let f = &get(field, "field")?.0;
        let tr = f.trace();
        if values.is_null() {
            return Err(fail(FnodStatus::NullPointer, "values is null"));
        }
        if len < tr.len() {
            return Err(fail(FnodStatus::BufferTooSmall, format!("need {} entries", tr.len())));
        }
        std::slice::from_raw_parts_mut(values, tr.len()).copy_from_slice(tr);
        if !xs.is_null() {
            std::slice::from_raw_parts_mut(xs, tr.len()).copy_from_slice(&f.mesh().x[..tr.len()]);
        }
        Ok(())
    })
}

/// Boundary mass `H(x0, r)`.
#[no_mangle]
pub unsafe extern "C" fn fnod_field_mass(field: *const FnodField, x0: f64, r: f64, out_h: *mut f64) -> FnodStatus {
    guard(|| {
        let f = &get(field, "field")?.0;
        *out(out_h, "out_h")? = H_val(f, x0, r, &FunctionalContext::for_field(f))?;
        Ok(())
    })
}

/// Frequency `N_q(x0, r)` with the full trace potential.
#[no_mangle]
pub unsafe extern "C" fn fnod_field_frequency(
    field: *const FnodField,
    params: *const FnodParams,
    x0: f64,
    r: f64,
    out_n: *mut f64,
) -> FnodStatus {
    guard(|| {
        let f = &get(field, "field")?.0;
        let p = &get(params, "params")?.0;
        *out(out_n, "out_n")? = N_t_val(f, x0, r, p.q(), p, &FunctionalContext::for_field(f))?;
        Ok(())
    })
}

/// Vanishing order and stratum at a trace zero `x0`, over the default window.
#[no_mangle]
pub unsafe extern "C" fn fnod_field_classify(
    field: *const FnodField,
    params: *const FnodParams,
    x0: f64,
    out_point: *mut FnodNodalPoint,
) -> FnodStatus {
    guard(|| {
        let f = &get(field, "field")?.0;
        let p = &get(params, "params")?.0;
        let slot = out(out_point, "out_point")?;
        let (pt, _) = classify(f, x0, p, &ClassifyOptions::default(), &FunctionalContext::for_field(f))?;
        let (stratum, index) = match pt.stratum {
            Some(Stratum::Regular) => (FnodStratum::Regular, 0),
            Some(Stratum::Singular { k }) => (FnodStratum::Singular, k),
            Some(Stratum::Sublinear) => (FnodStratum::Sublinear, 0),
            Some(Stratum::Tie { m }) => (FnodStratum::Tie, m),
            Some(Stratum::Unclassified) | None => (FnodStratum::Unclassified, 0),
        };
        *slot = FnodNodalPoint {
            x0: pt.x0,
            order: pt.order.unwrap_or(f64::NAN),
            uncertainty: pt.uncertainty.unwrap_or(f64::NAN),
            stratum,
            stratum_index: index,
        };
        Ok(())
    })
}

/// Odd-about-`pi/2` profile at critical homogeneity.
#[no_mangle]
pub unsafe extern "C" fn fnod_profile_antisymmetric(
    params: *const FnodParams,
    out_profile: *mut *mut FnodProfile,
) -> FnodStatus {
    guard(|| {
        let p = &get(params, "params")?.0;
        let slot = out(out_profile, "out_profile")?;
        *slot = Box::into_raw(Box::new(FnodProfile(build_antisymmetric(p, DEFAULT_TOL)?)));
        Ok(())
    })
}

/// Even-about-`pi/2` glued profile; its zero `T*` goes to `out_tstar` if non-null.
#[no_mangle]
pub unsafe extern "C" fn fnod_profile_symmetric(
    params: *const FnodParams,
    out_profile: *mut *mut FnodProfile,
    out_tstar: *mut f64,
) -> FnodStatus {
    guard(|| {
        let p = &get(params, "params")?.0;
        let slot = out(out_profile, "out_profile")?;
        let (prof, t) = build_symmetric(p, DEFAULT_TOL)?;
        if let Some(ts) = out_tstar.as_mut() {
            *ts = t;
        }
        *slot = Box::into_raw(Box::new(FnodProfile(prof)));
        Ok(())
    })
}

/// `phi(theta)` and the flux `w(theta)`.
#[no_mangle]
pub unsafe extern "C" fn fnod_profile_eval(
    profile: *const FnodProfile,
    theta: f64,
    out_phi: *mut f64,
    out_w: *mut f64,
) -> FnodStatus {
    guard(|| {
        let prof = &get(profile, "profile")?.0;
        let (lo, hi) = prof.domain();
        if !(lo..=hi).contains(&theta) {
            return Err(fail(
                FnodStatus::InvalidArgument,
                format!("theta = {theta} outside [{lo}, {hi}]"),
            ));
        }
        let [phi, w] = prof.eval(theta);
        *out(out_phi, "out_phi")? = phi;
        if let Some(o) = out_w.as_mut() {
            *o = w;
        }
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn fnod_profile_free(profile: *mut FnodProfile) {
    if !profile.is_null() {
        drop(Box::from_raw(profile));
    }
}

/// Runs one acceptance check with default tolerances. The detail line is
/// left in the last-error slot whatever the outcome.
#[no_mangle]
pub unsafe extern "C" fn fnod_verify_check(id: u8, out_pass: *mut bool) -> FnodStatus {
    let mut detail = String::new();
    let status = guard(|| {
        let slot = out(out_pass, "out_pass")?;
        let row = Suite::new(Tolerances::default()).run(id);
        *slot = row.pass;
        detail = row.line();
        Ok(())
    });
    if status == FnodStatus::Ok {
        LAST_ERROR.with(|e| *e.borrow_mut() = detail);
    }
    status
}
