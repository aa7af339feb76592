//! Problem data and the exponents derived from it.
//!
//! Every other module reads the weight exponent `a = 1 - 2s`, the critical
//! vanishing order `k_q = 2s / (2 - q)`, the largest admissible integer order
//! `beta_q` and the angular eigen-parameter `mu = k_q (k_q + a)` from here.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tolerance used when deciding whether `k_q` is an integer.
pub const INTEGER_TOL: f64 = 1e-12;

/// Exponents derived from `(s, q)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DerivedExponents {
    /// Weight exponent `1 - 2s`, in `(-1, 1)`.
    pub a: f64,
    /// Critical vanishing order `2s / (2 - q)`.
    pub k_q: f64,
    /// Largest integer strictly below `k_q` (zero when no positive integer is).
    pub beta_q: u32,
    /// Angular eigen-parameter at criticality, `k_q (k_q + 1 - 2s)`.
    pub mu: f64,
}

impl DerivedExponents {
    /// True when `k_q` is an integer within [`INTEGER_TOL`].
    pub fn k_q_is_integer(&self) -> bool {
        (self.k_q - self.k_q.round()).abs() < INTEGER_TOL
    }
}

/// Problem parameters `(s, q, lambda_plus, lambda_minus)` and trace dimension `n`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawParameters", into = "RawParameters")]
pub struct Parameters {
    s: f64,
    q: f64,
    lambda_plus: f64,
    lambda_minus: f64,
    n: u32,
    exps: DerivedExponents,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawParameters {
    s: f64,
    q: f64,
    lambda_plus: f64,
    lambda_minus: f64,
    #[serde(default = "one")]
    n: u32,
}

fn one() -> u32 {
    1
}

impl TryFrom<RawParameters> for Parameters {
    type Error = Error;

    fn try_from(raw: RawParameters) -> Result<Self> {
        Parameters::with_dimension(raw.s, raw.q, raw.lambda_plus, raw.lambda_minus, raw.n)
    }
}

impl From<Parameters> for RawParameters {
    fn from(p: Parameters) -> Self {
        RawParameters {
            s: p.s,
            q: p.q,
            lambda_plus: p.lambda_plus,
            lambda_minus: p.lambda_minus,
            n: p.n,
        }
    }
}

impl Parameters {
    /// Parameters for the one-dimensional trace (`n = 1`).
    pub fn new(s: f64, q: f64, lambda_plus: f64, lambda_minus: f64) -> Result<Self> {
        Self::with_dimension(s, q, lambda_plus, lambda_minus, 1)
    }

    pub fn with_dimension(s: f64, q: f64, lambda_plus: f64, lambda_minus: f64, n: u32) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidParameter {
                name: "n",
                value: 0.0,
                reason: "trace dimension must be positive",
            });
        }
        if !(lambda_plus >= 0.0 && lambda_plus.is_finite()) {
            return Err(Error::InvalidParameter {
                name: "lambda_plus",
                value: lambda_plus,
                reason: "must be finite and non-negative",
            });
        }
        if !(lambda_minus >= 0.0 && lambda_minus.is_finite()) {
            return Err(Error::InvalidParameter {
                name: "lambda_minus",
                value: lambda_minus,
                reason: "must be finite and non-negative",
            });
        }
        let exps = derive(s, q)?;
        Ok(Parameters {
            s,
            q,
            lambda_plus,
            lambda_minus,
            n,
            exps,
        })
    }

    pub fn s(&self) -> f64 {
        self.s
    }

    pub fn q(&self) -> f64 {
        self.q
    }

    pub fn lambda_plus(&self) -> f64 {
        self.lambda_plus
    }

    pub fn lambda_minus(&self) -> f64 {
        self.lambda_minus
    }

    pub fn n(&self) -> u32 {
        self.n
    }

    pub fn a(&self) -> f64 {
        self.exps.a
    }

    pub fn exponents(&self) -> DerivedExponents {
        self.exps
    }

    /// True when both phase coefficients vanish (the linear problem).
    pub fn is_linear(&self) -> bool {
        self.lambda_plus == 0.0 && self.lambda_minus == 0.0
    }

    /// The potential `lambda_+ (t_+)^q + lambda_- (t_-)^q`.
    pub fn potential(&self, t: f64) -> f64 {
        if t > 0.0 {
            self.lambda_plus * t.powf(self.q)
        } else if t < 0.0 {
            self.lambda_minus * (-t).powf(self.q)
        } else {
            0.0
        }
    }

    /// The boundary nonlinearity `lambda_+ (t_+)^(q-1) - lambda_- (t_-)^(q-1)`.
    ///
    /// For `q = 1` this is the two-valued sign term and `f(0) = 0` is used.
    pub fn nonlinearity(&self, t: f64) -> f64 {
        let e = self.q - 1.0;
        if t > 0.0 {
            self.lambda_plus * t.powf(e)
        } else if t < 0.0 {
            -self.lambda_minus * (-t).powf(e)
        } else {
            0.0
        }
    }

    /// Boundary nonlinearity with the `q = 1` jump replaced by a linear ramp of
    /// width `epsilon`. For `q > 1` or `epsilon <= 0` this is [`Self::nonlinearity`].
    pub fn smoothed_nonlinearity(&self, t: f64, epsilon: f64) -> f64 {
        if self.q == 1.0 && epsilon > 0.0 {
            self.lambda_plus * (t / epsilon).clamp(0.0, 1.0) - self.lambda_minus * (-t / epsilon).clamp(0.0, 1.0)
        } else {
            self.nonlinearity(t)
        }
    }
}

fn derive(s: f64, q: f64) -> Result<DerivedExponents> {
    if !(s > 0.0 && s < 1.0) {
        return Err(Error::InvalidParameter {
            name: "s",
            value: s,
            reason: "fractional order must lie in (0, 1)",
        });
    }
    if q == 2.0 {
        return Err(Error::InvalidParameter {
            name: "q",
            value: q,
            reason: "q = 2 makes the critical order 2s/(2-q) infinite",
        });
    }
    if !(1.0..2.0).contains(&q) {
        return Err(Error::InvalidParameter {
            name: "q",
            value: q,
            reason: "sublinearity exponent must lie in [1, 2)",
        });
    }
    let a = 1.0 - 2.0 * s;
    let k_q = 2.0 * s / (2.0 - q);
    let rounded = k_q.round();
    let beta_q = if (k_q - rounded).abs() < INTEGER_TOL {
        rounded - 1.0
    } else {
        k_q.floor()
    };
    Ok(DerivedExponents {
        a,
        k_q,
        beta_q: beta_q.max(0.0) as u32,
        mu: k_q * (k_q + 1.0 - 2.0 * s),
    })
}

/// Exponents derived from validated parameters.
pub fn derive_exponents(p: &Parameters) -> DerivedExponents {
    p.exps
}

/// The Pohozaev constant `2n - t (n - 2s)`.
pub fn critical_constant(n: u32, t: f64, s: f64) -> Result<f64> {
    if n == 0 {
        return Err(Error::InvalidParameter {
            name: "n",
            value: 0.0,
            reason: "trace dimension must be positive",
        });
    }
    if !(1.0..=2.0).contains(&t) {
        return Err(Error::InvalidParameter {
            name: "t",
            value: t,
            reason: "must lie in [1, 2]",
        });
    }
    if !(s > 0.0 && s < 1.0) {
        return Err(Error::InvalidParameter {
            name: "s",
            value: s,
            reason: "fractional order must lie in (0, 1)",
        });
    }
    let n = n as f64;
    Ok(2.0 * n - t * (n - 2.0 * s))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn quarter_order_linear_growth() {
        let p = Parameters::new(0.25, 1.0, 1.0, 1.0).unwrap();
        let d = derive_exponents(&p);
        assert_eq!(d.a, 0.5);
        assert_eq!(d.k_q, 0.5);
        assert_eq!(d.beta_q, 0);
        assert_eq!(d.mu, 0.5);
    }

    #[test]
    fn integer_branch() {
        let d = Parameters::new(0.5, 1.0, 1.0, 1.0).unwrap().exponents();
        assert_eq!(d.k_q, 1.0);
        assert_eq!(d.beta_q, 0);
        assert!(d.k_q_is_integer());
    }

    #[test]
    fn floor_branch() {
        let d = Parameters::new(0.4, 1.5, 1.0, 1.0).unwrap().exponents();
        assert!((d.a - 0.2).abs() < 1e-15);
        assert_eq!(d.k_q, 1.6);
        assert_eq!(d.beta_q, 1);
    }

    #[test]
    fn rejects_bad_parameters() {
        assert!(Parameters::new(0.25, 2.0, 1.0, 1.0).is_err());
        assert!(Parameters::new(0.0, 1.0, 1.0, 1.0).is_err());
        assert!(Parameters::new(1.0, 1.0, 1.0, 1.0).is_err());
        assert!(Parameters::new(0.5, 0.9, 1.0, 1.0).is_err());
        assert!(Parameters::new(0.5, 1.0, -1.0, 1.0).is_err());
        assert!(Parameters::new(0.5, 1.0, 1.0, f64::NAN).is_err());
        assert!(Parameters::with_dimension(0.5, 1.0, 1.0, 1.0, 0).is_err());
    }

    #[test]
    fn critical_constant_values() {
        assert_eq!(critical_constant(1, 1.0, 0.25).unwrap(), 1.5);
        assert_eq!(critical_constant(1, 2.0, 0.25).unwrap(), 1.0);
        assert!(critical_constant(1, 0.5, 0.25).is_err());
        // The t = 2 Weiss correction vanishes exactly at k = k_q.
        let p = Parameters::new(0.3, 1.4, 1.0, 1.0).unwrap();
        let k = p.exponents().k_q;
        let c = critical_constant(1, 2.0, 0.3).unwrap();
        assert!((c - 2.0 * k * (2.0 - 1.4)).abs() < 1e-14);
    }

    #[test]
    fn potential_and_nonlinearity() {
        let p = Parameters::new(0.25, 1.5, 2.0, 3.0).unwrap();
        assert_eq!(p.potential(0.0), 0.0);
        assert_eq!(p.potential(1.0), 2.0);
        let p1 = Parameters::new(0.25, 1.0, 2.0, 3.0).unwrap();
        assert_eq!(p1.potential(-1.0), 3.0);
        assert_eq!(p1.nonlinearity(0.3), 2.0);
        assert_eq!(p1.nonlinearity(-0.3), -3.0);
        assert_eq!(p1.smoothed_nonlinearity(0.05, 0.1), 1.0);
        assert_eq!(p1.smoothed_nonlinearity(-0.2, 0.1), -3.0);
    }

    #[test]
    fn deserialize_is_strict() {
        let ok: Parameters = toml::from_str("s = 0.25\nq = 1.0\nlambda_plus = 1.0\nlambda_minus = 1.0").unwrap();
        assert_eq!(ok.exponents().k_q, 0.5);
        let bad = toml::from_str::<Parameters>("s = 0.25\nq = 1.0\nlambda_plus = 1.0\nlambda_minus = 1.0\nlambda = 2");
        assert!(bad.unwrap_err().to_string().contains("lambda"));
        assert!(toml::from_str::<Parameters>("s = 1.5\nq = 1.0\nlambda_plus = 1.0\nlambda_minus = 1.0").is_err());
    }

    proptest! {
        #[test]
        fn beta_q_brackets_k_q(s in 0.001f64..0.999, q in 1.0f64..1.999) {
            let d = Parameters::new(s, q, 1.0, 1.0).unwrap().exponents();
            let beta = d.beta_q as f64;
            prop_assert!(beta < d.k_q + INTEGER_TOL);
            prop_assert!(d.k_q <= beta + 1.0 + INTEGER_TOL);
            prop_assert!((d.mu - d.k_q * (d.k_q + d.a)).abs() <= 1e-12 * d.mu.abs().max(1.0));
        }

        #[test]
        fn weiss_sign_sweep(s in 0.01f64..0.99, q in 1.0f64..1.95, k in 0.0f64..10.0) {
            let d = Parameters::new(s, q, 1.0, 1.0).unwrap().exponents();
            let c = critical_constant(1, 2.0, s).unwrap();
            let defect = c - 2.0 * k * (2.0 - q);
            if (k - d.k_q).abs() > 1e-9 {
                prop_assert_eq!(defect <= 0.0, k >= d.k_q);
            }
        }
    }
}
