//! Run configuration: one TOML document with a strict schema.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::angular::{build_antisymmetric, DEFAULT_TOL};
use crate::error::{Error, Result};
use crate::field::{FieldSource, QuadratureOptions};
use crate::homogeneous::{extend, sB_basis};
use crate::mesh::{default_grading, Mesh};
use crate::params::Parameters;
use crate::solver::{DirichletData, NonlinearOptions};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub parameters: Parameters,
    #[serde(default)]
    pub mesh: MeshConfig,
    #[serde(default)]
    pub solver: NonlinearOptions,
    #[serde(default)]
    pub boundary: BoundaryData,
    #[serde(default)]
    pub analysis: AnalysisConfig,
    #[serde(default)]
    pub io: IoConfig,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MeshConfig {
    pub half_width: f64,
    pub height: f64,
    pub nx: usize,
    pub my: usize,
    /// Grading exponent; the weight-dependent default when absent.
    pub gamma: Option<f64>,
}

impl Default for MeshConfig {
    fn default() -> Self {
        MeshConfig {
            half_width: 1.0,
            height: 1.0,
            nx: 128,
            my: 128,
            gamma: None,
        }
    }
}

impl MeshConfig {
    pub fn build(&self, a: f64) -> Result<Mesh> {
        let gamma = self.gamma.unwrap_or_else(|| default_grading(a));
        Mesh::new(self.half_width, self.height, self.nx, self.my, gamma, a)
    }
}

/// Dirichlet data on the artificial boundary.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum BoundaryData {
    Constant {
        value: f64,
    },
    /// `x`.
    #[default]
    Linear,
    /// The even `L_a`-harmonic polynomial of degree `k`, scaled.
    Polynomial {
        k: u32,
        #[serde(default = "unit")]
        scale: f64,
    },
    /// The antisymmetric `k_q`-homogeneous solution for the parameters.
    Homogeneous,
    /// `offset + slope x + Σ c_m cos(mπx/2L) e^(-m y)` with seeded coefficients in `[-amplitude, amplitude]`.
    Random {
        seed: u64,
        #[serde(default = "four")]
        modes: usize,
        #[serde(default)]
        offset: f64,
        #[serde(default)]
        slope: f64,
        #[serde(default = "unit")]
        amplitude: f64,
    },
}

fn unit() -> f64 {
    1.0
}

fn four() -> usize {
    4
}

impl BoundaryData {
    /// The data as a function on the mesh boundary.
    pub fn evaluate(&self, mesh: &Mesh, p: &Parameters) -> Result<DirichletData> {
        Ok(match self {
            BoundaryData::Constant { value } => DirichletData::constant(mesh, *value),
            BoundaryData::Linear => DirichletData::from_fn(mesh, |x, _| x),
            BoundaryData::Polynomial { k, scale } => {
                let pk = sB_basis(p.a(), *k);
                DirichletData::from_fn(mesh, |x, y| scale * pk.value(x, y))
            }
            BoundaryData::Homogeneous => {
                let prof = Arc::new(build_antisymmetric(p, DEFAULT_TOL)?);
                let u = extend(prof, p.exponents().k_q)?;
                DirichletData::from_source(mesh, &u)
            }
            BoundaryData::Random {
                seed,
                modes,
                offset,
                slope,
                amplitude,
            } => {
                let mut rng = ChaCha8Rng::seed_from_u64(*seed);
                let coeffs: Vec<(f64, f64)> = (1..=*modes)
                    .map(|_| {
                        (
                            rng.gen_range(-*amplitude..=*amplitude),
                            rng.gen_range(-*amplitude..=*amplitude),
                        )
                    })
                    .collect();
                let l = mesh.half_width;
                DirichletData::from_fn(mesh, |x, y| {
                    let waves: f64 = coeffs
                        .iter()
                        .enumerate()
                        .map(|(m, &(c, s))| {
                            let w = (m + 1) as f64 * std::f64::consts::PI * x / (2.0 * l);
                            (c * w.cos() + s * w.sin()) * (-((m + 1) as f64) * y).exp()
                        })
                        .sum();
                    offset + slope * x + waves
                })
            }
        })
    }
}

/// Geometric or uniform radius list.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RadiiSpec {
    pub min: f64,
    pub max: f64,
    pub count: usize,
    pub geometric: bool,
}

impl Default for RadiiSpec {
    fn default() -> Self {
        RadiiSpec {
            min: 0.2,
            max: 0.8,
            count: 61,
            geometric: false,
        }
    }
}

impl RadiiSpec {
    pub fn radii(&self) -> Result<Vec<f64>> {
        if !(self.min > 0.0 && self.max > self.min) || self.count < 2 {
            return Err(Error::Invalid(format!(
                "radii need 0 < min < max and count >= 2, got [{}, {}] x {}",
                self.min, self.max, self.count
            )));
        }
        let n = (self.count - 1) as f64;
        Ok((0..self.count)
            .map(|i| {
                let t = i as f64 / n;
                if self.geometric {
                    (self.min.ln() + t * (self.max / self.min).ln()).exp()
                } else {
                    self.min + t * (self.max - self.min)
                }
            })
            .collect())
    }
}

/// Acceptance tolerances; defaults are the published thresholds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Tolerances {
    pub eigen_anchor: f64,
    pub small_opening: f64,
    pub degree_two: f64,
    pub endpoint_relation: f64,
    pub frequency: f64,
    pub weiss_spread: f64,
    pub glue_jump: f64,
    pub critical_opening: f64,
    pub convergence_ratio: f64,
    pub runtime_seconds: f64,
    pub roundtrip_error: f64,
    pub order: f64,
    pub identity_defect: f64,
    pub monotone: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            eigen_anchor: 1e-8,
            small_opening: 0.02,
            degree_two: 1e-4,
            endpoint_relation: 1e-10,
            frequency: 0.01,
            weiss_spread: 1e-3,
            glue_jump: 1e-8,
            critical_opening: 1e-6,
            convergence_ratio: 1.7,
            runtime_seconds: 60.0,
            roundtrip_error: 0.02,
            order: 0.05,
            identity_defect: 5e-2,
            monotone: 1e-3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AnalysisConfig {
    pub x0: f64,
    pub radii: RadiiSpec,
    /// Extra `t` values for `E_t` columns.
    pub ts: Vec<f64>,
    /// `(k, t)` pairs for `W_{k,t}` columns.
    pub weiss: Vec<(f64, f64)>,
    /// Order-estimation window; `[8h, dist/2]` when absent.
    pub window: Option<(f64, f64)>,
    pub order_tol: f64,
    /// Distance from the lateral walls inside which nodal points are ignored.
    pub margin: Option<f64>,
    pub angular_tol: f64,
    /// Openings for the eigen-curve sweep.
    pub eigen_ts: Vec<f64>,
    pub quadrature: QuadratureOptions,
    pub tolerances: Tolerances,
}

impl Default for AnalysisConfig {
    fn default() -> Self {
        AnalysisConfig {
            x0: 0.0,
            radii: RadiiSpec::default(),
            ts: Vec::new(),
            weiss: Vec::new(),
            window: None,
            order_tol: crate::nodal::ORDER_TOL,
            margin: None,
            angular_tol: DEFAULT_TOL,
            eigen_ts: (1..=15).map(|i| 0.1 * i as f64).collect(),
            quadrature: QuadratureOptions::default(),
            tolerances: Tolerances::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Format {
    Csv,
    Json,
    Svg,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct IoConfig {
    pub output_dir: PathBuf,
    pub formats: Vec<Format>,
}

impl Default for IoConfig {
    fn default() -> Self {
        IoConfig {
            output_dir: PathBuf::from("out"),
            formats: vec![Format::Csv, Format::Json, Format::Svg],
        }
    }
}

impl IoConfig {
    pub fn wants(&self, f: Format) -> bool {
        self.formats.contains(&f)
    }
}

/// Config or I/O problems, kept apart from numerical errors for exit codes.
#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Read { path: PathBuf, source: std::io::Error },
    #[error("config schema error: {0}")]
    Schema(String),
}

impl RunConfig {
    pub fn from_toml(text: &str) -> std::result::Result<Self, ConfigError> {
        toml::from_str(text).map_err(|e| ConfigError::Schema(e.to_string()))
    }

    pub fn load(path: &Path) -> std::result::Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Read {
            path: path.into(),
            source,
        })?;
        Self::from_toml(&text)
    }

    /// Config with the given parameters and every other block at its default.
    pub fn with_parameters(parameters: Parameters) -> Self {
        RunConfig {
            parameters,
            mesh: MeshConfig::default(),
            solver: NonlinearOptions::default(),
            boundary: BoundaryData::default(),
            analysis: AnalysisConfig::default(),
            io: IoConfig::default(),
        }
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// SHA-256 of the canonical serialization, so formatting does not matter.
    /// Hash recorded by `verify` runs without a config: that of the default tolerances.
    pub fn default_verify_hash() -> String {
        let canon = serde_json::to_string(&Tolerances::default()).expect("tolerances serialize");
        hex::encode(Sha256::digest(canon.as_bytes()))
    }

    pub fn hash(&self) -> String {
        let canon = serde_json::to_string(self).expect("config serializes");
        hex::encode(Sha256::digest(canon.as_bytes()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = "[parameters]\ns = 0.25\nq = 1.0\nlambda_plus = 1.0\nlambda_minus = 1.0\n";

    #[test]
    fn minimal_config_uses_defaults() {
        let c = RunConfig::from_toml(MINIMAL).unwrap();
        assert_eq!(c.mesh, MeshConfig::default());
        assert_eq!(c.boundary, BoundaryData::Linear);
        assert_eq!(c.parameters.exponents().k_q, 0.5);
    }

    #[test]
    fn unknown_keys_are_named() {
        let err = RunConfig::from_toml(&format!("{MINIMAL}[mesh]\nnx = 64\nbogus = 1\n")).unwrap_err();
        assert!(err.to_string().contains("bogus"), "{err}");
        let err =
            RunConfig::from_toml("[parameters]\ns = 0.25\nq = 1.0\nlambda_plus = 1.0\nlambda_minus = 1.0\nr = 2\n")
                .unwrap_err();
        assert!(err.to_string().contains('r'), "{err}");
    }

    #[test]
    fn invalid_parameters_are_rejected() {
        let bad = MINIMAL.replace("s = 0.25", "s = 1.5");
        assert!(RunConfig::from_toml(&bad).is_err());
    }

    #[test]
    fn round_trip_and_hash() {
        let text = format!(
            "{MINIMAL}[boundary]\nkind = \"random\"\nseed = 3\noffset = 2.0\n[analysis]\nweiss = [[0.5, 2.0]]\n[analysis.tolerances]\norder = 0.04\n"
        );
        let c = RunConfig::from_toml(&text).unwrap();
        let back = RunConfig::from_toml(&c.to_toml()).unwrap();
        assert_eq!(c, back);
        assert_eq!(c.hash(), back.hash());
        assert_eq!(c.hash().len(), 64);
        assert_ne!(c.hash(), RunConfig::from_toml(MINIMAL).unwrap().hash());
    }

    #[test]
    fn boundary_kinds_evaluate() {
        let p = Parameters::new(0.25, 1.0, 1.0, 1.0).unwrap();
        let mesh = MeshConfig {
            nx: 16,
            my: 16,
            ..Default::default()
        }
        .build(p.a())
        .unwrap();
        for b in [
            BoundaryData::Constant { value: 2.0 },
            BoundaryData::Linear,
            BoundaryData::Polynomial { k: 2, scale: 1.0 },
            BoundaryData::Homogeneous,
            BoundaryData::Random {
                seed: 1,
                modes: 3,
                offset: 3.0,
                slope: 0.0,
                amplitude: 1.0,
            },
        ] {
            let (lo, hi) = b.evaluate(&mesh, &p).unwrap().min_max(&mesh);
            assert!(lo.is_finite() && hi.is_finite() && hi >= lo);
        }
        let (lo, _) = BoundaryData::Random {
            seed: 9,
            modes: 4,
            offset: 4.5,
            slope: 0.0,
            amplitude: 1.0,
        }
        .evaluate(&mesh, &p)
        .unwrap()
        .min_max(&mesh);
        assert!(lo > 0.0);
    }

    #[test]
    fn radii_lists() {
        let r = RadiiSpec::default().radii().unwrap();
        assert_eq!(r.len(), 61);
        assert!((r[1] - r[0] - 0.01).abs() < 1e-12);
        let g = RadiiSpec {
            min: 0.1,
            max: 0.4,
            count: 3,
            geometric: true,
        }
        .radii()
        .unwrap();
        assert!((g[1] - 0.2).abs() < 1e-12);
        assert!(RadiiSpec {
            count: 1,
            ..Default::default()
        }
        .radii()
        .is_err());
    }
}
