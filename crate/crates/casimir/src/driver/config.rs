//! Strict JSON run configuration.
//!
//! Unknown keys are rejected everywhere: a typo in a physics config must
//! fail loudly, not silently fall back to a default.

use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::energy::SolverKind;
use crate::solvers::DEFAULT_SEED;
use crate::{Error, Result};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default = "default_config_id")]
    pub config_id: String,
    pub bodies: Vec<BodySpec>,
    /// Mesh sizes; strictly decreasing when more than one (the two finest
    /// feed the Richardson extrapolation).
    pub h: Vec<f64>,
    #[serde(default)]
    pub solver: SolverSpec,
    #[serde(default)]
    pub quadrature: QuadratureSpec,
    #[serde(default)]
    pub sweep: Option<SweepSpec>,
    /// Krylov families the `compare` subcommand evaluates against dense.
    #[serde(default)]
    pub methods: Option<Vec<crate::solvers::KrylovKind>>,
    #[serde(default)]
    pub output: Option<PathBuf>,
    #[serde(default)]
    pub workers: Option<usize>,
}

fn default_config_id() -> String {
    "run".to_string()
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, tag = "kind", rename_all = "snake_case")]
pub enum BodySpec {
    Sphere {
        radius: f64,
        #[serde(default)]
        transform: TransformSpec,
    },
    Ellipsoid {
        semi_axes: [f64; 3],
        #[serde(default)]
        transform: TransformSpec,
    },
    Torus {
        major: f64,
        minor: f64,
        #[serde(default)]
        transform: TransformSpec,
    },
    Box {
        edges: [f64; 3],
        #[serde(default)]
        transform: TransformSpec,
    },
    /// External mesh in OFF format; the mesh-size list does not re-mesh it.
    Mesh {
        path: PathBuf,
        #[serde(default)]
        transform: TransformSpec,
    },
}

impl BodySpec {
    pub fn transform(&self) -> &TransformSpec {
        match self {
            BodySpec::Sphere { transform, .. }
            | BodySpec::Ellipsoid { transform, .. }
            | BodySpec::Torus { transform, .. }
            | BodySpec::Box { transform, .. }
            | BodySpec::Mesh { transform, .. } => transform,
        }
    }

    /// Geometry identity ignoring placement; bodies with equal keys are
    /// declared identical for factorization sharing.
    pub fn geometry_key(&self) -> String {
        match self {
            BodySpec::Sphere { radius, .. } => format!("sphere:{radius:e}"),
            BodySpec::Ellipsoid { semi_axes, .. } => format!(
                "ellipsoid:{:e}:{:e}:{:e}",
                semi_axes[0], semi_axes[1], semi_axes[2]
            ),
            BodySpec::Torus { major, minor, .. } => format!("torus:{major:e}:{minor:e}"),
            BodySpec::Box { edges, .. } => {
                format!("box:{:e}:{:e}:{:e}", edges[0], edges[1], edges[2])
            }
            BodySpec::Mesh { path, .. } => format!("mesh:{}", path.display()),
        }
    }
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TransformSpec {
    #[serde(default)]
    pub rotation_axis: Option<[f64; 3]>,
    #[serde(default)]
    pub rotation_deg: Option<f64>,
    #[serde(default)]
    pub translation: Option<[f64; 3]>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverSpec {
    #[serde(default = "default_method")]
    pub method: SolverKind,
    #[serde(default = "default_recycle")]
    pub recycle: bool,
    #[serde(default = "default_m")]
    pub m: usize,
    #[serde(default)]
    pub s_exp: Option<u32>,
    #[serde(default = "default_rho")]
    pub rho: f64,
    #[serde(default = "default_seed")]
    pub seed: u64,
}

impl Default for SolverSpec {
    fn default() -> Self {
        Self {
            method: default_method(),
            recycle: default_recycle(),
            m: default_m(),
            s_exp: None,
            rho: default_rho(),
            seed: default_seed(),
        }
    }
}

fn default_method() -> SolverKind {
    SolverKind::Auto
}
fn default_recycle() -> bool {
    true
}
fn default_m() -> usize {
    100
}
fn default_rho() -> f64 {
    1.0
}
fn default_seed() -> u64 {
    DEFAULT_SEED
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QuadratureSpec {
    #[serde(default = "default_n_q")]
    pub n_q: usize,
    #[serde(default = "default_eps")]
    pub eps: f64,
    #[serde(default)]
    pub kappa: Option<f64>,
}

impl Default for QuadratureSpec {
    fn default() -> Self {
        Self {
            n_q: default_n_q(),
            eps: default_eps(),
            kappa: None,
        }
    }
}

fn default_n_q() -> usize {
    20
}
fn default_eps() -> f64 {
    1e-6
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepMode {
    /// Body translation becomes `base_translation + axis * value`.
    Translate,
    /// Body rotation becomes `rot(axis, value in degrees)` composed with the
    /// base rotation.
    Rotate,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    /// Column name in the energy report (e.g. "Z" or "angle").
    pub name: String,
    /// Index of the body the sweep moves.
    pub body: usize,
    pub mode: SweepMode,
    pub axis: [f64; 3],
    pub values: Vec<f64>,
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: RunConfig =
            serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<std::path::Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_json(&text)
    }

    pub fn validate(&self) -> Result<()> {
        if self.bodies.is_empty() {
            return Err(Error::Config("config needs at least one body".into()));
        }
        if self.h.is_empty() {
            return Err(Error::Config("mesh size list `h` must not be empty".into()));
        }
        if self.h.iter().any(|&h| !(h > 0.0)) {
            return Err(Error::Config("mesh sizes must be positive".into()));
        }
        if self.h.len() > 1 && self.h.windows(2).any(|w| w[1] >= w[0]) {
            return Err(Error::Config(
                "mesh size list must be strictly decreasing".into(),
            ));
        }
        if let Some(sweep) = &self.sweep {
            if sweep.body >= self.bodies.len() {
                return Err(Error::Config(format!(
                    "sweep body index {} out of range",
                    sweep.body
                )));
            }
            if sweep.values.is_empty() {
                return Err(Error::Config("sweep needs at least one value".into()));
            }
        }
        if let Some(methods) = &self.methods {
            if methods.len() < 2 {
                return Err(Error::Config(
                    "solver comparison requests at least two methods".into(),
                ));
            }
        }
        if self.quadrature.n_q < 2 {
            return Err(Error::Config("quadrature needs at least two nodes".into()));
        }
        if self.solver.m < 2 {
            return Err(Error::Config("Krylov dimension must be at least 2".into()));
        }
        Ok(())
    }
}
