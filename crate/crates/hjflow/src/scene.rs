//! Scene files: a versioned JSON description of a run (domain, Hamiltonian,
//! function catalog, tolerances, level table, probe ladder, seed).

use crate::error::{Error, Result};
use crate::geometry::{build_grid, cone_function, DistanceDirection, DomainSpec, GridDomain, Stencil};
use crate::hamiltonian::Hamiltonian;
use crate::math::Vec2;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::path::Path;

pub const SCENE_SCHEMA: u32 = 1;

/// Catalog entry for a node field; no expression language, just the closed
/// family the scenarios need.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FunctionSpec {
    Constant { value: f64 },
    Linear { gradient: Vec2 },
    /// Intrinsic cone d_lambda(vertex, .) + offset.
    Cone {
        vertex: Vec2,
        lambda: f64,
        #[serde(default)]
        offset: f64,
    },
    /// sum_k coeffs[k] * |x - center|^k.
    RadialPolynomial { center: Vec2, coeffs: Vec<f64> },
    CounterexampleU,
    CounterexampleV,
}

impl FunctionSpec {
    /// Evaluate the catalog entry as a node field on the grid.
    pub fn build(&self, grid: &GridDomain, spec: &Hamiltonian) -> Result<Vec<f64>> {
        let n = grid.node_count();
        Ok(match self {
            FunctionSpec::Constant { value } => vec![*value; n],
            FunctionSpec::Linear { gradient } => {
                (0..n).map(|node| grid.pos(node).dot(*gradient)).collect()
            }
            FunctionSpec::Cone { vertex, lambda, offset } => {
                let v = grid.node_at(*vertex).ok_or_else(|| {
                    Error::Config(format!("cone vertex ({}, {}) is outside", vertex.x, vertex.y))
                })?;
                cone_function(grid, spec, *lambda, v, DistanceDirection::FromSource, *offset)?
            }
            FunctionSpec::RadialPolynomial { center, coeffs } => (0..n)
                .map(|node| {
                    let r = (grid.pos(node) - *center).norm();
                    coeffs
                        .iter()
                        .enumerate()
                        .map(|(k, c)| c * r.powi(k as i32))
                        .sum()
                })
                .collect(),
            FunctionSpec::CounterexampleU => {
                (0..n).map(|node| grid.pos(node).norm() - 0.5).collect()
            }
            FunctionSpec::CounterexampleV => (0..n)
                .map(|node| {
                    let r = grid.pos(node).norm();
                    2.0 * (r * r - 0.25) / 5.0
                })
                .collect(),
        })
    }
}

/// Tolerances and numeric knobs a scene may pin.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Tolerances {
    /// Generic comparison slack for verification checks.
    pub check: f64,
    /// Convexity second-difference floor.
    pub convexity: f64,
    /// Front-matching tolerance override (None = derived default).
    #[serde(default)]
    pub front_tau: Option<f64>,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            check: 1e-6,
            convexity: 1e-9,
            front_tau: None,
        }
    }
}

fn default_h() -> f64 {
    1.0 / 64.0
}

fn default_lambda_table() -> Vec<f64> {
    vec![0.01, 0.04, 0.16, 0.64, 2.56, 10.24]
}

/// Probe-time multipliers (times 2h) for slope estimation. The ladder spans a
/// decade at ratio ~1.2 so the per-direction velocity lattice stays dense.
fn default_probe_ladder() -> Vec<f64> {
    vec![0.25, 0.3, 0.36, 0.43, 0.5, 0.6, 0.72, 0.86, 1.0, 1.2, 1.44, 1.7, 2.0]
}

fn default_seed() -> u64 {
    0x5eed
}

/// One verification request inside a scene.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "check", rename_all = "snake_case")]
pub enum CheckSpec {
    Convexity {
        function: String,
        #[serde(default)]
        expect_fail: bool,
    },
    Cica {
        function: String,
        #[serde(default)]
        expect_fail: bool,
    },
    Comparison {
        upper: String,
        lower: String,
        #[serde(default)]
        expect_fail: bool,
    },
    SmallSlopeCloseness {
        u: String,
        v: String,
        #[serde(default)]
        expect_fail: bool,
    },
}

impl CheckSpec {
    pub fn expect_fail(&self) -> bool {
        match self {
            CheckSpec::Convexity { expect_fail, .. }
            | CheckSpec::Cica { expect_fail, .. }
            | CheckSpec::Comparison { expect_fail, .. }
            | CheckSpec::SmallSlopeCloseness { expect_fail, .. } => *expect_fail,
        }
    }
}

/// A reproducible run description.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Scene {
    pub schema: u32,
    pub domain: DomainSpec,
    #[serde(default = "default_h")]
    pub h: f64,
    #[serde(default)]
    pub stencil: Stencil,
    pub hamiltonian: Hamiltonian,
    #[serde(default = "default_lambda_table")]
    pub lambda_table: Vec<f64>,
    #[serde(default)]
    pub functions: BTreeMap<String, FunctionSpec>,
    #[serde(default)]
    pub tolerances: Tolerances,
    #[serde(default = "default_probe_ladder")]
    pub probe_ladder: Vec<f64>,
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default)]
    pub checks: Vec<CheckSpec>,
}

impl Scene {
    pub fn from_json(text: &str) -> Result<Scene> {
        let scene: Scene = serde_json::from_str(text)
            .map_err(|e| Error::Parse(format!("scene: {e}")))?;
        scene.validate()?;
        Ok(scene)
    }

    pub fn load(path: &Path) -> Result<Scene> {
        let text = std::fs::read_to_string(path)?;
        Scene::from_json(&text)
    }

    fn validate(&self) -> Result<()> {
        if self.schema != SCENE_SCHEMA {
            return Err(Error::Parse(format!(
                "scene: unsupported schema {} (expected {SCENE_SCHEMA})",
                self.schema
            )));
        }
        if !(self.h > 0.0) {
            return Err(Error::Parse("scene: h must be positive".into()));
        }
        if self.tolerances.check <= 0.0 || self.tolerances.convexity <= 0.0 {
            return Err(Error::Parse("scene: tolerances must be positive".into()));
        }
        if self.lambda_table.is_empty()
            || self.lambda_table.iter().any(|l| *l <= 0.0)
            || self.lambda_table.windows(2).any(|w| w[0] >= w[1])
        {
            return Err(Error::Parse(
                "scene: lambda_table must be ascending and positive".into(),
            ));
        }
        for name in self.checks.iter().flat_map(check_function_names) {
            if !self.functions.contains_key(name) {
                return Err(Error::Parse(format!(
                    "scene: check references unknown function '{name}'"
                )));
            }
        }
        Ok(())
    }

    pub fn build_grid(&self) -> Result<GridDomain> {
        build_grid(&self.domain, self.h, self.stencil)
    }

    /// Probe times in length units: ladder entries times 2h.
    pub fn probe_times(&self) -> Vec<f64> {
        self.probe_ladder.iter().map(|c| c * 2.0 * self.h).collect()
    }

    pub fn function(&self, name: &str, grid: &GridDomain) -> Result<Vec<f64>> {
        let f = self
            .functions
            .get(name)
            .ok_or_else(|| Error::Config(format!("scene: unknown function '{name}'")))?;
        f.build(grid, &self.hamiltonian)
    }
}

fn check_function_names(check: &CheckSpec) -> Vec<&String> {
    match check {
        CheckSpec::Convexity { function, .. } | CheckSpec::Cica { function, .. } => vec![function],
        CheckSpec::Comparison { upper, lower, .. } => vec![upper, lower],
        CheckSpec::SmallSlopeCloseness { u, v, .. } => vec![u, v],
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const SCENE: &str = r#"{
        "schema": 1,
        "domain": {"kind": "box", "min": {"x": 0.0, "y": 0.0}, "max": {"x": 1.0, "y": 1.0}},
        "h": 0.125,
        "hamiltonian": {"kind": "quadratic_isotropic"},
        "functions": {
            "u": {"kind": "linear", "gradient": {"x": 1.0, "y": 0.0}},
            "c": {"kind": "cone", "vertex": {"x": 0.5, "y": 0.5}, "lambda": 1.0}
        },
        "checks": [
            {"check": "convexity", "function": "u"}
        ]
    }"#;

    #[test]
    fn scene_roundtrip_and_functions() {
        let scene = Scene::from_json(SCENE).unwrap();
        assert_eq!(scene.schema, 1);
        let grid = scene.build_grid().unwrap();
        let u = scene.function("u", &grid).unwrap();
        let node = grid.node_at(Vec2::new(0.5, 0.25)).unwrap();
        assert_eq!(u[node], 0.5);
        let c = scene.function("c", &grid).unwrap();
        let v = grid.node_at(Vec2::new(0.5, 0.5)).unwrap();
        assert_eq!(c[v], 0.0);
        // serde round trip
        let text = serde_json::to_string(&scene).unwrap();
        let again = Scene::from_json(&text).unwrap();
        assert_eq!(again.functions.len(), 2);
    }

    #[test]
    fn scene_rejects_bad_schema_and_unknown_function_refs() {
        let bad = SCENE.replace("\"schema\": 1", "\"schema\": 2");
        assert!(Scene::from_json(&bad).is_err());
        let bad = SCENE.replace("\"function\": \"u\"", "\"function\": \"nope\"");
        assert!(Scene::from_json(&bad).is_err());
    }

    #[test]
    fn radial_polynomial_and_counterexample_entries() {
        let grid = build_grid(
            &DomainSpec::Annulus { r_in: 0.5, r_out: 2.0 },
            0.05,
            Stencil::N16,
        )
        .unwrap();
        let spec = Hamiltonian::rotation_counterexample(2.0).unwrap();
        let u = FunctionSpec::CounterexampleU.build(&grid, &spec).unwrap();
        let v = FunctionSpec::CounterexampleV.build(&grid, &spec).unwrap();
        let poly = FunctionSpec::RadialPolynomial {
            center: Vec2::ZERO,
            coeffs: vec![-0.5, 1.0],
        }
        .build(&grid, &spec)
        .unwrap();
        for node in grid.inside_nodes() {
            assert!((u[node] - poly[node]).abs() < 1e-12);
            let r = grid.pos(node).norm();
            assert!((v[node] - 2.0 * (r * r - 0.25) / 5.0).abs() < 1e-12);
        }
    }
}
