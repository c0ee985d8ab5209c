//! Problem configuration: a JSON document describing the model, the driving
//! diffusion, the lattice, the driver, and run parameters. Builtin model
//! names cover the named instances so paper-scale runs need no hand-typed
//! matrices.

use oblique_core::geometry::{builtin, classical_embedding, ControlledTransitionModel};
use oblique_core::lattice::{Driver, Quadrature, SdeCoefficients};
use oblique_core::linalg::Mat;
use oblique_core::markov::StochasticMatrix;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct ProblemConfig {
    pub model: ModelConfig,
    #[serde(default)]
    pub sde: SdeConfig,
    #[serde(default)]
    pub lattice: LatticeConfig,
    #[serde(default)]
    pub driver: DriverConfig,
    #[serde(default)]
    pub run: RunConfig,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    /// One of: example1, example2, example3, classical, symmetric, dim3,
    /// pair-positive-empty. Omit to specify matrices explicitly.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub builtin: Option<String>,
    /// Mode count for the symmetric builtin.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub d: Option<usize>,
    /// Free transition probabilities for the dim3 builtin.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub p_free: Option<[f64; 3]>,
    /// Cost vector for the dim3/symmetric builtins.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub costs: Option<Vec<f64>>,
    /// Pairwise cost matrix for the classical builtin.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub cost_matrix: Option<Vec<Vec<f64>>>,
    /// Control-grid size for the example3 builtin.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub control_grid: Option<usize>,
    /// Explicit model: ordered control labels.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub controls: Option<Vec<f64>>,
    /// Explicit model: one transition matrix per control.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub p: Option<Vec<Vec<Vec<f64>>>>,
    /// Explicit model: one mean-cost vector per control.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub cbar: Option<Vec<Vec<f64>>>,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct SdeConfig {
    pub b0: f64,
    pub b1: f64,
    pub s0: f64,
    pub s1: f64,
    pub x0: f64,
}

impl Default for SdeConfig {
    fn default() -> Self {
        SdeConfig {
            b0: 0.0,
            b1: 0.0,
            s0: 1.0,
            s1: 0.0,
            x0: 0.0,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct LatticeConfig {
    pub t_horizon: f64,
    pub steps: usize,
    pub grid_points: usize,
    /// Standard deviations of the terminal law covered by the grid.
    pub coverage: f64,
    /// "trinomial" or "gaussian".
    pub quadrature: String,
}

impl Default for LatticeConfig {
    fn default() -> Self {
        LatticeConfig {
            t_horizon: 1.0,
            steps: 20,
            grid_points: 41,
            coverage: 4.0,
            quadrature: "trinomial".to_string(),
        }
    }
}

/// Closed-form coefficient family for per-mode functions of (t, x) with
/// optional linear own-component (y, z) terms.
#[derive(Debug, Clone, Default, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct FnConfig {
    pub constant: f64,
    pub t: f64,
    pub x: f64,
    pub x2: f64,
    pub sin_x: f64,
    pub cos_x: f64,
    pub tanh_x: f64,
    pub y: f64,
    pub z: f64,
}

impl FnConfig {
    pub fn eval_tx(&self, t: f64, x: f64) -> f64 {
        self.constant
            + self.t * t
            + self.x * x
            + self.x2 * x * x
            + self.sin_x * x.sin()
            + self.cos_x * x.cos()
            + self.tanh_x * x.tanh()
    }

    pub fn uses_yz(&self) -> bool {
        self.y != 0.0 || self.z != 0.0
    }
}

#[derive(Debug, Clone, Default, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct DriverConfig {
    /// Running profit per mode; a single entry broadcasts to every mode.
    pub f: Vec<FnConfig>,
    /// Terminal payoff per mode; a single entry broadcasts.
    pub g: Vec<FnConfig>,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub seed: u64,
    pub paths: usize,
    pub baselines: usize,
    pub tolerance: f64,
    pub resolution: usize,
    pub refine_levels: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            seed: 0,
            paths: 10_000,
            baselines: 20,
            tolerance: 1e-9,
            resolution: 64,
            refine_levels: 3,
        }
    }
}

#[derive(Debug)]
pub struct ConfigError(pub String);

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "config error: {}", self.0)
    }
}

impl std::error::Error for ConfigError {}

impl ProblemConfig {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        serde_json::from_str(text).map_err(|e| ConfigError(e.to_string()))
    }

    /// Canonical serialization; `parse(emit(parse(text)))` is a fixed point.
    pub fn canonical_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    /// FNV-1a fingerprint of the canonical form, for report headers.
    pub fn hash(&self) -> String {
        let mut h: u64 = 0xcbf2_9ce4_8422_2325;
        for b in self.canonical_json().as_bytes() {
            h ^= *b as u64;
            h = h.wrapping_mul(0x0000_0100_0000_01b3);
        }
        format!("{h:016x}")
    }

    pub fn build_model(&self) -> Result<ControlledTransitionModel, ConfigError> {
        let m = &self.model;
        if let Some(name) = &m.builtin {
            return match name.as_str() {
                "example1" => Ok(builtin::example1()),
                "example2" => Ok(builtin::example2()),
                "example3" => Ok(builtin::example3(m.control_grid.unwrap_or(101))),
                "pair-positive-empty" => Ok(builtin::pair_positive_empty()),
                "symmetric" => {
                    let d = m.d.ok_or_else(|| {
                        ConfigError("symmetric builtin needs model.d".to_string())
                    })?;
                    let costs = m.costs.clone().unwrap_or_else(|| vec![1.0; d]);
                    builtin::symmetric(d, costs).map_err(|e| ConfigError(e.to_string()))
                }
                "dim3" => {
                    let [p, q, r] = m.p_free.ok_or_else(|| {
                        ConfigError("dim3 builtin needs model.p_free = [p, q, r]".to_string())
                    })?;
                    let costs = m.costs.clone().unwrap_or_else(|| vec![1.0; 3]);
                    builtin::dim3(p, q, r, costs).map_err(|e| ConfigError(e.to_string()))
                }
                "classical" => {
                    let rows = m.cost_matrix.clone().ok_or_else(|| {
                        ConfigError("classical builtin needs model.cost_matrix".to_string())
                    })?;
                    classical_embedding(&Mat::from_rows(&rows))
                        .map_err(|e| ConfigError(e.to_string()))
                }
                other => Err(ConfigError(format!("unknown builtin model '{other}'"))),
            };
        }
        let controls = m
            .controls
            .clone()
            .ok_or_else(|| ConfigError("explicit model needs model.controls".to_string()))?;
        let p_raw =
            m.p.clone()
                .ok_or_else(|| ConfigError("explicit model needs model.p".to_string()))?;
        let cbar = m
            .cbar
            .clone()
            .ok_or_else(|| ConfigError("explicit model needs model.cbar".to_string()))?;
        let matrices: Result<Vec<StochasticMatrix>, ConfigError> = p_raw
            .iter()
            .map(|rows| StochasticMatrix::from_rows(rows).map_err(|e| ConfigError(e.to_string())))
            .collect();
        ControlledTransitionModel::new(controls, matrices?, cbar)
            .map_err(|e| ConfigError(e.to_string()))
    }

    pub fn sde_coefficients(&self) -> SdeCoefficients {
        SdeCoefficients {
            b0: self.sde.b0,
            b1: self.sde.b1,
            s0: self.sde.s0,
            s1: self.sde.s1,
            x0: self.sde.x0,
        }
    }

    pub fn quadrature(&self) -> Result<Quadrature, ConfigError> {
        match self.lattice.quadrature.as_str() {
            "trinomial" => Ok(Quadrature::Trinomial),
            "gaussian" => Ok(Quadrature::Gaussian),
            other => Err(ConfigError(format!("unknown quadrature '{other}'"))),
        }
    }

    /// Assemble the driver, broadcasting single entries over the modes.
    pub fn build_driver(&self, d: usize) -> Result<Driver, ConfigError> {
        let expand = |list: &[FnConfig], what: &str| -> Result<Vec<FnConfig>, ConfigError> {
            match list.len() {
                0 => Ok(vec![FnConfig::default(); d]),
                1 => Ok(vec![list[0].clone(); d]),
                n if n == d => Ok(list.to_vec()),
                n => Err(ConfigError(format!(
                    "driver.{what} has {n} entries for {d} modes"
                ))),
            }
        };
        let f = expand(&self.driver.f, "f")?;
        let g = expand(&self.driver.g, "g")?;
        let uses_yz = f.iter().any(FnConfig::uses_yz);
        Ok(Driver::new(
            move |t, x, i, y, z| {
                let c = &f[i];
                c.eval_tx(t, x) + c.y * y + c.z * z
            },
            move |x, i| g[i].eval_tx(0.0, x),
            uses_yz,
        ))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_roundtrip_canonicalizes() {
        let text = r#"{
            "model": {"builtin": "example2"},
            "run": {"seed": 7}
        }"#;
        let cfg = ProblemConfig::parse(text).unwrap();
        let canon = cfg.canonical_json();
        let cfg2 = ProblemConfig::parse(&canon).unwrap();
        assert_eq!(cfg, cfg2);
        assert_eq!(canon, cfg2.canonical_json());
        assert_eq!(cfg.hash(), cfg2.hash());
    }

    #[test]
    fn builtin_models_build() {
        for name in ["example1", "example2", "example3", "pair-positive-empty"] {
            let cfg =
                ProblemConfig::parse(&format!(r#"{{"model": {{"builtin": "{name}"}}}}"#)).unwrap();
            cfg.build_model().unwrap();
        }
        let cfg = ProblemConfig::parse(r#"{"model": {"builtin": "symmetric", "d": 4}}"#).unwrap();
        assert_eq!(cfg.build_model().unwrap().d(), 4);
        let cfg =
            ProblemConfig::parse(r#"{"model": {"builtin": "dim3", "p_free": [0.5, 0.5, 0.5]}}"#)
                .unwrap();
        assert_eq!(cfg.build_model().unwrap().d(), 3);
        let cfg = ProblemConfig::parse(
            r#"{"model": {"builtin": "classical",
                 "cost_matrix": [[0.0, 1.0], [1.0, 0.0]]}}"#,
        )
        .unwrap();
        assert_eq!(cfg.build_model().unwrap().d(), 2);
    }

    #[test]
    fn explicit_model_builds() {
        let cfg = ProblemConfig::parse(
            r#"{"model": {
                "controls": [0.0],
                "p": [[[0.0, 1.0], [1.0, 0.0]]],
                "cbar": [[0.5, 0.5]]
            }}"#,
        )
        .unwrap();
        let model = cfg.build_model().unwrap();
        assert_eq!(model.d(), 2);
    }

    #[test]
    fn unknown_fields_rejected() {
        let err = ProblemConfig::parse(r#"{"model": {"builtin": "example2"}, "bogus": 1}"#);
        assert!(err.is_err());
    }

    #[test]
    fn driver_broadcast_and_yz_flag() {
        let cfg = ProblemConfig::parse(
            r#"{"model": {"builtin": "example2"},
                "driver": {"f": [{"constant": 1.0, "y": 0.5}], "g": [{"tanh_x": 1.0}]}}"#,
        )
        .unwrap();
        let driver = cfg.build_driver(3).unwrap();
        assert!(driver.depends_on_yz());
        assert_eq!(driver.f(0.0, 0.0, 2, 2.0, 0.0), 2.0);
    }
}
