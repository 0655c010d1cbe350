use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{OperatorMatrix, C64};
use crate::product_formula::Schedule;
use crate::superop::{DEFAULT_CESARO_TOL, DEFAULT_CLUSTER_TOL, DEFAULT_TRUNCATION_TOL};

/// Largest operator dimension an experiment may request.
pub const MAX_DIM: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scenario {
    Example1Dft,
    Example2Blocks,
    Example3TwoUnitaries,
    Decoupling,
    Cyclic,
    Zeno,
    BoundsSuite,
    Custom,
}

impl Scenario {
    pub const ALL: [Scenario; 8] = [
        Scenario::Example1Dft,
        Scenario::Example2Blocks,
        Scenario::Example3TwoUnitaries,
        Scenario::Decoupling,
        Scenario::Cyclic,
        Scenario::Zeno,
        Scenario::BoundsSuite,
        Scenario::Custom,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Scenario::Example1Dft => "example1-dft",
            Scenario::Example2Blocks => "example2-blocks",
            Scenario::Example3TwoUnitaries => "example3-two-unitaries",
            Scenario::Decoupling => "decoupling",
            Scenario::Cyclic => "cyclic",
            Scenario::Zeno => "zeno",
            Scenario::BoundsSuite => "bounds-suite",
            Scenario::Custom => "custom",
        }
    }

    pub fn description(self) -> &'static str {
        match self {
            Scenario::Example1Dft => {
                "conjugation by the unitary DFT on C^d (F⁴ = 𝟙); limit generated by the exact 4-term mean of x"
            }
            Scenario::Example2Blocks => {
                "block-mixing family ((T₁+T₂)/2, (T₁−T₂)/2; …) on C^{2d₀} under the off-diagonal sign flip; limit generated by (x₁+x₂)/2 ⊕ (x₁+x₂)/2"
            }
            Scenario::Example3TwoUnitaries => {
                "(u₁ e^{tx/n} u₂ e^{tx/n})^{n/2}(u†)^{n/2} with u = u₁u₂ ≠ 𝟙; limit generated by ½P(u₁xu₁† + uxu†)"
            }
            Scenario::Decoupling => {
                "(u e^{tx/n})ⁿ(u†)ⁿ with u = diag(e^{2πi·jφ}), φ the golden ratio conjugate; limit generated by the pinched x"
            }
            Scenario::Cyclic => {
                "(u₁e^{tx/n}u₂e^{tx/n}u₃e^{tx/n}u₄e^{tx/n})^{n/4} with u₁u₂u₃u₄ = 𝟙; limit generated by the mean of the partial-product conjugates of x"
            }
            Scenario::Zeno => "(p e^{tx/n})ⁿ for a rank-⌈d/2⌉ projector p; limit e^{t·pxp}p (non-unital, outside the convergence theorem)",
            Scenario::BoundsSuite => {
                "seeded sweeps of the √n Chernoff bound, the O(1/n) ergodic product bound and the telescoping bound"
            }
            Scenario::Custom => {
                "Π(V_{t/n})···Πⁿ(V_{t/n}) for Πx = uxu†, V_t = e^{tx}, with u and x given in the config or drawn from the seed"
            }
        }
    }
}

impl fmt::Display for Scenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Tolerances {
    #[serde(default = "default_cesaro_tol")]
    pub cesaro_tol: f64,
    #[serde(default = "default_truncation_tol")]
    pub truncation_tol: f64,
    #[serde(default = "default_cluster_tol")]
    pub cluster_tol: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            cesaro_tol: DEFAULT_CESARO_TOL,
            truncation_tol: DEFAULT_TRUNCATION_TOL,
            cluster_tol: DEFAULT_CLUSTER_TOL,
        }
    }
}

fn default_cesaro_tol() -> f64 {
    DEFAULT_CESARO_TOL
}
fn default_truncation_tol() -> f64 {
    DEFAULT_TRUNCATION_TOL
}
fn default_cluster_tol() -> f64 {
    DEFAULT_CLUSTER_TOL
}

/// Complex matrix written as rows of `[re, im]` pairs.
pub type MatrixSpec = Vec<Vec<[f64; 2]>>;

/// Explicit operators for the `custom` scenario; missing entries are drawn
/// from the seed.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CustomSpec {
    #[serde(default)]
    pub unitary: Option<MatrixSpec>,
    #[serde(default)]
    pub generator: Option<MatrixSpec>,
}

pub(crate) fn matrix_from_spec(spec: &MatrixSpec, field: &str) -> Result<OperatorMatrix> {
    let d = spec.len();
    if d == 0 || spec.iter().any(|row| row.len() != d) {
        return Err(Error::Validation(format!(
            "custom.{field} must be a non-empty square matrix"
        )));
    }
    Ok(OperatorMatrix::from_fn(d, d, |i, j| {
        C64::new(spec[i][j][0], spec[i][j][1])
    }))
}

/// A validated experiment description.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub scenario: Scenario,
    /// Operator dimension; per-block dimension `d₀` for `example2-blocks`.
    #[serde(default = "default_dim")]
    pub dim: usize,
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default = "default_t")]
    pub t: f64,
    #[serde(default = "default_n_values")]
    pub n_values: Vec<usize>,
    /// `(k_n, t_n)` pairs; replaces `n_values` when present.
    #[serde(default)]
    pub schedule: Option<Vec<(usize, f64)>>,
    #[serde(default)]
    pub tolerances: Tolerances,
    #[serde(default)]
    pub output_path: Option<String>,
    /// Seeded instances per bound family in `bounds-suite`.
    #[serde(default = "default_trials")]
    pub trials: usize,
    #[serde(default)]
    pub custom: Option<CustomSpec>,
}

fn default_dim() -> usize {
    2
}
fn default_seed() -> u64 {
    42
}
fn default_t() -> f64 {
    1.0
}
fn default_n_values() -> Vec<usize> {
    vec![16, 64, 256, 1024, 4096]
}
fn default_trials() -> usize {
    100
}

impl ExperimentConfig {
    /// Config with every optional field at its default.
    pub fn new(scenario: Scenario) -> Self {
        Self {
            scenario,
            dim: default_dim(),
            seed: default_seed(),
            t: default_t(),
            n_values: default_n_values(),
            schedule: None,
            tolerances: Tolerances::default(),
            output_path: None,
            trials: default_trials(),
            custom: None,
        }
    }

    /// `output_path`, or `<scenario>.csv`.
    pub fn output_file(&self) -> String {
        self.output_path
            .clone()
            .unwrap_or_else(|| format!("{}.csv", self.scenario))
    }

    /// The `(k, t_k)` rows the sweep will produce, in order.
    pub fn row_pairs(&self) -> Vec<(usize, f64)> {
        match &self.schedule {
            Some(pairs) => pairs.clone(),
            None => self.n_values.iter().map(|&n| (n, self.t / n as f64)).collect(),
        }
    }

    /// Operator dimension the scenario acts on.
    pub fn operator_dim(&self) -> usize {
        match self.scenario {
            Scenario::Example2Blocks => 2 * self.dim,
            _ => self.dim,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let invalid = |msg: String| Err(Error::Validation(msg));
        if self.dim == 0 {
            return invalid("dim must be at least 1".into());
        }
        if self.operator_dim() > MAX_DIM {
            return invalid(format!(
                "dim {} exceeds the guard d ≤ {MAX_DIM} (example2-blocks counts 2·d₀)",
                self.dim
            ));
        }
        if !(self.t > 0.0 && self.t.is_finite()) {
            return invalid(format!("t must be positive and finite, got {}", self.t));
        }
        let tol = &self.tolerances;
        for (name, value) in [
            ("cesaro_tol", tol.cesaro_tol),
            ("truncation_tol", tol.truncation_tol),
            ("cluster_tol", tol.cluster_tol),
        ] {
            if !(value > 0.0 && value.is_finite()) {
                return invalid(format!("tolerances.{name} must be positive, got {value}"));
            }
        }
        if self.trials == 0 {
            return invalid("trials must be at least 1".into());
        }
        match &self.schedule {
            Some(pairs) => {
                if pairs.is_empty() {
                    return invalid("schedule must be non-empty".into());
                }
                Schedule::sequenced(pairs.clone(), self.t).map_err(|e| Error::Validation(e.to_string()))?;
            }
            None => {
                if self.n_values.is_empty() {
                    return invalid("n_values must be non-empty".into());
                }
                if self.n_values[0] == 0 {
                    return invalid("n_values must be positive".into());
                }
                if let Some(w) = self.n_values.windows(2).find(|w| w[1] <= w[0]) {
                    return invalid(format!("n_values must be strictly increasing ({} then {})", w[0], w[1]));
                }
            }
        }
        if self.scenario == Scenario::BoundsSuite && self.schedule.is_some() {
            return invalid("bounds-suite takes n_values, not a schedule".into());
        }
        match (&self.custom, self.scenario) {
            (Some(_), s) if s != Scenario::Custom => {
                return invalid(format!("the custom block is only valid for scenario custom, not {s}"));
            }
            (Some(custom), _) => {
                for (field, spec) in [("unitary", &custom.unitary), ("generator", &custom.generator)] {
                    if let Some(spec) = spec {
                        let m = matrix_from_spec(spec, field)?;
                        if m.nrows() != self.dim {
                            return invalid(format!(
                                "custom.{field} is {}×{} but dim is {}",
                                m.nrows(),
                                m.nrows(),
                                self.dim
                            ));
                        }
                    }
                }
            }
            _ => {}
        }
        Ok(())
    }
}

/// Parses and validates a JSON config.
pub fn parse_config(text: &str) -> Result<ExperimentConfig> {
    let config: ExperimentConfig = serde_json::from_str(text).map_err(|e| {
        let msg = e.to_string();
        if msg.contains("unknown variant") {
            let names: Vec<&str> = Scenario::ALL.iter().map(|s| s.name()).collect();
            Error::Parse(format!("{msg}; valid scenarios: {}", names.join(", ")))
        } else {
            Error::Parse(msg)
        }
    })?;
    config.validate()?;
    Ok(config)
}

pub fn load_config(path: impl AsRef<Path>) -> Result<ExperimentConfig> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    parse_config(&text)
}
