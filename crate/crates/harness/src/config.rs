//! Experiment configuration, read from TOML with strict key checking.
//!
//! ```toml
//! seed = 7
//!
//! [process]
//! kind = "push-sum"
//! nodes = 5
//! topology = "ring-chords"
//! alpha = 0.5
//! loss = [0.1, 0.3]        # cycled over the edges; a single number is uniform
//!
//! [initial]
//! x0 = { kind = "random-positive", seed = 11 }
//! w0 = { kind = "ones" }
//!
//! [horizon]
//! n = 10000
//! checkpoints = "geometric"
//! ```

use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use ratcon::consensus::{CheckpointSchedule, DEFAULT_FIT_WINDOW};
use ratcon::generators::{Digraph, ProcessSpec, PushSumConfig, DEFAULT_ALPHA};
use ratcon::primitivity::{DEFAULT_BACKWARD_STRIDE, DEFAULT_INDEX_CAP, DEFAULT_STATE_CAP};
use ratcon::{NonNegMatrix, NonNegVector, QrOptions};

use crate::HarnessError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub seed: u64,
    pub process: ProcessConfig,
    #[serde(default)]
    pub initial: InitialConfig,
    #[serde(default)]
    pub horizon: HorizonConfig,
    #[serde(default)]
    pub estimators: EstimatorConfig,
    #[serde(default)]
    pub output: OutputConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum ProcessConfig {
    PushSum {
        nodes: usize,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        topology: Option<Topology>,
        /// Explicit directed edges `[sender, receiver]`, 0-based.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        edges: Option<Vec<[usize; 2]>>,
        #[serde(default = "default_alpha")]
        alpha: f64,
        #[serde(default)]
        loss: LossConfig,
    },
    Iid {
        matrices: Vec<Vec<Vec<f64>>>,
        probs: Vec<f64>,
    },
    Markov {
        matrices: Vec<Vec<Vec<f64>>>,
        transition: Vec<Vec<f64>>,
    },
    Constant {
        matrix: Vec<Vec<f64>>,
    },
}

fn default_alpha() -> f64 {
    DEFAULT_ALPHA
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Topology {
    /// `i → i+1 (mod p)`.
    Ring,
    /// `i → i+1` and `i → i+2 (mod p)`.
    RingChords,
    Complete,
}

/// A single probability for every edge, or a list cycled over the edges.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum LossConfig {
    Uniform(f64),
    Cycled(Vec<f64>),
}

impl Default for LossConfig {
    fn default() -> Self {
        LossConfig::Uniform(0.0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum VectorConfig {
    Literal {
        values: Vec<f64>,
    },
    /// Independent `U(0.5, 1.5)` entries from a ChaCha stream seeded by
    /// `seed`.
    RandomPositive {
        seed: u64,
    },
    /// Independent `U(−1, 1)` entries.
    RandomSigned {
        seed: u64,
    },
    Ones,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitialConfig {
    pub x0: VectorConfig,
    pub w0: VectorConfig,
}

impl Default for InitialConfig {
    fn default() -> Self {
        InitialConfig { x0: VectorConfig::RandomPositive { seed: 1 }, w0: VectorConfig::Ones }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ScheduleName {
    Geometric,
    Linear,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HorizonConfig {
    pub n: u64,
    pub checkpoints: ScheduleName,
    /// Ratio of the geometric schedule.
    pub ratio: f64,
    /// Spacing of the linear schedule.
    pub every: u64,
    /// Trailing fraction of checkpoints used in rate fits.
    pub fit_window: f64,
}

impl Default for HorizonConfig {
    fn default() -> Self {
        HorizonConfig {
            n: 10_000,
            checkpoints: ScheduleName::Geometric,
            ratio: 1.2,
            every: 100,
            fit_window: DEFAULT_FIT_WINDOW,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EstimatorConfig {
    /// Exponents to estimate; `0` means the full spectrum.
    pub k: usize,
    pub n: u64,
    pub burn_in: u64,
    pub reorth_period: u64,
    pub replicates: usize,
    pub birkhoff_m: Vec<u64>,
    pub trials: usize,
    pub primitivity_samples: usize,
    pub index_cap: u64,
    pub state_cap: usize,
    pub backward_stride: u64,
}

impl Default for EstimatorConfig {
    fn default() -> Self {
        EstimatorConfig {
            k: 2,
            n: 100_000,
            burn_in: 1_000,
            reorth_period: 1,
            replicates: 16,
            birkhoff_m: vec![16, 32, 64, 128, 256, 512],
            trials: 256,
            primitivity_samples: 10_000,
            index_cap: DEFAULT_INDEX_CAP,
            state_cap: DEFAULT_STATE_CAP,
            backward_stride: DEFAULT_BACKWARD_STRIDE,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputConfig {
    /// File-name prefix for every table written.
    pub prefix: String,
}

impl Default for OutputConfig {
    fn default() -> Self {
        OutputConfig { prefix: "run".into() }
    }
}

fn config_err(msg: impl Into<String>) -> HarnessError {
    HarnessError::Config(msg.into())
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self, HarnessError> {
        let cfg: ExperimentConfig = toml::from_str(text).map_err(|e| config_err(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, HarnessError> {
        let text =
            std::fs::read_to_string(path).map_err(|e| config_err(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("configuration is always representable in TOML")
    }

    /// Checks everything that can be checked without running.
    pub fn validate(&self) -> Result<(), HarnessError> {
        let spec = self.process_spec()?;
        let p = spec.dim();
        self.x0(p)?;
        self.w0(p)?;
        self.schedule()?;
        let h = &self.horizon;
        if !(h.fit_window > 0.0 && h.fit_window <= 1.0) {
            return Err(config_err("horizon.fit_window must lie in (0, 1]"));
        }
        let e = &self.estimators;
        if e.k > p {
            return Err(config_err(format!("estimators.k = {} exceeds the dimension {p}", e.k)));
        }
        if e.replicates == 0 || e.n == 0 || e.reorth_period == 0 || e.trials == 0 {
            return Err(config_err("estimator counts must be positive"));
        }
        if e.birkhoff_m.contains(&0) {
            return Err(config_err("estimators.birkhoff_m entries must be positive"));
        }
        if self.output.prefix.is_empty() || self.output.prefix.contains(['/', '\\']) {
            return Err(config_err("output.prefix must be a plain, non-empty file-name prefix"));
        }
        Ok(())
    }

    pub fn process_spec(&self) -> Result<ProcessSpec, HarnessError> {
        let matrix = |rows: &Vec<Vec<f64>>| NonNegMatrix::from_rows(rows).map_err(|e| config_err(e.to_string()));
        let spec = match &self.process {
            ProcessConfig::PushSum { nodes, topology, edges, alpha, loss } => {
                let graph = match (topology, edges) {
                    (Some(t), None) => match t {
                        Topology::Ring => Digraph::ring(*nodes),
                        Topology::RingChords => Digraph::circulant(*nodes, &[1, 2]),
                        Topology::Complete => Digraph::complete(*nodes),
                    },
                    (None, Some(list)) => Digraph::new(*nodes, list.iter().map(|e| (e[0], e[1])).collect())
                        .map_err(|e| config_err(e.to_string()))?,
                    _ => return Err(config_err("push-sum needs exactly one of `topology` or `edges`")),
                };
                let m = graph.edges().len();
                let loss = match loss {
                    LossConfig::Uniform(r) => vec![*r; m],
                    LossConfig::Cycled(list) if list.is_empty() => {
                        return Err(config_err("loss list must not be empty"));
                    }
                    LossConfig::Cycled(list) => (0..m).map(|k| list[k % list.len()]).collect(),
                };
                let cfg = PushSumConfig::uniform(graph, *alpha, 0.0)
                    .and_then(|c| c.with_loss(loss))
                    .map_err(|e| config_err(e.to_string()))?;
                ProcessSpec::PushSum(cfg)
            }
            ProcessConfig::Iid { matrices, probs } => ProcessSpec::IidFamily {
                matrices: matrices.iter().map(matrix).collect::<Result<_, _>>()?,
                probs: probs.clone(),
            },
            ProcessConfig::Markov { matrices, transition } => ProcessSpec::MarkovFamily {
                matrices: matrices.iter().map(matrix).collect::<Result<_, _>>()?,
                transition: transition.clone(),
            },
            ProcessConfig::Constant { matrix: rows } => ProcessSpec::Constant(matrix(rows)?),
        };
        spec.compile().map_err(|e| config_err(e.to_string()))?;
        Ok(spec)
    }

    pub fn x0(&self, p: usize) -> Result<Vec<f64>, HarnessError> {
        let v = realize(&self.initial.x0, p)?;
        if v.iter().any(|x| !x.is_finite()) {
            return Err(config_err("x0 entries must be finite"));
        }
        Ok(v)
    }

    pub fn w0(&self, p: usize) -> Result<NonNegVector, HarnessError> {
        if matches!(self.initial.w0, VectorConfig::RandomSigned { .. }) {
            return Err(config_err("w0 must be nonnegative; random-signed is not allowed"));
        }
        NonNegVector::new(realize(&self.initial.w0, p)?).map_err(|e| config_err(format!("w0: {e}")))
    }

    pub fn schedule(&self) -> Result<CheckpointSchedule, HarnessError> {
        let h = &self.horizon;
        let s = match h.checkpoints {
            ScheduleName::Geometric => CheckpointSchedule::Geometric { ratio: h.ratio },
            ScheduleName::Linear => CheckpointSchedule::Linear { every: h.every },
        };
        s.points(1).map_err(|e| config_err(e.to_string()))?;
        Ok(s)
    }

    pub fn qr_options(&self, p: usize) -> QrOptions {
        let e = &self.estimators;
        let k = if e.k == 0 { p } else { e.k };
        QrOptions::new(k)
            .with_n(e.n)
            .with_burn_in(e.burn_in)
            .with_reorth_period(e.reorth_period)
            .with_replicates(e.replicates)
    }
}

/// Draws or copies an initial vector of length `p`.
pub fn realize(v: &VectorConfig, p: usize) -> Result<Vec<f64>, HarnessError> {
    Ok(match v {
        VectorConfig::Literal { values } => {
            if values.len() != p {
                return Err(config_err(format!("initial vector has {} entries, expected {p}", values.len())));
            }
            values.clone()
        }
        VectorConfig::RandomPositive { seed } => {
            let mut rng = ChaCha8Rng::seed_from_u64(*seed);
            (0..p).map(|_| rng.random_range(0.5..1.5)).collect()
        }
        VectorConfig::RandomSigned { seed } => {
            let mut rng = ChaCha8Rng::seed_from_u64(*seed);
            (0..p).map(|_| rng.random_range(-1.0..1.0)).collect()
        }
        VectorConfig::Ones => vec![1.0; p],
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    const SAMPLE: &str = r#"
seed = 7

[process]
kind = "push-sum"
nodes = 5
topology = "ring-chords"
loss = [0.1, 0.3]

[initial]
x0 = { kind = "random-signed", seed = 3 }
w0 = { kind = "ones" }

[horizon]
n = 500
checkpoints = "linear"
ratio = 1.2
every = 50
fit_window = 0.5
"#;

    #[test]
    fn parses_and_round_trips() {
        let cfg = ExperimentConfig::from_toml(SAMPLE).unwrap();
        assert_eq!(cfg.horizon.n, 500);
        let again = ExperimentConfig::from_toml(&cfg.to_toml()).unwrap();
        assert_eq!(cfg, again);
        let spec = cfg.process_spec().unwrap();
        assert_eq!(spec.dim(), 5);
    }

    #[test]
    fn partial_tables_take_defaults() {
        let text = "seed = 1\n[process]\nkind = \"push-sum\"\nnodes = 3\ntopology = \"ring\"\n[horizon]\nn = 50\n[estimators]\nreplicates = 2\n";
        let cfg = ExperimentConfig::from_toml(text).unwrap();
        assert_eq!(cfg.horizon.n, 50);
        assert_eq!(cfg.horizon.every, HorizonConfig::default().every);
        assert_eq!(cfg.estimators.replicates, 2);
        assert_eq!(cfg.estimators.n, EstimatorConfig::default().n);
    }

    #[test]
    fn rejects_unknown_keys() {
        let bad = SAMPLE.replace("nodes = 5", "nodes = 5\nnodez = 4");
        assert!(matches!(ExperimentConfig::from_toml(&bad), Err(HarnessError::Config(_))));
        let bad = format!("{SAMPLE}\n[output]\nprefx = \"a\"\n");
        assert!(ExperimentConfig::from_toml(&bad).is_err());
    }

    #[test]
    fn rejects_bad_values() {
        assert!(ExperimentConfig::from_toml(&SAMPLE.replace("loss = [0.1, 0.3]", "loss = 1.5")).is_err());
        assert!(ExperimentConfig::from_toml(&SAMPLE.replace("kind = \"ones\"", "kind = \"random-signed\", seed = 1"))
            .is_err());
        assert!(ExperimentConfig::from_toml(&SAMPLE.replace("topology = \"ring-chords\"", "")).is_err());
    }

    #[test]
    fn random_vectors_are_seeded() {
        let a = realize(&VectorConfig::RandomPositive { seed: 4 }, 6).unwrap();
        assert_eq!(a, realize(&VectorConfig::RandomPositive { seed: 4 }, 6).unwrap());
        assert_ne!(a, realize(&VectorConfig::RandomPositive { seed: 5 }, 6).unwrap());
        assert!(a.iter().all(|v| (0.5..1.5).contains(v)));
    }
}
