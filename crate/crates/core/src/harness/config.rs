use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::adversary::{AdversarialWeights, DiscriminatorConfig};
use crate::curiosity::CuriosityKind;
use crate::dynamics::{EnsembleConfig, MemberStreams};
use crate::envs::{EnvConfig, Task};
use crate::error::{Error, Result};
use crate::nn::AdamConfig;
use crate::planning::CemConfig;

/// Exploration method, named as in experiment configs.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Adversarial,
    MaxJr,
    Tvax,
    Random,
}

impl Method {
    pub const ALL: [Method; 4] = [Method::Adversarial, Method::MaxJr, Method::Tvax, Method::Random];

    pub fn kind(self) -> CuriosityKind {
        match self {
            Method::Adversarial => CuriosityKind::Adversarial,
            Method::MaxJr => CuriosityKind::JensenRenyi,
            Method::Tvax => CuriosityKind::TrajectoryVariance,
            Method::Random => CuriosityKind::Random,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Method::Adversarial => "adversarial",
            Method::MaxJr => "max_jr",
            Method::Tvax => "tvax",
            Method::Random => "random",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NetSettings {
    pub hidden: Vec<usize>,
    pub learning_rate: f64,
}

impl Default for NetSettings {
    fn default() -> Self {
        Self {
            hidden: vec![32, 32],
            learning_rate: 1e-3,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainingSettings {
    /// Joint-training epochs over the whole buffer after each round.
    pub epochs: usize,
    pub batch_size: usize,
}

impl Default for TrainingSettings {
    fn default() -> Self {
        Self {
            epochs: 5,
            batch_size: 32,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExploitConfig {
    pub tasks: Vec<Task>,
    pub episodes: usize,
    pub episode_length: usize,
    pub cem: CemConfig,
}

impl Default for ExploitConfig {
    fn default() -> Self {
        Self {
            tasks: Task::ALL.to_vec(),
            episodes: 2,
            episode_length: 30,
            cem: CemConfig {
                candidates: 600,
                ..CemConfig::default()
            },
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepConfig {
    pub sizes: Vec<usize>,
    pub methods: Vec<Method>,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            sizes: vec![1, 2, 4, 8, 16],
            methods: Method::ALL.to_vec(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TransferConfig {
    /// Random-policy episodes collected in domain A.
    pub source_episodes: usize,
    /// Joint-training epochs on the domain-A data.
    pub source_epochs: usize,
    pub sample_sizes: Vec<usize>,
    pub fine_tune_steps: usize,
    pub fine_tune_batch: usize,
    pub fine_tune_learning_rate: f64,
    pub control_size: usize,
    /// Seed of the held-out domain-B control set, shared by every run.
    pub control_seed: u64,
    /// Speed range of control-set states.
    pub control_speed: f64,
}

impl Default for TransferConfig {
    fn default() -> Self {
        Self {
            source_episodes: 20,
            source_epochs: 20,
            sample_sizes: vec![0, 50, 100, 200, 400],
            fine_tune_steps: 100,
            fine_tune_batch: 32,
            fine_tune_learning_rate: 1e-3,
            control_size: 2000,
            control_seed: 0,
            control_speed: 1.5,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub method: Method,
    pub ensemble_size: usize,
    pub seeds: Vec<u64>,
    pub episode_length: usize,
    /// Exploration rounds after the random bootstrap round.
    pub rounds: usize,
    pub episodes_per_round: usize,
    pub context_len: usize,
    /// In transitions; whole episodes are evicted oldest first.
    pub buffer_capacity: usize,
    pub env: EnvConfig,
    /// The discriminator sees futures of `cem.horizon` steps.
    pub cem: CemConfig,
    pub model: NetSettings,
    pub discriminator: NetSettings,
    pub disc_threshold: f64,
    pub training: TrainingSettings,
    pub weights: AdversarialWeights,
    pub exploit: ExploitConfig,
    pub sweep: SweepConfig,
    pub transfer: TransferConfig,
    pub out_dir: PathBuf,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            method: Method::Adversarial,
            ensemble_size: 1,
            seeds: vec![0, 1, 2, 3, 4],
            episode_length: 30,
            rounds: 15,
            episodes_per_round: 1,
            context_len: 1,
            buffer_capacity: 100_000,
            env: EnvConfig::default(),
            cem: CemConfig::default(),
            model: NetSettings::default(),
            discriminator: NetSettings::default(),
            disc_threshold: 0.75,
            training: TrainingSettings::default(),
            weights: AdversarialWeights::default(),
            exploit: ExploitConfig::default(),
            sweep: SweepConfig::default(),
            transfer: TransferConfig::default(),
            out_dir: PathBuf::from("out"),
        }
    }
}

fn positive(name: &str, v: usize) -> Result<()> {
    if v == 0 {
        return Err(Error::Config(format!("{name} must be positive")));
    }
    Ok(())
}

fn learning_rate(name: &str, v: f64) -> Result<()> {
    if !(v.is_finite() && v > 0.0) {
        return Err(Error::Config(format!("{name} must be a positive learning rate, got {v}")));
    }
    Ok(())
}

impl ExperimentConfig {
    pub fn from_toml_str(s: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(s).map_err(|e| Error::Config(e.to_string()))?;
        cfg.resolve()
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    /// Copies the environment's action bounds into both planners and
    /// validates the result.
    pub fn resolve(mut self) -> Result<Self> {
        let env = self.env.build()?;
        self.cem.action_bounds = env.action_bounds();
        self.exploit.cem.action_bounds = env.action_bounds();
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        positive("ensemble_size", self.ensemble_size)?;
        positive("episode_length", self.episode_length)?;
        positive("episodes_per_round", self.episodes_per_round)?;
        positive("context_len", self.context_len)?;
        positive("training.epochs", self.training.epochs)?;
        positive("training.batch_size", self.training.batch_size)?;
        if self.seeds.is_empty() {
            return Err(Error::Config("at least one seed is required".into()));
        }
        let mut sorted = self.seeds.clone();
        sorted.sort_unstable();
        sorted.dedup();
        if sorted.len() != self.seeds.len() {
            return Err(Error::Config("seeds must be distinct".into()));
        }
        self.cem.validate()?;
        self.exploit.cem.validate()?;
        if self.episode_length + 1 < self.context_len + self.cem.horizon {
            return Err(Error::Config(format!(
                "episodes of {} steps hold no window of context {} and horizon {}",
                self.episode_length, self.context_len, self.cem.horizon
            )));
        }
        if self.buffer_capacity < self.episode_length {
            return Err(Error::Config("buffer capacity is smaller than one episode".into()));
        }
        learning_rate("model.learning_rate", self.model.learning_rate)?;
        learning_rate("discriminator.learning_rate", self.discriminator.learning_rate)?;
        learning_rate("transfer.fine_tune_learning_rate", self.transfer.fine_tune_learning_rate)?;
        if self.model.hidden.contains(&0) || self.discriminator.hidden.contains(&0) {
            return Err(Error::Config("hidden layer widths must be positive".into()));
        }
        if !(0.0..=1.0).contains(&self.disc_threshold) {
            return Err(Error::Config(format!("disc_threshold {} must lie in [0, 1]", self.disc_threshold)));
        }
        self.weights.validate().map_err(|e| Error::Config(e.to_string()))?;
        positive("exploit.episodes", self.exploit.episodes)?;
        positive("exploit.episode_length", self.exploit.episode_length)?;
        if self.exploit.tasks.is_empty() {
            return Err(Error::Config("exploit.tasks is empty".into()));
        }
        if self.sweep.sizes.contains(&0) {
            return Err(Error::Config("sweep sizes must be positive".into()));
        }
        positive("transfer.fine_tune_batch", self.transfer.fine_tune_batch)?;
        positive("transfer.control_size", self.transfer.control_size)?;
        positive("transfer.source_episodes", self.transfer.source_episodes)?;
        Ok(())
    }

    pub fn ensemble_config(&self) -> EnsembleConfig {
        EnsembleConfig {
            size: self.ensemble_size,
            hidden: self.model.hidden.clone(),
            adam: AdamConfig::with_learning_rate(self.model.learning_rate),
            member_streams: MemberStreams::Distinct,
        }
    }

    pub fn discriminator_config(&self) -> DiscriminatorConfig {
        DiscriminatorConfig {
            hidden: self.discriminator.hidden.clone(),
            adam: AdamConfig::with_learning_rate(self.discriminator.learning_rate),
            training_threshold: self.disc_threshold,
        }
    }

    /// Digest of everything that determines a run except the seed list and
    /// the output location.
    pub fn hash(&self) -> String {
        let mut c = self.clone();
        c.seeds.clear();
        c.out_dir = PathBuf::new();
        let json = serde_json::to_string(&c).expect("config serializes");
        let digest = Sha256::digest(json.as_bytes());
        digest[..8].iter().map(|b| format!("{b:02x}")).collect()
    }
}
