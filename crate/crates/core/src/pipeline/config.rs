use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::candidates::MatchScope;
use crate::citegraph::MetaPath;
use crate::corpus::DEFAULT_MIN_PARAGRAPH_WORDS;
use crate::encoder::{Featurizer, TrainConfig, DEFAULT_EMBED_DIM, DEFAULT_HASH_DIM, DEFAULT_MAX_TOKENS};
use crate::error::{Error, Result};
use crate::metrics::MetricsConfig;
use crate::ranker::ScoreOptions;
use crate::selftrain::SelfTrainConfig;

/// Input files and the artifact directory. Relative paths resolve against
/// the process working directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Paths {
    pub corpus: PathBuf,
    pub labels: PathBuf,
    pub output_dir: PathBuf,
    /// Optional external embeddings (JSON Lines or TSV).
    pub embeddings: Option<PathBuf>,
}

impl Default for Paths {
    fn default() -> Self {
        Paths {
            corpus: "corpus.jsonl".into(),
            labels: "labels.jsonl".into(),
            output_dir: "out".into(),
            embeddings: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TupleConfig {
    pub meta_path: MetaPath,
    pub count: usize,
}

impl Default for TupleConfig {
    fn default() -> Self {
        TupleConfig {
            meta_path: MetaPath::co_citing(),
            count: 2000,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EncoderConfig {
    pub hash_dim: usize,
    pub embed_dim: usize,
    pub max_tokens: usize,
    /// `seed` is replaced by the derived stage seed.
    pub training: TrainConfig,
}

impl Default for EncoderConfig {
    fn default() -> Self {
        EncoderConfig {
            hash_dim: DEFAULT_HASH_DIM,
            embed_dim: DEFAULT_EMBED_DIM,
            max_tokens: DEFAULT_MAX_TOKENS,
            training: TrainConfig::default(),
        }
    }
}

impl EncoderConfig {
    pub fn featurizer(&self) -> Featurizer {
        Featurizer {
            dim: self.hash_dim,
            max_tokens: self.max_tokens,
            ..Featurizer::default()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SelfTrainSection {
    pub enabled: bool,
    /// `seed` is replaced by the derived stage seed.
    #[serde(flatten)]
    pub params: SelfTrainConfig,
}

impl Default for SelfTrainSection {
    fn default() -> Self {
        SelfTrainSection {
            enabled: true,
            params: SelfTrainConfig::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct PredictConfig {
    /// Ranking entries written per paper.
    pub top_k: usize,
}

impl Default for PredictConfig {
    fn default() -> Self {
        PredictConfig { top_k: 10 }
    }
}

/// Everything a run needs. Loaded from TOML; omitted fields take their
/// defaults.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PipelineConfig {
    /// Root seed; every stage derives its own seed from it.
    pub seed: u64,
    pub min_paragraph_words: usize,
    pub paths: Paths,
    pub candidates: MatchScope,
    pub tuples: TupleConfig,
    pub encoder: EncoderConfig,
    pub ranker: ScoreOptions,
    pub self_train: SelfTrainSection,
    pub predict: PredictConfig,
    pub metrics: MetricsConfig,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            seed: 0,
            min_paragraph_words: DEFAULT_MIN_PARAGRAPH_WORDS,
            paths: Paths::default(),
            candidates: MatchScope::TitleAbstract,
            tuples: TupleConfig::default(),
            encoder: EncoderConfig::default(),
            ranker: ScoreOptions::default(),
            self_train: SelfTrainSection::default(),
            predict: PredictConfig::default(),
            metrics: MetricsConfig::default(),
        }
    }
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

fn fnv1a(bytes: &[u8]) -> u64 {
    bytes.iter().fold(0xcbf2_9ce4_8422_2325u64, |h, &b| {
        (h ^ b as u64).wrapping_mul(0x0000_0100_0000_01b3)
    })
}

/// `splitmix64(root XOR fnv1a(stage))`: a fixed function of the root seed
/// and the stage name.
pub fn stage_seed(root: u64, stage: &str) -> u64 {
    splitmix64(root ^ fnv1a(stage.as_bytes()))
}

fn require(ok: bool, message: &str) -> Result<()> {
    if ok {
        Ok(())
    } else {
        Err(Error::InvalidConfig(message.into()))
    }
}

impl PipelineConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let config: PipelineConfig = toml::from_str(text).map_err(|e| Error::InvalidConfig(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::InvalidConfig(e.to_string()))
    }

    pub fn seed_for(&self, stage: &str) -> u64 {
        stage_seed(self.seed, stage)
    }

    pub fn artifact(&self, name: &str) -> PathBuf {
        self.paths.output_dir.join(name)
    }

    /// Checks every field against the preconditions of the stage that uses it.
    pub fn validate(&self) -> Result<()> {
        require(self.min_paragraph_words >= 1, "min_paragraph_words must be at least 1")?;
        require(self.tuples.count >= 1, "tuples.count must be at least 1")?;

        let e = &self.encoder;
        require(e.hash_dim >= 1, "encoder.hash_dim must be at least 1")?;
        require(e.embed_dim >= 1, "encoder.embed_dim must be at least 1")?;
        require(e.max_tokens >= 1, "encoder.max_tokens must be at least 1")?;
        let t = &e.training;
        require(t.learning_rate.is_finite() && t.learning_rate >= 0.0, "learning_rate must be finite and >= 0")?;
        require(t.weight_decay.is_finite() && t.weight_decay >= 0.0, "weight_decay must be finite and >= 0")?;
        require((0.0..1.0).contains(&t.beta1) && (0.0..1.0).contains(&t.beta2), "betas must lie in [0, 1)")?;
        require(t.epsilon > 0.0, "epsilon must be positive")?;
        require(t.batch_size >= 1 && t.epochs >= 1, "batch_size and epochs must be at least 1")?;

        let s = &self.self_train.params;
        require(s.n_pseudo >= 1, "self_train.n_pseudo must be at least 1")?;
        require(s.trees >= 1, "self_train.trees must be at least 1")?;
        require(s.max_leaf >= 1, "self_train.max_leaf must be at least 1")?;
        require(s.beam >= 1, "self_train.beam must be at least 1")?;
        require(s.min_df >= 1, "self_train.min_df must be at least 1")?;
        require(s.linear.epochs >= 1, "self_train.linear.epochs must be at least 1")?;
        require(
            s.linear.learning_rate > 0.0 && s.linear.learning_rate.is_finite(),
            "self_train.linear.learning_rate must be positive",
        )?;
        require(s.linear.l2 >= 0.0 && s.linear.l2 * s.linear.learning_rate < 1.0, "self_train.linear.l2 out of range")?;

        self.metrics.validate()?;
        let deepest = self
            .metrics
            .precision_k
            .iter()
            .chain(&self.metrics.ndcg_k)
            .copied()
            .max()
            .unwrap_or(1);
        require(
            self.predict.top_k >= deepest,
            "predict.top_k must cover the largest metric cutoff",
        )
    }
}
