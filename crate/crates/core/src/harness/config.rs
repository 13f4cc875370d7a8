use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::kv::KeyValues;
use crate::trainer::{MaterialPrior, TrainerConfig};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExperimentKind {
    Train,
    Baseline,
    Sweep,
    Evaluate,
    Trace,
    RenderCheck,
}

impl ExperimentKind {
    pub fn name(&self) -> &'static str {
        match self {
            Self::Train => "train",
            Self::Baseline => "baseline",
            Self::Sweep => "sweep",
            Self::Evaluate => "evaluate",
            Self::Trace => "trace",
            Self::RenderCheck => "render-check",
        }
    }
}

impl fmt::Display for ExperimentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ExperimentKind {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        Ok(match s {
            "train" => Self::Train,
            "baseline" => Self::Baseline,
            "sweep" => Self::Sweep,
            "evaluate" => Self::Evaluate,
            "trace" => Self::Trace,
            "render-check" => Self::RenderCheck,
            other => return Err(format!("unknown experiment kind `{other}`")),
        })
    }
}

/// Everything a run depends on. The seed is shared with the trainer.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub kind: ExperimentKind,
    pub seed: u64,
    pub out_dir: PathBuf,
    pub trainer: TrainerConfig,
    pub prior: MaterialPrior,
    /// Held-out draws for `evaluate`.
    pub eval_samples: usize,
    /// Material grid for baselines and the displacement envelope.
    pub grid_k: usize,
    pub grid_b: usize,
    /// Gripper heights of the fold-height envelope, m.
    pub heights: Vec<f64>,
    pub envelope_k: usize,
    pub envelope_b: usize,
    pub vision_states: usize,
    pub weights: Option<PathBuf>,
    /// Stiffness of each `trace` run.
    pub trace_k: Vec<f64>,
    /// Train twice and compare the ledgers.
    pub verify_replay: bool,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            kind: ExperimentKind::Train,
            seed: 0,
            out_dir: PathBuf::from("runs/latest"),
            trainer: TrainerConfig::default(),
            prior: MaterialPrior::default(),
            eval_samples: 20,
            grid_k: 5,
            grid_b: 5,
            heights: vec![0.05, 0.1, 0.15],
            envelope_k: 141,
            envelope_b: 3,
            vision_states: 200,
            weights: None,
            trace_k: vec![0.03, 0.27],
            verify_replay: false,
        }
    }
}

const KEYS: [&str; 13] = [
    "kind",
    "seed",
    "out",
    "eval_samples",
    "grid_k",
    "grid_b",
    "heights",
    "envelope_k",
    "envelope_b",
    "vision_states",
    "weights",
    "trace_k",
    "verify_replay",
];

fn parse_list(key: &str, text: &str) -> Result<Vec<f64>> {
    text.split(',')
        .map(|t| t.trim().parse::<f64>().map_err(|e| Error::parse(key, format!("`{t}`: {e}"))))
        .collect()
}

fn join(values: &[f64]) -> String {
    values.iter().map(|v| format!("{v:?}")).collect::<Vec<_>>().join(",")
}

impl ExperimentConfig {
    pub fn new(kind: ExperimentKind) -> Self {
        Self { kind, ..Self::default() }
    }

    pub fn set_seed(&mut self, seed: u64) {
        self.seed = seed;
        self.trainer.seed = seed;
    }

    pub fn validate(&self) -> Result<()> {
        self.trainer.validate()?;
        self.prior.validate()?;
        if self.eval_samples == 0 || self.grid_k == 0 || self.grid_b == 0 || self.vision_states == 0 {
            return Err(Error::InvalidConfig("sample and grid counts must be positive".into()));
        }
        if self.heights.is_empty() || self.heights.iter().any(|h| !(*h > 0.0)) {
            return Err(Error::InvalidConfig("heights must be positive".into()));
        }
        if self.envelope_k == 0 || self.envelope_b == 0 {
            return Err(Error::InvalidConfig("envelope grid must be non-empty".into()));
        }
        if self.trace_k.iter().any(|k| !(crate::sim::K_MIN..=crate::sim::K_MAX).contains(k)) {
            return Err(Error::InvalidConfig("trace_k must lie in the stiffness prior".into()));
        }
        Ok(())
    }

    pub fn to_kv(&self) -> KeyValues {
        let mut kv = KeyValues::new();
        kv.insert("kind", self.kind);
        kv.insert("seed", self.seed);
        kv.insert("out", self.out_dir.display());
        kv.insert("eval_samples", self.eval_samples);
        kv.insert("grid_k", self.grid_k);
        kv.insert("grid_b", self.grid_b);
        kv.insert("heights", join(&self.heights));
        kv.insert("envelope_k", self.envelope_k);
        kv.insert("envelope_b", self.envelope_b);
        kv.insert("vision_states", self.vision_states);
        if let Some(w) = &self.weights {
            kv.insert("weights", w.display());
        }
        kv.insert("trace_k", join(&self.trace_k));
        kv.insert("verify_replay", self.verify_replay);
        kv.extend("trainer.", &self.trainer.to_kv());
        kv.extend("prior.", &self.prior.to_kv());
        kv
    }

    pub fn update_from(&mut self, kv: &KeyValues) -> Result<()> {
        for key in kv.keys() {
            let known = KEYS.contains(&key) || key.starts_with("trainer.") || key.starts_with("prior.");
            if !known {
                return Err(Error::parse("experiment config", format!("unknown key `{key}`")));
            }
        }
        if let Some(k) = kv.get_str("kind") {
            self.kind = k.parse().map_err(|e| Error::parse("kind", e))?;
        }
        if let Some(o) = kv.get_str("out") {
            self.out_dir = PathBuf::from(o);
        }
        if let Some(w) = kv.get_str("weights") {
            self.weights = Some(PathBuf::from(w));
        }
        if let Some(h) = kv.get_str("heights") {
            self.heights = parse_list("heights", h)?;
        }
        if let Some(t) = kv.get_str("trace_k") {
            self.trace_k = parse_list("trace_k", t)?;
        }
        kv.update("eval_samples", &mut self.eval_samples)?;
        kv.update("grid_k", &mut self.grid_k)?;
        kv.update("grid_b", &mut self.grid_b)?;
        kv.update("envelope_k", &mut self.envelope_k)?;
        kv.update("envelope_b", &mut self.envelope_b)?;
        kv.update("vision_states", &mut self.vision_states)?;
        kv.update("verify_replay", &mut self.verify_replay)?;
        let trainer = kv.section("trainer.");
        if trainer.keys().next().is_some() {
            self.trainer.update_from(&trainer)?;
        }
        let prior = kv.section("prior.");
        if prior.keys().next().is_some() {
            self.prior.update_from(&prior)?;
        }
        // The experiment seed wins over a trainer seed.
        let seed = kv.get::<u64>("seed")?.unwrap_or(self.trainer.seed);
        self.set_seed(seed);
        self.validate()
    }

    pub fn load(path: &Path) -> Result<Self> {
        let mut c = Self::default();
        c.update_from(&KeyValues::read(path)?)?;
        Ok(c)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip() {
        let mut c = ExperimentConfig::new(ExperimentKind::Sweep);
        c.set_seed(17);
        c.heights = vec![0.04, 0.12];
        c.weights = Some(PathBuf::from("w.txt"));
        c.trainer.generations = 3;
        c.prior.k_max = 0.2;
        let text = c.to_kv().to_string();
        let mut back = ExperimentConfig::default();
        back.update_from(&KeyValues::parse(&text, "t").unwrap()).unwrap();
        assert_eq!(back, c);
    }

    #[test]
    fn seed_propagates_to_trainer() {
        let mut c = ExperimentConfig::default();
        c.update_from(&KeyValues::parse("seed = 5\ntrainer.seed = 9", "t").unwrap()).unwrap();
        assert_eq!((c.seed, c.trainer.seed), (5, 5));
    }

    #[test]
    fn unknown_keys_and_kinds_fail() {
        let mut c = ExperimentConfig::default();
        assert!(c.update_from(&KeyValues::parse("colour = red", "t").unwrap()).is_err());
        assert!(c.update_from(&KeyValues::parse("kind = plot", "t").unwrap()).is_err());
        assert!("render-check".parse::<ExperimentKind>().is_ok());
    }
}
