//! CMA-ES policy search over the controller weights, maximizing the mean
//! episode return over materials drawn from [`MaterialPrior`].

pub mod cmaes;
pub mod envelope;
pub mod prior;

use std::io::Write;
use std::path::Path;

use nalgebra::DVector;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::kv::KeyValues;
use crate::policy::{parameter_count, PolicyWeights, N_HIDDEN, N_INPUTS};
use crate::reward::{prelift, run_episode, run_episode_from, EpisodeConfig, EpisodeResult};
use crate::sim::StripParams;
use crate::{seeds, Error, Result};

pub use cmaes::CmaEs;
pub use envelope::{fold_height_envelope, EnvelopeRow, EnvelopeSummary};
pub use prior::{sample_prior, MaterialPrior};

#[derive(Debug, Clone, PartialEq)]
pub struct TrainerConfig {
    /// λ
    pub population: usize,
    pub sigma0: f64,
    pub generations: usize,
    /// θ samples per candidate evaluation (M).
    pub samples: usize,
    pub seed: u64,
    /// Share one θ batch between all candidates of a generation.
    pub common_thetas: bool,
    pub episode: EpisodeConfig,
    pub strip: StripParams,
}

impl Default for TrainerConfig {
    fn default() -> Self {
        Self {
            population: 16,
            sigma0: 0.5,
            generations: 150,
            samples: 8,
            seed: 0,
            common_thetas: true,
            episode: EpisodeConfig::default(),
            strip: StripParams::desk_scale(),
        }
    }
}

const TRAINER_KEYS: [&str; 6] = ["population", "sigma0", "generations", "samples", "seed", "common_thetas"];
const EPISODE_KEYS: [&str; 5] = ["horizon", "step_size", "lift_height", "a", "c_h"];

impl TrainerConfig {
    pub fn validate(&self) -> Result<()> {
        if self.population < 4 {
            return Err(Error::InvalidConfig("population must be >= 4".into()));
        }
        if self.samples < 1 {
            return Err(Error::InvalidConfig("samples must be >= 1".into()));
        }
        if !(self.sigma0 > 0.0 && self.sigma0.is_finite()) {
            return Err(Error::InvalidConfig("sigma0 must be > 0".into()));
        }
        self.episode.validate()?;
        self.strip.validate()
    }

    pub fn to_kv(&self) -> KeyValues {
        let mut kv = KeyValues::new();
        kv.insert("population", self.population);
        kv.insert("sigma0", self.sigma0);
        kv.insert("generations", self.generations);
        kv.insert("samples", self.samples);
        kv.insert("seed", self.seed);
        kv.insert("common_thetas", self.common_thetas);
        kv.extend("", &self.episode.to_kv());
        kv.extend("strip.", &self.strip.to_kv());
        kv
    }

    /// Applies trainer, episode and `strip.`-prefixed keys. Keys under other
    /// dotted prefixes are left to the caller.
    pub fn update_from(&mut self, kv: &KeyValues) -> Result<()> {
        for key in kv.keys() {
            if !key.contains('.') && !TRAINER_KEYS.contains(&key) && !EPISODE_KEYS.contains(&key) {
                return Err(Error::parse("trainer config", format!("unknown key `{key}`")));
            }
        }
        kv.update("population", &mut self.population)?;
        kv.update("sigma0", &mut self.sigma0)?;
        kv.update("generations", &mut self.generations)?;
        kv.update("samples", &mut self.samples)?;
        kv.update("seed", &mut self.seed)?;
        kv.update("common_thetas", &mut self.common_thetas)?;
        self.episode.update_from(kv)?;
        let strip = kv.section("strip.");
        if strip.keys().next().is_some() {
            self.strip = self.strip.overridden_by(&strip)?;
        }
        self.validate()
    }

    pub fn from_kv(kv: &KeyValues) -> Result<Self> {
        let mut c = Self::default();
        c.update_from(kv)?;
        Ok(c)
    }
}

/// One rollout of the evaluation ledger.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LedgerRow {
    pub generation: usize,
    pub candidate: usize,
    pub theta: usize,
    pub k: f64,
    pub b: f64,
    pub reward: f64,
    pub touched: bool,
    pub d: f64,
    pub failed: bool,
}

impl LedgerRow {
    fn bits_eq(&self, other: &Self) -> bool {
        (self.generation, self.candidate, self.theta, self.touched, self.failed)
            == (other.generation, other.candidate, other.theta, other.touched, other.failed)
            && [self.k, self.b, self.reward, self.d]
                .iter()
                .zip([other.k, other.b, other.reward, other.d])
                .all(|(a, b)| a.to_bits() == b.to_bits())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerationStats {
    pub generation: usize,
    pub mean_fitness: f64,
    pub max_fitness: f64,
    pub best_so_far: f64,
    pub sigma: f64,
    pub failed: usize,
    pub touched: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunSeeds {
    pub master: u64,
    pub search: u64,
    pub prior: u64,
}

#[derive(Debug, Clone)]
pub struct TrainingRun {
    pub config: TrainerConfig,
    pub prior: MaterialPrior,
    pub seeds: RunSeeds,
    pub best_weights: PolicyWeights,
    pub best_fitness: f64,
    pub best_generation: usize,
    pub best_candidate: usize,
    pub final_mean: PolicyWeights,
    pub stats: Vec<GenerationStats>,
    pub ledger: Vec<LedgerRow>,
}

impl TrainingRun {
    /// Bitwise comparison of two ledgers.
    pub fn ledger_matches(&self, other: &[LedgerRow]) -> bool {
        self.ledger.len() == other.len() && self.ledger.iter().zip(other).all(|(a, b)| a.bits_eq(b))
    }

    /// θ batch the given candidate was evaluated on, rebuilt from the ledger.
    pub fn thetas_of(&self, generation: usize, candidate: usize) -> Vec<StripParams> {
        self.ledger
            .iter()
            .filter(|r| r.generation == generation && r.candidate == candidate)
            .map(|r| self.config.strip.with_material(r.k, r.b))
            .collect()
    }

    /// Re-evaluates the best candidate on its stored θ batch.
    pub fn reevaluate_best(&self) -> f64 {
        let thetas = self.thetas_of(self.best_generation, self.best_candidate);
        evaluate_candidate(&self.best_weights, &thetas, &self.config.episode)
    }

    pub fn config_snapshot(&self) -> KeyValues {
        let mut kv = self.config.to_kv();
        kv.extend("prior.", &self.prior.to_kv());
        kv
    }
}

/// Mean return of `weights` over the batch, summed in batch order.
pub fn evaluate_candidate(weights: &PolicyWeights, thetas: &[StripParams], episode: &EpisodeConfig) -> f64 {
    assert!(!thetas.is_empty(), "empty theta batch");
    let rewards: Vec<f64> = thetas
        .par_iter()
        .map(|p| run_episode(weights, p, episode).total_reward)
        .collect();
    mean_in_order(&rewards)
}

fn mean_in_order(values: &[f64]) -> f64 {
    values.iter().fold(0.0, |acc, v| acc + v) / values.len() as f64
}

fn theta_batch(config: &TrainerConfig, prior: &MaterialPrior, generation: usize, stream: u64) -> Vec<StripParams> {
    let mut rng = seeds::rng(
        config.seed,
        seeds::NS_TRAIN_THETA ^ prior.seed,
        (generation as u64) << 20 | stream,
    );
    (0..config.samples)
        .map(|_| sample_prior(prior, &config.strip, &mut rng))
        .collect()
}

/// Rolls out every (candidate, θ) pair. Results are indexed
/// `candidate * thetas + theta`.
fn rollout_generation(
    weights: &[PolicyWeights],
    batches: &[Vec<StripParams>],
    episode: &EpisodeConfig,
) -> Vec<EpisodeResult> {
    // Pre-lift is independent of the policy: run it once per distinct θ.
    let starts: Vec<Vec<_>> = batches
        .par_iter()
        .map(|batch| batch.par_iter().map(|p| prelift(p, episode.lift_height)).collect())
        .collect();
    let m = batches[0].len();
    (0..weights.len() * m)
        .into_par_iter()
        .map(|idx| {
            let (c, t) = (idx / m, idx % m);
            let b = if batches.len() == 1 { 0 } else { c };
            let params = &batches[b][t];
            match &starts[b][t] {
                Ok(s) => {
                    let mut r = run_episode_from(&weights[c], params, episode, s.clone());
                    r.trajectory = Vec::new();
                    r
                }
                Err(e) => {
                    log::warn!("pre-lift failed for k={} b={}: {e}", params.joint_stiffness, params.joint_damping);
                    EpisodeResult::failed(params, &episode.reward)
                }
            }
        })
        .collect()
}

pub fn train(config: &TrainerConfig, prior: &MaterialPrior) -> Result<TrainingRun> {
    train_with(config, prior, |_, _| Ok(()))
}

/// Like [`train`], calling `on_generation` with the stats and ledger rows of
/// every finished generation.
pub fn train_with(
    config: &TrainerConfig,
    prior: &MaterialPrior,
    mut on_generation: impl FnMut(&GenerationStats, &[LedgerRow]) -> Result<()>,
) -> Result<TrainingRun> {
    config.validate()?;
    prior.validate()?;
    let dim = parameter_count(N_INPUTS, N_HIDDEN);
    let seeds = RunSeeds {
        master: config.seed,
        search: seeds::derive(config.seed, seeds::NS_SEARCH, 0),
        prior: prior.seed,
    };
    let mut search_rng = seeds::rng(config.seed, seeds::NS_SEARCH, 0);
    let mut es = CmaEs::new(DVector::zeros(dim), config.sigma0, config.population);

    let mut run = TrainingRun {
        config: config.clone(),
        prior: prior.clone(),
        seeds,
        best_weights: PolicyWeights::zeros(),
        best_fitness: f64::NEG_INFINITY,
        best_generation: 0,
        best_candidate: 0,
        final_mean: PolicyWeights::zeros(),
        stats: Vec::with_capacity(config.generations),
        ledger: Vec::new(),
    };
    let m = config.samples;

    for g in 0..config.generations {
        let pop = es.ask(&mut search_rng);
        let weights: Vec<PolicyWeights> = pop
            .candidates
            .iter()
            .map(|x| PolicyWeights::from_vec(x.as_slice().to_vec()))
            .collect::<Result<_>>()?;
        let batches: Vec<Vec<StripParams>> = if config.common_thetas {
            vec![theta_batch(config, prior, g, 0)]
        } else {
            (0..weights.len()).map(|c| theta_batch(config, prior, g, c as u64 + 1)).collect()
        };
        let results = rollout_generation(&weights, &batches, &config.episode);

        let failed = results.iter().filter(|r| r.failed).count();
        if 2 * failed > results.len() {
            return Err(Error::TrainingAborted {
                generation: g,
                failed,
                total: results.len(),
            });
        }

        let first_row = run.ledger.len();
        let mut fitness = Vec::with_capacity(weights.len());
        for c in 0..weights.len() {
            let batch = &batches[if batches.len() == 1 { 0 } else { c }];
            let rewards: Vec<f64> = (0..m).map(|t| results[c * m + t].total_reward).collect();
            fitness.push(mean_in_order(&rewards));
            for (t, p) in batch.iter().enumerate() {
                let r = &results[c * m + t];
                run.ledger.push(LedgerRow {
                    generation: g,
                    candidate: c,
                    theta: t,
                    k: p.joint_stiffness,
                    b: p.joint_damping,
                    reward: r.total_reward,
                    touched: r.touched,
                    d: r.d,
                    failed: r.failed,
                });
            }
        }

        let (best_c, max_fitness) = fitness
            .iter()
            .copied()
            .enumerate()
            .fold((0, f64::NEG_INFINITY), |acc, (i, f)| if f > acc.1 { (i, f) } else { acc });
        if max_fitness > run.best_fitness {
            run.best_fitness = max_fitness;
            run.best_weights = weights[best_c].clone();
            run.best_generation = g;
            run.best_candidate = best_c;
        }
        es.tell(&pop, &fitness);

        let stats = GenerationStats {
            generation: g,
            mean_fitness: mean_in_order(&fitness),
            max_fitness,
            best_so_far: run.best_fitness,
            sigma: es.sigma(),
            failed,
            touched: results.iter().filter(|r| r.touched).count(),
        };
        log::info!(
            "generation {g}: mean {:.5} max {:.5} best {:.5} sigma {:.4} failed {failed}",
            stats.mean_fitness,
            stats.max_fitness,
            stats.best_so_far,
            stats.sigma
        );
        on_generation(&stats, &run.ledger[first_row..])?;
        run.stats.push(stats);
    }
    run.final_mean = PolicyWeights::from_vec(es.mean().as_slice().to_vec())?;
    Ok(run)
}

/// Re-runs training from the stored configuration and seeds and returns the
/// regenerated ledger.
pub fn replay(run: &TrainingRun) -> Result<Vec<LedgerRow>> {
    Ok(train(&run.config, &run.prior)?.ledger)
}

pub fn write_ledger<W: Write>(rows: &[LedgerRow], out: W, header: bool) -> Result<()> {
    let mut w = csv::WriterBuilder::new().has_headers(header).from_writer(out);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush().map_err(|e| Error::io("<ledger>", e))?;
    Ok(())
}

pub fn read_ledger(path: &Path) -> Result<Vec<LedgerRow>> {
    let mut r = csv::Reader::from_path(path)?;
    r.deserialize().map(|row| row.map_err(Error::from)).collect()
}

pub fn write_stats<W: Write>(rows: &[GenerationStats], out: W, header: bool) -> Result<()> {
    let mut w = csv::WriterBuilder::new().has_headers(header).from_writer(out);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush().map_err(|e| Error::io("<stats>", e))?;
    Ok(())
}
