use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::paths::{run_path, GripperPath, PathKind, BASELINE_SPEED};
use crate::policy::PolicyWeights;
use crate::reward::{run_episode, EpisodeConfig, EpisodeResult};
use crate::sim::StripParams;
use crate::trainer::{sample_prior, MaterialPrior};
use crate::{seeds, Error, Result};

pub const POLICY: &str = "policy";

/// One folding run. `d` is `NaN` when the layers never touched.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DisplacementRow {
    pub method: String,
    pub k: f64,
    pub b: f64,
    pub d: f64,
    pub touched: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodSummary {
    pub method: String,
    pub runs: usize,
    pub touched: usize,
    /// Means over touched runs.
    pub mean_d: f64,
    pub mean_abs_d: f64,
    pub max_abs_d: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct DisplacementReport {
    pub rows: Vec<DisplacementRow>,
}

impl DisplacementReport {
    /// Methods in order of first appearance.
    pub fn methods(&self) -> Vec<String> {
        let mut out: Vec<String> = Vec::new();
        for r in &self.rows {
            if !out.contains(&r.method) {
                out.push(r.method.clone());
            }
        }
        out
    }

    pub fn rows_of<'a>(&'a self, method: &'a str) -> impl Iterator<Item = &'a DisplacementRow> + 'a {
        self.rows.iter().filter(move |r| r.method == method)
    }

    pub fn summary_of(&self, method: &str) -> MethodSummary {
        let rows: Vec<&DisplacementRow> = self.rows_of(method).collect();
        let ds: Vec<f64> = rows.iter().filter(|r| r.touched).map(|r| r.d).collect();
        let n = ds.len() as f64;
        let (mean_d, mean_abs_d) = if ds.is_empty() {
            (f64::NAN, f64::NAN)
        } else {
            (ds.iter().sum::<f64>() / n, ds.iter().map(|d| d.abs()).sum::<f64>() / n)
        };
        MethodSummary {
            method: method.to_string(),
            runs: rows.len(),
            touched: ds.len(),
            mean_d,
            mean_abs_d,
            max_abs_d: ds.iter().map(|d| d.abs()).fold(f64::NAN, f64::max),
        }
    }

    pub fn summary(&self) -> Vec<MethodSummary> {
        self.methods().iter().map(|m| self.summary_of(m)).collect()
    }

    pub fn write_rows<W: Write>(&self, out: W) -> Result<()> {
        write_csv(&self.rows, out)
    }

    pub fn write_summary<W: Write>(&self, out: W) -> Result<()> {
        write_csv(&self.summary(), out)
    }
}

pub(crate) fn write_csv<T: Serialize, W: Write>(rows: &[T], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush().map_err(|e| Error::io("<csv>", e))
}

fn row(method: &str, params: &StripParams, r: &EpisodeResult) -> DisplacementRow {
    DisplacementRow {
        method: method.to_string(),
        k: params.joint_stiffness,
        b: params.joint_damping,
        d: if r.touched { r.d } else { f64::NAN },
        touched: r.touched,
    }
}

fn censored(method: &str, params: &StripParams) -> DisplacementRow {
    DisplacementRow {
        method: method.to_string(),
        k: params.joint_stiffness,
        b: params.joint_damping,
        d: f64::NAN,
        touched: false,
    }
}

fn baseline_rows(params: &StripParams, episode: &EpisodeConfig) -> Vec<DisplacementRow> {
    [PathKind::Triangular, PathKind::Circular]
        .iter()
        .map(|&kind| {
            let path = GripperPath::of_kind(kind, params.strip_length);
            match run_path(&path, params, BASELINE_SPEED, &episode.reward) {
                Ok(r) => row(kind.name(), params, &r),
                Err(e) => {
                    log::warn!("{} path failed at k={}: {e}", kind.name(), params.joint_stiffness);
                    censored(kind.name(), params)
                }
            }
        })
        .collect()
}

/// Held-out materials, from a seed stream disjoint from training.
pub fn held_out_draws(prior: &MaterialPrior, base: &StripParams, n: usize, seed: u64) -> Vec<StripParams> {
    let mut rng = seeds::rng(seed, seeds::NS_HELD_OUT ^ prior.seed, 0);
    (0..n).map(|_| sample_prior(prior, base, &mut rng)).collect()
}

/// Policy and both baselines on the same draws. Rows are grouped per draw:
/// policy, triangular, circular.
pub fn evaluate_on(weights: &PolicyWeights, draws: &[StripParams], episode: &EpisodeConfig) -> DisplacementReport {
    let rows: Vec<Vec<DisplacementRow>> = draws
        .par_iter()
        .map(|p| {
            let mut rows = vec![row(POLICY, p, &run_episode(weights, p, episode))];
            rows.extend(baseline_rows(p, episode));
            rows
        })
        .collect();
    DisplacementReport {
        rows: rows.into_iter().flatten().collect(),
    }
}

pub fn evaluate_policy(
    weights: &PolicyWeights,
    prior: &MaterialPrior,
    base: &StripParams,
    episode: &EpisodeConfig,
    n_samples: usize,
    seed: u64,
) -> DisplacementReport {
    evaluate_on(weights, &held_out_draws(prior, base, n_samples, seed), episode)
}

/// Both baselines on an `n_k × n_b` prior grid.
pub fn baseline_grid(prior: &MaterialPrior, base: &StripParams, episode: &EpisodeConfig, n_k: usize, n_b: usize) -> DisplacementReport {
    let grid = prior.grid(n_k, n_b);
    let rows: Vec<Vec<DisplacementRow>> = grid
        .par_iter()
        .map(|&(k, b)| baseline_rows(&base.with_material(k, b), episode))
        .collect();
    DisplacementReport {
        rows: rows.into_iter().flatten().collect(),
    }
}

/// Closed-loop displacement over an `n_k × n_b` prior grid.
pub fn displacement_envelope(
    weights: &PolicyWeights,
    prior: &MaterialPrior,
    base: &StripParams,
    episode: &EpisodeConfig,
    n_k: usize,
    n_b: usize,
) -> DisplacementReport {
    let grid = prior.grid(n_k, n_b);
    let rows: Vec<DisplacementRow> = grid
        .par_iter()
        .map(|&(k, b)| {
            let p = base.with_material(k, b);
            row(POLICY, &p, &run_episode(weights, &p, episode))
        })
        .collect();
    DisplacementReport { rows }
}

/// Range of `d` at one stiffness.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnvelopeBand {
    pub k: f64,
    pub d_min: f64,
    pub d_max: f64,
    pub touched: usize,
    pub censored: usize,
    pub contains_zero: bool,
}

/// Bands per distinct k, in order of appearance.
pub fn envelope_bands(report: &DisplacementReport) -> Vec<EnvelopeBand> {
    let mut ks: Vec<f64> = Vec::new();
    for r in &report.rows {
        if !ks.contains(&r.k) {
            ks.push(r.k);
        }
    }
    ks.into_iter()
        .map(|k| {
            let at: Vec<&DisplacementRow> = report.rows.iter().filter(|r| r.k == k).collect();
            let ds: Vec<f64> = at.iter().filter(|r| r.touched).map(|r| r.d).collect();
            let d_min = ds.iter().copied().fold(f64::NAN, f64::min);
            let d_max = ds.iter().copied().fold(f64::NAN, f64::max);
            EnvelopeBand {
                k,
                d_min,
                d_max,
                touched: ds.len(),
                censored: at.len() - ds.len(),
                contains_zero: !ds.is_empty() && d_min <= 0.0 && d_max >= 0.0,
            }
        })
        .collect()
}

/// Fraction of stiffness values whose band contains `d = 0`.
pub fn zero_crossing_coverage(bands: &[EnvelopeBand]) -> f64 {
    if bands.is_empty() {
        return 0.0;
    }
    bands.iter().filter(|b| b.contains_zero).count() as f64 / bands.len() as f64
}
