use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::kv::KeyValues;
use crate::sim::{b_min, StripParams, K_MAX, K_MIN};
use crate::sim::params::DAMPING_SPAN;
use crate::{Error, Result};

/// Distribution over strip materials: `k` uniform, `b` log-uniform in
/// `[b_min(k), damping_span * b_min(k)]`.
#[derive(Debug, Clone, PartialEq)]
pub struct MaterialPrior {
    pub k_min: f64,
    pub k_max: f64,
    pub damping_span: f64,
    pub seed: u64,
}

impl Default for MaterialPrior {
    fn default() -> Self {
        Self {
            k_min: K_MIN,
            k_max: K_MAX,
            damping_span: DAMPING_SPAN,
            seed: 0,
        }
    }
}

impl MaterialPrior {
    pub fn validate(&self) -> Result<()> {
        if !(K_MIN..=K_MAX).contains(&self.k_min)
            || !(K_MIN..=K_MAX).contains(&self.k_max)
            || self.k_min > self.k_max
        {
            return Err(Error::InvalidConfig(format!(
                "prior k range [{}, {}] must lie inside [{K_MIN}, {K_MAX}]",
                self.k_min, self.k_max
            )));
        }
        if !(1.0..=DAMPING_SPAN).contains(&self.damping_span) {
            return Err(Error::InvalidConfig(format!(
                "damping_span must be in [1, {DAMPING_SPAN}]"
            )));
        }
        Ok(())
    }

    pub fn rng(&self) -> ChaCha8Rng {
        crate::seeds::rng(self.seed, crate::seeds::NS_TRAIN_THETA, u64::MAX)
    }

    /// Draws `(k, b)`.
    pub fn sample_material<R: Rng + ?Sized>(&self, rng: &mut R) -> (f64, f64) {
        let k = if self.k_max > self.k_min {
            rng.random_range(self.k_min..self.k_max)
        } else {
            self.k_min
        };
        let u: f64 = rng.random();
        let b = b_min(k) * self.damping_span.powf(u);
        (k, b)
    }

    /// Parameters at material `(k, b)` where `(u_k, u_b)` in `[0, 1]²` are
    /// positions along the k axis and along the log-damping axis.
    pub fn at(&self, u_k: f64, u_b: f64) -> (f64, f64) {
        let k = self.k_min + (self.k_max - self.k_min) * u_k;
        (k, b_min(k) * self.damping_span.powf(u_b))
    }

    /// `n` points per axis, both ends included.
    pub fn grid(&self, n_k: usize, n_b: usize) -> Vec<(f64, f64)> {
        let frac = |i: usize, n: usize| if n > 1 { i as f64 / (n - 1) as f64 } else { 0.5 };
        let mut out = Vec::with_capacity(n_k * n_b);
        for i in 0..n_k {
            for j in 0..n_b {
                out.push(self.at(frac(i, n_k), frac(j, n_b)));
            }
        }
        out
    }

    pub fn to_kv(&self) -> KeyValues {
        let mut kv = KeyValues::new();
        kv.insert("k_min", self.k_min);
        kv.insert("k_max", self.k_max);
        kv.insert("damping_span", self.damping_span);
        kv.insert("seed", self.seed);
        kv
    }

    pub fn update_from(&mut self, kv: &KeyValues) -> Result<()> {
        kv.reject_unknown(&["k_min", "k_max", "damping_span", "seed"], "prior")?;
        kv.update("k_min", &mut self.k_min)?;
        kv.update("k_max", &mut self.k_max)?;
        kv.update("damping_span", &mut self.damping_span)?;
        kv.update("seed", &mut self.seed)?;
        self.validate()
    }
}

/// One material draw applied to `base`.
pub fn sample_prior<R: Rng + ?Sized>(prior: &MaterialPrior, base: &StripParams, rng: &mut R) -> StripParams {
    let (k, b) = prior.sample_material(rng);
    base.with_material(k, b)
}
