use nalgebra::Matrix3;
use rand::seq::IndexedRandom;
use rand::Rng;

use crate::paths::{run_path_observed, GripperPath, PathKind, BASELINE_SPEED};
use crate::policy::PolicyWeights;
use crate::reward::{prelift, try_run_episode_observed, EpisodeConfig};
use crate::sim::{StripParams, StripState, Vec2};
use crate::trainer::{sample_prior, MaterialPrior};
use crate::vision::{estimate_homography, Correspondence, Homography};
use crate::{seeds, Result};

const STATES_PER_RUN: usize = 4;

/// Strip shapes taken from folding runs on random materials: baseline paths,
/// plus closed-loop episodes when `weights` is given.
pub fn folding_states(
    prior: &MaterialPrior,
    base: &StripParams,
    episode: &EpisodeConfig,
    weights: Option<&PolicyWeights>,
    n: usize,
    seed: u64,
) -> Result<Vec<StripState>> {
    let mut rng = seeds::rng(seed, seeds::NS_VISION, 0);
    let mut out = Vec::with_capacity(n);
    let sources = if weights.is_some() { 3 } else { 2 };
    let mut run = 0;
    while out.len() < n {
        let params = sample_prior(prior, base, &mut rng);
        let mut seen = Vec::new();
        match (run % sources, weights) {
            (2, Some(w)) => {
                let start = prelift(&params, episode.lift_height)?;
                try_run_episode_observed(w, &params, episode, start, |s| seen.push(s.clone()))?;
            }
            (i, _) => {
                let kind = if i == 0 { PathKind::Triangular } else { PathKind::Circular };
                let path = GripperPath::of_kind(kind, params.strip_length);
                run_path_observed(&path, &params, BASELINE_SPEED, &episode.reward, |s| seen.push(s.clone()))?;
            }
        }
        run += 1;
        let take = STATES_PER_RUN.min(n - out.len());
        out.extend(seen.choose_multiple(&mut rng, take).cloned());
    }
    Ok(out)
}

/// Random homography with unit bottom-right entry and moderate perspective.
pub fn random_homography<R: Rng + ?Sized>(rng: &mut R) -> Homography {
    loop {
        let m = Matrix3::new(
            rng.random_range(0.5..2.0),
            rng.random_range(-0.3..0.3),
            rng.random_range(-1.0..1.0),
            rng.random_range(-0.3..0.3),
            rng.random_range(0.5..2.0),
            rng.random_range(-1.0..1.0),
            rng.random_range(-0.1..0.1),
            rng.random_range(-0.1..0.1),
            1.0,
        );
        if let Ok(h) = Homography::from_matrix(m) {
            return h;
        }
    }
}

/// Largest element-wise error over `trials` synthesize-then-recover rounds
/// with `points` noiseless correspondences each.
pub fn homography_recovery_error(trials: usize, points: usize, seed: u64) -> Result<f64> {
    let mut rng = seeds::rng(seed, seeds::NS_VISION, 1);
    let mut worst: f64 = 0.0;
    for _ in 0..trials {
        let h = random_homography(&mut rng);
        let pairs: Vec<Correspondence> = (0..points)
            .map(|_| {
                let plane = Vec2::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
                let image = h.project(plane).expect("finite for |g|, |h| < 0.1");
                Correspondence { image, plane }
            })
            .collect();
        let est = estimate_homography(&pairs)?;
        worst = worst.max((est.homography.matrix() - h.matrix()).abs().max());
    }
    Ok(worst)
}
