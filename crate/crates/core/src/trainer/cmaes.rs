//! (μ/μ_w, λ)-CMA-ES with cumulative step-size adaptation and rank-one plus
//! rank-μ covariance updates. Maximizes fitness.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::Rng;
use rand_distr::StandardNormal;

#[derive(Debug, Clone)]
pub struct CmaEs {
    dim: usize,
    lambda: usize,
    weights: Vec<f64>,
    mu_eff: f64,
    c_sigma: f64,
    d_sigma: f64,
    c_c: f64,
    c_1: f64,
    c_mu: f64,
    chi_n: f64,
    mean: DVector<f64>,
    sigma: f64,
    cov: DMatrix<f64>,
    basis: DMatrix<f64>,
    scales: DVector<f64>,
    p_sigma: DVector<f64>,
    p_c: DVector<f64>,
    generation: usize,
}

/// Candidates of one generation in search space, plus the steps `y = (x - m) / σ`.
#[derive(Debug, Clone)]
pub struct Population {
    pub candidates: Vec<DVector<f64>>,
    steps: Vec<DVector<f64>>,
}

impl CmaEs {
    pub fn new(mean: DVector<f64>, sigma: f64, lambda: usize) -> Self {
        let n = mean.len();
        let nf = n as f64;
        let mu = lambda / 2;
        let raw: Vec<f64> = (1..=mu)
            .map(|i| ((lambda as f64 + 1.0) / 2.0).ln() - (i as f64).ln())
            .collect();
        let total: f64 = raw.iter().sum();
        let weights: Vec<f64> = raw.iter().map(|w| w / total).collect();
        let mu_eff = 1.0 / weights.iter().map(|w| w * w).sum::<f64>();

        let c_sigma = (mu_eff + 2.0) / (nf + mu_eff + 5.0);
        let d_sigma = 1.0 + 2.0 * (((mu_eff - 1.0) / (nf + 1.0)).sqrt() - 1.0).max(0.0) + c_sigma;
        let c_c = (4.0 + mu_eff / nf) / (nf + 4.0 + 2.0 * mu_eff / nf);
        let c_1 = 2.0 / ((nf + 1.3).powi(2) + mu_eff);
        let c_mu = (1.0 - c_1).min(2.0 * (mu_eff - 2.0 + 1.0 / mu_eff) / ((nf + 2.0).powi(2) + mu_eff));
        let chi_n = nf.sqrt() * (1.0 - 1.0 / (4.0 * nf) + 1.0 / (21.0 * nf * nf));

        Self {
            dim: n,
            lambda,
            weights,
            mu_eff,
            c_sigma,
            d_sigma,
            c_c,
            c_1,
            c_mu,
            chi_n,
            mean,
            sigma,
            cov: DMatrix::identity(n, n),
            basis: DMatrix::identity(n, n),
            scales: DVector::from_element(n, 1.0),
            p_sigma: DVector::zeros(n),
            p_c: DVector::zeros(n),
            generation: 0,
        }
    }

    pub fn mean(&self) -> &DVector<f64> {
        &self.mean
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn lambda(&self) -> usize {
        self.lambda
    }

    pub fn generation(&self) -> usize {
        self.generation
    }

    /// Square root of the largest over the smallest covariance eigenvalue.
    pub fn axis_ratio(&self) -> f64 {
        self.scales.max() / self.scales.min()
    }

    pub fn ask<R: Rng + ?Sized>(&self, rng: &mut R) -> Population {
        let mut candidates = Vec::with_capacity(self.lambda);
        let mut steps = Vec::with_capacity(self.lambda);
        for _ in 0..self.lambda {
            let z = DVector::from_iterator(self.dim, (0..self.dim).map(|_| rng.sample::<f64, _>(StandardNormal)));
            let y = &self.basis * z.component_mul(&self.scales);
            candidates.push(&self.mean + self.sigma * &y);
            steps.push(y);
        }
        Population { candidates, steps }
    }

    /// Updates the distribution from `fitness[i]` of `pop.candidates[i]`.
    /// Ties are broken by candidate index.
    pub fn tell(&mut self, pop: &Population, fitness: &[f64]) {
        assert_eq!(fitness.len(), pop.candidates.len());
        let mut order: Vec<usize> = (0..fitness.len()).collect();
        order.sort_by(|&a, &b| fitness[b].total_cmp(&fitness[a]).then(a.cmp(&b)));

        let n = self.dim as f64;
        let mut y_w = DVector::zeros(self.dim);
        for (w, &i) in self.weights.iter().zip(&order) {
            y_w.axpy(*w, &pop.steps[i], 1.0);
        }
        self.mean.axpy(self.sigma, &y_w, 1.0);

        // C^{-1/2} y_w
        let inv_sqrt = {
            let t = self.basis.tr_mul(&y_w).component_div(&self.scales);
            &self.basis * t
        };
        let cs = self.c_sigma;
        self.p_sigma *= 1.0 - cs;
        self.p_sigma.axpy((cs * (2.0 - cs) * self.mu_eff).sqrt(), &inv_sqrt, 1.0);

        let g = (self.generation + 1) as f64;
        let ps_norm = self.p_sigma.norm();
        let h_sigma = ps_norm / (1.0 - (1.0 - cs).powf(2.0 * g)).sqrt() < (1.4 + 2.0 / (n + 1.0)) * self.chi_n;
        let hs = if h_sigma { 1.0 } else { 0.0 };

        let cc = self.c_c;
        self.p_c *= 1.0 - cc;
        self.p_c.axpy(hs * (cc * (2.0 - cc) * self.mu_eff).sqrt(), &y_w, 1.0);

        let delta_h = (1.0 - hs) * cc * (2.0 - cc);
        self.cov *= 1.0 - self.c_1 - self.c_mu + self.c_1 * delta_h;
        self.cov.ger(self.c_1, &self.p_c, &self.p_c, 1.0);
        for (w, &i) in self.weights.iter().zip(&order) {
            let y = &pop.steps[i];
            self.cov.ger(self.c_mu * w, y, y, 1.0);
        }
        self.cov = (&self.cov + self.cov.transpose()) * 0.5;

        self.sigma *= ((cs / self.d_sigma) * (ps_norm / self.chi_n - 1.0)).exp();
        // Flat fitness: the best and the ceil(0.7 λ)-th candidate tie.
        let k = ((0.7 * self.lambda as f64).ceil() as usize).saturating_sub(1);
        if fitness[order[0]] == fitness[order[k]] {
            self.sigma *= (0.2 + cs / self.d_sigma).exp();
            log::warn!("flat fitness in generation {}, widening to sigma {:.4}", self.generation, self.sigma);
        }
        self.generation += 1;
        self.decompose();
    }

    fn decompose(&mut self) {
        let eig = SymmetricEigen::new(self.cov.clone());
        let floor = 1e-300;
        self.scales = eig.eigenvalues.map(|v| v.max(floor).sqrt());
        self.basis = eig.eigenvectors;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn minimize(f: impl Fn(&DVector<f64>) -> f64, x0: DVector<f64>, sigma: f64, budget: usize) -> (f64, usize) {
        let n = x0.len();
        let lambda = 4 + (3.0 * (n as f64).ln()) as usize;
        let mut es = CmaEs::new(x0, sigma, lambda);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut best = f64::INFINITY;
        let mut evals = 0;
        while evals + lambda <= budget {
            let pop = es.ask(&mut rng);
            let fit: Vec<f64> = pop.candidates.iter().map(|x| -f(x)).collect();
            evals += lambda;
            best = best.min(fit.iter().map(|v| -v).fold(f64::INFINITY, f64::min));
            es.tell(&pop, &fit);
            if best < 1e-10 {
                break;
            }
        }
        (best, evals)
    }

    #[test]
    fn flat_fitness_widens_the_search() {
        let mut es = CmaEs::new(DVector::zeros(6), 0.3, 10);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..5 {
            let pop = es.ask(&mut rng);
            es.tell(&pop, &[1.0; 10]);
        }
        assert!(es.sigma() > 0.3, "sigma {}", es.sigma());
    }

    #[test]
    fn weights_are_positive_and_normalized() {
        let es = CmaEs::new(DVector::zeros(5), 1.0, 16);
        assert_eq!(es.weights.len(), 8);
        assert!((es.weights.iter().sum::<f64>() - 1.0).abs() < 1e-15);
        assert!(es.weights.windows(2).all(|w| w[0] > w[1]));
        assert!(es.mu_eff > 1.0 && es.mu_eff < 8.0);
    }

    #[test]
    fn rosenbrock_converges() {
        let f = |x: &DVector<f64>| {
            (0..x.len() - 1)
                .map(|i| 100.0 * (x[i + 1] - x[i] * x[i]).powi(2) + (1.0 - x[i]).powi(2))
                .sum::<f64>()
        };
        let (best, _) = minimize(f, DVector::zeros(4), 0.5, 20_000);
        assert!(best < 1e-8, "{best}");
    }

    #[test]
    fn ill_conditioned_ellipsoid_converges() {
        let f = |x: &DVector<f64>| {
            let n = x.len() as f64;
            x.iter()
                .enumerate()
                .map(|(i, v)| 1e6f64.powf(i as f64 / (n - 1.0)) * v * v)
                .sum::<f64>()
        };
        let (best, evals) = minimize(f, DVector::from_element(6, 1.0), 1.0, 20_000);
        assert!(best < 1e-8, "{best} after {evals}");
    }
}
