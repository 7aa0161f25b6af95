//! CEM updates against a brute-force reimplementation of the formulas.

use cemrl_core::cem::{update_distribution, EliteWeights, WeightScheme};
use cemrl_core::SearchDistribution;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Log-rank weights straight from the definition.
fn oracle_weights(scheme: WeightScheme, k: usize) -> Vec<f64> {
    match scheme {
        WeightScheme::Uniform => vec![1.0 / k as f64; k],
        WeightScheme::LogRank => {
            let raw: Vec<f64> = (1..=k).map(|i| (1.0 + k as f64).ln() / i as f64).collect();
            let z: f64 = raw.iter().sum();
            raw.iter().map(|r| r / z).collect()
        }
    }
}

/// Mean and diagonal covariance, coordinate by coordinate.
fn oracle_update(mu: &[f64], eps: f64, elites: &[Vec<f64>], w: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let d = mu.len();
    let mut m = vec![0.0; d];
    let mut v = vec![0.0; d];
    for j in 0..d {
        for i in 0..elites.len() {
            m[j] += w[i] * elites[i][j];
        }
        for i in 0..elites.len() {
            let dev = elites[i][j] - mu[j];
            v[j] += w[i] * dev * dev;
        }
        v[j] += eps;
    }
    (m, v)
}

#[test]
fn fifty_random_updates_match_brute_force() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    for case in 0..50 {
        let d = rng.random_range(1..8);
        let k = rng.random_range(1..7);
        let scheme = if case % 2 == 0 { WeightScheme::Uniform } else { WeightScheme::LogRank };
        let mu: Vec<f64> = (0..d).map(|_| rng.random_range(-2.0..2.0)).collect();
        let sigma_init = rng.random_range(1e-3..1.0);
        let mut dist = SearchDistribution::new(mu.clone(), sigma_init, 1e-5, 0.95).unwrap();
        dist.epsilon = rng.random_range(1e-5..sigma_init);
        let elites: Vec<Vec<f64>> = (0..k)
            .map(|_| (0..d).map(|_| rng.random_range(-3.0..3.0)).collect())
            .collect();

        let w = EliteWeights::new(scheme, k).unwrap();
        let ow = oracle_weights(scheme, k);
        for (a, b) in w.lambdas.iter().zip(&ow) {
            assert!((a - b).abs() < 1e-12, "case {case}: weight {a} vs {b}");
        }

        let next = update_distribution(&dist, &elites, &w).unwrap();
        let (om, ov) = oracle_update(&mu, dist.epsilon, &elites, &ow);
        for j in 0..d {
            assert!((next.mu[j] - om[j]).abs() < 1e-12, "case {case}: mu[{j}]");
            assert!((next.sigma2[j] - ov[j]).abs() < 1e-12, "case {case}: sigma2[{j}]");
        }
        let decayed = 0.95 * dist.epsilon + 0.05 * 1e-5;
        assert!((next.epsilon - decayed).abs() < 1e-12);
    }
}

#[test]
fn epsilon_follows_closed_form() {
    for (s0, send, tau) in [(1e-3, 1e-5, 0.95), (0.5, 1e-3, 0.9), (1e-2, 1e-2, 0.5), (2.0, 1e-4, 0.99)] {
        let mut d = SearchDistribution::new(vec![0.0], s0, send, tau).unwrap();
        for k in 1..=1000 {
            d.decay_epsilon();
            let closed = send + tau.powi(k) * (s0 - send);
            assert!((d.epsilon - closed).abs() < 1e-12, "k={k}: {} vs {closed}", d.epsilon);
        }
    }
}
