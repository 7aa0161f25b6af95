//! Diagonal-Gaussian cross-entropy method.

use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{check_len, Error, Result};

/// Flat parameter vector of one individual.
pub type Genome = Vec<f64>;

/// CEM search distribution: mean, per-coordinate variance and the decaying
/// extra variance `epsilon` added after every covariance update.
#[derive(Debug, Clone, PartialEq)]
pub struct SearchDistribution {
    pub mu: Vec<f64>,
    pub sigma2: Vec<f64>,
    pub epsilon: f64,
    pub sigma_init: f64,
    pub sigma_end: f64,
    pub tau_cem: f64,
}

impl SearchDistribution {
    /// `Σ = sigma_init · I` and `epsilon = sigma_init`.
    pub fn new(mu: Vec<f64>, sigma_init: f64, sigma_end: f64, tau_cem: f64) -> Result<Self> {
        if !(sigma_end > 0.0 && sigma_end.is_finite()) {
            return Err(Error::InvalidArgument(format!("sigma_end must be positive, got {sigma_end}")));
        }
        if !(sigma_init >= sigma_end && sigma_init.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "sigma_init ({sigma_init}) must be finite and >= sigma_end ({sigma_end})"
            )));
        }
        if !(0.0..1.0).contains(&tau_cem) {
            return Err(Error::InvalidArgument(format!("tau_cem must lie in [0, 1), got {tau_cem}")));
        }
        let sigma2 = vec![sigma_init; mu.len()];
        Ok(SearchDistribution {
            mu,
            sigma2,
            epsilon: sigma_init,
            sigma_init,
            sigma_end,
            tau_cem,
        })
    }

    pub fn dim(&self) -> usize {
        self.mu.len()
    }

    /// `n` genomes, individual-major, each coordinate `N(mu_j, sigma2_j)`.
    pub fn sample_population<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Vec<Genome> {
        (0..n).map(|_| self.sample(rng)).collect()
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Genome {
        self.mu
            .iter()
            .zip(&self.sigma2)
            .map(|(m, s2)| {
                let z: f64 = rng.sample(StandardNormal);
                m + s2.sqrt() * z
            })
            .collect()
    }

    /// `epsilon <- tau_cem · epsilon + (1 - tau_cem) · sigma_end`.
    pub fn decay_epsilon(&mut self) {
        let next = self.tau_cem * self.epsilon + (1.0 - self.tau_cem) * self.sigma_end;
        // rounding must not push the fixed point below sigma_end
        self.epsilon = next.max(self.sigma_end);
    }

    /// Refits the distribution to the ordered elites.
    ///
    /// The new mean is the weighted elite average; the new variance is the
    /// weighted squared deviation from the *old* mean plus `epsilon`. Epsilon is
    /// decayed once afterwards.
    pub fn update(&mut self, elites: &[Genome], weights: &EliteWeights) -> Result<()> {
        check_len("elites vs weights", weights.lambdas.len(), elites.len())?;
        let d = self.dim();
        for e in elites {
            check_len("elite genome", d, e.len())?;
        }
        let mut mu_new = vec![0.0; d];
        let mut sigma2_new = vec![self.epsilon; d];
        let mut dev = vec![0.0; d];
        for (z, &lambda) in elites.iter().zip(&weights.lambdas) {
            for j in 0..d {
                mu_new[j] += lambda * z[j];
                dev[j] = z[j] - self.mu[j];
            }
            for j in 0..d {
                sigma2_new[j] += lambda * dev[j] * dev[j];
            }
        }
        self.mu = mu_new;
        self.sigma2 = sigma2_new;
        self.decay_epsilon();
        Ok(())
    }
}

/// Where an individual's genome came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Origin {
    Sampled,
    GradientStepped,
    Reused,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Individual {
    pub genome: Genome,
    /// Episode return; `None` until evaluated.
    pub fitness: Option<f64>,
    /// Environment steps spent by this individual's own evaluation.
    pub env_steps: u64,
    pub origin: Origin,
}

impl Individual {
    pub fn sampled(genome: Genome) -> Self {
        Individual {
            genome,
            fitness: None,
            env_steps: 0,
            origin: Origin::Sampled,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WeightScheme {
    Uniform,
    LogRank,
}

/// Recombination weights, best rank first.
#[derive(Debug, Clone, PartialEq)]
pub struct EliteWeights {
    pub scheme: WeightScheme,
    pub lambdas: Vec<f64>,
}

impl EliteWeights {
    /// Uniform: `1/K_e`. Log-rank: `λ_i ∝ log(1 + K_e) / i`, normalized.
    pub fn new(scheme: WeightScheme, n_elites: usize) -> Result<Self> {
        if n_elites == 0 {
            return Err(Error::InvalidArgument("number of elites must be >= 1".into()));
        }
        let lambdas = match scheme {
            WeightScheme::Uniform => vec![1.0 / n_elites as f64; n_elites],
            WeightScheme::LogRank => {
                let c = (1.0 + n_elites as f64).ln();
                let raw: Vec<f64> = (1..=n_elites).map(|i| c / i as f64).collect();
                let total: f64 = raw.iter().sum();
                raw.into_iter().map(|r| r / total).collect()
            }
        };
        Ok(EliteWeights { scheme, lambdas })
    }

    pub fn n_elites(&self) -> usize {
        self.lambdas.len()
    }
}

/// Free-function form of [`EliteWeights::new`].
pub fn compute_weights(scheme: WeightScheme, n_elites: usize) -> Result<EliteWeights> {
    EliteWeights::new(scheme, n_elites)
}

/// Returns the refitted copy of `dist`; see [`SearchDistribution::update`].
pub fn update_distribution(
    dist: &SearchDistribution,
    elites: &[Genome],
    weights: &EliteWeights,
) -> Result<SearchDistribution> {
    let mut next = dist.clone();
    next.update(elites, weights)?;
    Ok(next)
}

/// Indices of the `n_elites` fittest individuals, best first. Ties keep the
/// lower population index first.
pub fn elite_indices(pop: &[Individual], n_elites: usize) -> Result<Vec<usize>> {
    if n_elites > pop.len() {
        return Err(Error::InvalidArgument(format!(
            "cannot select {n_elites} elites from a population of {}",
            pop.len()
        )));
    }
    let mut scored = Vec::with_capacity(pop.len());
    for (i, ind) in pop.iter().enumerate() {
        match ind.fitness {
            Some(f) if !f.is_nan() => scored.push((i, f)),
            _ => return Err(Error::Unevaluated { index: i }),
        }
    }
    // stable: equal fitness keeps population order
    scored.sort_by(|a, b| b.1.partial_cmp(&a.1).expect("NaN filtered"));
    Ok(scored.into_iter().take(n_elites).map(|(i, _)| i).collect())
}

/// Genomes of the `n_elites` fittest individuals in descending fitness order.
pub fn select_elites(pop: &[Individual], n_elites: usize) -> Result<Vec<Genome>> {
    Ok(elite_indices(pop, n_elites)?
        .into_iter()
        .map(|i| pop[i].genome.clone())
        .collect())
}
