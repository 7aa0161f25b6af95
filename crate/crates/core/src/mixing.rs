//! Importance mixing: recycle previous-generation genomes whose density ratio
//! under the new search distribution allows it, saving their re-evaluation.

use rand::Rng;

use crate::cem::{Individual, Origin, SearchDistribution};
use crate::error::{check_len, Error, Result};

const RATIO_CAP: f64 = 1e300;
const LN_2PI: f64 = 1.837_877_066_409_345_5;

/// Evaluated genomes of the previous generation together with the
/// distribution they were drawn from.
#[derive(Debug, Clone, PartialEq)]
pub struct GenerationArchive {
    members: Vec<Individual>,
    snapshot: SearchDistribution,
}

impl GenerationArchive {
    pub fn new(members: Vec<Individual>, snapshot: SearchDistribution) -> Result<Self> {
        for (index, m) in members.iter().enumerate() {
            if m.fitness.is_none() {
                return Err(Error::Unevaluated { index });
            }
            check_len("archived genome", snapshot.dim(), m.genome.len())?;
        }
        Ok(GenerationArchive { members, snapshot })
    }

    pub fn members(&self) -> &[Individual] {
        &self.members
    }

    pub fn snapshot(&self) -> &SearchDistribution {
        &self.snapshot
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }
}

/// Diagonal-Gaussian log-density of `genome` under `dist`.
///
/// A zero-variance coordinate contributes nothing when the genome sits on the
/// mean and makes the density `-inf` otherwise.
pub fn log_pdf(dist: &SearchDistribution, genome: &[f64]) -> Result<f64> {
    check_len("genome", dist.dim(), genome.len())?;
    let mut acc = 0.0;
    for ((z, m), s2) in genome.iter().zip(&dist.mu).zip(&dist.sigma2) {
        let d = z - m;
        if *s2 == 0.0 {
            if d != 0.0 {
                return Ok(f64::NEG_INFINITY);
            }
            continue;
        }
        acc -= 0.5 * (LN_2PI + s2.ln()) + d * d / (2.0 * s2);
    }
    Ok(acc)
}

/// `p_num / p_den` from log densities, clamped to `[0, 1e300]`.
fn density_ratio(log_num: f64, log_den: f64) -> f64 {
    if log_num == f64::NEG_INFINITY {
        0.0
    } else if log_den == f64::NEG_INFINITY {
        RATIO_CAP
    } else {
        (log_num - log_den).exp().clamp(0.0, RATIO_CAP)
    }
}

/// Probability of keeping an old sample: `min(1, p_new / p_old)`.
pub fn reuse_probability(old: &SearchDistribution, new: &SearchDistribution, z: &[f64]) -> Result<f64> {
    Ok(density_ratio(log_pdf(new, z)?, log_pdf(old, z)?).min(1.0))
}

/// Probability of keeping a fresh sample: `max(0, 1 - p_old / p_new)`.
pub fn fresh_acceptance_probability(
    old: &SearchDistribution,
    new: &SearchDistribution,
    z: &[f64],
) -> Result<f64> {
    Ok((1.0 - density_ratio(log_pdf(old, z)?, log_pdf(new, z)?)).max(0.0))
}

/// Counters of one mixing pass.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct MixStats {
    pub old_tested: usize,
    pub old_accepted: usize,
    pub fresh_tested: usize,
    pub fresh_accepted: usize,
    pub trimmed: usize,
    pub filled: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MixOutcome {
    pub individuals: Vec<Individual>,
    pub stats: MixStats,
}

impl MixOutcome {
    pub fn reused(&self) -> usize {
        self.individuals.iter().filter(|i| i.origin == Origin::Reused).count()
    }
}

/// Builds a generation of exactly `n` individuals from `new_dist`, reusing
/// archive members by rejection sampling.
///
/// Each loop iteration draws two uniforms, tests the next archived genome,
/// then draws and tests one fresh genome; the loop stops once `n` are kept.
/// An overshoot drops one random member, a shortfall is filled with fresh
/// samples. Reused members keep their cached fitness and cost no new steps.
pub fn importance_mix<R: Rng + ?Sized>(
    archive: &GenerationArchive,
    new_dist: &SearchDistribution,
    n: usize,
    rng: &mut R,
) -> Result<MixOutcome> {
    if n == 0 {
        return Err(Error::InvalidArgument("generation size must be >= 1".into()));
    }
    check_len("archive vs new distribution", new_dist.dim(), archive.snapshot.dim())?;
    let mut stats = MixStats::default();
    if archive.is_empty() {
        stats.filled = n;
        let individuals = new_dist
            .sample_population(n, rng)
            .into_iter()
            .map(Individual::sampled)
            .collect();
        return Ok(MixOutcome { individuals, stats });
    }

    let old_dist = &archive.snapshot;
    let mut out: Vec<Individual> = Vec::with_capacity(n + 1);
    for i in 0..n {
        let rand1: f64 = rng.random();
        let rand2: f64 = rng.random();

        if let Some(old) = archive.members.get(i) {
            stats.old_tested += 1;
            if reuse_probability(old_dist, new_dist, &old.genome)? > rand1 {
                stats.old_accepted += 1;
                out.push(Individual {
                    genome: old.genome.clone(),
                    fitness: old.fitness,
                    env_steps: 0,
                    origin: Origin::Reused,
                });
            }
        }

        let fresh = new_dist.sample(rng);
        stats.fresh_tested += 1;
        if fresh_acceptance_probability(old_dist, new_dist, &fresh)? > rand2 {
            stats.fresh_accepted += 1;
            out.push(Individual::sampled(fresh));
        }

        if out.len() >= n {
            break;
        }
    }
    if out.len() > n {
        let victim = rng.random_range(0..out.len());
        out.remove(victim);
        stats.trimmed = 1;
    }
    while out.len() < n {
        out.push(Individual::sampled(new_dist.sample(rng)));
        stats.filled += 1;
    }
    Ok(MixOutcome {
        individuals: out,
        stats,
    })
}

/// Members eligible for the archive: everything that was not moved by
/// gradient steps.
pub fn mixable_subset(pop: &[Individual]) -> Vec<Individual> {
    pop.iter()
        .filter(|i| matches!(i.origin, Origin::Sampled | Origin::Reused))
        .cloned()
        .collect()
}
