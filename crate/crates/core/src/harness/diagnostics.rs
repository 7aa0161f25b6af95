//! Population similarity: for each pair of genomes, the fraction of
//! coordinates that agree within a tolerance.

use crate::error::{check_len, Error, Result};

pub const SIMILARITY_BINS: usize = 10;

#[derive(Debug, Clone, PartialEq)]
pub struct SimilarityHistogram {
    /// Pair counts per bin of width 0.1 over `[0, 1]`; a fraction of exactly
    /// 1 lands in the last bin.
    pub counts: [usize; SIMILARITY_BINS],
    pub average: f64,
    pub pairs: usize,
}

fn pair_fractions(genomes: &[&[f64]], tol: f64) -> Result<Vec<f64>> {
    if !(tol >= 0.0) {
        return Err(Error::InvalidArgument(format!("tolerance must be >= 0, got {tol}")));
    }
    if genomes.len() < 2 {
        return Err(Error::InvalidArgument(format!(
            "similarity needs at least 2 individuals, got {}",
            genomes.len()
        )));
    }
    let d = genomes[0].len();
    for g in genomes {
        check_len("genome", d, g.len())?;
    }
    let mut out = Vec::with_capacity(genomes.len() * genomes.len().saturating_sub(1) / 2);
    for i in 0..genomes.len() {
        for j in (i + 1)..genomes.len() {
            let shared = genomes[i]
                .iter()
                .zip(genomes[j])
                .filter(|(a, b)| (*a - *b).abs() <= tol)
                .count();
            out.push(if d == 0 { 1.0 } else { shared as f64 / d as f64 });
        }
    }
    Ok(out)
}

pub fn similarity_histogram(genomes: &[&[f64]], tol: f64) -> Result<SimilarityHistogram> {
    let fractions = pair_fractions(genomes, tol)?;
    let mut counts = [0; SIMILARITY_BINS];
    for f in &fractions {
        let bin = ((f * SIMILARITY_BINS as f64) as usize).min(SIMILARITY_BINS - 1);
        counts[bin] += 1;
    }
    let average = fractions.iter().sum::<f64>() / fractions.len() as f64;
    Ok(SimilarityHistogram {
        counts,
        average,
        pairs: fractions.len(),
    })
}

/// Mean shared-coordinate fraction over all unordered pairs.
pub fn average_similarity(genomes: &[&[f64]], tol: f64) -> Result<f64> {
    Ok(similarity_histogram(genomes, tol)?.average)
}
