//! Experiment plumbing: configuration files, per-run records, aggregation
//! across seeds, CSV output and population diagnostics.

pub mod config;
pub mod csv;
pub mod diagnostics;
pub mod stats;

pub use config::parse_config;
pub use csv::{emit_csv, emit_run_csv, parse_csv, CsvRow};
pub use diagnostics::{average_similarity, similarity_histogram, SimilarityHistogram};
pub use stats::{aggregate, mean, median, standard_error, AggregateCurve, CurvePoint};

/// One report of a run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunRecord {
    /// Environment steps spent on learning-relevant evaluations so far.
    pub total_steps: u64,
    pub generation: u64,
    /// Mean greedy return of the reported actor.
    pub eval_mean: f64,
    pub episode_returns: Vec<f64>,
    pub wall_time_s: f64,
    /// Share of the population reused from the previous generation.
    pub reuse_fraction: f64,
    pub epsilon: f64,
    /// Average population similarity; only for evolutionary algorithms.
    pub similarity: Option<f64>,
    /// Steps spent by the reporting rollouts (not counted in `total_steps`).
    pub reporting_steps: u64,
}

impl RunRecord {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        total_steps: u64,
        generation: u64,
        episode_returns: Vec<f64>,
        wall_time_s: f64,
        reuse_fraction: f64,
        epsilon: f64,
        similarity: Option<f64>,
        reporting_steps: u64,
    ) -> Self {
        RunRecord {
            total_steps,
            generation,
            eval_mean: mean(&episode_returns),
            episode_returns,
            wall_time_s,
            reuse_fraction,
            epsilon,
            similarity,
            reporting_steps,
        }
    }

    pub fn eval_median(&self) -> f64 {
        median(&self.episode_returns)
    }
}
