//! Summary statistics across runs.

use crate::error::{Error, Result};
use crate::harness::RunRecord;

/// Arithmetic mean; NaN for an empty slice.
pub fn mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return f64::NAN;
    }
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Median (average of the two middle values for even lengths).
pub fn median(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return f64::NAN;
    }
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Sample standard deviation over `sqrt(n)`: the half-width of a 68%
/// interval on the mean. Zero for fewer than two values.
pub fn standard_error(xs: &[f64]) -> f64 {
    let n = xs.len();
    if n < 2 {
        return 0.0;
    }
    let m = mean(xs);
    let var = xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1) as f64;
    (var / n as f64).sqrt()
}

#[derive(Debug, Clone, PartialEq)]
pub struct CurvePoint {
    pub total_steps: u64,
    /// Checkpoint index on the grid, starting at 1.
    pub generation: u64,
    pub eval_mean: f64,
    pub eval_median: f64,
    pub ci68: f64,
    pub reuse_fraction: f64,
    pub epsilon: f64,
    /// Per-run values at this checkpoint.
    pub run_values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AggregateCurve {
    pub points: Vec<CurvePoint>,
    pub n_runs: usize,
}

impl AggregateCurve {
    pub fn last(&self) -> Option<&CurvePoint> {
        self.points.last()
    }

    /// Point at exactly `steps`, if on the grid.
    pub fn at(&self, steps: u64) -> Option<&CurvePoint> {
        self.points.iter().find(|p| p.total_steps == steps)
    }
}

/// Linear interpolation of `field` at step `c`; `None` before the first
/// report or past the last one.
fn interpolate(run: &[RunRecord], c: u64, field: impl Fn(&RunRecord) -> f64) -> Option<f64> {
    let hi = run.iter().position(|r| r.total_steps >= c)?;
    let b = &run[hi];
    if b.total_steps == c {
        // several reports at one step count: take the latest
        let last = run.iter().rposition(|r| r.total_steps == c).expect("exists");
        return Some(field(&run[last]));
    }
    let a = run[..hi].last()?;
    let t = (c - a.total_steps) as f64 / (b.total_steps - a.total_steps) as f64;
    Some(field(a) + t * (field(b) - field(a)))
}

/// Linearly interpolates every run onto a common grid of checkpoints every
/// `interval` steps and summarizes across runs. The grid stops at the
/// shortest run's final step count; checkpoints before some run's first
/// report are skipped.
pub fn aggregate(runs: &[Vec<RunRecord>], interval: u64) -> Result<AggregateCurve> {
    if runs.is_empty() {
        return Err(Error::InvalidArgument("no runs to aggregate".into()));
    }
    if interval == 0 {
        return Err(Error::InvalidArgument("checkpoint interval must be >= 1".into()));
    }
    let mut horizon = u64::MAX;
    for (i, run) in runs.iter().enumerate() {
        if run.is_empty() {
            return Err(Error::InvalidArgument(format!("run {i} has no records")));
        }
        if run.windows(2).any(|w| w[1].total_steps < w[0].total_steps) {
            return Err(Error::InvalidArgument(format!("run {i} is not ordered by total_steps")));
        }
        horizon = horizon.min(run.last().expect("non-empty").total_steps);
    }

    let mut points = Vec::new();
    let mut k = 1;
    while k * interval <= horizon {
        let c = k * interval;
        let column = |f: fn(&RunRecord) -> f64| -> Option<Vec<f64>> {
            runs.iter().map(|run| interpolate(run, c, f)).collect()
        };
        if let (Some(values), Some(reuse), Some(eps)) = (
            column(|r| r.eval_mean),
            column(|r| r.reuse_fraction),
            column(|r| r.epsilon),
        ) {
            points.push(CurvePoint {
                total_steps: c,
                generation: k,
                eval_mean: mean(&values),
                eval_median: median(&values),
                ci68: standard_error(&values),
                reuse_fraction: mean(&reuse),
                epsilon: mean(&eps),
                run_values: values,
            });
        }
        k += 1;
    }
    Ok(AggregateCurve { points, n_runs: runs.len() })
}
