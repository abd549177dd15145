use crate::estimators::{step_with_cache, EstimatorConfig, QueryCache};
use crate::numerics::{vec, Purpose, SeededRng};
use crate::optimizer::{RunConfig, Runner};
use crate::oracles::{Oracle, Unmetered};
use crate::parallel::{chunks, map_indices, Execution};
use crate::{Error, Result};

/// Monte Carlo summary of an estimator's output distribution at a frozen
/// oracle round, point and cache state.
#[derive(Debug, Clone, PartialEq)]
pub struct VarianceSummary {
    pub samples: usize,
    /// Mean of `||g||^2`.
    pub mean_sq_norm: f64,
    /// Sample variance of `||g||`.
    pub norm_variance: f64,
    /// Sum of coordinate sample variances, `E||g - E g||^2`.
    pub total_variance: f64,
    pub mean_vector: Vec<f64>,
}

#[derive(Default)]
struct Moments {
    n: usize,
    norm_sum: f64,
    norm_sq_sum: f64,
    vec_sum: Vec<f64>,
    vec_sq_sum: Vec<f64>,
}

impl Moments {
    fn push(&mut self, g: &[f64]) {
        if self.vec_sum.is_empty() {
            self.vec_sum = vec![0.0; g.len()];
            self.vec_sq_sum = vec![0.0; g.len()];
        }
        let sq = vec::norm_sq(g);
        self.n += 1;
        self.norm_sum += sq.sqrt();
        self.norm_sq_sum += sq;
        for ((s, s2), v) in self.vec_sum.iter_mut().zip(&mut self.vec_sq_sum).zip(g) {
            *s += v;
            *s2 += v * v;
        }
    }

    fn merge(mut self, other: Moments) -> Moments {
        if self.n == 0 {
            return other;
        }
        self.n += other.n;
        self.norm_sum += other.norm_sum;
        self.norm_sq_sum += other.norm_sq_sum;
        for (a, b) in self.vec_sum.iter_mut().zip(&other.vec_sum) {
            *a += b;
        }
        for (a, b) in self.vec_sq_sum.iter_mut().zip(&other.vec_sq_sum) {
            *a += b;
        }
        self
    }

    fn summary(self) -> VarianceSummary {
        let n = self.n as f64;
        let unbias = n / (n - 1.0);
        let mean_norm = self.norm_sum / n;
        let mean_sq = self.norm_sq_sum / n;
        let mean_vector: Vec<f64> = self.vec_sum.iter().map(|s| s / n).collect();
        let total: f64 = self
            .vec_sq_sum
            .iter()
            .zip(&mean_vector)
            .map(|(s2, m)| (s2 / n - m * m).max(0.0))
            .sum();
        VarianceSummary {
            samples: self.n,
            mean_sq_norm: mean_sq,
            norm_variance: ((mean_sq - mean_norm * mean_norm) * unbias).max(0.0),
            total_variance: total * unbias,
            mean_vector,
        }
    }
}

/// Draw `n` estimates at `x` from the frozen `oracle`, each starting from
/// the same `cache` state, through the unmetered channel.
///
/// Samples are split into fixed chunks with their own generator forked from
/// `rng`, so the result does not depend on `exec`.
#[allow(clippy::too_many_arguments)]
pub fn estimator_variance_trace(
    config: &EstimatorConfig,
    oracle: &Oracle,
    x: &[f64],
    cache: &QueryCache,
    eta: f64,
    n: usize,
    rng: &SeededRng,
    exec: Execution,
) -> Result<VarianceSummary> {
    if n < 2 {
        return Err(Error::InvalidInput(
            "variance needs at least two samples".into(),
        ));
    }
    config.validate()?;
    let parts = map_indices(exec, chunks(n).len(), |c| -> Result<Moments> {
        let (_, len) = chunks(n)[c];
        let mut local = rng.fork(Purpose::Diagnostics, c as u64);
        let mut m = Moments::default();
        for _ in 0..len {
            let mut scratch = cache.clone();
            let g = step_with_cache(
                config,
                &mut scratch,
                &mut Unmetered(oracle),
                x,
                &mut local,
                eta,
            )?;
            m.push(&g.vector);
        }
        Ok(m)
    });
    let mut total = Moments::default();
    for p in parts {
        total = total.merge(p?);
    }
    Ok(total.summary())
}

/// Variance summaries at the given rounds of one trial: the run is frozen
/// at each round in turn and the estimator is resampled `n` times there.
pub fn variance_over_run(
    config: &RunConfig,
    trial: usize,
    rounds: &[usize],
    n: usize,
    exec: Execution,
) -> Result<Vec<(usize, VarianceSummary)>> {
    let mut sorted = rounds.to_vec();
    sorted.sort_unstable();
    sorted.dedup();
    let mut runner = Runner::new(config.clone(), trial)?;
    let base = config.trial_rng(trial).fork(Purpose::Diagnostics, 0);
    let mut out = Vec::with_capacity(sorted.len());
    for t in sorted {
        runner.freeze_at(t)?;
        let summary = estimator_variance_trace(
            &config.estimator,
            runner.oracle(),
            runner.x(),
            runner.estimator().cache(),
            config.eta,
            n,
            &base.fork(Purpose::Diagnostics, t as u64 + 1),
            exec,
        )
        .map_err(|e| e.at_round(t))?;
        out.push((t, summary));
    }
    Ok(out)
}
