use crate::optimizer::RunConfig;
use crate::{Error, Result};

/// Empirical problem constants over a finite probe grid, replayed through
/// the unmetered channel. Both are lower estimates of the true maxima over
/// the feasible set.
#[derive(Debug, Clone, PartialEq)]
pub struct LossConstants {
    /// `max_t max_x f_t(x)`.
    pub max_loss: f64,
    /// `max_{t >= 1} max_x |f_t(x) - f_{t-1}(x)|`; 0 when the horizon is 0.
    pub max_variation: f64,
    pub rounds: usize,
    pub points: usize,
}

pub fn loss_constants(
    config: &RunConfig,
    trial: usize,
    points: &[Vec<f64>],
) -> Result<LossConstants> {
    if points.is_empty() {
        return Err(Error::InvalidInput("probe grid is empty".into()));
    }
    let mut oracle = config.build_oracle(trial)?;
    let mut prev: Vec<f64> = Vec::new();
    let mut max_loss = f64::NEG_INFINITY;
    let mut max_variation = 0.0f64;
    for t in 0..=config.horizon {
        oracle.advance_round(t)?;
        let now = points
            .iter()
            .map(|x| oracle.eval_unmetered(x))
            .collect::<Result<Vec<f64>>>()?;
        for (i, v) in now.iter().enumerate() {
            max_loss = max_loss.max(*v);
            if let Some(p) = prev.get(i) {
                max_variation = max_variation.max((v - p).abs());
            }
        }
        prev = now;
    }
    Ok(LossConstants {
        max_loss,
        max_variation,
        rounds: config.horizon + 1,
        points: points.len(),
    })
}
