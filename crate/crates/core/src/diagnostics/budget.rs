use crate::optimizer::{RunConfig, Trajectory};
use crate::{Error, Result};

/// The last iterate `traj` produced using at most `budget` metered queries.
///
/// Round `r`'s step produces the iterate played in round `r + 1`, so this
/// is the iterate after the last round whose cumulative count fits.
pub fn iterate_within_budget(traj: &Trajectory, budget: u64) -> Result<&[f64]> {
    if traj.iterates.is_empty() {
        return Err(Error::InsufficientTrace(
            "trajectory has no iterates".into(),
        ));
    }
    let fitted = traj
        .records
        .iter()
        .take_while(|r| r.cum_queries <= budget)
        .count();
    Ok(match fitted {
        0 => &traj.iterates[0],
        n if n == traj.records.len() => &traj.final_x,
        n => &traj.iterates[n],
    })
}

/// Loss at round `eval_round` of the iterate reached within `budget`
/// queries, as if the learner kept playing it once the budget ran out.
/// Evaluated on a fresh replay of the trial.
pub fn loss_at_budget(
    traj: &Trajectory,
    config: &RunConfig,
    budget: u64,
    eval_round: usize,
) -> Result<f64> {
    let x = iterate_within_budget(traj, budget)?;
    let mut oracle = config.build_oracle(traj.trial)?;
    for t in 0..=eval_round {
        oracle.advance_round(t)?;
    }
    oracle.eval_unmetered(x)
}
