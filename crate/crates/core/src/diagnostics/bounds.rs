use crate::estimators::{instance_bound_rhs, reduced_norm_premise, RuleFired};
use crate::numerics::vec;
use crate::optimizer::Trajectory;
use crate::{Error, Result};

/// Relative slack allowed on the deterministic residual bound, covering
/// rounding in the two sides.
const BOUND_RTOL: f64 = 1e-10;

/// Per-round checks of the residual-estimator bounds over a trajectory.
///
/// For every round `t >= 1` the residual estimate
/// `d/delta (f_t(w_t) - f_{t-1}(w_{t-1})) u_t` is rebuilt from the recorded
/// queries, whether or not the run actually used it.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundReport {
    pub rounds_checked: usize,
    /// Rounds where the run itself used the residual estimate.
    pub reuse_rounds: usize,
    /// Rounds skipped because `w_t == w_{t-1}`.
    pub degenerate_rounds: usize,
    pub instance_bound_violations: usize,
    /// Rounds where the reduced-norm premise holds.
    pub premise_rounds: usize,
    /// Premise rounds where `||g_t||^2 >= d L^2`.
    pub reduced_norm_violations: usize,
    /// Mean and max of `||g_t||^2` over the estimates the run used.
    pub mean_sq_norm: f64,
    pub max_sq_norm: f64,
}

pub fn validate_bounds(traj: &Trajectory, lipschitz: f64) -> Result<BoundReport> {
    let probes = traj.probes.as_ref().ok_or_else(|| {
        Error::InsufficientTrace("trajectory was run without probe recording".into())
    })?;
    if probes.len() != traj.records.len() {
        return Err(Error::InsufficientTrace(
            "probe trace does not cover every round".into(),
        ));
    }
    let mut report = BoundReport {
        rounds_checked: 0,
        reuse_rounds: 0,
        degenerate_rounds: 0,
        instance_bound_violations: 0,
        premise_rounds: 0,
        reduced_norm_violations: 0,
        mean_sq_norm: 0.0,
        max_sq_norm: 0.0,
    };
    let n = traj.records.len();
    for r in &traj.records {
        report.mean_sq_norm += r.est_sq_norm / n as f64;
        report.max_sq_norm = report.max_sq_norm.max(r.est_sq_norm);
    }
    for t in 1..n {
        let (prev, now) = match (&probes[t - 1], &probes[t]) {
            (Some(p), Some(q)) => (p, q),
            _ => {
                return Err(Error::InsufficientTrace(format!(
                    "round {t} has no recorded single-direction query"
                )))
            }
        };
        let d = now.u.len();
        let prev_sq = traj.records[t - 1].est_sq_norm;
        if traj.records[t].rule == RuleFired::Reused {
            report.reuse_rounds += 1;
        }
        if vec::dist(&now.w, &prev.w) == 0.0 {
            report.degenerate_rounds += 1;
            continue;
        }
        report.rounds_checked += 1;
        let coef = d as f64 / traj.delta * (now.value - prev.value);
        let lhs = coef * coef * vec::norm_sq(&now.u);
        let rhs = instance_bound_rhs(
            now.value, prev.value, &now.w, &prev.w, prev_sq, d, traj.eta, traj.delta,
        )?;
        if lhs > rhs * (1.0 + BOUND_RTOL) {
            report.instance_bound_violations += 1;
        }
        if reduced_norm_premise(
            now.value, prev.value, &now.w, &prev.w, prev_sq, d, lipschitz,
        ) {
            report.premise_rounds += 1;
            if lhs >= d as f64 * lipschitz * lipschitz {
                report.reduced_norm_violations += 1;
            }
        }
    }
    Ok(report)
}
