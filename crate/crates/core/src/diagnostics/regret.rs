use crate::numerics::{vec, FeasibleSet};
use crate::optimizer::{fnv_start, fnv_update, RunConfig, Trajectory};
use crate::oracles::QuadraticForm;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct RegretCurve {
    /// `curve[t] = sum_{s <= t} f_s(x_s) - f_s(x*)`.
    pub values: Vec<f64>,
    pub x_star: Vec<f64>,
    pub comparator: String,
}

impl RegretCurve {
    pub fn final_value(&self) -> f64 {
        self.values.last().copied().unwrap_or(0.0)
    }
}

/// Sum of the per-round quadratic forms of rounds `0..=horizon`, replayed
/// from a fresh oracle for `trial`.
pub fn replay_quadratic_form(
    config: &RunConfig,
    trial: usize,
    horizon: usize,
) -> Result<QuadraticForm> {
    let mut oracle = config.build_oracle(trial)?;
    let mut total = QuadraticForm::zeros(oracle.dimension());
    for t in 0..=horizon {
        oracle.advance_round(t)?;
        total.accumulate(&oracle.quadratic_form()?);
    }
    Ok(total)
}

/// Minimiser of a convex quadratic over `set`.
///
/// Solved directly when the unconstrained minimiser is feasible, otherwise
/// by [`projected_gradient_descent`].
pub fn minimize_quadratic(form: &QuadraticForm, set: &FeasibleSet) -> Result<Vec<f64>> {
    let h = &form.hessian;
    let eig = h.clone().symmetric_eigen();
    let lmax = eig.eigenvalues.max();
    let lmin = eig.eigenvalues.min();
    if lmin < -1e-10 * lmax.abs().max(1.0) {
        return Err(Error::Unsupported(
            "best fixed decision needs a convex loss sequence".into(),
        ));
    }
    if lmin > 1e-12 * lmax.max(1.0) {
        if let Some(chol) = h.clone().cholesky() {
            let x = chol.solve(&form.linear);
            let x = x.as_slice().to_vec();
            if !set.is_constrained() || set.contains(&x, 0.0) {
                return Ok(x);
            }
        }
    } else if !set.is_constrained() {
        return Err(Error::Unsupported(
            "singular loss sequence has no unique unconstrained minimiser".into(),
        ));
    }
    Ok(projected_gradient_descent(form, set, lmax))
}

/// Projected gradient descent with step `1 / lmax` from the projection of
/// the origin, stopped when a step moves `x` by at most `1e-13` relative to
/// its scale.
pub fn projected_gradient_descent(form: &QuadraticForm, set: &FeasibleSet, lmax: f64) -> Vec<f64> {
    let d = form.linear.len();
    let mut x = set.project(&vec![0.0; d]);
    if lmax <= 0.0 {
        return x;
    }
    let step = 1.0 / lmax;
    for _ in 0..1_000_000 {
        let g = form.gradient(&x);
        let next = set.project(&vec::add_scaled(&x, -step, &g));
        let moved = vec::dist(&next, &x);
        x = next;
        if moved <= 1e-13 * (1.0 + vec::norm(&x)) {
            break;
        }
    }
    x
}

/// Best fixed decision in hindsight over rounds `0..=T` of `trial`.
///
/// Only problems exposing their per-round quadratic form are supported;
/// the nonconvex benchmarks report loss curves instead.
pub fn best_fixed_decision(config: &RunConfig, trial: usize) -> Result<Vec<f64>> {
    let form = replay_quadratic_form(config, trial, config.horizon)?;
    let n = (config.horizon + 1) as f64;
    let mean = QuadraticForm {
        hessian: form.hessian / n,
        linear: form.linear / n,
        constant: form.constant / n,
    };
    minimize_quadratic(&mean, &config.feasible_set)
}

/// Cumulative regret of `traj` against `x_star`, recomputed on a fresh
/// replay of the trial. The replayed losses must reproduce the recorded
/// ones bit for bit.
pub fn regret_curve(traj: &Trajectory, x_star: &[f64], config: &RunConfig) -> Result<RegretCurve> {
    let mut oracle = config.build_oracle(traj.trial)?;
    let d = oracle.dimension();
    if x_star.len() != d {
        return Err(Error::InvalidDimension(format!(
            "comparator has dimension {} but the problem has {d}",
            x_star.len()
        )));
    }
    if traj.iterates.len() != traj.records.len() {
        return Err(Error::InsufficientTrace(
            "trajectory iterates do not cover every round".into(),
        ));
    }
    let zero = vec![0.0; d];
    let mut checksum = fnv_start();
    let mut values = Vec::with_capacity(traj.records.len());
    let mut total = 0.0;
    for (t, (rec, x)) in traj.records.iter().zip(&traj.iterates).enumerate() {
        oracle.advance_round(t)?;
        checksum = fnv_update(checksum, oracle.eval_unmetered(&zero)?);
        let loss = oracle.eval_unmetered(x)?;
        if loss.to_bits() != rec.loss.to_bits() {
            return Err(Error::Integrity(format!(
                "replayed loss at round {t} is {loss}, recorded {}",
                rec.loss
            )));
        }
        total += loss - oracle.eval_unmetered(x_star)?;
        values.push(total);
    }
    if checksum != traj.oracle_checksum {
        return Err(Error::Integrity(
            "replayed loss sequence checksum differs from the trajectory".into(),
        ));
    }
    Ok(RegretCurve {
        values,
        x_star: x_star.to_vec(),
        comparator: "best_fixed_decision".into(),
    })
}
