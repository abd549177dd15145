//! Post-hoc analysis of runs: regret against the best fixed decision,
//! Monte Carlo variance of estimators, checks of the residual-estimator
//! bounds, and the symmetry diagnostic for the lazy-query region.
//!
//! Everything here evaluates losses through the unmetered channel, so
//! diagnostics never change a run's query count.

mod bounds;
mod budget;
mod constants;
mod regret;
mod symmetry;
mod variance;

pub use bounds::{validate_bounds, BoundReport};
pub use budget::{iterate_within_budget, loss_at_budget};
pub use constants::{loss_constants, LossConstants};
pub use regret::{
    best_fixed_decision, minimize_quadratic, projected_gradient_descent, regret_curve,
    replay_quadratic_form, RegretCurve,
};
pub use symmetry::{
    asymmetry_score, symmetry_diagnostic, symmetry_from_rule, SymmetryReport, SymmetrySample,
};
pub use variance::{estimator_variance_trace, variance_over_run, VarianceSummary};

use crate::{Error, Result};

/// Least-squares slope of `ln y` against `ln x`.
pub fn loglog_slope(xs: &[f64], ys: &[f64]) -> Result<f64> {
    if xs.len() != ys.len() || xs.len() < 2 {
        return Err(Error::InvalidInput(
            "slope fit needs at least two paired points".into(),
        ));
    }
    if xs.iter().chain(ys).any(|v| !(*v > 0.0) || !v.is_finite()) {
        return Err(Error::InvalidInput(
            "slope fit needs positive finite values".into(),
        ));
    }
    let lx: Vec<f64> = xs.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|v| v.ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = lx.iter().map(|a| (a - mx) * (a - mx)).sum();
    if sxx == 0.0 {
        return Err(Error::DegenerateInput("all x values coincide".into()));
    }
    Ok(sxy / sxx)
}

/// Mean and sample standard deviation.
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    if n == 1 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    (mean, var.sqrt())
}
