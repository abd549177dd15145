use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{
    residual_coef, symmetric_coef, temporal_variation_a, temporal_variation_b, Accumulator,
    CacheEntry, GradientEstimate, Probe, QueryCache, RuleFired, Threshold,
};
use crate::numerics::{sample_unit_sphere, vec};
use crate::oracles::QueryChannel;
use crate::{Error, Result};

/// How the temporal variation between two queries is measured.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LazyRule {
    /// Difference quotient over the distance between perturbed points.
    A,
    /// Value change relative to the step scale `eta * L`.
    B,
}

impl LazyRule {
    pub fn variation(
        self,
        f_now: f64,
        f_prev: f64,
        w_now: &[f64],
        w_prev: &[f64],
        eta: f64,
        lipschitz: f64,
    ) -> Result<f64> {
        match self {
            LazyRule::A => Ok(temporal_variation_a(f_now, f_prev, w_now, w_prev)),
            LazyRule::B => temporal_variation_b(f_now, f_prev, eta, lipschitz),
        }
    }
}

/// One round of the single-direction lazy estimator.
///
/// Queries `w = x + delta u` and compares it to the latest cached query.
/// When the variation is at most `threshold` the residual against the cached
/// value is used; otherwise `x - delta u` is also queried and the symmetric
/// two-point estimate is used. Either way `(u, w, f(w))` replaces the cache.
#[allow(clippy::too_many_arguments)]
pub fn lazo_step<C: QueryChannel + ?Sized, R: Rng + ?Sized>(
    oracle: &mut C,
    x: &[f64],
    cache: &mut QueryCache,
    rule: LazyRule,
    threshold: Threshold,
    delta: f64,
    eta: f64,
    lipschitz: f64,
    rng: &mut R,
) -> Result<GradientEstimate> {
    let (prev_value, prev_w) = match cache.latest() {
        Some(e) => (e.value, e.w.clone()),
        None => {
            return Err(Error::Sequencing(
                "lazy step needs a bootstrapped cache".into(),
            ))
        }
    };
    let d = x.len();
    if prev_w.len() != d {
        return Err(Error::InvalidInput(format!(
            "cached point has dimension {} but x has {d}",
            prev_w.len()
        )));
    }
    let u = sample_unit_sphere(rng, d)?;
    let w = vec::add_scaled(x, delta, u.as_slice());
    let value = oracle.query(&w)?;
    let variation = rule.variation(value, prev_value, &w, &prev_w, eta, lipschitz)?;

    let (coef, queries_used, fired) = if threshold.admits(variation) {
        (
            residual_coef(d, delta, value, prev_value),
            1,
            RuleFired::Reused,
        )
    } else {
        let minus = oracle.query(&vec::add_scaled(x, -delta, u.as_slice()))?;
        (
            symmetric_coef(d, delta, value, minus),
            2,
            RuleFired::FreshTwoPoint,
        )
    };
    let est = GradientEstimate {
        vector: vec::scaled(coef, u.as_slice()),
        queries_used,
        rule: fired,
        variation: Some(variation),
        probe: Some(Probe {
            u: u.as_slice().to_vec(),
            w: w.clone(),
            value,
        }),
    };
    cache.push_round(
        vec![CacheEntry {
            x: x.to_vec(),
            u: u.into_inner(),
            w,
            value,
        }],
        est.sq_norm(),
    )?;
    Ok(est)
}

/// One round of the multi-point lazy estimator.
///
/// Fills `directions` slots. Each fresh direction `u` is queried at
/// `x + delta u` and compared against every cached query from the last `H`
/// rounds (most recent first); each admissible match contributes a residual
/// term along `u` and consumes a slot. A direction with no match is
/// completed with the mirror query `x - delta u` and contributes one
/// symmetric term. The estimate is the sum of terms divided by `directions`.
#[allow(clippy::too_many_arguments)]
pub fn multipoint_lazo_step<C: QueryChannel + ?Sized, R: Rng + ?Sized>(
    oracle: &mut C,
    x: &[f64],
    cache: &mut QueryCache,
    rule: LazyRule,
    threshold: Threshold,
    delta: f64,
    eta: f64,
    lipschitz: f64,
    directions: usize,
    rng: &mut R,
) -> Result<GradientEstimate> {
    if directions == 0 {
        return Err(Error::InvalidConfig("directions must be >= 1".into()));
    }
    if cache.is_empty() {
        return Err(Error::Sequencing(
            "multi-point lazy step needs a bootstrapped cache".into(),
        ));
    }
    let d = x.len();
    let mut acc = Accumulator::default();
    let mut fresh_entries = Vec::new();
    let (mut reused, mut fresh, mut queries) = (0usize, 0usize, 0usize);
    let mut min_variation = f64::INFINITY;

    while reused + fresh < directions {
        let u = sample_unit_sphere(rng, d)?;
        let w = vec::add_scaled(x, delta, u.as_slice());
        let value = oracle.query(&w)?;
        queries += 1;
        let mut matched = false;
        'scan: for lag in 1..=cache.depth() {
            let slot = cache.lagged(lag).expect("lag within depth");
            for entry in &slot.entries {
                if reused + fresh >= directions {
                    break 'scan;
                }
                if entry.w.len() != d {
                    return Err(Error::InvalidInput(format!(
                        "cached point has dimension {} but x has {d}",
                        entry.w.len()
                    )));
                }
                let v = rule.variation(value, entry.value, &w, &entry.w, eta, lipschitz)?;
                min_variation = min_variation.min(v);
                if threshold.admits(v) {
                    acc.add(residual_coef(d, delta, value, entry.value), u.as_slice());
                    reused += 1;
                    matched = true;
                }
            }
        }
        if !matched {
            let minus = oracle.query(&vec::add_scaled(x, -delta, u.as_slice()))?;
            queries += 1;
            acc.add(symmetric_coef(d, delta, value, minus), u.as_slice());
            fresh += 1;
        }
        fresh_entries.push(CacheEntry {
            x: x.to_vec(),
            u: u.into_inner(),
            w,
            value,
        });
    }

    let est = GradientEstimate {
        vector: acc.mean_over(directions, d),
        queries_used: queries,
        rule: RuleFired::Mixed { reused, fresh },
        variation: min_variation.is_finite().then_some(min_variation),
        probe: None,
    };
    cache.push_round(fresh_entries, est.sq_norm())?;
    Ok(est)
}
