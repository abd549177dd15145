use nalgebra::{DMatrix, DVector};

use crate::estimators::{LazyRule, Threshold};
use crate::numerics::{random_projection_matrix, sample_unit_sphere, vec, Purpose, SeededRng};
use crate::optimizer::Runner;
use crate::parallel::{chunks, map_indices, Execution};
use crate::{Error, Result};

/// One sampled direction of an antipodal pair.
#[derive(Debug, Clone, PartialEq)]
pub struct SymmetrySample {
    pub pair: usize,
    /// `+1` for `u`, `-1` for `-u`.
    pub sign: i8,
    pub member: bool,
    pub u: Vec<f64>,
}

/// Membership of sampled directions in the reuse region
/// `A = {u : variation(x + delta u) <= D}` at a frozen round.
#[derive(Debug, Clone)]
pub struct SymmetryReport {
    pub round: usize,
    pub samples: Vec<SymmetrySample>,
    /// Fraction of sampled directions in `A`.
    pub member_fraction: f64,
    /// `#{u in A : -u not in A} / max(1, #A)`.
    pub score: f64,
    /// Random Gaussian projection matrices, `k x d` each.
    pub projections: Vec<DMatrix<f64>>,
    /// `projected[m][i]` is sample `i` mapped by projection `m`.
    pub projected: Vec<Vec<Vec<f64>>>,
}

/// Asymmetry of a set observed on antipodal pairs `(u in A, -u in A)`.
pub fn asymmetry_score(pairs: &[(bool, bool)]) -> f64 {
    let mut unmatched = 0usize;
    let mut members = 0usize;
    for &(a, b) in pairs {
        members += a as usize + b as usize;
        if a != b {
            unmatched += 1;
        }
    }
    unmatched as f64 / members.max(1) as f64
}

/// Sample `pairs` antipodal direction pairs and evaluate `member` on both.
///
/// The generic core of [`symmetry_diagnostic`]; `member` decides whether a
/// unit direction is in the region.
#[allow(clippy::too_many_arguments)]
pub fn symmetry_from_rule<F>(
    round: usize,
    d: usize,
    pairs: usize,
    projections: usize,
    projection_dim: usize,
    rng: &SeededRng,
    exec: Execution,
    member: F,
) -> Result<SymmetryReport>
where
    F: Fn(&[f64]) -> Result<bool> + Sync,
{
    if pairs == 0 {
        return Err(Error::InvalidInput(
            "symmetry diagnostic needs at least one pair".into(),
        ));
    }
    let parts = map_indices(
        exec,
        chunks(pairs).len(),
        |c| -> Result<Vec<SymmetrySample>> {
            let (start, len) = chunks(pairs)[c];
            let mut local = rng.fork(Purpose::Diagnostics, c as u64);
            let mut out = Vec::with_capacity(2 * len);
            for i in 0..len {
                let u = sample_unit_sphere(&mut local, d)?;
                let neg = u.negated();
                out.push(SymmetrySample {
                    pair: start + i,
                    sign: 1,
                    member: member(u.as_slice())?,
                    u: u.into_inner(),
                });
                out.push(SymmetrySample {
                    pair: start + i,
                    sign: -1,
                    member: member(neg.as_slice())?,
                    u: neg.into_inner(),
                });
            }
            Ok(out)
        },
    );
    let mut samples = Vec::with_capacity(2 * pairs);
    for p in parts {
        samples.extend(p?);
    }
    let flags: Vec<(bool, bool)> = samples
        .chunks_exact(2)
        .map(|s| (s[0].member, s[1].member))
        .collect();
    let members = samples.iter().filter(|s| s.member).count();

    let mut mats = Vec::with_capacity(projections);
    let mut projected = Vec::with_capacity(projections);
    for m in 0..projections {
        let p = random_projection_matrix(
            &mut rng.fork(Purpose::Projection, m as u64),
            d,
            projection_dim,
        )?;
        projected.push(
            samples
                .iter()
                .map(|s| (&p * DVector::from_column_slice(&s.u)).as_slice().to_vec())
                .collect(),
        );
        mats.push(p);
    }
    Ok(SymmetryReport {
        round,
        member_fraction: members as f64 / samples.len() as f64,
        score: asymmetry_score(&flags),
        samples,
        projections: mats,
        projected,
    })
}

/// Symmetry of the lazy-reuse region at the runner's frozen round.
///
/// `runner` must have been frozen with [`Runner::freeze_at`] so that its
/// cache holds the previous round's query and the oracle is at the round
/// of interest. Membership uses the unmetered channel only.
#[allow(clippy::too_many_arguments)]
pub fn symmetry_diagnostic(
    runner: &Runner,
    rule: LazyRule,
    threshold: Threshold,
    lipschitz: f64,
    samples: usize,
    projections: usize,
    projection_dim: usize,
    rng: &SeededRng,
    exec: Execution,
) -> Result<SymmetryReport> {
    let round = runner
        .oracle()
        .round()
        .ok_or_else(|| Error::Sequencing("symmetry diagnostic needs a frozen round".into()))?;
    let prev = runner
        .estimator()
        .cache()
        .latest()
        .ok_or_else(|| Error::InsufficientTrace("no cached query before this round".into()))?;
    let x = runner.x();
    let delta = runner.config().estimator.delta;
    let eta = runner.config().eta;
    let oracle = runner.oracle();
    symmetry_from_rule(
        round,
        x.len(),
        samples / 2,
        projections,
        projection_dim,
        rng,
        exec,
        |u| {
            let w = vec::add_scaled(x, delta, u);
            let f = oracle.eval_unmetered(&w)?;
            let v = rule.variation(f, prev.value, &w, &prev.w, eta, lipschitz)?;
            Ok(threshold.admits(v))
        },
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::estimators::{EstimatorConfig, Variant};
    use crate::numerics::FeasibleSet;
    use crate::optimizer::{InitRecipe, RunConfig};
    use crate::oracles::{ProblemConfig, QuadraticConfig};

    #[test]
    fn score_extremes() {
        assert_eq!(asymmetry_score(&[(true, true), (false, false)]), 0.0);
        assert_eq!(asymmetry_score(&[(true, false), (false, true)]), 1.0);
        assert_eq!(asymmetry_score(&[]), 0.0);
        assert_eq!(asymmetry_score(&[(true, true), (true, false)]), 1.0 / 3.0);
    }

    #[test]
    fn half_space_rule_is_fully_asymmetric() {
        let r = symmetry_from_rule(
            0,
            4,
            1000,
            2,
            2,
            &SeededRng::new(1, 0),
            Execution::Parallel,
            |u| Ok(u[0] > 0.0),
        )
        .unwrap();
        assert_eq!(r.score, 1.0);
        assert_eq!(r.samples.len(), 2000);
        assert_eq!(r.member_fraction, 0.5);
        assert_eq!(r.projected.len(), 2);
        assert_eq!(r.projected[0].len(), 2000);
        assert_eq!(r.projected[1][0].len(), 2);
    }

    fn frozen_runner() -> Runner {
        let cfg = RunConfig {
            problem: ProblemConfig::Quadratic(QuadraticConfig {
                noise_std: 0.05,
                ..QuadraticConfig::default()
            }),
            estimator: EstimatorConfig::new(Variant::LazoB, 0.05),
            horizon: 20,
            eta: 0.01,
            feasible_set: FeasibleSet::Ball { radius: 1.0 },
            init: InitRecipe::Zero,
            seed: 5,
            record_probes: false,
        };
        let mut r = Runner::new(cfg, 0).unwrap();
        r.freeze_at(10).unwrap();
        r
    }

    #[test]
    fn infinite_threshold_scores_zero_and_is_unmetered() {
        let r = frozen_runner();
        let before = r.oracle().query_count();
        let rep = symmetry_diagnostic(
            &r,
            LazyRule::B,
            Threshold::INFINITE,
            1.0,
            2000,
            4,
            2,
            &SeededRng::new(2, 0),
            Execution::Parallel,
        )
        .unwrap();
        assert_eq!(rep.score, 0.0);
        assert_eq!(rep.member_fraction, 1.0);
        assert_eq!(r.oracle().query_count(), before);
    }

    #[test]
    fn score_ignores_projections() {
        let r = frozen_runner();
        let rng = SeededRng::new(3, 0);
        let a = symmetry_diagnostic(
            &r,
            LazyRule::A,
            Threshold(1.0),
            1.0,
            4000,
            1,
            2,
            &rng,
            Execution::Sequential,
        )
        .unwrap();
        let b = symmetry_diagnostic(
            &r,
            LazyRule::A,
            Threshold(1.0),
            1.0,
            4000,
            4,
            3,
            &rng,
            Execution::Parallel,
        )
        .unwrap();
        assert_eq!(a.score, b.score);
        assert_eq!(a.samples, b.samples);
        assert!((0.0..=1.0).contains(&a.score));
    }
}
