//! Projected zeroth-order SGD: `x_{t+1} = Proj(x_t - eta * g_t)`.

use std::time::{Duration, Instant};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::estimators::{Estimator, EstimatorConfig, GradientEstimate, Probe, RuleFired};
use crate::numerics::{vec, FeasibleSet, Purpose, SeededRng};
use crate::oracles::{Oracle, ProblemConfig};
use crate::parallel::{map_indices, Execution};
use crate::{Error, Result};

/// How the first iterate is chosen.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum InitRecipe {
    #[default]
    Zero,
    /// Uniform on `[-scale, scale]^d`, then projected onto the feasible set.
    Random {
        scale: f64,
    },
    Fixed {
        x: Vec<f64>,
    },
}

impl InitRecipe {
    pub fn initial_point<R: Rng + ?Sized>(
        &self,
        d: usize,
        set: &FeasibleSet,
        rng: &mut R,
    ) -> Result<Vec<f64>> {
        let x = match self {
            InitRecipe::Zero => vec![0.0; d],
            InitRecipe::Random { scale } => (0..d)
                .map(|_| rng.random_range(-1.0..=1.0) * scale)
                .collect(),
            InitRecipe::Fixed { x } => {
                if x.len() != d {
                    return Err(Error::InvalidDimension(format!(
                        "initial point has dimension {} but the problem has {d}",
                        x.len()
                    )));
                }
                x.clone()
            }
        };
        Ok(if set.is_constrained() {
            set.project(&x)
        } else {
            x
        })
    }
}

/// Step size and perturbation radius from the convex regret analysis:
/// `eta = R / (L sqrt(d T))`, `delta = R sqrt(d / T)`.
pub fn step_size_preset(
    radius: f64,
    lipschitz: f64,
    d: usize,
    horizon: usize,
) -> Result<(f64, f64)> {
    if !(radius > 0.0 && lipschitz > 0.0 && d > 0 && horizon > 0) {
        return Err(Error::InvalidConfig(
            "preset needs R > 0, L > 0, d >= 1 and T >= 1".into(),
        ));
    }
    let (d, t) = (d as f64, horizon as f64);
    Ok((
        radius / (lipschitz * (d * t).sqrt()),
        radius * (d / t).sqrt(),
    ))
}

/// One projected step. Unconstrained sets skip the projection.
pub fn sgd_step(
    x: &[f64],
    estimate: &GradientEstimate,
    eta: f64,
    set: &FeasibleSet,
) -> Result<Vec<f64>> {
    if estimate.vector.len() != x.len() {
        return Err(Error::InvalidInput(format!(
            "estimate has dimension {} but x has {}",
            estimate.vector.len(),
            x.len()
        )));
    }
    let y = vec::add_scaled(x, -eta, &estimate.vector);
    Ok(if set.is_constrained() {
        set.project(&y)
    } else {
        y
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub problem: ProblemConfig,
    pub estimator: EstimatorConfig,
    /// Last round index `T`; rounds `0..=T` are played.
    pub horizon: usize,
    pub eta: f64,
    #[serde(default)]
    pub feasible_set: FeasibleSet,
    #[serde(default)]
    pub init: InitRecipe,
    #[serde(default)]
    pub seed: u64,
    /// Keep the fresh query of every round for bound validation.
    #[serde(default)]
    pub record_probes: bool,
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.eta.is_finite() && self.eta > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "eta must be positive, got {}",
                self.eta
            )));
        }
        self.problem.validate()?;
        self.estimator.validate()?;
        self.feasible_set.validate(self.problem.dimension())
    }

    /// The base generator of trial `trial`. Everything random in the run
    /// forks from it, so two methods sharing `(seed, trial)` see the same
    /// oracle realisation.
    pub fn trial_rng(&self, trial: usize) -> SeededRng {
        SeededRng::new(self.seed, 0).fork(Purpose::Trial, trial as u64)
    }

    /// A fresh oracle for the given trial, before round 0.
    pub fn build_oracle(&self, trial: usize) -> Result<Oracle> {
        self.problem.build(&self.trial_rng(trial))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RoundRecord {
    pub t: usize,
    /// `f_t(x_t)` through the unmetered channel.
    pub loss: f64,
    pub cum_queries: u64,
    pub queries_this_round: usize,
    pub rule: RuleFired,
    pub variation: Option<f64>,
    pub est_sq_norm: f64,
}

#[derive(Debug, Clone)]
pub struct Trajectory {
    pub trial: usize,
    pub records: Vec<RoundRecord>,
    /// `x_0, ..., x_T`, the point played in each round.
    pub iterates: Vec<Vec<f64>>,
    pub final_x: Vec<f64>,
    /// Fresh query of each round, when recorded.
    pub probes: Option<Vec<Option<Probe>>>,
    pub eta: f64,
    pub delta: f64,
    /// FNV-1a hash over the bits of `f_t(0)` for every round. Equal
    /// checksums mean two runs saw the same loss sequence.
    pub oracle_checksum: u64,
    pub metered_queries: u64,
    pub duration: Duration,
}

impl Trajectory {
    pub fn total_queries(&self) -> u64 {
        self.records.last().map_or(0, |r| r.cum_queries)
    }

    pub fn final_loss(&self) -> f64 {
        self.records.last().map_or(f64::NAN, |r| r.loss)
    }

    pub fn losses(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.loss).collect()
    }
}

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

pub(crate) fn fnv_update(mut h: u64, value: f64) -> u64 {
    for b in value.to_bits().to_le_bytes() {
        h ^= b as u64;
        h = h.wrapping_mul(FNV_PRIME);
    }
    h
}

/// The checksum seed value, before any round.
pub(crate) fn fnv_start() -> u64 {
    FNV_OFFSET
}

/// Round-by-round driver for one trial. [`run`] drives it to the horizon;
/// diagnostics stop it part-way to inspect the estimator state.
pub struct Runner {
    config: RunConfig,
    trial: usize,
    oracle: Oracle,
    estimator: Estimator,
    directions: SeededRng,
    x: Vec<f64>,
    next_round: usize,
    records: Vec<RoundRecord>,
    iterates: Vec<Vec<f64>>,
    probes: Option<Vec<Option<Probe>>>,
    checksum: u64,
    zero: Vec<f64>,
}

impl Runner {
    pub fn new(config: RunConfig, trial: usize) -> Result<Self> {
        config.validate()?;
        let base = config.trial_rng(trial);
        let oracle = config.problem.build(&base)?;
        let d = oracle.dimension();
        let x =
            config
                .init
                .initial_point(d, &config.feasible_set, &mut base.fork(Purpose::Init, 0))?;
        Ok(Runner {
            estimator: Estimator::new(config.estimator.clone())?,
            directions: base.fork(Purpose::Directions, 0),
            probes: config.record_probes.then(Vec::new),
            records: Vec::with_capacity(config.horizon + 1),
            iterates: Vec::with_capacity(config.horizon + 1),
            checksum: fnv_start(),
            zero: vec![0.0; d],
            x,
            next_round: 0,
            oracle,
            trial,
            config,
        })
    }

    pub fn config(&self) -> &RunConfig {
        &self.config
    }

    pub fn oracle(&self) -> &Oracle {
        &self.oracle
    }

    pub fn estimator(&self) -> &Estimator {
        &self.estimator
    }

    /// The point to be played in the next round.
    pub fn x(&self) -> &[f64] {
        &self.x
    }

    pub fn next_round(&self) -> usize {
        self.next_round
    }

    pub fn is_done(&self) -> bool {
        self.next_round > self.config.horizon
    }

    /// Play round `t = next_round`.
    pub fn step(&mut self) -> Result<&RoundRecord> {
        let t = self.next_round;
        if self.oracle.round() != Some(t) {
            self.oracle.advance_round(t).map_err(|e| e.at_round(t))?;
        }
        self.play_current().map_err(|e| e.at_round(t))?;
        Ok(self.records.last().expect("round recorded"))
    }

    /// Advance the oracle to round `t` without playing it, having played
    /// every earlier round. The estimator state then reflects rounds
    /// `0..t` and `x()` is `x_t`.
    pub fn freeze_at(&mut self, t: usize) -> Result<()> {
        if t > self.config.horizon || t < self.next_round {
            return Err(Error::Sequencing(format!(
                "cannot freeze at round {t} (next round {}, horizon {})",
                self.next_round, self.config.horizon
            )));
        }
        while self.next_round < t {
            self.step()?;
        }
        if self.oracle.round() != Some(t) {
            self.oracle.advance_round(t).map_err(|e| e.at_round(t))?;
        }
        Ok(())
    }

    fn play_current(&mut self) -> Result<()> {
        let t = self.next_round;
        let loss = self.oracle.eval_unmetered(&self.x)?;
        self.checksum = fnv_update(self.checksum, self.oracle.eval_unmetered(&self.zero)?);
        let est = self.estimator.step(
            &mut self.oracle,
            &self.x,
            &mut self.directions,
            self.config.eta,
        )?;
        let next = sgd_step(&self.x, &est, self.config.eta, &self.config.feasible_set)?;
        let sq = est.sq_norm();
        self.records.push(RoundRecord {
            t,
            loss,
            cum_queries: self.oracle.query_count(),
            queries_this_round: est.queries_used,
            rule: est.rule,
            variation: est.variation,
            est_sq_norm: sq,
        });
        if let Some(p) = &mut self.probes {
            p.push(est.probe);
        }
        self.iterates.push(std::mem::replace(&mut self.x, next));
        self.next_round += 1;
        Ok(())
    }

    /// Play the remaining rounds and return the trajectory.
    pub fn finish(mut self) -> Result<Trajectory> {
        let start = Instant::now();
        while !self.is_done() {
            self.step()?;
        }
        Ok(Trajectory {
            trial: self.trial,
            records: self.records,
            iterates: self.iterates,
            final_x: self.x,
            probes: self.probes,
            eta: self.config.eta,
            delta: self.config.estimator.delta,
            oracle_checksum: self.checksum,
            metered_queries: self.oracle.query_count(),
            duration: start.elapsed(),
        })
    }
}

/// Run one trial to the horizon.
pub fn run(config: &RunConfig, trial: usize) -> Result<Trajectory> {
    let start = Instant::now();
    let mut traj = Runner::new(config.clone(), trial)?.finish()?;
    traj.duration = start.elapsed();
    Ok(traj)
}

/// Run trials `0..trials`, in parallel when `exec` allows it.
pub fn run_trials(config: &RunConfig, trials: usize, exec: Execution) -> Result<Vec<Trajectory>> {
    config.validate()?;
    map_indices(exec, trials, |i| run(config, i))
        .into_iter()
        .collect()
}
