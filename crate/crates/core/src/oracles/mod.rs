//! Time-varying losses exposed through a metered query channel.
//!
//! A [`Problem`] describes a family of losses `f_t`; [`Oracle`] wraps it with
//! round sequencing and query metering. Estimators talk to a
//! [`QueryChannel`]: the oracle itself (metered) or [`Unmetered`], which
//! evaluates the same frozen round without touching the query count.

mod lqr;
mod quadratic;
mod regression;
mod resource;

pub use lqr::{DynamicsSchedule, LqrConfig, LqrProblem};
pub use quadratic::{CenterSchedule, QuadraticConfig, QuadraticProblem};
pub use regression::{RegressionConfig, RegressionProblem};
pub use resource::{ResourceConfig, ResourceProblem};

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::numerics::{vec, SeededRng};
use crate::{Error, Result};

/// `f(x) = 1/2 x^T H x - b^T x + c` for the current round.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadraticForm {
    pub hessian: DMatrix<f64>,
    pub linear: DVector<f64>,
    pub constant: f64,
}

impl QuadraticForm {
    pub fn zeros(d: usize) -> Self {
        QuadraticForm {
            hessian: DMatrix::zeros(d, d),
            linear: DVector::zeros(d),
            constant: 0.0,
        }
    }

    pub fn value(&self, x: &[f64]) -> f64 {
        let x = DVector::from_column_slice(x);
        0.5 * x.dot(&(&self.hessian * &x)) - self.linear.dot(&x) + self.constant
    }

    pub fn gradient(&self, x: &[f64]) -> Vec<f64> {
        let x = DVector::from_column_slice(x);
        (&self.hessian * x - &self.linear).as_slice().to_vec()
    }

    pub fn accumulate(&mut self, other: &QuadraticForm) {
        self.hessian += &other.hessian;
        self.linear += &other.linear;
        self.constant += other.constant;
    }
}

/// A family of per-round losses `f_t`.
///
/// `begin_round` is called once per round, in order, and freezes all of the
/// round's randomness; `loss` must then be a pure function of `x`.
pub trait Problem: Send + Sync {
    fn name(&self) -> &'static str;
    fn dimension(&self) -> usize;
    fn begin_round(&mut self, t: usize);
    fn loss(&self, x: &[f64]) -> f64;

    /// Whether [`Problem::gradient`] returns a value.
    fn has_gradient(&self) -> bool {
        false
    }

    /// Exact gradient of the noiseless round loss, when known.
    fn gradient(&self, _x: &[f64]) -> Option<Vec<f64>> {
        None
    }

    /// The round loss as an explicit quadratic, when it is one.
    fn quadratic_form(&self) -> Option<QuadraticForm> {
        None
    }

    /// Whether the loss is convex in `x` for every round.
    fn is_convex(&self) -> bool {
        false
    }
}

/// Anything the estimators can query for a loss value.
pub trait QueryChannel {
    fn dimension(&self) -> usize;
    fn query(&mut self, x: &[f64]) -> Result<f64>;
}

/// A problem plus round sequencing and a metered query counter.
pub struct Oracle {
    problem: Box<dyn Problem>,
    round: Option<usize>,
    queries: u64,
}

impl std::fmt::Debug for Oracle {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Oracle")
            .field("problem", &self.problem.name())
            .field("round", &self.round)
            .field("queries", &self.queries)
            .finish()
    }
}

impl Oracle {
    pub fn new(problem: Box<dyn Problem>) -> Self {
        Oracle {
            problem,
            round: None,
            queries: 0,
        }
    }

    pub fn from_problem<P: Problem + 'static>(problem: P) -> Self {
        Self::new(Box::new(problem))
    }

    pub fn dimension(&self) -> usize {
        self.problem.dimension()
    }

    pub fn round(&self) -> Option<usize> {
        self.round
    }

    pub fn query_count(&self) -> u64 {
        self.queries
    }

    pub fn has_true_gradient(&self) -> bool {
        self.problem.has_gradient()
    }

    pub fn problem(&self) -> &dyn Problem {
        self.problem.as_ref()
    }

    /// Move to round `t`, which must be the next round (or 0 at start).
    pub fn advance_round(&mut self, t: usize) -> Result<()> {
        let expected = self.round.map_or(0, |r| r + 1);
        if t != expected {
            return Err(Error::Sequencing(format!(
                "expected round {expected}, got {t}"
            )));
        }
        self.problem.begin_round(t);
        self.round = Some(t);
        Ok(())
    }

    fn check_point(&self, x: &[f64]) -> Result<()> {
        if self.round.is_none() {
            return Err(Error::Sequencing("no round has been started".into()));
        }
        if x.len() != self.dimension() {
            return Err(Error::InvalidInput(format!(
                "point has dimension {} but oracle expects {}",
                x.len(),
                self.dimension()
            )));
        }
        if !vec::all_finite(x) {
            return Err(Error::InvalidInput("point has non-finite entries".into()));
        }
        Ok(())
    }

    /// Metered evaluation: counts toward query complexity.
    pub fn query(&mut self, x: &[f64]) -> Result<f64> {
        self.check_point(x)?;
        self.queries += 1;
        Ok(self.problem.loss(x))
    }

    /// Same value as [`Oracle::query`] within the round, without metering.
    pub fn eval_unmetered(&self, x: &[f64]) -> Result<f64> {
        self.check_point(x)?;
        Ok(self.problem.loss(x))
    }

    pub fn true_gradient(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check_point(x)?;
        self.problem.gradient(x).ok_or_else(|| {
            Error::Unsupported(format!(
                "{} has no closed-form gradient",
                self.problem.name()
            ))
        })
    }

    pub fn quadratic_form(&self) -> Result<QuadraticForm> {
        if self.round.is_none() {
            return Err(Error::Sequencing("no round has been started".into()));
        }
        self.problem.quadratic_form().ok_or_else(|| {
            Error::Unsupported(format!("{} is not a quadratic loss", self.problem.name()))
        })
    }
}

impl QueryChannel for Oracle {
    fn dimension(&self) -> usize {
        Oracle::dimension(self)
    }

    fn query(&mut self, x: &[f64]) -> Result<f64> {
        Oracle::query(self, x)
    }
}

/// Routes estimator queries through the unmetered channel.
#[derive(Debug, Clone, Copy)]
pub struct Unmetered<'a>(pub &'a Oracle);

impl QueryChannel for Unmetered<'_> {
    fn dimension(&self) -> usize {
        self.0.dimension()
    }

    fn query(&mut self, x: &[f64]) -> Result<f64> {
        self.0.eval_unmetered(x)
    }
}

/// Serializable problem description; `build` instantiates it for one run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ProblemConfig {
    Quadratic(QuadraticConfig),
    Regression(RegressionConfig),
    Lqr(LqrConfig),
    ResourceAllocation(ResourceConfig),
}

impl ProblemConfig {
    pub fn name(&self) -> &'static str {
        match self {
            ProblemConfig::Quadratic(_) => "quadratic",
            ProblemConfig::Regression(_) => "regression",
            ProblemConfig::Lqr(_) => "lqr",
            ProblemConfig::ResourceAllocation(_) => "resource_allocation",
        }
    }

    pub fn dimension(&self) -> usize {
        match self {
            ProblemConfig::Quadratic(c) => c.dim,
            ProblemConfig::Regression(c) => c.dim,
            ProblemConfig::Lqr(c) => c.state_dim * c.control_dim,
            ProblemConfig::ResourceAllocation(c) => c.agents * 2 * resource::FEATURES,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            ProblemConfig::Quadratic(c) => c.validate(),
            ProblemConfig::Regression(c) => c.validate(),
            ProblemConfig::Lqr(c) => c.validate(),
            ProblemConfig::ResourceAllocation(c) => c.validate(),
        }
    }

    /// Build the oracle for one run. `rng` is the run's base generator;
    /// problems fork their own setup and round streams from it.
    pub fn build(&self, rng: &SeededRng) -> Result<Oracle> {
        self.validate()?;
        let problem: Box<dyn Problem> = match self {
            ProblemConfig::Quadratic(c) => Box::new(QuadraticProblem::new(c.clone(), rng)?),
            ProblemConfig::Regression(c) => Box::new(RegressionProblem::new(c.clone(), rng)?),
            ProblemConfig::Lqr(c) => Box::new(LqrProblem::new(c.clone(), rng)?),
            ProblemConfig::ResourceAllocation(c) => Box::new(ResourceProblem::new(c.clone(), rng)?),
        };
        Ok(Oracle::new(problem))
    }
}
