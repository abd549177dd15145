use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::{Problem, QuadraticForm};
use crate::numerics::{Purpose, SeededRng};
use crate::{Error, Result};

/// Online linear regression with a noisy loss,
/// `f_t(x) = ||y - theta x||^2 / (2p) + z_t`.
///
/// The first feature column is all ones; the remaining columns are
/// `N(0, feature_std^2)`. Targets are
/// `y = intercept + slope * sum_{j>=2} theta_j + N(0, target_noise_std^2)`
/// and `z_t ~ N(0, round_noise_std^2)` is drawn once per round.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RegressionConfig {
    pub samples: usize,
    pub dim: usize,
    pub feature_std: f64,
    pub intercept: f64,
    pub slope: f64,
    pub target_noise_std: f64,
    pub round_noise_std: f64,
}

impl Default for RegressionConfig {
    fn default() -> Self {
        RegressionConfig {
            samples: 100,
            dim: 2,
            feature_std: 2.0,
            intercept: 4.0,
            slope: 3.0,
            target_noise_std: 1.0,
            round_noise_std: 1.0,
        }
    }
}

impl RegressionConfig {
    pub fn validate(&self) -> Result<()> {
        if self.samples == 0 || self.dim == 0 {
            return Err(Error::InvalidDimension(
                "regression needs samples >= 1 and dim >= 1".into(),
            ));
        }
        if self.feature_std < 0.0 || self.target_noise_std < 0.0 || self.round_noise_std < 0.0 {
            return Err(Error::InvalidConfig(
                "standard deviations must be >= 0".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct RegressionProblem {
    features: DMatrix<f64>,
    targets: DVector<f64>,
    noise_std: f64,
    noise: f64,
    rng: SeededRng,
}

impl RegressionProblem {
    pub fn new(config: RegressionConfig, rng: &SeededRng) -> Result<Self> {
        config.validate()?;
        let (p, d) = (config.samples, config.dim);
        let mut setup = rng.fork(Purpose::OracleSetup, 0);
        let mut features = DMatrix::from_element(p, d, 1.0);
        for j in 1..d {
            for i in 0..p {
                let z: f64 = setup.sample(StandardNormal);
                features[(i, j)] = config.feature_std * z;
            }
        }
        let targets = DVector::from_fn(p, |i, _| {
            let s: f64 = setup.sample(StandardNormal);
            let signal: f64 = (1..d).map(|j| features[(i, j)]).sum();
            config.intercept + config.slope * signal + config.target_noise_std * s
        });
        Ok(Self::from_data(
            features,
            targets,
            config.round_noise_std,
            rng.fork(Purpose::Oracle, 0),
        ))
    }

    /// Build from explicit data, e.g. for tests with hand-picked `theta`, `y`.
    pub fn from_data(
        features: DMatrix<f64>,
        targets: DVector<f64>,
        round_noise_std: f64,
        rng: SeededRng,
    ) -> Self {
        RegressionProblem {
            features,
            targets,
            noise_std: round_noise_std,
            noise: 0.0,
            rng,
        }
    }

    pub fn features(&self) -> &DMatrix<f64> {
        &self.features
    }

    pub fn targets(&self) -> &DVector<f64> {
        &self.targets
    }

    pub fn round_noise(&self) -> f64 {
        self.noise
    }

    fn samples(&self) -> f64 {
        self.features.nrows() as f64
    }

    fn residual(&self, x: &[f64]) -> DVector<f64> {
        &self.targets - &self.features * DVector::from_column_slice(x)
    }

    /// The loss without the round noise `z_t`.
    pub fn noiseless_loss(&self, x: &[f64]) -> f64 {
        self.residual(x).norm_squared() / (2.0 * self.samples())
    }
}

impl Problem for RegressionProblem {
    fn name(&self) -> &'static str {
        "regression"
    }

    fn dimension(&self) -> usize {
        self.features.ncols()
    }

    fn begin_round(&mut self, _t: usize) {
        let z: f64 = self.rng.sample(StandardNormal);
        self.noise = self.noise_std * z;
    }

    fn loss(&self, x: &[f64]) -> f64 {
        self.noiseless_loss(x) + self.noise
    }

    fn has_gradient(&self) -> bool {
        true
    }

    fn gradient(&self, x: &[f64]) -> Option<Vec<f64>> {
        let g = -(self.features.transpose() * self.residual(x)) / self.samples();
        Some(g.as_slice().to_vec())
    }

    fn quadratic_form(&self) -> Option<QuadraticForm> {
        let p = self.samples();
        let ft = self.features.transpose();
        Some(QuadraticForm {
            hessian: &ft * &self.features / p,
            linear: &ft * &self.targets / p,
            constant: self.targets.norm_squared() / (2.0 * p) + self.noise,
        })
    }

    fn is_convex(&self) -> bool {
        true
    }
}
