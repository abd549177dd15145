use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::{Problem, QuadraticForm};
use crate::numerics::{sample_unit_sphere, vec, Purpose, SeededRng};
use crate::{Error, Result};

/// How the minimizer `a_t` moves from round to round.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum CenterSchedule {
    Stationary,
    /// Gaussian random walk with per-coordinate step `rate / sqrt(d)`.
    Drift {
        rate: f64,
    },
    /// `a_0` outside the window; inside `t mod period` in `[start, end]` the
    /// center jumps to `a_0 + magnitude * N(0, I)`, redrawn every round.
    Burst {
        period: usize,
        start: usize,
        end: usize,
        magnitude: f64,
    },
}

/// `f_t(x) = (x - a_t)^T C (x - a_t) + offset + noise_t` with diagonal `C`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct QuadraticConfig {
    pub dim: usize,
    /// Initial center; drawn as `center_radius * U(S)` when absent.
    pub center: Option<Vec<f64>>,
    pub center_radius: f64,
    /// Diagonal of the curvature matrix; identity when absent.
    pub curvature: Option<Vec<f64>>,
    pub offset: f64,
    pub noise_std: f64,
    pub schedule: CenterSchedule,
}

impl Default for QuadraticConfig {
    fn default() -> Self {
        QuadraticConfig {
            dim: 4,
            center: None,
            center_radius: 0.5,
            curvature: None,
            offset: 0.0,
            noise_std: 0.0,
            schedule: CenterSchedule::Stationary,
        }
    }
}

impl QuadraticConfig {
    pub fn validate(&self) -> Result<()> {
        if self.dim == 0 {
            return Err(Error::InvalidDimension("quadratic dim must be >= 1".into()));
        }
        if let Some(c) = &self.center {
            if c.len() != self.dim {
                return Err(Error::InvalidDimension("center length != dim".into()));
            }
        }
        if let Some(c) = &self.curvature {
            if c.len() != self.dim || c.iter().any(|v| !(*v >= 0.0) || !v.is_finite()) {
                return Err(Error::InvalidConfig(
                    "curvature must have length dim and non-negative entries".into(),
                ));
            }
        }
        if self.noise_std < 0.0 {
            return Err(Error::InvalidConfig("noise_std must be >= 0".into()));
        }
        if let CenterSchedule::Burst {
            period, start, end, ..
        } = self.schedule
        {
            if period == 0 || start > end {
                return Err(Error::InvalidConfig("invalid burst window".into()));
            }
        }
        Ok(())
    }
}

/// Synthetic quadratic with a known minimizer and closed-form gradient.
#[derive(Debug, Clone)]
pub struct QuadraticProblem {
    config: QuadraticConfig,
    base_center: Vec<f64>,
    curvature: Vec<f64>,
    center: Vec<f64>,
    noise: f64,
    rng: SeededRng,
}

impl QuadraticProblem {
    pub fn new(config: QuadraticConfig, rng: &SeededRng) -> Result<Self> {
        config.validate()?;
        let d = config.dim;
        let base_center = match &config.center {
            Some(c) => c.clone(),
            None => {
                let mut setup = rng.fork(Purpose::OracleSetup, 0);
                vec::scaled(
                    config.center_radius,
                    sample_unit_sphere(&mut setup, d)?.as_slice(),
                )
            }
        };
        let curvature = config.curvature.clone().unwrap_or_else(|| vec![1.0; d]);
        Ok(QuadraticProblem {
            center: base_center.clone(),
            base_center,
            curvature,
            noise: 0.0,
            rng: rng.fork(Purpose::Oracle, 0),
            config,
        })
    }

    pub fn center(&self) -> &[f64] {
        &self.center
    }
}

impl Problem for QuadraticProblem {
    fn name(&self) -> &'static str {
        "quadratic"
    }

    fn dimension(&self) -> usize {
        self.config.dim
    }

    fn begin_round(&mut self, t: usize) {
        let d = self.config.dim;
        match self.config.schedule {
            CenterSchedule::Stationary => {}
            CenterSchedule::Drift { rate } => {
                if t > 0 {
                    let step = rate / (d as f64).sqrt();
                    for c in self.center.iter_mut() {
                        let z: f64 = self.rng.sample(StandardNormal);
                        *c += step * z;
                    }
                }
            }
            CenterSchedule::Burst {
                period,
                start,
                end,
                magnitude,
            } => {
                let phase = t % period;
                if (start..=end).contains(&phase) {
                    for (c, a) in self.center.iter_mut().zip(&self.base_center) {
                        let z: f64 = self.rng.sample(StandardNormal);
                        *c = a + magnitude * z;
                    }
                } else {
                    self.center.clone_from(&self.base_center);
                }
            }
        }
        self.noise = if self.config.noise_std > 0.0 {
            let z: f64 = self.rng.sample(StandardNormal);
            self.config.noise_std * z
        } else {
            0.0
        };
    }

    fn loss(&self, x: &[f64]) -> f64 {
        let q: f64 = x
            .iter()
            .zip(&self.center)
            .zip(&self.curvature)
            .map(|((x, a), c)| c * (x - a) * (x - a))
            .sum();
        q + self.config.offset + self.noise
    }

    fn has_gradient(&self) -> bool {
        true
    }

    fn gradient(&self, x: &[f64]) -> Option<Vec<f64>> {
        Some(
            x.iter()
                .zip(&self.center)
                .zip(&self.curvature)
                .map(|((x, a), c)| 2.0 * c * (x - a))
                .collect(),
        )
    }

    fn quadratic_form(&self) -> Option<QuadraticForm> {
        let h = DVector::from_iterator(self.config.dim, self.curvature.iter().map(|c| 2.0 * c));
        let a = DVector::from_column_slice(&self.center);
        let linear = h.component_mul(&a);
        let constant = 0.5 * a.dot(&linear) + self.config.offset + self.noise;
        Some(QuadraticForm {
            hessian: DMatrix::from_diagonal(&h),
            linear,
            constant,
        })
    }

    fn is_convex(&self) -> bool {
        true
    }
}
