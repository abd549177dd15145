use std::sync::atomic::{AtomicU64, Ordering};

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::Problem;
use crate::numerics::{Purpose, SeededRng};
use crate::{Error, Result};

/// How the dynamics `(A_t, B_t)` evolve across rounds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DynamicsSchedule {
    /// Intermittent-change recipe. With `m = t mod period`:
    ///
    /// - `m == 0`: `A_t = S`, entries of `S` drawn `N(0, reset_std^2)`;
    /// - `m` in `[burst_start, burst_end]`:
    ///   `A_t = A_{t-1} + S + amplitude * sin(frequency * m)` (added to every entry);
    /// - otherwise: `A_t = A_{t-1} + S`, entries of `S` drawn `N(0, step_std^2)`.
    ///
    /// `B_t` follows the same recipe with `cos` in place of `sin`.
    Burst {
        period: usize,
        burst_start: usize,
        burst_end: usize,
        amplitude: f64,
        frequency: f64,
        reset_std: f64,
        step_std: f64,
    },
    /// Constant dynamics, row-major `A` (n x n) and `B` (n x p).
    Fixed { a: Vec<Vec<f64>>, b: Vec<Vec<f64>> },
}

impl Default for DynamicsSchedule {
    fn default() -> Self {
        DynamicsSchedule::Burst {
            period: 100,
            burst_start: 35,
            burst_end: 65,
            amplitude: 7.0,
            frequency: 7.0,
            reset_std: 1.0,
            step_std: 0.1,
        }
    }
}

/// Discounted finite-horizon LQR cost of a linear policy `q_k = K x_k`:
///
/// `f_t(K) = 1/H sum_{k=1..H} beta^k x_k^T (Q + K^T R K) x_k`,
/// `x_{k+1} = (A_t + B_t K) x_k`, averaged over a fixed panel of initial
/// states. The decision vector is `K` flattened row-major (`p * n` entries).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LqrConfig {
    pub state_dim: usize,
    pub control_dim: usize,
    pub discount: f64,
    pub rollout_len: usize,
    /// Number of initial states in the panel, drawn once per run.
    pub initial_states: usize,
    /// Standard deviation of the initial-state draws.
    pub initial_state_std: f64,
    /// Explicit initial-state panel; overrides the random draw.
    pub initial_state_panel: Option<Vec<Vec<f64>>>,
    /// `Q = state_cost * I`.
    pub state_cost: f64,
    /// `R = control_cost * I`.
    pub control_cost: f64,
    /// Upper bound on any evaluated cost.
    pub cost_cap: f64,
    pub schedule: DynamicsSchedule,
}

impl Default for LqrConfig {
    fn default() -> Self {
        LqrConfig {
            state_dim: 6,
            control_dim: 6,
            discount: 0.5,
            rollout_len: 10,
            initial_states: 1,
            initial_state_std: 1e-3,
            initial_state_panel: None,
            state_cost: 1.0,
            control_cost: 1.0,
            cost_cap: 1e8,
            schedule: DynamicsSchedule::default(),
        }
    }
}

impl LqrConfig {
    pub fn validate(&self) -> Result<()> {
        let (n, p) = (self.state_dim, self.control_dim);
        if n == 0 || p == 0 || self.rollout_len == 0 {
            return Err(Error::InvalidDimension(
                "lqr needs state_dim, control_dim, rollout_len >= 1".into(),
            ));
        }
        if !(self.discount > 0.0 && self.discount < 1.0) {
            return Err(Error::InvalidConfig("discount must lie in (0, 1)".into()));
        }
        if !(self.state_cost >= 0.0 && self.control_cost > 0.0) {
            return Err(Error::InvalidConfig(
                "state cost must be >= 0 and control cost > 0".into(),
            ));
        }
        if !(self.cost_cap > 0.0) {
            return Err(Error::InvalidConfig("cost_cap must be positive".into()));
        }
        match &self.initial_state_panel {
            Some(panel) => {
                if panel.is_empty() || panel.iter().any(|s| s.len() != n) {
                    return Err(Error::InvalidDimension(
                        "initial_state_panel entries must have length state_dim".into(),
                    ));
                }
            }
            None => {
                if self.initial_states == 0 {
                    return Err(Error::InvalidConfig("initial_states must be >= 1".into()));
                }
            }
        }
        match &self.schedule {
            DynamicsSchedule::Burst {
                period,
                burst_start,
                burst_end,
                ..
            } => {
                if *period == 0 || burst_start > burst_end {
                    return Err(Error::InvalidConfig("invalid burst schedule".into()));
                }
            }
            DynamicsSchedule::Fixed { a, b } => {
                if a.len() != n || a.iter().any(|r| r.len() != n) {
                    return Err(Error::InvalidDimension(
                        "A must be state_dim x state_dim".into(),
                    ));
                }
                if b.len() != n || b.iter().any(|r| r.len() != p) {
                    return Err(Error::InvalidDimension(
                        "B must be state_dim x control_dim".into(),
                    ));
                }
            }
        }
        Ok(())
    }
}

/// Squash costs above `cap / 2` logarithmically so they stay below `cap`
/// while distinct raw costs keep distinct values. Continuous with slope 1
/// at the knee; non-finite raw costs map to `cap`.
pub(crate) fn soft_cap(raw: f64, cap: f64) -> f64 {
    let knee = 0.5 * cap;
    if raw.is_nan() {
        return cap;
    }
    if raw <= knee {
        return raw;
    }
    let excess = (raw / knee).ln();
    if !excess.is_finite() {
        return cap;
    }
    (knee + knee * (1.0 - 1.0 / (1.0 + excess))).min(cap)
}

#[derive(Debug)]
pub struct LqrProblem {
    config: LqrConfig,
    panel: Vec<DVector<f64>>,
    a: DMatrix<f64>,
    b: DMatrix<f64>,
    rng: SeededRng,
    saturated: AtomicU64,
}

impl LqrProblem {
    pub fn new(config: LqrConfig, rng: &SeededRng) -> Result<Self> {
        config.validate()?;
        let (n, p) = (config.state_dim, config.control_dim);
        let panel = match &config.initial_state_panel {
            Some(panel) => panel
                .iter()
                .map(|s| DVector::from_column_slice(s))
                .collect(),
            None => {
                let mut setup = rng.fork(Purpose::OracleSetup, 0);
                (0..config.initial_states)
                    .map(|_| {
                        DVector::from_fn(n, |_, _| {
                            let z: f64 = setup.sample(StandardNormal);
                            config.initial_state_std * z
                        })
                    })
                    .collect()
            }
        };
        let (a, b) = match &config.schedule {
            DynamicsSchedule::Fixed { a, b } => (
                DMatrix::from_fn(n, n, |i, j| a[i][j]),
                DMatrix::from_fn(n, p, |i, j| b[i][j]),
            ),
            DynamicsSchedule::Burst { .. } => (DMatrix::zeros(n, n), DMatrix::zeros(n, p)),
        };
        Ok(LqrProblem {
            panel,
            a,
            b,
            rng: rng.fork(Purpose::Oracle, 0),
            saturated: AtomicU64::new(0),
            config,
        })
    }

    pub fn dynamics(&self) -> (&DMatrix<f64>, &DMatrix<f64>) {
        (&self.a, &self.b)
    }

    /// Number of evaluations whose raw cost was above the soft-cap knee.
    pub fn saturated_evaluations(&self) -> u64 {
        self.saturated.load(Ordering::Relaxed)
    }

    /// Cost before the cap is applied.
    pub fn raw_cost(&self, x: &[f64]) -> f64 {
        let (n, p) = (self.config.state_dim, self.config.control_dim);
        let gain = DMatrix::from_row_slice(p, n, x);
        let closed_loop = &self.a + &self.b * &gain;
        let (q, r) = (self.config.state_cost, self.config.control_cost);
        let beta = self.config.discount;
        let mut total = 0.0;
        for x0 in &self.panel {
            let mut state = x0.clone();
            let mut weight = 1.0;
            for _ in 0..self.config.rollout_len {
                state = &closed_loop * &state;
                weight *= beta;
                let control = &gain * &state;
                total += weight * (q * state.norm_squared() + r * control.norm_squared());
            }
        }
        total / (self.panel.len() as f64 * self.config.rollout_len as f64)
    }

    fn step_matrix(&mut self, rows: usize, cols: usize, std: f64) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(rows, cols);
        for i in 0..rows {
            for j in 0..cols {
                let z: f64 = self.rng.sample(StandardNormal);
                m[(i, j)] = std * z;
            }
        }
        m
    }
}

impl Problem for LqrProblem {
    fn name(&self) -> &'static str {
        "lqr"
    }

    fn dimension(&self) -> usize {
        self.config.state_dim * self.config.control_dim
    }

    fn begin_round(&mut self, t: usize) {
        let DynamicsSchedule::Burst {
            period,
            burst_start,
            burst_end,
            amplitude,
            frequency,
            reset_std,
            step_std,
        } = self.config.schedule
        else {
            return;
        };
        let (n, p) = (self.config.state_dim, self.config.control_dim);
        let phase = t % period;
        if phase == 0 {
            self.a = self.step_matrix(n, n, reset_std);
            self.b = self.step_matrix(n, p, reset_std);
            return;
        }
        let sa = self.step_matrix(n, n, step_std);
        let sb = self.step_matrix(n, p, step_std);
        self.a += sa;
        self.b += sb;
        if (burst_start..=burst_end).contains(&phase) {
            let arg = frequency * phase as f64;
            self.a.add_scalar_mut(amplitude * arg.sin());
            self.b.add_scalar_mut(amplitude * arg.cos());
        }
    }

    fn loss(&self, x: &[f64]) -> f64 {
        let raw = self.raw_cost(x);
        let cap = self.config.cost_cap;
        if !(raw <= 0.5 * cap) {
            self.saturated.fetch_add(1, Ordering::Relaxed);
        }
        soft_cap(raw, cap)
    }
}
