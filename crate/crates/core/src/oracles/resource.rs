use std::f64::consts::PI;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::Problem;
use crate::numerics::{Purpose, SeededRng};
use crate::{Error, Result};

/// Features fed to each agent's forwarding policy: `[y, b, 1]`.
pub(crate) const FEATURES: usize = 3;

/// Networked resource allocation on a ring.
///
/// Each agent `i` holds workload `y_k^i`, receives demand
/// `b_k^i = psi_i sin(omega_i k + phi_i)` and forwards a fraction
/// `a_k^{ij}` of its workload to each ring neighbour `j`:
///
/// `y_{k+1}^i = y_k^i - sum_j a_k^{ij} y_k^i + sum_j a_k^{ji} y_k^j - b_k^i`.
///
/// A negative workload costs `p_t^i (y_k^i)^2`, with
/// `p_t^i = sin(pi t / 12) + U[0, 1]` frozen per round. The round loss is
/// `sum_i sum_{k=1..H} beta^k r_k^i`.
///
/// The forwarding policy is `a^{ij} = sigmoid(theta_{ij} . [y^i, b^i, 1]) / 2`,
/// so each agent's outgoing fractions lie in `[0, 1]` and sum to at most 1.
/// The decision vector holds `theta` for every (agent, neighbour) pair,
/// left neighbour first: `agents * 2 * 3` entries.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ResourceConfig {
    pub agents: usize,
    pub discount: f64,
    pub rollout_len: usize,
    pub initial_workload: f64,
    /// Range of the demand amplitudes `psi_i`.
    pub amplitude_range: (f64, f64),
    /// Range of the demand frequencies `omega_i`.
    pub frequency_range: (f64, f64),
    /// Range of the demand phases `phi_i`.
    pub phase_range: (f64, f64),
    /// Period, in rounds, of the sinusoidal part of the penalty.
    pub penalty_period: f64,
}

impl Default for ResourceConfig {
    fn default() -> Self {
        ResourceConfig {
            agents: 16,
            discount: 0.75,
            rollout_len: 10,
            initial_workload: 1.0,
            amplitude_range: (0.5, 1.5),
            frequency_range: (0.1, 0.5),
            phase_range: (0.0, 2.0 * PI),
            penalty_period: 24.0,
        }
    }
}

impl ResourceConfig {
    pub fn validate(&self) -> Result<()> {
        if self.agents < 3 || self.rollout_len == 0 {
            return Err(Error::InvalidDimension(
                "resource allocation needs >= 3 agents and rollout_len >= 1".into(),
            ));
        }
        if !(self.discount > 0.0 && self.discount < 1.0) {
            return Err(Error::InvalidConfig("discount must lie in (0, 1)".into()));
        }
        for (lo, hi) in [self.amplitude_range, self.frequency_range, self.phase_range] {
            if !(lo <= hi) {
                return Err(Error::InvalidConfig(
                    "parameter ranges need lo <= hi".into(),
                ));
            }
        }
        if !(self.penalty_period > 0.0) {
            return Err(Error::InvalidConfig(
                "penalty_period must be positive".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Demand {
    pub amplitude: f64,
    pub frequency: f64,
    pub phase: f64,
}

impl Demand {
    pub fn at(&self, k: usize) -> f64 {
        self.amplitude * (self.frequency * k as f64 + self.phase).sin()
    }
}

#[derive(Debug, Clone)]
pub struct ResourceProblem {
    config: ResourceConfig,
    demands: Vec<Demand>,
    penalties: Vec<f64>,
    rng: SeededRng,
}

fn uniform<R: Rng>(rng: &mut R, (lo, hi): (f64, f64)) -> f64 {
    if lo == hi {
        lo
    } else {
        rng.random_range(lo..hi)
    }
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

impl ResourceProblem {
    pub fn new(config: ResourceConfig, rng: &SeededRng) -> Result<Self> {
        config.validate()?;
        let mut setup = rng.fork(Purpose::OracleSetup, 0);
        let demands = (0..config.agents)
            .map(|_| Demand {
                amplitude: uniform(&mut setup, config.amplitude_range),
                frequency: uniform(&mut setup, config.frequency_range),
                phase: uniform(&mut setup, config.phase_range),
            })
            .collect();
        Ok(ResourceProblem {
            penalties: vec![0.0; config.agents],
            demands,
            rng: rng.fork(Purpose::Oracle, 0),
            config,
        })
    }

    pub fn demands(&self) -> &[Demand] {
        &self.demands
    }

    pub fn penalties(&self) -> &[f64] {
        &self.penalties
    }

    pub fn config(&self) -> &ResourceConfig {
        &self.config
    }

    /// Ring neighbours of agent `i`, left first.
    pub fn neighbours(&self, i: usize) -> [usize; 2] {
        let n = self.config.agents;
        [(i + n - 1) % n, (i + 1) % n]
    }

    /// Forwarding fraction from agent `i` to its `slot`-th neighbour.
    fn fraction(&self, theta: &[f64], i: usize, slot: usize, workload: f64, demand: f64) -> f64 {
        let base = (i * 2 + slot) * FEATURES;
        let w = &theta[base..base + FEATURES];
        0.5 * sigmoid(w[0] * workload + w[1] * demand + w[2])
    }
}

impl Problem for ResourceProblem {
    fn name(&self) -> &'static str {
        "resource_allocation"
    }

    fn dimension(&self) -> usize {
        self.config.agents * 2 * FEATURES
    }

    fn begin_round(&mut self, t: usize) {
        let season = (2.0 * PI * t as f64 / self.config.penalty_period).sin();
        for p in self.penalties.iter_mut() {
            *p = season + self.rng.random_range(0.0..1.0);
        }
    }

    fn loss(&self, theta: &[f64]) -> f64 {
        let n = self.config.agents;
        let mut workload = vec![self.config.initial_workload; n];
        let mut fractions = vec![[0.0; 2]; n];
        let mut total = 0.0;
        let mut weight = 1.0;
        for k in 0..self.config.rollout_len {
            for (i, f) in fractions.iter_mut().enumerate() {
                let b = self.demands[i].at(k);
                *f = [
                    self.fraction(theta, i, 0, workload[i], b),
                    self.fraction(theta, i, 1, workload[i], b),
                ];
            }
            let next: Vec<f64> = (0..n)
                .map(|i| {
                    let outgoing = (fractions[i][0] + fractions[i][1]) * workload[i];
                    let incoming: f64 = self
                        .neighbours(i)
                        .iter()
                        .map(|&j| {
                            let slot = if self.neighbours(j)[0] == i { 0 } else { 1 };
                            fractions[j][slot] * workload[j]
                        })
                        .sum();
                    workload[i] - outgoing + incoming - self.demands[i].at(k)
                })
                .collect();
            workload = next;
            weight *= self.config.discount;
            for (y, p) in workload.iter().zip(&self.penalties) {
                if *y < 0.0 {
                    total += weight * p * y * y;
                }
            }
        }
        total
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn zero_demand_zero_workload_costs_nothing() {
        let cfg = ResourceConfig {
            initial_workload: 0.0,
            amplitude_range: (0.0, 0.0),
            ..Default::default()
        };
        let mut p = ResourceProblem::new(cfg, &SeededRng::new(1, 0)).unwrap();
        p.begin_round(0);
        assert_eq!(p.loss(&vec![0.0; 96]), 0.0);
        assert_eq!(p.loss(&vec![-3.0; 96]), 0.0);
    }

    #[test]
    fn penalties_follow_season() {
        let mut p = ResourceProblem::new(ResourceConfig::default(), &SeededRng::new(1, 0)).unwrap();
        for t in 0..48 {
            p.begin_round(t);
            let s = (PI * t as f64 / 12.0).sin();
            for v in p.penalties() {
                assert!(*v >= s && *v < s + 1.0);
            }
        }
    }

    #[test]
    fn fractions_respect_simplex() {
        let p = ResourceProblem::new(ResourceConfig::default(), &SeededRng::new(1, 0)).unwrap();
        let theta: Vec<f64> = (0..96).map(|i| (i as f64 * 0.37).sin() * 40.0).collect();
        for i in 0..16 {
            let a0 = p.fraction(&theta, i, 0, 3.0, -1.0);
            let a1 = p.fraction(&theta, i, 1, 3.0, -1.0);
            assert!((0.0..=1.0).contains(&a0) && (0.0..=1.0).contains(&a1));
            assert!(a0 + a1 <= 1.0);
        }
    }

    /// Straight-line re-implementation with explicit index arithmetic.
    fn reference_cost(p: &ResourceProblem, theta: &[f64]) -> f64 {
        let cfg = p.config();
        let n = cfg.agents;
        let mut y = vec![cfg.initial_workload; n];
        let mut cost = 0.0;
        for k in 0..cfg.rollout_len {
            let b: Vec<f64> = p
                .demands()
                .iter()
                .map(|d| d.amplitude * (d.frequency * k as f64 + d.phase).sin())
                .collect();
            // a[i][j] for j in {left, right}
            let mut a_left = vec![0.0; n];
            let mut a_right = vec![0.0; n];
            for i in 0..n {
                let l = &theta[(2 * i) * 3..(2 * i) * 3 + 3];
                let r = &theta[(2 * i + 1) * 3..(2 * i + 1) * 3 + 3];
                a_left[i] = 0.5 / (1.0 + (-(l[0] * y[i] + l[1] * b[i] + l[2])).exp());
                a_right[i] = 0.5 / (1.0 + (-(r[0] * y[i] + r[1] * b[i] + r[2])).exp());
            }
            let mut y_next = vec![0.0; n];
            for i in 0..n {
                let left = (i + n - 1) % n;
                let right = (i + 1) % n;
                // left neighbour sends right, right neighbour sends left
                y_next[i] = y[i] - (a_left[i] + a_right[i]) * y[i]
                    + a_right[left] * y[left]
                    + a_left[right] * y[right]
                    - b[i];
            }
            y = y_next;
            for i in 0..n {
                let r = if y[i] >= 0.0 {
                    0.0
                } else {
                    p.penalties()[i] * y[i] * y[i]
                };
                cost += cfg.discount.powi(k as i32 + 1) * r;
            }
        }
        cost
    }

    #[test]
    fn matches_straight_line_reimplementation() {
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        for trial in 0..10 {
            let cfg = ResourceConfig {
                initial_workload: rng.random_range(-1.0..2.0),
                ..Default::default()
            };
            let mut p = ResourceProblem::new(cfg, &SeededRng::new(trial, 3)).unwrap();
            for t in 0..=trial as usize {
                p.begin_round(t);
            }
            let theta: Vec<f64> = (0..96).map(|_| rng.random_range(-2.0..2.0)).collect();
            let ours = p.loss(&theta);
            let reference = reference_cost(&p, &theta);
            assert!(
                (ours - reference).abs() <= 1e-12 * reference.abs().max(1.0),
                "{ours} vs {reference}"
            );
        }
    }
}
