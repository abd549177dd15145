use std::collections::VecDeque;

use crate::numerics::vec;
use crate::{Error, Result};

/// One past query at a perturbed point `w = x + delta * u`.
#[derive(Debug, Clone, PartialEq)]
pub struct CacheEntry {
    pub x: Vec<f64>,
    pub u: Vec<f64>,
    pub w: Vec<f64>,
    pub value: f64,
}

impl CacheEntry {
    pub fn new(x: &[f64], u: &[f64], delta: f64, value: f64) -> Self {
        CacheEntry {
            x: x.to_vec(),
            u: u.to_vec(),
            w: vec::add_scaled(x, delta, u),
            value,
        }
    }
}

/// The queries made in one round.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct RoundSlot {
    pub entries: Vec<CacheEntry>,
}

/// Ring buffer of the last `history` rounds of queries, each holding at
/// most `per_round` entries, plus the squared norm of the most recent
/// gradient estimate.
#[derive(Debug, Clone, PartialEq)]
pub struct QueryCache {
    history: usize,
    per_round: usize,
    slots: VecDeque<RoundSlot>,
    last_sq_norm: Option<f64>,
}

impl QueryCache {
    pub fn new(history: usize, per_round: usize) -> Result<Self> {
        if history == 0 || per_round == 0 {
            return Err(Error::InvalidConfig(
                "cache history and per-round capacity must be >= 1".into(),
            ));
        }
        Ok(QueryCache {
            history,
            per_round,
            slots: VecDeque::with_capacity(history),
            last_sq_norm: None,
        })
    }

    pub fn history(&self) -> usize {
        self.history
    }

    pub fn per_round(&self) -> usize {
        self.per_round
    }

    /// Number of rounds currently stored.
    pub fn depth(&self) -> usize {
        self.slots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.slots.is_empty()
    }

    pub fn is_full(&self) -> bool {
        self.slots.len() == self.history
    }

    /// Round `t - lag`, with `lag = 1` the most recent stored round.
    pub fn lagged(&self, lag: usize) -> Option<&RoundSlot> {
        if lag == 0 || lag > self.slots.len() {
            return None;
        }
        self.slots.get(self.slots.len() - lag)
    }

    /// The most recent single query, as used by the one-point residual rule.
    pub fn latest(&self) -> Option<&CacheEntry> {
        self.lagged(1).and_then(|s| s.entries.first())
    }

    pub fn last_sq_norm(&self) -> Option<f64> {
        self.last_sq_norm
    }

    /// Record a round, evicting the oldest one when full.
    pub fn push_round(&mut self, entries: Vec<CacheEntry>, estimate_sq_norm: f64) -> Result<()> {
        if entries.len() > self.per_round {
            return Err(Error::InvalidInput(format!(
                "round has {} entries but the cache holds at most {}",
                entries.len(),
                self.per_round
            )));
        }
        if self.slots.len() == self.history {
            self.slots.pop_front();
        }
        self.slots.push_back(RoundSlot { entries });
        self.last_sq_norm = Some(estimate_sq_norm);
        Ok(())
    }

    pub fn iter_rounds(&self) -> impl Iterator<Item = &RoundSlot> {
        self.slots.iter()
    }
}
