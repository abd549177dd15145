//! Zeroth-order gradient estimators and the lazy-query rules.
//!
//! All estimators perturb the iterate along a random unit direction `u` with
//! radius `delta` and combine loss values into a gradient estimate:
//!
//! | variant          | estimate                                           | queries |
//! |------------------|----------------------------------------------------|---------|
//! | one-point        | `d/delta * f_t(x + delta u) u`                     | 1       |
//! | residual         | `d/delta * (f_t(w_t) - f_{t-1}(w_{t-1})) u`        | 1       |
//! | two-point asym   | `d/delta * (f_t(x + delta u) - f_t(x)) u`          | 2       |
//! | two-point sym    | `d/(2 delta) * (f_t(x + delta u) - f_t(x - delta u)) u` | 2  |
//! | LAZO (a or b)    | residual when the temporal variation is `<= D`, else symmetric | 1 or 2 |
//!
//! `w_t = x_t + delta u_t` is the perturbed point queried in round `t`.
//! The multi-point variants average `K` slots per round and may reuse
//! queries from the last `H` rounds; see [`multipoint_lazo_step`].

mod cache;
mod lazy;

pub use cache::{CacheEntry, QueryCache, RoundSlot};
pub use lazy::{lazo_step, multipoint_lazo_step, LazyRule};

use std::fmt;

use rand::Rng;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::numerics::{sample_unit_sphere, vec, Direction};
use crate::oracles::QueryChannel;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    OnePoint,
    Residual,
    TwoPointAsym,
    TwoPointSym,
    LazoA,
    LazoB,
    MultiLazoA,
    MultiLazoB,
    MultiPointSym,
}

impl Variant {
    pub const ALL: [Variant; 9] = [
        Variant::OnePoint,
        Variant::Residual,
        Variant::TwoPointAsym,
        Variant::TwoPointSym,
        Variant::LazoA,
        Variant::LazoB,
        Variant::MultiLazoA,
        Variant::MultiLazoB,
        Variant::MultiPointSym,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Variant::OnePoint => "one_point",
            Variant::Residual => "residual",
            Variant::TwoPointAsym => "two_point_asym",
            Variant::TwoPointSym => "two_point_sym",
            Variant::LazoA => "lazo_a",
            Variant::LazoB => "lazo_b",
            Variant::MultiLazoA => "multi_lazo_a",
            Variant::MultiLazoB => "multi_lazo_b",
            Variant::MultiPointSym => "multi_point_sym",
        }
    }

    /// The temporal-variation rule, for lazy variants.
    pub fn rule(self) -> Option<LazyRule> {
        match self {
            Variant::LazoA | Variant::MultiLazoA => Some(LazyRule::A),
            Variant::LazoB | Variant::MultiLazoB => Some(LazyRule::B),
            _ => None,
        }
    }

    pub fn is_multipoint(self) -> bool {
        matches!(
            self,
            Variant::MultiLazoA | Variant::MultiLazoB | Variant::MultiPointSym
        )
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Reuse threshold `D`. Serialized as a number, or `"inf"` for `+inf`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct Threshold(pub f64);

impl Threshold {
    pub const INFINITE: Threshold = Threshold(f64::INFINITY);

    pub fn value(self) -> f64 {
        self.0
    }

    /// The reuse test: variation `<= D`.
    pub fn admits(self, variation: f64) -> bool {
        variation <= self.0
    }
}

impl Serialize for Threshold {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        if self.0.is_infinite() {
            s.serialize_str("inf")
        } else {
            s.serialize_f64(self.0)
        }
    }
}

impl<'de> Deserialize<'de> for Threshold {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Num(f64),
            Text(String),
        }
        match Raw::deserialize(d)? {
            Raw::Num(v) => Ok(Threshold(v)),
            Raw::Text(t) => match t.to_ascii_lowercase().as_str() {
                "inf" | "infinity" | "+inf" => Ok(Threshold::INFINITE),
                other => Err(serde::de::Error::custom(format!(
                    "threshold must be a number or \"inf\", got {other:?}"
                ))),
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EstimatorConfig {
    pub variant: Variant,
    /// Perturbation radius.
    pub delta: f64,
    /// Reuse threshold `D`.
    pub threshold: Threshold,
    /// Lipschitz constant `L` in rule b's denominator `eta * L`. Only the
    /// product `D * L` matters for rule b, so the default of 1 lets
    /// `threshold` carry that product directly.
    pub lipschitz: f64,
    /// Reuse horizon `H` (multi-point variants).
    pub history: usize,
    /// Directions per round `K` (multi-point variants).
    pub directions: usize,
}

impl Default for EstimatorConfig {
    fn default() -> Self {
        EstimatorConfig {
            variant: Variant::TwoPointSym,
            delta: 0.01,
            threshold: Threshold(1.0),
            lipschitz: 1.0,
            history: 1,
            directions: 1,
        }
    }
}

impl EstimatorConfig {
    pub fn new(variant: Variant, delta: f64) -> Self {
        EstimatorConfig {
            variant,
            delta,
            ..Default::default()
        }
    }

    pub fn with_threshold(mut self, d: f64) -> Self {
        self.threshold = Threshold(d);
        self
    }

    pub fn with_lipschitz(mut self, l: f64) -> Self {
        self.lipschitz = l;
        self
    }

    pub fn with_multipoint(mut self, history: usize, directions: usize) -> Self {
        self.history = history;
        self.directions = directions;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.delta.is_finite() && self.delta > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "delta must be positive, got {}",
                self.delta
            )));
        }
        if self.threshold.0.is_nan() || self.threshold.0 < 0.0 {
            return Err(Error::InvalidConfig("threshold must be >= 0 or inf".into()));
        }
        if !(self.lipschitz.is_finite() && self.lipschitz > 0.0) {
            return Err(Error::InvalidConfig("lipschitz must be positive".into()));
        }
        if self.history == 0 || self.directions == 0 {
            return Err(Error::InvalidConfig(
                "history and directions must be >= 1".into(),
            ));
        }
        Ok(())
    }

    /// `(H, K)` used for the cache; single-direction variants use `(1, 1)`.
    fn cache_shape(&self) -> (usize, usize) {
        if self.variant.is_multipoint() {
            (self.history, self.directions)
        } else {
            (1, 1)
        }
    }
}

/// Which query pattern produced an estimate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum RuleFired {
    /// Classic one-point query.
    OnePoint,
    /// Two fresh queries this round.
    FreshTwoPoint,
    /// One fresh query combined with a cached one.
    Reused,
    /// Multi-point round: slots filled by reuse and by fresh mirror queries.
    Mixed { reused: usize, fresh: usize },
}

impl fmt::Display for RuleFired {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RuleFired::OnePoint => f.write_str("one_point"),
            RuleFired::FreshTwoPoint => f.write_str("fresh_two_point"),
            RuleFired::Reused => f.write_str("reused"),
            RuleFired::Mixed { reused, fresh } => write!(f, "mixed:{reused}:{fresh}"),
        }
    }
}

impl std::str::FromStr for RuleFired {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "one_point" => Ok(RuleFired::OnePoint),
            "fresh_two_point" => Ok(RuleFired::FreshTwoPoint),
            "reused" => Ok(RuleFired::Reused),
            _ => {
                let parts: Vec<&str> = s.split(':').collect();
                match parts.as_slice() {
                    ["mixed", r, f] => Ok(RuleFired::Mixed {
                        reused: r.parse().map_err(|_| bad_rule(s))?,
                        fresh: f.parse().map_err(|_| bad_rule(s))?,
                    }),
                    _ => Err(bad_rule(s)),
                }
            }
        }
    }
}

fn bad_rule(s: &str) -> Error {
    Error::InvalidInput(format!("unknown rule tag {s:?}"))
}

/// The fresh query `f_t(w_t)` behind a single-direction estimate.
#[derive(Debug, Clone, PartialEq)]
pub struct Probe {
    pub u: Vec<f64>,
    pub w: Vec<f64>,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradientEstimate {
    pub vector: Vec<f64>,
    pub queries_used: usize,
    pub rule: RuleFired,
    /// Temporal variation that drove a lazy decision.
    pub variation: Option<f64>,
    pub probe: Option<Probe>,
}

impl GradientEstimate {
    pub fn sq_norm(&self) -> f64 {
        vec::norm_sq(&self.vector)
    }
}

/// `d / delta * (f_now - f_prev)`
pub(crate) fn residual_coef(d: usize, delta: f64, f_now: f64, f_prev: f64) -> f64 {
    (d as f64 / delta) * (f_now - f_prev)
}

/// `d / (2 delta) * (f_plus - f_minus)`
pub(crate) fn symmetric_coef(d: usize, delta: f64, f_plus: f64, f_minus: f64) -> f64 {
    (d as f64 / (2.0 * delta)) * (f_plus - f_minus)
}

/// Running sum of `coef * u` terms. The first term is stored rather than
/// added to zero so a one-term sum is bitwise equal to `coef * u`.
#[derive(Debug, Default)]
pub(crate) struct Accumulator(Option<Vec<f64>>);

impl Accumulator {
    pub(crate) fn add(&mut self, coef: f64, u: &[f64]) {
        match &mut self.0 {
            None => self.0 = Some(vec::scaled(coef, u)),
            Some(acc) => acc.iter_mut().zip(u).for_each(|(a, v)| *a += coef * v),
        }
    }

    pub(crate) fn mean_over(self, slots: usize, d: usize) -> Vec<f64> {
        let k = slots as f64;
        self.0
            .unwrap_or_else(|| vec![0.0; d])
            .into_iter()
            .map(|v| v / k)
            .collect()
    }
}

fn check_direction(x: &[f64], u: &Direction) -> Result<()> {
    if u.dim() != x.len() {
        return Err(Error::InvalidInput(format!(
            "direction has dimension {} but the point has {}",
            u.dim(),
            x.len()
        )));
    }
    Ok(())
}

/// `D^a = |f_now - f_prev| / ||w_now - w_prev||`.
///
/// At coincident points (`||dw|| < 1e-12`) the variation is 0 when the
/// values also coincide (`|df| < 1e-12`) and `+inf` otherwise.
pub fn temporal_variation_a(f_now: f64, f_prev: f64, w_now: &[f64], w_prev: &[f64]) -> f64 {
    let df = (f_now - f_prev).abs();
    let dw = vec::dist(w_now, w_prev);
    if dw < 1e-12 {
        if df < 1e-12 {
            0.0
        } else {
            f64::INFINITY
        }
    } else {
        df / dw
    }
}

/// `D^b = |f_now - f_prev| / (eta * L)`.
pub fn temporal_variation_b(f_now: f64, f_prev: f64, eta: f64, lipschitz: f64) -> Result<f64> {
    let denom = eta * lipschitz;
    if !(denom.is_finite() && denom > 0.0) {
        return Err(Error::InvalidConfig(format!(
            "rule b needs eta * L > 0, got {eta} * {lipschitz}"
        )));
    }
    Ok((f_now - f_prev).abs() / denom)
}

/// Classic one-point estimate from a single query at `x + delta u`.
pub fn estimate_one_point<C: QueryChannel + ?Sized>(
    oracle: &mut C,
    x: &[f64],
    u: &Direction,
    delta: f64,
) -> Result<GradientEstimate> {
    check_direction(x, u)?;
    let d = x.len();
    let w = vec::add_scaled(x, delta, u.as_slice());
    let value = oracle.query(&w)?;
    Ok(GradientEstimate {
        vector: vec::scaled((d as f64 / delta) * value, u.as_slice()),
        queries_used: 1,
        rule: RuleFired::OnePoint,
        variation: None,
        probe: Some(Probe {
            u: u.as_slice().to_vec(),
            w,
            value,
        }),
    })
}

/// One-point residual estimate against the latest cached query; pushes
/// this round's query into the cache.
pub fn estimate_residual<C: QueryChannel + ?Sized>(
    oracle: &mut C,
    x: &[f64],
    u: &Direction,
    delta: f64,
    cache: &mut QueryCache,
) -> Result<GradientEstimate> {
    check_direction(x, u)?;
    let prev = cache
        .latest()
        .ok_or_else(|| Error::Sequencing("residual estimate needs a bootstrapped cache".into()))?
        .value;
    let d = x.len();
    let entry = CacheEntry::new(
        x,
        u.as_slice(),
        delta,
        oracle.query(&vec::add_scaled(x, delta, u.as_slice()))?,
    );
    let est = GradientEstimate {
        vector: vec::scaled(residual_coef(d, delta, entry.value, prev), u.as_slice()),
        queries_used: 1,
        rule: RuleFired::Reused,
        variation: None,
        probe: Some(Probe {
            u: entry.u.clone(),
            w: entry.w.clone(),
            value: entry.value,
        }),
    };
    cache.push_round(vec![entry], est.sq_norm())?;
    Ok(est)
}

/// Asymmetric two-point estimate from queries at `x + delta u` and `x`.
pub fn estimate_two_point_asym<C: QueryChannel + ?Sized>(
    oracle: &mut C,
    x: &[f64],
    u: &Direction,
    delta: f64,
) -> Result<GradientEstimate> {
    check_direction(x, u)?;
    let d = x.len();
    let w = vec::add_scaled(x, delta, u.as_slice());
    let value = oracle.query(&w)?;
    let base = oracle.query(x)?;
    Ok(GradientEstimate {
        vector: vec::scaled(residual_coef(d, delta, value, base), u.as_slice()),
        queries_used: 2,
        rule: RuleFired::FreshTwoPoint,
        variation: None,
        probe: Some(Probe {
            u: u.as_slice().to_vec(),
            w,
            value,
        }),
    })
}

/// Symmetric two-point estimate from queries at `x + delta u` and `x - delta u`
/// (queried in that order).
pub fn estimate_two_point_sym<C: QueryChannel + ?Sized>(
    oracle: &mut C,
    x: &[f64],
    u: &Direction,
    delta: f64,
) -> Result<GradientEstimate> {
    check_direction(x, u)?;
    let d = x.len();
    let w = vec::add_scaled(x, delta, u.as_slice());
    let plus = oracle.query(&w)?;
    let minus = oracle.query(&vec::add_scaled(x, -delta, u.as_slice()))?;
    Ok(GradientEstimate {
        vector: vec::scaled(symmetric_coef(d, delta, plus, minus), u.as_slice()),
        queries_used: 2,
        rule: RuleFired::FreshTwoPoint,
        variation: None,
        probe: Some(Probe {
            u: u.as_slice().to_vec(),
            w,
            value: plus,
        }),
    })
}

/// `2K`-point symmetric estimate: the mean of `K` symmetric two-point terms
/// over independent directions. Returns the estimate and the `K` fresh
/// queries at `x + delta u_k` for caching.
pub fn estimate_multi_point_sym<C: QueryChannel + ?Sized, R: Rng + ?Sized>(
    oracle: &mut C,
    x: &[f64],
    delta: f64,
    directions: usize,
    rng: &mut R,
) -> Result<(GradientEstimate, Vec<CacheEntry>)> {
    if directions == 0 {
        return Err(Error::InvalidConfig("directions must be >= 1".into()));
    }
    let d = x.len();
    let mut acc = Accumulator::default();
    let mut entries = Vec::with_capacity(directions);
    for _ in 0..directions {
        let u = sample_unit_sphere(rng, d)?;
        let w = vec::add_scaled(x, delta, u.as_slice());
        let plus = oracle.query(&w)?;
        let minus = oracle.query(&vec::add_scaled(x, -delta, u.as_slice()))?;
        acc.add(symmetric_coef(d, delta, plus, minus), u.as_slice());
        entries.push(CacheEntry::new(x, u.as_slice(), delta, plus));
    }
    let est = GradientEstimate {
        vector: acc.mean_over(directions, d),
        queries_used: 2 * directions,
        rule: RuleFired::Mixed {
            reused: 0,
            fresh: directions,
        },
        variation: None,
        probe: None,
    };
    Ok((est, entries))
}

/// Right-hand side of the instance-dependent bound on the residual
/// estimate:
///
/// `|df|^2 / ||dw||^2 * (8 d^2 + 2 d^2 eta^2 / delta^2 * ||g_{t-1}||^2)`.
#[allow(clippy::too_many_arguments)]
pub fn instance_bound_rhs(
    f_now: f64,
    f_prev: f64,
    w_now: &[f64],
    w_prev: &[f64],
    prev_sq_norm: f64,
    d: usize,
    eta: f64,
    delta: f64,
) -> Result<f64> {
    let dw_sq = vec::norm_sq(&vec::add_scaled(w_now, -1.0, w_prev));
    if dw_sq == 0.0 {
        return Err(Error::DegenerateInput(
            "coincident perturbed points make the bound vacuous".into(),
        ));
    }
    let df = f_now - f_prev;
    let d2 = (d * d) as f64;
    Ok(df * df / dw_sq * (8.0 * d2 + 2.0 * d2 * eta * eta / (delta * delta) * prev_sq_norm))
}

/// Premise of the reduced-norm condition for the residual estimator:
/// `||g_{t-1}||^2 <= d^2 L^2` and `|df|^2 / ||dw||^2 < L^2 / (10 d)`.
pub fn reduced_norm_premise(
    f_now: f64,
    f_prev: f64,
    w_now: &[f64],
    w_prev: &[f64],
    prev_sq_norm: f64,
    d: usize,
    lipschitz: f64,
) -> bool {
    let df = f_now - f_prev;
    let dw_sq = vec::norm_sq(&vec::add_scaled(w_now, -1.0, w_prev));
    let ratio = if df == 0.0 {
        0.0
    } else if dw_sq == 0.0 {
        f64::INFINITY
    } else {
        df * df / dw_sq
    };
    let d = d as f64;
    let l2 = lipschitz * lipschitz;
    prev_sq_norm <= d * d * l2 && ratio < l2 / (10.0 * d)
}

/// Per-run estimator state: configuration plus query cache.
#[derive(Debug, Clone)]
pub struct Estimator {
    config: EstimatorConfig,
    cache: QueryCache,
}

impl Estimator {
    pub fn new(config: EstimatorConfig) -> Result<Self> {
        config.validate()?;
        let (h, k) = config.cache_shape();
        Ok(Estimator {
            cache: QueryCache::new(h, k)?,
            config,
        })
    }

    pub fn config(&self) -> &EstimatorConfig {
        &self.config
    }

    pub fn cache(&self) -> &QueryCache {
        &self.cache
    }

    /// Whether the next [`Estimator::step`] is a bootstrap round.
    pub fn needs_bootstrap(&self) -> bool {
        match self.config.variant {
            Variant::Residual | Variant::LazoA | Variant::LazoB => self.cache.is_empty(),
            Variant::MultiLazoA | Variant::MultiLazoB => !self.cache.is_full(),
            _ => false,
        }
    }

    /// Produce this round's estimate at `x`, drawing directions from `rng`.
    pub fn step<C: QueryChannel + ?Sized, R: Rng + ?Sized>(
        &mut self,
        oracle: &mut C,
        x: &[f64],
        rng: &mut R,
        eta: f64,
    ) -> Result<GradientEstimate> {
        step_with_cache(&self.config, &mut self.cache, oracle, x, rng, eta)
    }
}

/// [`Estimator::step`] against an explicit cache; used by diagnostics that
/// evaluate many hypothetical rounds from one frozen cache state.
pub fn step_with_cache<C: QueryChannel + ?Sized, R: Rng + ?Sized>(
    config: &EstimatorConfig,
    cache: &mut QueryCache,
    oracle: &mut C,
    x: &[f64],
    rng: &mut R,
    eta: f64,
) -> Result<GradientEstimate> {
    let d = x.len();
    let delta = config.delta;
    let push_probe = |cache: &mut QueryCache, est: &GradientEstimate| -> Result<()> {
        let p = est
            .probe
            .as_ref()
            .expect("single-direction estimates carry a probe");
        cache.push_round(
            vec![CacheEntry {
                x: x.to_vec(),
                u: p.u.clone(),
                w: p.w.clone(),
                value: p.value,
            }],
            est.sq_norm(),
        )
    };
    match config.variant {
        Variant::OnePoint => {
            let u = sample_unit_sphere(rng, d)?;
            let est = estimate_one_point(oracle, x, &u, delta)?;
            push_probe(cache, &est)?;
            Ok(est)
        }
        Variant::TwoPointAsym => {
            let u = sample_unit_sphere(rng, d)?;
            let est = estimate_two_point_asym(oracle, x, &u, delta)?;
            push_probe(cache, &est)?;
            Ok(est)
        }
        Variant::TwoPointSym => {
            let u = sample_unit_sphere(rng, d)?;
            let est = estimate_two_point_sym(oracle, x, &u, delta)?;
            push_probe(cache, &est)?;
            Ok(est)
        }
        Variant::Residual | Variant::LazoA | Variant::LazoB if cache.is_empty() => {
            let u = sample_unit_sphere(rng, d)?;
            let est = estimate_two_point_sym(oracle, x, &u, delta)?;
            push_probe(cache, &est)?;
            Ok(est)
        }
        Variant::Residual => {
            let u = sample_unit_sphere(rng, d)?;
            estimate_residual(oracle, x, &u, delta, cache)
        }
        Variant::LazoA | Variant::LazoB => {
            let rule = config.variant.rule().expect("lazy variant");
            lazo_step(
                oracle,
                x,
                cache,
                rule,
                config.threshold,
                delta,
                eta,
                config.lipschitz,
                rng,
            )
        }
        Variant::MultiPointSym => {
            let (est, entries) =
                estimate_multi_point_sym(oracle, x, delta, config.directions, rng)?;
            cache.push_round(entries, est.sq_norm())?;
            Ok(est)
        }
        Variant::MultiLazoA | Variant::MultiLazoB if !cache.is_full() => {
            let (est, entries) =
                estimate_multi_point_sym(oracle, x, delta, config.directions, rng)?;
            cache.push_round(entries, est.sq_norm())?;
            Ok(est)
        }
        Variant::MultiLazoA | Variant::MultiLazoB => {
            let rule = config.variant.rule().expect("lazy variant");
            multipoint_lazo_step(
                oracle,
                x,
                cache,
                rule,
                config.threshold,
                delta,
                eta,
                config.lipschitz,
                config.directions,
                rng,
            )
        }
    }
}
