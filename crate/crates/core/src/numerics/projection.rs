use serde::{Deserialize, Serialize};

use super::vec;
use crate::{Error, Result};

/// The feasible set of the online problem.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FeasibleSet {
    /// Euclidean ball of the given radius centered at the origin.
    Ball { radius: f64 },
    /// Axis-aligned box.
    Box { lower: Vec<f64>, upper: Vec<f64> },
    /// All of R^d; projection is skipped.
    #[default]
    Unconstrained,
}

impl FeasibleSet {
    pub fn validate(&self, d: usize) -> Result<()> {
        match self {
            FeasibleSet::Ball { radius } => {
                if !(radius.is_finite() && *radius > 0.0) {
                    return Err(Error::InvalidConfig(format!(
                        "ball radius must be positive, got {radius}"
                    )));
                }
            }
            FeasibleSet::Box { lower, upper } => {
                if lower.len() != d || upper.len() != d {
                    return Err(Error::InvalidDimension(format!(
                        "box bounds have length {}/{} but dimension is {d}",
                        lower.len(),
                        upper.len()
                    )));
                }
                if lower.iter().zip(upper).any(|(l, u)| !(l <= u)) {
                    return Err(Error::InvalidConfig("box requires lower <= upper".into()));
                }
            }
            FeasibleSet::Unconstrained => {}
        }
        Ok(())
    }

    pub fn is_constrained(&self) -> bool {
        !matches!(self, FeasibleSet::Unconstrained)
    }

    /// Euclidean projection onto the set.
    pub fn project(&self, x: &[f64]) -> Vec<f64> {
        match self {
            FeasibleSet::Ball { radius } => {
                let n = vec::norm(x);
                if n <= *radius || !n.is_finite() {
                    x.to_vec()
                } else {
                    // rounding can leave the scaled point a hair outside; shrink
                    // until it is inside so projection stays idempotent
                    let mut s = radius / n;
                    loop {
                        let y: Vec<f64> = x.iter().map(|v| v * s).collect();
                        if vec::norm(&y) <= *radius {
                            break y;
                        }
                        s *= 1.0 - f64::EPSILON;
                    }
                }
            }
            FeasibleSet::Box { lower, upper } => x
                .iter()
                .zip(lower.iter().zip(upper))
                .map(|(v, (l, u))| v.clamp(*l, *u))
                .collect(),
            FeasibleSet::Unconstrained => x.to_vec(),
        }
    }

    pub fn contains(&self, x: &[f64], tol: f64) -> bool {
        match self {
            FeasibleSet::Ball { radius } => vec::norm(x) <= radius + tol,
            FeasibleSet::Box { lower, upper } => x
                .iter()
                .zip(lower.iter().zip(upper))
                .all(|(v, (l, u))| *v >= l - tol && *v <= u + tol),
            FeasibleSet::Unconstrained => true,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn ball_scales_radially() {
        let b = FeasibleSet::Ball { radius: 1.0 };
        let p = b.project(&[3.0, 4.0]);
        assert!((p[0] - 0.6).abs() < 1e-15 && (p[1] - 0.8).abs() < 1e-15);
    }

    #[test]
    fn interior_points_unchanged() {
        let b = FeasibleSet::Ball { radius: 10.0 };
        assert_eq!(b.project(&[0.5, 0.5]), vec![0.5, 0.5]);
        assert_eq!(b.project(&[0.0, 0.0]), vec![0.0, 0.0]);
    }

    #[test]
    fn box_clamps() {
        let s = FeasibleSet::Box {
            lower: vec![0.0, 0.0],
            upper: vec![1.0, 1.0],
        };
        assert_eq!(s.project(&[2.0, -3.0]), vec![1.0, 0.0]);
    }

    #[test]
    fn invalid_sets_rejected() {
        assert!(FeasibleSet::Ball { radius: 0.0 }.validate(2).is_err());
        let s = FeasibleSet::Box {
            lower: vec![1.0],
            upper: vec![0.0],
        };
        assert!(s.validate(1).is_err());
        assert!(s.validate(2).is_err());
    }

    fn sets() -> impl Strategy<Value = FeasibleSet> {
        prop_oneof![
            (0.1f64..5.0).prop_map(|radius| FeasibleSet::Ball { radius }),
            Just(FeasibleSet::Box {
                lower: vec![-1.0, 0.0, -2.0],
                upper: vec![1.0, 0.5, 3.0]
            }),
            Just(FeasibleSet::Unconstrained),
        ]
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(1000))]

        #[test]
        fn projection_is_idempotent_and_feasible(
            set in sets(),
            x in prop::collection::vec(-20.0f64..20.0, 3),
        ) {
            let p = set.project(&x);
            prop_assert!(set.contains(&p, 0.0));
            prop_assert_eq!(set.project(&p), p);
        }

        #[test]
        fn projection_is_non_expansive(
            set in sets(),
            x in prop::collection::vec(-20.0f64..20.0, 3),
            y in prop::collection::vec(-20.0f64..20.0, 3),
        ) {
            let px = set.project(&x);
            let py = set.project(&y);
            prop_assert!(vec::dist(&px, &py) <= vec::dist(&x, &y) * (1.0 + 1e-12) + 1e-12);
        }
    }
}
