//! Random directions, feasible-set projections and small vector helpers.

mod projection;
mod rng;
pub mod vec;

pub use projection::FeasibleSet;
pub use rng::{Purpose, SeededRng};

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::{Error, Result};

/// A unit-norm perturbation direction.
#[derive(Debug, Clone, PartialEq)]
pub struct Direction(Vec<f64>);

impl Direction {
    /// Wrap `values` after normalizing; fails on a zero or non-finite vector.
    pub fn from_vec(values: Vec<f64>) -> Result<Self> {
        let norm = vec::norm(&values);
        if !(norm.is_finite() && norm > 0.0) {
            return Err(Error::InvalidInput(
                "direction must be finite and non-zero".into(),
            ));
        }
        Ok(Direction(values.into_iter().map(|v| v / norm).collect()))
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn negated(&self) -> Direction {
        Direction(self.0.iter().map(|v| -v).collect())
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }
}

/// Draw a direction uniformly from the unit sphere in `d` dimensions by
/// normalizing a standard Gaussian vector.
pub fn sample_unit_sphere<R: Rng + ?Sized>(rng: &mut R, d: usize) -> Result<Direction> {
    if d == 0 {
        return Err(Error::InvalidDimension(
            "sphere dimension must be >= 1".into(),
        ));
    }
    loop {
        let g: Vec<f64> = (0..d).map(|_| rng.sample(StandardNormal)).collect();
        let norm = vec::norm(&g);
        // a Gaussian draw is zero with probability 0; redraw rather than divide by it
        if norm > 0.0 {
            return Ok(Direction(g.into_iter().map(|v| v / norm).collect()));
        }
    }
}

/// A `k x d` matrix with i.i.d. standard normal entries.
pub fn random_projection_matrix<R: Rng + ?Sized>(
    rng: &mut R,
    d: usize,
    k: usize,
) -> Result<DMatrix<f64>> {
    if k == 0 || d == 0 {
        return Err(Error::InvalidDimension("projection needs k, d >= 1".into()));
    }
    if k > d {
        return Err(Error::InvalidDimension(format!(
            "projection target dimension {k} exceeds source dimension {d}"
        )));
    }
    // row-major fill so the draw order is independent of nalgebra's storage
    let mut m = DMatrix::zeros(k, d);
    for i in 0..k {
        for j in 0..d {
            m[(i, j)] = rng.sample(StandardNormal);
        }
    }
    Ok(m)
}
