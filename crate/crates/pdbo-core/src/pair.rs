use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type Vector = DVector<f64>;

/// The joint variable `z = (x, y)`: outer block `x`, inner block `y`.
///
/// Arithmetic treats the pair as the concatenation in `R^{p+d}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(from = "PairRepr", into = "PairRepr")]
pub struct VectorPair {
    pub x: Vector,
    pub y: Vector,
}

#[derive(Serialize, Deserialize)]
struct PairRepr {
    x: Vec<f64>,
    y: Vec<f64>,
}

impl From<PairRepr> for VectorPair {
    fn from(r: PairRepr) -> Self {
        VectorPair::from_slices(&r.x, &r.y)
    }
}

impl From<VectorPair> for PairRepr {
    fn from(p: VectorPair) -> Self {
        PairRepr { x: p.x.as_slice().to_vec(), y: p.y.as_slice().to_vec() }
    }
}

impl VectorPair {
    pub fn new(x: Vector, y: Vector) -> Self {
        VectorPair { x, y }
    }

    pub fn from_slices(x: &[f64], y: &[f64]) -> Self {
        VectorPair { x: Vector::from_column_slice(x), y: Vector::from_column_slice(y) }
    }

    pub fn zeros(p: usize, d: usize) -> Self {
        VectorPair { x: Vector::zeros(p), y: Vector::zeros(d) }
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.x.len(), self.y.len())
    }

    /// Split a concatenated vector back into blocks of sizes `(p, len - p)`.
    pub fn from_concat(z: &Vector, p: usize) -> Result<Self> {
        if p > z.len() {
            return Err(Error::DimensionMismatch { expected: p, got: z.len() });
        }
        Ok(VectorPair {
            x: Vector::from_column_slice(&z.as_slice()[..p]),
            y: Vector::from_column_slice(&z.as_slice()[p..]),
        })
    }

    pub fn concat(&self) -> Vector {
        let mut v = Vector::zeros(self.x.len() + self.y.len());
        v.rows_mut(0, self.x.len()).copy_from(&self.x);
        v.rows_mut(self.x.len(), self.y.len()).copy_from(&self.y);
        v
    }

    pub fn norm_squared(&self) -> f64 {
        self.x.norm_squared() + self.y.norm_squared()
    }

    pub fn norm(&self) -> f64 {
        self.norm_squared().sqrt()
    }

    pub fn dot(&self, other: &VectorPair) -> f64 {
        self.x.dot(&other.x) + self.y.dot(&other.y)
    }

    pub fn scale(&self, s: f64) -> VectorPair {
        VectorPair { x: &self.x * s, y: &self.y * s }
    }

    pub fn add(&self, other: &VectorPair) -> VectorPair {
        VectorPair { x: &self.x + &other.x, y: &self.y + &other.y }
    }

    pub fn sub(&self, other: &VectorPair) -> VectorPair {
        VectorPair { x: &self.x - &other.x, y: &self.y - &other.y }
    }

    /// `self += s * other`
    pub fn axpy(&mut self, s: f64, other: &VectorPair) {
        self.x.axpy(s, &other.x, 1.0);
        self.y.axpy(s, &other.y, 1.0);
    }

    pub fn distance(&self, other: &VectorPair) -> f64 {
        self.sub(other).norm()
    }

    pub fn is_finite(&self) -> bool {
        self.x.iter().chain(self.y.iter()).all(|v| v.is_finite())
    }
}
