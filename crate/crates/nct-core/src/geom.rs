//! Small 3-vector helpers and the unit-norm flight direction.

use crate::error::{Result, TransportError};
use serde::{Deserialize, Serialize};

pub type Vec3 = [f64; 3];

pub fn dot(a: &Vec3, b: &Vec3) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

pub fn cross(a: &Vec3, b: &Vec3) -> Vec3 {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

pub fn norm(a: &Vec3) -> f64 {
    dot(a, a).sqrt()
}

pub fn add(a: &Vec3, b: &Vec3) -> Vec3 {
    [a[0] + b[0], a[1] + b[1], a[2] + b[2]]
}

pub fn sub(a: &Vec3, b: &Vec3) -> Vec3 {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

pub fn scale(a: &Vec3, k: f64) -> Vec3 {
    [k * a[0], k * a[1], k * a[2]]
}

/// Direction of flight; invariant: Euclidean norm 1 within 1e-12.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec3", into = "Vec3")]
pub struct Direction(Vec3);

impl Direction {
    pub const UNIT_TOL: f64 = 1e-12;

    pub const PLUS_X: Direction = Direction([1.0, 0.0, 0.0]);
    pub const PLUS_Y: Direction = Direction([0.0, 1.0, 0.0]);
    pub const PLUS_Z: Direction = Direction([0.0, 0.0, 1.0]);

    /// Wrap a vector that is already unit length (within 1e-12).
    pub fn new(v: Vec3) -> Result<Self> {
        let n = norm(&v);
        if (n - 1.0).abs() > Self::UNIT_TOL {
            return Err(TransportError::NotUnitDirection(n));
        }
        Ok(Direction(v))
    }

    /// Normalize an arbitrary nonzero vector.
    pub fn normalized(v: Vec3) -> Result<Self> {
        let n = norm(&v);
        if !(n > 0.0) || !n.is_finite() {
            return Err(TransportError::NotUnitDirection(n));
        }
        Ok(Direction(scale(&v, 1.0 / n)))
    }

    /// Direction from polar cosine mu (against z) and azimuth phi.
    pub fn from_mu_phi(mu: f64, phi: f64) -> Self {
        let st = (1.0 - mu * mu).max(0.0).sqrt();
        Direction([st * phi.cos(), st * phi.sin(), mu])
    }

    pub fn x(&self) -> f64 {
        self.0[0]
    }

    pub fn y(&self) -> f64 {
        self.0[1]
    }

    pub fn z(&self) -> f64 {
        self.0[2]
    }

    /// Polar cosine mu = Omega_z.
    pub fn mu(&self) -> f64 {
        self.0[2]
    }

    pub fn as_array(&self) -> &Vec3 {
        &self.0
    }

    /// The antipodal direction -Omega; exact component negation.
    pub fn flipped(&self) -> Self {
        Direction([-self.0[0], -self.0[1], -self.0[2]])
    }

    pub fn dot(&self, other: &Direction) -> f64 {
        dot(&self.0, &other.0)
    }

    pub(crate) fn from_components_unchecked(v: Vec3) -> Self {
        Direction(v)
    }
}

impl TryFrom<Vec3> for Direction {
    type Error = TransportError;

    fn try_from(v: Vec3) -> Result<Self> {
        Direction::new(v)
    }
}

impl From<Direction> for Vec3 {
    fn from(d: Direction) -> Vec3 {
        d.0
    }
}
