//! Uniform Cartesian grid over a centered box, shared by the Monte Carlo
//! tallies, the integral solver, and the diffusion solver.

use crate::error::{Result, TransportError};
use crate::geom::Vec3;
use serde::{Deserialize, Serialize};

/// Boundary treatment of the box.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Boundary {
    /// Opposite faces identified; emulates an infinite homogeneous medium.
    Periodic,
    /// Particles leaving the box are lost.
    Vacuum,
}

/// Cell-centered uniform grid on the box [-h_a, h_a]^3.
#[derive(Debug, Clone, PartialEq)]
pub struct SpatialGrid {
    half_widths: Vec3,
    n: [usize; 3],
    cell: Vec3,
}

impl SpatialGrid {
    pub fn new(half_widths: Vec3, n: [usize; 3]) -> Result<Self> {
        for a in 0..3 {
            if !(half_widths[a] > 0.0) || !half_widths[a].is_finite() {
                return Err(TransportError::config(
                    "domain.half_widths",
                    format!("component {a} must be positive, got {}", half_widths[a]),
                ));
            }
            if n[a] == 0 {
                return Err(TransportError::config(
                    "domain.cells",
                    format!("component {a} must be at least 1"),
                ));
            }
        }
        let cells = n[0]
            .checked_mul(n[1])
            .and_then(|c| c.checked_mul(n[2]))
            .unwrap_or(usize::MAX);
        if cells > 16_000_000 {
            return Err(TransportError::config(
                "domain.cells",
                format!("cell budget exceeded: {cells} cells"),
            ));
        }
        let cell = [
            2.0 * half_widths[0] / n[0] as f64,
            2.0 * half_widths[1] / n[1] as f64,
            2.0 * half_widths[2] / n[2] as f64,
        ];
        Ok(SpatialGrid {
            half_widths,
            n,
            cell,
        })
    }

    pub fn dims(&self) -> [usize; 3] {
        self.n
    }

    pub fn cells(&self) -> usize {
        self.n[0] * self.n[1] * self.n[2]
    }

    pub fn half_widths(&self) -> Vec3 {
        self.half_widths
    }

    pub fn lengths(&self) -> Vec3 {
        [
            2.0 * self.half_widths[0],
            2.0 * self.half_widths[1],
            2.0 * self.half_widths[2],
        ]
    }

    pub fn cell_sizes(&self) -> Vec3 {
        self.cell
    }

    pub fn cell_volume(&self) -> f64 {
        self.cell[0] * self.cell[1] * self.cell[2]
    }

    pub fn volume(&self) -> f64 {
        self.lengths().iter().product()
    }

    pub fn min_corner(&self) -> Vec3 {
        [
            -self.half_widths[0],
            -self.half_widths[1],
            -self.half_widths[2],
        ]
    }

    /// Flat index with z fastest: ((ix * ny) + iy) * nz + iz.
    pub fn index(&self, i: [usize; 3]) -> usize {
        (i[0] * self.n[1] + i[1]) * self.n[2] + i[2]
    }

    pub fn unindex(&self, idx: usize) -> [usize; 3] {
        let iz = idx % self.n[2];
        let rest = idx / self.n[2];
        let iy = rest % self.n[1];
        let ix = rest / self.n[1];
        [ix, iy, iz]
    }

    pub fn center(&self, i: [usize; 3]) -> Vec3 {
        [
            -self.half_widths[0] + (i[0] as f64 + 0.5) * self.cell[0],
            -self.half_widths[1] + (i[1] as f64 + 0.5) * self.cell[1],
            -self.half_widths[2] + (i[2] as f64 + 0.5) * self.cell[2],
        ]
    }

    /// Cell containing `x`, or None if outside the box.
    pub fn locate(&self, x: &Vec3) -> Option<[usize; 3]> {
        let mut idx = [0usize; 3];
        for a in 0..3 {
            let t = (x[a] + self.half_widths[a]) / self.cell[a];
            if t < 0.0 {
                return None;
            }
            let i = t as usize;
            if i >= self.n[a] {
                // accept points sitting exactly on the upper face
                if x[a] <= self.half_widths[a] {
                    idx[a] = self.n[a] - 1;
                    continue;
                }
                return None;
            }
            idx[a] = i;
        }
        Some(idx)
    }

    pub fn contains(&self, x: &Vec3) -> bool {
        (0..3).all(|a| x[a].abs() <= self.half_widths[a])
    }
}
