//! Particle sources: where histories are born.

use crate::error::{Result, TransportError};
use crate::geom::Vec3;
use crate::grid::SpatialGrid;
use crate::numeric;
use rand::Rng;
use serde::{Deserialize, Serialize};

/// Emission spatial law; all sources emit isotropically in direction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum SourceSpec {
    /// Uniform rate density Q0 over the whole box [per volume per time].
    Uniform { rate_density: f64 },
    /// Point source with total emission rate Q_p.
    Point { position: Vec3, rate: f64 },
    /// Centered isotropic Gaussian profile truncated to the box,
    /// normalized so the box-integrated rate equals `rate`.
    Gaussian { width: f64, rate: f64 },
}

impl SourceSpec {
    pub fn validate(&self, grid: &SpatialGrid) -> Result<()> {
        match self {
            SourceSpec::Uniform { rate_density } => {
                if !(*rate_density > 0.0) {
                    return Err(TransportError::config(
                        "source.rate_density",
                        "total emission rate must be positive",
                    ));
                }
            }
            SourceSpec::Point { position, rate } => {
                if !(*rate > 0.0) {
                    return Err(TransportError::config("source.rate", "must be positive"));
                }
                if !grid.contains(position) {
                    return Err(TransportError::config(
                        "source.position",
                        "point source must lie inside the domain box",
                    ));
                }
            }
            SourceSpec::Gaussian { width, rate } => {
                if !(*width > 0.0) {
                    return Err(TransportError::config("source.width", "must be positive"));
                }
                if !(*rate > 0.0) {
                    return Err(TransportError::config("source.rate", "must be positive"));
                }
            }
        }
        Ok(())
    }

    /// Box-integrated emission rate.
    pub fn total_rate(&self, grid: &SpatialGrid) -> f64 {
        match self {
            SourceSpec::Uniform { rate_density } => rate_density * grid.volume(),
            SourceSpec::Point { rate, .. } | SourceSpec::Gaussian { rate, .. } => *rate,
        }
    }

    /// Emission rate density at a point inside the box.
    pub fn density(&self, x: &Vec3, grid: &SpatialGrid) -> f64 {
        match self {
            SourceSpec::Uniform { rate_density } => *rate_density,
            SourceSpec::Point { .. } => 0.0, // delta distribution
            SourceSpec::Gaussian { width, rate } => {
                let z = gaussian_box_norm(*width, grid);
                let r2 = x[0] * x[0] + x[1] * x[1] + x[2] * x[2];
                rate * (-0.5 * r2 / (width * width)).exp() / z
            }
        }
    }

    /// Cell-averaged emission density (4^3 midpoint sub-sampling).
    pub fn cell_average(&self, grid: &SpatialGrid, idx: [usize; 3]) -> f64 {
        match self {
            SourceSpec::Uniform { rate_density } => *rate_density,
            SourceSpec::Point { position, rate } => {
                if grid.locate(position) == Some(idx) {
                    rate / grid.cell_volume()
                } else {
                    0.0
                }
            }
            SourceSpec::Gaussian { .. } => {
                let c = grid.center(idx);
                let h = grid.cell_sizes();
                let mut acc = 0.0;
                for a in 0..4 {
                    for b in 0..4 {
                        for d in 0..4 {
                            let x = [
                                c[0] + h[0] * ((a as f64 + 0.5) / 4.0 - 0.5),
                                c[1] + h[1] * ((b as f64 + 0.5) / 4.0 - 0.5),
                                c[2] + h[2] * ((d as f64 + 0.5) / 4.0 - 0.5),
                            ];
                            acc += self.density(&x, grid);
                        }
                    }
                }
                acc / 64.0
            }
        }
    }

    /// Draw a birth position.
    pub fn sample_position<R: Rng>(&self, grid: &SpatialGrid, rng: &mut R) -> Vec3 {
        match self {
            SourceSpec::Uniform { .. } => {
                let hw = grid.half_widths();
                [
                    rng.gen_range(-hw[0]..hw[0]),
                    rng.gen_range(-hw[1]..hw[1]),
                    rng.gen_range(-hw[2]..hw[2]),
                ]
            }
            SourceSpec::Point { position, .. } => *position,
            SourceSpec::Gaussian { width, .. } => {
                use rand_distr::{Distribution, Normal};
                let normal = Normal::new(0.0, *width).expect("validated width");
                loop {
                    let x = [
                        normal.sample(rng),
                        normal.sample(rng),
                        normal.sample(rng),
                    ];
                    if grid.contains(&x) {
                        return x;
                    }
                }
            }
        }
    }
}

/// Integral of the centered 3-D Gaussian over the box (normalization of the
/// truncated profile).
fn gaussian_box_norm(width: f64, grid: &SpatialGrid) -> f64 {
    let hw = grid.half_widths();
    let mut z = 1.0;
    for a in 0..3 {
        let one_d = numeric::integrate_adaptive(
            |x: f64| (-0.5 * x * x / (width * width)).exp(),
            -hw[a],
            hw[a],
            1e-14,
            1e-12,
        )
        .expect("smooth bounded integrand");
        z *= one_d;
    }
    z
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    #[test]
    fn gaussian_density_normalizes_over_box() {
        let grid = SpatialGrid::new([2.0, 2.0, 2.0], [8, 8, 8]).unwrap();
        let src = SourceSpec::Gaussian {
            width: 0.7,
            rate: 3.0,
        };
        let mut total = 0.0;
        for idx in 0..grid.cells() {
            total += src.cell_average(&grid, grid.unindex(idx)) * grid.cell_volume();
        }
        assert!((total - 3.0).abs() < 1e-3, "total = {total}");
    }

    #[test]
    fn samples_stay_in_box() {
        let grid = SpatialGrid::new([1.0, 1.0, 1.0], [4, 4, 4]).unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        for src in [
            SourceSpec::Uniform { rate_density: 1.0 },
            SourceSpec::Gaussian {
                width: 2.0,
                rate: 1.0,
            },
            SourceSpec::Point {
                position: [0.2, 0.0, -0.4],
                rate: 1.0,
            },
        ] {
            src.validate(&grid).unwrap();
            for _ in 0..1000 {
                assert!(grid.contains(&src.sample_position(&grid, &mut rng)));
            }
        }
    }

    #[test]
    fn point_source_outside_box_rejected() {
        let grid = SpatialGrid::new([1.0, 1.0, 1.0], [4, 4, 4]).unwrap();
        let src = SourceSpec::Point {
            position: [2.0, 0.0, 0.0],
            rate: 1.0,
        };
        assert!(src.validate(&grid).is_err());
    }
}
