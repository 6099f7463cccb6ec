//! Product quadrature on the unit sphere: Gauss–Legendre in the polar
//! cosine crossed with a uniform (trapezoidal) rule in azimuth.
//!
//! Nodes come in exact antipodal pairs with equal weights, which makes odd
//! integrands cancel to rounding and parity checks exact.

use crate::error::{Result, TransportError};
use crate::exec;
use crate::geom::{Direction, Vec3};
use crate::numeric;

/// Node/weight set over the unit sphere; weights sum to 4 pi.
#[derive(Debug, Clone)]
pub struct AngularQuadrature {
    nodes: Vec<Direction>,
    weights: Vec<f64>,
    antipode: Vec<usize>,
    n_polar: usize,
    n_azimuthal: usize,
}

impl AngularQuadrature {
    /// Build an `n_polar` x `n_azimuthal` product rule.
    ///
    /// `n_polar` must be even and `n_azimuthal` a multiple of 4 so that every
    /// node has an on-grid antipode and the azimuthal rule resolves the
    /// quadrant symmetries of second-moment integrands.
    pub fn product(n_polar: usize, n_azimuthal: usize) -> Result<Self> {
        if n_polar < 2 || n_polar % 2 != 0 {
            return Err(TransportError::config(
                "quadrature.n_polar",
                format!("must be an even integer >= 2, got {n_polar}"),
            ));
        }
        if n_azimuthal < 4 || n_azimuthal % 4 != 0 {
            return Err(TransportError::config(
                "quadrature.n_azimuthal",
                format!("must be a multiple of 4 and >= 4, got {n_azimuthal}"),
            ));
        }
        let (mu, wmu) = numeric::gauss_legendre(n_polar);
        let dphi = 2.0 * std::f64::consts::PI / n_azimuthal as f64;

        // trig factors for the first half; the second half is the exact
        // negation so antipodal pairs negate bit-for-bit
        let half = n_azimuthal / 2;
        let mut cos_phi = vec![0.0; n_azimuthal];
        let mut sin_phi = vec![0.0; n_azimuthal];
        for j in 0..half {
            let phi = dphi * j as f64;
            cos_phi[j] = phi.cos();
            sin_phi[j] = phi.sin();
            cos_phi[j + half] = -cos_phi[j];
            sin_phi[j + half] = -sin_phi[j];
        }

        let n = n_polar * n_azimuthal;
        let mut nodes = Vec::with_capacity(n);
        let mut weights = Vec::with_capacity(n);
        let mut antipode = vec![0usize; n];
        for i in 0..n_polar {
            // sin(theta) from mu^2 so mirrored polar nodes share it exactly
            let st = (1.0 - mu[i] * mu[i]).max(0.0).sqrt();
            for j in 0..n_azimuthal {
                nodes.push(Direction::from_components_unchecked([
                    st * cos_phi[j],
                    st * sin_phi[j],
                    mu[i],
                ]));
                weights.push(wmu[i] * dphi);
            }
        }
        for i in 0..n_polar {
            for j in 0..n_azimuthal {
                let k = i * n_azimuthal + j;
                antipode[k] = (n_polar - 1 - i) * n_azimuthal + (j + half) % n_azimuthal;
            }
        }
        Ok(AngularQuadrature {
            nodes,
            weights,
            antipode,
            n_polar,
            n_azimuthal,
        })
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn n_polar(&self) -> usize {
        self.n_polar
    }

    pub fn n_azimuthal(&self) -> usize {
        self.n_azimuthal
    }

    pub fn node(&self, k: usize) -> &Direction {
        &self.nodes[k]
    }

    pub fn weight(&self, k: usize) -> f64 {
        self.weights[k]
    }

    pub fn nodes(&self) -> &[Direction] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Index of the node at -Omega_k.
    pub fn antipode(&self, k: usize) -> usize {
        self.antipode[k]
    }

    /// Quadrature sum of a scalar function over the sphere.
    ///
    /// Node evaluations may run in parallel; the reduction is a fixed-order
    /// pairwise sum, so the result is independent of the worker count.
    pub fn integrate<F>(&self, f: F) -> Result<f64>
    where
        F: Fn(&Direction) -> f64 + Sync + Send,
    {
        let terms = exec::map_indexed(self.len(), |k| self.weights[k] * f(&self.nodes[k]));
        for (k, v) in terms.iter().enumerate() {
            if !v.is_finite() {
                return Err(TransportError::NonFiniteNode { index: k });
            }
        }
        Ok(numeric::pairwise_sum(&terms))
    }

    /// Quadrature sum of a vector-valued function over the sphere.
    pub fn integrate_vec<F>(&self, f: F) -> Result<Vec3>
    where
        F: Fn(&Direction) -> Vec3 + Sync + Send,
    {
        let terms = exec::map_indexed(self.len(), |k| {
            let v = f(&self.nodes[k]);
            let w = self.weights[k];
            [w * v[0], w * v[1], w * v[2]]
        });
        for (k, v) in terms.iter().enumerate() {
            if !v.iter().all(|x| x.is_finite()) {
                return Err(TransportError::NonFiniteNode { index: k });
            }
        }
        let comp = |a: usize| {
            numeric::pairwise_sum(&terms.iter().map(|t| t[a]).collect::<Vec<_>>())
        };
        Ok([comp(0), comp(1), comp(2)])
    }

    /// Sum of w_k * values[k] with fixed pairwise order.
    pub fn weighted_sum(&self, values: &[f64]) -> f64 {
        debug_assert_eq!(values.len(), self.len());
        let terms: Vec<f64> = values
            .iter()
            .zip(&self.weights)
            .map(|(v, w)| v * w)
            .collect();
        numeric::pairwise_sum(&terms)
    }
}
