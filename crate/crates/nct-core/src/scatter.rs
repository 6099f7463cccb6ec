//! Scattering: the phase function as a Legendre expansion, the combined
//! scatter/absorption kernel, cosine sampling, and direction rotation.

use crate::error::{Result, TransportError};
use crate::geom::{cross, Direction};
use crate::numeric;

const FOUR_PI: f64 = 4.0 * std::f64::consts::PI;

/// Number of intervals in the tabulated cosine cdf used for sampling.
pub const CDF_TABLE_SIZE: usize = 4096;

/// Phase function P(mu0) as Legendre coefficients a_0..a_N with a_0 = 1.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseFunction {
    coeffs: Vec<f64>,
}

impl PhaseFunction {
    /// Hard cap on the expansion order.
    pub const MAX_ORDER: usize = 32;
    /// Truncated expansions may dip slightly negative; reject below this.
    pub const POSITIVITY_TOL: f64 = -1e-12;

    pub fn new(coeffs: Vec<f64>) -> Result<Self> {
        if coeffs.is_empty() {
            return Err(TransportError::InvalidModel(
                "phase function needs at least the a_0 coefficient".into(),
            ));
        }
        if coeffs.len() - 1 > Self::MAX_ORDER {
            return Err(TransportError::InvalidModel(format!(
                "phase-function order {} exceeds the cap {}",
                coeffs.len() - 1,
                Self::MAX_ORDER
            )));
        }
        if (coeffs[0] - 1.0).abs() > 1e-12 {
            return Err(TransportError::InvalidModel(format!(
                "a_0 must equal 1 (normalization), got {}",
                coeffs[0]
            )));
        }
        if coeffs.iter().any(|c| !c.is_finite()) {
            return Err(TransportError::InvalidModel(
                "phase-function coefficients must be finite".into(),
            ));
        }
        let pf = PhaseFunction { coeffs };
        // positivity scan on a Chebyshev grid; truncations can oscillate
        for j in 0..1001usize {
            let mu = (std::f64::consts::PI * j as f64 / 1000.0).cos();
            let v = pf.eval(mu);
            if v < Self::POSITIVITY_TOL {
                return Err(TransportError::InvalidModel(format!(
                    "phase function is negative at mu0 = {mu:.6} (value {v:.3e}); \
                     sampling needs a true density"
                )));
            }
        }
        Ok(pf)
    }

    pub fn isotropic() -> Self {
        PhaseFunction { coeffs: vec![1.0] }
    }

    /// P(mu0) = sum_n (2n+1)/(4 pi) a_n P_n(mu0) by stable recurrence.
    pub fn eval(&self, mu0: f64) -> f64 {
        eval_legendre_series(&self.coeffs, mu0)
    }

    /// Mean scattering cosine, a_1.
    pub fn mean_cosine(&self) -> f64 {
        self.coeffs.get(1).copied().unwrap_or(0.0)
    }

    pub fn order(&self) -> usize {
        self.coeffs.len() - 1
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn is_isotropic(&self) -> bool {
        self.coeffs.iter().skip(1).all(|&a| a == 0.0)
    }
}

fn eval_legendre_series(coeffs: &[f64], mu0: f64) -> f64 {
    let mut p_prev = 1.0; // P_0
    let mut acc = coeffs[0] / FOUR_PI;
    if coeffs.len() == 1 {
        return acc;
    }
    let mut p = mu0; // P_1
    acc += 3.0 * coeffs[1] * p / FOUR_PI;
    for (n, &a) in coeffs.iter().enumerate().skip(2) {
        let nf = n as f64;
        let p_next = ((2.0 * nf - 1.0) * mu0 * p - (nf - 1.0) * p_prev) / nf;
        p_prev = p;
        p = p_next;
        acc += (2.0 * nf + 1.0) * a * p / FOUR_PI;
    }
    acc
}

/// Combined collision kernel P*(mu0) = c P(mu0) + (1 - c)/(4 pi),
/// with Legendre coefficients a*_0 = 1 and a*_n = c a_n for n >= 1.
#[derive(Debug, Clone, PartialEq)]
pub struct ScatteringKernel {
    coeffs: Vec<f64>,
    c: f64,
}

/// Build the combined kernel for scattering probability `c`.
pub fn build_pstar(pf: &PhaseFunction, c: f64) -> Result<ScatteringKernel> {
    if !(0.0..=1.0).contains(&c) {
        return Err(TransportError::config(
            "c",
            format!("scattering probability must lie in [0, 1], got {c}"),
        ));
    }
    let mut coeffs: Vec<f64> = pf.coeffs().iter().map(|&a| c * a).collect();
    coeffs[0] = 1.0;
    Ok(ScatteringKernel { coeffs, c })
}

impl ScatteringKernel {
    pub fn eval(&self, mu0: f64) -> f64 {
        eval_legendre_series(&self.coeffs, mu0)
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn c(&self) -> f64 {
        self.c
    }

    /// a*_1 = c * mean scattering cosine.
    pub fn c_mu_bar(&self) -> f64 {
        self.coeffs.get(1).copied().unwrap_or(0.0)
    }

    pub fn is_isotropic(&self) -> bool {
        self.coeffs.iter().skip(1).all(|&a| a == 0.0)
    }
}

/// Tabulated cdf of 2 pi P(mu0) for inverse-cdf cosine sampling.
#[derive(Debug, Clone)]
pub struct CosineTable {
    cdf: Vec<f64>, // CDF_TABLE_SIZE + 1 entries on the uniform mu grid
}

impl CosineTable {
    pub fn build(pf: &PhaseFunction) -> Result<Self> {
        Self::build_sized(pf, CDF_TABLE_SIZE)
    }

    /// Table with an explicit interval count (used by refinement tests).
    pub fn build_sized(pf: &PhaseFunction, intervals: usize) -> Result<Self> {
        // 17-point Gauss rule per interval: exact for the polynomial density
        let (gx, gw) = numeric::gauss_legendre(17);
        let dmu = 2.0 / intervals as f64;
        let mut cdf = vec![0.0; intervals + 1];
        for i in 0..intervals {
            let a = -1.0 + i as f64 * dmu;
            let mid = a + 0.5 * dmu;
            let mut mass = 0.0;
            for (x, w) in gx.iter().zip(&gw) {
                mass += w * 2.0 * std::f64::consts::PI * pf.eval(mid + 0.5 * dmu * x);
            }
            mass *= 0.5 * dmu;
            cdf[i + 1] = cdf[i] + mass.max(0.0);
        }
        let total = cdf[intervals];
        if (total - 1.0).abs() > 1e-10 {
            return Err(TransportError::InvalidModel(format!(
                "phase function integrates to {total}, expected 1"
            )));
        }
        for v in cdf.iter_mut() {
            *v /= total;
        }
        Ok(CosineTable { cdf })
    }

    /// Inverse-cdf lookup with linear interpolation.
    pub fn sample(&self, u: f64) -> f64 {
        let n = self.cdf.len() - 1;
        let dmu = 2.0 / n as f64;
        let u = u.clamp(0.0, 1.0);
        let k = match self.cdf.partition_point(|&c| c <= u) {
            0 => 0,
            j => (j - 1).min(n - 1),
        };
        let mass = self.cdf[k + 1] - self.cdf[k];
        let frac = if mass > 0.0 {
            (u - self.cdf[k]) / mass
        } else {
            0.5
        };
        (-1.0 + (k as f64 + frac) * dmu).clamp(-1.0, 1.0)
    }
}

/// Draw a scattering cosine from P(mu0). Builds a throwaway table; hot loops
/// should build a [`CosineTable`] once and call `sample` on it.
pub fn sample_scatter_cosine(pf: &PhaseFunction, u: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&u) {
        return Err(TransportError::UniformOutOfRange(u));
    }
    Ok(CosineTable::build(pf)?.sample(u))
}

/// Rotate `incoming` to a new direction with scattering cosine `mu0` and
/// azimuth `phi` about the incoming axis. For incoming = +z, mu0 = 0,
/// phi = 0 the result is +x.
pub fn rotate_direction(incoming: &Direction, mu0: f64, phi: f64) -> Direction {
    let w = incoming.as_array();
    let rho2 = w[0] * w[0] + w[1] * w[1];
    let (u, v) = if rho2 > 1e-16 {
        // u = normalize(z x w), v = w x u
        let rho = rho2.sqrt();
        let u = [-w[1] / rho, w[0] / rho, 0.0];
        (u, cross(w, &u))
    } else {
        // flight along +-z: pick the x axis as reference azimuth
        let u = [1.0, 0.0, 0.0];
        (u, cross(w, &u))
    };
    let st = ((1.0 - mu0) * (1.0 + mu0)).max(0.0).sqrt();
    let (sp, cp) = phi.sin_cos();
    let out = [
        mu0 * w[0] + st * (cp * u[0] + sp * v[0]),
        mu0 * w[1] + st * (cp * u[1] + sp * v[1]),
        mu0 * w[2] + st * (cp * u[2] + sp * v[2]),
    ];
    Direction::normalized(out).expect("rotation preserves unit norm")
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use std::f64::consts::PI;

    #[test]
    fn isotropic_value() {
        let pf = PhaseFunction::isotropic();
        for mu0 in [-1.0, -0.3, 0.0, 0.9] {
            assert_relative_eq!(pf.eval(mu0), 1.0 / (4.0 * PI), epsilon = 1e-15);
        }
    }

    #[test]
    fn linear_phase_value() {
        let pf = PhaseFunction::new(vec![1.0, 0.5]).unwrap();
        assert_relative_eq!(
            pf.eval(1.0),
            2.5 / (4.0 * PI),
            epsilon = 1e-14
        );
    }

    #[test]
    fn normalization_by_series_quadrature() {
        let pf = PhaseFunction::new(vec![1.0, 0.3, 0.1]).unwrap();
        // 2 pi * integral over mu0 of P = a_0 = 1 by orthogonality
        let (gx, gw) = numeric::gauss_legendre(40);
        let total: f64 = gx
            .iter()
            .zip(&gw)
            .map(|(x, w)| w * 2.0 * PI * pf.eval(*x))
            .sum();
        assert_relative_eq!(total, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn constructor_rejections() {
        assert!(PhaseFunction::new(vec![]).is_err());
        assert!(PhaseFunction::new(vec![0.9]).is_err()); // a_0 != 1
        assert!(PhaseFunction::new(vec![1.0; 35]).is_err()); // order cap
        assert!(PhaseFunction::new(vec![1.0, 1.2]).is_err()); // negative lobe
    }

    #[test]
    fn pstar_coefficient_map() {
        let pf = PhaseFunction::new(vec![1.0, 0.6]).unwrap();
        let k = build_pstar(&pf, 0.9).unwrap();
        assert_relative_eq!(k.coeffs()[0], 1.0);
        assert_relative_eq!(k.coeffs()[1], 0.54, epsilon = 1e-15);
        // pointwise: P* = c P + (1-c)/4pi
        for mu0 in [-0.8, 0.0, 0.5, 1.0] {
            assert_relative_eq!(
                k.eval(mu0),
                0.9 * pf.eval(mu0) + 0.1 / (4.0 * PI),
                epsilon = 1e-12
            );
        }
        // limits
        let k1 = build_pstar(&pf, 1.0).unwrap();
        assert_eq!(k1.coeffs(), pf.coeffs());
        let k0 = build_pstar(&pf, 0.0).unwrap();
        assert!(k0.is_isotropic());
        assert!(build_pstar(&pf, 1.2).is_err());
    }

    #[test]
    fn pstar_first_moment_orthogonality() {
        // 2 pi * integral of mu' P*(mu') dmu' = c * mu_bar
        let pf = PhaseFunction::new(vec![1.0, 0.4, 0.2]).unwrap();
        let k = build_pstar(&pf, 0.7).unwrap();
        let (gx, gw) = numeric::gauss_legendre(40);
        let m: f64 = gx
            .iter()
            .zip(&gw)
            .map(|(x, w)| w * 2.0 * PI * x * k.eval(*x))
            .sum();
        assert_relative_eq!(m, 0.7 * 0.4, epsilon = 1e-10);
    }

    #[test]
    fn isotropic_sampling_is_linear_in_u() {
        let table = CosineTable::build(&PhaseFunction::isotropic()).unwrap();
        for u in [0.0, 0.25, 0.5, 0.77, 1.0] {
            assert_relative_eq!(table.sample(u), 2.0 * u - 1.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn symmetric_phase_median_is_zero() {
        let pf = PhaseFunction::new(vec![1.0, 0.0, 0.3]).unwrap();
        let table = CosineTable::build(&pf).unwrap();
        assert!(table.sample(0.5).abs() < 2.0 / CDF_TABLE_SIZE as f64);
    }

    #[test]
    fn sample_mean_matches_mean_cosine() {
        use rand::{Rng, SeedableRng};
        let pf = PhaseFunction::new(vec![1.0, 0.4]).unwrap();
        let table = CosineTable::build(&pf).unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        let n = 1_000_000;
        let mean: f64 = (0..n).map(|_| table.sample(rng.gen())).sum::<f64>() / n as f64;
        assert!((mean - 0.4).abs() < 0.002, "mean = {mean}");
    }

    #[test]
    fn table_refinement_is_converged() {
        // doubling the table size barely moves the sampled quantiles
        let pf = PhaseFunction::new(vec![1.0, 0.5, 0.2]).unwrap();
        let t1 = CosineTable::build_sized(&pf, CDF_TABLE_SIZE).unwrap();
        let t2 = CosineTable::build_sized(&pf, 2 * CDF_TABLE_SIZE).unwrap();
        let mut worst: f64 = 0.0;
        for i in 1..1000 {
            let u = i as f64 / 1000.0;
            worst = worst.max((t1.sample(u) - t2.sample(u)).abs());
        }
        assert!(worst < 1e-3, "quantile shift {worst}");
    }

    #[test]
    fn rotation_contract() {
        use rand::{Rng, SeedableRng};
        let z = Direction::PLUS_Z;
        // forward, backward, and the explicit frame convention
        assert_relative_eq!(rotate_direction(&z, 1.0, 2.0).z(), 1.0, epsilon = 1e-12);
        assert_relative_eq!(rotate_direction(&z, -1.0, 0.3).z(), -1.0, epsilon = 1e-12);
        let x = rotate_direction(&z, 0.0, 0.0);
        assert_relative_eq!(x.x(), 1.0, epsilon = 1e-12);
        assert!(x.y().abs() < 1e-12 && x.z().abs() < 1e-12);

        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        for _ in 0..100_000 {
            let w = Direction::from_mu_phi(
                rng.gen_range(-1.0..1.0),
                rng.gen_range(0.0..2.0 * PI),
            );
            let mu0: f64 = rng.gen_range(-1.0..1.0);
            let phi: f64 = rng.gen_range(0.0..2.0 * PI);
            let out = rotate_direction(&w, mu0, phi);
            let n = out.as_array();
            let norm2 = n[0] * n[0] + n[1] * n[1] + n[2] * n[2];
            assert!((norm2 - 1.0).abs() < 1e-12);
            assert!((w.dot(&out) - mu0).abs() < 1e-12);
        }
    }
}
