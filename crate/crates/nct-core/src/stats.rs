//! Path-length statistics: survival probability, free-path density and its
//! inverse map back to the cross section, the equilibrium path-length
//! spectrum, directional and ensemble moments, and free-path sampling.

use crate::error::{Result, TransportError};
use crate::geom::Direction;
use crate::numeric;
use crate::quadrature::AngularQuadrature;
use crate::xsection::CrossSectionModel;

/// Absolute tolerance for path-length quadratures.
pub const MOMENT_ABS_TOL: f64 = 1e-10;
/// Relative tolerance for path-length quadratures.
pub const MOMENT_REL_TOL: f64 = 1e-8;
/// Survival level defining the quadrature truncation point.
const SURVIVAL_FLOOR: f64 = 1e-12;

/// Probability of traveling `s` in direction `dir` without interacting.
pub fn survival_probability(model: &CrossSectionModel, dir: &Direction, s: f64) -> Result<f64> {
    if s < 0.0 {
        return Err(TransportError::NegativePathLength(s));
    }
    Ok(model.survival(dir, s))
}

/// Conditional density of the distance to the next collision,
/// q(Omega, s) = sigma_t(Omega, s) * exp(-optical_depth).
pub fn free_path_pdf(model: &CrossSectionModel, dir: &Direction, s: f64) -> Result<f64> {
    if s < 0.0 {
        return Err(TransportError::NegativePathLength(s));
    }
    Ok(model.free_path_density(dir, s))
}

/// A free-path distribution: density plus cdf per direction.
///
/// Backed by a cross-section model; the complement cdf is evaluated as the
/// survival probability directly, which keeps the map back to the cross
/// section free of cancellation.
#[derive(Debug, Clone, Copy)]
pub struct FreePathDistribution<'a> {
    model: &'a CrossSectionModel,
}

impl<'a> FreePathDistribution<'a> {
    pub fn new(model: &'a CrossSectionModel) -> Self {
        FreePathDistribution { model }
    }

    pub fn pdf(&self, dir: &Direction, s: f64) -> f64 {
        self.model.free_path_density(dir, s)
    }

    pub fn cdf(&self, dir: &Direction, s: f64) -> f64 {
        self.model.cdf(dir, s)
    }

    /// 1 - cdf, computed without cancellation.
    pub fn complement_cdf(&self, dir: &Direction, s: f64) -> f64 {
        self.model.survival(dir, s)
    }
}

impl<'a> From<&'a CrossSectionModel> for FreePathDistribution<'a> {
    fn from(model: &'a CrossSectionModel) -> Self {
        FreePathDistribution::new(model)
    }
}

/// Recover the cross section from a free-path distribution:
/// sigma_t = q / (1 - integral of q), the inverse of [`free_path_pdf`].
pub fn sigma_from_pdf(q: &FreePathDistribution, dir: &Direction, s: f64) -> Result<f64> {
    if s < 0.0 {
        return Err(TransportError::NegativePathLength(s));
    }
    let tail = q.complement_cdf(dir, s);
    if tail <= 1e-14 {
        return Err(TransportError::SingularTail {
            s,
            cdf: 1.0 - tail,
        });
    }
    Ok(q.pdf(dir, s) / tail)
}

/// Mean distance to collision in a given direction:
/// the integral of the survival probability over all path lengths.
pub fn mean_free_path(model: &CrossSectionModel, dir: &Direction) -> Result<f64> {
    let s0 = base_interval(model, dir);
    numeric::integrate_to_infinity(
        |s| model.survival(dir, s),
        s0,
        MOMENT_ABS_TOL,
        MOMENT_REL_TOL,
        1,
    )
}

/// Raw moment of the free-path distribution: integral of s^m q(Omega, s).
/// Only m = 1 and m = 2 enter the theory.
pub fn raw_moment(model: &CrossSectionModel, dir: &Direction, m: u32) -> Result<f64> {
    if !(1..=2).contains(&m) {
        return Err(TransportError::InvalidModel(format!(
            "raw moment order must be 1 or 2, got {m}"
        )));
    }
    if m == 1 {
        // integrate the survival function instead of s*q (integration by parts)
        return mean_free_path(model, dir);
    }
    let s0 = base_interval(model, dir);
    numeric::integrate_to_infinity(
        |s| s * s * model.free_path_density(dir, s),
        s0,
        MOMENT_ABS_TOL,
        MOMENT_REL_TOL,
        m,
    )
}

/// Equilibrium path-length spectrum chi(Omega, s) = survival / mean free path.
pub fn equilibrium_spectrum(model: &CrossSectionModel, dir: &Direction, s: f64) -> Result<f64> {
    if s < 0.0 {
        return Err(TransportError::NegativePathLength(s));
    }
    let mfp = mean_free_path(model, dir).map_err(|e| match e {
        TransportError::DivergentMoment { .. } => TransportError::NonNormalizable,
        other => other,
    })?;
    Ok(model.survival(dir, s) / mfp)
}

/// Angular probability density xi(Omega) of the travel direction, used to
/// form ensemble path-length moments. Normalized to 1 over the unit sphere.
#[derive(Debug, Clone, PartialEq)]
pub enum AngularWeight {
    /// xi = 1/(4 pi).
    Uniform,
    /// Even polynomial in mu, normalized analytically at construction.
    PolyMu { coeffs: Vec<f64>, norm: f64 },
}

impl AngularWeight {
    pub fn uniform() -> Self {
        AngularWeight::Uniform
    }

    /// Build from even polynomial coefficients p(mu) = sum c_k mu^k;
    /// the density is p(mu) / (2 pi * integral of p over mu).
    pub fn poly_mu(coeffs: Vec<f64>) -> Result<Self> {
        if coeffs.is_empty() {
            return Err(TransportError::InvalidModel(
                "angular weight needs at least one coefficient".into(),
            ));
        }
        for (k, &c) in coeffs.iter().enumerate() {
            if k % 2 == 1 && c != 0.0 {
                return Err(TransportError::InvalidModel(
                    "angular weight must be an even function of the direction of flight".into(),
                ));
            }
        }
        // integral over the sphere: 2 pi * sum c_k [mu^(k+1)/(k+1)] over [-1,1]
        let mut integral = 0.0;
        for (k, &c) in coeffs.iter().enumerate() {
            if k % 2 == 0 {
                integral += 2.0 * c / (k as f64 + 1.0);
            }
        }
        let norm = 2.0 * std::f64::consts::PI * integral;
        if !(norm > 0.0) {
            return Err(TransportError::InvalidModel(
                "angular weight polynomial must have positive integral".into(),
            ));
        }
        for i in 0..=200 {
            let mu = -1.0 + i as f64 / 100.0;
            let mut p = 0.0;
            for &c in coeffs.iter().rev() {
                p = p * mu + c;
            }
            if p < 0.0 {
                return Err(TransportError::InvalidModel(format!(
                    "angular weight polynomial is negative at mu = {mu}"
                )));
            }
        }
        Ok(AngularWeight::PolyMu { coeffs, norm })
    }

    pub fn eval(&self, dir: &Direction) -> f64 {
        match self {
            AngularWeight::Uniform => 0.25 / std::f64::consts::PI,
            AngularWeight::PolyMu { coeffs, norm } => {
                let mu = dir.mu();
                let mut p = 0.0;
                for &c in coeffs.iter().rev() {
                    p = p * mu + c;
                }
                p / norm
            }
        }
    }
}

/// Ensemble path-length moment: quadrature of xi(Omega) s^m_Omega(Omega).
pub fn ensemble_mean(
    model: &CrossSectionModel,
    xi: &AngularWeight,
    quad: &AngularQuadrature,
    m: u32,
) -> Result<f64> {
    let values = crate::exec::try_map_indexed(quad.len(), |k| {
        let dir = quad.node(k);
        Ok(xi.eval(dir) * raw_moment(model, dir, m)?)
    })?;
    Ok(quad.weighted_sum(&values))
}

/// Per-node directional moments with their ensemble means; the input to the
/// diffusion-limit machinery.
#[derive(Debug, Clone)]
pub struct DirectionalMoments {
    /// Mean free path per quadrature node.
    pub s1: Vec<f64>,
    /// Mean-squared free path per quadrature node.
    pub s2: Vec<f64>,
    /// Ensemble mean free path.
    pub s_mean: f64,
    /// Ensemble mean-squared free path.
    pub s2_mean: f64,
}

impl DirectionalMoments {
    pub fn compute(
        model: &CrossSectionModel,
        xi: &AngularWeight,
        quad: &AngularQuadrature,
    ) -> Result<Self> {
        let s1 = crate::exec::try_map_indexed(quad.len(), |k| raw_moment(model, quad.node(k), 1))?;
        let s2 = crate::exec::try_map_indexed(quad.len(), |k| raw_moment(model, quad.node(k), 2))?;
        let xi_s1: Vec<f64> = (0..quad.len())
            .map(|k| xi.eval(quad.node(k)) * s1[k])
            .collect();
        let xi_s2: Vec<f64> = (0..quad.len())
            .map(|k| xi.eval(quad.node(k)) * s2[k])
            .collect();
        Ok(DirectionalMoments {
            s_mean: quad.weighted_sum(&xi_s1),
            s2_mean: quad.weighted_sum(&xi_s2),
            s1,
            s2,
        })
    }
}

/// Draw a free path from q(Omega, .) by inverting the optical depth at
/// -ln(1 - u). The caller owns the random number stream.
pub fn sample_free_path(model: &CrossSectionModel, dir: &Direction, u: f64) -> Result<f64> {
    if !(0.0 < u && u < 1.0) {
        return Err(TransportError::UniformOutOfRange(u));
    }
    let target = -(-u).ln_1p();
    model.invert_optical_depth(dir, target)
}

/// Truncation point for [0, inf) quadratures: where survival < 1e-12.
fn base_interval(model: &CrossSectionModel, dir: &Direction) -> f64 {
    let cut = model.s_cut(dir, SURVIVAL_FLOOR);
    if cut.is_finite() && cut > 0.0 {
        cut
    } else {
        1e3 * model.length_scale(dir)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::xsection::FreePathPdf;
    use approx::assert_relative_eq;

    fn zhat() -> Direction {
        Direction::PLUS_Z
    }

    fn uniform_q() -> CrossSectionModel {
        CrossSectionModel::from_pdf(FreePathPdf::Uniform { width: 1.0 }).unwrap()
    }

    #[test]
    fn survival_examples() {
        let m = CrossSectionModel::constant(2.0).unwrap();
        let d = zhat();
        assert_relative_eq!(survival_probability(&m, &d, 0.0).unwrap(), 1.0);
        assert_relative_eq!(
            survival_probability(&m, &d, 1.0).unwrap(),
            (-2.0f64).exp(),
            epsilon = 1e-15
        );
        assert!(matches!(
            survival_probability(&m, &d, -0.1),
            Err(TransportError::NegativePathLength(_))
        ));
        // uniform q on [0,1]: survival(0.5) = 1 - 0.5
        assert_relative_eq!(
            survival_probability(&uniform_q(), &d, 0.5).unwrap(),
            0.5,
            epsilon = 1e-14
        );
    }

    #[test]
    fn pdf_at_zero_equals_sigma() {
        let m = CrossSectionModel::constant(1.7).unwrap();
        let d = zhat();
        assert_relative_eq!(free_path_pdf(&m, &d, 0.0).unwrap(), 1.7);
    }

    #[test]
    fn sigma_from_pdf_examples() {
        let d = zhat();
        let m = uniform_q();
        let q = FreePathDistribution::new(&m);
        assert_relative_eq!(sigma_from_pdf(&q, &d, 0.0).unwrap(), 1.0);
        assert_relative_eq!(sigma_from_pdf(&q, &d, 0.75).unwrap(), 4.0, epsilon = 1e-12);
        // exponential pdf recovers the constant sigma at any s
        let c = CrossSectionModel::constant(0.9).unwrap();
        let qc = FreePathDistribution::new(&c);
        for s in [0.0, 0.5, 3.0, 11.0] {
            assert_relative_eq!(sigma_from_pdf(&qc, &d, s).unwrap(), 0.9, epsilon = 1e-12);
        }
        // beyond the support the map is singular
        assert!(matches!(
            sigma_from_pdf(&q, &d, 1.0 + 1e-9),
            Err(TransportError::SingularTail { .. })
        ));
    }

    #[test]
    fn moments_constant_model() {
        let m = CrossSectionModel::constant(2.0).unwrap();
        let d = zhat();
        assert_relative_eq!(mean_free_path(&m, &d).unwrap(), 0.5, epsilon = 1e-10);
        assert_relative_eq!(raw_moment(&m, &d, 2).unwrap(), 0.5, epsilon = 1e-10);
        assert!(raw_moment(&m, &d, 3).is_err());
    }

    #[test]
    fn moments_uniform_q() {
        let m = uniform_q();
        let d = zhat();
        assert_relative_eq!(mean_free_path(&m, &d).unwrap(), 0.5, epsilon = 1e-10);
        assert_relative_eq!(raw_moment(&m, &d, 2).unwrap(), 1.0 / 3.0, epsilon = 1e-9);
    }

    #[test]
    fn mean_free_path_parity() {
        let m = CrossSectionModel::direction_modulated(
            crate::xsection::BaseProfile::LinearRamp {
                sigma0: 0.8,
                slope: 0.3,
            },
            crate::xsection::AngularModulation::try_new(vec![1.0, 0.0, 1.0], true).unwrap(),
        )
        .unwrap();
        let d = Direction::from_mu_phi(0.37, 2.1);
        let a = mean_free_path(&m, &d).unwrap();
        let b = mean_free_path(&m, &d.flipped()).unwrap();
        assert_relative_eq!(a, b, epsilon = 1e-12);
    }

    #[test]
    fn equilibrium_spectrum_examples() {
        let d = zhat();
        // constant sigma: chi = q
        let m = CrossSectionModel::constant(2.0).unwrap();
        for s in [0.0, 0.3, 1.5] {
            assert_relative_eq!(
                equilibrium_spectrum(&m, &d, s).unwrap(),
                free_path_pdf(&m, &d, s).unwrap(),
                epsilon = 1e-9
            );
        }
        // uniform q on [0,1]: chi(0.5) = (1-0.5)/0.5 = 1
        assert_relative_eq!(
            equilibrium_spectrum(&uniform_q(), &d, 0.5).unwrap(),
            1.0,
            epsilon = 1e-9
        );
    }

    #[test]
    fn chi_identity_spectrum_times_mfp_is_survival() {
        let m = uniform_q();
        let d = zhat();
        let mfp = mean_free_path(&m, &d).unwrap();
        for s in [0.0, 0.2, 0.8] {
            let chi = equilibrium_spectrum(&m, &d, s).unwrap();
            let surv = survival_probability(&m, &d, s).unwrap();
            assert_relative_eq!(chi * mfp, surv, epsilon = 1e-10);
        }
    }

    #[test]
    fn divergent_second_moment_detected() {
        let m = CrossSectionModel::from_pdf(FreePathPdf::PowerTail {
            exponent: 3.0,
            scale: 1.0,
        })
        .unwrap();
        let d = zhat();
        // mean is finite (s0/(p-2) = 1), second moment diverges
        assert_relative_eq!(mean_free_path(&m, &d).unwrap(), 1.0, max_relative = 1e-6);
        assert!(matches!(
            raw_moment(&m, &d, 2),
            Err(TransportError::DivergentMoment { order: 2, .. })
        ));
    }

    #[test]
    fn sample_free_path_closed_forms() {
        let m = CrossSectionModel::constant(2.0).unwrap();
        let d = zhat();
        for u in [0.01, 0.37, 0.99] {
            let s = sample_free_path(&m, &d, u).unwrap();
            assert_relative_eq!(s, -(1.0 - u).ln() / 2.0, epsilon = 1e-10);
        }
        assert!(sample_free_path(&m, &d, 0.0).is_err());
        assert!(sample_free_path(&m, &d, 1.0).is_err());
        // u -> 0+ gives s -> 0+
        let s = sample_free_path(&m, &d, 1e-14).unwrap();
        assert!(s > 0.0 && s < 1e-13);
    }

    #[test]
    fn exponential_iff_constant() {
        let d = zhat();
        // constant: q(s)/q(0) equals survival(s) exactly
        let c = CrossSectionModel::constant(1.3).unwrap();
        for s in [0.1, 1.0, 4.0] {
            let lhs = free_path_pdf(&c, &d, s).unwrap() / free_path_pdf(&c, &d, 0.0).unwrap();
            let rhs = survival_probability(&c, &d, s).unwrap();
            assert_relative_eq!(lhs, rhs, epsilon = 1e-14);
        }
        // s-varying model: the equality fails by a measurable margin
        let ramp = CrossSectionModel::direction_modulated(
            crate::xsection::BaseProfile::LinearRamp {
                sigma0: 1.0,
                slope: 1.0,
            },
            crate::xsection::AngularModulation::try_new(vec![1.0], false).unwrap(),
        )
        .unwrap();
        let lhs = free_path_pdf(&ramp, &d, 1.0).unwrap() / free_path_pdf(&ramp, &d, 0.0).unwrap();
        let rhs = survival_probability(&ramp, &d, 1.0).unwrap();
        assert!((lhs - rhs).abs() > 0.1);
    }
}
