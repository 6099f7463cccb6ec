//! Cross-section models: the total interaction rate as a function of the
//! direction of flight and the path length traveled since the last event.
//!
//! Every model exposes the cumulative optical depth along a ray, which fixes
//! the survival probability, the free-path density, and free-path sampling.
//! All supported models are even in the direction of flight: the interaction
//! rate seen traveling along `Omega` equals the rate along `-Omega`.

use crate::error::{Result, TransportError};
use crate::geom::Direction;
use crate::numeric;

/// Tabulated models extrapolate with the final cross-section value up to
/// this multiple of the table range; beyond it sampling reports overflow.
pub const EXTRAPOLATION_FACTOR: f64 = 10.0;

/// Number of grid points used for positivity / evenness validation scans.
const VALIDATION_GRID: usize = 1001;

/// Path-length profile of the cross section, before angular modulation.
#[derive(Debug, Clone, PartialEq)]
pub enum BaseProfile {
    /// Sigma independent of path length.
    Constant { sigma: f64 },
    /// Sigma grows linearly with path length: sigma0 + slope * s.
    LinearRamp { sigma0: f64, slope: f64 },
}

impl BaseProfile {
    pub fn validate(&self) -> Result<()> {
        match *self {
            BaseProfile::Constant { sigma } => {
                if !(sigma > 0.0) || !sigma.is_finite() {
                    return Err(TransportError::InvalidModel(format!(
                        "constant cross section must be positive and finite, got {sigma}"
                    )));
                }
            }
            BaseProfile::LinearRamp { sigma0, slope } => {
                if !(sigma0 > 0.0) || !sigma0.is_finite() {
                    return Err(TransportError::InvalidModel(format!(
                        "ramp base cross section must be positive, got {sigma0}"
                    )));
                }
                if !(slope >= 0.0) || !slope.is_finite() {
                    return Err(TransportError::InvalidModel(format!(
                        "ramp slope must be nonnegative so the cross section stays positive, got {slope}"
                    )));
                }
            }
        }
        Ok(())
    }

    fn sigma(&self, s: f64) -> f64 {
        match *self {
            BaseProfile::Constant { sigma } => sigma,
            BaseProfile::LinearRamp { sigma0, slope } => sigma0 + slope * s,
        }
    }

    fn optical_depth(&self, s: f64) -> f64 {
        match *self {
            BaseProfile::Constant { sigma } => sigma * s,
            BaseProfile::LinearRamp { sigma0, slope } => s * (sigma0 + 0.5 * slope * s),
        }
    }

    /// Solve optical_depth(s) = t for s >= 0 (closed form).
    fn invert_optical_depth(&self, t: f64) -> f64 {
        match *self {
            BaseProfile::Constant { sigma } => t / sigma,
            BaseProfile::LinearRamp { sigma0, slope } => {
                if slope == 0.0 {
                    t / sigma0
                } else {
                    // stable root of (slope/2) s^2 + sigma0 s - t = 0
                    2.0 * t / (sigma0 + (sigma0 * sigma0 + 2.0 * slope * t).sqrt())
                }
            }
        }
    }
}

/// Even angular modulation m(Omega) applied multiplicatively to a base
/// profile. Stored as polynomial coefficients in mu = Omega_z; `inverse`
/// selects m = 1/p(mu) instead of m = p(mu).
#[derive(Debug, Clone, PartialEq)]
pub struct AngularModulation {
    coeffs: Vec<f64>,
    inverse: bool,
}

impl AngularModulation {
    /// Build from polynomial coefficients c_k of p(mu) = sum c_k mu^k.
    ///
    /// Odd coefficients are rejected: the mean free path in direction Omega
    /// must equal the one in -Omega, so only even content is admitted.
    pub fn try_new(coeffs: Vec<f64>, inverse: bool) -> Result<Self> {
        if coeffs.is_empty() {
            return Err(TransportError::InvalidModel(
                "angular modulation needs at least one coefficient".into(),
            ));
        }
        for (k, &c) in coeffs.iter().enumerate() {
            if !c.is_finite() {
                return Err(TransportError::InvalidModel(format!(
                    "angular modulation coefficient {k} is not finite"
                )));
            }
            if k % 2 == 1 && c != 0.0 {
                return Err(TransportError::InvalidModel(format!(
                    "angular modulation has odd mu^{k} content ({c}); \
                     the modulation must be an even function of the direction of flight"
                )));
            }
        }
        let m = AngularModulation { coeffs, inverse };
        for i in 0..VALIDATION_GRID {
            let mu = -1.0 + 2.0 * i as f64 / (VALIDATION_GRID - 1) as f64;
            let p = m.poly(mu);
            if !(p > 0.0) {
                return Err(TransportError::InvalidModel(format!(
                    "angular modulation polynomial is not positive at mu = {mu} (value {p})"
                )));
            }
        }
        Ok(m)
    }

    fn poly(&self, mu: f64) -> f64 {
        let mut acc = 0.0;
        for &c in self.coeffs.iter().rev() {
            acc = acc * mu + c;
        }
        acc
    }

    pub fn eval_mu(&self, mu: f64) -> f64 {
        let p = self.poly(mu);
        if self.inverse {
            1.0 / p
        } else {
            p
        }
    }

    pub fn eval(&self, dir: &Direction) -> f64 {
        self.eval_mu(dir.mu())
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn is_inverse(&self) -> bool {
        self.inverse
    }
}

/// Cumulative optical depth tabulated on an increasing s-grid.
///
/// Between grid points the optical depth is linear (piecewise-constant
/// cross section); beyond the last point the final slope is held.
#[derive(Debug, Clone, PartialEq)]
pub struct OdTable {
    s: Vec<f64>,
    od: Vec<f64>,
}

impl OdTable {
    pub fn try_new(s: Vec<f64>, od: Vec<f64>) -> Result<Self> {
        if s.len() != od.len() || s.len() < 2 {
            return Err(TransportError::InvalidModel(
                "optical-depth table needs matching s/value columns with at least 2 rows".into(),
            ));
        }
        if s[0] != 0.0 || od[0] != 0.0 {
            return Err(TransportError::InvalidModel(
                "optical-depth table must start at (s, value) = (0, 0)".into(),
            ));
        }
        for i in 1..s.len() {
            if !(s[i] > s[i - 1]) {
                return Err(TransportError::InvalidModel(format!(
                    "table s-grid must be strictly increasing (row {i})"
                )));
            }
            if !(od[i] >= od[i - 1]) || !od[i].is_finite() {
                return Err(TransportError::InvalidModel(format!(
                    "optical depth must be finite and nondecreasing (row {i}); \
                     a decreasing value would mean a negative cross section"
                )));
            }
        }
        Ok(OdTable { s, od })
    }

    pub fn end_s(&self) -> f64 {
        *self.s.last().unwrap()
    }

    fn last_slope(&self) -> f64 {
        let n = self.s.len();
        (self.od[n - 1] - self.od[n - 2]) / (self.s[n - 1] - self.s[n - 2])
    }

    fn od_at(&self, s: f64) -> f64 {
        let n = self.s.len();
        if s >= self.s[n - 1] {
            return self.od[n - 1] + self.last_slope() * (s - self.s[n - 1]);
        }
        let i = match self.s.partition_point(|&x| x <= s) {
            0 => 0,
            k => k - 1,
        };
        let frac = (s - self.s[i]) / (self.s[i + 1] - self.s[i]);
        self.od[i] + frac * (self.od[i + 1] - self.od[i])
    }

    fn sigma_at(&self, s: f64) -> f64 {
        let n = self.s.len();
        if s >= self.s[n - 1] {
            return self.last_slope();
        }
        let i = match self.s.partition_point(|&x| x <= s) {
            0 => 0,
            k => k - 1,
        };
        (self.od[i + 1] - self.od[i]) / (self.s[i + 1] - self.s[i])
    }
}

/// Azimuthally symmetric tables: one optical-depth table per |mu| node,
/// interpolated linearly in |mu|. Evenness in Omega is automatic.
#[derive(Debug, Clone, PartialEq)]
pub struct TabulatedOd {
    mu_nodes: Vec<f64>,
    tables: Vec<OdTable>,
}

impl TabulatedOd {
    pub fn try_new(mu_nodes: Vec<f64>, tables: Vec<OdTable>) -> Result<Self> {
        if mu_nodes.is_empty() || mu_nodes.len() != tables.len() {
            return Err(TransportError::InvalidModel(
                "tabulated model needs one table per mu node".into(),
            ));
        }
        for (i, &mu) in mu_nodes.iter().enumerate() {
            if !(0.0..=1.0).contains(&mu) {
                return Err(TransportError::InvalidModel(format!(
                    "mu node {i} = {mu} outside [0, 1]; tables are indexed by |mu|"
                )));
            }
            if i > 0 && mu <= mu_nodes[i - 1] {
                return Err(TransportError::InvalidModel(
                    "mu nodes must be strictly increasing".into(),
                ));
            }
        }
        Ok(TabulatedOd { mu_nodes, tables })
    }

    /// Bracketing node indices and interpolation weight for |mu|.
    fn locate(&self, mu: f64) -> (usize, usize, f64) {
        let a = mu.abs().min(1.0);
        let n = self.mu_nodes.len();
        if n == 1 || a <= self.mu_nodes[0] {
            return (0, 0, 0.0);
        }
        if a >= self.mu_nodes[n - 1] {
            return (n - 1, n - 1, 0.0);
        }
        let hi = self.mu_nodes.partition_point(|&x| x <= a);
        let lo = hi - 1;
        let w = (a - self.mu_nodes[lo]) / (self.mu_nodes[hi] - self.mu_nodes[lo]);
        (lo, hi, w)
    }

    fn od(&self, mu: f64, s: f64) -> f64 {
        let (lo, hi, w) = self.locate(mu);
        if lo == hi {
            self.tables[lo].od_at(s)
        } else {
            (1.0 - w) * self.tables[lo].od_at(s) + w * self.tables[hi].od_at(s)
        }
    }

    fn sigma(&self, mu: f64, s: f64) -> f64 {
        let (lo, hi, w) = self.locate(mu);
        if lo == hi {
            self.tables[lo].sigma_at(s)
        } else {
            (1.0 - w) * self.tables[lo].sigma_at(s) + w * self.tables[hi].sigma_at(s)
        }
    }

    fn max_end_s(&self) -> f64 {
        self.tables.iter().map(|t| t.end_s()).fold(0.0, f64::max)
    }
}

/// Free-path density supplied directly (direction independent).
#[derive(Debug, Clone, PartialEq)]
pub enum FreePathPdf {
    /// q uniform on [0, width].
    Uniform { width: f64 },
    /// q(s) = (p-1) s0^(p-1) / (s + s0)^p, an algebraic tail ~ s^(-p).
    PowerTail { exponent: f64, scale: f64 },
    /// Piecewise-linear tabulated q.
    Table(QTable),
}

impl FreePathPdf {
    pub fn validate(&self) -> Result<()> {
        match self {
            FreePathPdf::Uniform { width } => {
                if !(*width > 0.0) || !width.is_finite() {
                    return Err(TransportError::InvalidModel(format!(
                        "uniform free-path width must be positive, got {width}"
                    )));
                }
            }
            FreePathPdf::PowerTail { exponent, scale } => {
                if !(*exponent > 1.0) {
                    return Err(TransportError::InvalidModel(format!(
                        "power-tail exponent must exceed 1 for a normalizable pdf, got {exponent}"
                    )));
                }
                if !(*scale > 0.0) {
                    return Err(TransportError::InvalidModel(format!(
                        "power-tail scale must be positive, got {scale}"
                    )));
                }
            }
            FreePathPdf::Table(_) => {}
        }
        Ok(())
    }

    fn pdf(&self, s: f64) -> f64 {
        match self {
            FreePathPdf::Uniform { width } => {
                if s <= *width {
                    1.0 / width
                } else {
                    0.0
                }
            }
            FreePathPdf::PowerTail { exponent, scale } => {
                (exponent - 1.0) * scale.powf(exponent - 1.0) / (s + scale).powf(*exponent)
            }
            FreePathPdf::Table(t) => t.pdf_at(s),
        }
    }

    fn optical_depth(&self, s: f64) -> f64 {
        match self {
            FreePathPdf::Uniform { width } => {
                if s < *width {
                    -(-s / width).ln_1p()
                } else {
                    f64::INFINITY
                }
            }
            FreePathPdf::PowerTail { exponent, scale } => (exponent - 1.0) * (s / scale).ln_1p(),
            FreePathPdf::Table(t) => t.od_at(s),
        }
    }

    fn sigma(&self, s: f64) -> f64 {
        match self {
            FreePathPdf::Uniform { width } => {
                if s < *width {
                    1.0 / (width - s)
                } else {
                    f64::INFINITY
                }
            }
            FreePathPdf::PowerTail { exponent, scale } => (exponent - 1.0) / (s + scale),
            FreePathPdf::Table(t) => t.sigma_at(s),
        }
    }

    fn invert_optical_depth(&self, t: f64) -> Result<f64> {
        match self {
            FreePathPdf::Uniform { width } => Ok(width * (-(-t).exp_m1())),
            FreePathPdf::PowerTail { exponent, scale } => {
                Ok(scale * (t / (exponent - 1.0)).exp_m1())
            }
            FreePathPdf::Table(tab) => tab.invert_od(t),
        }
    }

    fn max_optical_depth(&self) -> f64 {
        match self {
            FreePathPdf::Uniform { .. } | FreePathPdf::PowerTail { .. } => f64::INFINITY,
            FreePathPdf::Table(t) => t.max_od(),
        }
    }
}

/// Tabulated free-path density with its integrated cdf.
///
/// Input tables are required to be normalized within 1e-6 and are then
/// renormalized exactly; the applied factor is kept for reporting.
#[derive(Debug, Clone, PartialEq)]
pub struct QTable {
    s: Vec<f64>,
    q: Vec<f64>,
    cdf: Vec<f64>,
    renormalization: f64,
}

impl QTable {
    pub const NORMALIZATION_TOL: f64 = 1e-6;

    pub fn try_new(s: Vec<f64>, q: Vec<f64>) -> Result<Self> {
        if s.len() != q.len() || s.len() < 2 {
            return Err(TransportError::InvalidModel(
                "free-path table needs matching s/q columns with at least 2 rows".into(),
            ));
        }
        if s[0] != 0.0 {
            return Err(TransportError::InvalidModel(
                "free-path table must start at s = 0".into(),
            ));
        }
        for i in 0..s.len() {
            if !(q[i] >= 0.0) || !q[i].is_finite() {
                return Err(TransportError::InvalidModel(format!(
                    "free-path density must be finite and nonnegative (row {i})"
                )));
            }
            if i > 0 && !(s[i] > s[i - 1]) {
                return Err(TransportError::InvalidModel(format!(
                    "table s-grid must be strictly increasing (row {i})"
                )));
            }
        }
        let mut cdf = vec![0.0; s.len()];
        for i in 1..s.len() {
            cdf[i] = cdf[i - 1] + 0.5 * (q[i] + q[i - 1]) * (s[i] - s[i - 1]);
        }
        let total = cdf[s.len() - 1];
        if (total - 1.0).abs() > Self::NORMALIZATION_TOL {
            return Err(TransportError::InvalidModel(format!(
                "free-path table integrates to {total}, outside the {} normalization tolerance",
                Self::NORMALIZATION_TOL
            )));
        }
        let factor = 1.0 / total;
        let q: Vec<f64> = q.iter().map(|v| v * factor).collect();
        let mut cdf: Vec<f64> = cdf.iter().map(|v| v * factor).collect();
        let n = cdf.len();
        cdf[n - 1] = 1.0;
        log::info!("free-path table renormalized by factor {factor:.12}");
        Ok(QTable {
            s,
            q,
            cdf,
            renormalization: factor,
        })
    }

    /// Factor applied to the supplied q values to normalize the table.
    pub fn renormalization(&self) -> f64 {
        self.renormalization
    }

    fn segment(&self, s: f64) -> usize {
        match self.s.partition_point(|&x| x <= s) {
            0 => 0,
            k => (k - 1).min(self.s.len() - 2),
        }
    }

    fn pdf_at(&self, s: f64) -> f64 {
        if s > *self.s.last().unwrap() {
            return 0.0;
        }
        let i = self.segment(s);
        let frac = (s - self.s[i]) / (self.s[i + 1] - self.s[i]);
        self.q[i] + frac * (self.q[i + 1] - self.q[i])
    }

    fn cdf_at(&self, s: f64) -> f64 {
        if s >= *self.s.last().unwrap() {
            return 1.0;
        }
        let i = self.segment(s);
        let ds = s - self.s[i];
        let slope = (self.q[i + 1] - self.q[i]) / (self.s[i + 1] - self.s[i]);
        (self.cdf[i] + ds * (self.q[i] + 0.5 * slope * ds)).min(1.0)
    }

    fn od_at(&self, s: f64) -> f64 {
        let c = self.cdf_at(s);
        if c >= 1.0 {
            f64::INFINITY
        } else {
            -(-c).ln_1p()
        }
    }

    fn sigma_at(&self, s: f64) -> f64 {
        let c = self.cdf_at(s);
        if c >= 1.0 {
            f64::INFINITY
        } else {
            self.pdf_at(s) / (1.0 - c)
        }
    }

    fn max_od(&self) -> f64 {
        f64::INFINITY // cdf reaches 1 at the table end, so any depth is reachable
    }

    /// Solve od(s) = t, i.e. cdf(s) = 1 - exp(-t), within the table.
    fn invert_od(&self, t: f64) -> Result<f64> {
        let target = -(-t).exp_m1();
        let k = self.cdf.partition_point(|&c| c < target);
        if k == 0 {
            return Ok(0.0);
        }
        let n = self.s.len();
        if k >= n {
            return Ok(self.s[n - 1]);
        }
        let i = k - 1;
        // quadratic cdf on the segment: cdf_i + q_i u + slope u^2 / 2 = target
        let h = self.s[i + 1] - self.s[i];
        let slope = (self.q[i + 1] - self.q[i]) / h;
        let rhs = target - self.cdf[i];
        let u = if slope.abs() < 1e-300 {
            if self.q[i] > 0.0 {
                rhs / self.q[i]
            } else {
                h
            }
        } else {
            let disc = (self.q[i] * self.q[i] + 2.0 * slope * rhs).max(0.0);
            if slope > 0.0 {
                2.0 * rhs / (self.q[i] + disc.sqrt())
            } else {
                (disc.sqrt() - self.q[i]) / slope
            }
        };
        Ok(self.s[i] + u.clamp(0.0, h))
    }
}

/// The ensemble-averaged total cross section Sigma_t(Omega, s).
#[derive(Debug, Clone, PartialEq)]
pub enum CrossSectionModel {
    /// Independent of both direction and path length (classical medium).
    Constant { sigma: f64 },
    /// Separable base(s) * m(Omega) with even angular modulation.
    DirectionModulated {
        base: BaseProfile,
        modulation: AngularModulation,
    },
    /// Per-|mu| tables of cumulative optical depth.
    Tabulated(TabulatedOd),
    /// Derived from a supplied free-path density.
    FromPdf(FreePathPdf),
}

impl CrossSectionModel {
    pub fn constant(sigma: f64) -> Result<Self> {
        let base = BaseProfile::Constant { sigma };
        base.validate()?;
        Ok(CrossSectionModel::Constant { sigma })
    }

    pub fn direction_modulated(base: BaseProfile, modulation: AngularModulation) -> Result<Self> {
        base.validate()?;
        Ok(CrossSectionModel::DirectionModulated { base, modulation })
    }

    pub fn tabulated(tab: TabulatedOd) -> Self {
        CrossSectionModel::Tabulated(tab)
    }

    pub fn from_pdf(pdf: FreePathPdf) -> Result<Self> {
        pdf.validate()?;
        Ok(CrossSectionModel::FromPdf(pdf))
    }

    /// Total cross section at (direction, path length).
    pub fn sigma_t(&self, dir: &Direction, s: f64) -> f64 {
        match self {
            CrossSectionModel::Constant { sigma } => *sigma,
            CrossSectionModel::DirectionModulated { base, modulation } => {
                base.sigma(s) * modulation.eval(dir)
            }
            CrossSectionModel::Tabulated(t) => t.sigma(dir.mu(), s),
            CrossSectionModel::FromPdf(p) => p.sigma(s),
        }
    }

    /// Cumulative optical depth along the ray: integral of sigma_t up to s.
    pub fn optical_depth(&self, dir: &Direction, s: f64) -> f64 {
        match self {
            CrossSectionModel::Constant { sigma } => sigma * s,
            CrossSectionModel::DirectionModulated { base, modulation } => {
                base.optical_depth(s) * modulation.eval(dir)
            }
            CrossSectionModel::Tabulated(t) => t.od(dir.mu(), s),
            CrossSectionModel::FromPdf(p) => p.optical_depth(s),
        }
    }

    /// Probability of traveling s without interacting.
    pub fn survival(&self, dir: &Direction, s: f64) -> f64 {
        (-self.optical_depth(dir, s)).exp()
    }

    /// Probability of a collision before s: 1 - survival, cancellation-free.
    pub fn cdf(&self, dir: &Direction, s: f64) -> f64 {
        -(-self.optical_depth(dir, s)).exp_m1()
    }

    /// Free-path density q(Omega, s) = sigma_t * survival.
    pub fn free_path_density(&self, dir: &Direction, s: f64) -> f64 {
        match self {
            // supplied-pdf models return their own density; this stays finite
            // at the support boundary where sigma_t * survival is 0 * inf
            CrossSectionModel::FromPdf(p) => p.pdf(s),
            _ => self.sigma_t(dir, s) * self.survival(dir, s),
        }
    }

    /// Largest reachable optical depth along `dir` (tabulated models are
    /// capped by the linear extrapolation budget).
    pub fn max_optical_depth(&self, dir: &Direction) -> f64 {
        match self {
            CrossSectionModel::Tabulated(t) => {
                let budget_s = EXTRAPOLATION_FACTOR * t.max_end_s();
                t.od(dir.mu(), budget_s)
            }
            CrossSectionModel::FromPdf(p) => p.max_optical_depth(),
            _ => f64::INFINITY,
        }
    }

    /// Solve optical_depth(dir, s) = target for s.
    pub fn invert_optical_depth(&self, dir: &Direction, target: f64) -> Result<f64> {
        debug_assert!(target >= 0.0);
        match self {
            CrossSectionModel::Constant { sigma } => Ok(target / sigma),
            CrossSectionModel::DirectionModulated { base, modulation } => {
                Ok(base.invert_optical_depth(target / modulation.eval(dir)))
            }
            CrossSectionModel::FromPdf(p) => p.invert_optical_depth(target),
            CrossSectionModel::Tabulated(t) => {
                let max_od = self.max_optical_depth(dir);
                if target > max_od {
                    return Err(TransportError::TailOverflow {
                        target,
                        max_reachable: max_od,
                    });
                }
                let budget_s = EXTRAPOLATION_FACTOR * t.max_end_s();
                let mu = dir.mu();
                Ok(numeric::invert_monotone(
                    |s| t.od(mu, s),
                    |s| t.sigma(mu, s),
                    target,
                    0.0,
                    budget_s,
                    1e-12,
                ))
            }
        }
    }

    /// Distance at which the survival probability drops below `floor`
    /// (clamped to the extrapolation budget for tabulated models).
    pub fn s_cut(&self, dir: &Direction, floor: f64) -> f64 {
        let target = -floor.ln();
        match self.invert_optical_depth(dir, target.min(self.max_optical_depth(dir) * 0.999999)) {
            Ok(s) => s,
            Err(_) => match self {
                CrossSectionModel::Tabulated(t) => EXTRAPOLATION_FACTOR * t.max_end_s(),
                _ => f64::INFINITY,
            },
        }
    }

    /// Characteristic path-length scale, used to seed brackets and grids.
    pub fn length_scale(&self, dir: &Direction) -> f64 {
        let sigma0 = self.sigma_t(dir, 0.0);
        if sigma0 > 0.0 && sigma0.is_finite() {
            1.0 / sigma0
        } else {
            1.0
        }
    }
}
