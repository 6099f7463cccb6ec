//! Deterministic solution of the isotropic-scattering integral formulation:
//! Picard iteration for the scalar collision-rate density, then flux
//! reconstruction through the survival kernel.
//!
//! Statistically homogeneous media make the cell-to-cell transfer
//! coefficients translation invariant, so the kernel is stored once as a
//! stencil over cell offsets and applied as a truncated convolution.

use crate::error::{Result, TransportError};
use crate::exec;
use crate::geom::{Direction, Vec3};
use crate::grid::SpatialGrid;
use crate::numeric;
use crate::quadrature::AngularQuadrature;
use crate::xsection::CrossSectionModel;

/// Offsets with |delta|_inf <= this use exact ray-box angular integration.
const NEAR_FIELD_OFFSET: i64 = 2;
/// Offsets beyond near field but within this use subdivided midpoint.
const MID_FIELD_OFFSET: i64 = 6;
/// Subdivision per axis for mid-field cells.
const MID_FIELD_SUBDIV: usize = 4;
/// Angular resolution of the near-field ray-box integration.
const NEAR_FIELD_POLAR: usize = 64;
const NEAR_FIELD_AZIMUTHAL: usize = 128;
/// Gauss order for radial integrals of the survival kernel.
const RADIAL_GAUSS: usize = 8;

/// Which radial factor the kernel integrates.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KernelKind {
    /// q-hat: density of next collisions (dimensionless coefficients).
    Collision,
    /// Survival: exp(-optical depth), for flux reconstruction
    /// (coefficients carry one power of length).
    Survival,
}

#[derive(Debug, Clone, Copy)]
struct StencilEntry {
    delta: [i64; 3],
    coeff: f64,
}

/// Precomputed transfer coefficients between cell pairs within a cutoff.
#[derive(Debug, Clone)]
pub struct KernelTable {
    grid: SpatialGrid,
    entries: Vec<StencilEntry>,
    kind: KernelKind,
    row_sum: f64,
    cutoff: f64,
}

/// Build the collision kernel (the spec'd transfer table).
pub fn build_kernel(
    grid: &SpatialGrid,
    model: &CrossSectionModel,
    cutoff: f64,
) -> Result<KernelTable> {
    KernelTable::build(grid, model, cutoff, KernelKind::Collision)
}

impl KernelTable {
    pub fn build(
        grid: &SpatialGrid,
        model: &CrossSectionModel,
        cutoff: f64,
        kind: KernelKind,
    ) -> Result<Self> {
        if !(cutoff > 0.0) {
            return Err(TransportError::config("integral.cutoff", "must be positive"));
        }
        let probe = AngularQuadrature::product(8, 8)?;
        for k in 0..probe.len() {
            let surv = model.survival(probe.node(k), cutoff);
            if !(surv < 1e-10) {
                return Err(TransportError::KernelAccuracy(format!(
                    "cutoff {cutoff} too small: survival {surv:.3e} at that distance \
                     (needs < 1e-10 in every direction)"
                )));
            }
        }

        let h = grid.cell_sizes();
        let n = grid.dims();
        let half_diag = 0.5 * (h[0] * h[0] + h[1] * h[1] + h[2] * h[2]).sqrt();
        let mut reach = [0i64; 3];
        for a in 0..3 {
            let m = ((cutoff + half_diag) / h[a]).ceil() as i64;
            reach[a] = m.min(n[a] as i64 - 1);
        }

        let mut offsets = Vec::new();
        for dx in -reach[0]..=reach[0] {
            for dy in -reach[1]..=reach[1] {
                for dz in -reach[2]..=reach[2] {
                    let r = offset_distance([dx, dy, dz], &h);
                    if r <= cutoff + half_diag {
                        offsets.push([dx, dy, dz]);
                    }
                }
            }
        }

        let near_quad =
            AngularQuadrature::product(NEAR_FIELD_POLAR, NEAR_FIELD_AZIMUTHAL)?;
        let (gx, gw) = numeric::gauss_legendre(RADIAL_GAUSS);

        let coeffs = exec::try_map_indexed(offsets.len(), |oi| {
            let delta = offsets[oi];
            let linf = delta.iter().map(|d| d.abs()).max().unwrap();
            let c = if linf <= NEAR_FIELD_OFFSET {
                ray_box_coefficient(model, &near_quad, &h, delta, kind, &gx, &gw)
            } else if linf <= MID_FIELD_OFFSET {
                subdivided_midpoint(model, &h, delta, kind, MID_FIELD_SUBDIV)?
            } else {
                subdivided_midpoint(model, &h, delta, kind, 1)?
            };
            Ok::<_, TransportError>(c)
        })?;

        let entries: Vec<StencilEntry> = offsets
            .iter()
            .zip(&coeffs)
            .map(|(delta, &coeff)| StencilEntry {
                delta: *delta,
                coeff,
            })
            .collect();
        let row_sum = numeric::pairwise_sum(&coeffs);
        if kind == KernelKind::Collision && row_sum > 1.0 + 1e-6 {
            return Err(TransportError::KernelAccuracy(format!(
                "interior row sum {row_sum} exceeds 1: transfer coefficients are \
                 not a sub-probability"
            )));
        }
        Ok(KernelTable {
            grid: grid.clone(),
            entries,
            kind,
            row_sum,
            cutoff,
        })
    }

    pub fn kind(&self) -> KernelKind {
        self.kind
    }

    pub fn cutoff(&self) -> f64 {
        self.cutoff
    }

    /// Sum of all stencil coefficients: the total collision probability from
    /// an interior source point, up to discretization error.
    pub fn row_sum(&self) -> f64 {
        self.row_sum
    }

    /// Transfer coefficient for a destination-minus-source cell offset.
    pub fn coefficient(&self, delta: [i64; 3]) -> f64 {
        self.entries
            .iter()
            .find(|e| e.delta == delta)
            .map(|e| e.coeff)
            .unwrap_or(0.0)
    }

    /// Apply the kernel: out[j] = sum over sources i of K[j<-i] src[i].
    /// Sources outside the box contribute nothing (vacuum truncation).
    pub fn apply(&self, src: &[f64]) -> Vec<f64> {
        assert_eq!(src.len(), self.grid.cells());
        let n = self.grid.dims();
        exec::map_indexed(self.grid.cells(), |jidx| {
            let j = self.grid.unindex(jidx);
            let mut acc = 0.0;
            for e in &self.entries {
                let ix = j[0] as i64 - e.delta[0];
                let iy = j[1] as i64 - e.delta[1];
                let iz = j[2] as i64 - e.delta[2];
                if ix < 0
                    || iy < 0
                    || iz < 0
                    || ix >= n[0] as i64
                    || iy >= n[1] as i64
                    || iz >= n[2] as i64
                {
                    continue;
                }
                acc += e.coeff * src[self.grid.index([ix as usize, iy as usize, iz as usize])];
            }
            acc
        })
    }
}

fn offset_distance(delta: [i64; 3], h: &Vec3) -> f64 {
    let r = [
        delta[0] as f64 * h[0],
        delta[1] as f64 * h[1],
        delta[2] as f64 * h[2],
    ];
    (r[0] * r[0] + r[1] * r[1] + r[2] * r[2]).sqrt()
}

/// Entry/exit distances of the ray from the origin along `d` through the box
/// centered at `center` with half sizes `half`.
fn ray_box(d: &Vec3, center: &Vec3, half: &Vec3) -> Option<(f64, f64)> {
    let mut t0 = 0.0f64;
    let mut t1 = f64::INFINITY;
    for a in 0..3 {
        let lo = center[a] - half[a];
        let hi = center[a] + half[a];
        if d[a].abs() < 1e-300 {
            if 0.0 < lo || 0.0 > hi {
                return None;
            }
            continue;
        }
        let ta = lo / d[a];
        let tb = hi / d[a];
        let (tmin, tmax) = if ta < tb { (ta, tb) } else { (tb, ta) };
        t0 = t0.max(tmin);
        t1 = t1.min(tmax);
        if t0 >= t1 {
            return None;
        }
    }
    Some((t0, t1))
}

/// Exact-geometry coefficient: angular quadrature over directions hitting
/// the destination cell, with the radial integral taken analytically
/// (collision kind) or by Gauss quadrature (survival kind).
fn ray_box_coefficient(
    model: &CrossSectionModel,
    quad: &AngularQuadrature,
    h: &Vec3,
    delta: [i64; 3],
    kind: KernelKind,
    gx: &[f64],
    gw: &[f64],
) -> f64 {
    let center = [
        delta[0] as f64 * h[0],
        delta[1] as f64 * h[1],
        delta[2] as f64 * h[2],
    ];
    let half = [0.5 * h[0], 0.5 * h[1], 0.5 * h[2]];
    let mut terms = Vec::with_capacity(quad.len());
    for k in 0..quad.len() {
        let dir = quad.node(k);
        let Some((t0, t1)) = ray_box(dir.as_array(), &center, &half) else {
            continue;
        };
        let radial = match kind {
            // integral of q over [t0, t1] is the survival drop
            KernelKind::Collision => model.survival(dir, t0) - model.survival(dir, t1),
            KernelKind::Survival => {
                let mid = 0.5 * (t0 + t1);
                let hw = 0.5 * (t1 - t0);
                let mut acc = 0.0;
                for (x, w) in gx.iter().zip(gw) {
                    acc += w * model.survival(dir, mid + hw * x);
                }
                acc * hw
            }
        };
        terms.push(quad.weight(k) * radial);
    }
    numeric::pairwise_sum(&terms) / (4.0 * std::f64::consts::PI)
}

/// Midpoint coefficient with optional subdivision of the destination cell.
fn subdivided_midpoint(
    model: &CrossSectionModel,
    h: &Vec3,
    delta: [i64; 3],
    kind: KernelKind,
    subdiv: usize,
) -> Result<f64> {
    let center = [
        delta[0] as f64 * h[0],
        delta[1] as f64 * h[1],
        delta[2] as f64 * h[2],
    ];
    let sub_vol = h[0] * h[1] * h[2] / (subdiv * subdiv * subdiv) as f64;
    let mut acc = 0.0;
    for a in 0..subdiv {
        for b in 0..subdiv {
            for c in 0..subdiv {
                let p = [
                    center[0] + h[0] * ((a as f64 + 0.5) / subdiv as f64 - 0.5),
                    center[1] + h[1] * ((b as f64 + 0.5) / subdiv as f64 - 0.5),
                    center[2] + h[2] * ((c as f64 + 0.5) / subdiv as f64 - 0.5),
                ];
                let r = (p[0] * p[0] + p[1] * p[1] + p[2] * p[2]).sqrt();
                let dir = Direction::normalized(p)?;
                let radial = match kind {
                    KernelKind::Collision => {
                        model.sigma_t(&dir, r) * model.survival(&dir, r)
                    }
                    KernelKind::Survival => model.survival(&dir, r),
                };
                acc += radial / (4.0 * std::f64::consts::PI * r * r) * sub_vol;
            }
        }
    }
    Ok(acc)
}

/// Scalar collision-rate density field with solver metadata.
#[derive(Debug, Clone)]
pub struct CollisionField {
    pub values: Vec<f64>,
    pub iterations: usize,
    pub residual: f64,
    /// Max-norm relative change per iteration, for contraction checks.
    pub residual_history: Vec<f64>,
}

/// Fixed-point (source) iteration: F <- K (c F + Q).
///
/// `q_field` is the emission density per cell. Converges geometrically with
/// ratio at most c times the kernel row sum.
pub fn picard_solve(
    kernel: &KernelTable,
    c: f64,
    q_field: &[f64],
    tol: f64,
    max_iter: usize,
) -> Result<CollisionField> {
    if !(0.0..1.0).contains(&c) {
        return Err(TransportError::config(
            "c",
            format!("Picard iteration needs c in [0, 1), got {c}"),
        ));
    }
    if kernel.kind() != KernelKind::Collision {
        return Err(TransportError::KernelAccuracy(
            "picard_solve needs a collision kernel".into(),
        ));
    }
    let cells = q_field.len();
    let mut f = kernel.apply(q_field); // exact solution for c = 0
    let mut history = Vec::new();
    for it in 0..max_iter {
        let src: Vec<f64> = (0..cells).map(|i| c * f[i] + q_field[i]).collect();
        let next = kernel.apply(&src);
        let scale = next
            .iter()
            .fold(0.0f64, |m, v| m.max(v.abs()))
            .max(f64::MIN_POSITIVE);
        let diff = f
            .iter()
            .zip(&next)
            .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
        let resid = diff / scale;
        history.push(resid);
        f = next;
        log::debug!("picard iteration {it}: residual {resid:.3e}");
        if resid < tol {
            return Ok(CollisionField {
                values: f,
                iterations: it + 1,
                residual: resid,
                residual_history: history,
            });
        }
    }
    Err(TransportError::NonConvergence {
        iterations: max_iter,
        residual: *history.last().unwrap_or(&f64::NAN),
    })
}

/// Classic scalar flux reconstructed from the collision-rate density via the
/// survival kernel.
#[derive(Debug, Clone)]
pub struct FluxField {
    pub phi: Vec<f64>,
}

/// Second kernel pass: phi = W (c F + Q) with the survival kernel W.
pub fn fluxes_from_collision_field(
    fhat: &CollisionField,
    model: &CrossSectionModel,
    c: f64,
    q_field: &[f64],
    grid: &SpatialGrid,
    cutoff: f64,
) -> Result<FluxField> {
    let w = KernelTable::build(grid, model, cutoff, KernelKind::Survival)?;
    let src: Vec<f64> = (0..q_field.len())
        .map(|i| c * fhat.values[i] + q_field[i])
        .collect();
    Ok(FluxField {
        phi: w.apply(&src),
    })
}

/// Classic angular flux at `x` along `dir` by 1-D ray quadrature of the
/// emission field against the survival factor (vacuum outside the box).
pub fn angular_flux_along(
    fhat: &CollisionField,
    model: &CrossSectionModel,
    c: f64,
    q_field: &[f64],
    grid: &SpatialGrid,
    x: &Vec3,
    dir: &Direction,
) -> Result<f64> {
    let Some(mut cell) = grid.locate(x) else {
        return Err(TransportError::config(
            "x",
            "angular flux evaluation point must lie inside the box",
        ));
    };
    // the integrand looks backward along the flight path
    let back = dir.flipped();
    let d = back.as_array();
    let h = grid.cell_sizes();
    let n = grid.dims();
    let min = grid.min_corner();
    let (gx, gw) = numeric::gauss_legendre(RADIAL_GAUSS);

    let mut t = 0.0f64;
    let mut acc = 0.0f64;
    let mut pos = *x;
    loop {
        // distance to the next face from pos along back
        let mut t_step = f64::INFINITY;
        let mut axis = 4usize;
        for a in 0..3 {
            if d[a].abs() < 1e-300 {
                continue;
            }
            let face = if d[a] > 0.0 {
                min[a] + (cell[a] as f64 + 1.0) * h[a]
            } else {
                min[a] + cell[a] as f64 * h[a]
            };
            let ta = (face - pos[a]) / d[a];
            if ta < t_step {
                t_step = ta;
                axis = a;
            }
        }
        if axis == 4 {
            break;
        }
        let t0 = t;
        let t1 = t + t_step.max(0.0);
        let src = c * fhat.values[grid.index(cell)] + q_field[grid.index(cell)];
        if src != 0.0 && t1 > t0 {
            let mid = 0.5 * (t0 + t1);
            let hw = 0.5 * (t1 - t0);
            let mut seg = 0.0;
            for (xg, wg) in gx.iter().zip(&gw) {
                seg += wg * model.survival(dir, mid + hw * xg);
            }
            acc += src * seg * hw;
        }
        t = t1;
        for a in 0..3 {
            pos[a] = x[a] + t * d[a];
        }
        // step to the neighbor cell; outside the box the field is zero
        if d[axis] > 0.0 {
            cell[axis] += 1;
            if cell[axis] == n[axis] {
                break;
            }
        } else {
            if cell[axis] == 0 {
                break;
            }
            cell[axis] -= 1;
        }
    }
    Ok(acc / (4.0 * std::f64::consts::PI))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn constant_sigma_kernel_matches_point_formula() {
        let grid = SpatialGrid::new([4.0, 4.0, 4.0], [9, 9, 9]).unwrap();
        let model = CrossSectionModel::constant(1.0).unwrap();
        let k = build_kernel(&grid, &model, 30.0).unwrap();
        let h = grid.cell_sizes();
        let vol = grid.cell_volume();
        for delta in [[3i64, 0, 0], [3, 2, 1], [0, 0, 4]] {
            let r = offset_distance(delta, &h);
            let point = (-r).exp() / (4.0 * std::f64::consts::PI * r * r) * vol;
            let rel = (k.coefficient(delta) - point).abs() / point;
            assert!(rel < 0.02, "offset {delta:?}: rel dev {rel}");
        }
    }

    #[test]
    fn kernel_antipodal_symmetry() {
        let grid = SpatialGrid::new([2.0, 2.0, 2.0], [5, 5, 5]).unwrap();
        let model = CrossSectionModel::direction_modulated(
            crate::xsection::BaseProfile::Constant { sigma: 1.0 },
            crate::xsection::AngularModulation::try_new(vec![1.0, 0.0, 1.0], true).unwrap(),
        )
        .unwrap();
        let k = KernelTable::build(&grid, &model, 40.0, KernelKind::Collision).unwrap();
        for delta in [[1i64, 0, 0], [2, 1, 0], [1, 1, 1]] {
            let plus = k.coefficient(delta);
            let minus = k.coefficient([-delta[0], -delta[1], -delta[2]]);
            assert_relative_eq!(plus, minus, max_relative = 1e-12);
        }
    }

    #[test]
    fn interior_row_sum_near_one() {
        // grid big enough binding the cutoff ball: sums to total collision
        // probability 1 in an infinite pure absorber
        let grid = SpatialGrid::new([12.0, 12.0, 12.0], [25, 25, 25]).unwrap();
        let model = CrossSectionModel::constant(2.0).unwrap();
        let k = build_kernel(&grid, &model, 12.0).unwrap();
        assert!(
            (k.row_sum() - 1.0).abs() < 1e-3,
            "row sum {}",
            k.row_sum()
        );
        assert!(k.row_sum() <= 1.0 + 1e-6);
    }

    #[test]
    fn cutoff_too_small_is_rejected() {
        let grid = SpatialGrid::new([2.0, 2.0, 2.0], [5, 5, 5]).unwrap();
        let model = CrossSectionModel::constant(1.0).unwrap();
        let err = build_kernel(&grid, &model, 5.0).unwrap_err();
        assert!(matches!(err, TransportError::KernelAccuracy(_)));
    }

    #[test]
    fn picard_c0_single_application() {
        let grid = SpatialGrid::new([3.0, 3.0, 3.0], [7, 7, 7]).unwrap();
        let model = CrossSectionModel::constant(1.0).unwrap();
        let k = build_kernel(&grid, &model, 25.0).unwrap();
        let mut q = vec![0.0; grid.cells()];
        q[grid.index([3, 3, 3])] = 1.0;
        let f = picard_solve(&k, 0.0, &q, 1e-12, 50).unwrap();
        let direct = k.apply(&q);
        for (a, b) in f.values.iter().zip(&direct) {
            assert_relative_eq!(a, b, epsilon = 1e-14);
        }
    }

    #[test]
    fn picard_contraction_ratio() {
        let grid = SpatialGrid::new([6.0, 6.0, 6.0], [13, 13, 13]).unwrap();
        let model = CrossSectionModel::constant(1.0).unwrap();
        let k = build_kernel(&grid, &model, 25.0).unwrap();
        let q = vec![1.0; grid.cells()];
        let c = 0.8;
        let f = picard_solve(&k, c, &q, 1e-10, 500).unwrap();
        for w in f.residual_history.windows(2).skip(1) {
            assert!(
                w[1] / w[0] <= c + 0.02,
                "residual ratio {} above contraction bound",
                w[1] / w[0]
            );
        }
    }

    #[test]
    fn infinite_medium_balance() {
        // interior F = Q/(1-c) when row sums are ~1
        let grid = SpatialGrid::new([12.0, 12.0, 12.0], [25, 25, 25]).unwrap();
        let model = CrossSectionModel::constant(2.0).unwrap();
        let k = build_kernel(&grid, &model, 12.0).unwrap();
        let q = vec![1.0; grid.cells()];
        let f = picard_solve(&k, 0.5, &q, 1e-10, 400).unwrap();
        let center = f.values[grid.index([12, 12, 12])];
        assert!(
            (center - 2.0).abs() < 0.02,
            "center collision density {center}, expected 2"
        );
    }

    #[test]
    fn flux_reconstruction_constant_sigma() {
        // F = sigma phi cellwise for a constant cross section
        let grid = SpatialGrid::new([3.0, 3.0, 3.0], [9, 9, 9]).unwrap();
        let sigma = 1.3;
        let model = CrossSectionModel::constant(sigma).unwrap();
        let k = build_kernel(&grid, &model, 22.0).unwrap();
        let mut q = vec![0.0; grid.cells()];
        for idx in 0..grid.cells() {
            let cvec = grid.center(grid.unindex(idx));
            let r2 = cvec.iter().map(|x| x * x).sum::<f64>();
            q[idx] = (-r2).exp();
        }
        let c = 0.4;
        let f = picard_solve(&k, c, &q, 1e-11, 300).unwrap();
        let flux = fluxes_from_collision_field(&f, &model, c, &q, &grid, 22.0).unwrap();
        for idx in 0..grid.cells() {
            let ratio = f.values[idx] / (sigma * flux.phi[idx]);
            assert!(
                (ratio - 1.0).abs() < 0.01,
                "cell {idx}: F/(sigma phi) = {ratio}"
            );
        }
    }
}
