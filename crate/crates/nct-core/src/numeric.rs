//! Low-level numerics: adaptive Gauss–Kronrod quadrature, Gauss–Legendre
//! nodes, safeguarded root finding, and deterministic summation.

use crate::error::{Result, TransportError};

/// 15-point Kronrod abscissae on [-1, 1] (positive half, descending).
const XGK: [f64; 8] = [
    0.991455371120812639206854697526329,
    0.949107912342758524526189684047851,
    0.864864423359769072789712788640926,
    0.741531185599394439863864773280788,
    0.586087235467691130294144838258730,
    0.405845151377397166906606412076961,
    0.207784955007898467600689403773245,
    0.000000000000000000000000000000000,
];

/// Kronrod weights matching [`XGK`].
const WGK: [f64; 8] = [
    0.022935322010529224963732008058970,
    0.063092092629978553290700663189204,
    0.104790010322250183839876322541518,
    0.140653259715525918745189590510238,
    0.169004726639267902826583426598550,
    0.190350578064785409913256402421014,
    0.204432940075298892414161999234649,
    0.209482141084727828012999174891714,
];

/// 7-point Gauss weights for the embedded rule (nodes XGK[1], XGK[3], ...).
const WG: [f64; 4] = [
    0.129484966168869693270611432679082,
    0.279705391489276667901467771423780,
    0.381830050505118944950369775488975,
    0.417959183673469387755102040816327,
];

/// One Gauss–Kronrod 7/15 panel: returns (estimate, error estimate).
fn gk15<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> (f64, f64) {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(center);
    let mut result_kronrod = WGK[7] * fc;
    let mut result_gauss = WG[3] * fc;
    for j in 0..7 {
        let x = half * XGK[j];
        let fsum = f(center - x) + f(center + x);
        result_kronrod += WGK[j] * fsum;
        if j % 2 == 1 {
            result_gauss += WG[j / 2] * fsum;
        }
    }
    let err = (half * (result_kronrod - result_gauss)).abs();
    (half * result_kronrod, err)
}

#[derive(Debug, Clone, Copy)]
struct Panel {
    a: f64,
    b: f64,
    value: f64,
    error: f64,
}

/// Globally adaptive integration of `f` on [a, b].
///
/// Splits the panel with the largest error estimate until the accumulated
/// error falls below `max(abs_tol, rel_tol * |integral|)`.
pub fn integrate_adaptive<F: Fn(f64) -> f64>(
    f: F,
    a: f64,
    b: f64,
    abs_tol: f64,
    rel_tol: f64,
) -> Result<f64> {
    if a == b {
        return Ok(0.0);
    }
    const MAX_PANELS: usize = 4000;
    let (v, e) = gk15(&f, a, b);
    let mut panels = vec![Panel {
        a,
        b,
        value: v,
        error: e,
    }];
    loop {
        let total: f64 = pairwise_sum(&panels.iter().map(|p| p.value).collect::<Vec<_>>());
        let err: f64 = panels.iter().map(|p| p.error).sum();
        if err <= abs_tol.max(rel_tol * total.abs()) {
            return Ok(total);
        }
        if panels.len() >= MAX_PANELS {
            return Err(TransportError::QuadratureFailure { a, b, error: err });
        }
        // split the worst panel
        let (worst, _) = panels
            .iter()
            .enumerate()
            .max_by(|x, y| x.1.error.total_cmp(&y.1.error))
            .expect("non-empty panel list");
        let p = panels.swap_remove(worst);
        let mid = 0.5 * (p.a + p.b);
        if mid <= p.a || mid >= p.b {
            // interval at floating-point resolution; accept what we have
            panels.push(p);
            let total: f64 = panels.iter().map(|q| q.value).sum();
            return Ok(total);
        }
        let (v1, e1) = gk15(&f, p.a, mid);
        let (v2, e2) = gk15(&f, mid, p.b);
        panels.push(Panel {
            a: p.a,
            b: mid,
            value: v1,
            error: e1,
        });
        panels.push(Panel {
            a: mid,
            b: p.b,
            value: v2,
            error: e2,
        });
    }
}

/// Integrate a decaying integrand on [0, inf).
///
/// The base interval [0, s0] is integrated adaptively, then dyadic tail
/// chunks [s0*2^k, s0*2^(k+1)] are added until a chunk is negligible. If the
/// chunk contributions stop shrinking (ratio >= `DIVERGENCE_RATIO` twice in a
/// row) while still significant, the moment is declared divergent.
pub fn integrate_to_infinity<F: Fn(f64) -> f64>(
    f: F,
    s0: f64,
    abs_tol: f64,
    rel_tol: f64,
    order: u32,
) -> Result<f64> {
    const MAX_DOUBLINGS: usize = 48;
    const DIVERGENCE_RATIO: f64 = 0.9;
    let mut total = integrate_adaptive(&f, 0.0, s0, abs_tol, rel_tol)?;
    let mut lo = s0;
    let mut prev_chunk = f64::INFINITY;
    let mut non_decreasing = 0usize;
    for _ in 0..MAX_DOUBLINGS {
        let hi = 2.0 * lo;
        let chunk = integrate_adaptive(&f, lo, hi, abs_tol, rel_tol)?;
        total += chunk;
        if chunk.abs() <= abs_tol.max(rel_tol * total.abs()) {
            return Ok(total);
        }
        if chunk.abs() >= DIVERGENCE_RATIO * prev_chunk.abs() {
            non_decreasing += 1;
            if non_decreasing >= 2 {
                return Err(TransportError::DivergentMoment {
                    order,
                    tail: chunk,
                    s_limit: hi,
                });
            }
        } else {
            non_decreasing = 0;
        }
        prev_chunk = chunk;
        lo = hi;
    }
    Err(TransportError::DivergentMoment {
        order,
        tail: prev_chunk,
        s_limit: lo,
    })
}

/// Gauss–Legendre nodes and weights on [-1, 1], exactly symmetric about 0.
///
/// Nodes are found by Newton iteration on P_n; the negative half mirrors the
/// positive half bit-for-bit so antipodal symmetry is exact by construction.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1);
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let m = n / 2;
    for i in 0..m {
        // descending initial guess for the i-th positive root
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        for _ in 0..100 {
            let (p, dp) = legendre_pair(n, x);
            let dx = p / dp;
            x -= dx;
            if dx.abs() < 1e-15 {
                break;
            }
        }
        let (_, dp) = legendre_pair(n, x);
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[n - 1 - i] = x;
        weights[n - 1 - i] = w;
        nodes[i] = -x;
        weights[i] = w;
    }
    if n % 2 == 1 {
        let (_, dp) = legendre_pair(n, 0.0);
        nodes[m] = 0.0;
        weights[m] = 2.0 / (dp * dp);
    }
    (nodes, weights)
}

/// P_n(x) and its derivative via the three-term recurrence.
fn legendre_pair(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, dp)
}

/// Evaluate the Legendre polynomial P_n(x).
pub fn legendre(n: usize, x: f64) -> f64 {
    if n == 0 {
        return 1.0;
    }
    legendre_pair(n, x).0
}

/// Invert a monotone nondecreasing function `g` with derivative `dg`:
/// find `s` in `[lo, hi]` with `g(s) = target`, assuming
/// `g(lo) <= target <= g(hi)`.
///
/// Newton steps are safeguarded by bisection, so convergence is guaranteed.
pub fn invert_monotone<G, D>(g: G, dg: D, target: f64, mut lo: f64, mut hi: f64, tol: f64) -> f64
where
    G: Fn(f64) -> f64,
    D: Fn(f64) -> f64,
{
    let mut s = 0.5 * (lo + hi);
    for _ in 0..200 {
        let gs = g(s);
        let resid = gs - target;
        if resid.abs() <= tol {
            return s;
        }
        if resid > 0.0 {
            hi = s;
        } else {
            lo = s;
        }
        let d = dg(s);
        let newton = s - resid / d;
        s = if d > 0.0 && newton > lo && newton < hi {
            newton
        } else {
            0.5 * (lo + hi)
        };
        if hi - lo <= f64::EPSILON * hi.abs().max(1.0) {
            return s;
        }
    }
    s
}

/// Pairwise (cascade) summation; deterministic and O(log n) error growth.
pub fn pairwise_sum(values: &[f64]) -> f64 {
    match values.len() {
        0 => 0.0,
        1 => values[0],
        2 => values[0] + values[1],
        n => {
            let mid = n / 2;
            pairwise_sum(&values[..mid]) + pairwise_sum(&values[mid..])
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn gk15_exact_on_low_degree() {
        let (v, _) = gk15(&|x: f64| x.powi(12), 0.0, 1.0);
        assert_relative_eq!(v, 1.0 / 13.0, epsilon = 1e-14);
    }

    #[test]
    fn adaptive_handles_exponential() {
        let v = integrate_adaptive(|x: f64| (-2.0 * x).exp(), 0.0, 40.0, 1e-12, 1e-10).unwrap();
        assert_relative_eq!(v, 0.5, epsilon = 1e-11);
    }

    #[test]
    fn adaptive_handles_peaked_integrand() {
        let v =
            integrate_adaptive(|x: f64| 1.0 / (1e-4 + x * x), -1.0, 1.0, 1e-12, 1e-10).unwrap();
        let exact = 2.0 / 1e-2 * (1.0 / 1e-2).atan();
        assert_relative_eq!(v, exact, max_relative = 1e-9);
    }

    #[test]
    fn infinite_integral_of_exponential() {
        let v = integrate_to_infinity(|s: f64| (-s).exp(), 30.0, 1e-12, 1e-10, 1).unwrap();
        assert_relative_eq!(v, 1.0, epsilon = 1e-10);
    }

    #[test]
    fn divergent_tail_is_detected() {
        // integrand ~ 1/s: every dyadic chunk contributes ln 2
        let err = integrate_to_infinity(|s: f64| 1.0 / (1.0 + s), 10.0, 1e-12, 1e-8, 2);
        assert!(matches!(
            err,
            Err(TransportError::DivergentMoment { order: 2, .. })
        ));
    }

    #[test]
    fn gauss_legendre_integrates_polynomials_exactly() {
        let (x, w) = gauss_legendre(8);
        // degree 15 is exact for n = 8
        let val: f64 = x.iter().zip(&w).map(|(xi, wi)| wi * xi.powi(14)).sum();
        assert_relative_eq!(val, 2.0 / 15.0, epsilon = 1e-14);
        let s: f64 = w.iter().sum();
        assert_relative_eq!(s, 2.0, epsilon = 1e-14);
    }

    #[test]
    fn gauss_legendre_nodes_mirror_exactly() {
        for n in [2usize, 9, 16, 33] {
            let (x, w) = gauss_legendre(n);
            for i in 0..n {
                assert_eq!(x[i].to_bits(), (-x[n - 1 - i]).to_bits());
                assert_eq!(w[i].to_bits(), w[n - 1 - i].to_bits());
            }
        }
    }

    #[test]
    fn invert_monotone_finds_root() {
        let g = |s: f64| s * s * s;
        let s = invert_monotone(g, |s| 3.0 * s * s, 8.0, 0.0, 10.0, 1e-13);
        assert_relative_eq!(s, 2.0, epsilon = 1e-10);
    }

    #[test]
    fn pairwise_sum_matches_naive() {
        let v: Vec<f64> = (0..1001).map(|i| 1.0 / (1.0 + i as f64)).collect();
        let naive: f64 = v.iter().sum();
        assert_relative_eq!(pairwise_sum(&v), naive, epsilon = 1e-12);
    }
}
