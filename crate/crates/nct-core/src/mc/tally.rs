//! Tallies: per-batch accumulators and the merged result with batch-means
//! statistical errors.

use crate::grid::SpatialGrid;

/// Raw sums accumulated over one batch of histories.
#[derive(Debug, Clone)]
pub(crate) struct BatchAccum {
    pub histories: u64,
    /// Track length per cell.
    pub track: Vec<f64>,
    /// Track length per (cell, mu bin); empty when angular tallies are off.
    pub track_mu: Vec<f64>,
    /// Collision count per cell (analog, so integer-valued).
    pub collisions: Vec<f64>,
    pub collision_events: u64,
    pub absorbed: u64,
    pub leaked: u64,
}

impl BatchAccum {
    pub fn new(cells: usize, mu_bins: usize) -> Self {
        BatchAccum {
            histories: 0,
            track: vec![0.0; cells],
            track_mu: vec![0.0; cells * mu_bins],
            collisions: vec![0.0; cells],
            collision_events: 0,
            absorbed: 0,
            leaked: 0,
        }
    }
}

/// Mean and batch-means standard error per bin.
#[derive(Debug, Clone)]
pub struct TallyField {
    pub mean: Vec<f64>,
    pub std_err: Vec<f64>,
}

/// Exact analog event bookkeeping for a run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Balance {
    pub emitted: u64,
    pub absorbed: u64,
    pub leaked: u64,
    pub collisions: u64,
}

/// Box-integrated sums for one batch; kept so derived quantities (ratios,
/// global averages) can carry proper batch statistics.
#[derive(Debug, Clone)]
pub struct BatchSummary {
    pub histories: u64,
    pub track_total: f64,
    pub track_mu_total: Vec<f64>,
    pub collisions: u64,
}

/// Merged tallies of a simulation.
#[derive(Debug, Clone)]
pub struct TallyResult {
    pub grid: SpatialGrid,
    pub mu_bins: usize,
    /// Scalar flux per cell.
    pub phi: TallyField,
    /// Collision-rate density per cell.
    pub fhat: TallyField,
    /// Angular flux per (cell, mu bin), per steradian; None when disabled.
    pub psi: Option<TallyField>,
    pub balance: Balance,
    pub batch_summaries: Vec<BatchSummary>,
    pub histories: u64,
    /// Box-integrated emission rate the tallies are normalized to.
    pub total_rate: f64,
}

/// Mean and standard error of per-history batch means, weighted by batch
/// size (sizes differ by at most one history).
fn batch_stats(batch_values: &[f64], batch_sizes: &[u64], scale: f64) -> (f64, f64) {
    let n_total: u64 = batch_sizes.iter().sum();
    let b = batch_values.len() as f64;
    let mean_per_hist: f64 =
        batch_values.iter().sum::<f64>() / n_total as f64;
    let mut var_acc = 0.0;
    for (v, &n) in batch_values.iter().zip(batch_sizes) {
        let y = v / n as f64;
        let rho = (n as f64) * b / n_total as f64;
        let d = y - mean_per_hist;
        var_acc += rho * d * d;
    }
    let se = if batch_values.len() > 1 {
        (var_acc / (b * (b - 1.0))).sqrt()
    } else {
        0.0
    };
    (scale * mean_per_hist, scale * se)
}

impl TallyResult {
    pub(crate) fn merge(
        grid: SpatialGrid,
        mu_bins: usize,
        total_rate: f64,
        batches: Vec<BatchAccum>,
    ) -> Self {
        let cells = grid.cells();
        let sizes: Vec<u64> = batches.iter().map(|b| b.histories).collect();
        let vol = grid.cell_volume();

        let field = |per_batch: &dyn Fn(&BatchAccum, usize) -> f64, scale: f64, len: usize| {
            let mut mean = vec![0.0; len];
            let mut err = vec![0.0; len];
            let mut scratch = vec![0.0; batches.len()];
            for i in 0..len {
                for (bi, b) in batches.iter().enumerate() {
                    scratch[bi] = per_batch(b, i);
                }
                let (m, e) = batch_stats(&scratch, &sizes, scale);
                mean[i] = m;
                err[i] = e;
            }
            TallyField {
                mean,
                std_err: err,
            }
        };

        let phi = field(&|b, i| b.track[i], total_rate / vol, cells);
        let fhat = field(&|b, i| b.collisions[i], total_rate / vol, cells);
        let psi = if mu_bins > 0 {
            let d_omega = 4.0 * std::f64::consts::PI / mu_bins as f64;
            Some(field(
                &|b, i| b.track_mu[i],
                total_rate / (vol * d_omega),
                cells * mu_bins,
            ))
        } else {
            None
        };

        let balance = Balance {
            emitted: sizes.iter().sum(),
            absorbed: batches.iter().map(|b| b.absorbed).sum(),
            leaked: batches.iter().map(|b| b.leaked).sum(),
            collisions: batches.iter().map(|b| b.collision_events).sum(),
        };

        let batch_summaries = batches
            .iter()
            .map(|b| BatchSummary {
                histories: b.histories,
                track_total: b.track.iter().sum(),
                track_mu_total: if mu_bins > 0 {
                    (0..mu_bins)
                        .map(|k| {
                            (0..cells).map(|c| b.track_mu[c * mu_bins + k]).sum()
                        })
                        .collect()
                } else {
                    Vec::new()
                },
                collisions: b.collision_events,
            })
            .collect();

        TallyResult {
            histories: balance.emitted,
            grid,
            mu_bins,
            phi,
            fhat,
            psi,
            balance,
            batch_summaries,
            total_rate,
        }
    }

    /// Box-averaged scalar flux with its batch standard error.
    pub fn global_phi(&self) -> (f64, f64) {
        let sizes: Vec<u64> = self.batch_summaries.iter().map(|b| b.histories).collect();
        let vals: Vec<f64> = self.batch_summaries.iter().map(|b| b.track_total).collect();
        batch_stats(&vals, &sizes, self.total_rate / self.grid.volume())
    }

    /// Box-averaged angular flux in mu bin `k` (per steradian) with error.
    pub fn global_psi(&self, k: usize) -> (f64, f64) {
        let m = self.mu_bins;
        assert!(k < m, "mu bin out of range");
        let d_omega = 4.0 * std::f64::consts::PI / m as f64;
        let sizes: Vec<u64> = self.batch_summaries.iter().map(|b| b.histories).collect();
        let vals: Vec<f64> = self
            .batch_summaries
            .iter()
            .map(|b| b.track_mu_total[k])
            .collect();
        batch_stats(&vals, &sizes, self.total_rate / (self.grid.volume() * d_omega))
    }

    /// Ratio psi(mu_k)/phi with a batch-means standard error, both fields
    /// box-integrated.
    pub fn global_psi_over_phi(&self, k: usize) -> (f64, f64) {
        let m = self.mu_bins;
        assert!(k < m, "mu bin out of range");
        let d_omega = 4.0 * std::f64::consts::PI / m as f64;
        let ratios: Vec<f64> = self
            .batch_summaries
            .iter()
            .map(|b| b.track_mu_total[k] / (b.track_total * d_omega))
            .collect();
        let bf = ratios.len() as f64;
        let mean = ratios.iter().sum::<f64>() / bf;
        let var = ratios.iter().map(|r| (r - mean) * (r - mean)).sum::<f64>()
            / (bf * (bf - 1.0).max(1.0));
        (mean, var.sqrt())
    }

    /// Volume integral of the collision-density tally; equals
    /// total_rate * collisions / histories exactly (analog bookkeeping).
    pub fn integrated_fhat(&self) -> f64 {
        let vol = self.grid.cell_volume();
        self.fhat.mean.iter().sum::<f64>() * vol
    }
}
