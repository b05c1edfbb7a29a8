//! BIC grid search over the penalty weights.
//!
//! The grid spans λ1 directly and the other weights as ratios of it —
//! λ2/λ1, λ3/λ1 — plus the inner lasso constant c1. Every cell is fitted
//! and scored by the Bayesian information criterion
//!
//! ```text
//!   BIC = −2·log L(α̂, β̂, γ̂) + log(n)·|Â|,
//!   Â = {(j,k) : |α̂_jk β̂_k| > zero_threshold}
//! ```
//!
//! with `L` the least-squares loss — the criterion is applied to the loss
//! exactly as written. Taking the log of a raw sum of squares (rather than
//! a Gaussian log-likelihood) is unusual, and on some data scales it puts
//! almost no weight on fit quality; [`BicVariant::Gaussian`] substitutes
//! the Gaussian profile form `n·p·log(L_M/(n·p)) + n·log(L_Y/n) +
//! log(n)·|Â|` for those cases. The literal form stays the default.
//!
//! Cells sharing (λ2/λ1, λ3/λ1, c1) are fitted as one chain from the
//! largest λ1 down, each warm-started from its sparser neighbor; chains
//! run in parallel. The winner minimizes BIC among converged cells (ties
//! break toward larger λ1, then larger λ2, λ3, c1 — the sparser model —
//! so the outcome is a function of weight *values*, never of grid order)
//! and is then re-fit from zeros so the reported solution is independent
//! of the warm-start path.

use crate::error::{Error, Result};
use crate::penalties::PenaltyWeights;
use crate::solver::{fit_with_stats, DesignStats, FitConfig, FitResult, Init, ModelParams, WarmStart};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::path::Path;

/// Which BIC formula scores the grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BicVariant {
    /// `−2·log L + log(n)·|Â|` with L the raw least-squares loss.
    Literal,
    /// Gaussian profile form, `n·p·log(L_M/(n·p)) + n·log(L_Y/n) + log(n)·|Â|`.
    Gaussian,
}

impl std::str::FromStr for BicVariant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "literal" => Ok(BicVariant::Literal),
            "gaussian" => Ok(BicVariant::Gaussian),
            other => Err(Error::InvalidInput(format!(
                "unknown BIC variant '{other}' (expected literal|gaussian)"
            ))),
        }
    }
}

/// Candidate values for each tuning axis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TuningGrid {
    /// λ1 candidates, all strictly positive.
    pub lambda1_values: Vec<f64>,
    /// λ2/λ1 candidates.
    pub ratio2_values: Vec<f64>,
    /// λ3/λ1 candidates.
    pub ratio3_values: Vec<f64>,
    /// Inner-lasso constant candidates.
    pub c1_values: Vec<f64>,
    /// Active-set cutoff on |α̂_jk β̂_k|; coordinates below it count as
    /// zero. Soft-thresholded coordinates are exactly zero in exact
    /// arithmetic — this only guards floating-point dust.
    pub zero_threshold: f64,
}

/// Default active-set cutoff.
pub const DEFAULT_ZERO_THRESHOLD: f64 = 1e-8;

impl TuningGrid {
    /// Default grid placed on the data's own scale: 8 log-spaced λ1 values
    /// spanning [10⁻³, 10]·(‖MᵀX̃‖_max/n), ratios λ2/λ1 ∈ {0, 0.5, 1, 2},
    /// λ3/λ1 ∈ {0.1, 1, 10}, c1 ∈ {0.5, 1, 2}.
    pub fn default_for_data(stats: &DesignStats) -> TuningGrid {
        let scale = stats.scale_factor().max(f64::MIN_POSITIVE);
        let lo = (1e-3 * scale).ln();
        let hi = (10.0 * scale).ln();
        let lambda1_values = (0..8)
            .map(|i| (lo + (hi - lo) * i as f64 / 7.0).exp())
            .collect();
        TuningGrid {
            lambda1_values,
            ratio2_values: vec![0.0, 0.5, 1.0, 2.0],
            ratio3_values: vec![0.1, 1.0, 10.0],
            c1_values: vec![0.5, 1.0, 2.0],
            zero_threshold: DEFAULT_ZERO_THRESHOLD,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.lambda1_values.is_empty()
            || self.ratio2_values.is_empty()
            || self.ratio3_values.is_empty()
            || self.c1_values.is_empty()
        {
            return Err(Error::InvalidInput("tuning grid has an empty axis".into()));
        }
        for v in &self.lambda1_values {
            if !(*v > 0.0 && v.is_finite()) {
                return Err(Error::InvalidInput(format!(
                    "lambda1 grid values must be positive and finite, got {v}"
                )));
            }
        }
        for (name, values) in [
            ("ratio2", &self.ratio2_values),
            ("ratio3", &self.ratio3_values),
            ("c1", &self.c1_values),
        ] {
            for v in values {
                if !(*v >= 0.0 && v.is_finite()) {
                    return Err(Error::InvalidInput(format!(
                        "{name} grid values must be nonnegative and finite, got {v}"
                    )));
                }
            }
        }
        if !(self.zero_threshold >= 0.0 && self.zero_threshold.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "zero_threshold must be nonnegative, got {}",
                self.zero_threshold
            )));
        }
        Ok(())
    }

    /// Total number of cells.
    pub fn len(&self) -> usize {
        self.lambda1_values.len()
            * self.ratio2_values.len()
            * self.ratio3_values.len()
            * self.c1_values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Outcome of one grid cell.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CellRecord {
    pub weights: PenaltyWeights,
    pub bic: f64,
    pub active_set_size: usize,
    pub converged: bool,
    pub objective: f64,
    pub iterations: usize,
}

/// Full grid-search outcome.
#[derive(Debug, Clone)]
pub struct TuningResult {
    /// One record per cell, in canonical grid order (c1 outermost, then
    /// ratio2, ratio3, then λ1 in the order given).
    pub records: Vec<CellRecord>,
    /// Index of the selected cell in `records`.
    pub winner: usize,
    /// The winning fit, re-run from zeros at the winning weights so the
    /// result does not depend on warm-start history.
    pub winner_fit: FitResult,
    /// True when no cell converged and the winner fell back to the best
    /// objective value.
    pub all_cells_failed: bool,
}

/// Number of active paths: entries with `|α̂_jk β̂_k| > zero_threshold`.
pub fn active_set_size(params: &ModelParams, zero_threshold: f64) -> usize {
    let mut count = 0;
    for k in 0..params.p() {
        let b = params.beta[k];
        for j in 0..params.q() {
            if (params.alpha[(j, k)] * b).abs() > zero_threshold {
                count += 1;
            }
        }
    }
    count
}

/// Literal BIC: `−2·log L + log(n)·|Â|`, L the least-squares loss.
///
/// A non-positive loss (perfect fit) leaves the logarithm undefined; the
/// error recommends the Gaussian variant, whose per-equation losses are
/// positive unless the fit is exactly interpolating.
pub fn compute_bic(
    params: &ModelParams,
    loss: f64,
    n: usize,
    zero_threshold: f64,
) -> Result<f64> {
    if n < 2 {
        return Err(Error::InvalidInput(format!("BIC needs n ≥ 2, got {n}")));
    }
    if loss <= 0.0 {
        return Err(Error::NonPositiveLoss { loss });
    }
    let active = active_set_size(params, zero_threshold) as f64;
    Ok(-2.0 * loss.ln() + (n as f64).ln() * active)
}

/// Gaussian-profile BIC:
/// `n·p·log(L_M/(n·p)) + n·log(L_Y/n) + log(n)·|Â|`.
pub fn compute_bic_gaussian(
    params: &ModelParams,
    loss_m: f64,
    loss_y: f64,
    n: usize,
    zero_threshold: f64,
) -> Result<f64> {
    if n < 2 {
        return Err(Error::InvalidInput(format!("BIC needs n ≥ 2, got {n}")));
    }
    if loss_m <= 0.0 || loss_y <= 0.0 {
        return Err(Error::InvalidInput(format!(
            "gaussian BIC undefined: equation losses must be positive, got L_M = {loss_m}, L_Y = {loss_y}"
        )));
    }
    let n_f = n as f64;
    let p = params.p() as f64;
    let active = active_set_size(params, zero_threshold) as f64;
    Ok(n_f * p * (loss_m / (n_f * p)).ln() + n_f * (loss_y / n_f).ln() + n_f.ln() * active)
}

fn score_cell(
    stats: &DesignStats,
    variant: BicVariant,
    zero_threshold: f64,
    weights: PenaltyWeights,
    fit: &FitResult,
) -> Result<CellRecord> {
    let bic = match variant {
        BicVariant::Literal => {
            let loss = stats.loss(&fit.params);
            compute_bic(&fit.params, loss, stats.n, zero_threshold)?
        }
        BicVariant::Gaussian => {
            let (loss_m, loss_y) = stats.loss_split(&fit.params);
            compute_bic_gaussian(&fit.params, loss_m, loss_y, stats.n, zero_threshold)?
        }
    };
    Ok(CellRecord {
        weights,
        bic,
        active_set_size: active_set_size(&fit.params, zero_threshold),
        converged: fit.converged,
        objective: fit.objective,
        iterations: fit.state.iteration,
    })
}

/// True when `a` beats `b` under the winner order: lower BIC first, then
/// larger λ1, λ2, λ3, c1 (the sparser model). Defined entirely on weight
/// values, so grid order never changes the winner.
fn beats(a: &CellRecord, b: &CellRecord) -> bool {
    if a.bic != b.bic {
        return a.bic < b.bic;
    }
    let key_a = [a.weights.lambda1, a.weights.lambda2, a.weights.lambda3, a.weights.c1];
    let key_b = [b.weights.lambda1, b.weights.lambda2, b.weights.lambda3, b.weights.c1];
    for (x, y) in key_a.iter().zip(&key_b) {
        if x != y {
            return x > y;
        }
    }
    false
}

/// Fit and score every grid cell, returning the per-cell table and the
/// selected fit.
///
/// `base` supplies everything the grid does not vary: c0, ρ, tol,
/// max_iter. When `warm_start` is set (the default for callers that want
/// speed), each chain of λ1 values reuses its predecessor's solution;
/// otherwise every cell starts from zeros and results are independent of
/// evaluation order and parallel schedule. Non-converged cells are
/// recorded but only win when nothing converged (then by objective,
/// flagged via `all_cells_failed`).
pub fn grid_search(
    stats: &DesignStats,
    grid: &TuningGrid,
    base: &FitConfig,
    variant: BicVariant,
    warm_start: bool,
) -> Result<TuningResult> {
    grid.validate()?;
    base.weights.validate()?;

    // Chains: one per (c1, ratio2, ratio3) combo, λ1 fitted descending.
    let mut combos = Vec::new();
    for &c1 in &grid.c1_values {
        for &r2 in &grid.ratio2_values {
            for &r3 in &grid.ratio3_values {
                combos.push((c1, r2, r3));
            }
        }
    }
    let mut lambda1_desc: Vec<(usize, f64)> =
        grid.lambda1_values.iter().copied().enumerate().collect();
    lambda1_desc.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap());
    let n_lambda = grid.lambda1_values.len();

    let chain_results: Vec<Result<Vec<(usize, CellRecord)>>> = combos
        .par_iter()
        .enumerate()
        .map(|(combo_idx, &(c1, r2, r3))| {
            let mut chain = Vec::with_capacity(n_lambda);
            let mut carry: Option<WarmStart> = None;
            for &(orig_idx, lambda1) in &lambda1_desc {
                let weights = PenaltyWeights {
                    lambda1,
                    lambda2: r2 * lambda1,
                    lambda3: r3 * lambda1,
                    c1,
                    ..base.weights
                };
                let init = match (&carry, warm_start) {
                    (Some(ws), true) => Init::Warm(ws.clone()),
                    _ => Init::Zeros,
                };
                let config = FitConfig {
                    weights,
                    tol: base.tol,
                    max_iter: base.max_iter,
                    init,
                };
                let fit = fit_with_stats(stats, &config)?;
                let record = score_cell(stats, variant, grid.zero_threshold, weights, &fit)?;
                carry = Some(WarmStart {
                    params: fit.params,
                    mu: fit.state.mu,
                    tau: fit.state.tau,
                });
                chain.push((combo_idx * n_lambda + orig_idx, record));
            }
            Ok(chain)
        })
        .collect();

    let mut records: Vec<Option<CellRecord>> = vec![None; combos.len() * n_lambda];
    for chain in chain_results {
        for (slot, record) in chain? {
            records[slot] = Some(record);
        }
    }
    let records: Vec<CellRecord> = records.into_iter().map(|r| r.unwrap()).collect();

    // Winner: best converged cell; fall back to best objective when no
    // cell converged.
    let converged_winner = records
        .iter()
        .enumerate()
        .filter(|(_, r)| r.converged)
        .fold(None::<usize>, |best, (i, r)| match best {
            Some(b) if !beats(r, &records[b]) => Some(b),
            _ => Some(i),
        });
    let (winner, all_cells_failed) = match converged_winner {
        Some(i) => (i, false),
        None => {
            log::warn!(
                "no grid cell converged within max_iter = {}; selecting the best objective instead of BIC",
                base.max_iter
            );
            let mut best = 0;
            for i in 1..records.len() {
                let better = records[i].objective < records[best].objective
                    || (records[i].objective == records[best].objective
                        && beats(&records[i], &records[best]));
                if better {
                    best = i;
                }
            }
            (best, true)
        }
    };

    // Re-fit the winner from zeros: the reported solution must not depend
    // on which warm-start path happened to reach it.
    let winner_config = FitConfig {
        weights: records[winner].weights,
        tol: base.tol,
        max_iter: base.max_iter,
        init: Init::Zeros,
    };
    let winner_fit = fit_with_stats(stats, &winner_config)?;

    Ok(TuningResult {
        records,
        winner,
        winner_fit,
        all_cells_failed,
    })
}

/// Write the grid table as CSV, one row per cell, flagging the winner.
pub fn export_grid_csv(result: &TuningResult, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut writer = csv::Writer::from_path(path)
        .map_err(|e| Error::io(path.display().to_string(), std::io::Error::other(e.to_string())))?;
    writer
        .write_record([
            "lambda1",
            "lambda2",
            "lambda3",
            "c1",
            "bic",
            "active_set_size",
            "converged",
            "objective",
            "iterations",
            "winner",
        ])
        .map_err(|e| Error::Serde(e.to_string()))?;
    for (i, r) in result.records.iter().enumerate() {
        writer
            .write_record([
                r.weights.lambda1.to_string(),
                r.weights.lambda2.to_string(),
                r.weights.lambda3.to_string(),
                r.weights.c1.to_string(),
                r.bic.to_string(),
                r.active_set_size.to_string(),
                r.converged.to_string(),
                r.objective.to_string(),
                r.iterations.to_string(),
                (i == result.winner).to_string(),
            ])
            .map_err(|e| Error::Serde(e.to_string()))?;
    }
    writer.flush().map_err(|e| Error::io(path.display().to_string(), e))?;
    Ok(())
}
