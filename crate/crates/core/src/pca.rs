//! Principal-component compression of the exposure block.
//!
//! The raw exposures (hundreds of correlated assay columns) are reduced to
//! `q` uncorrelated composite exposures X̃ — the inputs the structural model
//! actually sees. Components come from a singular value decomposition of the
//! centered (optionally variance-scaled) matrix, which stays stable when
//! there are more columns than rows. `q` is chosen as the smallest count
//! whose cumulative explained-variance ratio reaches a threshold.
//!
//! Loading signs are fixed deterministically (largest-magnitude entry of
//! each column made positive), so a fitted [`PcaModel`] — and everything
//! downstream of it — is reproducible across runs and platforms.

use crate::error::{Error, Result};
use crate::util::{matrix_to_rows, rows_to_matrix};
use nalgebra::DMatrix;
use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

/// A fitted principal-component model of the exposure block.
///
/// `loadings` holds one component direction per column, ordered by
/// decreasing component variance; columns are orthonormal. `scales` is all
/// ones when scaling was disabled, so the standardization applied at fit
/// time can always be replayed exactly.
#[derive(Debug, Clone, PartialEq)]
pub struct PcaModel {
    /// Per-column means of the fitting data (length r).
    pub means: Vec<f64>,
    /// Per-column scale divisors (length r; all 1.0 when scaling was off).
    pub scales: Vec<f64>,
    /// r×k component directions, one per column, variance-ordered.
    pub loadings: DMatrix<f64>,
    /// Fraction of total variance captured by each component (length k,
    /// nonincreasing, sums to ≤ 1).
    pub variance_ratios: Vec<f64>,
    /// Selected component count; starts at k after fitting and is narrowed
    /// by [`select_num_components`].
    pub q: usize,
}

impl PcaModel {
    /// Number of original exposure columns.
    pub fn r(&self) -> usize {
        self.loadings.nrows()
    }

    /// Number of retained components (before selection narrows `q`).
    pub fn k(&self) -> usize {
        self.loadings.ncols()
    }

    /// Cumulative explained-variance ratio through each component.
    pub fn cumulative_ratios(&self) -> Vec<f64> {
        let mut acc = 0.0;
        self.variance_ratios
            .iter()
            .map(|r| {
                acc += r;
                acc
            })
            .collect()
    }
}

/// JSON wire form: loadings as row-major nested arrays.
#[derive(Serialize, Deserialize)]
struct PcaModelWire {
    means: Vec<f64>,
    scales: Vec<f64>,
    loadings: Vec<Vec<f64>>,
    variance_ratios: Vec<f64>,
    q: usize,
}

impl Serialize for PcaModel {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        PcaModelWire {
            means: self.means.clone(),
            scales: self.scales.clone(),
            loadings: matrix_to_rows(&self.loadings),
            variance_ratios: self.variance_ratios.clone(),
            q: self.q,
        }
        .serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for PcaModel {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let wire = PcaModelWire::deserialize(deserializer)?;
        let loadings = rows_to_matrix(&wire.loadings).map_err(D::Error::custom)?;
        let r = loadings.nrows();
        let k = loadings.ncols();
        if wire.means.len() != r || wire.scales.len() != r {
            return Err(D::Error::custom(format!(
                "means/scales length must match the {r} loading rows"
            )));
        }
        if wire.variance_ratios.len() != k {
            return Err(D::Error::custom(format!(
                "variance_ratios length must match the {k} loading columns"
            )));
        }
        if wire.q == 0 || wire.q > k {
            return Err(D::Error::custom(format!(
                "q = {} is outside 1..={k}",
                wire.q
            )));
        }
        Ok(PcaModel {
            means: wire.means,
            scales: wire.scales,
            loadings,
            variance_ratios: wire.variance_ratios,
            q: wire.q,
        })
    }
}

/// Fit a principal-component model to the adjusted exposure matrix.
///
/// Columns are mean-centered and, when `scale` is set, divided by their
/// sample standard deviation (a constant column is then an error — there is
/// nothing to scale by). The SVD of the standardized matrix supplies the
/// component directions and variances; trailing components whose singular
/// value is numerically zero are dropped, so `k` never exceeds the data
/// rank (and never exceeds n−1, centering having removed one dimension).
///
/// The returned model has `q = k`; narrow it with
/// [`select_num_components`].
pub fn fit_pca(x_adj: &DMatrix<f64>, scale: bool) -> Result<PcaModel> {
    let n = x_adj.nrows();
    let r = x_adj.ncols();
    if n < 2 {
        return Err(Error::InvalidInput(format!(
            "PCA needs at least 2 rows, got {n}"
        )));
    }
    if r == 0 {
        return Err(Error::InvalidInput("exposure block has no columns".into()));
    }
    if !x_adj.iter().all(|v| v.is_finite()) {
        return Err(Error::InvalidInput(
            "non-finite entry in the exposure block".into(),
        ));
    }

    let mut means = vec![0.0; r];
    let mut scales = vec![1.0; r];
    let mut work = x_adj.clone();
    for j in 0..r {
        let mean = work.column(j).sum() / n as f64;
        means[j] = mean;
        for i in 0..n {
            work[(i, j)] -= mean;
        }
    }
    if scale {
        for j in 0..r {
            let ss: f64 = work.column(j).iter().map(|v| v * v).sum();
            let sd = (ss / (n - 1) as f64).sqrt();
            if sd <= 1e-12 * means[j].abs().max(1.0) {
                return Err(Error::ZeroVariance(format!(
                    "exposure column {j} is constant; disable scaling or drop it"
                )));
            }
            scales[j] = sd;
            for i in 0..n {
                work[(i, j)] /= sd;
            }
        }
    }

    let svd = work.svd(false, true);
    let sv = &svd.singular_values; // sorted nonincreasing
    let v_t = svd
        .v_t
        .as_ref()
        .expect("right singular vectors were requested");
    let sv_max = sv[0];
    if sv_max <= 0.0 {
        return Err(Error::ZeroVariance(
            "exposure block has zero variance after centering".into(),
        ));
    }
    // Numerical-rank cutoff; also cap at n−1 (centering removes one
    // dimension even when rounding leaves its singular value slightly
    // above the cutoff).
    let tol = sv_max * f64::EPSILON * n.max(r) as f64;
    let k = sv
        .iter()
        .take_while(|s| **s > tol)
        .count()
        .min(n - 1)
        .max(1);
    let total_var: f64 = sv.iter().map(|s| s * s).sum();

    let mut loadings = DMatrix::zeros(r, k);
    for c in 0..k {
        for row in 0..r {
            loadings[(row, c)] = v_t[(c, row)];
        }
        // Deterministic sign: make the largest-magnitude entry positive
        // (first such entry on exact ties).
        let mut best = 0;
        for row in 1..r {
            if loadings[(row, c)].abs() > loadings[(best, c)].abs() {
                best = row;
            }
        }
        if loadings[(best, c)] < 0.0 {
            for row in 0..r {
                loadings[(row, c)] = -loadings[(row, c)];
            }
        }
    }
    let variance_ratios: Vec<f64> = (0..k).map(|i| sv[i] * sv[i] / total_var).collect();

    Ok(PcaModel {
        means,
        scales,
        loadings,
        variance_ratios,
        q: k,
    })
}

/// Smallest component count whose cumulative variance ratio reaches
/// `threshold` (a fraction in (0, 1]).
///
/// When even all `k` components fall short — possible when scaling was off
/// and trailing rank was dropped — the full count is returned and a warning
/// is logged rather than raising an error.
pub fn select_num_components(model: &PcaModel, threshold: f64) -> Result<usize> {
    if !(threshold > 0.0 && threshold <= 1.0) {
        return Err(Error::InvalidInput(format!(
            "variance threshold must lie in (0, 1], got {threshold}"
        )));
    }
    let mut acc = 0.0;
    for (i, ratio) in model.variance_ratios.iter().enumerate() {
        acc += ratio;
        if acc >= threshold {
            return Ok(i + 1);
        }
    }
    log::warn!(
        "variance threshold {threshold} unreachable (total captured {acc:.6}); using all {} components",
        model.k()
    );
    Ok(model.k())
}

/// Project exposure rows onto the first `q` components.
///
/// Applies the stored standardization and returns the n×q score matrix.
/// Transforming the fitting data reproduces the scores the model was built
/// from, bit for bit.
pub fn transform(model: &PcaModel, x_adj: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let r = model.r();
    if x_adj.ncols() != r {
        return Err(Error::InvalidInput(format!(
            "exposure matrix has {} columns but the model was fitted on {r}",
            x_adj.ncols()
        )));
    }
    let n = x_adj.nrows();
    let mut standardized = x_adj.clone();
    for j in 0..r {
        let mean = model.means[j];
        let scale = model.scales[j];
        for i in 0..n {
            standardized[(i, j)] = (standardized[(i, j)] - mean) / scale;
        }
    }
    Ok(&standardized * model.loadings.columns(0, model.q))
}
