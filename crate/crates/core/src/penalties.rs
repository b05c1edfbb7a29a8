//! Penalty evaluation and the soft-threshold primitive.
//!
//! The fitted objective is
//!
//! ```text
//!   (1/2) L(α, β, γ) + λ1 R1(α, β) + λ2 R2(α, β) + λ3 R3(γ)
//! ```
//!
//! where `L` is the summed residual sum of squares of the mediator and
//! outcome equations, and
//!
//! * `R1 = Σ_{j,k} { |α_jk β_k| + c0 (α_jk² + β_k²) } + c1 (Σ|α_jk| + Σ|β_k|)`
//!   — the pathway penalty: the product term shrinks whole
//!   exposure→mediator→outcome paths, the quadratic (with `c0 ≥ 1/2`)
//!   convexifies it, and `c1` adds an ordinary lasso on the pieces;
//! * `R2 = Σ_j √p · ‖(α_j1 β_1, …, α_jp β_p)‖₂` — a group lasso that can
//!   remove every path out of one exposure at once;
//! * `R3 = Σ_j |γ_j|` — a lasso on the direct effects.

use crate::error::{Error, Result};
use crate::solver::{DesignStats, ModelParams};
use crate::util::{pairwise_sum, pairwise_sum_iter};
use serde::{Deserialize, Serialize};

/// Minimum admissible convexification constant: `|ab| + c0(a² + b²)` is
/// convex exactly when `c0 ≥ 1/2`.
pub const C0_FLOOR: f64 = 0.5;

/// Penalty weights and the augmented-Lagrangian constant.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PenaltyWeights {
    /// Weight of the pathway penalty R1 (and scale for the soft thresholds
    /// in the closed-form updates).
    pub lambda1: f64,
    /// Weight of the exposure-wise group penalty R2.
    pub lambda2: f64,
    /// Weight of the direct-effect lasso R3.
    pub lambda3: f64,
    /// Convexification constant inside R1; fixed to 2 by default.
    pub c0: f64,
    /// Inner lasso weight inside R1.
    pub c1: f64,
    /// Augmented-Lagrangian constant; 1 by default.
    pub rho: f64,
}

impl Default for PenaltyWeights {
    fn default() -> Self {
        PenaltyWeights {
            lambda1: 0.0,
            lambda2: 0.0,
            lambda3: 0.0,
            c0: 2.0,
            c1: 1.0,
            rho: 1.0,
        }
    }
}

impl PenaltyWeights {
    /// Validate ranges: all weights finite and nonnegative, `c0 ≥ 1/2`,
    /// `rho > 0`.
    pub fn validate(&self) -> Result<()> {
        let all = [
            ("lambda1", self.lambda1),
            ("lambda2", self.lambda2),
            ("lambda3", self.lambda3),
            ("c0", self.c0),
            ("c1", self.c1),
            ("rho", self.rho),
        ];
        for (name, v) in all {
            if !v.is_finite() {
                return Err(Error::BadWeights(format!("{name} = {v} is not finite")));
            }
            if v < 0.0 {
                return Err(Error::BadWeights(format!("{name} = {v} is negative")));
            }
        }
        if self.c0 < C0_FLOOR {
            return Err(Error::BadWeights(format!(
                "c0 = {} is below the convexity floor {}",
                self.c0, C0_FLOOR
            )));
        }
        if self.rho <= 0.0 {
            return Err(Error::BadWeights("rho must be strictly positive".into()));
        }
        Ok(())
    }
}

/// Soft-thresholding operator `S(a, λ) = sgn(a) · max(|a| − λ, 0)`.
///
/// This is the proximal operator of `λ|·|`; the closed-form updates apply
/// it elementwise.
#[inline]
pub fn soft_threshold(a: f64, lam: f64) -> f64 {
    debug_assert!(lam >= 0.0);
    if a > lam {
        a - lam
    } else if a < -lam {
        a + lam
    } else {
        0.0
    }
}

/// Pathway penalty
/// `R1 = Σ_{j,k} { |α_jk β_k| + c0(α_jk² + β_k²) } + c1(Σ|α_jk| + Σ|β_k|)`.
///
/// Note the Σ_{j,k} runs over all q·p pairs, so each `β_k²` and `|β_k|`
/// appears once per exposure row in the double sum — the `q·Σ_k β_k²`
/// weighting is deliberate and matches the closed-form updates.
pub fn eval_r1(alpha: &nalgebra::DMatrix<f64>, beta: &nalgebra::DVector<f64>, w: &PenaltyWeights) -> f64 {
    let q = alpha.nrows();
    let p = alpha.ncols();
    debug_assert_eq!(beta.len(), p);
    let mut terms = Vec::with_capacity(q * p);
    for j in 0..q {
        for k in 0..p {
            let a = alpha[(j, k)];
            let b = beta[k];
            terms.push((a * b).abs() + w.c0 * (a * a + b * b) + w.c1 * a.abs());
        }
    }
    // The c1 Σ|β_k| block is a single pass over k, outside the double sum.
    let beta_l1 = pairwise_sum_iter(beta.iter().map(|b| b.abs()));
    pairwise_sum(&terms) + w.c1 * beta_l1
}

/// Group penalty `R2 = Σ_j √p · √(Σ_k (α_jk β_k)²)`.
pub fn eval_r2(alpha: &nalgebra::DMatrix<f64>, beta: &nalgebra::DVector<f64>) -> f64 {
    let q = alpha.nrows();
    let p = alpha.ncols();
    let sqrt_p = (p as f64).sqrt();
    let rows: Vec<f64> = (0..q)
        .map(|j| {
            let sq = pairwise_sum_iter((0..p).map(|k| {
                let prod = alpha[(j, k)] * beta[k];
                prod * prod
            }));
            sqrt_p * sq.sqrt()
        })
        .collect();
    pairwise_sum(&rows)
}

/// Direct-effect lasso `R3 = Σ_j |γ_j|`.
pub fn eval_r3(gamma: &nalgebra::DVector<f64>) -> f64 {
    pairwise_sum_iter(gamma.iter().map(|g| g.abs()))
}

/// Penalized objective `½ L + λ1 R1 + λ2 R2 + λ3 R3`, with the loss evaluated
/// from cached sufficient statistics (see [`DesignStats`]): iterating the
/// solver never touches the n-row data matrices.
pub fn eval_objective(params: &ModelParams, stats: &DesignStats, w: &PenaltyWeights) -> f64 {
    let loss = stats.loss(params);
    0.5 * loss
        + w.lambda1 * eval_r1(&params.alpha, &params.beta, w)
        + w.lambda2 * eval_r2(&params.alpha, &params.beta)
        + w.lambda3 * eval_r3(&params.gamma)
}
