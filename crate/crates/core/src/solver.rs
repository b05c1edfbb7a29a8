//! Augmented-Lagrangian solver for the two-equation structural model.
//!
//! The model couples a mediator equation and an outcome equation,
//!
//! ```text
//!   M = X̃ α + ε            (n×p)
//!   Y = X̃ γ + M β + η      (n)
//! ```
//!
//! and the estimator minimizes `½L + λ1 R1 + λ2 R2 + λ3 R3` where `L` is the
//! summed residual sum of squares of both equations. Because R1/R2 penalize
//! the *products* `α_jk β_k`, the problem is rewritten with auxiliary
//! variables `μ_jk = α_jk β_k` and multipliers `τ_jk`, giving an augmented
//! Lagrangian whose blocks all have closed-form minimizers:
//!
//! * `μ`  — a group soft-threshold composed with an elementwise one (Eq. 4),
//! * `α_j` — diagonal-system soft-threshold solve, Jacobi across `j` (Eq. 5),
//! * `β`  — symmetric positive-definite solve of a thresholded score (Eq. 6),
//! * `γ`  — thresholded least-squares on the score design (Eq. 7),
//! * `τ`  — dual ascent on the constraint residual (Eq. 8).
//!
//! One iteration applies the updates in exactly that order. The loop stops
//! when the penalized objective changes by less than `tol` *and* the
//! constraint residual `max|μ − α∘β|` is at most [`CONSTRAINT_TOL`]; only
//! then is the run declared converged. Hitting `max_iter` returns the
//! best-objective iterate with `converged = false` — a reported status, not
//! an error, so grid tuning can proceed past hard cells.
//!
//! Iterations never touch the n-row data: all updates and the objective are
//! computed from cached sufficient statistics ([`DesignStats`]), making the
//! per-iteration cost independent of the sample size.

use crate::error::{Error, Result};
use crate::penalties::{eval_objective, soft_threshold, PenaltyWeights};
use crate::util::{matrix_to_rows, rows_to_matrix};
use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

/// Constraint-residual bound that a run must satisfy (in addition to the
/// objective-difference rule) to be declared converged.
pub const CONSTRAINT_TOL: f64 = 1e-5;

/// Path coefficients of the structural model.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    /// Exposure → mediator paths, q×p: row j holds the effects of score j.
    pub alpha: DMatrix<f64>,
    /// Mediator → outcome paths, length p.
    pub beta: DVector<f64>,
    /// Exposure → outcome direct paths, length q.
    pub gamma: DVector<f64>,
}

impl ModelParams {
    /// All-zero parameters for given dimensions.
    pub fn zeros(q: usize, p: usize) -> Self {
        ModelParams {
            alpha: DMatrix::zeros(q, p),
            beta: DVector::zeros(p),
            gamma: DVector::zeros(q),
        }
    }

    /// Number of exposure components.
    pub fn q(&self) -> usize {
        self.alpha.nrows()
    }

    /// Number of mediators.
    pub fn p(&self) -> usize {
        self.alpha.ncols()
    }

    /// Entrywise products α_jk β_k — the path-effect matrix.
    pub fn path_products(&self) -> DMatrix<f64> {
        let mut prod = self.alpha.clone();
        for k in 0..prod.ncols() {
            let b = self.beta[k];
            for j in 0..prod.nrows() {
                prod[(j, k)] *= b;
            }
        }
        prod
    }
}

/// Auxiliary ADMM variables and the optimization trace.
#[derive(Debug, Clone)]
pub struct AdmmState {
    /// Auxiliary products, μ_jk targets α_jk β_k at convergence.
    pub mu: DMatrix<f64>,
    /// Lagrange multipliers, same shape as μ.
    pub tau: DMatrix<f64>,
    /// Completed iterations.
    pub iteration: usize,
    /// Penalized objective after each completed iteration.
    pub objective_trace: Vec<f64>,
}

impl AdmmState {
    fn zeros(q: usize, p: usize) -> Self {
        AdmmState {
            mu: DMatrix::zeros(q, p),
            tau: DMatrix::zeros(q, p),
            iteration: 0,
            objective_trace: Vec::new(),
        }
    }

    /// `max_{j,k} |μ_jk − α_jk β_k|` — the ADMM constraint residual.
    pub fn constraint_residual(&self, params: &ModelParams) -> f64 {
        let mut worst = 0.0f64;
        for k in 0..self.mu.ncols() {
            let b = params.beta[k];
            for j in 0..self.mu.nrows() {
                worst = worst.max((self.mu[(j, k)] - params.alpha[(j, k)] * b).abs());
            }
        }
        worst
    }
}

/// Warm-start point: primal parameters plus the ADMM auxiliaries.
#[derive(Debug, Clone, PartialEq)]
pub struct WarmStart {
    pub params: ModelParams,
    pub mu: DMatrix<f64>,
    pub tau: DMatrix<f64>,
}

impl WarmStart {
    /// Warm start from bare parameters: μ is seeded at the constraint
    /// target α∘β and τ at zero.
    pub fn from_params(params: ModelParams) -> Self {
        let mu = params.path_products();
        let tau = DMatrix::zeros(mu.nrows(), mu.ncols());
        WarmStart { params, mu, tau }
    }
}

/// Where a fit starts from.
#[derive(Debug, Clone, PartialEq, Default)]
pub enum Init {
    /// All parameters and ADMM auxiliaries at zero (the default).
    #[default]
    Zeros,
    /// Continue from a previous solution — how the tuning grid chains
    /// neighboring cells.
    Warm(WarmStart),
}

// Config files and fit-record echoes carry only the *mode*: warm-start
// payloads are in-memory solver state, not configuration. A file asking
// for "warm" therefore cannot be honored and is rejected on load.
impl Serialize for Init {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            Init::Zeros => serializer.serialize_str("zeros"),
            Init::Warm(_) => serializer.serialize_str("warm"),
        }
    }
}

impl<'de> Deserialize<'de> for Init {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let tag = String::deserialize(deserializer)?;
        match tag.as_str() {
            "zeros" => Ok(Init::Zeros),
            "warm" => Err(D::Error::custom(
                "init = \"warm\" cannot be loaded from a file; warm starts are supplied programmatically",
            )),
            other => Err(D::Error::custom(format!(
                "unknown init mode '{other}' (expected \"zeros\")"
            ))),
        }
    }
}

/// Solver configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitConfig {
    /// Penalty weights and the augmented-Lagrangian constant.
    pub weights: PenaltyWeights,
    /// Objective-difference stopping threshold.
    pub tol: f64,
    /// Iteration cap.
    pub max_iter: usize,
    /// Starting point (zeros unless a warm start is attached).
    #[serde(default)]
    pub init: Init,
}

impl Default for FitConfig {
    fn default() -> Self {
        FitConfig {
            weights: PenaltyWeights::default(),
            tol: 1e-6,
            max_iter: 10_000,
            init: Init::Zeros,
        }
    }
}

impl FitConfig {
    fn validate(&self) -> Result<()> {
        self.weights.validate()?;
        if !(self.tol > 0.0) {
            return Err(Error::InvalidInput(format!(
                "tol must be positive, got {}",
                self.tol
            )));
        }
        if self.max_iter == 0 {
            return Err(Error::InvalidInput("max_iter must be at least 1".into()));
        }
        Ok(())
    }
}

/// Sufficient statistics of a fit problem.
///
/// Everything the updates and the objective need, reduced once from the
/// n-row matrices: `G = X̃ᵀX̃`, `X̃ᵀM`, `MᵀM`, `MᵀY`, `X̃ᵀY`, `YᵀY`,
/// `tr(MᵀM)`. Iterating afterwards costs O(q²p + p³) per pass regardless
/// of n.
#[derive(Debug, Clone)]
pub struct DesignStats {
    /// Sample size (used by BIC and default grids).
    pub n: usize,
    /// Score count q.
    pub q: usize,
    /// Mediator count p.
    pub p: usize,
    /// G = X̃ᵀX̃, q×q.
    pub g: DMatrix<f64>,
    /// X̃ᵀM, q×p.
    pub xtm: DMatrix<f64>,
    /// MᵀM, p×p.
    pub mtm: DMatrix<f64>,
    /// MᵀY, length p.
    pub mty: DVector<f64>,
    /// X̃ᵀY, length q.
    pub xty: DVector<f64>,
    /// YᵀY.
    pub yty: f64,
    /// tr(MᵀM).
    pub tr_mtm: f64,
    cholesky_g: Cholesky<f64, Dyn>,
}

impl DesignStats {
    /// Reduce a problem to its sufficient statistics, validating shapes and
    /// finiteness.
    pub fn new(xt: &DMatrix<f64>, m: &DMatrix<f64>, y: &DVector<f64>) -> Result<Self> {
        let n = xt.nrows();
        let q = xt.ncols();
        let p = m.ncols();
        if q == 0 || p == 0 {
            return Err(Error::InvalidInput(
                "need at least one exposure score and one mediator".into(),
            ));
        }
        if m.nrows() != n || y.len() != n {
            return Err(Error::InvalidInput(format!(
                "row mismatch: X̃ has {n} rows, M has {}, Y has {}",
                m.nrows(),
                y.len()
            )));
        }
        if n < 2 {
            return Err(Error::InvalidInput("need at least two rows".into()));
        }
        let finite =
            xt.iter().all(|v| v.is_finite()) && m.iter().all(|v| v.is_finite()) && y.iter().all(|v| v.is_finite());
        if !finite {
            return Err(Error::InvalidInput("non-finite entry in fit inputs".into()));
        }
        let g = xt.transpose() * xt;
        let cholesky_g = Cholesky::new(g.clone()).ok_or(Error::SingularSystem {
            context: "score Gram matrix X̃ᵀX̃",
            hint: "a score column has zero variance; reduce q to the data rank",
        })?;
        let mtm = m.transpose() * m;
        let tr_mtm = mtm.diagonal().sum();
        Ok(DesignStats {
            n,
            q,
            p,
            xtm: xt.transpose() * m,
            mtm,
            mty: m.transpose() * y,
            xty: xt.transpose() * y,
            yty: y.dot(y),
            tr_mtm,
            g,
            cholesky_g,
        })
    }

    /// Least-squares loss
    /// `L = tr{(M−X̃α)ᵀ(M−X̃α)} + (Y−X̃γ−Mβ)ᵀ(Y−X̃γ−Mβ)`
    /// evaluated from the cached statistics.
    pub fn loss(&self, params: &ModelParams) -> f64 {
        let a = &params.alpha;
        let b = &params.beta;
        let gm = &params.gamma;
        // Mediator block: tr(MᵀM) − 2⟨α, X̃ᵀM⟩ + ⟨α, Gα⟩.
        let ga = &self.g * a;
        let mut cross = 0.0;
        let mut quad = 0.0;
        for k in 0..self.p {
            for j in 0..self.q {
                cross += a[(j, k)] * self.xtm[(j, k)];
                quad += a[(j, k)] * ga[(j, k)];
            }
        }
        let loss_m = self.tr_mtm - 2.0 * cross + quad;
        // Outcome block: YᵀY − 2γᵀX̃ᵀY − 2βᵀMᵀY + 2βᵀ(MᵀX̃)γ + γᵀGγ + βᵀMᵀMβ.
        let xtm_t_b_gamma = (self.xtm.transpose() * gm).dot(b);
        let loss_y = self.yty - 2.0 * gm.dot(&self.xty) - 2.0 * b.dot(&self.mty)
            + 2.0 * xtm_t_b_gamma
            + gm.dot(&(&self.g * gm))
            + b.dot(&(&self.mtm * b));
        loss_m + loss_y
    }

    /// Mediator-equation and outcome-equation losses separately (for the
    /// Gaussian BIC variant).
    pub fn loss_split(&self, params: &ModelParams) -> (f64, f64) {
        let a = &params.alpha;
        let b = &params.beta;
        let gm = &params.gamma;
        let ga = &self.g * a;
        let mut cross = 0.0;
        let mut quad = 0.0;
        for k in 0..self.p {
            for j in 0..self.q {
                cross += a[(j, k)] * self.xtm[(j, k)];
                quad += a[(j, k)] * ga[(j, k)];
            }
        }
        let loss_m = self.tr_mtm - 2.0 * cross + quad;
        let xtm_t_b_gamma = (self.xtm.transpose() * gm).dot(b);
        let loss_y = self.yty - 2.0 * gm.dot(&self.xty) - 2.0 * b.dot(&self.mty)
            + 2.0 * xtm_t_b_gamma
            + gm.dot(&(&self.g * gm))
            + b.dot(&(&self.mtm * b));
        (loss_m, loss_y)
    }

    /// Data-scale factor `‖MᵀX̃‖_max / n` used to place default λ1 grids.
    pub fn scale_factor(&self) -> f64 {
        self.xtm.iter().fold(0.0f64, |acc, v| acc.max(v.abs())) / self.n as f64
    }

    /// Largest diagonal entry of G = X̃ᵀX̃.
    pub fn g_max_diag(&self) -> f64 {
        self.g.diagonal().iter().fold(0.0f64, |acc, v| acc.max(*v))
    }
}

/// Eq. (4): closed-form μ update.
///
/// For each exposure row j, with `ν_j = α_j ∘ β − τ_j/ρ` and
/// `s_j = S(ν_j, λ1/ρ)` elementwise,
///
/// ```text
///   μ_j = {‖s_j‖₂ − λ2 √p / ρ}₊ · s_j / ‖s_j‖₂      (0 when ‖s_j‖₂ = 0)
/// ```
///
/// — the group soft-threshold wrapped around the elementwise one. A whole
/// row vanishes exactly when `‖s_j‖₂ ≤ λ2 √p / ρ`.
pub fn update_mu(params: &ModelParams, state: &AdmmState, w: &PenaltyWeights) -> DMatrix<f64> {
    let q = params.q();
    let p = params.p();
    let group_thresh = w.lambda2 * (p as f64).sqrt() / w.rho;
    let elem_thresh = w.lambda1 / w.rho;
    let mut mu = DMatrix::zeros(q, p);
    for j in 0..q {
        let mut norm_sq = 0.0;
        for k in 0..p {
            let nu = params.alpha[(j, k)] * params.beta[k] - state.tau[(j, k)] / w.rho;
            let s = soft_threshold(nu, elem_thresh);
            mu[(j, k)] = s;
            norm_sq += s * s;
        }
        let norm = norm_sq.sqrt();
        if norm > group_thresh && norm > 0.0 {
            let scale = (norm - group_thresh) / norm;
            for k in 0..p {
                mu[(j, k)] *= scale;
            }
        } else {
            for k in 0..p {
                mu[(j, k)] = 0.0;
            }
        }
    }
    mu
}

/// Eq. (5): closed-form α update, Jacobi across rows.
///
/// For each j: `α_j = V_j⁻¹ S(w_j, λ1 c1)` with the diagonal
/// `V_j = ρ D²_β + (2 c0 λ1 + x̃_jᵀx̃_j) I` and score
/// `w_j = (M − Σ_{l≠j} x̃_l α_lᵀ)ᵀ x̃_j + D_β τ_j + ρ D_β μ_j`.
/// The `l≠j` sum uses the incoming α for every row (Jacobi, as the formula
/// is written), so the whole update depends only on iterate-s values.
pub fn update_alpha(
    params: &ModelParams,
    state: &AdmmState,
    stats: &DesignStats,
    w: &PenaltyWeights,
) -> DMatrix<f64> {
    let q = params.q();
    let p = params.p();
    let thresh = w.lambda1 * w.c1;
    let ridge = 2.0 * w.c0 * w.lambda1;
    // Cross-row contribution: (Gα)_jk − G_jj α_jk removes the l=j term.
    let ga = &stats.g * &params.alpha;
    let mut alpha = DMatrix::zeros(q, p);
    for j in 0..q {
        let gjj = stats.g[(j, j)];
        for k in 0..p {
            let b = params.beta[k];
            let w_jk = stats.xtm[(j, k)] - (ga[(j, k)] - gjj * params.alpha[(j, k)])
                + b * state.tau[(j, k)]
                + w.rho * b * state.mu[(j, k)];
            let v_jk = w.rho * b * b + ridge + gjj;
            alpha[(j, k)] = soft_threshold(w_jk, thresh) / v_jk;
        }
    }
    alpha
}

/// Eq. (6): closed-form β update.
///
/// `β = V_β⁻¹ S(w_β, λ1 c1)` with
/// `V_β = MᵀM + ρ Σ_j D²_{α_j} + 2 c0 λ1 q I` and
/// `w_β = Mᵀ(Y − X̃γ) + Σ_j D_{α_j} τ_j + ρ Σ_j D_{α_j} μ_j`,
/// solved as a symmetric positive-definite system (never an explicit
/// inverse). Uses the freshly updated α and μ, and iterate-s γ.
pub fn update_beta(
    params: &ModelParams,
    state: &AdmmState,
    stats: &DesignStats,
    w: &PenaltyWeights,
) -> Result<DVector<f64>> {
    let q = params.q();
    let p = params.p();
    let thresh = w.lambda1 * w.c1;
    let mut v_beta = stats.mtm.clone();
    let ridge = 2.0 * w.c0 * w.lambda1 * q as f64;
    for k in 0..p {
        let mut alpha_sq = 0.0;
        for j in 0..q {
            let a = params.alpha[(j, k)];
            alpha_sq += a * a;
        }
        v_beta[(k, k)] += w.rho * alpha_sq + ridge;
    }
    let mut w_beta = &stats.mty - stats.xtm.transpose() * &params.gamma;
    for k in 0..p {
        let mut dual = 0.0;
        for j in 0..q {
            dual += params.alpha[(j, k)] * (state.tau[(j, k)] + w.rho * state.mu[(j, k)]);
        }
        w_beta[k] += dual;
        w_beta[k] = soft_threshold(w_beta[k], thresh);
    }
    let chol = Cholesky::new(v_beta).ok_or(Error::SingularSystem {
        context: "V_β in the β update",
        hint: "use a positive lambda1 (the ridge term then guarantees positive definiteness)",
    })?;
    Ok(chol.solve(&w_beta))
}

/// Eq. (7): closed-form γ update.
///
/// `γ = V_γ⁻¹ S(w_γ, λ3)` with `V_γ = X̃ᵀX̃` and `w_γ = X̃ᵀ(Y − Mβ)`.
/// For PCA scores V_γ is diagonal; the cached Cholesky solve is exact in
/// that case and also covers arbitrary (correlated) score designs.
pub fn update_gamma(
    params: &ModelParams,
    stats: &DesignStats,
    w: &PenaltyWeights,
) -> DVector<f64> {
    let mut w_gamma = &stats.xty - &stats.xtm * &params.beta;
    for j in 0..stats.q {
        w_gamma[j] = soft_threshold(w_gamma[j], w.lambda3);
    }
    stats.cholesky_g.solve(&w_gamma)
}

/// Eq. (8): dual ascent `τ_jk ← τ_jk + ρ(μ_jk − α_jk β_k)` using the
/// iterate-(s+1) values of μ, α, β.
pub fn update_tau(params: &ModelParams, state: &AdmmState, w: &PenaltyWeights) -> DMatrix<f64> {
    let mut tau = state.tau.clone();
    for k in 0..tau.ncols() {
        let b = params.beta[k];
        for j in 0..tau.nrows() {
            tau[(j, k)] += w.rho * (state.mu[(j, k)] - params.alpha[(j, k)] * b);
        }
    }
    tau
}

/// Result of a fit: parameters, final ADMM state, and convergence status.
#[derive(Debug, Clone)]
pub struct FitResult {
    pub params: ModelParams,
    pub state: AdmmState,
    /// True only when the objective-difference rule fired *and* the
    /// constraint residual was at most [`CONSTRAINT_TOL`].
    pub converged: bool,
    /// Final penalized objective.
    pub objective: f64,
}

/// Fit the structural model from raw matrices. Convenience wrapper around
/// [`fit_with_stats`].
pub fn fit(
    xt: &DMatrix<f64>,
    m: &DMatrix<f64>,
    y: &DVector<f64>,
    config: &FitConfig,
) -> Result<FitResult> {
    let stats = DesignStats::new(xt, m, y)?;
    fit_with_stats(&stats, config)
}

/// Fit from precomputed sufficient statistics.
///
/// Runs Algorithm 1's update order (μ, α, β, γ, τ) until
/// `|obj(s+1) − obj(s)| < tol` with the constraint residual within
/// [`CONSTRAINT_TOL`], or `max_iter` is reached (then the best-objective
/// iterate is returned with `converged = false`). Deterministic given
/// inputs and configuration.
pub fn fit_with_stats(stats: &DesignStats, config: &FitConfig) -> Result<FitResult> {
    config.validate()?;
    let w = &config.weights;
    if w.lambda1 == 0.0 {
        // V_j needs x̃_jᵀx̃_j > 0 when the ridge term vanishes.
        for j in 0..stats.q {
            if stats.g[(j, j)] <= 0.0 {
                return Err(Error::InvalidInput(format!(
                    "score column {j} has zero norm and lambda1 = 0; V_j would be singular"
                )));
            }
        }
    }
    let (mut params, mut state) = match &config.init {
        Init::Warm(ws) => {
            if ws.params.q() != stats.q || ws.params.p() != stats.p {
                return Err(Error::InvalidInput(
                    "warm start shape does not match the problem".into(),
                ));
            }
            (
                ws.params.clone(),
                AdmmState {
                    mu: ws.mu.clone(),
                    tau: ws.tau.clone(),
                    iteration: 0,
                    objective_trace: Vec::new(),
                },
            )
        }
        Init::Zeros => (
            ModelParams::zeros(stats.q, stats.p),
            AdmmState::zeros(stats.q, stats.p),
        ),
    };

    let mut obj_prev = eval_objective(&params, stats, w);
    if !obj_prev.is_finite() {
        return Err(Error::NonFiniteObjective { iteration: 0 });
    }
    let mut best_obj = obj_prev;
    let mut best: Option<(ModelParams, DMatrix<f64>, DMatrix<f64>)> = None;
    let mut converged = false;

    for s in 1..=config.max_iter {
        state.mu = update_mu(&params, &state, w);
        params.alpha = update_alpha(&params, &state, stats, w);
        params.beta = update_beta(&params, &state, stats, w)?;
        params.gamma = update_gamma(&params, stats, w);
        state.tau = update_tau(&params, &state, w);
        state.iteration = s;

        let obj = eval_objective(&params, stats, w);
        if !obj.is_finite() {
            return Err(Error::NonFiniteObjective { iteration: s });
        }
        state.objective_trace.push(obj);
        if obj < best_obj {
            best_obj = obj;
            best = Some((params.clone(), state.mu.clone(), state.tau.clone()));
        }
        if (obj - obj_prev).abs() < config.tol
            && state.constraint_residual(&params) <= CONSTRAINT_TOL
        {
            converged = true;
            obj_prev = obj;
            break;
        }
        obj_prev = obj;
    }

    if converged {
        Ok(FitResult {
            objective: obj_prev,
            params,
            state,
            converged,
        })
    } else {
        // Hand back the best iterate seen (the last one if nothing improved).
        if let Some((bp, bmu, btau)) = best {
            params = bp;
            state.mu = bmu;
            state.tau = btau;
        }
        Ok(FitResult {
            objective: best_obj,
            params,
            state,
            converged: false,
        })
    }
}

/// Serializable snapshot of a fit: coefficient matrices row-major, the
/// convergence status, and a config echo. The CLI writes one of these per
/// `fit` run and the effects subcommand reads it back.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FitRecord {
    pub alpha: Vec<Vec<f64>>,
    pub beta: Vec<f64>,
    pub gamma: Vec<f64>,
    pub converged: bool,
    pub iterations: usize,
    pub objective: f64,
    pub config: FitConfig,
}

impl FitRecord {
    pub fn from_result(result: &FitResult, config: &FitConfig) -> Self {
        FitRecord {
            alpha: matrix_to_rows(&result.params.alpha),
            beta: result.params.beta.iter().copied().collect(),
            gamma: result.params.gamma.iter().copied().collect(),
            converged: result.converged,
            iterations: result.state.iteration,
            objective: result.objective,
            config: config.clone(),
        }
    }

    /// Rebuild the coefficient matrices, validating shape consistency.
    pub fn params(&self) -> Result<ModelParams> {
        let alpha = rows_to_matrix(&self.alpha).map_err(Error::Serde)?;
        if self.beta.len() != alpha.ncols() {
            return Err(Error::Serde(format!(
                "beta has {} entries but alpha has {} columns",
                self.beta.len(),
                alpha.ncols()
            )));
        }
        if self.gamma.len() != alpha.nrows() {
            return Err(Error::Serde(format!(
                "gamma has {} entries but alpha has {} rows",
                self.gamma.len(),
                alpha.nrows()
            )));
        }
        Ok(ModelParams {
            alpha,
            beta: DVector::from_vec(self.beta.clone()),
            gamma: DVector::from_vec(self.gamma.clone()),
        })
    }
}
