//! Direct, indirect, and total effect decomposition of a fitted model.
//!
//! For exposure component j and mediator k the two-equation model implies
//!
//! * direct effect `DE_j = γ_j`,
//! * per-path indirect effect `IE_jk = α_jk β_k`,
//! * total indirect effect `IE_j = Σ_k α_jk β_k`,
//! * total effect `TE_j = IE_j + DE_j`.
//!
//! A [`EffectsReport`] stores the IE matrix, the per-component IE totals,
//! and the direct effects; total effects are always *derived* from those
//! two, never stored, so the decomposition identity holds to the last bit.
//!
//! A note on interpretation: when mediators are themselves causally ordered
//! (one region upstream of another, say), `IE_jk` is the *consolidated*
//! effect through mediator k — it absorbs every chain that reaches the
//! outcome through k last. The two-equation model does not decompose
//! within-mediator chains, so no operation here does either; read
//! per-mediator rows with that in mind.

use crate::dataset::Standardization;
use crate::error::{Error, Result};
use crate::solver::ModelParams;
use crate::util::{format_sig, matrix_to_rows, pairwise_sum_iter, rows_to_matrix};
use nalgebra::{DMatrix, DVector};
use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use std::fmt;
use std::path::Path;
use std::str::FromStr;

/// Axis labels attached to a fitted model so reports read like the data.
///
/// Exposure names label the PCA scores (not the raw exposure columns);
/// mediator and outcome names come straight from the dataset header.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EffectLabels {
    pub exposure_names: Vec<String>,
    pub mediator_names: Vec<String>,
    pub outcome_name: String,
}

impl EffectLabels {
    /// Placeholder labels (`PC1..PCq`, `M1..Mp`, `Y`) for fits without an
    /// accompanying dataset.
    pub fn generic(q: usize, p: usize) -> Self {
        EffectLabels {
            exposure_names: (1..=q).map(|j| format!("PC{j}")).collect(),
            mediator_names: (1..=p).map(|k| format!("M{k}")).collect(),
            outcome_name: "Y".to_string(),
        }
    }

    /// Score labels `PC1..PCq` combined with dataset mediator/outcome names.
    pub fn for_scores(q: usize, mediator_names: Vec<String>, outcome_name: String) -> Self {
        EffectLabels {
            exposure_names: (1..=q).map(|j| format!("PC{j}")).collect(),
            mediator_names,
            outcome_name,
        }
    }

    /// Check the label counts against a fitted shape, for validating
    /// user-supplied label sources before calling [`decompose`].
    pub fn check_shape(&self, q: usize, p: usize) -> Result<()> {
        if self.exposure_names.len() != q {
            return Err(Error::InvalidInput(format!(
                "{} exposure labels for a fit with q = {}",
                self.exposure_names.len(),
                q
            )));
        }
        if self.mediator_names.len() != p {
            return Err(Error::InvalidInput(format!(
                "{} mediator labels for a fit with p = {}",
                self.mediator_names.len(),
                p
            )));
        }
        Ok(())
    }
}

/// One nonzero mediation path: exposure j → mediator k → outcome.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ActivePath {
    /// Exposure component index (0-based).
    pub exposure: usize,
    /// Mediator index (0-based).
    pub mediator: usize,
    /// Exposure → mediator coefficient α_jk.
    pub alpha: f64,
    /// Mediator → outcome coefficient β_k.
    pub beta: f64,
    /// Path indirect effect α_jk β_k.
    pub ie: f64,
}

/// The decomposed effects of a fitted model.
///
/// Total effects are computed by [`EffectsReport::te`], never stored, so
/// `TE = IE_total + DE` is an identity rather than an invariant to check.
#[derive(Debug, Clone, PartialEq)]
pub struct EffectsReport {
    /// Path indirect effects, q×p: entry (j, k) is α_jk β_k.
    pub ie_matrix: DMatrix<f64>,
    /// Per-component total indirect effects, length q.
    pub ie_total: DVector<f64>,
    /// Direct effects γ, length q.
    pub de: DVector<f64>,
    /// The paths with |IE| above the zero threshold, sorted by
    /// (exposure, mediator).
    pub active_paths: Vec<ActivePath>,
    /// Axis labels used by the exporters.
    pub labels: EffectLabels,
    /// The |IE| cutoff that defined `active_paths`.
    pub zero_threshold: f64,
}

impl EffectsReport {
    /// Number of exposure components.
    pub fn q(&self) -> usize {
        self.ie_matrix.nrows()
    }

    /// Number of mediators.
    pub fn p(&self) -> usize {
        self.ie_matrix.ncols()
    }

    /// Total effects: `TE_j = IE_total_j + DE_j`, computed on demand.
    pub fn te(&self) -> DVector<f64> {
        &self.ie_total + &self.de
    }

    /// Grand total of indirect effects across all components.
    pub fn ie_grand_total(&self) -> f64 {
        pairwise_sum_iter(self.ie_total.iter().copied())
    }

    /// Grand total of direct effects.
    pub fn de_grand_total(&self) -> f64 {
        pairwise_sum_iter(self.de.iter().copied())
    }

    /// Grand total effect (indirect plus direct totals).
    pub fn te_grand_total(&self) -> f64 {
        self.ie_grand_total() + self.de_grand_total()
    }
}

/// Decompose fitted parameters into direct, indirect, and total effects.
///
/// Label counts must match the fitted shape; verify user-supplied labels
/// with [`EffectLabels::check_shape`] first.
pub fn decompose(params: &ModelParams, labels: EffectLabels, zero_threshold: f64) -> EffectsReport {
    let (q, p) = (params.q(), params.p());
    assert_eq!(
        labels.exposure_names.len(),
        q,
        "exposure label count must match the fitted q"
    );
    assert_eq!(
        labels.mediator_names.len(),
        p,
        "mediator label count must match the fitted p"
    );
    assert!(
        zero_threshold.is_finite() && zero_threshold >= 0.0,
        "zero_threshold must be finite and nonnegative"
    );

    let ie_matrix = params.path_products();
    let ie_total = DVector::from_fn(q, |j, _| {
        pairwise_sum_iter(ie_matrix.row(j).iter().copied())
    });
    let de = params.gamma.clone();

    let mut active_paths = Vec::new();
    for j in 0..q {
        for k in 0..p {
            let ie = ie_matrix[(j, k)];
            if ie.abs() > zero_threshold {
                active_paths.push(ActivePath {
                    exposure: j,
                    mediator: k,
                    alpha: params.alpha[(j, k)],
                    beta: params.beta[k],
                    ie,
                });
            }
        }
    }

    EffectsReport {
        ie_matrix,
        ie_total,
        de,
        active_paths,
        labels,
        zero_threshold,
    }
}

/// Undo the opt-in M/Y standardization on fitted coefficients.
///
/// With mediator columns divided by `s_k` and the outcome by `s_Y` at fit
/// time, original-unit coefficients are `α_jk s_k`, `β_k s_Y / s_k`, and
/// `γ_j s_Y`; path products pick up a clean factor of `s_Y`. Call this
/// before [`decompose`] when a standardization record is present so tables
/// are in the data's own units.
pub fn back_transform(params: &ModelParams, standardization: &Standardization) -> Result<ModelParams> {
    let p = params.p();
    if standardization.m_scales.len() != p {
        return Err(Error::InvalidInput(format!(
            "standardization records {} mediator scales but the fit has p = {}",
            standardization.m_scales.len(),
            p
        )));
    }
    let bad_scale = |s: f64| !s.is_finite() || s <= 0.0;
    if standardization.m_scales.iter().any(|&s| bad_scale(s)) || bad_scale(standardization.y_scale)
    {
        return Err(Error::InvalidInput(
            "standardization scales must be positive and finite".to_string(),
        ));
    }

    let s_y = standardization.y_scale;
    let mut alpha = params.alpha.clone();
    let mut beta = params.beta.clone();
    for (k, &s_k) in standardization.m_scales.iter().enumerate() {
        let mut col = alpha.column_mut(k);
        col *= s_k;
        beta[k] *= s_y / s_k;
    }
    let gamma = &params.gamma * s_y;
    Ok(ModelParams { alpha, beta, gamma })
}

/// Output format for [`export_report`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Csv,
    Json,
}

impl FromStr for ReportFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "csv" => Ok(ReportFormat::Csv),
            "json" => Ok(ReportFormat::Json),
            other => Err(Error::InvalidInput(format!(
                "unknown report format '{other}' (expected csv or json)"
            ))),
        }
    }
}

impl fmt::Display for ReportFormat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ReportFormat::Csv => write!(f, "csv"),
            ReportFormat::Json => write!(f, "json"),
        }
    }
}

/// Quote a CSV field only when it needs it.
fn csv_field(s: &str) -> String {
    if s.contains(',') || s.contains('"') || s.contains('\n') {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

/// Render the report as a two-table CSV.
///
/// The first table is the path layout: one pair of rows
/// per mediator with an active path (an `alpha` row and an `ie` row),
/// one column per exposure with an active path, and a trailing `beta`
/// column carried on the `ie` row. Cells whose path is inactive stay
/// blank. The second table is the per-component summary — `ie`, `de`,
/// and `te` rows over the components with any nonzero effect, plus a
/// `total` column holding the row-wise sums.
///
/// Numbers are printed with `sig` significant digits; rows and columns
/// follow dataset index order, so output is deterministic.
pub fn render_csv(report: &EffectsReport, sig: usize) -> String {
    let fmt_num = |x: f64| format_sig(x, sig);
    let mut out = String::new();

    // Path table: which exposures/mediators carry at least one active path.
    let mut exposure_active = vec![false; report.q()];
    let mut mediator_active = vec![false; report.p()];
    for path in &report.active_paths {
        exposure_active[path.exposure] = true;
        mediator_active[path.mediator] = true;
    }
    let path_cols: Vec<usize> = (0..report.q()).filter(|&j| exposure_active[j]).collect();
    let path_rows: Vec<usize> = (0..report.p()).filter(|&k| mediator_active[k]).collect();

    out.push_str("mediator,quantity");
    for &j in &path_cols {
        out.push(',');
        out.push_str(&csv_field(&report.labels.exposure_names[j]));
    }
    out.push_str(",beta\n");
    for &k in &path_rows {
        let name = csv_field(&report.labels.mediator_names[k]);
        let active = |j: usize| report.ie_matrix[(j, k)].abs() > report.zero_threshold;
        // α sub-row, blank beta cell.
        out.push_str(&name);
        out.push_str(",alpha");
        let mut beta = 0.0;
        for &j in &path_cols {
            out.push(',');
            if active(j) {
                let path = report
                    .active_paths
                    .iter()
                    .find(|a| a.exposure == j && a.mediator == k)
                    .expect("active cell must be listed in active_paths");
                out.push_str(&fmt_num(path.alpha));
                beta = path.beta;
            }
        }
        out.push_str(",\n");
        // IE sub-row carrying the shared β for this mediator.
        out.push_str(&name);
        out.push_str(",ie");
        for &j in &path_cols {
            out.push(',');
            if active(j) {
                out.push_str(&fmt_num(report.ie_matrix[(j, k)]));
            }
        }
        out.push(',');
        out.push_str(&fmt_num(beta));
        out.push('\n');
    }

    // Summary table over components with any nonzero total effect piece.
    let te = report.te();
    let summary_cols: Vec<usize> = (0..report.q())
        .filter(|&j| {
            report.ie_total[j].abs() > report.zero_threshold
                || report.de[j].abs() > report.zero_threshold
        })
        .collect();
    out.push_str("\neffect");
    for &j in &summary_cols {
        out.push(',');
        out.push_str(&csv_field(&report.labels.exposure_names[j]));
    }
    out.push_str(",total\n");
    let summary_row = |out: &mut String, label: &str, values: &DVector<f64>, total: f64, blank_small: bool| {
        out.push_str(label);
        for &j in &summary_cols {
            out.push(',');
            if !blank_small || values[j].abs() > report.zero_threshold {
                out.push_str(&fmt_num(values[j]));
            }
        }
        out.push(',');
        out.push_str(&fmt_num(total));
        out.push('\n');
    };
    summary_row(&mut out, "ie", &report.ie_total, report.ie_grand_total(), true);
    summary_row(&mut out, "de", &report.de, report.de_grand_total(), true);
    summary_row(&mut out, "te", &te, report.te_grand_total(), false);

    out
}

/// Render the report as pretty-printed JSON, one trailing newline.
pub fn render_json(report: &EffectsReport) -> Result<String> {
    let mut s = serde_json::to_string_pretty(report)?;
    s.push('\n');
    Ok(s)
}

/// Parse a report previously written by [`render_json`].
///
/// Shape consistency, the TE identity, and the active-path list are all
/// re-validated, so a hand-edited file that breaks an invariant is
/// rejected rather than silently trusted.
pub fn parse_report_json(s: &str) -> Result<EffectsReport> {
    Ok(serde_json::from_str(s)?)
}

/// Write the report to `path` in the chosen format with `sig` significant
/// digits (CSV only; JSON always keeps full precision).
pub fn export_report(
    report: &EffectsReport,
    path: impl AsRef<Path>,
    format: ReportFormat,
    sig: usize,
) -> Result<()> {
    let path = path.as_ref();
    let content = match format {
        ReportFormat::Csv => render_csv(report, sig),
        ReportFormat::Json => render_json(report)?,
    };
    std::fs::write(path, content).map_err(|e| Error::io(path.display().to_string(), e))
}

/// JSON wire form: the matrix row-major, plus the derived `te` vector for
/// human readers (checked, not trusted, on the way back in).
#[derive(Serialize, Deserialize)]
struct ReportWire {
    labels: EffectLabels,
    zero_threshold: f64,
    ie_matrix: Vec<Vec<f64>>,
    ie_total: Vec<f64>,
    de: Vec<f64>,
    te: Vec<f64>,
    active_paths: Vec<ActivePath>,
}

impl Serialize for EffectsReport {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        ReportWire {
            labels: self.labels.clone(),
            zero_threshold: self.zero_threshold,
            ie_matrix: matrix_to_rows(&self.ie_matrix),
            ie_total: self.ie_total.iter().copied().collect(),
            de: self.de.iter().copied().collect(),
            te: self.te().iter().copied().collect(),
            active_paths: self.active_paths.clone(),
        }
        .serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for EffectsReport {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let wire = ReportWire::deserialize(deserializer)?;
        let ie_matrix = rows_to_matrix(&wire.ie_matrix).map_err(D::Error::custom)?;
        let (q, p) = (ie_matrix.nrows(), ie_matrix.ncols());
        if wire.labels.exposure_names.len() != q || wire.labels.mediator_names.len() != p {
            return Err(D::Error::custom(format!(
                "labels ({} exposures, {} mediators) do not match the {}×{} ie matrix",
                wire.labels.exposure_names.len(),
                wire.labels.mediator_names.len(),
                q,
                p
            )));
        }
        if wire.ie_total.len() != q || wire.de.len() != q || wire.te.len() != q {
            return Err(D::Error::custom(
                "ie_total, de, and te must all have one entry per exposure component",
            ));
        }
        if !(wire.zero_threshold.is_finite() && wire.zero_threshold >= 0.0) {
            return Err(D::Error::custom("zero_threshold must be finite and nonnegative"));
        }
        for j in 0..q {
            if wire.te[j] != wire.ie_total[j] + wire.de[j] {
                return Err(D::Error::custom(format!(
                    "te[{j}] does not equal ie_total[{j}] + de[{j}]; the file is corrupt"
                )));
            }
        }
        // The active-path list must be exactly the above-threshold cells of
        // the matrix, in (exposure, mediator) order, with matching values.
        let mut expected = Vec::new();
        for j in 0..q {
            for k in 0..p {
                if ie_matrix[(j, k)].abs() > wire.zero_threshold {
                    expected.push((j, k));
                }
            }
        }
        if wire.active_paths.len() != expected.len() {
            return Err(D::Error::custom(format!(
                "active_paths lists {} paths but the matrix has {} above the threshold",
                wire.active_paths.len(),
                expected.len()
            )));
        }
        for (path, &(j, k)) in wire.active_paths.iter().zip(&expected) {
            if path.exposure != j || path.mediator != k || path.ie != ie_matrix[(j, k)] {
                return Err(D::Error::custom(format!(
                    "active_paths entry for ({}, {}) does not match the ie matrix",
                    path.exposure, path.mediator
                )));
            }
        }
        Ok(EffectsReport {
            ie_matrix,
            ie_total: DVector::from_vec(wire.ie_total),
            de: DVector::from_vec(wire.de),
            active_paths: wire.active_paths,
            labels: wire.labels,
            zero_threshold: wire.zero_threshold,
        })
    }
}
