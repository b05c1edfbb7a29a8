//! Loading, validation, and covariate adjustment of the input data.
//!
//! The analysis consumes one CSV with a header row; a role mapping assigns
//! every column to one of the blocks (exposure, mediator, outcome,
//! covariate), marks it as the subject id, or ignores it. Loading is
//! strict: any empty or non-numeric cell is an error — rows with missing
//! data are rejected, never imputed, so the estimator's statistical meaning
//! stays unambiguous.
//!
//! Before modeling, every column of X, M, and Y is residualized on an
//! intercept plus the covariates (plain mean-centering when there are
//! none). The adjusted blocks then have zero means and are orthogonal to
//! the covariate span, which is what lets the downstream structural model
//! omit intercepts entirely.

use crate::error::{Error, Result};
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use std::fmt;
use std::path::Path;
use std::str::FromStr;

/// What a CSV column contributes to the analysis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ColumnRole {
    /// Part of the exposure block X.
    Exposure,
    /// Part of the mediator block M.
    Mediator,
    /// The single outcome Y.
    Outcome,
    /// Adjustment covariate (regressed out of every block).
    Covariate,
    /// Subject identifier (kept as a label, not modeled).
    Id,
    /// Skipped entirely.
    Ignore,
}

impl FromStr for ColumnRole {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "exposure" => Ok(ColumnRole::Exposure),
            "mediator" => Ok(ColumnRole::Mediator),
            "outcome" => Ok(ColumnRole::Outcome),
            "covariate" => Ok(ColumnRole::Covariate),
            "id" => Ok(ColumnRole::Id),
            "ignore" => Ok(ColumnRole::Ignore),
            other => Err(Error::BadRoles(format!(
                "unknown role '{other}' (expected exposure|mediator|outcome|covariate|id|ignore)"
            ))),
        }
    }
}

impl fmt::Display for ColumnRole {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            ColumnRole::Exposure => "exposure",
            ColumnRole::Mediator => "mediator",
            ColumnRole::Outcome => "outcome",
            ColumnRole::Covariate => "covariate",
            ColumnRole::Id => "id",
            ColumnRole::Ignore => "ignore",
        };
        f.write_str(s)
    }
}

/// Ordered column-name → role rules.
///
/// Each rule is either an exact column name or a prefix pattern ending in
/// `*` (so `pep_*` covers a whole assay block without listing 320 names).
/// The first matching rule wins; columns matching no rule are a hard error
/// at load time, which catches typos in the mapping early.
#[derive(Debug, Clone, Default)]
pub struct RoleSpec {
    rules: Vec<(String, ColumnRole)>,
}

impl RoleSpec {
    pub fn new() -> Self {
        Self::default()
    }

    /// Append one rule; returns `self` for chaining.
    pub fn rule(mut self, pattern: impl Into<String>, role: ColumnRole) -> Self {
        self.rules.push((pattern.into(), role));
        self
    }

    pub fn from_rules(rules: Vec<(String, ColumnRole)>) -> Self {
        RoleSpec { rules }
    }

    /// Role of `column` under the first matching rule, if any.
    pub fn assign(&self, column: &str) -> Option<ColumnRole> {
        for (pattern, role) in &self.rules {
            let hit = match pattern.strip_suffix('*') {
                Some(prefix) => column.starts_with(prefix),
                None => column == pattern,
            };
            if hit {
                return Some(*role);
            }
        }
        None
    }
}

/// The validated, fully numeric input data, split into blocks.
#[derive(Debug, Clone)]
pub struct RawDataset {
    /// Exposure block, n×r.
    pub x: DMatrix<f64>,
    /// Mediator block, n×p.
    pub m: DMatrix<f64>,
    /// Outcome, length n.
    pub y: DVector<f64>,
    /// Covariate block, n×c (c may be 0).
    pub c: DMatrix<f64>,
    /// Subject labels, from the id column or 1-based row numbers.
    pub row_ids: Vec<String>,
    pub exposure_names: Vec<String>,
    pub mediator_names: Vec<String>,
    pub outcome_name: String,
    pub covariate_names: Vec<String>,
}

impl RawDataset {
    pub fn n(&self) -> usize {
        self.x.nrows()
    }

    pub fn r(&self) -> usize {
        self.x.ncols()
    }

    pub fn p(&self) -> usize {
        self.m.ncols()
    }

    pub fn n_covariates(&self) -> usize {
        self.c.ncols()
    }
}

/// The covariate-adjusted blocks the model is actually fitted on.
///
/// Column names ride along so reports can label effects without carrying
/// the raw dataset around.
#[derive(Debug, Clone)]
pub struct AdjustedDataset {
    /// Adjusted exposures, n×r.
    pub x_adj: DMatrix<f64>,
    /// Adjusted mediators, n×p.
    pub m_adj: DMatrix<f64>,
    /// Adjusted outcome, length n.
    pub y_adj: DVector<f64>,
    /// Human-readable description of what was regressed out.
    pub adjustment_record: String,
    pub exposure_names: Vec<String>,
    pub mediator_names: Vec<String>,
    pub outcome_name: String,
}

/// Scale divisors applied to M's columns and Y by [`standardize`]; the
/// effects module uses them to report coefficients back in original units.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardization {
    /// Per-mediator standard deviations divided out of M.
    pub m_scales: Vec<f64>,
    /// Standard deviation divided out of Y.
    pub y_scale: f64,
}

impl Standardization {
    /// The no-op record used when standardization was not requested.
    pub fn identity(p: usize) -> Self {
        Standardization {
            m_scales: vec![1.0; p],
            y_scale: 1.0,
        }
    }

    pub fn is_identity(&self) -> bool {
        self.y_scale == 1.0 && self.m_scales.iter().all(|s| *s == 1.0)
    }
}

/// Load a CSV and split its columns into blocks according to `roles`.
///
/// The file must have a header row; every column must match a role rule,
/// exactly one column may be the outcome, and at most one the id. Cells in
/// modeled columns must parse as finite numbers — an empty cell reports
/// `missing value at (row, column)` with 1-based data-row numbering.
pub fn load_dataset(path: impl AsRef<Path>, roles: &RoleSpec) -> Result<RawDataset> {
    let path = path.as_ref();
    let path_str = path.display().to_string();
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_path(path)
        .map_err(|e| match e.kind() {
            csv::ErrorKind::Io(_) => {
                Error::io(&path_str, std::io::Error::other(e.to_string()))
            }
            _ => Error::MalformedCsv {
                path: path_str.clone(),
                detail: e.to_string(),
            },
        })?;

    let headers: Vec<String> = reader
        .headers()
        .map_err(|e| Error::MalformedCsv {
            path: path_str.clone(),
            detail: e.to_string(),
        })?
        .iter()
        .map(|h| h.trim().to_string())
        .collect();

    // Assign roles column by column; collect the unmatched for one error.
    let mut column_roles = Vec::with_capacity(headers.len());
    let mut unmatched = Vec::new();
    for name in &headers {
        match roles.assign(name) {
            Some(role) => column_roles.push(role),
            None => {
                unmatched.push(name.clone());
                column_roles.push(ColumnRole::Ignore);
            }
        }
    }
    if !unmatched.is_empty() {
        return Err(Error::BadRoles(format!(
            "no role for column(s): {}",
            unmatched.join(", ")
        )));
    }

    let mut exposure_cols = Vec::new();
    let mut mediator_cols = Vec::new();
    let mut covariate_cols = Vec::new();
    let mut outcome_cols = Vec::new();
    let mut id_cols = Vec::new();
    for (idx, role) in column_roles.iter().enumerate() {
        match role {
            ColumnRole::Exposure => exposure_cols.push(idx),
            ColumnRole::Mediator => mediator_cols.push(idx),
            ColumnRole::Covariate => covariate_cols.push(idx),
            ColumnRole::Outcome => outcome_cols.push(idx),
            ColumnRole::Id => id_cols.push(idx),
            ColumnRole::Ignore => {}
        }
    }
    if outcome_cols.len() != 1 {
        return Err(Error::BadRoles(format!(
            "exactly one outcome column required, found {}",
            outcome_cols.len()
        )));
    }
    if id_cols.len() > 1 {
        return Err(Error::BadRoles(format!(
            "at most one id column allowed, found {}",
            id_cols.len()
        )));
    }
    if exposure_cols.is_empty() {
        return Err(Error::BadRoles("no exposure columns".into()));
    }
    if mediator_cols.is_empty() {
        return Err(Error::BadRoles("no mediator columns".into()));
    }
    for block in [&exposure_cols, &mediator_cols, &covariate_cols] {
        let mut names: Vec<&String> = block.iter().map(|&i| &headers[i]).collect();
        names.sort();
        for pair in names.windows(2) {
            if pair[0] == pair[1] {
                return Err(Error::BadRoles(format!(
                    "duplicate column name '{}' within a block",
                    pair[0]
                )));
            }
        }
    }

    // Parse rows. Numeric cells must be finite; empty cells are reported
    // with their 1-based (row, column) location.
    let numeric_cols: Vec<usize> = column_roles
        .iter()
        .enumerate()
        .filter(|(_, role)| {
            matches!(
                role,
                ColumnRole::Exposure
                    | ColumnRole::Mediator
                    | ColumnRole::Outcome
                    | ColumnRole::Covariate
            )
        })
        .map(|(idx, _)| idx)
        .collect();
    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut row_ids: Vec<String> = Vec::new();
    for (rec_idx, record) in reader.records().enumerate() {
        let row_number = rec_idx + 1;
        let record = record.map_err(|e| Error::MalformedCsv {
            path: path_str.clone(),
            detail: e.to_string(),
        })?;
        if record.len() != headers.len() {
            return Err(Error::MalformedCsv {
                path: path_str.clone(),
                detail: format!(
                    "row {row_number} has {} fields, expected {}",
                    record.len(),
                    headers.len()
                ),
            });
        }
        let mut numeric_row = Vec::with_capacity(numeric_cols.len());
        for &idx in &numeric_cols {
            let cell = record[idx].trim();
            if cell.is_empty() {
                return Err(Error::MissingValue {
                    path: path_str.clone(),
                    row: row_number,
                    column: headers[idx].clone(),
                });
            }
            let value: f64 = cell.parse().map_err(|_| Error::BadCell {
                path: path_str.clone(),
                row: row_number,
                column: headers[idx].clone(),
                value: cell.to_string(),
            })?;
            if !value.is_finite() {
                return Err(Error::BadCell {
                    path: path_str.clone(),
                    row: row_number,
                    column: headers[idx].clone(),
                    value: cell.to_string(),
                });
            }
            numeric_row.push(value);
        }
        if let Some(&id_idx) = id_cols.first() {
            let cell = record[id_idx].trim();
            if cell.is_empty() {
                return Err(Error::MissingValue {
                    path: path_str.clone(),
                    row: row_number,
                    column: headers[id_idx].clone(),
                });
            }
            row_ids.push(cell.to_string());
        } else {
            row_ids.push(row_number.to_string());
        }
        rows.push(numeric_row);
    }

    let n = rows.len();
    if n < 2 {
        return Err(Error::InvalidInput(format!(
            "need at least 2 data rows, got {n}"
        )));
    }

    // numeric_cols maps compact index → original column; invert the pieces
    // each block needs.
    let compact_of: std::collections::HashMap<usize, usize> = numeric_cols
        .iter()
        .enumerate()
        .map(|(compact, &orig)| (orig, compact))
        .collect();
    let gather = |cols: &[usize]| -> DMatrix<f64> {
        DMatrix::from_fn(n, cols.len(), |i, j| rows[i][compact_of[&cols[j]]])
    };
    let x = gather(&exposure_cols);
    let m = gather(&mediator_cols);
    let c = gather(&covariate_cols);
    let y = DVector::from_fn(n, |i, _| rows[i][compact_of[&outcome_cols[0]]]);

    Ok(RawDataset {
        x,
        m,
        y,
        c,
        row_ids,
        exposure_names: exposure_cols.iter().map(|&i| headers[i].clone()).collect(),
        mediator_names: mediator_cols.iter().map(|&i| headers[i].clone()).collect(),
        outcome_name: headers[outcome_cols[0]].clone(),
        covariate_names: covariate_cols.iter().map(|&i| headers[i].clone()).collect(),
    })
}

/// Orthonormal basis of the covariate design [1, C] via modified
/// Gram–Schmidt with re-orthogonalization. Errors when a covariate column
/// is (numerically) inside the span of the intercept and its predecessors.
fn covariate_basis(c: &DMatrix<f64>, n: usize) -> Result<DMatrix<f64>> {
    let ncols = c.ncols() + 1;
    let mut basis = DMatrix::zeros(n, ncols);
    // Intercept column, normalized.
    let inv = 1.0 / (n as f64).sqrt();
    for i in 0..n {
        basis[(i, 0)] = inv;
    }
    for j in 0..c.ncols() {
        let mut v = c.column(j).into_owned();
        let original_norm = v.norm();
        if original_norm == 0.0 {
            return Err(Error::RankDeficientCovariates(j + 1));
        }
        // Two MGS passes give orthogonality at machine precision.
        for _ in 0..2 {
            for k in 0..=j {
                let proj = basis.column(k).dot(&v);
                for i in 0..n {
                    v[i] -= proj * basis[(i, k)];
                }
            }
        }
        let norm = v.norm();
        if norm <= 1e-10 * original_norm {
            return Err(Error::RankDeficientCovariates(j + 1));
        }
        for i in 0..n {
            basis[(i, j + 1)] = v[i] / norm;
        }
    }
    Ok(basis)
}

/// Replace every column of X, M, Y with its residual from an OLS regression
/// on an intercept plus the covariates.
///
/// With no covariates this is plain mean-centering. The operation is
/// idempotent, and residual columns are orthogonal to every covariate
/// column (both within numerical tolerance).
pub fn residualize(data: &RawDataset) -> Result<AdjustedDataset> {
    let n = data.n();
    let basis = covariate_basis(&data.c, n)?;

    let project_out = |v: &DVector<f64>| -> DVector<f64> {
        let coeffs = basis.transpose() * v;
        v - &basis * coeffs
    };
    let adjust_matrix = |m: &DMatrix<f64>| -> DMatrix<f64> {
        let mut out = DMatrix::zeros(n, m.ncols());
        for j in 0..m.ncols() {
            let col = project_out(&m.column(j).into_owned());
            out.set_column(j, &col);
        }
        out
    };

    let adjustment_record = if data.n_covariates() == 0 {
        "mean-centered (no covariates)".to_string()
    } else {
        format!(
            "residualized on intercept + {} covariate(s): {}",
            data.n_covariates(),
            data.covariate_names.join(", ")
        )
    };

    Ok(AdjustedDataset {
        x_adj: adjust_matrix(&data.x),
        m_adj: adjust_matrix(&data.m),
        y_adj: project_out(&data.y),
        adjustment_record,
        exposure_names: data.exposure_names.clone(),
        mediator_names: data.mediator_names.clone(),
        outcome_name: data.outcome_name.clone(),
    })
}

/// Scale M's columns and Y to unit sample variance (opt-in).
///
/// Penalties are scale-sensitive, so heterogeneous mediator units can
/// distort shrinkage; this puts all of them on a common footing. The
/// returned record lets the effects module convert coefficients back to
/// original units. Zero-variance columns are an error.
pub fn standardize(adj: &AdjustedDataset) -> Result<(AdjustedDataset, Standardization)> {
    let n = adj.m_adj.nrows();
    if n < 2 {
        return Err(Error::InvalidInput("need at least 2 rows".into()));
    }
    let denom = (n - 1) as f64;
    let mut out = adj.clone();
    let mut m_scales = Vec::with_capacity(adj.m_adj.ncols());
    for j in 0..adj.m_adj.ncols() {
        let ss: f64 = adj.m_adj.column(j).iter().map(|v| v * v).sum();
        let sd = (ss / denom).sqrt();
        if sd <= 0.0 {
            return Err(Error::ZeroVariance(adj.mediator_names[j].clone()));
        }
        for i in 0..n {
            out.m_adj[(i, j)] /= sd;
        }
        m_scales.push(sd);
    }
    let y_ss: f64 = adj.y_adj.iter().map(|v| v * v).sum();
    let y_scale = (y_ss / denom).sqrt();
    if y_scale <= 0.0 {
        return Err(Error::ZeroVariance(adj.outcome_name.clone()));
    }
    for i in 0..n {
        out.y_adj[i] /= y_scale;
    }
    out.adjustment_record = format!(
        "{}; mediators and outcome scaled to unit variance",
        out.adjustment_record
    );
    Ok((out, Standardization { m_scales, y_scale }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::rngs::StdRng;
    use rand::{Rng, SeedableRng};
    use std::io::Write;

    fn write_csv(content: &str) -> tempfile::NamedTempFile {
        let mut file = tempfile::NamedTempFile::new().unwrap();
        file.write_all(content.as_bytes()).unwrap();
        file.flush().unwrap();
        file
    }

    fn basic_roles() -> RoleSpec {
        RoleSpec::new()
            .rule("x*", ColumnRole::Exposure)
            .rule("m*", ColumnRole::Mediator)
            .rule("y", ColumnRole::Outcome)
            .rule("c*", ColumnRole::Covariate)
            .rule("subject", ColumnRole::Id)
    }

    #[test]
    fn loads_minimal_three_row_file() {
        let file = write_csv("x1,m1,y\n1,4,7\n2,5,8\n3,6,9\n");
        let data = load_dataset(file.path(), &basic_roles()).unwrap();
        assert_eq!(data.n(), 3);
        assert_eq!(data.r(), 1);
        assert_eq!(data.p(), 1);
        assert_eq!(data.n_covariates(), 0);
        assert_eq!(data.x[(1, 0)], 2.0);
        assert_eq!(data.m[(2, 0)], 6.0);
        assert_eq!(data.y[0], 7.0);
        assert_eq!(data.row_ids, vec!["1", "2", "3"]);
        assert_eq!(data.outcome_name, "y");
    }

    #[test]
    fn loads_wide_cohort_shape() {
        // 135 rows × (320 exposures + 145 mediators + outcome + 4 covariates).
        let mut content = String::new();
        let mut names: Vec<String> = (0..320).map(|i| format!("x{i}")).collect();
        names.extend((0..145).map(|i| format!("m{i}")));
        names.push("y".into());
        names.extend((0..4).map(|i| format!("c{i}")));
        content.push_str(&names.join(","));
        content.push('\n');
        let mut rng = StdRng::seed_from_u64(1);
        for _ in 0..135 {
            let row: Vec<String> = (0..names.len())
                .map(|_| format!("{:.4}", rng.random_range(-1.0..1.0)))
                .collect();
            content.push_str(&row.join(","));
            content.push('\n');
        }
        let file = write_csv(&content);
        let data = load_dataset(file.path(), &basic_roles()).unwrap();
        assert_eq!(data.n(), 135);
        assert_eq!(data.r(), 320);
        assert_eq!(data.p(), 145);
        assert_eq!(data.n_covariates(), 4);
    }

    #[test]
    fn missing_cell_reports_row_and_column() {
        let file = write_csv("x1,m1,y\n1,4,7\n2,,8\n3,6,9\n");
        let err = load_dataset(file.path(), &basic_roles()).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("missing value at (2, m1)"), "got: {msg}");
    }

    #[test]
    fn non_numeric_and_non_finite_cells_are_rejected() {
        let file = write_csv("x1,m1,y\n1,4,7\noops,5,8\n");
        let err = load_dataset(file.path(), &basic_roles()).unwrap_err();
        assert!(matches!(err, Error::BadCell { row: 2, .. }), "got: {err}");

        let file = write_csv("x1,m1,y\n1,4,7\n2,NaN,8\n");
        let err = load_dataset(file.path(), &basic_roles()).unwrap_err();
        assert!(matches!(err, Error::BadCell { row: 2, .. }), "got: {err}");
    }

    #[test]
    fn role_validation_errors() {
        // Unmatched column.
        let file = write_csv("x1,m1,y,extra\n1,4,7,0\n2,5,8,0\n");
        let err = load_dataset(file.path(), &basic_roles()).unwrap_err();
        assert!(err.to_string().contains("extra"), "got: {err}");

        // No outcome.
        let file = write_csv("x1,m1\n1,4\n2,5\n");
        assert!(load_dataset(file.path(), &basic_roles()).is_err());

        // Two outcome columns.
        let roles = RoleSpec::new()
            .rule("x1", ColumnRole::Exposure)
            .rule("m1", ColumnRole::Mediator)
            .rule("*", ColumnRole::Outcome);
        let file = write_csv("x1,m1,y1,y2\n1,4,7,0\n2,5,8,0\n");
        let err = load_dataset(file.path(), &roles).unwrap_err();
        assert!(err.to_string().contains("exactly one outcome"), "got: {err}");

        // Duplicate name within a block.
        let file = write_csv("x1,x1,m1,y\n1,1,4,7\n2,2,5,8\n");
        let err = load_dataset(file.path(), &basic_roles()).unwrap_err();
        assert!(err.to_string().contains("duplicate column"), "got: {err}");

        // Too few rows.
        let file = write_csv("x1,m1,y\n1,4,7\n");
        assert!(load_dataset(file.path(), &basic_roles()).is_err());

        // Missing file.
        assert!(load_dataset("/nonexistent/data.csv", &basic_roles()).is_err());
    }

    #[test]
    fn id_and_ignore_columns() {
        let roles = basic_roles().rule("notes", ColumnRole::Ignore);
        let file = write_csv(
            "subject,x1,m1,y,notes\nA01,1,4,7,hello\nA02,2,5,8,world\n",
        );
        let data = load_dataset(file.path(), &roles).unwrap();
        assert_eq!(data.row_ids, vec!["A01", "A02"]);
        assert_eq!(data.r(), 1);

        // Ignored columns may hold arbitrary text; ids must not be empty.
        let file = write_csv("subject,x1,m1,y\nA01,1,4,7\n,2,5,8\n");
        let err = load_dataset(file.path(), &roles).unwrap_err();
        assert!(matches!(err, Error::MissingValue { row: 2, .. }), "got: {err}");
    }

    #[test]
    fn glob_rules_first_match_wins() {
        let spec = RoleSpec::new()
            .rule("m_special", ColumnRole::Ignore)
            .rule("m*", ColumnRole::Mediator);
        assert_eq!(spec.assign("m_special"), Some(ColumnRole::Ignore));
        assert_eq!(spec.assign("m_other"), Some(ColumnRole::Mediator));
        assert_eq!(spec.assign("q1"), None);
    }

    #[test]
    fn centering_only_when_no_covariates() {
        let file = write_csv("x1,m1,y\n1,4,7\n2,5,8\n3,6,9\n");
        let data = load_dataset(file.path(), &basic_roles()).unwrap();
        let adj = residualize(&data).unwrap();
        for (i, expect) in [-1.0, 0.0, 1.0].iter().enumerate() {
            assert_relative_eq!(adj.x_adj[(i, 0)], expect, epsilon = 1e-12);
            assert_relative_eq!(adj.m_adj[(i, 0)], expect, epsilon = 1e-12);
            assert_relative_eq!(adj.y_adj[i], expect, epsilon = 1e-12);
        }
        assert!(adj.adjustment_record.contains("mean-centered"));
    }

    #[test]
    fn outcome_equal_to_covariate_residualizes_to_zero() {
        let mut content = String::from("x1,m1,y,c1\n");
        for i in 0..10 {
            let v = (i as f64).sin() * 3.0 + 1.0;
            content.push_str(&format!("{},{},{v},{v}\n", i, i * i));
        }
        let file = write_csv(&content);
        let data = load_dataset(file.path(), &basic_roles()).unwrap();
        let adj = residualize(&data).unwrap();
        let y_scale = data.y.norm();
        assert!(adj.y_adj.norm() <= 1e-10 * y_scale, "‖Y_adj‖ = {}", adj.y_adj.norm());
    }

    #[test]
    fn residuals_match_normal_equations_oracle() {
        let mut rng = StdRng::seed_from_u64(7);
        let n = 50;
        let c = DMatrix::from_fn(n, 3, |_, _| rng.random_range(-2.0..2.0));
        let y = DVector::from_fn(n, |_, _| rng.random_range(-2.0..2.0));
        let data = RawDataset {
            x: DMatrix::from_fn(n, 2, |_, _| rng.random_range(-1.0..1.0)),
            m: DMatrix::from_fn(n, 2, |_, _| rng.random_range(-1.0..1.0)),
            y: y.clone(),
            c: c.clone(),
            row_ids: (1..=n).map(|i| i.to_string()).collect(),
            exposure_names: vec!["x1".into(), "x2".into()],
            mediator_names: vec!["m1".into(), "m2".into()],
            outcome_name: "y".into(),
            covariate_names: vec!["c1".into(), "c2".into(), "c3".into()],
        };
        let adj = residualize(&data).unwrap();

        // Independent oracle: solve the normal equations of [1, C] directly.
        let mut d = DMatrix::from_element(n, 4, 1.0);
        for j in 0..3 {
            d.set_column(j + 1, &c.column(j));
        }
        let dtd = d.transpose() * &d;
        let dty = d.transpose() * &y;
        let coef = dtd.cholesky().unwrap().solve(&dty);
        let oracle = &y - &d * coef;
        for i in 0..n {
            assert_relative_eq!(adj.y_adj[i], oracle[i], epsilon = 1e-8);
        }

        // Orthogonality to every covariate column.
        for j in 0..3 {
            let dot = c.column(j).dot(&adj.y_adj);
            assert!(
                dot.abs() <= 1e-8 * c.column(j).norm() * adj.y_adj.norm().max(1.0),
                "covariate {j} correlation {dot}"
            );
        }
        // Zero means everywhere.
        for j in 0..2 {
            assert!(adj.x_adj.column(j).sum().abs() / n as f64 <= 1e-10);
            assert!(adj.m_adj.column(j).sum().abs() / n as f64 <= 1e-10);
        }
        assert!(adj.y_adj.sum().abs() / n as f64 <= 1e-10);
    }

    #[test]
    fn residualize_is_idempotent() {
        let mut rng = StdRng::seed_from_u64(11);
        let n = 30;
        let data = RawDataset {
            x: DMatrix::from_fn(n, 3, |_, _| rng.random_range(-1.0..1.0)),
            m: DMatrix::from_fn(n, 2, |_, _| rng.random_range(-1.0..1.0)),
            y: DVector::from_fn(n, |_, _| rng.random_range(-1.0..1.0)),
            c: DMatrix::from_fn(n, 2, |_, _| rng.random_range(-1.0..1.0)),
            row_ids: (1..=n).map(|i| i.to_string()).collect(),
            exposure_names: vec!["x1".into(), "x2".into(), "x3".into()],
            mediator_names: vec!["m1".into(), "m2".into()],
            outcome_name: "y".into(),
            covariate_names: vec!["c1".into(), "c2".into()],
        };
        let once = residualize(&data).unwrap();
        let again = residualize(&RawDataset {
            x: once.x_adj.clone(),
            m: once.m_adj.clone(),
            y: once.y_adj.clone(),
            ..data.clone()
        })
        .unwrap();
        for (a, b) in once.x_adj.iter().zip(again.x_adj.iter()) {
            assert_relative_eq!(a, b, epsilon = 1e-10);
        }
        for (a, b) in once.y_adj.iter().zip(again.y_adj.iter()) {
            assert_relative_eq!(a, b, epsilon = 1e-10);
        }
    }

    #[test]
    fn rank_deficient_covariates_name_the_column() {
        let n = 20;
        let base = DVector::from_fn(n, |i, _| (i as f64).cos());
        let mut c = DMatrix::zeros(n, 2);
        c.set_column(0, &base);
        c.set_column(1, &(2.0 * &base)); // exact duplicate direction
        let data = RawDataset {
            x: DMatrix::from_fn(n, 1, |i, _| i as f64),
            m: DMatrix::from_fn(n, 1, |i, _| (i * i) as f64),
            y: DVector::from_fn(n, |i, _| i as f64),
            c,
            row_ids: (1..=n).map(|i| i.to_string()).collect(),
            exposure_names: vec!["x1".into()],
            mediator_names: vec!["m1".into()],
            outcome_name: "y".into(),
            covariate_names: vec!["c1".into(), "c2".into()],
        };
        let err = residualize(&data).unwrap_err();
        assert!(matches!(err, Error::RankDeficientCovariates(2)), "got: {err}");
    }

    #[test]
    fn standardize_scales_to_unit_variance_and_records_scales() {
        let mut rng = StdRng::seed_from_u64(13);
        let n = 40;
        let data = RawDataset {
            x: DMatrix::from_fn(n, 2, |_, _| rng.random_range(-1.0..1.0)),
            m: DMatrix::from_fn(n, 3, |_, j| rng.random_range(-1.0..1.0) * (j + 1) as f64 * 5.0),
            y: DVector::from_fn(n, |_, _| rng.random_range(-1.0..1.0) * 10.0),
            c: DMatrix::zeros(n, 0),
            row_ids: (1..=n).map(|i| i.to_string()).collect(),
            exposure_names: vec!["x1".into(), "x2".into()],
            mediator_names: vec!["m1".into(), "m2".into(), "m3".into()],
            outcome_name: "y".into(),
            covariate_names: vec![],
        };
        let adj = residualize(&data).unwrap();
        let (scaled, record) = standardize(&adj).unwrap();
        let denom = (n - 1) as f64;
        for j in 0..3 {
            let var: f64 = scaled.m_adj.column(j).iter().map(|v| v * v).sum::<f64>() / denom;
            assert_relative_eq!(var, 1.0, epsilon = 1e-10);
            // Back-multiplying restores the original column.
            for i in 0..n {
                assert_relative_eq!(
                    scaled.m_adj[(i, j)] * record.m_scales[j],
                    adj.m_adj[(i, j)],
                    epsilon = 1e-10
                );
            }
        }
        let y_var: f64 = scaled.y_adj.iter().map(|v| v * v).sum::<f64>() / denom;
        assert_relative_eq!(y_var, 1.0, epsilon = 1e-10);
        assert!(!record.is_identity());
        assert!(Standardization::identity(3).is_identity());
    }

    #[test]
    fn standardize_rejects_zero_variance_mediator() {
        let n = 10;
        let adj = AdjustedDataset {
            x_adj: DMatrix::from_fn(n, 1, |i, _| i as f64),
            m_adj: DMatrix::zeros(n, 1),
            y_adj: DVector::from_fn(n, |i, _| i as f64 - 4.5),
            adjustment_record: "mean-centered (no covariates)".into(),
            exposure_names: vec!["x1".into()],
            mediator_names: vec!["flat".into()],
            outcome_name: "y".into(),
        };
        let err = standardize(&adj).unwrap_err();
        assert!(err.to_string().contains("flat"), "got: {err}");
    }

    #[test]
    fn role_parsing_round_trip() {
        for (s, role) in [
            ("exposure", ColumnRole::Exposure),
            ("Mediator", ColumnRole::Mediator),
            ("OUTCOME", ColumnRole::Outcome),
            ("covariate", ColumnRole::Covariate),
            ("id", ColumnRole::Id),
            ("ignore", ColumnRole::Ignore),
        ] {
            assert_eq!(s.parse::<ColumnRole>().unwrap(), role);
            assert_eq!(role.to_string().parse::<ColumnRole>().unwrap(), role);
        }
        assert!("banana".parse::<ColumnRole>().is_err());
    }
}
