//! Small numeric and serialization helpers shared across modules.

use nalgebra::DMatrix;

/// Pairwise (cascade) summation.
///
/// Used for penalty and loss accumulation so the objective-difference
/// stopping rule stays stable at tight tolerances: naive left-to-right
/// summation of ~10^5 terms loses enough precision to make successive
/// objective values jitter above 1e-6.
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

/// Pairwise summation over an iterator, buffering into a Vec.
pub fn pairwise_sum_iter(values: impl Iterator<Item = f64>) -> f64 {
    let buf: Vec<f64> = values.collect();
    pairwise_sum(&buf)
}

/// Convert a matrix to row-major nested vectors (the JSON wire format).
pub fn matrix_to_rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows())
        .map(|i| (0..m.ncols()).map(|j| m[(i, j)]).collect())
        .collect()
}

/// Rebuild a matrix from row-major nested vectors, validating shape.
pub fn rows_to_matrix(rows: &[Vec<f64>]) -> Result<DMatrix<f64>, String> {
    let nrows = rows.len();
    if nrows == 0 {
        return Ok(DMatrix::zeros(0, 0));
    }
    let ncols = rows[0].len();
    for (i, r) in rows.iter().enumerate() {
        if r.len() != ncols {
            return Err(format!(
                "row {} has {} entries, expected {}",
                i,
                r.len(),
                ncols
            ));
        }
    }
    Ok(DMatrix::from_fn(nrows, ncols, |i, j| rows[i][j]))
}

/// Format a float with a fixed number of significant digits, trimming
/// trailing zeros the way the report tables print (e.g. 1.34e-3 -> "0.001340"
/// at 4 significant digits becomes "1.340e-3" in scientific range).
///
/// Deterministic: same input always yields the same string.
pub fn format_sig(x: f64, sig: usize) -> String {
    if x == 0.0 {
        return "0".to_string();
    }
    if !x.is_finite() {
        return x.to_string();
    }
    let sig = sig.max(1);
    let mag = x.abs().log10().floor() as i32;
    // Use fixed notation for magnitudes near 1, scientific otherwise.
    if (-4..6).contains(&mag) {
        let decimals = (sig as i32 - 1 - mag).max(0) as usize;
        format!("{:.*}", decimals, x)
    } else {
        format!("{:.*e}", sig - 1, x)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pairwise_sum_matches_naive_on_small_inputs() {
        let v = [1.0, 2.0, 3.0, 4.0, 5.0];
        assert_eq!(pairwise_sum(&v), 15.0);
        assert_eq!(pairwise_sum(&[]), 0.0);
        assert_eq!(pairwise_sum(&[7.5]), 7.5);
    }

    #[test]
    fn pairwise_sum_is_more_stable_than_naive() {
        // 1 followed by many tiny terms: naive summation drops them all,
        // pairwise keeps most of their mass.
        let mut v = vec![1.0f64];
        v.extend(std::iter::repeat(1e-16).take(1 << 16));
        let exact = 1.0 + 1e-16 * ((1 << 16) as f64);
        let pw = pairwise_sum(&v);
        assert!((pw - exact).abs() < 1e-12 * exact);
    }

    #[test]
    fn matrix_row_round_trip() {
        let m = DMatrix::from_row_slice(2, 3, &[1.0, 2.0, 3.0, 4.0, 5.0, 6.0]);
        let rows = matrix_to_rows(&m);
        assert_eq!(rows, vec![vec![1.0, 2.0, 3.0], vec![4.0, 5.0, 6.0]]);
        let back = rows_to_matrix(&rows).unwrap();
        assert_eq!(back, m);
    }

    #[test]
    fn rows_to_matrix_rejects_ragged_input() {
        let rows = vec![vec![1.0, 2.0], vec![3.0]];
        assert!(rows_to_matrix(&rows).is_err());
    }

    #[test]
    fn format_sig_covers_fixed_and_scientific_ranges() {
        assert_eq!(format_sig(0.0, 4), "0");
        assert_eq!(format_sig(1.2345, 4), "1.234");
        assert_eq!(format_sig(0.00134, 4), "0.001340");
        assert_eq!(format_sig(151.0, 4), "151.0");
        assert_eq!(format_sig(1.2e-7, 3), "1.20e-7");
        assert_eq!(format_sig(-0.0134, 4), "-0.01340");
    }
}
