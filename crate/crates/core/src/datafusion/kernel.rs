use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

use super::FusionError;

/// Second-order Gaussian correlation `Π_k exp(−θ_k |x_k − x'_k|²)`.
pub fn correlation(x: &[f64], y: &[f64], theta: &[f64]) -> f64 {
    let s: f64 = x
        .iter()
        .zip(y)
        .zip(theta)
        .map(|((a, b), t)| t * (a - b) * (a - b))
        .sum();
    (-s).exp()
}

/// Correlation matrix of the rows of `x` (without nugget).
pub fn correlation_matrix(x: &DMatrix<f64>, theta: &[f64]) -> DMatrix<f64> {
    let n = x.nrows();
    let m = x.ncols();
    let rows: Vec<Vec<f64>> = (0..n).map(|i| (0..m).map(|k| x[(i, k)]).collect()).collect();
    let mut r = DMatrix::identity(n, n);
    for i in 0..n {
        for j in 0..i {
            let v = correlation(&rows[i], &rows[j], theta);
            r[(i, j)] = v;
            r[(j, i)] = v;
        }
    }
    r
}

/// Cholesky of `R + nugget·I`, escalating the nugget ×10 until it succeeds
/// or exceeds `max_nugget`.
pub(crate) fn factorize(
    r: &DMatrix<f64>,
    nugget: f64,
    max_nugget: f64,
) -> Result<(Cholesky<f64, Dyn>, f64), FusionError> {
    let mut nug = nugget;
    loop {
        let mut m = r.clone();
        for i in 0..m.nrows() {
            m[(i, i)] += nug;
        }
        if let Some(ch) = Cholesky::new(m) {
            if nug > nugget {
                log::debug!("nugget escalated from {nugget:e} to {nug:e} (n = {})", r.nrows());
            }
            return Ok((ch, nug));
        }
        if nug >= max_nugget {
            return Err(FusionError::Conditioning { nugget: nug, n: r.nrows() });
        }
        nug = if nug == 0.0 { 1e-12 } else { (nug * 10.0).min(max_nugget) };
    }
}

/// `ln |R|` from a Cholesky factor.
pub(crate) fn log_det(ch: &Cholesky<f64, Dyn>) -> f64 {
    2.0 * ch.l_dirty().diagonal().iter().map(|d| d.ln()).sum::<f64>()
}

/// Correlation vector from `x` to every training row; coincident rows
/// receive the nugget as well so that predictions interpolate exactly.
pub(crate) fn correlation_vector(train: &[Vec<f64>], x: &[f64], theta: &[f64], nugget: f64) -> DVector<f64> {
    DVector::from_iterator(
        train.len(),
        train.iter().map(|row| {
            let c = correlation(row, x, theta);
            if row.as_slice() == x {
                c + nugget
            } else {
                c
            }
        }),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    proptest! {
        #[test]
        fn kernel_properties(
            x in prop::collection::vec(-3.0f64..3.0, 2),
            y in prop::collection::vec(-3.0f64..3.0, 2),
            theta in prop::collection::vec(1e-3f64..1e3, 2),
            scale in 1.0f64..4.0,
        ) {
            prop_assert_eq!(correlation(&x, &x, &theta), 1.0);
            let c = correlation(&x, &y, &theta);
            prop_assert!((0.0..=1.0).contains(&c));
            prop_assert_eq!(c, correlation(&y, &x, &theta));
            // Moving y farther along the same direction never increases correlation.
            let far: Vec<f64> = x.iter().zip(&y).map(|(a, b)| a + scale * (b - a)).collect();
            prop_assert!(correlation(&x, &far, &theta) <= c);
        }
    }

    #[test]
    fn strictly_positive_for_moderate_distances() {
        assert!(correlation(&[0.0, 0.0], &[1.0, 1.0], &[10.0, 10.0]) > 0.0);
    }

    #[test]
    fn nugget_escalates_for_duplicate_rows() {
        let x = DMatrix::from_row_slice(3, 1, &[0.0, 0.0, 1.0]);
        let r = correlation_matrix(&x, &[1.0]);
        let (_, nug) = factorize(&r, 0.0, 1e-4).unwrap();
        assert!(nug > 0.0);
    }
}
