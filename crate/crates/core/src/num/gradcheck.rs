//! Central finite-difference gradient checking.
//!
//! Ships as library code rather than test-only so that downstream crates and
//! the acceptance suite can verify any scalar-valued function of a matrix.

use super::matrix::Matrix;

/// Central difference gradient of a scalar function at `at`:
/// (f(x + step e_i) - f(x - step e_i)) / (2 step) for every entry.
pub fn central_diff(mut f: impl FnMut(&Matrix) -> f64, at: &Matrix, step: f64) -> Matrix {
    let mut grad = Matrix::zeros(at.rows(), at.cols());
    let mut probe = at.clone();
    for i in 0..at.data().len() {
        let original = at.data()[i];
        probe.data_mut()[i] = original + step;
        let plus = f(&probe);
        probe.data_mut()[i] = original - step;
        let minus = f(&probe);
        probe.data_mut()[i] = original;
        grad.data_mut()[i] = (plus - minus) / (2.0 * step);
    }
    grad
}

/// Largest relative error between an analytic and a numeric gradient.
///
/// Relative to max(|a|, |b|, 1e-8); entries where both sides vanish count
/// as zero error.
pub fn max_rel_error(analytic: &Matrix, numeric: &Matrix) -> f64 {
    assert!(
        analytic.same_shape(numeric),
        "gradient shapes differ: {:?} vs {:?}",
        analytic.shape(),
        numeric.shape()
    );
    analytic
        .data()
        .iter()
        .zip(numeric.data())
        .map(|(&a, &n)| {
            if a == 0.0 && n == 0.0 {
                0.0
            } else {
                (a - n).abs() / a.abs().max(n.abs()).max(1e-8)
            }
        })
        .fold(0.0, f64::max)
}
