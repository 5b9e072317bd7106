//! Dense matrix exponential by scaling and squaring.

use nalgebra::DMatrix;

/// Bound on the truncated Taylor remainder, relative to the scaled matrix.
const REMAINDER_BOUND: f64 = 1e-15;
const MAX_ORDER: usize = 40;

fn norm_one(a: &DMatrix<f64>) -> f64 {
    a.column_iter().map(|c| c.iter().map(|v| v.abs()).sum::<f64>()).fold(0.0, f64::max)
}

/// `exp(A)`.
///
/// The matrix is scaled by `2^-s` so that its 1-norm is at most 1/2, the
/// Taylor series is summed until the tail bound `θ^{m+1}/(m+1)! · 1/(1-θ)`
/// drops below 1e-15, and the result is squared `s` times.
pub fn expm(a: &DMatrix<f64>) -> DMatrix<f64> {
    assert!(a.is_square(), "expm needs a square matrix");
    let n = a.nrows();
    let norm = norm_one(a);
    if norm == 0.0 {
        return DMatrix::identity(n, n);
    }
    let s = if norm > 0.5 { (norm / 0.5).log2().ceil() as i32 } else { 0 };
    let scaled = a * 2f64.powi(-s);
    let theta = norm * 2f64.powi(-s);

    let mut result = DMatrix::identity(n, n);
    let mut term = DMatrix::identity(n, n);
    let mut tail = 1.0;
    for m in 1..=MAX_ORDER {
        term = &term * &scaled / m as f64;
        result += &term;
        tail *= theta / (m + 1) as f64;
        if tail / (1.0 - theta) < REMAINDER_BOUND {
            break;
        }
    }
    for _ in 0..s {
        result = &result * &result;
    }
    result
}
