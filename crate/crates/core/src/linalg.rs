//! Small dense complex-matrix helpers shared across modules.

use ndarray::Array2;
use num_complex::Complex64;

pub fn identity(n: usize) -> Array2<Complex64> {
    Array2::from_diag_elem(n, Complex64::new(1.0, 0.0))
}

pub fn dagger(m: &Array2<Complex64>) -> Array2<Complex64> {
    m.t().mapv(|z| z.conj())
}

/// Max-abs entry of `a - b`.
pub fn max_abs_diff(a: &Array2<Complex64>, b: &Array2<Complex64>) -> f64 {
    a.iter()
        .zip(b.iter())
        .map(|(x, y)| (x - y).norm())
        .fold(0.0, f64::max)
}

pub fn unitarity_defect(m: &Array2<Complex64>) -> f64 {
    let n = m.nrows();
    max_abs_diff(&dagger(m).dot(m), &identity(n))
}

pub fn commutator_norm(a: &Array2<Complex64>, b: &Array2<Complex64>) -> f64 {
    max_abs_diff(&a.dot(b), &b.dot(a))
}
