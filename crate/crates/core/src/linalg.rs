//! Dense complex linear algebra shared by every module.
//!
//! Everything here is a thin layer over `nalgebra`: hermitian
//! eigendecompositions sorted ascending, spectral norms, ranks and kernel
//! bases. Operators in this crate are small (at most a few hundred rows), so
//! dense storage is the norm.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

pub type C64 = Complex64;
pub type CMatrix = DMatrix<C64>;
pub type CVector = DVector<C64>;

pub const ZERO: C64 = C64::new(0.0, 0.0);
pub const ONE: C64 = C64::new(1.0, 0.0);
pub const I: C64 = C64::new(0.0, 1.0);

pub fn c(re: f64) -> C64 {
    C64::new(re, 0.0)
}

/// Ascending eigenvalues and matching orthonormal eigenvectors (as columns)
/// of a hermitian matrix. Only the lower triangle is read.
pub fn hermitian_eigen(m: &CMatrix) -> (Vec<f64>, CMatrix) {
    let n = m.nrows();
    if n == 0 {
        return (Vec::new(), CMatrix::zeros(0, 0));
    }
    let sym = m.clone().symmetric_eigen();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| sym.eigenvalues[a].total_cmp(&sym.eigenvalues[b]));
    let values = order.iter().map(|&i| sym.eigenvalues[i]).collect();
    let mut vectors = CMatrix::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        vectors.set_column(dst, &sym.eigenvectors.column(src));
    }
    (values, vectors)
}

pub fn hermitian_eigenvalues(m: &CMatrix) -> Vec<f64> {
    if m.nrows() == 0 {
        return Vec::new();
    }
    let mut v: Vec<f64> = m.clone().symmetric_eigenvalues().iter().copied().collect();
    v.sort_by(f64::total_cmp);
    v
}

/// Largest singular value.
pub fn spectral_norm(m: &CMatrix) -> f64 {
    if m.nrows() == 0 || m.ncols() == 0 {
        return 0.0;
    }
    m.clone()
        .svd(false, false)
        .singular_values
        .iter()
        .fold(0.0_f64, |acc, &s| acc.max(s))
}

pub fn max_abs(m: &CMatrix) -> f64 {
    m.iter().fold(0.0_f64, |acc, z| acc.max(z.norm()))
}

pub fn max_abs_diff(a: &CMatrix, b: &CMatrix) -> f64 {
    debug_assert_eq!(a.shape(), b.shape());
    a.iter()
        .zip(b.iter())
        .fold(0.0_f64, |acc, (x, y)| acc.max((x - y).norm()))
}

pub fn hermitian_defect(m: &CMatrix) -> f64 {
    max_abs_diff(m, &m.adjoint())
}

/// Numerical rank: singular values above `rel_tol * largest`.
pub fn rank(m: &CMatrix, rel_tol: f64) -> usize {
    if m.nrows() == 0 || m.ncols() == 0 {
        return 0;
    }
    let sv = m.clone().svd(false, false).singular_values;
    let top = sv.iter().fold(0.0_f64, |acc, &s| acc.max(s));
    if top == 0.0 {
        return 0;
    }
    sv.iter().filter(|&&s| s > rel_tol * top).count()
}

/// Orthonormal basis (columns) of the kernel of `m`.
pub fn kernel_basis(m: &CMatrix, rel_tol: f64) -> CMatrix {
    let gram = m.adjoint() * m;
    let (values, vectors) = hermitian_eigen(&gram);
    let top = values.iter().fold(0.0_f64, |acc, v| acc.max(v.abs())).max(1.0);
    let cols: Vec<usize> = values
        .iter()
        .enumerate()
        .filter(|(_, &v)| v <= rel_tol * top)
        .map(|(i, _)| i)
        .collect();
    select_columns(&vectors, &cols)
}

/// Orthonormal basis of the range of a hermitian projection.
pub fn projection_range(p: &CMatrix) -> CMatrix {
    let (values, vectors) = hermitian_eigen(p);
    let cols: Vec<usize> = values
        .iter()
        .enumerate()
        .filter(|(_, &v)| v > 0.5)
        .map(|(i, _)| i)
        .collect();
    select_columns(&vectors, &cols)
}

pub fn select_columns(m: &CMatrix, cols: &[usize]) -> CMatrix {
    let mut out = CMatrix::zeros(m.nrows(), cols.len());
    for (dst, &src) in cols.iter().enumerate() {
        out.set_column(dst, &m.column(src));
    }
    out
}

/// Apply a real function to a hermitian matrix through its eigendecomposition.
pub fn hermitian_function(m: &CMatrix, f: impl Fn(f64) -> f64) -> CMatrix {
    let (values, vectors) = hermitian_eigen(m);
    let n = values.len();
    let mut scaled = vectors.clone();
    for j in 0..n {
        let fj = c(f(values[j]));
        for i in 0..n {
            scaled[(i, j)] *= fj;
        }
    }
    scaled * vectors.adjoint()
}

pub fn diagonal(values: &[f64]) -> CMatrix {
    CMatrix::from_diagonal(&CVector::from_iterator(
        values.len(),
        values.iter().map(|&v| c(v)),
    ))
}

pub fn kron(a: &CMatrix, b: &CMatrix) -> CMatrix {
    a.kronecker(b)
}

/// Largest absolute deviation between two sorted spectra of equal length.
pub fn spectrum_deviation(a: &[f64], b: &[f64]) -> Option<f64> {
    if a.len() != b.len() {
        return None;
    }
    Some(
        a.iter()
            .zip(b)
            .fold(0.0_f64, |acc, (x, y)| acc.max((x - y).abs())),
    )
}
