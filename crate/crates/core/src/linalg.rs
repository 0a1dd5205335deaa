//! Dense complex helpers. Hermitian eigendecomposition is the only spectral
//! primitive; square roots, pseudo-inverses, singular values and pencil
//! extremes are built on it.
//!
//! Singular quantities come from the Jordan–Wielandt matrix
//! `J = [[0, M], [M^H, 0]]`, whose eigenpairs are `(±σ, [u; ±v]/√2)`. This
//! keeps small singular values at `ε‖M‖` accuracy (no squaring) and avoids
//! nalgebra's complex SVD, which loses accuracy on some rank-deficient inputs.

use nalgebra::{Complex, DMatrix, DVector};

pub type C64 = Complex<f64>;
pub type CMatrix = DMatrix<C64>;

pub fn hermitian_part(m: &CMatrix) -> CMatrix {
    (m + m.adjoint()).scale(0.5)
}

/// Largest entry modulus of `m - m^H`.
pub fn hermitian_defect(m: &CMatrix) -> f64 {
    max_abs(&(m - m.adjoint()))
}

pub fn max_abs(m: &CMatrix) -> f64 {
    m.iter().fold(0.0_f64, |acc, z| acc.max(z.norm()))
}

/// Eigen-decomposition of the Hermitian part of `m`; eigenvalues ascending,
/// eigenvectors in the matching columns.
pub fn hermitian_eigen(m: &CMatrix) -> (Vec<f64>, CMatrix) {
    let n = m.nrows();
    let eig = hermitian_part(m).symmetric_eigen();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let mut vectors = CMatrix::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        vectors.set_column(dst, &eig.eigenvectors.column(src));
    }
    (values, vectors)
}

pub fn min_eigenvalue(m: &CMatrix) -> f64 {
    hermitian_eigen(m).0[0]
}

pub fn max_eigenvalue(m: &CMatrix) -> f64 {
    *hermitian_eigen(m).0.last().expect("non-empty matrix")
}

/// `V f(Λ) V^H` for the Hermitian part of `m`.
pub fn hermitian_function(m: &CMatrix, f: impl Fn(f64) -> f64) -> CMatrix {
    let (values, vectors) = hermitian_eigen(m);
    let scaled = DVector::from_iterator(values.len(), values.iter().map(|&x| C64::from(f(x))));
    let mut left = vectors.clone();
    for (j, s) in scaled.iter().enumerate() {
        left.column_mut(j).scale_mut(s.re);
    }
    left * vectors.adjoint()
}

/// Principal square root with negative eigenvalues clamped to zero.
pub fn psd_sqrt(m: &CMatrix) -> CMatrix {
    hermitian_function(m, |x| x.max(0.0).sqrt())
}

/// Positive part of the Jordan–Wielandt spectrum: `(σ_i, u_i, v_i)` with
/// `M v_i = σ_i u_i` and unit `u_i`, `v_i`, for `σ_i > threshold`, descending.
fn singular_triplets(m: &CMatrix, threshold: f64) -> Vec<(f64, DVector<C64>, DVector<C64>)> {
    let (rows, cols) = m.shape();
    let (values, vectors) = jordan_wielandt_eigen(m);
    values
        .iter()
        .enumerate()
        .rev()
        .take_while(|(_, &s)| s > threshold)
        .map(|(k, &s)| {
            let col = vectors.column(k);
            let u = col.rows(0, rows).map(|z| z * std::f64::consts::SQRT_2);
            let v = col.rows(rows, cols).map(|z| z * std::f64::consts::SQRT_2);
            (s, u, v)
        })
        .collect()
}

fn jordan_wielandt_eigen(m: &CMatrix) -> (Vec<f64>, CMatrix) {
    let (rows, cols) = m.shape();
    let mut j = CMatrix::zeros(rows + cols, rows + cols);
    j.view_mut((0, rows), (rows, cols)).copy_from(m);
    j.view_mut((rows, 0), (cols, rows)).copy_from(&m.adjoint());
    hermitian_eigen(&j)
}

/// Singular values, descending.
pub fn singular_values(m: &CMatrix) -> Vec<f64> {
    let k = m.nrows().min(m.ncols());
    if k == 0 {
        return Vec::new();
    }
    let (values, _) = jordan_wielandt_eigen(m);
    let mut sv: Vec<f64> = values.iter().rev().take(k).map(|s| s.abs()).collect();
    sv.sort_by(|a, b| b.total_cmp(a));
    sv
}

/// Largest singular value. Squaring is harmless for the top of the
/// spectrum, so this uses the smaller Gram matrix.
pub fn spectral_norm(m: &CMatrix) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    let gram = if m.nrows() < m.ncols() { m * m.adjoint() } else { m.adjoint() * m };
    max_eigenvalue(&gram).max(0.0).sqrt()
}

pub fn rank(m: &CMatrix, threshold: f64) -> usize {
    singular_values(m).into_iter().filter(|&s| s > threshold).count()
}

/// Moore–Penrose inverse; singular values `<= threshold` are treated as zero.
pub fn pinv(m: &CMatrix, threshold: f64) -> CMatrix {
    let mut out = CMatrix::zeros(m.ncols(), m.nrows());
    for (s, u, v) in singular_triplets(m, threshold.max(0.0)) {
        out += (v * u.adjoint()).unscale(s);
    }
    out
}

/// Moore–Penrose inverse of the Hermitian part of `m`; eigenvalues with
/// modulus `<= threshold` are treated as zero.
pub fn hermitian_pinv(m: &CMatrix, threshold: f64) -> CMatrix {
    hermitian_function(m, |x| if x.abs() > threshold { 1.0 / x } else { 0.0 })
}

/// Moore–Penrose inverse of a Hermitian PSD matrix raised to `power`
/// (eigenvalues `<= threshold` mapped to zero).
pub fn psd_pinv_power(m: &CMatrix, threshold: f64, power: f64) -> CMatrix {
    hermitian_function(m, |x| if x > threshold { x.powf(-power) } else { 0.0 })
}

/// Orthogonal projector onto the column space of `m`.
pub fn range_projector(m: &CMatrix, threshold: f64) -> CMatrix {
    let mut out = CMatrix::zeros(m.nrows(), m.nrows());
    for (_, u, _) in singular_triplets(m, threshold.max(0.0)) {
        out += &u * u.adjoint();
    }
    out
}

pub fn identity(n: usize) -> CMatrix {
    CMatrix::identity(n, n)
}
