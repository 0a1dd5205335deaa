//! Reference computations for the test suites.
//!
//! Nothing here shares code with `cframe-core`: spectra are computed by a
//! plain cyclic Jacobi sweep on the real embedding of a complex Hermitian
//! matrix, so a bug in the production eigen path cannot hide behind its
//! own oracle.

use nalgebra::{Complex, DMatrix};

pub type C64 = Complex<f64>;

/// Eigenvalues of a real symmetric matrix, ascending.
pub fn jacobi_symmetric_eigenvalues(mut a: DMatrix<f64>) -> Vec<f64> {
    let n = a.nrows();
    assert_eq!(n, a.ncols(), "square input required");
    for _sweep in 0..100 {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| a[(i, j)] * a[(i, j)])
            .sum();
        let diag: f64 = (0..n).map(|i| a[(i, i)] * a[(i, i)]).sum();
        if off <= 1e-30 * diag.max(1e-300) || off < 1e-300 {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = a[(p, q)];
                if apq == 0.0 {
                    continue;
                }
                let theta = (a[(q, q)] - a[(p, p)]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = a[(k, p)];
                    let akq = a[(k, q)];
                    a[(k, p)] = c * akp - s * akq;
                    a[(k, q)] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[(p, k)];
                    let aqk = a[(q, k)];
                    a[(p, k)] = c * apk - s * aqk;
                    a[(q, k)] = s * apk + c * aqk;
                }
            }
        }
    }
    let mut ev: Vec<f64> = (0..n).map(|i| a[(i, i)]).collect();
    ev.sort_by(|x, y| x.total_cmp(y));
    ev
}

/// Real symmetric embedding `[[Re, -Im], [Im, Re]]` of a Hermitian matrix.
pub fn real_embedding(h: &DMatrix<C64>) -> DMatrix<f64> {
    let n = h.nrows();
    let mut out = DMatrix::zeros(2 * n, 2 * n);
    for i in 0..n {
        for j in 0..n {
            let z = (h[(i, j)] + h[(j, i)].conj()) * 0.5;
            out[(i, j)] = z.re;
            out[(i + n, j + n)] = z.re;
            out[(i, j + n)] = -z.im;
            out[(i + n, j)] = z.im;
        }
    }
    out
}

/// Eigenvalues of the Hermitian part of `h`, ascending, with multiplicity.
pub fn hermitian_eigenvalues(h: &DMatrix<C64>) -> Vec<f64> {
    let doubled = jacobi_symmetric_eigenvalues(real_embedding(h));
    // every eigenvalue of h appears twice in the embedding
    doubled.into_iter().step_by(2).collect()
}

pub fn min_eigenvalue(h: &DMatrix<C64>) -> f64 {
    hermitian_eigenvalues(h)[0]
}

pub fn max_eigenvalue(h: &DMatrix<C64>) -> f64 {
    *hermitian_eigenvalues(h).last().expect("non-empty matrix")
}

/// Singular values of `m` via the spectrum of `m^H m`, descending.
pub fn singular_values(m: &DMatrix<C64>) -> Vec<f64> {
    let gram = m.adjoint() * m;
    let mut sv: Vec<f64> = hermitian_eigenvalues(&gram).into_iter().map(|x| x.max(0.0).sqrt()).collect();
    sv.reverse();
    sv
}

/// Spectral norm `max σ(m)`.
pub fn spectral_norm(m: &DMatrix<C64>) -> f64 {
    singular_values(m)[0]
}

/// Block-diagonal assembly of square blocks into one dense matrix.
pub fn block_diag(blocks: &[DMatrix<C64>]) -> DMatrix<C64> {
    let n: usize = blocks.iter().map(|b| b.nrows()).sum();
    let mut out = DMatrix::zeros(n, n);
    let mut off = 0;
    for b in blocks {
        out.view_mut((off, off), (b.nrows(), b.ncols())).copy_from(b);
        off += b.nrows();
    }
    out
}
