//! Seeded random elements, vectors and operators. Used by the harness for
//! quadratic-form cross-checks and by the test suites.

use rand::Rng;

use crate::algebra::{AlgebraElement, AlgebraSignature};
use crate::linalg::{self, CMatrix, C64};
use crate::module::{BlockDiagonal, ModuleOperator, ModuleVector};

fn complex(rng: &mut impl Rng) -> C64 {
    C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
}

pub fn matrix(rows: usize, cols: usize, rng: &mut impl Rng) -> CMatrix {
    CMatrix::from_fn(rows, cols, |_, _| complex(rng))
}

pub fn element(signature: &AlgebraSignature, rng: &mut impl Rng) -> AlgebraElement {
    let blocks = signature.block_dims().iter().map(|&n| matrix(n, n, rng)).collect();
    AlgebraElement::from_blocks(signature.clone(), blocks).expect("shapes follow the signature")
}

pub fn hermitian(signature: &AlgebraSignature, rng: &mut impl Rng) -> AlgebraElement {
    element(signature, rng).hermitian_part()
}

/// `b* b` for a random `b`.
pub fn positive(signature: &AlgebraSignature, rng: &mut impl Rng) -> AlgebraElement {
    let b = element(signature, rng);
    &b.star() * &b
}

pub fn vector(signature: &AlgebraSignature, rank: usize, rng: &mut impl Rng) -> ModuleVector {
    let entries = (0..rank).map(|_| element(signature, rng)).collect();
    ModuleVector::new(signature.clone(), entries).expect("uniform entries")
}

pub fn operator(signature: &AlgebraSignature, rank: usize, rng: &mut impl Rng) -> ModuleOperator {
    let entries = (0..rank * rank).map(|_| element(signature, rng)).collect();
    ModuleOperator::new(signature.clone(), rank, entries).expect("uniform entries")
}

pub fn hermitian_operator(signature: &AlgebraSignature, rank: usize, rng: &mut impl Rng) -> ModuleOperator {
    let t = operator(signature, rank, rng);
    let flat = t.flatten();
    ModuleOperator::unflatten(signature, rank, &flat.map(linalg::hermitian_part)).expect("same shape")
}

/// Random operator of flattened rank at most `max_rank` per block.
pub fn low_rank_operator(
    signature: &AlgebraSignature,
    rank: usize,
    max_rank: usize,
    rng: &mut impl Rng,
) -> ModuleOperator {
    let blocks = signature
        .block_dims()
        .iter()
        .map(|&n| {
            let dim = rank * n;
            let r = max_rank.min(dim);
            matrix(dim, r, rng) * matrix(r, dim, rng)
        })
        .collect();
    ModuleOperator::unflatten(signature, rank, &BlockDiagonal::new(blocks)).expect("same shape")
}

/// Random unitary operator (QR of a random flattened matrix, per block).
pub fn unitary(signature: &AlgebraSignature, rank: usize, rng: &mut impl Rng) -> ModuleOperator {
    let blocks = signature
        .block_dims()
        .iter()
        .map(|&n| {
            let dim = rank * n;
            matrix(dim, dim, rng).qr().q()
        })
        .collect();
    ModuleOperator::unflatten(signature, rank, &BlockDiagonal::new(blocks)).expect("same shape")
}

/// Diagonal unitary on a rank-one module over ℂ^N: multiplication by
/// unimodular phases.
pub fn diagonal_phases(n: usize, rng: &mut impl Rng) -> ModuleOperator {
    let phases: Vec<C64> = (0..n).map(|_| C64::from_polar(1.0, rng.random_range(0.0..std::f64::consts::TAU))).collect();
    ModuleOperator::multiplication(&AlgebraElement::from_diagonal(&phases).expect("n ≥ 1"))
}

/// Operators `V diag(values) V^H` in the eigenbasis `V` of a Hermitian
/// operator `h`, so the result commutes with `h`. `values` gives one value per
/// flattened coordinate, block by block, ordered like the ascending spectrum.
pub fn spectral_function(h: &ModuleOperator, values: impl Fn(usize, f64) -> C64) -> ModuleOperator {
    let flat = h.flatten();
    let mut offset = 0;
    let blocks = flat
        .blocks()
        .iter()
        .map(|b| {
            let (vals, vecs) = linalg::hermitian_eigen(b);
            let diag = nalgebra::DVector::from_iterator(
                vals.len(),
                vals.iter().enumerate().map(|(i, &x)| values(offset + i, x)),
            );
            offset += vals.len();
            &vecs * CMatrix::from_diagonal(&diag) * vecs.adjoint()
        })
        .collect();
    ModuleOperator::unflatten(h.signature(), h.rank(), &BlockDiagonal::new(blocks)).expect("same shape")
}
