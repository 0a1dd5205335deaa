//! Finite-dimensional C*-algebras realized as direct sums of full complex
//! matrix blocks `M_{n_1} ⊕ … ⊕ M_{n_m}`.
//!
//! Every algebra here is unital. Arithmetic is blockwise; the involution is
//! the blockwise conjugate transpose and the norm is the largest singular
//! value over all blocks. Positivity and the Loewner order use a relative
//! eigenvalue floor `-tol·(1 + ‖a‖)`.

use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};
use std::sync::Arc;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::linalg::{self, CMatrix, C64};

/// Default relative floor for positivity tests.
pub const DEFAULT_PSD_TOL: f64 = 1e-9;

/// Block sizes `(n_1, …, n_m)` of a finite direct sum of matrix algebras.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct AlgebraSignature(Arc<[usize]>);

impl AlgebraSignature {
    pub fn new(block_dims: Vec<usize>) -> Result<Self> {
        if block_dims.is_empty() {
            return Err(Error::InvalidSignature("at least one block is required".into()));
        }
        if let Some(pos) = block_dims.iter().position(|&n| n == 0) {
            return Err(Error::InvalidSignature(format!("block {pos} has dimension 0")));
        }
        Ok(Self(block_dims.into()))
    }

    /// The scalar algebra ℂ.
    pub fn scalar() -> Self {
        Self(Arc::from(vec![1]))
    }

    /// The commutative algebra ℂ^n.
    pub fn commutative(n: usize) -> Result<Self> {
        Self::new(vec![1; n])
    }

    pub fn block_dims(&self) -> &[usize] {
        &self.0
    }

    pub fn num_blocks(&self) -> usize {
        self.0.len()
    }

    pub fn is_commutative(&self) -> bool {
        self.0.iter().all(|&n| n == 1)
    }

    pub(crate) fn check_same(&self, other: &Self) -> Result<()> {
        if self == other {
            Ok(())
        } else {
            Err(Error::SignatureMismatch { left: self.0.to_vec(), right: other.0.to_vec() })
        }
    }
}

impl fmt::Debug for AlgebraSignature {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?}", &*self.0)
    }
}

impl Serialize for AlgebraSignature {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.0.serialize(s)
    }
}

impl<'de> Deserialize<'de> for AlgebraSignature {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let dims = Vec::<usize>::deserialize(d)?;
        AlgebraSignature::new(dims).map_err(serde::de::Error::custom)
    }
}

/// An element of the algebra: one square complex matrix per block.
#[derive(Clone, PartialEq)]
pub struct AlgebraElement {
    signature: AlgebraSignature,
    blocks: Vec<CMatrix>,
}

impl fmt::Debug for AlgebraElement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("AlgebraElement").field("signature", &self.signature).field("blocks", &self.blocks).finish()
    }
}

impl AlgebraElement {
    pub fn from_blocks(signature: AlgebraSignature, blocks: Vec<CMatrix>) -> Result<Self> {
        if blocks.len() != signature.num_blocks() {
            return Err(Error::ShapeMismatch(format!(
                "expected {} blocks, got {}",
                signature.num_blocks(),
                blocks.len()
            )));
        }
        for (k, (b, &n)) in blocks.iter().zip(signature.block_dims()).enumerate() {
            if b.nrows() != n || b.ncols() != n {
                return Err(Error::ShapeMismatch(format!(
                    "block {k} is {}x{}, signature requires {n}x{n}",
                    b.nrows(),
                    b.ncols()
                )));
            }
        }
        Ok(Self { signature, blocks })
    }

    pub fn zero(signature: &AlgebraSignature) -> Self {
        let blocks = signature.block_dims().iter().map(|&n| CMatrix::zeros(n, n)).collect();
        Self { signature: signature.clone(), blocks }
    }

    pub fn unit(signature: &AlgebraSignature) -> Self {
        Self::scalar(signature, C64::new(1.0, 0.0))
    }

    /// `c · 1`.
    pub fn scalar(signature: &AlgebraSignature, c: C64) -> Self {
        let blocks = signature.block_dims().iter().map(|&n| CMatrix::identity(n, n) * c).collect();
        Self { signature: signature.clone(), blocks }
    }

    /// Element of a commutative algebra ℂ^N from its N coordinates.
    pub fn from_diagonal(values: &[C64]) -> Result<Self> {
        let signature = AlgebraSignature::commutative(values.len())?;
        let blocks = values.iter().map(|&v| CMatrix::from_element(1, 1, v)).collect();
        Ok(Self { signature, blocks })
    }

    pub fn signature(&self) -> &AlgebraSignature {
        &self.signature
    }

    pub fn blocks(&self) -> &[CMatrix] {
        &self.blocks
    }

    pub fn block(&self, k: usize) -> &CMatrix {
        &self.blocks[k]
    }

    pub(crate) fn map_blocks(&self, f: impl Fn(&CMatrix) -> CMatrix) -> Self {
        Self { signature: self.signature.clone(), blocks: self.blocks.iter().map(f).collect() }
    }

    fn zip_blocks(&self, other: &Self, f: impl Fn(&CMatrix, &CMatrix) -> CMatrix) -> Self {
        assert_eq!(self.signature, other.signature, "algebra signature mismatch");
        let blocks = self.blocks.iter().zip(&other.blocks).map(|(a, b)| f(a, b)).collect();
        Self { signature: self.signature.clone(), blocks }
    }

    /// Blockwise conjugate transpose.
    pub fn star(&self) -> Self {
        self.map_blocks(|b| b.adjoint())
    }

    pub fn checked_mul(&self, other: &Self) -> Result<Self> {
        self.signature.check_same(&other.signature)?;
        Ok(self * other)
    }

    pub fn checked_add(&self, other: &Self) -> Result<Self> {
        self.signature.check_same(&other.signature)?;
        Ok(self + other)
    }

    pub fn checked_sub(&self, other: &Self) -> Result<Self> {
        self.signature.check_same(&other.signature)?;
        Ok(self - other)
    }

    pub fn scale(&self, c: C64) -> Self {
        self.map_blocks(|b| b * c)
    }

    pub fn scale_real(&self, c: f64) -> Self {
        self.map_blocks(|b| b.scale(c))
    }

    /// C*-norm: the largest singular value over all blocks.
    pub fn norm(&self) -> f64 {
        self.blocks.iter().map(linalg::spectral_norm).fold(0.0, f64::max)
    }

    /// Largest entry modulus over all blocks.
    pub fn max_entry(&self) -> f64 {
        self.blocks.iter().map(linalg::max_abs).fold(0.0, f64::max)
    }

    /// Largest entry modulus of `a - a*`.
    pub fn hermitian_defect(&self) -> f64 {
        self.blocks.iter().map(linalg::hermitian_defect).fold(0.0, f64::max)
    }

    /// Smallest eigenvalue of the Hermitian part, over all blocks.
    pub fn min_eigenvalue(&self) -> f64 {
        self.blocks.iter().map(linalg::min_eigenvalue).fold(f64::INFINITY, f64::min)
    }

    /// Index and value of the smallest Hermitian-part eigenvalue.
    fn min_eigenvalue_block(&self) -> (usize, f64) {
        self.blocks.iter().map(linalg::min_eigenvalue).enumerate().fold((0, f64::INFINITY), |acc, (k, v)| {
            if v < acc.1 {
                (k, v)
            } else {
                acc
            }
        })
    }

    /// Membership in A⁺: Hermitian within `tol·(1+‖a‖)` entrywise and every
    /// block eigenvalue at least `-tol·(1+‖a‖)`.
    pub fn is_positive(&self, tol: f64) -> bool {
        let floor = tol * (1.0 + self.norm());
        self.hermitian_defect() <= floor && self.min_eigenvalue() >= -floor
    }

    /// `self ≤ other` in the Loewner order.
    pub fn loewner_leq(&self, other: &Self, tol: f64) -> Result<bool> {
        Ok(other.checked_sub(self)?.is_positive(tol))
    }

    /// Principal square root of a positive element; eigenvalues within the
    /// tolerance floor are clamped to zero.
    pub fn sqrt_psd(&self, tol: f64) -> Result<Self> {
        if !self.is_positive(tol) {
            let (block, min_eigenvalue) = self.min_eigenvalue_block();
            return Err(Error::NotPositive { block, min_eigenvalue });
        }
        Ok(self.map_blocks(linalg::psd_sqrt))
    }

    /// `|a| = (a* a)^{1/2}`.
    pub fn abs_element(&self) -> Self {
        self.map_blocks(|b| linalg::psd_sqrt(&(b.adjoint() * b)))
    }

    /// The Hermitian part `(a + a*)/2`.
    pub fn hermitian_part(&self) -> Self {
        self.map_blocks(linalg::hermitian_part)
    }
}

impl<'a> Mul<&'a AlgebraElement> for &'a AlgebraElement {
    type Output = AlgebraElement;
    fn mul(self, rhs: &'a AlgebraElement) -> AlgebraElement {
        self.zip_blocks(rhs, |a, b| a * b)
    }
}

impl<'a> Add<&'a AlgebraElement> for &'a AlgebraElement {
    type Output = AlgebraElement;
    fn add(self, rhs: &'a AlgebraElement) -> AlgebraElement {
        self.zip_blocks(rhs, |a, b| a + b)
    }
}

impl<'a> Sub<&'a AlgebraElement> for &'a AlgebraElement {
    type Output = AlgebraElement;
    fn sub(self, rhs: &'a AlgebraElement) -> AlgebraElement {
        self.zip_blocks(rhs, |a, b| a - b)
    }
}

impl Neg for &AlgebraElement {
    type Output = AlgebraElement;
    fn neg(self) -> AlgebraElement {
        self.map_blocks(|b| -b)
    }
}

// ---- JSON: {"signature":[n1,…], "blocks":[[[ [re,im], … ]]]} ----

pub(crate) type BlocksRepr = Vec<Vec<Vec<[f64; 2]>>>;

pub(crate) fn blocks_to_repr(blocks: &[CMatrix]) -> BlocksRepr {
    blocks
        .iter()
        .map(|b| (0..b.nrows()).map(|i| (0..b.ncols()).map(|j| [b[(i, j)].re, b[(i, j)].im]).collect()).collect())
        .collect()
}

pub(crate) fn blocks_from_repr(signature: &AlgebraSignature, repr: BlocksRepr) -> Result<Vec<CMatrix>> {
    if repr.len() != signature.num_blocks() {
        return Err(Error::ShapeMismatch(format!("expected {} blocks, got {}", signature.num_blocks(), repr.len())));
    }
    repr.into_iter()
        .zip(signature.block_dims())
        .enumerate()
        .map(|(k, (rows, &n))| {
            if rows.len() != n || rows.iter().any(|r| r.len() != n) {
                return Err(Error::ShapeMismatch(format!("block {k} must be {n}x{n}")));
            }
            Ok(CMatrix::from_fn(n, n, |i, j| C64::new(rows[i][j][0], rows[i][j][1])))
        })
        .collect()
}

#[derive(Serialize, Deserialize)]
struct ElementRepr {
    signature: AlgebraSignature,
    blocks: BlocksRepr,
}

impl Serialize for AlgebraElement {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        ElementRepr { signature: self.signature.clone(), blocks: blocks_to_repr(&self.blocks) }.serialize(s)
    }
}

impl<'de> Deserialize<'de> for AlgebraElement {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let repr = ElementRepr::deserialize(d)?;
        let blocks = blocks_from_repr(&repr.signature, repr.blocks).map_err(serde::de::Error::custom)?;
        Ok(AlgebraElement { signature: repr.signature, blocks })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sample;
    use cframe_oracle as oracle;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn c(re: f64) -> C64 {
        C64::new(re, 0.0)
    }

    fn diag(values: &[f64]) -> AlgebraElement {
        let sig = AlgebraSignature::new(vec![values.len()]).unwrap();
        let m = CMatrix::from_diagonal(&nalgebra::DVector::from_iterator(values.len(), values.iter().map(|&v| c(v))));
        AlgebraElement::from_blocks(sig, vec![m]).unwrap()
    }

    #[test]
    fn signature_rejects_empty_and_zero_blocks() {
        assert!(AlgebraSignature::new(vec![]).is_err());
        assert!(AlgebraSignature::new(vec![2, 0]).is_err());
        assert!(AlgebraSignature::commutative(3).unwrap().is_commutative());
    }

    #[test]
    fn from_blocks_rejects_wrong_shapes() {
        let sig = AlgebraSignature::new(vec![2, 1]).unwrap();
        let err = AlgebraElement::from_blocks(sig, vec![CMatrix::zeros(2, 2), CMatrix::zeros(2, 2)]);
        assert!(matches!(err, Err(Error::ShapeMismatch(_))));
    }

    #[test]
    fn star_of_imaginary_scalar() {
        let sig = AlgebraSignature::scalar();
        let a = AlgebraElement::scalar(&sig, C64::new(0.0, 1.0));
        assert_eq!(a.star(), AlgebraElement::scalar(&sig, C64::new(0.0, -1.0)));
        let one = AlgebraElement::unit(&sig);
        assert_eq!(one.star(), one);
    }

    #[test]
    fn star_reverses_products() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let sig = AlgebraSignature::new(vec![2, 3]).unwrap();
        for _ in 0..20 {
            let a = sample::element(&sig, &mut rng);
            let b = sample::element(&sig, &mut rng);
            let lhs = (&a * &b).star();
            let rhs = &b.star() * &a.star();
            assert!((&lhs - &rhs).max_entry() <= 1e-12 * (1.0 + lhs.norm()));
            assert_eq!(a.star().star(), a);
        }
    }

    #[test]
    fn positivity_examples() {
        assert!(diag(&[1.0, 2.0]).is_positive(DEFAULT_PSD_TOL));
        let sig = AlgebraSignature::new(vec![2]).unwrap();
        let flip =
            AlgebraElement::from_blocks(sig, vec![CMatrix::from_row_slice(2, 2, &[c(0.0), c(1.0), c(1.0), c(0.0)])])
                .unwrap();
        assert!(!flip.is_positive(DEFAULT_PSD_TOL));

        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let sig = AlgebraSignature::new(vec![3, 1]).unwrap();
        for _ in 0..20 {
            let b = sample::element(&sig, &mut rng);
            let p = &b.star() * &b;
            let oracle_min = p.blocks().iter().map(oracle::min_eigenvalue).fold(f64::INFINITY, f64::min);
            assert!(oracle_min >= -1e-12);
            assert!(p.is_positive(DEFAULT_PSD_TOL));
        }
    }

    #[test]
    fn loewner_examples() {
        let sig = AlgebraSignature::new(vec![2]).unwrap();
        assert!(AlgebraElement::zero(&sig).loewner_leq(&AlgebraElement::unit(&sig), 1e-9).unwrap());
        // the harmonic-ramp upper-bound comparison: 1/3 ≤ π²/18
        let a = diag(&[1.0 / 3.0, 1.0 / 12.0]);
        let b = diag(&[1.0, 1.0]).scale_real(std::f64::consts::PI.powi(2) / 18.0);
        assert!(a.loewner_leq(&b, 1e-9).unwrap());
        assert!(!b.loewner_leq(&a, 1e-9).unwrap());
        let other = AlgebraElement::unit(&AlgebraSignature::scalar());
        assert!(matches!(a.loewner_leq(&other, 1e-9), Err(Error::SignatureMismatch { .. })));
    }

    #[test]
    fn sqrt_examples() {
        let r = diag(&[4.0, 9.0]).sqrt_psd(1e-9).unwrap();
        assert!((&r - &diag(&[2.0, 3.0])).max_entry() < 1e-14);

        let sig = AlgebraSignature::new(vec![2, 3]).unwrap();
        let alpha = 2.5;
        let r = AlgebraElement::scalar(&sig, c(alpha)).sqrt_psd(1e-9).unwrap();
        assert!((&r - &AlgebraElement::scalar(&sig, c(alpha.sqrt()))).max_entry() < 1e-14);

        let err = diag(&[1.0, -2.0]).sqrt_psd(1e-9).unwrap_err();
        assert_eq!(err, Error::NotPositive { block: 0, min_eigenvalue: -2.0 });
    }

    #[test]
    fn sqrt_reconstructs_and_commutes() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let sig = AlgebraSignature::new(vec![2, 3, 1]).unwrap();
        for _ in 0..30 {
            let b = sample::element(&sig, &mut rng);
            let a = &b.star() * &b;
            let r = a.sqrt_psd(1e-9).unwrap();
            assert!((&(&r * &r) - &a).norm() <= 1e-10 * a.norm());
            assert!((&(&r * &a) - &(&a * &r)).norm() <= 1e-10 * a.norm());
            assert!(r.is_positive(1e-9));
        }
    }

    #[test]
    fn norm_examples() {
        let sig = AlgebraSignature::new(vec![3, 2]).unwrap();
        assert!((AlgebraElement::unit(&sig).norm() - 1.0).abs() < 1e-15);
        let d = AlgebraElement::from_diagonal(&[c(3.0), c(-5.0)]).unwrap();
        assert!((d.norm() - 5.0).abs() < 1e-15);
    }

    #[test]
    fn abs_and_unit_and_submultiplicativity() {
        let a = AlgebraElement::from_diagonal(&[c(-2.0), c(3.0)]).unwrap();
        let abs = a.abs_element();
        assert!((&abs - &AlgebraElement::from_diagonal(&[c(2.0), c(3.0)]).unwrap()).max_entry() < 1e-15);

        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let sig = AlgebraSignature::new(vec![2, 2]).unwrap();
        for _ in 0..30 {
            let a = sample::element(&sig, &mut rng);
            let b = sample::element(&sig, &mut rng);
            assert_eq!(&AlgebraElement::unit(&sig) * &a, a);
            assert!((&a * &b).norm() <= a.norm() * b.norm() * (1.0 + 1e-12));
        }
    }

    #[test]
    fn json_round_trip_is_exact() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let sig = AlgebraSignature::new(vec![2, 1]).unwrap();
        let a = sample::element(&sig, &mut rng).scale_real(1.0 / 3.0);
        let text = serde_json::to_string(&a).unwrap();
        let back: AlgebraElement = serde_json::from_str(&text).unwrap();
        assert_eq!(back, a);
        assert!(text.starts_with("{\"signature\":[2,1],\"blocks\":[[[["));
        let bad = r#"{"signature":[2],"blocks":[[[[1,0]]]]}"#;
        assert!(serde_json::from_str::<AlgebraElement>(bad).is_err());
    }

    fn arb_hermitian_pair() -> impl Strategy<Value = (u64, usize)> {
        (any::<u64>(), 0usize..4)
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn c_star_identity(seed in any::<u64>()) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let sig = AlgebraSignature::new(vec![2, 3]).unwrap();
            let a = sample::element(&sig, &mut rng);
            let lhs = (&a.star() * &a).norm();
            let rhs = a.norm().powi(2);
            prop_assert!((lhs - rhs).abs() <= 1e-10 * rhs);
        }

        #[test]
        fn loewner_reflexive_transitive_antisymmetric((seed, which) in arb_hermitian_pair()) {
            let sigs = [vec![1], vec![2], vec![1, 1, 1], vec![2, 3]];
            let sig = AlgebraSignature::new(sigs[which].clone()).unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let tol = 1e-9;
            let a = sample::hermitian(&sig, &mut rng);
            prop_assert!(a.loewner_leq(&a, tol).unwrap());
            // b = a + p, c = b + q with p, q ≥ 0
            let p = sample::positive(&sig, &mut rng);
            let q = sample::positive(&sig, &mut rng);
            let b = &a + &p;
            let c = &b + &q;
            prop_assert!(a.loewner_leq(&b, tol).unwrap());
            prop_assert!(b.loewner_leq(&c, tol).unwrap());
            prop_assert!(a.loewner_leq(&c, 2.0 * tol).unwrap());
            if a.loewner_leq(&b, tol).unwrap() && b.loewner_leq(&a, tol).unwrap() {
                prop_assert!((&a - &b).norm() <= 2.0 * tol * (1.0 + a.norm()));
            }
        }

        #[test]
        fn norm_monotone_on_positives(seed in any::<u64>()) {
            let sig = AlgebraSignature::new(vec![2, 1]).unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let a = sample::positive(&sig, &mut rng);
            let b = &a + &sample::positive(&sig, &mut rng);
            prop_assert!(a.norm() <= b.norm() + 1e-10);
        }
    }
}
