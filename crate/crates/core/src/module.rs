//! Free Hilbert A-modules `A^d` and their adjointable operators.
//!
//! A vector is a row of `d` algebra elements with inner product
//! `⟨x, y⟩ = Σ_i x_i · y_i*`. An operator is a `d × d` grid of algebra
//! elements acting on the right, `(Tx)_j = Σ_i x_i · t_ij`, which makes left
//! A-linearity structural. Flattening identifies `End*_A(A^d)` with the
//! block-diagonal algebra `⊕_k M_{d·n_k}(ℂ)`; every spectral question about an
//! operator is answered on its flattening.

use std::fmt;

use nalgebra::DVector;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::algebra::{blocks_from_repr, blocks_to_repr, AlgebraElement, AlgebraSignature, BlocksRepr};
use crate::error::{Error, Result};
use crate::linalg::{self, CMatrix, C64};

/// Default relative singular-value threshold for rank decisions.
pub const DEFAULT_RANK_TOL: f64 = 1e-8;

/// A block-diagonal complex matrix stored block by block.
#[derive(Clone, Debug, PartialEq)]
pub struct BlockDiagonal {
    blocks: Vec<CMatrix>,
}

impl BlockDiagonal {
    pub fn new(blocks: Vec<CMatrix>) -> Self {
        Self { blocks }
    }

    pub fn blocks(&self) -> &[CMatrix] {
        &self.blocks
    }

    pub fn map(&self, f: impl Fn(&CMatrix) -> CMatrix) -> Self {
        Self { blocks: self.blocks.iter().map(f).collect() }
    }

    pub fn zip(&self, other: &Self, f: impl Fn(&CMatrix, &CMatrix) -> CMatrix) -> Self {
        Self { blocks: self.blocks.iter().zip(&other.blocks).map(|(a, b)| f(a, b)).collect() }
    }

    pub fn dimension(&self) -> usize {
        self.blocks.iter().map(|b| b.nrows()).sum()
    }

    pub fn to_dense(&self) -> CMatrix {
        let n = self.dimension();
        let mut out = CMatrix::zeros(n, n);
        let mut off = 0;
        for b in &self.blocks {
            out.view_mut((off, off), (b.nrows(), b.ncols())).copy_from(b);
            off += b.nrows();
        }
        out
    }

    pub fn spectral_norm(&self) -> f64 {
        self.blocks.iter().map(linalg::spectral_norm).fold(0.0, f64::max)
    }

    pub fn max_abs(&self) -> f64 {
        self.blocks.iter().map(linalg::max_abs).fold(0.0, f64::max)
    }

    /// Smallest Hermitian-part eigenvalue over all blocks, with the block
    /// index and eigenvector attaining it.
    pub fn min_eigenpair(&self) -> (f64, usize, DVector<C64>) {
        self.extreme_eigenpair(true)
    }

    pub fn max_eigenpair(&self) -> (f64, usize, DVector<C64>) {
        self.extreme_eigenpair(false)
    }

    fn extreme_eigenpair(&self, smallest: bool) -> (f64, usize, DVector<C64>) {
        let mut best: Option<(f64, usize, DVector<C64>)> = None;
        for (k, b) in self.blocks.iter().enumerate() {
            let (vals, vecs) = linalg::hermitian_eigen(b);
            let idx = if smallest { 0 } else { vals.len() - 1 };
            let v = vals[idx];
            let better = match &best {
                None => true,
                Some((bv, _, _)) => (smallest && v < *bv) || (!smallest && v > *bv),
            };
            if better {
                best = Some((v, k, vecs.column(idx).into_owned()));
            }
        }
        best.expect("at least one block")
    }
}

/// An element of the free module `A^d`.
#[derive(Clone, PartialEq)]
pub struct ModuleVector {
    signature: AlgebraSignature,
    entries: Vec<AlgebraElement>,
}

impl fmt::Debug for ModuleVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ModuleVector").field("signature", &self.signature).field("entries", &self.entries).finish()
    }
}

impl ModuleVector {
    pub fn new(signature: AlgebraSignature, entries: Vec<AlgebraElement>) -> Result<Self> {
        if entries.is_empty() {
            return Err(Error::ShapeMismatch("module rank must be at least 1".into()));
        }
        for e in &entries {
            signature.check_same(e.signature())?;
        }
        Ok(Self { signature, entries })
    }

    pub fn zero(signature: &AlgebraSignature, rank: usize) -> Self {
        Self { signature: signature.clone(), entries: vec![AlgebraElement::zero(signature); rank] }
    }

    /// The module basis vector with the unit in slot `i`.
    pub fn basis(signature: &AlgebraSignature, rank: usize, i: usize) -> Self {
        let mut v = Self::zero(signature, rank);
        v.entries[i] = AlgebraElement::unit(signature);
        v
    }

    pub fn signature(&self) -> &AlgebraSignature {
        &self.signature
    }

    pub fn rank(&self) -> usize {
        self.entries.len()
    }

    pub fn entries(&self) -> &[AlgebraElement] {
        &self.entries
    }

    pub fn entry(&self, i: usize) -> &AlgebraElement {
        &self.entries[i]
    }

    pub(crate) fn check_shape(&self, other: &Self) -> Result<()> {
        self.signature.check_same(&other.signature)?;
        if self.rank() != other.rank() {
            return Err(Error::ShapeMismatch(format!("rank {} vs {}", self.rank(), other.rank())));
        }
        Ok(())
    }

    /// Left module action `a · x`.
    pub fn left_mul(&self, a: &AlgebraElement) -> Self {
        Self { signature: self.signature.clone(), entries: self.entries.iter().map(|x| a * x).collect() }
    }

    pub fn add(&self, other: &Self) -> Self {
        let entries = self.entries.iter().zip(&other.entries).map(|(a, b)| a + b).collect();
        Self { signature: self.signature.clone(), entries }
    }

    pub fn sub(&self, other: &Self) -> Self {
        let entries = self.entries.iter().zip(&other.entries).map(|(a, b)| a - b).collect();
        Self { signature: self.signature.clone(), entries }
    }

    pub fn scale(&self, c: C64) -> Self {
        Self { signature: self.signature.clone(), entries: self.entries.iter().map(|x| x.scale(c)).collect() }
    }

    /// `⟨self, other⟩_A`; panics on shape mismatch (see [`inner_product`]).
    pub fn inner(&self, other: &Self) -> AlgebraElement {
        assert_eq!(self.rank(), other.rank(), "module rank mismatch");
        let mut acc = AlgebraElement::zero(&self.signature);
        for (x, y) in self.entries.iter().zip(&other.entries) {
            acc = &acc + &(x * &y.star());
        }
        acc
    }

    /// `‖x‖ = ‖⟨x, x⟩_A‖^{1/2}`.
    pub fn norm(&self) -> f64 {
        self.inner(self).norm().sqrt()
    }

    /// Column form of block `k`: the `(d·n_k) × n_k` matrix stacking the
    /// transposed entries, on which flattened operators act from the left.
    pub fn flatten_block(&self, k: usize) -> CMatrix {
        let n = self.signature.block_dims()[k];
        let d = self.rank();
        CMatrix::from_fn(d * n, n, |row, col| {
            let (i, p) = (row / n, row % n);
            self.entries[i].block(k)[(col, p)]
        })
    }

    /// The vector whose block `k` row space is spanned by the flattened
    /// column `v` (first row carries `v`, all other rows and blocks vanish).
    /// For a flattened Hermitian `H`, `⟨T f, f⟩_A` is then `v^H H v` in the
    /// top-left entry of block `k`.
    pub fn from_flat_column(signature: &AlgebraSignature, rank: usize, k: usize, v: &DVector<C64>) -> Result<Self> {
        let n =
            *signature.block_dims().get(k).ok_or_else(|| Error::ShapeMismatch(format!("block {k} out of range")))?;
        if v.len() != rank * n {
            return Err(Error::ShapeMismatch(format!("flat column has length {}, expected {}", v.len(), rank * n)));
        }
        let mut out = Self::zero(signature, rank);
        for i in 0..rank {
            let blocks = signature
                .block_dims()
                .iter()
                .enumerate()
                .map(|(kk, &m)| {
                    let mut b = CMatrix::zeros(m, m);
                    if kk == k {
                        for p in 0..n {
                            b[(0, p)] = v[i * n + p];
                        }
                    }
                    b
                })
                .collect();
            out.entries[i] = AlgebraElement::from_blocks(signature.clone(), blocks)?;
        }
        Ok(out)
    }
}

/// `⟨x, y⟩_A = Σ_i x_i · y_i*`.
pub fn inner_product(x: &ModuleVector, y: &ModuleVector) -> Result<AlgebraElement> {
    x.check_shape(y)?;
    Ok(x.inner(y))
}

pub fn vector_norm(x: &ModuleVector) -> f64 {
    x.norm()
}

/// An adjointable A-linear endomorphism of `A^d`.
#[derive(Clone, PartialEq)]
pub struct ModuleOperator {
    signature: AlgebraSignature,
    rank: usize,
    entries: Vec<AlgebraElement>,
}

impl fmt::Debug for ModuleOperator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ModuleOperator")
            .field("signature", &self.signature)
            .field("rank", &self.rank)
            .field("entries", &self.entries)
            .finish()
    }
}

impl ModuleOperator {
    /// `entries` is the row-major `rank × rank` grid `t_ij`.
    pub fn new(signature: AlgebraSignature, rank: usize, entries: Vec<AlgebraElement>) -> Result<Self> {
        if rank == 0 {
            return Err(Error::ShapeMismatch("module rank must be at least 1".into()));
        }
        if entries.len() != rank * rank {
            return Err(Error::ShapeMismatch(format!("expected {} entries, got {}", rank * rank, entries.len())));
        }
        for e in &entries {
            signature.check_same(e.signature())?;
        }
        Ok(Self { signature, rank, entries })
    }

    pub fn zero(signature: &AlgebraSignature, rank: usize) -> Self {
        Self { signature: signature.clone(), rank, entries: vec![AlgebraElement::zero(signature); rank * rank] }
    }

    pub fn identity(signature: &AlgebraSignature, rank: usize) -> Self {
        Self::scalar(signature, rank, C64::new(1.0, 0.0))
    }

    pub fn scalar(signature: &AlgebraSignature, rank: usize, c: C64) -> Self {
        let mut t = Self::zero(signature, rank);
        for i in 0..rank {
            t.entries[i * rank + i] = AlgebraElement::scalar(signature, c);
        }
        t
    }

    /// Right multiplication by `a` on the rank-one module `A`.
    pub fn multiplication(a: &AlgebraElement) -> Self {
        Self { signature: a.signature().clone(), rank: 1, entries: vec![a.clone()] }
    }

    /// Assembles the operator from the images of the module basis; `map` must
    /// be A-linear, then `t_ij = map(e_i)_j`.
    pub fn from_basis_images(
        signature: &AlgebraSignature,
        rank: usize,
        map: impl Fn(&ModuleVector) -> ModuleVector,
    ) -> Self {
        let mut entries = Vec::with_capacity(rank * rank);
        for i in 0..rank {
            let image = map(&ModuleVector::basis(signature, rank, i));
            entries.extend(image.entries);
        }
        Self { signature: signature.clone(), rank, entries }
    }

    pub fn signature(&self) -> &AlgebraSignature {
        &self.signature
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn entry(&self, i: usize, j: usize) -> &AlgebraElement {
        &self.entries[i * self.rank + j]
    }

    pub fn entries(&self) -> &[AlgebraElement] {
        &self.entries
    }

    pub(crate) fn check_shape(&self, other: &Self) -> Result<()> {
        self.signature.check_same(&other.signature)?;
        if self.rank != other.rank {
            return Err(Error::ShapeMismatch(format!("rank {} vs {}", self.rank, other.rank)));
        }
        Ok(())
    }

    pub(crate) fn check_vector(&self, x: &ModuleVector) -> Result<()> {
        self.signature.check_same(x.signature())?;
        if self.rank != x.rank() {
            return Err(Error::ShapeMismatch(format!("operator rank {} vs vector rank {}", self.rank, x.rank())));
        }
        Ok(())
    }

    pub fn apply(&self, x: &ModuleVector) -> Result<ModuleVector> {
        self.check_vector(x)?;
        Ok(self.act(x))
    }

    /// Unchecked action `(Tx)_j = Σ_i x_i · t_ij`.
    pub(crate) fn act(&self, x: &ModuleVector) -> ModuleVector {
        let d = self.rank;
        let entries = (0..d)
            .map(|j| {
                let mut acc = AlgebraElement::zero(&self.signature);
                for i in 0..d {
                    acc = &acc + &(x.entry(i) * self.entry(i, j));
                }
                acc
            })
            .collect();
        ModuleVector { signature: self.signature.clone(), entries }
    }

    /// `(T*)_ji = t_ij*`.
    pub fn adjoint(&self) -> Self {
        let d = self.rank;
        let entries = (0..d * d)
            .map(|idx| {
                let (j, i) = (idx / d, idx % d);
                self.entry(i, j).star()
            })
            .collect();
        Self { signature: self.signature.clone(), rank: d, entries }
    }

    /// `self ∘ other` (apply `other` first).
    pub fn compose(&self, other: &Self) -> Result<Self> {
        self.check_shape(other)?;
        Ok(self.then_after(other))
    }

    fn then_after(&self, other: &Self) -> Self {
        let d = self.rank;
        let entries = (0..d * d)
            .map(|idx| {
                let (i, k) = (idx / d, idx % d);
                let mut acc = AlgebraElement::zero(&self.signature);
                for j in 0..d {
                    acc = &acc + &(other.entry(i, j) * self.entry(j, k));
                }
                acc
            })
            .collect();
        Self { signature: self.signature.clone(), rank: d, entries }
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.check_shape(other)?;
        let entries = self.entries.iter().zip(&other.entries).map(|(a, b)| a + b).collect();
        Ok(Self { signature: self.signature.clone(), rank: self.rank, entries })
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.check_shape(other)?;
        let entries = self.entries.iter().zip(&other.entries).map(|(a, b)| a - b).collect();
        Ok(Self { signature: self.signature.clone(), rank: self.rank, entries })
    }

    pub fn scale(&self, c: f64) -> Self {
        Self {
            signature: self.signature.clone(),
            rank: self.rank,
            entries: self.entries.iter().map(|a| a.scale_real(c)).collect(),
        }
    }

    pub fn scale_complex(&self, c: C64) -> Self {
        Self {
            signature: self.signature.clone(),
            rank: self.rank,
            entries: self.entries.iter().map(|a| a.scale(c)).collect(),
        }
    }

    /// Block-diagonal matrix representation; block `k` has size `d·n_k` and
    /// its `(j, i)` sub-block is `t_ij^T` restricted to algebra block `k`.
    pub fn flatten(&self) -> BlockDiagonal {
        let d = self.rank;
        let blocks = self
            .signature
            .block_dims()
            .iter()
            .enumerate()
            .map(|(k, &n)| {
                CMatrix::from_fn(d * n, d * n, |row, col| {
                    let (j, p) = (row / n, row % n);
                    let (i, q) = (col / n, col % n);
                    self.entry(i, j).block(k)[(q, p)]
                })
            })
            .collect();
        BlockDiagonal::new(blocks)
    }

    pub fn unflatten(signature: &AlgebraSignature, rank: usize, flat: &BlockDiagonal) -> Result<Self> {
        if rank == 0 {
            return Err(Error::ShapeMismatch("module rank must be at least 1".into()));
        }
        let dims = signature.block_dims();
        if flat.blocks().len() != dims.len() {
            return Err(Error::ShapeMismatch(format!(
                "expected {} flattened blocks, got {}",
                dims.len(),
                flat.blocks().len()
            )));
        }
        for (k, (b, &n)) in flat.blocks().iter().zip(dims).enumerate() {
            if b.nrows() != rank * n || b.ncols() != rank * n {
                return Err(Error::ShapeMismatch(format!(
                    "flattened block {k} is {}x{}, expected {m}x{m}",
                    b.nrows(),
                    b.ncols(),
                    m = rank * n
                )));
            }
        }
        let entries = (0..rank * rank)
            .map(|idx| {
                let (i, j) = (idx / rank, idx % rank);
                let blocks = dims
                    .iter()
                    .enumerate()
                    .map(|(k, &n)| CMatrix::from_fn(n, n, |q, p| flat.blocks()[k][(j * n + p, i * n + q)]))
                    .collect();
                AlgebraElement::from_blocks(signature.clone(), blocks)
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { signature: signature.clone(), rank, entries })
    }

    fn map_flat(&self, f: impl Fn(&CMatrix) -> CMatrix) -> Self {
        Self::unflatten(&self.signature, self.rank, &self.flatten().map(f)).expect("shape preserved")
    }

    /// Largest singular value of the flattening.
    pub fn norm(&self) -> f64 {
        self.flatten().spectral_norm()
    }

    /// Largest entry modulus of `T - T*` on the flattening.
    pub fn selfadjoint_defect(&self) -> f64 {
        self.flatten().blocks().iter().map(linalg::hermitian_defect).fold(0.0, f64::max)
    }

    /// `⟨Tf, f⟩_A ≥ 0` for all `f`, decided as PSD of the flattening with the
    /// relative floor `tol·(1 + ‖T‖)`.
    pub fn is_positive(&self, tol: f64) -> bool {
        let flat = self.flatten();
        let floor = tol * (1.0 + flat.spectral_norm());
        flat.blocks().iter().all(|b| linalg::hermitian_defect(b) <= floor && linalg::min_eigenvalue(b) >= -floor)
    }

    pub fn sqrt(&self, tol: f64) -> Result<Self> {
        if !self.is_positive(tol) {
            let (min_eigenvalue, block, _) = self.flatten().min_eigenpair();
            return Err(Error::NotPositive { block, min_eigenvalue });
        }
        Ok(self.map_flat(linalg::psd_sqrt))
    }

    /// Inverse square root of a positive invertible operator.
    pub fn inverse_sqrt(&self, tol: f64) -> Result<Self> {
        if !self.is_positive(tol) || self.bounded_below_constant() <= tol * self.norm() {
            return Err(Error::NotInGlPlus);
        }
        Ok(self.map_flat(|b| linalg::hermitian_function(b, |x| 1.0 / x.sqrt())))
    }

    /// Moore–Penrose inverse with singular values `<= cutoff · σ_max` dropped.
    pub fn pseudo_inverse(&self, cutoff: f64) -> Self {
        let threshold = cutoff * self.norm();
        self.map_flat(|b| linalg::pinv(b, threshold))
    }

    /// Smallest singular value of the flattening (the bounded-below constant).
    pub fn bounded_below_constant(&self) -> f64 {
        self.flatten()
            .blocks()
            .iter()
            .map(|b| linalg::singular_values(b).last().copied().unwrap_or(0.0))
            .fold(f64::INFINITY, f64::min)
    }

    /// Minimal `k` with `⟨Tx, Tx⟩ ≤ k ⟨x, x⟩` for all `x`: `‖T‖²`.
    pub fn min_k_bound(&self) -> f64 {
        self.norm().powi(2)
    }
}

/// `‖ab - ba‖`.
pub fn commutator_norm(a: &ModuleOperator, b: &ModuleOperator) -> Result<f64> {
    Ok(a.compose(b)?.sub(&b.compose(a)?)?.norm())
}

pub fn operator_is_positive(t: &ModuleOperator, tol: f64) -> bool {
    t.is_positive(tol)
}

pub fn operator_sqrt(t: &ModuleOperator, tol: f64) -> Result<ModuleOperator> {
    t.sqrt(tol)
}

pub fn operator_norm(t: &ModuleOperator) -> f64 {
    t.norm()
}

pub fn pseudo_inverse(t: &ModuleOperator, cutoff: f64) -> ModuleOperator {
    t.pseudo_inverse(cutoff)
}

/// Outcome of the range-inclusion / majorization / factorization analysis
/// for a pair `(T, S)`.
#[derive(Clone, Debug)]
pub struct DouglasReport {
    pub range_included: bool,
    /// Smallest `λ ≥ 0` with `TT* ≤ λ² SS*`.
    pub lambda_min: Option<f64>,
    /// Minimal-norm `Q` with `T = SQ`.
    pub factor_q: Option<ModuleOperator>,
    pub residuals: DouglasResiduals,
}

#[derive(Clone, Debug, Serialize)]
pub struct DouglasResiduals {
    /// `‖T − S·Q_ls‖ / (1 + ‖T‖)` for the least-squares factor.
    pub factor: f64,
    /// Negative part of `λ² SS* − TT*` at the pencil candidate, relative to `1 + ‖T‖²`.
    pub pencil: f64,
    /// Whether the least-squares factor reproduces `T` within tolerance.
    pub factor_solvable: bool,
    /// Whether the pencil candidate satisfies `TT* ≤ λ² SS*` within tolerance.
    pub pencil_feasible: bool,
}

/// Decides `R(T) ⊂ R(S)`, computes the minimal majorization constant and the
/// minimal-norm factor. Ranges are compared by singular-value rank with the
/// threshold `tol · max(‖S‖, ‖T‖)`.
pub fn douglas_analysis(t: &ModuleOperator, s: &ModuleOperator, tol: f64) -> Result<DouglasReport> {
    t.check_shape(s)?;
    let ft = t.flatten();
    let fs = s.flatten();
    let t_norm = ft.spectral_norm();
    let scale = fs.spectral_norm().max(t_norm);
    let threshold = tol * scale;

    let mut range_included = true;
    let mut lambda_sq = 0.0_f64;
    let mut pencil_violation = 0.0_f64;
    let mut factor_blocks = Vec::with_capacity(fs.blocks().len());
    let mut factor_residual = 0.0_f64;

    for (bt, bs) in ft.blocks().iter().zip(fs.blocks()) {
        let n = bs.nrows();
        let mut joined = CMatrix::zeros(n, 2 * n);
        joined.view_mut((0, 0), (n, n)).copy_from(bs);
        joined.view_mut((0, n), (n, n)).copy_from(bt);
        if linalg::rank(&joined, threshold) != linalg::rank(bs, threshold) {
            range_included = false;
        }

        let p = bs * bs.adjoint();
        let ttstar = bt * bt.adjoint();
        let p_inv_half = linalg::psd_pinv_power(&p, threshold * threshold, 0.5);
        let reduced = &p_inv_half * &ttstar * &p_inv_half;
        lambda_sq = lambda_sq.max(linalg::max_eigenvalue(&reduced).max(0.0));

        let q = linalg::pinv(bs, threshold) * bt;
        factor_residual = factor_residual.max(linalg::spectral_norm(&(bs * &q - bt)));
        factor_blocks.push(q);
    }

    for (bt, bs) in ft.blocks().iter().zip(fs.blocks()) {
        let gap = (bs * bs.adjoint()).scale(lambda_sq) - bt * bt.adjoint();
        pencil_violation = pencil_violation.max((-linalg::min_eigenvalue(&gap)).max(0.0));
    }

    let factor = factor_residual / (1.0 + t_norm);
    let pencil = pencil_violation / (1.0 + t_norm * t_norm);
    let residuals = DouglasResiduals { factor, pencil, factor_solvable: factor <= tol, pencil_feasible: pencil <= tol };
    let (lambda_min, factor_q) = if range_included {
        let q = ModuleOperator::unflatten(s.signature(), s.rank(), &BlockDiagonal::new(factor_blocks))?;
        (Some(lambda_sq.sqrt()), Some(q))
    } else {
        (None, None)
    };
    Ok(DouglasReport { range_included, lambda_min, factor_q, residuals })
}

pub fn bounded_below_constant(t: &ModuleOperator) -> f64 {
    t.bounded_below_constant()
}

pub fn min_k_bound(t: &ModuleOperator) -> f64 {
    t.min_k_bound()
}

// ---- JSON ----

#[derive(Serialize, Deserialize)]
struct VectorRepr {
    signature: AlgebraSignature,
    rank: usize,
    entries: Vec<BlocksRepr>,
}

impl Serialize for ModuleVector {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        VectorRepr {
            signature: self.signature.clone(),
            rank: self.rank(),
            entries: self.entries.iter().map(|e| blocks_to_repr(e.blocks())).collect(),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for ModuleVector {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        use serde::de::Error as _;
        let repr = VectorRepr::deserialize(d)?;
        if repr.entries.len() != repr.rank {
            return Err(D::Error::custom(format!("rank {} but {} entries", repr.rank, repr.entries.len())));
        }
        let entries = repr
            .entries
            .into_iter()
            .map(|b| {
                let blocks = blocks_from_repr(&repr.signature, b)?;
                AlgebraElement::from_blocks(repr.signature.clone(), blocks)
            })
            .collect::<Result<Vec<_>>>()
            .map_err(D::Error::custom)?;
        ModuleVector::new(repr.signature, entries).map_err(D::Error::custom)
    }
}

#[derive(Serialize, Deserialize)]
struct OperatorRepr {
    signature: AlgebraSignature,
    rank: usize,
    entries: Vec<Vec<BlocksRepr>>,
}

impl Serialize for ModuleOperator {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let d = self.rank;
        OperatorRepr {
            signature: self.signature.clone(),
            rank: d,
            entries: (0..d).map(|i| (0..d).map(|j| blocks_to_repr(self.entry(i, j).blocks())).collect()).collect(),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for ModuleOperator {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        use serde::de::Error as _;
        let repr = OperatorRepr::deserialize(d)?;
        if repr.entries.len() != repr.rank || repr.entries.iter().any(|row| row.len() != repr.rank) {
            return Err(D::Error::custom(format!("entries must form a {0}x{0} grid", repr.rank)));
        }
        let entries = repr
            .entries
            .into_iter()
            .flatten()
            .map(|b| {
                let blocks = blocks_from_repr(&repr.signature, b)?;
                AlgebraElement::from_blocks(repr.signature.clone(), blocks)
            })
            .collect::<Result<Vec<_>>>()
            .map_err(D::Error::custom)?;
        ModuleOperator::new(repr.signature, repr.rank, entries).map_err(D::Error::custom)
    }
}
