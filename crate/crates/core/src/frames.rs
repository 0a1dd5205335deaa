//! Sampled continuous frame families, the coefficient space `l²(A)` over the
//! quadrature nodes, and the analysis, synthesis and frame operators.
//!
//! Coefficient families store raw samples `a(w_j)`; the measure enters only
//! through inner products and synthesis sums.

use nalgebra::Complex;
use serde::{Deserialize, Serialize};

use crate::algebra::{AlgebraElement, AlgebraSignature};
use crate::error::{Error, Result};
use crate::linalg::{self, CMatrix, C64};
use crate::module::{ModuleOperator, ModuleVector};
use crate::quadrature::{pairwise_reduce, QuadratureRule};

/// A map `F: Ω → A^d` sampled at the nodes of a quadrature rule.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "FamilyRepr")]
pub struct SampledFrameFamily {
    rule: QuadratureRule,
    vectors: Vec<ModuleVector>,
}

#[derive(Deserialize)]
struct FamilyRepr {
    rule: QuadratureRule,
    vectors: Vec<ModuleVector>,
}

impl TryFrom<FamilyRepr> for SampledFrameFamily {
    type Error = Error;
    fn try_from(r: FamilyRepr) -> Result<Self> {
        Self::new(r.rule, r.vectors)
    }
}

impl SampledFrameFamily {
    pub fn new(rule: QuadratureRule, vectors: Vec<ModuleVector>) -> Result<Self> {
        if vectors.len() != rule.len() {
            return Err(Error::ShapeMismatch(format!("{} vectors for {} nodes", vectors.len(), rule.len())));
        }
        let first = vectors.first().ok_or_else(|| Error::Degenerate("empty frame family".into()))?;
        for v in &vectors[1..] {
            first.check_shape(v)?;
        }
        Ok(Self { rule, vectors })
    }

    /// Samples `f(w_j)` at every node.
    pub fn from_fn(rule: QuadratureRule, f: impl Fn(f64) -> ModuleVector) -> Result<Self> {
        let vectors = rule.nodes().iter().map(|&w| f(w)).collect();
        Self::new(rule, vectors)
    }

    pub fn rule(&self) -> &QuadratureRule {
        &self.rule
    }

    pub fn vectors(&self) -> &[ModuleVector] {
        &self.vectors
    }

    pub fn signature(&self) -> &AlgebraSignature {
        self.vectors[0].signature()
    }

    pub fn rank(&self) -> usize {
        self.vectors[0].rank()
    }

    /// The family `{T F(w_j)}`.
    pub fn mapped(&self, t: &ModuleOperator) -> Result<Self> {
        let vectors = self.vectors.iter().map(|v| t.apply(v)).collect::<Result<Vec<_>>>()?;
        Ok(Self { rule: self.rule.clone(), vectors })
    }

    /// Whether every sample vanishes.
    pub fn is_zero(&self) -> bool {
        self.vectors.iter().all(|v| v.entries().iter().all(|e| e.max_entry() == 0.0))
    }

    pub(crate) fn check_vector(&self, f: &ModuleVector) -> Result<()> {
        self.vectors[0].check_shape(f)
    }

    pub(crate) fn check_operator(&self, t: &ModuleOperator) -> Result<()> {
        self.signature().check_same(t.signature())?;
        if t.rank() != self.rank() {
            return Err(Error::ShapeMismatch(format!("operator rank {} vs family rank {}", t.rank(), self.rank())));
        }
        Ok(())
    }

    /// `Σ_j μ_j · coeff_j · vector_j` along the fixed pairwise tree.
    fn weighted_sum(&self, terms: impl Iterator<Item = ModuleVector>) -> ModuleVector {
        let weighted: Vec<ModuleVector> =
            terms.zip(self.rule.weights()).map(|(v, &mu)| v.scale(Complex::new(mu, 0.0))).collect();
        pairwise_reduce(&weighted, |a, b| a.add(b)).expect("non-empty family")
    }
}

/// An element of `l²(A)` over the nodes: one algebra element per node.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CoefficientFamily {
    rule: QuadratureRule,
    entries: Vec<AlgebraElement>,
}

impl CoefficientFamily {
    pub fn new(rule: QuadratureRule, entries: Vec<AlgebraElement>) -> Result<Self> {
        if entries.len() != rule.len() {
            return Err(Error::ShapeMismatch(format!("{} entries for {} nodes", entries.len(), rule.len())));
        }
        let sig = entries[0].signature();
        for e in &entries {
            sig.check_same(e.signature())?;
        }
        Ok(Self { rule, entries })
    }

    pub fn zero(rule: &QuadratureRule, signature: &AlgebraSignature) -> Self {
        Self { rule: rule.clone(), entries: vec![AlgebraElement::zero(signature); rule.len()] }
    }

    pub fn rule(&self) -> &QuadratureRule {
        &self.rule
    }

    pub fn entries(&self) -> &[AlgebraElement] {
        &self.entries
    }

    fn check_rule(&self, rule: &QuadratureRule) -> Result<()> {
        if &self.rule != rule {
            return Err(Error::ShapeMismatch("coefficient family lives on a different quadrature rule".into()));
        }
        Ok(())
    }
}

/// `⟨a, b⟩ = Σ_j μ_j a_j b_j*`.
pub fn coefficient_inner_product(a: &CoefficientFamily, b: &CoefficientFamily) -> Result<AlgebraElement> {
    a.check_rule(&b.rule)?;
    a.entries[0].signature().check_same(b.entries[0].signature())?;
    let samples: Vec<AlgebraElement> = a.entries.iter().zip(&b.entries).map(|(x, y)| x * &y.star()).collect();
    crate::quadrature::integrate_algebra(&samples, &a.rule)
}

/// `‖(∫ a a* dμ)^{1/2}‖`.
pub fn coefficient_norm(a: &CoefficientFamily) -> Result<f64> {
    let ip = coefficient_inner_product(a, a)?;
    Ok(ip.hermitian_part().map_blocks(linalg::psd_sqrt).norm())
}

/// `f ↦ {⟨f, F(w_j)⟩}`.
pub fn analysis(family: &SampledFrameFamily, f: &ModuleVector) -> Result<CoefficientFamily> {
    family.check_vector(f)?;
    let entries = family.vectors.iter().map(|v| f.inner(v)).collect();
    Ok(CoefficientFamily { rule: family.rule.clone(), entries })
}

/// `{a_j} ↦ Σ_j μ_j a_j F(w_j)`.
pub fn synthesis(family: &SampledFrameFamily, a: &CoefficientFamily) -> Result<ModuleVector> {
    a.check_rule(&family.rule)?;
    family.signature().check_same(a.entries[0].signature())?;
    Ok(family.weighted_sum(family.vectors.iter().zip(&a.entries).map(|(v, c)| v.left_mul(c))))
}

/// `S f = ∫ ⟨f, F(w)⟩ F(w) dμ(w)`, assembled from the images of the module
/// basis.
pub fn frame_operator(family: &SampledFrameFamily) -> ModuleOperator {
    ModuleOperator::from_basis_images(family.signature(), family.rank(), |e| {
        family.weighted_sum(family.vectors.iter().map(|v| v.left_mul(&e.inner(v))))
    })
}

/// `S_C = C S`. Rejects controllers outside GL⁺.
pub fn controlled_frame_operator(
    family: &SampledFrameFamily,
    controller: &ModuleOperator,
    tol: f64,
) -> Result<ModuleOperator> {
    family.check_operator(controller)?;
    if !crate::bounds::gl_plus_check(controller, tol) {
        return Err(Error::NotInGlPlus);
    }
    controller.compose(&frame_operator(family))
}

/// `S_C f = ∫ ⟨f, F(w)⟩ C F(w) dμ(w)` assembled directly from the integral.
pub fn controlled_frame_operator_direct(
    family: &SampledFrameFamily,
    controller: &ModuleOperator,
) -> Result<ModuleOperator> {
    family.check_operator(controller)?;
    let controlled: Vec<ModuleVector> = family.vectors.iter().map(|v| controller.act(v)).collect();
    Ok(ModuleOperator::from_basis_images(family.signature(), family.rank(), |e| {
        family.weighted_sum(family.vectors.iter().zip(&controlled).map(|(v, cv)| cv.left_mul(&e.inner(v))))
    }))
}

/// `U{a_j} = Σ_j μ_j a_j C F(w_j)`.
pub fn controlled_synthesis(
    family: &SampledFrameFamily,
    controller: &ModuleOperator,
    a: &CoefficientFamily,
) -> Result<ModuleVector> {
    family.check_operator(controller)?;
    a.check_rule(&family.rule)?;
    Ok(family.weighted_sum(family.vectors.iter().zip(&a.entries).map(|(v, c)| controller.act(v).left_mul(c))))
}

/// `U* f = {⟨C f, F(w_j)⟩}`.
pub fn controlled_coefficients(
    family: &SampledFrameFamily,
    controller: &ModuleOperator,
    f: &ModuleVector,
) -> Result<CoefficientFamily> {
    family.check_operator(controller)?;
    analysis(family, &controller.apply(f)?)
}

/// `U U*` assembled as an operator from `f ↦ U(U* f)`.
pub fn controlled_synthesis_gram(family: &SampledFrameFamily, controller: &ModuleOperator) -> Result<ModuleOperator> {
    family.check_operator(controller)?;
    let controlled: Vec<ModuleVector> = family.vectors.iter().map(|v| controller.act(v)).collect();
    Ok(ModuleOperator::from_basis_images(family.signature(), family.rank(), |e| {
        let ce = controller.act(e);
        family.weighted_sum(family.vectors.iter().zip(&controlled).map(|(v, cv)| cv.left_mul(&ce.inner(v))))
    }))
}

/// Per algebra block, the matrix of `U` on the √μ-scaled coefficient space:
/// node `j` contributes the rows `√μ_j · [ (C F_j)_1 | … | (C F_j)_d ]`.
/// Its largest singular value is `‖U‖` and the adjoint matrix is `U*`.
pub fn controlled_synthesis_matrices(family: &SampledFrameFamily, controller: &ModuleOperator) -> Result<Vec<CMatrix>> {
    family.check_operator(controller)?;
    let d = family.rank();
    let m = family.rule.len();
    Ok(family
        .signature()
        .block_dims()
        .iter()
        .enumerate()
        .map(|(k, &n)| {
            let mut w = CMatrix::zeros(m * n, d * n);
            for (j, (v, &mu)) in family.vectors.iter().zip(family.rule.weights()).enumerate() {
                let cv = controller.act(v);
                let root = mu.sqrt();
                for i in 0..d {
                    let blk = cv.entry(i).block(k);
                    w.view_mut((j * n, i * n), (n, n)).copy_from(&blk.scale(root));
                }
            }
            w
        })
        .collect())
}

/// `‖U‖` as the largest singular value of the scaled synthesis matrices.
pub fn controlled_synthesis_norm(family: &SampledFrameFamily, controller: &ModuleOperator) -> Result<f64> {
    Ok(controlled_synthesis_matrices(family, controller)?.iter().map(linalg::spectral_norm).fold(0.0, f64::max))
}

/// The rank-one module over ℂ^N with the linear ramp `F(w) = {w/n}_{n ≤ N}`,
/// the scalar controller `C = α·id` and coordinate projections as `K`.
#[derive(Clone, Debug)]
pub struct HarmonicRamp {
    pub family: SampledFrameFamily,
    pub controller: ModuleOperator,
    pub alpha: f64,
    pub size: usize,
}

impl HarmonicRamp {
    /// Projection onto the first `r` coordinates, `(a_1, …, a_r, 0, …)`.
    pub fn projection(&self, r: usize) -> Result<ModuleOperator> {
        coordinate_projection(self.size, r)
    }

    /// Closed form of the controlled frame operator: multiplication by
    /// `(α/3)/n²`.
    pub fn closed_form_coefficients(&self) -> Vec<f64> {
        (1..=self.size).map(|n| self.alpha / 3.0 / (n * n) as f64).collect()
    }
}

pub fn harmonic_ramp(size: usize, alpha: f64, rule: QuadratureRule) -> Result<HarmonicRamp> {
    if size == 0 {
        return Err(Error::InvalidInput("N must be at least 1".into()));
    }
    if !(alpha.is_finite() && alpha > 0.0) {
        return Err(Error::InvalidInput(format!("alpha must be positive, got {alpha}")));
    }
    let signature = AlgebraSignature::commutative(size)?;
    let family = SampledFrameFamily::from_fn(rule, |w| {
        let coords: Vec<C64> = (1..=size).map(|n| C64::new(w / n as f64, 0.0)).collect();
        let entry = AlgebraElement::from_diagonal(&coords).expect("size ≥ 1");
        ModuleVector::new(signature.clone(), vec![entry]).expect("rank one")
    })?;
    let controller = ModuleOperator::scalar(&signature, 1, C64::new(alpha, 0.0));
    Ok(HarmonicRamp { family, controller, alpha, size })
}

/// Multiplication by the indicator of the first `r` coordinates of ℂ^N.
pub fn coordinate_projection(size: usize, r: usize) -> Result<ModuleOperator> {
    if r == 0 || r > size {
        return Err(Error::InvalidInput(format!("projection rank r must satisfy 1 ≤ r ≤ {size}, got {r}")));
    }
    diagonal_multiplication(&(0..size).map(|n| if n < r { 1.0 } else { 0.0 }).collect::<Vec<_>>())
}

/// Multiplication by a real diagonal on the rank-one module over ℂ^N.
pub fn diagonal_multiplication(values: &[f64]) -> Result<ModuleOperator> {
    let coords: Vec<C64> = values.iter().map(|&v| C64::new(v, 0.0)).collect();
    Ok(ModuleOperator::multiplication(&AlgebraElement::from_diagonal(&coords)?))
}
