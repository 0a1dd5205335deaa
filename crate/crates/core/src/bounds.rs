//! Optimal frame bounds as extremal eigenvalues of matrix pencils, with the
//! extremal vectors kept as witnesses.
//!
//! For a controlled family the lower form is `⟨C^{1/2}K*f, C^{1/2}K*f⟩_A =
//! ⟨G f, f⟩_A` with `G = K C K*`, so the optimal bounds are the largest `A` with
//! `A·G ⪯ S_C` and the smallest `B` with `S_C ⪯ B·I`.

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::frames::{self, SampledFrameFamily};
use crate::linalg::{self, CMatrix, C64};
use crate::module::{ModuleOperator, ModuleVector, DEFAULT_RANK_TOL};
use crate::DEFAULT_PSD_TOL;

/// Numerical tolerances shared by every check.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Tolerances {
    /// Relative eigenvalue floor for positivity.
    pub psd: f64,
    /// Relative singular-value threshold for rank and range decisions.
    pub rank: f64,
    /// Inequality slack, relative to `1 + ‖S_C‖`.
    pub slack: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self { psd: DEFAULT_PSD_TOL, rank: DEFAULT_RANK_TOL, slack: 1e-8 }
    }
}

impl Tolerances {
    /// Absolute slack for inequalities on an instance with `‖S_C‖ = scale`.
    pub fn slack_for(&self, scale: f64) -> f64 {
        self.slack * (1.0 + scale)
    }
}

/// `C` is positive and its smallest singular value exceeds `tol·‖C‖`.
pub fn gl_plus_check(c: &ModuleOperator, tol: f64) -> bool {
    let norm = c.norm();
    norm > 0.0 && c.is_positive(tol) && c.bounded_below_constant() > tol * norm
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FrameBounds {
    #[serde(rename = "lower_A")]
    pub lower: f64,
    #[serde(rename = "upper_B")]
    pub upper: f64,
    pub lower_is_optimal: bool,
    pub upper_is_optimal: bool,
}

/// Bounds plus the vectors attaining them.
#[derive(Clone, Debug)]
pub struct BoundsAnalysis {
    pub bounds: FrameBounds,
    /// `f` with `⟨S_C f, f⟩ = A ⟨G f, f⟩` in one algebra entry.
    pub lower_witness: ModuleVector,
    /// `f` with `⟨S_C f, f⟩ = B ⟨f, f⟩` in one algebra entry.
    pub upper_witness: ModuleVector,
}

/// Outcome of an operator inequality `lhs ⪯ rhs`.
#[derive(Clone, Debug)]
pub struct Inequality {
    /// Smallest eigenvalue of `rhs − lhs` (Hermitian part).
    pub margin: f64,
    pub holds: bool,
    /// Eigenvector attaining the margin.
    pub witness: ModuleVector,
}

/// Decides `lhs ⪯ rhs` on the flattening with absolute slack.
pub fn operator_leq(lhs: &ModuleOperator, rhs: &ModuleOperator, slack: f64) -> Result<Inequality> {
    let gap = rhs.sub(lhs)?;
    let (margin, block, v) = gap.flatten().min_eigenpair();
    let witness = ModuleVector::from_flat_column(gap.signature(), gap.rank(), block, &v)?;
    Ok(Inequality { margin, holds: margin >= -slack, witness })
}

/// Bounds of the pencils `(S_C, G)` and `(S_C, I)`.
pub fn analyze_bounds(s_c: &ModuleOperator, g: &ModuleOperator, tol: &Tolerances) -> Result<BoundsAnalysis> {
    s_c.check_shape(g)?;
    let sc_norm = s_c.norm();
    if sc_norm == 0.0 {
        return Err(Error::Degenerate("the frame operator vanishes".into()));
    }
    let defect = s_c.selfadjoint_defect();
    if defect > tol.psd * (1.0 + sc_norm) {
        return Err(Error::NotSelfadjoint { defect });
    }
    let g_norm = g.norm();
    if g_norm == 0.0 {
        return Err(Error::Degenerate("the lower-bound operator K C K* vanishes".into()));
    }
    let slack = tol.slack_for(sc_norm);
    let (sig, d) = (s_c.signature(), s_c.rank());
    let fs = s_c.flatten().map(linalg::hermitian_part);
    let fg = g.flatten().map(linalg::hermitian_part);

    let (upper, ub, uv) = fs.max_eigenpair();
    let upper_witness = ModuleVector::from_flat_column(sig, d, ub, &uv)?;

    let threshold = tol.rank * sc_norm.max(g_norm.sqrt());
    let mut worst: Option<(f64, usize, DVector<C64>)> = None;
    for (k, (bs, bg)) in fs.blocks().iter().zip(fg.blocks()).enumerate() {
        let p = linalg::psd_sqrt(bg);
        if linalg::rank(&p, threshold) == 0 {
            continue;
        }
        let n = bs.nrows();
        let mut joined = CMatrix::zeros(n, 2 * n);
        joined.view_mut((0, 0), (n, n)).copy_from(bs);
        joined.view_mut((0, n), (n, n)).copy_from(&p);
        if linalg::rank(&joined, threshold) != linalg::rank(bs, threshold) {
            return Err(Error::FrameConditionViolated { lower: 0.0 });
        }
        let s_pinv = linalg::hermitian_pinv(bs, threshold);
        let reduced = linalg::hermitian_part(&(&p * &s_pinv * &p));
        let (vals, vecs) = linalg::hermitian_eigen(&reduced);
        let top = *vals.last().expect("non-empty block");
        if worst.as_ref().is_none_or(|(w, _, _)| top > *w) {
            // v = S† P u maps the top eigenvector to the extremal direction
            let v = &s_pinv * &p * vecs.column(n - 1);
            worst = Some((top, k, v));
        }
    }
    let (top, lb, lv) = worst.ok_or_else(|| Error::Degenerate("K C K* has no range above the threshold".into()))?;
    let lower = 1.0 / top;
    if !(lower.is_finite() && lower > tol.psd) {
        return Err(Error::FrameConditionViolated { lower });
    }
    let lower_witness = ModuleVector::from_flat_column(sig, d, lb, &lv.normalize())?;

    // Tightness at the witnesses: the quadratic-form gaps vanish there.
    let form = |h: &CMatrix, v: &DVector<C64>| (v.adjoint() * h * v)[(0, 0)].re;
    let lv = lv.normalize();
    let lower_tight = (form(&fs.blocks()[lb], &lv) - lower * form(&fg.blocks()[lb], &lv)).abs() <= slack;
    let upper_tight = (form(&fs.blocks()[ub], &uv) - upper).abs() <= slack;

    Ok(BoundsAnalysis {
        bounds: FrameBounds { lower, upper, lower_is_optimal: lower_tight, upper_is_optimal: upper_tight },
        lower_witness,
        upper_witness,
    })
}

/// `G = K C K*`.
pub fn lower_form_operator(c: &ModuleOperator, k: &ModuleOperator) -> Result<ModuleOperator> {
    k.compose(c)?.compose(&k.adjoint())
}

/// Optimal bounds of a continuous C-controlled K-frame.
pub fn optimal_bounds(
    family: &SampledFrameFamily,
    c: &ModuleOperator,
    k: &ModuleOperator,
    tol: &Tolerances,
) -> Result<FrameBounds> {
    let s_c = frames::controlled_frame_operator(family, c, tol.psd)?;
    Ok(analyze_bounds(&s_c, &lower_form_operator(c, k)?, tol)?.bounds)
}

/// Optimal bounds of a continuous K-frame (`C = id`).
pub fn verify_k_frame(family: &SampledFrameFamily, k: &ModuleOperator, tol: &Tolerances) -> Result<FrameBounds> {
    let id = ModuleOperator::identity(family.signature(), family.rank());
    optimal_bounds(family, &id, k, tol)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algebra::AlgebraSignature;
    use crate::frames::{coordinate_projection, frame_operator, harmonic_ramp};
    use crate::quadrature::{counting_measure, gauss_legendre};
    use crate::sample;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn tol() -> Tolerances {
        Tolerances::default()
    }

    #[test]
    fn gl_plus_examples() {
        let s = AlgebraSignature::new(vec![2, 1]).unwrap();
        assert!(gl_plus_check(&ModuleOperator::identity(&s, 2), 1e-9));
        assert!(gl_plus_check(&ModuleOperator::scalar(&s, 2, C64::new(2.0, 0.0)), 1e-9));
        assert!(!gl_plus_check(&coordinate_projection(4, 2).unwrap(), 1e-9));
        assert!(!gl_plus_check(&ModuleOperator::scalar(&s, 1, C64::new(-1.0, 0.0)), 1e-9));
        assert!(!gl_plus_check(&ModuleOperator::zero(&s, 1), 1e-9));
    }

    #[test]
    fn ramp_bounds_match_closed_form() {
        for (n, r, alpha) in [(6, 2, 1.0), (6, 1, 1.0), (10, 4, 2.5), (5, 5, 1.0)] {
            let ramp = harmonic_ramp(n, alpha, gauss_legendre(32, 0.0, 1.0).unwrap()).unwrap();
            let k = ramp.projection(r).unwrap();
            let b = optimal_bounds(&ramp.family, &ramp.controller, &k, &tol()).unwrap();
            let expect_lower = 1.0 / (3.0 * (r * r) as f64);
            assert!((b.lower - expect_lower).abs() <= 1e-10, "{n} {r}: {}", b.lower);
            assert!((b.upper - alpha / 3.0).abs() <= 1e-10);
            assert!(b.lower_is_optimal && b.upper_is_optimal);
            // plain K-frame: C = id gives the same lower bound, upper 1/3
            let p = verify_k_frame(&ramp.family, &k, &tol()).unwrap();
            assert!((p.lower - expect_lower).abs() <= 1e-10 && (p.upper - 1.0 / 3.0).abs() <= 1e-10);
        }
    }

    #[test]
    fn parseval_basis_bounds() {
        let s = AlgebraSignature::new(vec![2, 1]).unwrap();
        let vecs = (0..3).map(|i| ModuleVector::basis(&s, 3, i)).collect();
        let fam = SampledFrameFamily::new(counting_measure(3).unwrap(), vecs).unwrap();
        let id = ModuleOperator::identity(&s, 3);
        let b = verify_k_frame(&fam, &id, &tol()).unwrap();
        assert!((b.lower - 1.0).abs() < 1e-12 && (b.upper - 1.0).abs() < 1e-12);
        // K = ½·id quadruples the lower bound
        let half = verify_k_frame(&fam, &id.scale(0.5), &tol()).unwrap();
        assert!((half.lower - 4.0).abs() < 1e-10);
    }

    #[test]
    fn degenerate_inputs_are_rejected() {
        let ramp = harmonic_ramp(3, 1.0, gauss_legendre(4, 0.0, 1.0).unwrap()).unwrap();
        let zero = ModuleOperator::zero(ramp.family.signature(), 1);
        assert!(matches!(optimal_bounds(&ramp.family, &ramp.controller, &zero, &tol()), Err(Error::Degenerate(_))));
        assert_eq!(optimal_bounds(&ramp.family, &zero, &ramp.projection(1).unwrap(), &tol()), Err(Error::NotInGlPlus));
        // a family that misses a coordinate is not a frame for id
        let proj = ramp.projection(2).unwrap();
        let thin = ramp.family.mapped(&proj).unwrap();
        assert!(matches!(
            verify_k_frame(&thin, &ModuleOperator::identity(thin.signature(), 1), &tol()),
            Err(Error::FrameConditionViolated { .. })
        ));
        // but it is a K-frame for the projection it was cut by
        assert!(verify_k_frame(&thin, &proj, &tol()).is_ok());
    }

    #[test]
    fn non_selfadjoint_controlled_operator_is_rejected() {
        let s = AlgebraSignature::new(vec![2]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(41);
        let rule = gauss_legendre(6, 0.0, 1.0).unwrap();
        let fam = SampledFrameFamily::new(rule, (0..6).map(|_| sample::vector(&s, 2, &mut rng)).collect()).unwrap();
        let c = {
            let x = sample::operator(&s, 2, &mut rng);
            x.adjoint().compose(&x).unwrap().add(&ModuleOperator::identity(&s, 2)).unwrap()
        };
        let res = optimal_bounds(&fam, &c, &ModuleOperator::identity(&s, 2), &tol());
        assert!(matches!(res, Err(Error::NotSelfadjoint { .. })));
    }

    fn random_instance(seed: u64) -> (SampledFrameFamily, ModuleOperator, ModuleOperator) {
        let s = AlgebraSignature::new(vec![2, 1]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let rule = gauss_legendre(5, 0.0, 1.0).unwrap();
        let fam = SampledFrameFamily::new(rule, (0..5).map(|_| sample::vector(&s, 2, &mut rng)).collect()).unwrap();
        let sop = frame_operator(&fam);
        let c = sample::spectral_function(&sop, |i, _| C64::new(0.5 + 0.2 * i as f64, 0.0));
        let k = sample::operator(&s, 2, &mut rng);
        (fam, c, k)
    }

    #[test]
    fn bounds_hold_on_samples_and_are_tight() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        for seed in 0..10 {
            let (fam, c, k) = random_instance(seed);
            let s_c = frames::controlled_frame_operator(&fam, &c, 1e-9).unwrap();
            let g = lower_form_operator(&c, &k).unwrap();
            let an = analyze_bounds(&s_c, &g, &tol()).unwrap();
            let (a, b) = (an.bounds.lower, an.bounds.upper);
            let slack = 1e-8 * (1.0 + s_c.norm());
            for _ in 0..100 {
                let f = sample::vector(fam.signature(), 2, &mut rng);
                let sf = s_c.apply(&f).unwrap().inner(&f).hermitian_part();
                let gf = g.apply(&f).unwrap().inner(&f).hermitian_part();
                let ff = f.inner(&f);
                assert!(gf.scale_real(a).loewner_leq(&sf, slack).unwrap());
                assert!(sf.loewner_leq(&ff.scale_real(b), slack).unwrap());
            }
            // 1% tighter either way: the witnesses violate
            let f = &an.lower_witness;
            let sf = s_c.apply(f).unwrap().inner(f).hermitian_part();
            let gf = g.apply(f).unwrap().inner(f).hermitian_part();
            assert!(!gf.scale_real(1.01 * a).loewner_leq(&sf, 1e-12).unwrap());
            let f = &an.upper_witness;
            let sf = s_c.apply(f).unwrap().inner(f).hermitian_part();
            assert!(!sf.loewner_leq(&f.inner(f).scale_real(0.99 * b), 1e-12).unwrap());
        }
    }

    #[test]
    fn operator_leq_reports_witness() {
        let ramp = harmonic_ramp(4, 1.0, gauss_legendre(8, 0.0, 1.0).unwrap()).unwrap();
        let s_c = frames::controlled_frame_operator(&ramp.family, &ramp.controller, 1e-9).unwrap();
        let id = ModuleOperator::identity(s_c.signature(), 1);
        let ok = operator_leq(&s_c, &id.scale(1.0 / 3.0), 1e-12).unwrap();
        assert!(ok.holds && ok.margin.abs() < 1e-14);
        let bad = operator_leq(&s_c, &id.scale(0.3), 1e-12).unwrap();
        assert!(!bad.holds);
        // the witness lives in the first coordinate
        assert!((bad.witness.entry(0).block(0)[(0, 0)].norm() - 1.0).abs() < 1e-12);
    }
}
