//! The theorem harness: every check runs on an [`Instance`] and produces a
//! [`VerificationReport`].
//!
//! All "for every f" inequalities are decided on the flattening (eigenvalue
//! tests). Random vectors are drawn only as a cross-check and to record
//! witnesses. Conclusions whose hypotheses fail on an instance are still
//! evaluated but filed as informational, so they cannot fail the verdict.

use std::collections::BTreeMap;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::bounds::{self, operator_leq, BoundsAnalysis, Inequality, Tolerances};
use crate::error::{Error, Result};
use crate::frames::{self, SampledFrameFamily};
use crate::linalg;
use crate::module::{commutator_norm, douglas_analysis, ModuleOperator, ModuleVector};
use crate::sample;

/// Number of random vectors drawn per sampled cross-check.
pub const DEFAULT_SAMPLES: usize = 200;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Pass,
    Fail,
    HypothesesNotMet,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Criterion {
    pub pass: bool,
    /// The measured defect (violation amount, commutator norm, …).
    pub residual: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct VerificationReport {
    pub check: String,
    pub hypotheses: BTreeMap<String, Criterion>,
    pub conclusions: BTreeMap<String, Criterion>,
    #[serde(skip_serializing_if = "BTreeMap::is_empty")]
    pub informational: BTreeMap<String, Criterion>,
    pub constants: BTreeMap<String, f64>,
    pub verdict: Verdict,
    pub seed: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub witness: Option<ModuleVector>,
}

impl VerificationReport {
    pub fn constant(&self, name: &str) -> Option<f64> {
        self.constants.get(name).copied()
    }

    pub fn conclusion(&self, name: &str) -> Option<Criterion> {
        self.conclusions.get(name).copied()
    }

    pub fn hypothesis(&self, name: &str) -> Option<Criterion> {
        self.hypotheses.get(name).copied()
    }
}

struct Builder {
    check: &'static str,
    hypotheses: BTreeMap<String, Criterion>,
    conclusions: BTreeMap<String, Criterion>,
    informational: BTreeMap<String, Criterion>,
    constants: BTreeMap<String, f64>,
    witness: Option<ModuleVector>,
}

impl Builder {
    fn new(check: &'static str) -> Self {
        Self {
            check,
            hypotheses: BTreeMap::new(),
            conclusions: BTreeMap::new(),
            informational: BTreeMap::new(),
            constants: BTreeMap::new(),
            witness: None,
        }
    }

    fn hypothesis(&mut self, name: &str, pass: bool, residual: f64) -> bool {
        self.hypotheses.insert(name.into(), Criterion { pass, residual });
        pass
    }

    fn hypotheses_hold(&self) -> bool {
        self.hypotheses.values().all(|c| c.pass)
    }

    fn conclusion(&mut self, name: &str, pass: bool, residual: f64, witness: Option<ModuleVector>) {
        if !pass && self.witness.is_none() {
            self.witness = witness;
        }
        self.conclusions.insert(name.into(), Criterion { pass, residual });
    }

    fn inequality(&mut self, name: &str, ineq: Inequality) {
        self.conclusion(name, ineq.holds, violation(ineq.margin), Some(ineq.witness));
    }

    /// A conclusion when `applies`, otherwise an informational entry.
    fn dependent(&mut self, applies: bool, name: &str, pass: bool, residual: f64, witness: Option<ModuleVector>) {
        if applies {
            self.conclusion(name, pass, residual, witness);
        } else {
            self.info(name, pass, residual);
        }
    }

    fn dependent_inequality(&mut self, applies: bool, name: &str, ineq: Inequality) {
        self.dependent(applies, name, ineq.holds, violation(ineq.margin), Some(ineq.witness));
    }

    fn info(&mut self, name: &str, pass: bool, residual: f64) {
        self.informational.insert(name.into(), Criterion { pass, residual });
    }

    fn constant(&mut self, name: &str, value: f64) {
        self.constants.insert(name.into(), value);
    }

    fn finish(self, seed: u64) -> VerificationReport {
        let verdict = if self.conclusions.values().any(|c| !c.pass) {
            Verdict::Fail
        } else if self.hypotheses.values().any(|c| !c.pass) {
            Verdict::HypothesesNotMet
        } else {
            Verdict::Pass
        };
        VerificationReport {
            check: self.check.into(),
            hypotheses: self.hypotheses,
            conclusions: self.conclusions,
            informational: self.informational,
            constants: self.constants,
            verdict,
            seed,
            witness: if verdict == Verdict::Fail { self.witness } else { None },
        }
    }
}

fn violation(margin: f64) -> f64 {
    (-margin).max(0.0)
}

/// A frame family together with its controller, `K`, optional `T` and `M`,
/// and everything derived from them that several checks share.
#[derive(Clone, Debug)]
pub struct Instance {
    family: SampledFrameFamily,
    c: ModuleOperator,
    k: ModuleOperator,
    t: Option<ModuleOperator>,
    m: Option<ModuleOperator>,
    tol: Tolerances,
    s: ModuleOperator,
    s_c: ModuleOperator,
    g: ModuleOperator,
    controlled: Result<BoundsAnalysis>,
    plain: Result<BoundsAnalysis>,
    slack: f64,
}

impl Instance {
    pub fn new(
        family: SampledFrameFamily,
        c: ModuleOperator,
        k: ModuleOperator,
        t: Option<ModuleOperator>,
        m: Option<ModuleOperator>,
        tol: Tolerances,
    ) -> Result<Self> {
        if family.is_zero() {
            return Err(Error::Degenerate("the frame family vanishes identically".into()));
        }
        for (name, op) in [("C", Some(&c)), ("K", Some(&k)), ("T", t.as_ref()), ("M", m.as_ref())] {
            if let Some(op) = op {
                family.check_operator(op).map_err(|e| Error::InvalidInput(format!("operator {name}: {e}")))?;
            }
        }
        if k.norm() == 0.0 {
            return Err(Error::Degenerate("K = 0 makes the lower bound vacuous".into()));
        }
        if m.as_ref().is_some_and(|m| m.norm() == 0.0) {
            return Err(Error::Degenerate("M = 0 makes the lower bound vacuous".into()));
        }
        let s = frames::frame_operator(&family);
        let s_c = frames::controlled_frame_operator(&family, &c, tol.psd)?;
        let g = bounds::lower_form_operator(&c, &k)?;
        let controlled = bounds::analyze_bounds(&s_c, &g, &tol);
        let id = ModuleOperator::identity(family.signature(), family.rank());
        let plain = bounds::analyze_bounds(&s, &bounds::lower_form_operator(&id, &k)?, &tol);
        let slack = tol.slack_for(s_c.norm().max(s.norm()));
        Ok(Self { family, c, k, t, m, tol, s, s_c, g, controlled, plain, slack })
    }

    pub fn family(&self) -> &SampledFrameFamily {
        &self.family
    }

    pub fn controller(&self) -> &ModuleOperator {
        &self.c
    }

    pub fn k(&self) -> &ModuleOperator {
        &self.k
    }

    pub fn t(&self) -> Option<&ModuleOperator> {
        self.t.as_ref()
    }

    pub fn m(&self) -> Option<&ModuleOperator> {
        self.m.as_ref()
    }

    pub fn tolerances(&self) -> &Tolerances {
        &self.tol
    }

    pub fn frame_operator(&self) -> &ModuleOperator {
        &self.s
    }

    pub fn controlled_frame_operator(&self) -> &ModuleOperator {
        &self.s_c
    }

    /// Optimal controlled bounds, or why they do not exist.
    pub fn controlled_bounds(&self) -> Result<bounds::FrameBounds> {
        self.controlled.as_ref().map(|a| a.bounds).map_err(Clone::clone)
    }

    /// Optimal bounds of the plain K-frame (`C = id`).
    pub fn plain_bounds(&self) -> Result<bounds::FrameBounds> {
        self.plain.as_ref().map(|a| a.bounds).map_err(Clone::clone)
    }

    /// Absolute inequality slack on this instance.
    pub fn slack(&self) -> f64 {
        self.slack
    }

    fn identity(&self) -> ModuleOperator {
        ModuleOperator::identity(self.family.signature(), self.family.rank())
    }

    fn random_vectors(&self, rng: &mut ChaCha8Rng, n: usize) -> Vec<ModuleVector> {
        (0..n).map(|_| sample::vector(self.family.signature(), self.family.rank(), rng)).collect()
    }

    /// Upper (Bessel) bound `λ_max(S_C)`, defined whenever `S_C` is selfadjoint.
    fn bessel_bound(&self) -> Option<f64> {
        let defect = self.s_c.selfadjoint_defect();
        (defect <= self.tol.psd * (1.0 + self.s_c.norm()))
            .then(|| self.s_c.flatten().map(linalg::hermitian_part).max_eigenpair().0)
    }

    fn commutes(&self, b: &mut Builder, name: &str, x: &ModuleOperator, y: &ModuleOperator) -> Result<bool> {
        let r = commutator_norm(x, y)?;
        Ok(b.hypothesis(name, r <= self.slack, r))
    }

    /// `lhs ⪯ rhs` tested as `⟨(rhs − lhs) f, f⟩ ⪰ 0` on random `f`, each
    /// normalized by `‖⟨f, f⟩‖`.
    fn sampled_leq(&self, lhs: &ModuleOperator, rhs: &ModuleOperator, fs: &[ModuleVector]) -> Result<(bool, f64)> {
        let gap = rhs.sub(lhs)?;
        let mut worst = 0.0_f64;
        for f in fs {
            let denom = f.inner(f).norm();
            if denom == 0.0 {
                continue;
            }
            let q = gap.apply(f)?.inner(f).hermitian_part();
            worst = worst.max(violation(q.min_eigenvalue()) / denom);
        }
        Ok((worst <= self.slack, worst))
    }

    /// Norm-level bounds `A‖⟨G f, f⟩‖ ≤ ‖⟨S' f, f⟩‖ ≤ B‖f‖²` on random `f`.
    fn sampled_norm_bounds(
        &self,
        s_like: &ModuleOperator,
        lower: f64,
        g: &ModuleOperator,
        upper: f64,
        fs: &[ModuleVector],
    ) -> Result<((bool, f64), (bool, f64))> {
        let (mut lo, mut hi) = (0.0_f64, 0.0_f64);
        for f in fs {
            let ff = f.inner(f).norm();
            if ff == 0.0 {
                continue;
            }
            let middle = s_like.apply(f)?.inner(f).norm();
            let left = lower * g.apply(f)?.inner(f).norm();
            lo = lo.max((left - middle) / ff);
            hi = hi.max((middle - upper * ff) / ff);
        }
        Ok(((lo <= self.slack, lo.max(0.0)), (hi <= self.slack, hi.max(0.0))))
    }

    /// Controlled frame operator of the image family `{T F(w)}`.
    fn image_operator(&self, t: &ModuleOperator) -> Result<ModuleOperator> {
        let image = self.family.mapped(t)?;
        self.c.compose(&frames::frame_operator(&image))
    }

    /// `λ = (lambda_min)²` for the pair, if the ranges are nested.
    fn douglas_lambda(
        &self,
        b: &mut Builder,
        name: &str,
        t: &ModuleOperator,
        s: &ModuleOperator,
    ) -> Result<Option<f64>> {
        let rep = douglas_analysis(t, s, self.tol.rank)?;
        b.hypothesis(name, rep.range_included, rep.residuals.factor);
        let lambda = rep.lambda_min.map(|l| l * l);
        if let Some(l) = lambda {
            b.constant("lambda", l);
        }
        Ok(lambda)
    }

    /// Records the controlled bounds as constants, or files the frame
    /// condition as a failed hypothesis.
    fn require_controlled(&self, b: &mut Builder) -> Option<&BoundsAnalysis> {
        match &self.controlled {
            Ok(an) => {
                b.hypothesis("controlled_k_frame", true, 0.0);
                b.constant("A", an.bounds.lower);
                b.constant("B", an.bounds.upper);
                Some(an)
            }
            Err(_) => {
                b.hypothesis("controlled_k_frame", false, 0.0);
                None
            }
        }
    }
}

/// Extra inputs some checks accept.
#[derive(Clone, Debug)]
pub struct CheckOptions {
    /// Bounds `(A, B)` to certify in the controlled-frame check.
    pub asserted_bounds: Option<(f64, f64)>,
    /// Lower-bound candidate for the operator-inequality check, default the
    /// optimal `A`.
    pub a_candidate: Option<f64>,
    pub samples: usize,
}

impl Default for CheckOptions {
    fn default() -> Self {
        Self { asserted_bounds: None, a_candidate: None, samples: DEFAULT_SAMPLES }
    }
}

/// Which optional operators a check needs.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Requirement {
    None,
    T,
    M,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Check {
    /// Optimal plain bounds `A·KK* ⪯ S ⪯ B·I`, certified and tight.
    KFrame,
    /// Optimal controlled bounds `A·KCK* ⪯ S_C ⪯ B·I`, plus asserted bounds.
    ControlledKFrame,
    /// A-valued bounds versus norm bounds, both directions.
    NormCharacterization,
    /// `⟨S_C f, f⟩ ⪯ λ ⟨C S_C f, f⟩` with the minimal `λ`.
    SqrtDomination,
    /// `‖U‖ ≤ √B·‖C^{1/2}‖` for the controlled synthesis operator.
    SynthesisBound,
    /// `A·KCK* ⪯ S_C ⪯ B·I` at the operator level.
    OperatorSandwich,
    /// Lower bound from an operator inequality, both directions.
    LowerFromOperatorInequality,
    /// Controlled bounds give plain bounds with transferred constants.
    ControlledToPlain,
    /// Plain bounds give controlled norm bounds with `A` and `‖C‖‖S‖`.
    PlainToControlled,
    /// K-frame bounds transfer to M-frame bounds `(A/λ, B)`.
    MFrameTransfer,
    /// `{T F(w)}` is Bessel with bound `D‖T*‖²`.
    ImageBessel,
    /// `{T F(w)}` is a K-frame on `R(T)` with lower `(A/λ)‖(T†)*‖^{-2}`.
    ImageClosedRange,
    /// `{T F(w)}` for an isometry `T` has bounds `(A/λ, B‖T*‖²)`.
    ImageIsometry,
    /// Range inclusion, majorization and factorization agree.
    Douglas,
    /// `X` surjective iff `X*` bounded below, for each given operator.
    SurjectivityDuality,
    /// `⟨Xx, Xx⟩ ⪯ ‖X‖² ⟨x, x⟩` with `‖X‖²` minimal.
    NormBoundConstant,
}

impl Check {
    pub const ALL: [Check; 16] = [
        Check::KFrame,
        Check::ControlledKFrame,
        Check::NormCharacterization,
        Check::SqrtDomination,
        Check::SynthesisBound,
        Check::OperatorSandwich,
        Check::LowerFromOperatorInequality,
        Check::ControlledToPlain,
        Check::PlainToControlled,
        Check::MFrameTransfer,
        Check::ImageBessel,
        Check::ImageClosedRange,
        Check::ImageIsometry,
        Check::Douglas,
        Check::SurjectivityDuality,
        Check::NormBoundConstant,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Check::KFrame => "k_frame",
            Check::ControlledKFrame => "controlled_k_frame",
            Check::NormCharacterization => "norm_characterization",
            Check::SqrtDomination => "sqrt_domination",
            Check::SynthesisBound => "synthesis_bound",
            Check::OperatorSandwich => "operator_sandwich",
            Check::LowerFromOperatorInequality => "lower_from_operator_inequality",
            Check::ControlledToPlain => "controlled_to_plain",
            Check::PlainToControlled => "plain_to_controlled",
            Check::MFrameTransfer => "m_frame_transfer",
            Check::ImageBessel => "image_bessel",
            Check::ImageClosedRange => "image_closed_range",
            Check::ImageIsometry => "image_isometry",
            Check::Douglas => "douglas",
            Check::SurjectivityDuality => "surjectivity_duality",
            Check::NormBoundConstant => "norm_bound_constant",
        }
    }

    pub fn requirement(self) -> Requirement {
        match self {
            Check::MFrameTransfer => Requirement::M,
            Check::ImageBessel | Check::ImageClosedRange | Check::ImageIsometry => Requirement::T,
            _ => Requirement::None,
        }
    }

    fn index(self) -> u64 {
        Check::ALL.iter().position(|&c| c == self).expect("listed") as u64
    }

    /// Runs the check. Random vectors come from a ChaCha stream keyed by
    /// `(seed, check)`, so reports do not depend on which checks run or in
    /// what order.
    pub fn run(self, inst: &Instance, opts: &CheckOptions, seed: u64) -> Result<VerificationReport> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(self.index());
        let fs = inst.random_vectors(&mut rng, opts.samples);
        let mut b = Builder::new(self.name());
        match self {
            Check::KFrame => k_frame(inst, &fs, &mut b)?,
            Check::ControlledKFrame => controlled_k_frame(inst, opts, &fs, &mut b)?,
            Check::NormCharacterization => norm_characterization(inst, &fs, &mut b)?,
            Check::SqrtDomination => {
                sqrt_domination(inst, &fs, &mut b)?;
            }
            Check::SynthesisBound => synthesis_bound(inst, &mut b)?,
            Check::OperatorSandwich => operator_sandwich(inst, &mut b)?,
            Check::LowerFromOperatorInequality => lower_from_operator_inequality(inst, opts, &fs, &mut b)?,
            Check::ControlledToPlain => controlled_to_plain(inst, &fs, &mut b)?,
            Check::PlainToControlled => plain_to_controlled(inst, &fs, &mut b)?,
            Check::MFrameTransfer => m_frame_transfer(inst, &fs, &mut b)?,
            Check::ImageBessel => image_bessel(inst, &mut b)?,
            Check::ImageClosedRange => image_closed_range(inst, &fs, &mut b)?,
            Check::ImageIsometry => image_isometry(inst, &fs, &mut b)?,
            Check::Douglas => douglas(inst, &mut b)?,
            Check::SurjectivityDuality => surjectivity_duality(inst, &mut b),
            Check::NormBoundConstant => norm_bound_constant(inst, &fs, &mut b)?,
        }
        Ok(b.finish(seed))
    }
}

fn required<'a>(op: Option<&'a ModuleOperator>, name: &str, check: Check) -> Result<&'a ModuleOperator> {
    op.ok_or_else(|| Error::InvalidInput(format!("check {} needs operator {name}", check.name())))
}

/// Shared body of the two definition checks: certification of `(A, B)` for
/// the pencil `(s, g)`, sampled cross-checks and 1% tightness witnesses.
fn certify_bounds(
    inst: &Instance,
    an: &BoundsAnalysis,
    s: &ModuleOperator,
    g: &ModuleOperator,
    fs: &[ModuleVector],
    b: &mut Builder,
) -> Result<()> {
    let (lo, hi) = (an.bounds.lower, an.bounds.upper);
    let id = inst.identity();
    b.constant("A", lo);
    b.constant("B", hi);
    b.inequality("lower_operator", operator_leq(&g.scale(lo), s, inst.slack)?);
    b.inequality("upper_operator", operator_leq(s, &id.scale(hi), inst.slack)?);
    let (pass, r) = inst.sampled_leq(&g.scale(lo), s, fs)?;
    b.conclusion("lower_sampled", pass, r, None);
    let (pass, r) = inst.sampled_leq(s, &id.scale(hi), fs)?;
    b.conclusion("upper_sampled", pass, r, None);

    let f = &an.lower_witness;
    let q = s.sub(&g.scale(1.01 * lo))?.apply(f)?.inner(f).hermitian_part().min_eigenvalue();
    b.conclusion("lower_optimal", an.bounds.lower_is_optimal && q < 0.0, q.max(0.0), None);
    let f = &an.upper_witness;
    let q = id.scale(0.99 * hi).sub(s)?.apply(f)?.inner(f).hermitian_part().min_eigenvalue();
    b.conclusion("upper_optimal", an.bounds.upper_is_optimal && q < 0.0, q.max(0.0), None);
    Ok(())
}

fn frame_condition_failure(e: &Error, b: &mut Builder) -> Result<()> {
    match e {
        Error::FrameConditionViolated { lower } => {
            b.conclusion("lower_bound_positive", false, violation(*lower), None);
            Ok(())
        }
        other => Err(other.clone()),
    }
}

fn k_frame(inst: &Instance, fs: &[ModuleVector], b: &mut Builder) -> Result<()> {
    match &inst.plain {
        Ok(an) => {
            let kk = inst.k.compose(&inst.k.adjoint())?;
            certify_bounds(inst, an, &inst.s, &kk, fs, b)
        }
        Err(e) => frame_condition_failure(e, b),
    }
}

fn controlled_k_frame(inst: &Instance, opts: &CheckOptions, fs: &[ModuleVector], b: &mut Builder) -> Result<()> {
    match &inst.controlled {
        Ok(an) => certify_bounds(inst, an, &inst.s_c, &inst.g, fs, b)?,
        Err(e) => frame_condition_failure(e, b)?,
    }
    if let Some((a, bb)) = opts.asserted_bounds {
        b.constant("asserted_A", a);
        b.constant("asserted_B", bb);
        b.inequality("asserted_lower", operator_leq(&inst.g.scale(a), &inst.s_c, inst.slack)?);
        b.inequality("asserted_upper", operator_leq(&inst.s_c, &inst.identity().scale(bb), inst.slack)?);
    }
    Ok(())
}

/// The norm bounds follow from the A-valued ones with the same constants.
/// Conversely, given norm constants `(A_n, B_n)`, a range inclusion
/// `C ⪯ m·K*CK` yields the A-valued lower constant `A_n / (m‖K*‖²)` and the
/// upper constant `‖S_C‖`.
fn norm_characterization(inst: &Instance, fs: &[ModuleVector], b: &mut Builder) -> Result<()> {
    let commute = inst.commutes(b, "commutes_c_k", &inst.c, &inst.k)?;
    let c_half = inst.c.sqrt(inst.tol.psd)?;
    let m = inst.douglas_lambda(b, "range_c_half_in_k_star_c_half", &c_half, &inst.k.adjoint().compose(&c_half)?)?;
    let Some(an) = inst.require_controlled(b) else { return Ok(()) };
    let (a, bb) = (an.bounds.lower, an.bounds.upper);

    let ((lo_ok, lo_r), (hi_ok, hi_r)) = inst.sampled_norm_bounds(&inst.s_c, a, &inst.g, bb, fs)?;
    b.conclusion("forward_norm_lower", lo_ok, lo_r, None);
    b.conclusion("forward_norm_upper", hi_ok, hi_r, None);

    let d = inst.s_c.norm();
    b.constant("D", d);
    let Some(m) = m else { return Ok(()) };
    b.constant("m", m);
    let k_star = inst.k.adjoint().norm();
    let (a_n, b_n) = (a, bb);
    b.constant("norm_A", a_n);
    b.constant("norm_B", b_n);
    let predicted = a_n / (m * k_star * k_star);
    b.constant("predicted_lower", predicted);
    let hyps = commute && b.hypotheses_hold();
    b.dependent_inequality(hyps, "reverse_lower", operator_leq(&inst.g.scale(predicted), &inst.s_c, inst.slack)?);
    b.dependent_inequality(hyps, "reverse_upper", operator_leq(&inst.s_c, &inst.identity().scale(d), inst.slack)?);
    b.dependent(hyps, "predicted_not_above_optimal", predicted <= a + inst.slack, (predicted - a).max(0.0), None);

    let literal = (a_n / m).sqrt() / (k_star * k_star);
    b.constant("literal_reverse_constant", literal);
    let lit = operator_leq(&inst.g.scale(literal), &inst.s_c, inst.slack)?;
    b.info("literal_reverse_lower", lit.holds, violation(lit.margin));
    Ok(())
}

/// Returns `λ` when the hypotheses hold.
fn sqrt_domination(inst: &Instance, fs: &[ModuleVector], b: &mut Builder) -> Result<Option<f64>> {
    let c_sc = inst.c.compose(&inst.s_c)?;
    let commute = inst.commutes(b, "commutes_c_s_c", &inst.c, &inst.s_c)?;
    let sc_pos = b.hypothesis("s_c_positive", inst.s_c.is_positive(inst.tol.psd), 0.0);
    let csc_pos = b.hypothesis("c_s_c_positive", c_sc.is_positive(inst.tol.psd), 0.0);
    if !(sc_pos && csc_pos) {
        return Ok(None);
    }
    let sc_half = inst.s_c.sqrt(inst.tol.psd)?;
    let csc_half = c_sc.sqrt(inst.tol.psd)?;
    let Some(lambda) = inst.douglas_lambda(b, "range_s_c_half_in_c_s_c_half", &sc_half, &csc_half)? else {
        return Ok(None);
    };
    let hyps = commute;
    b.dependent_inequality(hyps, "operator_domination", operator_leq(&inst.s_c, &c_sc.scale(lambda), inst.slack)?);
    // ‖⟨S_C f, f⟩‖ ≤ λ ‖⟨C S_C f, f⟩‖ on samples
    let mut worst = 0.0_f64;
    for f in fs {
        let ff = f.inner(f).norm();
        let lhs = inst.s_c.apply(f)?.inner(f).norm();
        let rhs = lambda * c_sc.apply(f)?.inner(f).norm();
        worst = worst.max((lhs - rhs) / ff);
    }
    let (ok, r) = (worst <= inst.slack, worst.max(0.0));
    b.dependent(hyps, "norm_domination_sampled", ok, r, None);
    Ok(hyps.then_some(lambda))
}

fn synthesis_bound(inst: &Instance, b: &mut Builder) -> Result<()> {
    let Some(bessel) = inst.bessel_bound() else {
        b.hypothesis("controlled_bessel", false, inst.s_c.selfadjoint_defect());
        return Ok(());
    };
    b.hypothesis("controlled_bessel", true, 0.0);
    b.constant("B", bessel);
    let u_norm = frames::controlled_synthesis_norm(&inst.family, &inst.c)?;
    let c_half_norm = inst.c.norm().sqrt();
    let bound = bessel.sqrt() * c_half_norm;
    b.constant("U_norm", u_norm);
    b.constant("predicted_U_norm", bound);
    b.conclusion("synthesis_norm_bound", u_norm <= bound + inst.slack, (u_norm - bound).max(0.0), None);

    let uu = frames::controlled_synthesis_gram(&inst.family, &inst.c)?;
    let gram_gap = (u_norm * u_norm - uu.norm()).abs();
    b.conclusion("adjoint_norm_identity", gram_gap <= 1e-10 * (1.0 + uu.norm()), gram_gap, None);

    // the remaining statements need the square-root domination hypotheses
    let mut sub = Builder::new("sqrt_domination");
    let lambda = sqrt_domination(inst, &[], &mut sub)?;
    for (name, c) in &sub.hypotheses {
        b.hypothesis(name, c.pass, c.residual);
    }
    let commute = b.hypotheses.get("commutes_c_s_c").is_some_and(|c| c.pass);
    let c_sc = inst.c.compose(&inst.s_c)?;
    let gap = uu.sub(&c_sc)?.norm();
    b.dependent(commute, "gram_identity", gap <= 1e-10 * c_sc.norm(), gap, None);
    if let Some(lambda) = lambda {
        let converse = lambda * bessel * c_half_norm * c_half_norm;
        b.constant("lambda", lambda);
        b.constant("converse_bessel_bound", converse);
        b.inequality("converse_bessel", operator_leq(&inst.s_c, &inst.identity().scale(converse), inst.slack)?);
    }
    Ok(())
}

fn operator_sandwich(inst: &Instance, b: &mut Builder) -> Result<()> {
    let Some(an) = inst.require_controlled(b) else { return Ok(()) };
    let (a, bb) = (an.bounds.lower, an.bounds.upper);
    b.inequality("lower", operator_leq(&inst.g.scale(a), &inst.s_c, inst.slack)?);
    b.inequality("upper", operator_leq(&inst.s_c, &inst.identity().scale(bb), inst.slack)?);
    let comm = commutator_norm(&inst.c, &inst.k)?;
    b.constant("commutator_c_k", comm);
    if comm <= inst.slack {
        let ckk = inst.c.compose(&inst.k)?.compose(&inst.k.adjoint())?;
        b.inequality("lower_ckk_variant", operator_leq(&ckk.scale(a), &inst.s_c, inst.slack)?);
    }
    Ok(())
}

fn lower_from_operator_inequality(
    inst: &Instance,
    opts: &CheckOptions,
    fs: &[ModuleVector],
    b: &mut Builder,
) -> Result<()> {
    if inst.bessel_bound().is_none() {
        b.hypothesis("controlled_bessel", false, inst.s_c.selfadjoint_defect());
        return Ok(());
    }
    b.hypothesis("controlled_bessel", true, 0.0);
    let optimal = inst.controlled.as_ref().ok().map(|an| an.bounds.lower);
    if let Some(a) = optimal {
        b.constant("A", a);
        b.inequality("forward_operator", operator_leq(&inst.g.scale(a), &inst.s_c, inst.slack)?);
    }
    let Some(candidate) = opts.a_candidate.or(optimal) else {
        // not a K-frame and no candidate: the forward direction already says so
        b.conclusion("lower_bound_positive", false, 0.0, None);
        return Ok(());
    };
    b.constant("A_candidate", candidate);
    let ineq = operator_leq(&inst.g.scale(candidate), &inst.s_c, inst.slack)?;
    if ineq.holds {
        b.inequality("candidate_operator", ineq);
        let (pass, r) = inst.sampled_leq(&inst.g.scale(candidate), &inst.s_c, fs)?;
        b.conclusion("candidate_quadratic_form", pass, r, None);
    } else {
        // the eigenvector is a concrete f breaking the quadratic form
        let f = &ineq.witness;
        let q = inst.s_c.sub(&inst.g.scale(candidate))?.apply(f)?.inner(f).hermitian_part().min_eigenvalue();
        b.info("witness_breaks_quadratic_form", q < 0.0, violation(q));
        b.inequality("candidate_operator", ineq);
    }
    Ok(())
}

/// `‖C^{-1/2}‖²` and `‖C^{1/2}‖²`.
fn controller_norms(c: &ModuleOperator) -> (f64, f64) {
    let flat = c.flatten().map(linalg::hermitian_part);
    let min = flat.min_eigenpair().0;
    (1.0 / min, c.norm())
}

fn controlled_to_plain(inst: &Instance, fs: &[ModuleVector], b: &mut Builder) -> Result<()> {
    let commute = inst.commutes(b, "commutes_c_k", &inst.c, &inst.k)?;
    let c_half = inst.c.sqrt(inst.tol.psd)?;
    inst.douglas_lambda(b, "range_c_half_in_k_star_c_half", &c_half, &inst.k.adjoint().compose(&c_half)?)?;
    let Some(an) = inst.require_controlled(b) else { return Ok(()) };
    let (inv_half_sq, half_sq) = controller_norms(&inst.c);
    let lower = an.bounds.lower / (inv_half_sq * half_sq);
    let upper = an.bounds.upper * inv_half_sq;
    b.constant("predicted_lower", lower);
    b.constant("predicted_upper", upper);
    let kk = inst.k.compose(&inst.k.adjoint())?;
    let id = inst.identity();
    b.dependent_inequality(commute, "plain_lower_operator", operator_leq(&kk.scale(lower), &inst.s, inst.slack)?);
    b.dependent_inequality(commute, "plain_upper_operator", operator_leq(&inst.s, &id.scale(upper), inst.slack)?);
    let (pass, r) = inst.sampled_leq(&kk.scale(lower), &inst.s, fs)?;
    b.dependent(commute, "plain_lower_sampled", pass, r, None);
    let (pass, r) = inst.sampled_leq(&inst.s, &id.scale(upper), fs)?;
    b.dependent(commute, "plain_upper_sampled", pass, r, None);
    if let Ok(plain) = &inst.plain {
        let (ol, ou) = (plain.bounds.lower, plain.bounds.upper);
        b.constant("optimal_lower", ol);
        b.constant("optimal_upper", ou);
        b.dependent(commute, "sound_lower", lower <= ol + inst.slack, (lower - ol).max(0.0), None);
        b.dependent(commute, "sound_upper", upper >= ou - inst.slack, (ou - upper).max(0.0), None);
    }
    Ok(())
}

fn plain_to_controlled(inst: &Instance, fs: &[ModuleVector], b: &mut Builder) -> Result<()> {
    let commute = inst.commutes(b, "commutes_c_k", &inst.c, &inst.k)?;
    let c_half = inst.c.sqrt(inst.tol.psd)?;
    inst.douglas_lambda(b, "range_c_half_in_k_star_c_half", &c_half, &inst.k.adjoint().compose(&c_half)?)?;
    let plain = match &inst.plain {
        Ok(an) => {
            b.hypothesis("k_frame", true, 0.0);
            an
        }
        Err(_) => {
            b.hypothesis("k_frame", false, 0.0);
            return Ok(());
        }
    };
    let lower = plain.bounds.lower;
    let upper = inst.c.norm() * inst.s.norm();
    b.constant("A", lower);
    b.constant("predicted_lower", lower);
    b.constant("predicted_upper", upper);
    let ((lo_ok, lo_r), (hi_ok, hi_r)) = inst.sampled_norm_bounds(&inst.s_c, lower, &inst.g, upper, fs)?;
    b.dependent(commute, "norm_lower_sampled", lo_ok, lo_r, None);
    b.dependent(commute, "norm_upper_sampled", hi_ok, hi_r, None);
    let id = inst.identity();
    b.dependent_inequality(commute, "lower_operator", operator_leq(&inst.g.scale(lower), &inst.s_c, inst.slack)?);
    b.dependent_inequality(commute, "upper_operator", operator_leq(&inst.s_c, &id.scale(upper), inst.slack)?);
    if let Ok(ctrl) = &inst.controlled {
        let (ol, ou) = (ctrl.bounds.lower, ctrl.bounds.upper);
        b.constant("optimal_lower", ol);
        b.constant("optimal_upper", ou);
        b.dependent(commute, "sound_lower", lower <= ol + inst.slack, (lower - ol).max(0.0), None);
        b.dependent(commute, "sound_upper", upper >= ou - inst.slack, (ou - upper).max(0.0), None);
    }
    Ok(())
}

fn m_frame_transfer(inst: &Instance, fs: &[ModuleVector], b: &mut Builder) -> Result<()> {
    let m = required(inst.m.as_ref(), "M", Check::MFrameTransfer)?;
    let lambda = inst.douglas_lambda(b, "range_m_in_k", m, &inst.k)?;
    inst.commutes(b, "commutes_c_m_star", &inst.c, &m.adjoint())?;
    inst.commutes(b, "commutes_c_k_star", &inst.c, &inst.k.adjoint())?;
    let Some(an) = inst.require_controlled(b) else { return Ok(()) };
    let Some(lambda) = lambda else { return Ok(()) };
    let hyps = b.hypotheses_hold();
    let lower = an.bounds.lower / lambda;
    b.constant("predicted_lower", lower);
    b.constant("predicted_upper", an.bounds.upper);
    let mcm = bounds::lower_form_operator(&inst.c, m)?;
    b.dependent_inequality(hyps, "lower_operator", operator_leq(&mcm.scale(lower), &inst.s_c, inst.slack)?);
    let (pass, r) = inst.sampled_leq(&mcm.scale(lower), &inst.s_c, fs)?;
    b.dependent(hyps, "lower_sampled", pass, r, None);
    b.dependent_inequality(
        hyps,
        "upper_operator",
        operator_leq(&inst.s_c, &inst.identity().scale(an.bounds.upper), inst.slack)?,
    );
    if let Ok(opt) = bounds::analyze_bounds(&inst.s_c, &mcm, &inst.tol) {
        b.constant("optimal_m_lower", opt.bounds.lower);
        b.dependent(
            hyps,
            "sound_lower",
            lower <= opt.bounds.lower + inst.slack,
            (lower - opt.bounds.lower).max(0.0),
            None,
        );
    }
    Ok(())
}

fn image_bessel(inst: &Instance, b: &mut Builder) -> Result<()> {
    let t = required(inst.t.as_ref(), "T", Check::ImageBessel)?;
    let commute = inst.commutes(b, "commutes_t_c", t, &inst.c)?;
    let Some(d) = inst.bessel_bound() else {
        b.hypothesis("controlled_bessel", false, inst.s_c.selfadjoint_defect());
        return Ok(());
    };
    b.hypothesis("controlled_bessel", true, 0.0);
    let t_star = t.adjoint().norm();
    let image = inst.image_operator(t)?;
    let proof = d * t_star * t_star;
    let statement = d * t_star;
    b.constant("D", d);
    b.constant("T_star_norm", t_star);
    b.constant("bound", proof);
    b.constant("stated_bound", statement);
    let id = inst.identity();
    b.dependent_inequality(commute, "image_upper", operator_leq(&image, &id.scale(proof), inst.slack * (1.0 + proof))?);
    let stated = operator_leq(&image, &id.scale(statement), inst.slack * (1.0 + proof))?;
    b.info("image_upper_stated_bound", stated.holds, violation(stated.margin));
    if image.selfadjoint_defect() <= inst.tol.psd * (1.0 + image.norm()) {
        b.constant("image_optimal_upper", image.flatten().map(linalg::hermitian_part).max_eigenpair().0);
    }
    Ok(())
}

/// Hypotheses shared by the two image-frame theorems; returns `λ`.
fn image_hypotheses(inst: &Instance, t: &ModuleOperator, b: &mut Builder) -> Result<Option<f64>> {
    inst.commutes(b, "commutes_c_k", &inst.c, &inst.k)?;
    inst.commutes(b, "commutes_c_t", &inst.c, t)?;
    inst.commutes(b, "commutes_k_t", &inst.k, t)?;
    let tk = t.adjoint().compose(&inst.k.adjoint())?;
    let kt = inst.k.adjoint().compose(&t.adjoint())?;
    let lambda = inst.douglas_lambda(b, "range_t_star_k_star_in_k_star_t_star", &tk, &kt)?;
    Ok(match lambda {
        Some(l) if l > 0.0 => Some(l),
        Some(l) => {
            b.hypothesis("lambda_positive", false, l);
            None
        }
        None => None,
    })
}

fn image_closed_range(inst: &Instance, fs: &[ModuleVector], b: &mut Builder) -> Result<()> {
    let t = required(inst.t.as_ref(), "T", Check::ImageClosedRange)?;
    let lambda = image_hypotheses(inst, t, b)?;
    let Some(an) = inst.require_controlled(b) else { return Ok(()) };
    let Some(lambda) = lambda else { return Ok(()) };
    let hyps = b.hypotheses_hold();
    let t_pinv = t.pseudo_inverse(inst.tol.rank);
    let pinv_norm = t_pinv.adjoint().norm();
    let t_star = t.adjoint().norm();
    let lower = an.bounds.lower / lambda / (pinv_norm * pinv_norm);
    let upper = an.bounds.upper * t_star * t_star;
    b.constant("pinv_adjoint_norm", pinv_norm);
    b.constant("predicted_lower", lower);
    b.constant("predicted_upper", upper);

    let image = inst.image_operator(t)?;
    let proj = t.compose(&t_pinv)?;
    let compress = |x: &ModuleOperator| proj.adjoint().compose(x).and_then(|y| y.compose(&proj));
    let lhs = compress(&inst.g.scale(lower))?;
    let rhs = compress(&image)?;
    let slack = inst.slack * (1.0 + upper);
    b.dependent_inequality(hyps, "lower_on_range", operator_leq(&lhs, &rhs, slack)?);
    let on_range: Vec<ModuleVector> = fs.iter().map(|f| proj.apply(f)).collect::<Result<_>>()?;
    let (pass, r) = inst.sampled_leq(&inst.g.scale(lower), &image, &on_range)?;
    b.dependent(hyps, "lower_on_range_sampled", pass, r, None);
    b.dependent_inequality(hyps, "upper", operator_leq(&image, &inst.identity().scale(upper), slack)?);
    if let Ok(opt) = bounds::analyze_bounds(&rhs, &compress(&inst.g)?, &inst.tol) {
        b.constant("image_optimal_lower", opt.bounds.lower);
        b.constant("image_optimal_upper", opt.bounds.upper);
    }
    Ok(())
}

fn image_isometry(inst: &Instance, fs: &[ModuleVector], b: &mut Builder) -> Result<()> {
    let t = required(inst.t.as_ref(), "T", Check::ImageIsometry)?;
    let id = inst.identity();
    let iso = t.adjoint().compose(t)?.sub(&id)?.norm();
    b.hypothesis("isometry", iso <= inst.slack, iso);
    let lambda = image_hypotheses(inst, t, b)?;
    let Some(an) = inst.require_controlled(b) else { return Ok(()) };
    let Some(lambda) = lambda else { return Ok(()) };
    let hyps = b.hypotheses_hold();
    let t_star = t.adjoint().norm();
    let lower = an.bounds.lower / lambda;
    let upper = an.bounds.upper * t_star * t_star;
    b.constant("predicted_lower", lower);
    b.constant("predicted_upper", upper);
    let image = inst.image_operator(t)?;
    b.dependent_inequality(hyps, "lower_operator", operator_leq(&inst.g.scale(lower), &image, inst.slack)?);
    b.dependent_inequality(hyps, "upper_operator", operator_leq(&image, &id.scale(upper), inst.slack)?);
    let (pass, r) = inst.sampled_leq(&inst.g.scale(lower), &image, fs)?;
    b.dependent(hyps, "lower_sampled", pass, r, None);
    if let Ok(opt) = bounds::analyze_bounds(&image, &inst.g, &inst.tol) {
        b.constant("image_optimal_lower", opt.bounds.lower);
        b.constant("image_optimal_upper", opt.bounds.upper);
    }
    Ok(())
}

/// On `(M, K)` when `M` is given, otherwise on `(C^{1/2}, K* C^{1/2})`.
fn douglas(inst: &Instance, b: &mut Builder) -> Result<()> {
    let (t, s) = match &inst.m {
        Some(m) => (m.clone(), inst.k.clone()),
        None => {
            let c_half = inst.c.sqrt(inst.tol.psd)?;
            let s = inst.k.adjoint().compose(&c_half)?;
            (c_half, s)
        }
    };
    let rep = douglas_analysis(&t, &s, inst.tol.rank)?;
    let r = &rep.residuals;
    b.constant("range_included", f64::from(u8::from(rep.range_included)));
    b.constant("factor_residual", r.factor);
    b.constant("pencil_residual", r.pencil);
    let agree = rep.range_included == r.factor_solvable && r.factor_solvable == r.pencil_feasible;
    b.conclusion("three_way_agreement", agree, 0.0, None);
    if let (Some(lambda), Some(q)) = (rep.lambda_min, &rep.factor_q) {
        b.constant("lambda_min", lambda);
        let t_norm = t.norm();
        let res = s.compose(q)?.sub(&t)?.norm();
        b.conclusion("factorization", res <= inst.tol.rank * (1.0 + t_norm), res, None);
        let tt = t.compose(&t.adjoint())?;
        let ss = s.compose(&s.adjoint())?;
        let ineq =
            operator_leq(&tt, &ss.scale(lambda * lambda + inst.tol.slack), inst.tol.psd * (1.0 + t_norm * t_norm))?;
        b.inequality("majorization", ineq);
    }
    Ok(())
}

fn named_operators(inst: &Instance) -> Vec<(&'static str, &ModuleOperator)> {
    let mut ops = vec![("k", &inst.k), ("c", &inst.c)];
    if let Some(t) = &inst.t {
        ops.push(("t", t));
    }
    if let Some(m) = &inst.m {
        ops.push(("m", m));
    }
    ops
}

fn surjectivity_duality(inst: &Instance, b: &mut Builder) {
    for (name, x) in named_operators(inst) {
        let norm = x.norm();
        let threshold = inst.tol.rank * norm;
        let flat = x.flatten();
        let surjective = flat.blocks().iter().all(|blk| linalg::rank(blk, threshold) == blk.nrows());
        let below = x.adjoint().bounded_below_constant();
        b.constant(&format!("{name}_star_bounded_below"), below);
        b.constant(&format!("{name}_surjective"), f64::from(u8::from(surjective)));
        b.conclusion(&format!("{name}_equivalence"), surjective == (below > threshold), 0.0, None);
    }
}

fn norm_bound_constant(inst: &Instance, fs: &[ModuleVector], b: &mut Builder) -> Result<()> {
    for (name, x) in named_operators(inst) {
        let k = x.min_k_bound();
        b.constant(&format!("{name}_k"), k);
        let xx = x.adjoint().compose(x)?;
        let slack = inst.tol.slack * (1.0 + k);
        let mut worst = 0.0_f64;
        for f in fs {
            let lhs = x.apply(f)?.inner(&x.apply(f)?);
            let gap = &f.inner(f).scale_real(k) - &lhs;
            worst = worst.max(violation(gap.hermitian_part().min_eigenvalue()) / f.inner(f).norm());
        }
        b.conclusion(&format!("{name}_bound_sampled"), worst <= slack, worst, None);
        let (_, blk, v) = xx.flatten().max_eigenpair();
        let f = ModuleVector::from_flat_column(x.signature(), x.rank(), blk, &v)?;
        let lhs = x.apply(&f)?.inner(&x.apply(&f)?);
        let shrunk = f.inner(&f).scale_real(0.99 * k);
        let violated = k > 0.0 && !lhs.loewner_leq(&shrunk, 1e-12)?;
        b.conclusion(&format!("{name}_minimal"), violated || k == 0.0, 0.0, None);
    }
    Ok(())
}
