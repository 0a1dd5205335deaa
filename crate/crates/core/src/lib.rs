//! Numerical toolkit for continuous controlled K-frames on finite-dimensional
//! Hilbert C*-modules.
//!
//! The algebra is a finite direct sum of complex matrix blocks, the module is
//! the free module `A^d`, and integrals over the parameter space are finite
//! quadrature sums. On top of that sit frame and controlled-frame operators,
//! optimal bounds as pencil eigenvalues, and a harness that checks the
//! structural results about such frames on concrete instances.

pub mod algebra;
pub mod bounds;
pub mod error;
pub mod frames;
pub mod linalg;
pub mod module;
pub mod quadrature;
pub mod sample;
pub mod verification;

pub use algebra::{AlgebraElement, AlgebraSignature, DEFAULT_PSD_TOL};
pub use bounds::{FrameBounds, Tolerances};
pub use error::{Error, Result};
pub use frames::{CoefficientFamily, SampledFrameFamily};
pub use linalg::{CMatrix, C64};
pub use module::{DouglasReport, ModuleOperator, ModuleVector, DEFAULT_RANK_TOL};
pub use quadrature::{QuadratureRule, RuleSpec};
pub use verification::{Check, CheckOptions, Criterion, Instance, Requirement, Verdict, VerificationReport};
