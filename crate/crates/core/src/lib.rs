//! Constructive Kolmogorov superposition: an exactly represented, Lipschitz
//! inner function built level by level, a verifier for its geometric
//! invariants, the outer refinement loop, and a small laboratory for the
//! linear-weight counterexample.

pub mod counterexample;
pub mod error;
pub mod exact;
pub mod function;
pub mod inner;
pub mod outer;
pub mod town;
pub mod verify;

pub use counterexample::{check_bad_lemmas, collision_witness, juxtaposition, LinearCandidate};
pub use error::{Error, Result};
pub use exact::{BigFloat, Interval, QuadraticNumber, Rational};
pub use function::{KnotDump, PiecewiseLinear, Scalar};
pub use inner::{build, build_with_audit, refine, refine_with_audit, BreakPlan, LevelAudit, RefineOptions};
pub use outer::{decompose, kr_eval, outer_round, Decomposition, Embedding, OuterOptions, OuterState, TargetFunction, Weighting};
pub use town::{Origin, RefinementState, Town};
pub use verify::{check_convergence, check_criterion, check_cube_separation, Verdict, VerificationReport};
