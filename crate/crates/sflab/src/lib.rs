//! A numerical laboratory for the index theory of operator paths.
//!
//! Given a path `A(t) = A_- + B(t)` of real symmetric matrices with
//! asymptotes `A_-` and `A_+`, this crate computes, and cross-checks against
//! one another,
//!
//! * the spectral flow of the path (certified subdivision algorithm),
//! * the Krein spectral shift function `xi(.; A_+, A_-)` by eigenvalue
//!   counting, by the invariance principle, and from the boundary values of
//!   perturbation determinants,
//! * the Fredholm index of the discretized operator `D_A = d/dt + A(t)`,
//! * the Abel transform relating `xi(.; A_+, A_-)` to the spectral shift
//!   function of the pair `(D_A D_A^*, D_A^* D_A)`,
//! * double operator integrals realizing `g(A_+) - g(A_-)` through a
//!   generalized Schur multiplier, and
//! * zeta-regularized, heat-kernel, and closed-form eta invariants.
//!
//! All of these quantities coincide (suitably evaluated at zero) for paths
//! with invertible asymptotes, and the `acceptance` integration test drives
//! that chain of equalities end to end.  The accompanying mdbook under
//! `book/` walks through the theory behind each module; its code listings
//! compile and run as doctests of this crate (see [`book`]).
//!
//! Quick taste — the `tanh2` model path `A(t) = tanh(t) * I_2`:
//!
//! ```
//! use sflab::oppath::scenario;
//! use sflab::flow::{spectral_flow, FlowConfig};
//!
//! let path = scenario::tanh2();
//! let (flow, _cert) = spectral_flow(&path, &FlowConfig::default()).unwrap();
//! assert_eq!(flow, 2);
//! ```

pub mod book;
pub mod cli;
pub mod dirac;
pub mod doi;
pub mod flow;
pub mod matlin;
pub mod oppath;
pub mod quad;
pub mod sampling;
pub mod ssf;
pub mod transforms;

pub use matlin::{CMatrix, MatlinError, SymOp};
pub use oppath::{HypothesisReport, OperatorPath, PathError};
pub use ssf::{SsfError, StepFunction};
