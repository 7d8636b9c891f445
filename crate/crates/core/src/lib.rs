//! Positive solutions of nonlocal fourth-order boundary value problems of
//! extended Fisher-Kolmogorov / Swift-Hohenberg type,
//!
//! ```text
//! u'''' - p(x) u'' - a(x) u + u^rho ∫ f(x, y) u^sigma(y) dy = 0,   x in (0, 1),
//! u(0) = u(1) = u''(0) = u''(1) = 0,
//! ```
//!
//! found by following the branch of positive solutions of
//! `L u = lambda a u - lambda u^rho theta_u` from the principal eigenvalue
//! `(lambda_1, 0)` until it crosses `lambda = 1`.

// `!(x > 0.0)` style guards also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod continuation;
pub mod nonlocal;
pub mod operators;
pub mod problem;
pub mod spectra;

pub use continuation::{
    Branch, BranchPoint, BranchStatus, Constraint, ContinuationError, LinearConstraint,
    NewtonOptions, NonlocalProblem, TraceOptions,
};
pub use nonlocal::{NonlocalError, NonlocalEvaluator};
pub use operators::{
    InversePositivity, OperatorError, OperatorFactorization, SecondDifferenceMatrix,
};
pub use problem::{
    build_problem, CoefficientKind, Grid, KernelKind, ProblemConfig, ProblemError, ProblemSpec,
};
pub use spectra::{
    check_hypotheses, higher_eigenpairs, principal_eigenpair, rayleigh_quotient, EigenOptions,
    EigenPair, HypothesisOptions, HypothesisReport, SpectraError,
};
