//! Shared fixtures for the criterion benches.

use nlbvp_core::{CoefficientKind, Grid, KernelKind, ProblemSpec};

/// `p = 0, a = 100, f = 1, rho = 1, sigma = 2` on `n` interior nodes.
pub fn constant_benchmark(n: usize) -> ProblemSpec {
    ProblemSpec::new(
        Grid::new(n).expect("n >= 3"),
        CoefficientKind::Constant { v: 0.0 },
        CoefficientKind::Constant { v: 100.0 },
        KernelKind::Constant { c: 1.0 },
        1.0,
        2.0,
    )
    .expect("valid benchmark")
}

/// Variable coefficients with an exponentially decaying kernel.
pub fn variable_benchmark(n: usize) -> ProblemSpec {
    ProblemSpec::new(
        Grid::new(n).expect("n >= 3"),
        CoefficientKind::Cosine {
            c0: 1.0,
            c1: 0.5,
            k: 2.0,
        },
        CoefficientKind::Cosine {
            c0: 110.0,
            c1: 10.0,
            k: 2.0,
        },
        KernelKind::ExpDecay { c: 1.0, alpha: 2.0 },
        1.0,
        2.0,
    )
    .expect("valid benchmark")
}
