//! Weighted eigenproblem `L u = lambda a u` with hinged ends, the Rayleigh
//! quotient, and the hypothesis checks that guarantee a positive solution.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use serde::Serialize;
use thiserror::Error;

use crate::operators::{assemble_operator, sup_norm, OperatorError, OperatorFactorization};
use crate::problem::ProblemSpec;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SpectraError {
    #[error("weight a must be nonnegative and not identically zero ({0})")]
    InvalidWeight(String),
    #[error("eigen-iteration for mode {index} did not converge in {iterations} iterations (last change {change:e})")]
    NoConvergence {
        index: usize,
        iterations: usize,
        change: f64,
    },
    #[error("principal eigenfunction has nonpositive entry {value:e} at node {node}")]
    NonPositiveEigenfunction { node: usize, value: f64 },
    #[error("deflation collapsed while computing mode {index}")]
    DegenerateDeflation { index: usize },
    #[error("at most {max} higher modes are supported, requested {requested}")]
    TooManyModes { requested: usize, max: usize },
    #[error("Rayleigh quotient denominator vanishes")]
    ZeroDenominator,
    #[error(transparent)]
    Operator(#[from] OperatorError),
}

pub type Result<T, E = SpectraError> = std::result::Result<T, E>;

/// Entries with magnitude at or below this are treated as zeros when
/// counting sign changes.
const NODAL_ZERO: f64 = 1e-10;

pub const MAX_HIGHER_MODES: usize = 5;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EigenPair {
    /// 1-based mode index.
    pub index: usize,
    pub lambda: f64,
    /// Sup-norm 1, positive maximum.
    #[serde(skip)]
    pub phi: DVector<f64>,
    pub nodal_count: usize,
    /// `||phi - lambda L_h^{-1}(a ⊙ phi)||_inf` with `||phi||_inf = 1`.
    pub residual: f64,
}

impl EigenPair {
    /// `||L_h phi - lambda a ⊙ phi||_inf / ||L_h phi||_inf`. `L_h` amplifies
    /// the rounding in `phi` by `h^-4`, so at `h = 1/200` this sits near
    /// `1e-8` however well the iteration converged.
    pub fn forward_residual(
        &self,
        factorization: &OperatorFactorization,
        a: &DVector<f64>,
    ) -> Result<f64> {
        forward_residual(factorization, a, &self.phi, self.lambda)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EigenOptions {
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for EigenOptions {
    fn default() -> Self {
        Self {
            tol: 1e-11,
            max_iter: 5000,
        }
    }
}

fn validate_weight(factorization: &OperatorFactorization, a: &DVector<f64>) -> Result<()> {
    if a.len() != factorization.n() {
        return Err(OperatorError::DimensionMismatch {
            expected: factorization.n(),
            found: a.len(),
        }
        .into());
    }
    if let Some(v) = a.iter().find(|v| !(**v >= 0.0)) {
        return Err(SpectraError::InvalidWeight(format!("entry {v}")));
    }
    if a.max() <= 0.0 {
        return Err(SpectraError::InvalidWeight("a ≡ 0".into()));
    }
    Ok(())
}

/// Number of strict sign changes between consecutive non-negligible entries.
pub fn nodal_count(v: &DVector<f64>) -> usize {
    let scale = sup_norm(v);
    let mut last = 0.0_f64;
    let mut count = 0;
    for &x in v.iter() {
        if x.abs() <= NODAL_ZERO * scale {
            continue;
        }
        if last != 0.0 && last.signum() != x.signum() {
            count += 1;
        }
        last = x;
    }
    count
}

/// Scales `v` to sup-norm 1 with its largest entry positive.
fn normalize_positive_max(v: &DVector<f64>) -> DVector<f64> {
    let (max, min) = (v.max(), v.min());
    let scale = if max >= -min { max } else { min };
    v / scale
}

/// Scales `v` to sup-norm 1, signed to align with `reference`.
fn normalize_aligned(v: &DVector<f64>, reference: &DVector<f64>) -> DVector<f64> {
    let s = sup_norm(v);
    if v.dot(reference) < 0.0 {
        v / -s
    } else {
        v / s
    }
}

/// `<L u, u> / <a u, u>` with the numerator summed by parts:
/// `||A u||² + sum p_j (A u)_j u_j`, the discrete `∫ u''² - ∫ p u'' u`.
pub fn rayleigh_quotient(u: &DVector<f64>, p: &DVector<f64>, a: &DVector<f64>) -> Result<f64> {
    let n = u.len();
    if p.len() != n || a.len() != n {
        return Err(OperatorError::DimensionMismatch {
            expected: n,
            found: if p.len() != n { p.len() } else { a.len() },
        }
        .into());
    }
    let h = 1.0 / (n + 1) as f64;
    let inv_h2 = 1.0 / (h * h);
    let au = DVector::from_fn(n, |j, _| {
        let left = if j > 0 { u[j - 1] } else { 0.0 };
        let right = if j + 1 < n { u[j + 1] } else { 0.0 };
        (2.0 * u[j] - left - right) * inv_h2
    });
    let num = h * (au.norm_squared() + (0..n).map(|j| p[j] * au[j] * u[j]).sum::<f64>());
    let den = h * (0..n).map(|j| a[j] * u[j] * u[j]).sum::<f64>();
    if !(den > 0.0) {
        return Err(SpectraError::ZeroDenominator);
    }
    Ok(num / den)
}

/// Deflation against known eigenvectors in the `a`-weighted pairing:
/// `P v = v - Phi G^{-1} Phi^T (a ⊙ v)`, `G = Phi^T diag(a) Phi`.
struct Deflation {
    basis: DMatrix<f64>,
    weighted: DMatrix<f64>,
    gram_inv: DMatrix<f64>,
    mus: Vec<f64>,
}

impl Deflation {
    fn new(known: &[EigenPair], a: &DVector<f64>, index: usize) -> Result<Self> {
        let n = a.len();
        let k = known.len();
        let basis = DMatrix::from_fn(n, k, |i, j| known[j].phi[i]);
        let weighted = DMatrix::from_fn(n, k, |i, j| a[i] * known[j].phi[i]);
        let gram = weighted.transpose() * &basis;
        let gram_inv = gram
            .try_inverse()
            .ok_or(SpectraError::DegenerateDeflation { index })?;
        Ok(Self {
            basis,
            weighted,
            gram_inv,
            mus: known.iter().map(|p| 1.0 / p.lambda).collect(),
        })
    }

    fn coefficients(&self, v: &DVector<f64>) -> DVector<f64> {
        &self.gram_inv * (self.weighted.transpose() * v)
    }

    fn project(&self, v: &DVector<f64>) -> DVector<f64> {
        v - &self.basis * self.coefficients(v)
    }
}

fn iterate_mode(
    factorization: &OperatorFactorization,
    a: &DVector<f64>,
    index: usize,
    start: DVector<f64>,
    deflation: Option<&Deflation>,
    options: EigenOptions,
) -> Result<EigenPair> {
    let apply_map = |v: &DVector<f64>| -> Result<DVector<f64>> {
        let w = factorization.solve(&a.component_mul(v))?;
        Ok(match deflation {
            Some(d) => d.project(&w),
            None => w,
        })
    };

    let mut v = match deflation {
        Some(d) => d.project(&start),
        None => start,
    };
    let start_norm = sup_norm(&v);
    if !(start_norm > 0.0) {
        return Err(SpectraError::DegenerateDeflation { index });
    }
    v /= start_norm;
    let mut lambda = f64::NAN;
    let mut change = f64::INFINITY;
    let mut step = f64::INFINITY;
    let mut converged = false;

    for _ in 0..options.max_iter {
        let w = apply_map(&v)?;
        if !(sup_norm(&w) > 1e-14 * factorization.inv_norm() * a.max()) {
            return Err(SpectraError::DegenerateDeflation { index });
        }
        // mu = <v, a w> / <v, a v> on the current iterate.
        let mu = v.dot(&a.component_mul(&w)) / v.dot(&a.component_mul(&v));
        let next = normalize_aligned(&w, &v);
        step = sup_norm(&(&next - &v));
        let new_lambda = 1.0 / mu;
        change = ((new_lambda - lambda) / new_lambda).abs();
        lambda = new_lambda;
        v = next;
        if change < options.tol && step < options.tol {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(SpectraError::NoConvergence {
            index,
            iterations: options.max_iter,
            change: change.max(step),
        });
    }

    // Undo the deflation: the fixed point is P psi; psi = v + sum c_i phi_i
    // with c_i = beta_i / (mu - mu_i), where M v - mu v = Phi beta.
    let mut phi = v;
    if let Some(d) = deflation {
        let mu = 1.0 / lambda;
        let mv = factorization.solve(&a.component_mul(&phi))?;
        let beta = d.coefficients(&(&mv - &phi * mu));
        for (i, mu_i) in d.mus.iter().enumerate() {
            let c = beta[i] / (mu - mu_i);
            phi += d.basis.column(i) * c;
        }
    }
    let phi = normalize_positive_max(&phi);
    let lambda = rayleigh_quotient(&phi, factorization.p(), a)?;
    let residual = inverse_residual(factorization, a, &phi, lambda)?;
    Ok(EigenPair {
        index,
        lambda,
        nodal_count: nodal_count(&phi),
        phi,
        residual,
    })
}

fn forward_residual(
    factorization: &OperatorFactorization,
    a: &DVector<f64>,
    phi: &DVector<f64>,
    lambda: f64,
) -> Result<f64> {
    let lphi = factorization.apply_factored(phi)?;
    let r = &lphi - a.component_mul(phi) * lambda;
    Ok(sup_norm(&r) / sup_norm(&lphi))
}

fn inverse_residual(
    factorization: &OperatorFactorization,
    a: &DVector<f64>,
    phi: &DVector<f64>,
    lambda: f64,
) -> Result<f64> {
    let back = factorization.solve(&a.component_mul(phi))? * lambda;
    Ok(sup_norm(&(phi - back)) / sup_norm(phi))
}

/// Inverse iteration on `v ↦ L_h^{-1}(a ⊙ v)` from `sin(pi x)`.
pub fn principal_eigenpair(
    factorization: &OperatorFactorization,
    a: &DVector<f64>,
    tol: f64,
    max_iter: usize,
) -> Result<EigenPair> {
    validate_weight(factorization, a)?;
    let start = factorization.grid().sine_mode(1);
    let pair = iterate_mode(
        factorization,
        a,
        1,
        start,
        None,
        EigenOptions { tol, max_iter },
    )?;
    if let Some((node, &value)) = pair.phi.iter().enumerate().find(|(_, v)| **v <= 0.0) {
        return Err(SpectraError::NonPositiveEigenfunction { node, value });
    }
    Ok(pair)
}

/// Modes `2..=count+1` by deflated inverse iteration against the pairs in
/// `known` (which must start with the principal pair).
pub fn higher_eigenpairs(
    factorization: &OperatorFactorization,
    a: &DVector<f64>,
    principal: &EigenPair,
    count: usize,
    options: EigenOptions,
) -> Result<Vec<EigenPair>> {
    if count > MAX_HIGHER_MODES {
        return Err(SpectraError::TooManyModes {
            requested: count,
            max: MAX_HIGHER_MODES,
        });
    }
    validate_weight(factorization, a)?;
    let grid = factorization.grid();
    let mut known = vec![principal.clone()];
    let mut out = Vec::with_capacity(count);
    for index in 2..=count + 1 {
        let deflation = Deflation::new(&known, a, index)?;
        // Sampled sine of the target mode, nudged so every mode is present.
        let bump = grid.nodes().map(|x| 1e-2 * x * x * (1.0 - x));
        let start = grid.sine_mode(index) + bump;
        let pair = iterate_mode(factorization, a, index, start, Some(&deflation), options)?;
        known.push(pair.clone());
        out.push(pair);
    }
    Ok(out)
}

/// Default sliding-window length for the "not identically zero on any
/// subinterval" test.
pub fn default_window(n: usize) -> usize {
    3.max(n / 20)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HypothesisOptions {
    pub window: Option<usize>,
    pub strip_delta: f64,
    pub eigen: EigenOptions,
}

impl Default for HypothesisOptions {
    fn default() -> Self {
        Self {
            window: None,
            strip_delta: 0.05,
            eigen: EigenOptions::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct H1Verdict {
    pub holds: bool,
    pub min_p_plus_pi2: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct H2Verdict {
    pub holds: bool,
    pub max_a: f64,
    pub min_window_max: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct H3Verdict {
    pub holds: bool,
    pub lhs: f64,
    pub rhs: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct K1Verdict {
    pub holds: bool,
    pub min_f: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct K2Verdict {
    pub holds: bool,
    pub strip_min: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HypothesisReport {
    pub h1: H1Verdict,
    pub h2: H2Verdict,
    pub h3: H3Verdict,
    pub k1: K1Verdict,
    pub k2_sufficient: K2Verdict,
    /// `None` when the operator or the eigen-iteration fails.
    pub lambda1: Option<f64>,
    pub theorem_applies: bool,
}

/// Checks the sufficient conditions for a positive solution on the sampled
/// data. Always produces a report.
pub fn check_hypotheses(spec: &ProblemSpec, options: HypothesisOptions) -> HypothesisReport {
    let grid = spec.grid();
    let n = grid.n();
    let p = spec.p().samples();
    let a = spec.a().samples();
    let f = spec.f().samples();
    let x = grid.nodes();

    let min_p = p.min();
    let h1 = H1Verdict {
        holds: min_p + PI * PI > 0.0,
        min_p_plus_pi2: min_p + PI * PI,
    };

    let window = options
        .window
        .unwrap_or_else(|| default_window(n))
        .clamp(1, n);
    let min_window_max = (0..=n - window)
        .map(|s| a.rows(s, window).max())
        .fold(f64::INFINITY, f64::min);
    let h2 = H2Verdict {
        holds: a.min() >= 0.0 && min_window_max > 1e-12,
        max_a: a.max(),
        min_window_max,
    };

    let sin2 = grid.sine_mode(1).map(|s| s * s);
    let lhs = PI.powi(4) + 2.0 * PI * PI * grid.integrate(&p.component_mul(&sin2));
    let rhs = 2.0 * grid.integrate(&a.component_mul(&sin2));
    let h3 = H3Verdict {
        holds: lhs < rhs,
        lhs,
        rhs,
    };

    let min_f = f.min();
    let k1 = K1Verdict {
        holds: min_f >= 0.0,
        min_f,
    };

    let delta = options.strip_delta;
    let mut strip_min = f64::INFINITY;
    for j in 0..n {
        for i in 0..n {
            if (x[i] - x[j]).abs() <= delta {
                strip_min = strip_min.min(f[(i, j)]);
            }
        }
    }
    let k2_sufficient = K2Verdict {
        holds: strip_min >= delta,
        strip_min,
    };

    let lambda1 = assemble_operator(spec)
        .ok()
        .and_then(|op| principal_eigenpair(&op, a, options.eigen.tol, options.eigen.max_iter).ok())
        .map(|pair| pair.lambda);

    HypothesisReport {
        theorem_applies: h1.holds && h2.holds && h3.holds && k1.holds,
        h1,
        h2,
        h3,
        k1,
        k2_sufficient,
        lambda1,
    }
}
