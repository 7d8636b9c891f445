//! Branch of positive solutions of `L u = lambda a u - lambda u^rho theta_u`
//! emanating from `(lambda_1, 0)`, traced by pseudo-arclength continuation
//! until it crosses `lambda = 1`.
//!
//! The Newton corrector works on the equivalent fixed-point form
//! `G(lambda, u) = u - lambda L_h^{-1}(a ⊙ u - u^rho ⊙ theta_u)`. It has the
//! same zeros and the same Newton iterates as `F = L_h G`, but its Jacobian
//! is `O(1)` instead of `O(h^-4)`, so residuals can be certified near
//! machine precision. Every reported `residual_norm` is `||G||_inf`.

use std::fmt;

use nalgebra::{DMatrix, DVector};
use serde::Serialize;
use thiserror::Error;

use crate::nonlocal::{NonlocalError, NonlocalEvaluator};
use crate::operators::{assemble_operator, sup_norm, OperatorError, OperatorFactorization};
use crate::problem::ProblemSpec;
use crate::spectra::{principal_eigenpair, EigenOptions, EigenPair, SpectraError};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ContinuationError {
    #[error(transparent)]
    Operator(#[from] OperatorError),
    #[error(transparent)]
    Nonlocal(#[from] NonlocalError),
    #[error(transparent)]
    Spectra(#[from] SpectraError),
    #[error("Newton corrector diverged: {0}")]
    NewtonDiverged(String),
    #[error("positivity lost: min u = {min_value:e}")]
    PositivityLost { min_value: f64 },
    #[error("no usable bracket: {0}")]
    NoBracket(String),
}

pub type Result<T, E = ContinuationError> = std::result::Result<T, E>;

/// One accepted point `(lambda, u)` with diagnostics.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BranchPoint {
    pub lambda: f64,
    #[serde(skip)]
    pub u: DVector<f64>,
    pub sup_norm: f64,
    pub min_value: f64,
    /// `||G(lambda, u)||_inf`.
    pub residual_norm: f64,
    pub arclength: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum BranchStatus {
    #[serde(rename = "crossed_lambda_1")]
    CrossedLambda1,
    ReachedLambdaMax,
    ReachedMaxSteps,
    FailedPositivity,
    NewtonFailure,
}

impl BranchStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::CrossedLambda1 => "crossed_lambda_1",
            Self::ReachedLambdaMax => "reached_lambda_max",
            Self::ReachedMaxSteps => "reached_max_steps",
            Self::FailedPositivity => "failed_positivity",
            Self::NewtonFailure => "newton_failure",
        }
    }

    pub fn is_failure(self) -> bool {
        matches!(self, Self::FailedPositivity | Self::NewtonFailure)
    }
}

impl fmt::Display for BranchStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// The computed piece of the solution continuum.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Branch {
    pub points: Vec<BranchPoint>,
    pub start_lambda: f64,
    pub epsilon: f64,
    pub status: BranchStatus,
    /// Why tracing stopped; differs from `status` only after a crossing.
    pub ended_by: BranchStatus,
    /// Index into `points` of the fixed-`lambda = 1` solution.
    pub crossing_index: Option<usize>,
    /// Sign changes of the `lambda` increments along the branch.
    pub direction_reversals: usize,
    /// Smallest `||u||_inf` after the start point (collapse monitor).
    pub min_sup_norm_after_start: Option<f64>,
    pub message: Option<String>,
}

impl Branch {
    pub fn crossing(&self) -> Option<&BranchPoint> {
        self.crossing_index.map(|i| &self.points[i])
    }
}

/// Linear side condition `c_lambda lambda + <c_u, u> = rhs`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearConstraint {
    pub c_lambda: f64,
    pub c_u: DVector<f64>,
    pub rhs: f64,
}

impl LinearConstraint {
    pub fn value(&self, lambda: f64, u: &DVector<f64>) -> f64 {
        self.c_lambda * lambda + self.c_u.dot(u) - self.rhs
    }

    fn is_degenerate(&self) -> bool {
        self.c_lambda == 0.0 && self.c_u.iter().all(|&c| c == 0.0)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Constraint {
    FixedLambda,
    Linear(LinearConstraint),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NewtonOptions {
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for NewtonOptions {
    fn default() -> Self {
        Self {
            tol: 1e-11,
            max_iter: 25,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Correction {
    pub lambda: f64,
    pub u: DVector<f64>,
    pub iterations: usize,
    pub residual_norm: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceOptions {
    pub ds: f64,
    pub max_steps: usize,
    pub lambda_max: f64,
    pub newton_tol: f64,
    pub newton_max_iter: usize,
    pub epsilon: f64,
    pub ds_min: f64,
    /// `ds` never exceeds `ds * ds_max_factor`.
    pub ds_max_factor: f64,
    pub ds_grow: f64,
    /// A step is easy when the corrector needs at most this many iterations.
    pub easy_iterations: usize,
}

impl Default for TraceOptions {
    fn default() -> Self {
        Self {
            ds: 0.1,
            max_steps: 500,
            lambda_max: 2.0,
            newton_tol: 1e-11,
            newton_max_iter: 12,
            epsilon: 1e-2,
            ds_min: 1e-6,
            ds_max_factor: 10.0,
            ds_grow: 1.3,
            easy_iterations: 4,
        }
    }
}

/// A problem instance with its assembled operator and nonlocal evaluator.
#[derive(Debug, Clone)]
pub struct NonlocalProblem {
    spec: ProblemSpec,
    operator: OperatorFactorization,
    evaluator: NonlocalEvaluator,
}

impl NonlocalProblem {
    pub fn new(spec: ProblemSpec) -> Result<Self> {
        let operator = assemble_operator(&spec)?;
        let evaluator = NonlocalEvaluator::new(&spec);
        Ok(Self {
            spec,
            operator,
            evaluator,
        })
    }

    pub fn spec(&self) -> &ProblemSpec {
        &self.spec
    }

    pub fn operator(&self) -> &OperatorFactorization {
        &self.operator
    }

    pub fn evaluator(&self) -> &NonlocalEvaluator {
        &self.evaluator
    }

    pub fn n(&self) -> usize {
        self.spec.n()
    }

    fn a(&self) -> &DVector<f64> {
        self.spec.a().samples()
    }

    pub fn principal_eigenpair(&self, options: EigenOptions) -> Result<EigenPair> {
        Ok(principal_eigenpair(
            &self.operator,
            self.a(),
            options.tol,
            options.max_iter,
        )?)
    }

    /// `F(lambda, u) = L_h u - lambda a ⊙ u + lambda u^rho ⊙ theta_u`.
    pub fn residual(&self, lambda: f64, u: &DVector<f64>) -> Result<DVector<f64>> {
        let lu = self.operator.apply_factored(u)?;
        let source = self.source(u)?;
        Ok(lu - source * lambda)
    }

    /// `a ⊙ u - u^rho ⊙ theta_u`.
    fn source(&self, u: &DVector<f64>) -> Result<DVector<f64>> {
        let nonlinear = self.evaluator.nonlinearity(u)?;
        Ok(self.a().component_mul(u) - nonlinear)
    }

    /// `G(lambda, u) = u - lambda L_h^{-1}(a ⊙ u - u^rho ⊙ theta_u)`.
    pub fn fixed_point_residual(&self, lambda: f64, u: &DVector<f64>) -> Result<DVector<f64>> {
        let image = self.operator.solve(&self.source(u)?)?;
        Ok(u - image * lambda)
    }

    /// `dG/du = I - lambda L_h^{-1}(diag(a) - D)` with `D` the derivative of
    /// the nonlinearity.
    pub fn jacobian_u(&self, lambda: f64, u: &DVector<f64>) -> Result<DMatrix<f64>> {
        let mut m = -self.evaluator.theta_jacobian(u)?;
        for i in 0..self.n() {
            m[(i, i)] += self.a()[i];
        }
        let inv = self.operator.solve_matrix(&m)?;
        Ok(DMatrix::identity(self.n(), self.n()) - inv * lambda)
    }

    /// `dG/dlambda = -L_h^{-1}(a ⊙ u - u^rho ⊙ theta_u)`.
    pub fn jacobian_lambda(&self, u: &DVector<f64>) -> Result<DVector<f64>> {
        Ok(-self.operator.solve(&self.source(u)?)?)
    }

    /// Residual of the bordered system `[G; constraint]`, length `n + 1`.
    pub fn extended_residual(
        &self,
        lambda: f64,
        u: &DVector<f64>,
        constraint: &LinearConstraint,
    ) -> Result<DVector<f64>> {
        let g = self.fixed_point_residual(lambda, u)?;
        let n = self.n();
        Ok(DVector::from_fn(n + 1, |i, _| {
            if i < n {
                g[i]
            } else {
                constraint.value(lambda, u)
            }
        }))
    }

    /// Bordered Jacobian `[[G_u, G_lambda], [c_u^T, c_lambda]]` in the
    /// unknown ordering `(u, lambda)`.
    pub fn extended_jacobian(
        &self,
        lambda: f64,
        u: &DVector<f64>,
        constraint: &LinearConstraint,
    ) -> Result<DMatrix<f64>> {
        let n = self.n();
        let ju = self.jacobian_u(lambda, u)?;
        let jl = self.jacobian_lambda(u)?;
        let mut j = DMatrix::zeros(n + 1, n + 1);
        j.view_mut((0, 0), (n, n)).copy_from(&ju);
        j.view_mut((0, n), (n, 1)).copy_from(&jl);
        for k in 0..n {
            j[(n, k)] = constraint.c_u[k];
        }
        j[(n, n)] = constraint.c_lambda;
        Ok(j)
    }

    /// Newton iteration on `G = 0`, either at fixed `lambda` or bordered by
    /// a linear constraint with `lambda` free.
    pub fn newton_correct(
        &self,
        lambda0: f64,
        u0: &DVector<f64>,
        constraint: &Constraint,
        options: NewtonOptions,
    ) -> Result<Correction> {
        let n = self.n();
        if u0.len() != n {
            return Err(OperatorError::DimensionMismatch {
                expected: n,
                found: u0.len(),
            }
            .into());
        }
        if let Constraint::Linear(c) = constraint {
            if c.is_degenerate() {
                return Err(ContinuationError::NewtonDiverged(
                    "degenerate constraint (zero tangent or pinning direction)".into(),
                ));
            }
        }
        let needs_positive = self.spec.sigma() < 1.0;
        let mut lambda = lambda0;
        let mut u = u0.clone();
        let mut first_norm = None;

        for iteration in 0..=options.max_iter {
            if needs_positive {
                let min_value = u.min();
                if min_value <= 0.0 {
                    return Err(ContinuationError::PositivityLost { min_value });
                }
            }
            let g = self.fixed_point_residual(lambda, &u)?;
            let g_norm = sup_norm(&g);
            let c_value = match constraint {
                Constraint::FixedLambda => 0.0,
                Constraint::Linear(c) => c.value(lambda, &u),
            };
            if !g_norm.is_finite() || !c_value.is_finite() || !lambda.is_finite() {
                return Err(ContinuationError::NewtonDiverged(format!(
                    "non-finite iterate at iteration {iteration}"
                )));
            }
            if g_norm <= options.tol && c_value.abs() <= options.tol {
                return Ok(Correction {
                    lambda,
                    u,
                    iterations: iteration,
                    residual_norm: g_norm,
                });
            }
            let first = *first_norm.get_or_insert(g_norm.max(c_value.abs()));
            if g_norm.max(c_value.abs()) > 1e6 * first.max(1.0) {
                return Err(ContinuationError::NewtonDiverged(format!(
                    "residual blew up to {g_norm:e} at iteration {iteration}"
                )));
            }
            if iteration == options.max_iter {
                break;
            }

            match constraint {
                Constraint::FixedLambda => {
                    let j = self.jacobian_u(lambda, &u)?;
                    let delta = j.lu().solve(&(-&g)).ok_or_else(|| {
                        ContinuationError::NewtonDiverged("singular Jacobian".into())
                    })?;
                    u += delta;
                }
                Constraint::Linear(c) => {
                    let j = self.extended_jacobian(lambda, &u, c)?;
                    let rhs = DVector::from_fn(n + 1, |i, _| if i < n { -g[i] } else { -c_value });
                    let delta = j.lu().solve(&rhs).ok_or_else(|| {
                        ContinuationError::NewtonDiverged("singular bordered Jacobian".into())
                    })?;
                    if delta.iter().any(|d| !d.is_finite()) {
                        return Err(ContinuationError::NewtonDiverged(
                            "singular bordered Jacobian".into(),
                        ));
                    }
                    u += delta.rows(0, n);
                    lambda += delta[n];
                }
            }
        }
        Err(ContinuationError::NewtonDiverged(format!(
            "no convergence to {:e} in {} iterations",
            options.tol, options.max_iter
        )))
    }

    /// Packages `(lambda, u)` with its diagnostics.
    pub fn point(&self, lambda: f64, u: DVector<f64>, arclength: f64) -> Result<BranchPoint> {
        let residual_norm = sup_norm(&self.fixed_point_residual(lambda, &u)?);
        Ok(BranchPoint {
            lambda,
            sup_norm: sup_norm(&u),
            min_value: u.min(),
            residual_norm,
            arclength,
            u,
        })
    }

    /// First nontrivial point: `lambda` free, amplitude pinned by
    /// `<phi_1, u>_h = epsilon <phi_1, phi_1>_h`, from `(lambda_1, epsilon phi_1)`.
    pub fn branch_start(
        &self,
        eigenpair: &EigenPair,
        epsilon: f64,
        options: NewtonOptions,
    ) -> Result<BranchPoint> {
        if !(epsilon > 0.0) {
            return Err(ContinuationError::NewtonDiverged(format!(
                "degenerate pinning: epsilon = {epsilon} returns the trivial solution"
            )));
        }
        let h = self.spec.grid().h();
        let phi = &eigenpair.phi;
        let pin = LinearConstraint {
            c_lambda: 0.0,
            c_u: phi * h,
            rhs: epsilon * h * phi.norm_squared(),
        };
        let guess = phi * epsilon;
        let corr =
            self.newton_correct(eigenpair.lambda, &guess, &Constraint::Linear(pin), options)?;
        let point = self.point(corr.lambda, corr.u, 0.0)?;
        if point.min_value <= 0.0 {
            return Err(ContinuationError::PositivityLost {
                min_value: point.min_value,
            });
        }
        Ok(point)
    }

    /// Tangent at the start point in the direction of growing amplitude.
    fn start_tangent(
        &self,
        start: &BranchPoint,
        phi: &DVector<f64>,
    ) -> Result<(f64, DVector<f64>)> {
        let n = self.n();
        let pin = LinearConstraint {
            c_lambda: 0.0,
            c_u: phi * self.spec.grid().h(),
            rhs: 0.0,
        };
        let j = self.extended_jacobian(start.lambda, &start.u, &pin)?;
        let mut rhs = DVector::zeros(n + 1);
        rhs[n] = 1.0;
        let t = j
            .lu()
            .solve(&rhs)
            .ok_or_else(|| ContinuationError::NewtonDiverged("singular start tangent".into()))?;
        let tu = t.rows(0, n).into_owned();
        Ok(normalize_tangent(t[n], tu))
    }

    /// Pseudo-arclength continuation from the branch start. Failures end the
    /// trace and are reported through `Branch::status`.
    pub fn trace_branch(&self, eigenpair: &EigenPair, options: &TraceOptions) -> Branch {
        let mut branch = Branch {
            points: Vec::new(),
            start_lambda: eigenpair.lambda,
            epsilon: options.epsilon,
            status: BranchStatus::NewtonFailure,
            ended_by: BranchStatus::NewtonFailure,
            crossing_index: None,
            direction_reversals: 0,
            min_sup_norm_after_start: None,
            message: None,
        };
        let newton = NewtonOptions {
            tol: options.newton_tol,
            max_iter: options.newton_max_iter.max(1),
        };
        let start_newton = NewtonOptions {
            max_iter: newton.max_iter.max(25),
            ..newton
        };
        let start = match self.branch_start(eigenpair, options.epsilon, start_newton) {
            Ok(p) => p,
            Err(e) => {
                branch.status = failure_status(&e);
                branch.ended_by = branch.status;
                branch.message = Some(format!("branch start: {e}"));
                return branch;
            }
        };
        let (mut t_lambda, mut t_u) = match self.start_tangent(&start, &eigenpair.phi) {
            Ok(t) => t,
            Err(e) => {
                branch.points.push(start);
                branch.message = Some(format!("start tangent: {e}"));
                return branch;
            }
        };
        branch.points.push(start);

        let n = self.n() as f64;
        let ds_max = options.ds * options.ds_max_factor;
        let mut ds = options.ds;
        let mut easy = 0usize;
        let mut last_dlambda = 0.0_f64;
        let mut prev = branch.points[0].clone();

        let ended_by = 'trace: {
            if prev.lambda >= options.lambda_max {
                break 'trace BranchStatus::ReachedLambdaMax;
            }
            for _ in 0..options.max_steps {
                let accepted = loop {
                    let constraint = LinearConstraint {
                        c_lambda: t_lambda,
                        c_u: &t_u / n,
                        rhs: ds + t_lambda * prev.lambda + t_u.dot(&prev.u) / n,
                    };
                    let guess_lambda = prev.lambda + ds * t_lambda;
                    let guess_u = &prev.u + &t_u * ds;
                    let failure = match self.newton_correct(
                        guess_lambda,
                        &guess_u,
                        &Constraint::Linear(constraint),
                        newton,
                    ) {
                        Ok(c) if c.u.min() > 0.0 => break c,
                        Ok(c) => ContinuationError::PositivityLost {
                            min_value: c.u.min(),
                        },
                        Err(e) => e,
                    };
                    ds *= 0.5;
                    easy = 0;
                    if ds < options.ds_min {
                        branch.message = Some(format!(
                            "step size fell below {:e} at lambda = {}: {failure}",
                            options.ds_min, prev.lambda
                        ));
                        break 'trace failure_status(&failure);
                    }
                };

                let dlambda = accepted.lambda - prev.lambda;
                let du = &accepted.u - &prev.u;
                let dist = weighted_norm(dlambda, &du);
                if !(dist > 0.0) {
                    branch.message = Some("corrector returned the previous point".into());
                    break 'trace BranchStatus::NewtonFailure;
                }
                if last_dlambda != 0.0
                    && dlambda != 0.0
                    && last_dlambda.signum() != dlambda.signum()
                {
                    branch.direction_reversals += 1;
                }
                if dlambda != 0.0 {
                    last_dlambda = dlambda;
                }
                t_lambda = dlambda / dist;
                t_u = du / dist;

                if accepted.iterations <= options.easy_iterations {
                    easy += 1;
                    if easy >= 2 {
                        ds = (ds * options.ds_grow).min(ds_max);
                        easy = 0;
                    }
                } else {
                    easy = 0;
                }

                let next = match self.point(accepted.lambda, accepted.u, prev.arclength + dist) {
                    Ok(p) => p,
                    Err(e) => {
                        branch.message = Some(e.to_string());
                        break 'trace BranchStatus::NewtonFailure;
                    }
                };

                if branch.crossing_index.is_none()
                    && (prev.lambda - 1.0) * (next.lambda - 1.0) <= 0.0
                    && prev.lambda != next.lambda
                {
                    match self.cross_at(&prev, &next, 1.0, start_newton) {
                        Ok(mut crossing) => {
                            crossing.arclength = prev.arclength
                                + weighted_norm(
                                    crossing.lambda - prev.lambda,
                                    &(&crossing.u - &prev.u),
                                );
                            branch.points.push(crossing);
                            branch.crossing_index = Some(branch.points.len() - 1);
                        }
                        Err(e) => {
                            branch.message = Some(format!("lambda = 1 correction failed: {e}"));
                        }
                    }
                }
                // Arclength runs along the recorded polyline, crossing included.
                let mut next = next;
                if let Some(last) = branch.points.last() {
                    next.arclength = last.arclength
                        + weighted_norm(next.lambda - last.lambda, &(&next.u - &last.u));
                }
                let m = branch.min_sup_norm_after_start.unwrap_or(f64::INFINITY);
                branch.min_sup_norm_after_start = Some(m.min(next.sup_norm));
                branch.points.push(next.clone());
                prev = next;

                if prev.lambda >= options.lambda_max {
                    break 'trace BranchStatus::ReachedLambdaMax;
                }
            }
            BranchStatus::ReachedMaxSteps
        };

        branch.ended_by = ended_by;
        branch.status = if branch.crossing_index.is_some() {
            BranchStatus::CrossedLambda1
        } else {
            ended_by
        };
        branch
    }

    /// Fixed-`lambda` solve from the linear interpolant of two points that
    /// bracket `target`.
    fn cross_at(
        &self,
        left: &BranchPoint,
        right: &BranchPoint,
        target: f64,
        options: NewtonOptions,
    ) -> Result<BranchPoint> {
        let t = (target - left.lambda) / (right.lambda - left.lambda);
        let guess = &left.u + (&right.u - &left.u) * t;
        let corr = self.newton_correct(target, &guess, &Constraint::FixedLambda, options)?;
        let point = self.point(target, corr.u, left.arclength)?;
        if point.min_value <= 0.0 {
            return Err(ContinuationError::PositivityLost {
                min_value: point.min_value,
            });
        }
        Ok(point)
    }

    /// Positive solution at `lambda_target`, corrected from the first pair
    /// of branch points that brackets it.
    pub fn solve_at_lambda(
        &self,
        branch: &Branch,
        lambda_target: f64,
        options: NewtonOptions,
    ) -> Result<BranchPoint> {
        let bracket = branch
            .points
            .windows(2)
            .find(|w| (w[0].lambda - lambda_target) * (w[1].lambda - lambda_target) <= 0.0)
            .ok_or_else(|| {
                ContinuationError::NoBracket(format!(
                    "no traced pair of points brackets lambda = {lambda_target}"
                ))
            })?;
        let (left, right) = (&bracket[0], &bracket[1]);
        let point = if left.lambda == right.lambda {
            self.point(lambda_target, left.u.clone(), left.arclength)?
        } else {
            self.cross_at(left, right, lambda_target, options)?
        };
        let floor = 10.0 * branch.epsilon;
        if point.sup_norm < floor {
            return Err(ContinuationError::NoBracket(format!(
                "solution amplitude {:e} is below the {floor:e} floor next to the bifurcation point",
                point.sup_norm
            )));
        }
        Ok(point)
    }

    /// Fixed-`lambda` solve from an explicit initial guess.
    pub fn solve_from_guess(
        &self,
        lambda: f64,
        u0: &DVector<f64>,
        options: NewtonOptions,
    ) -> Result<BranchPoint> {
        let corr = self.newton_correct(lambda, u0, &Constraint::FixedLambda, options)?;
        self.point(lambda, corr.u, 0.0)
    }
}

fn failure_status(e: &ContinuationError) -> BranchStatus {
    match e {
        ContinuationError::PositivityLost { .. } => BranchStatus::FailedPositivity,
        _ => BranchStatus::NewtonFailure,
    }
}

/// `sqrt(dlambda² + (1/n) sum du_j²)`.
pub fn weighted_norm(dlambda: f64, du: &DVector<f64>) -> f64 {
    (dlambda * dlambda + du.norm_squared() / du.len() as f64).sqrt()
}

fn normalize_tangent(t_lambda: f64, t_u: DVector<f64>) -> (f64, DVector<f64>) {
    let norm = weighted_norm(t_lambda, &t_u);
    (t_lambda / norm, t_u / norm)
}

/// Free-function form of [`NonlocalProblem::residual`].
pub fn residual(problem: &NonlocalProblem, lambda: f64, u: &DVector<f64>) -> Result<DVector<f64>> {
    problem.residual(lambda, u)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problem::{CoefficientKind, Grid, KernelKind};

    fn constant_problem(n: usize, a: f64) -> NonlocalProblem {
        let spec = ProblemSpec::new(
            Grid::new(n).unwrap(),
            CoefficientKind::Constant { v: 0.0 },
            CoefficientKind::Constant { v: a },
            KernelKind::Constant { c: 1.0 },
            1.0,
            2.0,
        )
        .unwrap();
        NonlocalProblem::new(spec).unwrap()
    }

    fn mu1(problem: &NonlocalProblem) -> f64 {
        problem.operator().second_difference().eigenvalue(1)
    }

    #[test]
    fn trivial_line_is_exact() {
        let pr = constant_problem(40, 100.0);
        let z = DVector::zeros(40);
        for lambda in [0.0, 0.5, 3.0] {
            assert_eq!(pr.residual(lambda, &z).unwrap(), z);
            assert_eq!(pr.fixed_point_residual(lambda, &z).unwrap(), z);
        }
    }

    #[test]
    fn closed_form_discrete_solution() {
        let pr = constant_problem(199, 100.0);
        let m = mu1(&pr);
        let amp = (2.0 * (100.0 - m * m)).sqrt();
        let u = pr.spec().grid().sine_mode(1) * amp;
        let g = pr.fixed_point_residual(1.0, &u).unwrap();
        assert!(sup_norm(&g) <= 1e-12, "{}", sup_norm(&g));
        // Raw residual is at the round-off floor of the h^-4 stencil.
        let f = pr.residual(1.0, &u).unwrap();
        let lu = pr.operator().apply_factored(&u).unwrap();
        assert!(sup_norm(&f) <= 1e-7 * sup_norm(&lu), "{}", sup_norm(&f));
    }

    #[test]
    fn small_sine_at_lambda1_is_not_a_solution() {
        let pr = constant_problem(199, 100.0);
        let m = mu1(&pr);
        let lambda1 = m * m / 100.0;
        let u = pr.spec().grid().sine_mode(1);
        // F = lambda1 * theta * u = lambda1 / 2 * sin, maximal at x = 1/2.
        let f = pr.residual(lambda1, &u).unwrap();
        assert!(
            (sup_norm(&f) - lambda1 / 2.0).abs() < 1e-5,
            "{}",
            sup_norm(&f)
        );
    }

    #[test]
    fn fixed_lambda_newton_recovers_exact_solution() {
        let pr = constant_problem(199, 100.0);
        let m = mu1(&pr);
        let amp = (2.0 * (100.0 - m * m)).sqrt();
        let exact = pr.spec().grid().sine_mode(1) * amp;
        let corr = pr
            .newton_correct(
                1.0,
                &(&exact * 1.05),
                &Constraint::FixedLambda,
                NewtonOptions::default(),
            )
            .unwrap();
        assert!(corr.iterations <= 5, "{}", corr.iterations);
        assert!(sup_norm(&(&corr.u - &exact)) <= 1e-10);
    }

    #[test]
    fn zero_guess_stays_trivial() {
        let pr = constant_problem(30, 100.0);
        let corr = pr
            .newton_correct(
                0.7,
                &DVector::zeros(30),
                &Constraint::FixedLambda,
                NewtonOptions::default(),
            )
            .unwrap();
        assert_eq!(corr.iterations, 0);
        assert_eq!(corr.u, DVector::zeros(30));
    }

    #[test]
    fn zero_tangent_constraint_diverges() {
        let pr = constant_problem(30, 100.0);
        let c = LinearConstraint {
            c_lambda: 0.0,
            c_u: DVector::zeros(30),
            rhs: 0.1,
        };
        let err = pr
            .newton_correct(
                1.0,
                &DVector::from_element(30, 0.1),
                &Constraint::Linear(c),
                NewtonOptions::default(),
            )
            .unwrap_err();
        assert!(matches!(err, ContinuationError::NewtonDiverged(_)));
    }

    #[test]
    fn branch_start_constant_case() {
        let pr = constant_problem(199, 100.0);
        let pair = pr.principal_eigenpair(EigenOptions::default()).unwrap();
        let eps = 1e-2;
        let start = pr
            .branch_start(&pair, eps, NewtonOptions::default())
            .unwrap();
        // Exact branch: u = A sin, lambda A² = 2 (100 lambda - mu1²).
        let m = mu1(&pr);
        let expected_lambda = m * m / (100.0 - eps * eps / 2.0);
        assert!((start.lambda - expected_lambda).abs() < 1e-12);
        assert!(start.lambda > pair.lambda);
        assert!((start.sup_norm - eps).abs() < 1e-12);
        assert!(start.min_value > 0.0);

        let err = pr
            .branch_start(&pair, 0.0, NewtonOptions::default())
            .unwrap_err();
        assert!(matches!(err, ContinuationError::NewtonDiverged(_)));
    }

    #[test]
    fn sublinear_sigma_guard() {
        let spec = ProblemSpec::new(
            Grid::new(20).unwrap(),
            CoefficientKind::Constant { v: 0.0 },
            CoefficientKind::Constant { v: 100.0 },
            KernelKind::Constant { c: 1.0 },
            1.0,
            0.5,
        )
        .unwrap();
        let pr = NonlocalProblem::new(spec).unwrap();
        let mut u = DVector::from_element(20, 0.5);
        u[4] = -0.1;
        let err = pr
            .newton_correct(1.0, &u, &Constraint::FixedLambda, NewtonOptions::default())
            .unwrap_err();
        assert!(matches!(err, ContinuationError::PositivityLost { .. }));
    }

    #[test]
    fn status_strings() {
        assert_eq!(BranchStatus::CrossedLambda1.to_string(), "crossed_lambda_1");
        assert_eq!(
            BranchStatus::ReachedLambdaMax.as_str(),
            "reached_lambda_max"
        );
        assert!(BranchStatus::NewtonFailure.is_failure());
        assert!(!BranchStatus::ReachedMaxSteps.is_failure());
    }
}
