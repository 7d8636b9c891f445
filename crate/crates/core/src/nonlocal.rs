//! The nonlocal interaction `theta_w(x) = ∫ f(x, y) |w(y)|^sigma dy`, the
//! nonlinearity `u^rho theta_u`, its Fréchet derivative, and the
//! interaction energy `∫∫ f(x, y) |w(y)|^sigma w(x)^(rho+1) dy dx`.
//!
//! All integrals use the tensor-product trapezoid rule on the grid; the
//! kernel is sampled, never interpolated.

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

use crate::problem::ProblemSpec;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum NonlocalError {
    #[error("dimension mismatch: expected {expected}, got {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("derivative of |u|^sigma is singular at node {index} (sigma = {sigma}, u = {value})")]
    SingularDerivative {
        index: usize,
        sigma: f64,
        value: f64,
    },
}

#[derive(Debug, Clone)]
pub struct NonlocalEvaluator {
    kernel: DMatrix<f64>,
    weights: DVector<f64>,
    sigma: f64,
    rho: f64,
}

impl NonlocalEvaluator {
    pub fn new(spec: &ProblemSpec) -> Self {
        Self::from_parts(
            spec.f().samples().clone(),
            spec.grid().weights(),
            spec.rho(),
            spec.sigma(),
        )
    }

    pub fn from_parts(kernel: DMatrix<f64>, weights: DVector<f64>, rho: f64, sigma: f64) -> Self {
        assert!(kernel.is_square() && kernel.nrows() == weights.len());
        Self {
            kernel,
            weights,
            sigma,
            rho,
        }
    }

    pub fn n(&self) -> usize {
        self.weights.len()
    }

    pub fn rho(&self) -> f64 {
        self.rho
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn kernel(&self) -> &DMatrix<f64> {
        &self.kernel
    }

    pub fn weights(&self) -> &DVector<f64> {
        &self.weights
    }

    /// `max |F|`, the discrete `||f||_inf`.
    pub fn kernel_sup(&self) -> f64 {
        self.kernel.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    fn check(&self, v: &DVector<f64>) -> Result<(), NonlocalError> {
        if v.len() == self.n() {
            Ok(())
        } else {
            Err(NonlocalError::DimensionMismatch {
                expected: self.n(),
                found: v.len(),
            })
        }
    }

    /// `theta_i = sum_j weight_j F[i][j] |w_j|^sigma`.
    pub fn theta(&self, w: &DVector<f64>) -> Result<DVector<f64>, NonlocalError> {
        self.check(w)?;
        let g = DVector::from_fn(self.n(), |j, _| self.weights[j] * abs_pow(w[j], self.sigma));
        Ok(&self.kernel * g)
    }

    /// `u^rho ⊙ theta_u`.
    pub fn nonlinearity(&self, u: &DVector<f64>) -> Result<DVector<f64>, NonlocalError> {
        let theta = self.theta(u)?;
        Ok(DVector::from_fn(self.n(), |i, _| {
            signed_pow(u[i], self.rho) * theta[i]
        }))
    }

    /// Jacobian of `u ↦ u^rho ⊙ theta_u`:
    /// `rho diag(u^(rho-1) ⊙ theta_u) + sigma diag(u^rho) F diag(weights ⊙ |u|^(sigma-1) sgn u)`.
    pub fn theta_jacobian(&self, u: &DVector<f64>) -> Result<DMatrix<f64>, NonlocalError> {
        self.check(u)?;
        if self.sigma < 1.0 {
            if let Some((index, &value)) = u.iter().enumerate().find(|(_, v)| **v <= 0.0) {
                return Err(NonlocalError::SingularDerivative {
                    index,
                    sigma: self.sigma,
                    value,
                });
            }
        }
        let n = self.n();
        let theta = self.theta(u)?;
        let col_scale = DVector::from_fn(n, |j, _| {
            self.weights[j] * abs_pow_derivative(u[j], self.sigma)
        });
        let row_scale = DVector::from_fn(n, |i, _| signed_pow(u[i], self.rho));
        let mut d = DMatrix::from_fn(n, n, |i, j| {
            row_scale[i] * self.kernel[(i, j)] * col_scale[j]
        });
        for i in 0..n {
            d[(i, i)] += signed_pow_derivative(u[i], self.rho) * theta[i];
        }
        Ok(d)
    }

    /// Interaction energy `sum_i weight_i w_i^(rho+1) theta(w)_i`.
    pub fn energy(&self, w: &DVector<f64>) -> Result<f64, NonlocalError> {
        let theta = self.theta(w)?;
        Ok((0..self.n())
            .map(|i| self.weights[i] * signed_pow(w[i], self.rho + 1.0) * theta[i])
            .sum())
    }
}

fn integer_exponent(s: f64) -> Option<i32> {
    (s.fract() == 0.0 && s.abs() <= 64.0).then_some(s as i32)
}

/// `|x|^s`.
pub(crate) fn abs_pow(x: f64, s: f64) -> f64 {
    match integer_exponent(s) {
        Some(k) => x.abs().powi(k),
        None => x.abs().powf(s),
    }
}

fn abs_pow_derivative(x: f64, s: f64) -> f64 {
    if x == 0.0 {
        return if s >= 1.0 { 0.0 } else { f64::INFINITY };
    }
    s * abs_pow(x, s - 1.0) * x.signum()
}

/// `x^r`: the ordinary power for integer `r`, the odd extension
/// `sgn(x)|x|^r` otherwise.
pub(crate) fn signed_pow(x: f64, r: f64) -> f64 {
    match integer_exponent(r) {
        Some(k) => x.powi(k),
        None => x.signum() * x.abs().powf(r),
    }
}

fn signed_pow_derivative(x: f64, r: f64) -> f64 {
    match integer_exponent(r) {
        Some(0) => 0.0,
        Some(k) => k as f64 * x.powi(k - 1),
        None => r * x.abs().powf(r - 1.0),
    }
}

/// Convenience wrappers mirroring the evaluator methods.
pub fn theta(
    evaluator: &NonlocalEvaluator,
    w: &DVector<f64>,
) -> Result<DVector<f64>, NonlocalError> {
    evaluator.theta(w)
}

pub fn theta_jacobian(
    evaluator: &NonlocalEvaluator,
    u: &DVector<f64>,
) -> Result<DMatrix<f64>, NonlocalError> {
    evaluator.theta_jacobian(u)
}

pub fn energy(evaluator: &NonlocalEvaluator, w: &DVector<f64>) -> Result<f64, NonlocalError> {
    evaluator.energy(w)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problem::{CoefficientKind, Grid, KernelKind};

    fn evaluator(n: usize, kernel: KernelKind, rho: f64, sigma: f64) -> NonlocalEvaluator {
        let spec = ProblemSpec::new(
            Grid::new(n).unwrap(),
            CoefficientKind::Constant { v: 0.0 },
            CoefficientKind::Constant { v: 1.0 },
            kernel,
            rho,
            sigma,
        )
        .unwrap();
        NonlocalEvaluator::new(&spec)
    }

    #[test]
    fn weights_sum_below_one() {
        let e = evaluator(9, KernelKind::Constant { c: 1.0 }, 1.0, 2.0);
        let total: f64 = e.weights().iter().sum();
        assert!((total - 0.9).abs() < 1e-15);
    }

    #[test]
    fn zero_input_gives_zero() {
        let e = evaluator(20, KernelKind::ExpDecay { c: 1.0, alpha: 2.0 }, 2.0, 0.5);
        let z = DVector::zeros(20);
        assert_eq!(e.theta(&z).unwrap(), z);
        assert_eq!(e.energy(&z).unwrap(), 0.0);
        // rho > 1: both Jacobian terms vanish at zero.
        let e = evaluator(20, KernelKind::Constant { c: 1.0 }, 2.0, 2.0);
        assert_eq!(e.theta_jacobian(&z).unwrap(), DMatrix::zeros(20, 20));
    }

    #[test]
    fn theta_of_sine_is_one_half() {
        let n = 199;
        let e = evaluator(n, KernelKind::Constant { c: 1.0 }, 1.0, 2.0);
        let s = Grid::new(n).unwrap().sine_mode(1);
        let theta = e.theta(&s).unwrap();
        for v in theta.iter() {
            assert!((v - 0.5).abs() < 1e-14, "{v}");
        }
        // energy: (1/2) * h * sum sin² = 1/4
        let phi = e.energy(&s).unwrap();
        assert!((phi - 0.25).abs() < 1e-14, "{phi}");
    }

    #[test]
    fn jacobian_of_sine_has_rank_one_structure() {
        let n = 31;
        let e = evaluator(n, KernelKind::Constant { c: 1.0 }, 1.0, 2.0);
        let grid = Grid::new(n).unwrap();
        let u = grid.sine_mode(1);
        let d = e.theta_jacobian(&u).unwrap();
        let theta0 = e.theta(&u).unwrap()[0];
        assert!((theta0 - 0.5).abs() < 1e-14);
        let h = grid.h();
        for i in 0..n {
            for j in 0..n {
                let mut want = 2.0 * h * u[i] * u[j];
                if i == j {
                    want += 0.5;
                }
                assert!((d[(i, j)] - want).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn sublinear_sigma_needs_strictly_positive_u() {
        let e = evaluator(10, KernelKind::Constant { c: 1.0 }, 1.0, 0.5);
        let mut u = DVector::from_element(10, 1.0);
        assert!(e.theta_jacobian(&u).is_ok());
        u[3] = 0.0;
        assert!(matches!(
            e.theta_jacobian(&u),
            Err(NonlocalError::SingularDerivative { index: 3, .. })
        ));
    }

    #[test]
    fn dimension_is_checked() {
        let e = evaluator(10, KernelKind::Constant { c: 1.0 }, 1.0, 2.0);
        assert!(matches!(
            e.theta(&DVector::zeros(9)),
            Err(NonlocalError::DimensionMismatch {
                expected: 10,
                found: 9
            })
        ));
    }

    #[test]
    fn strip_positive_kernel_small_energy_forces_small_w() {
        // f >= delta on |x - y| <= delta gives energy >= delta h² sum w_i^(rho+1) w_j^sigma
        // over the strip, so a tiny energy bounds w on the diagonal.
        let n = 50;
        let e = evaluator(n, KernelKind::Gaussian { c: 1.0, alpha: 1.0 }, 1.0, 2.0);
        let grid = Grid::new(n).unwrap();
        let w = grid.sine_mode(1) * 1e-6;
        let phi = e.energy(&w).unwrap();
        assert!((0.0..1e-14).contains(&phi));
        let max = w.iter().fold(0.0_f64, |m, v| m.max(*v));
        assert!(max < 1e-4);
        // Lower bound from the diagonal strip term alone.
        let h = grid.h();
        let diag: f64 = (0..n).map(|i| w[i].powi(2) * w[i].powi(2)).sum();
        assert!(phi >= 0.05 * h * h * diag);
    }

    #[test]
    fn power_helpers() {
        assert_eq!(abs_pow(-3.0, 2.0), 9.0);
        assert_eq!(signed_pow(-2.0, 3.0), -8.0);
        assert_eq!(signed_pow(-4.0, 1.5), -8.0);
        assert_eq!(signed_pow_derivative(2.0, 1.0), 1.0);
        assert_eq!(abs_pow_derivative(-2.0, 2.0), -4.0);
        assert_eq!(abs_pow_derivative(0.0, 0.5), f64::INFINITY);
    }
}
