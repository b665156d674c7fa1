//! Central finite-difference verification of analytic gradients.
//!
//! The harness perturbs one element at a time and compares
//! (f(x+ε) − f(x−ε)) / 2ε against the analytic gradient. Instantiate with
//! `f64` for the high-precision shadow mode; every layer is generic over the
//! scalar, so the same closures run in both precisions.

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::tensor::Tensor;

/// Outcome of a finite-difference comparison. Relative error is measured
/// against the largest gradient magnitude seen, which keeps near-zero
/// components from inflating the ratio.
#[derive(Clone, Debug)]
pub struct GradCheckReport {
    pub max_abs_err: f64,
    pub max_rel_err: f64,
    pub grad_scale: f64,
    pub checked: usize,
}

impl GradCheckReport {
    pub fn passes(&self, tolerance: f64) -> bool {
        self.max_rel_err < tolerance
    }
}

/// Compare `analytic` against central differences of `loss` at `at`.
///
/// `loss` must be a pure scalar function of the tensor argument.
pub fn gradient_check<T: Scalar>(
    loss: &mut dyn FnMut(&Tensor<T>) -> Result<T>,
    at: &Tensor<T>,
    analytic: &Tensor<T>,
    epsilon: f64,
) -> Result<GradCheckReport> {
    if analytic.shape() != at.shape() {
        return Err(Error::Shape(format!(
            "analytic gradient shape {} does not match input {}",
            analytic.shape(),
            at.shape()
        )));
    }
    let base = loss(at)?;
    if !base.is_finite() {
        return Err(Error::NonFinite(format!(
            "loss at evaluation point ({base})"
        )));
    }
    let eps = T::from_f64(epsilon);
    let mut probe = at.clone();
    let mut max_abs = 0.0f64;
    let mut grad_scale = 0.0f64;
    let n = at.shape().len();
    for i in 0..n {
        let orig = probe.data()[i];
        probe.data_mut()[i] = orig + eps;
        let plus = loss(&probe)?.as_f64();
        probe.data_mut()[i] = orig - eps;
        let minus = loss(&probe)?.as_f64();
        probe.data_mut()[i] = orig;
        if !plus.is_finite() || !minus.is_finite() {
            return Err(Error::NonFinite("perturbed loss".into()));
        }
        let numeric = (plus - minus) / (2.0 * epsilon);
        let ana = analytic.data()[i].as_f64();
        max_abs = max_abs.max((numeric - ana).abs());
        grad_scale = grad_scale.max(numeric.abs()).max(ana.abs());
    }
    let max_rel = if grad_scale > 0.0 {
        max_abs / grad_scale
    } else {
        max_abs
    };
    Ok(GradCheckReport {
        max_abs_err: max_abs,
        max_rel_err: max_rel,
        grad_scale,
        checked: n,
    })
}

/// Default probe step for each precision: coarse enough that the difference
/// quotient survives rounding in the loss evaluation.
pub fn default_epsilon_f32() -> f64 {
    1e-2
}

pub fn default_epsilon_f64() -> f64 {
    1e-5
}
