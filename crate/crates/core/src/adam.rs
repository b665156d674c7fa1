//! Adam optimizer over the network parameter set.

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::unet::UNetParams;

pub const BETA1: f64 = 0.9;
pub const BETA2: f64 = 0.999;
pub const EPSILON: f64 = 1e-8;

/// First/second moment estimates, one pair per parameter value, in the
/// canonical flat order of [`UNetParams::flat_view`].
pub struct AdamState {
    m: Vec<f64>,
    v: Vec<f64>,
    step: u64,
}

impl AdamState {
    pub fn new<T: Scalar>(params: &UNetParams<T>) -> Self {
        let n = params.num_values();
        AdamState {
            m: vec![0.0; n],
            v: vec![0.0; n],
            step: 0,
        }
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }

    /// One bias-corrected Adam update. Aborts on non-finite gradients.
    pub fn step<T: Scalar>(
        &mut self,
        params: &mut UNetParams<T>,
        grads: &UNetParams<T>,
        lr: f64,
    ) -> Result<()> {
        self.step += 1;
        let t = self.step as i32;
        let bc1 = 1.0 - BETA1.powi(t);
        let bc2 = 1.0 - BETA2.powi(t);
        let mut offset = 0usize;
        let grad_view = grads.flat_view();
        let mut param_view = params.flat_view_mut();
        if grad_view.len() != param_view.len() {
            return Err(Error::Internal(
                "gradient layout does not match parameters".into(),
            ));
        }
        for ((pname, pslice), (gname, gslice)) in param_view.iter_mut().zip(&grad_view) {
            if pname != gname || pslice.len() != gslice.len() {
                return Err(Error::Internal(format!(
                    "gradient tensor {gname} does not match parameter {pname}"
                )));
            }
            for (p, &g) in pslice.iter_mut().zip(gslice.iter()) {
                let g = g.as_f64();
                if !g.is_finite() {
                    return Err(Error::NonFinite(format!("gradient of {pname}")));
                }
                let m = &mut self.m[offset];
                let v = &mut self.v[offset];
                *m = BETA1 * *m + (1.0 - BETA1) * g;
                *v = BETA2 * *v + (1.0 - BETA2) * g * g;
                let m_hat = *m / bc1;
                let v_hat = *v / bc2;
                let update = lr * m_hat / (v_hat.sqrt() + EPSILON);
                *p = T::from_f64(p.as_f64() - update);
                offset += 1;
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::activation::ActivationKind;
    use crate::unet::{init_params, UNetConfig};

    fn tiny() -> (UNetConfig, UNetParams<f64>) {
        let config = UNetConfig {
            depth: 1,
            base_channels: 2,
            num_classes: 2,
            activation: ActivationKind::Relu,
            dropout_rate: 0.0,
            input_size: (4, 4),
        };
        let params = init_params(&config, 1).unwrap();
        (config, params)
    }

    #[test]
    fn zero_gradient_leaves_params_unchanged() {
        let (_, mut params) = tiny();
        let before = params.clone();
        let mut grads = params.clone();
        for (_, s) in grads.flat_view_mut() {
            s.fill(0.0);
        }
        let mut state = AdamState::new(&params);
        state.step(&mut params, &grads, 1e-3).unwrap();
        assert_eq!(params, before);
    }

    #[test]
    fn first_step_magnitude() {
        // With g = 1 everywhere, the bias-corrected first update is
        // lr·1/(1+ε) ≈ lr.
        let (_, mut params) = tiny();
        let before = params.clone();
        let mut grads = params.clone();
        for (_, s) in grads.flat_view_mut() {
            s.fill(1.0);
        }
        let mut state = AdamState::new(&params);
        state.step(&mut params, &grads, 1e-3).unwrap();
        let expected = 1e-3 / (1.0 + 1e-8);
        for ((_, after), (_, before)) in params.flat_view().iter().zip(before.flat_view().iter()) {
            for (a, b) in after.iter().zip(before.iter()) {
                assert!(((b - a) - expected).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn converges_on_quadratic() {
        // Drive one scalar parameter toward 0 on f(x) = x² using the head
        // bias as the free variable.
        let (_, mut params) = tiny();
        params.head.bias[0] = 1.0;
        let mut state = AdamState::new(&params);
        let mut grads = params.clone();
        for _ in 0..200 {
            for (_, s) in grads.flat_view_mut() {
                s.fill(0.0);
            }
            grads.head.bias[0] = 2.0 * params.head.bias[0];
            state.step(&mut params, &grads, 0.05).unwrap();
        }
        assert!(
            params.head.bias[0].abs() < 0.05,
            "x = {}",
            params.head.bias[0]
        );
    }

    #[test]
    fn non_finite_gradient_aborts() {
        let (_, mut params) = tiny();
        let mut grads = params.clone();
        grads.head.bias[0] = f64::NAN;
        let mut state = AdamState::new(&params);
        assert!(matches!(
            state.step(&mut params, &grads, 1e-3),
            Err(Error::NonFinite(_))
        ));
    }
}
