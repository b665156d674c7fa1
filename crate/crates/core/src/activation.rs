//! Elementwise activation functions and their derivatives.

use crate::scalar::Scalar;
use crate::tensor::Tensor;

/// Activation selector. PReLU keeps one learnable slope per layer; the value
/// lives in the network parameters and is passed alongside the kind.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ActivationKind {
    Relu,
    PRelu,
    Tanh,
    Mish,
}

impl ActivationKind {
    /// Initial PReLU slope.
    pub const PRELU_INIT: f64 = 0.25;

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "relu" => Some(Self::Relu),
            "prelu" => Some(Self::PRelu),
            "tanh" => Some(Self::Tanh),
            "mish" => Some(Self::Mish),
            _ => None,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Self::Relu => "relu",
            Self::PRelu => "prelu",
            Self::Tanh => "tanh",
            Self::Mish => "mish",
        }
    }

    pub fn has_slope(&self) -> bool {
        matches!(self, Self::PRelu)
    }
}

#[inline]
fn softplus<T: Scalar>(x: T) -> T {
    // max(x,0) + ln(1 + e^{-|x|}) avoids overflow on both tails.
    x.max(T::zero()) + (T::one() + (-x.abs()).exp()).ln()
}

#[inline]
fn sigmoid<T: Scalar>(x: T) -> T {
    T::one() / (T::one() + (-x).exp())
}

#[inline]
pub fn apply_scalar<T: Scalar>(x: T, kind: ActivationKind, slope: T) -> T {
    match kind {
        ActivationKind::Relu => x.max(T::zero()),
        ActivationKind::PRelu => {
            if x > T::zero() {
                x
            } else {
                slope * x
            }
        }
        ActivationKind::Tanh => x.tanh(),
        ActivationKind::Mish => x * softplus(x).tanh(),
    }
}

/// d(activation)/dx at pre-activation value `x`.
#[inline]
pub fn derivative_scalar<T: Scalar>(x: T, kind: ActivationKind, slope: T) -> T {
    match kind {
        ActivationKind::Relu => {
            if x > T::zero() {
                T::one()
            } else {
                T::zero()
            }
        }
        ActivationKind::PRelu => {
            if x > T::zero() {
                T::one()
            } else {
                slope
            }
        }
        ActivationKind::Tanh => {
            let t = x.tanh();
            T::one() - t * t
        }
        ActivationKind::Mish => {
            let t = softplus(x).tanh();
            t + x * (T::one() - t * t) * sigmoid(x)
        }
    }
}

/// Elementwise forward pass over a tensor of pre-activations.
pub fn activation_forward<T: Scalar>(x: &Tensor<T>, kind: ActivationKind, slope: T) -> Tensor<T> {
    x.map(|v| apply_scalar(v, kind, slope))
}

/// Backward pass: returns dLoss/d(pre-activation) and, for PReLU, the
/// accumulated gradient of the layer's slope (Σ grad·x over x ≤ 0).
pub fn activation_backward<T: Scalar>(
    pre: &Tensor<T>,
    grad: &Tensor<T>,
    kind: ActivationKind,
    slope: T,
) -> (Tensor<T>, Option<T>) {
    debug_assert_eq!(pre.shape(), grad.shape());
    let mut out = grad.clone();
    for (g, &z) in out.data_mut().iter_mut().zip(pre.data()) {
        *g = *g * derivative_scalar(z, kind, slope);
    }
    let slope_grad = if kind == ActivationKind::PRelu {
        let mut acc = T::zero();
        for (&g, &z) in grad.data().iter().zip(pre.data()) {
            if z <= T::zero() {
                acc = acc + g * z;
            }
        }
        Some(acc)
    } else {
        None
    };
    (out, slope_grad)
}
