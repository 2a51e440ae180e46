//! Feedforward network model: activations, layers, feature maps and
//! strict-argmax classification.

use std::fmt;

use thiserror::Error;

use crate::linalg::{dot, Matrix};
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum NetworkError {
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("invalid network: {0}")]
    Invalid(String),
}

pub type Result<T> = std::result::Result<T, NetworkError>;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ActivationKind<T: Scalar = f64> {
    Sigmoid,
    Tanh,
    Relu,
    /// `alpha` in `(0, 1)`.
    LeakyRelu { alpha: T },
    Softplus,
    /// `alpha > 0`.
    Elu { alpha: T },
}

/// Range metadata: `lower_limit = lim_{t -> -inf}`, `upper_limit = lim_{t -> +inf}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ActivationTraits<T: Scalar = f64> {
    pub lower_limit: T,
    pub upper_limit: T,
    pub bijective_onto_range: bool,
    pub surjective_onto_reals: bool,
}

impl<T: Scalar> ActivationTraits<T> {
    /// Finite on both sides (sigmoid, tanh).
    pub fn is_bounded(&self) -> bool {
        self.lower_limit.is_finite() && self.upper_limit.is_finite()
    }

    /// Finite below, unbounded above (softplus, ELU; ReLU also has this shape).
    pub fn is_half_bounded(&self) -> bool {
        self.lower_limit.is_finite() && self.upper_limit == T::infinity()
    }
}

impl<T: Scalar> ActivationKind<T> {
    pub fn leaky_relu(alpha: T) -> Result<Self> {
        if alpha > T::zero() && alpha < T::one() {
            Ok(Self::LeakyRelu { alpha })
        } else {
            Err(NetworkError::Invalid(format!(
                "leaky ReLU alpha must lie in (0, 1), got {alpha}"
            )))
        }
    }

    pub fn elu(alpha: T) -> Result<Self> {
        if alpha > T::zero() && alpha.is_finite() {
            Ok(Self::Elu { alpha })
        } else {
            Err(NetworkError::Invalid(format!(
                "ELU alpha must be positive, got {alpha}"
            )))
        }
    }

    /// Re-checks the parameter invariants (for values built by hand).
    pub fn validate(self) -> Result<Self> {
        match self {
            Self::LeakyRelu { alpha } => Self::leaky_relu(alpha),
            Self::Elu { alpha } => Self::elu(alpha),
            other => Ok(other),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Self::Sigmoid => "sigmoid",
            Self::Tanh => "tanh",
            Self::Relu => "relu",
            Self::LeakyRelu { .. } => "leaky_relu",
            Self::Softplus => "softplus",
            Self::Elu { .. } => "elu",
        }
    }

    pub fn alpha(&self) -> Option<T> {
        match *self {
            Self::LeakyRelu { alpha } | Self::Elu { alpha } => Some(alpha),
            _ => None,
        }
    }

    pub fn apply(&self, t: T) -> T {
        let zero = T::zero();
        let one = T::one();
        match *self {
            Self::Sigmoid => {
                if t >= zero {
                    one / (one + (-t).exp())
                } else {
                    let e = t.exp();
                    e / (one + e)
                }
            }
            Self::Tanh => t.tanh(),
            Self::Relu => {
                if t > zero {
                    t
                } else {
                    zero
                }
            }
            Self::LeakyRelu { alpha } => {
                if t >= zero {
                    t
                } else {
                    alpha * t
                }
            }
            // max(t, 0) + log(1 + e^-|t|): no overflow for large |t|
            Self::Softplus => t.max(zero) + (-t.abs()).exp().ln_1p(),
            Self::Elu { alpha } => {
                if t > zero {
                    t
                } else {
                    alpha * t.exp_m1()
                }
            }
        }
    }

    /// Inverse on the open range; `None` for ReLU or for `y` outside the range.
    pub fn inverse(&self, y: T) -> Option<T> {
        let zero = T::zero();
        let one = T::one();
        let tr = self.traits();
        if !(y > tr.lower_limit && y < tr.upper_limit) {
            return None;
        }
        match *self {
            Self::Sigmoid => Some((y / (one - y)).ln()),
            Self::Tanh => Some(y.atanh()),
            Self::Relu => None,
            Self::LeakyRelu { alpha } => Some(if y >= zero { y } else { y / alpha }),
            Self::Softplus => Some(y + (-(-y).exp_m1()).ln()),
            Self::Elu { alpha } => Some(if y > zero { y } else { (y / alpha).ln_1p() }),
        }
    }

    pub fn traits(&self) -> ActivationTraits<T> {
        let inf = T::infinity();
        let (lower_limit, upper_limit) = match *self {
            Self::Sigmoid => (T::zero(), T::one()),
            Self::Tanh => (-T::one(), T::one()),
            Self::Relu | Self::Softplus => (T::zero(), inf),
            Self::LeakyRelu { .. } => (-inf, inf),
            Self::Elu { alpha } => (-alpha, inf),
        };
        ActivationTraits {
            lower_limit,
            upper_limit,
            bijective_onto_range: !matches!(self, Self::Relu),
            surjective_onto_reals: matches!(self, Self::LeakyRelu { .. }),
        }
    }

    pub fn cast<U: Scalar>(&self) -> ActivationKind<U> {
        match *self {
            Self::Sigmoid => ActivationKind::Sigmoid,
            Self::Tanh => ActivationKind::Tanh,
            Self::Relu => ActivationKind::Relu,
            Self::LeakyRelu { alpha } => ActivationKind::LeakyRelu {
                alpha: U::lit(alpha.to_f64_lossy()),
            },
            Self::Softplus => ActivationKind::Softplus,
            Self::Elu { alpha } => ActivationKind::Elu {
                alpha: U::lit(alpha.to_f64_lossy()),
            },
        }
    }
}

impl<T: Scalar> fmt::Display for ActivationKind<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.alpha() {
            Some(a) => write!(f, "{}({a})", self.name()),
            None => f.write_str(self.name()),
        }
    }
}

/// Element-wise activation.
pub fn apply_hat<T: Scalar>(a: &ActivationKind<T>, x: &[T]) -> Vec<T> {
    x.iter().map(|&t| a.apply(t)).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct Layer<T: Scalar = f64> {
    pub weights: Matrix<T>,
    pub bias: Vec<T>,
    /// `None` only for the output layer.
    pub activation: Option<ActivationKind<T>>,
}

impl<T: Scalar> Layer<T> {
    pub fn new(weights: Matrix<T>, bias: Vec<T>, activation: Option<ActivationKind<T>>) -> Self {
        Self {
            weights,
            bias,
            activation,
        }
    }

    pub fn in_dim(&self) -> usize {
        self.weights.cols()
    }

    pub fn out_dim(&self) -> usize {
        self.weights.rows()
    }

    /// `W x + b`.
    pub fn affine(&self, x: &[T]) -> Vec<T> {
        let mut out = Vec::with_capacity(self.out_dim());
        self.affine_into(x, &mut out);
        out
    }

    fn affine_into(&self, x: &[T], out: &mut Vec<T>) {
        out.clear();
        out.extend(
            (0..self.out_dim()).map(|r| dot(self.weights.row(r), x) + self.bias[r]),
        );
    }
}

/// Layers `1..=L`; layer `L` is affine, the rest apply their activation.
#[derive(Debug, Clone, PartialEq)]
pub struct Network<T: Scalar = f64> {
    input_dim: usize,
    classes: usize,
    layers: Vec<Layer<T>>,
}

impl<T: Scalar> Network<T> {
    pub fn new(input_dim: usize, classes: usize, layers: Vec<Layer<T>>) -> Result<Self> {
        if layers.is_empty() {
            return Err(NetworkError::Invalid("network needs at least one layer".into()));
        }
        if input_dim == 0 || classes == 0 {
            return Err(NetworkError::Invalid(
                "input_dim and classes must be positive".into(),
            ));
        }
        let mut width = input_dim;
        let last = layers.len() - 1;
        for (i, layer) in layers.iter().enumerate() {
            let k = i + 1;
            if layer.in_dim() != width {
                return Err(NetworkError::Invalid(format!(
                    "layer {k}: expected {width} columns, got {}",
                    layer.in_dim()
                )));
            }
            if layer.bias.len() != layer.out_dim() {
                return Err(NetworkError::Invalid(format!(
                    "layer {k}: bias has {} entries for {} rows",
                    layer.bias.len(),
                    layer.out_dim()
                )));
            }
            if layer.bias.iter().any(|b| !b.is_finite()) {
                return Err(NetworkError::Invalid(format!("layer {k}: non-finite bias")));
            }
            if layer.out_dim() == 0 {
                return Err(NetworkError::Invalid(format!("layer {k}: zero width")));
            }
            match (&layer.activation, i == last) {
                (Some(_), true) => {
                    return Err(NetworkError::Invalid(
                        "output layer must not have an activation".into(),
                    ))
                }
                (None, false) => {
                    return Err(NetworkError::Invalid(format!(
                        "hidden layer {k} needs an activation"
                    )))
                }
                (Some(a), false) => {
                    a.validate()?;
                }
                (None, true) => {}
            }
            width = layer.out_dim();
        }
        if width != classes {
            return Err(NetworkError::Invalid(format!(
                "output layer has {width} rows but classes = {classes}"
            )));
        }
        Ok(Self {
            input_dim,
            classes,
            layers,
        })
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn classes(&self) -> usize {
        self.classes
    }

    /// Number of affine layers `L`.
    pub fn depth(&self) -> usize {
        self.layers.len()
    }

    pub fn layers(&self) -> &[Layer<T>] {
        &self.layers
    }

    /// Layer `k` in `1..=L`.
    pub fn layer(&self, k: usize) -> &Layer<T> {
        &self.layers[k - 1]
    }

    /// `(n_0, n_1, ..., n_L)`.
    pub fn widths(&self) -> Vec<usize> {
        std::iter::once(self.input_dim)
            .chain(self.layers.iter().map(Layer::out_dim))
            .collect()
    }

    /// Activations of layers `1..L-1`.
    pub fn hidden_activations(&self) -> impl Iterator<Item = &ActivationKind<T>> + '_ {
        self.layers.iter().filter_map(|l| l.activation.as_ref())
    }

    /// `f_k(x)`: `k = 0` is the input itself, `k = L` the affine output.
    pub fn feature_map(&self, x: &[T], k: usize) -> Result<Vec<T>> {
        if x.len() != self.input_dim {
            return Err(NetworkError::InvalidInput(format!(
                "input has dimension {}, expected {}",
                x.len(),
                self.input_dim
            )));
        }
        if k > self.depth() {
            return Err(NetworkError::InvalidInput(format!(
                "layer index {k} exceeds depth {}",
                self.depth()
            )));
        }
        let mut cur = x.to_vec();
        for layer in &self.layers[..k] {
            cur = layer.affine(&cur);
            if let Some(a) = &layer.activation {
                cur.iter_mut().for_each(|t| *t = a.apply(*t));
            }
        }
        Ok(cur)
    }

    /// `f_L(x)`.
    pub fn forward(&self, x: &[T]) -> Result<Vec<T>> {
        self.feature_map(x, self.depth())
    }

    /// Allocation-free forward pass for hot loops. `x` must have the input
    /// dimension.
    pub fn forward_scratch<'s>(&self, x: &[T], scratch: &'s mut Scratch<T>) -> &'s [T] {
        let Scratch { a, b } = scratch;
        a.clear();
        a.extend_from_slice(x);
        for layer in &self.layers {
            layer.affine_into(a, b);
            if let Some(act) = &layer.activation {
                b.iter_mut().for_each(|t| *t = act.apply(*t));
            }
            std::mem::swap(a, b);
        }
        a
    }

    /// Strict argmax of `f_L(x)` with ties (gap `<= tie_eps`) reported as `None`.
    pub fn classify(&self, x: &[T], tie_eps: T) -> Result<Option<usize>> {
        Ok(strict_argmax(&self.forward(x)?, tie_eps))
    }

    pub fn cast<U: Scalar>(&self) -> Network<U> {
        Network {
            input_dim: self.input_dim,
            classes: self.classes,
            layers: self
                .layers
                .iter()
                .map(|l| Layer {
                    weights: l.weights.map(|x| U::lit(x.to_f64_lossy())),
                    bias: l.bias.iter().map(|x| U::lit(x.to_f64_lossy())).collect(),
                    activation: l.activation.as_ref().map(ActivationKind::cast),
                })
                .collect(),
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct Scratch<T: Scalar = f64> {
    a: Vec<T>,
    b: Vec<T>,
}

/// Index `m` with `o_m - o_j > tie_eps` for all `j != m`, if any.
pub fn strict_argmax<T: Scalar>(o: &[T], tie_eps: T) -> Option<usize> {
    let (best, &top) = o
        .iter()
        .enumerate()
        .fold(None, |acc: Option<(usize, &T)>, (i, v)| match acc {
            Some((_, b)) if *b >= *v => acc,
            _ => Some((i, v)),
        })?;
    o.iter()
        .enumerate()
        .all(|(j, &v)| j == best || top - v > tie_eps)
        .then_some(best)
}

/// `o` lies in the open cone where coordinate `m` strictly dominates.
pub fn output_membership<T: Scalar>(o: &[T], m: usize) -> bool {
    o.iter().enumerate().all(|(j, &v)| j == m || o[m] > v)
}

#[cfg(test)]
mod tests {
    use super::*;

    const ALL: [ActivationKind<f64>; 6] = [
        ActivationKind::Sigmoid,
        ActivationKind::Tanh,
        ActivationKind::Relu,
        ActivationKind::LeakyRelu { alpha: 0.1 },
        ActivationKind::Softplus,
        ActivationKind::Elu { alpha: 1.0 },
    ];

    #[test]
    fn activation_examples() {
        assert_eq!(ActivationKind::<f64>::Sigmoid.apply(0.0), 0.5);
        assert_eq!(ActivationKind::<f64>::Relu.apply(-3.0), 0.0);
        assert_eq!(ActivationKind::Elu { alpha: 1.0 }.apply(0.0), 0.0);
        let leaky = ActivationKind::LeakyRelu { alpha: 0.1 }.apply(-2.0);
        assert!((leaky - (-0.2f64)).abs() < 1e-15);
        assert_eq!(ActivationKind::<f64>::Softplus.apply(1000.0), 1000.0);
        assert_eq!(ActivationKind::<f64>::Sigmoid.apply(-1000.0), 0.0);
        assert!((ActivationKind::<f64>::Softplus.apply(0.0) - 2f64.ln()).abs() < 1e-15);
    }

    #[test]
    fn alpha_invariants() {
        assert!(ActivationKind::leaky_relu(0.0f64).is_err());
        assert!(ActivationKind::leaky_relu(1.0f64).is_err());
        assert!(ActivationKind::leaky_relu(0.5f64).is_ok());
        assert!(ActivationKind::elu(0.0f64).is_err());
        assert!(ActivationKind::elu(2.0f64).is_ok());
    }

    #[test]
    fn traits_catalog() {
        let t = |a: ActivationKind<f64>| a.traits();
        assert_eq!((t(ALL[0]).lower_limit, t(ALL[0]).upper_limit), (0.0, 1.0));
        assert_eq!((t(ALL[1]).lower_limit, t(ALL[1]).upper_limit), (-1.0, 1.0));
        assert!(!t(ALL[2]).bijective_onto_range);
        assert_eq!(t(ALL[3]).lower_limit, f64::NEG_INFINITY);
        assert_eq!(t(ALL[4]).lower_limit, 0.0);
        assert_eq!(t(ALL[5]).lower_limit, -1.0);
        for a in ALL {
            assert_eq!(
                t(a).surjective_onto_reals,
                matches!(a, ActivationKind::LeakyRelu { .. })
            );
        }
        assert!(t(ALL[0]).is_bounded() && t(ALL[1]).is_bounded());
        assert!(t(ALL[4]).is_half_bounded() && t(ALL[5]).is_half_bounded());
    }

    #[test]
    fn limits_match_empirics() {
        for a in ALL {
            let tr = a.traits();
            if tr.lower_limit.is_finite() {
                assert!((a.apply(-40.0) - tr.lower_limit).abs() < 1e-6, "{a}");
            }
            if tr.upper_limit.is_finite() {
                assert!((a.apply(40.0) - tr.upper_limit).abs() < 1e-6, "{a}");
            }
        }
    }

    fn one_layer_relu() -> Network<f64> {
        Network::new(
            2,
            2,
            vec![
                Layer::new(Matrix::identity(2), vec![0.0; 2], Some(ActivationKind::Relu)),
                Layer::new(Matrix::identity(2), vec![0.0; 2], None),
            ],
        )
        .unwrap()
    }

    #[test]
    fn feature_map_examples() {
        let net = one_layer_relu();
        assert_eq!(net.feature_map(&[-1.0, 2.0], 0).unwrap(), vec![-1.0, 2.0]);
        assert_eq!(net.feature_map(&[-1.0, 2.0], 1).unwrap(), vec![0.0, 2.0]);

        let sig = Network::new(
            2,
            2,
            vec![
                Layer::new(Matrix::identity(2), vec![0.0; 2], Some(ActivationKind::Sigmoid)),
                Layer::new(Matrix::identity(2), vec![0.0; 2], None),
            ],
        )
        .unwrap();
        assert_eq!(sig.feature_map(&[0.0, 0.0], 2).unwrap(), vec![0.5, 0.5]);
        assert!(sig.feature_map(&[0.0], 1).is_err());
        assert!(sig.feature_map(&[0.0, 0.0], 3).is_err());
    }

    #[test]
    fn scratch_forward_matches() {
        let net = one_layer_relu();
        let mut s = Scratch::default();
        for x in [[-1.0, 2.0], [3.0, -4.0], [0.5, 0.25]] {
            assert_eq!(net.forward_scratch(&x, &mut s), net.forward(&x).unwrap().as_slice());
        }
    }

    #[test]
    fn network_validation() {
        let hidden = Layer::new(Matrix::<f64>::identity(2), vec![0.0; 2], Some(ActivationKind::Relu));
        assert!(Network::new(2, 2, vec![hidden.clone()]).is_err());
        let out = Layer::new(Matrix::<f64>::zeros(3, 2), vec![0.0; 3], None);
        assert!(Network::new(2, 2, vec![hidden.clone(), out]).is_err());
        let bad_bias = Layer::new(Matrix::<f64>::identity(2), vec![0.0], None);
        assert!(Network::new(2, 2, vec![bad_bias]).is_err());
        assert!(Network::<f64>::new(2, 2, vec![]).is_err());
    }

    #[test]
    fn strict_argmax_examples() {
        assert_eq!(strict_argmax(&[3.0, 1.0, 2.0], 0.0), Some(0));
        assert_eq!(strict_argmax(&[2.0, 2.0], 0.0), None);
        assert_eq!(strict_argmax(&[1.0, 1.0 + 1e-18], 1e-12), None);
        assert_eq!(strict_argmax(&[1.0, 1.5], 1e-12), Some(1));
        assert_eq!(strict_argmax::<f64>(&[], 0.0), None);
    }

    #[test]
    fn membership_examples() {
        assert!(output_membership(&[5.0, 0.0, 0.0], 0));
        assert!(!output_membership(&[0.0, 0.0], 0));
        assert!(output_membership(&[1.0, 2.0, 3.0], 2));
    }
}
