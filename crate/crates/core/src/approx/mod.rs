//! Differentiable value-function approximators with exact gradients.

mod features;
mod mlp;

pub use features::{boyan_standard_features, random_binary_features, softmax_policy, FeatureMap};
pub use mlp::{Mlp, ObsAction};

use crate::mdp::StateAction;
use crate::{Error, Result, Scalar};

/// `q_w(x)` together with its gradient in `w`.
pub trait ValueFunction<T: Scalar> {
    type Input;

    fn num_params(&self) -> usize;

    fn value(&self, w: &[T], x: &Self::Input) -> T;

    /// `out += scale · ∇_w q_w(x)`; returns `q_w(x)`.
    fn value_and_add_grad(&self, w: &[T], x: &Self::Input, scale: T, out: &mut [T]) -> T;

    fn grad_into(&self, w: &[T], x: &Self::Input, out: &mut [T]) {
        out.iter_mut().for_each(|v| *v = T::zero());
        self.value_and_add_grad(w, x, T::one(), out);
    }

    fn grad(&self, w: &[T], x: &Self::Input) -> Vec<T> {
        let mut out = vec![T::zero(); self.num_params()];
        self.grad_into(w, x, &mut out);
        out
    }

    fn check_params(&self, w: &[T]) -> Result<()> {
        if w.len() != self.num_params() {
            return Err(Error::Dimension(format!(
                "expected {} parameters, got {}",
                self.num_params(),
                w.len()
            )));
        }
        Ok(())
    }
}

/// One weight per state-action pair, pair `(s, a)` at index `s·n_actions + a`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Tabular {
    pub n_states: usize,
    pub n_actions: usize,
}

impl Tabular {
    pub fn new(n_states: usize, n_actions: usize) -> Self {
        Self {
            n_states,
            n_actions,
        }
    }

    #[inline]
    fn index(&self, x: &StateAction) -> usize {
        debug_assert!(x.s < self.n_states && x.a < self.n_actions);
        x.s * self.n_actions + x.a
    }
}

impl<T: Scalar> ValueFunction<T> for Tabular {
    type Input = StateAction;

    fn num_params(&self) -> usize {
        self.n_states * self.n_actions
    }

    #[inline]
    fn value(&self, w: &[T], x: &StateAction) -> T {
        w[self.index(x)]
    }

    #[inline]
    fn value_and_add_grad(&self, w: &[T], x: &StateAction, scale: T, out: &mut [T]) -> T {
        let i = self.index(x);
        out[i] += scale;
        w[i]
    }
}

/// `q_w(s, a) = φ(s, a)ᵀ w` with one feature row per state-action pair.
#[derive(Clone, Debug, PartialEq)]
pub struct Linear<T> {
    features: FeatureMap<T>,
    n_actions: usize,
}

impl<T: Scalar> Linear<T> {
    pub fn new(features: FeatureMap<T>, n_actions: usize) -> Result<Self> {
        if n_actions == 0 || !features.rows().is_multiple_of(n_actions) {
            return Err(Error::Dimension(format!(
                "{} feature rows cannot be split over {} actions",
                features.rows(),
                n_actions
            )));
        }
        Ok(Self {
            features,
            n_actions,
        })
    }

    /// Single-action form: one row per state.
    pub fn over_states(features: FeatureMap<T>) -> Self {
        Self {
            features,
            n_actions: 1,
        }
    }

    pub fn features(&self) -> &FeatureMap<T> {
        &self.features
    }

    pub fn n_actions(&self) -> usize {
        self.n_actions
    }

    #[inline]
    fn row(&self, x: &StateAction) -> &[T] {
        self.features.row(x.s * self.n_actions + x.a)
    }
}

impl<T: Scalar> ValueFunction<T> for Linear<T> {
    type Input = StateAction;

    fn num_params(&self) -> usize {
        self.features.dim()
    }

    #[inline]
    fn value(&self, w: &[T], x: &StateAction) -> T {
        crate::scalar::dot(self.row(x), w)
    }

    #[inline]
    fn value_and_add_grad(&self, w: &[T], x: &StateAction, scale: T, out: &mut [T]) -> T {
        let phi = self.row(x);
        crate::scalar::axpy(scale, phi, out);
        crate::scalar::dot(phi, w)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::Matrix;

    #[test]
    fn tabular_gradient_is_indicator() {
        let t = Tabular::new(3, 2);
        let w = [0.0, 1.0, 2.0, 3.0, 4.0, 5.0];
        let x = StateAction::new(1, 1);
        assert_eq!(ValueFunction::<f64>::value(&t, &w, &x), 3.0);
        assert_eq!(t.grad(&w, &x), vec![0.0, 0.0, 0.0, 1.0, 0.0, 0.0]);
    }

    #[test]
    fn linear_gradient_is_feature_row() {
        let phi = FeatureMap::new(Matrix::from_rows(&[vec![1.0, 2.0], vec![3.0, -1.0]]).unwrap())
            .unwrap();
        let l = Linear::over_states(phi);
        let w = [0.5, 0.25];
        let x = StateAction::new(1, 0);
        assert_eq!(l.value(&w, &x), 1.25);
        assert_eq!(l.grad(&w, &x), vec![3.0, -1.0]);
        assert!(l.check_params(&[1.0]).is_err());
    }

    #[test]
    fn linear_rows_must_split_over_actions() {
        let phi = FeatureMap::new(Matrix::<f64>::zeros(3, 2)).unwrap();
        assert!(Linear::new(phi, 2).is_err());
    }
}
