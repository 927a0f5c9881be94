use rand::Rng;

use super::ValueFunction;
use crate::{Error, Result, Scalar};

/// Observation plus the action whose output is selected.
#[derive(Clone, Debug, PartialEq)]
pub struct ObsAction<T> {
    pub obs: Vec<T>,
    pub action: usize,
}

/// `input → ReLU(hidden) → outputs`, one output per action.
///
/// Parameters are packed as `W1 (hidden × input, row-major) | b1 | W2 (outputs × hidden) | b2`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Mlp<T> {
    input_dim: usize,
    hidden: usize,
    outputs: usize,
    _scalar: std::marker::PhantomData<T>,
}

impl<T: Scalar> Mlp<T> {
    pub fn new(input_dim: usize, hidden: usize, outputs: usize) -> Result<Self> {
        if input_dim == 0 || hidden == 0 || outputs == 0 {
            return Err(Error::InvalidParameter(
                "network layers must be non-empty".into(),
            ));
        }
        Ok(Self {
            input_dim,
            hidden,
            outputs,
            _scalar: std::marker::PhantomData,
        })
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn hidden(&self) -> usize {
        self.hidden
    }

    pub fn outputs(&self) -> usize {
        self.outputs
    }

    fn offsets(&self) -> (usize, usize, usize) {
        let b1 = self.hidden * self.input_dim;
        let w2 = b1 + self.hidden;
        let b2 = w2 + self.outputs * self.hidden;
        (b1, w2, b2)
    }

    /// Each layer uniform in `±1/√fan_in`.
    pub fn init<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<T> {
        let (_, w2, _) = self.offsets();
        let bound1 = 1.0 / (self.input_dim as f64).sqrt();
        let bound2 = 1.0 / (self.hidden as f64).sqrt();
        (0..self.num_params())
            .map(|i| {
                let b = if i < w2 { bound1 } else { bound2 };
                T::lit(rng.gen_range(-b..=b))
            })
            .collect()
    }

    /// Hidden pre-activations for `obs`.
    pub fn pre_activations(&self, w: &[T], obs: &[T]) -> Vec<T> {
        let (b1, _, _) = self.offsets();
        (0..self.hidden)
            .map(|j| {
                crate::scalar::dot(&w[j * self.input_dim..(j + 1) * self.input_dim], obs)
                    + w[b1 + j]
            })
            .collect()
    }

    /// All outputs in one pass.
    pub fn forward(&self, w: &[T], obs: &[T]) -> Vec<T> {
        let (_, w2, b2) = self.offsets();
        let h: Vec<T> = self
            .pre_activations(w, obs)
            .into_iter()
            .map(|z| z.max(T::zero()))
            .collect();
        (0..self.outputs)
            .map(|a| {
                crate::scalar::dot(&w[w2 + a * self.hidden..w2 + (a + 1) * self.hidden], &h)
                    + w[b2 + a]
            })
            .collect()
    }
}

impl<T: Scalar> ValueFunction<T> for Mlp<T> {
    type Input = ObsAction<T>;

    fn num_params(&self) -> usize {
        self.hidden * (self.input_dim + 1) + self.outputs * (self.hidden + 1)
    }

    fn value(&self, w: &[T], x: &ObsAction<T>) -> T {
        let (_, w2, b2) = self.offsets();
        let head = &w[w2 + x.action * self.hidden..w2 + (x.action + 1) * self.hidden];
        let z = self.pre_activations(w, &x.obs);
        head.iter()
            .zip(&z)
            .map(|(&v, &zj)| v * zj.max(T::zero()))
            .sum::<T>()
            + w[b2 + x.action]
    }

    // The ReLU derivative at exactly zero is taken as zero.
    fn value_and_add_grad(&self, w: &[T], x: &ObsAction<T>, scale: T, out: &mut [T]) -> T {
        debug_assert_eq!(x.obs.len(), self.input_dim);
        let (b1, w2, b2) = self.offsets();
        let head_at = w2 + x.action * self.hidden;
        let z = self.pre_activations(w, &x.obs);
        let mut value = w[b2 + x.action];
        for (j, &zj) in z.iter().enumerate() {
            if zj <= T::zero() {
                continue;
            }
            let v = w[head_at + j];
            value += v * zj;
            out[head_at + j] += scale * zj;
            let back = scale * v;
            out[b1 + j] += back;
            crate::scalar::axpy(
                back,
                &x.obs,
                &mut out[j * self.input_dim..(j + 1) * self.input_dim],
            );
        }
        out[b2 + x.action] += scale;
        value
    }
}
