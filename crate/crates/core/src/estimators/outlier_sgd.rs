use rand::Rng;

use super::rans::split_unchecked;
use super::OutlierBuffer;
use crate::scalar::{axpy, norm_sq};
use crate::{Error, Result, Scalar};

/// A sample function `f` with a gradient.
pub trait SampleLoss<T> {
    fn gradient(&self, w: &[T], out: &mut [T]);
}

/// The outlier measure `ξ(f, w)`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum OutlierMeasure {
    #[default]
    SquaredNorm,
    Norm,
}

impl OutlierMeasure {
    fn eval<T: Scalar>(self, g: &[T]) -> T {
        match self {
            OutlierMeasure::SquaredNorm => norm_sq(g),
            OutlierMeasure::Norm => norm_sq(g).sqrt(),
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct SplitReport {
    pub k: u64,
    pub replayed: bool,
    pub replay_k: u64,
}

/// Online SGD where an outlier sample is replaced by `k` copies scaled by `1/k`: one applied
/// now, the rest replayed later from a buffer.
#[derive(Clone, Debug)]
pub struct OutlierSplitSgd<T, F> {
    pub w: Vec<T>,
    pub beta: T,
    pub rho: T,
    pub lambda_xi: T,
    pub sigma: T,
    pub measure: OutlierMeasure,
    pub xi_hat: T,
    pub t: u64,
    pub buffer: OutlierBuffer<F>,
    grad: Vec<T>,
}

impl<T: Scalar, F: SampleLoss<T> + Clone> OutlierSplitSgd<T, F> {
    pub fn new(
        w: Vec<T>,
        beta: T,
        rho: T,
        lambda_xi: T,
        sigma: T,
        capacity: usize,
    ) -> Result<Self> {
        if !(rho > T::one())
            || !(lambda_xi > T::zero() && lambda_xi < T::one())
            || !(sigma > T::zero() && sigma <= T::one())
        {
            return Err(Error::InvalidParameter(
                "need rho > 1, lambda_xi in (0,1), sigma in (0,1]".into(),
            ));
        }
        let d = w.len();
        Ok(Self {
            w,
            beta,
            rho,
            lambda_xi,
            sigma,
            measure: OutlierMeasure::SquaredNorm,
            xi_hat: T::zero(),
            t: 0,
            buffer: OutlierBuffer::new(capacity),
            grad: vec![T::zero(); d],
        })
    }

    /// Bias-corrected trace `ξ̄`.
    pub fn xi_bar(&self) -> T {
        let t = i32::try_from(self.t).unwrap_or(i32::MAX);
        self.xi_hat / (T::one() - self.lambda_xi.powi(t))
    }

    pub fn step<R: Rng + ?Sized>(&mut self, f: F, rng: &mut R) -> SplitReport {
        self.t += 1;
        f.gradient(&self.w, &mut self.grad);
        let xi = self.measure.eval(&self.grad);
        self.xi_hat = self.lambda_xi * self.xi_hat + (T::one() - self.lambda_xi) * xi;
        let xi_bar = self.xi_bar();
        let mut report = SplitReport {
            k: 1,
            replayed: false,
            replay_k: 0,
        };
        if !(xi_bar > T::zero()) {
            // only zero gradients so far: nothing to apply or split
            return report;
        }
        let k = split_unchecked(xi, xi_bar, self.rho);
        report.k = k;
        axpy(
            -self.beta / T::from_u64(k).unwrap(),
            &self.grad,
            &mut self.w,
        );
        if k > 1 {
            self.buffer.insert(f, k);
        }
        if let Some(idx) = self.buffer.draw(self.sigma.to_f64_lossy(), rng) {
            let entry = self.buffer.get(idx);
            entry.payload.gradient(&self.w, &mut self.grad);
            let k2 = entry.k.max(split_unchecked(
                self.measure.eval(&self.grad),
                xi_bar,
                self.rho,
            ));
            axpy(
                -self.beta / T::from_u64(k2).unwrap(),
                &self.grad,
                &mut self.w,
            );
            self.buffer.consume(idx);
            report.replayed = true;
            report.replay_k = k2;
        }
        report
    }
}
