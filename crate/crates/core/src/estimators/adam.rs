use crate::Scalar;

/// Bias-corrected Adam moments with `β₁ = 0.9`, `β₂ = 0.999`, `ε = 1e-8`.
#[derive(Clone, Debug, PartialEq)]
pub struct AdamState<T> {
    pub first: Vec<T>,
    pub second: Vec<T>,
    pub t: u64,
    pub beta1: T,
    pub beta2: T,
    pub eps: T,
}

impl<T: Scalar> AdamState<T> {
    pub fn new(d: usize) -> Self {
        Self {
            first: vec![T::zero(); d],
            second: vec![T::zero(); d],
            t: 0,
            beta1: T::lit(0.9),
            beta2: T::lit(0.999),
            eps: T::lit(1e-8),
        }
    }

    /// Writes the displacement to subtract from the weights into `out`.
    pub fn step_into(&mut self, g: &[T], alpha: T, out: &mut [T]) {
        self.t += 1;
        let t = i32::try_from(self.t).unwrap_or(i32::MAX);
        let c1 = T::one() - self.beta1.powi(t);
        let c2 = T::one() - self.beta2.powi(t);
        for i in 0..g.len() {
            self.first[i] = self.beta1 * self.first[i] + (T::one() - self.beta1) * g[i];
            self.second[i] = self.beta2 * self.second[i] + (T::one() - self.beta2) * g[i] * g[i];
            let m_hat = self.first[i] / c1;
            let v_hat = self.second[i] / c2;
            out[i] = alpha * m_hat / (v_hat.sqrt() + self.eps);
        }
    }

    /// `w ← w − step(g)`
    pub fn apply(&mut self, w: &mut [T], g: &[T], alpha: T, scratch: &mut [T]) {
        self.step_into(g, alpha, scratch);
        w.iter_mut()
            .zip(scratch.iter())
            .for_each(|(wi, &s)| *wi -= s);
    }
}

/// The displacement Adam subtracts from the weights for gradient `g`.
pub fn adam_update<T: Scalar>(adam: &mut AdamState<T>, g: &[T], alpha: T) -> Vec<T> {
    let mut out = vec![T::zero(); g.len()];
    adam.step_into(g, alpha, &mut out);
    out
}
