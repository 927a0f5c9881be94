use rand::Rng;

use super::updates::step_along_m;
use super::{delta_pair_into, EstimatorState, Hyperparameters};
use crate::approx::ValueFunction;
use crate::mdp::DoubleSample;
use crate::scalar::dot;
use crate::{Error, Result, Scalar};

/// Floor applied to the bias-corrected second-moment trace before dividing by its root.
const NU_FLOOR: f64 = 1e-12;

/// Relative slack on the per-step overshoot inequality.
const OVERSHOOT_SLACK: f64 = 1e-12;

/// `k = ⌊ξ / (ρ ξ̄)⌋ + 1`; `k = 1` means the sample is not an outlier.
pub fn split_factor<T: Scalar>(xi: T, xi_bar: T, rho: T) -> Result<u64> {
    if !(xi_bar > T::zero()) {
        return Err(Error::InvalidParameter(format!(
            "trace of the outlier measure must be positive, got {xi_bar}"
        )));
    }
    if !(rho > T::one()) {
        return Err(Error::InvalidParameter(format!(
            "outlier threshold must exceed 1, got {rho}"
        )));
    }
    Ok(split_unchecked(xi, xi_bar, rho))
}

pub(crate) fn split_unchecked<T: Scalar>(xi: T, xi_bar: T, rho: T) -> u64 {
    let ratio = (xi / (rho * xi_bar)).floor();
    ratio.to_u64().unwrap_or(u64::MAX - 1).saturating_add(1)
}

/// `(1/k)⟨β ⊙ ∇δ, ∇δ⟩ · |∇δᵀm| ≤ η |∇δᵀm|`, up to `1e-12` relative slack.
pub fn overshoot_holds<T: Scalar>(beta: &[T], grad: &[T], m: &[T], k: u64, eta: T) -> bool {
    let gain: T =
        beta.iter().zip(grad).map(|(&b, &g)| b * g * g).sum::<T>() / T::from_u64(k).unwrap();
    let proj = dot(grad, m).abs();
    let lhs = gain * proj;
    let rhs = eta * proj;
    lhs <= rhs + T::lit(OVERSHOOT_SLACK) * rhs.max(T::min_positive_value())
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct RansReport<T> {
    pub delta: T,
    pub k: u64,
    pub xi: T,
    pub xi_bar: T,
    pub replayed: bool,
    pub replay_k: u64,
    pub overshoot_ok: bool,
}

fn bias_correction<T: Scalar>(decay: T, t: u64) -> T {
    let p = match i32::try_from(t) {
        Ok(t) => decay.powi(t),
        Err(_) => decay.powf(T::from_u64(t).unwrap()),
    };
    T::one() - p
}

// ξ = Σ g²/√ν with ν read from `inv_root` as 1/√ν.
fn measure<T: Scalar>(grad: &[T], inv_root: &[T]) -> T {
    grad.iter().zip(inv_root).map(|(&g, &r)| g * g * r).sum()
}

/// RAN with outlier-splitting and per-coordinate adaptive steps.
///
/// Order of operations: second-moment trace and its bias correction, outlier measure and its
/// trace, split factor, step vector `β = η/(ρ ξ̄ √ν)`, the m-step scaled by `1/k`, the w-step,
/// buffer insertion when `k > 1`, and at most one replay from the buffer.
pub fn rans_update<T, A, R>(
    st: &mut EstimatorState<T, A::Input>,
    sample: &DoubleSample<A::Input, T>,
    approx: &A,
    hp: &Hyperparameters<T>,
    gamma: T,
    rng: &mut R,
) -> RansReport<T>
where
    T: Scalar,
    A: ValueFunction<T>,
    A::Input: Clone,
    R: Rng + ?Sized,
{
    st.t += 1;
    let EstimatorState {
        w,
        m,
        nu_hat,
        xi_hat,
        t,
        buffer,
        work,
        overshoot_violations,
        ..
    } = st;
    let (delta, delta_alt) =
        delta_pair_into(approx, w, gamma, sample, &mut work.grad, &mut work.grad_alt);

    let lp = hp.lambda_prime;
    let corr = bias_correction(lp, *t);
    // work.step holds 1/√ν
    for i in 0..w.len() {
        let g = work.grad[i];
        nu_hat[i] = lp * nu_hat[i] + (T::one() - lp) * g * g;
        let nu = (nu_hat[i] / corr).max(T::lit(NU_FLOOR));
        work.step[i] = T::one() / nu.sqrt();
    }
    let xi = measure(&work.grad, &work.step);
    *xi_hat = lp * *xi_hat + (T::one() - lp) * xi;
    let xi_bar = *xi_hat / corr;
    let mut report = RansReport {
        delta,
        k: 1,
        xi,
        xi_bar,
        replayed: false,
        replay_k: 0,
        overshoot_ok: true,
    };

    if !(xi_bar > T::zero()) {
        // no gradient signal seen yet: the step vector is undefined, only decay the trace
        m.iter_mut().for_each(|x| *x *= hp.lambda);
        step_along_m(w, m, hp);
        return report;
    }

    let k = split_unchecked(xi, xi_bar, hp.rho);
    report.k = k;
    let scale = hp.eta / (hp.rho * xi_bar);
    // work.aux holds β
    for i in 0..w.len() {
        work.aux[i] = scale * work.step[i];
    }

    let apply = |m: &mut Vec<T>, w: &mut Vec<T>, grad: &[T], residual: T, k: u64| -> bool {
        let ok = overshoot_holds(&work.aux, grad, m, k, hp.eta);
        let c = (residual - dot(m, grad)) / T::from_u64(k).unwrap();
        for i in 0..m.len() {
            m[i] = hp.lambda * m[i] + c * work.aux[i] * grad[i];
        }
        step_along_m(w, m, hp);
        ok
    };

    let ok = apply(m, w, &work.grad, delta_alt, k);
    report.overshoot_ok &= ok;
    if k > 1 {
        buffer.insert(sample.clone(), k);
    }

    if let Some(idx) = buffer.draw(hp.sigma.to_f64_lossy(), rng) {
        let entry = buffer.get(idx);
        let (_, replay_alt) = delta_pair_into(
            approx,
            w,
            gamma,
            &entry.payload,
            &mut work.grad,
            &mut work.grad_alt,
        );
        let xi_r = measure(&work.grad, &work.step);
        let k2 = entry.k.max(split_unchecked(xi_r, xi_bar, hp.rho));
        let ok = apply(m, w, &work.grad, replay_alt, k2);
        report.overshoot_ok &= ok;
        report.replayed = true;
        report.replay_k = k2;
        buffer.consume(idx);
    }
    if !report.overshoot_ok {
        *overshoot_violations += 1;
    }
    report
}
