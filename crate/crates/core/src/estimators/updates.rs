use super::{delta_into, delta_pair_into, AdamState, EstimatorState, Hyperparameters, RanForm};
use crate::approx::ValueFunction;
use crate::mdp::{DoubleSample, TransitionSample};
use crate::scalar::{axpy, dot};
use crate::Scalar;

/// `w ← w − α(scale·dir + l2·w)`, or the Adam step on the same gradient.
fn descend<T: Scalar>(
    w: &mut [T],
    adam: Option<&mut AdamState<T>>,
    scale: T,
    dir: &[T],
    alpha: T,
    l2: T,
    grad: &mut [T],
    step: &mut [T],
) {
    for i in 0..w.len() {
        grad[i] = scale * dir[i] + l2 * w[i];
    }
    match adam {
        Some(a) => a.apply(w, grad, alpha, step),
        None => axpy(-alpha, grad, w),
    }
}

/// Semi-gradient TD(0): `w ← w + αδ∇q(s,a)`.
pub fn td0_update<T, A>(
    st: &mut EstimatorState<T, A::Input>,
    sample: &TransitionSample<A::Input, T>,
    approx: &A,
    hp: &Hyperparameters<T>,
    gamma: T,
) -> T
where
    T: Scalar,
    A: ValueFunction<T>,
{
    st.t += 1;
    let work = &mut st.work;
    work.aux.iter_mut().for_each(|x| *x = T::zero());
    let q = approx.value_and_add_grad(&st.w, &sample.input, T::one(), &mut work.aux);
    let next = sample
        .next
        .as_ref()
        .map_or(T::zero(), |x| approx.value(&st.w, x));
    let delta = sample.reward + gamma * next - q;
    descend(
        &mut st.w,
        st.adam.as_mut(),
        -delta,
        &work.aux,
        hp.alpha,
        hp.l2,
        &mut work.grad_alt,
        &mut work.step,
    );
    delta
}

/// Residual gradient: `w ← w − αδ′∇δ`.
pub fn rg_update<T, A>(
    st: &mut EstimatorState<T, A::Input>,
    sample: &DoubleSample<A::Input, T>,
    approx: &A,
    hp: &Hyperparameters<T>,
    gamma: T,
) -> T
where
    T: Scalar,
    A: ValueFunction<T>,
{
    st.t += 1;
    let work = &mut st.work;
    let (delta, delta_alt) = delta_pair_into(
        approx,
        &st.w,
        gamma,
        sample,
        &mut work.grad,
        &mut work.grad_alt,
    );
    descend(
        &mut st.w,
        st.adam.as_mut(),
        delta_alt,
        &work.grad,
        hp.alpha,
        hp.l2,
        &mut work.aux,
        &mut work.step,
    );
    delta
}

/// Saddle-point update with a learned residual `δ̂_θ` (same approximator, weights `θ`):
/// `w ← w − αδ̂_θ∇δ`, `θ ← θ + η(δ − δ̂_θ)∇_θδ̂_θ`.
pub fn gtd2_update<T, A>(
    st: &mut EstimatorState<T, A::Input>,
    sample: &TransitionSample<A::Input, T>,
    approx: &A,
    hp: &Hyperparameters<T>,
    gamma: T,
) -> T
where
    T: Scalar,
    A: ValueFunction<T>,
{
    st.t += 1;
    let work = &mut st.work;
    let delta = delta_into(approx, &st.w, gamma, sample, &mut work.grad);
    work.aux.iter_mut().for_each(|x| *x = T::zero());
    let delta_hat = approx.value_and_add_grad(&st.theta, &sample.input, T::one(), &mut work.aux);
    descend(
        &mut st.w,
        st.adam.as_mut(),
        delta_hat,
        &work.grad,
        hp.alpha,
        hp.l2,
        &mut work.grad_alt,
        &mut work.step,
    );
    descend(
        &mut st.theta,
        st.adam_theta.as_mut(),
        -(delta - delta_hat),
        &work.aux,
        hp.eta,
        T::zero(),
        &mut work.grad_alt,
        &mut work.step,
    );
    delta
}

/// RAN: the m-recursion selected by `hp.ran_form`, then `w ← w − αm`.
pub fn ran_update<T, A>(
    st: &mut EstimatorState<T, A::Input>,
    sample: &DoubleSample<A::Input, T>,
    approx: &A,
    hp: &Hyperparameters<T>,
    gamma: T,
) -> T
where
    T: Scalar,
    A: ValueFunction<T>,
{
    st.t += 1;
    let work = &mut st.work;
    let (delta, delta_alt) = delta_pair_into(
        approx,
        &st.w,
        gamma,
        sample,
        &mut work.grad,
        &mut work.grad_alt,
    );
    let (m, g) = (&mut st.m, &work.grad);
    match hp.ran_form {
        RanForm::TwoLine => {
            m.iter_mut().for_each(|x| *x *= hp.lambda);
            axpy(hp.beta * delta_alt, g, m);
            let c = dot(m, g);
            axpy(-hp.beta * c, g, m);
        }
        RanForm::SingleLine => {
            let c = delta_alt - dot(m, g);
            m.iter_mut().for_each(|x| *x *= hp.lambda);
            axpy(hp.beta * c, g, m);
        }
        RanForm::Unbiased => {
            let c = delta_alt - dot(m, &work.grad_alt);
            m.iter_mut().for_each(|x| *x *= hp.lambda);
            axpy(hp.beta * c, g, m);
        }
    }
    step_along_m(&mut st.w, &st.m, hp);
    delta
}

/// `w ← w − α(m + l2·w)`
pub(crate) fn step_along_m<T: Scalar>(w: &mut [T], m: &[T], hp: &Hyperparameters<T>) {
    for (wi, &mi) in w.iter_mut().zip(m) {
        *wi -= hp.alpha * (mi + hp.l2 * *wi);
    }
}

/// Double-sampling-free RAN: the two-line RAN recursion with `δ̂_θ(s,a)` in place of `δ′`,
/// followed by `θ ← θ + η(δ − δ̂_θ)∇_θδ̂_θ`.
pub fn dsf_ran_update<T, A>(
    st: &mut EstimatorState<T, A::Input>,
    sample: &TransitionSample<A::Input, T>,
    approx: &A,
    hp: &Hyperparameters<T>,
    gamma: T,
) -> T
where
    T: Scalar,
    A: ValueFunction<T>,
{
    st.t += 1;
    let work = &mut st.work;
    let delta = delta_into(approx, &st.w, gamma, sample, &mut work.grad);
    work.aux.iter_mut().for_each(|x| *x = T::zero());
    let delta_hat = approx.value_and_add_grad(&st.theta, &sample.input, T::one(), &mut work.aux);
    let (m, g) = (&mut st.m, &work.grad);
    m.iter_mut().for_each(|x| *x *= hp.lambda);
    axpy(hp.beta * delta_hat, g, m);
    let c = dot(m, g);
    axpy(-hp.beta * c, g, m);
    step_along_m(&mut st.w, &st.m, hp);
    axpy(hp.eta * (delta - delta_hat), &work.aux, &mut st.theta);
    delta
}
