//! Online value estimators. Each consumes one (double) sample per step and mutates an
//! [`EstimatorState`].

mod adam;
mod buffer;
mod outlier_sgd;
mod rans;
mod updates;

pub use adam::{adam_update, AdamState};
pub use buffer::{OutlierBuffer, OutlierEntry};
pub use outlier_sgd::{OutlierMeasure, OutlierSplitSgd, SampleLoss, SplitReport};
pub use rans::{overshoot_holds, rans_update, split_factor, RansReport};
pub use updates::{dsf_ran_update, gtd2_update, ran_update, rg_update, td0_update};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::approx::ValueFunction;
use crate::mdp::DoubleSample;
use crate::{Error, Result, Scalar};

/// Which m-recursion RAN uses.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RanForm {
    /// `m ← λm + βδ′∇δ; m ← m − β(mᵀ∇δ)∇δ`, applied in sequence.
    #[default]
    TwoLine,
    /// `m ← λm + β(δ′ − mᵀ∇δ)∇δ` in one assignment.
    SingleLine,
    /// `m ← λm + β(δ′ − mᵀ∇δ′)∇δ`: unbiased sample of the regularized quadratic's gradient.
    Unbiased,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(
    default,
    deny_unknown_fields,
    bound(deserialize = "T: Scalar + Deserialize<'de>")
)]
pub struct Hyperparameters<T> {
    pub alpha: T,
    pub beta: T,
    pub eta: T,
    pub lambda: T,
    pub lambda_prime: T,
    pub rho: T,
    pub sigma: T,
    pub ran_form: RanForm,
    /// Use Adam with step `alpha` instead of plain SGD (TD(0), RG, GTD2).
    pub adam: bool,
    /// Quadratic weight penalty coefficient.
    pub l2: T,
    pub buffer_capacity: usize,
}

impl<T: Scalar> Default for Hyperparameters<T> {
    fn default() -> Self {
        Self {
            alpha: T::lit(0.01),
            beta: T::lit(0.1),
            eta: T::lit(0.2),
            lambda: T::lit(0.999),
            lambda_prime: T::lit(0.9999),
            rho: T::lit(1.2),
            sigma: T::lit(0.02),
            ran_form: RanForm::TwoLine,
            adam: false,
            l2: T::zero(),
            buffer_capacity: 4096,
        }
    }
}

impl<T: Scalar> Hyperparameters<T> {
    pub fn validate(&self) -> Result<()> {
        let bad = |what: &str, v: T| {
            Err(Error::InvalidParameter(format!(
                "{what} = {v} is out of range"
            )))
        };
        for (name, v) in [
            ("alpha", self.alpha),
            ("beta", self.beta),
            ("eta", self.eta),
            ("l2", self.l2),
        ] {
            if !(v >= T::zero() && v.is_finite()) {
                return bad(name, v);
            }
        }
        if !(self.rho > T::one() && self.rho.is_finite()) {
            return bad("rho", self.rho);
        }
        for (name, v) in [("lambda", self.lambda), ("lambda_prime", self.lambda_prime)] {
            if !(v >= T::zero() && v < T::one()) {
                return bad(name, v);
            }
        }
        if !(self.sigma > T::zero() && self.sigma <= T::one()) {
            return bad("sigma", self.sigma);
        }
        if self.buffer_capacity == 0 {
            return Err(Error::InvalidParameter(
                "buffer_capacity must be positive".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Algorithm {
    Td0,
    Rg,
    Gtd2,
    Ran,
    DsfRan,
    Rans,
}

impl Algorithm {
    pub fn name(self) -> &'static str {
        match self {
            Algorithm::Td0 => "td0",
            Algorithm::Rg => "rg",
            Algorithm::Gtd2 => "gtd2",
            Algorithm::Ran => "ran",
            Algorithm::DsfRan => "dsf_ran",
            Algorithm::Rans => "rans",
        }
    }

    /// Whether the update reads the second draw of a double sample.
    pub fn needs_double_sample(self) -> bool {
        matches!(self, Algorithm::Rg | Algorithm::Ran | Algorithm::Rans)
    }
}

/// Scratch vectors reused across steps.
#[derive(Clone, Debug, Default)]
pub(crate) struct Workspace<T> {
    pub grad: Vec<T>,
    pub grad_alt: Vec<T>,
    pub aux: Vec<T>,
    pub step: Vec<T>,
}

impl<T: Scalar> Workspace<T> {
    fn new(d: usize) -> Self {
        Self {
            grad: vec![T::zero(); d],
            grad_alt: vec![T::zero(); d],
            aux: vec![T::zero(); d],
            step: vec![T::zero(); d],
        }
    }
}

/// Everything an estimator carries between transitions.
#[derive(Clone, Debug)]
pub struct EstimatorState<T, X> {
    pub w: Vec<T>,
    pub m: Vec<T>,
    pub theta: Vec<T>,
    pub nu_hat: Vec<T>,
    pub xi_hat: T,
    pub t: u64,
    pub buffer: OutlierBuffer<DoubleSample<X, T>>,
    pub adam: Option<AdamState<T>>,
    pub adam_theta: Option<AdamState<T>>,
    /// Steps on which the overshoot inequality failed (RANS).
    pub overshoot_violations: u64,
    pub(crate) work: Workspace<T>,
}

impl<T: Scalar, X> EstimatorState<T, X> {
    /// `theta` starts at zero; set it directly for approximators that need a random start.
    pub fn new(w: Vec<T>, hp: &Hyperparameters<T>) -> Self {
        let d = w.len();
        let adam = hp.adam.then(|| AdamState::new(d));
        let adam_theta = hp.adam.then(|| AdamState::new(d));
        Self {
            m: vec![T::zero(); d],
            theta: vec![T::zero(); d],
            nu_hat: vec![T::zero(); d],
            xi_hat: T::zero(),
            t: 0,
            buffer: OutlierBuffer::new(hp.buffer_capacity),
            adam,
            adam_theta,
            overshoot_violations: 0,
            work: Workspace::new(d),
            w,
        }
    }

    pub fn is_finite(&self) -> bool {
        crate::scalar::all_finite(&self.w)
            && crate::scalar::all_finite(&self.m)
            && crate::scalar::all_finite(&self.theta)
    }
}

/// `(δ, δ′, ∇δ, ∇δ′)` for one double sample.
#[derive(Clone, Debug, PartialEq)]
pub struct DeltaPair<T> {
    pub delta: T,
    pub delta_prime: T,
    pub grad_delta: Vec<T>,
    pub grad_delta_prime: Vec<T>,
}

/// `δ = r + γq(s′,a′) − q(s,a)`, `∇δ = γ∇q(s′,a′) − ∇q(s,a)`; a terminal next state contributes
/// nothing to either.
pub fn delta_pair<T, A>(
    approx: &A,
    w: &[T],
    gamma: T,
    sample: &DoubleSample<A::Input, T>,
) -> DeltaPair<T>
where
    T: Scalar,
    A: ValueFunction<T>,
{
    let d = approx.num_params();
    let (mut g, mut g_alt) = (vec![T::zero(); d], vec![T::zero(); d]);
    let (delta, delta_prime) = delta_pair_into(approx, w, gamma, sample, &mut g, &mut g_alt);
    DeltaPair {
        delta,
        delta_prime,
        grad_delta: g,
        grad_delta_prime: g_alt,
    }
}

pub(crate) fn delta_pair_into<T, A>(
    approx: &A,
    w: &[T],
    gamma: T,
    sample: &DoubleSample<A::Input, T>,
    grad: &mut [T],
    grad_alt: &mut [T],
) -> (T, T)
where
    T: Scalar,
    A: ValueFunction<T>,
{
    grad.iter_mut().for_each(|x| *x = T::zero());
    let q = approx.value_and_add_grad(w, &sample.base.input, -T::one(), grad);
    grad_alt.copy_from_slice(grad);
    let next = match &sample.base.next {
        Some(x) => approx.value_and_add_grad(w, x, gamma, grad),
        None => T::zero(),
    };
    let alt = match &sample.alt_next {
        Some(x) => approx.value_and_add_grad(w, x, gamma, grad_alt),
        None => T::zero(),
    };
    (
        sample.base.reward + gamma * next - q,
        sample.alt_reward + gamma * alt - q,
    )
}

/// Single-draw `δ` and `∇δ`.
pub(crate) fn delta_into<T, A>(
    approx: &A,
    w: &[T],
    gamma: T,
    sample: &crate::mdp::TransitionSample<A::Input, T>,
    grad: &mut [T],
) -> T
where
    T: Scalar,
    A: ValueFunction<T>,
{
    grad.iter_mut().for_each(|x| *x = T::zero());
    let q = approx.value_and_add_grad(w, &sample.input, -T::one(), grad);
    let next = match &sample.next {
        Some(x) => approx.value_and_add_grad(w, x, gamma, grad),
        None => T::zero(),
    };
    sample.reward + gamma * next - q
}

/// What one call to [`Estimator::update`] did.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct StepReport {
    pub delta: f64,
    /// Split factor of the online sample (RANS; 1 elsewhere).
    pub k: u64,
    pub replayed: bool,
    pub overshoot_ok: bool,
}

/// An algorithm bound to its approximator, hyperparameters and state.
#[derive(Clone, Debug)]
pub struct Estimator<T, A: ValueFunction<T>>
where
    T: Scalar,
{
    pub algo: Algorithm,
    pub hp: Hyperparameters<T>,
    pub gamma: T,
    pub approx: A,
    pub state: EstimatorState<T, A::Input>,
}

impl<T, A> Estimator<T, A>
where
    T: Scalar,
    A: ValueFunction<T>,
    A::Input: Clone,
{
    pub fn new(
        algo: Algorithm,
        hp: Hyperparameters<T>,
        gamma: T,
        approx: A,
        w0: Vec<T>,
    ) -> Result<Self> {
        hp.validate()?;
        approx.check_params(&w0)?;
        if !(gamma >= T::zero() && gamma <= T::one()) {
            return Err(Error::InvalidParameter(format!(
                "discount {gamma} outside [0,1]"
            )));
        }
        let state = EstimatorState::new(w0, &hp);
        Ok(Self {
            algo,
            hp,
            gamma,
            approx,
            state,
        })
    }

    pub fn weights(&self) -> &[T] {
        &self.state.w
    }

    /// Single-draw algorithms read only `sample.base`.
    pub fn update<R: Rng + ?Sized>(
        &mut self,
        sample: &DoubleSample<A::Input, T>,
        rng: &mut R,
    ) -> StepReport {
        let (hp, gamma, approx, st) = (&self.hp, self.gamma, &self.approx, &mut self.state);
        let plain = |delta: T| StepReport {
            delta: delta.to_f64_lossy(),
            k: 1,
            replayed: false,
            overshoot_ok: true,
        };
        match self.algo {
            Algorithm::Td0 => plain(td0_update(st, &sample.base, approx, hp, gamma)),
            Algorithm::Rg => plain(rg_update(st, sample, approx, hp, gamma)),
            Algorithm::Gtd2 => plain(gtd2_update(st, &sample.base, approx, hp, gamma)),
            Algorithm::Ran => plain(ran_update(st, sample, approx, hp, gamma)),
            Algorithm::DsfRan => plain(dsf_ran_update(st, &sample.base, approx, hp, gamma)),
            Algorithm::Rans => {
                let r = rans_update(st, sample, approx, hp, gamma, rng);
                StepReport {
                    delta: r.delta.to_f64_lossy(),
                    k: r.k,
                    replayed: r.replayed,
                    overshoot_ok: r.overshoot_ok,
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_are_valid() {
        Hyperparameters::<f64>::default().validate().unwrap();
        let hp = Hyperparameters::<f64> {
            rho: 1.0,
            ..Default::default()
        };
        assert!(hp.validate().is_err());
        let hp = Hyperparameters::<f64> {
            lambda: 1.0,
            ..Default::default()
        };
        assert!(hp.validate().is_err());
        let hp = Hyperparameters::<f64> {
            sigma: 0.0,
            ..Default::default()
        };
        assert!(hp.validate().is_err());
    }

    #[test]
    fn hyperparameters_from_partial_json() {
        let hp: Hyperparameters<f64> =
            serde_json::from_str(r#"{"alpha": 0.5, "ran_form": "single_line"}"#).unwrap();
        assert_eq!(hp.alpha, 0.5);
        assert_eq!(hp.ran_form, RanForm::SingleLine);
        assert_eq!(hp.rho, 1.2);
    }
}
