use crate::approx::ValueFunction;
use crate::linalg::{self, Matrix};
use crate::mdp::{MarkovChain, Mdp, Policy, StateAction};
use crate::{Error, Result, Scalar};

/// Exact Gauss-Newton matrix `Ĝ = E[∇δ ∇δᵀ]` and gradient direction `g = E[δ̄ E[∇δ]]` under
/// the uniform distribution over pre-states, at fixed weights.
#[derive(Clone, Debug, PartialEq)]
pub struct GaussNewtonPair<T> {
    pub g_hat: Matrix<T>,
    pub g: Vec<T>,
}

struct Branch<T> {
    mass: T,
    reward: T,
    next: Option<StateAction>,
}

impl<T: Scalar> GaussNewtonPair<T> {
    /// Enumerates every `(s, a)` pair and every `(s′, a′)` reachable under `policy`.
    pub fn from_mdp<A>(mdp: &Mdp<T>, policy: &Policy<T>, approx: &A, w: &[T]) -> Result<Self>
    where
        A: ValueFunction<T, Input = StateAction>,
    {
        if policy.n_states() != mdp.n_states() || policy.n_actions() != mdp.n_actions() {
            return Err(Error::Dimension(
                "policy shape does not match the MDP".into(),
            ));
        }
        let pairs = (0..mdp.n_states())
            .flat_map(|s| (0..mdp.n_actions()).map(move |a| StateAction::new(s, a)));
        let rows = pairs.map(|sa| {
            let mut branches = Vec::new();
            for o in mdp.outcomes(sa.s, sa.a) {
                match o.next {
                    None => branches.push(Branch {
                        mass: o.prob,
                        reward: o.reward,
                        next: None,
                    }),
                    Some(s2) => {
                        for b in 0..mdp.n_actions() {
                            let pb = policy.prob(s2, b);
                            if pb > T::zero() {
                                branches.push(Branch {
                                    mass: o.prob * pb,
                                    reward: o.reward,
                                    next: Some(StateAction::new(s2, b)),
                                });
                            }
                        }
                    }
                }
            }
            (sa, branches)
        });
        Self::accumulate(rows, mdp.gamma(), approx, w)
    }

    /// Chain state `i` is the input `StateAction { s: i, a: 0 }`.
    pub fn from_chain<A>(chain: &MarkovChain<T>, approx: &A, w: &[T]) -> Result<Self>
    where
        A: ValueFunction<T, Input = StateAction>,
    {
        let rows = (0..chain.n()).map(|i| {
            let mut branches: Vec<Branch<T>> = chain
                .p()
                .row(i)
                .iter()
                .enumerate()
                .filter(|(_, &p)| p > T::zero())
                .map(|(j, &p)| Branch {
                    mass: p,
                    reward: chain.r()[(i, j)],
                    next: Some(StateAction::new(j, 0)),
                })
                .collect();
            let term = chain.termination_probability(i);
            if term > T::zero() {
                branches.push(Branch {
                    mass: term,
                    reward: chain.r_term()[i],
                    next: None,
                });
            }
            (StateAction::new(i, 0), branches)
        });
        Self::accumulate(rows, chain.gamma(), approx, w)
    }

    fn accumulate<A, I>(rows: I, gamma: T, approx: &A, w: &[T]) -> Result<Self>
    where
        A: ValueFunction<T, Input = StateAction>,
        I: Iterator<Item = (StateAction, Vec<Branch<T>>)>,
    {
        approx.check_params(w)?;
        let d = approx.num_params();
        let mut g_hat = Matrix::zeros(d, d);
        let mut g = vec![T::zero(); d];
        let mut grad = vec![T::zero(); d];
        let mut mean_grad = vec![T::zero(); d];
        let mut count = 0usize;
        for (sa, branches) in rows {
            count += 1;
            let mut mean_delta = T::zero();
            mean_grad.iter_mut().for_each(|x| *x = T::zero());
            for br in &branches {
                grad.iter_mut().for_each(|x| *x = T::zero());
                let q = approx.value_and_add_grad(w, &sa, -T::one(), &mut grad);
                let next_q = match &br.next {
                    Some(x) => approx.value_and_add_grad(w, x, gamma, &mut grad),
                    None => T::zero(),
                };
                mean_delta += br.mass * (br.reward + gamma * next_q - q);
                crate::scalar::axpy(br.mass, &grad, &mut mean_grad);
                for i in 0..d {
                    let gi = br.mass * grad[i];
                    if gi != T::zero() {
                        crate::scalar::axpy(gi, &grad, g_hat.row_mut(i));
                    }
                }
            }
            crate::scalar::axpy(mean_delta, &mean_grad, &mut g);
        }
        if count == 0 {
            return Err(Error::Dimension("no pre-states to enumerate".into()));
        }
        let inv = T::one() / T::from_usize(count).unwrap();
        Ok(Self {
            g_hat: g_hat.scaled(inv),
            g: g.into_iter().map(|x| x * inv).collect(),
        })
    }

    /// `(Ĝ + (1 − λ)I)⁻¹ g`; pass `lambda = 1` for the unregularized direction.
    pub fn direction(&self, lambda: T) -> Result<Vec<T>> {
        gauss_newton_direction(self, lambda)
    }
}

/// `m_GN = (Ĝ + (1 − λ)I)⁻¹ g`. With `λ = 1` a singular `Ĝ` is an error.
pub fn gauss_newton_direction<T: Scalar>(pair: &GaussNewtonPair<T>, lambda: T) -> Result<Vec<T>> {
    let mut m = pair.g_hat.clone();
    m.add_diagonal(T::one() - lambda);
    linalg::solve(&m, &pair.g)
}
