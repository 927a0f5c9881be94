use rand::Rng;

use super::chain::{check_distribution, MarkovChain};
use super::PROB_TOL;
use crate::linalg::Matrix;
use crate::{Error, Result, Scalar};

/// One entry of `p(s′, r | s, a)`; `next == None` is termination.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Outcome<T> {
    pub next: Option<usize>,
    pub reward: T,
    pub prob: T,
}

impl<T: Scalar> Outcome<T> {
    pub fn to(next: usize, prob: T) -> Self {
        Self {
            next: Some(next),
            reward: T::zero(),
            prob,
        }
    }

    pub fn terminate(prob: T) -> Self {
        Self {
            next: None,
            reward: T::zero(),
            prob,
        }
    }

    pub fn with_reward(mut self, reward: T) -> Self {
        self.reward = reward;
        self
    }
}

/// Finite MDP. `table[s * n_actions + a]` lists the outcomes of taking `a` in `s`.
#[derive(Clone, Debug, PartialEq)]
pub struct Mdp<T> {
    n_states: usize,
    n_actions: usize,
    table: Vec<Vec<Outcome<T>>>,
    gamma: T,
    start: Vec<T>,
}

impl<T: Scalar> Mdp<T> {
    /// Validates that every `(s, a)` row is a distribution over next states plus termination.
    /// The start distribution defaults to uniform.
    pub fn new(
        n_states: usize,
        n_actions: usize,
        table: Vec<Vec<Outcome<T>>>,
        gamma: T,
    ) -> Result<Self> {
        if n_states == 0 || n_actions == 0 {
            return Err(Error::Dimension(
                "an MDP needs at least one state and one action".into(),
            ));
        }
        if table.len() != n_states * n_actions {
            return Err(Error::Dimension(format!(
                "expected {} (state, action) rows, got {}",
                n_states * n_actions,
                table.len()
            )));
        }
        for (idx, row) in table.iter().enumerate() {
            let (s, a) = (idx / n_actions, idx % n_actions);
            let mut total = T::zero();
            for o in row {
                if !(o.prob >= T::zero() && o.prob <= T::one()) {
                    return Err(Error::InvalidProbability(format!(
                        "p(·|{s},{a}) has entry {}",
                        o.prob
                    )));
                }
                if matches!(o.next, Some(j) if j >= n_states) {
                    return Err(Error::Dimension(format!(
                        "p(·|{s},{a}) points past state {}",
                        n_states - 1
                    )));
                }
                if !o.reward.is_finite() {
                    return Err(Error::InvalidParameter(format!(
                        "non-finite reward at ({s},{a})"
                    )));
                }
                total += o.prob;
            }
            if (total - T::one()).abs() > T::lit(PROB_TOL) {
                return Err(Error::InvalidProbability(format!(
                    "p(·|{s},{a}) sums to {total}"
                )));
            }
        }
        if !(gamma >= T::zero() && gamma <= T::one()) {
            return Err(Error::InvalidParameter(format!(
                "discount {gamma} outside [0,1]"
            )));
        }
        let uniform = T::one() / T::from_usize(n_states).unwrap();
        Ok(Self {
            n_states,
            n_actions,
            table,
            gamma,
            start: vec![uniform; n_states],
        })
    }

    pub fn with_start(mut self, start: Vec<T>) -> Result<Self> {
        if start.len() != self.n_states {
            return Err(Error::Dimension(format!(
                "start distribution has {} entries for {} states",
                start.len(),
                self.n_states
            )));
        }
        check_distribution(&start, "start distribution")?;
        self.start = start;
        Ok(self)
    }

    /// Single-action MDP with the chain's dynamics; transition rewards become deterministic.
    pub fn from_chain(chain: &MarkovChain<T>) -> Result<Self> {
        let n = chain.n();
        let table = (0..n)
            .map(|i| {
                let mut row: Vec<Outcome<T>> = chain
                    .p()
                    .row(i)
                    .iter()
                    .enumerate()
                    .filter(|(_, &p)| p > T::zero())
                    .map(|(j, &p)| Outcome::to(j, p).with_reward(chain.r()[(i, j)]))
                    .collect();
                let rest = T::one() - row.iter().map(|o| o.prob).sum::<T>();
                if rest > T::zero() {
                    row.push(Outcome::terminate(rest).with_reward(chain.r_term()[i]));
                }
                row
            })
            .collect();
        Mdp::new(n, 1, table, chain.gamma())?.with_start(chain.start().to_vec())
    }

    pub fn n_states(&self) -> usize {
        self.n_states
    }

    pub fn n_actions(&self) -> usize {
        self.n_actions
    }

    pub fn gamma(&self) -> T {
        self.gamma
    }

    pub fn start(&self) -> &[T] {
        &self.start
    }

    pub fn outcomes(&self, s: usize, a: usize) -> &[Outcome<T>] {
        &self.table[s * self.n_actions + a]
    }

    /// True when every `(s, a)` has a single outcome.
    pub fn is_deterministic(&self) -> bool {
        self.table
            .iter()
            .all(|row| row.iter().filter(|o| o.prob > T::zero()).count() <= 1)
    }

    pub(crate) fn sample_outcome<R: Rng + ?Sized>(
        &self,
        s: usize,
        a: usize,
        rng: &mut R,
    ) -> &Outcome<T> {
        let row = self.outcomes(s, a);
        let u = T::lit(rng.gen::<f64>());
        let mut acc = T::zero();
        for o in row {
            acc += o.prob;
            if u < acc {
                return o;
            }
        }
        // rounding left u above the running total; fall back to the last positive entry
        row.iter()
            .rev()
            .find(|o| o.prob > T::zero())
            .unwrap_or(&row[row.len() - 1])
    }
}

/// Stationary policy `π(a|s)` stored as a row-stochastic `|S|×|A|` matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct Policy<T> {
    pi: Matrix<T>,
}

impl<T: Scalar> Policy<T> {
    pub fn new(pi: Matrix<T>) -> Result<Self> {
        for s in 0..pi.rows() {
            check_distribution(pi.row(s), &format!("policy row {s}"))?;
        }
        Ok(Self { pi })
    }

    pub fn uniform(n_states: usize, n_actions: usize) -> Self {
        let p = T::one() / T::from_usize(n_actions).unwrap();
        Self {
            pi: Matrix::from_fn(n_states, n_actions, |_, _| p),
        }
    }

    pub fn n_states(&self) -> usize {
        self.pi.rows()
    }

    pub fn n_actions(&self) -> usize {
        self.pi.cols()
    }

    pub fn prob(&self, s: usize, a: usize) -> T {
        self.pi[(s, a)]
    }

    pub fn row(&self, s: usize) -> &[T] {
        self.pi.row(s)
    }

    pub fn matrix(&self) -> &Matrix<T> {
        &self.pi
    }

    pub fn sample<R: Rng + ?Sized>(&self, s: usize, rng: &mut R) -> usize {
        sample_categorical(self.pi.row(s), rng)
    }

    fn check_against(&self, mdp: &Mdp<T>) -> Result<()> {
        if self.n_states() != mdp.n_states() || self.n_actions() != mdp.n_actions() {
            return Err(Error::Dimension(format!(
                "policy is {}x{} but the MDP has {} states and {} actions",
                self.n_states(),
                self.n_actions(),
                mdp.n_states(),
                mdp.n_actions()
            )));
        }
        Ok(())
    }
}

/// Inverse-CDF draw; the last index absorbs rounding.
pub(crate) fn sample_categorical<T: Scalar, R: Rng + ?Sized>(probs: &[T], rng: &mut R) -> usize {
    if probs.len() == 1 {
        return 0;
    }
    let u = T::lit(rng.gen::<f64>());
    let mut acc = T::zero();
    for (i, &p) in probs.iter().enumerate() {
        acc += p;
        if u < acc {
            return i;
        }
    }
    probs
        .iter()
        .rposition(|&p| p > T::zero())
        .unwrap_or(probs.len() - 1)
}

/// Marginalizes the policy out of the MDP: `P(s→s′) = Σ_a π(a|s) p(s′|s,a)`, with rewards
/// replaced by their conditional expectations given the pair `(s, s′)`.
pub fn chain_from_mdp<T: Scalar>(mdp: &Mdp<T>, policy: &Policy<T>) -> Result<MarkovChain<T>> {
    policy.check_against(mdp)?;
    let n = mdp.n_states();
    let mut p = Matrix::<T>::zeros(n, n);
    let mut reward_mass = Matrix::<T>::zeros(n, n);
    let mut term = vec![T::zero(); n];
    let mut term_reward = vec![T::zero(); n];
    for s in 0..n {
        for a in 0..mdp.n_actions() {
            let pa = policy.prob(s, a);
            if pa == T::zero() {
                continue;
            }
            for o in mdp.outcomes(s, a) {
                let mass = pa * o.prob;
                match o.next {
                    Some(j) => {
                        p[(s, j)] += mass;
                        reward_mass[(s, j)] += mass * o.reward;
                    }
                    None => {
                        term[s] += mass;
                        term_reward[s] += mass * o.reward;
                    }
                }
            }
        }
    }
    let r = Matrix::from_fn(n, n, |i, j| {
        if p[(i, j)] > T::zero() {
            reward_mass[(i, j)] / p[(i, j)]
        } else {
            T::zero()
        }
    });
    let r_term = (0..n)
        .map(|i| {
            if term[i] > T::zero() {
                term_reward[i] / term[i]
            } else {
                T::zero()
            }
        })
        .collect();
    clamp_rows(&mut p);
    MarkovChain::new(p, mdp.gamma())?
        .with_rewards(r, r_term)?
        .with_start(mdp.start().to_vec())
}

/// Chain over the `nm` state-action pairs, pair `(s, a)` at index `s·m + a`:
/// `P((s,a)→(s′,a′)) = p(s′|s,a) π(a′|s′)`.
pub fn induced_augmented_chain<T: Scalar>(
    mdp: &Mdp<T>,
    policy: &Policy<T>,
) -> Result<MarkovChain<T>> {
    policy.check_against(mdp)?;
    let (n, m) = (mdp.n_states(), mdp.n_actions());
    let nm = n * m;
    let mut next_mass = Matrix::<T>::zeros(nm, n);
    let mut next_reward = Matrix::<T>::zeros(nm, n);
    let mut term = vec![T::zero(); nm];
    let mut term_reward = vec![T::zero(); nm];
    for s in 0..n {
        for a in 0..m {
            let row = s * m + a;
            for o in mdp.outcomes(s, a) {
                match o.next {
                    Some(j) => {
                        next_mass[(row, j)] += o.prob;
                        next_reward[(row, j)] += o.prob * o.reward;
                    }
                    None => {
                        term[row] += o.prob;
                        term_reward[row] += o.prob * o.reward;
                    }
                }
            }
        }
    }
    let mut p = Matrix::<T>::zeros(nm, nm);
    let mut r = Matrix::<T>::zeros(nm, nm);
    for row in 0..nm {
        for j in 0..n {
            let mass = next_mass[(row, j)];
            if mass == T::zero() {
                continue;
            }
            let mean_reward = next_reward[(row, j)] / mass;
            for b in 0..m {
                p[(row, j * m + b)] = mass * policy.prob(j, b);
                r[(row, j * m + b)] = mean_reward;
            }
        }
    }
    let r_term = (0..nm)
        .map(|i| {
            if term[i] > T::zero() {
                term_reward[i] / term[i]
            } else {
                T::zero()
            }
        })
        .collect();
    let start = (0..nm)
        .map(|i| mdp.start()[i / m] * policy.prob(i / m, i % m))
        .collect();
    clamp_rows(&mut p);
    MarkovChain::new(p, mdp.gamma())?
        .with_rewards(r, r_term)?
        .with_start(start)
}

// Accumulated sums can exceed 1 by an ulp or two; rescale such rows back onto the simplex.
fn clamp_rows<T: Scalar>(p: &mut Matrix<T>) {
    for i in 0..p.rows() {
        let row = p.row_mut(i);
        let sum: T = row.iter().copied().sum();
        if sum > T::one() {
            row.iter_mut().for_each(|x| *x = (*x / sum).min(T::one()));
        }
    }
}
