use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::process::{sample_categorical, Mdp, Policy};
use crate::{Error, Result, Scalar};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct StateAction {
    pub s: usize,
    pub a: usize,
}

impl StateAction {
    pub fn new(s: usize, a: usize) -> Self {
        Self { s, a }
    }
}

/// One environment step. `next` is `None` on termination, so a next action exists exactly
/// when the next state is non-terminal.
#[derive(Clone, Debug, PartialEq)]
pub struct TransitionSample<X, T> {
    pub input: X,
    pub reward: T,
    pub next: Option<X>,
    pub t: u64,
}

/// A transition plus an independent second draw of `(r, s′, a′)` from the same `(s, a)`.
#[derive(Clone, Debug, PartialEq)]
pub struct DoubleSample<X, T> {
    pub base: TransitionSample<X, T>,
    pub alt_reward: T,
    pub alt_next: Option<X>,
}

impl<X: Clone, T: Copy> DoubleSample<X, T> {
    /// Reuses the base draw as the second draw (deterministic dynamics and policy).
    pub fn degenerate(base: TransitionSample<X, T>) -> Self {
        Self {
            alt_reward: base.reward,
            alt_next: base.next.clone(),
            base,
        }
    }
}

fn check_pair<T: Scalar>(mdp: &Mdp<T>, sa: StateAction) -> Result<()> {
    if sa.s >= mdp.n_states() || sa.a >= mdp.n_actions() {
        return Err(Error::Dimension(format!(
            "({}, {}) is not a state-action pair of this MDP",
            sa.s, sa.a
        )));
    }
    Ok(())
}

fn draw<T: Scalar, R: Rng + ?Sized>(
    mdp: &Mdp<T>,
    sa: StateAction,
    policy: &Policy<T>,
    rng: &mut R,
) -> (T, Option<StateAction>) {
    let o = mdp.sample_outcome(sa.s, sa.a, rng);
    let next = o.next.map(|s| StateAction::new(s, policy.sample(s, rng)));
    (o.reward, next)
}

/// Draws `(r, s′, a′)` from `p(·|s,a)` and `π(·|s′)`.
pub fn step<T: Scalar, R: Rng + ?Sized>(
    mdp: &Mdp<T>,
    sa: StateAction,
    policy: &Policy<T>,
    rng: &mut R,
) -> Result<TransitionSample<StateAction, T>> {
    check_pair(mdp, sa)?;
    let (reward, next) = draw(mdp, sa, policy, rng);
    Ok(TransitionSample {
        input: sa,
        reward,
        next,
        t: 0,
    })
}

/// Two conditionally independent draws from the same pre-state, each consuming its own
/// substream split off `rng`.
pub fn double_step<T: Scalar, R: Rng + ?Sized>(
    mdp: &Mdp<T>,
    sa: StateAction,
    policy: &Policy<T>,
    rng: &mut R,
) -> Result<DoubleSample<StateAction, T>> {
    check_pair(mdp, sa)?;
    let mut base_rng = ChaCha8Rng::seed_from_u64(rng.next_u64());
    let mut alt_rng = ChaCha8Rng::seed_from_u64(rng.next_u64());
    let (reward, next) = draw(mdp, sa, policy, &mut base_rng);
    let (alt_reward, alt_next) = draw(mdp, sa, policy, &mut alt_rng);
    Ok(DoubleSample {
        base: TransitionSample {
            input: sa,
            reward,
            next,
            t: 0,
        },
        alt_reward,
        alt_next,
    })
}

/// How the pre-state of each transition is chosen.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum SamplingMode {
    /// Follow trajectories; restart from the start distribution after termination.
    #[default]
    Episodic,
    /// Draw every pre-state i.i.d. uniformly over states, action from the policy.
    Uniform,
}

/// Sample stream over a finite MDP under a fixed policy.
///
/// Owns two generators split from the run generator at construction: the base stream drives
/// the trajectory, the alt stream supplies the second draw of each double sample.
pub struct EpisodicSampler<'a, T> {
    mdp: &'a Mdp<T>,
    policy: &'a Policy<T>,
    mode: SamplingMode,
    base: ChaCha8Rng,
    alt: ChaCha8Rng,
    current: Option<StateAction>,
    t: u64,
    episodes: u64,
}

impl<'a, T: Scalar> EpisodicSampler<'a, T> {
    pub fn new<R: Rng + ?Sized>(
        mdp: &'a Mdp<T>,
        policy: &'a Policy<T>,
        mode: SamplingMode,
        rng: &mut R,
    ) -> Result<Self> {
        if policy.n_states() != mdp.n_states() || policy.n_actions() != mdp.n_actions() {
            return Err(Error::Dimension(
                "policy shape does not match the MDP".into(),
            ));
        }
        let base = ChaCha8Rng::seed_from_u64(rng.next_u64());
        let alt = ChaCha8Rng::seed_from_u64(rng.next_u64());
        Ok(Self {
            mdp,
            policy,
            mode,
            base,
            alt,
            current: None,
            t: 0,
            episodes: 0,
        })
    }

    pub fn steps(&self) -> u64 {
        self.t
    }

    pub fn episodes_completed(&self) -> u64 {
        self.episodes
    }

    fn pre_state(&mut self) -> StateAction {
        match (self.mode, self.current) {
            (SamplingMode::Episodic, Some(sa)) => sa,
            (SamplingMode::Episodic, None) => {
                let s = sample_categorical(self.mdp.start(), &mut self.base);
                StateAction::new(s, self.policy.sample(s, &mut self.base))
            }
            (SamplingMode::Uniform, _) => {
                let s = self.base.gen_range(0..self.mdp.n_states());
                StateAction::new(s, self.policy.sample(s, &mut self.base))
            }
        }
    }

    pub fn next_single(&mut self) -> TransitionSample<StateAction, T> {
        let sa = self.pre_state();
        let (reward, next) = draw(self.mdp, sa, self.policy, &mut self.base);
        self.t += 1;
        if next.is_none() {
            self.episodes += 1;
        }
        self.current = next;
        TransitionSample {
            input: sa,
            reward,
            next,
            t: self.t,
        }
    }

    /// Same base trajectory as [`next_single`](Self::next_single), plus an alt draw.
    pub fn next_double(&mut self) -> DoubleSample<StateAction, T> {
        let base = self.next_single();
        let (alt_reward, alt_next) = draw(self.mdp, base.input, self.policy, &mut self.alt);
        DoubleSample {
            base,
            alt_reward,
            alt_next,
        }
    }
}
