//! Finite Markov chains and MDPs with termination, policies, and sampling.
//!
//! Termination is encoded as the row-sum deficit of the transition matrix: a row summing to
//! `1 − p` terminates with probability `p`. There is no explicit absorbing state.

mod chain;
mod process;
mod sampling;

pub use chain::{ChainDocument, MarkovChain};
pub(crate) use process::sample_categorical;
pub use process::{chain_from_mdp, induced_augmented_chain, Mdp, Outcome, Policy};
pub use sampling::{
    double_step, step, DoubleSample, EpisodicSampler, SamplingMode, StateAction, TransitionSample,
};

/// Slack allowed on row sums and probability normalisation.
pub const PROB_TOL: f64 = 1e-12;

pub fn average_episode_length<T: crate::Scalar>(chain: &MarkovChain<T>) -> T {
    chain.average_episode_length()
}

pub fn self_loop_probability<T: crate::Scalar>(chain: &MarkovChain<T>) -> T {
    chain.self_loop_probability()
}
