use std::time::Instant;

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::{EnvSpec, ExperimentConfig};
use crate::approx::{
    boyan_standard_features, softmax_policy, Linear, Mlp, ObsAction, Tabular, ValueFunction,
};
use crate::envs::{self, CartPole, CartPoleState};
use crate::estimators::{Algorithm, Estimator};
use crate::mdp::{
    induced_augmented_chain, DoubleSample, EpisodicSampler, Mdp, Policy, SamplingMode, StateAction,
    TransitionSample,
};
use crate::{Error, Result, Scalar};

/// Outlier-buffer counters at the end of a run (all zero for algorithms without a buffer).
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct BufferStats {
    pub high_water: usize,
    pub insertions: u64,
    /// `Σ (k − 1)` over the run.
    pub inserted_copies: u64,
    pub replays: u64,
    pub dropped: u64,
}

/// One seed's learning curve plus run metadata.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub config_hash: String,
    pub seed: u64,
    /// `(step, metric)`; steps strictly increasing, values finite.
    pub series: Vec<(u64, f64)>,
    pub wall_clock_secs: f64,
    /// Step at which weights or the metric stopped being finite.
    pub diverged_at: Option<u64>,
    pub steps_run: u64,
    pub buffer: BufferStats,
    pub overshoot_violations: u64,
}

impl RunRecord {
    pub fn final_value(&self) -> Option<f64> {
        self.series.last().map(|&(_, v)| v)
    }

    /// First logged step whose value is at or below `level`.
    pub fn first_step_below(&self, level: f64) -> Option<u64> {
        self.series
            .iter()
            .find(|&&(_, v)| v <= level)
            .map(|&(s, _)| s)
    }
}

/// Approximator attached to a finite task.
#[derive(Clone, Debug)]
pub enum TaskApprox {
    Tabular(Tabular),
    Linear(Linear<f64>),
}

/// A finite environment ready to sample: MDP, target policy, approximator and exact
/// state-action values.
#[derive(Clone, Debug)]
pub struct FiniteTask {
    pub mdp: Mdp<f64>,
    pub policy: Policy<f64>,
    pub approx: TaskApprox,
    pub true_values: Vec<f64>,
    pub sampling: SamplingMode,
    pub w0: Vec<f64>,
}

impl FiniteTask {
    pub fn from_spec(spec: &EnvSpec) -> Result<Self> {
        let (mdp, features, sampling, w0) = match *spec {
            EnvSpec::Hallway { n, eps, gamma } => (
                envs::hallway(n, eps, gamma)?,
                None,
                SamplingMode::Episodic,
                Some(vec![1.0; n]),
            ),
            EnvSpec::BairdStar { gamma } => {
                let star = envs::baird_star(gamma)?;
                (
                    star.mdp,
                    Some(star.features),
                    SamplingMode::Uniform,
                    Some(envs::baird_initial_weights()),
                )
            }
            EnvSpec::TwoStateLoop { gamma } => (
                Mdp::from_chain(&envs::two_state_loop(gamma)?)?,
                None,
                SamplingMode::Episodic,
                None,
            ),
            EnvSpec::ExtendedBoyan { n, features, gamma } => {
                let phi = boyan_standard_features(features)?;
                if phi.rows() != n {
                    return Err(Error::Config(format!(
                        "{features} tent features cover {} states, not {n}",
                        phi.rows()
                    )));
                }
                (
                    Mdp::from_chain(&envs::extended_boyan_chain(n, gamma)?)?,
                    Some(phi),
                    SamplingMode::Episodic,
                    None,
                )
            }
            EnvSpec::CartPole { .. } => {
                return Err(Error::Config("cart-pole is not a finite task".into()))
            }
        };
        let policy = Policy::uniform(mdp.n_states(), mdp.n_actions());
        let true_values = induced_augmented_chain(&mdp, &policy)?.true_values()?;
        let approx = match features {
            Some(phi) => TaskApprox::Linear(Linear::new(phi, mdp.n_actions())?),
            None => TaskApprox::Tabular(Tabular::new(mdp.n_states(), mdp.n_actions())),
        };
        let d = match &approx {
            TaskApprox::Tabular(t) => ValueFunction::<f64>::num_params(t),
            TaskApprox::Linear(l) => l.num_params(),
        };
        let w0 = w0.unwrap_or_else(|| vec![0.0; d]);
        Ok(Self {
            mdp,
            policy,
            approx,
            true_values,
            sampling,
            w0,
        })
    }

    pub fn value_error(&self, w: &[f64]) -> f64 {
        let (n, m) = (self.mdp.n_states(), self.mdp.n_actions());
        match &self.approx {
            TaskApprox::Tabular(a) => value_error(w, a, n, m, &self.true_values),
            TaskApprox::Linear(a) => value_error(w, a, n, m, &self.true_values),
        }
    }
}

/// Mean squared gap between approximate and true values over all state-action pairs, pair
/// `(s, a)` at index `s·n_actions + a` of `true_values`.
pub fn value_error<T, A>(
    w: &[T],
    approx: &A,
    n_states: usize,
    n_actions: usize,
    true_values: &[T],
) -> T
where
    T: Scalar,
    A: ValueFunction<T, Input = StateAction>,
{
    let mut acc = T::zero();
    for s in 0..n_states {
        for a in 0..n_actions {
            let gap = approx.value(w, &StateAction::new(s, a)) - true_values[s * n_actions + a];
            acc += gap * gap;
        }
    }
    acc / T::from_usize(n_states * n_actions).unwrap()
}

/// Monte-Carlo mean undiscounted return of `policy` over `episodes` rollouts.
pub fn mean_return_estimate<R: Rng + ?Sized>(
    env: &CartPole<f64>,
    episodes: usize,
    rng: &mut R,
    mut policy: impl FnMut(&CartPoleState<f64>, &mut R) -> usize,
) -> f64 {
    if episodes == 0 {
        return 0.0;
    }
    let total: f64 = (0..episodes).map(|_| env.rollout(rng, &mut policy)).sum();
    total / episodes as f64
}

fn softmax_action<R: Rng + ?Sized>(
    net: &Mlp<f64>,
    w: &[f64],
    obs: &[f64],
    coefficient: f64,
    rng: &mut R,
) -> usize {
    let p = softmax_policy(&net.forward(w, obs), coefficient);
    crate::mdp::sample_categorical(&p, rng)
}

/// Runs every seed of `config`, in parallel. Output order follows `config.seeds`.
pub fn run_experiment(config: &ExperimentConfig) -> Result<Vec<RunRecord>> {
    config.validate()?;
    config
        .seeds
        .par_iter()
        .map(|&seed| run_seed(config, seed))
        .collect()
}

/// One deterministic run.
pub fn run_seed(config: &ExperimentConfig, seed: u64) -> Result<RunRecord> {
    let started = Instant::now();
    let mut record = match config.environment {
        EnvSpec::CartPole { .. } => run_cartpole(config, seed)?,
        _ => {
            let task = FiniteTask::from_spec(&config.environment)?;
            match &task.approx {
                TaskApprox::Tabular(a) => run_finite(config, seed, &task, *a)?,
                TaskApprox::Linear(a) => run_finite(config, seed, &task, a.clone())?,
            }
        }
    };
    record.wall_clock_secs = started.elapsed().as_secs_f64();
    Ok(record)
}

fn initial_weights(config: &ExperimentConfig, default: Vec<f64>) -> Vec<f64> {
    match (&config.w0, config.init_value) {
        (Some(w), _) => w.clone(),
        (None, Some(c)) => vec![c; default.len()],
        (None, None) => default,
    }
}

fn finish<T: Scalar, X>(
    config: &ExperimentConfig,
    seed: u64,
    series: Vec<(u64, f64)>,
    diverged_at: Option<u64>,
    steps_run: u64,
    st: &crate::estimators::EstimatorState<T, X>,
) -> RunRecord {
    let b = &st.buffer;
    RunRecord {
        config_hash: config.hash(),
        seed,
        series,
        wall_clock_secs: 0.0,
        diverged_at,
        steps_run,
        buffer: BufferStats {
            high_water: b.high_water,
            insertions: b.insertions,
            inserted_copies: b.inserted_copies,
            replays: b.replays,
            dropped: b.dropped,
        },
        overshoot_violations: st.overshoot_violations,
    }
}

fn run_finite<A>(
    config: &ExperimentConfig,
    seed: u64,
    task: &FiniteTask,
    approx: A,
) -> Result<RunRecord>
where
    A: ValueFunction<f64, Input = StateAction> + Clone,
{
    let w0 = initial_weights(config, task.w0.clone());
    approx
        .check_params(&w0)
        .map_err(|e| Error::Config(e.to_string()))?;
    let gamma = task.mdp.gamma();
    let mut est = Estimator::new(
        config.algorithm.algo,
        config.algorithm.hyperparameters,
        gamma,
        approx,
        w0,
    )?;
    let mut master = ChaCha8Rng::seed_from_u64(seed);
    let mode = config.sampling.unwrap_or(task.sampling);
    let mut sampler = EpisodicSampler::new(&task.mdp, &task.policy, mode, &mut master)?;
    let mut update_rng = ChaCha8Rng::seed_from_u64(master.next_u64());
    let every = config.eval_every();
    let double = config.algorithm.algo.needs_double_sample();

    let mut series = vec![(0, task.value_error(est.weights()))];
    let mut diverged_at = None;
    let mut t = 0;
    while t < config.steps {
        t += 1;
        let sample = if double {
            sampler.next_double()
        } else {
            DoubleSample::degenerate(sampler.next_single())
        };
        est.update(&sample, &mut update_rng);
        if !est.state.is_finite() {
            diverged_at = Some(t);
            break;
        }
        if t % every == 0 || t == config.steps {
            let v = task.value_error(est.weights());
            if !v.is_finite() {
                diverged_at = Some(t);
                break;
            }
            series.push((t, v));
        }
    }
    Ok(finish(config, seed, series, diverged_at, t, &est.state))
}

fn run_cartpole(config: &ExperimentConfig, seed: u64) -> Result<RunRecord> {
    let EnvSpec::CartPole {
        gamma,
        horizon,
        hidden,
        softmax,
        eval_episodes,
    } = config.environment
    else {
        unreachable!("caller matched cart-pole");
    };
    let env = CartPole::<f64> {
        horizon,
        ..Default::default()
    };
    let net = Mlp::<f64>::new(CartPole::<f64>::OBS_DIM, hidden, CartPole::<f64>::N_ACTIONS)?;
    let mut master = ChaCha8Rng::seed_from_u64(seed);
    let mut init_rng = ChaCha8Rng::seed_from_u64(master.next_u64());
    let mut env_rng = ChaCha8Rng::seed_from_u64(master.next_u64());
    let mut alt_rng = ChaCha8Rng::seed_from_u64(master.next_u64());
    let mut update_rng = ChaCha8Rng::seed_from_u64(master.next_u64());
    let mut eval_rng = ChaCha8Rng::seed_from_u64(master.next_u64());

    let w0 = match (&config.w0, config.init_value) {
        (None, None) => net.init(&mut init_rng),
        _ => initial_weights(config, vec![0.0; net.num_params()]),
    };
    net.check_params(&w0)
        .map_err(|e| Error::Config(e.to_string()))?;
    let mut est = Estimator::new(
        config.algorithm.algo,
        config.algorithm.hyperparameters,
        gamma,
        net,
        w0,
    )?;
    if matches!(config.algorithm.algo, Algorithm::Gtd2 | Algorithm::DsfRan) {
        est.state.theta = net.init(&mut init_rng);
    }

    let every = config.eval_every();
    let mut series = Vec::new();
    let mut diverged_at = None;
    let mut state = env.reset(&mut env_rng);
    let mut action = softmax_action(
        &net,
        est.weights(),
        &state.observation(),
        softmax,
        &mut env_rng,
    );
    let mut t = 0;
    while t < config.steps {
        t += 1;
        let out = env.step(&state, action);
        let input = ObsAction {
            obs: state.observation(),
            action,
        };
        let (next, alt_next) = if out.terminated {
            (None, None)
        } else {
            let obs = out.state.observation();
            let a_next = softmax_action(&net, est.weights(), &obs, softmax, &mut env_rng);
            let a_alt = softmax_action(&net, est.weights(), &obs, softmax, &mut alt_rng);
            (
                Some(ObsAction {
                    obs: obs.clone(),
                    action: a_next,
                }),
                Some(ObsAction { obs, action: a_alt }),
            )
        };
        let next_action = next.as_ref().map(|x| x.action);
        let sample = DoubleSample {
            base: TransitionSample {
                input,
                reward: out.reward,
                next,
                t,
            },
            alt_reward: out.reward,
            alt_next,
        };
        est.update(&sample, &mut update_rng);
        if !est.state.is_finite() {
            diverged_at = Some(t);
            break;
        }
        match next_action {
            Some(a) if !out.truncated => {
                state = out.state;
                action = a;
            }
            _ => {
                state = env.reset(&mut env_rng);
                action = softmax_action(
                    &net,
                    est.weights(),
                    &state.observation(),
                    softmax,
                    &mut env_rng,
                );
            }
        }
        if t % every == 0 {
            let w = est.weights();
            let v = mean_return_estimate(&env, eval_episodes, &mut eval_rng, |s, rng| {
                softmax_action(&net, w, &s.observation(), softmax, rng)
            });
            series.push((t, v));
        }
    }
    Ok(finish(config, seed, series, diverged_at, t, &est.state))
}
