//! Concrete environments: finite tasks as [`Mdp`]/[`MarkovChain`] values, CartPole as a
//! deterministic simulator.

mod cartpole;

pub use cartpole::{CartPole, CartPoleState, CartStep};

use crate::approx::FeatureMap;
use crate::linalg::Matrix;
use crate::mdp::{MarkovChain, Mdp, Outcome};
use crate::{Error, Result, Scalar};

/// States `0..n`; state `i` moves to `min(i+1, n−1)` with probability `1 − ε` and terminates
/// with probability `ε`. One action, zero rewards, episodes start in state 0.
pub fn hallway<T: Scalar>(n: usize, eps: T, gamma: T) -> Result<Mdp<T>> {
    if n == 0 {
        return Err(Error::InvalidParameter("hallway needs n >= 1".into()));
    }
    if !(eps >= T::zero() && eps < T::one()) {
        return Err(Error::InvalidParameter(format!(
            "hallway eps must be in [0,1), got {eps}"
        )));
    }
    let table = (0..n)
        .map(|i| {
            let mut row = vec![Outcome::to((i + 1).min(n - 1), T::one() - eps)];
            if eps > T::zero() {
                row.push(Outcome::terminate(eps));
            }
            row
        })
        .collect();
    let mut start = vec![T::zero(); n];
    start[0] = T::one();
    Mdp::new(n, 1, table, gamma)?.with_start(start)
}

/// Baird's star: six states, seven features, every state moves to the centre state.
#[derive(Clone, Debug)]
pub struct BairdStar<T> {
    pub mdp: Mdp<T>,
    pub features: FeatureMap<T>,
    /// Behaviour distribution over states (uniform).
    pub behavior: Vec<T>,
}

/// Outer states `0..5` have features `2e_i + e_6`, the centre state 5 has `e_5 + 2e_6`.
/// Zero rewards, uniform behaviour distribution.
pub fn baird_star<T: Scalar>(gamma: T) -> Result<BairdStar<T>> {
    let two = T::lit(2.0);
    let phi = Matrix::from_fn(6, 7, |s, j| match (s, j) {
        (0..=4, 6) => T::one(),
        (0..=4, j) if j == s => two,
        (5, 5) => T::one(),
        (5, 6) => two,
        _ => T::zero(),
    });
    let table = vec![vec![Outcome::to(5, T::one())]; 6];
    Ok(BairdStar {
        mdp: Mdp::new(6, 1, table, gamma)?,
        features: FeatureMap::new(phi)?,
        behavior: vec![T::one() / T::lit(6.0); 6],
    })
}

/// The initial weights used for the star experiment.
pub fn baird_initial_weights<T: Scalar>() -> Vec<T> {
    [2.0, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0]
        .into_iter()
        .map(T::lit)
        .collect()
}

/// `P = [[0, 1], [1, 0]]`, zero rewards.
pub fn two_state_loop<T: Scalar>(gamma: T) -> Result<MarkovChain<T>> {
    MarkovChain::new(
        Matrix::from_fn(2, 2, |i, j| if i != j { T::one() } else { T::zero() }),
        gamma,
    )
}

/// States `0..n`: state 1 moves to 0; state `i ≥ 2` moves to `i−1` or `i−2` with equal
/// probability; state 0 terminates with reward 1. Episodes start in state `n − 1`.
pub fn extended_boyan_chain<T: Scalar>(n: usize, gamma: T) -> Result<MarkovChain<T>> {
    if n < 2 {
        return Err(Error::InvalidParameter(format!(
            "extended Boyan chain needs n >= 2, got {n}"
        )));
    }
    let half = T::lit(0.5);
    let p = Matrix::from_fn(n, n, |i, j| match i {
        0 => T::zero(),
        1 => {
            if j == 0 {
                T::one()
            } else {
                T::zero()
            }
        }
        _ => {
            if j + 1 == i || j + 2 == i {
                half
            } else {
                T::zero()
            }
        }
    });
    let mut r_term = vec![T::zero(); n];
    r_term[0] = T::one();
    let mut start = vec![T::zero(); n];
    start[n - 1] = T::one();
    MarkovChain::new(p, gamma)?
        .with_rewards(Matrix::zeros(n, n), r_term)?
        .with_start(start)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hallway_rows() {
        let h = hallway(5, 0.1f64, 1.0).unwrap();
        assert_eq!(h.outcomes(0, 0)[0].next, Some(1));
        assert_eq!(h.outcomes(4, 0)[0].next, Some(4));
        assert_eq!(h.outcomes(4, 0)[1].next, None);
        assert!(hallway(5, 1.0f64, 1.0).is_err());
    }

    #[test]
    fn baird_features_layout() {
        let b = baird_star::<f64>(0.99).unwrap();
        assert_eq!(b.features.row(0), &[2.0, 0.0, 0.0, 0.0, 0.0, 0.0, 1.0]);
        assert_eq!(b.features.row(5), &[0.0, 0.0, 0.0, 0.0, 0.0, 1.0, 2.0]);
        assert!(b.mdp.is_deterministic());
    }

    #[test]
    fn boyan_rows() {
        let c = extended_boyan_chain::<f64>(5, 0.995).unwrap();
        assert_eq!(c.termination_probability(0), 1.0);
        assert_eq!(c.p().row(1), &[1.0, 0.0, 0.0, 0.0, 0.0]);
        assert_eq!(c.p().row(4), &[0.0, 0.0, 0.5, 0.5, 0.0]);
        assert_eq!(c.expected_rewards()[0], 1.0);
        assert!(extended_boyan_chain::<f64>(1, 0.9).is_err());
    }
}
