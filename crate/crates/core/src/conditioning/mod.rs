//! Exact MSBE landscape analysis under the uniform state (or state-action) distribution.

mod gauss_newton;

pub use gauss_newton::{gauss_newton_direction, GaussNewtonPair};

use crate::approx::FeatureMap;
use crate::linalg::{self, Matrix, SymmetricEigen};
use crate::mdp::{induced_augmented_chain, MarkovChain, Mdp, Policy};
use crate::{Error, Result, Scalar};

/// Eigenvalues at or below this fraction of `λ_max` count as zero.
pub const SINGULAR_RATIO: f64 = 1e-12;

/// `wᵀ A w / scale` with `A` symmetric positive semidefinite.
#[derive(Clone, Debug, PartialEq)]
pub struct QuadraticForm<T> {
    pub a: Matrix<T>,
    pub scale: T,
}

impl<T: Scalar> QuadraticForm<T> {
    pub fn new(a: Matrix<T>, scale: T) -> Result<Self> {
        let asym = a.asymmetry().ok_or_else(|| {
            Error::Dimension(format!(
                "quadratic form needs a square matrix, got {}x{}",
                a.rows(),
                a.cols()
            ))
        })?;
        if asym > T::lit(1e-10) {
            return Err(Error::NotSymmetric(asym.to_f64_lossy()));
        }
        Ok(Self { a, scale })
    }

    pub fn dim(&self) -> usize {
        self.a.rows()
    }

    pub fn eval(&self, w: &[T]) -> T {
        crate::scalar::dot(w, &self.a.matvec(w)) / self.scale
    }

    pub fn eigen(&self) -> Result<SymmetricEigen<T>> {
        SymmetricEigen::new(&self.a)
    }
}

/// `A = Φᵀ(I − γP)ᵀ(I − γP)Φ` with scale `n`; `None` features means tabular (`Φ = I`).
pub fn msbe_hessian<T: Scalar>(
    chain: &MarkovChain<T>,
    phi: Option<&FeatureMap<T>>,
) -> Result<QuadraticForm<T>> {
    let m = residual_features(chain, phi)?;
    QuadraticForm::new(m.gram(), T::from_usize(chain.n()).unwrap())
}

// (I − γP)Φ
fn residual_features<T: Scalar>(
    chain: &MarkovChain<T>,
    phi: Option<&FeatureMap<T>>,
) -> Result<Matrix<T>> {
    let op = chain.residual_operator();
    match phi {
        None => Ok(op),
        Some(f) if f.rows() == chain.n() => Ok(op.matmul(f.matrix())),
        Some(f) => Err(Error::Dimension(format!(
            "{} feature rows for a {}-state chain",
            f.rows(),
            chain.n()
        ))),
    }
}

/// `λ_max / λ_min` of the form's matrix; `+∞` when `λ_min ≤ 1e-12 · λ_max`.
pub fn condition_number<T: Scalar>(form: &QuadraticForm<T>) -> Result<T> {
    Ok(condition_from_eigen(&form.eigen()?))
}

pub fn condition_from_eigen<T: Scalar>(eig: &SymmetricEigen<T>) -> T {
    let (lo, hi) = (eig.min(), eig.max());
    if hi <= T::zero() || lo <= T::lit(SINGULAR_RATIO) * hi {
        T::infinity()
    } else {
        hi / lo
    }
}

fn values_of<T: Scalar>(
    chain: &MarkovChain<T>,
    phi: Option<&FeatureMap<T>>,
    w: &[T],
) -> Result<Vec<T>> {
    match phi {
        None if w.len() == chain.n() => Ok(w.to_vec()),
        Some(f) if f.rows() == chain.n() && f.dim() == w.len() => Ok(f.values(w)),
        _ => Err(Error::Dimension(
            "weights, features and chain disagree in size".into(),
        )),
    }
}

/// Expected Bellman residual per state, `r̄ + γPv − v` at `v = Φw`.
pub fn bellman_residuals<T: Scalar>(
    chain: &MarkovChain<T>,
    phi: Option<&FeatureMap<T>>,
    w: &[T],
) -> Result<Vec<T>> {
    let v = values_of(chain, phi, w)?;
    let pv = chain.p().matvec(&v);
    Ok(chain
        .expected_rewards()
        .iter()
        .zip(pv.iter().zip(&v))
        .map(|(&r, (&next, &cur))| r + chain.gamma() * next - cur)
        .collect())
}

/// Exact MSBE under the uniform distribution.
pub fn msbe_value<T: Scalar>(
    chain: &MarkovChain<T>,
    phi: Option<&FeatureMap<T>>,
    w: &[T],
) -> Result<T> {
    let res = bellman_residuals(chain, phi, w)?;
    Ok(crate::scalar::norm_sq(&res) / T::from_usize(res.len()).unwrap())
}

/// `∇MSBE(w) = 2Φᵀ(I − γP)ᵀ((I − γP)Φw − r̄)/n`
pub fn msbe_gradient<T: Scalar>(
    chain: &MarkovChain<T>,
    phi: Option<&FeatureMap<T>>,
    w: &[T],
) -> Result<Vec<T>> {
    let m = residual_features(chain, phi)?;
    let res = bellman_residuals(chain, phi, w)?;
    let scale = -T::lit(2.0) / T::from_usize(chain.n()).unwrap();
    Ok(m.t_matvec(&res).into_iter().map(|x| x * scale).collect())
}

/// `(1 − γh)²/4 · min(1/(1 − γ)², l²)` for the chain's mean episode length `l` and mean
/// self-loop probability `h`.
pub fn chain_condition_bound<T: Scalar>(chain: &MarkovChain<T>) -> T {
    condition_lower_bound(
        chain.gamma(),
        chain.average_episode_length(),
        chain.self_loop_probability(),
    )
}

/// The same bound from raw `(γ, l, h)`; a zero prefactor gives 0 even for infinite `l`.
pub fn condition_lower_bound<T: Scalar>(gamma: T, l: T, h: T) -> T {
    let pre = (T::one() - gamma * h).powi(2) / T::lit(4.0);
    if pre == T::zero() {
        return T::zero();
    }
    let horizon = if gamma < T::one() {
        (T::one() - gamma).powi(-2)
    } else {
        T::infinity()
    };
    pre * horizon.min(l * l)
}

/// Every state moves to the last state with probability 1.
pub fn worst_case_chain<T: Scalar>(n: usize, gamma: T) -> Result<MarkovChain<T>> {
    if n == 0 {
        return Err(Error::InvalidParameter(
            "worst-case chain needs n >= 1".into(),
        ));
    }
    if !(gamma > T::zero() && gamma < T::one()) {
        return Err(Error::InvalidParameter(format!(
            "worst-case chain needs gamma in (0,1), got {gamma}"
        )));
    }
    MarkovChain::new(
        Matrix::from_fn(n, n, |_, j| if j == n - 1 { T::one() } else { T::zero() }),
        gamma,
    )
}

/// `γ⁴n²/(1 − γ)²`
pub fn worst_case_bound<T: Scalar>(n: usize, gamma: T) -> T {
    let n = T::from_usize(n).unwrap();
    gamma.powi(4) * n * n / (T::one() - gamma).powi(2)
}

/// An `n`-state, `m`-action MDP and policy whose augmented chain is a worst-case chain over
/// the `nm` pairs: every pair moves to the last state, where the policy always picks action 0.
pub fn worst_case_mdp<T: Scalar>(n: usize, m: usize, gamma: T) -> Result<(Mdp<T>, Policy<T>)> {
    if n == 0 || m == 0 {
        return Err(Error::InvalidParameter(
            "worst-case MDP needs n, m >= 1".into(),
        ));
    }
    let table = vec![vec![crate::mdp::Outcome::to(n - 1, T::one())]; n * m];
    let mdp = Mdp::new(n, m, table, gamma)?;
    let uniform = T::one() / T::from_usize(m).unwrap();
    let pi = Matrix::from_fn(n, m, |s, a| match (s == n - 1, a == 0) {
        (true, true) => T::one(),
        (true, false) => T::zero(),
        _ => uniform,
    });
    Ok((mdp, Policy::new(pi)?))
}

/// Exact MSBE minimizer (minimum-norm when the normal equations are singular) and the mean
/// squared gap between its values and `true_values`.
pub fn msbe_minimizer_and_value_error<T: Scalar>(
    chain: &MarkovChain<T>,
    phi: Option<&FeatureMap<T>>,
    true_values: &[T],
) -> Result<(Vec<T>, T)> {
    if true_values.len() != chain.n() {
        return Err(Error::Dimension(format!(
            "{} true values for {} states",
            true_values.len(),
            chain.n()
        )));
    }
    let m = residual_features(chain, phi)?;
    let rhs = m.t_matvec(&chain.expected_rewards());
    let w = linalg::pseudo_solve_symmetric(&m.gram(), &rhs)?;
    let v = values_of(chain, phi, &w)?;
    let ve = v
        .iter()
        .zip(true_values)
        .map(|(&a, &b)| (a - b) * (a - b))
        .sum::<T>()
        / T::from_usize(v.len()).unwrap();
    Ok((w, ve))
}

/// Tabular condition number over state-action pairs.
pub fn augmented_condition_number<T: Scalar>(mdp: &Mdp<T>, policy: &Policy<T>) -> Result<T> {
    condition_number(&msbe_hessian(&induced_augmented_chain(mdp, policy)?, None)?)
}

/// The pair-level counterpart of [`chain_condition_bound`], using `l′` and `h′` of the augmented chain.
pub fn augmented_bound<T: Scalar>(mdp: &Mdp<T>, policy: &Policy<T>) -> Result<T> {
    Ok(chain_condition_bound(&induced_augmented_chain(
        mdp, policy,
    )?))
}
