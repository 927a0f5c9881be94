use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::PROB_TOL;
use crate::linalg::{self, Matrix};
use crate::{Error, Result, Scalar};

/// Markov chain with termination, per-transition rewards and a discount.
///
/// `r[(i, j)]` is the expected reward of the transition `i → j`; `r_term[i]` the expected
/// reward of terminating from `i`.
#[derive(Clone, Debug, PartialEq)]
pub struct MarkovChain<T> {
    p: Matrix<T>,
    r: Matrix<T>,
    r_term: Vec<T>,
    gamma: T,
    start: Vec<T>,
}

/// Serialized chain layout: `{"n", "P", "gamma"}` plus optional `"r"`, `"r_term"` and `"start"`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ChainDocument {
    pub n: usize,
    #[serde(rename = "P")]
    pub p: Vec<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub r: Option<Vec<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub r_term: Option<Vec<f64>>,
    pub gamma: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub start: Option<Vec<f64>>,
}

impl<T: Scalar> MarkovChain<T> {
    /// Zero rewards and a uniform start distribution.
    pub fn new(p: Matrix<T>, gamma: T) -> Result<Self> {
        if !p.is_square() || p.rows() == 0 {
            return Err(Error::Dimension(format!(
                "transition matrix must be square and non-empty, got {}x{}",
                p.rows(),
                p.cols()
            )));
        }
        let n = p.rows();
        let tol = T::lit(PROB_TOL);
        for i in 0..n {
            let row = p.row(i);
            if let Some(j) = row.iter().position(|&x| !(x >= T::zero() && x <= T::one())) {
                return Err(Error::InvalidProbability(format!(
                    "P[{i}][{j}] = {} outside [0,1]",
                    row[j]
                )));
            }
            let sum: T = row.iter().copied().sum();
            if sum > T::one() + tol {
                return Err(Error::InvalidProbability(format!(
                    "row {i} sums to {sum} > 1"
                )));
            }
        }
        if !(gamma >= T::zero() && gamma <= T::one()) {
            return Err(Error::InvalidParameter(format!(
                "discount {gamma} outside [0,1]"
            )));
        }
        let uniform = T::one() / T::from_usize(n).unwrap();
        Ok(Self {
            r: Matrix::zeros(n, n),
            r_term: vec![T::zero(); n],
            gamma,
            start: vec![uniform; n],
            p,
        })
    }

    pub fn with_rewards(mut self, r: Matrix<T>, r_term: Vec<T>) -> Result<Self> {
        let n = self.n();
        if r.rows() != n || r.cols() != n || r_term.len() != n {
            return Err(Error::Dimension(format!(
                "reward tables must be {n}x{n} and {n}"
            )));
        }
        if !r.is_finite() || !crate::scalar::all_finite(&r_term) {
            return Err(Error::InvalidParameter("rewards must be finite".into()));
        }
        self.r = r;
        self.r_term = r_term;
        Ok(self)
    }

    pub fn with_start(mut self, start: Vec<T>) -> Result<Self> {
        check_distribution(&start, "start distribution")?;
        if start.len() != self.n() {
            return Err(Error::Dimension(format!(
                "start distribution has {} entries for {} states",
                start.len(),
                self.n()
            )));
        }
        self.start = start;
        Ok(self)
    }

    pub fn with_gamma(mut self, gamma: T) -> Result<Self> {
        if !(gamma >= T::zero() && gamma <= T::one()) {
            return Err(Error::InvalidParameter(format!(
                "discount {gamma} outside [0,1]"
            )));
        }
        self.gamma = gamma;
        Ok(self)
    }

    pub fn n(&self) -> usize {
        self.p.rows()
    }

    pub fn p(&self) -> &Matrix<T> {
        &self.p
    }

    pub fn r(&self) -> &Matrix<T> {
        &self.r
    }

    pub fn r_term(&self) -> &[T] {
        &self.r_term
    }

    pub fn gamma(&self) -> T {
        self.gamma
    }

    pub fn start(&self) -> &[T] {
        &self.start
    }

    pub fn termination_probability(&self, s: usize) -> T {
        let sum: T = self.p.row(s).iter().copied().sum();
        (T::one() - sum).max(T::zero())
    }

    /// Expected one-step reward from each state.
    pub fn expected_rewards(&self) -> Vec<T> {
        (0..self.n())
            .map(|i| {
                let cont = crate::scalar::dot(self.p.row(i), self.r.row(i));
                cont + self.termination_probability(i) * self.r_term[i]
            })
            .collect()
    }

    /// `I − γP`
    pub fn residual_operator(&self) -> Matrix<T> {
        let mut m = self.p.scaled(-self.gamma);
        m.add_diagonal(T::one());
        m
    }

    /// Solves the Bellman equation `v = r̄ + γPv`.
    pub fn true_values(&self) -> Result<Vec<T>> {
        linalg::solve(&self.residual_operator(), &self.expected_rewards())
    }

    /// Expected steps to termination from each state: the solution of `(I − P)𝒍 = 𝟏`.
    pub fn episode_lengths(&self) -> Result<Vec<T>> {
        let mut m = self.p.scaled(-T::one());
        m.add_diagonal(T::one());
        let lengths = linalg::solve(&m, &vec![T::one(); self.n()])?;
        // a numerically tiny pivot can slip through on chains that never terminate
        if lengths.iter().any(|&l| !l.is_finite() || l < T::zero()) {
            return Err(Error::Singular);
        }
        Ok(lengths)
    }

    /// Mean of [`episode_lengths`](Self::episode_lengths); `+∞` when termination is unreachable.
    pub fn average_episode_length(&self) -> T {
        match self.episode_lengths() {
            Ok(l) => l.iter().copied().sum::<T>() / T::from_usize(l.len()).unwrap(),
            Err(_) => T::infinity(),
        }
    }

    /// Mean of the diagonal of `P`.
    pub fn self_loop_probability(&self) -> T {
        self.p.trace() / T::from_usize(self.n()).unwrap()
    }

    /// Draws the next state (`None` on termination) and the transition reward.
    pub fn sample_next<R: Rng + ?Sized>(&self, s: usize, rng: &mut R) -> (Option<usize>, T) {
        let u = T::lit(rng.gen::<f64>());
        let mut acc = T::zero();
        for (j, &pj) in self.p.row(s).iter().enumerate() {
            acc += pj;
            if u < acc {
                return (Some(j), self.r[(s, j)]);
            }
        }
        (None, self.r_term[s])
    }

    pub fn from_document(doc: &ChainDocument) -> Result<Self> {
        if doc.p.len() != doc.n {
            return Err(Error::Dimension(format!(
                "\"n\" is {} but \"P\" has {} rows",
                doc.n,
                doc.p.len()
            )));
        }
        let to_t = |rows: &[Vec<f64>]| -> Result<Matrix<T>> {
            let rows: Vec<Vec<T>> = rows
                .iter()
                .map(|r| r.iter().map(|&x| T::lit(x)).collect())
                .collect();
            Matrix::from_rows(&rows).ok_or_else(|| Error::Dimension("ragged matrix rows".into()))
        };
        let mut chain = Self::new(to_t(&doc.p)?, T::lit(doc.gamma))?;
        if doc.r.is_some() || doc.r_term.is_some() {
            let r = match &doc.r {
                Some(r) => to_t(r)?,
                None => Matrix::zeros(doc.n, doc.n),
            };
            let r_term = match &doc.r_term {
                Some(v) => v.iter().map(|&x| T::lit(x)).collect(),
                None => vec![T::zero(); doc.n],
            };
            chain = chain.with_rewards(r, r_term)?;
        }
        if let Some(start) = &doc.start {
            chain = chain.with_start(start.iter().map(|&x| T::lit(x)).collect())?;
        }
        Ok(chain)
    }

    pub fn to_document(&self) -> ChainDocument {
        let rows = |m: &Matrix<T>| -> Vec<Vec<f64>> {
            m.to_rows()
                .into_iter()
                .map(|r| r.into_iter().map(Scalar::to_f64_lossy).collect())
                .collect()
        };
        ChainDocument {
            n: self.n(),
            p: rows(&self.p),
            r: Some(rows(&self.r)),
            r_term: Some(self.r_term.iter().map(|x| x.to_f64_lossy()).collect()),
            gamma: self.gamma.to_f64_lossy(),
            start: Some(self.start.iter().map(|x| x.to_f64_lossy()).collect()),
        }
    }

    pub fn from_json_str(text: &str) -> Result<Self> {
        Self::from_document(&serde_json::from_str(text)?)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json_str(&std::fs::read_to_string(path)?)
    }

    pub fn to_json_string(&self) -> String {
        serde_json::to_string_pretty(&self.to_document()).expect("chain document serializes")
    }
}

pub(crate) fn check_distribution<T: Scalar>(p: &[T], what: &str) -> Result<()> {
    if p.iter().any(|&x| !(x >= T::zero() && x <= T::one())) {
        return Err(Error::InvalidProbability(format!(
            "{what} has an entry outside [0,1]"
        )));
    }
    let sum: T = p.iter().copied().sum();
    if (sum - T::one()).abs() > T::lit(PROB_TOL) * T::from_usize(p.len().max(1)).unwrap() {
        return Err(Error::InvalidProbability(format!("{what} sums to {sum}")));
    }
    Ok(())
}
