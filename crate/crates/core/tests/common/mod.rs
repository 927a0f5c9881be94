#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use valuelab::approx::ValueFunction;
use valuelab::linalg::Matrix;
use valuelab::mdp::{MarkovChain, Mdp, Outcome};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Upper 1% point of chi-square with `df` degrees of freedom (Wilson-Hilferty).
pub fn chi2_crit_99(df: usize) -> f64 {
    let k = df as f64;
    let z = 2.326_347_874;
    let c = 2.0 / (9.0 * k);
    k * (1.0 - c + z * c.sqrt()).powi(3)
}

/// Pearson statistic of observed counts against expected probabilities (zero-mass cells skipped).
pub fn chi2_stat(counts: &[u64], probs: &[f64]) -> (f64, usize) {
    let total: u64 = counts.iter().sum();
    let mut stat = 0.0;
    let mut cells = 0usize;
    for (&c, &p) in counts.iter().zip(probs) {
        if p > 0.0 {
            let e = p * total as f64;
            stat += (c as f64 - e).powi(2) / e;
            cells += 1;
        } else {
            assert_eq!(c, 0, "sampled a zero-probability outcome");
        }
    }
    (stat, cells.saturating_sub(1))
}

/// Random substochastic matrix; each row keeps `1 − term` of its mass, `term ∈ [lo, hi]`.
pub fn random_substochastic(n: usize, lo: f64, hi: f64, rng: &mut impl Rng) -> Matrix<f64> {
    let mut p = Matrix::zeros(n, n);
    for i in 0..n {
        let raw: Vec<f64> = (0..n).map(|_| rng.gen::<f64>().powi(3)).collect();
        let total: f64 = raw.iter().sum();
        let keep = 1.0 - rng.gen_range(lo..=hi);
        for j in 0..n {
            p[(i, j)] = raw[j] / total * keep;
        }
    }
    p
}

/// Random MDP with a few outcomes per pair, random rewards and some termination mass.
pub fn random_mdp(n: usize, m: usize, gamma: f64, rng: &mut impl Rng) -> Mdp<f64> {
    let table = (0..n * m)
        .map(|_| {
            let k = rng.gen_range(1..=n.min(3));
            let mut w: Vec<f64> = (0..=k).map(|_| rng.gen_range(0.1..1.0)).collect();
            let total: f64 = w.iter().sum();
            w.iter_mut().for_each(|x| *x /= total);
            let mut row: Vec<Outcome<f64>> = (0..k)
                .map(|i| {
                    Outcome::to(rng.gen_range(0..n), w[i]).with_reward(rng.gen_range(-1.0..1.0))
                })
                .collect();
            row.push(
                Outcome::terminate(1.0 - w[..k].iter().sum::<f64>())
                    .with_reward(rng.gen_range(-1.0..1.0)),
            );
            row
        })
        .collect();
    Mdp::new(n, m, table, gamma).unwrap()
}

pub fn assert_close(a: f64, b: f64, rel: f64) {
    let scale = a.abs().max(b.abs()).max(1e-300);
    assert!((a - b).abs() <= rel * scale, "{a} vs {b} (rel tol {rel})");
}

/// Rank by Gaussian elimination with partial pivoting.
pub fn rank(m: &Matrix<f64>) -> usize {
    let mut a = m.to_rows();
    let (rows, cols) = (m.rows(), m.cols());
    let mut r = 0;
    for c in 0..cols {
        let Some(p) = (r..rows).max_by(|&i, &j| a[i][c].abs().total_cmp(&a[j][c].abs())) else {
            break;
        };
        if a[p][c].abs() < 1e-10 {
            continue;
        }
        a.swap(r, p);
        for i in r + 1..rows {
            let f = a[i][c] / a[r][c];
            for k in c..cols {
                a[i][k] -= f * a[r][k];
            }
        }
        r += 1;
    }
    r
}

/// Central differences, step 1e-5; passes when each coordinate is within `rel` relative error
/// or the absolute floor 1e-8.
pub fn fd_check<A: ValueFunction<f64>>(
    approx: &A,
    w: &[f64],
    x: &A::Input,
    rel: f64,
) -> Result<(), String> {
    let g = approx.grad(w, x);
    let h = 1e-5;
    let mut wp = w.to_vec();
    for i in 0..w.len() {
        wp[i] = w[i] + h;
        let up = approx.value(&wp, x);
        wp[i] = w[i] - h;
        let down = approx.value(&wp, x);
        wp[i] = w[i];
        let fd = (up - down) / (2.0 * h);
        let err = (fd - g[i]).abs();
        if err > 1e-8 && err > rel * fd.abs().max(g[i].abs()) {
            return Err(format!("coordinate {i}: analytic {} vs numeric {fd}", g[i]));
        }
    }
    Ok(())
}

/// Random chain with rewards, termination mass up to 0.5 and γ from {0.8, 0.9, 0.99}.
pub fn random_chain(seed: u64, n: usize) -> MarkovChain<f64> {
    let mut r = rng(seed);
    let gamma = [0.8, 0.9, 0.99][r.gen_range(0..3)];
    let p = random_substochastic(n, 0.0, r.gen_range(0.0..0.5), &mut r);
    let rewards = Matrix::from_fn(n, n, |_, _| r.gen_range(-1.0..1.0));
    let term: Vec<f64> = (0..n).map(|_| r.gen_range(-1.0..1.0)).collect();
    MarkovChain::new(p, gamma)
        .unwrap()
        .with_rewards(rewards, term)
        .unwrap()
}
