use std::path::Path;

use rand::Rng;

use crate::linalg::Matrix;
use crate::{Error, Result, Scalar};

/// `n × d` feature matrix, one row per state (or state-action pair).
#[derive(Clone, Debug, PartialEq)]
pub struct FeatureMap<T> {
    phi: Matrix<T>,
}

impl<T: Scalar> FeatureMap<T> {
    pub fn new(phi: Matrix<T>) -> Result<Self> {
        if phi.cols() == 0 || phi.rows() == 0 {
            return Err(Error::Dimension(
                "feature map needs at least one row and one feature".into(),
            ));
        }
        if !phi.is_finite() {
            return Err(Error::InvalidParameter(
                "feature entries must be finite".into(),
            ));
        }
        Ok(Self { phi })
    }

    pub fn identity(n: usize) -> Self {
        Self {
            phi: Matrix::identity(n),
        }
    }

    pub fn rows(&self) -> usize {
        self.phi.rows()
    }

    pub fn dim(&self) -> usize {
        self.phi.cols()
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[T] {
        self.phi.row(i)
    }

    pub fn matrix(&self) -> &Matrix<T> {
        &self.phi
    }

    /// Values `Φw` for every row.
    pub fn values(&self, w: &[T]) -> Vec<T> {
        self.phi.matvec(w)
    }

    /// Headerless CSV, one row per state.
    pub fn to_csv(&self) -> String {
        let mut out = csv::WriterBuilder::new()
            .has_headers(false)
            .from_writer(Vec::new());
        for i in 0..self.rows() {
            out.write_record(self.row(i).iter().map(|v| v.to_f64_lossy().to_string()))
                .expect("writing to memory cannot fail");
        }
        String::from_utf8(out.into_inner().expect("in-memory flush")).expect("csv output is utf-8")
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let mut reader = csv::ReaderBuilder::new()
            .has_headers(false)
            .trim(csv::Trim::All)
            .from_reader(text.as_bytes());
        let mut rows = Vec::new();
        for (line, record) in reader.records().enumerate() {
            let record = record.map_err(|e| Error::Parse(format!("feature csv: {e}")))?;
            let row = record
                .iter()
                .map(|field| {
                    field.parse::<f64>().map(T::lit).map_err(|_| {
                        Error::Parse(format!(
                            "feature csv row {}: bad number {field:?}",
                            line + 1
                        ))
                    })
                })
                .collect::<Result<Vec<T>>>()?;
            rows.push(row);
        }
        let phi = Matrix::from_rows(&rows)
            .ok_or_else(|| Error::Dimension("feature csv rows differ in length".into()))?;
        Self::new(phi)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_csv(&std::fs::read_to_string(path)?)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_csv())?;
        Ok(())
    }
}

/// Boyan-style tent features for the `n = 4d − 3` state extended Boyan chain:
/// `Φ[j][i] = 1 − |j − 4i|/4` for `j ∈ [max(0, 4i−3), min(n−1, 4i+3)]`.
pub fn boyan_standard_features<T: Scalar>(d: usize) -> Result<FeatureMap<T>> {
    if d <= 1 {
        return Err(Error::InvalidParameter(format!(
            "standard features need d > 1, got {d}"
        )));
    }
    let n = 4 * d - 3;
    let mut phi = Matrix::zeros(n, d);
    for i in 0..d {
        let centre = 4 * i;
        for j in centre.saturating_sub(3)..=(centre + 3).min(n - 1) {
            let gap = T::from_usize(j.abs_diff(centre)).unwrap();
            phi[(j, i)] = T::one() - gap / T::lit(4.0);
        }
    }
    FeatureMap::new(phi)
}

/// I.i.d. fair Bernoulli entries.
pub fn random_binary_features<T: Scalar, R: Rng + ?Sized>(
    n: usize,
    d: usize,
    rng: &mut R,
) -> Result<FeatureMap<T>> {
    if n == 0 || d == 0 {
        return Err(Error::InvalidParameter(
            "random features need n, d >= 1".into(),
        ));
    }
    FeatureMap::new(Matrix::from_fn(n, d, |_, _| {
        if rng.gen::<bool>() {
            T::one()
        } else {
            T::zero()
        }
    }))
}

/// `p(a) ∝ exp(coefficient · q(a))`, computed after subtracting the maximum.
pub fn softmax_policy<T: Scalar>(q: &[T], coefficient: T) -> Vec<T> {
    let mut out = Vec::with_capacity(q.len());
    softmax_into(q, coefficient, &mut out);
    out
}

pub(crate) fn softmax_into<T: Scalar>(q: &[T], coefficient: T, out: &mut Vec<T>) {
    out.clear();
    let top = q
        .iter()
        .map(|&v| coefficient * v)
        .fold(T::neg_infinity(), T::max);
    out.extend(q.iter().map(|&v| (coefficient * v - top).exp()));
    let total: T = out.iter().copied().sum();
    out.iter_mut().for_each(|p| *p /= total);
}
