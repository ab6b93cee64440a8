//! Dense stacked matrices and the norms used throughout the analysis.
//!
//! A [`StackedMatrix`] holds one row per agent. The consensus seminorm
//! `‖M‖_Ł = ‖(I - 11'/n) M‖_F` and the average seminorm
//! `(1/√n)‖1'M‖_F` split the Frobenius norm orthogonally:
//! `‖M‖_F² = ‖M‖_Ł² + ‖M‖_avg²`.

use std::fmt;
use std::ops::{Add, Sub};

use crate::error::{Error, Result};

/// Row-major dense matrix, row `i` is agent `i`'s copy of the decision vector.
#[derive(Clone, PartialEq)]
pub struct StackedMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl fmt::Debug for StackedMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "StackedMatrix {}x{} [", self.rows, self.cols)?;
        for i in 0..self.rows {
            writeln!(f, "  {:?}", self.row(i))?;
        }
        write!(f, "]")
    }
}

impl StackedMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        Self::from_fn(n, n, |i, j| if i == j { 1.0 } else { 0.0 })
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Self { rows, cols, data }
    }

    /// Builds a matrix from row-major data, rejecting empty shapes and
    /// non-finite entries.
    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::invalid(
                "stacked matrix needs at least one row and column",
            ));
        }
        if data.len() != rows * cols {
            return Err(Error::DimensionMismatch {
                expected: format!("{} entries", rows * cols),
                actual: format!("{} entries", data.len()),
            });
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("stacked matrix entries must be finite"));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        if let Some(bad) = rows.iter().find(|r| r.len() != cols) {
            return Err(Error::DimensionMismatch {
                expected: format!("rows of length {cols}"),
                actual: format!("row of length {}", bad.len()),
            });
        }
        Self::from_vec(rows.len(), cols, rows.concat())
    }

    /// `n` identical rows, the stacked form `1 v'`.
    pub fn consensual(n: usize, row: &[f64]) -> Self {
        Self::from_fn(n, row.len(), |_, j| row[j])
    }

    /// 1×1 matrix, convenient for scalar sequences.
    pub fn scalar(v: f64) -> Self {
        Self {
            rows: 1,
            cols: 1,
            data: vec![v],
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.cols + j] = v;
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |i, j| self.get(j, i))
    }

    /// Column sums, i.e. the row vector `1'M`.
    pub fn column_sums(&self) -> Vec<f64> {
        let mut sums = vec![0.0; self.cols];
        for i in 0..self.rows {
            for (s, v) in sums.iter_mut().zip(self.row(i)) {
                *s += v;
            }
        }
        sums
    }

    /// The agent-average row `(1/n) 1'M`.
    pub fn column_means(&self) -> Vec<f64> {
        let n = self.rows as f64;
        self.column_sums().into_iter().map(|s| s / n).collect()
    }

    /// `self · rhs` for conformable dense matrices.
    pub fn matmul(&self, rhs: &StackedMatrix) -> Result<StackedMatrix> {
        if self.cols != rhs.rows {
            return Err(Error::DimensionMismatch {
                expected: format!("{} rows on the right", self.cols),
                actual: format!("{} rows", rhs.rows),
            });
        }
        let mut out = StackedMatrix::zeros(self.rows, rhs.cols);
        for i in 0..self.rows {
            let out_row = &mut out.data[i * rhs.cols..(i + 1) * rhs.cols];
            for (l, &a) in self.row(i).iter().enumerate() {
                if a == 0.0 {
                    continue;
                }
                for (o, &b) in out_row.iter_mut().zip(rhs.row(l)) {
                    *o += a * b;
                }
            }
        }
        Ok(out)
    }

    /// Scales row `i` by `scales[i]`, i.e. `diag(scales) · self`.
    pub fn scale_rows(&self, scales: &[f64]) -> Result<StackedMatrix> {
        if scales.len() != self.rows {
            return Err(Error::DimensionMismatch {
                expected: format!("{} row scales", self.rows),
                actual: format!("{}", scales.len()),
            });
        }
        let mut out = self.clone();
        for (i, &s) in scales.iter().enumerate() {
            out.row_mut(i).iter_mut().for_each(|v| *v *= s);
        }
        Ok(out)
    }

    pub fn scaled(&self, s: f64) -> StackedMatrix {
        StackedMatrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|v| v * s).collect(),
        }
    }

    pub fn max_abs_diff(&self, other: &StackedMatrix) -> f64 {
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    fn zip_with(&self, rhs: &StackedMatrix, f: impl Fn(f64, f64) -> f64) -> StackedMatrix {
        assert_eq!(self.shape(), rhs.shape(), "shape mismatch");
        StackedMatrix {
            rows: self.rows,
            cols: self.cols,
            data: self
                .data
                .iter()
                .zip(&rhs.data)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        }
    }
}

impl Add for &StackedMatrix {
    type Output = StackedMatrix;

    fn add(self, rhs: &StackedMatrix) -> StackedMatrix {
        self.zip_with(rhs, |a, b| a + b)
    }
}

impl Sub for &StackedMatrix {
    type Output = StackedMatrix;

    fn sub(self, rhs: &StackedMatrix) -> StackedMatrix {
        self.zip_with(rhs, |a, b| a - b)
    }
}

pub fn vector_norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

pub fn frobenius_norm(m: &StackedMatrix) -> f64 {
    vector_norm(&m.data)
}

/// `‖(I - 11'/n) m‖_F`, computed by subtracting the column means.
pub fn consensus_seminorm(m: &StackedMatrix) -> f64 {
    let means = m.column_means();
    let mut acc = 0.0;
    for i in 0..m.rows {
        for (v, mu) in m.row(i).iter().zip(&means) {
            let d = v - mu;
            acc += d * d;
        }
    }
    acc.sqrt()
}

/// `(1/√n)‖1'm‖_F`.
pub fn average_seminorm(m: &StackedMatrix) -> f64 {
    vector_norm(&m.column_sums()) / (m.rows as f64).sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum NormKind {
    Frobenius,
    Consensus,
    Average,
}

impl NormKind {
    pub fn eval(self, m: &StackedMatrix) -> f64 {
        match self {
            NormKind::Frobenius => frobenius_norm(m),
            NormKind::Consensus => consensus_seminorm(m),
            NormKind::Average => average_seminorm(m),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ErgodicNormParams {
    lambda: f64,
    horizon: usize,
}

impl ErgodicNormParams {
    pub fn new(lambda: f64, horizon: usize) -> Result<Self> {
        if !(lambda > 0.0 && lambda < 1.0) {
            return Err(Error::invalid(format!(
                "lambda must lie in (0,1), got {lambda}"
            )));
        }
        Ok(Self { lambda, horizon })
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }
}

/// `max_{k=0..K} λ^{-k} ‖seq_k‖` for the chosen norm.
pub fn ergodic_norm(
    seq: &[StackedMatrix],
    params: ErgodicNormParams,
    kind: NormKind,
) -> Result<f64> {
    let norms: Vec<f64> = seq
        .iter()
        .take(params.horizon + 1)
        .map(|m| kind.eval(m))
        .collect();
    ergodic_norm_of_values(&norms, params)
}

/// Ergodic norm of a sequence whose per-iterate norms are already known.
pub fn ergodic_norm_of_values(values: &[f64], params: ErgodicNormParams) -> Result<f64> {
    let needed = params.horizon + 1;
    if values.len() < needed {
        return Err(Error::InsufficientHistory {
            horizon: params.horizon,
            needed,
            available: values.len(),
        });
    }
    let inv = 1.0 / params.lambda;
    let mut weight = 1.0;
    let mut best = 0.0_f64;
    for &v in &values[..needed] {
        best = best.max(weight * v);
        weight *= inv;
    }
    Ok(best)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> StackedMatrix {
        StackedMatrix::from_fn(rows, cols, |_, _| rng.random_range(-3.0..3.0))
    }

    #[test]
    fn frobenius_examples() {
        assert_eq!(frobenius_norm(&StackedMatrix::zeros(2, 2)), 0.0);
        let m = StackedMatrix::from_rows(&[vec![3.0, 4.0]]).unwrap();
        assert_eq!(frobenius_norm(&m), 5.0);

        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let m = random_matrix(&mut rng, 3, 2);
        // trace(M'M) summed entry by entry
        let mut trace = 0.0;
        for j in 0..2 {
            for i in 0..3 {
                trace += m.get(i, j) * m.get(i, j);
            }
        }
        assert!((frobenius_norm(&m) - trace.sqrt()).abs() < 1e-14);
    }

    #[test]
    fn consensus_seminorm_examples() {
        let m = StackedMatrix::consensual(4, &[1.5, -2.0, 7.0]);
        assert!(consensus_seminorm(&m) < 1e-14);
        let m = StackedMatrix::from_rows(&[vec![1.0], vec![-1.0]]).unwrap();
        assert!((consensus_seminorm(&m) - 2f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn average_seminorm_examples() {
        let m = StackedMatrix::from_rows(&[vec![1.0], vec![-1.0]]).unwrap();
        assert_eq!(average_seminorm(&m), 0.0);
        let m = StackedMatrix::from_rows(&[vec![3.0], vec![3.0]]).unwrap();
        assert!((average_seminorm(&m) - 3.0 * 2f64.sqrt()).abs() < 1e-14);
    }

    #[test]
    fn ergodic_norm_examples() {
        let seq: Vec<_> = [1.0, 0.5, 0.25]
            .into_iter()
            .map(StackedMatrix::scalar)
            .collect();
        let p = ErgodicNormParams::new(0.5, 2).unwrap();
        assert_eq!(ergodic_norm(&seq, p, NormKind::Frobenius).unwrap(), 1.0);
        let p = ErgodicNormParams::new(0.25, 2).unwrap();
        assert_eq!(ergodic_norm(&seq, p, NormKind::Frobenius).unwrap(), 4.0);
    }

    #[test]
    fn ergodic_norm_matches_brute_force() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let seq: Vec<_> = (0..5).map(|_| random_matrix(&mut rng, 3, 2)).collect();
        let lambda: f64 = 0.7;
        let brute = (0..5)
            .map(|k| frobenius_norm(&seq[k]) / lambda.powi(k as i32))
            .fold(f64::NEG_INFINITY, f64::max);
        let p = ErgodicNormParams::new(lambda, 4).unwrap();
        let got = ergodic_norm(&seq, p, NormKind::Frobenius).unwrap();
        assert!((got - brute).abs() <= 1e-12 * brute);
    }

    #[test]
    fn ergodic_norm_short_history() {
        let seq = vec![StackedMatrix::scalar(1.0); 2];
        let p = ErgodicNormParams::new(0.5, 2).unwrap();
        assert!(matches!(
            ergodic_norm(&seq, p, NormKind::Frobenius),
            Err(Error::InsufficientHistory {
                needed: 3,
                available: 2,
                ..
            })
        ));
    }

    #[test]
    fn ergodic_params_reject_bad_lambda() {
        assert!(ErgodicNormParams::new(1.0, 3).is_err());
        assert!(ErgodicNormParams::new(0.0, 3).is_err());
    }

    #[test]
    fn from_vec_rejects_non_finite() {
        assert!(StackedMatrix::from_vec(1, 2, vec![1.0, f64::NAN]).is_err());
        assert!(StackedMatrix::from_vec(0, 2, vec![]).is_err());
    }

    fn matrix_strategy() -> impl Strategy<Value = StackedMatrix> {
        (1usize..6, 1usize..4).prop_flat_map(|(r, c)| {
            proptest::collection::vec(-100.0f64..100.0, r * c)
                .prop_map(move |d| StackedMatrix::from_vec(r, c, d).unwrap())
        })
    }

    proptest! {
        #[test]
        fn pythagorean_split(m in matrix_strategy()) {
            let f = frobenius_norm(&m);
            let lhs = average_seminorm(&m).powi(2) + consensus_seminorm(&m).powi(2);
            prop_assert!((lhs - f * f).abs() <= 1e-12 * (f * f).max(1e-300));
            prop_assert!(consensus_seminorm(&m) <= f * (1.0 + 1e-12));
        }

        #[test]
        fn seminorm_triangle(a in matrix_strategy(), seed in any::<u64>()) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let b = random_matrix(&mut rng, a.rows(), a.cols());
            let x = &a + &b;
            prop_assert!(
                consensus_seminorm(&x) <= consensus_seminorm(&a) + consensus_seminorm(&b) + 1e-12
            );
        }

        #[test]
        fn ergodic_monotone_in_lambda_and_horizon(
            vals in proptest::collection::vec(0.0f64..10.0, 2..30),
            l1 in 0.05f64..0.95,
            dl in 0.0f64..0.04,
        ) {
            let seq: Vec<_> = vals.iter().map(|&v| StackedMatrix::scalar(v)).collect();
            let k = seq.len() - 1;
            let l2 = l1 + dl;
            let n1 = ergodic_norm(&seq, ErgodicNormParams::new(l1, k).unwrap(), NormKind::Frobenius).unwrap();
            let n2 = ergodic_norm(&seq, ErgodicNormParams::new(l2, k).unwrap(), NormKind::Frobenius).unwrap();
            prop_assert!(n1 >= n2);
            let shorter = ergodic_norm(&seq, ErgodicNormParams::new(l1, k - 1).unwrap(), NormKind::Frobenius).unwrap();
            prop_assert!(shorter <= n1);
        }
    }
}
