//! Least eigenvalue against bisection on the inertia of `A - t I`.

use gap_persistence::linalg::{min_eigenpair, Matrix};
use proptest::prelude::*;

/// Number of eigenvalues below `t`: negative pivots of the LDL^T
/// factorization of `A - t I` (Sylvester's law of inertia).
fn count_below(a: &Matrix, t: f64) -> usize {
    let n = a.dim();
    let mut m: Vec<Vec<f64>> = (0..n).map(|i| (0..n).map(|j| a[(i, j)] - if i == j { t } else { 0.0 }).collect()).collect();
    let mut negatives = 0;
    for k in 0..n {
        let mut pivot = m[k][k];
        if pivot == 0.0 {
            pivot = -1e-300;
        }
        if pivot < 0.0 {
            negatives += 1;
        }
        for i in k + 1..n {
            let f = m[i][k] / pivot;
            for j in k + 1..n {
                m[i][j] -= f * m[k][j];
            }
        }
    }
    negatives
}

fn bisect_min(a: &Matrix) -> f64 {
    let r = (0..a.dim()).map(|i| (0..a.dim()).map(|j| a[(i, j)].abs()).sum::<f64>()).fold(0.0, f64::max);
    let (mut lo, mut hi) = (-r - 1.0, r + 1.0);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if count_below(a, mid) >= 1 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    0.5 * (lo + hi)
}

fn symmetric(dim: usize) -> impl Strategy<Value = Matrix> {
    prop::collection::vec(-2.0f64..2.0, dim * dim).prop_map(move |v| {
        Matrix::from_fn(dim, |i, j| {
            let (a, b) = if i <= j { (i, j) } else { (j, i) };
            v[a * dim + b]
        })
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]
    #[test]
    fn least_eigenvalue_matches_bisection(a in (1usize..=5).prop_flat_map(symmetric)) {
        let (value, vector) = min_eigenpair(&a).unwrap();
        prop_assert!((value - bisect_min(&a)).abs() < 1e-9);
        let norm: f64 = vector.iter().map(|x| x * x).sum();
        prop_assert!((norm - 1.0).abs() < 1e-12);
        let residual: f64 = a.mul_vec(&vector).iter().zip(&vector).map(|(y, x)| (y - value * x).powi(2)).sum();
        prop_assert!(residual.sqrt() < 1e-9);
    }
}

#[test]
fn fixed_corpus() {
    let corpus = [
        Matrix::from_rows(&[vec![1.0, 0.0], vec![0.0, 3.0]]).unwrap(),
        Matrix::from_rows(&[vec![2.0, -1.0, 0.0], vec![-1.0, 2.0, -1.0], vec![0.0, -1.0, 2.0]]).unwrap(),
        Matrix::from_rows(&[vec![1.0, 1.0], vec![1.0, 1.0]]).unwrap(),
        Matrix::identity(4),
    ];
    for a in &corpus {
        assert!((min_eigenpair(a).unwrap().0 - bisect_min(a)).abs() < 1e-9);
    }
}
