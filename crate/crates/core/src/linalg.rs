//! Small dense symmetric matrices and a cyclic Jacobi eigensolver.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Compensated (Kahan–Babuška) summation.
pub fn kahan_sum<I: IntoIterator<Item = f64>>(values: I) -> f64 {
    let mut sum = 0.0f64;
    let mut comp = 0.0f64;
    for v in values {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            comp += (sum - t) + v;
        } else {
            comp += (v - t) + sum;
        }
        sum = t;
    }
    sum + comp
}

/// Dense square matrix stored row-major.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Matrix {
    dim: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(dim: usize) -> Self {
        Self { dim, data: vec![0.0; dim * dim] }
    }

    pub fn identity(dim: usize) -> Self {
        let mut m = Self::zeros(dim);
        for i in 0..dim {
            m[(i, i)] = 1.0;
        }
        m
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let dim = rows.len();
        if rows.iter().any(|r| r.len() != dim) {
            return Err(Error::InvalidArgument("matrix must be square".into()));
        }
        Ok(Self { dim, data: rows.concat() })
    }

    pub fn from_fn(dim: usize, f: impl Fn(usize, usize) -> f64) -> Self {
        let mut m = Self::zeros(dim);
        for i in 0..dim {
            for j in 0..dim {
                m[(i, j)] = f(i, j);
            }
        }
        m
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn rows(&self) -> Vec<Vec<f64>> {
        self.data.chunks(self.dim.max(1)).map(<[f64]>::to_vec).take(self.dim).collect()
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn max_asymmetry(&self) -> f64 {
        let mut worst = 0.0f64;
        for i in 0..self.dim {
            for j in 0..i {
                worst = worst.max((self[(i, j)] - self[(j, i)]).abs());
            }
        }
        worst
    }

    pub fn mul_vec(&self, v: &[f64]) -> Vec<f64> {
        (0..self.dim)
            .map(|i| (0..self.dim).map(|j| self[(i, j)] * v[j]).sum())
            .collect()
    }

    /// `v^T A v`.
    pub fn quadratic_form(&self, v: &[f64]) -> f64 {
        let av = self.mul_vec(v);
        kahan_sum(av.iter().zip(v).map(|(a, b)| a * b))
    }
}

impl std::ops::Index<(usize, usize)> for Matrix {
    type Output = f64;

    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        &self.data[i * self.dim + j]
    }
}

impl std::ops::IndexMut<(usize, usize)> for Matrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        &mut self.data[i * self.dim + j]
    }
}

/// Eigenvalues (ascending) with unit eigenvectors stored as columns of `vectors`.
#[derive(Clone, Debug)]
pub struct SymmetricEigen {
    pub values: Vec<f64>,
    pub vectors: Vec<Vec<f64>>,
}

const MAX_SWEEPS: usize = 100;

fn check_symmetric(a: &Matrix) -> Result<()> {
    let asym = a.max_asymmetry();
    if asym > 1e-12 * a.frobenius_norm().max(f64::MIN_POSITIVE) {
        return Err(Error::NotSymmetric(asym));
    }
    Ok(())
}

/// Cyclic Jacobi rotations until the off-diagonal Frobenius norm is below
/// `1e-14 * ||A||_F`.
pub fn symmetric_eigen(a: &Matrix) -> Result<SymmetricEigen> {
    check_symmetric(a)?;
    let n = a.dim();
    let mut m = a.clone();
    let mut v = Matrix::identity(n);
    let target = 1e-14 * a.frobenius_norm();
    let off = |m: &Matrix| {
        let mut s = 0.0;
        for i in 0..n {
            for j in 0..n {
                if i != j {
                    s += m[(i, j)] * m[(i, j)];
                }
            }
        }
        s.sqrt()
    };

    let mut sweeps = 0;
    while off(&m) > target {
        if sweeps == MAX_SWEEPS {
            return Err(Error::NoConvergence { what: "Jacobi eigensolver", iterations: MAX_SWEEPS });
        }
        sweeps += 1;
        for p in 0..n {
            for q in p + 1..n {
                let apq = m[(p, q)];
                if apq == 0.0 {
                    continue;
                }
                let app = m[(p, p)];
                let aqq = m[(q, q)];
                let theta = (aqq - app) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let mkp = m[(k, p)];
                    let mkq = m[(k, q)];
                    m[(k, p)] = c * mkp - s * mkq;
                    m[(k, q)] = s * mkp + c * mkq;
                }
                for k in 0..n {
                    let mpk = m[(p, k)];
                    let mqk = m[(q, k)];
                    m[(p, k)] = c * mpk - s * mqk;
                    m[(q, k)] = s * mpk + c * mqk;
                }
                m[(p, q)] = 0.0;
                m[(q, p)] = 0.0;
                for k in 0..n {
                    let vkp = v[(k, p)];
                    let vkq = v[(k, q)];
                    v[(k, p)] = c * vkp - s * vkq;
                    v[(k, q)] = s * vkp + c * vkq;
                }
            }
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| m[(i, i)].total_cmp(&m[(j, j)]));
    Ok(SymmetricEigen {
        values: order.iter().map(|&i| m[(i, i)]).collect(),
        vectors: order.iter().map(|&i| (0..n).map(|k| v[(k, i)]).collect()).collect(),
    })
}

/// Smallest eigenvalue and a unit eigenvector.
///
/// Eigenvalues within `1e-12 * ||A||_F` of the minimum are treated as
/// degenerate; among their eigenvectors the one with lexicographically
/// largest absolute components wins. The sign is fixed so that the first
/// component exceeding `1e-12` in magnitude is positive.
pub fn min_eigenpair(a: &Matrix) -> Result<(f64, Vec<f64>)> {
    if a.dim() == 0 {
        return Err(Error::InvalidArgument("empty matrix".into()));
    }
    let eig = symmetric_eigen(a)?;
    let lowest = eig.values[0];
    let tie = 1e-12 * a.frobenius_norm();
    let best = (0..eig.values.len())
        .take_while(|&i| eig.values[i] - lowest <= tie)
        .max_by(|&i, &j| {
            let (x, y) = (&eig.vectors[i], &eig.vectors[j]);
            x.iter()
                .zip(y)
                .map(|(p, q)| p.abs().total_cmp(&q.abs()))
                .find(|o| o.is_ne())
                .unwrap_or(std::cmp::Ordering::Equal)
                // Prefer the earlier index on exact ties.
                .then(j.cmp(&i))
        })
        .expect("at least one eigenvalue");
    let mut vector = eig.vectors[best].clone();
    if let Some(first) = vector.iter().find(|c| c.abs() > 1e-12) {
        if *first < 0.0 {
            vector.iter_mut().for_each(|c| *c = -*c);
        }
    }
    Ok((eig.values[best], vector))
}
