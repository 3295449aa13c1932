//! Dense linear algebra: norms, LU with partial pivoting, stationary
//! distributions, the fundamental matrix and Neumann-series checks.
//!
//! Distributions are row vectors and reward functions are column vectors;
//! both are plain `Vec<f64>` and the aliases below only document intent.

use std::fmt;
use std::ops::{Add, Index, IndexMut, Mul, Sub};

use crate::error::{Error, Result};

/// Probability mass functions and signed measures, multiplied from the left.
pub type RowVec = Vec<f64>;
/// Reward functions and value vectors, multiplied from the right.
pub type ColVec = Vec<f64>;

/// Pivots smaller than this multiple of `||A||` are treated as zero.
pub const PIVOT_RTOL: f64 = 1e-13;

/// Square dense matrix stored row-major.
#[derive(Clone, PartialEq)]
pub struct Matrix {
    n: usize,
    data: Vec<f64>,
}

impl fmt::Debug for Matrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "Matrix({}x{})", self.n, self.n)?;
        for i in 0..self.n {
            writeln!(f, "  {:?}", self.row(i))?;
        }
        Ok(())
    }
}

impl Matrix {
    pub fn zeros(n: usize) -> Matrix {
        Matrix { n, data: vec![0.0; n * n] }
    }

    pub fn identity(n: usize) -> Matrix {
        let mut m = Matrix::zeros(n);
        for i in 0..n {
            m[(i, i)] = 1.0;
        }
        m
    }

    pub fn diag(d: &[f64]) -> Matrix {
        let mut m = Matrix::zeros(d.len());
        for (i, &v) in d.iter().enumerate() {
            m[(i, i)] = v;
        }
        m
    }

    pub fn from_fn(n: usize, mut f: impl FnMut(usize, usize) -> f64) -> Matrix {
        let mut data = Vec::with_capacity(n * n);
        for i in 0..n {
            for j in 0..n {
                data.push(f(i, j));
            }
        }
        Matrix { n, data }
    }

    /// Builds a matrix from rows; rejects ragged, empty or non-finite input.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Matrix> {
        let n = rows.len();
        if n == 0 {
            return Err(Error::Dimension("matrix has no rows".into()));
        }
        let mut data = Vec::with_capacity(n * n);
        for (i, row) in rows.iter().enumerate() {
            if row.len() != n {
                return Err(Error::Dimension(format!(
                    "row {i} has {} entries, expected {n}",
                    row.len()
                )));
            }
            if let Some(v) = row.iter().find(|v| !v.is_finite()) {
                return Err(Error::InvalidArgument(format!("row {i} holds non-finite entry {v}")));
            }
            data.extend_from_slice(row);
        }
        Ok(Matrix { n, data })
    }

    /// Rank-one matrix `e * pi` whose rows all equal `pi`.
    pub fn rank_one(pi: &[f64]) -> Matrix {
        Matrix::from_fn(pi.len(), |_, j| pi[j])
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.n..(i + 1) * self.n]
    }

    pub fn rows(&self) -> Vec<Vec<f64>> {
        (0..self.n).map(|i| self.row(i).to_vec()).collect()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn transpose(&self) -> Matrix {
        Matrix::from_fn(self.n, |i, j| self[(j, i)])
    }

    pub fn scaled(&self, c: f64) -> Matrix {
        Matrix { n: self.n, data: self.data.iter().map(|v| c * v).collect() }
    }

    /// `self + c * other`.
    pub fn add_scaled(&self, c: f64, other: &Matrix) -> Matrix {
        assert_eq!(self.n, other.n, "dimension mismatch in add_scaled");
        Matrix {
            n: self.n,
            data: self.data.iter().zip(&other.data).map(|(a, b)| a + c * b).collect(),
        }
    }

    pub fn row_sums(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.row(i).iter().sum()).collect()
    }

    /// Induced infinity norm `max_x sum_y |A(x,y)|`.
    pub fn max_row_sum(&self) -> f64 {
        (0..self.n)
            .map(|i| self.row(i).iter().map(|v| v.abs()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// `A x` for a column vector `x`.
    pub fn mul_vec(&self, x: &[f64]) -> ColVec {
        assert_eq!(x.len(), self.n, "dimension mismatch in mul_vec");
        (0..self.n).map(|i| dot(self.row(i), x)).collect()
    }

    /// `x A` for a row vector `x`.
    pub fn left_mul(&self, x: &[f64]) -> RowVec {
        assert_eq!(x.len(), self.n, "dimension mismatch in left_mul");
        let mut y = vec![0.0; self.n];
        for (i, &xi) in x.iter().enumerate() {
            if xi == 0.0 {
                continue;
            }
            for (yj, aij) in y.iter_mut().zip(self.row(i)) {
                *yj += xi * aij;
            }
        }
        y
    }

    pub fn matmul(&self, other: &Matrix) -> Matrix {
        assert_eq!(self.n, other.n, "dimension mismatch in matmul");
        let n = self.n;
        let mut out = Matrix::zeros(n);
        for i in 0..n {
            for k in 0..n {
                let a = self[(i, k)];
                if a == 0.0 {
                    continue;
                }
                let orow = other.row(k);
                let dst = &mut out.data[i * n..(i + 1) * n];
                for (d, b) in dst.iter_mut().zip(orow) {
                    *d += a * b;
                }
            }
        }
        out
    }

    pub fn pow(&self, k: usize) -> Matrix {
        let mut out = Matrix::identity(self.n);
        for _ in 0..k {
            out = out.matmul(self);
        }
        out
    }

    /// Principal submatrix on the given index set, in the given order.
    pub fn submatrix(&self, idx: &[usize]) -> Matrix {
        Matrix::from_fn(idx.len(), |i, j| self[(idx[i], idx[j])])
    }
}

impl Index<(usize, usize)> for Matrix {
    type Output = f64;
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        &self.data[i * self.n + j]
    }
}

impl IndexMut<(usize, usize)> for Matrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        &mut self.data[i * self.n + j]
    }
}

impl Add for &Matrix {
    type Output = Matrix;
    fn add(self, rhs: &Matrix) -> Matrix {
        self.add_scaled(1.0, rhs)
    }
}

impl Sub for &Matrix {
    type Output = Matrix;
    fn sub(self, rhs: &Matrix) -> Matrix {
        self.add_scaled(-1.0, rhs)
    }
}

impl Mul for &Matrix {
    type Output = Matrix;
    fn mul(self, rhs: &Matrix) -> Matrix {
        self.matmul(rhs)
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len(), "dimension mismatch in dot");
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// `||eta|| = sum |eta(x)|` for row vectors.
pub fn row_l1(eta: &[f64]) -> f64 {
    eta.iter().map(|v| v.abs()).sum()
}

/// `||f|| = max |f(x)|` for column vectors.
pub fn col_max(f: &[f64]) -> f64 {
    f.iter().fold(0.0, |m, v| m.max(v.abs()))
}

/// `||A|| = max_x sum_y |A(x,y)|`.
pub fn mat_maxrowsum(a: &Matrix) -> f64 {
    a.max_row_sum()
}

pub fn axpy(a: f64, x: &[f64], y: &[f64]) -> Vec<f64> {
    x.iter().zip(y).map(|(xi, yi)| a * xi + yi).collect()
}

pub fn scale(c: f64, x: &[f64]) -> Vec<f64> {
    x.iter().map(|v| c * v).collect()
}

/// LU factorization `P A = L U` with partial pivoting.
#[derive(Clone, Debug)]
pub struct Lu {
    n: usize,
    lu: Vec<f64>,
    perm: Vec<usize>,
}

impl Lu {
    pub fn new(a: &Matrix) -> Result<Lu> {
        let n = a.dim();
        let norm = a.max_row_sum();
        let tiny = PIVOT_RTOL * norm;
        let mut lu = a.as_slice().to_vec();
        let mut perm: Vec<usize> = (0..n).collect();
        for k in 0..n {
            let (p, pmax) = (k..n)
                .map(|i| (i, lu[i * n + k].abs()))
                .fold((k, -1.0), |best, cur| if cur.1 > best.1 { cur } else { best });
            if pmax <= tiny || norm == 0.0 {
                return Err(Error::SingularMatrix { col: k, pivot: pmax });
            }
            if p != k {
                for j in 0..n {
                    lu.swap(k * n + j, p * n + j);
                }
                perm.swap(k, p);
            }
            let pivot = lu[k * n + k];
            for i in k + 1..n {
                let f = lu[i * n + k] / pivot;
                lu[i * n + k] = f;
                if f == 0.0 {
                    continue;
                }
                for j in k + 1..n {
                    lu[i * n + j] -= f * lu[k * n + j];
                }
            }
        }
        Ok(Lu { n, lu, perm })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    /// Solves `A x = b`.
    pub fn solve(&self, b: &[f64]) -> ColVec {
        let n = self.n;
        assert_eq!(b.len(), n, "dimension mismatch in solve");
        let mut x: Vec<f64> = self.perm.iter().map(|&p| b[p]).collect();
        for i in 0..n {
            let mut s = x[i];
            for j in 0..i {
                s -= self.lu[i * n + j] * x[j];
            }
            x[i] = s;
        }
        for i in (0..n).rev() {
            let mut s = x[i];
            for j in i + 1..n {
                s -= self.lu[i * n + j] * x[j];
            }
            x[i] = s / self.lu[i * n + i];
        }
        x
    }

    /// Solves `x A = b` for a row vector `x`.
    pub fn solve_left(&self, b: &[f64]) -> RowVec {
        let n = self.n;
        assert_eq!(b.len(), n, "dimension mismatch in solve_left");
        // A^T = U^T L^T P, so solve U^T z = b, L^T w = z, x = P^T w.
        let mut z = b.to_vec();
        for i in 0..n {
            let mut s = z[i];
            for j in 0..i {
                s -= self.lu[j * n + i] * z[j];
            }
            z[i] = s / self.lu[i * n + i];
        }
        for i in (0..n).rev() {
            let mut s = z[i];
            for j in i + 1..n {
                s -= self.lu[j * n + i] * z[j];
            }
            z[i] = s;
        }
        let mut x = vec![0.0; n];
        for (k, &p) in self.perm.iter().enumerate() {
            x[p] = z[k];
        }
        x
    }

    pub fn inverse(&self) -> Matrix {
        let n = self.n;
        let mut inv = Matrix::zeros(n);
        let mut e = vec![0.0; n];
        for j in 0..n {
            e.iter_mut().for_each(|v| *v = 0.0);
            e[j] = 1.0;
            let col = self.solve(&e);
            for i in 0..n {
                inv[(i, j)] = col[i];
            }
        }
        inv
    }
}

/// Solves `A x = b` by Gaussian elimination with partial pivoting.
pub fn solve(a: &Matrix, b: &[f64]) -> Result<ColVec> {
    if b.len() != a.dim() {
        return Err(Error::Dimension(format!("rhs has length {}, matrix is {}", b.len(), a.dim())));
    }
    Ok(Lu::new(a)?.solve(b))
}

pub fn inverse(a: &Matrix) -> Result<Matrix> {
    Ok(Lu::new(a)?.inverse())
}

/// Smallest `l <= l_max` with `||A^l|| < 1`, with a `1e-12` margin against rounding.
pub fn contraction_power(a: &Matrix, l_max: usize) -> Option<usize> {
    let mut p = a.clone();
    for l in 1..=l_max {
        if p.max_row_sum() < 1.0 - 1e-12 {
            return Some(l);
        }
        if l < l_max {
            p = p.matmul(a);
        }
    }
    None
}

/// `|| sum_{n<=K} (n+j)...(n+1) A^n - j! (I-A)^{-j-1} ||`.
pub fn neumann_identity_residual(a: &Matrix, j: u32, k: usize) -> Result<f64> {
    if contraction_power(a, k.max(1)).is_none() {
        return Err(Error::NotContracting(k));
    }
    let n = a.dim();
    let mut sum = Matrix::zeros(n);
    let mut power = Matrix::identity(n);
    for m in 0..=k {
        let c: f64 = (1..=j).map(|i| (m as u64 + i as u64) as f64).product();
        sum = sum.add_scaled(c, &power);
        if m < k {
            power = power.matmul(a);
        }
    }
    let inv = inverse(&(&Matrix::identity(n) - a))?;
    let fact: f64 = (1..=j).map(|i| i as f64).product();
    let target = inv.pow(j as usize + 1).scaled(fact);
    Ok((&sum - &target).max_row_sum())
}

/// True when some power of the nonnegative matrix `a` is strictly positive
/// (irreducible and aperiodic); checks `A^(2^k)` up to the Wielandt bound.
pub fn is_primitive(a: &Matrix) -> bool {
    let n = a.dim();
    let bound = (n - 1) * (n - 1) + 1;
    let mut pat: Vec<bool> = a.as_slice().iter().map(|v| *v > 0.0).collect();
    let mut power = 1usize;
    loop {
        if pat.iter().all(|b| *b) {
            return true;
        }
        if power >= bound {
            return false;
        }
        let mut next = vec![false; n * n];
        for i in 0..n {
            for k in 0..n {
                if !pat[i * n + k] {
                    continue;
                }
                for j in 0..n {
                    next[i * n + j] |= pat[k * n + j];
                }
            }
        }
        pat = next;
        power *= 2;
    }
}

/// Solves `pi M = 0, pi e = 1` with one balance equation replaced by the
/// normalization, clamping floating-point dust.
fn normalized_null_row(m: &Matrix, what: &str) -> Result<RowVec> {
    let n = m.dim();
    let mut sys = m.transpose();
    for j in 0..n {
        sys[(n - 1, j)] = 1.0;
    }
    let mut rhs = vec![0.0; n];
    rhs[n - 1] = 1.0;
    let mut pi = match solve(&sys, &rhs) {
        Ok(pi) => pi,
        Err(Error::SingularMatrix { .. }) => {
            return Err(Error::NotIrreducible(format!("{what} balance system is singular")))
        }
        Err(e) => return Err(e),
    };
    if let Some((i, v)) = pi.iter().enumerate().find(|(_, v)| **v < -1e-12) {
        return Err(Error::NotIrreducible(format!("{what} has negative mass {v:e} at state {i}")));
    }
    pi.iter_mut().for_each(|v| *v = v.max(0.0));
    let total: f64 = pi.iter().sum();
    pi.iter_mut().for_each(|v| *v /= total);
    Ok(pi)
}

/// Stationary distribution of a stochastic matrix.
pub fn stationary_distribution(p: &Matrix) -> Result<RowVec> {
    normalized_null_row(&(&Matrix::identity(p.dim()) - p), "stationary distribution")
}

/// Stationary distribution of a rate matrix (`pi Q = 0`).
pub fn ctmc_stationary(q: &Matrix) -> Result<RowVec> {
    normalized_null_row(&q.scaled(-1.0), "ctmc stationary distribution")
}

/// `Z = (I - P + e pi)^{-1}`.
pub fn fundamental_matrix(p: &Matrix, pi: &[f64]) -> Result<Matrix> {
    let n = p.dim();
    let a = &(&Matrix::identity(n) - p) + &Matrix::rank_one(pi);
    inverse(&a)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: &[f64], b: &[f64], tol: f64) -> bool {
        a.len() == b.len() && a.iter().zip(b).all(|(x, y)| (x - y).abs() <= tol)
    }

    #[test]
    fn norms() {
        let p = Matrix::from_rows(&[vec![0.2, 0.8], vec![0.5, 0.5]]).unwrap();
        assert_eq!(mat_maxrowsum(&p), 1.0);
        assert!((row_l1(&[0.3, -0.7]) - 1.0).abs() < 1e-15);
        let a = Matrix::from_rows(&[vec![1.0, -2.0], vec![0.0, 0.5]]).unwrap();
        assert_eq!(mat_maxrowsum(&a), 3.0);
        assert_eq!(col_max(&[-3.0, 2.0]), 3.0);
    }

    #[test]
    fn solve_examples() {
        let r = vec![1.0, -2.0, 3.0];
        assert_eq!(solve(&Matrix::identity(3), &r).unwrap(), r);

        let half = Matrix::from_rows(&[vec![0.5, 0.5], vec![0.5, 0.5]]).unwrap();
        let a = Matrix::identity(2).add_scaled(-0.5, &half);
        let x = solve(&a, &[1.0, 0.0]).unwrap();
        assert!(close(&x, &[1.5, 0.5], 1e-14));

        assert!(matches!(solve(&Matrix::zeros(2), &[1.0, 1.0]), Err(Error::SingularMatrix { .. })));
    }

    #[test]
    fn solve_left_matches_transpose_solve() {
        let a = Matrix::from_rows(&[
            vec![4.0, 1.0, -2.0],
            vec![0.5, 3.0, 1.0],
            vec![2.0, -1.0, 5.0],
        ])
        .unwrap();
        let b = [1.0, 2.0, 3.0];
        let lu = Lu::new(&a).unwrap();
        let x = lu.solve_left(&b);
        assert!(close(&a.left_mul(&x), &b, 1e-13));
        let y = solve(&a.transpose(), &b).unwrap();
        assert!(close(&x, &y, 1e-13));
    }

    #[test]
    fn inverse_examples() {
        assert_eq!(inverse(&Matrix::identity(3)).unwrap(), Matrix::identity(3));
        let d = inverse(&Matrix::diag(&[2.0, 4.0])).unwrap();
        assert!(close(d.as_slice(), &[0.5, 0.0, 0.0, 0.25], 1e-15));
    }

    #[test]
    fn neumann_examples() {
        for j in 0..4 {
            assert_eq!(neumann_identity_residual(&Matrix::zeros(3), j, 5).unwrap(), 0.0);
        }
        let half = Matrix::identity(2).scaled(0.5);
        assert!(neumann_identity_residual(&half, 0, 200).unwrap() < 1e-12);
        let p = Matrix::from_rows(&[vec![0.3, 0.7], vec![0.6, 0.4]]).unwrap().scaled(0.9);
        assert!(neumann_identity_residual(&p, 2, 2000).unwrap() < 1e-9);
        assert!(matches!(
            neumann_identity_residual(&Matrix::identity(2), 1, 50),
            Err(Error::NotContracting(50))
        ));
    }

    #[test]
    fn contraction_examples() {
        let p = Matrix::from_rows(&[vec![0.3, 0.7], vec![0.6, 0.4]]).unwrap();
        assert_eq!(contraction_power(&p, 50), None);
        assert_eq!(contraction_power(&Matrix::identity(2).scaled(0.5), 5), Some(1));
        // Row sums 1 and 0.5: one step is not contracting, two steps are.
        let b = Matrix::from_rows(&[vec![0.0, 1.0], vec![0.0, 0.5]]).unwrap();
        assert_eq!(contraction_power(&b, 5), Some(2));
    }

    #[test]
    fn stationary_examples() {
        let half = Matrix::from_rows(&[vec![0.5, 0.5], vec![0.5, 0.5]]).unwrap();
        assert!(close(&stationary_distribution(&half).unwrap(), &[0.5, 0.5], 1e-15));
        let (a, b) = (0.2, 0.3);
        let p = Matrix::from_rows(&[vec![1.0 - a, a], vec![b, 1.0 - b]]).unwrap();
        assert!(close(&stationary_distribution(&p).unwrap(), &[0.6, 0.4], 1e-14));
        assert!(matches!(
            stationary_distribution(&Matrix::identity(2)),
            Err(Error::NotIrreducible(_))
        ));
    }

    #[test]
    fn fundamental_examples() {
        let pi = [0.25, 0.75];
        let big_pi = Matrix::rank_one(&pi);
        let z = fundamental_matrix(&big_pi, &pi).unwrap();
        assert!(close(z.as_slice(), Matrix::identity(2).as_slice(), 1e-15));

        let p = Matrix::from_rows(&[
            vec![0.1, 0.6, 0.3],
            vec![0.4, 0.4, 0.2],
            vec![0.3, 0.3, 0.4],
        ])
        .unwrap();
        let pi = stationary_distribution(&p).unwrap();
        let z = fundamental_matrix(&p, &pi).unwrap();
        let a = &(&Matrix::identity(3) - &p) + &Matrix::rank_one(&pi);
        assert!((&z.matmul(&a) - &Matrix::identity(3)).max_row_sum() < 1e-9);
        assert!(close(&z.left_mul(&pi), &pi, 1e-12));
        assert!(close(&z.mul_vec(&[1.0; 3]), &[1.0; 3], 1e-12));
    }

    #[test]
    fn fundamental_matches_truncated_series() {
        let p = Matrix::from_rows(&[
            vec![0.2, 0.5, 0.3],
            vec![0.4, 0.1, 0.5],
            vec![0.3, 0.3, 0.4],
        ])
        .unwrap();
        let pi = stationary_distribution(&p).unwrap();
        let z = fundamental_matrix(&p, &pi).unwrap();
        let a = &p - &Matrix::rank_one(&pi);
        let mut sum = Matrix::zeros(3);
        let mut pw = Matrix::identity(3);
        for _ in 0..200 {
            sum = &sum + &pw;
            pw = pw.matmul(&a);
        }
        assert!((&sum - &z).max_row_sum() < 1e-8);
    }

    #[test]
    fn primitivity() {
        let p = Matrix::from_rows(&[vec![0.0, 1.0], vec![1.0, 0.0]]).unwrap();
        assert!(!is_primitive(&p));
        assert!(!is_primitive(&Matrix::identity(3)));
        let q = Matrix::from_rows(&[vec![0.0, 1.0, 0.0], vec![0.0, 0.0, 1.0], vec![0.5, 0.5, 0.0]]).unwrap();
        assert!(is_primitive(&q));
        assert!(is_primitive(&Matrix::identity(1)));
    }

    #[test]
    fn ctmc_examples() {
        let q = Matrix::from_rows(&[vec![-1.0, 1.0], vec![1.0, -1.0]]).unwrap();
        assert!(close(&ctmc_stationary(&q).unwrap(), &[0.5, 0.5], 1e-15));
        let q = Matrix::from_rows(&[vec![-2.0, 2.0], vec![1.0, -1.0]]).unwrap();
        assert!(close(&ctmc_stationary(&q).unwrap(), &[1.0 / 3.0, 2.0 / 3.0], 1e-15));
        assert!(matches!(ctmc_stationary(&Matrix::zeros(2)), Err(Error::NotIrreducible(_))));
    }
}
