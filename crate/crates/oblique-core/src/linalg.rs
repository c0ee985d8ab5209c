//! Small dense linear algebra: row-major matrices with LU factorisation.
//!
//! Everything in this crate works on mode-space matrices of size `d <= ~10`
//! or lattice weight rows, so a simple `Vec<f64>`-backed matrix with partial
//! pivoting is both sufficient and easy to audit.

use std::fmt;

/// Row-major dense matrix of `f64`.
#[derive(Clone, PartialEq)]
pub struct Mat {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl fmt::Debug for Mat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "Mat {}x{} [", self.rows, self.cols)?;
        for i in 0..self.rows {
            writeln!(f, "  {:?}", &self.data[i * self.cols..(i + 1) * self.cols])?;
        }
        write!(f, "]")
    }
}

impl Mat {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Mat {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Mat::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = 1.0;
        }
        m
    }

    /// Build from a slice of rows; all rows must have equal length.
    pub fn from_rows(rows: &[Vec<f64>]) -> Self {
        assert!(!rows.is_empty(), "matrix needs at least one row");
        let cols = rows[0].len();
        assert!(rows.iter().all(|r| r.len() == cols), "ragged rows");
        Mat {
            rows: rows.len(),
            cols,
            data: rows.concat(),
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn col(&self, j: usize) -> Vec<f64> {
        (0..self.rows).map(|i| self[(i, j)]).collect()
    }

    pub fn transpose(&self) -> Mat {
        let mut t = Mat::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                t[(j, i)] = self[(i, j)];
            }
        }
        t
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.cols);
        (0..self.rows)
            .map(|i| self.row(i).iter().zip(x).map(|(a, b)| a * b).sum())
            .collect()
    }

    pub fn matmul(&self, other: &Mat) -> Mat {
        assert_eq!(self.cols, other.rows);
        let mut out = Mat::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(i, k)];
                if a == 0.0 {
                    continue;
                }
                for j in 0..other.cols {
                    out[(i, j)] += a * other[(k, j)];
                }
            }
        }
        out
    }

    pub fn scale(&self, s: f64) -> Mat {
        let mut out = self.clone();
        for v in &mut out.data {
            *v *= s;
        }
        out
    }

    pub fn add(&self, other: &Mat) -> Mat {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        let mut out = self.clone();
        for (v, w) in out.data.iter_mut().zip(&other.data) {
            *v += w;
        }
        out
    }

    pub fn sub(&self, other: &Mat) -> Mat {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        let mut out = self.clone();
        for (v, w) in out.data.iter_mut().zip(&other.data) {
            *v -= w;
        }
        out
    }

    /// Delete row `i` and column `j` (the minor submatrix).
    pub fn minor(&self, i: usize, j: usize) -> Mat {
        let mut out = Mat::zeros(self.rows - 1, self.cols - 1);
        for r in 0..self.rows {
            if r == i {
                continue;
            }
            for c in 0..self.cols {
                if c == j {
                    continue;
                }
                out[(r - usize::from(r > i), c - usize::from(c > j))] = self[(r, c)];
            }
        }
        out
    }

    /// Max absolute entry.
    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Induced 1-norm (max absolute column sum).
    pub fn norm_one(&self) -> f64 {
        (0..self.cols)
            .map(|j| (0..self.rows).map(|i| self[(i, j)].abs()).sum())
            .fold(0.0, f64::max)
    }

    /// Frobenius norm; cheap upper-bound proxy for the operator norm.
    pub fn norm_frobenius(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn is_symmetric(&self, tol: f64) -> bool {
        self.symmetry_defect() <= tol
    }

    pub fn symmetry_defect(&self) -> f64 {
        let mut defect = 0.0f64;
        for i in 0..self.rows {
            for j in (i + 1)..self.cols {
                defect = defect.max((self[(i, j)] - self[(j, i)]).abs());
            }
        }
        defect
    }

    pub fn lu(&self) -> Result<Lu, SingularMatrix> {
        Lu::factorize(self)
    }

    pub fn det(&self) -> f64 {
        match self.lu() {
            Ok(lu) => lu.det(),
            Err(_) => 0.0,
        }
    }

    pub fn solve(&self, b: &[f64]) -> Result<Vec<f64>, SingularMatrix> {
        Ok(self.lu()?.solve(b))
    }

    pub fn inverse(&self) -> Result<Mat, SingularMatrix> {
        self.lu().map(|lu| lu.inverse())
    }

    /// 1-norm condition number via the explicit inverse.
    pub fn condition_number(&self) -> f64 {
        match self.inverse() {
            Ok(inv) => self.norm_one() * inv.norm_one(),
            Err(_) => f64::INFINITY,
        }
    }

    /// Classical adjugate: `adj(A) * A = det(A) * I`, computed entrywise from
    /// cofactors so that small integer matrices stay exact.
    pub fn adjugate(&self) -> Mat {
        assert_eq!(self.rows, self.cols);
        let n = self.rows;
        if n == 1 {
            return Mat::from_rows(&[vec![1.0]]);
        }
        let mut adj = Mat::zeros(n, n);
        for i in 0..n {
            for j in 0..n {
                let sign = if (i + j) % 2 == 0 { 1.0 } else { -1.0 };
                // adj(A)_{ji} = cofactor_{ij}
                adj[(j, i)] = sign * self.minor(i, j).det_direct();
            }
        }
        adj
    }

    /// Determinant by cofactor expansion for n <= 3, LU above; keeps small
    /// integer determinants exact where the adjugate identity tests expect it.
    fn det_direct(&self) -> f64 {
        match self.rows {
            1 => self[(0, 0)],
            2 => self[(0, 0)] * self[(1, 1)] - self[(0, 1)] * self[(1, 0)],
            3 => {
                self[(0, 0)] * (self[(1, 1)] * self[(2, 2)] - self[(1, 2)] * self[(2, 1)])
                    - self[(0, 1)] * (self[(1, 0)] * self[(2, 2)] - self[(1, 2)] * self[(2, 0)])
                    + self[(0, 2)] * (self[(1, 0)] * self[(2, 1)] - self[(1, 1)] * self[(2, 0)])
            }
            _ => self.det(),
        }
    }

    /// Numerical rank with a relative pivot threshold.
    pub fn rank(&self, tol: f64) -> usize {
        let mut a = self.clone();
        let (m, n) = (a.rows, a.cols);
        let scale = a.max_abs().max(1.0);
        let mut rank = 0;
        let mut row = 0;
        for col in 0..n {
            let (mut pivot_row, mut pivot_val) = (row, 0.0f64);
            for r in row..m {
                if a[(r, col)].abs() > pivot_val {
                    pivot_val = a[(r, col)].abs();
                    pivot_row = r;
                }
            }
            if pivot_val <= tol * scale {
                continue;
            }
            for c in 0..n {
                let tmp = a[(row, c)];
                a[(row, c)] = a[(pivot_row, c)];
                a[(pivot_row, c)] = tmp;
            }
            for r in (row + 1)..m {
                let factor = a[(r, col)] / a[(row, col)];
                for c in col..n {
                    a[(r, c)] -= factor * a[(row, c)];
                }
            }
            rank += 1;
            row += 1;
            if row == m {
                break;
            }
        }
        rank
    }

    /// Eigenvalues of a symmetric matrix by cyclic Jacobi rotations.
    pub fn symmetric_eigenvalues(&self) -> Vec<f64> {
        assert_eq!(self.rows, self.cols);
        let n = self.rows;
        let mut a = self.clone();
        for _ in 0..100 {
            let mut off = 0.0f64;
            for i in 0..n {
                for j in (i + 1)..n {
                    off = off.max(a[(i, j)].abs());
                }
            }
            if off < 1e-14 * a.max_abs().max(1.0) {
                break;
            }
            for p in 0..n {
                for q in (p + 1)..n {
                    if a[(p, q)].abs() < 1e-300 {
                        continue;
                    }
                    let theta = (a[(q, q)] - a[(p, p)]) / (2.0 * a[(p, q)]);
                    let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                    let c = 1.0 / (t * t + 1.0).sqrt();
                    let s = t * c;
                    for k in 0..n {
                        let akp = a[(k, p)];
                        let akq = a[(k, q)];
                        a[(k, p)] = c * akp - s * akq;
                        a[(k, q)] = s * akp + c * akq;
                    }
                    for k in 0..n {
                        let apk = a[(p, k)];
                        let aqk = a[(q, k)];
                        a[(p, k)] = c * apk - s * aqk;
                        a[(q, k)] = s * apk + c * aqk;
                    }
                }
            }
        }
        let mut eig: Vec<f64> = (0..n).map(|i| a[(i, i)]).collect();
        eig.sort_by(|x, y| x.partial_cmp(y).unwrap());
        eig
    }
}

impl std::ops::Index<(usize, usize)> for Mat {
    type Output = f64;
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        &self.data[i * self.cols + j]
    }
}

impl std::ops::IndexMut<(usize, usize)> for Mat {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        &mut self.data[i * self.cols + j]
    }
}

/// Matrix was singular to working precision.
#[derive(Debug, Clone, Copy, PartialEq, Eq, thiserror::Error)]
#[error("matrix is singular to working precision")]
pub struct SingularMatrix;

/// LU factorisation with partial pivoting (Doolittle).
pub struct Lu {
    lu: Mat,
    perm: Vec<usize>,
    sign: f64,
}

impl Lu {
    pub fn factorize(a: &Mat) -> Result<Lu, SingularMatrix> {
        assert_eq!(a.rows, a.cols, "LU needs a square matrix");
        let n = a.rows;
        let mut lu = a.clone();
        let mut perm: Vec<usize> = (0..n).collect();
        let mut sign = 1.0;
        let scale = a.max_abs().max(f64::MIN_POSITIVE);
        for k in 0..n {
            let (mut pivot_row, mut pivot_val) = (k, lu[(k, k)].abs());
            for r in (k + 1)..n {
                if lu[(r, k)].abs() > pivot_val {
                    pivot_val = lu[(r, k)].abs();
                    pivot_row = r;
                }
            }
            if pivot_val <= 1e-300 || pivot_val / scale <= 1e-15 {
                return Err(SingularMatrix);
            }
            if pivot_row != k {
                for c in 0..n {
                    let tmp = lu[(k, c)];
                    lu[(k, c)] = lu[(pivot_row, c)];
                    lu[(pivot_row, c)] = tmp;
                }
                perm.swap(k, pivot_row);
                sign = -sign;
            }
            for r in (k + 1)..n {
                let factor = lu[(r, k)] / lu[(k, k)];
                lu[(r, k)] = factor;
                for c in (k + 1)..n {
                    lu[(r, c)] -= factor * lu[(k, c)];
                }
            }
        }
        Ok(Lu { lu, perm, sign })
    }

    pub fn det(&self) -> f64 {
        let n = self.lu.rows;
        let mut d = self.sign;
        for i in 0..n {
            d *= self.lu[(i, i)];
        }
        d
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let n = self.lu.rows;
        assert_eq!(b.len(), n);
        let mut x: Vec<f64> = self.perm.iter().map(|&p| b[p]).collect();
        for i in 1..n {
            for j in 0..i {
                x[i] -= self.lu[(i, j)] * x[j];
            }
        }
        for i in (0..n).rev() {
            for j in (i + 1)..n {
                x[i] -= self.lu[(i, j)] * x[j];
            }
            x[i] /= self.lu[(i, i)];
        }
        x
    }

    pub fn inverse(&self) -> Mat {
        let n = self.lu.rows;
        let mut inv = Mat::zeros(n, n);
        let mut e = vec![0.0; n];
        for j in 0..n {
            e[j] = 1.0;
            let col = self.solve(&e);
            e[j] = 0.0;
            for i in 0..n {
                inv[(i, j)] = col[i];
            }
        }
        inv
    }
}

/// Dot product.
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Euclidean norm.
pub fn norm2(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Max norm.
pub fn norm_inf(a: &[f64]) -> f64 {
    a.iter().fold(0.0, |m, v| m.max(v.abs()))
}
