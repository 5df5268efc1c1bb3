//! Dense column-major matrix and Householder QR least squares.

use serde::Serialize;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    /// Column-major.
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix { rows, cols, data: vec![0.0; rows * cols] }
    }

    pub fn from_columns(rows: usize, columns: &[Vec<f64>]) -> Self {
        let mut m = Matrix::zeros(rows, columns.len());
        for (j, c) in columns.iter().enumerate() {
            assert_eq!(c.len(), rows, "column {j} has the wrong length");
            m.column_mut(j).copy_from_slice(c);
        }
        m
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Self {
        let cols = rows.first().map_or(0, Vec::len);
        let mut m = Matrix::zeros(rows.len(), cols);
        for (i, r) in rows.iter().enumerate() {
            for (j, v) in r.iter().enumerate() {
                m[(i, j)] = *v;
            }
        }
        m
    }

    pub fn nrows(&self) -> usize {
        self.rows
    }

    pub fn ncols(&self) -> usize {
        self.cols
    }

    pub fn column(&self, j: usize) -> &[f64] {
        &self.data[j * self.rows..(j + 1) * self.rows]
    }

    pub fn column_mut(&mut self, j: usize) -> &mut [f64] {
        &mut self.data[j * self.rows..(j + 1) * self.rows]
    }

    pub fn row(&self, i: usize) -> Vec<f64> {
        (0..self.cols).map(|j| self[(i, j)]).collect()
    }

    pub fn mul_vec(&self, v: &[f64]) -> Vec<f64> {
        assert_eq!(v.len(), self.cols);
        let mut out = vec![0.0; self.rows];
        for (j, vj) in v.iter().enumerate() {
            for (o, a) in out.iter_mut().zip(self.column(j)) {
                *o += a * vj;
            }
        }
        out
    }

    /// Xᵀv
    pub fn tr_mul_vec(&self, v: &[f64]) -> Vec<f64> {
        assert_eq!(v.len(), self.rows);
        (0..self.cols).map(|j| dot(self.column(j), v)).collect()
    }

    /// Copy keeping only the listed columns.
    pub fn select_columns(&self, cols: &[usize]) -> Matrix {
        let columns: Vec<Vec<f64>> = cols.iter().map(|&j| self.column(j).to_vec()).collect();
        Matrix::from_columns(self.rows, &columns)
    }

    /// Multiply row i by `scale[i]`.
    pub fn scale_rows(&self, scale: &[f64]) -> Matrix {
        let mut m = self.clone();
        for j in 0..m.cols {
            for (a, s) in m.column_mut(j).iter_mut().zip(scale) {
                *a *= s;
            }
        }
        m
    }
}

impl std::ops::Index<(usize, usize)> for Matrix {
    type Output = f64;
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        &self.data[j * self.rows + i]
    }
}

impl std::ops::IndexMut<(usize, usize)> for Matrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        &mut self.data[j * self.rows + i]
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// A column is rank-deficient when its R diagonal falls below this fraction of
/// the largest R diagonal.
pub const RANK_TOLERANCE: f64 = 1e-10;

/// Householder QR of an n×p matrix with n ≥ p, stored compactly.
#[derive(Debug, Clone)]
pub struct Qr {
    /// R in the upper triangle, Householder vectors below the diagonal.
    qr: Matrix,
    /// First component of each Householder vector.
    v0: Vec<f64>,
    /// R diagonal.
    diag: Vec<f64>,
}

impl Qr {
    pub fn new(a: &Matrix) -> Self {
        let (n, p) = (a.nrows(), a.ncols());
        assert!(n >= p, "QR requires at least as many rows as columns");
        let mut qr = a.clone();
        let mut v0 = vec![0.0; p];
        let mut diag = vec![0.0; p];
        for k in 0..p {
            let norm = qr.column(k)[k..].iter().map(|x| x * x).sum::<f64>().sqrt();
            if norm == 0.0 {
                v0[k] = 0.0;
                diag[k] = 0.0;
                continue;
            }
            let alpha = if qr[(k, k)] > 0.0 { -norm } else { norm };
            // v = x - alpha e1, normalised so that vᵀv = 2
            let head = qr[(k, k)] - alpha;
            let vnorm2 = head * head + qr.column(k)[k + 1..].iter().map(|x| x * x).sum::<f64>();
            let s = (2.0 / vnorm2).sqrt();
            v0[k] = head * s;
            for i in k + 1..n {
                qr[(i, k)] *= s;
            }
            diag[k] = alpha;
            for j in k + 1..p {
                let mut t = v0[k] * qr[(k, j)];
                for i in k + 1..n {
                    t += qr[(i, k)] * qr[(i, j)];
                }
                qr[(k, j)] -= t * v0[k];
                for i in k + 1..n {
                    let vik = qr[(i, k)];
                    qr[(i, j)] -= t * vik;
                }
            }
        }
        for k in 0..p {
            qr[(k, k)] = diag[k];
        }
        Qr { qr, v0, diag }
    }

    pub fn diag(&self) -> &[f64] {
        &self.diag
    }

    /// Columns whose R diagonal is negligible relative to the largest one.
    pub fn deficient_columns(&self) -> Vec<usize> {
        let largest = self.diag.iter().fold(0.0f64, |m, d| m.max(d.abs()));
        self.diag
            .iter()
            .enumerate()
            .filter(|(_, d)| d.abs() <= RANK_TOLERANCE * largest || largest == 0.0)
            .map(|(j, _)| j)
            .collect()
    }

    /// Columns taking part in the dependency of column `j` on the columns before it.
    pub fn dependency_of(&self, j: usize) -> Vec<usize> {
        let deficient = self.deficient_columns();
        let basis: Vec<usize> = (0..j).filter(|i| !deficient.contains(i)).collect();
        let m = basis.len();
        let mut c = vec![0.0; m];
        for bi in (0..m).rev() {
            let i = basis[bi];
            let mut s = self.qr[(i, j)];
            for bk in bi + 1..m {
                s -= self.qr[(i, basis[bk])] * c[bk];
            }
            c[bi] = s / self.qr[(i, i)];
        }
        let scale = (0..=j.min(self.qr.nrows() - 1)).map(|i| self.qr[(i, j)].powi(2)).sum::<f64>().sqrt();
        let mut involved: Vec<usize> = basis
            .iter()
            .zip(&c)
            .filter(|(&i, &ci)| (ci * self.qr[(i, i)]).abs() > 1e-6 * scale)
            .map(|(&i, _)| i)
            .collect();
        involved.push(j);
        involved
    }

    /// Qᵀb
    pub fn qt_mul(&self, b: &[f64]) -> Vec<f64> {
        let (n, p) = (self.qr.nrows(), self.qr.ncols());
        let mut y = b.to_vec();
        for k in 0..p {
            if self.v0[k] == 0.0 && self.diag[k] == 0.0 {
                continue;
            }
            let mut t = self.v0[k] * y[k];
            for i in k + 1..n {
                t += self.qr[(i, k)] * y[i];
            }
            y[k] -= t * self.v0[k];
            for i in k + 1..n {
                y[i] -= t * self.qr[(i, k)];
            }
        }
        y
    }

    /// Least-squares solution of min ‖Ax − b‖. Caller must check rank first.
    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let p = self.qr.ncols();
        let y = self.qt_mul(b);
        let mut x = vec![0.0; p];
        for i in (0..p).rev() {
            let mut s = y[i];
            for j in i + 1..p {
                s -= self.qr[(i, j)] * x[j];
            }
            x[i] = s / self.qr[(i, i)];
        }
        x
    }
}
