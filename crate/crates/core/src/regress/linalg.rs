//! Householder QR for tall design matrices stored column-major.

#![allow(clippy::needless_range_loop)]

/// Packed Householder factorisation of an `n x q` matrix, `n >= q`.
pub(crate) struct Qr {
    /// Householder vectors below the diagonal, R above it.
    cols: Vec<Vec<f64>>,
    rdiag: Vec<f64>,
    n: usize,
}

impl Qr {
    pub(crate) fn new(mut cols: Vec<Vec<f64>>) -> Qr {
        let q = cols.len();
        let n = cols.first().map_or(0, Vec::len);
        let mut rdiag = vec![0.0; q];
        for k in 0..q {
            let mut nrm = 0.0f64;
            for i in k..n {
                nrm = nrm.hypot(cols[k][i]);
            }
            if nrm != 0.0 {
                if cols[k][k] < 0.0 {
                    nrm = -nrm;
                }
                for i in k..n {
                    cols[k][i] /= nrm;
                }
                cols[k][k] += 1.0;
                let (head, tail) = cols.split_at_mut(k + 1);
                let v = &head[k];
                for col in tail.iter_mut() {
                    let s: f64 = (k..n).map(|i| v[i] * col[i]).sum::<f64>() / -v[k];
                    for i in k..n {
                        col[i] += s * v[i];
                    }
                }
            }
            rdiag[k] = -nrm;
        }
        Qr { cols, rdiag, n }
    }

    /// |R_kk| for every column: the norm of column k orthogonal to the
    /// columns before it.
    pub(crate) fn rdiag_abs(&self) -> Vec<f64> {
        self.rdiag.iter().map(|d| d.abs()).collect()
    }

    fn r(&self, row: usize, col: usize) -> f64 {
        if row == col {
            self.rdiag[row]
        } else {
            self.cols[col][row]
        }
    }

    /// Least-squares solution of `A x = y`.
    pub(crate) fn solve(&self, y: &[f64]) -> Vec<f64> {
        let q = self.cols.len();
        let mut y = y.to_vec();
        for k in 0..q {
            let v = &self.cols[k];
            if v[k] == 0.0 {
                continue;
            }
            let s: f64 = (k..self.n).map(|i| v[i] * y[i]).sum::<f64>() / -v[k];
            for i in k..self.n {
                y[i] += s * v[i];
            }
        }
        let mut x = vec![0.0; q];
        for k in (0..q).rev() {
            let mut s = y[k];
            for j in k + 1..q {
                s -= self.r(k, j) * x[j];
            }
            x[k] = s / self.rdiag[k];
        }
        x
    }

    /// `(A^T A)^{-1} = R^{-1} R^{-T}`.
    pub(crate) fn normal_inverse(&self) -> Vec<Vec<f64>> {
        let q = self.cols.len();
        // Upper-triangular inverse of R, column by column.
        let mut rinv = vec![vec![0.0; q]; q];
        for c in 0..q {
            for row in (0..=c).rev() {
                let mut s = if row == c { 1.0 } else { 0.0 };
                for j in row + 1..=c {
                    s -= self.r(row, j) * rinv[j][c];
                }
                rinv[row][c] = s / self.rdiag[row];
            }
        }
        let mut out = vec![vec![0.0; q]; q];
        for i in 0..q {
            for j in 0..q {
                out[i][j] = (i.max(j)..q).map(|k| rinv[i][k] * rinv[j][k]).sum();
            }
        }
        out
    }
}
