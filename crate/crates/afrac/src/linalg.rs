//! Small dense least-squares solvers.
//!
//! The estimator designs never exceed three columns, so those paths use
//! explicit cofactor inverses with a condition check. Unit-root test
//! regressions can carry up to eight columns (deterministic terms plus lagged
//! differences) and go through a hand-rolled Householder QR.

use crate::error::{AfError, Result};

/// Row-major dense matrix, sized at construction.
#[derive(Debug, Clone)]
pub struct Matrix {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn from_columns(columns: &[Vec<f64>]) -> Result<Self> {
        if columns.is_empty() {
            return Err(AfError::InvalidArgument("no columns".into()));
        }
        let rows = columns[0].len();
        if columns.iter().any(|c| c.len() != rows) {
            return Err(AfError::InvalidArgument("ragged columns".into()));
        }
        let cols = columns.len();
        let mut m = Self::zeros(rows, cols);
        for (j, col) in columns.iter().enumerate() {
            for (i, &v) in col.iter().enumerate() {
                m.data[i * cols + j] = v;
            }
        }
        Ok(m)
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.cols + j] = v;
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }
}

/// Gram matrix X'X (p x p, symmetric).
pub fn gram(x: &Matrix) -> Matrix {
    let p = x.cols;
    let mut g = Matrix::zeros(p, p);
    for i in 0..x.rows {
        let row = x.row(i);
        for a in 0..p {
            for b in a..p {
                let v = g.get(a, b) + row[a] * row[b];
                g.set(a, b, v);
            }
        }
    }
    for a in 0..p {
        for b in 0..a {
            let v = g.get(b, a);
            g.set(a, b, v);
        }
    }
    g
}

/// X'y for a design matrix and response.
pub fn xty(x: &Matrix, y: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; x.cols];
    for i in 0..x.rows {
        let row = x.row(i);
        for (j, o) in out.iter_mut().enumerate() {
            *o += row[j] * y[i];
        }
    }
    out
}

const COND_TOL: f64 = 1e-12;

/// Inverse of a symmetric 1x1..3x3 matrix by cofactor expansion.
///
/// Fails when the determinant is negligible relative to the matrix scale.
pub fn invert_sym_small(m: &Matrix) -> Result<Matrix> {
    let p = m.rows;
    let scale: f64 = (0..p).map(|i| m.get(i, i).abs()).fold(0.0, f64::max);
    if scale == 0.0 {
        return Err(AfError::RankDeficient("zero diagonal".into()));
    }
    let mut inv = Matrix::zeros(p, p);
    match p {
        1 => {
            let d = m.get(0, 0);
            if d.abs() < COND_TOL * scale {
                return Err(AfError::RankDeficient("1x1 determinant ~ 0".into()));
            }
            inv.set(0, 0, 1.0 / d);
        }
        2 => {
            let (a, b, c, d) = (m.get(0, 0), m.get(0, 1), m.get(1, 0), m.get(1, 1));
            let det = a * d - b * c;
            if det.abs() < COND_TOL * scale * scale {
                return Err(AfError::RankDeficient("2x2 determinant ~ 0".into()));
            }
            inv.set(0, 0, d / det);
            inv.set(0, 1, -b / det);
            inv.set(1, 0, -c / det);
            inv.set(1, 1, a / det);
        }
        3 => {
            let a = m.get(0, 0);
            let b = m.get(0, 1);
            let c = m.get(0, 2);
            let d = m.get(1, 1);
            let e = m.get(1, 2);
            let f = m.get(2, 2);
            let ca = d * f - e * e;
            let cb = c * e - b * f;
            let cc = b * e - c * d;
            let det = a * ca + b * cb + c * cc;
            if det.abs() < COND_TOL * scale * scale * scale {
                return Err(AfError::RankDeficient("3x3 determinant ~ 0".into()));
            }
            let cd = a * f - c * c;
            let ce = b * c - a * e;
            let cf = a * d - b * b;
            inv.set(0, 0, ca / det);
            inv.set(0, 1, cb / det);
            inv.set(0, 2, cc / det);
            inv.set(1, 0, cb / det);
            inv.set(1, 1, cd / det);
            inv.set(1, 2, ce / det);
            inv.set(2, 0, cc / det);
            inv.set(2, 1, ce / det);
            inv.set(2, 2, cf / det);
        }
        _ => {
            return Err(AfError::InvalidArgument(format!(
                "closed-form inverse only supports p <= 3, got {p}"
            )))
        }
    }
    Ok(inv)
}

/// Least-squares solution of `X b = y` via Householder QR.
///
/// Returns the coefficients and the `R` factor (upper triangular, p x p),
/// which callers use for the unscaled covariance `(X'X)^{-1} = R^{-1}R^{-T}`.
pub fn qr_lstsq(x: &Matrix, y: &[f64]) -> Result<(Vec<f64>, Matrix)> {
    let n = x.rows;
    let p = x.cols;
    if n < p {
        return Err(AfError::SampleTooShort { needed: p, got: n });
    }
    if y.len() != n {
        return Err(AfError::InvalidArgument("y length != rows".into()));
    }
    let mut a = x.data.clone();
    let mut b = y.to_vec();
    let col_scale: Vec<f64> = (0..p)
        .map(|j| (0..n).map(|i| a[i * p + j].abs()).fold(0.0, f64::max))
        .collect();

    for k in 0..p {
        // Householder reflector for column k.
        let mut norm = 0.0;
        for i in k..n {
            norm += a[i * p + k] * a[i * p + k];
        }
        norm = norm.sqrt();
        if norm < COND_TOL * col_scale[k].max(1e-300) || norm == 0.0 {
            return Err(AfError::RankDeficient(format!("column {k} ~ dependent")));
        }
        let akk = a[k * p + k];
        let alpha = if akk >= 0.0 { -norm } else { norm };
        let mut v = vec![0.0; n - k];
        v[0] = akk - alpha;
        for i in (k + 1)..n {
            v[i - k] = a[i * p + k];
        }
        let vtv: f64 = v.iter().map(|t| t * t).sum();
        if vtv == 0.0 {
            continue;
        }
        a[k * p + k] = alpha;
        for i in (k + 1)..n {
            a[i * p + k] = 0.0;
        }
        for j in (k + 1)..p {
            let mut dot = 0.0;
            for i in k..n {
                dot += v[i - k] * a[i * p + j];
            }
            let s = 2.0 * dot / vtv;
            for i in k..n {
                a[i * p + j] -= s * v[i - k];
            }
        }
        let mut dot = 0.0;
        for i in k..n {
            dot += v[i - k] * b[i];
        }
        let s = 2.0 * dot / vtv;
        for i in k..n {
            b[i] -= s * v[i - k];
        }
    }

    // Back substitution on R b = Q'y.
    let mut coef = vec![0.0; p];
    for k in (0..p).rev() {
        let mut s = b[k];
        for j in (k + 1)..p {
            s -= a[k * p + j] * coef[j];
        }
        let rkk = a[k * p + k];
        if rkk.abs() < COND_TOL * col_scale[k].max(1e-300) {
            return Err(AfError::RankDeficient(format!("R[{k},{k}] ~ 0")));
        }
        coef[k] = s / rkk;
    }

    let mut r = Matrix::zeros(p, p);
    for i in 0..p {
        for j in i..p {
            r.set(i, j, a[i * p + j]);
        }
    }
    Ok((coef, r))
}

/// `(X'X)^{-1}` for a small design: closed form up to three columns,
/// Householder QR beyond that.
pub fn xtx_inverse(x: &Matrix) -> Result<Matrix> {
    if x.cols <= 3 {
        invert_sym_small(&gram(x))
    } else {
        let (_, r) = qr_lstsq(x, &vec![0.0; x.rows])?;
        xtx_inverse_from_r(&r)
    }
}

/// `(X'X)^{-1}` from the QR `R` factor: solves `R M = R^{-T}` columnwise.
pub fn xtx_inverse_from_r(r: &Matrix) -> Result<Matrix> {
    let p = r.rows;
    // First R^{-1} by back substitution against identity.
    let mut rinv = Matrix::zeros(p, p);
    for col in 0..p {
        let mut x = vec![0.0; p];
        for k in (0..p).rev() {
            let mut s = if k == col { 1.0 } else { 0.0 };
            for j in (k + 1)..p {
                s -= r.get(k, j) * x[j];
            }
            let rkk = r.get(k, k);
            if rkk.abs() < 1e-300 {
                return Err(AfError::RankDeficient("singular R".into()));
            }
            x[k] = s / rkk;
        }
        for k in 0..p {
            rinv.set(k, col, x[k]);
        }
    }
    // (X'X)^{-1} = R^{-1} R^{-T}
    let mut out = Matrix::zeros(p, p);
    for i in 0..p {
        for j in 0..p {
            let mut s = 0.0;
            for k in 0..p {
                s += rinv.get(i, k) * rinv.get(j, k);
            }
            out.set(i, j, s);
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn invert_3x3_against_identity() {
        let mut m = Matrix::zeros(3, 3);
        let vals = [[4.0, 1.0, 0.5], [1.0, 3.0, 0.2], [0.5, 0.2, 2.0]];
        for i in 0..3 {
            for j in 0..3 {
                m.set(i, j, vals[i][j]);
            }
        }
        let inv = invert_sym_small(&m).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                let mut s = 0.0;
                for k in 0..3 {
                    s += m.get(i, k) * inv.get(k, j);
                }
                let expect = if i == j { 1.0 } else { 0.0 };
                assert_abs_diff_eq!(s, expect, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn invert_rejects_singular() {
        let mut m = Matrix::zeros(2, 2);
        m.set(0, 0, 1.0);
        m.set(0, 1, 2.0);
        m.set(1, 0, 2.0);
        m.set(1, 1, 4.0);
        assert!(invert_sym_small(&m).is_err());
    }

    #[test]
    fn qr_matches_cofactor_normal_equations() {
        // 12-point instance, 3 columns; oracle is the explicit
        // (X'X)^{-1} X'y via the cofactor inverse.
        let x1 = vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0, 9.0, 10.0, 11.0, 12.0];
        let x2 = vec![0.3, -0.1, 0.8, 0.2, -0.4, 0.9, 0.1, 0.0, -0.2, 0.5, 0.7, -0.6];
        let x3 = vec![2.0, 2.1, 1.9, 2.2, 2.0, 1.8, 2.3, 2.1, 2.0, 1.9, 2.2, 2.4];
        let y = vec![3.0, 5.2, 7.9, 9.5, 11.3, 14.8, 16.0, 17.9, 19.6, 23.0, 25.2, 26.1];
        let x = Matrix::from_columns(&[x1, x2, x3]).unwrap();

        let g = gram(&x);
        let ginv = invert_sym_small(&g).unwrap();
        let b = xty(&x, &y);
        let mut oracle = vec![0.0; 3];
        for i in 0..3 {
            for j in 0..3 {
                oracle[i] += ginv.get(i, j) * b[j];
            }
        }

        let (coef, r) = qr_lstsq(&x, &y).unwrap();
        for i in 0..3 {
            assert_abs_diff_eq!(coef[i], oracle[i], epsilon = 1e-10);
        }

        // (X'X)^{-1} from R matches the cofactor inverse.
        let xtxinv = xtx_inverse_from_r(&r).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                assert_abs_diff_eq!(xtxinv.get(i, j), ginv.get(i, j), epsilon = 1e-10);
            }
        }
    }

    #[test]
    fn qr_rejects_rank_deficiency() {
        let x1 = vec![1.0, 2.0, 3.0, 4.0];
        let x2 = vec![2.0, 4.0, 6.0, 8.0];
        let x = Matrix::from_columns(&[x1, x2]).unwrap();
        assert!(qr_lstsq(&x, &[1.0, 2.0, 3.0, 4.0]).is_err());
    }

    #[test]
    fn qr_exact_fit() {
        let x1 = vec![1.0, 1.0, 1.0, 1.0, 1.0];
        let x2 = vec![0.0, 1.0, 2.0, 3.0, 4.0];
        let y: Vec<f64> = x2.iter().map(|t| 2.5 - 0.5 * t).collect();
        let x = Matrix::from_columns(&[x1, x2]).unwrap();
        let (coef, _) = qr_lstsq(&x, &y).unwrap();
        assert_abs_diff_eq!(coef[0], 2.5, epsilon = 1e-12);
        assert_abs_diff_eq!(coef[1], -0.5, epsilon = 1e-12);
    }
}
