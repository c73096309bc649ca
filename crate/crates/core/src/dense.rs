//! Row-major dense matrices and the few kernels the TT layer needs.

use alloc::vec;
use alloc::vec::Vec;
use nalgebra::DMatrix;

/// Row-major dense matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Mat {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

impl Mat {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Mat { rows, cols, data: vec![0.0; rows * cols] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Mat::zeros(n, n);
        for i in 0..n {
            m.data[i * n + i] = 1.0;
        }
        m
    }

    pub fn from_rows(rows: usize, cols: usize, data: Vec<f64>) -> Self {
        assert_eq!(data.len(), rows * cols, "matrix data length");
        Mat { rows, cols, data }
    }

    pub fn diag(d: &[f64]) -> Self {
        let n = d.len();
        let mut m = Mat::zeros(n, n);
        for (i, v) in d.iter().enumerate() {
            m.data[i * n + i] = *v;
        }
        m
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.cols + j] = v;
    }

    pub fn transpose(&self) -> Mat {
        let mut t = Mat::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                t.data[j * self.rows + i] = self.data[i * self.cols + j];
            }
        }
        t
    }

    pub fn matmul(&self, other: &Mat) -> Mat {
        assert_eq!(self.cols, other.rows, "inner dimension");
        let mut c = Mat::zeros(self.rows, other.cols);
        gemm(self.rows, self.cols, other.cols, 1.0, &self.data, self.cols, 1, &other.data, other.cols, 1, 0.0, &mut c.data, other.cols, 1);
        c
    }

    pub fn scaled(&self, c: f64) -> Mat {
        Mat { rows: self.rows, cols: self.cols, data: self.data.iter().map(|v| v * c).collect() }
    }

    pub fn add(&self, other: &Mat) -> Mat {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        Mat { rows: self.rows, cols: self.cols, data: self.data.iter().zip(&other.data).map(|(a, b)| a + b).collect() }
    }

    pub fn frob(&self) -> f64 {
        norm2(&self.data)
    }

    /// Kronecker product, first factor slowest.
    pub fn kron(&self, other: &Mat) -> Mat {
        let (r, c) = (self.rows * other.rows, self.cols * other.cols);
        let mut k = Mat::zeros(r, c);
        for i in 0..self.rows {
            for j in 0..self.cols {
                let a = self.get(i, j);
                if a == 0.0 {
                    continue;
                }
                for p in 0..other.rows {
                    for q in 0..other.cols {
                        k.data[(i * other.rows + p) * c + j * other.cols + q] = a * other.get(p, q);
                    }
                }
            }
        }
        k
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(self.cols, x.len());
        (0..self.rows).map(|i| self.data[i * self.cols..(i + 1) * self.cols].iter().zip(x).map(|(a, b)| a * b).sum()).collect()
    }

    fn to_na(&self) -> DMatrix<f64> {
        DMatrix::from_row_slice(self.rows, self.cols, &self.data)
    }

    fn from_na(m: &DMatrix<f64>) -> Mat {
        let (rows, cols) = m.shape();
        let mut out = Mat::zeros(rows, cols);
        for j in 0..cols {
            for i in 0..rows {
                out.data[i * cols + j] = m[(i, j)];
            }
        }
        out
    }
}

pub fn norm2(v: &[f64]) -> f64 {
    // scaled accumulation keeps tiny and huge entries finite
    let scale = v.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    if scale == 0.0 || !scale.is_finite() {
        return scale;
    }
    let s: f64 = v.iter().map(|x| (x / scale) * (x / scale)).sum();
    scale * libm::sqrt(s)
}

/// `c = alpha * a * b + beta * c` with explicit strides.
#[allow(clippy::too_many_arguments)]
#[inline]
pub fn gemm(
    m: usize,
    k: usize,
    n: usize,
    alpha: f64,
    a: &[f64],
    rsa: usize,
    csa: usize,
    b: &[f64],
    rsb: usize,
    csb: usize,
    beta: f64,
    c: &mut [f64],
    rsc: usize,
    csc: usize,
) {
    if m == 0 || n == 0 {
        return;
    }
    if k > 0 {
        assert!(a.len() > (m - 1) * rsa + (k - 1) * csa, "gemm: a too short");
        assert!(b.len() > (k - 1) * rsb + (n - 1) * csb, "gemm: b too short");
    }
    assert!(c.len() > (m - 1) * rsc + (n - 1) * csc, "gemm: c too short");
    // SAFETY: extents checked above; matrixmultiply reads/writes only within them.
    unsafe {
        matrixmultiply::dgemm(
            m,
            k,
            n,
            alpha,
            a.as_ptr(),
            rsa as isize,
            csa as isize,
            b.as_ptr(),
            rsb as isize,
            csb as isize,
            beta,
            c.as_mut_ptr(),
            rsc as isize,
            csc as isize,
        );
    }
}

/// Thin QR: `a = q * r` with `q` (m×k) orthonormal columns, `r` (k×n), k = min(m, n).
pub fn qr(a: &Mat) -> (Mat, Mat) {
    let qr = a.to_na().qr();
    (Mat::from_na(&qr.q()), Mat::from_na(&qr.r()))
}

/// Thin LQ: `a = l * q` with `q` (k×n) orthonormal rows.
pub fn lq(a: &Mat) -> (Mat, Mat) {
    let (q, r) = qr(&a.transpose());
    (r.transpose(), q.transpose())
}

/// Thin SVD with singular values sorted descending.
///
/// Householder QR down to a square factor, then one-sided Jacobi on it.
pub fn svd(a: &Mat) -> (Mat, Vec<f64>, Mat) {
    if a.rows < a.cols {
        let (u, s, vt) = svd(&a.transpose());
        return (vt.transpose(), s, u.transpose());
    }
    let (q, r) = qr(a);
    let (u, s, vt) = jacobi_svd(&r);
    (q.matmul(&u), s, vt)
}

const JACOBI_MAX_SWEEPS: usize = 80;

/// One-sided Jacobi SVD of a square matrix.
fn jacobi_svd(a: &Mat) -> (Mat, Vec<f64>, Mat) {
    let n = a.cols;
    debug_assert_eq!(a.rows, n);
    // column-major working copies
    let mut u: Vec<f64> = (0..n).flat_map(|j| (0..n).map(move |i| (i, j))).map(|(i, j)| a.get(i, j)).collect();
    let mut v = vec![0.0; n * n];
    for j in 0..n {
        v[j * n + j] = 1.0;
    }
    let tol = f64::EPSILON;
    for _ in 0..JACOBI_MAX_SWEEPS {
        let mut rotated = false;
        for p in 0..n {
            for q in p + 1..n {
                let (mut al, mut be, mut ga) = (0.0, 0.0, 0.0);
                for i in 0..n {
                    let (x, y) = (u[p * n + i], u[q * n + i]);
                    al += x * x;
                    be += y * y;
                    ga += x * y;
                }
                if ga == 0.0 || libm::fabs(ga) <= tol * libm::sqrt(al * be) {
                    continue;
                }
                rotated = true;
                let zeta = (be - al) / (2.0 * ga);
                let t = libm::copysign(1.0, zeta) / (libm::fabs(zeta) + libm::sqrt(1.0 + zeta * zeta));
                let c = 1.0 / libm::sqrt(1.0 + t * t);
                let s = c * t;
                for m in [&mut u, &mut v] {
                    for i in 0..n {
                        let (x, y) = (m[p * n + i], m[q * n + i]);
                        m[p * n + i] = c * x - s * y;
                        m[q * n + i] = s * x + c * y;
                    }
                }
            }
        }
        if !rotated {
            break;
        }
    }
    let sv: Vec<f64> = (0..n).map(|j| norm2(&u[j * n..(j + 1) * n])).collect();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| sv[j].total_cmp(&sv[i]));
    let mut uo = Mat::zeros(n, n);
    let mut vt = Mat::zeros(n, n);
    let mut s = Vec::with_capacity(n);
    for (c, &j) in order.iter().enumerate() {
        s.push(sv[j]);
        for i in 0..n {
            if sv[j] > 0.0 {
                uo.set(i, c, u[j * n + i] / sv[j]);
            }
            vt.set(c, i, v[j * n + i]);
        }
    }
    complete_columns(&mut uo, &s);
    (uo, s, vt)
}

/// Replaces the columns of zero singular values by an orthonormal completion.
fn complete_columns(u: &mut Mat, s: &[f64]) {
    let n = u.rows;
    let mut e = 0;
    for c in 0..s.len() {
        if s[c] > 0.0 {
            continue;
        }
        while e < n {
            let mut w = vec![0.0; n];
            w[e] = 1.0;
            e += 1;
            for _ in 0..2 {
                for k in 0..u.cols {
                    if k == c || (s[k] == 0.0 && k > c) {
                        continue;
                    }
                    let dot: f64 = (0..n).map(|i| u.get(i, k) * w[i]).sum();
                    for (i, wi) in w.iter_mut().enumerate() {
                        *wi -= dot * u.get(i, k);
                    }
                }
            }
            let nw = norm2(&w);
            if nw > 0.5 {
                for (i, wi) in w.iter().enumerate() {
                    u.set(i, c, wi / nw);
                }
                break;
            }
        }
    }
}

/// Smallest rank whose discarded tail energy stays within `cutoff`; never below 1.
pub fn truncation_rank(s: &[f64], cutoff: f64) -> usize {
    let budget = cutoff * cutoff;
    let mut tail = 0.0;
    let mut r = s.len();
    while r > 1 {
        let next = tail + s[r - 1] * s[r - 1];
        if next > budget {
            break;
        }
        tail = next;
        r -= 1;
    }
    r.max(1)
}

/// Symmetric eigen-decomposition, eigenvalues ascending, eigenvectors as columns.
pub fn sym_eig(a: &Mat) -> (Vec<f64>, Mat) {
    let eig = nalgebra::linalg::SymmetricEigen::new(a.to_na());
    let n = a.rows;
    let mut idx: Vec<usize> = (0..n).collect();
    idx.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
    let mut vecs = Mat::zeros(n, n);
    for (c, &i) in idx.iter().enumerate() {
        for r in 0..n {
            vecs.set(r, c, eig.eigenvectors[(r, i)]);
        }
    }
    (idx.iter().map(|&i| eig.eigenvalues[i]).collect(), vecs)
}
