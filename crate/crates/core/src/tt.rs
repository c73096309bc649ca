//! Tensor-Train vectors and operators with exact and rounded algebra.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::dense::{gemm, lq, norm2, qr, svd, truncation_rank, Mat};
use crate::error::{Result, TtError};

/// Order-3 core of shape (r0, n, r1), row-major: `(a * n + i) * r1 + b`.
#[derive(Debug, Clone, PartialEq)]
pub struct Core3 {
    pub r0: usize,
    pub n: usize,
    pub r1: usize,
    pub data: Vec<f64>,
}

impl Core3 {
    pub fn new(r0: usize, n: usize, r1: usize, data: Vec<f64>) -> Self {
        assert_eq!(data.len(), r0 * n * r1, "core data length");
        Core3 { r0, n, r1, data }
    }

    pub fn zeros(r0: usize, n: usize, r1: usize) -> Self {
        Core3 { r0, n, r1, data: vec![0.0; r0 * n * r1] }
    }

    #[inline]
    pub fn at(&self, a: usize, i: usize, b: usize) -> f64 {
        self.data[(a * self.n + i) * self.r1 + b]
    }

    /// Matrix X(i) of size r0 × r1.
    pub fn slice(&self, i: usize) -> Mat {
        let mut m = Mat::zeros(self.r0, self.r1);
        for a in 0..self.r0 {
            for b in 0..self.r1 {
                m.set(a, b, self.at(a, i, b));
            }
        }
        m
    }
}

/// Order-4 core of shape (r0, n, m, r1), row-major: `((a * n + i) * m + j) * r1 + b`.
#[derive(Debug, Clone, PartialEq)]
pub struct Core4 {
    pub r0: usize,
    pub n: usize,
    pub m: usize,
    pub r1: usize,
    pub data: Vec<f64>,
}

impl Core4 {
    pub fn new(r0: usize, n: usize, m: usize, r1: usize, data: Vec<f64>) -> Self {
        assert_eq!(data.len(), r0 * n * m * r1, "core data length");
        Core4 { r0, n, m, r1, data }
    }

    pub fn zeros(r0: usize, n: usize, m: usize, r1: usize) -> Self {
        Core4 { r0, n, m, r1, data: vec![0.0; r0 * n * m * r1] }
    }

    #[inline]
    pub fn at(&self, a: usize, i: usize, j: usize, b: usize) -> f64 {
        self.data[((a * self.n + i) * self.m + j) * self.r1 + b]
    }

    #[inline]
    pub fn set(&mut self, a: usize, i: usize, j: usize, b: usize, v: f64) {
        self.data[((a * self.n + i) * self.m + j) * self.r1 + b] = v;
    }

    /// Writes matrix `mat` (n × m) into the (a, b) rank slot.
    pub fn set_block(&mut self, a: usize, b: usize, mat: &Mat) {
        assert_eq!((mat.rows, mat.cols), (self.n, self.m));
        for i in 0..self.n {
            for j in 0..self.m {
                self.set(a, i, j, b, mat.get(i, j));
            }
        }
    }

    fn fused(&self) -> Core3 {
        Core3 { r0: self.r0, n: self.n * self.m, r1: self.r1, data: self.data.clone() }
    }
}

/// Order-d tensor stored as a chain of order-3 cores.
#[derive(Debug, Clone, PartialEq)]
pub struct TTVector {
    cores: Vec<Core3>,
}

/// Multilinear operator stored as a chain of order-4 cores.
#[derive(Debug, Clone, PartialEq)]
pub struct TTOperator {
    cores: Vec<Core4>,
}

fn check_chain(shapes: &[(usize, usize, usize, usize)]) -> Result<()> {
    if shapes.is_empty() {
        return Err(TtError::Empty);
    }
    if shapes[0].0 != 1 {
        return Err(TtError::BoundaryRank(shapes[0].0));
    }
    let last = shapes[shapes.len() - 1].3;
    if last != 1 {
        return Err(TtError::BoundaryRank(last));
    }
    for (k, s) in shapes.iter().enumerate() {
        if s.0 == 0 || s.1 == 0 || s.2 == 0 || s.3 == 0 {
            return Err(TtError::ZeroDim(k));
        }
        if k + 1 < shapes.len() && s.3 != shapes[k + 1].0 {
            return Err(TtError::RankMismatch { core: k, next: k + 1, left: s.3, right: shapes[k + 1].0 });
        }
    }
    Ok(())
}

/// Validates a core list into a [`TTVector`].
pub fn make_tt_vector(cores: Vec<Core3>) -> Result<TTVector> {
    for (k, c) in cores.iter().enumerate() {
        if c.data.len() != c.r0 * c.n * c.r1 {
            return Err(TtError::DataLength { core: k, len: c.data.len() });
        }
    }
    let shapes: Vec<_> = cores.iter().map(|c| (c.r0, c.n, 1, c.r1)).collect();
    check_chain(&shapes)?;
    Ok(TTVector { cores })
}

/// Validates a core list into a [`TTOperator`].
pub fn make_tt_operator(cores: Vec<Core4>) -> Result<TTOperator> {
    for (k, c) in cores.iter().enumerate() {
        if c.data.len() != c.r0 * c.n * c.m * c.r1 {
            return Err(TtError::DataLength { core: k, len: c.data.len() });
        }
    }
    let shapes: Vec<_> = cores.iter().map(|c| (c.r0, c.n * c.m, 1, c.r1)).collect();
    check_chain(&shapes)?;
    Ok(TTOperator { cores })
}

impl TTVector {
    pub fn new(cores: Vec<Core3>) -> Result<Self> {
        make_tt_vector(cores)
    }

    pub fn cores(&self) -> &[Core3] {
        &self.cores
    }

    pub fn into_cores(self) -> Vec<Core3> {
        self.cores
    }

    pub fn d(&self) -> usize {
        self.cores.len()
    }

    pub fn modes(&self) -> Vec<usize> {
        self.cores.iter().map(|c| c.n).collect()
    }

    pub fn ranks(&self) -> Vec<usize> {
        let mut r = vec![1];
        r.extend(self.cores.iter().map(|c| c.r1));
        r
    }

    pub fn max_rank(&self) -> usize {
        self.ranks().into_iter().max().unwrap_or(1)
    }

    /// All-rank-1 zero tensor.
    pub fn zeros(modes: &[usize]) -> Self {
        TTVector { cores: modes.iter().map(|&n| Core3::zeros(1, n, 1)).collect() }
    }

    /// Separable tensor `v_1 ⊗ … ⊗ v_d`.
    pub fn rank_one(factors: &[Vec<f64>]) -> Result<Self> {
        make_tt_vector(factors.iter().map(|f| Core3::new(1, f.len(), 1, f.clone())).collect())
    }

    pub fn ones(modes: &[usize]) -> Self {
        let f: Vec<Vec<f64>> = modes.iter().map(|&n| vec![1.0; n]).collect();
        TTVector::rank_one(&f).expect("ones")
    }
}

impl TTOperator {
    pub fn new(cores: Vec<Core4>) -> Result<Self> {
        make_tt_operator(cores)
    }

    pub fn cores(&self) -> &[Core4] {
        &self.cores
    }

    pub fn d(&self) -> usize {
        self.cores.len()
    }

    pub fn row_modes(&self) -> Vec<usize> {
        self.cores.iter().map(|c| c.n).collect()
    }

    pub fn col_modes(&self) -> Vec<usize> {
        self.cores.iter().map(|c| c.m).collect()
    }

    pub fn ranks(&self) -> Vec<usize> {
        let mut r = vec![1];
        r.extend(self.cores.iter().map(|c| c.r1));
        r
    }

    pub fn max_rank(&self) -> usize {
        self.ranks().into_iter().max().unwrap_or(1)
    }

    /// Rank-1 operator `A_1 ⊗ … ⊗ A_d`.
    pub fn kron(mats: &[Mat]) -> Result<Self> {
        make_tt_operator(mats.iter().map(|a| Core4::new(1, a.rows, a.cols, 1, a.data.clone())).collect())
    }

    pub fn identity(modes: &[usize]) -> Self {
        let mats: Vec<Mat> = modes.iter().map(|&n| Mat::identity(n)).collect();
        TTOperator::kron(&mats).expect("identity")
    }

    fn fused(&self) -> TTVector {
        TTVector { cores: self.cores.iter().map(Core4::fused).collect() }
    }

    fn unfuse(&self, v: TTVector) -> TTOperator {
        let cores = v.cores.into_iter().zip(&self.cores).map(|(c, o)| Core4 { r0: c.r0, n: o.n, m: o.m, r1: c.r1, data: c.data }).collect();
        TTOperator { cores }
    }
}

/// Shared behaviour of vectors and operators: both are core chains over fused modes.
pub trait Train: Sized + Clone {
    fn to_fused(&self) -> TTVector;
    fn from_fused(&self, v: TTVector) -> Self;
    fn same_shape(&self, other: &Self) -> bool;
    fn dense_entries(&self) -> u128;
}

impl Train for TTVector {
    fn to_fused(&self) -> TTVector {
        self.clone()
    }
    fn from_fused(&self, v: TTVector) -> Self {
        v
    }
    fn same_shape(&self, other: &Self) -> bool {
        self.modes() == other.modes()
    }
    fn dense_entries(&self) -> u128 {
        self.cores.iter().map(|c| c.n as u128).product()
    }
}

impl Train for TTOperator {
    fn to_fused(&self) -> TTVector {
        self.fused()
    }
    fn from_fused(&self, v: TTVector) -> Self {
        self.unfuse(v)
    }
    fn same_shape(&self, other: &Self) -> bool {
        self.row_modes() == other.row_modes() && self.col_modes() == other.col_modes()
    }
    fn dense_entries(&self) -> u128 {
        self.cores.iter().map(|c| (c.n * c.m) as u128).product()
    }
}

/// Dense order-d array, first index slowest.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseTensor {
    pub shape: Vec<usize>,
    pub data: Vec<f64>,
}

impl DenseTensor {
    pub fn new(shape: Vec<usize>, data: Vec<f64>) -> Result<Self> {
        let len: usize = shape.iter().product();
        if shape.is_empty() || len != data.len() {
            return Err(TtError::InvalidArgument(format!("dense shape {:?} vs {} entries", shape, data.len())));
        }
        Ok(DenseTensor { shape, data })
    }

    pub fn norm(&self) -> f64 {
        norm2(&self.data)
    }
}

fn budget_check(entries: u128, budget: usize) -> Result<()> {
    if entries > budget as u128 {
        return Err(TtError::DenseBudget { entries, budget });
    }
    Ok(())
}

/// TT-SVD of a dense array at relative accuracy `delta`.
pub fn tt_from_dense(t: &DenseTensor, delta: f64) -> Result<TTVector> {
    if delta < 0.0 {
        return Err(TtError::InvalidArgument("delta must be non-negative".into()));
    }
    let d = t.shape.len();
    let nrm = t.norm();
    if nrm == 0.0 {
        return Ok(TTVector::zeros(&t.shape));
    }
    if d == 1 {
        return make_tt_vector(vec![Core3::new(1, t.shape[0], 1, t.data.clone())]);
    }
    let cutoff = delta * nrm / libm::sqrt((d - 1) as f64);
    let mut cores = Vec::with_capacity(d);
    let mut rest = t.data.clone();
    let mut r0 = 1;
    for k in 0..d - 1 {
        let n = t.shape[k];
        let rows = r0 * n;
        let cols = rest.len() / rows;
        let (u, s, vt) = svd(&Mat::from_rows(rows, cols, rest));
        let r = truncation_rank(&s, cutoff);
        let mut core = Core3::zeros(r0, n, r);
        for row in 0..rows {
            for b in 0..r {
                core.data[row * r + b] = u.get(row, b);
            }
        }
        cores.push(core);
        let mut next = vec![0.0; r * cols];
        for b in 0..r {
            for c in 0..cols {
                next[b * cols + c] = s[b] * vt.get(b, c);
            }
        }
        rest = next;
        r0 = r;
    }
    cores.push(Core3::new(r0, t.shape[d - 1], 1, rest));
    make_tt_vector(cores)
}

/// Full contraction into a dense array; refuses above `budget` entries.
pub fn tt_to_dense(x: &TTVector, budget: usize) -> Result<DenseTensor> {
    budget_check(x.dense_entries(), budget)?;
    // left-to-right: acc is (prod n so far) × r
    let mut acc = vec![1.0];
    let mut rows = 1;
    for c in &x.cores {
        let mut next = vec![0.0; rows * c.n * c.r1];
        gemm(rows, c.r0, c.n * c.r1, 1.0, &acc, c.r0, 1, &c.data, c.n * c.r1, 1, 0.0, &mut next, c.n * c.r1, 1);
        acc = next;
        rows *= c.n;
    }
    DenseTensor::new(x.modes(), acc)
}

/// Dense matrix of an operator; rows and columns use first-index-slowest multi-indices.
pub fn tt_op_to_dense(a: &TTOperator, budget: usize) -> Result<Mat> {
    budget_check(a.dense_entries(), budget)?;
    let fused = tt_to_dense(&a.fused(), usize::MAX)?;
    let rm = a.row_modes();
    let cm = a.col_modes();
    let nr: usize = rm.iter().product();
    let nc: usize = cm.iter().product();
    let d = rm.len();
    let mut out = Mat::zeros(nr, nc);
    let mut idx = vec![0usize; d];
    for (lin, v) in fused.data.iter().enumerate() {
        // decompose the fused multi-index (i_k * m_k + j_k)
        let mut rem = lin;
        for k in (0..d).rev() {
            let f = rm[k] * cm[k];
            idx[k] = rem % f;
            rem /= f;
        }
        let (mut r, mut c) = (0, 0);
        for k in 0..d {
            r = r * rm[k] + idx[k] / cm[k];
            c = c * cm[k] + idx[k] % cm[k];
        }
        out.data[r * nc + c] = *v;
    }
    Ok(out)
}

fn add_fused(x: &TTVector, y: &TTVector) -> TTVector {
    let d = x.d();
    if d == 1 {
        let data = x.cores[0].data.iter().zip(&y.cores[0].data).map(|(a, b)| a + b).collect();
        return TTVector { cores: vec![Core3::new(1, x.cores[0].n, 1, data)] };
    }
    let mut cores = Vec::with_capacity(d);
    for k in 0..d {
        let (cx, cy) = (&x.cores[k], &y.cores[k]);
        let n = cx.n;
        let r0 = if k == 0 { 1 } else { cx.r0 + cy.r0 };
        let r1 = if k == d - 1 { 1 } else { cx.r1 + cy.r1 };
        let mut c = Core3::zeros(r0, n, r1);
        let (ox0, ox1) = (0, 0);
        let oy0 = if k == 0 { 0 } else { cx.r0 };
        let oy1 = if k == d - 1 { 0 } else { cx.r1 };
        for (src, o0, o1) in [(cx, ox0, ox1), (cy, oy0, oy1)] {
            for a in 0..src.r0 {
                for i in 0..n {
                    for b in 0..src.r1 {
                        c.data[((a + o0) * n + i) * r1 + b + o1] = src.at(a, i, b);
                    }
                }
            }
        }
        cores.push(c);
    }
    TTVector { cores }
}

/// Exact sum; interior ranks add.
pub fn tt_add<T: Train>(x: &T, y: &T) -> Result<T> {
    if !x.same_shape(y) {
        return Err(TtError::ModeMismatch("tt_add operands differ in modes".into()));
    }
    Ok(x.from_fused(add_fused(&x.to_fused(), &y.to_fused())))
}

/// Scales the first core by `c`.
pub fn tt_scale<T: Train>(x: &T, c: f64) -> T {
    let mut f = x.to_fused();
    for v in f.cores[0].data.iter_mut() {
        *v *= c;
    }
    x.from_fused(f)
}

/// Euclidean inner product by a left-to-right sweep.
pub fn tt_inner(x: &TTVector, y: &TTVector) -> Result<f64> {
    if x.modes() != y.modes() {
        return Err(TtError::ModeMismatch("tt_inner operands differ in modes".into()));
    }
    let mut w = vec![1.0];
    for (cx, cy) in x.cores.iter().zip(&y.cores) {
        let n = cx.n;
        // z = w^T x : (ry0) × (n rx1)
        let mut z = vec![0.0; cy.r0 * n * cx.r1];
        gemm(cy.r0, cx.r0, n * cx.r1, 1.0, &w, 1, cy.r0, &cx.data, n * cx.r1, 1, 0.0, &mut z, n * cx.r1, 1);
        // w' = z^T y over (ry0 n)
        let mut wn = vec![0.0; cx.r1 * cy.r1];
        gemm(cx.r1, cy.r0 * n, cy.r1, 1.0, &z, 1, cx.r1, &cy.data, cy.r1, 1, 0.0, &mut wn, cy.r1, 1);
        w = wn;
    }
    Ok(w[0])
}

/// Frobenius norm, `sqrt(⟨x, x⟩)` clamped at 0.
pub fn tt_norm(x: &TTVector) -> f64 {
    let s = tt_inner(x, x).expect("same modes");
    libm::sqrt(s.max(0.0))
}

/// Rounding to relative accuracy `delta`.
pub fn tt_round<T: Train>(x: &T, delta: f64) -> T {
    let f = x.to_fused();
    x.from_fused(round_sum(&[(1.0, &f)], delta))
}

/// Rounds `Σ c_j x_j` without forming the padded rank-sum cores.
///
/// Cores are orthogonalised from both ends towards a centre core picked by
/// cost, the centre is then moved to the first core and a left-to-right
/// truncated-SVD sweep applies the per-bond cutoff `δ‖x‖/√(d−1)`.
/// `delta = 0` skips the truncation and returns the orthogonalised chain.
pub fn round_sum(terms: &[(f64, &TTVector)], delta: f64) -> TTVector {
    assert!(!terms.is_empty(), "round_sum needs at least one term");
    assert!(delta >= 0.0, "delta must be non-negative");
    let (cores, c) = orthogonalise_sum(terms);
    let modes = terms[0].1.modes();
    finish_round(cores, c, delta, &modes)
}

/// Norm of `Σ c_j x_j` from the orthogonalised centre (no cancellation loss).
pub fn tt_sum_norm(terms: &[(f64, &TTVector)]) -> f64 {
    let (cores, c) = orthogonalise_sum(terms);
    norm2(&cores[c].data)
}

fn term_rank(t: &TTVector, k: usize) -> usize {
    if k == 0 {
        1
    } else {
        t.cores[k - 1].r1
    }
}

fn pick_centre(terms: &[(f64, &TTVector)], modes: &[usize], big_r: &[usize]) -> usize {
    let d = modes.len();
    let mut best = (f64::INFINITY, 0);
    for c in 0..d {
        let mut cost = 0.0;
        let mut s = 1usize;
        for k in 0..c {
            let mult: usize = terms.iter().map(|(_, t)| s * term_rank(t, k) * modes[k] * term_rank(t, k + 1)).sum();
            let rows = s * modes[k];
            let cols = big_r[k + 1];
            cost += 2.0 * mult as f64 + 2.0 * (rows * cols * rows.min(cols)) as f64;
            s = rows.min(cols);
        }
        let mut t = 1usize;
        for k in (c + 1..d).rev() {
            let mult: usize = terms.iter().map(|(_, x)| term_rank(x, k) * modes[k] * term_rank(x, k + 1) * t).sum();
            let rows = big_r[k];
            let cols = modes[k] * t;
            cost += 2.0 * mult as f64 + 2.0 * (rows * cols * rows.min(cols)) as f64;
            t = rows.min(cols);
        }
        let centre: usize =
            terms.iter().map(|(_, x)| s * term_rank(x, c) * modes[c] * term_rank(x, c + 1) + s * modes[c] * term_rank(x, c + 1) * t).sum();
        cost += 2.0 * centre as f64;
        // moving the centre back to the first core
        cost += 2.0 * (c as f64) * (s * modes[c] * t * s.min(modes[c] * t)) as f64;
        if cost < best.0 {
            best = (cost, c);
        }
    }
    best.1
}

/// Returns cores in mixed canonical form and the centre index.
fn orthogonalise_sum(terms: &[(f64, &TTVector)]) -> (Vec<Core3>, usize) {
    let modes = terms[0].1.modes();
    for (_, t) in terms {
        assert_eq!(t.modes(), modes, "round_sum terms differ in modes");
    }
    let d = modes.len();
    if d == 1 {
        let mut data = vec![0.0; modes[0]];
        for (c, t) in terms {
            for (o, v) in data.iter_mut().zip(&t.cores[0].data) {
                *o += c * v;
            }
        }
        return (vec![Core3::new(1, modes[0], 1, data)], 0);
    }
    // block offsets per bond
    let mut off = vec![vec![0usize; terms.len()]; d + 1];
    let mut big_r = vec![1usize; d + 1];
    for k in 1..d {
        let mut acc = 0;
        for (j, (_, t)) in terms.iter().enumerate() {
            off[k][j] = acc;
            acc += term_rank(t, k);
        }
        big_r[k] = acc;
    }
    let c = pick_centre(terms, &modes, &big_r);

    let mut left_cores: Vec<Core3> = Vec::with_capacity(c);
    let mut lf = Mat::zeros(1, 1);
    let mut s = 1usize;
    for k in 0..c {
        let n = modes[k];
        let cols = big_r[k + 1];
        let mut g = vec![0.0; s * n * cols];
        for (j, (coef, t)) in terms.iter().enumerate() {
            let core = &t.cores[k];
            let o1 = off[k + 1][j];
            if k == 0 {
                for i in 0..n {
                    for b in 0..core.r1 {
                        g[i * cols + o1 + b] = coef * core.at(0, i, b);
                    }
                }
            } else {
                let o0 = off[k][j];
                for i in 0..n {
                    gemm(
                        s,
                        core.r0,
                        core.r1,
                        1.0,
                        &lf.data[o0..],
                        lf.cols,
                        1,
                        &core.data[i * core.r1..],
                        n * core.r1,
                        1,
                        0.0,
                        &mut g[i * cols + o1..],
                        n * cols,
                        1,
                    );
                }
            }
        }
        let (q, r) = qr(&Mat::from_rows(s * n, cols, g));
        left_cores.push(Core3::new(s, n, q.cols, q.data));
        s = q.cols;
        lf = r;
    }

    let mut right_cores: Vec<Core3> = Vec::with_capacity(d - c - 1);
    let mut rf = Mat::zeros(1, 1);
    let mut t = 1usize;
    for k in (c + 1..d).rev() {
        let n = modes[k];
        let rows = big_r[k];
        let mut g = vec![0.0; rows * n * t];
        for (j, (_, x)) in terms.iter().enumerate() {
            let core = &x.cores[k];
            let o0 = off[k][j];
            if k == d - 1 {
                for a in 0..core.r0 {
                    for i in 0..n {
                        g[(o0 + a) * n + i] = core.at(a, i, 0);
                    }
                }
            } else {
                let o1 = off[k + 1][j];
                for i in 0..n {
                    gemm(
                        core.r0,
                        core.r1,
                        t,
                        1.0,
                        &core.data[i * core.r1..],
                        n * core.r1,
                        1,
                        &rf.data[o1 * t..],
                        t,
                        1,
                        0.0,
                        &mut g[o0 * n * t + i * t..],
                        n * t,
                        1,
                    );
                }
            }
        }
        let (l, q) = lq(&Mat::from_rows(rows, n * t, g));
        right_cores.push(Core3::new(q.rows, n, t, q.data));
        t = q.rows;
        rf = l;
    }
    right_cores.reverse();

    // centre: Σ_j Lf_j · core_j · Rf_j
    let n = modes[c];
    let mut g = vec![0.0; s * n * t];
    for (j, (coef, x)) in terms.iter().enumerate() {
        let core = &x.cores[c];
        // t1 = Lf_j · core : s × (n r1)
        let t1: Vec<f64> = if c == 0 {
            core.data.iter().map(|v| coef * v).collect()
        } else {
            let o0 = off[c][j];
            let mut t1 = vec![0.0; s * n * core.r1];
            gemm(s, core.r0, n * core.r1, 1.0, &lf.data[o0..], lf.cols, 1, &core.data, n * core.r1, 1, 0.0, &mut t1, n * core.r1, 1);
            t1
        };
        if c == d - 1 {
            for (o, v) in g.iter_mut().zip(&t1) {
                *o += v;
            }
        } else {
            let o1 = off[c + 1][j];
            for i in 0..n {
                gemm(s, core.r1, t, 1.0, &t1[i * core.r1..], n * core.r1, 1, &rf.data[o1 * t..], t, 1, 1.0, &mut g[i * t..], n * t, 1);
            }
        }
    }
    let mut cores = left_cores;
    cores.push(Core3::new(s, n, t, g));
    cores.extend(right_cores);
    (cores, c)
}

fn finish_round(mut cores: Vec<Core3>, c: usize, delta: f64, modes: &[usize]) -> TTVector {
    let d = cores.len();
    // move the centre to the first core
    for k in (1..=c).rev() {
        let core = &cores[k];
        let (l, q) = lq(&Mat::from_rows(core.r0, core.n * core.r1, core.data.clone()));
        let (n, r1) = (core.n, core.r1);
        cores[k] = Core3::new(q.rows, n, r1, q.data);
        let prev = &cores[k - 1];
        let rows = prev.r0 * prev.n;
        let mut next = vec![0.0; rows * l.cols];
        gemm(rows, prev.r1, l.cols, 1.0, &prev.data, prev.r1, 1, &l.data, l.cols, 1, 0.0, &mut next, l.cols, 1);
        cores[k - 1] = Core3::new(prev.r0, prev.n, l.cols, next);
    }
    let nrm = norm2(&cores[0].data);
    if nrm == 0.0 {
        return TTVector::zeros(modes);
    }
    if delta == 0.0 || d == 1 {
        return TTVector { cores };
    }
    let cutoff = delta * nrm / libm::sqrt((d - 1) as f64);
    for k in 0..d - 1 {
        let core = &cores[k];
        let (r0, n, r1) = (core.r0, core.n, core.r1);
        let (u, sv, vt) = svd(&Mat::from_rows(r0 * n, r1, core.data.clone()));
        let r = truncation_rank(&sv, cutoff);
        let mut kept = vec![0.0; r0 * n * r];
        for row in 0..r0 * n {
            kept[row * r..(row + 1) * r].copy_from_slice(&u.data[row * u.cols..row * u.cols + r]);
        }
        cores[k] = Core3::new(r0, n, r, kept);
        let mut svt = vec![0.0; r * r1];
        for a in 0..r {
            for b in 0..r1 {
                svt[a * r1 + b] = sv[a] * vt.get(a, b);
            }
        }
        let nx = &cores[k + 1];
        let cols = nx.n * nx.r1;
        let mut next = vec![0.0; r * cols];
        gemm(r, r1, cols, 1.0, &svt, r1, 1, &nx.data, cols, 1, 0.0, &mut next, cols, 1);
        cores[k + 1] = Core3::new(r, nx.n, nx.r1, next);
    }
    TTVector { cores }
}

/// Operator-vector contraction; interior ranks multiply.
pub fn tt_apply(a: &TTOperator, x: &TTVector) -> Result<TTVector> {
    if a.col_modes() != x.modes() {
        return Err(TtError::ModeMismatch("operator columns differ from vector modes".into()));
    }
    let mut cores = Vec::with_capacity(a.d());
    for (ca, cx) in a.cores.iter().zip(&x.cores) {
        let (n, m) = (ca.n, ca.m);
        let r0 = ca.r0 * cx.r0;
        let r1 = ca.r1 * cx.r1;
        let mut y = Core3::zeros(r0, n, r1);
        let mut block = vec![0.0; n * m];
        for al in 0..ca.r0 {
            for be in 0..ca.r1 {
                let mut nnz = 0;
                for i in 0..n {
                    for j in 0..m {
                        let v = ca.at(al, i, j, be);
                        nnz += (v != 0.0) as usize;
                        block[i * m + j] = v;
                    }
                }
                if nnz == 0 {
                    continue;
                }
                // banded blocks (stencils) stay sparse, dense blocks go through gemm
                let dense = nnz > 4 * n.max(m);
                for p in 0..cx.r0 {
                    let src = &cx.data[p * m * cx.r1..(p + 1) * m * cx.r1];
                    let base = (al * cx.r0 + p) * n * r1 + be * cx.r1;
                    if dense {
                        gemm(n, m, cx.r1, 1.0, &block, m, 1, src, cx.r1, 1, 1.0, &mut y.data[base..], r1, 1);
                        continue;
                    }
                    for i in 0..n {
                        for j in 0..m {
                            let coef = block[i * m + j];
                            if coef == 0.0 {
                                continue;
                            }
                            let row = &src[j * cx.r1..(j + 1) * cx.r1];
                            let out = &mut y.data[base + i * r1..base + i * r1 + cx.r1];
                            for (o, v) in out.iter_mut().zip(row) {
                                *o += coef * v;
                            }
                        }
                    }
                }
            }
        }
        cores.push(y);
    }
    Ok(TTVector { cores })
}

/// Operator composition `A·B`; interior ranks multiply.
pub fn tt_op_compose(a: &TTOperator, b: &TTOperator) -> Result<TTOperator> {
    if a.col_modes() != b.row_modes() {
        return Err(TtError::ModeMismatch("composition inner modes differ".into()));
    }
    let mut cores = Vec::with_capacity(a.d());
    for (ca, cb) in a.cores.iter().zip(&b.cores) {
        let (n, m, l) = (ca.n, ca.m, cb.m);
        let r0 = ca.r0 * cb.r0;
        let r1 = ca.r1 * cb.r1;
        let mut c = Core4::zeros(r0, n, l, r1);
        for al in 0..ca.r0 {
            for i in 0..n {
                for j in 0..m {
                    for be in 0..ca.r1 {
                        let coef = ca.at(al, i, j, be);
                        if coef == 0.0 {
                            continue;
                        }
                        for p in 0..cb.r0 {
                            for k in 0..l {
                                let src = &cb.data[((p * m + j) * l + k) * cb.r1..][..cb.r1];
                                let base = (((al * cb.r0 + p) * n + i) * l + k) * r1 + be * cb.r1;
                                for (o, v) in c.data[base..base + cb.r1].iter_mut().zip(src) {
                                    *o += coef * v;
                                }
                            }
                        }
                    }
                }
            }
        }
        cores.push(c);
    }
    Ok(TTOperator { cores })
}

/// Standard-normal cores, scaled to unit norm; deterministic per seed.
pub fn tt_random(modes: &[usize], ranks: &[usize], seed: u64) -> Result<TTVector> {
    if ranks.len() != modes.len() + 1 {
        return Err(TtError::InvalidArgument(format!("{} ranks for {} modes", ranks.len(), modes.len())));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut cores = Vec::with_capacity(modes.len());
    for (k, &n) in modes.iter().enumerate() {
        let len = ranks[k] * n * ranks[k + 1];
        let data: Vec<f64> = (0..len).map(|_| StandardNormal.sample(&mut rng)).collect();
        cores.push(Core3 { r0: ranks[k], n, r1: ranks[k + 1], data });
    }
    let x = make_tt_vector(cores)?;
    let nrm = tt_norm(&x);
    Ok(tt_scale(&x, 1.0 / nrm))
}

fn check_index(index: usize, len: usize) -> Result<usize> {
    if index == 0 || index > len {
        return Err(TtError::IndexOutOfRange { index, len });
    }
    Ok(index - 1)
}

/// Slice `ℓ` (1-based) of the first mode, as an order-(d−1) tensor.
pub fn tt_slice_first_mode(x: &TTVector, ell: usize) -> Result<TTVector> {
    if x.d() < 2 {
        return Err(TtError::InvalidArgument("slicing needs d ≥ 2".into()));
    }
    let l = check_index(ell, x.cores[0].n)?;
    let c0 = &x.cores[0];
    let c1 = &x.cores[1];
    let row = &c0.data[l * c0.r1..(l + 1) * c0.r1];
    let cols = c1.n * c1.r1;
    let mut data = vec![0.0; cols];
    gemm(1, c0.r1, cols, 1.0, row, c0.r1, 1, &c1.data, cols, 1, 0.0, &mut data, cols, 1);
    let mut cores = vec![Core3::new(1, c1.n, c1.r1, data)];
    cores.extend(x.cores[2..].iter().cloned());
    make_tt_vector(cores)
}

/// Block `(ℓ, m)` (1-based) of an operator with respect to its first mode pair.
pub fn tt_op_slice(a: &TTOperator, ell: usize, m: usize) -> Result<TTOperator> {
    if a.d() < 2 {
        return Err(TtError::InvalidArgument("slicing needs d ≥ 2".into()));
    }
    let c0 = &a.cores[0];
    let l = check_index(ell, c0.n)?;
    let mm = check_index(m, c0.m)?;
    let c1 = &a.cores[1];
    let row: Vec<f64> = (0..c0.r1).map(|b| c0.at(0, l, mm, b)).collect();
    let cols = c1.n * c1.m * c1.r1;
    let mut data = vec![0.0; cols];
    gemm(1, c0.r1, cols, 1.0, &row, c0.r1, 1, &c1.data, cols, 1, 0.0, &mut data, cols, 1);
    let mut cores = vec![Core4::new(1, c1.n, c1.m, c1.r1, data)];
    cores.extend(a.cores[2..].iter().cloned());
    make_tt_operator(cores)
}

/// Diagonal block `(ℓ, ℓ)` of an operator that is block diagonal in its first mode.
pub fn tt_op_diag_slice(a: &TTOperator, ell: usize) -> Result<TTOperator> {
    let c0 = &a.cores[0];
    if c0.n != c0.m {
        return Err(TtError::NotDiagonalSelector);
    }
    check_index(ell, c0.n)?;
    for i in 0..c0.n {
        for j in 0..c0.m {
            if i != j && (0..c0.r1).any(|b| c0.at(0, i, j, b) != 0.0) {
                return Err(TtError::NotDiagonalSelector);
            }
        }
    }
    tt_op_slice(a, ell, ell)
}

/// Storage telemetry of a chain.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StorageStats {
    pub max_rank: usize,
    pub tt_entries: usize,
    pub dense_entries: u128,
    pub compression_ratio: f64,
}

pub fn storage_stats<T: Train>(x: &T) -> StorageStats {
    let f = x.to_fused();
    let tt_entries: usize = f.cores.iter().map(|c| c.r0 * c.n * c.r1).sum();
    let dense_entries = x.dense_entries();
    StorageStats { max_rank: f.max_rank(), tt_entries, dense_entries, compression_ratio: tt_entries as f64 / dense_entries as f64 }
}
