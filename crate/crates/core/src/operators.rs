//! Finite-difference operators, preconditioners, right-hand sides and
//! all-in-one parametric systems, emitted directly in TT form.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;

use crate::dense::Mat;
use crate::error::{Result, TtError};
use crate::tt::{
    make_tt_operator, make_tt_vector, round_sum, tt_add, tt_norm, tt_random, tt_round, tt_scale, Core3, Core4, TTOperator, TTVector,
};

/// Uniform interior grid of `n` points on `[a, b]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid1D {
    pub n: usize,
    pub a: f64,
    pub b: f64,
    pub h: f64,
}

impl Grid1D {
    pub fn new(n: usize, a: f64, b: f64) -> Result<Self> {
        if n < 2 {
            return Err(TtError::InvalidArgument(format!("grid needs n ≥ 2, got {n}")));
        }
        if !(b > a) {
            return Err(TtError::InvalidArgument("grid needs b > a".into()));
        }
        Ok(Grid1D { n, a, b, h: (b - a) / (n + 1) as f64 })
    }

    /// Interior nodes `a + i h`, i = 1..n.
    pub fn nodes(&self) -> Vec<f64> {
        (1..=self.n).map(|i| self.a + i as f64 * self.h).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Distribution {
    Log,
    Uniform,
}

/// Sorted parameter values on `[lo, hi]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamSet {
    pub values: Vec<f64>,
    pub distribution: Distribution,
    pub range: (f64, f64),
}

impl ParamSet {
    /// `p` values log-spaced over `[lo, hi]` (lo > 0).
    pub fn log(lo: f64, hi: f64, p: usize) -> Result<Self> {
        if p == 0 || !(lo > 0.0) || hi < lo {
            return Err(TtError::InvalidArgument("log parameter range needs p ≥ 1 and 0 < lo ≤ hi".into()));
        }
        let (l0, l1) = (libm::log10(lo), libm::log10(hi));
        let values = spaced(l0, l1, p).into_iter().map(|e| libm::pow(10.0, e).clamp(lo, hi)).collect();
        Ok(ParamSet { values, distribution: Distribution::Log, range: (lo, hi) })
    }

    /// `p` evenly spaced values over `[lo, hi]`.
    pub fn uniform(lo: f64, hi: f64, p: usize) -> Result<Self> {
        if p == 0 || hi < lo {
            return Err(TtError::InvalidArgument("uniform parameter range needs p ≥ 1 and lo ≤ hi".into()));
        }
        Ok(ParamSet { values: spaced(lo, hi, p), distribution: Distribution::Uniform, range: (lo, hi) })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

fn spaced(lo: f64, hi: f64, p: usize) -> Vec<f64> {
    if p == 1 {
        return vec![lo];
    }
    (0..p).map(|i| if i == p - 1 { hi } else { lo + (hi - lo) * i as f64 / (p - 1) as f64 }).collect()
}

/// Operator, right-hand side and optional preconditioner / reference solution.
#[derive(Debug, Clone)]
pub struct ProblemInstance {
    pub operator: TTOperator,
    pub rhs: TTVector,
    pub preconditioner: Option<TTOperator>,
    pub analytic_solution: Option<TTVector>,
    pub label: String,
}

impl ProblemInstance {
    pub fn new(operator: TTOperator, rhs: TTVector, label: &str) -> Result<Self> {
        if operator.col_modes() != rhs.modes() || operator.row_modes() != rhs.modes() {
            return Err(TtError::ModeMismatch("operator and rhs modes differ".into()));
        }
        Ok(ProblemInstance { operator, rhs, preconditioner: None, analytic_solution: None, label: label.into() })
    }

    pub fn with_preconditioner(mut self, m: TTOperator) -> Result<Self> {
        if m.row_modes() != self.operator.col_modes() {
            return Err(TtError::ModeMismatch("preconditioner does not compose with the operator".into()));
        }
        self.preconditioner = Some(m);
        Ok(self)
    }
}

/// Tridiagonal (1, −2, 1)/h².
pub fn laplacian_1d(g: &Grid1D) -> Mat {
    let n = g.n;
    let s = 1.0 / (g.h * g.h);
    let mut m = Mat::zeros(n, n);
    for i in 0..n {
        m.set(i, i, -2.0 * s);
        if i + 1 < n {
            m.set(i, i + 1, s);
            m.set(i + 1, i, s);
        }
    }
    m
}

/// Tridiagonal (−1, 0, 1)/(2h).
pub fn gradient_1d(g: &Grid1D) -> Mat {
    let n = g.n;
    let s = 1.0 / (2.0 * g.h);
    let mut m = Mat::zeros(n, n);
    for i in 0..n - 1 {
        m.set(i, i + 1, s);
        m.set(i + 1, i, -s);
    }
    m
}

/// `Σ_k L_1⊗…⊗L_{k−1}⊗M_k⊗R_{k+1}⊗…⊗R_d` with interior ranks 2.
pub fn laplace_like(l: &[Mat], m: &[Mat], r: &[Mat]) -> Result<TTOperator> {
    let d = m.len();
    if d == 0 || l.len() != d || r.len() != d {
        return Err(TtError::InvalidArgument("laplace_like needs d matrices in each list".into()));
    }
    for k in 0..d {
        let (n, c) = (m[k].rows, m[k].cols);
        if (l[k].rows, l[k].cols) != (n, c) || (r[k].rows, r[k].cols) != (n, c) {
            return Err(TtError::ModeMismatch(format!("laplace_like size mismatch at mode {}", k + 1)));
        }
    }
    if d == 1 {
        return TTOperator::kron(&m[..1]);
    }
    let mut cores = Vec::with_capacity(d);
    for k in 0..d {
        let (n, c) = (m[k].rows, m[k].cols);
        let core = if k == 0 {
            let mut core = Core4::zeros(1, n, c, 2);
            core.set_block(0, 0, &l[k]);
            core.set_block(0, 1, &m[k]);
            core
        } else if k == d - 1 {
            let mut core = Core4::zeros(2, n, c, 1);
            core.set_block(0, 0, &m[k]);
            core.set_block(1, 0, &r[k]);
            core
        } else {
            let mut core = Core4::zeros(2, n, c, 2);
            core.set_block(0, 0, &l[k]);
            core.set_block(0, 1, &m[k]);
            core.set_block(1, 1, &r[k]);
            core
        };
        cores.push(core);
    }
    make_tt_operator(cores)
}

/// Same pattern for vectors: `Σ_k l_1⊗…⊗m_k⊗…⊗r_d`.
pub fn laplace_like_vector(l: &[Vec<f64>], m: &[Vec<f64>], r: &[Vec<f64>]) -> Result<TTVector> {
    let d = m.len();
    if d == 0 || l.len() != d || r.len() != d {
        return Err(TtError::InvalidArgument("laplace_like_vector needs d vectors in each list".into()));
    }
    if d == 1 {
        return TTVector::rank_one(&m[..1]);
    }
    let mut cores = Vec::with_capacity(d);
    for k in 0..d {
        let n = m[k].len();
        let (r0, r1) = (if k == 0 { 1 } else { 2 }, if k == d - 1 { 1 } else { 2 });
        let mut c = Core3::zeros(r0, n, r1);
        for i in 0..n {
            let mut put = |a: usize, b: usize, v: f64| c.data[(a * n + i) * r1 + b] = v;
            if k == 0 {
                put(0, 0, l[k][i]);
                put(0, 1, m[k][i]);
            } else if k == d - 1 {
                put(0, 0, m[k][i]);
                put(1, 0, r[k][i]);
            } else {
                put(0, 0, l[k][i]);
                put(0, 1, m[k][i]);
                put(1, 1, r[k][i]);
            }
        }
        cores.push(c);
    }
    make_tt_vector(cores)
}

/// Discrete `Δ_d` in TT form (rank 2).
pub fn tt_laplacian(d: usize, g: &Grid1D) -> Result<TTOperator> {
    if d == 0 {
        return Err(TtError::InvalidArgument("d must be ≥ 1".into()));
    }
    let id = Mat::identity(g.n);
    let lap = laplacian_1d(g);
    laplace_like(&vec![id.clone(); d], &vec![lap; d], &vec![id; d])
}

/// Discrete `−Δ_d`.
pub fn tt_neg_laplacian(d: usize, g: &Grid1D) -> Result<TTOperator> {
    Ok(tt_scale(&tt_laplacian(d, g)?, -1.0))
}

fn require_domain(g: &Grid1D, a: f64, b: f64, what: &str) -> Result<()> {
    if g.a != a || g.b != b {
        return Err(TtError::InvalidArgument(format!("{what} needs a grid on [{a}, {b}]")));
    }
    Ok(())
}

/// `−Δu = f` on [0,1]³ with u = (1−x²)(1−y²)(1−z²); b = f at the nodes.
pub fn poisson_problem(g: &Grid1D) -> Result<ProblemInstance> {
    require_domain(g, 0.0, 1.0, "poisson_problem")?;
    let x = g.nodes();
    let phi: Vec<f64> = x.iter().map(|t| 1.0 - t * t).collect();
    let two = vec![2.0; g.n];
    let rhs = laplace_like_vector(&vec![phi.clone(); 3], &vec![two; 3], &vec![phi.clone(); 3])?;
    let mut inst = ProblemInstance::new(tt_neg_laplacian(3, g)?, rhs, "poisson")?;
    inst.analytic_solution = Some(TTVector::rank_one(&vec![phi; 3])?);
    Ok(inst)
}

/// Face values of u = (1−x²)(1−y²)(1−z²) on [0,1]³ moved to the right-hand side.
///
/// `−Δ_h u_h = f + poisson_lifting` holds exactly because u is quadratic per variable.
pub fn poisson_lifting(g: &Grid1D) -> Result<TTVector> {
    require_domain(g, 0.0, 1.0, "poisson_lifting")?;
    let phi: Vec<f64> = g.nodes().iter().map(|t| 1.0 - t * t).collect();
    let mut e1 = vec![0.0; g.n];
    e1[0] = 1.0 / (g.h * g.h);
    let mut acc: Option<TTVector> = None;
    for k in 0..3 {
        let f: Vec<Vec<f64>> = (0..3).map(|j| if j == k { e1.clone() } else { phi.clone() }).collect();
        let t = TTVector::rank_one(&f)?;
        acc = Some(match acc {
            None => t,
            Some(a) => tt_add(&a, &t)?,
        });
    }
    Ok(acc.expect("three faces"))
}

/// Convection term `diag(1−x²)∇₁⊗diag(2y)⊗I + diag(−2x)⊗diag(1−y²)∇₁⊗I`.
pub fn convection_operator(g: &Grid1D) -> Result<TTOperator> {
    let x = g.nodes();
    let grad = gradient_1d(g);
    let one_m: Vec<f64> = x.iter().map(|t| 1.0 - t * t).collect();
    let two_y: Vec<f64> = x.iter().map(|t| 2.0 * t).collect();
    let m_two_x: Vec<f64> = x.iter().map(|t| -2.0 * t).collect();
    let p1 = Mat::diag(&one_m).matmul(&grad);
    let q1 = Mat::diag(&two_y);
    let p2 = Mat::diag(&m_two_x);
    let q2 = Mat::diag(&one_m).matmul(&grad);
    let n = g.n;
    let mut c1 = Core4::zeros(1, n, n, 2);
    c1.set_block(0, 0, &p1);
    c1.set_block(0, 1, &p2);
    let mut c2 = Core4::zeros(2, n, n, 2);
    c2.set_block(0, 0, &q1);
    c2.set_block(1, 1, &q2);
    let mut c3 = Core4::zeros(2, n, n, 1);
    c3.set_block(0, 0, &Mat::identity(n));
    c3.set_block(1, 0, &Mat::identity(n));
    make_tt_operator(vec![c1, c2, c3])
}

/// Dirichlet lifting of u = 1 on {y = 1} for `−αΔ₃ + D`: nonzero only at j = n.
pub fn convdiff_rhs(g: &Grid1D, alpha: f64) -> Result<TTVector> {
    let x = g.nodes();
    let yn = x[g.n - 1];
    // b = α/h² − v₂/(2h), v₂ = −2x(1−y²)
    let fx: Vec<f64> = x.iter().map(|t| alpha / (g.h * g.h) + 2.0 * t * (1.0 - yn * yn) / (2.0 * g.h)).collect();
    let mut ey = vec![0.0; g.n];
    ey[g.n - 1] = 1.0;
    TTVector::rank_one(&[fx, ey, vec![1.0; g.n]])
}

/// `−Δ₃ + D` on [−1,1]³ with u = 1 on {y = 1}, u = 0 elsewhere on the boundary.
pub fn convection_diffusion_problem(g: &Grid1D) -> Result<ProblemInstance> {
    require_domain(g, -1.0, 1.0, "convection_diffusion_problem")?;
    let a = tt_add(&tt_neg_laplacian(3, g)?, &convection_operator(g)?)?;
    let a = tt_round(&a, 1e-14);
    ProblemInstance::new(a, convdiff_rhs(g, 1.0)?, "convdiff")
}

/// Indicator of [−0.5, 0.5] on the nodes; errors if a node lies on ±0.5.
pub fn box_indicator(g: &Grid1D) -> Result<Vec<f64>> {
    g.nodes()
        .into_iter()
        .map(|t| {
            if libm::fabs(libm::fabs(t) - 0.5) < 1e-12 {
                Err(TtError::NodeOnBoundary(t))
            } else if libm::fabs(t) < 0.5 {
                Ok(1.0)
            } else {
                Ok(0.0)
            }
        })
        .collect()
}

/// Heat problem pieces: `B0 = −Δ₃`, `B1` the indicator-weighted Laplacian, `c` unit-norm ones.
pub fn heat_parametrized_parts(g: &Grid1D) -> Result<(TTOperator, TTOperator, TTVector)> {
    require_domain(g, -1.0, 1.0, "heat_parametrized_parts")?;
    let ind = box_indicator(g)?;
    let dmat = Mat::diag(&ind);
    let neg_lap = laplacian_1d(g).scaled(-1.0);
    let dl = dmat.matmul(&neg_lap);
    let b1 = laplace_like(&[dmat.clone(), dmat.clone(), dmat.clone()], &[dl.clone(), dl.clone(), dl], &[dmat.clone(), dmat.clone(), dmat])?;
    let b0 = tt_neg_laplacian(3, g)?;
    let scale = 1.0 / libm::pow(g.n as f64, 1.5);
    let c = tt_scale(&TTVector::ones(&[g.n; 3]), scale);
    Ok((b0, b1, c))
}

/// Eigenvalues `(2 − 2cos(jπ/(n+1)))/h²` of −Δ₁ and the normalised sine eigenvectors (columns).
pub fn neg_laplacian_eigen(g: &Grid1D) -> (Vec<f64>, Mat) {
    let n = g.n;
    let np1 = (n + 1) as f64;
    let lam = (1..=n).map(|j| (2.0 - 2.0 * libm::cos(j as f64 * PI / np1)) / (g.h * g.h)).collect();
    let mut v = Mat::zeros(n, n);
    let s = libm::sqrt(2.0 / np1);
    for k in 0..n {
        for j in 0..n {
            v.set(k, j, s * libm::sin(((j + 1) * (k + 1)) as f64 * PI / np1));
        }
    }
    (lam, v)
}

/// Unrounded diagonal of the exponential sum in the sine eigenbasis: rank 2q+1.
pub fn exp_sum_spectrum(d: usize, g: &Grid1D, q: usize) -> Result<TTVector> {
    if q == 0 || d == 0 {
        return Err(TtError::InvalidArgument("preconditioner needs q ≥ 1 and d ≥ 1".into()));
    }
    let (lam, _) = neg_laplacian_eigen(g);
    let xi = PI / libm::sqrt(q as f64);
    let kk = 2 * q + 1;
    let n = g.n;
    let mut cores = Vec::with_capacity(d);
    for k in 0..d {
        let (r0, r1) = (if k == 0 { 1 } else { kk }, if k == d - 1 { 1 } else { kk });
        let mut c = Core3::zeros(r0, n, r1);
        for (t_idx, s) in (-(q as i64)..=q as i64).enumerate() {
            let t = libm::exp(s as f64 * xi);
            let coef = if k == 0 { xi * t } else { 1.0 };
            let (a, b) = (if k == 0 { 0 } else { t_idx }, if k == d - 1 { 0 } else { t_idx });
            for (i, l) in lam.iter().enumerate() {
                c.data[(a * n + i) * r1 + b] = coef * libm::exp(-t * l);
            }
        }
        cores.push(c);
    }
    make_tt_vector(cores)
}

/// Maps a diagonal-in-eigenbasis tensor to the operator `V^{⊗d} diag(s) V^{⊗d T}`.
fn eigenbasis_operator(s: &TTVector, v: &Mat) -> Result<TTOperator> {
    let vt = v.transpose();
    let n = v.rows;
    let mut cores = Vec::with_capacity(s.d());
    for c in s.cores() {
        let mut oc = Core4::zeros(c.r0, n, n, c.r1);
        for a in 0..c.r0 {
            for b in 0..c.r1 {
                let diag: Vec<f64> = (0..n).map(|i| c.at(a, i, b)).collect();
                let block = v.matmul(&Mat::diag(&diag)).matmul(&vt);
                oc.set_block(a, b, &block);
            }
        }
        cores.push(oc);
    }
    make_tt_operator(cores)
}

/// Exponential-sum approximation of `(−Δ_d)^{-1}`, rounded at τ.
///
/// `M = Σ_{k=−q}^{q} c_k exp(−t_k L)^{⊗d}` with `L = −Δ₁`, `t_k = e^{kξ}`,
/// `c_k = ξ t_k`, `ξ = π/√q`.
pub fn inv_laplacian_preconditioner(d: usize, g: &Grid1D, q: usize, tau: f64) -> Result<TTOperator> {
    let spec = exp_sum_spectrum(d, g, q)?;
    let rounded = tt_round(&spec, tau);
    let (_, v) = neg_laplacian_eigen(g);
    eigenbasis_operator(&rounded, &v)
}

/// `I_p ⊗ M`.
pub fn prepend_identity(p: usize, m: &TTOperator) -> Result<TTOperator> {
    let mut cores = vec![Core4::new(1, p, p, 1, Mat::identity(p).data)];
    cores.extend(m.cores().iter().cloned());
    make_tt_operator(cores)
}

/// `I_p ⊗ B0 + diag(α) ⊗ B1`, built core by core.
pub fn all_in_one_operator(b0: &TTOperator, b1: &TTOperator, params: &ParamSet) -> Result<TTOperator> {
    if b0.row_modes() != b1.row_modes() || b0.col_modes() != b1.col_modes() {
        return Err(TtError::ModeMismatch("B0 and B1 modes differ".into()));
    }
    let p = params.len();
    let mut first = Core4::zeros(1, p, p, 2);
    for (l, a) in params.values.iter().enumerate() {
        first.set(0, l, l, 0, 1.0);
        first.set(0, l, l, 1, *a);
    }
    let d = b0.d();
    let mut cores = vec![first];
    for k in 0..d {
        let (c, g) = (&b0.cores()[k], &b1.cores()[k]);
        let (n, m) = (c.n, c.m);
        // the selector core feeds B0 through rank slot 0 and B1 through slot 1
        let (r0, off0) = if k == 0 { (2, 1) } else { (c.r0 + g.r0, c.r0) };
        let (r1, off1) = if k == d - 1 { (1, 0) } else { (c.r1 + g.r1, c.r1) };
        let mut out = Core4::zeros(r0, n, m, r1);
        for (src, o0, o1) in [(c, 0, 0), (g, off0, off1)] {
            for a in 0..src.r0 {
                for i in 0..n {
                    for j in 0..m {
                        for b in 0..src.r1 {
                            out.set(a + o0, i, j, b + o1, src.at(a, i, j, b));
                        }
                    }
                }
            }
        }
        cores.push(out);
    }
    make_tt_operator(cores)
}

/// Tensor whose first-mode slices are `parts`, ranks zero-padded to a common chain.
pub fn all_in_one_rhs(parts: &[TTVector]) -> Result<TTVector> {
    let p = parts.len();
    if p == 0 {
        return Err(TtError::Empty);
    }
    let modes = parts[0].modes();
    if parts.iter().any(|x| x.modes() != modes) {
        return Err(TtError::ModeMismatch("all_in_one_rhs parts differ in modes".into()));
    }
    let d = modes.len();
    let s: Vec<usize> = (0..=d).map(|k| parts.iter().map(|x| x.ranks()[k]).max().unwrap_or(1)).collect();
    let mut first = Core3::zeros(1, p, p);
    for l in 0..p {
        first.data[l * p + l] = 1.0;
    }
    let mut cores = vec![first];
    for k in 0..d {
        let n = modes[k];
        let r0 = p * s[k];
        let (r1, s1) = if k == d - 1 { (1, 0) } else { (p * s[k + 1], s[k + 1]) };
        let mut out = Core3::zeros(r0, n, r1);
        for (l, x) in parts.iter().enumerate() {
            let c = &x.cores()[k];
            for a in 0..c.r0 {
                for i in 0..n {
                    for b in 0..c.r1 {
                        out.data[((l * s[k] + a) * n + i) * r1 + l * s1 + b] = c.at(a, i, b);
                    }
                }
            }
        }
        cores.push(out);
    }
    make_tt_vector(cores)
}

/// `I_p ⊗ D + diag(α) ⊗ (−Δ₃)` with slice right-hand sides `c_α/‖c_α‖`.
pub fn parametric_convdiff_problem(g: &Grid1D, alphas: &ParamSet) -> Result<ProblemInstance> {
    require_domain(g, -1.0, 1.0, "parametric_convdiff_problem")?;
    let a = all_in_one_operator(&convection_operator(g)?, &tt_neg_laplacian(3, g)?, alphas)?;
    let parts = alphas
        .values
        .iter()
        .map(|&al| {
            let c = convdiff_rhs(g, al)?;
            let s = 1.0 / tt_norm(&c);
            Ok(tt_scale(&c, s))
        })
        .collect::<Result<Vec<_>>>()?;
    ProblemInstance::new(a, all_in_one_rhs(&parts)?, "param-convdiff")
}

/// `I_p ⊗ B0 + diag(θ) ⊗ B1` with `b = 1_p ⊗ c`.
pub fn heat_param_problem(g: &Grid1D, thetas: &ParamSet) -> Result<ProblemInstance> {
    let (b0, b1, c) = heat_parametrized_parts(g)?;
    let a = all_in_one_operator(&b0, &b1, thetas)?;
    ProblemInstance::new(a, replicate(thetas.len(), &c)?, "heat-param")
}

/// Scales first-mode slice ℓ by `w[ℓ]` (row scaling of the first core).
pub fn scale_first_mode(x: &TTVector, w: &[f64]) -> Result<TTVector> {
    let mut cores = x.clone().into_cores();
    let c = &mut cores[0];
    if w.len() != c.n {
        return Err(TtError::ModeMismatch("weight count differs from first mode".into()));
    }
    for (i, wi) in w.iter().enumerate() {
        for b in 0..c.r1 {
            c.data[i * c.r1 + b] *= wi;
        }
    }
    make_tt_vector(cores)
}

/// `1_p ⊗ b`.
pub fn replicate(p: usize, b: &TTVector) -> Result<TTVector> {
    let mut cores = vec![Core3::new(1, p, 1, vec![1.0; p])];
    cores.extend(b.cores().iter().cloned());
    make_tt_vector(cores)
}

/// All-in-one system with p perturbed copies of `base.rhs`, slices normalised.
pub fn multi_rhs_problem(base: &ProblemInstance, p: usize, rank_cap: usize, seed: u64) -> Result<ProblemInstance> {
    if p == 0 || rank_cap == 0 {
        return Err(TtError::InvalidArgument("multi_rhs_problem needs p ≥ 1 and rank_cap ≥ 1".into()));
    }
    let modes = base.rhs.modes();
    let mut full = vec![p];
    full.extend(&modes);
    let mut ranks = vec![1];
    let mut left = 1usize;
    for k in 0..full.len() - 1 {
        left = left.saturating_mul(full[k]);
        let right: usize = full[k + 1..].iter().product();
        ranks.push(rank_cap.min(left).min(right));
    }
    ranks.push(1);
    let dense: f64 = full.iter().map(|&n| n as f64).product();
    let e = tt_scale(&tt_random(&full, &ranks, seed)?, libm::sqrt(dense));
    let c = round_sum(&[(1.0, &replicate(p, &base.rhs)?), (1.0, &e)], 0.0);
    let mut w = Vec::with_capacity(p);
    for l in 1..=p {
        let s = crate::tt::tt_slice_first_mode(&c, l)?;
        w.push(1.0 / tt_norm(&s));
    }
    let rhs = scale_first_mode(&c, &w)?;
    let op = prepend_identity(p, &base.operator)?;
    let mut inst = ProblemInstance::new(op, rhs, &format!("multi-rhs-{}", base.label))?;
    if let Some(m) = &base.preconditioner {
        inst = inst.with_preconditioner(prepend_identity(p, m)?)?;
    }
    Ok(inst)
}

/// Σ over index tuples of normalised sine tensors `e_{j1}⊗…⊗e_{jd}` (1-based indices).
pub fn laplacian_eigen_rhs(g: &Grid1D, indices: &[Vec<usize>]) -> Result<TTVector> {
    if indices.is_empty() {
        return Err(TtError::Empty);
    }
    let (_, v) = neg_laplacian_eigen(g);
    let mut terms = Vec::with_capacity(indices.len());
    for t in indices {
        let mut f = Vec::with_capacity(t.len());
        for &j in t {
            if j == 0 || j > g.n {
                return Err(TtError::IndexOutOfRange { index: j, len: g.n });
            }
            f.push((0..g.n).map(|k| v.get(k, j - 1)).collect::<Vec<f64>>());
        }
        terms.push(TTVector::rank_one(&f)?);
    }
    let mut acc = terms[0].clone();
    for t in &terms[1..] {
        acc = tt_add(&acc, t)?;
    }
    Ok(acc)
}

/// The first `count` index triples of −Δ₃ with pairwise distinct eigenvalues, ascending.
pub fn distinct_eigen_triples(g: &Grid1D, count: usize) -> Vec<Vec<usize>> {
    let (lam, _) = neg_laplacian_eigen(g);
    let n = g.n;
    let mut all: Vec<(f64, Vec<usize>)> = Vec::new();
    for a in 1..=n {
        for b in a..=n {
            for c in b..=n {
                all.push((lam[a - 1] + lam[b - 1] + lam[c - 1], vec![a, b, c]));
            }
        }
    }
    all.sort_by(|x, y| x.0.total_cmp(&y.0).then_with(|| x.1.cmp(&y.1)));
    let mut out: Vec<(f64, Vec<usize>)> = Vec::new();
    for (l, t) in all {
        if out.len() == count {
            break;
        }
        if out.last().map_or(true, |(p, _)| libm::fabs(l - p) > 1e-9 * l) {
            out.push((l, t));
        }
    }
    out.into_iter().map(|(_, t)| t).collect()
}
