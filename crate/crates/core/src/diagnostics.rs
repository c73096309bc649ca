//! Backward errors of all-in-one iterates and of their extracted slices, and
//! per-iteration checks of the slice bounds.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Result, TtError};
use crate::solver::{estimate_norm_with, tt_right_gmres, GmresConfig, StoppingCriterion};
use crate::tt::*;

/// Absolute slack allowed on every bound inequality.
pub const BOUND_SLACK: f64 = 1e-12;
/// Window length of the stabilisation test for `‖A_ℓ x_k^[ℓ]‖`.
pub const NU_WINDOW: usize = 3;
/// Relative variation below which the window counts as stable.
pub const NU_VARIATION: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BackwardErrors {
    pub eta_b: f64,
    pub eta_ab: f64,
    /// NaN unless a least-squares residual was supplied.
    pub eta_tilde_b: f64,
    pub residual_norm: f64,
    pub lsq_residual_norm: f64,
}

impl BackwardErrors {
    pub fn with_lsq(mut self, lsq: f64, b_norm: f64) -> Self {
        self.lsq_residual_norm = lsq;
        self.eta_tilde_b = lsq / b_norm;
        self
    }
}

/// `A(Mx)` with `Mx` kept exact.
fn apply_exact(a: &TTOperator, m: Option<&TTOperator>, x: &TTVector) -> Result<TTVector> {
    match m {
        Some(m) => tt_apply(a, &round_sum(&[(1.0, &tt_apply(m, x)?)], 0.0)),
        None => tt_apply(a, x),
    }
}

fn errors_from(res: f64, xn: f64, bn: f64, opnorm: f64) -> BackwardErrors {
    BackwardErrors {
        eta_b: res / bn,
        eta_ab: res / (opnorm * xn + bn),
        eta_tilde_b: f64::NAN,
        residual_norm: res,
        lsq_residual_norm: f64::NAN,
    }
}

/// `η_b` and `η_{A,b}` of `x` for `A x = b`, or of `t` for `AM t = b` when `m` is given.
pub fn backward_errors(a: &TTOperator, m: Option<&TTOperator>, x: &TTVector, b: &TTVector, opnorm: f64) -> Result<BackwardErrors> {
    let bn = tt_norm(b);
    if bn == 0.0 {
        return Err(TtError::ZeroRhs);
    }
    if !(opnorm > 0.0) {
        return Err(TtError::InvalidArgument("operator norm must be positive".into()));
    }
    let ax = apply_exact(a, m, x)?;
    if ax.modes() != b.modes() {
        return Err(TtError::ModeMismatch("A x and b differ in shape".into()));
    }
    let res = tt_sum_norm(&[(1.0, b), (-1.0, &ax)]);
    Ok(errors_from(res, tt_sum_norm(&[(1.0, x)]), bn, opnorm))
}

fn diag_slices(a: &TTOperator, p: usize) -> Result<Vec<TTOperator>> {
    if a.row_modes()[0] != p || a.col_modes()[0] != p {
        return Err(TtError::ModeMismatch("leading operator mode differs from p".into()));
    }
    (1..=p).map(|l| tt_op_diag_slice(a, l)).collect()
}

fn vec_slices(x: &TTVector) -> Result<Vec<TTVector>> {
    (1..=x.modes()[0]).map(|l| tt_slice_first_mode(x, l)).collect()
}

/// Errors of the extracted triples `(A^[ℓ], x^[ℓ], b^[ℓ])`, one per slice.
pub fn slice_backward_errors(
    a: &TTOperator,
    m: Option<&TTOperator>,
    x: &TTVector,
    b: &TTVector,
    slice_opnorms: &[f64],
) -> Result<Vec<BackwardErrors>> {
    let p = b.modes()[0];
    if x.modes()[0] != p || slice_opnorms.len() != p {
        return Err(TtError::ModeMismatch("slice count mismatch".into()));
    }
    let sa = diag_slices(a, p)?;
    let sm = match m {
        Some(m) => Some(diag_slices(m, p)?),
        None => None,
    };
    let (sx, sb) = (vec_slices(x)?, vec_slices(b)?);
    (0..p).map(|l| backward_errors(&sa[l], sm.as_ref().map(|v| &v[l]), &sx[l], &sb[l], slice_opnorms[l])).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoundParams {
    pub p: usize,
    pub nu: f64,
    pub opnorm_a: f64,
    pub opnorm_a0: f64,
    pub opnorm_ainv: Option<f64>,
    pub kappa2: Option<f64>,
}

impl BoundParams {
    pub fn new(p: usize, nu: f64, opnorm_a: f64, opnorm_a0: f64) -> Result<Self> {
        if p == 0 {
            return Err(TtError::InvalidArgument("p must be at least 1".into()));
        }
        if !(0.0..2.0).contains(&nu) {
            return Err(TtError::DegenerateNu(nu));
        }
        Ok(BoundParams { p, nu, opnorm_a, opnorm_a0, opnorm_ainv: None, kappa2: None })
    }

    pub fn with_inverse_norm(mut self, ainv: f64) -> Self {
        self.opnorm_ainv = Some(ainv);
        self.kappa2 = Some(self.opnorm_a * ainv);
        self
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoundFactors {
    pub rho: Vec<f64>,
    pub rho_star: f64,
    pub psi: Vec<f64>,
    pub rho_dagger: Option<f64>,
}

/// `ρ_ℓ`, `ρ*`, `ψ_ℓ` and `ρ†` at one iterate from its norms.
pub fn bound_factors(x_norm: f64, slice_x_norms: &[f64], slice_ax_norms: &[f64], params: &BoundParams) -> Result<BoundFactors> {
    if params.nu >= 2.0 {
        return Err(TtError::DegenerateNu(params.nu));
    }
    if slice_x_norms.len() != params.p || slice_ax_norms.len() != params.p {
        return Err(TtError::InvalidArgument("one norm per slice expected".into()));
    }
    let sp = libm::sqrt(params.p as f64);
    let top = params.opnorm_a * x_norm + sp;
    let inv0 = 1.0 / params.opnorm_a0;
    Ok(BoundFactors {
        rho: slice_ax_norms.iter().map(|n| top / (n + 1.0)).collect(),
        rho_star: top / (2.0 - params.nu),
        psi: slice_x_norms.iter().map(|n| (x_norm + sp * inv0) / (n + inv0)).collect(),
        rho_dagger: params.kappa2.map(|k| sp * (1.0 + k) / (2.0 - params.nu)),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Bound {
    /// `η_b √p ≥ η_{b_ℓ}`
    EtaB,
    /// `η_{A,b} ρ_ℓ ≥ η_{A_ℓ,b_ℓ}`
    Rho,
    /// `η_{A,b} ψ_ℓ ≥ η_{A_ℓ,b_ℓ}` (same operator on every slice)
    Psi,
    /// `η_{A,b} ρ* ≥ η_{A_ℓ,b_ℓ}` from `k**` on
    RhoStar,
    /// `η_{A,b} ρ† ≥ η_{A_ℓ,b_ℓ}` from `k‡` on
    RhoDagger,
}

impl Bound {
    pub fn name(self) -> &'static str {
        match self {
            Bound::EtaB => "eta_b",
            Bound::Rho => "rho",
            Bound::Psi => "psi",
            Bound::RhoStar => "rho_star",
            Bound::RhoDagger => "rho_dagger",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Violation {
    pub iter: usize,
    pub ell: usize,
    pub bound: Bound,
    pub lhs: f64,
    pub rhs: f64,
}

/// One (iteration, slice) line of the report.
#[derive(Debug, Clone, PartialEq)]
pub struct SliceRow {
    pub iter: usize,
    pub ell: usize,
    pub eta_b: f64,
    pub eta_ab: f64,
    pub eta_b_slice: f64,
    pub eta_ab_slice: f64,
    pub rho_ell: f64,
    /// `ρ_ℓ` with `‖A_ℓ‖₂‖x^[ℓ]‖` in the denominator.
    pub rho_ell_loose: f64,
    pub rho_star: f64,
    pub psi_ell: f64,
    pub rho_dagger: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct BoundOptions {
    /// Every slice carries the same operator, so the `ψ_ℓ` bound applies.
    pub same_operator: bool,
    pub samples: usize,
    pub seed: u64,
    /// `‖A⁻¹‖₂` estimate enabling `ρ†`.
    pub inverse_norm: Option<f64>,
}

impl Default for BoundOptions {
    fn default() -> Self {
        BoundOptions { same_operator: false, samples: 10, seed: 0, inverse_norm: None }
    }
}

#[derive(Debug, Clone)]
pub struct BoundReport {
    pub params: BoundParams,
    pub rows: Vec<SliceRow>,
    /// `υ_ℓ(k) = ρ_ℓ(t_k)`, indexed `[ℓ−1][k]`.
    pub upsilon: Vec<Vec<f64>>,
    /// `γ_ℓ(k) = ψ_ℓ(t_k)`, indexed `[ℓ−1][k]`.
    pub gamma: Vec<Vec<f64>>,
    /// 1-based arg-min / arg-max of `‖υ_ℓ‖`.
    pub ell_min: usize,
    pub ell_max: usize,
    /// 1-based arg-min / arg-max of `‖γ_ℓ‖`.
    pub gamma_ell_min: usize,
    pub gamma_ell_max: usize,
    /// First iteration (1-based, in trace numbering) from which `ν` holds.
    pub k_star: usize,
    pub slice_opnorms: Vec<f64>,
    pub violations: Vec<Violation>,
    /// `max_k |‖r‖² − Σ_ℓ‖r^[ℓ]‖²| / ‖r‖²` over the slices of the formed residual `r`
    pub lemma_norm_err: f64,
    /// `max_{k,ℓ} ‖(Ax)^[ℓ] − A_ℓ x^[ℓ]‖ / ‖A_ℓ x^[ℓ]‖`
    pub lemma_slice_err: f64,
}

struct IterNorms {
    res: f64,
    x: f64,
    slice_res: Vec<f64>,
    slice_x: Vec<f64>,
    slice_ax: Vec<f64>,
}

fn arg_extremes(v: &[Vec<f64>]) -> (usize, usize) {
    let n: Vec<f64> = v.iter().map(|r| libm::sqrt(r.iter().map(|x| x * x).sum())).collect();
    let mut lo = 0;
    let mut hi = 0;
    for (i, x) in n.iter().enumerate() {
        if *x < n[lo] {
            lo = i;
        }
        if *x > n[hi] {
            hi = i;
        }
    }
    (lo + 1, hi + 1)
}

/// First index from which every window of `NU_WINDOW` values varies by less than `NU_VARIATION`.
fn stable_from(v: &[f64]) -> usize {
    let stable = |i: usize| {
        let w = &v[i..(i + NU_WINDOW).min(v.len())];
        let hi = w.iter().cloned().fold(f64::MIN, f64::max);
        let lo = w.iter().cloned().fold(f64::MAX, f64::min);
        hi <= 0.0 || (hi - lo) / hi < NU_VARIATION
    };
    (0..v.len()).find(|&i| stable(i)).unwrap_or(v.len().saturating_sub(1))
}

/// Evaluates the slice bounds along a sequence of all-in-one iterates.
///
/// `opnorm_a` must be the norm used for the all-in-one `η_{A,b}` (that of
/// `AM` when `m` is given). `iters` numbers the iterates as in the trace.
pub fn verify_bounds(
    a: &TTOperator,
    m: Option<&TTOperator>,
    b: &TTVector,
    iterates: &[TTVector],
    iters: &[usize],
    opnorm_a: f64,
    opts: &BoundOptions,
) -> Result<BoundReport> {
    if iterates.is_empty() || iterates.len() != iters.len() {
        return Err(TtError::InvalidArgument("one iteration number per iterate expected".into()));
    }
    let p = b.modes()[0];
    let sa = diag_slices(a, p)?;
    let sm = match m {
        Some(m) => Some(diag_slices(m, p)?),
        None => None,
    };
    let sb = vec_slices(b)?;
    let bn = tt_norm(b);
    let sbn: Vec<f64> = sb.iter().map(tt_norm).collect();

    let mut lemma_norm_err = 0.0f64;
    let mut lemma_slice_err = 0.0f64;
    let mut norms = Vec::with_capacity(iterates.len());
    for x in iterates {
        let ax = apply_exact(a, m, x)?;
        let r = round_sum(&[(1.0, b), (-1.0, &ax)], 0.0);
        let res = tt_norm(&r);
        let slice_sq: f64 = vec_slices(&r)?
            .iter()
            .map(|s| {
                let v = tt_norm(s);
                v * v
            })
            .sum();
        if res > 0.0 {
            lemma_norm_err = lemma_norm_err.max((res * res - slice_sq).abs() / (res * res));
        }
        let sx = vec_slices(x)?;
        let mut n = IterNorms { res, x: tt_sum_norm(&[(1.0, x)]), slice_res: vec![], slice_x: vec![], slice_ax: vec![] };
        for l in 0..p {
            let axl = apply_exact(&sa[l], sm.as_ref().map(|v| &v[l]), &sx[l])?;
            let axl_norm = tt_sum_norm(&[(1.0, &axl)]);
            let from_global = tt_slice_first_mode(&ax, l + 1)?;
            let gap = tt_sum_norm(&[(1.0, &from_global), (-1.0, &axl)]);
            if axl_norm > 0.0 {
                lemma_slice_err = lemma_slice_err.max(gap / axl_norm);
            }
            n.slice_res.push(tt_sum_norm(&[(1.0, &sb[l]), (-1.0, &axl)]));
            n.slice_x.push(tt_sum_norm(&[(1.0, &sx[l])]));
            n.slice_ax.push(axl_norm);
        }
        norms.push(n);
    }

    // one sampled estimate per slice, raised to any ratio observed along the iterates
    let mut slice_opnorms = Vec::with_capacity(p);
    for l in 0..p {
        let sampled = if opts.same_operator {
            opnorm_a
        } else {
            let (al, ml) = (&sa[l], sm.as_ref().map(|v| &v[l]));
            estimate_norm_with(&sb[l].modes(), opts.samples, opts.seed, |w| apply_exact(al, ml, w))?
        };
        let observed = norms.iter().filter(|n| n.slice_x[l] > 0.0).map(|n| n.slice_ax[l] / n.slice_x[l]).fold(0.0, f64::max);
        slice_opnorms.push(sampled.max(observed));
    }

    let mut k_star_idx = 0;
    let mut nu = 0.0f64;
    let mut starts = Vec::with_capacity(p);
    for l in 0..p {
        let series: Vec<f64> = norms.iter().map(|n| n.slice_ax[l]).collect();
        let s = stable_from(&series);
        starts.push(s);
        k_star_idx = k_star_idx.max(s);
    }
    for (l, &s) in starts.iter().enumerate() {
        for n in &norms[s..] {
            nu = nu.max((n.slice_ax[l] - 1.0).abs());
        }
    }
    let opnorm_a0 = opnorm_a;
    let mut params = BoundParams { p, nu, opnorm_a, opnorm_a0, opnorm_ainv: None, kappa2: None };
    if let Some(inv) = opts.inverse_norm {
        params = params.with_inverse_norm(inv);
    }
    let nu_ok = nu < 2.0;
    // k†: from here on every slice norm stays below ‖A⁻¹‖√p
    let k_dagger_idx = params.opnorm_ainv.map(|inv| {
        let cap = inv * libm::sqrt(p as f64);
        let mut idx = norms.len();
        for (i, n) in norms.iter().enumerate().rev() {
            if n.slice_x.iter().all(|v| *v <= cap) {
                idx = i;
            } else {
                break;
            }
        }
        idx
    });

    let mut rows = Vec::with_capacity(norms.len() * p);
    let mut violations = Vec::new();
    let mut upsilon = vec![Vec::with_capacity(norms.len()); p];
    let mut gamma = vec![Vec::with_capacity(norms.len()); p];
    for (k, n) in norms.iter().enumerate() {
        let g = errors_from(n.res, n.x, bn, opnorm_a);
        let f = if nu_ok {
            bound_factors(n.x, &n.slice_x, &n.slice_ax, &params)?
        } else {
            let tmp = BoundParams { nu: 0.0, ..params.clone() };
            let mut f = bound_factors(n.x, &n.slice_x, &n.slice_ax, &tmp)?;
            f.rho_star = f64::NAN;
            f.rho_dagger = None;
            f
        };
        let sp = libm::sqrt(p as f64);
        for l in 0..p {
            let s = errors_from(n.slice_res[l], n.slice_x[l], sbn[l], slice_opnorms[l]);
            let loose = (opnorm_a * n.x + sp) / (slice_opnorms[l] * n.slice_x[l] + 1.0);
            let mut check = |bound: Bound, lhs: f64, rhs: f64| {
                if lhs + BOUND_SLACK < rhs {
                    violations.push(Violation { iter: iters[k], ell: l + 1, bound, lhs, rhs });
                }
            };
            check(Bound::EtaB, g.eta_b * sp, s.eta_b);
            check(Bound::Rho, g.eta_ab * f.rho[l], s.eta_ab);
            if opts.same_operator {
                check(Bound::Psi, g.eta_ab * f.psi[l], s.eta_ab);
            }
            if nu_ok && k >= k_star_idx {
                check(Bound::RhoStar, g.eta_ab * f.rho_star, s.eta_ab);
                if let (Some(rd), Some(kd)) = (f.rho_dagger, k_dagger_idx) {
                    if k >= kd {
                        check(Bound::RhoDagger, g.eta_ab * rd, s.eta_ab);
                    }
                }
            }
            upsilon[l].push(f.rho[l]);
            gamma[l].push(f.psi[l]);
            rows.push(SliceRow {
                iter: iters[k],
                ell: l + 1,
                eta_b: g.eta_b,
                eta_ab: g.eta_ab,
                eta_b_slice: s.eta_b,
                eta_ab_slice: s.eta_ab,
                rho_ell: f.rho[l],
                rho_ell_loose: loose,
                rho_star: f.rho_star,
                psi_ell: f.psi[l],
                rho_dagger: f.rho_dagger,
            });
        }
    }
    let (ell_min, ell_max) = arg_extremes(&upsilon);
    let (gamma_ell_min, gamma_ell_max) = arg_extremes(&gamma);
    Ok(BoundReport {
        params,
        rows,
        upsilon,
        gamma,
        ell_min,
        ell_max,
        gamma_ell_min,
        gamma_ell_max,
        k_star: iters[k_star_idx.min(iters.len() - 1)],
        slice_opnorms,
        violations,
        lemma_norm_err,
        lemma_slice_err,
    })
}

/// Sampled `‖A⁻¹‖₂` estimate: largest `‖y‖` over solves of `A y = w` for random unit `w`.
/// A lower bound, like every sampled norm.
pub fn estimate_inverse_norm(a: &TTOperator, samples: usize, seed: u64, cfg: &GmresConfig) -> Result<f64> {
    let mut cfg = cfg.clone();
    cfg.stopping_criterion = StoppingCriterion::EtaB;
    estimate_norm_with(&a.row_modes(), samples, seed, |w| Ok(tt_right_gmres(a, None, w, None, &cfg)?.solution))
}
