//! TT-GMRES with modified Gram-Schmidt, restarted right preconditioning and
//! the relaxed-rounding variant.

use alloc::vec;
use alloc::vec::Vec;

use crate::dense::Mat;
use crate::error::{Result, TtError};
use crate::tt::*;

/// Relative tolerance on the subdiagonal entry that signals a lucky breakdown.
pub const BREAKDOWN_TOL: f64 = 1e-14;
/// Relative decrease below which a full restart cycle counts as stagnation.
pub const STAGNATION_TOL: f64 = 1e-14;
/// Floor on the least-squares residual in the relaxed rounding schedule.
pub const RELAXED_FLOOR: f64 = f64::EPSILON;
/// Interior rank of the random probes used for norm estimation.
pub const PROBE_RANK: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RoundingPolicy {
    Constant,
    Relaxed,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StoppingCriterion {
    /// `η_{A,b}`, or `η_{AM,b}` when a preconditioner is present.
    EtaAb,
    EtaB,
    EtaTildeB,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GmresConfig {
    pub m: usize,
    pub epsilon: f64,
    pub delta: f64,
    pub maxit: usize,
    pub rounding_policy: RoundingPolicy,
    pub stopping_criterion: StoppingCriterion,
    pub norm_samples: usize,
    pub seed: u64,
    /// Assemble the iterate (and evaluate the true residual) every this many iterations.
    pub assemble_every: usize,
    /// Keep the preconditioned iterate of every assembled iteration.
    pub keep_iterates: bool,
}

impl GmresConfig {
    pub fn new(m: usize, epsilon: f64, delta: f64, maxit: usize) -> Self {
        GmresConfig {
            m,
            epsilon,
            delta,
            maxit,
            rounding_policy: RoundingPolicy::Constant,
            stopping_criterion: StoppingCriterion::EtaAb,
            norm_samples: 10,
            seed: 0,
            assemble_every: 1,
            keep_iterates: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |s: &str| Err(TtError::InvalidArgument(s.into()));
        if !(self.epsilon > 0.0) {
            return bad("epsilon must be positive");
        }
        if !(self.delta >= 0.0) {
            return bad("delta must be non-negative");
        }
        if self.m == 0 {
            return bad("m must be at least 1");
        }
        if self.maxit < self.m {
            return bad("maxit must be at least m");
        }
        if self.norm_samples == 0 || self.assemble_every == 0 {
            return bad("norm_samples and assemble_every must be at least 1");
        }
        Ok(())
    }
}

/// Per-iteration telemetry. True-residual quantities are NaN on iterations
/// where the iterate was not assembled.
#[derive(Debug, Clone, PartialEq)]
pub struct IterationRecord {
    pub iter: usize,
    pub eta_b: f64,
    pub eta_ab: f64,
    pub eta_amb: f64,
    pub eta_tilde_b: f64,
    pub lsq_residual: f64,
    pub true_residual: f64,
    pub max_rank_v: usize,
    pub max_rank_x: usize,
    pub cr_last_vec: f64,
    pub cr_basis: f64,
    pub delta_used: f64,
}

impl IterationRecord {
    pub fn criterion(&self, c: StoppingCriterion, preconditioned: bool) -> f64 {
        match c {
            StoppingCriterion::EtaAb if preconditioned => self.eta_amb,
            StoppingCriterion::EtaAb => self.eta_ab,
            StoppingCriterion::EtaB => self.eta_b,
            StoppingCriterion::EtaTildeB => self.eta_tilde_b,
        }
    }
}

#[derive(Debug, Clone)]
pub struct GmresOutcome {
    pub solution: TTVector,
    pub converged: bool,
    pub iterations: usize,
    pub trace: Vec<IterationRecord>,
    /// `‖A‖₂` estimate.
    pub estimated_opnorm: f64,
    /// `‖AM‖₂` estimate, present when preconditioned.
    pub estimated_prec_opnorm: Option<f64>,
    pub breakdown: bool,
    pub stagnated: bool,
    /// Preconditioned iterates `t_k` (equal to `x_k` without preconditioner).
    pub iterates: Vec<TTVector>,
}

/// Incremental least-squares solve of `min ‖βe₁ − H̄y‖` by plane rotations.
#[derive(Debug, Clone, Default)]
pub struct Givens {
    r: Vec<Vec<f64>>,
    cs: Vec<f64>,
    sn: Vec<f64>,
    g: Vec<f64>,
}

impl Givens {
    pub fn new(beta: f64) -> Self {
        Givens { r: Vec::new(), cs: Vec::new(), sn: Vec::new(), g: vec![beta] }
    }

    pub fn len(&self) -> usize {
        self.r.len()
    }

    pub fn is_empty(&self) -> bool {
        self.r.is_empty()
    }

    /// Adds column `k` (length k+2 with the subdiagonal last) and returns the new residual.
    pub fn push(&mut self, mut h: Vec<f64>) -> f64 {
        let k = self.r.len();
        debug_assert_eq!(h.len(), k + 2);
        for i in 0..k {
            let (a, b) = (h[i], h[i + 1]);
            h[i] = self.cs[i] * a + self.sn[i] * b;
            h[i + 1] = -self.sn[i] * a + self.cs[i] * b;
        }
        let (a, b) = (h[k], h[k + 1]);
        let rho = libm::hypot(a, b);
        let (c, s) = if rho == 0.0 { (1.0, 0.0) } else { (a / rho, b / rho) };
        h[k] = rho;
        h.truncate(k + 1);
        self.cs.push(c);
        self.sn.push(s);
        let gk = self.g[k];
        self.g[k] = c * gk;
        self.g.push(-s * gk);
        self.r.push(h);
        self.residual()
    }

    pub fn residual(&self) -> f64 {
        self.g[self.r.len()].abs()
    }

    pub fn solve(&self) -> Result<Vec<f64>> {
        let k = self.r.len();
        let mut y = vec![0.0; k];
        for i in (0..k).rev() {
            let mut s = self.g[i];
            for j in i + 1..k {
                s -= self.r[j][i] * y[j];
            }
            let rii = self.r[i][i];
            if rii == 0.0 {
                return Err(TtError::SingularFactor);
            }
            y[i] = s / rii;
        }
        Ok(y)
    }
}

/// Least-squares solution of `min ‖βe₁ − H̄y‖` for an upper-Hessenberg `H̄`.
pub fn hessenberg_lsq(h: &Mat, beta: f64) -> Result<(Vec<f64>, f64)> {
    let k = h.cols;
    if h.rows != k + 1 {
        return Err(TtError::InvalidArgument("H̄ must be (k+1)×k".into()));
    }
    for j in 0..k {
        for i in j + 2..k + 1 {
            if h.get(i, j) != 0.0 {
                return Err(TtError::InvalidArgument("H̄ is not upper Hessenberg".into()));
            }
        }
    }
    let mut giv = Givens::new(beta);
    for j in 0..k {
        giv.push((0..j + 2).map(|i| h.get(i, j)).collect());
    }
    Ok((giv.solve()?, giv.residual()))
}

/// Krylov basis, Hessenberg matrix and rotations of one cycle.
#[derive(Debug, Clone)]
pub struct ArnoldiState {
    pub basis: Vec<TTVector>,
    pub hessenberg: Mat,
    pub beta: f64,
    pub givens: Givens,
    pub lsq_residual: f64,
    gram: Vec<Vec<f64>>,
}

impl ArnoldiState {
    pub fn new(r0: &TTVector, beta: f64) -> Self {
        ArnoldiState {
            basis: vec![tt_scale(r0, 1.0 / beta)],
            hessenberg: Mat::zeros(1, 0),
            beta,
            givens: Givens::new(beta),
            lsq_residual: beta,
            gram: vec![vec![1.0]],
        }
    }

    /// MGS coefficients of `w` against the basis, from `⟨v_i, w⟩` and the cached Gram matrix.
    fn mgs_coefficients(&self, w: &TTVector) -> Vec<f64> {
        let mut h: Vec<f64> = Vec::with_capacity(self.basis.len());
        for (i, v) in self.basis.iter().enumerate() {
            let mut hi = tt_inner(v, w).expect("basis shares the modes of w");
            for (j, hj) in h.iter().enumerate() {
                hi -= hj * self.gram[i][j];
            }
            h.push(hi);
        }
        h
    }

    /// MGS step on `w0`, the rounded image of the last basis vector. Returns
    /// the rounded remainder and whether the step broke down.
    pub fn step(&mut self, w0: &TTVector, delta: f64) -> (TTVector, bool) {
        let h = self.mgs_coefficients(w0);
        let mut terms: Vec<(f64, &TTVector)> = Vec::with_capacity(h.len() + 1);
        terms.push((1.0, w0));
        for (hi, v) in h.iter().zip(&self.basis) {
            terms.push((-hi, v));
        }
        let w = round_sum(&terms, delta);
        let hnext = tt_norm(&w);
        let breakdown = hnext < BREAKDOWN_TOL * self.beta;
        let mut col = h;
        col.push(hnext);
        let next = if breakdown { None } else { Some(tt_scale(&w, 1.0 / hnext)) };
        self.push(col, next);
        (w, breakdown)
    }

    fn push(&mut self, mut col: Vec<f64>, next: Option<TTVector>) {
        let k = self.hessenberg.cols;
        let mut hm = Mat::zeros(k + 2, k + 1);
        for j in 0..k {
            for i in 0..=j + 1 {
                hm.set(i, j, self.hessenberg.get(i, j));
            }
        }
        for (i, v) in col.iter().enumerate() {
            hm.set(i, k, *v);
        }
        self.hessenberg = hm;
        col.truncate(k + 2);
        self.lsq_residual = self.givens.push(col);
        if let Some(v) = next {
            let g: Vec<f64> = self.basis.iter().map(|u| tt_inner(u, &v).expect("same modes")).collect();
            let vv = tt_inner(&v, &v).expect("same modes");
            for (i, gi) in g.iter().enumerate() {
                self.gram[i].push(*gi);
            }
            let mut row = g;
            row.push(vv);
            self.gram.push(row);
            self.basis.push(v);
        }
    }
}

/// `steps` Arnoldi iterations of `A` from `r0`, stopping early on breakdown.
pub fn arnoldi(a: &TTOperator, r0: &TTVector, steps: usize, delta: f64) -> Result<ArnoldiState> {
    let beta = tt_norm(r0);
    if beta == 0.0 {
        return Err(TtError::ZeroRhs);
    }
    let mut st = ArnoldiState::new(r0, beta);
    for k in 0..steps {
        let w0 = tt_round(&tt_apply(a, &st.basis[k])?, delta);
        if st.step(&w0, delta).1 {
            break;
        }
    }
    Ok(st)
}

/// The operator of the Krylov iteration: `A` or `A∘M` applied as two products.
#[derive(Clone, Copy)]
struct System<'a> {
    a: &'a TTOperator,
    m: Option<&'a TTOperator>,
    /// `‖AM‖₂ / ‖A‖₂`, scales the intermediate rounding.
    gain: f64,
}

impl System<'_> {
    /// `round(A v, δ)` or `round(A round(M v, δ'), δ)`, where `δ'` keeps the
    /// intermediate error below `δ‖AM‖‖v‖` once multiplied by `A`.
    fn apply(&self, v: &TTVector, delta: f64) -> Result<TTVector> {
        let u = match self.m {
            Some(m) => {
                let mv = round_sum(&[(1.0, &tt_apply(m, v)?)], 0.0);
                let nmv = tt_norm(&mv);
                if nmv == 0.0 {
                    mv
                } else {
                    tt_round(&mv, (delta * self.gain * tt_norm(v) / nmv).min(1.0))
                }
            }
            None => v.clone(),
        };
        Ok(tt_round(&tt_apply(self.a, &u)?, delta))
    }

    /// `M t` without truncation.
    fn precondition_exact(&self, t: &TTVector) -> Result<TTVector> {
        match self.m {
            Some(m) => Ok(round_sum(&[(1.0, &tt_apply(m, t)?)], 0.0)),
            None => Ok(t.clone()),
        }
    }
}

fn probe_ranks(modes: &[usize]) -> Vec<usize> {
    let d = modes.len();
    let mut r = vec![1; d + 1];
    let mut left = 1usize;
    for k in 1..d {
        left = left.saturating_mul(modes[k - 1]);
        let right: usize = modes[k..].iter().fold(1usize, |a, &n| a.saturating_mul(n));
        r[k] = PROBE_RANK.min(left).min(right);
    }
    r
}

fn probe_seed(seed: u64, i: usize) -> u64 {
    seed.wrapping_mul(0x9E37_79B9_7F4A_7C15).wrapping_add(i as u64)
}

/// Largest `‖f(w)‖` over `samples` random unit TT-vectors of rank 4.
pub fn estimate_norm_with<F>(modes: &[usize], samples: usize, seed: u64, mut f: F) -> Result<f64>
where
    F: FnMut(&TTVector) -> Result<TTVector>,
{
    let ranks = probe_ranks(modes);
    let mut best = 0.0f64;
    for i in 0..samples.max(1) {
        let w = tt_random(modes, &ranks, probe_seed(seed, i))?;
        best = best.max(tt_sum_norm(&[(1.0, &f(&w)?)]));
    }
    Ok(best)
}

/// Sampled estimate of `‖A‖₂`.
pub fn estimate_l2_norm(a: &TTOperator, samples: usize, seed: u64) -> Result<f64> {
    estimate_norm_with(&a.col_modes(), samples, seed, |w| tt_apply(a, w))
}

/// Sampled estimate of `‖AM‖₂`, applying `M` then `A`.
pub fn estimate_l2_norm_composed(a: &TTOperator, m: &TTOperator, samples: usize, seed: u64) -> Result<f64> {
    estimate_norm_with(&m.col_modes(), samples, seed, |w| tt_apply(a, &tt_apply(m, w)?))
}

struct Norms {
    b: f64,
    a: f64,
    am: Option<f64>,
}

/// Mutable solve-wide state shared by the restart cycles.
struct Run<'a> {
    sys: System<'a>,
    b: &'a TTVector,
    cfg: &'a GmresConfig,
    norms: Norms,
    trace: Vec<IterationRecord>,
    iterates: Vec<TTVector>,
    eta_tilde: f64,
}

struct CycleResult {
    t: Option<TTVector>,
    converged: bool,
    breakdown: bool,
}

impl Run<'_> {
    fn delta_now(&self) -> f64 {
        match self.cfg.rounding_policy {
            RoundingPolicy::Constant => self.cfg.delta,
            RoundingPolicy::Relaxed => (self.cfg.delta / self.eta_tilde.max(RELAXED_FLOOR)).min(1.0),
        }
    }

    fn criterion(&self, rec: &IterationRecord) -> f64 {
        rec.criterion(self.cfg.stopping_criterion, self.sys.m.is_some())
    }

    /// One Arnoldi cycle from residual `r0` around the current `x_base`, `t_acc`.
    fn cycle(&mut self, r0: &TTVector, beta: f64, x_base: &TTVector, t_acc: &TTVector, budget: usize) -> Result<CycleResult> {
        let modes = self.b.modes();
        let dense: f64 = modes.iter().map(|&n| n as f64).product();
        let mut st = ArnoldiState::new(r0, beta);
        let mut basis_entries = storage_stats(&st.basis[0]).tt_entries as f64;
        let mut last_t = None;
        for k in 1..=budget {
            let delta = self.delta_now();
            let w0 = self.sys.apply(&st.basis[k - 1], delta)?;
            let (w, breakdown) = st.step(&w0, delta);
            let (rank_v, cr_v) = if breakdown {
                (w.max_rank(), 0.0)
            } else {
                let s = storage_stats(&st.basis[k]);
                basis_entries += s.tt_entries as f64;
                (s.max_rank, s.compression_ratio)
            };
            let lsq = st.lsq_residual;
            self.eta_tilde = lsq / self.norms.b;
            let mut rec = IterationRecord {
                iter: self.trace.len() + 1,
                eta_b: f64::NAN,
                eta_ab: f64::NAN,
                eta_amb: f64::NAN,
                eta_tilde_b: self.eta_tilde,
                lsq_residual: lsq,
                true_residual: f64::NAN,
                max_rank_v: rank_v,
                max_rank_x: 0,
                cr_last_vec: cr_v,
                cr_basis: basis_entries / (st.basis.len() as f64 * dense),
                delta_used: delta,
            };
            let assemble = breakdown
                || k == budget
                || k % self.cfg.assemble_every == 0
                || self.cfg.stopping_criterion == StoppingCriterion::EtaTildeB && self.eta_tilde < self.cfg.epsilon;
            if assemble {
                let y = st.givens.solve()?;
                let yterms: Vec<(f64, &TTVector)> = y.iter().copied().zip(&st.basis).collect();
                let t = round_sum(&yterms, delta);
                rec.max_rank_x = t.max_rank();
                self.true_quantities(&mut rec, &t, x_base, t_acc)?;
                if self.cfg.keep_iterates {
                    self.iterates.push(round_sum(&[(1.0, t_acc), (1.0, &t)], 0.0));
                }
                last_t = Some(t);
            }
            let value = self.criterion(&rec);
            self.trace.push(rec);
            if value < self.cfg.epsilon || breakdown {
                return Ok(CycleResult { t: last_t, converged: value < self.cfg.epsilon, breakdown });
            }
        }
        Ok(CycleResult { t: last_t, converged: false, breakdown: false })
    }

    fn true_quantities(&self, rec: &mut IterationRecord, t: &TTVector, x_base: &TTVector, t_acc: &TTVector) -> Result<()> {
        let z = self.sys.precondition_exact(t)?;
        let az = tt_apply(self.sys.a, &z)?;
        let ax = tt_apply(self.sys.a, x_base)?;
        let res = tt_sum_norm(&[(1.0, self.b), (-1.0, &ax), (-1.0, &az)]);
        let xn = tt_sum_norm(&[(1.0, x_base), (1.0, &z)]);
        let nb = self.norms.b;
        rec.true_residual = res;
        rec.eta_b = res / nb;
        rec.eta_ab = res / (self.norms.a * xn + nb);
        rec.eta_amb = match self.norms.am {
            Some(am) => res / (am * tt_sum_norm(&[(1.0, t_acc), (1.0, t)]) + nb),
            None => rec.eta_ab,
        };
        Ok(())
    }
}

fn check_system(a: &TTOperator, m: Option<&TTOperator>, b: &TTVector) -> Result<()> {
    if a.row_modes() != b.modes() || a.col_modes() != a.row_modes() {
        return Err(TtError::ModeMismatch("operator must be square and match the rhs".into()));
    }
    if let Some(m) = m {
        if m.row_modes() != a.col_modes() || m.col_modes() != m.row_modes() {
            return Err(TtError::ModeMismatch("preconditioner must be square and compose with A".into()));
        }
    }
    Ok(())
}

fn solve(
    a: &TTOperator,
    m: Option<&TTOperator>,
    b: &TTVector,
    x0: Option<&TTVector>,
    cfg: &GmresConfig,
    restart: bool,
) -> Result<GmresOutcome> {
    cfg.validate()?;
    check_system(a, m, b)?;
    let nb = tt_norm(b);
    if nb == 0.0 {
        return Err(TtError::ZeroRhs);
    }
    let modes = b.modes();
    let na = estimate_l2_norm(a, cfg.norm_samples, cfg.seed)?;
    let nam = match m {
        Some(m) => Some(estimate_l2_norm_composed(a, m, cfg.norm_samples, cfg.seed)?),
        None => None,
    };
    let mut run = Run {
        sys: System { a, m, gain: nam.map_or(1.0, |am| am / na) },
        b,
        cfg,
        norms: Norms { b: nb, a: na, am: nam },
        trace: Vec::new(),
        iterates: Vec::new(),
        eta_tilde: 1.0,
    };
    let mut x = match x0 {
        Some(x0) => {
            if x0.modes() != modes {
                return Err(TtError::ModeMismatch("initial guess modes".into()));
            }
            x0.clone()
        }
        None => TTVector::zeros(&modes),
    };
    let mut t_acc = TTVector::zeros(&modes);
    let mut converged = false;
    let mut breakdown = false;
    let mut stagnated = false;
    loop {
        let done = run.trace.len();
        if done >= cfg.maxit || (!restart && done > 0) {
            break;
        }
        let ax = tt_apply(a, &x)?;
        let start_res = tt_sum_norm(&[(1.0, b), (-1.0, &ax)]);
        let delta = run.delta_now();
        let r0 = round_sum(&[(1.0, b), (-1.0, &ax)], delta);
        let beta = tt_norm(&r0);
        if beta == 0.0 {
            converged = true;
            break;
        }
        let budget = cfg.m.min(cfg.maxit - done);
        let cyc = run.cycle(&r0, beta, &x, &t_acc, budget)?;
        converged = cyc.converged;
        breakdown |= cyc.breakdown;
        if let Some(t) = &cyc.t {
            let z = run.sys.precondition_exact(t)?;
            let delta = run.delta_now();
            x = round_sum(&[(1.0, &x), (1.0, &z)], delta);
            t_acc = round_sum(&[(1.0, &t_acc), (1.0, t)], delta);
        }
        if converged || !restart {
            break;
        }
        let end_res = run.trace.last().map(|r| r.true_residual).unwrap_or(start_res);
        if !(end_res < start_res * (1.0 - STAGNATION_TOL)) {
            stagnated = true;
            break;
        }
    }
    Ok(GmresOutcome {
        solution: x,
        converged,
        iterations: run.trace.len(),
        trace: run.trace,
        estimated_opnorm: na,
        estimated_prec_opnorm: nam,
        breakdown,
        stagnated,
        iterates: run.iterates,
    })
}

/// Unrestarted TT-GMRES from a zero initial guess, at most `cfg.m` iterations.
pub fn tt_gmres(a: &TTOperator, b: &TTVector, cfg: &GmresConfig) -> Result<GmresOutcome> {
    solve(a, None, b, None, cfg, false)
}

/// Restarted right-preconditioned TT-GMRES; returns the unpreconditioned solution.
pub fn tt_right_gmres(
    a: &TTOperator,
    m: Option<&TTOperator>,
    b: &TTVector,
    x0: Option<&TTVector>,
    cfg: &GmresConfig,
) -> Result<GmresOutcome> {
    solve(a, m, b, x0, cfg, true)
}

/// TT-GMRES with rounding accuracy relaxed by the least-squares residual; stops on `η̃_b`.
pub fn relaxed_tt_gmres(a: &TTOperator, b: &TTVector, cfg: &GmresConfig) -> Result<GmresOutcome> {
    let mut cfg = cfg.clone();
    cfg.rounding_policy = RoundingPolicy::Relaxed;
    cfg.stopping_criterion = StoppingCriterion::EtaTildeB;
    solve(a, None, b, None, &cfg, false)
}
