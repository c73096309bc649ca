mod common;

use common::*;
use nalgebra::{DMatrix, DVector};
use ttkrylov_core::operators::*;
use ttkrylov_core::solver::*;
use ttkrylov_core::*;

const BUDGET: usize = 1 << 20;

fn dense_vec(x: &TTVector) -> Vec<f64> {
    tt_to_dense(x, BUDGET).unwrap().data
}

fn lsq_oracle(h: &DMatrix<f64>, beta: f64) -> (Vec<f64>, f64) {
    let mut rhs = DVector::zeros(h.nrows());
    rhs[0] = beta;
    let y = h.clone().svd(true, true).solve(&rhs, 1e-300).unwrap();
    let r = (&rhs - h * &y).norm();
    (y.iter().copied().collect(), r)
}

/// Textbook MGS-GMRES returning every iterate.
fn dense_gmres(a: &Mat, b: &[f64], steps: usize) -> Vec<Vec<f64>> {
    let n = b.len();
    let beta = norm(b);
    let mut v: Vec<Vec<f64>> = vec![b.iter().map(|x| x / beta).collect()];
    let mut h = DMatrix::<f64>::zeros(steps + 1, steps);
    let mut out = Vec::new();
    for k in 0..steps {
        let mut w = a.matvec(&v[k]);
        for i in 0..=k {
            let hik: f64 = w.iter().zip(&v[i]).map(|(x, y)| x * y).sum();
            h[(i, k)] = hik;
            for (wj, vj) in w.iter_mut().zip(&v[i]) {
                *wj -= hik * vj;
            }
        }
        let hn = norm(&w);
        h[(k + 1, k)] = hn;
        v.push(w.iter().map(|x| x / hn).collect());
        let (y, _) = lsq_oracle(&h.view((0, 0), (k + 2, k + 1)).into_owned(), beta);
        let mut x = vec![0.0; n];
        for (j, yj) in y.iter().enumerate() {
            for (xi, vi) in x.iter_mut().zip(&v[j]) {
                *xi += yj * vi;
            }
        }
        out.push(x);
    }
    out
}

fn small_system() -> (TTOperator, TTVector) {
    let g = Grid1D::new(8, 0.0, 1.0).unwrap();
    let lap = tt_neg_laplacian(2, &g).unwrap();
    let conv = TTOperator::kron(&[gradient_1d(&g).scaled(40.0), Mat::identity(8)]).unwrap();
    let a = tt_round(&tt_add(&lap, &conv).unwrap(), 1e-15);
    let b = tt_random(&[8, 8], &[1, 2, 1], 3).unwrap();
    (a, b)
}

#[test]
fn hessenberg_examples() {
    let (y, r) = hessenberg_lsq(&Mat::from_rows(2, 1, vec![2.0, 0.0]), 4.0).unwrap();
    assert_eq!(y, vec![2.0]);
    assert_eq!(r, 0.0);
    // normal equations: 2y = √2
    let (y, r) = hessenberg_lsq(&Mat::from_rows(2, 1, vec![1.0, 1.0]), 2f64.sqrt()).unwrap();
    assert!((y[0] - 0.5f64.sqrt()).abs() < 1e-15 && (r - 1.0).abs() < 1e-15);
    assert!(hessenberg_lsq(&Mat::from_rows(3, 1, vec![1.0, 0.0, 1.0]), 1.0).is_err());
    assert_eq!(hessenberg_lsq(&Mat::from_rows(2, 1, vec![0.0, 0.0]), 1.0).unwrap_err(), TtError::SingularFactor);
}

#[test]
fn hessenberg_random_against_svd() {
    for seed in 0..5u64 {
        let raw = tt_random(&[42], &[1, 1], seed).unwrap();
        let mut h = Mat::zeros(6, 5);
        let mut dh = DMatrix::<f64>::zeros(6, 5);
        for j in 0..5 {
            for i in 0..(j + 2) {
                let v = raw.cores()[0].data[i * 7 + j];
                h.set(i, j, v);
                dh[(i, j)] = v;
            }
        }
        let (y, r) = hessenberg_lsq(&h, 1.7).unwrap();
        let (yo, ro) = lsq_oracle(&dh, 1.7);
        assert!(rel_err(&y, &yo) < 1e-12, "seed {seed}");
        assert!((r - ro).abs() < 1e-12 * 1.7);
    }
}

#[test]
fn identity_converges_in_one_step() {
    let b = tt_random(&[4, 5, 3], &[1, 2, 2, 1], 1).unwrap();
    let a = TTOperator::identity(&[4, 5, 3]);
    let out = tt_gmres(&a, &b, &GmresConfig::new(5, 1e-10, 1e-12, 5)).unwrap();
    assert!(out.converged);
    assert_eq!(out.iterations, 1);
    assert_eq!(out.trace.len(), 1);
    assert!(out.breakdown);
    assert!(rel_err(&dense_vec(&out.solution), &dense_vec(&b)) < 1e-13);
}

#[test]
fn iterates_match_dense_gmres() {
    let (a, b) = small_system();
    let mut cfg = GmresConfig::new(12, 1e-15, 1e-14, 12);
    cfg.keep_iterates = true;
    let out = tt_gmres(&a, &b, &cfg).unwrap();
    let da = tt_op_to_dense(&a, BUDGET).unwrap();
    let reference = dense_gmres(&da, &dense_vec(&b), out.iterates.len());
    assert!(out.iterates.len() >= 10);
    for (k, (t, x)) in out.iterates.iter().zip(&reference).enumerate() {
        assert!(rel_err(&dense_vec(t), x) < 1e-9, "iteration {}", k + 1);
    }
}

#[test]
fn trace_quantities_against_dense() {
    let (a, b) = small_system();
    let mut cfg = GmresConfig::new(10, 1e-15, 1e-14, 10);
    cfg.keep_iterates = true;
    let out = tt_gmres(&a, &b, &cfg).unwrap();
    let da = tt_op_to_dense(&a, BUDGET).unwrap();
    let db = dense_vec(&b);
    let nb = norm(&db);
    let mut prev = f64::INFINITY;
    for (rec, t) in out.trace.iter().zip(&out.iterates) {
        let x = dense_vec(t);
        let ax = da.matvec(&x);
        let r: Vec<f64> = db.iter().zip(&ax).map(|(p, q)| p - q).collect();
        let rn = norm(&r);
        assert!((rec.true_residual - rn).abs() <= 1e-12 * nb);
        assert!((rec.eta_b - rn / nb).abs() <= 1e-12);
        let eab = rn / (out.estimated_opnorm * norm(&x) + nb);
        assert!((rec.eta_ab - eab).abs() <= 1e-12 * eab.max(1e-300) + 1e-15);
        assert_eq!(rec.eta_amb, rec.eta_ab);
        assert!(rec.eta_ab <= rec.eta_b);
        // tight rounding: least-squares and true residual agree
        assert!((rec.lsq_residual - rn).abs() <= 1e-9 * rn.max(1e-6 * nb));
        assert!(rec.lsq_residual <= prev * (1.0 + 1e-14));
        prev = rec.lsq_residual;
        assert!((rec.eta_tilde_b - rec.lsq_residual / nb).abs() < 1e-15);
        assert_eq!(rec.delta_used, 1e-14);
    }
}

#[test]
fn basis_stays_orthonormal() {
    let (a, b) = small_system();
    for delta in [1e-3, 1e-6, 1e-10] {
        let st = arnoldi(&a, &b, 12, delta).unwrap();
        let k = st.basis.len();
        for i in 0..k {
            assert!((tt_norm(&st.basis[i]) - 1.0).abs() <= 10.0 * delta.max(1e-14));
            for j in 0..i {
                let ip = tt_inner(&st.basis[i], &st.basis[j]).unwrap().abs();
                assert!(ip <= 100.0 * delta.max(1e-14), "δ={delta} ⟨v{i},v{j}⟩={ip}");
            }
        }
        let h = &st.hessenberg;
        for j in 0..h.cols {
            for i in j + 2..h.rows {
                assert_eq!(h.get(i, j), 0.0);
            }
        }
    }
}

#[test]
fn large_delta_exposes_residual_gap() {
    let (a, b) = small_system();
    let out = tt_gmres(&a, &b, &GmresConfig::new(40, 1e-15, 1e-2, 40)).unwrap();
    let last = out.trace.last().unwrap();
    assert!(last.true_residual.is_finite() && last.lsq_residual.is_finite());
    assert!(last.true_residual > 10.0 * last.lsq_residual);
}

#[test]
fn deterministic_traces() {
    let (a, b) = small_system();
    let cfg = GmresConfig::new(6, 1e-15, 1e-4, 6);
    let x = tt_gmres(&a, &b, &cfg).unwrap();
    let y = tt_gmres(&a, &b, &cfg).unwrap();
    assert_eq!(x.trace, y.trace);
    assert_eq!(x.solution, y.solution);
}

#[test]
fn restarted_with_identity_preconditioner() {
    let (a, b) = small_system();
    let mut cfg = GmresConfig::new(10, 1e-9, 1e-12, 200);
    cfg.stopping_criterion = StoppingCriterion::EtaB;
    let plain = tt_right_gmres(&a, None, &b, None, &cfg).unwrap();
    let id = TTOperator::identity(&[8, 8]);
    let prec = tt_right_gmres(&a, Some(&id), &b, None, &cfg).unwrap();
    assert!(plain.converged && prec.converged);
    assert_eq!(plain.iterations, prec.iterations);
    assert!(plain.iterations > 10);
    for (p, q) in plain.trace.iter().zip(&prec.trace) {
        assert!((p.eta_b - q.eta_b).abs() <= 1e-8 * p.eta_b + 1e-13);
    }
    assert!(rel_err(&dense_vec(&plain.solution), &dense_vec(&prec.solution)) < 1e-8);
    // the solution is unpreconditioned: its residual is the traced one
    let da = tt_op_to_dense(&a, BUDGET).unwrap();
    let r: Vec<f64> = dense_vec(&b).iter().zip(da.matvec(&dense_vec(&prec.solution))).map(|(p, q)| p - q).collect();
    assert!(norm(&r) / tt_norm(&b) < 1e-9 * 1.01);
}

#[test]
fn right_preconditioning_and_warm_start() {
    let g = Grid1D::new(15, 0.0, 1.0).unwrap();
    let p = poisson_problem(&g).unwrap();
    let m = inv_laplacian_preconditioner(3, &g, 16, 1e-8).unwrap();
    let cfg = GmresConfig::new(10, 1e-8, 1e-9, 20);
    let out = tt_right_gmres(&p.operator, Some(&m), &p.rhs, None, &cfg).unwrap();
    assert!(out.converged);
    assert!(out.iterations <= 4, "{}", out.iterations);
    let last = out.trace.last().unwrap();
    assert!(last.eta_amb < 1e-8);
    assert!(out.estimated_prec_opnorm.unwrap() <= 1.0 + 1e-6);
    // warm start from the converged solution converges immediately
    let again = tt_right_gmres(&p.operator, Some(&m), &p.rhs, Some(&out.solution), &cfg).unwrap();
    assert!(again.converged && again.iterations <= 1);
    // the returned solution carries one more rounding at δ
    let ax = tt_apply(&p.operator, &out.solution).unwrap();
    let res = tt_sum_norm(&[(1.0, &p.rhs), (-1.0, &ax)]);
    let eta = res / (out.estimated_opnorm * tt_norm(&out.solution) + tt_norm(&p.rhs));
    assert!(eta <= 10.0 * (cfg.epsilon + cfg.delta), "{eta}");
}

#[test]
fn stagnation_guard() {
    // a singular system: the residual cannot drop below its component in the null space
    let a = TTOperator::kron(&[Mat::diag(&[1.0, 2.0, 0.0])]).unwrap();
    let b = TTVector::rank_one(&[vec![1.0, 1.0, 1.0]]).unwrap();
    let out = tt_right_gmres(&a, None, &b, None, &GmresConfig::new(1, 1e-10, 0.0, 50)).unwrap();
    assert!(!out.converged);
    assert!(out.stagnated);
    assert!(out.iterations < 50);
}

#[test]
fn relaxed_schedule() {
    let (a, b) = small_system();
    let out = relaxed_tt_gmres(&a, &b, &GmresConfig::new(12, 1e-12, 1e-6, 12)).unwrap();
    assert_eq!(out.trace[0].delta_used, 1e-6);
    for w in out.trace.windows(2) {
        let expect = (1e-6 / w[0].eta_tilde_b.max(f64::EPSILON)).min(1.0);
        assert_eq!(w[1].delta_used, expect);
    }
    if out.converged {
        assert!(out.trace.last().unwrap().eta_tilde_b < 1e-12);
    }
}

#[test]
fn config_validation() {
    let (a, b) = small_system();
    assert!(tt_gmres(&a, &b, &GmresConfig::new(0, 1e-5, 1e-5, 10)).is_err());
    assert!(tt_gmres(&a, &b, &GmresConfig::new(10, 0.0, 1e-5, 10)).is_err());
    assert!(tt_gmres(&a, &b, &GmresConfig::new(10, 1e-5, -1.0, 10)).is_err());
    assert!(tt_gmres(&a, &b, &GmresConfig::new(10, 1e-5, 1e-5, 5)).is_err());
    let zero = TTVector::zeros(&[8, 8]);
    assert_eq!(tt_gmres(&a, &zero, &GmresConfig::new(5, 1e-5, 1e-5, 5)).unwrap_err(), TtError::ZeroRhs);
    let wrong = tt_random(&[8, 7], &[1, 1, 1], 0).unwrap();
    assert!(tt_gmres(&a, &wrong, &GmresConfig::new(5, 1e-5, 1e-5, 5)).is_err());
}

#[test]
fn assemble_every_skips_true_residual() {
    let (a, b) = small_system();
    let mut cfg = GmresConfig::new(9, 1e-15, 1e-10, 9);
    cfg.assemble_every = 3;
    let out = tt_gmres(&a, &b, &cfg).unwrap();
    for rec in &out.trace {
        assert_eq!(rec.true_residual.is_nan(), rec.iter % 3 != 0);
    }
}

#[test]
fn norm_estimates() {
    let id = TTOperator::identity(&[5, 6, 4]);
    let e = estimate_l2_norm(&id, 10, 7).unwrap();
    assert!(e >= 0.99 && e <= 1.0 + 1e-12);
    let scaled = tt_scale(&id, -3.5);
    assert!((estimate_l2_norm(&scaled, 10, 7).unwrap() - 3.5).abs() < 1e-12);
    assert_eq!(estimate_l2_norm(&scaled, 10, 7).unwrap(), estimate_l2_norm(&scaled, 10, 7).unwrap());
    let (a, _) = small_system();
    let da = tt_op_to_dense(&a, BUDGET).unwrap();
    let (s, _) = ttkrylov_core::dense::sym_eig(&da.transpose().matmul(&da));
    let exact = s.iter().cloned().fold(0.0, f64::max).sqrt();
    let est = estimate_l2_norm(&a, 10, 0).unwrap();
    assert!(est <= exact * (1.0 + 1e-12) && est > 0.3 * exact);
}

#[test]
fn single_eigenvector_one_iteration() {
    let g = Grid1D::new(15, 0.0, 1.0).unwrap();
    let a = tt_neg_laplacian(3, &g).unwrap();
    let b = laplacian_eigen_rhs(&g, &[vec![2, 3, 1]]).unwrap();
    let out = tt_gmres(&a, &b, &GmresConfig::new(5, 1e-12, 1e-14, 5)).unwrap();
    assert!(out.converged);
    assert_eq!(out.iterations, 1);
}
