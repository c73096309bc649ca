mod common;

use common::*;
use ttkrylov_core::*;

#[test]
fn make_vector_shapes() {
    let x = make_tt_vector(vec![core3(1, 4, 3), core3(3, 4, 1)]).unwrap();
    assert_eq!(x.d(), 2);
    assert_eq!(x.ranks(), vec![1, 3, 1]);
    let err = make_tt_vector(vec![core3(1, 4, 3), core3(2, 4, 1)]).unwrap_err();
    assert!(matches!(err, TtError::RankMismatch { .. }));
    let err = make_tt_vector(vec![core3(2, 4, 1)]).unwrap_err();
    assert_eq!(err, TtError::BoundaryRank(2));
    let single = make_tt_vector(vec![core3(1, 5, 1)]).unwrap();
    assert_eq!(single.d(), 1);
    assert_eq!(make_tt_vector(vec![]).unwrap_err(), TtError::Empty);
}

#[test]
fn from_dense_separable_and_zero() {
    let u = [1.0, 2.0, 3.0];
    let v = [0.5, -1.0];
    let w = [2.0, 0.0, 1.0, 4.0];
    let mut data = Vec::new();
    for a in u {
        for b in v {
            for c in w {
                data.push(a * b * c);
            }
        }
    }
    let t = DenseTensor::new(vec![3, 2, 4], data.clone()).unwrap();
    let x = tt_from_dense(&t, 1e-14).unwrap();
    assert_eq!(x.ranks(), vec![1, 1, 1, 1]);
    assert!(rel_err(&brute_dense(&x), &data) < 1e-14);

    let z = DenseTensor::new(vec![3, 2, 4], vec![0.0; 24]).unwrap();
    let zx = tt_from_dense(&z, 0.3).unwrap();
    assert_eq!(zx.ranks(), vec![1, 1, 1, 1]);
    assert!(brute_dense(&zx).iter().all(|v| *v == 0.0));
}

#[test]
fn from_dense_random_round_trip() {
    let x = random_tt(&[5, 5, 5], &[1, 5, 5, 1], 3);
    let data = brute_dense(&x);
    let t = DenseTensor::new(vec![5, 5, 5], data.clone()).unwrap();
    let y = tt_from_dense(&t, 1e-12).unwrap();
    let back = tt_to_dense(&y, 1_000).unwrap();
    assert!(rel_err(&back.data, &data) < 1e-10);
}

#[test]
fn to_dense_matches_brute_force_and_budget() {
    let x = random_tt(&[3, 4, 2], &[1, 2, 3, 1], 7);
    let d = tt_to_dense(&x, 1_000).unwrap();
    assert!(rel_err(&d.data, &brute_dense(&x)) < 1e-14);
    let err = tt_to_dense(&x, 10).unwrap_err();
    assert_eq!(err, TtError::DenseBudget { entries: 24, budget: 10 });
    let one = TTVector::rank_one(&[vec![1.0, 2.0, 3.0]]).unwrap();
    assert_eq!(tt_to_dense(&one, 10).unwrap().data, vec![1.0, 2.0, 3.0]);
}

#[test]
fn add_ranks_and_cancellation() {
    let x = random_tt(&[3, 3, 3, 3], &[1, 3, 2, 2, 1], 1);
    let y = random_tt(&[3, 3, 3, 3], &[1, 2, 4, 1, 1], 2);
    let s = tt_add(&x, &y).unwrap();
    assert_eq!(s.ranks(), vec![1, 5, 6, 3, 1]);
    let a = random_tt(&[3, 3, 3], &[1, 3, 2, 1], 1);
    let b = random_tt(&[3, 3, 3], &[1, 2, 4, 1], 2);
    assert_eq!(tt_add(&a, &b).unwrap().ranks(), vec![1, 5, 6, 1]);
    let expect: Vec<f64> = brute_dense(&a).iter().zip(brute_dense(&b)).map(|(p, q)| p + q).collect();
    assert!(rel_err(&brute_dense(&tt_add(&a, &b).unwrap()), &expect) < 1e-13);
    let c = tt_add(&a, &tt_scale(&a, -1.0)).unwrap();
    assert_eq!(c.ranks(), vec![1, 6, 4, 1]);
    assert!(norm(&brute_dense(&c)) < 1e-14);
    assert!(tt_add(&a, &random_tt(&[3, 3, 2], &[1, 1, 1, 1], 0)).is_err());
}

#[test]
fn scale_cases() {
    let x = random_tt(&[3, 4], &[1, 2, 1], 5);
    assert_eq!(tt_scale(&x, 1.0), x);
    let z = tt_scale(&x, 0.0);
    assert_eq!(z.ranks(), x.ranks());
    assert!(brute_dense(&z).iter().all(|v| *v == 0.0));
    let two = tt_scale(&x, 2.0);
    let expect: Vec<f64> = brute_dense(&x).iter().map(|v| 2.0 * v).collect();
    assert!(rel_err(&brute_dense(&two), &expect) < 1e-15);
}

#[test]
fn inner_and_norm() {
    let x = random_tt(&[4, 3, 5], &[1, 2, 3, 1], 11);
    let y = random_tt(&[4, 3, 5], &[1, 3, 2, 1], 12);
    let dx = brute_dense(&x);
    let dy = brute_dense(&y);
    let dot: f64 = dx.iter().zip(&dy).map(|(a, b)| a * b).sum();
    assert!((tt_inner(&x, &y).unwrap() - dot).abs() <= 1e-12 * dot.abs().max(1e-300));
    assert!(tt_inner(&x, &x).unwrap() > 0.0);
    let u = TTVector::rank_one(&[vec![1.0, 0.0], vec![1.0, 2.0]]).unwrap();
    let v = TTVector::rank_one(&[vec![0.0, 3.0], vec![5.0, 1.0]]).unwrap();
    assert!(tt_inner(&u, &v).unwrap().abs() < 1e-13);
    assert_eq!(tt_norm(&TTVector::zeros(&[3, 3])), 0.0);
    let n = 7usize;
    assert!((tt_norm(&TTVector::ones(&[n, n, n])) - (n as f64).powf(1.5)).abs() < 1e-12);
    assert!((tt_norm(&x) - norm(&dx)).abs() < 1e-12 * norm(&dx));
}

#[test]
fn round_removes_doubling() {
    let x = random_tt(&[4, 4, 4, 4], &[1, 3, 4, 2, 1], 21);
    let z = tt_add(&x, &x).unwrap();
    assert_eq!(z.ranks(), vec![1, 6, 8, 4, 1]);
    let r = tt_round(&z, 1e-14);
    assert_eq!(r.ranks(), x.ranks());
    let expect: Vec<f64> = brute_dense(&x).iter().map(|v| 2.0 * v).collect();
    assert!(rel_err(&brute_dense(&r), &expect) < 1e-13);
}

#[test]
fn round_delta_zero_and_large_delta() {
    let x = random_tt(&[3, 3, 3], &[1, 3, 3, 1], 8);
    let r = tt_round(&x, 0.0);
    assert!(r.ranks().iter().zip(x.ranks()).all(|(a, b)| *a <= b));
    assert!(rel_err(&brute_dense(&r), &brute_dense(&x)) < 1e-14);

    let y = random_tt(&[6, 6, 6], &[1, 8, 8, 1], 9);
    let ry = tt_round(&y, 0.5);
    let dy = brute_dense(&y);
    let diff: Vec<f64> = brute_dense(&ry).iter().zip(&dy).map(|(a, b)| a - b).collect();
    assert!(norm(&diff) <= 0.5 * norm(&dy));
    assert!(ry.ranks().iter().zip(y.ranks()).all(|(a, b)| *a <= b));
}

#[test]
fn round_zero_tensor() {
    let x = random_tt(&[3, 4, 2], &[1, 2, 2, 1], 4);
    let z = tt_add(&x, &tt_scale(&x, 0.0)).unwrap();
    let zz = tt_round(&tt_scale(&z, 0.0), 1e-8);
    assert_eq!(zz.ranks(), vec![1, 1, 1, 1]);
    assert!(brute_dense(&zz).iter().all(|v| *v == 0.0));
}

#[test]
fn round_sum_matches_explicit_sum() {
    let modes = [5, 4, 6];
    let terms: Vec<TTVector> = (0..6).map(|s| random_tt(&modes, &[1, 1 + s % 3, 2 + s % 2, 1], 100 + s as u64)).collect();
    let coefs = [0.3, -1.2, 2.0, 0.7, -0.1, 1.5];
    let pairs: Vec<(f64, &TTVector)> = coefs.iter().copied().zip(terms.iter()).collect();
    let mut expect = vec![0.0; 120];
    for (c, t) in &pairs {
        for (e, v) in expect.iter_mut().zip(brute_dense(t)) {
            *e += c * v;
        }
    }
    let r = round_sum(&pairs, 1e-13);
    assert!(rel_err(&brute_dense(&r), &expect) < 1e-12);
    let lossless = round_sum(&pairs, 0.0);
    assert!(rel_err(&brute_dense(&lossless), &expect) < 1e-13);
    assert!((tt_sum_norm(&pairs) - norm(&expect)).abs() < 1e-13 * norm(&expect));
    let r = round_sum(&pairs, 1e-2);
    let diff: Vec<f64> = brute_dense(&r).iter().zip(&expect).map(|(a, b)| a - b).collect();
    assert!(norm(&diff) <= 1e-2 * norm(&expect));
}

#[test]
fn sum_norm_resolves_tiny_residuals() {
    // b − (b + 1e-12 e): inner-product norms lose this to cancellation
    let b = random_tt(&[8, 8, 8], &[1, 3, 3, 1], 31);
    let e = random_tt(&[8, 8, 8], &[1, 2, 2, 1], 32);
    let near = round_sum(&[(1.0, &b), (1e-12, &e)], 0.0);
    let r = tt_sum_norm(&[(1.0, &b), (-1.0, &near)]);
    assert!((r - 1e-12).abs() < 1e-15, "residual norm {r}");
}

#[test]
fn apply_ranks_identity_and_oracle() {
    let a = random_op(&[3, 3, 3], &[3, 3, 3], &[1, 2, 2, 1], 40);
    let x = random_tt(&[3, 3, 3], &[1, 3, 4, 1], 41);
    let y = tt_apply(&a, &x).unwrap();
    assert_eq!(y.ranks(), vec![1, 6, 8, 1]);
    let expect = brute_dense_op(&a).matvec(&brute_dense(&x));
    assert!(rel_err(&brute_dense(&y), &expect) < 1e-12);
    let id = TTOperator::identity(&[3, 3, 3]);
    assert!(rel_err(&brute_dense(&tt_apply(&id, &x).unwrap()), &brute_dense(&x)) < 1e-15);
    let rect = random_op(&[2, 4], &[3, 5], &[1, 2, 1], 42);
    let xr = random_tt(&[3, 5], &[1, 2, 1], 43);
    let yr = tt_apply(&rect, &xr).unwrap();
    assert_eq!(yr.modes(), vec![2, 4]);
    assert!(rel_err(&brute_dense(&yr), &brute_dense_op(&rect).matvec(&brute_dense(&xr))) < 1e-12);
    assert!(tt_apply(&rect, &x).is_err());
}

#[test]
fn compose_ranks_identity_and_oracle() {
    let a = random_op(&[4], &[4], &[1, 1], 50);
    let b = random_op(&[4], &[4], &[1, 1], 51);
    let a2 = random_op(&[3, 2], &[3, 2], &[1, 2, 1], 52);
    let b2 = random_op(&[3, 2], &[3, 2], &[1, 3, 1], 53);
    let c2 = tt_op_compose(&a2, &b2).unwrap();
    assert_eq!(c2.ranks(), vec![1, 6, 1]);
    let expect = brute_dense_op(&a2).matmul(&brute_dense_op(&b2));
    assert!(rel_err(&brute_dense_op(&c2).data, &expect.data) < 1e-12);
    let id = TTOperator::identity(&[3, 2]);
    assert!(rel_err(&brute_dense_op(&tt_op_compose(&a2, &id).unwrap()).data, &brute_dense_op(&a2).data) < 1e-15);
    let ab = tt_op_compose(&a, &b).unwrap();
    assert!(rel_err(&brute_dense_op(&ab).data, &brute_dense_op(&a).matmul(&brute_dense_op(&b)).data) < 1e-13);
}

#[test]
fn random_determinism_and_unit_norm() {
    let a = tt_random(&[4, 5, 3], &[1, 2, 3, 1], 9).unwrap();
    let b = tt_random(&[4, 5, 3], &[1, 2, 3, 1], 9).unwrap();
    assert_eq!(a, b);
    assert!((tt_norm(&a) - 1.0).abs() < 1e-12);
    let c = tt_random(&[4, 5, 3], &[1, 2, 3, 1], 10).unwrap();
    assert!(tt_sum_norm(&[(1.0, &a), (-1.0, &c)]) > 0.0);
    assert!(tt_random(&[4, 5], &[1, 2, 2, 1], 0).is_err());
}

#[test]
fn slices() {
    let x = random_tt(&[4, 3, 5], &[1, 3, 2, 1], 60);
    let dx = brute_dense(&x);
    let mut sum = 0.0;
    for l in 1..=4 {
        let s = tt_slice_first_mode(&x, l).unwrap();
        assert_eq!(s.modes(), vec![3, 5]);
        let ds = brute_dense(&s);
        assert!(rel_err(&ds, &dx[(l - 1) * 15..l * 15]) < 1e-14);
        sum += norm(&ds).powi(2);
    }
    assert!((sum - norm(&dx).powi(2)).abs() < 1e-11 * norm(&dx).powi(2));
    assert!(tt_slice_first_mode(&x, 0).is_err());
    assert!(tt_slice_first_mode(&x, 5).is_err());
    let m = random_tt(&[3, 4], &[1, 2, 1], 61);
    let dm = brute_dense(&m);
    assert!(rel_err(&brute_dense(&tt_slice_first_mode(&m, 2).unwrap()), &dm[4..8]) < 1e-14);
}

#[test]
fn storage_stats_cases() {
    let x = TTVector::ones(&[4, 4, 4]);
    let s = storage_stats(&x);
    assert_eq!((s.tt_entries, s.dense_entries), (12, 64));
    assert_eq!(s.compression_ratio, 0.1875);
    let y = random_tt(&[5, 6, 7], &[1, 3, 2, 1], 1);
    assert_eq!(storage_stats(&y).tt_entries, 65);
    let op = TTOperator::identity(&[3, 4]);
    let so = storage_stats(&op);
    assert_eq!((so.tt_entries, so.dense_entries), (25, 144));
}

#[test]
fn operator_round_via_fused_modes() {
    let a = random_op(&[3, 3, 3], &[3, 3, 3], &[1, 2, 2, 1], 70);
    let z = tt_add(&a, &a).unwrap();
    let r = tt_round(&z, 1e-14);
    assert_eq!(r.ranks(), a.ranks());
    assert!(rel_err(&brute_dense_op(&r).data, &brute_dense_op(&a).scaled(2.0).data) < 1e-13);
}

#[test]
fn dump_round_trip() {
    let x = random_tt(&[2, 3], &[1, 2, 1], 5);
    let text = dump::dump_vector(&x);
    assert_eq!(dump::parse_vector(&text).unwrap(), x);
    let a = random_op(&[2, 2], &[3, 1], &[1, 2, 1], 6);
    assert_eq!(dump::parse_operator(&dump::dump_operator(&a)).unwrap(), a);
}

fn svd_check(a: &Mat) {
    let (u, s, vt) = ttkrylov_core::dense::svd(a);
    let k = a.rows.min(a.cols);
    assert_eq!((u.rows, u.cols, s.len(), vt.rows, vt.cols), (a.rows, k, k, k, a.cols));
    assert!(s.windows(2).all(|w| w[0] >= w[1]));
    let us = Mat::from_rows(u.rows, k, (0..u.rows * k).map(|i| u.data[i] * s[i % k]).collect());
    let rec = us.matmul(&vt);
    assert!(rec.add(&a.scaled(-1.0)).frob() <= 1e-14 * a.frob().max(1e-300), "{}", rec.add(&a.scaled(-1.0)).frob() / a.frob());
    assert!(u.transpose().matmul(&u).add(&Mat::identity(k).scaled(-1.0)).frob() < 1e-13);
    assert!(vt.matmul(&vt.transpose()).add(&Mat::identity(k).scaled(-1.0)).frob() < 1e-13);
}

#[test]
fn dense_svd_reconstructs_graded_matrices() {
    // graded 4×4 on which a bidiagonal-QR SVD loses seven digits
    let hard = [
        -0.49678205898709493,
        0.017961298157871036,
        -0.014361955928911157,
        -9.040931468215908e-5,
        -0.7111024308698344,
        0.017299805819179826,
        0.007021881319843386,
        0.00032677166921939773,
        0.12853286632916963,
        0.01655829621236002,
        0.03264066423095659,
        -0.00032668911804842305,
        7.980247924625961,
        0.017582254562179756,
        -0.0071772814169711405,
        9.027577250133968e-5,
    ];
    svd_check(&Mat::from_rows(4, 4, hard.to_vec()));
    for seed in 0..20u64 {
        let (r, c) = (1 + (seed as usize * 7) % 9, 1 + (seed as usize * 5) % 11);
        let x = random_tt(&[r, c], &[1, r.min(c).min(3), 1], seed);
        let mut m = Mat::from_rows(r, c, brute_dense(&x));
        // grade the columns over many decades
        for i in 0..r {
            for j in 0..c {
                m.data[i * c + j] *= 10f64.powi(-(j as i32) * 2);
            }
        }
        svd_check(&m);
    }
    svd_check(&Mat::zeros(3, 2));
}
