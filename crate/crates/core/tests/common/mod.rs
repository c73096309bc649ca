#![allow(dead_code)]

use ttkrylov_core::{Core3, Core4, Mat, TTOperator, TTVector};

/// Entry-by-entry contraction: product of the core slices X_1(i_1)…X_d(i_d).
pub fn brute_dense(x: &TTVector) -> Vec<f64> {
    let modes = x.modes();
    let total: usize = modes.iter().product();
    let mut out = Vec::with_capacity(total);
    for lin in 0..total {
        let idx = unravel(lin, &modes);
        let mut row = vec![1.0];
        for (c, &i) in x.cores().iter().zip(&idx) {
            let mut next = vec![0.0; c.r1];
            for a in 0..c.r0 {
                for b in 0..c.r1 {
                    next[b] += row[a] * c.at(a, i, b);
                }
            }
            row = next;
        }
        out.push(row[0]);
    }
    out
}

pub fn brute_dense_op(a: &TTOperator) -> Mat {
    let rm = a.row_modes();
    let cm = a.col_modes();
    let nr: usize = rm.iter().product();
    let nc: usize = cm.iter().product();
    let mut out = Mat::zeros(nr, nc);
    for r in 0..nr {
        let ri = unravel(r, &rm);
        for c in 0..nc {
            let ci = unravel(c, &cm);
            let mut row = vec![1.0];
            for (k, core) in a.cores().iter().enumerate() {
                let mut next = vec![0.0; core.r1];
                for p in 0..core.r0 {
                    for q in 0..core.r1 {
                        next[q] += row[p] * core.at(p, ri[k], ci[k], q);
                    }
                }
                row = next;
            }
            out.set(r, c, row[0]);
        }
    }
    out
}

pub fn unravel(mut lin: usize, modes: &[usize]) -> Vec<usize> {
    let mut idx = vec![0; modes.len()];
    for k in (0..modes.len()).rev() {
        idx[k] = lin % modes[k];
        lin /= modes[k];
    }
    idx
}

pub fn rel_err(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    let num: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt();
    let den: f64 = b.iter().map(|y| y * y).sum::<f64>().sqrt();
    if den == 0.0 {
        num
    } else {
        num / den
    }
}

pub fn norm(a: &[f64]) -> f64 {
    a.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Unit-norm random TT.
pub fn random_tt(modes: &[usize], ranks: &[usize], seed: u64) -> TTVector {
    ttkrylov_core::tt_random(modes, ranks, seed).unwrap()
}

pub fn random_op(rows: &[usize], cols: &[usize], ranks: &[usize], seed: u64) -> TTOperator {
    let fused: Vec<usize> = rows.iter().zip(cols).map(|(n, m)| n * m).collect();
    let v = ttkrylov_core::tt_random(&fused, ranks, seed).unwrap();
    let cores = v.cores().iter().zip(rows.iter().zip(cols)).map(|(c, (&n, &m))| Core4::new(c.r0, n, m, c.r1, c.data.clone())).collect();
    TTOperator::new(cores).unwrap()
}

pub fn core3(r0: usize, n: usize, r1: usize) -> Core3 {
    Core3::zeros(r0, n, r1)
}
