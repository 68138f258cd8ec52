use nalgebra::{DMatrix, DVector};

use super::*;
use crate::decompose::{robust_tpm_exact, PowerConfig};
use crate::error::Error;
use crate::tensor::DenseTensor3;

fn corpus(v: usize, docs: &[&[usize]]) -> Corpus {
    Corpus::new(v, docs.iter().map(|d| Document::from_tokens(d)).collect()).unwrap()
}

/// Brute-force `M3(W, W, W)` straight from the per-document case table,
/// materializing every `V x V x V` tensor.
fn brute_m3(c: &Corpus, w: &DMatrix<f64>, alpha0: f64) -> DenseTensor3 {
    let v = c.vocab_size();
    let mut e3 = DenseTensor3::zeros(v);
    let mut d3 = 0.0;
    let mut e2 = DMatrix::<f64>::zeros(v, v);
    let mut d2 = 0.0;
    let mut m1 = vec![0.0; v];
    let mut d1 = 0.0;
    for d in c.docs() {
        let mut n = vec![0.0; v];
        for &(i, x) in d.words() {
            n[i] = x as f64;
        }
        let m = d.len() as f64;
        if m >= 1.0 {
            d1 += 1.0;
            for i in 0..v {
                m1[i] += n[i] / m;
            }
        }
        if m >= 2.0 {
            d2 += 1.0;
            for i in 0..v {
                for j in 0..v {
                    let nn = if i == j { n[i] * (n[i] - 1.0) } else { n[i] * n[j] };
                    e2[(i, j)] += nn / (m * (m - 1.0));
                }
            }
        }
        if m >= 3.0 {
            d3 += 1.0;
            let den = m * (m - 1.0) * (m - 2.0);
            for i in 0..v {
                for j in 0..v {
                    for k in 0..v {
                        let val = if i == j && j == k {
                            n[i] * (n[i] - 1.0) * (n[i] - 2.0)
                        } else if i == j {
                            n[i] * (n[i] - 1.0) * n[k]
                        } else if j == k {
                            n[i] * n[j] * (n[j] - 1.0)
                        } else if i == k {
                            n[i] * (n[i] - 1.0) * n[j]
                        } else {
                            n[i] * n[j] * n[k]
                        };
                        let idx = e3.index(i, j, k);
                        let cur = e3.as_slice()[idx];
                        e3.set(i, j, k, cur + val / den);
                    }
                }
            }
        }
    }
    m1.iter_mut().for_each(|x| *x /= d1);
    e2 /= d2;
    let coef = -alpha0 / (alpha0 + 2.0);
    let cube = 2.0 * alpha0 * alpha0 / ((alpha0 + 1.0) * (alpha0 + 2.0));
    let full = DenseTensor3::from_fn(v, |i, j, k| {
        e3.get(i, j, k) / d3
            + coef * (e2[(i, j)] * m1[k] + e2[(i, k)] * m1[j] + e2[(j, k)] * m1[i])
            + cube * m1[i] * m1[j] * m1[k]
    });
    let kk = w.ncols();
    DenseTensor3::from_fn(kk, |a, b, cc| {
        let mut s = 0.0;
        for i in 0..v {
            for j in 0..v {
                for k in 0..v {
                    s += full.get(i, j, k) * w[(i, a)] * w[(j, b)] * w[(k, cc)];
                }
            }
        }
        s
    })
}

#[test]
fn m1_examples() {
    assert_eq!(compute_m1(&corpus(2, &[&[0, 0, 0]])).unwrap(), vec![1.0, 0.0]);
    let c = corpus(3, &[&[0, 1], &[1, 0], &[]]);
    assert_eq!(compute_m1(&c).unwrap(), vec![0.5, 0.5, 0.0]);
    assert!(compute_m1(&corpus(3, &[&[]])).is_err());
}

#[test]
fn m2_single_pair_document() {
    let c = corpus(3, &[&[0, 2]]);
    let e2 = pair_moment(&c).unwrap();
    assert_eq!(e2[(0, 2)], 0.5);
    assert_eq!(e2[(2, 0)], 0.5);
    assert_eq!(e2[(0, 0)], 0.0);
    let m2 = compute_m2(&c, 1.0).unwrap();
    assert!((m2[(0, 2)] - (0.5 - 0.5 * 0.25)).abs() < 1e-15);
    assert!((m2[(1, 1)]).abs() < 1e-15);
    assert_eq!(m2, m2.transpose());
    assert!(pair_moment(&corpus(3, &[&[1]])).is_err());
}

#[test]
fn whitening_examples() {
    let m2 = DMatrix::from_diagonal(&DVector::from_vec(vec![4.0, 1.0]));
    let w = whiten(&m2, 2).unwrap();
    assert!((w.matrix().column(0).norm() - 0.5).abs() < 1e-12);
    assert!((w.matrix().column(1).norm() - 1.0).abs() < 1e-12);
    assert!((w.matrix().transpose() * &m2 * w.matrix() - DMatrix::identity(2, 2)).norm() < 1e-12);
    let id = DMatrix::<f64>::identity(5, 5);
    let w = whiten(&id, 5).unwrap();
    assert!((w.matrix().transpose() * &id * w.matrix() - DMatrix::identity(5, 5)).norm() < 1e-12);
    let singular = DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, 0.0]));
    assert!(matches!(whiten(&singular, 2), Err(Error::RankDeficient { index: 1, .. })));
}

#[test]
fn factored_m3_matches_brute_force() {
    let c = corpus(4, &[&[0, 1, 1, 3], &[2, 2, 2], &[0, 3], &[1, 2, 3, 0, 0], &[3]]);
    let m2 = compute_m2(&c, 0.7).unwrap();
    let w = whiten(&m2, 2).unwrap();
    let got = whitened_m3_dense(&c, &w, 0.7).unwrap();
    let want = brute_m3(&c, w.matrix(), 0.7);
    for (a, b) in got.as_slice().iter().zip(want.as_slice()) {
        assert!((a - b).abs() < 1e-10 * (1.0 + b.abs()), "{a} vs {b}");
    }
}

#[test]
fn sketch_of_single_document() {
    let c = corpus(4, &[&[0, 1, 1]]);
    let w = WhiteningMap::from_parts(
        DMatrix::from_row_slice(4, 2, &[1.0, 0.5, -0.3, 1.0, 0.2, 0.2, 0.7, -1.0]),
        DMatrix::zeros(4, 2),
        vec![1.0, 1.0],
    );
    let want = brute_m3(&c, w.matrix(), 1.0);
    let mut set = SymTensorSketchSet::new(2, 4096, 9, 3).unwrap();
    sketch_whitened_m3(&c, &w, 1.0, &mut set).unwrap();
    for i in 0..2 {
        for j in 0..2 {
            for k in 0..2 {
                let e = set.recover_entry(i, j, k).unwrap();
                assert!((e - want.get(i, j, k)).abs() < 1e-6, "{e} vs {}", want.get(i, j, k));
            }
        }
    }
}

#[test]
fn empty_corpus_gives_zero_sketch() {
    let c = corpus(3, &[&[], &[]]);
    let w = WhiteningMap::from_parts(DMatrix::identity(3, 2), DMatrix::identity(3, 2), vec![1.0, 1.0]);
    let mut set = SymTensorSketchSet::new(2, 16, 2, 0).unwrap();
    let s = sketch_whitened_m3(&c, &w, 1.0, &mut set).unwrap();
    assert_eq!(s.docs_skipped, 2);
    assert_eq!(set.data_norm(), 0.0);
}

fn known_model() -> LdaModel {
    let (_, m) = generate_synthetic_corpus(20, 3, 1, &[0.3, 0.5, 0.9], 5, 17).unwrap();
    m
}

#[test]
fn population_moment_round_trip() {
    let m = known_model();
    let a0 = m.alpha0();
    let w = whiten(&m.population_m2(), 3).unwrap();
    let t = whitened_population_m3(&m, &w).unwrap();
    let cfg = PowerConfig { k: 3, ..Default::default() };
    let d = robust_tpm_exact(&t, &cfg).unwrap();
    let (raw, alpha) = recover_raw(&d, &w, a0).unwrap();
    let matches = match_topics(&raw, m.phi()).unwrap();
    for &(e, tr, l1) in &matches {
        assert!(l1 <= 1e-4, "topic {tr}: l1 {l1}");
        assert!((alpha[e] - m.alpha()[tr]).abs() <= 1e-3 * m.alpha()[tr]);
    }
}

#[test]
fn population_m2_matches_empirical() {
    let alpha = [0.2, 0.3, 0.5];
    let (c, m) = generate_synthetic_corpus(15, 3, 20_000, &alpha, 8, 2).unwrap();
    let diff = (compute_m2(&c, 1.0).unwrap() - m.population_m2()).norm();
    assert!(diff <= 0.02, "Frobenius gap {diff}");
    let m1 = compute_m1(&c).unwrap();
    let l1: f64 = m1.iter().zip(m.population_m1()).map(|(a, b)| (a - b).abs()).sum();
    assert!(l1 <= 0.03, "m1 gap {l1}");
}

#[test]
fn sketch_builds_agree() {
    let (c, _) = generate_synthetic_corpus(12, 3, 40, &[0.3; 3], 6, 8).unwrap();
    let w = whiten(&compute_m2(&c, 0.9).unwrap(), 3).unwrap();
    let mut a = SymTensorSketchSet::new(3, 64, 4, 5).unwrap();
    let mut b = a.clone();
    sketch_whitened_m3_with(&c, &w, 0.9, &mut a, M3Build::PerComponent).unwrap();
    sketch_whitened_m3_with(&c, &w, 0.9, &mut b, M3Build::Dense).unwrap();
    let scale = a.data_norm();
    for (ra, rb) in a.replicates().iter().zip(b.replicates()) {
        for (x, y) in ra.data().iter().zip(rb.data()) {
            assert!((x - y).norm() <= 1e-10 * scale);
        }
    }
}
