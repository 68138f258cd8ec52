use num_complex::Complex64;
use proptest::prelude::*;
use sketchcp::contraction::{approx_ivv_sym, approx_vvv_sym, ContractionWorkspace};
use sketchcp::hashing::{PolyHash, SignGenerator, SignMode};
use sketchcp::lda::project_simplex;
use sketchcp::rng::rng_from_seed;
use sketchcp::sketch::{circular_convolve, sketch_vector, AsymTensorSketchSet, SymTensorSketchSet};
use sketchcp::stats::{dot, median};
use sketchcp::tensor::{random_symmetric, DenseTensor3};

fn close(a: Complex64, b: Complex64, scale: f64) -> bool {
    (a - b).norm() <= 1e-9 * scale.max(1.0)
}

fn sym_tensor(n: usize, seed: u64) -> DenseTensor3 {
    random_symmetric(n, &mut rng_from_seed(seed))
}

fn vec_strategy(n: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-1.0f64..1.0, n)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn sym_sketch_is_linear(n in 2usize..7, sa in any::<u64>(), sb in any::<u64>(), seed in any::<u64>(), alpha in -3.0f64..3.0) {
        let (a, b) = (sym_tensor(n, sa), sym_tensor(n, sb));
        let mut combo = b.clone();
        combo.axpy(alpha, &a).unwrap();
        let sketch = |t: &DenseTensor3| {
            let mut s = SymTensorSketchSet::new(n, 32, 2, seed).unwrap();
            s.sketch_dense(t).unwrap();
            s
        };
        let (sa, sb, sc) = (sketch(&a), sketch(&b), sketch(&combo));
        for m in 0..2 {
            let (x, y, z) = (sa.replicate(m).data(), sb.replicate(m).data(), sc.replicate(m).data());
            for t in 0..32 {
                prop_assert!(close(z[t], x[t] * alpha + y[t], combo.frobenius()));
            }
        }
    }

    #[test]
    fn asym_sketch_is_linear(n in 2usize..6, sa in any::<u64>(), sb in any::<u64>(), seed in any::<u64>(), alpha in -3.0f64..3.0) {
        let mut rng = rng_from_seed(sa);
        let a = DenseTensor3::from_fn(n, |_, _, _| rand::Rng::random_range(&mut rng, -1.0..1.0));
        let b = sym_tensor(n, sb);
        let mut combo = b.clone();
        combo.axpy(alpha, &a).unwrap();
        let sketch = |t: &DenseTensor3| {
            let mut s = AsymTensorSketchSet::new(n, 16, 2, seed).unwrap();
            s.sketch_dense(t).unwrap();
            s
        };
        let (sa, sb, sc) = (sketch(&a), sketch(&b), sketch(&combo));
        for m in 0..2 {
            let (x, y, z) = (sa.replicate(m).data(), sb.replicate(m).data(), sc.replicate(m).data());
            for t in 0..16 {
                prop_assert!(close(z[t], x[t] * alpha + y[t], combo.frobenius()));
            }
        }
    }

    #[test]
    fn count_sketch_is_linear(u in vec_strategy(10), v in vec_strategy(10), alpha in -2.0f64..2.0, seed in any::<u64>()) {
        let h = PolyHash::new(2, 8, seed).unwrap();
        let s = SignGenerator::new(SignMode::Complex4, seed ^ 1).unwrap();
        let w: Vec<f64> = u.iter().zip(&v).map(|(a, b)| alpha * a + b).collect();
        let (su, sv, sw) = (sketch_vector(&u, &h, &s), sketch_vector(&v, &h, &s), sketch_vector(&w, &h, &s));
        for t in 0..8 {
            prop_assert!(close(sw.data[t], su.data[t] * alpha + sv.data[t], 1.0));
        }
    }

    #[test]
    fn convolution_matches_quadratic_sum(x in vec_strategy(16), y in vec_strategy(16)) {
        let cx: Vec<Complex64> = x.iter().map(|&r| Complex64::new(r, 0.5 * r)).collect();
        let cy: Vec<Complex64> = y.iter().map(|&r| Complex64::new(-r, r)).collect();
        let got = circular_convolve(&cx, &cy).unwrap();
        for t in 0..16 {
            let want: Complex64 = (0..16).map(|i| cx[i] * cy[(t + 16 - i) % 16]).sum();
            prop_assert!(close(got[t], want, 16.0));
        }
        let flipped = circular_convolve(&cy, &cx).unwrap();
        for t in 0..16 {
            prop_assert!(close(got[t], flipped[t], 16.0));
        }
    }

    #[test]
    fn median_is_order_free_and_bracketed(mut xs in prop::collection::vec(-1e6f64..1e6, 1..40), seed in any::<u64>()) {
        let m = median(&xs);
        let lo = xs.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        prop_assert!(lo <= m && m <= hi);
        let below = xs.iter().filter(|&&x| x < m).count();
        let above = xs.iter().filter(|&&x| x > m).count();
        prop_assert!(below <= xs.len() / 2 && above <= xs.len() / 2);
        rand::seq::SliceRandom::shuffle(xs.as_mut_slice(), &mut rng_from_seed(seed));
        prop_assert_eq!(median(&xs), m);
    }

    #[test]
    fn simplex_projection(v in prop::collection::vec(-5.0f64..5.0, 1..30)) {
        let p = project_simplex(&v);
        prop_assert!(p.iter().all(|&x| x >= 0.0));
        prop_assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        let again = project_simplex(&p);
        for (a, b) in p.iter().zip(&again) {
            prop_assert!((a - b).abs() < 1e-12);
        }
        let d = |q: &[f64]| q.iter().zip(&v).map(|(a, b)| (a - b).powi(2)).sum::<f64>();
        let uniform = vec![1.0 / v.len() as f64; v.len()];
        prop_assert!(d(&p) <= d(&uniform) + 1e-12);
    }

    #[test]
    fn asym_ivv_contracts_to_vvv(n in 3usize..10, ts in any::<u64>(), seed in any::<u64>(), u in vec_strategy(9)) {
        let u = &u[..n.min(9)];
        let n = u.len();
        let t = sym_tensor(n, ts);
        let mut set = AsymTensorSketchSet::new(n, 64, 3, seed).unwrap();
        set.sketch_dense(&t).unwrap();
        let ws = ContractionWorkspace::for_asym(&set);
        for m in 0..3 {
            let v = ws.replicate_mode_asym(&set, m, 0, u, u).unwrap();
            let s = ws.replicate_vvv_asym(&set, m, u).unwrap();
            prop_assert!((dot(&v, u) - s).abs() <= 1e-9 * t.frobenius().max(1.0));
        }
    }
}

#[test]
fn sym_ivv_and_vvv_are_consistent() {
    let (n, b) = (8, 1024);
    let tol = 5.0 / (b as f64).sqrt();
    let mut worst = 0.0f64;
    for seed in 0..20u64 {
        let mut t = sym_tensor(n, seed);
        t.scale(1.0 / t.frobenius());
        let mut set = SymTensorSketchSet::new(n, b, 30, seed + 100).unwrap();
        set.sketch_dense(&t).unwrap();
        let mut u: Vec<f64> = (0..n).map(|i| ((i as f64 + 1.0) * (seed as f64 + 0.5)).sin()).collect();
        let norm = dot(&u, &u).sqrt();
        u.iter_mut().for_each(|x| *x /= norm);
        let gap = (dot(&approx_ivv_sym(&set, &u).unwrap(), &u) - approx_vvv_sym(&set, &u).unwrap()).abs();
        worst = worst.max(gap);
    }
    assert!(worst <= 10.0 * tol, "worst gap {worst}");
}
