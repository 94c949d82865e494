use lrsdc::lowrank::{hard_error_sq, select_threshold, soft_error_sq, soft_shrink};
use lrsdc::{rounded_sum, truncate, Factorization, TruncationMode};
use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn orthonormal(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
    let m = DMatrix::from_fn(rows, cols, |_, _| rng.gen_range(-1.0..1.0));
    m.qr().q().columns(0, cols).into_owned()
}

fn orthonormal_c(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> DMatrix<Complex64> {
    let m = DMatrix::from_fn(rows, cols, |_, _| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)));
    m.qr().q().columns(0, cols).into_owned()
}

/// Singular values on a log scale, with occasional exact ties.
fn spectrum(rank: usize, ties: bool, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let palette: Vec<f64> = (0..3).map(|_| 10f64.powf(rng.gen_range(-3.0..1.0))).collect();
    let mut s: Vec<f64> = (0..rank)
        .map(|_| {
            if ties {
                palette[rng.gen_range(0..palette.len())]
            } else {
                10f64.powf(rng.gen_range(-4.0..1.0))
            }
        })
        .collect();
    s.sort_by(|a, b| b.total_cmp(a));
    s
}

fn tolerance(s: &[f64], rng: &mut ChaCha8Rng) -> f64 {
    let norm = s.iter().map(|x| x * x).sum::<f64>().sqrt();
    norm * 10f64.powf(rng.gen_range(-5.0..0.3))
}

fn mode_of(flag: bool) -> TruncationMode {
    if flag {
        TruncationMode::Soft
    } else {
        TruncationMode::Hard
    }
}

/// Largest β ∈ {0} ∪ {σ_i} whose hard-thresholding error stays within ε.
fn hard_oracle(s: &[f64], eps: f64) -> f64 {
    std::iter::once(0.0)
        .chain(s.iter().copied())
        .filter(|&b| hard_error_sq(s, b) <= eps * eps)
        .fold(0.0, f64::max)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn truncation_error_and_rank(
        seed in any::<u64>(),
        m1 in 1usize..24,
        m2 in 1usize..24,
        ties in any::<bool>(),
        soft in any::<bool>(),
        complex in any::<bool>(),
    ) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let rank = rng.gen_range(1..=m1.min(m2));
        let s = spectrum(rank, ties, &mut rng);
        let eps = tolerance(&s, &mut rng);
        let mode = mode_of(soft);
        if complex {
            let f = Factorization::new(orthonormal_c(m1, rank, &mut rng), s, orthonormal_c(m2, rank, &mut rng)).unwrap();
            let t = truncate(&f, eps, mode).unwrap();
            let err = (f.to_dense() - t.to_dense()).norm();
            prop_assert!(err <= eps * (1.0 + 1e-12) + 1e-14 * f.norm(), "err {err} eps {eps}");
            prop_assert!(t.rank() <= f.rank());
        } else {
            let f = Factorization::new(orthonormal(m1, rank, &mut rng), s, orthonormal(m2, rank, &mut rng)).unwrap();
            let t = truncate(&f, eps, mode).unwrap();
            let err = (f.to_dense() - t.to_dense()).norm();
            prop_assert!(err <= eps * (1.0 + 1e-12) + 1e-14 * f.norm(), "err {err} eps {eps}");
            prop_assert!(t.rank() <= f.rank());
        }
    }

    #[test]
    fn dense_input_truncation(seed in any::<u64>(), m1 in 1usize..30, m2 in 1usize..30, soft in any::<bool>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x = DMatrix::from_fn(m1, m2, |_, _| rng.gen_range(-1.0..1.0));
        let eps = x.norm() * 10f64.powf(rng.gen_range(-4.0..0.2));
        let t = lrsdc::lowrank::truncate_dense(&x, eps, mode_of(soft)).unwrap();
        let err = (&x - t.to_dense()).norm();
        prop_assert!(err <= eps * (1.0 + 1e-12) + 1e-12 * x.norm());
        prop_assert!(t.rank() <= m1.min(m2));
    }

    #[test]
    fn hard_threshold_matches_enumeration(seed in any::<u64>(), rank in 1usize..16, ties in any::<bool>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let s = spectrum(rank, ties, &mut rng);
        let eps = tolerance(&s, &mut rng);
        let alpha = select_threshold(&s, eps, TruncationMode::Hard);
        prop_assert_eq!(alpha, hard_oracle(&s, eps));
    }

    #[test]
    fn soft_threshold_solves_error_equation(seed in any::<u64>(), rank in 1usize..16, ties in any::<bool>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let s = spectrum(rank, ties, &mut rng);
        let total: f64 = s.iter().map(|x| x * x).sum();
        let eps = total.sqrt() * rng.gen_range(1e-4..0.999);
        prop_assume!(eps * eps < total);
        let alpha = select_threshold(&s, eps, TruncationMode::Soft);
        let gap = (soft_error_sq(&s, alpha) - eps * eps).abs();
        prop_assert!(gap <= 1e-10 * total.max(1.0), "gap {gap}");
    }

    #[test]
    fn soft_shrinkage_is_nonexpansive(
        seed in any::<u64>(),
        m1 in 1usize..16,
        m2 in 1usize..16,
        near in any::<bool>(),
    ) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x = DMatrix::from_fn(m1, m2, |_, _| rng.gen_range(-1.0..1.0));
        let spread = if near { 1e-3 } else { 1.0 };
        let y = &x + DMatrix::from_fn(m1, m2, |_, _| spread * rng.gen_range(-1.0..1.0));
        let alpha = rng.gen_range(0.0..2.0);
        let sx = soft_shrink(&Factorization::from_dense(&x).unwrap(), alpha).unwrap().to_dense();
        let sy = soft_shrink(&Factorization::from_dense(&y).unwrap(), alpha).unwrap().to_dense();
        prop_assert!((sx - sy).norm() <= (&x - &y).norm() * (1.0 + 1e-10) + 1e-12);
    }
}

fn random_terms(rng: &mut ChaCha8Rng, m1: usize, m2: usize) -> Vec<Factorization<f64>> {
    let count = rng.gen_range(1..=4);
    (0..count)
        .map(|_| {
            let r = rng.gen_range(1..=10usize.min(m1).min(m2));
            let s = spectrum(r, false, rng);
            let f = Factorization::new(orthonormal(m1, r, rng), s, orthonormal(m2, r, rng)).unwrap();
            if rng.gen_bool(0.5) {
                f.scaled(-1.0)
            } else {
                f
            }
        })
        .collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(500))]

    #[test]
    fn rounded_sum_matches_dense_sum(
        seed in any::<u64>(),
        m1 in 1usize..=200,
        m2 in 1usize..=200,
        soft in any::<bool>(),
    ) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let terms = random_terms(&mut rng, m1, m2);
        let dense = terms.iter().fold(DMatrix::zeros(m1, m2), |acc, f| acc + f.to_dense());
        let eps = dense.norm() * 10f64.powf(rng.gen_range(-8.0..-0.3));
        let r = rounded_sum(&terms, eps, mode_of(soft)).unwrap();
        let err = (&dense - r.to_dense()).norm();
        prop_assert!(err <= eps * (1.0 + 1e-10) + 1e-12 * dense.norm(), "err {err} eps {eps}");
        prop_assert!(r.rank() <= terms.iter().map(|t| t.rank()).sum::<usize>());
    }
}

#[test]
fn rounded_sum_complex_cancellation() {
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let u = orthonormal_c(40, 3, &mut rng);
    let v = orthonormal_c(30, 3, &mut rng);
    let f = Factorization::new(u, vec![3.0, 2.0, 1.0], v).unwrap();
    let g = f.scaled(Complex64::new(-1.0, 0.0));
    let r = rounded_sum(&[f.clone(), g], 1e-12, TruncationMode::Hard).unwrap();
    assert_eq!(r.rank(), 0);
    let doubled = rounded_sum(&[f.clone(), f.clone()], 1e-12, TruncationMode::Soft).unwrap();
    let expected = DVector::from_vec(vec![6.0, 4.0, 2.0]);
    assert!((DVector::from_vec(doubled.s().to_vec()) - expected).norm() < 1e-10);
}
