use std::sync::Arc;

use lrsdc::operators::SourceFn;
use lrsdc::{CoefficientOperator, Factorization, LinearMatrixOde};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn rand_mat(rng: &mut ChaCha8Rng, r: usize, c: usize) -> DMatrix<f64> {
    DMatrix::from_fn(r, c, |_, _| rng.gen_range(-1.0..1.0))
}

/// Two-term problem whose first term is a shifted random matrix, so the
/// Kronecker operator has spectrum well inside the left half plane.
pub fn stable_ode(rng: &mut ChaCha8Rng, m1: usize, m2: usize) -> LinearMatrixOde<f64> {
    let a = rand_mat(rng, m1, m1) * (0.4 / (m1 as f64).sqrt()) - DMatrix::identity(m1, m1);
    let b = rand_mat(rng, m2, m2) * (0.2 / (m2 as f64).sqrt());
    let g = Factorization::from_dense(&(rand_mat(rng, m1, 1) * rand_mat(rng, 1, m2))).unwrap();
    let source: SourceFn<f64> = Arc::new(move |t: f64| g.scaled((2.0 * t).cos()));
    LinearMatrixOde::new(
        vec![
            (CoefficientOperator::dense(a).unwrap(), CoefficientOperator::identity(m2)),
            (
                CoefficientOperator::diagonal(DVector::from_fn(m1, |i, _| 0.05 * i as f64)).unwrap(),
                CoefficientOperator::dense(b).unwrap(),
            ),
        ],
        Some(source),
    )
    .unwrap()
}
