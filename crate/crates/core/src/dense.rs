//! Dense kernels: column-pivoted QR, SVD and small linear solves.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Dense matrix over a scalar field, stored column-major.
pub type DenseMatrix<T> = DMatrix<T>;

/// A column whose remaining norm is at most this fraction of the first
/// pivot's norm is treated as numerically dependent by [`qr_column_pivoted`].
pub const QR_RANK_CUTOFF: f64 = 1e-14;

/// Relative residual accepted by [`solve_dense`].
pub const SOLVE_RTOL: f64 = 1e-10;

pub fn ensure_finite<T: Scalar>(m: &DMatrix<T>, what: &str) -> Result<()> {
    if m.iter().all(|z| z.is_finite_scalar()) {
        Ok(())
    } else {
        Err(Error::InvalidInput(format!("{what} has non-finite entries")))
    }
}

/// Frobenius inner product, conjugate-linear in the first argument.
pub fn inner<T: Scalar>(a: &DMatrix<T>, b: &DMatrix<T>) -> T {
    a.dotc(b)
}

/// Result of [`qr_column_pivoted`]: `m.select_columns(&perm) ≈ q * r`.
#[derive(Debug, Clone)]
pub struct PivotedQr<T: Scalar> {
    /// `rows × k` with orthonormal columns, `k` the numerical rank.
    pub q: DMatrix<T>,
    /// `k × cols`, upper triangular with real nonnegative nonincreasing diagonal.
    pub r: DMatrix<T>,
    /// Column permutation: column `j` of `m * P` is column `perm[j]` of `m`.
    pub perm: Vec<usize>,
}

impl<T: Scalar> PivotedQr<T> {
    pub fn rank(&self) -> usize {
        self.q.ncols()
    }

    /// `R Pᵀ`, so that `m ≈ q * r_unpermuted()`.
    pub fn r_unpermuted(&self) -> DMatrix<T> {
        let mut out = DMatrix::zeros(self.r.nrows(), self.r.ncols());
        for (j, &p) in self.perm.iter().enumerate() {
            out.set_column(p, &self.r.column(j));
        }
        out
    }
}

/// Householder QR with column pivoting. Elimination stops once the largest
/// remaining column norm falls to `QR_RANK_CUTOFF` times the first pivot.
pub fn qr_column_pivoted<T: Scalar>(m: &DMatrix<T>) -> Result<PivotedQr<T>> {
    let (rows, cols) = m.shape();
    if cols == 0 {
        return Err(Error::InvalidInput("QR of a matrix with no columns".into()));
    }
    ensure_finite(m, "QR input")?;

    let mut a = m.clone();
    let mut perm: Vec<usize> = (0..cols).collect();
    let mut reflectors: Vec<DVector<T>> = Vec::new();
    let mut first_pivot = 0.0;

    for j in 0..rows.min(cols) {
        let mut pivot = j;
        let mut pivot_norm = -1.0;
        for c in j..cols {
            let n = a.view((j, c), (rows - j, 1)).norm();
            if n > pivot_norm {
                pivot = c;
                pivot_norm = n;
            }
        }
        if j == 0 {
            first_pivot = pivot_norm;
        }
        if pivot_norm == 0.0 || pivot_norm <= QR_RANK_CUTOFF * first_pivot {
            break;
        }
        a.swap_columns(j, pivot);
        perm.swap(j, pivot);

        let mut v: DVector<T> = a.view((j, j), (rows - j, 1)).column(0).into_owned();
        let head = v[0];
        let phase = if head.modulus() == 0.0 {
            T::one()
        } else {
            head.scale(1.0 / head.modulus())
        };
        v[0] += phase.scale(pivot_norm);
        let scale = 2.0 / v.norm_squared();

        let mut sub = a.view_mut((j, j), (rows - j, cols - j));
        let w = sub.ad_mul(&v);
        sub.gerc(T::from_real(-scale), &v, &w, T::one());
        reflectors.push(v);
    }

    let rank = reflectors.len();
    let mut r = DMatrix::zeros(rank, cols);
    for i in 0..rank {
        for c in i..cols {
            r[(i, c)] = a[(i, c)];
        }
    }

    let mut q = DMatrix::<T>::identity(rows, rank);
    for (j, v) in reflectors.iter().enumerate().rev() {
        let scale = 2.0 / v.norm_squared();
        let mut sub = q.view_mut((j, 0), (rows - j, rank));
        let w = sub.ad_mul(v);
        sub.gerc(T::from_real(-scale), v, &w, T::one());
    }

    for j in 0..rank {
        let d = r[(j, j)];
        let modulus = d.modulus();
        if modulus > 0.0 {
            let phase = d.scale(1.0 / modulus);
            for c in 0..cols {
                r[(j, c)] *= phase.conjugate();
            }
            for i in 0..rows {
                q[(i, j)] *= phase;
            }
        }
    }

    Ok(PivotedQr { q, r, perm })
}

/// Thin SVD `m = u diag(s) vᴴ` with `s` sorted nonincreasing.
#[derive(Debug, Clone)]
pub struct Svd<T: Scalar> {
    pub u: DMatrix<T>,
    pub s: Vec<f64>,
    pub v: DMatrix<T>,
}

pub fn svd<T: Scalar>(m: &DMatrix<T>) -> Result<Svd<T>> {
    ensure_finite(m, "SVD input")?;
    let (rows, cols) = m.shape();
    if rows == 0 || cols == 0 {
        return Ok(Svd {
            u: DMatrix::zeros(rows, 0),
            s: Vec::new(),
            v: DMatrix::zeros(cols, 0),
        });
    }
    let (u, sv, v) = T::thin_svd(m).ok_or_else(|| Error::InvalidInput("SVD did not converge".into()))?;
    let mut order: Vec<usize> = (0..sv.len()).collect();
    order.sort_by(|&a, &b| sv[b].total_cmp(&sv[a]));

    let s = order.iter().map(|&i| sv[i]).collect();
    let u = u.select_columns(&order);
    let v = v.select_columns(&order);
    Ok(Svd { u, s, v })
}

/// Solves `a x = b` by partial-pivoting LU with up to two refinement sweeps.
pub fn solve_dense<T: Scalar>(a: &DMatrix<T>, b: &DMatrix<T>) -> Result<DMatrix<T>> {
    let n = a.nrows();
    if a.ncols() != n {
        return Err(Error::InvalidInput(format!(
            "solve_dense needs a square matrix, got {}×{}",
            n,
            a.ncols()
        )));
    }
    if b.nrows() != n {
        return Err(Error::InvalidInput(format!(
            "right-hand side has {} rows, expected {n}",
            b.nrows()
        )));
    }
    ensure_finite(a, "system matrix")?;
    ensure_finite(b, "right-hand side")?;
    if n == 0 {
        return Ok(b.clone());
    }

    let lu = a.clone().lu();
    let pivots = lu.u().diagonal();
    let max = pivots.iter().map(|p| p.modulus()).fold(0.0, f64::max);
    let min = pivots.iter().map(|p| p.modulus()).fold(f64::INFINITY, f64::min);
    let condition = if min > 0.0 { max / min } else { f64::INFINITY };
    if min <= (n as f64) * f64::EPSILON * max {
        return Err(Error::Singular { condition });
    }

    let mut x = lu.solve(b).ok_or(Error::Singular { condition })?;
    let target = SOLVE_RTOL * b.norm();
    for _ in 0..2 {
        let residual = b - a * &x;
        if residual.norm() <= target {
            return Ok(x);
        }
        x += lu.solve(&residual).ok_or(Error::Singular { condition })?;
    }
    if (b - a * &x).norm() <= target {
        Ok(x)
    } else {
        Err(Error::Singular { condition })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_complex::Complex64;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random(rows: usize, cols: usize, seed: u64) -> DMatrix<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        DMatrix::from_fn(rows, cols, |_, _| rng.gen_range(-1.0..1.0))
    }

    #[test]
    fn svd_rank_one_energy() {
        let m = DMatrix::from_fn(6, 5, |i, j| ((i + 1) * (j + 2)) as f64);
        let d = svd(&m).unwrap();
        assert!((d.s[0] - m.norm()).abs() <= 1e-12 * m.norm());
        assert!(d.s[1..].iter().all(|&x| x <= 1e-12 * m.norm()));
        let rec = &d.u * DMatrix::from_diagonal(&DVector::from_vec(d.s.clone())) * d.v.adjoint();
        assert!((rec - &m).norm() <= 1e-12 * m.norm());
    }

    #[test]
    fn svd_resolves_graded_matrix() {
        let m = DMatrix::from_row_slice(
            4,
            3,
            &[
                -4.0973248793818584e-8, -1.08515827335589e-15, -4.89368542827807e-16,
                -1.8438250911891147e-15, 1.6641886545306779, -2.353518268896573,
                -2.4156479174790357e-15, -2.30824156731677e-1, 3.264346673026999e-1,
                -7.033126302978614e-16, -5.203846033419386e-14, 7.33089097810411e-14,
            ],
        );
        let d = svd(&m).unwrap();
        assert!((d.s[1] - 4.097324879381869e-8).abs() < 1e-20);
        let rec = &d.u * DMatrix::from_diagonal(&DVector::from_vec(d.s.clone())) * d.v.adjoint();
        assert!((rec - &m).norm() <= 1e-14 * m.norm());
    }

    #[test]
    fn svd_energy_matches_frobenius() {
        for (seed, (r, c)) in [(7, 3), (3, 9), (12, 12)].into_iter().enumerate() {
            let low = random(r, 2, seed as u64) * random(2, c, seed as u64 + 50);
            for m in [random(r, c, seed as u64 + 100), low] {
                let d = svd(&m).unwrap();
                let e: f64 = d.s.iter().map(|x| x * x).sum();
                assert!((e - m.norm_squared()).abs() <= 1e-12 * m.norm_squared());
            }
        }
    }

    fn random_c(rows: usize, cols: usize, seed: u64) -> DMatrix<Complex64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        DMatrix::from_fn(rows, cols, |_, _| {
            Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
        })
    }

    fn orthonormality_defect<T: Scalar>(q: &DMatrix<T>) -> f64 {
        (q.ad_mul(q) - DMatrix::<T>::identity(q.ncols(), q.ncols())).norm()
    }

    #[test]
    fn qr_identity() {
        let qr = qr_column_pivoted(&DMatrix::<f64>::identity(3, 3)).unwrap();
        assert_eq!(qr.perm, vec![0, 1, 2]);
        assert!((qr.q - DMatrix::identity(3, 3)).norm() < 1e-15);
        assert!((qr.r - DMatrix::identity(3, 3)).norm() < 1e-15);
    }

    #[test]
    fn qr_rank_deficient() {
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 0.0, 0.0]);
        let qr = qr_column_pivoted(&m).unwrap();
        assert!(qr.rank() >= 1 && qr.rank() <= 2);
        assert!((&qr.q * qr.r_unpermuted() - &m).norm() <= 1e-12);
    }

    #[test]
    fn qr_random_real_and_complex() {
        let m = random(10, 4, 1);
        let qr = qr_column_pivoted(&m).unwrap();
        assert_eq!(qr.rank(), 4);
        assert!(orthonormality_defect(&qr.q) <= 1e-12);
        assert!((&qr.q * qr.r_unpermuted() - &m).norm() <= 1e-12);
        let diag: Vec<f64> = (0..4).map(|i| qr.r[(i, i)]).collect();
        assert!(diag.windows(2).all(|w| w[0] >= w[1]));

        let mc = random_c(7, 9, 2);
        let qr = qr_column_pivoted(&mc).unwrap();
        assert_eq!(qr.rank(), 7);
        assert!(orthonormality_defect(&qr.q) <= 1e-12);
        assert!((&qr.q * qr.r_unpermuted() - &mc).norm() <= 1e-12);
    }

    #[test]
    fn qr_large_orthonormality() {
        let m = random(500, 500, 3);
        let qr = qr_column_pivoted(&m).unwrap();
        assert!(orthonormality_defect(&qr.q) <= 1e-12);
    }

    #[test]
    fn qr_rejects_nan() {
        let mut m = DMatrix::<f64>::identity(2, 2);
        m[(0, 1)] = f64::NAN;
        assert!(matches!(qr_column_pivoted(&m), Err(Error::InvalidInput(_))));
    }

    #[test]
    fn qr_drops_dependent_columns() {
        let a = random(6, 2, 4);
        let m = DMatrix::from_columns(&[a.column(0), a.column(1), (a.column(0) * 3.0 - a.column(1)).as_view()]);
        let qr = qr_column_pivoted(&m).unwrap();
        assert_eq!(qr.rank(), 2);
        assert!((&qr.q * qr.r_unpermuted() - &m).norm() <= 1e-12);
    }

    #[test]
    fn svd_diagonal() {
        let m = DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, 3.0, 2.0]));
        let d = svd(&m).unwrap();
        assert_eq!(d.s, vec![3.0, 2.0, 1.0]);
        let rec = &d.u * DMatrix::from_diagonal(&DVector::from_vec(d.s.clone())) * d.v.adjoint();
        assert!((rec - m).norm() < 1e-14);
    }

    #[test]
    fn svd_zero_matrix() {
        let d = svd(&DMatrix::<f64>::zeros(3, 2)).unwrap();
        assert!(d.s.iter().all(|&s| s == 0.0));
    }

    #[test]
    fn svd_reconstruction_and_transpose() {
        let m = random(8, 5, 5);
        let d = svd(&m).unwrap();
        let rec = &d.u * DMatrix::from_diagonal(&DVector::from_vec(d.s.clone())) * d.v.adjoint();
        assert!((rec - &m).norm() / m.norm() <= 1e-13);
        assert!(orthonormality_defect(&d.u) <= 1e-12 && orthonormality_defect(&d.v) <= 1e-12);
        let dt = svd(&m.transpose()).unwrap();
        for (a, b) in d.s.iter().zip(&dt.s) {
            assert!((a - b).abs() <= 1e-12 * d.s[0]);
        }

        let mc = random_c(6, 9, 6);
        let d = svd(&mc).unwrap();
        let s = DMatrix::from_diagonal(&DVector::from_vec(d.s.iter().map(|&x| Complex64::new(x, 0.0)).collect()));
        assert!((&d.u * s * d.v.adjoint() - &mc).norm() / mc.norm() <= 1e-13);
        let dh = svd(&mc.adjoint()).unwrap();
        for (a, b) in d.s.iter().zip(&dh.s) {
            assert!((a - b).abs() <= 1e-12 * d.s[0]);
        }
    }

    #[test]
    fn solve_identity_and_scaled() {
        let b = random(4, 3, 7);
        let x = solve_dense(&DMatrix::identity(4, 4), &b).unwrap();
        assert!((x - &b).norm() < 1e-15);
        let x = solve_dense(&(DMatrix::<f64>::identity(4, 4) * 2.0), &DMatrix::identity(4, 4)).unwrap();
        assert!((x - DMatrix::<f64>::identity(4, 4) * 0.5).norm() < 1e-15);
    }

    #[test]
    fn solve_random_residual() {
        let a = random(20, 20, 8) + DMatrix::<f64>::identity(20, 20) * 5.0;
        let b = random(20, 2, 9);
        let x = solve_dense(&a, &b).unwrap();
        assert!((&a * x - &b).norm() <= 1e-10 * b.norm());
    }

    #[test]
    fn solve_singular() {
        let a = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 4.0]);
        let err = solve_dense(&a, &DMatrix::identity(2, 2)).unwrap_err();
        assert!(matches!(err, Error::Singular { .. }));
    }

    #[test]
    fn inner_is_conjugate_linear() {
        let a = random_c(3, 3, 10);
        let ip = inner(&a, &a);
        assert!(ip.im.abs() < 1e-14 && ip.re >= 0.0);
        assert!((ip.re - a.norm_squared()).abs() < 1e-12);
    }
}
