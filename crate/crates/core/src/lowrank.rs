//! SVD-form low-rank matrices, singular-value thresholding and rounding of
//! sums of factored matrices.

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};

use crate::dense::{qr_column_pivoted, svd, Svd};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Singular values at or below this fraction of the natural scale of a
/// computation are rounding noise and are discarded when forming factors.
pub const NUMERICAL_ZERO: f64 = 1e-14;

/// Shrinkage applied to singular values when truncating.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum TruncationMode {
    /// Drop singular values at or below the threshold; keep the rest.
    Hard,
    /// Subtract the threshold from every singular value, dropping those that
    /// reach zero.
    Soft,
}

impl TruncationMode {
    /// Single-letter label used in scheme names (`SDC-mBUG-3-H`).
    pub fn letter(self) -> char {
        match self {
            TruncationMode::Hard => 'H',
            TruncationMode::Soft => 'S',
        }
    }
}

impl fmt::Display for TruncationMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            TruncationMode::Hard => "hard",
            TruncationMode::Soft => "soft",
        })
    }
}

impl FromStr for TruncationMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "hard" | "h" => Ok(TruncationMode::Hard),
            "soft" | "s" => Ok(TruncationMode::Soft),
            other => Err(Error::InvalidParameter(format!(
                "unknown truncation mode `{other}` (expected hard or soft)"
            ))),
        }
    }
}

/// `X = U diag(S) Vᴴ` with orthonormal `U`, `V` and nonincreasing `S ≥ 0`.
///
/// A rank-0 factorization keeps its `(m1, m2)` shape through empty factors.
#[derive(Debug, Clone)]
pub struct Factorization<T: Scalar> {
    u: DMatrix<T>,
    s: Vec<f64>,
    v: DMatrix<T>,
}

const ORTHONORMALITY_TOL: f64 = 1e-10;

impl<T: Scalar> Factorization<T> {
    /// Validating constructor.
    pub fn new(u: DMatrix<T>, s: Vec<f64>, v: DMatrix<T>) -> Result<Self> {
        let r = s.len();
        if u.ncols() != r || v.ncols() != r {
            return Err(Error::InvalidInput(format!(
                "factor widths {} and {} do not match {r} singular values",
                u.ncols(),
                v.ncols()
            )));
        }
        if r > u.nrows().min(v.nrows()) {
            return Err(Error::InvalidInput(format!(
                "rank {r} exceeds min({}, {})",
                u.nrows(),
                v.nrows()
            )));
        }
        if s.iter().any(|x| !x.is_finite() || *x < 0.0) {
            return Err(Error::InvalidInput("singular values must be finite and nonnegative".into()));
        }
        if s.windows(2).any(|w| w[0] < w[1]) {
            return Err(Error::InvalidInput("singular values must be nonincreasing".into()));
        }
        for (name, f) in [("U", &u), ("V", &v)] {
            let defect = (f.ad_mul(f) - DMatrix::<T>::identity(r, r)).norm();
            if defect > ORTHONORMALITY_TOL {
                return Err(Error::InvalidInput(format!(
                    "{name} is not orthonormal (defect {defect:.2e})"
                )));
            }
        }
        Ok(Self { u, s, v })
    }

    pub(crate) fn from_parts_unchecked(u: DMatrix<T>, s: Vec<f64>, v: DMatrix<T>) -> Self {
        debug_assert_eq!(u.ncols(), s.len());
        debug_assert_eq!(v.ncols(), s.len());
        Self { u, s, v }
    }

    pub fn zero(m1: usize, m2: usize) -> Self {
        Self {
            u: DMatrix::zeros(m1, 0),
            s: Vec::new(),
            v: DMatrix::zeros(m2, 0),
        }
    }

    /// The outer product `x yᵀ` (plain transpose, no conjugation).
    pub fn outer(x: &DVector<T>, y: &DVector<T>) -> Self {
        let (nx, ny) = (x.norm(), y.norm());
        if nx == 0.0 || ny == 0.0 {
            return Self::zero(x.len(), y.len());
        }
        let u = DMatrix::from_column_slice(x.len(), 1, (x / T::from_real(nx)).as_slice());
        let v = DMatrix::from_column_slice(y.len(), 1, (y.conjugate() / T::from_real(ny)).as_slice());
        Self { u, s: vec![nx * ny], v }
    }

    /// Factorization of a dense matrix; singular values at or below
    /// `NUMERICAL_ZERO · σ₁` are dropped.
    pub fn from_dense(m: &DMatrix<T>) -> Result<Self> {
        let dec = svd(m)?;
        let floor = NUMERICAL_ZERO * dec.s.first().copied().unwrap_or(0.0);
        Ok(Self::from_svd(dec, floor))
    }

    /// Keeps the singular triplets with `σ > floor`.
    pub(crate) fn from_svd(dec: Svd<T>, floor: f64) -> Self {
        let keep = dec.s.iter().take_while(|&&x| x > floor).count();
        Self {
            u: dec.u.columns(0, keep).into_owned(),
            s: dec.s[..keep].to_vec(),
            v: dec.v.columns(0, keep).into_owned(),
        }
    }

    pub fn u(&self) -> &DMatrix<T> {
        &self.u
    }

    pub fn s(&self) -> &[f64] {
        &self.s
    }

    pub fn v(&self) -> &DMatrix<T> {
        &self.v
    }

    pub fn rank(&self) -> usize {
        self.s.len()
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.u.nrows(), self.v.nrows())
    }

    /// Frobenius norm.
    pub fn norm(&self) -> f64 {
        self.s.iter().map(|x| x * x).sum::<f64>().sqrt()
    }

    /// `U diag(S)`.
    pub fn us(&self) -> DMatrix<T> {
        scale_columns(&self.u, &self.s)
    }

    /// `V diag(S)`.
    pub fn vs(&self) -> DMatrix<T> {
        scale_columns(&self.v, &self.s)
    }

    pub fn to_dense(&self) -> DMatrix<T> {
        self.us() * self.v.adjoint()
    }

    /// `c · X`; the phase of `c` is folded into `U` so that `S` stays nonnegative.
    pub fn scaled(&self, c: T) -> Self {
        let modulus = c.modulus();
        if modulus == 0.0 {
            let (m1, m2) = self.shape();
            return Self::zero(m1, m2);
        }
        let phase = c.scale(1.0 / modulus);
        Self {
            u: &self.u * phase,
            s: self.s.iter().map(|x| x * modulus).collect(),
            v: self.v.clone(),
        }
    }

    /// `Xᴴ`.
    pub fn adjoint(&self) -> Self {
        Self {
            u: self.v.clone(),
            s: self.s.clone(),
            v: self.u.clone(),
        }
    }

    pub fn truncated(&self, eps: f64, mode: TruncationMode) -> Result<Self> {
        truncate(self, eps, mode)
    }

    fn keep_leading(&self, keep: usize, s: Vec<f64>) -> Self {
        Self {
            u: self.u.columns(0, keep).into_owned(),
            s,
            v: self.v.columns(0, keep).into_owned(),
        }
    }
}

pub(crate) fn scale_columns<T: Scalar>(m: &DMatrix<T>, s: &[f64]) -> DMatrix<T> {
    let mut out = m.clone();
    for (j, &x) in s.iter().enumerate() {
        out.column_mut(j).scale_mut(x);
    }
    out
}

fn check_threshold(alpha: f64) -> Result<()> {
    if alpha.is_nan() || alpha < 0.0 {
        Err(Error::InvalidParameter(format!("threshold must be nonnegative, got {alpha}")))
    } else {
        Ok(())
    }
}

/// Hard thresholding: drops every singular value `σ ≤ alpha`.
pub fn hard_shrink<T: Scalar>(f: &Factorization<T>, alpha: f64) -> Result<Factorization<T>> {
    check_threshold(alpha)?;
    let keep = f.s.iter().take_while(|&&x| x > alpha).count();
    Ok(f.keep_leading(keep, f.s[..keep].to_vec()))
}

/// Soft thresholding: `σ ↦ max(σ − alpha, 0)`, zeros removed.
pub fn soft_shrink<T: Scalar>(f: &Factorization<T>, alpha: f64) -> Result<Factorization<T>> {
    check_threshold(alpha)?;
    let keep = f.s.iter().take_while(|&&x| x > alpha).count();
    let s = f.s[..keep].iter().map(|x| x - alpha).collect();
    Ok(f.keep_leading(keep, s))
}

/// Squared error of hard thresholding at `beta`: `Σ_{σ ≤ β} σ²`.
pub fn hard_error_sq(s: &[f64], beta: f64) -> f64 {
    s.iter().filter(|&&x| x <= beta).map(|x| x * x).sum()
}

/// Squared error of soft thresholding at `beta`:
/// `Σ_{σ ≤ β} σ² + β² · #{σ > β}`.
pub fn soft_error_sq(s: &[f64], beta: f64) -> f64 {
    s.iter().map(|&x| if x <= beta { x * x } else { beta * beta }).sum()
}

/// Largest threshold whose shrinkage error stays within `eps`.
///
/// `s` must be sorted nonincreasing. For [`TruncationMode::Hard`] the
/// threshold is `0` or one of the singular values; for
/// [`TruncationMode::Soft`] the piecewise-quadratic error equation is solved
/// in closed form on the bracketing interval.
pub fn select_threshold(s: &[f64], eps: f64, mode: TruncationMode) -> f64 {
    if !(eps > 0.0) || s.is_empty() {
        return 0.0;
    }
    let budget = eps * eps;
    let n = s.len();
    match mode {
        TruncationMode::Hard => {
            // Walk breakpoints from the smallest singular value upward; a
            // run of equal values is admitted or rejected as a whole.
            let mut tail = 0.0;
            let mut alpha = 0.0;
            let mut i = n;
            while i > 0 {
                let value = s[i - 1];
                let mut j = i;
                while j > 0 && s[j - 1] == value {
                    tail += value * value;
                    j -= 1;
                }
                if tail > budget {
                    break;
                }
                alpha = value;
                i = j;
            }
            alpha
        }
        TruncationMode::Soft => {
            let total: f64 = s.iter().map(|x| x * x).sum();
            if total <= budget {
                return s[0];
            }
            // On [σ_(i), σ_(i-1)) (ascending), tail = Σ of the i smallest
            // squares and k = n − i values exceed β.
            let mut tail = 0.0;
            let mut lower = 0.0;
            for i in 0..n {
                let upper = s[n - 1 - i];
                let k = (n - i) as f64;
                let beta = ((budget - tail) / k).sqrt();
                if beta < upper {
                    return beta.max(lower);
                }
                tail += upper * upper;
                lower = upper;
            }
            s[0]
        }
    }
}

/// Thresholded factorization with `‖F − truncate(F)‖ ≤ eps`.
pub fn truncate<T: Scalar>(f: &Factorization<T>, eps: f64, mode: TruncationMode) -> Result<Factorization<T>> {
    if eps.is_nan() || eps < 0.0 {
        return Err(Error::InvalidParameter(format!("tolerance must be nonnegative, got {eps}")));
    }
    let alpha = select_threshold(&f.s, eps, mode);
    match mode {
        TruncationMode::Hard => hard_shrink(f, alpha),
        TruncationMode::Soft => soft_shrink(f, alpha),
    }
}

/// SVD of a small dense core followed by thresholding.
pub fn truncate_dense<T: Scalar>(m: &DMatrix<T>, eps: f64, mode: TruncationMode) -> Result<Factorization<T>> {
    truncate(&Factorization::from_dense(m)?, eps, mode)
}

/// A term `u diag(s) vᴴ` with arbitrary (not necessarily orthonormal)
/// factors and real weights of either sign.
#[derive(Debug, Clone)]
pub struct LowRankTerm<T: Scalar> {
    pub u: DMatrix<T>,
    pub s: Vec<f64>,
    pub v: DMatrix<T>,
}

impl<T: Scalar> LowRankTerm<T> {
    pub fn weighted(f: &Factorization<T>, weight: f64) -> Self {
        Self {
            u: f.u.clone(),
            s: f.s.iter().map(|x| x * weight).collect(),
            v: f.v.clone(),
        }
    }

    fn magnitude(&self) -> f64 {
        (0..self.s.len())
            .map(|j| self.s[j].abs() * self.u.column(j).norm() * self.v.column(j).norm())
            .fold(0.0, f64::max)
    }
}

impl<T: Scalar> From<&Factorization<T>> for LowRankTerm<T> {
    fn from(f: &Factorization<T>) -> Self {
        Self::weighted(f, 1.0)
    }
}

/// Rounds a sum of factored terms: concatenate factors, pivoted QR on both
/// sides, truncate the small core `R₁P₁ᵀ Ŝ P₂R₂ᴴ`, multiply back.
pub fn round_terms<T: Scalar>(
    terms: &[LowRankTerm<T>],
    shape: (usize, usize),
    eps: f64,
    mode: TruncationMode,
) -> Result<Factorization<T>> {
    let (m1, m2) = shape;
    for t in terms {
        if t.u.nrows() != m1 || t.v.nrows() != m2 || t.u.ncols() != t.s.len() || t.v.ncols() != t.s.len() {
            return Err(Error::InvalidInput(format!(
                "term of shape ({}, {}) with widths ({}, {}, {}) in a sum of shape ({m1}, {m2})",
                t.u.nrows(),
                t.v.nrows(),
                t.u.ncols(),
                t.s.len(),
                t.v.ncols()
            )));
        }
    }
    let width: usize = terms.iter().map(|t| t.s.len()).sum();
    let scale = terms.iter().map(LowRankTerm::magnitude).fold(0.0, f64::max);
    if width == 0 || scale == 0.0 {
        return Ok(Factorization::zero(m1, m2));
    }

    let mut uhat = DMatrix::<T>::zeros(m1, width);
    let mut vhat = DMatrix::<T>::zeros(m2, width);
    let mut shat = Vec::with_capacity(width);
    let mut col = 0;
    for t in terms {
        let w = t.s.len();
        uhat.columns_mut(col, w).copy_from(&t.u);
        vhat.columns_mut(col, w).copy_from(&t.v);
        shat.extend_from_slice(&t.s);
        col += w;
    }

    let qr_u = qr_column_pivoted(&uhat)?;
    let qr_v = qr_column_pivoted(&vhat)?;
    if qr_u.rank() == 0 || qr_v.rank() == 0 {
        return Ok(Factorization::zero(m1, m2));
    }
    let mut left = qr_u.r_unpermuted();
    for (j, &x) in shat.iter().enumerate() {
        left.column_mut(j).scale_mut(x);
    }
    let core = left * qr_v.r_unpermuted().adjoint();
    let small = Factorization::from_svd(svd(&core)?, NUMERICAL_ZERO * scale);
    let small = truncate(&small, eps, mode)?;
    Ok(Factorization {
        u: &qr_u.q * small.u,
        s: small.s,
        v: &qr_v.q * small.v,
    })
}

/// Rounded sum of factorizations, `‖Σ terms − result‖ ≤ eps`.
pub fn rounded_sum<T: Scalar>(terms: &[Factorization<T>], eps: f64, mode: TruncationMode) -> Result<Factorization<T>> {
    let first = terms
        .first()
        .ok_or_else(|| Error::InvalidInput("rounded_sum of an empty list".into()))?;
    let shape = first.shape();
    if let Some(bad) = terms.iter().find(|t| t.shape() != shape) {
        return Err(Error::InvalidInput(format!(
            "shape mismatch in rounded_sum: {:?} vs {:?}",
            bad.shape(),
            shape
        )));
    }
    let raw: Vec<LowRankTerm<T>> = terms.iter().map(LowRankTerm::from).collect();
    round_terms(&raw, shape, eps, mode)
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_complex::Complex64;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn diag_factorization(s: &[f64]) -> Factorization<f64> {
        let n = s.len();
        Factorization::new(DMatrix::identity(n, n), s.to_vec(), DMatrix::identity(n, n)).unwrap()
    }

    fn random_factorization(rng: &mut ChaCha8Rng, m1: usize, m2: usize, r: usize) -> Factorization<f64> {
        let a = DMatrix::from_fn(m1, r, |_, _| rng.gen_range(-1.0..1.0));
        let b = DMatrix::from_fn(m2, r, |_, _| rng.gen_range(-1.0..1.0));
        Factorization::from_dense(&(a * b.transpose())).unwrap()
    }

    #[test]
    fn hard_shrink_examples() {
        let f = diag_factorization(&[3.0, 2.0, 1.0]);
        assert_eq!(hard_shrink(&f, 1.5).unwrap().s(), &[3.0, 2.0]);
        assert_eq!(hard_shrink(&f, 0.0).unwrap().s(), &[3.0, 2.0, 1.0]);
        assert_eq!(hard_shrink(&f, 5.0).unwrap().rank(), 0);
        assert_eq!(hard_shrink(&f, 2.0).unwrap().s(), &[3.0]);
        assert!(matches!(hard_shrink(&f, -1.0), Err(Error::InvalidParameter(_))));
    }

    #[test]
    fn soft_shrink_examples() {
        let f = diag_factorization(&[3.0, 2.0, 1.0]);
        assert_eq!(soft_shrink(&f, 1.5).unwrap().s(), &[1.5, 0.5]);
        assert_eq!(soft_shrink(&f, 0.0).unwrap().s(), &[3.0, 2.0, 1.0]);
        assert!(matches!(soft_shrink(&f, f64::NAN), Err(Error::InvalidParameter(_))));
    }

    #[test]
    fn threshold_examples() {
        let s = [3.0, 2.0, 1.0];
        let eps = 5f64.sqrt();
        assert_eq!(select_threshold(&s, eps, TruncationMode::Hard), 2.0);
        let soft = select_threshold(&s, eps, TruncationMode::Soft);
        assert!((soft - 2f64.sqrt()).abs() < 1e-14);
        let kept = truncate(&diag_factorization(&s), eps, TruncationMode::Soft).unwrap();
        assert!((kept.s()[0] - (3.0 - 2f64.sqrt())).abs() < 1e-14);
        assert!((kept.s()[1] - (2.0 - 2f64.sqrt())).abs() < 1e-14);
        assert_eq!(select_threshold(&s, 0.0, TruncationMode::Hard), 0.0);
        assert_eq!(select_threshold(&s, 0.0, TruncationMode::Soft), 0.0);
    }

    #[test]
    fn truncate_small_values() {
        let f = diag_factorization(&[1e-3, 1e-6, 1e-9]);
        let t = truncate(&f, 1e-5, TruncationMode::Hard).unwrap();
        assert_eq!(t.s(), &[1e-3]);
        let err = (f.to_dense() - t.to_dense()).norm();
        assert!((err - (1e-12f64 + 1e-18).sqrt()).abs() < 1e-18);
    }

    #[test]
    fn truncate_beyond_norm() {
        let f = diag_factorization(&[3.0, 2.0, 1.0]);
        assert_eq!(truncate(&f, 10.0, TruncationMode::Hard).unwrap().rank(), 0);
        let soft = truncate(&f, 10.0, TruncationMode::Soft).unwrap();
        assert!((f.to_dense() - soft.to_dense()).norm() <= 10.0);
    }

    #[test]
    fn truncate_large_random() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let f = random_factorization(&mut rng, 200, 200, 10);
        let dense = f.to_dense();
        for mode in [TruncationMode::Hard, TruncationMode::Soft] {
            for eps in [1e-3, 1.0, 10.0] {
                let t = truncate(&f, eps, mode).unwrap();
                assert!(t.rank() <= f.rank());
                assert!((&dense - t.to_dense()).norm() <= eps + 1e-12 * dense.norm());
            }
        }
    }

    #[test]
    fn hard_ties_drop_together() {
        let s = [3.0, 1.0, 1.0];
        assert_eq!(select_threshold(&s, 1.2, TruncationMode::Hard), 0.0);
        assert_eq!(select_threshold(&s, 1.5, TruncationMode::Hard), 1.0);
    }

    #[test]
    fn rounded_sum_single_term_exact() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let f = random_factorization(&mut rng, 30, 20, 4);
        let r = rounded_sum(std::slice::from_ref(&f), 0.0, TruncationMode::Hard).unwrap();
        assert_eq!(r.rank(), 4);
        assert!((r.to_dense() - f.to_dense()).norm() <= 1e-12 * f.norm());
        for (a, b) in r.s().iter().zip(f.s()) {
            assert!((a - b).abs() < 1e-12 * f.norm());
        }
    }

    #[test]
    fn rounded_sum_cancellation() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let f = random_factorization(&mut rng, 25, 15, 3);
        for mode in [TruncationMode::Hard, TruncationMode::Soft] {
            let r = rounded_sum(&[f.clone(), f.scaled(-1.0)], 0.0, mode).unwrap();
            assert_eq!(r.rank(), 0);
            assert_eq!(r.shape(), (25, 15));
        }
    }

    #[test]
    fn rounded_sum_three_terms() {
        let mut rng = ChaCha8Rng::seed_from_u64(14);
        let terms: Vec<_> = (0..3).map(|_| random_factorization(&mut rng, 100, 80, 3)).collect();
        let dense: DMatrix<f64> = terms.iter().map(Factorization::to_dense).fold(DMatrix::zeros(100, 80), |a, b| a + b);
        for mode in [TruncationMode::Hard, TruncationMode::Soft] {
            let r = rounded_sum(&terms, 1e-8, mode).unwrap();
            assert!((&dense - r.to_dense()).norm() <= 1e-8);
        }
    }

    #[test]
    fn rounded_sum_shape_mismatch() {
        let a = Factorization::<f64>::zero(3, 4);
        let b = Factorization::<f64>::zero(4, 3);
        assert!(matches!(rounded_sum(&[a, b], 0.0, TruncationMode::Hard), Err(Error::InvalidInput(_))));
        assert!(matches!(rounded_sum::<f64>(&[], 0.0, TruncationMode::Hard), Err(Error::InvalidInput(_))));
    }

    #[test]
    fn complex_scaling_and_outer() {
        let x = DVector::from_vec(vec![Complex64::new(1.0, 1.0), Complex64::new(0.0, 2.0)]);
        let y = DVector::from_vec(vec![Complex64::new(3.0, 0.0), Complex64::new(1.0, -1.0), Complex64::new(0.5, 0.0)]);
        let f = Factorization::outer(&x, &y);
        let expected = &x * y.transpose();
        assert!((f.to_dense() - &expected).norm() < 1e-14);
        let c = Complex64::new(0.0, -2.0);
        assert!((f.scaled(c).to_dense() - expected * c).norm() < 1e-13);
        assert!((f.adjoint().to_dense() - f.to_dense().adjoint()).norm() < 1e-14);
    }

    #[test]
    fn constructor_validates() {
        let u = DMatrix::<f64>::identity(3, 2);
        assert!(Factorization::new(u.clone(), vec![1.0, 2.0], u.clone()).is_err());
        assert!(Factorization::new(u.clone(), vec![2.0, -1.0], u.clone()).is_err());
        assert!(Factorization::new(u.clone() * 2.0, vec![2.0, 1.0], u.clone()).is_err());
        assert!(Factorization::new(u.clone(), vec![2.0, 1.0], u).is_ok());
    }

    #[test]
    fn mode_parsing() {
        assert_eq!("Hard".parse::<TruncationMode>().unwrap(), TruncationMode::Hard);
        assert_eq!("s".parse::<TruncationMode>().unwrap(), TruncationMode::Soft);
        assert!("medium".parse::<TruncationMode>().is_err());
    }
}
