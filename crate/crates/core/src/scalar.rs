//! Scalar fields supported by the solvers.
//!
//! Every algorithm is generic over [`Scalar`], implemented for `f64` and
//! `Complex<f64>`. The real path never touches complex storage.

use nalgebra::{ComplexField, DMatrix};
use num_complex::Complex64;

/// Tag naming the scalar field of a problem.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ScalarField {
    Real,
    Complex,
}

impl ScalarField {
    pub fn tag(self) -> u8 {
        match self {
            ScalarField::Real => 0,
            ScalarField::Complex => 1,
        }
    }

    pub fn from_tag(tag: u8) -> Option<Self> {
        match tag {
            0 => Some(ScalarField::Real),
            1 => Some(ScalarField::Complex),
            _ => None,
        }
    }
}

pub trait Scalar: ComplexField<RealField = f64> + Copy + Send + Sync + 'static {
    const FIELD: ScalarField;

    /// Number of `f64` words per element in the on-disk representation.
    const WORDS: usize;

    fn re_im(self) -> (f64, f64);

    /// Builds a scalar from real and imaginary parts; the imaginary part is
    /// ignored for the real field.
    fn from_parts(re: f64, im: f64) -> Self;

    /// `a * x` for a real matrix `a`.
    fn mul_real_left(a: &DMatrix<f64>, x: &DMatrix<Self>) -> DMatrix<Self>;

    /// `x * a` for a real matrix `a`.
    fn mul_real_right(x: &DMatrix<Self>, a: &DMatrix<f64>) -> DMatrix<Self>;

    /// Thin SVD `m = u diag(s) vᴴ` in the order returned by the backend.
    fn thin_svd(m: &DMatrix<Self>) -> Option<(DMatrix<Self>, Vec<f64>, DMatrix<Self>)>;

    fn is_finite_scalar(self) -> bool {
        let (re, im) = self.re_im();
        re.is_finite() && im.is_finite()
    }
}

impl Scalar for f64 {
    const FIELD: ScalarField = ScalarField::Real;
    const WORDS: usize = 1;

    fn re_im(self) -> (f64, f64) {
        (self, 0.0)
    }

    fn from_parts(re: f64, _im: f64) -> Self {
        re
    }

    fn mul_real_left(a: &DMatrix<f64>, x: &DMatrix<f64>) -> DMatrix<f64> {
        a * x
    }

    fn mul_real_right(x: &DMatrix<f64>, a: &DMatrix<f64>) -> DMatrix<f64> {
        x * a
    }

    fn thin_svd(m: &DMatrix<f64>) -> Option<(DMatrix<f64>, Vec<f64>, DMatrix<f64>)> {
        faer_svd(m, |x| x)
    }
}

fn split(x: &DMatrix<Complex64>) -> (DMatrix<f64>, DMatrix<f64>) {
    (x.map(|z| z.re), x.map(|z| z.im))
}

fn join(re: DMatrix<f64>, im: &DMatrix<f64>) -> DMatrix<Complex64> {
    re.zip_map(im, Complex64::new)
}

impl Scalar for Complex64 {
    const FIELD: ScalarField = ScalarField::Complex;
    const WORDS: usize = 2;

    fn re_im(self) -> (f64, f64) {
        (self.re, self.im)
    }

    fn from_parts(re: f64, im: f64) -> Self {
        Complex64::new(re, im)
    }

    // Two real GEMMs are far faster than nalgebra's generic complex product.
    fn mul_real_left(a: &DMatrix<f64>, x: &DMatrix<Complex64>) -> DMatrix<Complex64> {
        let (re, im) = split(x);
        join(a * re, &(a * im))
    }

    fn mul_real_right(x: &DMatrix<Complex64>, a: &DMatrix<f64>) -> DMatrix<Complex64> {
        let (re, im) = split(x);
        join(re * a, &(im * a))
    }

    fn thin_svd(m: &DMatrix<Complex64>) -> Option<(DMatrix<Complex64>, Vec<f64>, DMatrix<Complex64>)> {
        faer_svd(m, |z| z.re)
    }
}

fn faer_svd<T>(m: &DMatrix<T>, real: impl Fn(T) -> f64) -> Option<(DMatrix<T>, Vec<f64>, DMatrix<T>)>
where
    T: faer::traits::ComplexField + Copy + nalgebra::Scalar,
{
    let a = faer::Mat::<T>::from_fn(m.nrows(), m.ncols(), |i, j| m[(i, j)]);
    let dec = a.thin_svd().ok()?;
    let (u, v) = (dec.U(), dec.V());
    let s = dec.S().column_vector().iter().map(|&x| real(x)).collect();
    Some((
        DMatrix::from_fn(u.nrows(), u.ncols(), |i, j| u[(i, j)]),
        s,
        DMatrix::from_fn(v.nrows(), v.ncols(), |i, j| v[(i, j)]),
    ))
}
