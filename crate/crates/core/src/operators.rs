//! The linear matrix ODE `dX/dt = Σ_j A_j X B_jᵀ + G(t)`.

use std::fmt;
use std::sync::{Arc, OnceLock};

use nalgebra::{DMatrix, DVector};

use crate::dense::ensure_finite;
use crate::error::{Error, Result};
use crate::lowrank::{round_terms, Factorization, LowRankTerm, TruncationMode};
use crate::scalar::Scalar;

#[derive(Clone)]
enum Repr<T: Scalar> {
    Identity,
    Diagonal(DVector<T>),
    Dense(DMatrix<T>),
    /// `coef · M` for a real matrix `M`; products against complex blocks run
    /// as two real GEMMs.
    ScaledReal {
        coef: T,
        matrix: Arc<DMatrix<f64>>,
        transposed: Arc<DMatrix<f64>>,
    },
}

/// A square coefficient matrix acting on blocks of column vectors.
#[derive(Clone)]
pub struct CoefficientOperator<T: Scalar> {
    dim: usize,
    repr: Repr<T>,
}

impl<T: Scalar> fmt::Debug for CoefficientOperator<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let kind = match self.repr {
            Repr::Identity => "identity",
            Repr::Diagonal(_) => "diagonal",
            Repr::Dense(_) => "dense",
            Repr::ScaledReal { .. } => "scaled-real",
        };
        write!(f, "CoefficientOperator({kind}, {})", self.dim)
    }
}

impl<T: Scalar> CoefficientOperator<T> {
    pub fn identity(dim: usize) -> Self {
        Self { dim, repr: Repr::Identity }
    }

    pub fn diagonal(d: DVector<T>) -> Result<Self> {
        if d.iter().any(|z| !z.is_finite_scalar()) {
            return Err(Error::InvalidInput("diagonal operator has non-finite entries".into()));
        }
        Ok(Self {
            dim: d.len(),
            repr: Repr::Diagonal(d),
        })
    }

    pub fn dense(m: DMatrix<T>) -> Result<Self> {
        if !m.is_square() {
            return Err(Error::InvalidInput(format!("operator must be square, got {:?}", m.shape())));
        }
        ensure_finite(&m, "operator")?;
        Ok(Self {
            dim: m.nrows(),
            repr: Repr::Dense(m),
        })
    }

    /// `coef · m` for a real square matrix `m`.
    pub fn scaled_real(coef: T, m: DMatrix<f64>) -> Result<Self> {
        if !m.is_square() {
            return Err(Error::InvalidInput(format!("operator must be square, got {:?}", m.shape())));
        }
        ensure_finite(&m, "operator")?;
        let transposed = Arc::new(m.transpose());
        Ok(Self {
            dim: m.nrows(),
            repr: Repr::ScaledReal {
                coef,
                matrix: Arc::new(m),
                transposed,
            },
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    fn check_rows(&self, rows: usize) -> Result<()> {
        if rows == self.dim {
            Ok(())
        } else {
            Err(Error::InvalidInput(format!(
                "operator of dimension {} applied to a block with {rows} rows",
                self.dim
            )))
        }
    }

    /// `A x`.
    pub fn apply(&self, x: &DMatrix<T>) -> Result<DMatrix<T>> {
        self.check_rows(x.nrows())?;
        Ok(match &self.repr {
            Repr::Identity => x.clone(),
            Repr::Diagonal(d) => {
                let mut out = x.clone();
                for mut col in out.column_iter_mut() {
                    col.component_mul_assign(d);
                }
                out
            }
            Repr::Dense(m) => m * x,
            Repr::ScaledReal { coef, matrix, .. } => T::mul_real_left(matrix, x) * *coef,
        })
    }

    /// `Aᵀ x`.
    pub fn apply_transpose(&self, x: &DMatrix<T>) -> Result<DMatrix<T>> {
        self.check_rows(x.nrows())?;
        Ok(match &self.repr {
            Repr::Dense(m) => m.tr_mul(x),
            Repr::ScaledReal { coef, transposed, .. } => T::mul_real_left(transposed, x) * *coef,
            _ => self.apply(x)?,
        })
    }

    /// `x Aᵀ`.
    pub fn right_apply_transpose(&self, x: &DMatrix<T>) -> Result<DMatrix<T>> {
        if x.ncols() != self.dim {
            return Err(Error::InvalidInput(format!(
                "operator of dimension {} applied from the right to a block with {} columns",
                self.dim,
                x.ncols()
            )));
        }
        Ok(match &self.repr {
            Repr::Identity => x.clone(),
            Repr::Diagonal(d) => {
                let mut out = x.clone();
                for (j, mut col) in out.column_iter_mut().enumerate() {
                    col *= d[j];
                }
                out
            }
            Repr::Dense(m) => x * m.transpose(),
            Repr::ScaledReal { coef, transposed, .. } => T::mul_real_right(x, transposed) * *coef,
        })
    }

    pub fn to_dense(&self) -> DMatrix<T> {
        match &self.repr {
            Repr::Identity => DMatrix::identity(self.dim, self.dim),
            Repr::Diagonal(d) => DMatrix::from_diagonal(d),
            Repr::Dense(m) => m.clone(),
            Repr::ScaledReal { coef, matrix, .. } => matrix.map(|x| coef.scale(x)),
        }
    }

    /// Entrywise complex conjugate.
    pub fn conjugate(&self) -> Self {
        let repr = match &self.repr {
            Repr::Identity => Repr::Identity,
            Repr::Diagonal(d) => Repr::Diagonal(d.conjugate()),
            Repr::Dense(m) => Repr::Dense(m.conjugate()),
            Repr::ScaledReal {
                coef,
                matrix,
                transposed,
            } => Repr::ScaledReal {
                coef: coef.conjugate(),
                matrix: Arc::clone(matrix),
                transposed: Arc::clone(transposed),
            },
        };
        Self { dim: self.dim, repr }
    }

    /// Diagonal of the operator.
    pub fn diagonal_entries(&self) -> DVector<T> {
        match &self.repr {
            Repr::Identity => DVector::from_element(self.dim, T::one()),
            Repr::Diagonal(d) => d.clone(),
            Repr::Dense(m) => m.diagonal(),
            Repr::ScaledReal { coef, matrix, .. } => matrix.diagonal().map(|x| coef.scale(x)),
        }
    }
}

/// `Wᴴ A W` for `W` with orthonormal columns.
pub fn project<T: Scalar>(op: &CoefficientOperator<T>, w: &DMatrix<T>) -> Result<DMatrix<T>> {
    Ok(w.ad_mul(&op.apply(w)?))
}

/// Low-rank source term `t ↦ G(t)`.
pub type SourceFn<T> = Arc<dyn Fn(f64) -> Factorization<T> + Send + Sync>;

/// `F(X, t) = Σ_j A_j X B_jᵀ + G(t)` with constant coefficient operators.
pub struct LinearMatrixOde<T: Scalar> {
    terms: Vec<(CoefficientOperator<T>, CoefficientOperator<T>)>,
    source: Option<SourceFn<T>>,
    shape: (usize, usize),
    adjoint: OnceLock<Box<LinearMatrixOde<T>>>,
}

impl<T: Scalar> fmt::Debug for LinearMatrixOde<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("LinearMatrixOde")
            .field("terms", &self.terms)
            .field("shape", &self.shape)
            .field("has_source", &self.source.is_some())
            .finish()
    }
}

impl<T: Scalar> LinearMatrixOde<T> {
    pub fn new(
        terms: Vec<(CoefficientOperator<T>, CoefficientOperator<T>)>,
        source: Option<SourceFn<T>>,
    ) -> Result<Self> {
        let (a0, b0) = terms
            .first()
            .ok_or_else(|| Error::InvalidInput("a matrix ODE needs at least one term".into()))?;
        let shape = (a0.dim(), b0.dim());
        if let Some((a, b)) = terms.iter().find(|(a, b)| (a.dim(), b.dim()) != shape) {
            return Err(Error::InvalidInput(format!(
                "term dimensions ({}, {}) differ from ({}, {})",
                a.dim(),
                b.dim(),
                shape.0,
                shape.1
            )));
        }
        Ok(Self {
            terms,
            source,
            shape,
            adjoint: OnceLock::new(),
        })
    }

    pub fn shape(&self) -> (usize, usize) {
        self.shape
    }

    pub fn terms(&self) -> &[(CoefficientOperator<T>, CoefficientOperator<T>)] {
        &self.terms
    }

    pub fn has_source(&self) -> bool {
        self.source.is_some()
    }

    pub fn source_at(&self, t: f64) -> Factorization<T> {
        match &self.source {
            Some(g) => g(t),
            None => Factorization::zero(self.shape.0, self.shape.1),
        }
    }

    fn check_shape(&self, shape: (usize, usize)) -> Result<()> {
        if shape == self.shape {
            Ok(())
        } else {
            Err(Error::InvalidInput(format!(
                "state of shape {shape:?} for an ODE of shape {:?}",
                self.shape
            )))
        }
    }

    /// `Σ_j A_j X B_jᵀ`, evaluated densely.
    pub fn apply_linear_dense(&self, x: &DMatrix<T>) -> Result<DMatrix<T>> {
        self.check_shape(x.shape())?;
        let mut out = DMatrix::zeros(self.shape.0, self.shape.1);
        for (a, b) in &self.terms {
            out += b.right_apply_transpose(&a.apply(x)?)?;
        }
        Ok(out)
    }

    /// `F(X, t)` evaluated densely.
    pub fn apply_dense(&self, x: &DMatrix<T>, t: f64) -> Result<DMatrix<T>> {
        let mut out = self.apply_linear_dense(x)?;
        if self.source.is_some() {
            out += self.source_at(t).to_dense();
        }
        Ok(out)
    }

    /// Rounded low-rank evaluation of `F(X, t)`:
    /// `T^sum_eps(Σ_j (A_j U) S (conj(B_j) V)ᴴ + G(t))`.
    pub fn eval_lowrank(
        &self,
        x: &Factorization<T>,
        t: f64,
        eps: f64,
        mode: TruncationMode,
    ) -> Result<Factorization<T>> {
        self.check_shape(x.shape())?;
        let mut terms = Vec::with_capacity(self.terms.len() + 1);
        if x.rank() > 0 {
            for (a, b) in &self.terms {
                terms.push(LowRankTerm {
                    u: a.apply(x.u())?,
                    s: x.s().to_vec(),
                    v: b.conjugate().apply(x.v())?,
                });
            }
        }
        if self.source.is_some() {
            terms.push(LowRankTerm::from(&self.source_at(t)));
        }
        round_terms(&terms, self.shape, eps, mode)
    }

    /// The ODE satisfied by `Xᴴ`: terms `(conj B_j, conj A_j)` and source `G(t)ᴴ`.
    pub fn adjoint(&self) -> &LinearMatrixOde<T> {
        self.adjoint.get_or_init(|| {
            let terms = self
                .terms
                .iter()
                .map(|(a, b)| (b.conjugate(), a.conjugate()))
                .collect();
            let source = self.source.as_ref().map(|g| {
                let g = Arc::clone(g);
                Arc::new(move |t: f64| g(t).adjoint()) as SourceFn<T>
            });
            Box::new(LinearMatrixOde {
                terms,
                source,
                shape: (self.shape.1, self.shape.0),
                adjoint: OnceLock::new(),
            })
        })
    }

    /// `Σ_j B_j ⊗ A_j`, the dense matrix acting on column-major `vec(X)`.
    /// Intended for small oracle problems only.
    pub fn kronecker_dense(&self) -> DMatrix<T> {
        let n = self.shape.0 * self.shape.1;
        let mut out = DMatrix::zeros(n, n);
        for (a, b) in &self.terms {
            out += b.to_dense().kronecker(&a.to_dense());
        }
        out
    }
}
