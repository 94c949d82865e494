//! Restarted GMRES on matrix-shaped unknowns with right preconditioning.

use nalgebra::DMatrix;

use crate::error::Result;
use crate::scalar::Scalar;

/// Outcome of [`gmres`].
#[derive(Debug, Clone)]
pub struct KrylovOutcome<T: Scalar> {
    pub x: DMatrix<T>,
    /// Absolute residual norm of the returned iterate, recomputed explicitly.
    pub residual: f64,
    pub iterations: usize,
    pub converged: bool,
}

/// Complex Givens rotation zeroing `b` in `(a, b)`: returns `(c, s, r)` with
/// `[c s; -conj(s) c] [a; b] = [r; 0]`.
fn givens<T: Scalar>(a: T, b: T) -> (f64, T, T) {
    let (aa, bb) = (a.modulus(), b.modulus());
    if bb == 0.0 {
        return (1.0, T::zero(), a);
    }
    if aa == 0.0 {
        return (0.0, T::one(), b);
    }
    let rho = aa.hypot(bb);
    let phase = a.unscale(aa);
    (aa / rho, (phase * b.conjugate()).unscale(rho), phase.scale(rho))
}

/// Solves `A x = b` with `A` given by `apply` and right preconditioner
/// `precond ≈ A⁻¹`. Stops once `‖b − A x‖ ≤ tol_abs`, after `max_iter`
/// inner iterations, or when a full restart cycle fails to reduce the
/// residual by at least 1%.
pub fn gmres<T, A, M>(
    apply: A,
    precond: M,
    b: &DMatrix<T>,
    x0: DMatrix<T>,
    tol_abs: f64,
    restart: usize,
    max_iter: usize,
) -> Result<KrylovOutcome<T>>
where
    T: Scalar,
    A: Fn(&DMatrix<T>) -> Result<DMatrix<T>>,
    M: Fn(&DMatrix<T>) -> Result<DMatrix<T>>,
{
    let restart = restart.max(1);
    let mut x = x0;
    let mut r = b - apply(&x)?;
    let mut beta = r.norm();
    let mut iterations = 0;

    while beta > tol_abs && iterations < max_iter {
        let m = restart.min(max_iter - iterations);
        let mut basis: Vec<DMatrix<T>> = Vec::with_capacity(m + 1);
        basis.push(r.unscale(beta));
        let mut h = DMatrix::<T>::zeros(m + 1, m);
        let mut cs = vec![0.0; m];
        let mut sn = vec![T::zero(); m];
        let mut g = vec![T::zero(); m + 1];
        g[0] = T::from_real(beta);
        let mut used = 0;

        for j in 0..m {
            iterations += 1;
            used = j + 1;
            let mut w = apply(&precond(&basis[j])?)?;
            // Modified Gram-Schmidt with one reorthogonalization pass.
            for _ in 0..2 {
                for (i, q) in basis.iter().enumerate() {
                    let c = q.dotc(&w);
                    h[(i, j)] += c;
                    w.zip_apply(q, |wi, qi| *wi -= c * qi);
                }
            }
            let hn = w.norm();
            h[(j + 1, j)] = T::from_real(hn);

            for i in 0..j {
                let (a, bb) = (h[(i, j)], h[(i + 1, j)]);
                h[(i, j)] = a.scale(cs[i]) + sn[i] * bb;
                h[(i + 1, j)] = -(sn[i].conjugate() * a) + bb.scale(cs[i]);
            }
            let (c, s, rr) = givens(h[(j, j)], h[(j + 1, j)]);
            cs[j] = c;
            sn[j] = s;
            h[(j, j)] = rr;
            h[(j + 1, j)] = T::zero();
            g[j + 1] = -(s.conjugate() * g[j]);
            g[j] = g[j].scale(c);

            if g[j + 1].modulus() <= tol_abs || hn <= f64::EPSILON * beta {
                break;
            }
            basis.push(w.unscale(hn));
        }

        // Back substitution on the rotated Hessenberg system.
        let mut y = vec![T::zero(); used];
        for i in (0..used).rev() {
            let mut acc = g[i];
            for k in i + 1..used {
                acc -= h[(i, k)] * y[k];
            }
            y[i] = if h[(i, i)].modulus() > 0.0 { acc / h[(i, i)] } else { T::zero() };
        }
        let mut update = DMatrix::<T>::zeros(b.nrows(), b.ncols());
        for (k, yk) in y.iter().enumerate() {
            update.zip_apply(&basis[k], |ui, qi| *ui += *yk * qi);
        }
        x += precond(&update)?;

        r = b - apply(&x)?;
        let new_beta = r.norm();
        let stagnated = new_beta > 0.99 * beta;
        beta = new_beta;
        if stagnated {
            break;
        }
    }

    Ok(KrylovOutcome {
        converged: beta <= tol_abs,
        x,
        residual: beta,
        iterations,
    })
}

/// Preconditioned Richardson iteration `x ← x + M(b − A x)`; stops at the
/// first sweep that does not reduce the residual.
pub fn richardson<T, A, M>(
    apply: A,
    precond: M,
    b: &DMatrix<T>,
    x0: DMatrix<T>,
    tol_abs: f64,
    max_iter: usize,
) -> Result<KrylovOutcome<T>>
where
    T: Scalar,
    A: Fn(&DMatrix<T>) -> Result<DMatrix<T>>,
    M: Fn(&DMatrix<T>) -> Result<DMatrix<T>>,
{
    let mut x = x0;
    let mut r = b - apply(&x)?;
    let mut beta = r.norm();
    let mut iterations = 0;
    while beta > tol_abs && iterations < max_iter {
        let trial = &x + precond(&r)?;
        let r_trial = b - apply(&trial)?;
        let beta_trial = r_trial.norm();
        iterations += 1;
        // Diverging sweep: keep the best iterate.
        if !(beta_trial < beta) {
            break;
        }
        (x, r, beta) = (trial, r_trial, beta_trial);
    }
    Ok(KrylovOutcome {
        converged: beta <= tol_abs,
        x,
        residual: beta,
        iterations,
    })
}
