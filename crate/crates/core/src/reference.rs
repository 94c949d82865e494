//! Full-rank reference integrators, reference rank curves and the on-disk
//! reference cache.
//!
//! Cache layout (little-endian): magic `LRSDCREF`, version `u32`, field tag
//! `u8`, `m1`, `m2`, sample count and step count as `u64`, `t0` and `t_final`
//! as `f64`, the sample times, then every state column-major with complex
//! entries stored as interleaved real and imaginary parts.

use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::lowrank::{truncate_dense, TruncationMode};
use crate::operators::LinearMatrixOde;
use crate::scalar::{Scalar, ScalarField};

pub use crate::sdc::dense::implicit_euler_dense;

const MAGIC: &[u8; 8] = b"LRSDCREF";
const VERSION: u32 = 1;

/// Where a reference solution came from.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReferenceMeta {
    pub t0: f64,
    pub t_final: f64,
    pub steps: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReferenceSolution<T: Scalar> {
    pub times: Vec<f64>,
    pub states: Vec<DMatrix<T>>,
    pub meta: ReferenceMeta,
}

impl<T: Scalar> ReferenceSolution<T> {
    /// State at the sample closest to `t`, if within `1e-9 (1 + |t|)`.
    pub fn at(&self, t: f64) -> Option<&DMatrix<T>> {
        self.times
            .iter()
            .position(|&s| (s - t).abs() <= 1e-9 * (1.0 + t.abs()))
            .map(|i| &self.states[i])
    }
}

/// Classical RK4 with `steps` uniform steps; states are stored at the
/// requested sample times, each of which must lie on the step grid.
pub fn rk4_dense<T: Scalar>(
    ode: &LinearMatrixOde<T>,
    x0: &DMatrix<T>,
    t0: f64,
    t_final: f64,
    steps: usize,
    sample_at: &[f64],
) -> Result<ReferenceSolution<T>> {
    if steps == 0 || !(t_final > t0) {
        return Err(Error::InvalidParameter(format!(
            "RK4 needs steps ≥ 1 and t_final > t0, got {steps} steps on [{t0}, {t_final}]"
        )));
    }
    let h = (t_final - t0) / steps as f64;
    let mut wanted = Vec::with_capacity(sample_at.len());
    for &t in sample_at {
        let idx = ((t - t0) / h).round();
        if !(0.0..=steps as f64).contains(&idx) || (t0 + idx * h - t).abs() > 1e-9 * (1.0 + t.abs()) {
            return Err(Error::InvalidParameter(format!("sample time {t} is not on the RK4 step grid")));
        }
        wanted.push((idx as usize, t));
    }
    if wanted.windows(2).any(|w| w[1].0 <= w[0].0) {
        return Err(Error::InvalidParameter("sample times must be strictly increasing".into()));
    }

    let mut times = Vec::with_capacity(wanted.len());
    let mut states = Vec::with_capacity(wanted.len());
    let mut next = wanted.iter().peekable();
    let mut x = x0.clone();
    let half = T::from_real(0.5 * h);
    let full = T::from_real(h);
    let sixth = T::from_real(h / 6.0);
    for n in 0..=steps {
        while let Some(&&(idx, t)) = next.peek() {
            if idx != n {
                break;
            }
            times.push(t);
            states.push(x.clone());
            next.next();
        }
        if n == steps {
            break;
        }
        let t = t0 + n as f64 * h;
        let k1 = ode.apply_dense(&x, t)?;
        let k2 = ode.apply_dense(&(&x + &k1 * half), t + 0.5 * h)?;
        let k3 = ode.apply_dense(&(&x + &k2 * half), t + 0.5 * h)?;
        let k4 = ode.apply_dense(&(&x + &k3 * full), t + h)?;
        x += (k1 + (k2 + k3) * T::from_real(2.0) + k4) * sixth;
        if !x.iter().all(|z| z.is_finite_scalar()) {
            return Err(Error::SolverFailure {
                iterations: n + 1,
                residual: f64::INFINITY,
                target: 0.0,
            });
        }
    }
    Ok(ReferenceSolution {
        times,
        states,
        meta: ReferenceMeta { t0, t_final, steps },
    })
}

/// Rank of every reference sample after truncation at `eps`.
pub fn reference_rank_curve<T: Scalar>(
    reference: &ReferenceSolution<T>,
    eps: f64,
    mode: TruncationMode,
) -> Result<Vec<(f64, usize)>> {
    reference
        .times
        .iter()
        .zip(&reference.states)
        .map(|(&t, x)| Ok((t, truncate_dense(x, eps, mode)?.rank())))
        .collect()
}

pub fn write_reference<T: Scalar>(path: &Path, reference: &ReferenceSolution<T>) -> Result<()> {
    let (m1, m2) = reference.states.first().map_or((0, 0), |x| x.shape());
    if reference.states.iter().any(|x| x.shape() != (m1, m2)) || reference.times.len() != reference.states.len() {
        return Err(Error::InvalidInput("inconsistent reference solution".into()));
    }
    let io = |e| Error::io(path, e);
    let file = fs::File::create(path).map_err(io)?;
    let mut w = BufWriter::new(file);
    w.write_all(MAGIC).map_err(io)?;
    w.write_all(&VERSION.to_le_bytes()).map_err(io)?;
    w.write_all(&[T::FIELD.tag()]).map_err(io)?;
    for n in [m1, m2, reference.times.len(), reference.meta.steps] {
        w.write_all(&(n as u64).to_le_bytes()).map_err(io)?;
    }
    for x in [reference.meta.t0, reference.meta.t_final].iter().chain(&reference.times) {
        w.write_all(&x.to_le_bytes()).map_err(io)?;
    }
    for state in &reference.states {
        for z in state.iter() {
            let (re, im) = z.re_im();
            w.write_all(&re.to_le_bytes()).map_err(io)?;
            if T::WORDS == 2 {
                w.write_all(&im.to_le_bytes()).map_err(io)?;
            }
        }
    }
    w.flush().map_err(io)
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
    path: &'a Path,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len());
        match end {
            Some(end) => {
                let out = &self.bytes[self.pos..end];
                self.pos = end;
                Ok(out)
            }
            None => Err(Error::Format {
                path: self.path.to_path_buf(),
                reason: "truncated file".into(),
            }),
        }
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }
}

pub fn read_reference<T: Scalar>(path: &Path) -> Result<ReferenceSolution<T>> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let bad = |reason: String| Error::Format {
        path: path.to_path_buf(),
        reason,
    };
    let mut c = Cursor {
        bytes: &bytes,
        pos: 0,
        path,
    };
    if c.take(8)? != MAGIC {
        return Err(bad("bad magic".into()));
    }
    let version = u32::from_le_bytes(c.take(4)?.try_into().expect("4 bytes"));
    if version != VERSION {
        return Err(bad(format!("unsupported version {version}")));
    }
    let tag = c.take(1)?[0];
    match ScalarField::from_tag(tag) {
        Some(f) if f == T::FIELD => {}
        Some(f) => return Err(bad(format!("stored field {f:?} does not match {:?}", T::FIELD))),
        None => return Err(bad(format!("unknown field tag {tag}"))),
    }
    let (m1, m2, count, steps) = (c.u64()? as usize, c.u64()? as usize, c.u64()? as usize, c.u64()? as usize);
    let words = m1
        .checked_mul(m2)
        .and_then(|n| n.checked_mul(T::WORDS))
        .and_then(|n| n.checked_mul(count))
        .and_then(|n| n.checked_add(count + 2))
        .ok_or_else(|| bad("header sizes overflow".into()))?;
    if words.checked_mul(8) != Some(bytes.len() - c.pos) {
        return Err(bad("payload size does not match header".into()));
    }
    let (t0, t_final) = (c.f64()?, c.f64()?);
    let times = (0..count).map(|_| c.f64()).collect::<Result<Vec<_>>>()?;
    let mut states = Vec::with_capacity(count);
    for _ in 0..count {
        let mut data = Vec::with_capacity(m1 * m2);
        for _ in 0..m1 * m2 {
            let re = c.f64()?;
            let im = if T::WORDS == 2 { c.f64()? } else { 0.0 };
            data.push(T::from_parts(re, im));
        }
        states.push(DMatrix::from_vec(m1, m2, data));
    }
    Ok(ReferenceSolution {
        times,
        states,
        meta: ReferenceMeta { t0, t_final, steps },
    })
}
