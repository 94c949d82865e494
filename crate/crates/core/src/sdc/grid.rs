//! Legendre Gauss-Lobatto subnodes and the interpolatory quadrature weights
//! of the SDC correction sweeps.

use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// Legendre polynomial `P_n(x)` and its derivative.
fn legendre(n: usize, x: f64) -> (f64, f64) {
    if n == 0 {
        return (1.0, 0.0);
    }
    let (mut p0, mut p1) = (1.0, x);
    for k in 2..=n {
        let k = k as f64;
        let p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
    }
    // P_n' from the standard identity, valid away from ±1.
    let dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, dp)
}

/// Gauss-Legendre nodes and weights on `[−1, 1]`, nodes ascending.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n {
        let mut x = -(std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        for _ in 0..100 {
            let (p, dp) = legendre(n, x);
            let dx = p / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let (_, dp) = legendre(n, x);
        nodes[i] = x;
        weights[i] = 2.0 / ((1.0 - x * x) * dp * dp);
    }
    (nodes, weights)
}

/// The `p + 1` Legendre Gauss-Lobatto points on `[−1, 1]`: the endpoints and
/// the roots of `P_p'`.
pub fn lobatto_nodes(p: usize) -> Vec<f64> {
    let mut nodes = vec![-1.0; p + 1];
    nodes[p] = 1.0;
    for (j, node) in nodes.iter_mut().enumerate().take(p).skip(1) {
        let mut x = -(std::f64::consts::PI * j as f64 / p as f64).cos();
        for _ in 0..100 {
            let (pp, dp) = legendre(p, x);
            // (1 − x²) P_p'' = 2x P_p' − p(p+1) P_p
            let d2p = (2.0 * x * dp - (p * (p + 1)) as f64 * pp) / (1.0 - x * x);
            let dx = dp / d2p;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        *node = x;
    }
    nodes
}

/// Value of the `s`-th Lagrange basis polynomial on `nodes` at `x`.
fn lagrange(nodes: &[f64], s: usize, x: f64) -> f64 {
    nodes
        .iter()
        .enumerate()
        .filter(|&(j, _)| j != s)
        .map(|(_, &xj)| (x - xj) / (nodes[s] - xj))
        .product()
}

/// Weights `w_{m,s} = (1/Δt_m) ∫_{t_m}^{t_{m+1}} ℓ_s(t) dt` for the given nodes.
pub fn subinterval_weights(nodes: &[f64]) -> DMatrix<f64> {
    let p = nodes.len() - 1;
    let (gx, gw) = gauss_legendre(p + 1);
    DMatrix::from_fn(p, p + 1, |m, s| {
        let (a, b) = (nodes[m], nodes[m + 1]);
        let half = 0.5 * (b - a);
        let mid = 0.5 * (a + b);
        gx.iter()
            .zip(&gw)
            .map(|(&x, &w)| w * lagrange(nodes, s, mid + half * x))
            .sum::<f64>()
            * 0.5
    })
}

struct ReferenceTable {
    nodes: Vec<f64>,
    weights: DMatrix<f64>,
}

fn reference_table(p: usize) -> Arc<ReferenceTable> {
    static CACHE: OnceLock<Mutex<HashMap<usize, Arc<ReferenceTable>>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    let mut map = cache.lock().unwrap_or_else(|e| e.into_inner());
    Arc::clone(map.entry(p).or_insert_with(|| {
        let nodes = lobatto_nodes(p);
        let weights = subinterval_weights(&nodes);
        Arc::new(ReferenceTable { nodes, weights })
    }))
}

/// Subnodes of one macro step and the weight table of the correction sweeps.
#[derive(Debug, Clone)]
pub struct SdcGrid {
    pub p: usize,
    pub nodes: Vec<f64>,
    pub sub_steps: Vec<f64>,
    /// `p × (p + 1)` table of normalized weights `w_{m,s}`.
    pub weights: DMatrix<f64>,
}

impl SdcGrid {
    pub fn t0(&self) -> f64 {
        self.nodes[0]
    }

    pub fn t1(&self) -> f64 {
        self.nodes[self.p]
    }
}

/// Legendre Gauss-Lobatto grid with `p` subintervals on `[t0, t1]`.
pub fn lobatto_grid(p: usize, t0: f64, t1: f64) -> Result<SdcGrid> {
    if p == 0 {
        return Err(Error::InvalidParameter("an SDC grid needs at least one subinterval".into()));
    }
    if !(t1 > t0) || !t0.is_finite() || !t1.is_finite() {
        return Err(Error::InvalidParameter(format!("invalid interval [{t0}, {t1}]")));
    }
    let table = reference_table(p);
    let half = 0.5 * (t1 - t0);
    let mut nodes: Vec<f64> = table.nodes.iter().map(|&x| t0 + half * (x + 1.0)).collect();
    nodes[0] = t0;
    nodes[p] = t1;
    let sub_steps = nodes.windows(2).map(|w| w[1] - w[0]).collect();
    Ok(SdcGrid {
        p,
        nodes,
        sub_steps,
        weights: table.weights.clone(),
    })
}
