//! Graded velocity grids on truncated half-intervals.
//!
//! A [`HalfGrid`] covers `v_min < |v| < 1` on one side of `v = 0`. Panel
//! endpoints follow `u -> v_min + (1 - v_min) u^q` for uniform `u`, so panels
//! shrink towards the tangential velocities, and each panel carries a
//! Gauss-Legendre rule. The negative grid is the node-wise mirror of the
//! positive one with identical weights; node `i` on either side has speed
//! `|v_i|`, ordered by increasing speed.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Amplitude;

/// Gauss points per panel.
pub const PANEL_ORDER: usize = 8;
pub const DEFAULT_V_MIN: f64 = 1e-4;
pub const DEFAULT_GRADING: f64 = 3.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Sign {
    Positive,
    Negative,
}

impl Sign {
    pub fn factor(self) -> f64 {
        match self {
            Sign::Positive => 1.0,
            Sign::Negative => -1.0,
        }
    }

    pub fn flip(self) -> Sign {
        match self {
            Sign::Positive => Sign::Negative,
            Sign::Negative => Sign::Positive,
        }
    }
}

#[derive(Debug, Clone)]
pub struct HalfGrid {
    sign: Sign,
    v_min: f64,
    grading_q: f64,
    /// Speeds `|v_i|`, strictly increasing.
    speeds: Vec<f64>,
    weights: Vec<f64>,
    /// Index ranges of the quadrature panels, in node order.
    panels: Vec<std::ops::Range<usize>>,
}

impl PartialEq for HalfGrid {
    fn eq(&self, other: &Self) -> bool {
        self.sign == other.sign
            && self.v_min == other.v_min
            && self.grading_q == other.grading_q
            && self.speeds.len() == other.speeds.len()
    }
}

/// Gauss-Legendre nodes and weights on `[-1, 1]` by Newton iteration on `P_n`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    let m = n.div_ceil(2);
    for i in 0..m {
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, z);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * z * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            let pn = if n == 1 { z } else { p1 };
            let pnm1 = if n == 1 { 1.0 } else { p0 };
            dp = n as f64 * (z * pn - pnm1) / (z * z - 1.0);
            let dz = pn / dp;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        x[i] = -z;
        x[n - 1 - i] = z;
        let wi = 2.0 / ((1.0 - z * z) * dp * dp);
        w[i] = wi;
        w[n - 1 - i] = wi;
    }
    (x, w)
}

impl HalfGrid {
    pub fn new(sign: Sign, n: usize, v_min: f64, grading_q: f64) -> Result<Self> {
        if n < 2 {
            return Err(Error::Parameter(format!(
                "grid needs n >= 2 nodes, got {n}"
            )));
        }
        if !(v_min > 0.0 && v_min < 1.0) {
            return Err(Error::Parameter(format!(
                "v_min must lie in (0,1), got {v_min}"
            )));
        }
        if !(grading_q >= 1.0) || !grading_q.is_finite() {
            return Err(Error::Parameter(format!(
                "grading exponent must be >= 1, got {grading_q}"
            )));
        }
        let n_panels = n.div_ceil(PANEL_ORDER);
        let base = n / n_panels;
        let extra = n % n_panels;
        let span = 1.0 - v_min;
        let edge = |k: usize| v_min + span * (k as f64 / n_panels as f64).powf(grading_q);

        let mut speeds = Vec::with_capacity(n);
        let mut weights = Vec::with_capacity(n);
        let mut panels = Vec::with_capacity(n_panels);
        let mut rules: Vec<Option<(Vec<f64>, Vec<f64>)>> = vec![None; PANEL_ORDER + 2];
        for k in 0..n_panels {
            let order = if k >= n_panels - extra {
                base + 1
            } else {
                base
            };
            let (gx, gw) = rules[order].get_or_insert_with(|| gauss_legendre(order));
            let (lo, hi) = (edge(k), if k + 1 == n_panels { 1.0 } else { edge(k + 1) });
            let (mid, half) = (0.5 * (lo + hi), 0.5 * (hi - lo));
            let start = speeds.len();
            for (x, w) in gx.iter().zip(gw.iter()) {
                speeds.push(mid + half * x);
                weights.push(half * w);
            }
            panels.push(start..speeds.len());
        }
        Ok(Self {
            sign,
            v_min,
            grading_q,
            speeds,
            weights,
            panels,
        })
    }

    /// The mirror grid `v -> -v` with identical weights.
    pub fn mirror(&self) -> Self {
        Self {
            sign: self.sign.flip(),
            ..self.clone()
        }
    }

    pub fn sign(&self) -> Sign {
        self.sign
    }

    pub fn v_min(&self) -> f64 {
        self.v_min
    }

    pub fn grading_q(&self) -> f64 {
        self.grading_q
    }

    pub fn n(&self) -> usize {
        self.speeds.len()
    }

    pub fn speeds(&self) -> &[f64] {
        &self.speeds
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn panels(&self) -> &[std::ops::Range<usize>] {
        &self.panels
    }

    /// Signed velocity of node `i`.
    pub fn node(&self, i: usize) -> f64 {
        self.sign.factor() * self.speeds[i]
    }

    pub fn nodes(&self) -> Vec<f64> {
        (0..self.n()).map(|i| self.node(i)).collect()
    }

    pub fn is_mirror_of(&self, other: &HalfGrid) -> bool {
        self.sign == other.sign.flip()
            && self.v_min == other.v_min
            && self.grading_q == other.grading_q
            && self.speeds == other.speeds
    }

    /// Quadrature of `f(v)` over the half-interval (`v` signed).
    pub fn integrate(&self, f: impl Fn(f64) -> f64) -> f64 {
        (0..self.n())
            .map(|i| self.weights[i] * f(self.node(i)))
            .sum()
    }

    /// Bin edges `b_0 = v_min < b_1 < ... < b_n = 1` (in speed) with `b_{i+1} - b_i = w_i`,
    /// so node masses and bin masses coincide. Used for histograms and sampling.
    pub fn bin_edges(&self) -> Vec<f64> {
        let mut edges = Vec::with_capacity(self.n() + 1);
        let mut b = self.v_min;
        edges.push(b);
        for w in &self.weights {
            b += w;
            edges.push(b);
        }
        *edges.last_mut().unwrap() = 1.0;
        edges
    }

    /// Part of each node's weight whose bin lies above `eps`: `clamp(b_{i+1} - eps, 0, w_i)`.
    pub fn region_weights(&self, eps: f64) -> Vec<f64> {
        let edges = self.bin_edges();
        self.weights
            .iter()
            .zip(&edges[1..])
            .map(|(w, hi)| (hi - eps).clamp(0.0, *w))
            .collect()
    }

    /// Index of the bin containing speed `|v|`, if inside `[v_min, 1]`.
    pub fn bin_of(&self, speed: f64, edges: &[f64]) -> Option<usize> {
        if !(speed >= self.v_min && speed <= 1.0) {
            return None;
        }
        let i = edges.partition_point(|&b| b <= speed);
        Some(i.saturating_sub(1).min(self.n() - 1))
    }
}

/// Shorthand for the positive half-grid and its mirror.
pub fn grid_pair(n: usize, v_min: f64, grading_q: f64) -> Result<(Arc<HalfGrid>, Arc<HalfGrid>)> {
    let pos = HalfGrid::new(Sign::Positive, n, v_min, grading_q)?;
    let neg = pos.mirror();
    Ok((Arc::new(pos), Arc::new(neg)))
}

pub fn build_grid(sign: Sign, n: usize, v_min: f64, grading_q: f64) -> Result<HalfGrid> {
    HalfGrid::new(sign, n, v_min, grading_q)
}

/// A function sampled on the nodes of a half-grid.
#[derive(Debug, Clone, PartialEq)]
pub struct HalfGridVector<T = f64> {
    pub grid: Arc<HalfGrid>,
    pub values: Vec<T>,
}

impl<T: Amplitude> HalfGridVector<T> {
    pub fn new(grid: Arc<HalfGrid>, values: Vec<T>) -> Result<Self> {
        if values.len() != grid.n() {
            return Err(Error::Shape(format!(
                "vector has {} values, grid has {} nodes",
                values.len(),
                grid.n()
            )));
        }
        Ok(Self { grid, values })
    }

    pub fn zeros(grid: Arc<HalfGrid>) -> Self {
        let values = vec![T::default(); grid.n()];
        Self { grid, values }
    }

    pub fn from_fn(grid: Arc<HalfGrid>, f: impl Fn(f64) -> T) -> Self {
        let values = (0..grid.n()).map(|i| f(grid.node(i))).collect();
        Self { grid, values }
    }

    /// `sum_i w_i |f_i| / |v_i|^j`.
    pub fn weighted_norm(&self, j: u32) -> f64 {
        let g = &self.grid;
        (0..g.n())
            .map(|i| g.weights[i] * self.values[i].modulus() / g.speeds[i].powi(j as i32))
            .sum()
    }

    pub fn l1_norm(&self) -> f64 {
        self.weighted_norm(0)
    }
}

impl HalfGridVector<f64> {
    pub fn integral(&self) -> f64 {
        self.values
            .iter()
            .zip(&self.grid.weights)
            .map(|(f, w)| f * w)
            .sum()
    }
}

pub fn weighted_norm<T: Amplitude>(f: &HalfGridVector<T>, j: u32) -> f64 {
    f.weighted_norm(j)
}
