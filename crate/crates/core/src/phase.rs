//! Functions on the slab phase space `(-a, a) x (-1, 1)` sampled on a tensor grid.

use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::scalar::Amplitude;
use crate::vgrid::{HalfGrid, Sign};

/// Uniform nodes on `[-a, a]`, endpoints included, with trapezoid weights.
#[derive(Debug, Clone, PartialEq)]
pub struct XGrid {
    a: f64,
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl XGrid {
    pub fn new(a: f64, n_x: usize) -> Result<Self> {
        if !(a > 0.0) || !a.is_finite() {
            return Err(Error::Parameter(format!(
                "slab half-width must be positive, got {a}"
            )));
        }
        if n_x < 2 {
            return Err(Error::Parameter(format!(
                "need n_x >= 2 spatial nodes, got {n_x}"
            )));
        }
        let h = 2.0 * a / (n_x - 1) as f64;
        let nodes = (0..n_x)
            .map(|i| if i + 1 == n_x { a } else { -a + h * i as f64 })
            .collect();
        let mut weights = vec![h; n_x];
        weights[0] = 0.5 * h;
        weights[n_x - 1] = 0.5 * h;
        Ok(Self { a, nodes, weights })
    }

    pub fn a(&self) -> f64 {
        self.a
    }

    pub fn n(&self) -> usize {
        self.nodes.len()
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn spacing(&self) -> f64 {
        self.nodes[1] - self.nodes[0]
    }

    /// Cell index and local coordinate in `[0, 1]` of `x`, clamped to the slab.
    pub fn locate(&self, x: f64) -> (usize, f64) {
        let h = self.spacing();
        let u = ((x + self.a) / h).clamp(0.0, (self.n() - 1) as f64);
        let i = (u.floor() as usize).min(self.n() - 2);
        (i, u - i as f64)
    }
}

/// A density on the tensor grid `x-nodes x (negative half ∪ positive half)`.
///
/// Values are stored x-major: `positive[ix * n_v + j]` is `f(x_ix, v_j)`.
#[derive(Debug, Clone)]
pub struct PhaseDensity<T = f64> {
    pub xgrid: Arc<XGrid>,
    pub pos: Arc<HalfGrid>,
    pub neg: Arc<HalfGrid>,
    pub positive: Vec<T>,
    pub negative: Vec<T>,
}

impl<T: Amplitude> PhaseDensity<T> {
    pub fn zeros(xgrid: Arc<XGrid>, pos: Arc<HalfGrid>, neg: Arc<HalfGrid>) -> Self {
        let len = xgrid.n() * pos.n();
        Self {
            xgrid,
            pos,
            neg,
            positive: vec![T::default(); len],
            negative: vec![T::default(); len],
        }
    }

    /// Sample `f(x, v)` at every node, `v` signed.
    pub fn from_fn(
        xgrid: Arc<XGrid>,
        pos: Arc<HalfGrid>,
        neg: Arc<HalfGrid>,
        f: impl Fn(f64, f64) -> T,
    ) -> Self {
        let mut out = Self::zeros(xgrid, pos, neg);
        let nv = out.n_v();
        for (ix, &x) in out.xgrid.nodes().iter().enumerate() {
            for j in 0..nv {
                out.positive[ix * nv + j] = f(x, out.pos.node(j));
                out.negative[ix * nv + j] = f(x, out.neg.node(j));
            }
        }
        out
    }

    pub fn n_x(&self) -> usize {
        self.xgrid.n()
    }

    pub fn n_v(&self) -> usize {
        self.pos.n()
    }

    pub fn half(&self, sign: Sign) -> &[T] {
        match sign {
            Sign::Positive => &self.positive,
            Sign::Negative => &self.negative,
        }
    }

    pub fn half_mut(&mut self, sign: Sign) -> &mut [T] {
        match sign {
            Sign::Positive => &mut self.positive,
            Sign::Negative => &mut self.negative,
        }
    }

    pub fn get(&self, sign: Sign, ix: usize, j: usize) -> T {
        self.half(sign)[ix * self.n_v() + j]
    }

    pub fn set(&mut self, sign: Sign, ix: usize, j: usize, value: T) {
        let nv = self.n_v();
        self.half_mut(sign)[ix * nv + j] = value;
    }

    /// Piecewise-linear value in `x` at node `j` of the given half.
    pub fn interpolate(&self, sign: Sign, j: usize, x: f64) -> T {
        let (i, t) = self.xgrid.locate(x);
        let v = self.half(sign);
        let nv = self.n_v();
        v[i * nv + j] * (1.0 - t) + v[(i + 1) * nv + j] * t
    }

    pub fn same_layout(&self, other: &PhaseDensity<impl Amplitude>) -> bool {
        *self.xgrid == *other.xgrid && *self.pos == *other.pos && *self.neg == *other.neg
    }

    fn check_layout(&self, other: &PhaseDensity<impl Amplitude>) -> Result<()> {
        if self.same_layout(other) {
            Ok(())
        } else {
            Err(Error::Shape(
                "phase densities live on different tensor grids".into(),
            ))
        }
    }

    /// `sum_x sum_v wx wv |f| / |v|^j` over both halves.
    pub fn weighted_norm(&self, j: u32) -> f64 {
        self.reduce(|_, v, f| f.modulus() / v.powi(j as i32))
    }

    pub fn l1_norm(&self) -> f64 {
        self.weighted_norm(0)
    }

    /// Mass of `|f|` carried by speeds `|v| > eps`, splitting the bin that contains `eps`.
    pub fn region_mass(&self, eps: f64) -> Result<f64> {
        if !(eps > self.pos.v_min() && eps < 1.0) {
            return Err(Error::Parameter(format!(
                "region threshold must lie in (v_min, 1) = ({}, 1), got {eps}",
                self.pos.v_min()
            )));
        }
        let rw = self.pos.region_weights(eps);
        let nv = self.n_v();
        let mut total = 0.0;
        for (ix, wx) in self.xgrid.weights().iter().enumerate() {
            let k = ix * nv;
            let row: f64 = (0..nv)
                .map(|j| rw[j] * (self.positive[k + j].modulus() + self.negative[k + j].modulus()))
                .sum();
            total += wx * row;
        }
        Ok(total)
    }

    /// `sum wx wv phi(x, |v|, f)` over both halves.
    fn reduce(&self, phi: impl Fn(f64, f64, T) -> f64) -> f64 {
        let nv = self.n_v();
        let (xs, xw) = (self.xgrid.nodes(), self.xgrid.weights());
        let (speeds, vw) = (self.pos.speeds(), self.pos.weights());
        let mut total = 0.0;
        for ix in 0..self.n_x() {
            let mut row = 0.0;
            for j in 0..nv {
                let k = ix * nv + j;
                row += vw[j]
                    * (phi(xs[ix], speeds[j], self.positive[k])
                        + phi(xs[ix], speeds[j], self.negative[k]));
            }
            total += xw[ix] * row;
        }
        total
    }

    pub fn l1_distance(&self, other: &Self) -> Result<f64> {
        self.check_layout(other)?;
        Ok(self.zip_map(other, |a, b| a - b).l1_norm())
    }

    pub fn zip_map(&self, other: &Self, f: impl Fn(T, T) -> T) -> Self {
        let mut out = self.clone();
        for (o, b) in out.positive.iter_mut().zip(&other.positive) {
            *o = f(*o, *b);
        }
        for (o, b) in out.negative.iter_mut().zip(&other.negative) {
            *o = f(*o, *b);
        }
        out
    }

    pub fn map<U: Amplitude>(&self, f: impl Fn(T) -> U) -> PhaseDensity<U> {
        PhaseDensity {
            xgrid: self.xgrid.clone(),
            pos: self.pos.clone(),
            neg: self.neg.clone(),
            positive: self.positive.iter().map(|&z| f(z)).collect(),
            negative: self.negative.iter().map(|&z| f(z)).collect(),
        }
    }

    pub fn scaled(&self, c: f64) -> Self {
        self.map(|z| z * c)
    }

    /// `self + c * other`.
    pub fn axpy(&mut self, c: T, other: &Self) -> Result<()> {
        self.check_layout(other)?;
        for (o, b) in self.positive.iter_mut().zip(&other.positive) {
            *o += c * *b;
        }
        for (o, b) in self.negative.iter_mut().zip(&other.negative) {
            *o += c * *b;
        }
        Ok(())
    }

    pub fn to_complex(&self) -> PhaseDensity<Complex64> {
        self.map(|z| z.to_complex())
    }
}

impl PhaseDensity<f64> {
    /// `int_Omega f` by tensor quadrature.
    pub fn integral(&self) -> f64 {
        self.reduce(|_, _, f| f)
    }

    pub fn min_value(&self) -> f64 {
        self.positive
            .iter()
            .chain(&self.negative)
            .copied()
            .fold(f64::INFINITY, f64::min)
    }
}

impl PhaseDensity<Complex64> {
    pub fn re(&self) -> PhaseDensity<f64> {
        self.map(|z| z.re)
    }
}

/// `c v^2 sin^2(pi (x+a) / 2a)` with `c` fixed so the discrete integral is 1.
/// Vanishes at both walls, hence compatible with every boundary operator.
pub fn canonical_datum(
    xgrid: Arc<XGrid>,
    pos: Arc<HalfGrid>,
    neg: Arc<HalfGrid>,
) -> PhaseDensity<f64> {
    let a = xgrid.a();
    let raw = PhaseDensity::from_fn(xgrid, pos, neg, |x, v| {
        v * v * (PI * (x + a) / (2.0 * a)).sin().powi(2)
    });
    let mass = raw.integral();
    raw.scaled(1.0 / mass)
}
