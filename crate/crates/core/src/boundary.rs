//! Boundary operators `O = alpha R + beta K` at the two walls.
//!
//! Boundary functions are fluxes `h(v) = |v| f(wall, v)`. The left wall maps
//! the flux arriving with `v < 0` to the flux leaving with `v > 0`
//! (`O1: L1(-1,0) -> L1(0,1)`), the right wall the other way round.
//!
//! Discrete operators are stored as kernel matrices: entry `(i, j)` is the
//! kernel value `k(v_i, v'_j)` so that `(O h)_i = sum_j k_ij w_j h_j`, and a
//! column is stochastic when `sum_i w_i k_ij = 1`. Specular reflection is the
//! mirror permutation divided by the source weights. For linear algebra the
//! nodal form `k_ij w_j` ([`GridMap`]) is used.

use std::sync::Arc;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::analysis::least_squares;
use crate::error::{Error, Result};
use crate::scalar::Amplitude;
use crate::vgrid::{grid_pair, HalfGrid, HalfGridVector, Sign};

/// Slope below which an assumption sweep counts as bounded.
pub const BOUNDED_SLOPE: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case", deny_unknown_fields)]
pub enum KernelSpec {
    /// `k(v, v') = (m+1)|v|^m`, independent of the incoming velocity.
    PowerMaxwell { m: f64 },
    /// `|v|^m (1 + theta cos(pi v v')) / Z(v')`.
    PerturbedPowerMaxwell { m: f64, theta: f64 },
    /// `k = 1`; bounded below, so no invariant density in the purely diffuse case.
    Constant,
}

impl KernelSpec {
    pub fn validate(&self) -> Result<()> {
        match *self {
            KernelSpec::PowerMaxwell { m } if !(m >= 0.0 && m.is_finite()) => Err(
                Error::Parameter(format!("power-Maxwell exponent must be >= 0, got {m}")),
            ),
            KernelSpec::PerturbedPowerMaxwell { m, theta } => {
                if !(m >= 0.0 && m.is_finite()) {
                    Err(Error::Parameter(format!(
                        "kernel exponent must be >= 0, got {m}"
                    )))
                } else if !(0.0..1.0).contains(&theta) {
                    Err(Error::Parameter(format!(
                        "perturbation theta must lie in [0,1), got {theta}"
                    )))
                } else {
                    Ok(())
                }
            }
            _ => Ok(()),
        }
    }

    /// Unnormalized density `rho(v_out, v_in)`.
    fn density(&self, v_out: f64, v_in: f64) -> f64 {
        match *self {
            KernelSpec::PowerMaxwell { m } => (m + 1.0) * v_out.abs().powf(m),
            KernelSpec::PerturbedPowerMaxwell { m, theta } => {
                v_out.abs().powf(m) * (1.0 + theta * (std::f64::consts::PI * v_out * v_in).cos())
            }
            KernelSpec::Constant => 1.0,
        }
    }

    /// Does the column density depend on the incoming velocity?
    pub fn is_rank_one(&self) -> bool {
        !matches!(self, KernelSpec::PerturbedPowerMaxwell { theta, .. } if *theta != 0.0)
    }
}

/// Normalizer `Z(v_in) = int_0^1 rho(v, v_in) dv` by graded composite Gauss.
fn perturbed_normalizer(m: f64, theta: f64, v_in: f64) -> f64 {
    const PANELS: usize = 256;
    let (gx, gw) = crate::vgrid::gauss_legendre(8);
    let edge = |k: usize| (k as f64 / PANELS as f64).powi(3);
    let mut z = 0.0;
    for k in 0..PANELS {
        let (lo, hi) = (edge(k), edge(k + 1));
        let (mid, half) = (0.5 * (lo + hi), 0.5 * (hi - lo));
        for (x, w) in gx.iter().zip(&gw) {
            let v = mid + half * x;
            z += half * w * v.powf(m) * (1.0 + theta * (std::f64::consts::PI * v * v_in).cos());
        }
    }
    z
}

/// Kernel value `k(v_out, v_in)`; the velocities must lie on opposite half-intervals.
pub fn kernel_eval(spec: &KernelSpec, v_out: f64, v_in: f64) -> Result<f64> {
    spec.validate()?;
    let inside = |v: f64| v != 0.0 && v.abs() <= 1.0;
    if !inside(v_out) || !inside(v_in) || v_out.signum() == v_in.signum() {
        return Err(Error::Parameter(format!(
            "kernel arguments ({v_out}, {v_in}) must lie on opposite half-intervals of (-1,1)"
        )));
    }
    Ok(match *spec {
        KernelSpec::PerturbedPowerMaxwell { m, theta } => {
            spec.density(v_out, v_in) / perturbed_normalizer(m, theta, v_in)
        }
        _ => spec.density(v_out, v_in),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Wall {
    /// `x = -a`, operator `O1`.
    Left,
    /// `x = +a`, operator `O2`.
    Right,
}

impl Wall {
    /// Sign of the velocities arriving at this wall.
    pub fn incoming(self) -> Sign {
        match self {
            Wall::Left => Sign::Negative,
            Wall::Right => Sign::Positive,
        }
    }

    pub fn outgoing(self) -> Sign {
        self.incoming().flip()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoundaryOperatorSpec {
    pub side: Wall,
    /// Specular fraction; the diffuse fraction is `1 - alpha`.
    pub alpha: f64,
    pub kernel: KernelSpec,
}

impl BoundaryOperatorSpec {
    pub fn new(side: Wall, alpha: f64, kernel: KernelSpec) -> Result<Self> {
        let spec = Self {
            side,
            alpha,
            kernel,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn diffuse(side: Wall, kernel: KernelSpec) -> Self {
        Self {
            side,
            alpha: 0.0,
            kernel,
        }
    }

    pub fn specular(side: Wall) -> Self {
        Self {
            side,
            alpha: 1.0,
            kernel: KernelSpec::Constant,
        }
    }

    pub fn beta(&self) -> f64 {
        1.0 - self.alpha
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.alpha) {
            return Err(Error::Parameter(format!(
                "alpha must lie in [0,1], got {}",
                self.alpha
            )));
        }
        self.kernel.validate()
    }
}

/// A linear map between half-grid functions in nodal form, `(A f)_i = sum_j a_ij f_j`.
#[derive(Debug, Clone)]
pub struct GridMap<T: nalgebra::Scalar = f64> {
    pub matrix: DMatrix<T>,
    pub source: Arc<HalfGrid>,
    pub target: Arc<HalfGrid>,
}

impl GridMap<f64> {
    pub fn identity(grid: Arc<HalfGrid>) -> Self {
        let n = grid.n();
        Self {
            matrix: DMatrix::identity(n, n),
            source: grid.clone(),
            target: grid,
        }
    }

    /// `self ∘ inner` (apply `inner` first).
    pub fn after(&self, inner: &GridMap) -> Result<GridMap> {
        if *inner.target != *self.source {
            return Err(Error::Shape("composition across different grids".into()));
        }
        Ok(GridMap {
            matrix: &self.matrix * &inner.matrix,
            source: inner.source.clone(),
            target: self.target.clone(),
        })
    }

    /// Left-multiply by `|v|^p` on the target grid.
    pub fn times_speed_power(mut self, p: i32) -> Self {
        for (i, v) in self.target.speeds().iter().enumerate() {
            let s = v.powi(p);
            self.matrix.row_mut(i).scale_mut(s);
        }
        self
    }

    /// Right-multiply by `|v|^p` on the source grid.
    pub fn then_speed_power(mut self, p: i32) -> Self {
        for (j, v) in self.source.speeds().iter().enumerate() {
            let s = v.powi(p);
            self.matrix.column_mut(j).scale_mut(s);
        }
        self
    }

    /// `sum_i w_i a_ij / w_j`: mass sent to the target by a unit mass at source node `j`.
    pub fn column_masses(&self) -> Vec<f64> {
        let (ws, wt) = (self.source.weights(), self.target.weights());
        (0..self.matrix.ncols())
            .map(|j| {
                let col: f64 = (0..self.matrix.nrows())
                    .map(|i| wt[i] * self.matrix[(i, j)])
                    .sum();
                col / ws[j]
            })
            .collect()
    }

    pub fn apply(&self, f: &HalfGridVector) -> Result<HalfGridVector> {
        if *f.grid != *self.source {
            return Err(Error::Shape(
                "flux lives on a different grid than the operator source".into(),
            ));
        }
        let x = nalgebra::DVector::from_column_slice(&f.values);
        let y = &self.matrix * x;
        Ok(HalfGridVector {
            grid: self.target.clone(),
            values: y.as_slice().to_vec(),
        })
    }

    pub fn weighted_op_norm(&self, source_weight: i32, target_weight: i32) -> f64 {
        weighted_op_norm(
            &self.matrix,
            &self.source,
            &self.target,
            source_weight,
            target_weight,
        )
    }
}

/// Exact norm of a nodal matrix from `L1(|v|^{-j_s} dv)` to `L1(|v|^{-j_t} dv)`:
/// `max_j |v_j|^{j_s} / w_j * sum_i w_i |v_i|^{-j_t} |a_ij|`.
pub fn weighted_op_norm<T: nalgebra::Scalar + Amplitude>(
    matrix: &DMatrix<T>,
    source: &HalfGrid,
    target: &HalfGrid,
    source_weight: i32,
    target_weight: i32,
) -> f64 {
    let tw: Vec<f64> = target
        .weights()
        .iter()
        .zip(target.speeds())
        .map(|(w, v)| w * v.powi(-target_weight))
        .collect();
    (0..matrix.ncols())
        .map(|j| {
            let col: f64 = matrix
                .column(j)
                .iter()
                .zip(&tw)
                .map(|(a, t)| t * a.modulus())
                .sum();
            col * source.speeds()[j].powi(source_weight) / source.weights()[j]
        })
        .fold(0.0, f64::max)
}

/// A boundary operator discretized on a pair of mirror grids.
#[derive(Debug, Clone)]
pub struct DiscreteBoundaryOp {
    pub spec: BoundaryOperatorSpec,
    /// Kernel form, target × source.
    pub matrix: DMatrix<f64>,
    nodal: DMatrix<f64>,
    pub source_grid: Arc<HalfGrid>,
    pub target_grid: Arc<HalfGrid>,
}

impl DiscreteBoundaryOp {
    /// Nodal form `k_ij w_j`.
    pub fn nodal(&self) -> GridMap {
        GridMap {
            matrix: self.nodal.clone(),
            source: self.source_grid.clone(),
            target: self.target_grid.clone(),
        }
    }

    /// `sum_i w_i k_ij` per column.
    pub fn column_masses(&self) -> Vec<f64> {
        let w = self.target_grid.weights();
        (0..self.matrix.ncols())
            .map(|j| {
                self.matrix
                    .column(j)
                    .iter()
                    .zip(w)
                    .map(|(k, w)| k * w)
                    .sum()
            })
            .collect()
    }

    pub fn apply(&self, flux: &HalfGridVector) -> Result<HalfGridVector> {
        apply(self, flux)
    }
}

/// Discretize `alpha R + beta K` from `source` to its mirror `target`, with
/// columns renormalized to unit mass.
pub fn discretize(
    spec: &BoundaryOperatorSpec,
    source: Arc<HalfGrid>,
    target: Arc<HalfGrid>,
) -> Result<DiscreteBoundaryOp> {
    spec.validate()?;
    if !target.is_mirror_of(&source) {
        return Err(Error::Shape(
            "boundary operators need mirror source/target grids".into(),
        ));
    }
    if source.sign() != spec.side.incoming() {
        return Err(Error::Shape(format!(
            "{:?} wall operator must act on {:?} velocities",
            spec.side,
            spec.side.incoming()
        )));
    }
    let n = source.n();
    let (ws, wt) = (source.weights(), target.weights());
    let beta = spec.beta();
    let mut nodal = DMatrix::<f64>::zeros(n, n);
    for j in 0..n {
        let v_in = source.node(j);
        if beta > 0.0 {
            let col: Vec<f64> = (0..n)
                .map(|i| spec.kernel.density(target.node(i), v_in))
                .collect();
            let mass: f64 = col.iter().zip(wt).map(|(k, w)| k * w).sum();
            for i in 0..n {
                nodal[(i, j)] = beta * col[i] / mass * ws[j];
            }
        }
        // mirror node of j on the target grid is j itself
        nodal[(j, j)] += spec.alpha;
    }
    let mut matrix = nodal.clone();
    for (j, w) in ws.iter().enumerate() {
        matrix.column_mut(j).scale_mut(1.0 / w);
    }
    Ok(DiscreteBoundaryOp {
        spec: *spec,
        matrix,
        nodal,
        source_grid: source,
        target_grid: target,
    })
}

pub fn apply(op: &DiscreteBoundaryOp, flux: &HalfGridVector) -> Result<HalfGridVector> {
    if *flux.grid != *op.source_grid {
        return Err(Error::Shape(
            "flux lives on a different grid than the operator source".into(),
        ));
    }
    let mut out = vec![0.0; op.target_grid.n()];
    for (j, &h) in flux.values.iter().enumerate() {
        if h == 0.0 {
            continue;
        }
        for (o, k) in out.iter_mut().zip(op.nodal.column(j).iter()) {
            *o += k * h;
        }
    }
    Ok(HalfGridVector {
        grid: op.target_grid.clone(),
        values: out,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AssumptionGroup {
    /// `O1 |v|^-j O2 |v|^-(p-j)`, `0 <= j <= p <= k`.
    UniformBoundednessDerivatives,
    /// `|v|^-(k+1) O1 O2`, `|v|^-k O1 |v|^-1 O2`, `|v|^-k O1 O2 |v|^-1`.
    UniformlyBoundedDerivativesSuppl,
    /// `|v|^-(k+1) O1 |v|^(k+1)`.
    Hyp1,
    /// `|v|^-(k+1-p) O2 |v|^(k+1-p)`, `0 <= p <= k`.
    HypO2,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Trend {
    BoundedTrend,
    GrowingTrend,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AssumptionEntry {
    pub group: AssumptionGroup,
    pub formula: String,
    /// `(v_min, norm)` pairs in sweep order.
    pub norms: Vec<(f64, f64)>,
    /// Slope of `ln(norm)` against `ln(1/v_min)`.
    pub growth_exponent: f64,
    pub verdict: Trend,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AssumptionReport {
    pub k: u32,
    pub entries: Vec<AssumptionEntry>,
}

impl AssumptionReport {
    pub fn group(&self, group: AssumptionGroup) -> impl Iterator<Item = &AssumptionEntry> {
        self.entries.iter().filter(move |e| e.group == group)
    }

    pub fn entry(&self, formula: &str) -> Option<&AssumptionEntry> {
        self.entries.iter().find(|e| e.formula == formula)
    }
}

fn power_label(p: i32) -> String {
    match p {
        0 => String::new(),
        1 => "|v| ".into(),
        -1 => "|v|^-1 ".into(),
        p => format!("|v|^{p} "),
    }
}

/// The operator family of the structural hypotheses, as `(group, formula, matrix)`.
fn assumption_operators(
    o1: &GridMap,
    o2: &GridMap,
    k: u32,
) -> Result<Vec<(AssumptionGroup, String, GridMap)>> {
    use AssumptionGroup::*;
    let k = k as i32;
    let mut out = Vec::new();
    for p in 0..=k {
        for j in 0..=p {
            let inner = o2.clone().then_speed_power(-(p - j)).times_speed_power(-j);
            let m = o1.after(&inner)?;
            let f = format!("O1 {}O2 {}", power_label(-j), power_label(-(p - j)));
            out.push((UniformBoundednessDerivatives, f.trim_end().to_string(), m));
        }
    }
    let g0 = o1.after(o2)?;
    out.push((
        UniformlyBoundedDerivativesSuppl,
        format!("{}O1 O2", power_label(-(k + 1))),
        g0.clone().times_speed_power(-(k + 1)),
    ));
    out.push((
        UniformlyBoundedDerivativesSuppl,
        format!("{}O1 |v|^-1 O2", power_label(-k)),
        o1.after(&o2.clone().times_speed_power(-1))?
            .times_speed_power(-k),
    ));
    out.push((
        UniformlyBoundedDerivativesSuppl,
        format!("{}O1 O2 |v|^-1", power_label(-k)),
        g0.then_speed_power(-1).times_speed_power(-k),
    ));
    out.push((
        Hyp1,
        format!("{}O1 {}", power_label(-(k + 1)), power_label(k + 1))
            .trim_end()
            .to_string(),
        o1.clone()
            .then_speed_power(k + 1)
            .times_speed_power(-(k + 1)),
    ));
    for p in 0..=k {
        let e = k + 1 - p;
        out.push((
            HypO2,
            format!("{}O2 {}", power_label(-e), power_label(e))
                .trim_end()
                .to_string(),
            o2.clone().then_speed_power(e).times_speed_power(-e),
        ));
    }
    Ok(out)
}

/// Sweep `v_min` and report, for every operator in the structural hypothesis
/// list, its exact discrete `L1 -> L1` norm and the growth trend as `v_min -> 0`.
pub fn check_assumptions(
    o1: &BoundaryOperatorSpec,
    o2: &BoundaryOperatorSpec,
    k: u32,
    v_min_sequence: &[f64],
    n_v: usize,
    grading_q: f64,
) -> Result<AssumptionReport> {
    if k < 1 {
        return Err(Error::Parameter("smoothness index k must be >= 1".into()));
    }
    if v_min_sequence.len() < 2 || v_min_sequence.windows(2).any(|w| w[1] >= w[0]) {
        return Err(Error::Parameter(
            "v_min sequence must be strictly decreasing with >= 2 entries".into(),
        ));
    }
    let mut per_vmin = Vec::with_capacity(v_min_sequence.len());
    for &v_min in v_min_sequence {
        let (pos, neg) = grid_pair(n_v, v_min, grading_q)?;
        let d1 = discretize(o1, neg.clone(), pos.clone())?.nodal();
        let d2 = discretize(o2, pos, neg)?.nodal();
        let ops = assumption_operators(&d1, &d2, k)?;
        per_vmin.push(
            ops.into_iter()
                .map(|(g, f, m)| (g, f, m.weighted_op_norm(0, 0)))
                .collect::<Vec<_>>(),
        );
    }
    let n_ops = per_vmin[0].len();
    let log_inv: Vec<f64> = v_min_sequence.iter().map(|v| (1.0 / v).ln()).collect();
    let entries = (0..n_ops)
        .map(|e| {
            let (group, formula, _) = per_vmin[0][e].clone();
            let norms: Vec<(f64, f64)> = v_min_sequence
                .iter()
                .zip(&per_vmin)
                .map(|(&v, row)| (v, row[e].2))
                .collect();
            let logs: Vec<f64> = norms
                .iter()
                .map(|(_, n)| n.max(f64::MIN_POSITIVE).ln())
                .collect();
            let slope = least_squares(&log_inv, &logs).slope;
            let verdict = if slope < BOUNDED_SLOPE {
                Trend::BoundedTrend
            } else {
                Trend::GrowingTrend
            };
            AssumptionEntry {
                group,
                formula,
                norms,
                growth_exponent: slope,
                verdict,
            }
        })
        .collect();
    Ok(AssumptionReport { k, entries })
}
