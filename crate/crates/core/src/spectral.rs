//! Perron pair of `G0 = O1 O2`, the invariant density and related diagnostics.

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::boundary::{DiscreteBoundaryOp, GridMap};
use crate::error::{Error, Result};
use crate::phase::PhaseDensity;
use crate::scenario::Scenario;
use crate::vgrid::HalfGridVector;

pub const DEFAULT_TOL: f64 = 1e-12;
pub const DEFAULT_MAX_ITER: usize = 100_000;
/// Relative change of the last pair in a truncation sweep below which the
/// inverse-speed moment counts as converged.
pub const CAUCHY_TOL: f64 = 0.01;

/// `G0 = O1 O2` in nodal form on the positive half-grid.
pub fn g0(o1: &DiscreteBoundaryOp, o2: &DiscreteBoundaryOp) -> Result<GridMap> {
    o1.nodal().after(&o2.nodal())
}

/// `G0~ = O2 O1` on the negative half-grid.
pub fn g0_tilde(o1: &DiscreteBoundaryOp, o2: &DiscreteBoundaryOp) -> Result<GridMap> {
    o2.nodal().after(&o1.nodal())
}

/// Power iteration from the uniform density. Returns `(r_sigma, h0)` with
/// `int h0 = 1`.
pub fn leading_eig(g: &GridMap, tol: f64, max_iter: usize) -> Result<(f64, HalfGridVector)> {
    let grid = g.source.clone();
    if *grid != *g.target {
        return Err(Error::Shape(
            "power iteration needs a map from a grid to itself".into(),
        ));
    }
    if g.matrix.iter().any(|&x| x < 0.0) {
        return Err(Error::Domain(
            "power iteration needs a nonnegative matrix".into(),
        ));
    }
    let w = grid.weights().to_vec();
    let total: f64 = w.iter().sum();
    let mut h = nalgebra::DVector::from_element(grid.n(), 1.0 / total);
    let mut residual = f64::INFINITY;
    for _ in 0..max_iter {
        let next = &g.matrix * &h;
        let mass: f64 = next.iter().zip(&w).map(|(x, w)| x * w).sum();
        let r = mass / h.iter().zip(&w).map(|(x, w)| x * w).sum::<f64>();
        let next = next / mass;
        residual = next
            .iter()
            .zip(h.iter())
            .zip(&w)
            .map(|((a, b), w)| w * (a - b).abs())
            .sum();
        h = next;
        if residual < tol {
            if (r - 1.0).abs() >= 1e-10 {
                return Err(Error::InternalConsistency(format!(
                    "leading eigenvalue {r} of a stochastic operator differs from 1"
                )));
            }
            return Ok((
                r,
                HalfGridVector {
                    grid,
                    values: h.as_slice().to_vec(),
                },
            ));
        }
    }
    Err(Error::Convergence {
        iterations: max_iter,
        residual,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Integrability {
    ConvergentTrend,
    DivergentTrend,
    Inconclusive,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct IntegrabilityReport {
    /// `(v_min, int h0/v + int h0~/|v|)`.
    pub sweep: Vec<(f64, f64)>,
    pub verdict: Integrability,
}

/// Trend of the inverse-speed moment as `v_min` decreases.
pub fn integrability_verdict(values: &[f64]) -> Integrability {
    let n = values.len();
    if n < 2 {
        return Integrability::Inconclusive;
    }
    let (prev, last) = (values[n - 2], values[n - 1]);
    if ((last - prev) / last).abs() < CAUCHY_TOL {
        Integrability::ConvergentTrend
    } else if values.windows(2).all(|w| w[1] > w[0]) {
        Integrability::DivergentTrend
    } else {
        Integrability::Inconclusive
    }
}

#[derive(Debug, Clone)]
pub struct EquilibriumProfile {
    pub r_sigma: f64,
    pub h0: HalfGridVector,
    pub h0_tilde: HalfGridVector,
    pub integrability: IntegrabilityReport,
    pub psi0: Option<PhaseDensity<f64>>,
    /// `G0` is the identity: every density is invariant and `h0` is just the start vector.
    pub degenerate: bool,
}

impl EquilibriumProfile {
    pub fn psi0(&self) -> Result<&PhaseDensity<f64>> {
        self.psi0.as_ref().ok_or_else(|| {
            Error::State("no invariant density: the inverse-speed moment diverges".into())
        })
    }
}

fn inverse_speed_moment(sc: &Scenario) -> Result<f64> {
    let (_, h0) = leading_eig(&g0(&sc.o1, &sc.o2)?, DEFAULT_TOL, DEFAULT_MAX_ITER)?;
    let h0t = sc.o2.apply(&h0)?;
    Ok(h0.weighted_norm(1) + h0t.weighted_norm(1))
}

/// Build `h0~ = O2 h0`, probe `int h0/v + int h0~/|v|` over the truncation
/// sweep (re-solving on each grid), and on a convergent trend assemble
/// `psi0 = h0/v, h0~/|v|`, constant in `x`, normalized over the slab.
pub fn invariant_density(
    sc: &Scenario,
    r_sigma: f64,
    h0: HalfGridVector,
    v_min_sweep: &[f64],
) -> Result<EquilibriumProfile> {
    if *h0.grid != *sc.pos {
        return Err(Error::Shape(
            "h0 must live on the scenario's positive grid".into(),
        ));
    }
    let h0_tilde = sc.o2.apply(&h0)?;
    let here = h0.weighted_norm(1) + h0_tilde.weighted_norm(1);

    let mut sweep: Vec<(f64, f64)> = v_min_sweep
        .par_iter()
        .map(|&v| {
            if v == sc.grid.v_min {
                Ok((v, here))
            } else {
                Ok((v, inverse_speed_moment(&sc.with_v_min(v)?)?))
            }
        })
        .collect::<Result<_>>()?;
    sweep.sort_by(|a, b| b.0.total_cmp(&a.0));
    let values: Vec<f64> = sweep.iter().map(|s| s.1).collect();
    let verdict = integrability_verdict(&values);

    let psi0 = (verdict == Integrability::ConvergentTrend).then(|| {
        let c = 1.0 / (2.0 * sc.a * here);
        let mut psi = sc.zeros::<f64>();
        let nv = sc.pos.n();
        for ix in 0..sc.xgrid.n() {
            for j in 0..nv {
                let v = sc.pos.speeds()[j];
                psi.positive[ix * nv + j] = c * h0.values[j] / v;
                psi.negative[ix * nv + j] = c * h0_tilde.values[j] / v;
            }
        }
        psi
    });
    let n = sc.pos.n();
    let degenerate = g0(&sc.o1, &sc.o2)?.matrix == DMatrix::identity(n, n);
    Ok(EquilibriumProfile {
        r_sigma,
        h0,
        h0_tilde,
        integrability: IntegrabilityReport { sweep, verdict },
        psi0,
        degenerate,
    })
}

/// Default truncation sweep: the scenario's own `v_min` and two decades above.
pub fn default_sweep(v_min: f64) -> Vec<f64> {
    vec![v_min * 100.0, v_min * 10.0, v_min]
}

/// Full pipeline: `G0`, Perron pair, invariant density.
pub fn equilibrium(sc: &Scenario, v_min_sweep: &[f64]) -> Result<EquilibriumProfile> {
    let (r, h0) = leading_eig(&g0(&sc.o1, &sc.o2)?, DEFAULT_TOL, DEFAULT_MAX_ITER)?;
    invariant_density(sc, r, h0, v_min_sweep)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct IrreducibilityReport {
    /// Smallest `n <= n_max` with `G0^n` entrywise positive.
    pub positive_power: Option<usize>,
    /// `O2` maps the all-ones flux to an entrywise positive flux.
    pub o2_strictly_positive: bool,
    pub irreducible: bool,
}

pub fn irreducibility_check(
    g: &GridMap,
    o2: &DiscreteBoundaryOp,
    n_max: usize,
) -> IrreducibilityReport {
    let pattern = g.matrix.map(|x| if x > 0.0 { 1.0 } else { 0.0 });
    let mut power = pattern.clone();
    let mut positive_power = None;
    for n in 1..=n_max {
        if power.iter().all(|&x| x > 0.0) {
            positive_power = Some(n);
            break;
        }
        power = (&power * &pattern).map(|x: f64| x.min(1.0));
    }
    let ones = HalfGridVector::from_fn(o2.source_grid.clone(), |_| 1.0);
    let o2_strictly_positive = o2
        .apply(&ones)
        .map(|f| f.values.iter().all(|&x| x > 0.0))
        .unwrap_or(false);
    IrreducibilityReport {
        positive_power,
        o2_strictly_positive,
        irreducible: positive_power.is_some(),
    }
}

/// Modulus of the second largest eigenvalue of `G0`, sorted by modulus.
/// A finite-grid stand-in for the essential spectral radius, not the same quantity.
pub fn second_eigenvalue_modulus(g: &GridMap) -> f64 {
    let mut moduli: Vec<f64> = g
        .matrix
        .complex_eigenvalues()
        .iter()
        .map(|z| z.norm())
        .collect();
    moduli.sort_by(|a, b| b.total_cmp(a));
    moduli.get(1).copied().unwrap_or(0.0)
}

/// L1 distance between the normalized Perron vector of `O2 O1` and `O2 h0`.
pub fn mirror_consistency(
    o1: &DiscreteBoundaryOp,
    o2: &DiscreteBoundaryOp,
    h0: &HalfGridVector,
) -> Result<f64> {
    let (_, ht) = leading_eig(&g0_tilde(o1, o2)?, DEFAULT_TOL, DEFAULT_MAX_ITER)?;
    let mapped = o2.apply(h0)?;
    let m = mapped.integral();
    Ok(ht
        .values
        .iter()
        .zip(&mapped.values)
        .zip(ht.grid.weights())
        .map(|((a, b), w)| w * (a - b / m).abs())
        .sum())
}
