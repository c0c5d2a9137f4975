//! The wall-to-wall transfer operator `G_lambda`, `(1 - G_lambda)^-1` and
//! scans of both along the imaginary axis, plus the full transport resolvent.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64 as C64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::analysis::least_squares;
use crate::boundary::{weighted_op_norm, DiscreteBoundaryOp};
use crate::error::{Error, Result};
use crate::phase::PhaseDensity;
use crate::scalar::Amplitude;
use crate::scenario::Scenario;
use crate::vgrid::{HalfGrid, HalfGridVector, Sign};

/// Condition number of `1 - G` above which the solve is refused.
pub const MAX_CONDITION: f64 = 1e12;
/// Relative residual of the left-wall relation tolerated after reconstruction.
pub const BOUNDARY_TOL: f64 = 1e-8;

/// `G_lambda` in nodal form on one half-grid.
#[derive(Debug, Clone)]
pub struct ComplexBoundaryOperator {
    pub matrix: DMatrix<C64>,
    pub lambda: C64,
    pub a: f64,
    pub grid: Arc<HalfGrid>,
}

impl ComplexBoundaryOperator {
    /// Exact `L1 -> L1` norm.
    pub fn norm(&self) -> f64 {
        weighted_op_norm(&self.matrix, &self.grid, &self.grid, 0, 0)
    }
}

fn check_half_plane(lambda: C64) -> Result<()> {
    if lambda.re < 0.0 || !lambda.re.is_finite() || !lambda.im.is_finite() {
        return Err(Error::Domain(format!("need Re lambda >= 0, got {lambda}")));
    }
    Ok(())
}

/// `exp(-2 lambda a / |v_i|)` per node.
pub fn attenuation(grid: &HalfGrid, a: f64, lambda: C64) -> Vec<C64> {
    grid.speeds()
        .iter()
        .map(|v| (-2.0 * a * lambda / v).exp())
        .collect()
}

/// `outer diag(e) inner diag(e)` for real `outer`, `inner`.
fn sandwich(outer: &DMatrix<f64>, inner: &DMatrix<f64>, e: &[C64]) -> DMatrix<C64> {
    let n = e.len();
    let mut br = DMatrix::<f64>::zeros(n, n);
    let mut bi = DMatrix::<f64>::zeros(n, n);
    for j in 0..n {
        for i in 0..n {
            let z = e[i] * e[j] * inner[(i, j)];
            br[(i, j)] = z.re;
            bi[(i, j)] = z.im;
        }
    }
    let (gr, gi) = (outer * br, outer * bi);
    DMatrix::from_fn(n, n, |i, j| C64::new(gr[(i, j)], gi[(i, j)]))
}

/// `G_lambda = O1 e O2 e` with `e = exp(-2 lambda a / |v|)`, on the positive grid.
pub fn g_lambda(
    o1: &DiscreteBoundaryOp,
    o2: &DiscreteBoundaryOp,
    a: f64,
    lambda: C64,
) -> Result<ComplexBoundaryOperator> {
    check_half_plane(lambda)?;
    let grid = o1.target_grid.clone();
    let e = attenuation(&grid, a, lambda);
    let matrix = sandwich(&o1.nodal().matrix, &o2.nodal().matrix, &e);
    Ok(ComplexBoundaryOperator {
        matrix,
        lambda,
        a,
        grid,
    })
}

/// `G~_lambda = O2 e O1 e`, on the negative grid.
pub fn g_lambda_tilde(
    o1: &DiscreteBoundaryOp,
    o2: &DiscreteBoundaryOp,
    a: f64,
    lambda: C64,
) -> Result<ComplexBoundaryOperator> {
    check_half_plane(lambda)?;
    let grid = o2.target_grid.clone();
    let e = attenuation(&grid, a, lambda);
    let matrix = sandwich(&o2.nodal().matrix, &o1.nodal().matrix, &e);
    Ok(ComplexBoundaryOperator {
        matrix,
        lambda,
        a,
        grid,
    })
}

fn one_norm(m: &DMatrix<C64>) -> f64 {
    m.column_iter()
        .map(|c| c.iter().map(|z| z.norm()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// `(1 - G)^-1` and its exact `L1` operator norm.
pub fn inverse_one_minus_g(gl: &ComplexBoundaryOperator) -> Result<(DMatrix<C64>, f64)> {
    let n = gl.matrix.nrows();
    let a = DMatrix::<C64>::identity(n, n) - &gl.matrix;
    let inv = a.clone().lu().try_inverse().ok_or(Error::Singular {
        condition: f64::INFINITY,
    })?;
    let condition = one_norm(&a) * one_norm(&inv);
    if !(condition <= MAX_CONDITION) {
        return Err(Error::Singular { condition });
    }
    let norm = weighted_op_norm(&inv, &gl.grid, &gl.grid, 0, 0);
    Ok((inv, norm))
}

/// Largest eigenvalue modulus by a dense complex Schur decomposition.
pub fn spectral_radius_g(gl: &ComplexBoundaryOperator) -> Result<f64> {
    let schur =
        nalgebra::Schur::try_new(gl.matrix.clone(), 1e-15, 10_000).ok_or(Error::Convergence {
            iterations: 10_000,
            residual: f64::NAN,
        })?;
    let eig = schur.eigenvalues().ok_or(Error::Convergence {
        iterations: 10_000,
        residual: f64::NAN,
    })?;
    Ok(eig.iter().map(|z| z.norm()).fold(0.0, f64::max))
}

/// Largest eigenvalue modulus of `G_lambda` by power iteration, applying
/// `O1 e O2 e` factor by factor without forming the product. Needs a
/// strictly dominant eigenvalue modulus to converge.
pub fn spectral_radius_power(
    o1: &DiscreteBoundaryOp,
    o2: &DiscreteBoundaryOp,
    a: f64,
    lambda: C64,
    tol: f64,
    max_iter: usize,
) -> Result<f64> {
    check_half_plane(lambda)?;
    let grid = o1.target_grid.clone();
    let e = DVector::from_vec(attenuation(&grid, a, lambda));
    let (n1, n2) = (o1.nodal().matrix, o2.nodal().matrix);
    let w = grid.weights();
    let norm = |h: &DVector<C64>| h.iter().zip(w).map(|(z, w)| w * z.norm()).sum::<f64>();
    let real_apply = |m: &DMatrix<f64>, h: &DVector<C64>| {
        let re = m * h.map(|z| z.re);
        let im = m * h.map(|z| z.im);
        re.zip_map(&im, C64::new)
    };
    let apply = |h: &DVector<C64>| {
        let x = real_apply(&n2, &h.component_mul(&e));
        real_apply(&n1, &x.component_mul(&e))
    };
    let mut h = DVector::from_element(grid.n(), C64::new(1.0, 0.0));
    h /= C64::new(norm(&h), 0.0);
    let mut r_prev = f64::NAN;
    for it in 0..max_iter {
        let next = apply(&h);
        let r = norm(&next);
        if r == 0.0 {
            return Ok(0.0);
        }
        h = next / C64::new(r, 0.0);
        if it > 1 && (r - r_prev).abs() <= tol * r {
            return Ok(r);
        }
        r_prev = r;
    }
    Err(Error::Convergence {
        iterations: max_iter,
        residual: f64::NAN,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScanQuantity {
    NormG,
    NormInverse,
    SpectralRadius,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScanSeries {
    pub quantity: ScanQuantity,
    /// `(s, value)` sorted by `s`.
    pub points: Vec<(f64, f64)>,
    /// Points where the solve was refused, with the reason.
    pub failures: Vec<(f64, String)>,
    pub a: f64,
    pub v_min: f64,
    pub n_v: usize,
    pub grading_q: f64,
}

impl ScanSeries {
    pub fn s(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.0).collect()
    }

    pub fn values(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.1).collect()
    }
}

fn scan_point(sc: &Scenario, s: f64, which: ScanQuantity) -> Result<f64> {
    let gl = g_lambda(&sc.o1, &sc.o2, sc.a, C64::new(0.0, s))?;
    match which {
        ScanQuantity::NormG => Ok(gl.norm()),
        ScanQuantity::NormInverse => inverse_one_minus_g(&gl).map(|(_, n)| n),
        ScanQuantity::SpectralRadius => spectral_radius_g(&gl),
    }
}

/// Evaluate `which` at `lambda = i s` for each `s`, in parallel. Numerical
/// failures are recorded per point; parameter problems abort the scan.
pub fn scan_imaginary_axis(
    sc: &Scenario,
    s_values: &[f64],
    which: ScanQuantity,
) -> Result<ScanSeries> {
    if let Some(s) = s_values.iter().find(|s| !s.is_finite()) {
        return Err(Error::Parameter(format!(
            "scan point s = {s} is not finite"
        )));
    }
    if which == ScanQuantity::NormInverse {
        if let Some(i) = s_values.iter().position(|&s| s == 0.0) {
            return Err(Error::Parameter(format!(
                "scan point #{i} is s = 0, where 1 - G is singular; exclude it from a norm_inverse scan"
            )));
        }
    }
    let results: Vec<(f64, Result<f64>)> = s_values
        .par_iter()
        .map(|&s| (s, scan_point(sc, s, which)))
        .collect();
    let mut points = Vec::new();
    let mut failures = Vec::new();
    for (s, r) in results {
        match r {
            Ok(v) => points.push((s, v)),
            Err(e) if e.is_numerical() => failures.push((s, e.to_string())),
            Err(e) => return Err(e),
        }
    }
    points.sort_by(|a, b| a.0.total_cmp(&b.0));
    failures.sort_by(|a, b| a.0.total_cmp(&b.0));
    Ok(ScanSeries {
        quantity: which,
        points,
        failures,
        a: sc.a,
        v_min: sc.grid.v_min,
        n_v: sc.grid.n_v,
        grading_q: sc.grid.grading_q,
    })
}

/// Power-law fit `y ~ constant * |s|^exponent`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PowerFit {
    pub exponent: f64,
    pub constant: f64,
    pub stderr: f64,
    pub r_squared: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BoundReport {
    pub quantity: ScanQuantity,
    /// `(eta, sup over |s| >= eta)`.
    pub sup_away: Vec<(f64, f64)>,
    /// Slope of `ln value` against `ln(1/|s|)` on the small-`s` window.
    pub blowup_exponent: f64,
    pub blowup_constant: f64,
    pub blowup_stderr: f64,
    /// `1 - value ~ c |s|^p` on the window, for contraction-type quantities.
    pub gap: Option<PowerFit>,
    pub window: (f64, f64),
    pub n_points: usize,
}

pub const MIN_BOUND_POINTS: usize = 5;

pub fn fit_bounds(
    series: &ScanSeries,
    eta_list: &[f64],
    small_s_window: (f64, f64),
) -> Result<BoundReport> {
    let (lo, hi) = small_s_window;
    let window: Vec<(f64, f64)> = series
        .points
        .iter()
        .copied()
        .filter(|(s, _)| s.abs() >= lo && s.abs() <= hi)
        .collect();
    if window.len() < MIN_BOUND_POINTS {
        return Err(Error::Parameter(format!(
            "{} scan points in [{lo}, {hi}], need at least {MIN_BOUND_POINTS}",
            window.len()
        )));
    }
    if let Some((s, v)) = window.iter().find(|(_, v)| !(*v > 0.0)) {
        return Err(Error::Data(format!("nonpositive value {v} at s = {s}")));
    }
    let lx: Vec<f64> = window.iter().map(|(s, _)| (1.0 / s.abs()).ln()).collect();
    let ly: Vec<f64> = window.iter().map(|(_, v)| v.ln()).collect();
    let fit = least_squares(&lx, &ly);

    let gap = match series.quantity {
        ScanQuantity::NormInverse => None,
        _ if window.iter().all(|(_, v)| *v < 1.0) => {
            let gx: Vec<f64> = window.iter().map(|(s, _)| s.abs().ln()).collect();
            let gy: Vec<f64> = window.iter().map(|(_, v)| (1.0 - v).ln()).collect();
            let g = least_squares(&gx, &gy);
            Some(PowerFit {
                exponent: g.slope,
                constant: g.intercept.exp(),
                stderr: g.slope_stderr,
                r_squared: g.r_squared,
            })
        }
        _ => None,
    };
    let sup_away = eta_list
        .iter()
        .map(|&eta| {
            let sup = series
                .points
                .iter()
                .filter(|(s, _)| s.abs() >= eta)
                .map(|p| p.1)
                .fold(f64::NEG_INFINITY, f64::max);
            (eta, sup)
        })
        .collect();
    Ok(BoundReport {
        quantity: series.quantity,
        sup_away,
        blowup_exponent: fit.slope,
        blowup_constant: fit.intercept.exp(),
        blowup_stderr: fit.slope_stderr,
        gap,
        window: small_s_window,
        n_points: window.len(),
    })
}

/// Which wall flux is solved for first.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FluxClosure {
    /// Solve `(1 - G) h+_{-a} = ...` at the left wall.
    #[default]
    Left,
    /// Solve `(1 - G~) h-_a = ...` at the right wall.
    Right,
}

#[derive(Debug, Clone)]
pub struct ResolventSolution {
    pub f: PhaseDensity<C64>,
    /// Outgoing flux at the left wall, positive grid.
    pub h_left: HalfGridVector<C64>,
    /// Outgoing flux at the right wall, negative grid.
    pub h_right: HalfGridVector<C64>,
    /// `||h+_{-a} - O1 h-_{-a}||` with both traces read off `f`.
    pub boundary_residual: f64,
}

/// `(1 - e^-z)/z` and `(z - 1 + e^-z)/z^2`.
fn phi12(z: C64) -> (C64, C64) {
    if z.norm() < 0.1 {
        // 1/(k+1)! and 1/(k+2)! series in -z
        let (mut p1, mut p2) = (C64::new(0.0, 0.0), C64::new(0.0, 0.0));
        let mut term = C64::new(1.0, 0.0);
        let mut fact1 = 1.0;
        for k in 0..14 {
            fact1 *= (k + 1) as f64;
            let fact2 = fact1 * (k + 2) as f64;
            p1 += term / fact1;
            p2 += term / fact2;
            term *= -z;
        }
        (p1, p2)
    } else {
        let e = (-z).exp();
        ((1.0 - e) / z, (z - 1.0 + e) / (z * z))
    }
}

/// Per-velocity exponential integrals of a piecewise-linear `g` in `x`.
///
/// `forward[ix] = int_{-a}^{x_ix} exp(-lambda (x_ix - y)/|v|) g(y) dy` and
/// `backward[ix] = int_{x_ix}^{a} exp(-lambda (y - x_ix)/|v|) g(y) dy`.
fn duhamel(
    xs_h: f64,
    lambda: C64,
    speed: f64,
    g: impl Fn(usize) -> C64,
    n_x: usize,
    forward: bool,
) -> Vec<C64> {
    let z = lambda * xs_h / speed;
    let (p1, p2) = phi12(z);
    let decay = (-z).exp();
    let mut out = vec![C64::new(0.0, 0.0); n_x];
    if forward {
        for i in 0..n_x - 1 {
            let cell = (g(i) * (p1 - p2) + g(i + 1) * p2) * xs_h;
            out[i + 1] = decay * out[i] + cell;
        }
    } else {
        for i in (0..n_x - 1).rev() {
            let cell = (g(i) * p2 + g(i + 1) * (p1 - p2)) * xs_h;
            out[i] = decay * out[i + 1] + cell;
        }
    }
    out
}

fn solve_dense(m: DMatrix<C64>, rhs: DVector<C64>) -> Result<DVector<C64>> {
    let n = m.nrows();
    let a = DMatrix::<C64>::identity(n, n) - m;
    let inv = a.clone().lu().try_inverse().ok_or(Error::Singular {
        condition: f64::INFINITY,
    })?;
    let condition = one_norm(&a) * one_norm(&inv);
    if !(condition <= MAX_CONDITION) {
        return Err(Error::Singular { condition });
    }
    Ok(inv * rhs)
}

fn real_times(m: &DMatrix<f64>, h: &DVector<C64>) -> DVector<C64> {
    let re = m * h.map(|z| z.re);
    let im = m * h.map(|z| z.im);
    re.zip_map(&im, C64::new)
}

/// `f = (lambda - T)^-1 g` together with the outgoing wall fluxes.
pub fn transport_resolvent<T: Amplitude>(
    sc: &Scenario,
    lambda: C64,
    g: &PhaseDensity<T>,
) -> Result<ResolventSolution> {
    transport_resolvent_with(sc, lambda, g, FluxClosure::Left)
}

pub fn transport_resolvent_with<T: Amplitude>(
    sc: &Scenario,
    lambda: C64,
    g: &PhaseDensity<T>,
    closure: FluxClosure,
) -> Result<ResolventSolution> {
    check_half_plane(lambda)?;
    if lambda == C64::new(0.0, 0.0) {
        return Err(Error::Singular {
            condition: f64::INFINITY,
        });
    }
    let probe = sc.zeros::<f64>();
    if !probe.same_layout(g) {
        return Err(Error::Shape(
            "datum is not sampled on the scenario grid".into(),
        ));
    }
    let (nx, nv) = (sc.xgrid.n(), sc.pos.n());
    let h = sc.xgrid.spacing();
    let speeds = sc.pos.speeds();

    // forward sweeps for v > 0, backward for v < 0
    let fwd: Vec<Vec<C64>> = (0..nv)
        .into_par_iter()
        .map(|j| {
            duhamel(
                h,
                lambda,
                speeds[j],
                |i| g.positive[i * nv + j].to_complex(),
                nx,
                true,
            )
        })
        .collect();
    let bwd: Vec<Vec<C64>> = (0..nv)
        .into_par_iter()
        .map(|j| {
            duhamel(
                h,
                lambda,
                speeds[j],
                |i| g.negative[i * nv + j].to_complex(),
                nx,
                false,
            )
        })
        .collect();
    let m_plus = DVector::from_iterator(nv, fwd.iter().map(|d| d[nx - 1]));
    let m_minus = DVector::from_iterator(nv, bwd.iter().map(|d| d[0]));

    let e = DVector::from_vec(attenuation(&sc.pos, sc.a, lambda));
    let (n1, n2) = (sc.o1.nodal().matrix, sc.o2.nodal().matrix);
    let (h_left, h_right) = match closure {
        FluxClosure::Left => {
            let rhs = real_times(
                &n1,
                &(real_times(&n2, &m_plus).component_mul(&e) + &m_minus),
            );
            let hl = solve_dense(sandwich(&n1, &n2, e.as_slice()), rhs)?;
            let hr = real_times(&n2, &(hl.component_mul(&e) + &m_plus));
            (hl, hr)
        }
        FluxClosure::Right => {
            let rhs = real_times(
                &n2,
                &(real_times(&n1, &m_minus).component_mul(&e) + &m_plus),
            );
            let hr = solve_dense(sandwich(&n2, &n1, e.as_slice()), rhs)?;
            let hl = real_times(&n1, &(hr.component_mul(&e) + &m_minus));
            (hl, hr)
        }
    };

    let mut f = sc.zeros::<C64>();
    let xs = sc.xgrid.nodes();
    let a = sc.a;
    for j in 0..nv {
        let v = speeds[j];
        for ix in 0..nx {
            let x = xs[ix];
            f.positive[ix * nv + j] = ((-lambda * (x + a) / v).exp() * h_left[j] + fwd[j][ix]) / v;
            f.negative[ix * nv + j] = ((-lambda * (a - x) / v).exp() * h_right[j] + bwd[j][ix]) / v;
        }
    }

    // left-wall traces of the reconstruction
    let out_flux =
        DVector::from_iterator(nv, (0..nv).map(|j| f.get(Sign::Positive, 0, j) * speeds[j]));
    let in_flux =
        DVector::from_iterator(nv, (0..nv).map(|j| f.get(Sign::Negative, 0, j) * speeds[j]));
    let mismatch = &out_flux - real_times(&n1, &in_flux);
    let w = sc.pos.weights();
    let l1 = |v: &DVector<C64>| v.iter().zip(w).map(|(z, w)| w * z.norm()).sum::<f64>();
    let boundary_residual = l1(&mismatch);
    let scale = l1(&out_flux).max(1.0);
    if !(boundary_residual <= BOUNDARY_TOL * scale) {
        return Err(Error::InternalConsistency(format!(
            "reconstructed density violates the left-wall relation by {boundary_residual:e}"
        )));
    }
    Ok(ResolventSolution {
        f,
        h_left: HalfGridVector {
            grid: sc.pos.clone(),
            values: h_left.as_slice().to_vec(),
        },
        h_right: HalfGridVector {
            grid: sc.neg.clone(),
            values: h_right.as_slice().to_vec(),
        },
        boundary_residual,
    })
}

/// Finite-difference weights for the `order`-th derivative at 0 on `nodes`.
fn fornberg(order: usize, nodes: &[f64]) -> Vec<f64> {
    let n = nodes.len();
    let mut c = vec![vec![0.0; order + 1]; n];
    c[0][0] = 1.0;
    let mut c1 = 1.0;
    let mut c4 = nodes[0];
    for i in 1..n {
        let mn = i.min(order);
        let mut c2 = 1.0;
        let c5 = c4;
        c4 = nodes[i];
        for j in 0..i {
            let c3 = nodes[i] - nodes[j];
            c2 *= c3;
            if j == i - 1 {
                for k in (1..=mn).rev() {
                    c[i][k] = c1 * (k as f64 * c[i - 1][k - 1] - c5 * c[i - 1][k]) / c2;
                }
                c[i][0] = -c1 * c5 * c[i - 1][0] / c2;
            }
            for k in (1..=mn).rev() {
                c[j][k] = (c4 * c[j][k] - k as f64 * c[j][k - 1]) / c3;
            }
            c[j][0] = c4 * c[j][0] / c3;
        }
        c1 = c2;
    }
    c.iter().map(|row| row[order]).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DerivativeNorm {
    pub j: usize,
    /// `||d^j F_g / ds^j||_L1`, Richardson-extrapolated.
    pub value: f64,
    /// Distance between the extrapolated and the finer raw estimate.
    pub error: f64,
}

/// Central-difference norms of `d^j/ds^j (is - T)^-1 g` for `j = 0..=j_max`.
pub fn f_derivative_norms<T: Amplitude>(
    sc: &Scenario,
    g: &PhaseDensity<T>,
    s: f64,
    j_max: usize,
) -> Result<Vec<DerivativeNorm>> {
    if s == 0.0 || !s.is_finite() {
        return Err(Error::Parameter(format!(
            "derivative norms need s != 0, got {s}"
        )));
    }
    let delta = (1e-3 * s.abs()).max(1e-4);
    let m = j_max.max(1) as i64;
    if (m as f64) * delta >= s.abs() {
        return Err(Error::Parameter(format!(
            "difference stencil around s = {s} with step {delta} touches s = 0"
        )));
    }
    // offsets in units of delta/2: even ones are the coarse stencil
    let offsets: Vec<i64> = (-2 * m..=2 * m).collect();
    let samples: Vec<PhaseDensity<C64>> = offsets
        .par_iter()
        .map(|&k| {
            transport_resolvent(sc, C64::new(0.0, s + 0.5 * delta * k as f64), g).map(|r| r.f)
        })
        .collect::<Result<_>>()?;
    let centre = &samples[(2 * m) as usize];

    let combine = |step: f64, stride: i64, order: usize| -> PhaseDensity<C64> {
        let idx: Vec<i64> = (-m..=m).collect();
        let nodes: Vec<f64> = idx.iter().map(|&k| k as f64).collect();
        let w = fornberg(order, &nodes);
        let mut acc = centre.scaled(0.0);
        for (k, wk) in idx.iter().zip(&w) {
            let sample = &samples[(2 * m + k * stride) as usize];
            acc.axpy(C64::new(wk / step.powi(order as i32), 0.0), sample)
                .expect("shared layout");
        }
        acc
    };

    let mut out = vec![DerivativeNorm {
        j: 0,
        value: centre.l1_norm(),
        error: 0.0,
    }];
    for j in 1..=j_max {
        let coarse = combine(delta, 2, j);
        let fine = combine(0.5 * delta, 1, j);
        let points = 2 * m as usize + 1;
        let p = if (points - j).is_multiple_of(2) {
            points - j
        } else {
            points + 1 - j
        };
        let r = 2f64.powi(p as i32);
        let extrapolated = fine.zip_map(&coarse, |f, c| (f * r - c) * (1.0 / (r - 1.0)));
        let error = extrapolated.l1_distance(&fine)?;
        out.push(DerivativeNorm {
            j,
            value: extrapolated.l1_norm(),
            error,
        });
    }
    Ok(out)
}
