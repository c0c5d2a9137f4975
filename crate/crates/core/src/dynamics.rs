//! Time evolution: a deterministic wall-flux delay solver on exact
//! characteristics and a Monte Carlo particle simulator.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::boundary::{kernel_eval, BoundaryOperatorSpec, Wall};
use crate::error::{Error, Result};
use crate::phase::PhaseDensity;
use crate::scenario::Scenario;
use crate::series::{region_column, TimeSeries};
use crate::spectral::{EquilibriumProfile, Integrability};
use crate::vgrid::{HalfGrid, Sign};

pub const TOTAL_MASS: &str = "total_mass";
pub const DISTANCE: &str = "distance_to_equilibrium";
/// Most negative value tolerated in a snapshot evolved from nonnegative data.
pub const POSITIVITY_FLOOR: f64 = -1e-10;

pub fn stderr_column(name: &str) -> String {
    format!("{name}_stderr")
}

/// Horizon, step and observation schedule of a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSpec {
    pub t_final: f64,
    pub dt: f64,
    pub probe_times: Vec<f64>,
    pub epsilons: Vec<f64>,
}

impl RunSpec {
    /// Probe times snapped to the step grid, sorted and deduplicated, as step indices.
    fn probe_steps(&self) -> Result<Vec<usize>> {
        let mut steps = Vec::with_capacity(self.probe_times.len());
        for &t in &self.probe_times {
            if !(t >= 0.0 && t <= self.t_final * (1.0 + 1e-12)) {
                return Err(Error::Parameter(format!(
                    "probe time {t} outside [0, {}]",
                    self.t_final
                )));
            }
            steps.push((t / self.dt).round() as usize);
        }
        steps.sort_unstable();
        steps.dedup();
        Ok(steps)
    }

    fn validate(&self, sc: &Scenario) -> Result<()> {
        if !(self.dt > 0.0) || self.dt > sc.a / 10.0 * (1.0 + 1e-12) {
            return Err(Error::Parameter(format!(
                "time step must lie in (0, a/10] = (0, {}], got {}",
                sc.a / 10.0,
                self.dt
            )));
        }
        let limit = 0.5 * 2.0 * sc.a / sc.grid.v_min;
        if !(self.t_final > 0.0) || self.t_final > limit {
            return Err(Error::Parameter(format!(
                "horizon T = {} must lie in (0, a/v_min] = (0, {limit}]; beyond it the truncated speeds dominate",
                self.t_final
            )));
        }
        for &eps in &self.epsilons {
            if !(eps > sc.grid.v_min && eps < 1.0) {
                return Err(Error::Parameter(format!(
                    "region threshold {eps} must lie in (v_min, 1)"
                )));
            }
        }
        Ok(())
    }
}

/// Cumulative integrals `int_{-a}^{x} g(y, v_j) dy` of a piecewise-linear datum.
struct Primitive {
    h: f64,
    a: f64,
    nv: usize,
    values: Vec<f64>,
    nodes: Vec<f64>,
}

impl Primitive {
    fn new(g: &PhaseDensity<f64>, sign: Sign) -> Self {
        let (nx, nv) = (g.n_x(), g.n_v());
        let h = g.xgrid.spacing();
        let vals = g.half(sign);
        let mut values = vec![0.0; nx * nv];
        for i in 1..nx {
            for j in 0..nv {
                values[i * nv + j] = values[(i - 1) * nv + j]
                    + 0.5 * h * (vals[(i - 1) * nv + j] + vals[i * nv + j]);
            }
        }
        Self {
            h,
            a: g.xgrid.a(),
            nv,
            values,
            nodes: vals.to_vec(),
        }
    }

    fn at(&self, j: usize, x: f64) -> f64 {
        let nx = self.values.len() / self.nv;
        let u = ((x + self.a) / self.h).clamp(0.0, (nx - 1) as f64);
        let i = (u.floor() as usize).min(nx - 2);
        let t = u - i as f64;
        let (g0, g1) = (
            self.nodes[i * self.nv + j],
            self.nodes[(i + 1) * self.nv + j],
        );
        self.values[i * self.nv + j] + self.h * (g0 * t + 0.5 * (g1 - g0) * t * t)
    }

    fn total(&self, j: usize) -> f64 {
        let nx = self.values.len() / self.nv;
        self.values[(nx - 1) * self.nv + j]
    }
}

/// Cumulative outgoing wall fluxes `C_j(t) = int_0^t h_j` for one wall,
/// on the step grid, kept in a ring buffer. For `t < 0` the history is the
/// flux the initial datum would have needed to leave the wall at time `t`.
struct Ring {
    nv: usize,
    horizon: usize,
    data: Vec<f64>,
}

impl Ring {
    fn slot(&self, n: usize) -> &[f64] {
        let k = n % self.horizon;
        &self.data[k * self.nv..(k + 1) * self.nv]
    }

    fn slot_mut(&mut self, n: usize) -> &mut [f64] {
        let k = n % self.horizon;
        &mut self.data[k * self.nv..(k + 1) * self.nv]
    }
}

/// Wall-flux histories of the deterministic engine.
pub struct FluxHistory {
    pub dt: f64,
    pub horizon: usize,
    a: f64,
    speeds: Vec<f64>,
    /// Emitted at the left wall, positive speeds.
    left: Ring,
    /// Emitted at the right wall, negative speeds.
    right: Ring,
    prim_pos: Primitive,
    prim_neg: Primitive,
    /// Index of the latest stored step.
    pub step: usize,
}

impl FluxHistory {
    fn new(sc: &Scenario, g: &PhaseDensity<f64>, dt: f64, t_final: f64) -> Self {
        let nv = sc.pos.n();
        let d_max = 2.0 * sc.a / sc.grid.v_min;
        let horizon = (d_max.min(t_final + 2.0 * dt) / dt).ceil() as usize + 4;
        let ring = || Ring {
            nv,
            horizon,
            data: vec![0.0; horizon * nv],
        };
        Self {
            dt,
            horizon,
            a: sc.a,
            speeds: sc.pos.speeds().to_vec(),
            left: ring(),
            right: ring(),
            prim_pos: Primitive::new(g, Sign::Positive),
            prim_neg: Primitive::new(g, Sign::Negative),
            step: 0,
        }
    }

    fn current_time(&self) -> f64 {
        self.step as f64 * self.dt
    }

    /// `C_j(t)` for the family leaving `wall`.
    fn cumulative(&self, wall: Wall, j: usize, t: f64) -> f64 {
        if t <= 0.0 {
            let v = self.speeds[j];
            return match wall {
                Wall::Left => -self.prim_pos.at(j, -self.a - v * t),
                Wall::Right => -(self.prim_neg.total(j) - self.prim_neg.at(j, self.a + v * t)),
            };
        }
        let ring = match wall {
            Wall::Left => &self.left,
            Wall::Right => &self.right,
        };
        let u = t / self.dt;
        let n0 = u.floor() as usize;
        debug_assert!(n0 + ring.horizon > self.step, "history evicted");
        if n0 >= self.step {
            return ring.slot(self.step)[j];
        }
        let s = u - n0 as f64;
        let (c0, c1) = (ring.slot(n0)[j], ring.slot(n0 + 1)[j]);
        c0 + s * (c1 - c0)
    }

    fn advance(&mut self, n1: &DMatrix<f64>, n2: &DMatrix<f64>) {
        let nv = self.speeds.len();
        let (t0, t1) = (self.current_time(), self.current_time() + self.dt);
        let mut arrive_right = vec![0.0; nv];
        let mut arrive_left = vec![0.0; nv];
        for j in 0..nv {
            let d = 2.0 * self.a / self.speeds[j];
            arrive_right[j] =
                self.cumulative(Wall::Left, j, t1 - d) - self.cumulative(Wall::Left, j, t0 - d);
            arrive_left[j] =
                self.cumulative(Wall::Right, j, t1 - d) - self.cumulative(Wall::Right, j, t0 - d);
        }
        let emit_left = n1 * nalgebra::DVector::from_vec(arrive_left);
        let emit_right = n2 * nalgebra::DVector::from_vec(arrive_right);
        let n = self.step;
        for (ring, emit) in [(&mut self.left, emit_left), (&mut self.right, emit_right)] {
            let prev = ring.slot(n).to_vec();
            let next = ring.slot_mut(n + 1);
            for j in 0..nv {
                next[j] = prev[j] + emit[j];
            }
        }
        self.step += 1;
    }

    /// Mass in flight per node, `(positive, negative)`, at step time `t`.
    fn in_flight(&self, t: f64) -> (Vec<f64>, Vec<f64>) {
        let nv = self.speeds.len();
        let mut p = vec![0.0; nv];
        let mut m = vec![0.0; nv];
        for j in 0..nv {
            let d = 2.0 * self.a / self.speeds[j];
            p[j] = self.cumulative(Wall::Left, j, t) - self.cumulative(Wall::Left, j, t - d);
            m[j] = self.cumulative(Wall::Right, j, t) - self.cumulative(Wall::Right, j, t - d);
        }
        (p, m)
    }

    /// Density at time `t` by tracing every node back to its emission.
    fn snapshot(&self, sc: &Scenario, g: &PhaseDensity<f64>, t: f64) -> PhaseDensity<f64> {
        let mut f = sc.zeros::<f64>();
        let nv = self.speeds.len();
        let half = 0.5 * self.dt;
        let xs = sc.xgrid.nodes();
        for (ix, &x) in xs.iter().enumerate() {
            for j in 0..nv {
                let v = self.speeds[j];
                let s = t - (x + self.a) / v;
                f.positive[ix * nv + j] = if s < 0.0 {
                    g.interpolate(Sign::Positive, j, x - v * t)
                } else {
                    (self.cumulative(Wall::Left, j, s + half)
                        - self.cumulative(Wall::Left, j, s - half))
                        / (self.dt * v)
                };
                let s = t - (self.a - x) / v;
                f.negative[ix * nv + j] = if s < 0.0 {
                    g.interpolate(Sign::Negative, j, x + v * t)
                } else {
                    (self.cumulative(Wall::Right, j, s + half)
                        - self.cumulative(Wall::Right, j, s - half))
                        / (self.dt * v)
                };
            }
        }
        f
    }
}

fn node_region_mass(grid: &HalfGrid, p: &[f64], m: &[f64], eps: f64) -> f64 {
    grid.region_weights(eps)
        .iter()
        .enumerate()
        .map(|(j, w)| w * (p[j].abs() + m[j].abs()))
        .sum()
}

/// Deterministic evolution. Columns: `total_mass`, `region_mass(eps)` per
/// threshold (both from the wall-flux state), and `distance_to_equilibrium`
/// from the reconstructed snapshot when `psi0` is given.
pub fn evolve_deterministic(
    sc: &Scenario,
    g: &PhaseDensity<f64>,
    psi0: Option<&PhaseDensity<f64>>,
    run: &RunSpec,
) -> Result<TimeSeries> {
    evolve_deterministic_observed(sc, g, psi0, run, |_, _| {})
}

/// As [`evolve_deterministic`], handing every probe snapshot to `observer`.
pub fn evolve_deterministic_observed(
    sc: &Scenario,
    g: &PhaseDensity<f64>,
    psi0: Option<&PhaseDensity<f64>>,
    run: &RunSpec,
    mut observer: impl FnMut(f64, &PhaseDensity<f64>),
) -> Result<TimeSeries> {
    run.validate(sc)?;
    let probe = sc.zeros::<f64>();
    if !probe.same_layout(g) || psi0.is_some_and(|p| !probe.same_layout(p)) {
        return Err(Error::Shape(
            "datum and equilibrium must be sampled on the scenario grid".into(),
        ));
    }
    let steps = run.probe_steps()?;
    let nonnegative = g.min_value() >= 0.0;
    let mass0 = g.integral();
    let (n1, n2) = (sc.o1.nodal().matrix, sc.o2.nodal().matrix);
    let mut hist = FluxHistory::new(sc, g, run.dt, run.t_final);

    let mut times = Vec::with_capacity(steps.len());
    let mut mass = Vec::with_capacity(steps.len());
    let mut dist = Vec::with_capacity(steps.len());
    let mut regions = vec![Vec::with_capacity(steps.len()); run.epsilons.len()];
    for &n in &steps {
        // the snapshot at step n needs the history up to n + 1
        while hist.step < n + 1 {
            hist.advance(&n1, &n2);
        }
        let t = n as f64 * run.dt;
        let (p, m) = hist.in_flight(t);
        let w = sc.pos.weights();
        mass.push(p.iter().zip(&m).zip(w).map(|((a, b), w)| w * (a + b)).sum());
        for (col, &eps) in regions.iter_mut().zip(&run.epsilons) {
            col.push(node_region_mass(&sc.pos, &p, &m, eps));
        }
        let f = hist.snapshot(sc, g, t);
        if nonnegative {
            let low = f.min_value();
            if low < POSITIVITY_FLOOR {
                return Err(Error::InternalConsistency(format!(
                    "density reached {low:e} at t = {t} from nonnegative data"
                )));
            }
        }
        if let Some(psi) = psi0 {
            dist.push(distance(&f, psi, mass0)?);
        }
        observer(t, &f);
        times.push(t);
    }
    let mut series = TimeSeries::new(times);
    series.push_column(TOTAL_MASS, mass)?;
    if psi0.is_some() {
        series.push_column(DISTANCE, dist)?;
    }
    for (col, &eps) in regions.into_iter().zip(&run.epsilons) {
        series.push_column(region_column(eps), col)?;
    }
    Ok(series)
}

fn distance(f: &PhaseDensity<f64>, psi0: &PhaseDensity<f64>, mass: f64) -> Result<f64> {
    f.l1_distance(&psi0.scaled(mass))
}

/// `||f - mass psi0||_L1`.
pub fn distance_to_equilibrium(
    f: &PhaseDensity<f64>,
    eq: &EquilibriumProfile,
    mass: f64,
) -> Result<f64> {
    distance(f, eq.psi0()?, mass)
}

/// Mass of `|f|` at speeds above `eps`.
pub fn region_mass(f: &PhaseDensity<f64>, eps: f64) -> Result<f64> {
    f.region_mass(eps)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Particle {
    pub x: f64,
    pub v: f64,
    /// Signed unit of mass, `+-||g|| / N`.
    pub weight: f64,
}

impl Particle {
    /// Time to the next wall and the wall reached.
    pub fn next_wall_hit(&self, a: f64) -> (f64, Wall) {
        if self.v > 0.0 {
            ((a - self.x) / self.v, Wall::Right)
        } else {
            ((self.x + a) / -self.v, Wall::Left)
        }
    }
}

#[derive(Debug, Clone)]
pub struct ParticleEnsemble {
    pub particles: Vec<Particle>,
    pub rng_seed: u64,
}

impl ParticleEnsemble {
    pub fn count(&self) -> usize {
        self.particles.len()
    }

    pub fn total_weight(&self) -> f64 {
        self.particles.iter().map(|p| p.weight).sum()
    }
}

fn particle_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// Bin of `u` in increasing `cdf` (last entry 1).
fn pick(cdf: &[f64], u: f64) -> usize {
    cdf.partition_point(|&c| c <= u).min(cdf.len() - 1)
}

/// Sample `N` particles from `|g|` on the tensor bins: dual cells in `x`,
/// quadrature bins in `v`, uniform inside each bin, sign of `g` at the node.
pub fn sample_ensemble(
    g: &PhaseDensity<f64>,
    n_particles: usize,
    seed: u64,
) -> Result<ParticleEnsemble> {
    if n_particles == 0 {
        return Err(Error::Parameter("need at least one particle".into()));
    }
    let (nx, nv) = (g.n_x(), g.n_v());
    let (xw, vw) = (g.xgrid.weights(), g.pos.weights());
    let mut masses = Vec::with_capacity(2 * nx * nv);
    for sign in [Sign::Positive, Sign::Negative] {
        let vals = g.half(sign);
        for ix in 0..nx {
            for j in 0..nv {
                masses.push(xw[ix] * vw[j] * vals[ix * nv + j].abs());
            }
        }
    }
    let total: f64 = masses.iter().sum();
    if !(total > 0.0) {
        return Err(Error::Parameter(
            "cannot sample particles from a zero datum".into(),
        ));
    }
    let mut acc = 0.0;
    let cdf: Vec<f64> = masses
        .iter()
        .map(|m| {
            acc += m / total;
            acc
        })
        .collect();
    let edges = g.pos.bin_edges();
    let (a, h) = (g.xgrid.a(), g.xgrid.spacing());
    let unit = total / n_particles as f64;
    let particles = (0..n_particles as u64)
        .into_par_iter()
        .map(|k| {
            let mut rng = particle_rng(seed, k);
            let b = pick(&cdf, rng.random::<f64>());
            let (sign, rest) = if b < nx * nv {
                (Sign::Positive, b)
            } else {
                (Sign::Negative, b - nx * nv)
            };
            let (ix, j) = (rest / nv, rest % nv);
            let xc = g.xgrid.nodes()[ix];
            let lo = (xc - 0.5 * h).max(-a);
            let hi = (xc + 0.5 * h).min(a);
            let x = lo + (hi - lo) * rng.random::<f64>();
            let speed = edges[j] + (edges[j + 1] - edges[j]) * rng.random::<f64>();
            let value = g.half(sign)[ix * nv + j];
            Particle {
                x,
                v: sign.factor() * speed,
                weight: unit * value.signum(),
            }
        })
        .collect();
    Ok(ParticleEnsemble {
        particles,
        rng_seed: seed,
    })
}

/// Per-column inverse-CDF tables of a wall's diffuse kernel over the
/// quadrature bins, with an extra first bin `[0, v_min]` that triggers a resample.
pub struct WallSampler {
    alpha: f64,
    /// `edges[0] = 0`, `edges[1] = v_min`, ..., last = 1.
    edges: Vec<f64>,
    /// `cdf[j]` for incoming bin `j`, over `n + 1` outgoing bins.
    cdf: Vec<Vec<f64>>,
    grid_edges: Vec<f64>,
}

impl WallSampler {
    pub fn new(spec: &BoundaryOperatorSpec, grid: &HalfGrid) -> Result<Self> {
        let grid_edges = grid.bin_edges();
        let mut edges = vec![0.0];
        edges.extend_from_slice(&grid_edges);
        let (out, inc) = (spec.side.outgoing().factor(), spec.side.incoming().factor());
        let cdf = if spec.alpha < 1.0 {
            (0..grid.n())
                .map(|j| {
                    let v_in = inc * grid.speeds()[j];
                    let v_min = grid.v_min();
                    let mut masses =
                        vec![kernel_eval(&spec.kernel, out * 0.5 * v_min, v_in)? * v_min];
                    for (v, w) in grid.speeds().iter().zip(grid.weights()) {
                        masses.push(kernel_eval(&spec.kernel, out * v, v_in)? * w);
                    }
                    let total: f64 = masses.iter().sum();
                    let mut acc = 0.0;
                    Ok(masses
                        .iter()
                        .map(|m| {
                            acc += m / total;
                            acc
                        })
                        .collect())
                })
                .collect::<Result<_>>()?
        } else {
            Vec::new()
        };
        Ok(Self {
            alpha: spec.alpha,
            edges,
            cdf,
            grid_edges,
        })
    }

    /// Outgoing velocity for an incoming velocity `v_in`; bumps `resampled`
    /// for every draw that fell below `v_min`.
    pub fn reflect(&self, v_in: f64, rng: &mut ChaCha8Rng, resampled: &mut u64) -> f64 {
        if self.alpha >= 1.0 || rng.random::<f64>() < self.alpha {
            return -v_in;
        }
        let speed_in = v_in.abs();
        let j = self
            .grid_edges
            .partition_point(|&e| e <= speed_in)
            .saturating_sub(1)
            .min(self.cdf.len() - 1);
        let cdf = &self.cdf[j];
        loop {
            let b = pick(cdf, rng.random::<f64>());
            if b == 0 {
                *resampled += 1;
                continue;
            }
            let (lo, hi) = (self.edges[b], self.edges[b + 1]);
            let speed = lo + (hi - lo) * rng.random::<f64>();
            return -v_in.signum() * speed;
        }
    }
}

/// Free flight with wall interactions up to time `t_to`.
pub fn fly(
    p: &mut Particle,
    mut t: f64,
    t_to: f64,
    a: f64,
    left: &WallSampler,
    right: &WallSampler,
    rng: &mut ChaCha8Rng,
    resampled: &mut u64,
) {
    loop {
        let (tau, wall) = p.next_wall_hit(a);
        if t + tau > t_to {
            p.x = (p.x + p.v * (t_to - t)).clamp(-a, a);
            return;
        }
        t += tau;
        match wall {
            Wall::Right => {
                p.x = a;
                p.v = right.reflect(p.v, rng, resampled);
            }
            Wall::Left => {
                p.x = -a;
                p.v = left.reflect(p.v, rng, resampled);
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McSpec {
    pub n_particles: usize,
    pub seed: u64,
    pub t_final: f64,
    pub probe_times: Vec<f64>,
    pub epsilons: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct McRun {
    pub series: TimeSeries,
    /// Kernel draws below `v_min` that were redrawn.
    pub resampled: u64,
    pub n_particles: usize,
}

/// Signed particle counts at one probe.
#[derive(Clone)]
struct Tally {
    /// `[family][ix * nv + j]`, family 0 for positive speeds.
    bins: [Vec<i64>; 2],
    /// `(net, absolute)` count of particles faster than each threshold.
    region: Vec<(i64, i64)>,
}

impl Tally {
    fn merge(&mut self, other: &Tally) {
        for f in 0..2 {
            for (x, y) in self.bins[f].iter_mut().zip(&other.bins[f]) {
                *x += y;
            }
        }
        for (x, y) in self.region.iter_mut().zip(&other.region) {
            x.0 += y.0;
            x.1 += y.1;
        }
    }
}

pub fn evolve_mc(
    sc: &Scenario,
    g: &PhaseDensity<f64>,
    psi0: Option<&PhaseDensity<f64>>,
    spec: &McSpec,
) -> Result<McRun> {
    if !(spec.t_final > 0.0) {
        return Err(Error::Parameter(format!(
            "horizon must be positive, got {}",
            spec.t_final
        )));
    }
    for &eps in &spec.epsilons {
        if !(eps > sc.grid.v_min && eps < 1.0) {
            return Err(Error::Parameter(format!(
                "region threshold {eps} must lie in (v_min, 1)"
            )));
        }
    }
    let mut probes = spec.probe_times.clone();
    if probes.iter().any(|&t| !(t >= 0.0 && t <= spec.t_final)) {
        return Err(Error::Parameter(format!(
            "probe times must lie in [0, {}]",
            spec.t_final
        )));
    }
    probes.sort_by(f64::total_cmp);
    probes.dedup();

    let ensemble = sample_ensemble(g, spec.n_particles, spec.seed)?;
    let left = WallSampler::new(&sc.o1_spec, &sc.pos)?;
    let right = WallSampler::new(&sc.o2_spec, &sc.pos)?;
    let (nx, nv) = (sc.xgrid.n(), sc.pos.n());
    let (a, h) = (sc.a, sc.xgrid.spacing());
    let edges = sc.pos.bin_edges();
    let n_eps = spec.epsilons.len();
    let empty = || -> (Vec<Tally>, u64) {
        let t = Tally {
            bins: [vec![0; nx * nv], vec![0; nx * nv]],
            region: vec![(0, 0); n_eps],
        };
        (vec![t; probes.len()], 0)
    };

    // the stream of particle k continues from its sampling stream
    let (counts, resampled) = ensemble
        .particles
        .par_iter()
        .enumerate()
        .fold(empty, |(mut counts, mut resampled), (k, p0)| {
            let mut rng = particle_rng(spec.seed, k as u64 + (1 << 40));
            let mut p = *p0;
            let mut t = 0.0;
            for (slot, &tp) in counts.iter_mut().zip(&probes) {
                fly(&mut p, t, tp, a, &left, &right, &mut rng, &mut resampled);
                t = tp;
                let ix = (((p.x + a) / h).round() as usize).min(nx - 1);
                let j = edges
                    .partition_point(|&e| e <= p.v.abs())
                    .saturating_sub(1)
                    .min(nv - 1);
                let fam = if p.v > 0.0 { 0 } else { 1 };
                let unit = if p.weight >= 0.0 { 1 } else { -1 };
                slot.bins[fam][ix * nv + j] += unit;
                for (r, &eps) in slot.region.iter_mut().zip(&spec.epsilons) {
                    if p.v.abs() > eps {
                        r.0 += unit;
                        r.1 += 1;
                    }
                }
            }
            (counts, resampled)
        })
        .reduce(empty, |(mut ca, ra), (cb, rb)| {
            for (pa, pb) in ca.iter_mut().zip(&cb) {
                pa.merge(pb);
            }
            (ca, ra + rb)
        });

    let n = spec.n_particles as f64;
    let unit = ensemble
        .particles
        .first()
        .map(|p| p.weight.abs())
        .unwrap_or(0.0);
    let n_neg = ensemble.particles.iter().filter(|p| p.weight < 0.0).count() as f64;
    let net_total = (n - 2.0 * n_neg) * unit;
    let mass0 = g.integral();

    let mut series = TimeSeries::new(probes.clone());
    series.push_column(TOTAL_MASS, vec![net_total; probes.len()])?;
    if let Some(psi) = psi0 {
        let (xw, vw) = (sc.xgrid.weights(), sc.pos.weights());
        let mut d = Vec::new();
        let mut se = Vec::new();
        for c in &counts {
            let (mut dist, mut signed) = (0.0, 0.0);
            for (fam, sign) in [(0, Sign::Positive), (1, Sign::Negative)] {
                let target = psi.half(sign);
                for ix in 0..nx {
                    for j in 0..nv {
                        let k = ix * nv + j;
                        let count = c.bins[fam][k] as f64;
                        let diff = unit * count - mass0 * target[k] * xw[ix] * vw[j];
                        dist += diff.abs();
                        signed += diff.signum() * count;
                    }
                }
            }
            d.push(dist);
            se.push(unit * (n - signed * signed / n).max(0.0).sqrt());
        }
        series.push_column(DISTANCE, d)?;
        series.push_column(stderr_column(DISTANCE), se)?;
    }
    for (e, &eps) in spec.epsilons.iter().enumerate() {
        let (mut vals, mut se) = (Vec::new(), Vec::new());
        for c in &counts {
            let (net, abs) = (c.region[e].0 as f64, c.region[e].1 as f64);
            vals.push(unit * net);
            se.push(unit * (abs - net * net / n).max(0.0).sqrt());
        }
        let name = region_column(eps);
        series.push_column(name.clone(), vals)?;
        series.push_column(stderr_column(&name), se)?;
    }
    Ok(McRun {
        series,
        resampled,
        n_particles: spec.n_particles,
    })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ValidationReport {
    pub k: u32,
    /// `(threshold, int_{|v| > threshold} |g| / |v|^(k+1))`.
    pub z_norm_sweep: Vec<(f64, f64)>,
    pub z_norm_verdict: Integrability,
    /// `|| v g(-a, v>0) - O1 |v| g(-a, v<0) ||`.
    pub left_residual: f64,
    /// `|| |v| g(a, v<0) - O2 v g(a, v>0) ||`.
    pub right_residual: f64,
    /// Finite-difference `|| v dg/dx ||_L1`.
    pub transport_l1: f64,
    /// `int (g - (int g) psi0)`, when an invariant density exists.
    pub mean_after_projection: Option<f64>,
}

/// Diagnostics for an initial datum: weighted integrability, trace
/// compatibility with both walls, regularity along characteristics.
pub fn validate_initial_data(
    g: &PhaseDensity<f64>,
    sc: &Scenario,
    k: u32,
    psi0: Option<&PhaseDensity<f64>>,
) -> Result<ValidationReport> {
    if !sc.zeros::<f64>().same_layout(g) {
        return Err(Error::Shape(
            "datum is not sampled on the scenario grid".into(),
        ));
    }
    let (nx, nv) = (g.n_x(), g.n_v());
    let v_min = sc.grid.v_min;
    let thresholds = [v_min * 100.0, v_min * 10.0, v_min];
    let speeds = sc.pos.speeds();
    let z_norm_sweep: Vec<(f64, f64)> = thresholds
        .iter()
        .map(|&th| {
            let mut total = 0.0;
            for ix in 0..nx {
                for j in 0..nv {
                    if speeds[j] > th {
                        let m =
                            g.get(Sign::Positive, ix, j).abs() + g.get(Sign::Negative, ix, j).abs();
                        total += g.xgrid.weights()[ix] * sc.pos.weights()[j] * m
                            / speeds[j].powi(k as i32 + 1);
                    }
                }
            }
            (th, total)
        })
        .collect();
    let z_norm_verdict = crate::spectral::integrability_verdict(
        &z_norm_sweep.iter().map(|p| p.1).collect::<Vec<_>>(),
    );

    let trace = |sign: Sign, ix: usize| crate::vgrid::HalfGridVector {
        grid: if sign == Sign::Positive {
            sc.pos.clone()
        } else {
            sc.neg.clone()
        },
        values: (0..nv).map(|j| speeds[j] * g.get(sign, ix, j)).collect(),
    };
    let l1 = |a: &[f64], b: &[f64]| {
        a.iter()
            .zip(b)
            .zip(sc.pos.weights())
            .map(|((x, y), w)| w * (x - y).abs())
            .sum::<f64>()
    };
    let left_out = trace(Sign::Positive, 0);
    let left_in = sc.o1.apply(&trace(Sign::Negative, 0))?;
    let right_out = trace(Sign::Negative, nx - 1);
    let right_in = sc.o2.apply(&trace(Sign::Positive, nx - 1))?;

    let h = g.xgrid.spacing();
    let mut transport_l1 = 0.0;
    for sign in [Sign::Positive, Sign::Negative] {
        for ix in 0..nx {
            let (lo, hi) = (ix.saturating_sub(1), (ix + 1).min(nx - 1));
            for j in 0..nv {
                let dg = (g.get(sign, hi, j) - g.get(sign, lo, j)) / (h * (hi - lo) as f64);
                transport_l1 +=
                    g.xgrid.weights()[ix] * sc.pos.weights()[j] * (speeds[j] * dg).abs();
            }
        }
    }
    let mean_after_projection = psi0.map(|psi| g.integral() - g.integral() * psi.integral());
    Ok(ValidationReport {
        k,
        z_norm_sweep,
        z_norm_verdict,
        left_residual: l1(&left_out.values, &left_in.values),
        right_residual: l1(&right_out.values, &right_in.values),
        transport_l1,
        mean_after_projection,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::GridParams;
    use crate::spectral;

    fn small(n_v: usize, n_x: usize) -> GridParams {
        GridParams {
            n_v,
            n_x,
            v_min: 1e-4,
            grading_q: 3.0,
        }
    }

    #[test]
    fn specular_kinematics() {
        let sc = Scenario::spec1(small(16, 5)).unwrap();
        let s = WallSampler::new(&sc.o2_spec, &sc.pos).unwrap();
        let mut p = Particle {
            x: 0.0,
            v: 0.5,
            weight: 1.0,
        };
        assert_eq!(p.next_wall_hit(1.0), (2.0, Wall::Right));
        let mut rng = particle_rng(1, 0);
        let mut r = 0;
        fly(&mut p, 0.0, 2.0 + 1e-9, 1.0, &s, &s, &mut rng, &mut r);
        assert_eq!(p.v, -0.5);
        assert!((p.x - (1.0 - 0.5e-9)).abs() < 1e-12);
    }

    #[test]
    fn primitive_is_exact_for_linear_data() {
        let sc = Scenario::canon1(small(16, 9)).unwrap();
        let g = sc.density(|x, v| 2.0 + x + v);
        let p = Primitive::new(&g, Sign::Positive);
        let v = sc.pos.speeds()[3];
        let exact = |y: f64| (2.0 + v) * (y + 1.0) + 0.5 * (y * y - 1.0);
        for y in [-1.0, -0.3, 0.11, 1.0] {
            assert!((p.at(3, y) - exact(y)).abs() < 1e-14);
        }
    }

    #[test]
    fn equilibrium_is_stationary() {
        let sc = Scenario::canon1(small(96, 11)).unwrap();
        let eq = spectral::equilibrium(&sc, &[1e-3, 1e-4]).unwrap();
        let psi = eq.psi0().unwrap();
        let run = RunSpec {
            t_final: 10.0,
            dt: 0.05,
            probe_times: vec![0.0, 3.3, 10.0],
            epsilons: vec![0.5],
        };
        let s = evolve_deterministic(&sc, psi, Some(psi), &run).unwrap();
        assert!(
            s.column(DISTANCE).unwrap().iter().all(|&d| d < 5e-8),
            "{:?}",
            s.column(DISTANCE)
        );
        assert!(s
            .column(TOTAL_MASS)
            .unwrap()
            .iter()
            .all(|&m| (m - 1.0).abs() < 1e-12));
    }

    #[test]
    fn mass_is_conserved_and_positive() {
        for sc in [
            Scenario::canon1(small(64, 21)).unwrap(),
            Scenario::mix1(small(64, 21)).unwrap(),
        ] {
            let g = sc.canonical_datum();
            let run = RunSpec {
                t_final: 30.0,
                dt: 0.1,
                probe_times: vec![0.0, 1.0, 7.5, 30.0],
                epsilons: vec![],
            };
            let s = evolve_deterministic(&sc, &g, None, &run).unwrap();
            let m = s.column(TOTAL_MASS).unwrap();
            assert!(m.iter().all(|x| (x - m[0]).abs() < 1e-12 * m[0]), "{m:?}");
            assert!((m[0] - 1.0).abs() < 1e-13);
        }
    }

    #[test]
    fn specular_negative_control() {
        let sc = Scenario::spec1(small(64, 21)).unwrap();
        let g = sc.canonical_datum();
        let run = RunSpec {
            t_final: 40.0,
            dt: 0.1,
            probe_times: vec![0.0, 20.0, 40.0],
            epsilons: vec![0.5],
        };
        let s = evolve_deterministic(&sc, &g, None, &run).unwrap();
        let m = s.column(TOTAL_MASS).unwrap();
        assert!(m.iter().all(|x| (x - m[0]).abs() < 1e-10));
        // speeds are preserved by specular walls
        let r = s.column(&region_column(0.5)).unwrap();
        assert!(r.iter().all(|x| (x - r[0]).abs() < 1e-12));
    }

    #[test]
    fn run_spec_validation() {
        let sc = Scenario::canon1(small(16, 5)).unwrap();
        let g = sc.canonical_datum();
        let bad_dt = RunSpec {
            t_final: 1.0,
            dt: 0.2,
            probe_times: vec![0.5],
            epsilons: vec![],
        };
        assert!(evolve_deterministic(&sc, &g, None, &bad_dt).is_err());
        let bad_t = RunSpec {
            t_final: 2e4,
            dt: 0.1,
            probe_times: vec![],
            epsilons: vec![],
        };
        assert!(evolve_deterministic(&sc, &g, None, &bad_t).is_err());
        let bad_eps = RunSpec {
            t_final: 1.0,
            dt: 0.1,
            probe_times: vec![],
            epsilons: vec![1e-5],
        };
        assert!(evolve_deterministic(&sc, &g, None, &bad_eps).is_err());
    }

    #[test]
    fn mc_conserves_weight_and_is_reproducible() {
        let sc = Scenario::canon1(small(32, 11)).unwrap();
        let g = sc.canonical_datum();
        let spec = McSpec {
            n_particles: 20_000,
            seed: 7,
            t_final: 5.0,
            probe_times: vec![1.0, 5.0],
            epsilons: vec![0.5],
        };
        let a = evolve_mc(&sc, &g, None, &spec).unwrap();
        let b = evolve_mc(&sc, &g, None, &spec).unwrap();
        assert_eq!(a.series, b.series);
        let m = a.series.column(TOTAL_MASS).unwrap();
        assert_eq!(m[0], m[1]);
        assert!((m[0] - 1.0).abs() < 1e-12);
        assert!(evolve_mc(
            &sc,
            &g,
            None,
            &McSpec {
                n_particles: 0,
                ..spec
            }
        )
        .is_err());
    }

    #[test]
    fn distance_and_region_examples() {
        let sc = Scenario::canon1(small(64, 11)).unwrap();
        let eq = spectral::equilibrium(&sc, &[1e-3, 1e-4]).unwrap();
        let psi = eq.psi0().unwrap();
        assert!(distance_to_equilibrium(psi, &eq, 1.0).unwrap() < 1e-12);
        assert!((distance_to_equilibrium(&psi.scaled(2.0), &eq, 1.0).unwrap() - 1.0).abs() < 1e-12);
        let bump = sc.density(|x, v| if x > 0.0 && v > 0.5 { 1.0 } else { 0.0 });
        let mut perturbed = psi.clone();
        perturbed.axpy(0.1 / bump.l1_norm(), &bump).unwrap();
        assert!((distance_to_equilibrium(&perturbed, &eq, 1.0).unwrap() - 0.1).abs() < 1e-12);
        assert!((region_mass(psi, 0.5).unwrap() - 0.75).abs() < 5e-4);
        assert!((region_mass(psi, 1.5e-4).unwrap() - 1.0).abs() < 1e-3);
        assert_eq!(region_mass(&sc.zeros(), 0.3).unwrap(), 0.0);
        assert!(region_mass(psi, 1e-5).is_err());
    }

    #[test]
    fn validation_examples() {
        let sc = Scenario::canon1(small(64, 21)).unwrap();
        let eq = spectral::equilibrium(&sc, &[1e-3, 1e-4]).unwrap();
        let psi = eq.psi0().unwrap();
        let g = sc.canonical_datum();
        let r = validate_initial_data(&g, &sc, 1, Some(psi)).unwrap();
        assert!(r.left_residual < 1e-25 && r.right_residual < 1e-25);
        assert_eq!(r.z_norm_verdict, Integrability::ConvergentTrend);
        assert!(r.mean_after_projection.unwrap().abs() < 1e-12);
        let r = validate_initial_data(psi, &sc, 1, Some(psi)).unwrap();
        assert!(r.left_residual < 1e-10 && r.right_residual < 1e-10);
        let one_sided = sc.density(|_, v| if v > 0.0 { v / 2.0 } else { 0.0 });
        let r = validate_initial_data(&one_sided, &sc, 1, Some(psi)).unwrap();
        assert!(r.left_residual > 0.1);
    }
}
