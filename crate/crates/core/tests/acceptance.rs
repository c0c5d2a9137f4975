//! End-to-end acceptance checks, one line per criterion.
//!
//! Runs without the libtest harness so every verdict is printed even when it
//! passes. Criteria marked `known_red` are always evaluated and reported, but
//! only count towards the exit status with `--include-ignored` (or `--ignored`);
//! the blocking analysis for each lives in the decisions ledger.
//! A positional argument filters criteria by substring of their name.

use std::time::{Duration, Instant};

use num_complex::Complex64 as C;

use slabkin::analysis::{least_squares, log_space};
use slabkin::boundary::{
    check_assumptions, AssumptionGroup, BoundaryOperatorSpec, KernelSpec, Trend, Wall,
};
use slabkin::cli::config::Config;
use slabkin::cli::{run_config, Command};
use slabkin::dynamics::{
    evolve_deterministic, evolve_deterministic_observed, evolve_mc, stderr_column, McSpec, RunSpec,
    TOTAL_MASS,
};
use slabkin::resolvent::{
    f_derivative_norms, fit_bounds, scan_imaginary_axis, spectral_radius_power,
    transport_resolvent, ScanQuantity,
};
use slabkin::scenario::{GridParams, Scenario};
use slabkin::series::region_column;
use slabkin::spectral::{self, Integrability};

struct Outcome {
    pass: bool,
    detail: String,
}

impl Outcome {
    fn new(pass: bool, detail: impl Into<String>) -> Self {
        Self {
            pass,
            detail: detail.into(),
        }
    }
}

struct Criterion {
    id: u32,
    name: &'static str,
    known_red: bool,
    run: fn() -> Outcome,
}

fn canon() -> Scenario {
    Scenario::canon1(GridParams::default()).unwrap()
}

fn timed<T>(f: impl FnOnce() -> T) -> (T, Duration) {
    let t0 = Instant::now();
    let out = f();
    (out, t0.elapsed())
}

fn bundled(name: &str, dir: &std::path::Path) -> Config {
    let path = std::path::Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../../configs")
        .join(name);
    Config::load(Some(&path), &[format!("output.dir=\"{}\"", dir.display())]).unwrap()
}

fn equilibrium_oracle() -> Outcome {
    let sc = canon();
    let (eq, elapsed) =
        timed(|| spectral::equilibrium(&sc, &spectral::default_sweep(sc.grid.v_min)).unwrap());
    let h0 = &eq.h0;
    let exact: Vec<f64> = sc.pos.speeds().iter().map(|v| 3.0 * v * v).collect();
    let h0_err = h0
        .values
        .iter()
        .zip(&exact)
        .zip(sc.pos.weights())
        .map(|((a, b), w)| w * (a - b).abs())
        .sum::<f64>()
        / exact
            .iter()
            .zip(sc.pos.weights())
            .map(|(b, w)| w * b)
            .sum::<f64>();
    let psi = eq.psi0().unwrap();
    let target = sc.density(|_, v| v.abs() / 2.0);
    let psi_l1 = psi.l1_distance(&target).unwrap();
    let psi_max = psi
        .positive
        .iter()
        .chain(&psi.negative)
        .zip(target.positive.iter().chain(&target.negative))
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    let mass_err = (psi.integral() - 1.0).abs();
    let pass = h0_err < 1e-8
        && psi_l1 < 1e-8
        && psi_max < 1e-8
        && mass_err < 1e-10
        && elapsed.as_secs_f64() < 5.0;
    Outcome::new(
        pass,
        format!(
            "h0 rel L1 {h0_err:.1e}, psi0 L1 {psi_l1:.3e} max {psi_max:.1e}, |mass - 1| {mass_err:.1e}, {:.2} s",
            elapsed.as_secs_f64()
        ),
    )
}

fn spectral_radius_oracle() -> Outcome {
    // |c(is)|^2 with c(lambda) = int_0^1 3v^2 exp(-2 lambda / v) dv, from an
    // independent high-precision evaluation
    const EXACT: [(f64, f64); 5] = [
        (0.05, 0.9937175331178152),
        (0.1, 0.9783253036005558),
        (0.5, 0.7650628463260633),
        (1.0, 0.5332471704492148),
        (5.0, 0.07452167822550611),
    ];
    // the graded grid at 400 nodes resolves |c|^2 to about 1e-7; the oracle
    // tolerance needs the finer grid
    let sc = Scenario::canon1(GridParams {
        n_v: 4000,
        n_x: 3,
        ..GridParams::default()
    })
    .unwrap();
    let mut worst: f64 = 0.0;
    let mut below_one = true;
    for (s, exact) in EXACT {
        let r = spectral_radius_power(&sc.o1, &sc.o2, sc.a, C::new(0.0, s), 1e-14, 1000).unwrap();
        worst = worst.max((r - exact).abs());
        below_one &= r < 1.0;
    }
    Outcome::new(
        worst < 1e-8 && below_one,
        format!("max |r - |c|^2| = {worst:.1e}, all < 1: {below_one}"),
    )
}

fn norm_expansion() -> Outcome {
    let sc = canon();
    let s = log_space(1e-3, 1e-2, 11);
    let (scan, elapsed) = timed(|| scan_imaginary_axis(&sc, &s, ScanQuantity::NormG).unwrap());
    let ratios: Vec<f64> = scan
        .points
        .iter()
        .map(|(s, v)| (1.0 - v) / (s * s))
        .collect();
    let lo = ratios.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = ratios.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let pass =
        scan.failures.is_empty() && lo >= 1.425 && hi <= 1.575 && elapsed.as_secs_f64() < 10.0;
    Outcome::new(
        pass,
        format!(
            "(1 - ||G_is||)/s^2 in [{lo:.4}, {hi:.4}], {:.2} s",
            elapsed.as_secs_f64()
        ),
    )
}

fn inverse_blowup() -> Outcome {
    let sc = canon();
    let small =
        scan_imaginary_axis(&sc, &log_space(1e-3, 1e-1, 21), ScanQuantity::NormInverse).unwrap();
    let fit = fit_bounds(&small, &[], (1e-3, 1e-1)).unwrap();
    let away = log_space(0.5, 50.0, 21);
    let inv = scan_imaginary_axis(&sc, &away, ScanQuantity::NormInverse).unwrap();
    let g = scan_imaginary_axis(&sc, &away, ScanQuantity::NormG).unwrap();
    let sup_inv = inv.values().into_iter().fold(f64::NEG_INFINITY, f64::max);
    let sup_g = g.values().into_iter().fold(f64::NEG_INFINITY, f64::max);
    let cap = 1.25 / (1.0 - sup_g);
    let p = fit.blowup_exponent;
    let pass = small.failures.is_empty()
        && inv.failures.is_empty()
        && p <= 2.1
        && (0.9..=1.1).contains(&p)
        && sup_inv.is_finite()
        && sup_inv <= cap;
    Outcome::new(
        pass,
        format!("blow-up exponent {p:.4}, sup on [0.5, 50] {sup_inv:.4} <= {cap:.4}"),
    )
}

fn resolvent_stationarity() -> Outcome {
    let sc = canon();
    let eq = spectral::equilibrium(&sc, &spectral::default_sweep(sc.grid.v_min)).unwrap();
    let psi = eq.psi0().unwrap();
    let r = transport_resolvent(&sc, C::new(1.0, 0.0), psi).unwrap();
    let d = r.f.l1_distance(&psi.to_complex()).unwrap();
    Outcome::new(d < 1e-8, format!("||R(1) psi0 - psi0||_L1 = {d:.1e}"))
}

fn laplace_cross_check() -> Outcome {
    let sc = canon();
    let g = sc.canonical_datum();
    let dt = 0.05;
    let n = 400;
    let run = RunSpec {
        t_final: 20.0,
        dt,
        probe_times: (0..=n).map(|i| i as f64 * dt).collect(),
        epsilons: vec![],
    };
    let ((transform, r), elapsed) = timed(|| {
        let mut acc = sc.zeros::<f64>();
        evolve_deterministic_observed(&sc, &g, None, &run, |t, f| {
            let w = if t == 0.0 || (t - 20.0).abs() < 0.5 * dt {
                0.5 * dt
            } else {
                dt
            };
            acc.axpy(w * (-t).exp(), f).unwrap();
        })
        .unwrap();
        (acc, transport_resolvent(&sc, C::new(1.0, 0.0), &g).unwrap())
    });
    let err = transform.l1_distance(&r.f.re()).unwrap();
    let pass = err <= 1e-3 && elapsed.as_secs_f64() < 60.0;
    Outcome::new(
        pass,
        format!("L1 error {err:.2e}, {:.1} s", elapsed.as_secs_f64()),
    )
}

fn mass_conservation() -> Outcome {
    let sc = canon();
    let g = sc.canonical_datum();
    let run = RunSpec {
        t_final: 200.0,
        dt: 0.05,
        probe_times: (0..=40).map(|i| 5.0 * i as f64).collect(),
        epsilons: vec![],
    };
    let det = evolve_deterministic(&sc, &g, None, &run).unwrap();
    let m = det.column(TOTAL_MASS).unwrap();
    let drift = m
        .iter()
        .map(|x| ((x - m[0]) / m[0]).abs())
        .fold(0.0, f64::max);
    let spec = McSpec {
        n_particles: 100_000,
        seed: 3,
        t_final: 20.0,
        probe_times: vec![0.0, 5.0, 10.0, 20.0],
        epsilons: vec![],
    };
    let mc = evolve_mc(&sc, &g, None, &spec).unwrap().series;
    let w = mc.column(TOTAL_MASS).unwrap();
    let exact = w.iter().all(|x| *x == w[0]);
    Outcome::new(
        drift < 1e-8 && exact,
        format!("deterministic drift {drift:.1e}, MC weight constant: {exact}"),
    )
}

fn engine_agreement() -> Outcome {
    let sc = canon();
    let g = sc.canonical_datum();
    let col = region_column(0.5);
    let run = RunSpec {
        t_final: 20.0,
        dt: 0.05,
        probe_times: vec![20.0],
        epsilons: vec![0.5],
    };
    let det = evolve_deterministic(&sc, &g, None, &run)
        .unwrap()
        .column(&col)
        .unwrap()[0];
    let spec = McSpec {
        n_particles: 1_000_000,
        seed: 1,
        t_final: 20.0,
        probe_times: vec![20.0],
        epsilons: vec![0.5],
    };
    let mc = evolve_mc(&sc, &g, None, &spec).unwrap().series;
    let (m, se) = (
        mc.column(&col).unwrap()[0],
        mc.column(&stderr_column(&col)).unwrap()[0],
    );
    let z = (det - m) / se;
    Outcome::new(
        z.abs() < 3.0,
        format!("det {det:.5} vs MC {m:.5} +- {se:.1e}, z = {z:.2}"),
    )
}

fn rate_verification() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let cfg = bundled("canon-1.toml", dir.path());
    let (code, elapsed) = timed(|| run_config(Command::Rates, &cfg).unwrap());
    let text = std::fs::read_to_string(dir.path().join("rates.json")).unwrap();
    let json: serde_json::Value = serde_json::from_str(&text).unwrap();
    let fit = &json["fits"][0];
    let p = fit["fitted_exponent"].as_f64().unwrap();
    let r2 = fit["r_squared"].as_f64().unwrap();
    let pass =
        code == 0 && fit["verdict"] == "pass" && p >= 0.2 - 0.05 && elapsed.as_secs_f64() < 600.0;
    Outcome::new(
        pass,
        format!(
            "exponent {p:.4} (r^2 {r2:.3}) on [10, 200], exit {code}, {:.1} s",
            elapsed.as_secs_f64()
        ),
    )
}

fn sweeping() -> Outcome {
    let sc = Scenario::sweep1(GridParams::default()).unwrap();
    let eq = spectral::equilibrium(&sc, &spectral::default_sweep(sc.grid.v_min)).unwrap();
    let tracking = eq
        .integrability
        .sweep
        .iter()
        .map(|(v, m)| (m / (2.0 * (1.0 / v).ln()) - 1.0).abs())
        .fold(0.0, f64::max);
    let divergent = eq.integrability.verdict == Integrability::DivergentTrend;
    let probes = vec![10.0, 20.0, 40.0, 80.0, 160.0];
    let run = RunSpec {
        t_final: 160.0,
        dt: 0.05,
        probe_times: probes,
        epsilons: vec![0.1],
    };
    let s = evolve_deterministic(&sc, &sc.canonical_datum(), None, &run).unwrap();
    let r = s.column(&region_column(0.1)).unwrap();
    let monotone = r.windows(2).all(|w| w[1] <= w[0]);
    let halved = r[4] < 0.5 * r[0];
    Outcome::new(
        divergent && tracking <= 0.05 && monotone && halved,
        format!(
            "divergent: {divergent}, tracking {:.1}%, monotone: {monotone}, region(160)/region(10) = {:.3} (need < 0.5)",
            100.0 * tracking,
            r[4] / r[0]
        ),
    )
}

fn derivative_bounds() -> Outcome {
    let sc = canon();
    let g = sc.canonical_datum();
    let norms = |s: &[f64]| -> Vec<[f64; 2]> {
        s.iter()
            .map(|&s| {
                let d = f_derivative_norms(&sc, &g, s, 1).unwrap();
                [d[0].value, d[1].value]
            })
            .collect()
    };
    let small = log_space(1e-2, 1.0, 9);
    let values = norms(&small);
    let lx: Vec<f64> = small.iter().map(|s| (1.0 / s).ln()).collect();
    let mut slopes = [0.0; 2];
    for (j, slope) in slopes.iter_mut().enumerate() {
        let ly: Vec<f64> = values.iter().map(|v| v[j].ln()).collect();
        *slope = least_squares(&lx, &ly).slope;
    }
    let far = norms(&log_space(1.0, 10.0, 5));
    let sup = far.iter().flatten().copied().fold(0.0, f64::max);
    let pass = slopes[0] <= 2.1 && slopes[1] <= 4.1 && sup.is_finite();
    Outcome::new(
        pass,
        format!(
            "slopes j=0 {:.3} (<= 2.1), j=1 {:.3} (<= 4.1), sup on [1, 10] {sup:.3e}",
            slopes[0], slopes[1]
        ),
    )
}

fn axis_continuity() -> Outcome {
    let sc = canon();
    let g = sc.canonical_datum();
    let mut pass = true;
    let mut detail = Vec::new();
    for s in [0.1, 1.0] {
        let on_axis = transport_resolvent(&sc, C::new(0.0, s), &g).unwrap().f;
        let d: Vec<f64> = [1e-2, 1e-3, 1e-4]
            .iter()
            .map(|&e| {
                transport_resolvent(&sc, C::new(e, s), &g)
                    .unwrap()
                    .f
                    .l1_distance(&on_axis)
                    .unwrap()
            })
            .collect();
        pass &= d.windows(2).all(|w| w[1] < w[0]);
        detail.push(format!("s={s}: {:.2e} {:.2e} {:.2e}", d[0], d[1], d[2]));
    }
    Outcome::new(pass, detail.join("; "))
}

fn assumption_verdicts() -> Outcome {
    let seq = [1e-2, 1e-3, 1e-4];
    let pm2 = KernelSpec::PowerMaxwell { m: 2.0 };
    let canon = check_assumptions(
        &BoundaryOperatorSpec::diffuse(Wall::Left, pm2),
        &BoundaryOperatorSpec::diffuse(Wall::Right, pm2),
        1,
        &seq,
        400,
        3.0,
    )
    .unwrap();
    let growing: Vec<&str> = canon
        .entries
        .iter()
        .filter(|e| {
            matches!(
                e.group,
                AssumptionGroup::Hyp1
                    | AssumptionGroup::HypO2
                    | AssumptionGroup::UniformlyBoundedDerivativesSuppl
            ) && e.verdict != Trend::BoundedTrend
        })
        .map(|e| e.formula.as_str())
        .collect();
    let constant = check_assumptions(
        &BoundaryOperatorSpec::diffuse(Wall::Left, KernelSpec::Constant),
        &BoundaryOperatorSpec::diffuse(Wall::Right, KernelSpec::Constant),
        1,
        &seq,
        400,
        3.0,
    )
    .unwrap();
    let const_growing = constant
        .entry("|v|^-2 O1 O2")
        .is_some_and(|e| e.verdict == Trend::GrowingTrend);
    let specular = check_assumptions(
        &BoundaryOperatorSpec::specular(Wall::Left),
        &BoundaryOperatorSpec::specular(Wall::Right),
        1,
        &seq,
        400,
        3.0,
    )
    .unwrap();
    let spec_bounded = specular
        .group(AssumptionGroup::Hyp1)
        .all(|e| e.verdict == Trend::BoundedTrend);
    Outcome::new(
        growing.is_empty() && const_growing && spec_bounded,
        format!(
            "CANON-1 entries not bounded: {growing:?}; Constant |v|^-2 O1 O2 growing: {const_growing}; specular Hyp 1 bounded: {spec_bounded}"
        ),
    )
}

fn criteria() -> Vec<Criterion> {
    let c = |id, name, run| Criterion {
        id,
        name,
        known_red: false,
        run,
    };
    vec![
        c(1, "equilibrium_oracle", equilibrium_oracle),
        c(2, "spectral_radius_oracle", spectral_radius_oracle),
        c(3, "norm_expansion_near_zero", norm_expansion),
        c(4, "inverse_blowup_bound", inverse_blowup),
        c(5, "resolvent_stationarity", resolvent_stationarity),
        c(6, "laplace_cross_check", laplace_cross_check),
        c(7, "mass_conservation", mass_conservation),
        c(8, "engine_agreement", engine_agreement),
        c(9, "rate_verification", rate_verification),
        Criterion {
            id: 10,
            name: "sweeping",
            known_red: true,
            run: sweeping,
        },
        c(11, "derivative_bounds", derivative_bounds),
        c(12, "axis_continuity", axis_continuity),
        Criterion {
            id: 13,
            name: "assumption_verdicts",
            known_red: true,
            run: assumption_verdicts,
        },
    ]
}

fn main() {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let strict = args
        .iter()
        .any(|a| a == "--include-ignored" || a == "--ignored");
    let filters: Vec<&str> = args
        .iter()
        .filter(|a| !a.starts_with('-'))
        .map(String::as_str)
        .collect();
    let selected: Vec<Criterion> = criteria()
        .into_iter()
        .filter(|c| filters.is_empty() || filters.iter().any(|f| c.name.contains(f)))
        .collect();
    if args.iter().any(|a| a == "--list") {
        for c in &selected {
            println!("criterion_{:02}_{}: test", c.id, c.name);
        }
        return;
    }

    let mut blocking = 0;
    for c in &selected {
        let (out, elapsed) = timed(c.run);
        let status = if out.pass { "PASS" } else { "FAIL" };
        let note = if c.known_red && !out.pass {
            " [ledgered]"
        } else {
            ""
        };
        println!(
            "criterion {:>2} {:<26} {status}{note}  {} ({:.1} s)",
            c.id,
            c.name,
            out.detail,
            elapsed.as_secs_f64()
        );
        if !out.pass && (strict || !c.known_red) {
            blocking += 1;
        }
    }
    if blocking > 0 {
        println!("acceptance: {blocking} blocking failure(s)");
        std::process::exit(1);
    }
    println!("acceptance: no blocking failures");
}
