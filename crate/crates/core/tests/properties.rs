use num_complex::Complex64 as C;
use proptest::prelude::*;

use slabkin::boundary::KernelSpec;
use slabkin::cli::config::Config;
use slabkin::cli::{run_config, Command};
use slabkin::dynamics::{
    evolve_deterministic, evolve_mc, stderr_column, McSpec, RunSpec, DISTANCE, TOTAL_MASS,
};
use slabkin::resolvent::{g_lambda, transport_resolvent};
use slabkin::scenario::{GridParams, Scenario, WallLaw};
use slabkin::series::region_column;
use slabkin::spectral::{
    self, g0, g0_tilde, leading_eig, mirror_consistency, DEFAULT_MAX_ITER, DEFAULT_TOL,
};
use slabkin::vgrid::{HalfGrid, HalfGridVector};

fn canon() -> Scenario {
    Scenario::canon1(GridParams::default()).unwrap()
}

fn panel_edges(grid: &HalfGrid) -> Vec<f64> {
    let p = grid.panels().len();
    let (v_min, q) = (grid.v_min(), grid.grading_q());
    (0..=p)
        .map(|k| v_min + (1.0 - v_min) * (k as f64 / p as f64).powf(q))
        .collect()
}

/// Panel-wise Lagrange interpolation of a nodal function onto another grid.
fn interpolate_onto(h: &HalfGridVector, target: &HalfGrid) -> Vec<f64> {
    let edges = panel_edges(&h.grid);
    let speeds = h.grid.speeds();
    target
        .speeds()
        .iter()
        .map(|&v| {
            let k = edges
                .partition_point(|&e| e <= v)
                .saturating_sub(1)
                .min(edges.len() - 2);
            let range = h.grid.panels()[k].clone();
            range
                .clone()
                .map(|i| {
                    let li: f64 = range
                        .clone()
                        .filter(|&m| m != i)
                        .map(|m| (v - speeds[m]) / (speeds[i] - speeds[m]))
                        .product();
                    li * h.values[i]
                })
                .sum()
        })
        .collect()
}

#[test]
fn perron_flux_is_stable_under_refinement() {
    let families = [
        KernelSpec::PowerMaxwell { m: 2.0 },
        KernelSpec::PowerMaxwell { m: 1.0 },
        KernelSpec::PerturbedPowerMaxwell { m: 2.0, theta: 0.5 },
    ];
    for k in families {
        let law = WallLaw::diffuse(k);
        let flux = |n_v| {
            let sc = Scenario::new(
                1.0,
                law,
                law,
                GridParams {
                    n_v,
                    n_x: 3,
                    ..GridParams::default()
                },
            )
            .unwrap();
            leading_eig(&g0(&sc.o1, &sc.o2).unwrap(), DEFAULT_TOL, DEFAULT_MAX_ITER)
                .unwrap()
                .1
        };
        let (coarse, fine) = (flux(200), flux(400));
        let mapped = interpolate_onto(&coarse, &fine.grid);
        let diff: f64 = fine
            .values
            .iter()
            .zip(&mapped)
            .zip(fine.grid.weights())
            .map(|((a, b), w)| w * (a - b).abs())
            .sum();
        assert!(diff < 1e-6, "{k:?}: {diff:e}");
    }
}

#[test]
fn perron_fixed_point_and_mirror_factorization() {
    let sc = canon();
    let g = g0(&sc.o1, &sc.o2).unwrap();
    let (r, h0) = leading_eig(&g, DEFAULT_TOL, DEFAULT_MAX_ITER).unwrap();
    let res = g.apply(&h0).unwrap();
    let fixed: f64 = res
        .values
        .iter()
        .zip(&h0.values)
        .zip(h0.grid.weights())
        .map(|((a, b), w)| w * (a - b).abs())
        .sum();
    assert!((r - 1.0).abs() < 1e-12 && fixed < 1e-10, "{fixed:e}");
    assert!(mirror_consistency(&sc.o1, &sc.o2, &h0).unwrap() < 1e-8);
    let (_, ht) = leading_eig(
        &g0_tilde(&sc.o1, &sc.o2).unwrap(),
        DEFAULT_TOL,
        DEFAULT_MAX_ITER,
    )
    .unwrap();
    let mapped = sc.o2.apply(&h0).unwrap();
    let (sa, sb): (f64, f64) = (ht.values.iter().sum(), mapped.values.iter().sum());
    let diff: f64 = ht
        .values
        .iter()
        .zip(&mapped.values)
        .zip(ht.grid.weights())
        .map(|((a, b), w)| w * (a / sa - b / sb).abs())
        .sum();
    assert!(diff * sa < 1e-8, "{diff:e}");
}

#[test]
fn equilibrium_is_stationary_under_the_flux_solver() {
    let sc = canon();
    let eq = spectral::equilibrium(&sc, &spectral::default_sweep(1e-4)).unwrap();
    let psi = eq.psi0().unwrap();
    let probes: Vec<f64> = (0..=50).map(f64::from).collect();
    let run = RunSpec {
        t_final: 50.0,
        dt: 0.05,
        probe_times: probes,
        epsilons: vec![],
    };
    let s = evolve_deterministic(&sc, psi, Some(psi), &run).unwrap();
    let worst = s
        .column(DISTANCE)
        .unwrap()
        .iter()
        .copied()
        .fold(0.0, f64::max);
    assert!(worst < 5e-8, "{worst:e}");
}

#[test]
fn first_resolvent_identity() {
    // the x-reconstruction between the two solves is second order in the
    // spacing; this resolution puts it below the tolerance
    let sc = Scenario::canon1(GridParams {
        n_x: 3201,
        ..GridParams::default()
    })
    .unwrap();
    let g = sc.canonical_datum();
    let (l, m) = (C::new(1.0, 0.0), C::new(2.0, 0.5));
    let rl = transport_resolvent(&sc, l, &g).unwrap();
    let rm = transport_resolvent(&sc, m, &g).unwrap();
    let rlrm = transport_resolvent(&sc, l, &rm.f).unwrap();
    for r in [&rl, &rm, &rlrm] {
        assert!(r.boundary_residual < 1e-8);
    }
    let mut d = rl.f.clone();
    d.axpy(C::new(-1.0, 0.0), &rm.f).unwrap();
    d.axpy(-(m - l), &rlrm.f).unwrap();
    assert!(d.l1_norm() < 1e-7, "{:e}", d.l1_norm());
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 24, ..ProptestConfig::default() })]

    #[test]
    fn transfer_norm_is_bounded_by_the_attenuation(re in 0.0f64..2.0, im in -20.0f64..20.0) {
        let sc = Scenario::mix1(GridParams { n_v: 96, n_x: 3, ..GridParams::default() }).unwrap();
        let gl = g_lambda(&sc.o1, &sc.o2, sc.a, C::new(re, im)).unwrap();
        prop_assert!(gl.norm() <= (-4.0 * sc.a * re).exp() + 1e-10);
    }
}

#[test]
fn mass_is_conserved_in_every_bundled_scenario() {
    let g = GridParams::default();
    for sc in [
        Scenario::canon1(g),
        Scenario::sweep1(g),
        Scenario::spec1(g),
        Scenario::mix1(g),
    ] {
        let sc = sc.unwrap();
        let datum = sc.canonical_datum();
        let run = RunSpec {
            t_final: 200.0,
            dt: 0.05,
            probe_times: (0..=20).map(|i| 10.0 * i as f64).collect(),
            epsilons: vec![],
        };
        // errors out if a snapshot goes negative
        let s = evolve_deterministic(&sc, &datum, None, &run).unwrap();
        let m = s.column(TOTAL_MASS).unwrap();
        let drift = m
            .iter()
            .map(|x| ((x - m[0]) / m[0]).abs())
            .fold(0.0, f64::max);
        assert!(drift < 1e-8, "{drift:e}");
    }
}

#[test]
fn halving_the_step_barely_moves_the_distance() {
    let sc = canon();
    let eq = spectral::equilibrium(&sc, &spectral::default_sweep(1e-4)).unwrap();
    let g = sc.canonical_datum();
    let at = |dt| {
        let run = RunSpec {
            t_final: 50.0,
            dt,
            probe_times: vec![50.0],
            epsilons: vec![],
        };
        evolve_deterministic(&sc, &g, eq.psi0.as_ref(), &run)
            .unwrap()
            .column(DISTANCE)
            .unwrap()[0]
    };
    let (d1, d2) = (at(0.05), at(0.025));
    assert!(((d1 - d2) / d2).abs() < 1e-3, "{d1} vs {d2}");
}

#[test]
fn engines_agree_on_binned_observables() {
    let sc = canon();
    let g = sc.canonical_datum();
    let probes = vec![2.0, 5.0, 10.0, 20.0];
    let eps = vec![0.5, 0.1];
    let run = RunSpec {
        t_final: 20.0,
        dt: 0.05,
        probe_times: probes.clone(),
        epsilons: eps.clone(),
    };
    let det = evolve_deterministic(&sc, &g, None, &run).unwrap();
    let spec = McSpec {
        n_particles: 1_000_000,
        seed: 11,
        t_final: 20.0,
        probe_times: probes,
        epsilons: eps.clone(),
    };
    let mc = evolve_mc(&sc, &g, None, &spec).unwrap().series;
    for e in eps {
        let c = region_column(e);
        let (a, b, se) = (
            det.column(&c).unwrap(),
            mc.column(&c).unwrap(),
            mc.column(&stderr_column(&c)).unwrap(),
        );
        for i in 0..a.len() {
            assert!(
                (a[i] - b[i]).abs() < 3.0 * se[i],
                "{c} at t = {}: {} vs {} +- {}",
                det.times[i],
                a[i],
                b[i],
                se[i]
            );
        }
    }
    let (a, b) = (
        det.column(TOTAL_MASS).unwrap(),
        mc.column(TOTAL_MASS).unwrap(),
    );
    assert!(a.iter().zip(b).all(|(x, y)| (x - y).abs() < 1e-8));
}

#[test]
fn sweeping_region_mass_is_non_increasing() {
    let sc = Scenario::sweep1(GridParams::default()).unwrap();
    let run = RunSpec {
        t_final: 320.0,
        dt: 0.05,
        probe_times: vec![10.0, 20.0, 40.0, 80.0, 160.0, 320.0],
        epsilons: vec![0.1, 0.5],
    };
    let s = evolve_deterministic(&sc, &sc.canonical_datum(), None, &run).unwrap();
    for e in [0.1, 0.5] {
        let r = s.column(&region_column(e)).unwrap();
        assert!(r.windows(2).all(|w| w[1] <= w[0]), "{r:?}");
    }
}

fn cli_config(dir: &std::path::Path) -> Config {
    let o = [
        "grid.n_v=64".to_string(),
        "grid.n_x=21".into(),
        "mc.n_particles=20000".into(),
        "evolve.t_final=40.0".into(),
        "rates.window=[2.0, 40.0]".into(),
        "scan.n_points=12".into(),
        format!("output.dir=\"{}\"", dir.display()),
    ];
    Config::from_toml("", &o).unwrap()
}

#[test]
fn cli_outputs_are_reproducible_and_stamped() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let commands = [
        Command::Equilibrium,
        Command::Assumptions,
        Command::Scan,
        Command::Resolve,
        Command::Evolve,
        Command::Mc,
        Command::Rates,
        Command::Sweep,
    ];
    for cmd in commands {
        run_config(cmd, &cli_config(a.path())).unwrap();
        run_config(cmd, &cli_config(b.path())).unwrap();
    }
    let hash = slabkin::analysis::config_hash(&cli_config(a.path()).canonical());
    let mut names: Vec<_> = std::fs::read_dir(a.path())
        .unwrap()
        .map(|e| e.unwrap().file_name())
        .collect();
    names.sort();
    assert!(names.len() >= 15, "{names:?}");
    for name in names {
        let x = std::fs::read(a.path().join(&name)).unwrap();
        let y = std::fs::read(b.path().join(&name)).unwrap();
        assert_eq!(x, y, "{name:?} differs between identical runs");
        let text = String::from_utf8(x).unwrap();
        assert!(
            text.contains(&hash) && text.contains(env!("CARGO_PKG_VERSION")),
            "{name:?} lacks provenance"
        );
    }
}
