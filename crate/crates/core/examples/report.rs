//! Assemble a provenance-stamped JSON report without going through the CLI.

use slabkin::analysis::{build_report, config_hash, fit_rate, NamedSeries, Provenance};
use slabkin::dynamics::{evolve_deterministic, RunSpec, DISTANCE};
use slabkin::scenario::{GridParams, Scenario};
use slabkin::spectral;

fn main() -> slabkin::Result<()> {
    let sc = Scenario::canon1(GridParams {
        n_v: 200,
        ..GridParams::default()
    })?;
    let eq = spectral::equilibrium(&sc, &spectral::default_sweep(sc.grid.v_min))?;
    let probes: Vec<f64> = (1..=20).map(|i| 5.0 * i as f64).collect();
    let run = RunSpec {
        t_final: 100.0,
        dt: 0.05,
        probe_times: probes,
        epsilons: vec![],
    };
    let series = evolve_deterministic(&sc, &sc.canonical_datum(), eq.psi0.as_ref(), &run)?;
    let fit = fit_rate(&series, DISTANCE, (10.0, 100.0), 1)?;

    let provenance = Provenance::new(&sc, config_hash("example: canon-1 at n_v = 200"), vec![]);
    let report = build_report(
        provenance,
        Some(&eq),
        vec![],
        vec![NamedSeries {
            name: "evolve".into(),
            series,
        }],
        vec![fit],
    );
    println!("{}", report.to_json()?);
    Ok(())
}
