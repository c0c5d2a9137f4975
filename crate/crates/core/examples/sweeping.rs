//! Constant kernels: the inverse-speed moment diverges, no invariant density
//! exists, and mass drifts towards grazing speeds.

use slabkin::dynamics::{evolve_deterministic, RunSpec};
use slabkin::scenario::{GridParams, Scenario};
use slabkin::series::region_column;
use slabkin::spectral;

fn main() -> slabkin::Result<()> {
    let sc = Scenario::sweep1(GridParams::default())?;
    let eq = spectral::equilibrium(&sc, &[1e-2, 1e-3, 1e-4])?;
    for (v_min, m) in &eq.integrability.sweep {
        println!(
            "v_min = {v_min:.0e}: moment {m:.4}  (2 ln(1/v_min) = {:.4})",
            2.0 * (1.0 / v_min).ln()
        );
    }
    println!(
        "verdict {:?}, psi0 exists: {}",
        eq.integrability.verdict,
        eq.psi0.is_some()
    );

    let probes = vec![10.0, 20.0, 40.0, 80.0, 160.0, 320.0];
    let run = RunSpec {
        t_final: 320.0,
        dt: 0.05,
        probe_times: probes,
        epsilons: vec![0.5, 0.1],
    };
    let s = evolve_deterministic(&sc, &sc.canonical_datum(), None, &run)?;
    let (a, b) = (
        s.column(&region_column(0.5)).unwrap(),
        s.column(&region_column(0.1)).unwrap(),
    );
    for (i, t) in s.times.iter().enumerate() {
        println!(
            "t = {t:>5}: mass |v| > 0.5 {:.5}   mass |v| > 0.1 {:.5}",
            a[i], b[i]
        );
    }
    Ok(())
}
