//! Deterministic evolution of the canonical datum and the algebraic decay of
//! its distance to equilibrium.

use slabkin::analysis::{fit_rate, log_space};
use slabkin::dynamics::{evolve_deterministic, RunSpec, DISTANCE, TOTAL_MASS};
use slabkin::scenario::{GridParams, Scenario};
use slabkin::series::region_column;
use slabkin::spectral;

fn main() -> slabkin::Result<()> {
    let sc = Scenario::canon1(GridParams::default())?;
    let eq = spectral::equilibrium(&sc, &spectral::default_sweep(sc.grid.v_min))?;
    let dt = 0.05;
    let mut probes: Vec<f64> = log_space(1.0, 200.0, 40)
        .into_iter()
        .map(|t| (t / dt).round() * dt)
        .collect();
    probes.dedup();
    let run = RunSpec {
        t_final: 200.0,
        dt,
        probe_times: probes,
        epsilons: vec![0.5, 0.1],
    };
    let series = evolve_deterministic(&sc, &sc.canonical_datum(), eq.psi0.as_ref(), &run)?;

    let (mass, dist, r) = (
        series.column(TOTAL_MASS).unwrap(),
        series.column(DISTANCE).unwrap(),
        series.column(&region_column(0.1)).unwrap(),
    );
    println!(
        "{:>8} {:>20} {:>14} {:>14}",
        "t", "mass", "distance", "mass |v|>0.1"
    );
    for (i, t) in series.times.iter().enumerate().step_by(4) {
        println!(
            "{t:>8.2} {:>20.15} {:>14.6e} {:>14.8}",
            mass[i], dist[i], r[i]
        );
    }

    let fit = fit_rate(&series, DISTANCE, (10.0, 200.0), 1)?;
    println!(
        "distance ~ t^-{:.3} (r^2 {:.3}); guaranteed exponent {:.3}: {:?}",
        fit.fitted_exponent, fit.r_squared, fit.predicted_exponent, fit.verdict
    );
    Ok(())
}
