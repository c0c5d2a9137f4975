//! Particle simulation of the same problem, side by side with the
//! deterministic flux solver.

use slabkin::dynamics::{evolve_deterministic, evolve_mc, stderr_column, McSpec, RunSpec};
use slabkin::scenario::{GridParams, Scenario};
use slabkin::series::region_column;

fn main() -> slabkin::Result<()> {
    let sc = Scenario::mix1(GridParams::default())?;
    let g = sc.canonical_datum();
    let probes = vec![1.0, 5.0, 10.0, 20.0];
    let eps = vec![0.5, 0.1];

    let run = RunSpec {
        t_final: 20.0,
        dt: 0.05,
        probe_times: probes.clone(),
        epsilons: eps.clone(),
    };
    let det = evolve_deterministic(&sc, &g, None, &run)?;
    let spec = McSpec {
        n_particles: 200_000,
        seed: 7,
        t_final: 20.0,
        probe_times: probes,
        epsilons: eps.clone(),
    };
    let mc = evolve_mc(&sc, &g, None, &spec)?;
    println!(
        "{} particles, {} wall draws resampled below v_min",
        mc.n_particles, mc.resampled
    );

    for e in eps {
        let col = region_column(e);
        let (d, m, se) = (
            det.column(&col).unwrap(),
            mc.series.column(&col).unwrap(),
            mc.series.column(&stderr_column(&col)).unwrap(),
        );
        println!("{col}");
        for (i, t) in det.times.iter().enumerate() {
            println!(
                "  t = {t:>5}: flux solver {:.6}  particles {:.6} +- {:.6}  z = {:+.2}",
                d[i],
                m[i],
                se[i],
                (d[i] - m[i]) / se[i]
            );
        }
    }
    Ok(())
}
