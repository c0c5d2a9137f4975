//! Diagnostics for an initial datum before evolving it.

use slabkin::dynamics::validate_initial_data;
use slabkin::scenario::{GridParams, Scenario};
use slabkin::spectral;

fn main() -> slabkin::Result<()> {
    let sc = Scenario::canon1(GridParams {
        n_v: 200,
        ..GridParams::default()
    })?;
    let eq = spectral::equilibrium(&sc, &spectral::default_sweep(sc.grid.v_min))?;
    let data = [
        ("canonical", sc.canonical_datum()),
        ("psi0", eq.psi0()?.clone()),
        ("uniform", sc.density(|_, _| 0.25)),
    ];
    for (name, g) in data {
        let r = validate_initial_data(&g, &sc, 1, eq.psi0.as_ref())?;
        println!("== {name}");
        println!("  weighted norm trend {:?}", r.z_norm_verdict);
        println!(
            "  wall residuals {:.2e} / {:.2e}",
            r.left_residual, r.right_residual
        );
        println!("  ||v dg/dx|| = {:.4e}", r.transport_l1);
        if let Some(m) = r.mean_after_projection {
            println!("  mean after projection {m:.2e}");
        }
    }
    Ok(())
}
