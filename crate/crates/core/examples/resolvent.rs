//! Solve `(lambda - T) f = g` in the slab and probe the resolvent along the
//! imaginary axis: boundary residuals, stationarity of `psi0`, derivative norms.

use num_complex::Complex64;
use slabkin::resolvent::{f_derivative_norms, transport_resolvent};
use slabkin::scenario::{GridParams, Scenario};
use slabkin::spectral;

fn main() -> slabkin::Result<()> {
    let sc = Scenario::canon1(GridParams {
        n_v: 200,
        n_x: 101,
        ..GridParams::default()
    })?;
    let g = sc.canonical_datum();

    for lambda in [
        Complex64::new(1.0, 0.0),
        Complex64::new(0.1, 2.0),
        Complex64::new(0.0, 0.5),
    ] {
        let r = transport_resolvent(&sc, lambda, &g)?;
        println!(
            "lambda = {lambda}: ||f||_L1 = {:.8}, boundary residual {:.1e}",
            r.f.l1_norm(),
            r.boundary_residual
        );
    }

    let eq = spectral::equilibrium(&sc, &spectral::default_sweep(sc.grid.v_min))?;
    let psi = eq.psi0()?;
    let r = transport_resolvent(&sc, Complex64::new(1.0, 0.0), psi)?;
    println!(
        "||R(1) psi0 - psi0||_L1 = {:.2e}",
        r.f.l1_distance(&psi.to_complex())?
    );

    println!("{:>8} {:>14} {:>14}", "s", "||F||", "||dF/ds||");
    for s in [0.01, 0.03, 0.1, 0.3, 1.0, 3.0] {
        let d = f_derivative_norms(&sc, &g, s, 1)?;
        println!("{s:>8} {:>14.6e} {:>14.6e}", d[0].value, d[1].value);
    }
    Ok(())
}
