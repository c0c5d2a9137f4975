//! Perron flux and invariant density for fully diffuse Power-Maxwell walls,
//! checked against the closed form `h0 = 3v^2`, `psi0 = |v| / 2`.

use slabkin::scenario::{GridParams, Scenario};
use slabkin::spectral;

fn main() -> slabkin::Result<()> {
    let sc = Scenario::canon1(GridParams::default())?;
    let eq = spectral::equilibrium(&sc, &spectral::default_sweep(sc.grid.v_min))?;
    println!("r_sigma(G0) = {:.15}", eq.r_sigma);

    let worst = eq
        .h0
        .values
        .iter()
        .zip(sc.pos.speeds())
        .map(|(h, v)| (h - 3.0 * v * v).abs())
        .fold(0.0, f64::max);
    println!("max |h0 - 3v^2| = {worst:.2e}");

    println!("inverse-speed moment as v_min shrinks:");
    for (v_min, m) in &eq.integrability.sweep {
        println!("  v_min = {v_min:.0e}  moment = {m:.10}");
    }
    println!("verdict: {:?}", eq.integrability.verdict);

    let psi = eq.psi0()?;
    let j = sc.pos.n() / 2;
    let v = sc.pos.node(j);
    println!(
        "psi0(0, {v:.4}) = {:.10}  (|v|/2 = {:.10})",
        psi.get(slabkin::vgrid::Sign::Positive, 0, j),
        v / 2.0
    );
    println!("int psi0 = {:.15}", psi.integral());
    Ok(())
}
