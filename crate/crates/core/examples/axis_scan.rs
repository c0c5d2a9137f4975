//! Norms of the wall-to-wall transfer operator and of `(1 - G_is)^-1` along
//! the imaginary axis, with the small-`s` power-law fits.

use slabkin::analysis::log_space;
use slabkin::resolvent::{fit_bounds, scan_imaginary_axis, ScanQuantity};
use slabkin::scenario::{GridParams, Scenario};

fn main() -> slabkin::Result<()> {
    let sc = Scenario::canon1(GridParams {
        n_v: 200,
        ..GridParams::default()
    })?;
    let s = log_space(1e-3, 50.0, 33);

    let g = scan_imaginary_axis(&sc, &s, ScanQuantity::NormG)?;
    let inv = scan_imaginary_axis(&sc, &s, ScanQuantity::NormInverse)?;
    println!("{:>10} {:>14} {:>14}", "s", "||G_is||", "||(1-G)^-1||");
    for ((s, a), (_, b)) in g.points.iter().zip(&inv.points) {
        println!("{s:>10.3e} {a:>14.10} {b:>14.6}");
    }

    let gb = fit_bounds(&g, &[0.01, 0.1, 0.5], (1e-3, 1e-1))?;
    if let Some(gap) = gb.gap {
        println!("1 - ||G_is|| ~ {:.4} s^{:.4}", gap.constant, gap.exponent);
    }
    let ib = fit_bounds(&inv, &[0.01, 0.1, 0.5], (1e-3, 1e-1))?;
    println!(
        "||(1 - G_is)^-1|| ~ {:.4} s^-{:.4}",
        ib.blowup_constant, ib.blowup_exponent
    );
    for (eta, sup) in ib.sup_away {
        println!("  sup over s >= {eta}: {sup:.4}");
    }
    Ok(())
}
