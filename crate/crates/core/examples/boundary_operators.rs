//! Discretize partly diffuse wall laws and look at what they do to a flux.

use slabkin::boundary::{discretize, BoundaryOperatorSpec, KernelSpec, Wall};
use slabkin::vgrid::{grid_pair, HalfGridVector};

fn mean_speed(h: &HalfGridVector) -> f64 {
    let g = &h.grid;
    h.values
        .iter()
        .zip(g.speeds())
        .zip(g.weights())
        .map(|((h, v), w)| w * h * v)
        .sum::<f64>()
        / h.integral()
}

fn main() -> slabkin::Result<()> {
    let (pos, neg) = grid_pair(96, 1e-3, 3.0)?;
    let incoming = HalfGridVector::from_fn(neg.clone(), |v| 4.0 * v.abs().powi(3));
    println!("incoming flux mass {:.12}", incoming.integral());

    let kernels = [
        KernelSpec::PowerMaxwell { m: 2.0 },
        KernelSpec::Constant,
        KernelSpec::PerturbedPowerMaxwell { m: 2.0, theta: 0.5 },
    ];
    for kernel in kernels {
        for alpha in [0.0, 0.5, 1.0] {
            let spec = BoundaryOperatorSpec::new(Wall::Left, alpha, kernel)?;
            let op = discretize(&spec, neg.clone(), pos.clone())?;
            let out = op.apply(&incoming)?;
            let worst_column = op
                .column_masses()
                .iter()
                .map(|m| (m - 1.0).abs())
                .fold(0.0, f64::max);
            println!(
                "{kernel:?} alpha={alpha}: out mass {:.12}, mean speed {:.4}, max |column mass - 1| {worst_column:.1e}",
                out.integral(),
                mean_speed(&out)
            );
        }
    }
    Ok(())
}
