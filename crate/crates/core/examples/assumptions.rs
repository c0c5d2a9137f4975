//! Structural hypothesis checker: discrete operator norms of the weighted
//! wall products as `v_min -> 0`, for three kinds of walls.

use slabkin::boundary::{check_assumptions, BoundaryOperatorSpec, KernelSpec, Wall};

fn main() -> slabkin::Result<()> {
    let pm2 = KernelSpec::PowerMaxwell { m: 2.0 };
    let walls = [
        (
            "power-maxwell(2)",
            BoundaryOperatorSpec::diffuse(Wall::Left, pm2),
            BoundaryOperatorSpec::diffuse(Wall::Right, pm2),
        ),
        (
            "constant",
            BoundaryOperatorSpec::diffuse(Wall::Left, KernelSpec::Constant),
            BoundaryOperatorSpec::diffuse(Wall::Right, KernelSpec::Constant),
        ),
        (
            "specular",
            BoundaryOperatorSpec::specular(Wall::Left),
            BoundaryOperatorSpec::specular(Wall::Right),
        ),
    ];
    for (name, o1, o2) in walls {
        let report = check_assumptions(&o1, &o2, 1, &[1e-2, 1e-3, 1e-4], 200, 3.0)?;
        println!("== {name}");
        for e in &report.entries {
            let last = e.norms.last().map_or(f64::NAN, |n| n.1);
            println!(
                "  {:<24} {:<38} norm {last:>12.4e}  growth {:>6.3}  {:?}",
                e.formula,
                format!("{:?}", e.group),
                e.growth_exponent,
                e.verdict
            );
        }
    }
    Ok(())
}
