//! Drive the command-line pipeline from an inline configuration.

use slabkin::cli::config::Config;
use slabkin::cli::{run_config, Command};

const CONFIG: &str = r#"
[scenario]
a = 1.0
left = { alpha = 0.5, kernel = { family = "power_maxwell", m = 2.0 } }
right = { alpha = 0.0, kernel = { family = "perturbed_power_maxwell", m = 2.0, theta = 0.5 } }

[grid]
n_v = 128
n_x = 65

[evolve]
t_final = 100.0

[rates]
window = [10.0, 100.0]
"#;

fn main() -> slabkin::Result<()> {
    let dir = std::env::temp_dir().join("slabkin-run-config");
    let cfg = Config::from_toml(
        CONFIG,
        &[format!("output.dir = {:?}", dir.display().to_string())],
    )?;
    for cmd in [Command::Equilibrium, Command::Assumptions, Command::Rates] {
        let code = run_config(cmd, &cfg)?;
        println!("{cmd:?}: exit {code}");
    }
    let mut files: Vec<_> = std::fs::read_dir(&dir)
        .map_err(|e| slabkin::Error::Parameter(e.to_string()))?
        .flatten()
        .map(|e| e.file_name())
        .collect();
    files.sort();
    println!("wrote {files:?} to {}", dir.display());
    Ok(())
}
