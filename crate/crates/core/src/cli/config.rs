//! Run configuration: one TOML tree, unknown keys rejected, dotted overrides.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::boundary::KernelSpec;
use crate::dynamics::{McSpec, RunSpec};
use crate::error::{Error, Result};
use crate::resolvent::ScanQuantity;
use crate::scenario::{GridParams, Scenario, WallLaw};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub a: f64,
    pub left: WallLaw,
    pub right: WallLaw,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        let pm2 = WallLaw::diffuse(KernelSpec::PowerMaxwell { m: 2.0 });
        Self {
            a: 1.0,
            left: pm2,
            right: pm2,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Datum {
    /// `c v^2 sin^2(pi (x+a) / 2a)`, unit mass.
    #[default]
    Canonical,
    /// The invariant density itself.
    Equilibrium,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Spacing {
    #[default]
    Log,
    Linear,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EquilibriumConfig {
    /// Truncations probed for the inverse-speed moment; defaults to decades down to `grid.v_min`.
    pub v_min_sweep: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AssumptionsConfig {
    pub k: u32,
    pub v_min_sequence: Vec<f64>,
}

impl Default for AssumptionsConfig {
    fn default() -> Self {
        Self {
            k: 1,
            v_min_sequence: vec![1e-2, 1e-3, 1e-4],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScanConfig {
    pub quantity: ScanQuantity,
    /// Explicit points; when absent the range below is used.
    pub s_values: Option<Vec<f64>>,
    pub s_min: f64,
    pub s_max: f64,
    pub n_points: usize,
    pub spacing: Spacing,
    /// Thresholds for the sup over `|s| >= eta`.
    pub eta: Vec<f64>,
    /// Small-`s` window of the blow-up fit.
    pub window: (f64, f64),
}

impl Default for ScanConfig {
    fn default() -> Self {
        Self {
            quantity: ScanQuantity::NormG,
            s_values: None,
            s_min: 1e-3,
            s_max: 50.0,
            n_points: 41,
            spacing: Spacing::Log,
            eta: vec![0.01, 0.1, 0.5],
            window: (1e-3, 1e-1),
        }
    }
}

impl ScanConfig {
    pub fn points(&self) -> Result<Vec<f64>> {
        if let Some(s) = &self.s_values {
            return Ok(s.clone());
        }
        if self.n_points < 2 || !(self.s_min < self.s_max) {
            return Err(Error::Parameter(format!(
                "scan range needs n_points >= 2 and s_min < s_max, got {} points on [{}, {}]",
                self.n_points, self.s_min, self.s_max
            )));
        }
        Ok(match self.spacing {
            Spacing::Log if self.s_min > 0.0 => {
                crate::analysis::log_space(self.s_min, self.s_max, self.n_points)
            }
            Spacing::Log => {
                return Err(Error::Parameter(format!(
                    "log spacing needs s_min > 0, got {}",
                    self.s_min
                )));
            }
            Spacing::Linear => {
                let h = (self.s_max - self.s_min) / (self.n_points - 1) as f64;
                (0..self.n_points)
                    .map(|i| self.s_min + h * i as f64)
                    .collect()
            }
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ResolveConfig {
    pub lambda_re: f64,
    pub lambda_im: f64,
    pub datum: Datum,
    /// Position of the exported velocity slice.
    pub x_slice: f64,
}

impl Default for ResolveConfig {
    fn default() -> Self {
        Self {
            lambda_re: 1.0,
            lambda_im: 0.0,
            datum: Datum::Canonical,
            x_slice: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvolveConfig {
    pub t_final: f64,
    /// Defaults to `a / 20`.
    pub dt: Option<f64>,
    /// Explicit probes; when absent `n_probes` log-spaced times on `[t_first, t_final]`.
    pub probe_times: Option<Vec<f64>>,
    pub t_first: f64,
    pub n_probes: usize,
    pub epsilons: Vec<f64>,
    pub datum: Datum,
}

impl Default for EvolveConfig {
    fn default() -> Self {
        Self {
            t_final: 200.0,
            dt: None,
            probe_times: None,
            t_first: 1.0,
            n_probes: 40,
            epsilons: vec![0.5, 0.1],
            datum: Datum::Canonical,
        }
    }
}

impl EvolveConfig {
    pub fn run_spec(&self, a: f64) -> Result<RunSpec> {
        let dt = self.dt.unwrap_or(a / 20.0);
        let probe_times = match &self.probe_times {
            Some(p) => p.clone(),
            None => {
                if !(self.t_first > 0.0 && self.t_first < self.t_final) || self.n_probes < 2 {
                    return Err(Error::Parameter(format!(
                        "probe range needs 0 < t_first < t_final and n_probes >= 2, got {} on [{}, {}]",
                        self.n_probes, self.t_first, self.t_final
                    )));
                }
                let mut p: Vec<f64> =
                    crate::analysis::log_space(self.t_first, self.t_final, self.n_probes)
                        .into_iter()
                        .map(|t| ((t / dt).round() * dt).min(self.t_final))
                        .collect();
                p.dedup();
                p
            }
        };
        Ok(RunSpec {
            t_final: self.t_final,
            dt,
            probe_times,
            epsilons: self.epsilons.clone(),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct McConfig {
    pub n_particles: usize,
    pub seed: u64,
    pub t_final: f64,
    pub probe_times: Vec<f64>,
    pub epsilons: Vec<f64>,
    pub datum: Datum,
}

impl Default for McConfig {
    fn default() -> Self {
        Self {
            n_particles: 100_000,
            seed: 0,
            t_final: 20.0,
            probe_times: vec![5.0, 10.0, 20.0],
            epsilons: vec![0.5],
            datum: Datum::Canonical,
        }
    }
}

impl McConfig {
    pub fn spec(&self) -> McSpec {
        McSpec {
            n_particles: self.n_particles,
            seed: self.seed,
            t_final: self.t_final,
            probe_times: self.probe_times.clone(),
            epsilons: self.epsilons.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RatesConfig {
    pub k: u32,
    /// Fit window; defaults to `[T/20, T]` with `T = evolve.t_final`.
    pub window: Option<(f64, f64)>,
}

impl Default for RatesConfig {
    fn default() -> Self {
        Self { k: 1, window: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepConfig {
    pub probe_times: Vec<f64>,
    pub dt: Option<f64>,
    pub epsilons: Vec<f64>,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            probe_times: vec![10.0, 20.0, 40.0, 80.0, 160.0],
            dt: None,
            epsilons: vec![0.1],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
    Svg,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputConfig {
    pub dir: PathBuf,
    pub formats: Vec<Format>,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self {
            dir: PathBuf::from("out"),
            formats: vec![Format::Csv, Format::Json, Format::Svg],
        }
    }
}

impl OutputConfig {
    pub fn wants(&self, f: Format) -> bool {
        self.formats.contains(&f)
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub scenario: ScenarioConfig,
    pub grid: GridParams,
    pub equilibrium: EquilibriumConfig,
    pub assumptions: AssumptionsConfig,
    pub scan: ScanConfig,
    pub resolve: ResolveConfig,
    pub evolve: EvolveConfig,
    pub mc: McConfig,
    pub rates: RatesConfig,
    pub sweep: SweepConfig,
    pub output: OutputConfig,
}

impl Config {
    /// Parse `text`, then apply each `dotted.key=value` override in order.
    pub fn from_toml(text: &str, overrides: &[String]) -> Result<Self> {
        let mut tree: toml::Table = text
            .parse()
            .map_err(|e| Error::Parameter(format!("config: {e}")))?;
        for o in overrides {
            apply_override(&mut tree, o)?;
        }
        let cfg: Config = tree
            .try_into()
            .map_err(|e: toml::de::Error| Error::Parameter(format!("config: {e}")))?;
        cfg.scenario()?;
        Ok(cfg)
    }

    pub fn load(path: Option<&Path>, overrides: &[String]) -> Result<Self> {
        let text = match path {
            Some(p) => std::fs::read_to_string(p).map_err(|e| {
                Error::Parameter(format!("cannot read config {}: {e}", p.display()))
            })?,
            None => String::new(),
        };
        Self::from_toml(&text, overrides)
    }

    pub fn scenario(&self) -> Result<Scenario> {
        Scenario::new(
            self.scenario.a,
            self.scenario.left,
            self.scenario.right,
            self.grid,
        )
    }

    /// Canonical text of everything that affects results (the output block excluded).
    pub fn canonical(&self) -> String {
        let mut c = self.clone();
        c.output = OutputConfig::default();
        toml::to_string(&c).expect("config is always representable")
    }
}

/// `a.b.c=value`, where `value` is read as a TOML value and falls back to a
/// bare string. Missing parent tables are seeded from the defaults.
fn apply_override(tree: &mut toml::Table, assignment: &str) -> Result<()> {
    let (path, raw) = assignment.split_once('=').ok_or_else(|| {
        Error::Parameter(format!(
            "override '{assignment}' is not of the form key=value"
        ))
    })?;
    let value = format!("v = {}", raw.trim())
        .parse::<toml::Table>()
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(raw.trim().to_string()));
    let keys: Vec<&str> = path.trim().split('.').collect();
    if keys.iter().any(|k| k.is_empty()) {
        return Err(Error::Parameter(format!(
            "override key '{path}' has an empty segment"
        )));
    }
    let defaults = toml::Table::try_from(Config::default()).expect("defaults are representable");
    let mut default_node = Some(&defaults);
    let mut node = tree;
    for k in &keys[..keys.len() - 1] {
        let seed = default_node
            .and_then(|d| d.get(*k))
            .cloned()
            .unwrap_or_else(|| toml::Value::Table(toml::Table::new()));
        default_node = default_node
            .and_then(|d| d.get(*k))
            .and_then(|v| v.as_table());
        let entry = node.entry(k.to_string()).or_insert(seed);
        node = entry
            .as_table_mut()
            .ok_or_else(|| Error::Parameter(format!("override '{path}': '{k}' is not a table")))?;
    }
    node.insert(keys[keys.len() - 1].to_string(), value);
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_config_is_the_canonical_scenario() {
        let c = Config::from_toml("", &[]).unwrap();
        assert_eq!(c, Config::default());
        assert_eq!(c.scenario.left.kernel, KernelSpec::PowerMaxwell { m: 2.0 });
        assert_eq!(c.grid.n_v, 400);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(Config::from_toml("[grid]\nn_vv = 3\n", &[]).is_err());
        assert!(Config::from_toml("[nope]\n", &[]).is_err());
        assert!(Config::from_toml("", &["scan.bogus=1".into()]).is_err());
    }

    #[test]
    fn dotted_overrides() {
        let c = Config::from_toml(
            "[evolve]\nt_final = 50.0\n",
            &[
                "evolve.dt=0.025".into(),
                "scenario.left.alpha=0.5".into(),
                "scan.quantity=norm_inverse".into(),
                "scenario.right.kernel={ family = \"constant\" }".into(),
                "evolve.epsilons=[0.2]".into(),
            ],
        )
        .unwrap();
        assert_eq!(c.evolve.t_final, 50.0);
        assert_eq!(c.evolve.dt, Some(0.025));
        assert_eq!(c.scenario.left.alpha, 0.5);
        assert_eq!(c.scan.quantity, ScanQuantity::NormInverse);
        assert_eq!(c.scenario.right.kernel, KernelSpec::Constant);
        assert_eq!(c.evolve.epsilons, vec![0.2]);
        assert!(Config::from_toml("", &["grid.n_v".into()]).is_err());
    }

    #[test]
    fn invalid_scenario_fails_at_load() {
        assert!(Config::from_toml("", &["scenario.left.alpha=1.5".into()]).is_err());
        assert!(Config::from_toml("", &["scenario.a=-1".into()]).is_err());
    }

    #[test]
    fn canonical_text_round_trips_and_ignores_output() {
        let c = Config::from_toml("", &["mc.seed=9".into()]).unwrap();
        let back = Config::from_toml(&c.canonical(), &[]).unwrap();
        assert_eq!(back, c);
        let moved = Config::from_toml("", &["mc.seed=9".into(), "output.dir=\"elsewhere\"".into()])
            .unwrap();
        assert_eq!(moved.canonical(), c.canonical());
    }

    #[test]
    fn probe_schedule_is_snapped_to_steps() {
        let run = EvolveConfig::default().run_spec(1.0).unwrap();
        assert_eq!(run.dt, 0.05);
        assert!(run.probe_times.windows(2).all(|w| w[0] < w[1]));
        assert!(run
            .probe_times
            .iter()
            .all(|t| ((t / 0.05) - (t / 0.05).round()).abs() < 1e-9));
        assert_eq!(*run.probe_times.last().unwrap(), 200.0);
    }

    #[test]
    fn scan_points() {
        let mut s = ScanConfig {
            n_points: 3,
            s_min: 0.0,
            s_max: 2.0,
            spacing: Spacing::Linear,
            ..Default::default()
        };
        assert_eq!(s.points().unwrap(), vec![0.0, 1.0, 2.0]);
        s.spacing = Spacing::Log;
        assert!(s.points().is_err());
        s.s_values = Some(vec![0.5]);
        assert_eq!(s.points().unwrap(), vec![0.5]);
    }
}
