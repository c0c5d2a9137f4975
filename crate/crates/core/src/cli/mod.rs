//! Command-line front end: configuration, subcommand dispatch and artifacts.
//!
//! Exit codes: 0 success, 2 invalid input, 3 numerical failure,
//! 4 a `rates` run whose fitted exponent misses the prediction.

pub mod config;
pub mod output;

use std::path::PathBuf;

use clap::{Parser, Subcommand};
use num_complex::Complex64;
use serde::Serialize;

use crate::analysis::{
    build_report, config_hash, fit_rate, least_squares, ExperimentReport, NamedSeries, Provenance,
    ScanEntry, Verdict,
};
use crate::boundary::check_assumptions;
use crate::dynamics::{evolve_deterministic, evolve_mc, DISTANCE};
use crate::error::{Error, Result};
use crate::phase::PhaseDensity;
use crate::resolvent::{fit_bounds, scan_imaginary_axis, transport_resolvent, ScanQuantity};
use crate::scenario::Scenario;
use crate::series::region_column;
use crate::spectral::{
    default_sweep, equilibrium, g0, irreducibility_check, second_eigenvalue_modulus,
    EquilibriumProfile,
};
use crate::vgrid::Sign;
use config::{Config, Datum, Format};
use output::{fmt17, LogLogPlot, Sink, Stamp};

pub const EXIT_OK: u8 = 0;
pub const EXIT_INVALID: u8 = 2;
pub const EXIT_NUMERICAL: u8 = 3;
pub const EXIT_VERDICT: u8 = 4;

#[derive(Debug, Parser)]
#[command(
    name = "slabkin",
    version,
    about = "Slab transport with partly diffuse walls: equilibria, resolvent scans, decay rates"
)]
pub struct Args {
    /// TOML configuration; omitted means the built-in defaults.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Dotted override, e.g. `--set evolve.dt=0.025` (repeatable).
    #[arg(long = "set", value_name = "KEY=VALUE", global = true)]
    pub set: Vec<String>,
    /// Output directory; overrides `output.dir`.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Monte Carlo seed; overrides `mc.seed`.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads, 0 for one per core.
    #[arg(long, default_value_t = 0, global = true)]
    pub threads: usize,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Subcommand)]
pub enum Command {
    /// Perron flux, integrability diagnostic and invariant density.
    Equilibrium,
    /// Weighted-norm sweeps of the boundary-operator hypotheses.
    Assumptions,
    /// Operator norms along the imaginary axis, with bound fits.
    Scan,
    /// Transport resolvent at one spectral parameter.
    Resolve,
    /// Deterministic evolution.
    Evolve,
    /// Monte Carlo evolution.
    Mc,
    /// Equilibrium, evolution and decay-rate fit against the prediction.
    Rates,
    /// Integrability and region-mass decay for walls without an invariant density.
    Sweep,
}

#[derive(Debug, Serialize)]
struct ErrorRecord<'a> {
    error: &'a str,
    message: String,
    exit_code: u8,
}

fn kind(e: &Error) -> &'static str {
    match e {
        Error::Parameter(_) => "parameter",
        Error::Shape(_) => "shape",
        Error::Domain(_) => "domain",
        Error::Singular { .. } => "singular",
        Error::Convergence { .. } => "convergence",
        Error::State(_) => "state",
        Error::Data(_) => "data",
        Error::InternalConsistency(_) => "internal_consistency",
    }
}

pub fn exit_code(e: &Error) -> u8 {
    if e.is_numerical() {
        EXIT_NUMERICAL
    } else {
        EXIT_INVALID
    }
}

/// Parse process arguments, run, report errors as JSON on stderr.
pub fn main() -> u8 {
    let args = match Args::try_parse() {
        Ok(a) => a,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return EXIT_OK;
        }
        Err(e) => {
            let record = ErrorRecord {
                error: "usage",
                message: e.to_string(),
                exit_code: EXIT_INVALID,
            };
            eprintln!("{}", serde_json::to_string(&record).unwrap_or_default());
            return EXIT_INVALID;
        }
    };
    match run(&args) {
        Ok(code) => code,
        Err(e) => {
            let code = exit_code(&e);
            let record = ErrorRecord {
                error: kind(&e),
                message: e.to_string(),
                exit_code: code,
            };
            eprintln!("{}", serde_json::to_string(&record).unwrap_or_default());
            code
        }
    }
}

pub fn run(args: &Args) -> Result<u8> {
    if args.threads > 0 {
        // a second call in the same process keeps the first pool
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(args.threads)
            .build_global();
    }
    let mut cfg = Config::load(args.config.as_deref(), &args.set)?;
    if let Some(seed) = args.seed {
        cfg.mc.seed = seed;
    }
    if let Some(out) = &args.out {
        cfg.output.dir = out.clone();
    }
    run_config(args.command, &cfg)
}

pub struct Context<'a> {
    pub cfg: &'a Config,
    pub sc: Scenario,
    pub hash: String,
    pub sink: Sink,
}

impl Context<'_> {
    fn provenance(&self, seeds: Vec<u64>) -> Provenance {
        Provenance::new(&self.sc, self.hash.clone(), seeds)
    }

    fn wants(&self, f: Format) -> bool {
        self.cfg.output.wants(f)
    }

    fn report(&mut self, name: &str, report: &ExperimentReport) -> Result<()> {
        if self.wants(Format::Json) {
            self.sink.json(name, report)?;
        }
        Ok(())
    }

    fn equilibrium(&self) -> Result<EquilibriumProfile> {
        let sweep = self
            .cfg
            .equilibrium
            .v_min_sweep
            .clone()
            .unwrap_or_else(|| default_sweep(self.sc.grid.v_min));
        equilibrium(&self.sc, &sweep)
    }

    fn datum(&self, which: Datum, eq: Option<&EquilibriumProfile>) -> Result<PhaseDensity<f64>> {
        match which {
            Datum::Canonical => Ok(self.sc.canonical_datum()),
            Datum::Equilibrium => match eq {
                Some(eq) => eq.psi0().cloned(),
                None => self.equilibrium()?.psi0().cloned(),
            },
        }
    }
}

/// Run one subcommand on an already-resolved configuration.
pub fn run_config(command: Command, cfg: &Config) -> Result<u8> {
    let sc = cfg.scenario()?;
    let hash = config_hash(&cfg.canonical());
    let stamp = Stamp {
        version: env!("CARGO_PKG_VERSION").to_string(),
        config_hash: hash.clone(),
    };
    let sink = Sink::new(cfg.output.dir.clone(), stamp)?;
    let mut ctx = Context {
        cfg,
        sc,
        hash,
        sink,
    };
    match command {
        Command::Equilibrium => cmd_equilibrium(&mut ctx),
        Command::Assumptions => cmd_assumptions(&mut ctx),
        Command::Scan => cmd_scan(&mut ctx),
        Command::Resolve => cmd_resolve(&mut ctx),
        Command::Evolve => cmd_evolve(&mut ctx),
        Command::Mc => cmd_mc(&mut ctx),
        Command::Rates => cmd_rates(&mut ctx),
        Command::Sweep => cmd_sweep(&mut ctx),
    }
}

fn cmd_equilibrium(ctx: &mut Context) -> Result<u8> {
    let eq = ctx.equilibrium()?;
    let mut report = build_report(ctx.provenance(vec![]), Some(&eq), vec![], vec![], vec![]);
    let g = g0(&ctx.sc.o1, &ctx.sc.o2)?;
    let irr = irreducibility_check(&g, &ctx.sc.o2, 8);
    report.diagnostics.insert(
        "second_eigenvalue_modulus".into(),
        second_eigenvalue_modulus(&g),
    );
    report.diagnostics.insert(
        "irreducible".into(),
        if irr.irreducible { 1.0 } else { 0.0 },
    );
    if let Some(n) = irr.positive_power {
        report.diagnostics.insert("positive_power".into(), n as f64);
    }
    ctx.report("equilibrium.json", &report)?;
    if let (Some(psi), true) = (&eq.psi0, ctx.wants(Format::Csv)) {
        // psi0 is constant in x; export one velocity profile with the wall fluxes
        let mut rows = Vec::new();
        let nv = psi.n_v();
        for j in (0..nv).rev() {
            let v = psi.neg.node(j);
            rows.push(vec![
                fmt17(v),
                fmt17(psi.get(Sign::Negative, 0, j)),
                fmt17(eq.h0_tilde.values[j]),
            ]);
        }
        for j in 0..nv {
            let v = psi.pos.node(j);
            rows.push(vec![
                fmt17(v),
                fmt17(psi.get(Sign::Positive, 0, j)),
                fmt17(eq.h0.values[j]),
            ]);
        }
        ctx.sink
            .csv("psi0.csv", &["v", "psi0", "wall_flux"], rows)?;
    }
    Ok(EXIT_OK)
}

fn cmd_assumptions(ctx: &mut Context) -> Result<u8> {
    let a = &ctx.cfg.assumptions;
    let g = ctx.cfg.grid;
    let rep = check_assumptions(
        &ctx.sc.o1_spec,
        &ctx.sc.o2_spec,
        a.k,
        &a.v_min_sequence,
        g.n_v,
        g.grading_q,
    )?;
    let mut report = build_report(ctx.provenance(vec![]), None, vec![], vec![], vec![]);
    report.assumptions = Some(rep);
    ctx.report("assumptions.json", &report)?;
    Ok(EXIT_OK)
}

fn cmd_scan(ctx: &mut Context) -> Result<u8> {
    let sc_cfg = &ctx.cfg.scan;
    let s = sc_cfg.points()?;
    let series = scan_imaginary_axis(&ctx.sc, &s, sc_cfg.quantity)?;
    let bounds = match fit_bounds(&series, &sc_cfg.eta, sc_cfg.window) {
        Ok(b) => Some(b),
        Err(Error::Parameter(_)) => None,
        Err(e) => return Err(e),
    };
    if ctx.wants(Format::Csv) {
        let rows = series
            .points
            .iter()
            .map(|&(s, v)| vec![fmt17(s), fmt17(v), String::new()]);
        let fails = series
            .failures
            .iter()
            .map(|(s, why)| vec![fmt17(*s), String::new(), why.clone()]);
        let mut all: Vec<Vec<String>> = rows.chain(fails).collect();
        all.sort_by(|a, b| {
            a[0].parse::<f64>()
                .unwrap_or(0.0)
                .total_cmp(&b[0].parse::<f64>().unwrap_or(0.0))
        });
        ctx.sink.csv("scan.csv", &["s", "value", "failure"], all)?;
    }
    if ctx.wants(Format::Svg) {
        let label = match sc_cfg.quantity {
            ScanQuantity::NormG => "||G_is||",
            ScanQuantity::NormInverse => "||(1 - G_is)^-1||",
            ScanQuantity::SpectralRadius => "spectral radius of G_is",
        };
        let mut curves = vec![(label.to_string(), series.points.clone())];
        if sc_cfg.quantity != ScanQuantity::NormInverse {
            curves.push((
                "1 - value".into(),
                series.points.iter().map(|&(s, v)| (s, 1.0 - v)).collect(),
            ));
        }
        let plot = LogLogPlot {
            title: format!("{label} along the imaginary axis"),
            x_label: "s".into(),
            y_label: label.into(),
            curves,
        };
        ctx.sink.svg("scan.svg", &plot)?;
    }
    let entry = ScanEntry { series, bounds };
    let report = build_report(ctx.provenance(vec![]), None, vec![entry], vec![], vec![]);
    ctx.report("scan.json", &report)?;
    Ok(EXIT_OK)
}

fn cmd_resolve(ctx: &mut Context) -> Result<u8> {
    let r = &ctx.cfg.resolve;
    let lambda = Complex64::new(r.lambda_re, r.lambda_im);
    let g = ctx.datum(r.datum, None)?;
    let sol = transport_resolvent(&ctx.sc, lambda, &g)?;
    if ctx.wants(Format::Csv) {
        let xs = ctx.sc.xgrid.nodes();
        let ix = (0..xs.len())
            .min_by(|&i, &k| {
                (xs[i] - r.x_slice)
                    .abs()
                    .total_cmp(&(xs[k] - r.x_slice).abs())
            })
            .unwrap_or(0);
        let f = &sol.f;
        let nv = f.n_v();
        let mut rows = Vec::new();
        for j in (0..nv).rev() {
            let z = f.get(Sign::Negative, ix, j);
            rows.push(vec![
                fmt17(xs[ix]),
                fmt17(f.neg.node(j)),
                fmt17(z.re),
                fmt17(z.im),
            ]);
        }
        for j in 0..nv {
            let z = f.get(Sign::Positive, ix, j);
            rows.push(vec![
                fmt17(xs[ix]),
                fmt17(f.pos.node(j)),
                fmt17(z.re),
                fmt17(z.im),
            ]);
        }
        ctx.sink.csv("resolve.csv", &["x", "v", "re", "im"], rows)?;
        let mut flux = Vec::new();
        for (j, z) in sol.h_left.values.iter().enumerate() {
            flux.push(vec![
                "left".into(),
                fmt17(sol.h_left.grid.node(j)),
                fmt17(z.re),
                fmt17(z.im),
            ]);
        }
        for (j, z) in sol.h_right.values.iter().enumerate() {
            flux.push(vec![
                "right".into(),
                fmt17(sol.h_right.grid.node(j)),
                fmt17(z.re),
                fmt17(z.im),
            ]);
        }
        ctx.sink.csv("flux.csv", &["wall", "v", "re", "im"], flux)?;
    }
    let mut report = build_report(ctx.provenance(vec![]), None, vec![], vec![], vec![]);
    report.diagnostics.insert("lambda_re".into(), lambda.re);
    report.diagnostics.insert("lambda_im".into(), lambda.im);
    report
        .diagnostics
        .insert("boundary_residual".into(), sol.boundary_residual);
    report.diagnostics.insert("l1_norm".into(), sol.f.l1_norm());
    ctx.report("resolve.json", &report)?;
    Ok(EXIT_OK)
}

fn decay_plot(title: &str, series: &crate::series::TimeSeries) -> LogLogPlot {
    let curves = series
        .columns
        .iter()
        .filter(|(n, _)| !n.ends_with("_stderr") && n != crate::dynamics::TOTAL_MASS)
        .map(|(n, v)| {
            (
                n.clone(),
                series
                    .times
                    .iter()
                    .copied()
                    .zip(v.iter().copied())
                    .collect(),
            )
        })
        .collect();
    LogLogPlot {
        title: title.into(),
        x_label: "t".into(),
        y_label: "value".into(),
        curves,
    }
}

fn cmd_evolve(ctx: &mut Context) -> Result<u8> {
    let run = ctx.cfg.evolve.run_spec(ctx.sc.a)?;
    let eq = ctx.equilibrium()?;
    let g = ctx.datum(ctx.cfg.evolve.datum, Some(&eq))?;
    let series = evolve_deterministic(&ctx.sc, &g, eq.psi0.as_ref(), &run)?;
    if ctx.wants(Format::Csv) {
        ctx.sink.series_csv("evolve.csv", &series)?;
    }
    if ctx.wants(Format::Svg) {
        ctx.sink.svg(
            "evolve.svg",
            &decay_plot("deterministic evolution", &series),
        )?;
    }
    let named = NamedSeries {
        name: "evolve".into(),
        series,
    };
    let report = build_report(
        ctx.provenance(vec![]),
        Some(&eq),
        vec![],
        vec![named],
        vec![],
    );
    ctx.report("evolve.json", &report)?;
    Ok(EXIT_OK)
}

fn cmd_mc(ctx: &mut Context) -> Result<u8> {
    let spec = ctx.cfg.mc.spec();
    let eq = ctx.equilibrium()?;
    let g = ctx.datum(ctx.cfg.mc.datum, Some(&eq))?;
    let run = evolve_mc(&ctx.sc, &g, eq.psi0.as_ref(), &spec)?;
    if ctx.wants(Format::Csv) {
        ctx.sink.series_csv("mc.csv", &run.series)?;
    }
    let mut report = build_report(
        ctx.provenance(vec![spec.seed]),
        None,
        vec![],
        vec![NamedSeries {
            name: "mc".into(),
            series: run.series,
        }],
        vec![],
    );
    report
        .diagnostics
        .insert("n_particles".into(), run.n_particles as f64);
    report
        .diagnostics
        .insert("resampled_below_v_min".into(), run.resampled as f64);
    ctx.report("mc.json", &report)?;
    Ok(EXIT_OK)
}

fn cmd_rates(ctx: &mut Context) -> Result<u8> {
    let run = ctx.cfg.evolve.run_spec(ctx.sc.a)?;
    let eq = ctx.equilibrium()?;
    let psi = eq.psi0()?;
    let g = ctx.datum(ctx.cfg.evolve.datum, Some(&eq))?;
    let series = evolve_deterministic(&ctx.sc, &g, Some(psi), &run)?;
    let window = ctx
        .cfg
        .rates
        .window
        .unwrap_or((run.t_final / 20.0, run.t_final));
    let fit = fit_rate(&series, DISTANCE, window, ctx.cfg.rates.k)?;
    let verdict = fit.verdict;
    if ctx.wants(Format::Csv) {
        ctx.sink.series_csv("rates.csv", &series)?;
    }
    if ctx.wants(Format::Svg) {
        ctx.sink
            .svg("rates.svg", &decay_plot("distance to equilibrium", &series))?;
    }
    let named = NamedSeries {
        name: "evolve".into(),
        series,
    };
    let report = build_report(
        ctx.provenance(vec![]),
        Some(&eq),
        vec![],
        vec![named],
        vec![fit],
    );
    ctx.report("rates.json", &report)?;
    Ok(if verdict == Verdict::Pass {
        EXIT_OK
    } else {
        EXIT_VERDICT
    })
}

fn cmd_sweep(ctx: &mut Context) -> Result<u8> {
    let sw = &ctx.cfg.sweep;
    let eq = ctx.equilibrium()?;
    let t_final = sw.probe_times.iter().copied().fold(0.0, f64::max);
    let run = crate::dynamics::RunSpec {
        t_final,
        dt: sw.dt.unwrap_or(ctx.sc.a / 20.0),
        probe_times: sw.probe_times.clone(),
        epsilons: sw.epsilons.clone(),
    };
    let g = ctx.sc.canonical_datum();
    let series = evolve_deterministic(&ctx.sc, &g, None, &run)?;
    if ctx.wants(Format::Csv) {
        ctx.sink.series_csv("sweep.csv", &series)?;
    }
    if ctx.wants(Format::Svg) {
        ctx.sink
            .svg("sweep.svg", &decay_plot("mass away from v = 0", &series))?;
    }
    let mut report = build_report(
        ctx.provenance(vec![]),
        Some(&eq),
        vec![],
        vec![NamedSeries {
            name: "sweeping".into(),
            series: series.clone(),
        }],
        vec![],
    );
    // no reference sweeping rate exists; report the empirical log-log slope
    for &eps in &sw.epsilons {
        let col = series.column(&region_column(eps)).unwrap_or(&[]);
        let (lx, ly): (Vec<f64>, Vec<f64>) = series
            .times
            .iter()
            .zip(col)
            .filter(|(t, v)| **t > 0.0 && **v > 0.0)
            .map(|(t, v)| (t.ln(), v.ln()))
            .unzip();
        if lx.len() >= 2 {
            let fit = least_squares(&lx, &ly);
            report
                .diagnostics
                .insert(format!("{}_decay_exponent", region_column(eps)), -fit.slope);
        }
    }
    ctx.report("sweep.json", &report)?;
    Ok(EXIT_OK)
}
