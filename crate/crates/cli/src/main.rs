//! `pnp`: runs one mode of a flat key-value configuration and writes CSV and
//! JSON results into the output directory.
//!
//! Exit status: 0 success, 2 configuration error, 3 numerical failure,
//! 4 a study threshold was missed, 1 any other error (I/O).

use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use pnp::diagnostics::energy_rate_lhs;
use pnp::harness::{
    chi2_sweep, compare_schemes, energy_law_mismatch, eta_sweep, pb_validation,
    spatial_order_study, temporal_order_study, OrderReport, RunSummary, StudyKind, StudyRun,
    StudySpec, SweepReport,
};
use pnp::io::{
    format_value, parse_config_with, write_json, write_snapshot, write_table, write_timeseries,
    Mode, RunConfig, SweepParameter,
};
use pnp::stepper::{initial_state, run, RunOptions};
use pnp::{BoundaryScheme, Discretization, Grid};
use serde::Serialize;

const DEFAULT_OUT: &str = "pnp-out";

#[derive(Parser, Debug)]
#[command(name = "pnp", version, about = "One-dimensional Poisson–Nernst–Planck solver")]
struct Cli {
    /// Configuration file of `key = value` lines.
    #[arg(long)]
    config: PathBuf,
    /// Overrides `mode`.
    #[arg(long)]
    mode: Option<String>,
    /// Overrides `dt`.
    #[arg(long)]
    dt: Option<f64>,
    /// Overrides `scheme` (`conservative` or `standard`).
    #[arg(long)]
    scheme: Option<String>,
    /// Overrides `innerIterations`.
    #[arg(long)]
    inner_iterations: Option<usize>,
    /// Overrides `J`, the number of subintervals.
    #[arg(long = "j")]
    intervals: Option<usize>,
    /// Overrides `tEnd`.
    #[arg(long)]
    t_end: Option<f64>,
    /// Output directory; defaults to `$PNP_OUT`, then `pnp-out`.
    #[arg(long)]
    out: Option<PathBuf>,
}

impl Cli {
    fn overrides(&self) -> Vec<(&'static str, String)> {
        let mut o = Vec::new();
        if let Some(v) = &self.mode {
            o.push(("mode", v.clone()));
        }
        if let Some(v) = self.dt {
            o.push(("dt", v.to_string()));
        }
        if let Some(v) = &self.scheme {
            o.push(("scheme", v.clone()));
        }
        if let Some(v) = self.inner_iterations {
            o.push(("innerIterations", v.to_string()));
        }
        if let Some(v) = self.intervals {
            o.push(("J", v.to_string()));
        }
        if let Some(v) = self.t_end {
            o.push(("tEnd", v.to_string()));
        }
        if let Some(v) = &self.out {
            o.push(("out", v.display().to_string()));
        }
        o
    }
}

enum Failure {
    Config(String),
    Numerical(String),
    Other(String),
    Threshold,
}

impl From<pnp::Error> for Failure {
    fn from(e: pnp::Error) -> Self {
        if e.is_config() {
            Failure::Config(e.to_string())
        } else if e.is_numerical() {
            Failure::Numerical(e.to_string())
        } else {
            Failure::Other(e.to_string())
        }
    }
}

/// A pass/fail threshold evaluated on a study result.
#[derive(Debug, Serialize)]
struct Check {
    name: String,
    pass: bool,
    detail: String,
}

fn check(name: &str, pass: bool, detail: String) -> Check {
    Check {
        name: name.to_string(),
        pass,
        detail,
    }
}

#[derive(Serialize)]
struct Checked<'a, T> {
    result: &'a T,
    checks: &'a [Check],
}

struct Context {
    config: RunConfig,
    meta: Vec<(String, String)>,
    dir: PathBuf,
}

impl Context {
    fn path(&self, name: &str) -> PathBuf {
        self.dir.join(name)
    }

    fn spec(&self, kind: StudyKind) -> StudySpec {
        let c = &self.config;
        StudySpec {
            kind,
            params: c.params.clone(),
            intervals: c.intervals,
            stepper: c.stepper,
            probe: c.probe,
            sweep_values: c.sweep_values.clone(),
            snapshot_times: c.snapshot_times.clone(),
        }
    }

    fn discretization(&self) -> Result<Discretization, Failure> {
        Ok(Discretization::new(self.config.params.clone(), self.config.grid()?)?)
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Threshold) => ExitCode::from(4),
        Err(Failure::Config(msg)) => {
            eprintln!("configuration error: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Numerical(msg)) => {
            eprintln!("numerical failure: {msg}");
            ExitCode::from(3)
        }
        Err(Failure::Other(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
    }
}

fn execute(cli: &Cli) -> Result<(), Failure> {
    let source = fs::read_to_string(&cli.config)
        .map_err(|e| Failure::Config(format!("{}: {e}", cli.config.display())))?;
    let config = parse_config_with(&source, &cli.overrides())?;
    let dir = config
        .out
        .clone()
        .or_else(|| std::env::var_os("PNP_OUT").map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from(DEFAULT_OUT));
    fs::create_dir_all(&dir).map_err(|e| Failure::Other(format!("{}: {e}", dir.display())))?;
    let ctx = Context {
        meta: config.entries(),
        config,
        dir,
    };
    let checks = match ctx.config.mode {
        Mode::Simulate => simulate(&ctx)?,
        Mode::TemporalOrder => temporal(&ctx)?,
        Mode::SpatialOrder => spatial(&ctx)?,
        Mode::Compare => compare(&ctx)?,
        Mode::PbValidate => pb(&ctx)?,
        Mode::Sweep => sweep(&ctx)?,
    };
    let mut all = true;
    for c in &checks {
        all &= c.pass;
        println!("{} {}: {}", if c.pass { "PASS" } else { "FAIL" }, c.name, c.detail);
    }
    println!("results in {}", ctx.dir.display());
    if all {
        Ok(())
    } else {
        Err(Failure::Threshold)
    }
}

fn time_label(t: f64) -> String {
    format!("t{t}")
}

fn warn_resolution(label: &str, under_resolved: bool) {
    if under_resolved {
        eprintln!("warning: {label}: grid spacing exceeds the Debye length; boundary layers are not resolved");
    }
}

fn simulate(ctx: &Context) -> Result<Vec<Check>, Failure> {
    let disc = ctx.discretization()?;
    let opts = RunOptions {
        sample_every: ctx.config.sample_every,
        snapshot_times: ctx.config.snapshot_times.clone(),
        steady_tolerance: None,
    };
    let out = run(&initial_state(&disc)?, &ctx.config.stepper, &disc, &opts)?;
    warn_resolution("simulate", out.under_resolved);
    let grid = disc.grid();
    write_timeseries(&out.record, &ctx.meta, &ctx.path("timeseries.csv"))?;
    for s in &out.snapshots {
        write_snapshot(s, grid, &ctx.meta, &ctx.path(&format!("snapshot_{}.csv", time_label(s.t))))?;
    }
    write_snapshot(&out.final_state, grid, &ctx.meta, &ctx.path("final.csv"))?;
    let summary = RunSummary::of(&out, ctx.config.stepper.scheme, grid);
    write_json(&summary, &ctx.meta, &ctx.path("summary.json"))?;
    Ok(Vec::new())
}

fn order_rows(report: &OrderReport) -> Vec<Vec<f64>> {
    report
        .rows
        .iter()
        .map(|r| {
            vec![
                r.inner_iterations as f64,
                r.spacing,
                r.values[0],
                r.values[1],
                r.values[2],
                r.order,
            ]
        })
        .collect()
}

fn temporal(ctx: &Context) -> Result<Vec<Check>, Failure> {
    let mut inner = vec![0, ctx.config.stepper.inner_iterations];
    inner.dedup();
    let report = temporal_order_study(&ctx.spec(StudyKind::TemporalOrder), &inner)?;
    let columns = ["inner_iterations", "dt", "value_h", "value_2h", "value_4h", "order"];
    write_table(&columns, &order_rows(&report), &ctx.meta, &ctx.path("temporal_order.csv"))?;
    let checks: Vec<Check> = report
        .rows
        .iter()
        .map(|r| {
            let (lo, hi) = if r.inner_iterations == 0 { (0.85, 1.15) } else { (1.8, 2.5) };
            check(
                &format!("temporal order, K={}, dt={}", r.inner_iterations, r.spacing),
                (lo..=hi).contains(&r.order),
                format!("{:.4} in [{lo}, {hi}]", r.order),
            )
        })
        .collect();
    write_json(&Checked { result: &report, checks: &checks }, &ctx.meta, &ctx.path("temporal_order.json"))?;
    Ok(checks)
}

fn spatial(ctx: &Context) -> Result<Vec<Check>, Failure> {
    let schemes = [BoundaryScheme::Conservative, BoundaryScheme::Standard];
    let report = spatial_order_study(&ctx.spec(StudyKind::SpatialOrder), &schemes)?;
    let columns = ["inner_iterations", "dx", "value_h", "value_2h", "value_4h", "order"];
    for scheme in schemes {
        let part = OrderReport {
            rows: report.rows.iter().filter(|r| r.scheme == scheme).cloned().collect(),
            ..report.clone()
        };
        let path = ctx.path(&format!("spatial_order_{scheme}.csv"));
        write_table(&columns, &order_rows(&part), &ctx.meta, &path)?;
    }
    let checks: Vec<Check> = report
        .rows
        .iter()
        .map(|r| {
            check(
                &format!("spatial order, {}", r.scheme),
                (1.8..=2.2).contains(&r.order),
                format!("{:.4} in [1.8, 2.2]", r.order),
            )
        })
        .collect();
    write_json(&Checked { result: &report, checks: &checks }, &ctx.meta, &ctx.path("spatial_order.json"))?;
    Ok(checks)
}

fn write_run(ctx: &Context, run: &StudyRun, grid: &Grid, tag: &str) -> Result<(), Failure> {
    let out = &run.output;
    warn_resolution(tag, out.under_resolved);
    write_timeseries(&out.record, &ctx.meta, &ctx.path(&format!("timeseries_{tag}.csv")))?;
    for s in &out.snapshots {
        let name = format!("snapshot_{tag}_{}.csv", time_label(s.t));
        write_snapshot(s, grid, &ctx.meta, &ctx.path(&name))?;
    }
    write_snapshot(&out.final_state, grid, &ctx.meta, &ctx.path(&format!("final_{tag}.csv")))?;
    let energy = out.record.energy_series();
    if energy.len() >= 3 {
        let lhs = energy_rate_lhs(&energy)?;
        let rows: Vec<Vec<f64>> = out
            .record
            .samples
            .iter()
            .filter(|s| s.energy.is_some())
            .zip(&lhs)
            .map(|(s, (_, rate))| {
                vec![s.t, s.energy.unwrap_or(f64::NAN), *rate, s.dissipation_rhs.unwrap_or(f64::NAN)]
            })
            .collect();
        let columns = ["t", "energy", "energy_rate", "dissipation_rhs"];
        write_table(&columns, &rows, &ctx.meta, &ctx.path(&format!("energy_law_{tag}.csv")))?;
    }
    Ok(())
}

#[derive(Serialize)]
struct ComparisonResult<'a> {
    conservative: &'a RunSummary,
    standard: &'a RunSummary,
    energy_law_mismatch: Option<f64>,
}

fn compare(ctx: &Context) -> Result<Vec<Check>, Failure> {
    let spec = ctx.spec(StudyKind::SchemeComparison);
    let cmp = compare_schemes(&spec)?;
    let grid = ctx.config.grid()?;
    write_run(ctx, &cmp.conservative, &grid, "conservative")?;
    write_run(ctx, &cmp.standard, &grid, "standard")?;

    let cons = &cmp.conservative.summary;
    let std_ratio = &cmp.standard.summary.total_ratio;
    let t_end = ctx.config.stepper.t_end;
    let mismatch = energy_law_mismatch(&cmp.conservative.output.record, 0.05, t_end).ok();
    let ratios: Vec<String> = std_ratio.iter().map(|r| format!("{r:.4}")).collect();
    let checks = vec![
        check(
            "exact conservation",
            cons.max_relative_drift <= 1e-10,
            format!("max relative drift {:.3e} <= 1e-10", cons.max_relative_drift),
        ),
        check(
            "standard-scheme mass loss",
            std_ratio.iter().all(|r| *r < 0.6),
            format!("final/initial totals [{}] < 0.6", ratios.join(", ")),
        ),
        check(
            "energy monotone",
            cons.first_energy_increase.is_none(),
            match cons.first_energy_increase {
                None => "no increase after the first sample".to_string(),
                Some(k) => format!("increase at t = {}", cmp.conservative.output.record.samples[k].t),
            },
        ),
        check(
            "energy law",
            mismatch.is_some_and(|m| m <= 0.1),
            mismatch.map_or("undefined".to_string(), |m| format!("relative L2 mismatch {m:.3e} <= 0.1")),
        ),
    ];
    let result = ComparisonResult {
        conservative: cons,
        standard: &cmp.standard.summary,
        energy_law_mismatch: mismatch,
    };
    write_json(&Checked { result: &result, checks: &checks }, &ctx.meta, &ctx.path("comparison.json"))?;
    Ok(checks)
}

fn pb(ctx: &Context) -> Result<Vec<Check>, Failure> {
    let mut spec = ctx.spec(StudyKind::PbValidation);
    if spec.snapshot_times.is_empty() {
        spec.snapshot_times = vec![spec.stepper.t_end];
    }
    let report = pb_validation(&spec)?;
    let grid = ctx.config.grid()?;
    if let Some(state) = &report.final_state {
        let rows: Vec<Vec<f64>> = grid
            .nodes()
            .iter()
            .zip(&state.phi)
            .zip(&report.oracle_phi)
            .map(|((x, a), b)| vec![*x, *a, *b])
            .collect();
        write_table(&["x", "phi", "phi_pb"], &rows, &ctx.meta, &ctx.path("pb_profile.csv"))?;
    }
    let checks = vec![check(
        "steady state matches Poisson-Boltzmann",
        report.max_potential_difference <= 5e-4,
        format!("max |phi - phi_PB| {:.3e} <= 5e-4", report.max_potential_difference),
    )];
    write_json(&Checked { result: &report, checks: &checks }, &ctx.meta, &ctx.path("pb.json"))?;
    Ok(checks)
}

#[derive(Serialize)]
struct SweepEntry<'a> {
    value: f64,
    summary: &'a RunSummary,
}

fn sweep(ctx: &Context) -> Result<Vec<Check>, Failure> {
    let parameter = ctx
        .config
        .sweep_parameter
        .ok_or_else(|| Failure::Config("sweep mode needs sweepParameter".into()))?;
    let (report, key): (SweepReport, &str) = match parameter {
        SweepParameter::Chi2 => (chi2_sweep(&ctx.spec(StudyKind::Chi2Sweep))?, "chi2"),
        SweepParameter::EtaPrime => (eta_sweep(&ctx.spec(StudyKind::EtaSweep))?, "etaPrime"),
    };
    let grid = ctx.config.grid()?;
    let mut rows = Vec::new();
    for (v, run) in report.values.iter().zip(&report.runs) {
        warn_resolution(&run.label, run.output.under_resolved);
        let name = format!("final_{key}_{}.csv", format_value(*v));
        write_snapshot(&run.output.final_state, &grid, &ctx.meta, &ctx.path(&name))?;
        let s = &run.summary;
        rows.push(vec![
            *v,
            s.boundary_layer_width.unwrap_or(f64::NAN),
            s.final_time,
            s.final_max_rate,
            s.min_concentration,
        ]);
    }
    let columns = [key, "layer_width", "final_time", "final_max_dcdt", "min_c"];
    write_table(&columns, &rows, &ctx.meta, &ctx.path("sweep.csv"))?;
    let checks = match parameter {
        SweepParameter::Chi2 => vec![check(
            "boundary layer thins with chi2",
            report.widths_strictly_decreasing(),
            format!("widths {:?}", report.widths()),
        )],
        SweepParameter::EtaPrime => {
            let spread = report.max_relative_concentration_spread();
            vec![check(
                "steady profiles insensitive to eta'",
                spread <= 1e-3,
                format!("max relative spread {spread:.3e} <= 1e-3"),
            )]
        }
    };
    let entries: Vec<SweepEntry> = report
        .values
        .iter()
        .zip(&report.runs)
        .map(|(v, r)| SweepEntry {
            value: *v,
            summary: &r.summary,
        })
        .collect();
    write_json(&Checked { result: &entries, checks: &checks }, &ctx.meta, &ctx.path("sweep.json"))?;
    Ok(checks)
}
