use rayon::prelude::*;
use serde::Serialize;

use super::order::richardson_order;
use super::pb::{pb_steady_state, PbOptions};
use crate::diagnostics::{energy_rate_lhs, DiagnosticsRecord};
use crate::error::{Error, Result};
use crate::grid::{FieldState, Grid};
use crate::params::{DimensionlessParameters, SpeciesParameters};
use crate::spatial::{BoundaryScheme, Discretization};
use crate::stepper::{initial_state, run, RunOptions, RunOutput, StepperConfig, StopReason};

/// Runs are declared steady once `max |dc/dt|` falls below this.
pub const STEADY_RATE: f64 = 1e-6;

/// Relative potential level defining the edge of a boundary layer.
pub const LAYER_THRESHOLD: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum StudyKind {
    TemporalOrder,
    SpatialOrder,
    SchemeComparison,
    Chi2Sweep,
    EtaSweep,
    PbValidation,
}

/// Point `(x, t)` at which convergence studies read the potential.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Probe {
    pub x: f64,
    pub t: f64,
}

/// Everything a study needs: the base simulation and the study-specific
/// probe and sweep values.
///
/// For [`StudyKind::TemporalOrder`] the sweep values are the finest time
/// steps of each `dt, 2dt, 4dt` triple; for the parameter sweeps they are
/// the swept `chi2` or `eta'` values.
#[derive(Debug, Clone)]
pub struct StudySpec {
    pub kind: StudyKind,
    pub params: DimensionlessParameters,
    /// Subintervals of the (finest) grid.
    pub intervals: usize,
    pub stepper: StepperConfig,
    pub probe: Probe,
    pub sweep_values: Vec<f64>,
    pub snapshot_times: Vec<f64>,
}

const CHANNEL_PROBE: Probe = Probe { x: 0.904, t: 0.02 };

impl StudySpec {
    fn channel(kind: StudyKind, intervals: usize, dt: f64, t_end: f64) -> Self {
        StudySpec {
            kind,
            params: DimensionlessParameters::channel(),
            intervals,
            stepper: StepperConfig::new(dt, t_end),
            probe: CHANNEL_PROBE,
            sweep_values: Vec::new(),
            snapshot_times: Vec::new(),
        }
    }

    /// dx = 0.002, triples based at 5e-5, 2.5e-5 and 1.25e-5, probe (0.904, 0.02).
    pub fn temporal_order() -> Self {
        let mut s = Self::channel(StudyKind::TemporalOrder, 1000, 5e-5, CHANNEL_PROBE.t);
        s.sweep_values = vec![5e-5, 2.5e-5, 1.25e-5];
        s
    }

    /// dx in {0.002, 0.004, 0.008} with dt = 1e-6, probe (0.904, 0.02).
    pub fn spatial_order() -> Self {
        Self::channel(StudyKind::SpatialOrder, 1000, 1e-6, CHANNEL_PROBE.t)
    }

    /// dx = 0.002, dt = 1e-4 up to t = 1, snapshots at 0, 0.01, 0.05, 1.
    pub fn scheme_comparison() -> Self {
        let mut s = Self::channel(StudyKind::SchemeComparison, 1000, 1e-4, 1.0);
        s.snapshot_times = vec![0.0, 0.01, 0.05, 1.0];
        s
    }

    /// chi2 in {31.35, 125.4, 501.6}, dx = 0.001, dt = 1e-4 up to t = 1.
    pub fn chi2_sweep() -> Self {
        let mut s = Self::channel(StudyKind::Chi2Sweep, 2000, 1e-4, 1.0);
        s.sweep_values = vec![31.35, 125.4, 501.6];
        s
    }

    /// eta' from 1e-6 to 1e-3, dx = 0.002, dt = 1e-4 up to t = 1.
    pub fn eta_sweep() -> Self {
        let mut s = Self::channel(StudyKind::EtaSweep, 1000, 1e-4, 1.0);
        s.sweep_values = vec![1e-6, 1e-5, 1e-4, 1e-3];
        s
    }

    /// chi1 = 1, chi2 = 1/(2 eps), eta' = eps' = eps, phi- = -1, phi+ = 1,
    /// J = 2048, dt = 1e-4 up to t = 2.
    pub fn pb_validation(eps: f64) -> Self {
        let mut params = DimensionlessParameters::symmetric_pair(1.0, 1.0 / (2.0 * eps), eps, eps);
        params.phi_minus = -1.0;
        params.phi_plus = 1.0;
        StudySpec {
            kind: StudyKind::PbValidation,
            params,
            intervals: 2048,
            stepper: StepperConfig::new(1e-4, 2.0),
            probe: CHANNEL_PROBE,
            sweep_values: Vec::new(),
            snapshot_times: vec![0.5, 1.0, 1.5, 2.0],
        }
    }

    pub fn discretization(&self, intervals: usize) -> Result<Discretization> {
        Discretization::new(self.params.clone(), Grid::new(intervals)?)
    }
}

/// Potential at `probe` from a run on `disc` with `cfg` (its `t_end` is
/// replaced by the probe time).
pub fn probe_potential(disc: &Discretization, cfg: &StepperConfig, probe: Probe) -> Result<f64> {
    let j = disc.grid().node_index(probe.x).ok_or_else(|| {
        Error::invalid(
            "probe.x",
            format!("{} is not a node of the grid with J = {}", probe.x, disc.grid().intervals()),
        )
    })?;
    let initial = initial_state(disc)?;
    let cfg = StepperConfig {
        t_end: probe.t,
        ..*cfg
    };
    let opts = RunOptions {
        sample_every: 0,
        ..RunOptions::default()
    };
    Ok(run(&initial, &cfg, disc, &opts)?.final_state.phi[j])
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OrderRow {
    pub scheme: BoundaryScheme,
    pub inner_iterations: usize,
    /// Finest spacing of the triple (`dt` or `dx`).
    pub spacing: f64,
    /// Probe values at spacing h, 2h, 4h.
    pub values: [f64; 3],
    pub order: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OrderReport {
    pub kind: StudyKind,
    pub probe: Probe,
    pub rows: Vec<OrderRow>,
}

/// Richardson orders in time at fixed dx for each base step in
/// `spec.sweep_values` and each entry of `inner_iterations`.
pub fn temporal_order_study(spec: &StudySpec, inner_iterations: &[usize]) -> Result<OrderReport> {
    let disc = spec.discretization(spec.intervals)?;
    let mut jobs: Vec<(usize, f64)> = Vec::new();
    for &k in inner_iterations {
        for &dt in &spec.sweep_values {
            for m in [1.0, 2.0, 4.0] {
                if !jobs.iter().any(|&(kk, d)| kk == k && d == dt * m) {
                    jobs.push((k, dt * m));
                }
            }
        }
    }
    let values: Vec<f64> = jobs
        .par_iter()
        .map(|&(k, dt)| {
            let cfg = StepperConfig {
                dt,
                inner_iterations: k,
                ..spec.stepper
            };
            probe_potential(&disc, &cfg, spec.probe)
        })
        .collect::<Result<_>>()?;
    let lookup = |k: usize, dt: f64| {
        let idx = jobs.iter().position(|&(kk, d)| kk == k && d == dt).expect("job was scheduled");
        values[idx]
    };

    let mut rows = Vec::new();
    for &k in inner_iterations {
        for &dt in &spec.sweep_values {
            let v = [lookup(k, dt), lookup(k, 2.0 * dt), lookup(k, 4.0 * dt)];
            rows.push(OrderRow {
                scheme: spec.stepper.scheme,
                inner_iterations: k,
                spacing: dt,
                values: v,
                order: richardson_order(v[0], v[1], v[2])?,
            });
        }
    }
    Ok(OrderReport {
        kind: StudyKind::TemporalOrder,
        probe: spec.probe,
        rows,
    })
}

/// Richardson orders in space on `J, J/2, J/4` at fixed dt, for each scheme.
pub fn spatial_order_study(spec: &StudySpec, schemes: &[BoundaryScheme]) -> Result<OrderReport> {
    let j = spec.intervals;
    if j % 4 != 0 {
        return Err(Error::invalid("J", format!("must be divisible by 4 for a spatial study, got {j}")));
    }
    let resolutions = [j, j / 2, j / 4];
    let discs = resolutions
        .iter()
        .map(|&n| spec.discretization(n))
        .collect::<Result<Vec<_>>>()?;
    let jobs: Vec<(BoundaryScheme, usize)> = schemes
        .iter()
        .flat_map(|&s| (0..3).map(move |r| (s, r)))
        .collect();
    let values: Vec<f64> = jobs
        .par_iter()
        .map(|&(scheme, r)| {
            let cfg = spec.stepper.with_scheme(scheme);
            probe_potential(&discs[r], &cfg, spec.probe)
        })
        .collect::<Result<_>>()?;

    let rows = schemes
        .iter()
        .enumerate()
        .map(|(s, &scheme)| {
            let v = [values[3 * s], values[3 * s + 1], values[3 * s + 2]];
            Ok(OrderRow {
                scheme,
                inner_iterations: spec.stepper.inner_iterations,
                spacing: discs[0].grid().dx(),
                values: v,
                order: richardson_order(v[0], v[1], v[2])?,
            })
        })
        .collect::<Result<_>>()?;
    Ok(OrderReport {
        kind: StudyKind::SpatialOrder,
        probe: spec.probe,
        rows,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ManufacturedReport {
    pub intervals: [usize; 3],
    /// Max-norm error against the exact solution at each resolution.
    pub errors: [f64; 3],
    /// `log2(e(2h) / e(h))` from the two finest pairs.
    pub error_orders: [f64; 2],
}

/// Exact solution of the neutral diffusion problem used by
/// [`manufactured_diffusion_order`]: `1 + cos(pi x) exp(-pi² t)`, which has
/// zero flux at `x = ±1`.
pub fn manufactured_diffusion_solution(x: f64, t: f64) -> f64 {
    use std::f64::consts::PI;
    1.0 + (PI * x).cos() * (-PI * PI * t).exp()
}

/// Spatial order of the full scheme on a neutral single-species problem
/// with a known smooth solution, on `J, 2J, 4J`.
pub fn manufactured_diffusion_order(
    coarse_intervals: usize,
    dt: f64,
    t_end: f64,
    scheme: BoundaryScheme,
) -> Result<ManufacturedReport> {
    let mut params = DimensionlessParameters::channel();
    params.species = vec![SpeciesParameters::unit(0.0)];
    let intervals = [coarse_intervals * 4, coarse_intervals * 2, coarse_intervals];
    let errors: Vec<f64> = intervals
        .par_iter()
        .map(|&n| {
            let disc = Discretization::new(params.clone(), Grid::new(n)?)?;
            let mut state = initial_state(&disc)?;
            state.c[0] = disc
                .grid()
                .nodes()
                .iter()
                .map(|&x| manufactured_diffusion_solution(x, 0.0))
                .collect();
            let cfg = StepperConfig::new(dt, t_end).with_scheme(scheme);
            let opts = RunOptions {
                sample_every: 0,
                ..RunOptions::default()
            };
            let out = run(&state, &cfg, &disc, &opts)?;
            Ok(out.final_state.c[0]
                .iter()
                .zip(disc.grid().nodes())
                .map(|(c, &x)| (c - manufactured_diffusion_solution(x, t_end)).abs())
                .fold(0.0, f64::max))
        })
        .collect::<Result<_>>()?;
    let errors = [errors[0], errors[1], errors[2]];
    Ok(ManufacturedReport {
        intervals,
        errors,
        error_orders: [(errors[1] / errors[0]).log2(), (errors[2] / errors[1]).log2()],
    })
}

/// `max_j |c_1(x_j) - c_2(-x_j)|` and `max_j |phi(x_j) + phi(-x_j)|` for a
/// two-species state.
pub fn symmetry_defect(state: &FieldState) -> f64 {
    let n = state.phi.len() - 1;
    let mut defect = 0.0f64;
    for j in 0..=n {
        defect = defect.max((state.phi[j] + state.phi[n - j]).abs());
        if state.c.len() == 2 {
            defect = defect.max((state.c[0][j] - state.c[1][n - j]).abs());
        }
    }
    defect
}

/// Relative L² mismatch between the finite-difference energy rate and the
/// dissipation integral over samples with `from <= t <= to`.
pub fn energy_law_mismatch(record: &DiagnosticsRecord, from: f64, to: f64) -> Result<f64> {
    let rhs: Vec<(f64, f64)> = record
        .samples
        .iter()
        .filter_map(|s| s.dissipation_rhs.map(|d| (s.t, d)))
        .collect();
    let lhs = energy_rate_lhs(&record.energy_series())?;
    let mut num = 0.0;
    let mut den = 0.0;
    for ((t, l), (t2, r)) in lhs.iter().zip(&rhs) {
        debug_assert_eq!(t, t2);
        if *t >= from && *t <= to {
            num += (l - r).powi(2);
            den += r * r;
        }
    }
    Ok((num / den).sqrt())
}

/// Index of the first sample after `skip` where the energy rises, if any.
pub fn first_energy_increase(record: &DiagnosticsRecord, skip: usize) -> Option<usize> {
    let e = record.energy_series();
    (skip + 1..e.len()).find(|&k| e[k].1 > e[k - 1].1)
}

/// Distance from `x = -1` to where `|phi - phi(0)|` first drops below
/// `LAYER_THRESHOLD * |phi(-1) - phi(0)|`, linearly interpolated between
/// nodes.
pub fn boundary_layer_width(phi: &[f64], grid: &Grid) -> Result<f64> {
    crate::error::check_len(grid.len(), phi.len())?;
    let centre = grid
        .node_index(0.0)
        .map(|j| phi[j])
        .unwrap_or_else(|| {
            let j = grid.intervals() / 2;
            0.5 * (phi[j] + phi[j + 1])
        });
    let dev: Vec<f64> = phi.iter().map(|p| (p - centre).abs()).collect();
    let level = LAYER_THRESHOLD * dev[0];
    let j = dev
        .iter()
        .position(|&d| d < level)
        .ok_or_else(|| Error::invalid("phi", "potential never relaxes to its centre value"))?;
    if j == 0 {
        return Ok(0.0);
    }
    let frac = (dev[j - 1] - level) / (dev[j - 1] - dev[j]);
    Ok(grid.x(j - 1) + frac * grid.dx() + 1.0)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunSummary {
    pub scheme: BoundaryScheme,
    pub steps: usize,
    pub final_time: f64,
    pub stop: StopReason,
    /// `total_i(t_final) / total_i(0)`
    pub total_ratio: Vec<f64>,
    pub max_relative_drift: f64,
    /// First sample (after the first step) where the energy increased.
    pub first_energy_increase: Option<usize>,
    pub final_max_rate: f64,
    pub min_concentration: f64,
    pub negative_steps: usize,
    pub symmetry_defect: f64,
    pub boundary_layer_width: Option<f64>,
    pub under_resolved: bool,
}

impl RunSummary {
    pub fn of(output: &RunOutput, scheme: BoundaryScheme, grid: &Grid) -> Self {
        let rec = &output.record;
        let first = &rec.samples[0];
        let last = rec.samples.last().expect("record has the initial sample");
        RunSummary {
            scheme,
            steps: output.steps,
            final_time: output.final_state.t,
            stop: output.stop,
            total_ratio: last.total.iter().zip(&first.total).map(|(a, b)| a / b).collect(),
            max_relative_drift: rec.max_relative_drift(),
            first_energy_increase: first_energy_increase(rec, 1),
            final_max_rate: last.max_rate,
            min_concentration: rec
                .samples
                .iter()
                .map(|s| s.min_concentration)
                .fold(f64::INFINITY, f64::min),
            negative_steps: output.negative_events.len(),
            symmetry_defect: symmetry_defect(&output.final_state),
            boundary_layer_width: boundary_layer_width(&output.final_state.phi, grid).ok(),
            under_resolved: output.under_resolved,
        }
    }
}

/// One simulation within a study, with its summary.
#[derive(Debug, Clone)]
pub struct StudyRun {
    pub label: String,
    pub summary: RunSummary,
    pub output: RunOutput,
}

fn simulate(
    disc: &Discretization,
    cfg: &StepperConfig,
    snapshot_times: &[f64],
    steady: bool,
) -> Result<RunOutput> {
    let initial = initial_state(disc)?;
    let opts = RunOptions {
        sample_every: 1,
        snapshot_times: snapshot_times.to_vec(),
        steady_tolerance: steady.then_some(STEADY_RATE),
    };
    run(&initial, cfg, disc, &opts)
}

/// Two runs differing only in the boundary scheme.
#[derive(Debug, Clone)]
pub struct SchemeComparison {
    pub conservative: StudyRun,
    pub standard: StudyRun,
}

pub fn compare_schemes(spec: &StudySpec) -> Result<SchemeComparison> {
    let disc = spec.discretization(spec.intervals)?;
    let (conservative, standard) = rayon::join(
        || simulate(&disc, &spec.stepper.with_scheme(BoundaryScheme::Conservative), &spec.snapshot_times, false),
        || simulate(&disc, &spec.stepper.with_scheme(BoundaryScheme::Standard), &spec.snapshot_times, false),
    );
    let wrap = |out: RunOutput, scheme: BoundaryScheme| StudyRun {
        label: scheme.to_string(),
        summary: RunSummary::of(&out, scheme, disc.grid()),
        output: out,
    };
    Ok(SchemeComparison {
        conservative: wrap(conservative?, BoundaryScheme::Conservative),
        standard: wrap(standard?, BoundaryScheme::Standard),
    })
}

#[derive(Debug, Clone)]
pub struct SweepReport {
    pub kind: StudyKind,
    pub values: Vec<f64>,
    pub runs: Vec<StudyRun>,
}

impl SweepReport {
    pub fn widths(&self) -> Vec<Option<f64>> {
        self.runs.iter().map(|r| r.summary.boundary_layer_width).collect()
    }

    /// True when every width is defined and strictly decreases along the
    /// sweep.
    pub fn widths_strictly_decreasing(&self) -> bool {
        let w = self.widths();
        w.iter().all(Option::is_some) && w.windows(2).all(|p| p[1] < p[0])
    }

    /// `max_{i,j} (max_v c - min_v c) / min_v c` across the swept values.
    pub fn max_relative_concentration_spread(&self) -> f64 {
        let states: Vec<&FieldState> = self.runs.iter().map(|r| &r.output.final_state).collect();
        let Some(first) = states.first() else {
            return 0.0;
        };
        let mut spread = 0.0f64;
        for i in 0..first.c.len() {
            for j in 0..first.c[i].len() {
                let (lo, hi) = states.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), s| {
                    (lo.min(s.c[i][j]), hi.max(s.c[i][j]))
                });
                spread = spread.max((hi - lo) / lo.abs());
            }
        }
        spread
    }
}

fn sweep(spec: &StudySpec, set: fn(&mut DimensionlessParameters, f64), label: &str) -> Result<SweepReport> {
    let runs = spec
        .sweep_values
        .par_iter()
        .map(|&v| {
            let mut params = spec.params.clone();
            set(&mut params, v);
            let disc = Discretization::new(params, Grid::new(spec.intervals)?)?;
            let out = simulate(&disc, &spec.stepper, &spec.snapshot_times, true)?;
            Ok(StudyRun {
                label: format!("{label}={v}"),
                summary: RunSummary::of(&out, spec.stepper.scheme, disc.grid()),
                output: out,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(SweepReport {
        kind: spec.kind,
        values: spec.sweep_values.clone(),
        runs,
    })
}

/// Runs the base configuration for each `chi2` in `spec.sweep_values`.
pub fn chi2_sweep(spec: &StudySpec) -> Result<SweepReport> {
    sweep(spec, |p, v| p.chi2 = v, "chi2")
}

/// Runs the base configuration for each `eta'` in `spec.sweep_values`.
pub fn eta_sweep(spec: &StudySpec) -> Result<SweepReport> {
    sweep(spec, |p, v| p.robin_length = v, "etaPrime")
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PbCheckpoint {
    pub t: f64,
    pub max_potential_difference: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PbValidationReport {
    pub permittivity: Option<f64>,
    pub intervals: usize,
    pub oracle_iterations: usize,
    pub oracle_residual: f64,
    /// `max_j |phi_PNP - phi_PB|` at each snapshot time.
    pub checkpoints: Vec<PbCheckpoint>,
    pub max_potential_difference: f64,
    #[serde(skip)]
    pub oracle_phi: Vec<f64>,
    #[serde(skip)]
    pub final_state: Option<FieldState>,
}

/// Marches the conservative scheme to `spec.stepper.t_end` and compares the
/// potential with the Poisson–Boltzmann solution of the same species totals.
pub fn pb_validation(spec: &StudySpec) -> Result<PbValidationReport> {
    let disc = spec.discretization(spec.intervals)?;
    let cfg = spec.stepper.with_scheme(BoundaryScheme::Conservative);
    let initial = initial_state(&disc)?;
    let masses = initial
        .c
        .iter()
        .map(|c| disc.grid().trapezoid(c))
        .collect::<Result<Vec<_>>>()?;
    let (oracle, out) = rayon::join(
        || pb_steady_state(&disc, Some(&masses), &PbOptions::default()),
        || {
            let opts = RunOptions {
                sample_every: 0,
                snapshot_times: spec.snapshot_times.clone(),
                steady_tolerance: None,
            };
            run(&initial, &cfg, &disc, &opts)
        },
    );
    let oracle = oracle?;
    let out = out?;
    let diff = |s: &FieldState| {
        s.phi
            .iter()
            .zip(&oracle.phi)
            .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()))
    };
    let checkpoints: Vec<PbCheckpoint> = out
        .snapshots
        .iter()
        .map(|s| PbCheckpoint {
            t: s.t,
            max_potential_difference: diff(s),
        })
        .collect();
    Ok(PbValidationReport {
        permittivity: spec.params.permittivity.at(0.0),
        intervals: spec.intervals,
        oracle_iterations: oracle.iterations,
        oracle_residual: oracle.residual,
        checkpoints,
        max_potential_difference: diff(&out.final_state),
        oracle_phi: oracle.phi,
        final_state: Some(out.final_state),
    })
}
