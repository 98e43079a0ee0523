//! TR-BDF2 time stepping with inner concentration/potential iterations.
//!
//! Each stage alternates between the linear concentration solves (potential
//! frozen at the current iterate) and a Poisson solve, a fixed number of
//! times. With zero inner iterations the stage is semi-implicit and the
//! method is first order in time; one or more iterations recover second
//! order.

use serde::Serialize;

use crate::banded::solve_banded;
use crate::diagnostics::{max_rate_of_change, DiagnosticsRecord, DiagnosticsSample};
use crate::error::{check_len, Error, Result};
use crate::grid::FieldState;
use crate::spatial::{
    assemble_bdf2_system, assemble_poisson_system, assemble_tr_system, BoundaryScheme,
    Discretization,
};

/// `2 - sqrt(2)`: the TR fraction for which TR-BDF2 is L-stable with a
/// minimal local truncation error.
pub const OPTIMAL_GAMMA: f64 = 2.0 - std::f64::consts::SQRT_2;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StepperConfig {
    pub dt: f64,
    pub gamma: f64,
    /// Number of extra concentration/potential alternations per stage.
    pub inner_iterations: usize,
    pub scheme: BoundaryScheme,
    pub t_end: f64,
}

impl StepperConfig {
    /// Optimal gamma, two inner iterations, conservative boundary rows.
    pub fn new(dt: f64, t_end: f64) -> Self {
        StepperConfig {
            dt,
            gamma: OPTIMAL_GAMMA,
            inner_iterations: 2,
            scheme: BoundaryScheme::Conservative,
            t_end,
        }
    }

    pub fn with_scheme(mut self, scheme: BoundaryScheme) -> Self {
        self.scheme = scheme;
        self
    }

    pub fn with_inner_iterations(mut self, k: usize) -> Self {
        self.inner_iterations = k;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.gamma > 0.0 && self.gamma < 1.0) {
            return Err(Error::invalid("gamma", format!("must lie in (0, 1), got {}", self.gamma)));
        }
        if !(self.dt.is_finite() && self.dt > 0.0) {
            return Err(Error::invalid("dt", format!("must be positive, got {}", self.dt)));
        }
        if !self.t_end.is_finite() {
            return Err(Error::invalid("tEnd", "must be finite"));
        }
        Ok(())
    }
}

/// Potential for the concentrations `c`.
pub fn solve_poisson(c: &[Vec<f64>], disc: &Discretization) -> Result<Vec<f64>> {
    solve_banded(&assemble_poisson_system(c, disc)?)
}

/// Uniform initial concentrations with their Poisson potential, at `t = 0`.
pub fn initial_state(disc: &Discretization) -> Result<FieldState> {
    let initial: Vec<f64> = disc
        .params()
        .species
        .iter()
        .map(|s| s.initial_concentration)
        .collect();
    FieldState::uniform(disc.grid(), &initial, |c| solve_poisson(c, disc))
}

/// Result of one TR or BDF2 stage.
#[derive(Debug, Clone, PartialEq)]
pub struct StageResult {
    pub c: Vec<Vec<f64>>,
    pub phi: Vec<f64>,
    /// `max_i ||c_i^{k+1} - c_i^k||_inf` for each pass; the first entry is
    /// the change from the stage's starting concentrations.
    pub increments: Vec<f64>,
}

fn max_change(a: &[Vec<f64>], b: &[Vec<f64>]) -> f64 {
    a.iter()
        .flatten()
        .zip(b.iter().flatten())
        .fold(0.0, |m, (x, y)| m.max((x - y).abs()))
}

fn non_finite(stage: &'static str, iteration: usize, t: f64) -> Error {
    Error::NonFinite {
        step: 0,
        stage,
        iteration,
        last_good_time: t,
    }
}

fn all_finite(c: &[Vec<f64>], phi: &[f64]) -> bool {
    phi.iter().all(|v| v.is_finite()) && c.iter().flatten().all(|v| v.is_finite())
}

/// Runs `1 + inner_iterations` passes of: solve every species against the
/// frozen potential iterate, then re-solve the potential.
fn iterate_stage<F>(
    stage: &'static str,
    start_c: &[Vec<f64>],
    start_phi: &[f64],
    cfg: &StepperConfig,
    disc: &Discretization,
    t: f64,
    assemble: F,
) -> Result<StageResult>
where
    F: Fn(usize, &[f64]) -> Result<crate::banded::BandedSystem>,
{
    let mut c = start_c.to_vec();
    let mut phi = start_phi.to_vec();
    let mut increments = Vec::with_capacity(cfg.inner_iterations + 1);
    for k in 0..=cfg.inner_iterations {
        let next: Vec<Vec<f64>> = (0..c.len())
            .map(|i| solve_banded(&assemble(i, &phi)?))
            .collect::<Result<_>>()?;
        phi = solve_poisson(&next, disc)?;
        if !all_finite(&next, &phi) {
            return Err(non_finite(stage, k, t));
        }
        increments.push(max_change(&next, &c));
        c = next;
    }
    Ok(StageResult { c, phi, increments })
}

/// TR stage from `t_n` to `t_n + gamma dt`. The first potential iterate is
/// the potential at `t_n`.
pub fn tr_stage(state: &FieldState, cfg: &StepperConfig, disc: &Discretization) -> Result<StageResult> {
    state.check_shape(disc.grid())?;
    check_len(disc.n_species(), state.n_species())?;
    let gamma_dt = cfg.gamma * cfg.dt;
    iterate_stage("tr", &state.c, &state.phi, cfg, disc, state.t, |i, phi| {
        assemble_tr_system(i, &state.c[i], &state.phi, phi, cfg.scheme, gamma_dt, disc)
    })
}

/// BDF2 stage from `t_n + gamma dt` to `t_n + dt`. The first potential
/// iterate is the last TR potential.
pub fn bdf2_stage(
    state: &FieldState,
    tr: &StageResult,
    cfg: &StepperConfig,
    disc: &Discretization,
) -> Result<StageResult> {
    state.check_shape(disc.grid())?;
    iterate_stage("bdf2", &tr.c, &tr.phi, cfg, disc, state.t, |i, phi| {
        assemble_bdf2_system(i, &state.c[i], &tr.c[i], phi, cfg.scheme, cfg.dt, cfg.gamma, disc)
    })
}

/// Inner-iteration increments of one step, for convergence reporting.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StepReport {
    pub tr_increments: Vec<f64>,
    pub bdf2_increments: Vec<f64>,
}

/// One TR-BDF2 step of size `cfg.dt`, returning the new state and the inner
/// iteration increments.
pub fn advance_with_report(
    state: &FieldState,
    cfg: &StepperConfig,
    disc: &Discretization,
) -> Result<(FieldState, StepReport)> {
    cfg.validate()?;
    let tr = tr_stage(state, cfg, disc)?;
    let bdf2 = bdf2_stage(state, &tr, cfg, disc)?;
    let next = FieldState {
        t: state.t + cfg.dt,
        c: bdf2.c,
        phi: bdf2.phi,
    };
    Ok((
        next,
        StepReport {
            tr_increments: tr.increments,
            bdf2_increments: bdf2.increments,
        },
    ))
}

/// One TR-BDF2 step of size `cfg.dt`.
pub fn advance(state: &FieldState, cfg: &StepperConfig, disc: &Discretization) -> Result<FieldState> {
    advance_with_report(state, cfg, disc).map(|(s, _)| s)
}

/// Options for [`run`].
#[derive(Debug, Clone, PartialEq)]
pub struct RunOptions {
    /// Record diagnostics every this many steps (the first and last states
    /// are always recorded). Zero disables intermediate samples.
    pub sample_every: usize,
    /// Times at which full snapshots are kept; the step sequence is cut so
    /// that each one is hit exactly.
    pub snapshot_times: Vec<f64>,
    /// Stop early once `max |dc/dt|` drops below this value.
    pub steady_tolerance: Option<f64>,
}

impl Default for RunOptions {
    fn default() -> Self {
        RunOptions {
            sample_every: 1,
            snapshot_times: Vec::new(),
            steady_tolerance: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct NegativeEvent {
    pub step: usize,
    pub t: f64,
    pub count: usize,
    pub most_negative: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum StopReason {
    EndTime,
    SteadyState,
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub final_state: FieldState,
    pub record: DiagnosticsRecord,
    pub snapshots: Vec<FieldState>,
    pub steps: usize,
    pub stop: StopReason,
    /// Steps after which some concentration was negative.
    pub negative_events: Vec<NegativeEvent>,
    /// Fewer than one grid spacing per Debye length: boundary layers are not
    /// resolved and results are unreliable.
    pub under_resolved: bool,
}

/// Step count for the segment `[from, to]`; the last step absorbs the
/// remainder, so it may be slightly shorter than `dt`.
fn segment_steps(from: f64, to: f64, dt: f64) -> usize {
    (((to - from) / dt) - 1e-6).ceil().max(1.0) as usize
}

/// Marches `initial` to `cfg.t_end`. See [`run_observed`].
pub fn run(
    initial: &FieldState,
    cfg: &StepperConfig,
    disc: &Discretization,
    opts: &RunOptions,
) -> Result<RunOutput> {
    run_observed(initial, cfg, disc, opts, |_, _| {})
}

/// Marches `initial` to `cfg.t_end`, calling `observer` after every step
/// with the new state and the step's inner-iteration report.
pub fn run_observed<O>(
    initial: &FieldState,
    cfg: &StepperConfig,
    disc: &Discretization,
    opts: &RunOptions,
    mut observer: O,
) -> Result<RunOutput>
where
    O: FnMut(&FieldState, &StepReport),
{
    cfg.validate()?;
    initial.check_shape(disc.grid())?;
    check_len(disc.n_species(), initial.n_species())?;
    if cfg.t_end < initial.t {
        return Err(Error::invalid(
            "tEnd",
            format!("end time {} precedes start time {}", cfg.t_end, initial.t),
        ));
    }

    let mut snapshot_times: Vec<f64> = opts
        .snapshot_times
        .iter()
        .copied()
        .filter(|&s| s >= initial.t && s <= cfg.t_end)
        .collect();
    snapshot_times.sort_by(f64::total_cmp);
    snapshot_times.dedup();

    let mut record = DiagnosticsRecord::default();
    record.push(DiagnosticsSample::measure(initial, disc)?);
    let mut snapshots = Vec::new();
    if snapshot_times.first() == Some(&initial.t) {
        snapshots.push(initial.clone());
    }

    let mut stops: Vec<f64> = snapshot_times.iter().copied().filter(|&s| s > initial.t).collect();
    if stops.last() != Some(&cfg.t_end) && cfg.t_end > initial.t {
        stops.push(cfg.t_end);
    }

    let mut state = initial.clone();
    let mut steps = 0usize;
    let mut stop = StopReason::EndTime;
    let mut negative_events = Vec::new();
    let mut sampled_last = true;

    'segments: for &target in &stops {
        let from = state.t;
        let n = segment_steps(from, target, cfg.dt);
        for k in 0..n {
            let t_next = if k + 1 == n {
                target
            } else {
                from + (k + 1) as f64 * cfg.dt
            };
            let step_cfg = StepperConfig {
                dt: t_next - state.t,
                ..*cfg
            };
            let (mut next, report) = advance_with_report(&state, &step_cfg, disc).map_err(|e| match e {
                Error::NonFinite {
                    stage, iteration, ..
                } => Error::NonFinite {
                    step: steps + 1,
                    stage,
                    iteration,
                    last_good_time: state.t,
                },
                other => other,
            })?;
            next.t = t_next;
            steps += 1;
            state = next;
            observer(&state, &report);

            if let Some(neg) = state.negative_concentrations() {
                negative_events.push(NegativeEvent {
                    step: steps,
                    t: state.t,
                    count: neg.count,
                    most_negative: neg.most_negative,
                });
            }

            sampled_last = false;
            if opts.sample_every > 0 && steps % opts.sample_every == 0 {
                record.push(DiagnosticsSample::measure(&state, disc)?);
                sampled_last = true;
            }
            if let Some(tol) = opts.steady_tolerance {
                let rate = record
                    .samples
                    .last()
                    .filter(|_| sampled_last)
                    .map(|s| s.max_rate)
                    .map_or_else(|| max_rate_of_change(&state, disc), Ok)?;
                if rate < tol {
                    stop = StopReason::SteadyState;
                    break 'segments;
                }
            }
        }
        if snapshot_times.contains(&target) {
            snapshots.push(state.clone());
        }
    }
    if !sampled_last {
        record.push(DiagnosticsSample::measure(&state, disc)?);
    }

    Ok(RunOutput {
        final_state: state,
        record,
        snapshots,
        steps,
        stop,
        negative_events,
        under_resolved: disc.grid().dx() > disc.debye_length(),
    })
}
