//! Flat `key = value` run configuration.
//!
//! ```text
//! # channel baseline
//! mode = simulate
//! chi1 = 3.1
//! chi2 = 125.4
//! etaPrime = 4.63e-5
//! epsPrime = 1
//! phiMinus = 1
//! phiPlus = -1
//! z.1 = 1
//! z.2 = -1
//! J = 1000
//! dt = 1e-4
//! tEnd = 1
//! ```
//!
//! Species data use indexed keys (`z.N`, `D.N`, `cInit.N`, `cRef.N`).
//! Instead of the dimensionless block a `physical.*` block may be given;
//! it is converted with [`PhysicalParameters::nondimensionalize`].

use std::collections::BTreeMap;
use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::harness::Probe;
use crate::params::{
    DimensionlessParameters, PhysicalParameters, PhysicalSpecies, Profile, SpeciesParameters,
    BOLTZMANN, ELEMENTARY_CHARGE, PER_METER_TO_PER_ANGSTROM, VACUUM_PERMITTIVITY,
};
use crate::spatial::BoundaryScheme;
use crate::stepper::{StepperConfig, OPTIMAL_GAMMA};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    Simulate,
    TemporalOrder,
    SpatialOrder,
    Compare,
    PbValidate,
    Sweep,
}

impl Mode {
    pub fn as_str(self) -> &'static str {
        match self {
            Mode::Simulate => "simulate",
            Mode::TemporalOrder => "temporal-order",
            Mode::SpatialOrder => "spatial-order",
            Mode::Compare => "compare",
            Mode::PbValidate => "pb-validate",
            Mode::Sweep => "sweep",
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        [
            Mode::Simulate,
            Mode::TemporalOrder,
            Mode::SpatialOrder,
            Mode::Compare,
            Mode::PbValidate,
            Mode::Sweep,
        ]
        .into_iter()
        .find(|m| m.as_str() == s)
        .ok_or_else(|| Error::key("mode", format!("unknown mode `{s}`")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum SweepParameter {
    #[serde(rename = "chi2")]
    Chi2,
    #[serde(rename = "etaPrime")]
    EtaPrime,
}

impl SweepParameter {
    pub fn as_str(self) -> &'static str {
        match self {
            SweepParameter::Chi2 => "chi2",
            SweepParameter::EtaPrime => "etaPrime",
        }
    }
}

impl FromStr for SweepParameter {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "chi2" => Ok(SweepParameter::Chi2),
            "etaPrime" => Ok(SweepParameter::EtaPrime),
            other => Err(Error::key(
                "sweepParameter",
                format!("expected `chi2` or `etaPrime`, got `{other}`"),
            )),
        }
    }
}

/// A fully resolved run description.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub mode: Mode,
    pub params: DimensionlessParameters,
    pub intervals: usize,
    pub stepper: StepperConfig,
    pub snapshot_times: Vec<f64>,
    pub sample_every: usize,
    pub probe: Probe,
    pub sweep_parameter: Option<SweepParameter>,
    /// Swept values, or base time steps in temporal-order mode.
    pub sweep_values: Vec<f64>,
    /// Output directory; `None` means the caller's default.
    pub out: Option<PathBuf>,
    /// The `physical.*` entries the parameters were derived from, if any.
    pub physical: Vec<(String, String)>,
}

pub const DEFAULT_BASE_STEPS: [f64; 3] = [5e-5, 2.5e-5, 1.25e-5];

impl RunConfig {
    pub fn grid(&self) -> Result<Grid> {
        Grid::new(self.intervals)
    }

    /// Every resolved setting as `(key, value)`, defaults included, in a
    /// fixed order. Parsing these entries back yields the same run.
    pub fn entries(&self) -> Vec<(String, String)> {
        let mut e: Vec<(String, String)> = Vec::new();
        let mut put = |k: &str, v: String| e.push((k.to_string(), v));
        let p = &self.params;
        put("mode", self.mode.to_string());
        put("chi1", p.chi1.to_string());
        put("chi2", p.chi2.to_string());
        put("etaPrime", p.robin_length.to_string());
        put("epsPrime", profile_text(&p.permittivity));
        put("phiMinus", p.phi_minus.to_string());
        put("phiPlus", p.phi_plus.to_string());
        put("rho0Prime", profile_text(&p.fixed_charge));
        for (i, s) in p.species.iter().enumerate() {
            let n = i + 1;
            put(&format!("z.{n}"), s.valence.to_string());
            put(&format!("D.{n}"), s.diffusivity.to_string());
            put(&format!("cInit.{n}"), s.initial_concentration.to_string());
            put(&format!("cRef.{n}"), s.reference_concentration.to_string());
        }
        put("J", self.intervals.to_string());
        put("dt", self.stepper.dt.to_string());
        put("gamma", self.stepper.gamma.to_string());
        put("innerIterations", self.stepper.inner_iterations.to_string());
        put("scheme", self.stepper.scheme.to_string());
        put("tEnd", self.stepper.t_end.to_string());
        put("snapshotTimes", join(&self.snapshot_times));
        put("sampleEvery", self.sample_every.to_string());
        put("probeX", self.probe.x.to_string());
        put("probeT", self.probe.t.to_string());
        if let Some(sp) = self.sweep_parameter {
            put("sweepParameter", sp.as_str().to_string());
        }
        if !self.sweep_values.is_empty() {
            put("sweepValues", join(&self.sweep_values));
        }
        if let Some(out) = &self.out {
            put("out", out.display().to_string());
        }
        for (k, v) in &self.physical {
            e.push((format!("# {k}"), v.clone()));
        }
        e
    }
}

fn profile_text(p: &Profile) -> String {
    p.at(0.0).map_or_else(|| "<profile>".to_string(), |v| v.to_string())
}

fn join(values: &[f64]) -> String {
    values.iter().map(f64::to_string).collect::<Vec<_>>().join(", ")
}

struct Entry {
    line: usize,
    value: String,
}

struct Entries {
    map: BTreeMap<String, Entry>,
}

impl Entries {
    fn take(&mut self, key: &str) -> Option<Entry> {
        self.map.remove(key)
    }

    fn parsed<T: FromStr>(&mut self, key: &str) -> Result<Option<T>> {
        match self.take(key) {
            None => Ok(None),
            Some(e) => e.value.parse().map(Some).map_err(|_| {
                Error::key(key, format!("cannot parse `{}` (line {})", e.value, e.line))
            }),
        }
    }

    fn required<T: FromStr>(&mut self, key: &str) -> Result<T> {
        self.parsed(key)?
            .ok_or_else(|| Error::key(key, "required but missing"))
    }

    fn list(&mut self, key: &str) -> Result<Option<Vec<f64>>> {
        let Some(e) = self.take(key) else {
            return Ok(None);
        };
        e.value
            .split(',')
            .map(str::trim)
            .filter(|s| !s.is_empty())
            .map(|s| {
                s.parse().map_err(|_| {
                    Error::key(key, format!("cannot parse list item `{s}` (line {})", e.line))
                })
            })
            .collect::<Result<Vec<_>>>()
            .map(Some)
    }

    /// Highest `N` among keys `prefix.N`; rejects gaps and `N = 0`.
    fn species_count(&self, prefixes: &[&str]) -> Result<usize> {
        let mut seen = Vec::new();
        for key in self.map.keys() {
            for prefix in prefixes {
                let Some(rest) = key.strip_prefix(prefix).and_then(|r| r.strip_prefix('.')) else {
                    continue;
                };
                match rest.parse::<usize>() {
                    Ok(n) if n >= 1 => seen.push(n),
                    _ => return Err(Error::key(key, "species index must be a positive integer")),
                }
            }
        }
        let count = seen.iter().copied().max().unwrap_or(0);
        Ok(count)
    }

    fn has_prefix(&self, prefix: &str) -> bool {
        self.map.keys().any(|k| k.starts_with(prefix))
    }
}

fn tokenize(source: &str) -> Result<Entries> {
    let mut map = BTreeMap::new();
    for (i, raw) in source.lines().enumerate() {
        let line = i + 1;
        let text = raw.split('#').next().unwrap_or("").trim();
        if text.is_empty() {
            continue;
        }
        let (key, value) = text.split_once('=').ok_or_else(|| Error::ConfigSyntax {
            line,
            message: format!("expected `key = value`, got `{text}`"),
        })?;
        let key = key.trim();
        let value = value.trim().trim_matches('"');
        if key.is_empty() || key.contains(char::is_whitespace) {
            return Err(Error::ConfigSyntax {
                line,
                message: format!("invalid key `{key}`"),
            });
        }
        if map.contains_key(key) {
            return Err(Error::ConfigSyntax {
                line,
                message: format!("duplicate key `{key}`"),
            });
        }
        map.insert(
            key.to_string(),
            Entry {
                line,
                value: value.to_string(),
            },
        );
    }
    Ok(Entries { map })
}

/// Parses a configuration file.
pub fn parse_config(source: &str) -> Result<RunConfig> {
    parse_config_with(source, &[])
}

/// Parses a configuration file with `overrides` replacing (or adding)
/// keys, as command-line flags do.
pub fn parse_config_with(source: &str, overrides: &[(&str, String)]) -> Result<RunConfig> {
    let mut entries = tokenize(source)?;
    for (key, value) in overrides {
        entries.map.insert(
            key.to_string(),
            Entry {
                line: 0,
                value: value.clone(),
            },
        );
    }

    let mode: Mode = entries.parsed("mode")?.unwrap_or(Mode::Simulate);
    let dimensionless_keys = ["chi1", "chi2", "etaPrime", "epsPrime", "phiMinus", "phiPlus", "rho0Prime"];
    let (params, physical) = if entries.has_prefix("physical.") {
        let species_keys = ["z", "D", "cInit", "cRef"];
        let mixed = dimensionless_keys
            .iter()
            .find(|k| entries.map.contains_key(**k))
            .map(|k| k.to_string())
            .or_else(|| {
                entries
                    .map
                    .keys()
                    .find(|k| species_keys.iter().any(|p| k.starts_with(&format!("{p}."))))
                    .cloned()
            });
        if let Some(key) = mixed {
            return Err(Error::key(
                &key,
                "a physical.* block and dimensionless parameters cannot both be given",
            ));
        }
        physical_block(&mut entries)?
    } else {
        (dimensionless_block(&mut entries)?, Vec::new())
    };

    let intervals: usize = entries.required("J")?;
    let dt: f64 = match mode {
        Mode::TemporalOrder => entries.parsed("dt")?.unwrap_or(DEFAULT_BASE_STEPS[0]),
        _ => entries.required("dt")?,
    };
    let probe = Probe {
        x: entries.parsed("probeX")?.unwrap_or(0.904),
        t: entries.parsed("probeT")?.unwrap_or(0.02),
    };
    let t_end: f64 = match mode {
        Mode::TemporalOrder | Mode::SpatialOrder => entries.parsed("tEnd")?.unwrap_or(probe.t),
        _ => entries.required("tEnd")?,
    };
    let stepper = StepperConfig {
        dt,
        gamma: entries.parsed("gamma")?.unwrap_or(OPTIMAL_GAMMA),
        inner_iterations: entries.parsed("innerIterations")?.unwrap_or(2),
        scheme: entries.parsed("scheme")?.unwrap_or(BoundaryScheme::Conservative),
        t_end,
    };
    let snapshot_times = entries.list("snapshotTimes")?.unwrap_or_default();
    let sample_every = entries.parsed("sampleEvery")?.unwrap_or(1);
    let sweep_parameter: Option<SweepParameter> = entries.parsed("sweepParameter")?;
    let mut sweep_values = entries.list("sweepValues")?.unwrap_or_default();
    let out = entries.take("out").map(|e| PathBuf::from(e.value));

    if let Some((key, e)) = entries.map.iter().next() {
        let place = if e.line == 0 {
            "command line".to_string()
        } else {
            format!("line {}", e.line)
        };
        return Err(Error::key(key, format!("unknown key ({place})")));
    }

    match mode {
        Mode::Sweep => {
            if sweep_parameter.is_none() {
                return Err(Error::key("sweepParameter", "required in sweep mode"));
            }
            if sweep_values.is_empty() {
                return Err(Error::key("sweepValues", "required in sweep mode"));
            }
        }
        Mode::TemporalOrder if sweep_values.is_empty() => {
            sweep_values = DEFAULT_BASE_STEPS.to_vec();
        }
        _ => {}
    }
    if sweep_values.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
        return Err(Error::key("sweepValues", "values must be positive"));
    }
    if let Some(t) = snapshot_times.iter().find(|t| !t.is_finite() || **t < 0.0) {
        return Err(Error::key("snapshotTimes", format!("invalid time {t}")));
    }

    let grid = Grid::new(intervals).map_err(|e| Error::key("J", e.to_string()))?;
    params.validate(&grid)?;
    stepper.validate()?;

    Ok(RunConfig {
        mode,
        params,
        intervals,
        stepper,
        snapshot_times,
        sample_every,
        probe,
        sweep_parameter,
        sweep_values,
        out,
        physical,
    })
}

fn dimensionless_block(entries: &mut Entries) -> Result<DimensionlessParameters> {
    let n = entries.species_count(&["z", "D", "cInit", "cRef"])?;
    if n == 0 {
        return Err(Error::key("z.1", "at least one species is required"));
    }
    let mut species = Vec::with_capacity(n);
    for i in 1..=n {
        species.push(SpeciesParameters {
            valence: entries.required(&format!("z.{i}"))?,
            diffusivity: entries.parsed(&format!("D.{i}"))?.unwrap_or(1.0),
            initial_concentration: entries.parsed(&format!("cInit.{i}"))?.unwrap_or(1.0),
            reference_concentration: entries.parsed(&format!("cRef.{i}"))?.unwrap_or(1.0),
        });
    }
    Ok(DimensionlessParameters {
        chi1: entries.required("chi1")?,
        chi2: entries.required("chi2")?,
        robin_length: entries.required("etaPrime")?,
        permittivity: Profile::Constant(entries.parsed("epsPrime")?.unwrap_or(1.0)),
        fixed_charge: Profile::Constant(entries.parsed("rho0Prime")?.unwrap_or(0.0)),
        phi_minus: entries.required("phiMinus")?,
        phi_plus: entries.required("phiPlus")?,
        species,
    })
}

/// `physical.*` keys: `L`, `c0`, `phi0`, `eta` (Å), `phiMinus`, `phiPlus`
/// (V), `z.N`, `D.N` (Å²/s), `cInit.N` (ions/Å³); optional `T` (298 K),
/// `epsr` (78.5), `epst` (F/Å, defaults to `epsr eps0`), `D0` (defaults to
/// `D.1`) and a constant `rho0` (C/Å³).
fn physical_block(entries: &mut Entries) -> Result<(DimensionlessParameters, Vec<(String, String)>)> {
    let echo: Vec<(String, String)> = entries
        .map
        .iter()
        .filter(|(k, _)| k.starts_with("physical."))
        .map(|(k, e)| (k.clone(), e.value.clone()))
        .collect();
    let n = entries.species_count(&["physical.z", "physical.D", "physical.cInit"])?;
    if n == 0 {
        return Err(Error::key("physical.z.1", "at least one species is required"));
    }
    let mut species = Vec::with_capacity(n);
    for i in 1..=n {
        species.push(PhysicalSpecies {
            valence: entries.required(&format!("physical.z.{i}"))?,
            diffusivity: entries.required(&format!("physical.D.{i}"))?,
            initial_concentration: entries.required(&format!("physical.cInit.{i}"))?,
        });
    }
    let epsr: f64 = entries.parsed("physical.epsr")?.unwrap_or(78.5);
    let physical = PhysicalParameters {
        unit_charge: ELEMENTARY_CHARGE,
        boltzmann: BOLTZMANN,
        temperature: entries.parsed("physical.T")?.unwrap_or(298.0),
        vacuum_permittivity: VACUUM_PERMITTIVITY,
        relative_permittivity: epsr,
        characteristic_permittivity: entries
            .parsed("physical.epst")?
            .unwrap_or(epsr * VACUUM_PERMITTIVITY * PER_METER_TO_PER_ANGSTROM),
        half_length: entries.required("physical.L")?,
        mean_concentration: entries.required("physical.c0")?,
        reference_diffusivity: entries
            .parsed("physical.D0")?
            .unwrap_or(species[0].diffusivity),
        characteristic_potential: entries.required("physical.phi0")?,
        robin_length: entries.required("physical.eta")?,
        phi_minus: entries.required("physical.phiMinus")?,
        phi_plus: entries.required("physical.phiPlus")?,
        fixed_charge: Profile::Constant(entries.parsed("physical.rho0")?.unwrap_or(0.0)),
        species,
    };
    let params = physical.nondimensionalize().map_err(|e| match e {
        Error::InvalidParameter { name, reason } => Error::ConfigKey {
            key: format!("physical.{name}"),
            message: reason,
        },
        other => other,
    })?;
    Ok((params, echo))
}
