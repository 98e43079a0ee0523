//! Physical constants and the dimensionless parameter set.
//!
//! Physical inputs use Å, s, V, K and F/Å (the vacuum permittivity is given in
//! F/m and converted). Lengths are scaled by the half channel length `L`,
//! concentrations by `c0`, time by `L²/D0` and potentials by `phi0`.

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::grid::Grid;

/// Elementary charge (C).
pub const ELEMENTARY_CHARGE: f64 = 1.602_176_634e-19;
/// Boltzmann constant (J/K).
pub const BOLTZMANN: f64 = 1.380_649e-23;
/// Vacuum permittivity (F/m).
pub const VACUUM_PERMITTIVITY: f64 = 8.854_187_817e-12;
/// F/m to F/Å.
pub const PER_METER_TO_PER_ANGSTROM: f64 = 1e-10;

/// A scalar coefficient over the domain: constant, given as a function of
/// position, or sampled at grid nodes.
///
/// Half-index values (`x_{j±1/2}`) are evaluated at midpoints for functional
/// profiles and as the mean of adjacent samples for sampled ones. Outside the
/// domain a sampled profile is extended by its end value.
#[derive(Clone)]
pub enum Profile {
    Constant(f64),
    Function(Arc<dyn Fn(f64) -> f64 + Send + Sync>),
    Sampled(Vec<f64>),
}

impl fmt::Debug for Profile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Profile::Constant(v) => f.debug_tuple("Constant").field(v).finish(),
            Profile::Function(_) => f.write_str("Function(..)"),
            Profile::Sampled(v) => f.debug_tuple("Sampled").field(&v.len()).finish(),
        }
    }
}

impl Profile {
    pub fn function(f: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        Profile::Function(Arc::new(f))
    }

    pub fn at(&self, x: f64) -> Option<f64> {
        match self {
            Profile::Constant(v) => Some(*v),
            Profile::Function(f) => Some(f(x)),
            Profile::Sampled(_) => None,
        }
    }

    /// Values at the `J + 1` grid nodes.
    pub fn nodes(&self, grid: &Grid) -> Result<Vec<f64>> {
        match self {
            Profile::Constant(v) => Ok(vec![*v; grid.len()]),
            Profile::Function(f) => Ok(grid.nodes().iter().map(|&x| f(x)).collect()),
            Profile::Sampled(v) => {
                crate::error::check_len(grid.len(), v.len())?;
                Ok(v.clone())
            }
        }
    }

    /// Values at the `J + 2` half points `x_{-1/2}, x_{1/2}, ..., x_{J+1/2}`;
    /// entry `k` is the coefficient at `x_{k-1/2}`.
    pub fn half_points(&self, grid: &Grid) -> Result<Vec<f64>> {
        let n = grid.intervals();
        match self {
            Profile::Constant(v) => Ok(vec![*v; n + 2]),
            Profile::Function(f) => Ok((0..n + 2)
                .map(|k| f(grid.x(0) + (k as f64 - 0.5) * grid.dx()))
                .collect()),
            Profile::Sampled(v) => {
                crate::error::check_len(grid.len(), v.len())?;
                let mut half = Vec::with_capacity(n + 2);
                half.push(v[0]);
                half.extend(v.windows(2).map(|w| 0.5 * (w[0] + w[1])));
                half.push(v[n]);
                Ok(half)
            }
        }
    }

    fn scaled(&self, factor: f64, length: f64) -> Profile {
        match self {
            Profile::Constant(v) => Profile::Constant(v * factor),
            Profile::Function(f) => {
                let f = Arc::clone(f);
                Profile::function(move |x| f(x * length) * factor)
            }
            Profile::Sampled(v) => Profile::Sampled(v.iter().map(|x| x * factor).collect()),
        }
    }

    /// Smallest value over nodes and half points, used for positivity checks.
    fn min_on(&self, grid: &Grid) -> Result<f64> {
        let nodes = self.nodes(grid)?;
        let half = self.half_points(grid)?;
        Ok(nodes.iter().chain(&half).copied().fold(f64::INFINITY, f64::min))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhysicalSpecies {
    pub valence: f64,
    /// Å²/s
    pub diffusivity: f64,
    /// ions/Å³
    pub initial_concentration: f64,
}

/// Raw physical description of a channel.
#[derive(Debug, Clone)]
pub struct PhysicalParameters {
    /// C
    pub unit_charge: f64,
    /// J/K
    pub boltzmann: f64,
    /// K
    pub temperature: f64,
    /// F/m
    pub vacuum_permittivity: f64,
    pub relative_permittivity: f64,
    /// F/Å
    pub characteristic_permittivity: f64,
    /// Half channel length, Å.
    pub half_length: f64,
    /// Average initial concentration, ions/Å³.
    pub mean_concentration: f64,
    /// Å²/s
    pub reference_diffusivity: f64,
    /// V
    pub characteristic_potential: f64,
    /// Robin length, Å.
    pub robin_length: f64,
    /// Far-field potentials, V.
    pub phi_minus: f64,
    pub phi_plus: f64,
    pub species: Vec<PhysicalSpecies>,
    /// Permanent charge density in C/Å³ as a function of position in Å.
    pub fixed_charge: Profile,
}

impl PhysicalParameters {
    /// KcsA-like channel: 120 Å long, two monovalent species at 2 M,
    /// water permittivity, `phi0 = 0.08 V`, `eta = 2.78e-3 Å`.
    pub fn kcsa() -> Self {
        let water = 78.5 * VACUUM_PERMITTIVITY * PER_METER_TO_PER_ANGSTROM;
        let c0 = 1.2044e-3;
        let d0 = 1e9;
        PhysicalParameters {
            unit_charge: ELEMENTARY_CHARGE,
            boltzmann: BOLTZMANN,
            temperature: 298.0,
            vacuum_permittivity: VACUUM_PERMITTIVITY,
            relative_permittivity: 78.5,
            characteristic_permittivity: water,
            half_length: 60.0,
            mean_concentration: c0,
            reference_diffusivity: d0,
            characteristic_potential: 0.08,
            robin_length: 2.78e-3,
            phi_minus: 0.08,
            phi_plus: -0.08,
            species: vec![
                PhysicalSpecies {
                    valence: 1.0,
                    diffusivity: d0,
                    initial_concentration: c0,
                },
                PhysicalSpecies {
                    valence: -1.0,
                    diffusivity: d0,
                    initial_concentration: c0,
                },
            ],
            fixed_charge: Profile::Constant(0.0),
        }
    }

    fn validate(&self) -> Result<()> {
        let positive = [
            ("T", self.temperature),
            ("L", self.half_length),
            ("c0", self.mean_concentration),
            ("D0", self.reference_diffusivity),
            ("eta", self.robin_length),
            ("epst", self.characteristic_permittivity),
            ("phi0", self.characteristic_potential),
            ("e", self.unit_charge),
            ("kB", self.boltzmann),
            ("eps0", self.vacuum_permittivity),
            ("epsr", self.relative_permittivity),
        ];
        for (name, value) in positive {
            if !(value.is_finite() && value > 0.0) {
                return Err(Error::invalid(name, format!("must be positive, got {value}")));
            }
        }
        if self.species.is_empty() {
            return Err(Error::invalid("species", "at least one species is required"));
        }
        for (i, s) in self.species.iter().enumerate() {
            if !(s.diffusivity.is_finite() && s.diffusivity > 0.0) {
                return Err(Error::invalid(
                    &format!("D.{}", i + 1),
                    format!("must be positive, got {}", s.diffusivity),
                ));
            }
            if !(s.initial_concentration.is_finite() && s.initial_concentration > 0.0) {
                return Err(Error::invalid(
                    &format!("cInit.{}", i + 1),
                    format!("must be positive, got {}", s.initial_concentration),
                ));
            }
        }
        Ok(())
    }

    pub fn nondimensionalize(&self) -> Result<DimensionlessParameters> {
        self.validate()?;
        let length = self.half_length;
        let phi0 = self.characteristic_potential;
        let potential_scale = length * length / (phi0 * self.characteristic_permittivity);
        let permittivity = self.relative_permittivity
            * self.vacuum_permittivity
            * PER_METER_TO_PER_ANGSTROM
            / self.characteristic_permittivity;

        let species = self
            .species
            .iter()
            .map(|s| {
                let c = s.initial_concentration / self.mean_concentration;
                SpeciesParameters {
                    valence: s.valence,
                    diffusivity: s.diffusivity / self.reference_diffusivity,
                    initial_concentration: c,
                    reference_concentration: c,
                }
            })
            .collect();

        let params = DimensionlessParameters {
            chi1: self.unit_charge * phi0 / (self.boltzmann * self.temperature),
            chi2: self.unit_charge * self.mean_concentration * potential_scale,
            robin_length: self.robin_length / length,
            permittivity: Profile::Constant(permittivity),
            fixed_charge: self.fixed_charge.scaled(potential_scale, length),
            phi_minus: self.phi_minus / phi0,
            phi_plus: self.phi_plus / phi0,
            species,
        };
        params.validate_scalars()?;
        Ok(params)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpeciesParameters {
    pub valence: f64,
    /// `D_i / D0`
    pub diffusivity: f64,
    /// Uniform initial concentration, `c_i / c0`.
    pub initial_concentration: f64,
    /// Reference concentration `c_{i,0}` in the entropy term.
    pub reference_concentration: f64,
}

impl SpeciesParameters {
    /// Unit diffusivity, unit initial and reference concentration.
    pub fn unit(valence: f64) -> Self {
        SpeciesParameters {
            valence,
            diffusivity: 1.0,
            initial_concentration: 1.0,
            reference_concentration: 1.0,
        }
    }
}

/// The dimensionless parameter set consumed by every solver module.
#[derive(Debug, Clone)]
pub struct DimensionlessParameters {
    /// `e phi0 / (kB T)`
    pub chi1: f64,
    /// `e c0 L² / (phi0 eps_t)`
    pub chi2: f64,
    /// `eta / L`
    pub robin_length: f64,
    /// `eps / eps_t`
    pub permittivity: Profile,
    /// `rho0 L² / (phi0 eps_t)`
    pub fixed_charge: Profile,
    pub phi_minus: f64,
    pub phi_plus: f64,
    pub species: Vec<SpeciesParameters>,
}

impl DimensionlessParameters {
    /// Two monovalent species of opposite sign with unit data, constant
    /// permittivity and no fixed charge.
    pub fn symmetric_pair(chi1: f64, chi2: f64, robin_length: f64, permittivity: f64) -> Self {
        DimensionlessParameters {
            chi1,
            chi2,
            robin_length,
            permittivity: Profile::Constant(permittivity),
            fixed_charge: Profile::Constant(0.0),
            phi_minus: 1.0,
            phi_plus: -1.0,
            species: vec![SpeciesParameters::unit(1.0), SpeciesParameters::unit(-1.0)],
        }
    }

    /// The channel configuration used for the time-dependent studies:
    /// `chi1 = 3.1`, `chi2 = 125.4`, `eta' = 4.63e-5`, `eps' = 1`,
    /// `phi- = 1`, `phi+ = -1`.
    pub fn channel() -> Self {
        Self::symmetric_pair(3.1, 125.4, 4.63e-5, 1.0)
    }

    pub fn n_species(&self) -> usize {
        self.species.len()
    }

    fn validate_scalars(&self) -> Result<()> {
        if !(self.chi1.is_finite() && self.chi1 > 0.0) {
            return Err(Error::invalid("chi1", format!("must be positive, got {}", self.chi1)));
        }
        if !(self.chi2.is_finite() && self.chi2 >= 0.0) {
            return Err(Error::invalid("chi2", format!("must be non-negative, got {}", self.chi2)));
        }
        if !(self.robin_length.is_finite() && self.robin_length > 0.0) {
            return Err(Error::invalid(
                "etaPrime",
                format!("must be positive, got {}", self.robin_length),
            ));
        }
        for (name, v) in [("phiMinus", self.phi_minus), ("phiPlus", self.phi_plus)] {
            if !v.is_finite() {
                return Err(Error::invalid(name, "must be finite"));
            }
        }
        if self.species.is_empty() {
            return Err(Error::invalid("species", "at least one species is required"));
        }
        for (i, s) in self.species.iter().enumerate() {
            let checks = [
                ("D", s.diffusivity),
                ("cInit", s.initial_concentration),
                ("cRef", s.reference_concentration),
            ];
            for (name, v) in checks {
                if !(v.is_finite() && v > 0.0) {
                    return Err(Error::invalid(
                        &format!("{name}.{}", i + 1),
                        format!("must be positive, got {v}"),
                    ));
                }
            }
            if !s.valence.is_finite() {
                return Err(Error::invalid(&format!("z.{}", i + 1), "must be finite"));
            }
        }
        Ok(())
    }

    /// Checks scalar invariants and positivity of the permittivity on `grid`.
    pub fn validate(&self, grid: &Grid) -> Result<()> {
        self.validate_scalars()?;
        let eps_min = self.permittivity.min_on(grid)?;
        if !(eps_min.is_finite() && eps_min > 0.0) {
            return Err(Error::invalid(
                "epsPrime",
                format!("must be positive everywhere, minimum is {eps_min}"),
            ));
        }
        if self.fixed_charge.nodes(grid)?.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("rho0Prime", "must be finite"));
        }
        Ok(())
    }
}
