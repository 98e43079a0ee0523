//! Measured quantities: species totals, free energy, both sides of the
//! energy dissipation law, chemical potentials and the largest rate of
//! change of the concentrations.
//!
//! Energies are scaled by `kB T c0 L`, which puts the factor `chi1 / (2 chi2)`
//! on the electric part:
//!
//! ```text
//! E = ∫ sum_i c_i log(c_i / c_ref,i) dx
//!   + chi1/(2 chi2) [ ∫ eps (dphi/dx)² dx + (eps/eta)(phi(1)² + phi(-1)²) ]
//! dE/dt = -∫ sum_i D_i c_i (dmu_i/dx)² dx,   mu_i = log(c_i/c_ref,i) + 1 + chi1 z_i phi
//! ```
//!
//! Integrals use the trapezoid rule and derivatives second-order central
//! differences with three-point one-sided stencils at the ends.

use serde::Serialize;

use crate::error::{check_len, Error, Result};
use crate::grid::{FieldState, Grid};
use crate::spatial::{half_point_fluxes, np_rate, BoundaryScheme, Discretization};

/// Second-order derivative of nodal data.
pub fn gradient(values: &[f64], grid: &Grid) -> Result<Vec<f64>> {
    check_len(grid.len(), values.len())?;
    let n = grid.intervals();
    let h2 = 2.0 * grid.dx();
    let mut d = Vec::with_capacity(n + 1);
    d.push((-3.0 * values[0] + 4.0 * values[1] - values[2]) / h2);
    d.extend(values.windows(3).map(|w| (w[2] - w[0]) / h2));
    d.push((3.0 * values[n] - 4.0 * values[n - 1] + values[n - 2]) / h2);
    Ok(d)
}

pub fn total_concentration(state: &FieldState, species: usize, grid: &Grid) -> Result<f64> {
    let c = state
        .c
        .get(species)
        .ok_or_else(|| Error::invalid("species", format!("no species with index {species}")))?;
    grid.trapezoid(c)
}

fn check_positive(state: &FieldState, species: usize) -> Result<()> {
    match state.c[species].iter().position(|&v| !(v > 0.0)) {
        None => Ok(()),
        Some(node) => Err(Error::NonPositiveConcentration {
            species,
            node,
            value: state.c[species][node],
        }),
    }
}

fn entropy(state: &FieldState, disc: &Discretization) -> Result<f64> {
    let grid = disc.grid();
    let mut density = vec![0.0; grid.len()];
    for (i, sp) in disc.params().species.iter().enumerate() {
        check_positive(state, i)?;
        for (d, &c) in density.iter_mut().zip(&state.c[i]) {
            *d += c * (c / sp.reference_concentration).ln();
        }
    }
    grid.trapezoid(&density)
}

/// Free energy with the electric part in gradient-squared form.
pub fn total_energy(state: &FieldState, disc: &Discretization) -> Result<f64> {
    state.check_shape(disc.grid())?;
    let grid = disc.grid();
    let p = disc.params();
    let n = grid.intervals();
    let eps = p.permittivity.nodes(grid)?;
    let dphi = gradient(&state.phi, grid)?;
    let field: Vec<f64> = eps.iter().zip(&dphi).map(|(e, d)| e * d * d).collect();
    let boundary = eps[0] * state.phi[0].powi(2) + eps[n] * state.phi[n].powi(2);
    let electric = grid.trapezoid(&field)? + boundary / p.robin_length;
    Ok(entropy(state, disc)? + p.chi1 / (2.0 * p.chi2) * electric)
}

/// Free energy with the electric part written as charge times potential
/// plus the far-field boundary work. Agrees with [`total_energy`] up to
/// discretization error when `phi` solves the Poisson problem for `c`.
pub fn total_energy_charge_form(state: &FieldState, disc: &Discretization) -> Result<f64> {
    state.check_shape(disc.grid())?;
    let grid = disc.grid();
    let p = disc.params();
    let n = grid.intervals();
    let eps = p.permittivity.nodes(grid)?;
    let density: Vec<f64> = (0..grid.len())
        .map(|j| {
            let net: f64 = p
                .species
                .iter()
                .zip(&state.c)
                .map(|(s, c)| s.valence * c[j])
                .sum();
            (disc.fixed_charge()[j] + p.chi2 * net) * state.phi[j]
        })
        .collect();
    let boundary =
        (eps[n] * p.phi_plus * state.phi[n] + eps[0] * p.phi_minus * state.phi[0]) / p.robin_length;
    Ok(entropy(state, disc)? + p.chi1 / (2.0 * p.chi2) * (grid.trapezoid(&density)? + boundary))
}

/// `mu_i = log(c_i / c_ref,i) + 1 + chi1 z_i phi`, in units of `kB T`.
pub fn chemical_potential(state: &FieldState, species: usize, disc: &Discretization) -> Result<Vec<f64>> {
    state.check_shape(disc.grid())?;
    let p = disc.params();
    let sp = p
        .species
        .get(species)
        .ok_or_else(|| Error::invalid("species", format!("no species with index {species}")))?;
    check_positive(state, species)?;
    Ok(state.c[species]
        .iter()
        .zip(&state.phi)
        .map(|(&c, &phi)| (c / sp.reference_concentration).ln() + 1.0 + p.chi1 * sp.valence * phi)
        .collect())
}

/// Right-hand side of the dissipation law, `-∫ sum_i D_i c_i (dmu_i/dx)² dx`,
/// evaluated on the half-point fluxes of the scheme: `D c dmu/dx = G`, so the
/// integrand is `G²/(D c)` with `c_{j+1/2}` the midpoint average. Vanishes
/// exactly at a discrete steady state and is never positive.
pub fn dissipation_rate_rhs(state: &FieldState, disc: &Discretization) -> Result<f64> {
    let grid = disc.grid();
    state.check_shape(grid)?;
    let dx = grid.dx();
    let mut total = 0.0;
    for (i, sp) in disc.params().species.iter().enumerate() {
        check_positive(state, i)?;
        let c = &state.c[i];
        let flux = half_point_fluxes(c, &state.phi, i, disc)?;
        for (j, g) in flux.iter().enumerate() {
            let mid = 0.5 * (c[j] + c[j + 1]);
            total += dx * g * g / (sp.diffusivity * mid);
        }
    }
    Ok(-total)
}

/// Time derivative of a sampled energy series by three-point Lagrange
/// differences: central in the interior, one-sided at the ends. On uniform
/// samples this is the standard second-order stencil.
pub fn energy_rate_lhs(series: &[(f64, f64)]) -> Result<Vec<(f64, f64)>> {
    let n = series.len();
    if n < 3 {
        return Err(Error::TooFewSamples { needed: 3, found: n });
    }
    if series.windows(2).any(|w| !(w[1].0 > w[0].0)) {
        return Err(Error::invalid("t", "sample times must be strictly increasing"));
    }
    // Derivative at t[at] of the parabola through samples k, k+1, k+2.
    let three_point = |k: usize, at: usize| {
        let (t0, e0) = series[k];
        let (t1, e1) = series[k + 1];
        let (t2, e2) = series[k + 2];
        let t = series[at].0;
        e0 * (2.0 * t - t1 - t2) / ((t0 - t1) * (t0 - t2))
            + e1 * (2.0 * t - t0 - t2) / ((t1 - t0) * (t1 - t2))
            + e2 * (2.0 * t - t0 - t1) / ((t2 - t0) * (t2 - t1))
    };
    let mut out = Vec::with_capacity(n);
    out.push((series[0].0, three_point(0, 0)));
    for k in 1..n - 1 {
        out.push((series[k].0, three_point(k - 1, k)));
    }
    out.push((series[n - 1].0, three_point(n - 3, n - 1)));
    Ok(out)
}

/// `max_{i,j} |dc_i/dt|` from the Nernst–Planck right-hand side, using the
/// conservative half-cell rows at the two ends.
pub fn max_rate_of_change(state: &FieldState, disc: &Discretization) -> Result<f64> {
    state.check_shape(disc.grid())?;
    let mut max = 0.0f64;
    for (i, c) in state.c.iter().enumerate() {
        let rate = np_rate(c, &state.phi, i, BoundaryScheme::Conservative, disc)?;
        max = rate.iter().fold(max, |m, v| m.max(v.abs()));
    }
    Ok(max)
}

/// One row of the diagnostics time series.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DiagnosticsSample {
    pub t: f64,
    pub total: Vec<f64>,
    /// `None` when a concentration is non-positive and the log is undefined.
    pub energy: Option<f64>,
    pub dissipation_rhs: Option<f64>,
    pub max_rate: f64,
    pub min_concentration: f64,
}

impl DiagnosticsSample {
    pub fn measure(state: &FieldState, disc: &Discretization) -> Result<Self> {
        let grid = disc.grid();
        let total = (0..state.n_species())
            .map(|i| total_concentration(state, i, grid))
            .collect::<Result<Vec<_>>>()?;
        let undefined_on_nonpositive = |r: Result<f64>| match r {
            Ok(v) => Ok(Some(v)),
            Err(Error::NonPositiveConcentration { .. }) => Ok(None),
            Err(e) => Err(e),
        };
        Ok(DiagnosticsSample {
            t: state.t,
            total,
            energy: undefined_on_nonpositive(total_energy(state, disc))?,
            dissipation_rhs: undefined_on_nonpositive(dissipation_rate_rhs(state, disc))?,
            max_rate: max_rate_of_change(state, disc)?,
            min_concentration: state.min_concentration(),
        })
    }
}

/// Time series of [`DiagnosticsSample`]s with a configuration echo.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct DiagnosticsRecord {
    pub samples: Vec<DiagnosticsSample>,
    pub meta: Vec<(String, String)>,
}

impl DiagnosticsRecord {
    pub fn push(&mut self, sample: DiagnosticsSample) {
        debug_assert!(self.samples.last().is_none_or(|s| s.t < sample.t));
        self.samples.push(sample);
    }

    pub fn times(&self) -> Vec<f64> {
        self.samples.iter().map(|s| s.t).collect()
    }

    pub fn totals(&self, species: usize) -> Vec<f64> {
        self.samples.iter().map(|s| s.total[species]).collect()
    }

    /// `(t, E)` pairs for the samples where the energy is defined.
    pub fn energy_series(&self) -> Vec<(f64, f64)> {
        self.samples
            .iter()
            .filter_map(|s| s.energy.map(|e| (s.t, e)))
            .collect()
    }

    /// Largest `|total(t) / total(0) - 1|` over samples and species.
    pub fn max_relative_drift(&self) -> f64 {
        let Some(first) = self.samples.first() else {
            return 0.0;
        };
        self.samples
            .iter()
            .flat_map(|s| s.total.iter().zip(&first.total).map(|(a, b)| (a / b - 1.0).abs()))
            .fold(0.0, f64::max)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::params::{DimensionlessParameters, SpeciesParameters};
    use crate::stepper::solve_poisson;

    fn disc(j: usize, p: DimensionlessParameters) -> Discretization {
        Discretization::new(p, Grid::new(j).unwrap()).unwrap()
    }

    fn zero_potential_channel(j: usize) -> Discretization {
        let mut p = DimensionlessParameters::channel();
        p.phi_minus = 0.0;
        p.phi_plus = 0.0;
        disc(j, p)
    }

    #[test]
    fn gradient_exact_for_quadratics() {
        let g = Grid::new(10).unwrap();
        let v: Vec<f64> = g.nodes().iter().map(|x| 3.0 * x * x - x + 2.0).collect();
        for (d, x) in gradient(&v, &g).unwrap().iter().zip(g.nodes()) {
            assert!((d - (6.0 * x - 1.0)).abs() < 1e-12);
        }
    }

    #[test]
    fn reference_state_has_zero_energy() {
        let d = zero_potential_channel(20);
        let s = FieldState {
            t: 0.0,
            c: vec![vec![1.0; 21]; 2],
            phi: vec![0.0; 21],
        };
        assert_eq!(total_energy(&s, &d).unwrap(), 0.0);
        assert_eq!(total_concentration(&s, 1, d.grid()).unwrap(), 2.0);
        for i in 0..2 {
            assert!(chemical_potential(&s, i, &d).unwrap().iter().all(|&m| m == 1.0));
        }
        assert_eq!(dissipation_rate_rhs(&s, &d).unwrap(), 0.0);
        assert_eq!(max_rate_of_change(&s, &d).unwrap(), 0.0);
    }

    #[test]
    fn electric_part_scales_with_inverse_chi2() {
        let g = Grid::new(16).unwrap();
        let phi: Vec<f64> = g.nodes().iter().map(|x| 0.3 * x + x * x).collect();
        let s = FieldState {
            t: 0.0,
            c: vec![vec![1.0; 17]; 2],
            phi,
        };
        let p = DimensionlessParameters::channel();
        let mut p2 = p.clone();
        p2.chi2 *= 2.0;
        let e1 = total_energy(&s, &disc(16, p)).unwrap();
        let e2 = total_energy(&s, &disc(16, p2)).unwrap();
        assert!((e2 - 0.5 * e1).abs() < 1e-12 * e1.abs());
    }

    fn boltzmann_state(d: &Discretization) -> FieldState {
        // Affine potential satisfying the Robin conditions exactly.
        let p = d.params();
        let a = 0.5 * (p.phi_minus + p.phi_plus);
        let b = (p.phi_plus - p.phi_minus) / (2.0 * (1.0 + p.robin_length));
        let phi: Vec<f64> = d.grid().nodes().iter().map(|x| a + b * x).collect();
        let chi1 = d.params().chi1;
        let c = d
            .params()
            .species
            .iter()
            .map(|s| phi.iter().map(|p| (-chi1 * s.valence * p).exp()).collect())
            .collect();
        FieldState { t: 0.0, c, phi }
    }

    #[test]
    fn boltzmann_profile_has_constant_potential() {
        let d = disc(32, DimensionlessParameters::channel());
        let s = boltzmann_state(&d);
        for i in 0..2 {
            for m in chemical_potential(&s, i, &d).unwrap() {
                assert!((m - 1.0).abs() < 1e-13);
            }
        }
    }

    #[test]
    fn boltzmann_dissipation_vanishes_under_refinement() {
        // Fluxes are O(dx²) on a Boltzmann profile, so the rate is O(dx⁴).
        let rate = |j| {
            let d = disc(j, DimensionlessParameters::channel());
            dissipation_rate_rhs(&boltzmann_state(&d), &d).unwrap()
        };
        let (coarse, fine) = (rate(64), rate(128));
        assert!(coarse <= 0.0 && fine <= 0.0);
        let order = (coarse / fine).log2();
        assert!((order - 4.0).abs() < 0.3, "order {order}");
    }

    #[test]
    fn neutral_species_ignores_potential() {
        let mut p = DimensionlessParameters::channel();
        p.species = vec![SpeciesParameters::unit(0.0)];
        let d = disc(8, p);
        let mk = |phi: f64| FieldState {
            t: 0.0,
            c: vec![vec![1.3; 9]],
            phi: vec![phi; 9],
        };
        assert_eq!(
            chemical_potential(&mk(0.0), 0, &d).unwrap(),
            chemical_potential(&mk(5.0), 0, &d).unwrap()
        );
    }

    #[test]
    fn nonpositive_concentration_is_flagged() {
        let d = zero_potential_channel(8);
        let mut s = FieldState {
            t: 0.0,
            c: vec![vec![1.0; 9]; 2],
            phi: vec![0.0; 9],
        };
        s.c[1][4] = -0.1;
        assert!(matches!(
            total_energy(&s, &d),
            Err(Error::NonPositiveConcentration {
                species: 1,
                node: 4,
                ..
            })
        ));
        let sample = DiagnosticsSample::measure(&s, &d).unwrap();
        assert_eq!(sample.energy, None);
        assert_eq!(sample.dissipation_rhs, None);
        assert_eq!(sample.min_concentration, -0.1);
    }

    #[test]
    fn energy_rate_of_quadratic() {
        let series: Vec<(f64, f64)> = (0..11).map(|k| {
            let t = 0.1 * k as f64;
            (t, t * t)
        }).collect();
        let rate = energy_rate_lhs(&series).unwrap();
        for (t, r) in rate {
            assert!((r - 2.0 * t).abs() < 1e-12, "{t} {r}");
        }
        let linear: Vec<(f64, f64)> = (0..5).map(|k| (k as f64, 3.0 - 0.5 * k as f64)).collect();
        assert!(energy_rate_lhs(&linear).unwrap().iter().all(|(_, r)| (r + 0.5).abs() < 1e-14));
        let flat = vec![(0.0, 4.0), (1.0, 4.0), (2.0, 4.0)];
        assert!(energy_rate_lhs(&flat).unwrap().iter().all(|(_, r)| *r == 0.0));
    }

    #[test]
    fn energy_rate_rejects_short_series() {
        assert!(matches!(
            energy_rate_lhs(&[(0.0, 1.0), (1.0, 2.0)]),
            Err(Error::TooFewSamples { needed: 3, found: 2 })
        ));
    }

    #[test]
    fn energy_forms_agree_after_poisson_solve() {
        // Smooth, positive, non-neutral data; the two forms differ only by
        // discretization error.
        let mut errs = Vec::new();
        for j in [200, 400] {
            let d = disc(j, DimensionlessParameters::symmetric_pair(1.0, 2.0, 0.25, 0.25));
            let g = d.grid();
            let c: Vec<Vec<f64>> = vec![
                g.nodes().iter().map(|x| 1.0 + 0.3 * (2.0 * x).sin()).collect(),
                g.nodes().iter().map(|x| 1.0 + 0.2 * x * x).collect(),
            ];
            let phi = solve_poisson(&c, &d).unwrap();
            let s = FieldState { t: 0.0, c, phi };
            let a = total_energy(&s, &d).unwrap();
            let b = total_energy_charge_form(&s, &d).unwrap();
            errs.push((a - b).abs());
        }
        assert!(errs[0] < 1e-3, "{errs:?}");
        let ratio = errs[0] / errs[1];
        assert!(ratio > 3.0, "expected ~O(dx²) agreement: {errs:?}");
    }
}
