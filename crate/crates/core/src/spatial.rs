//! Spatial discretization: central stencils for the Nernst–Planck and Poisson
//! operators, the ghost-point Robin closure for the potential, and assembly
//! of the implicit TR and BDF2 systems.
//!
//! For a frozen potential the Nernst–Planck right-hand side is linear in the
//! concentration, so it is built once as a [`BandedMatrix`] `F(phi)` and the
//! stage systems are `I - w F(phi)`. Interior rows are
//!
//! ```text
//! F c_j = D (c_{j+1} - 2 c_j + c_{j-1}) / dx²
//!       + chi1 z D [c_{j+1}(phi_{j+2} - phi_j) - c_{j-1}(phi_j - phi_{j-2})] / (4 dx²)
//! ```
//!
//! with `phi_{-1}` and `phi_{J+1}` taken from the Robin ghost closure. The
//! boundary rows depend on [`BoundaryScheme`].

use std::fmt;
use std::str::FromStr;

use crate::banded::{BandedMatrix, BandedSystem};
use crate::error::{check_len, Error, Result};
use crate::grid::Grid;
use crate::params::DimensionlessParameters;

/// Discretization of the Nernst–Planck equation at `x = ±1`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BoundaryScheme {
    /// Forward difference of the flux at the boundary with the no-flux
    /// condition substituted. Couples `c_0, c_1, c_2`.
    Standard,
    /// Half-cell flux balance: `(flux_{1/2} - 0) / (dx/2)`. Couples only
    /// `c_0, c_1`, and makes the trapezoid sum of the operator vanish.
    Conservative,
}

impl BoundaryScheme {
    pub fn as_str(self) -> &'static str {
        match self {
            BoundaryScheme::Standard => "standard",
            BoundaryScheme::Conservative => "conservative",
        }
    }
}

impl fmt::Display for BoundaryScheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for BoundaryScheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "standard" => Ok(BoundaryScheme::Standard),
            "conservative" => Ok(BoundaryScheme::Conservative),
            other => Err(Error::key(
                "scheme",
                format!("expected `conservative` or `standard`, got `{other}`"),
            )),
        }
    }
}

/// Parameters on a grid, with coefficient profiles sampled once.
#[derive(Debug, Clone)]
pub struct Discretization {
    grid: Grid,
    params: DimensionlessParameters,
    /// `eps_{k-1/2}` for `k = 0..=J+1`.
    eps_half: Vec<f64>,
    fixed_charge: Vec<f64>,
}

impl Discretization {
    pub fn new(params: DimensionlessParameters, grid: Grid) -> Result<Self> {
        params.validate(&grid)?;
        let eps_half = params.permittivity.half_points(&grid)?;
        let fixed_charge = params.fixed_charge.nodes(&grid)?;
        Ok(Discretization {
            grid,
            params,
            eps_half,
            fixed_charge,
        })
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn params(&self) -> &DimensionlessParameters {
        &self.params
    }

    pub fn n_species(&self) -> usize {
        self.params.species.len()
    }

    /// Permittivity at the half points; entry `k` is `eps_{k-1/2}`.
    pub fn permittivity_half(&self) -> &[f64] {
        &self.eps_half
    }

    pub fn fixed_charge(&self) -> &[f64] {
        &self.fixed_charge
    }

    /// Debye length from the mean permittivity and the initial ionic
    /// strength, `sqrt(eps / (chi1 chi2 sum z² c))`.
    pub fn debye_length(&self) -> f64 {
        let eps = self.eps_half.iter().sum::<f64>() / self.eps_half.len() as f64;
        let strength: f64 = self
            .params
            .species
            .iter()
            .map(|s| s.valence * s.valence * s.initial_concentration)
            .sum();
        (eps / (self.params.chi1 * self.params.chi2 * strength)).sqrt()
    }
}

/// Potential at the ghost nodes `x_{-1}` and `x_{J+1}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GhostPotentials {
    pub left: f64,
    pub right: f64,
}

/// Robin closure `(phi - phi_±) ± eta dphi/dx = 0` with central differences:
/// `phi_{-1} = phi_1 - (2 dx / eta)(phi_0 - phi_-)` and the mirror image on
/// the right.
pub fn ghost_potentials(phi: &[f64], disc: &Discretization) -> Result<GhostPotentials> {
    let grid = disc.grid();
    check_len(grid.len(), phi.len())?;
    let p = disc.params();
    let eta = p.robin_length;
    if !(eta > 0.0) {
        return Err(Error::invalid("etaPrime", "Robin length must be positive"));
    }
    let n = grid.intervals();
    let k = 2.0 * grid.dx() / eta;
    Ok(GhostPotentials {
        left: phi[1] - k * (phi[0] - p.phi_minus),
        right: phi[n - 1] - k * (phi[n] - p.phi_plus),
    })
}

/// Potential on `x_{-1}..=x_{J+1}`; index `j + 1` holds `phi_j`.
fn extended_potential(phi: &[f64], disc: &Discretization) -> Result<Vec<f64>> {
    let ghosts = ghost_potentials(phi, disc)?;
    let mut ext = Vec::with_capacity(phi.len() + 2);
    ext.push(ghosts.left);
    ext.extend_from_slice(phi);
    ext.push(ghosts.right);
    Ok(ext)
}

/// The Nernst–Planck right-hand side of `species` as a matrix acting on the
/// concentration, for a frozen potential `phi`.
pub fn nernst_planck_operator(
    species: usize,
    phi: &[f64],
    scheme: BoundaryScheme,
    disc: &Discretization,
) -> Result<BandedMatrix> {
    let grid = disc.grid();
    let sp = disc
        .params()
        .species
        .get(species)
        .ok_or_else(|| Error::invalid("species", format!("no species with index {species}")))?;
    let ext = extended_potential(phi, disc)?;
    let p = |j: isize| ext[(j + 1) as usize];

    let n = grid.intervals();
    let dx2 = grid.dx() * grid.dx();
    let d = sp.diffusivity;
    let diff = d / dx2;
    let drift = disc.params().chi1 * sp.valence * d / dx2;

    let mut m = BandedMatrix::zeros(n + 1);
    for j in 1..n {
        let ji = j as isize;
        m.sub[j] = diff - 0.25 * drift * (p(ji) - p(ji - 2));
        m.main[j] = -2.0 * diff;
        m.sup[j] = diff + 0.25 * drift * (p(ji + 2) - p(ji));
    }

    let ni = n as isize;
    match scheme {
        BoundaryScheme::Conservative => {
            m.main[0] = -2.0 * diff + 0.5 * drift * (p(1) - p(-1));
            m.sup[0] = 2.0 * diff + 0.5 * drift * (p(2) - p(0));
            m.sub[n] = 2.0 * diff - 0.5 * drift * (p(ni) - p(ni - 2));
            m.main[n] = -2.0 * diff - 0.5 * drift * (p(ni + 1) - p(ni - 1));
        }
        BoundaryScheme::Standard => {
            // D [c_2 - c_0 + chi1 z c_1 (phi_2 - phi_0)] / (2 dx²) and its mirror.
            m.main[0] = -0.5 * diff;
            m.sup[0] = 0.5 * drift * (p(2) - p(0));
            m.corner_first = Some(0.5 * diff);
            m.main[n] = -0.5 * diff;
            m.sub[n] = -0.5 * drift * (p(ni) - p(ni - 2));
            m.corner_last = Some(0.5 * diff);
        }
    }
    Ok(m)
}

/// Interior values `j = 1..J-1` of the Nernst–Planck right-hand side.
pub fn np_rhs(c: &[f64], phi: &[f64], species: usize, disc: &Discretization) -> Result<Vec<f64>> {
    check_len(disc.grid().len(), c.len())?;
    // Boundary rows do not affect the interior.
    let op = nernst_planck_operator(species, phi, BoundaryScheme::Conservative, disc)?;
    let mut f = op.apply(c)?;
    f.pop();
    f.remove(0);
    Ok(f)
}

/// Nernst–Planck right-hand side at every node, boundary rows per `scheme`.
pub fn np_rate(
    c: &[f64],
    phi: &[f64],
    species: usize,
    scheme: BoundaryScheme,
    disc: &Discretization,
) -> Result<Vec<f64>> {
    nernst_planck_operator(species, phi, scheme, disc)?.apply(c)
}

/// Half-point fluxes `G_{j+1/2}`, `j = 0..J-1`, of the conservative scheme:
/// `D (c_{j+1} - c_j)/dx + chi1 z D [c_{j+1}(phi_{j+2} - phi_j) + c_j(phi_{j+1} - phi_{j-1})] / (4 dx)`.
/// Interior rows of the operator are `(G_{j+1/2} - G_{j-1/2}) / dx`.
pub fn half_point_fluxes(
    c: &[f64],
    phi: &[f64],
    species: usize,
    disc: &Discretization,
) -> Result<Vec<f64>> {
    let grid = disc.grid();
    check_len(grid.len(), c.len())?;
    let sp = disc
        .params()
        .species
        .get(species)
        .ok_or_else(|| Error::invalid("species", format!("no species with index {species}")))?;
    let ext = extended_potential(phi, disc)?;
    let dx = grid.dx();
    let d = sp.diffusivity;
    let drift = disc.params().chi1 * sp.valence * d / (4.0 * dx);
    Ok((0..grid.intervals())
        .map(|j| {
            d * (c[j + 1] - c[j]) / dx
                + drift * (c[j + 1] * (ext[j + 3] - ext[j + 1]) + c[j] * (ext[j + 2] - ext[j]))
        })
        .collect())
}

/// Right-hand side of the Poisson rows: `-(rho0 + chi2 sum z_i c_i)`.
fn charge_source(c: &[Vec<f64>], disc: &Discretization) -> Result<Vec<f64>> {
    let grid = disc.grid();
    let p = disc.params();
    check_len(p.species.len(), c.len())?;
    for ci in c {
        check_len(grid.len(), ci.len())?;
    }
    Ok((0..grid.len())
        .map(|j| {
            let net: f64 = p
                .species
                .iter()
                .zip(c)
                .map(|(s, ci)| s.valence * ci[j])
                .sum();
            -(disc.fixed_charge()[j] + p.chi2 * net)
        })
        .collect())
}

/// Matrix of the discrete operator `d/dx(eps dphi/dx)` with the ghost values
/// eliminated; the `phi_±` data it moves out go to [`poisson_boundary_data`].
pub fn poisson_matrix(disc: &Discretization) -> BandedMatrix {
    let grid = disc.grid();
    let n = grid.intervals();
    let dx = grid.dx();
    let dx2 = dx * dx;
    let e = disc.permittivity_half();
    let k = 2.0 * dx / disc.params().robin_length;

    let mut m = BandedMatrix::zeros(n + 1);
    for j in 1..n {
        m.sub[j] = e[j] / dx2;
        m.main[j] = -(e[j] + e[j + 1]) / dx2;
        m.sup[j] = e[j + 1] / dx2;
    }
    m.main[0] = -(e[0] + e[1] + k * e[0]) / dx2;
    m.sup[0] = (e[0] + e[1]) / dx2;
    m.sub[n] = (e[n] + e[n + 1]) / dx2;
    m.main[n] = -(e[n] + e[n + 1] + k * e[n + 1]) / dx2;
    m
}

/// Terms moved to the right-hand side of rows `0` and `J` by the ghost
/// elimination.
pub fn poisson_boundary_data(disc: &Discretization) -> (f64, f64) {
    let grid = disc.grid();
    let n = grid.intervals();
    let dx = grid.dx();
    let e = disc.permittivity_half();
    let p = disc.params();
    let k = 2.0 * dx / p.robin_length;
    (
        -k * e[0] * p.phi_minus / (dx * dx),
        -k * e[n + 1] * p.phi_plus / (dx * dx),
    )
}

/// Tridiagonal Poisson system for the potential generated by `c`.
pub fn assemble_poisson_system(c: &[Vec<f64>], disc: &Discretization) -> Result<BandedSystem> {
    let mut rhs = charge_source(c, disc)?;
    let (left, right) = poisson_boundary_data(disc);
    rhs[0] += left;
    let n = rhs.len() - 1;
    rhs[n] += right;
    Ok(BandedSystem {
        matrix: poisson_matrix(disc),
        rhs,
    })
}

/// TR stage system for `species`:
/// `c - (gamma dt / 2) F(phi_iter) c = c_n + (gamma dt / 2) F(phi_n) c_n`.
///
/// The implicit operator uses the current inner iterate of the potential in
/// every row; the explicit half uses the potential at the start of the step.
#[allow(clippy::too_many_arguments)]
pub fn assemble_tr_system(
    species: usize,
    c_n: &[f64],
    phi_n: &[f64],
    phi_iter: &[f64],
    scheme: BoundaryScheme,
    gamma_dt: f64,
    disc: &Discretization,
) -> Result<BandedSystem> {
    check_len(disc.grid().len(), c_n.len())?;
    let half = 0.5 * gamma_dt;
    let explicit = nernst_planck_operator(species, phi_n, scheme, disc)?.apply(c_n)?;
    let rhs = c_n
        .iter()
        .zip(&explicit)
        .map(|(c, f)| c + half * f)
        .collect();
    let matrix = nernst_planck_operator(species, phi_iter, scheme, disc)?.identity_minus(half);
    Ok(BandedSystem { matrix, rhs })
}

/// Coefficients of the BDF2 stage written as
/// `c - implicit dt F(c) = current c_{n+gamma} - previous c_n`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bdf2Weights {
    /// `(1 - gamma) / (2 - gamma)`
    pub implicit: f64,
    /// `1 / (gamma (2 - gamma))`
    pub current: f64,
    /// `(1 - gamma)² / (gamma (2 - gamma))`
    pub previous: f64,
}

impl Bdf2Weights {
    pub fn new(gamma: f64) -> Self {
        let denom = gamma * (2.0 - gamma);
        Bdf2Weights {
            implicit: (1.0 - gamma) / (2.0 - gamma),
            current: 1.0 / denom,
            previous: (1.0 - gamma).powi(2) / denom,
        }
    }
}

/// BDF2 stage system for `species` with the potential iterate `phi_iter`.
#[allow(clippy::too_many_arguments)]
pub fn assemble_bdf2_system(
    species: usize,
    c_n: &[f64],
    c_gamma: &[f64],
    phi_iter: &[f64],
    scheme: BoundaryScheme,
    dt: f64,
    gamma: f64,
    disc: &Discretization,
) -> Result<BandedSystem> {
    let len = disc.grid().len();
    check_len(len, c_n.len())?;
    check_len(len, c_gamma.len())?;
    let w = Bdf2Weights::new(gamma);
    let rhs = c_gamma
        .iter()
        .zip(c_n)
        .map(|(cg, cn)| w.current * cg - w.previous * cn)
        .collect();
    let matrix =
        nernst_planck_operator(species, phi_iter, scheme, disc)?.identity_minus(w.implicit * dt);
    Ok(BandedSystem { matrix, rhs })
}
