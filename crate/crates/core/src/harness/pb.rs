//! Steady states from the Poisson–Boltzmann equation.
//!
//! At equilibrium every chemical potential is constant, so
//! `c_i = A_i exp(-chi1 z_i phi)` and the potential solves
//!
//! ```text
//! d/dx(eps dphi/dx) = -(rho0 + chi2 sum_i z_i A_i exp(-chi1 z_i phi))
//! ```
//!
//! with the same Robin closure as the dynamics. The amplitudes `A_i` are
//! fixed by the conserved species totals. Both are solved together by a
//! damped Newton iteration on `(phi, log A)`; the Jacobian is the
//! tridiagonal Poisson matrix bordered by one row and column per species,
//! eliminated with a small Schur complement.

use serde::Serialize;

use crate::banded::{solve_banded, BandedSystem};
use crate::error::{check_len, Error, Result};
use crate::spatial::{poisson_boundary_data, poisson_matrix, Discretization};
use crate::stepper::initial_state;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PbOptions {
    /// Converged when the largest scaled residual is below this.
    pub tolerance: f64,
    pub max_iterations: usize,
}

impl Default for PbOptions {
    fn default() -> Self {
        PbOptions {
            tolerance: 1e-12,
            max_iterations: 200,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PbSolution {
    pub phi: Vec<f64>,
    pub c: Vec<Vec<f64>>,
    /// `A_i` in `c_i = A_i exp(-chi1 z_i phi)`.
    pub amplitudes: Vec<f64>,
    pub iterations: usize,
    pub residual: f64,
}

struct Residual {
    /// Poisson rows multiplied by dx².
    poisson: Vec<f64>,
    /// `(trapezoid(c_i) - M_i) / M_i`
    mass: Vec<f64>,
    c: Vec<Vec<f64>>,
}

impl Residual {
    fn norm(&self) -> f64 {
        self.poisson
            .iter()
            .chain(&self.mass)
            .fold(0.0, |m, v| m.max(v.abs()))
    }
}

/// Gaussian elimination with partial pivoting for the species-sized block.
fn solve_small(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Result<Vec<f64>> {
    let n = b.len();
    for k in 0..n {
        let p = (k..n)
            .max_by(|&i, &j| a[i][k].abs().total_cmp(&a[j][k].abs()))
            .unwrap_or(k);
        if a[p][k] == 0.0 || !a[p][k].is_finite() {
            return Err(Error::SingularSystem { row: k });
        }
        a.swap(k, p);
        b.swap(k, p);
        for i in k + 1..n {
            let f = a[i][k] / a[k][k];
            for j in k..n {
                a[i][j] -= f * a[k][j];
            }
            b[i] -= f * b[k];
        }
    }
    for k in (0..n).rev() {
        let s: f64 = (k + 1..n).map(|j| a[k][j] * b[j]).sum();
        b[k] = (b[k] - s) / a[k][k];
    }
    Ok(b)
}

/// Solves for the equilibrium with species totals `masses`; when `None`,
/// the totals of the uniform initial state are used.
pub fn pb_steady_state(
    disc: &Discretization,
    masses: Option<&[f64]>,
    opts: &PbOptions,
) -> Result<PbSolution> {
    let grid = disc.grid();
    let p = disc.params();
    let n_sp = p.species.len();
    let n = grid.len();
    let dx2 = grid.dx() * grid.dx();
    let weights: Vec<f64> = (0..n)
        .map(|j| if j == 0 || j == n - 1 { 0.5 * grid.dx() } else { grid.dx() })
        .collect();

    let masses: Vec<f64> = match masses {
        Some(m) => {
            check_len(n_sp, m.len())?;
            m.to_vec()
        }
        None => p
            .species
            .iter()
            .map(|s| 2.0 * s.initial_concentration)
            .collect(),
    };
    if let Some(i) = masses.iter().position(|m| !(*m > 0.0)) {
        return Err(Error::invalid(&format!("mass.{}", i + 1), "species totals must be positive"));
    }

    let laplacian = poisson_matrix(disc);
    let (left, right) = poisson_boundary_data(disc);
    let chi1 = p.chi1;
    let chi2 = p.chi2;

    let residual = |phi: &[f64], log_amp: &[f64]| -> Result<Residual> {
        let c: Vec<Vec<f64>> = p
            .species
            .iter()
            .zip(log_amp)
            .map(|(s, u)| phi.iter().map(|v| (u - chi1 * s.valence * v).exp()).collect())
            .collect();
        let mut poisson = laplacian.apply(phi)?;
        poisson[0] -= left;
        poisson[n - 1] -= right;
        for (j, r) in poisson.iter_mut().enumerate() {
            let net: f64 = p.species.iter().zip(&c).map(|(s, ci)| s.valence * ci[j]).sum();
            *r = (*r + disc.fixed_charge()[j] + chi2 * net) * dx2;
        }
        let mass = c
            .iter()
            .zip(&masses)
            .map(|(ci, m)| Ok((grid.trapezoid(ci)? - m) / m))
            .collect::<Result<Vec<_>>>()?;
        Ok(Residual { poisson, mass, c })
    };

    let mut phi = initial_state(disc)?.phi;
    let mut log_amp: Vec<f64> = p
        .species
        .iter()
        .zip(&masses)
        .map(|(s, m)| {
            let shape: Vec<f64> = phi.iter().map(|v| (-chi1 * s.valence * v).exp()).collect();
            Ok((m / grid.trapezoid(&shape)?).ln())
        })
        .collect::<Result<_>>()?;

    let mut res = residual(&phi, &log_amp)?;
    let mut norm = res.norm();
    let mut iterations = 0;
    while norm >= opts.tolerance {
        if iterations == opts.max_iterations {
            return Err(Error::NotConverged {
                iterations,
                residual: norm,
            });
        }
        iterations += 1;

        // Jacobian of the dx²-scaled Poisson rows with respect to phi.
        let mut jac = laplacian.clone();
        for j in 0..n {
            jac.sub[j] *= dx2;
            jac.sup[j] *= dx2;
            let dsource: f64 = p
                .species
                .iter()
                .zip(&res.c)
                .map(|(s, ci)| s.valence * s.valence * ci[j])
                .sum();
            jac.main[j] = jac.main[j] * dx2 - chi1 * chi2 * dsource * dx2;
        }
        let solve = |rhs: Vec<f64>| {
            solve_banded(&BandedSystem {
                matrix: jac.clone(),
                rhs,
            })
        };
        // Columns for d(rows)/d(log A_i) = chi2 z_i c_i dx².
        let x_cols = p
            .species
            .iter()
            .zip(&res.c)
            .map(|(s, ci)| solve(ci.iter().map(|v| chi2 * s.valence * v * dx2).collect()))
            .collect::<Result<Vec<_>>>()?;

        // Mass rows: d/dphi_j = -chi1 z_i w_j c_ij / M_i, d/d(log A_i) = T(c_i) / M_i.
        let mass_rows: Vec<Vec<f64>> = (0..n_sp)
            .map(|i| {
                let z = p.species[i].valence;
                (0..n)
                    .map(|j| -chi1 * z * weights[j] * res.c[i][j] / masses[i])
                    .collect()
            })
            .collect();
        let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>();
        let mut schur = vec![vec![0.0; n_sp]; n_sp];
        for i in 0..n_sp {
            for (k, col) in x_cols.iter().enumerate() {
                schur[i][k] = -dot(&mass_rows[i], col);
            }
            schur[i][i] += grid.trapezoid(&res.c[i])? / masses[i];
        }

        // Newton correction for the current Jacobian and residual `r`.
        let correction = |r: &Residual| -> Result<(Vec<f64>, Vec<f64>)> {
            let y = solve(r.poisson.iter().map(|v| -v).collect())?;
            let rhs = (0..n_sp).map(|i| -r.mass[i] - dot(&mass_rows[i], &y)).collect();
            let du = solve_small(schur.clone(), rhs)?;
            let dphi = (0..n)
                .map(|j| y[j] - x_cols.iter().zip(&du).map(|(col, d)| col[j] * d).sum::<f64>())
                .collect();
            Ok((dphi, du))
        };
        let size = |(dphi, du): &(Vec<f64>, Vec<f64>)| {
            dphi.iter().chain(du).fold(0.0f64, |m, v| m.max(v.abs()))
        };

        // Damping by the natural monotonicity test: a trial point is accepted
        // when its simplified Newton correction is smaller than the full one.
        let (dphi, du) = correction(&res)?;
        let full = size(&(dphi.clone(), du.clone()));
        let mut lambda = 1.0f64;
        loop {
            let trial_phi: Vec<f64> = phi.iter().zip(&dphi).map(|(a, d)| a + lambda * d).collect();
            let trial_amp: Vec<f64> = log_amp.iter().zip(&du).map(|(a, d)| a + lambda * d).collect();
            let trial = residual(&trial_phi, &trial_amp)?;
            let accepted = trial.norm().is_finite()
                && correction(&trial).is_ok_and(|c| size(&c) <= (1.0 - 0.25 * lambda) * full);
            if accepted || lambda < 1e-4 {
                phi = trial_phi;
                log_amp = trial_amp;
                norm = trial.norm();
                res = trial;
                break;
            }
            lambda *= 0.5;
        }
        if !norm.is_finite() {
            return Err(Error::NotConverged {
                iterations,
                residual: norm,
            });
        }
    }

    Ok(PbSolution {
        phi,
        c: res.c,
        amplitudes: log_amp.iter().map(|u| u.exp()).collect(),
        iterations,
        residual: norm,
    })
}
