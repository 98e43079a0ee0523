//! Uniform mesh on `[-1, 1]`, nodal field storage and trapezoid quadrature.

use crate::error::{check_len, Error, Result};

/// Smallest supported number of subintervals.
pub const MIN_INTERVALS: usize = 4;

/// Uniform grid `x_j = -1 + j dx`, `j = 0..=J`, `dx = 2/J`.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    intervals: usize,
    dx: f64,
    nodes: Vec<f64>,
}

impl Grid {
    pub fn new(intervals: usize) -> Result<Self> {
        if intervals < MIN_INTERVALS {
            return Err(Error::invalid(
                "J",
                format!("need at least {MIN_INTERVALS} subintervals, got {intervals}"),
            ));
        }
        let n = intervals as f64;
        // (2j - J)/J is exactly antisymmetric about the centre and hits ±1 exactly.
        let nodes = (0..=intervals)
            .map(|j| (2.0 * j as f64 - n) / n)
            .collect();
        Ok(Grid {
            intervals,
            dx: 2.0 / n,
            nodes,
        })
    }

    /// Number of subintervals `J`.
    pub fn intervals(&self) -> usize {
        self.intervals
    }

    /// Number of nodes, `J + 1`.
    pub fn len(&self) -> usize {
        self.intervals + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn dx(&self) -> f64 {
        self.dx
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn x(&self, j: usize) -> f64 {
        self.nodes[j]
    }

    /// Index of the node at `x`, if `x` lies on the grid (to 1e-9 dx).
    pub fn node_index(&self, x: f64) -> Option<usize> {
        let k = ((x + 1.0) / self.dx).round();
        if k < 0.0 || k > self.intervals as f64 {
            return None;
        }
        let j = k as usize;
        ((self.nodes[j] - x).abs() <= 1e-9 * self.dx).then_some(j)
    }

    /// Composite trapezoid rule over the nodes.
    pub fn trapezoid(&self, values: &[f64]) -> Result<f64> {
        check_len(self.len(), values.len())?;
        let n = self.intervals;
        let interior: f64 = values[1..n].iter().sum();
        Ok(interior * self.dx + 0.5 * self.dx * (values[0] + values[n]))
    }
}

/// Concentrations and potential at the grid nodes at time `t`.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldState {
    pub t: f64,
    /// One array of `J + 1` values per species.
    pub c: Vec<Vec<f64>>,
    pub phi: Vec<f64>,
}

/// Count and most negative value of negative concentrations in a state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NegativeConcentrations {
    pub count: usize,
    pub most_negative: f64,
}

impl FieldState {
    /// Uniform concentrations from the parameters' initial data, with the
    /// potential produced by `poisson` for those concentrations.
    pub fn uniform<F>(grid: &Grid, initial: &[f64], poisson: F) -> Result<Self>
    where
        F: FnOnce(&[Vec<f64>]) -> Result<Vec<f64>>,
    {
        let c: Vec<Vec<f64>> = initial.iter().map(|&c0| vec![c0; grid.len()]).collect();
        let phi = poisson(&c)?;
        check_len(grid.len(), phi.len())?;
        Ok(FieldState { t: 0.0, c, phi })
    }

    pub fn n_species(&self) -> usize {
        self.c.len()
    }

    pub fn check_shape(&self, grid: &Grid) -> Result<()> {
        check_len(grid.len(), self.phi.len())?;
        for c in &self.c {
            check_len(grid.len(), c.len())?;
        }
        Ok(())
    }

    pub fn is_finite(&self) -> bool {
        self.t.is_finite()
            && self.phi.iter().all(|v| v.is_finite())
            && self.c.iter().flatten().all(|v| v.is_finite())
    }

    pub fn min_concentration(&self) -> f64 {
        self.c.iter().flatten().copied().fold(f64::INFINITY, f64::min)
    }

    /// `None` when every concentration is non-negative.
    pub fn negative_concentrations(&self) -> Option<NegativeConcentrations> {
        let mut count = 0;
        let mut most_negative = 0.0f64;
        for &v in self.c.iter().flatten() {
            if v < 0.0 {
                count += 1;
                most_negative = most_negative.min(v);
            }
        }
        (count > 0).then_some(NegativeConcentrations {
            count,
            most_negative,
        })
    }
}
