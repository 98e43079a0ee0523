//! Tridiagonal matrices with optional corner extras at `(0, 2)` and
//! `(n-1, n-3)`, and an O(n) direct solver for them.
//!
//! The corner entries come from boundary rows that reach two nodes into the
//! domain. Plain tridiagonal systems use a Thomas sweep; systems with corner
//! extras use a band LU with partial pivoting.

use crate::error::{check_len, Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct BandedMatrix {
    /// `sub[i]` is entry `(i, i-1)`; `sub[0]` is unused and kept at zero.
    pub sub: Vec<f64>,
    pub main: Vec<f64>,
    /// `sup[i]` is entry `(i, i+1)`; `sup[n-1]` is unused and kept at zero.
    pub sup: Vec<f64>,
    /// Entry `(0, 2)`.
    pub corner_first: Option<f64>,
    /// Entry `(n-1, n-3)`.
    pub corner_last: Option<f64>,
}

impl BandedMatrix {
    pub fn zeros(n: usize) -> Self {
        BandedMatrix {
            sub: vec![0.0; n],
            main: vec![0.0; n],
            sup: vec![0.0; n],
            corner_first: None,
            corner_last: None,
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n);
        m.main.fill(1.0);
        m
    }

    pub fn dim(&self) -> usize {
        self.main.len()
    }

    pub fn has_corner_extras(&self) -> bool {
        self.corner_first.is_some() || self.corner_last.is_some()
    }

    /// `self * x`
    pub fn apply(&self, x: &[f64]) -> Result<Vec<f64>> {
        let n = self.dim();
        check_len(n, x.len())?;
        let mut y: Vec<f64> = (0..n)
            .map(|i| {
                let mut v = self.main[i] * x[i];
                if i > 0 {
                    v += self.sub[i] * x[i - 1];
                }
                if i + 1 < n {
                    v += self.sup[i] * x[i + 1];
                }
                v
            })
            .collect();
        if let Some(e) = self.corner_first {
            y[0] += e * x[2];
        }
        if let Some(e) = self.corner_last {
            y[n - 1] += e * x[n - 3];
        }
        Ok(y)
    }

    /// `I - alpha * self`
    pub fn identity_minus(&self, alpha: f64) -> BandedMatrix {
        BandedMatrix {
            sub: self.sub.iter().map(|v| -alpha * v).collect(),
            main: self.main.iter().map(|v| 1.0 - alpha * v).collect(),
            sup: self.sup.iter().map(|v| -alpha * v).collect(),
            corner_first: self.corner_first.map(|v| -alpha * v),
            corner_last: self.corner_last.map(|v| -alpha * v),
        }
    }

    /// Dense row-major copy, for inspection and testing.
    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let n = self.dim();
        let mut a = vec![vec![0.0; n]; n];
        for i in 0..n {
            a[i][i] = self.main[i];
            if i > 0 {
                a[i][i - 1] = self.sub[i];
            }
            if i + 1 < n {
                a[i][i + 1] = self.sup[i];
            }
        }
        if let Some(e) = self.corner_first {
            a[0][2] += e;
        }
        if let Some(e) = self.corner_last {
            a[n - 1][n - 3] += e;
        }
        a
    }
}

/// Matrix plus right-hand side.
#[derive(Debug, Clone, PartialEq)]
pub struct BandedSystem {
    pub matrix: BandedMatrix,
    pub rhs: Vec<f64>,
}

impl BandedSystem {
    pub fn dim(&self) -> usize {
        self.rhs.len()
    }

    /// Solves the system; see [`solve_banded`].
    pub fn solve(&self) -> Result<Vec<f64>> {
        solve_banded(self)
    }
}

fn pivot_ok(p: f64) -> bool {
    p != 0.0 && p.is_finite()
}

/// Direct O(n) solve. Without corner extras a Thomas sweep runs without
/// pivoting; with them, a band LU with partial pivoting. A zero or non-finite
/// pivot is reported with its row.
pub fn solve_banded(sys: &BandedSystem) -> Result<Vec<f64>> {
    let n = sys.dim();
    if n < 3 {
        return Err(Error::invalid("n", format!("banded system needs n >= 3, got {n}")));
    }
    let m = &sys.matrix;
    check_len(n, m.main.len())?;
    check_len(n, m.sub.len())?;
    check_len(n, m.sup.len())?;
    if m.has_corner_extras() {
        solve_pivoted(sys)
    } else {
        solve_thomas(sys)
    }
}

fn solve_thomas(sys: &BandedSystem) -> Result<Vec<f64>> {
    let n = sys.dim();
    let m = &sys.matrix;
    let mut sup = m.sup.clone();
    let mut rhs = sys.rhs.clone();
    if !pivot_ok(m.main[0]) {
        return Err(Error::SingularSystem { row: 0 });
    }
    sup[0] /= m.main[0];
    rhs[0] /= m.main[0];
    for i in 1..n {
        let pivot = m.main[i] - m.sub[i] * sup[i - 1];
        if !pivot_ok(pivot) {
            return Err(Error::SingularSystem { row: i });
        }
        if i + 1 < n {
            sup[i] /= pivot;
        }
        rhs[i] = (rhs[i] - m.sub[i] * rhs[i - 1]) / pivot;
    }
    for i in (0..n - 1).rev() {
        rhs[i] -= sup[i] * rhs[i + 1];
    }
    Ok(rhs)
}

/// Lower and upper bandwidth once the corners are included.
const KL: usize = 2;
const KU: usize = 2;

/// Band LU with row pivoting. Row `i` is stored over columns
/// `i - KL ..= i + KU + KL`, which holds the fill that pivoting introduces.
fn solve_pivoted(sys: &BandedSystem) -> Result<Vec<f64>> {
    const W: usize = 2 * KL + KU + 1;
    let n = sys.dim();
    let m = &sys.matrix;
    let mut band = vec![[0.0f64; W]; n];
    let slot = |i: usize, j: usize| j + KL - i;
    for i in 0..n {
        band[i][slot(i, i)] = m.main[i];
        if i > 0 {
            band[i][slot(i, i - 1)] = m.sub[i];
        }
        if i + 1 < n {
            band[i][slot(i, i + 1)] = m.sup[i];
        }
    }
    if let Some(e) = m.corner_first {
        band[0][slot(0, 2)] += e;
    }
    if let Some(e) = m.corner_last {
        band[n - 1][slot(n - 1, n - 3)] += e;
    }
    let mut rhs = sys.rhs.clone();

    for k in 0..n {
        let last_row = (k + KL).min(n - 1);
        let last_col = (k + KU + KL).min(n - 1);
        let p = (k..=last_row)
            .max_by(|&a, &b| band[a][slot(a, k)].abs().total_cmp(&band[b][slot(b, k)].abs()))
            .unwrap_or(k);
        if !pivot_ok(band[p][slot(p, k)]) {
            return Err(Error::SingularSystem { row: k });
        }
        if p != k {
            for j in k..=last_col {
                let (a, b) = (band[k][slot(k, j)], band[p][slot(p, j)]);
                band[k][slot(k, j)] = b;
                band[p][slot(p, j)] = a;
            }
            rhs.swap(k, p);
        }
        let pivot = band[k][slot(k, k)];
        for i in k + 1..=last_row {
            let f = band[i][slot(i, k)] / pivot;
            if f == 0.0 {
                continue;
            }
            band[i][slot(i, k)] = 0.0;
            for j in k + 1..=last_col {
                band[i][slot(i, j)] -= f * band[k][slot(k, j)];
            }
            rhs[i] -= f * rhs[k];
        }
    }
    for i in (0..n).rev() {
        let last_col = (i + KU + KL).min(n - 1);
        let s: f64 = (i + 1..=last_col).map(|j| band[i][slot(i, j)] * rhs[j]).sum();
        rhs[i] = (rhs[i] - s) / band[i][slot(i, i)];
    }
    Ok(rhs)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_returns_rhs() {
        let rhs = vec![1.0, -2.0, 3.5, 0.25, 9.0];
        let sys = BandedSystem {
            matrix: BandedMatrix::identity(5),
            rhs: rhs.clone(),
        };
        assert_eq!(solve_banded(&sys).unwrap(), rhs);
    }

    #[test]
    fn zero_pivot_reports_row() {
        let mut m = BandedMatrix::identity(5);
        m.main[3] = 0.0;
        let sys = BandedSystem {
            matrix: m,
            rhs: vec![1.0; 5],
        };
        assert!(matches!(
            solve_banded(&sys),
            Err(Error::SingularSystem { row: 3 })
        ));
    }

    #[test]
    fn too_small() {
        let sys = BandedSystem {
            matrix: BandedMatrix::identity(2),
            rhs: vec![1.0; 2],
        };
        assert!(solve_banded(&sys).is_err());
    }

    #[test]
    fn corner_extras_residual() {
        let n = 6;
        let mut m = BandedMatrix::zeros(n);
        for i in 0..n {
            m.main[i] = 4.0 + i as f64;
            if i > 0 {
                m.sub[i] = -1.0 - 0.1 * i as f64;
            }
            if i + 1 < n {
                m.sup[i] = -0.5 + 0.2 * i as f64;
            }
        }
        m.corner_first = Some(0.7);
        m.corner_last = Some(-0.3);
        let rhs: Vec<f64> = (0..n).map(|i| (i as f64).sin() + 1.0).collect();
        let sys = BandedSystem {
            matrix: m.clone(),
            rhs: rhs.clone(),
        };
        let x = solve_banded(&sys).unwrap();
        let r = m.apply(&x).unwrap();
        for (a, b) in r.iter().zip(&rhs) {
            assert!((a - b).abs() < 1e-13);
        }
    }

    #[test]
    fn corner_with_vanishing_neighbour_coupling() {
        let n = 5;
        let mut m = BandedMatrix::zeros(n);
        m.main = vec![4.0, 5.0, 4.5, 3.8, 4.2];
        m.sub = vec![0.0, 0.9, -0.4, 0.6, 0.2];
        m.sup = vec![0.3, 1e-17, -0.7, 0.5, 0.0];
        m.corner_first = Some(0.8);
        m.corner_last = Some(-0.6);
        let rhs = vec![1.0, -1.0, 2.0, 0.5, -3.0];
        let sys = BandedSystem {
            matrix: m.clone(),
            rhs: rhs.clone(),
        };
        let x = solve_banded(&sys).unwrap();
        let r = m.apply(&x).unwrap();
        for (a, b) in r.iter().zip(&rhs) {
            assert!((a - b).abs() < 1e-14);
        }
    }

    #[test]
    fn identity_minus_and_dense() {
        let mut m = BandedMatrix::zeros(4);
        m.main = vec![1.0, 2.0, 3.0, 4.0];
        m.sup[0] = 5.0;
        m.corner_first = Some(6.0);
        let a = m.identity_minus(0.5);
        let d = a.to_dense();
        assert_eq!(d[0], vec![0.5, -2.5, -3.0, 0.0]);
        assert_eq!(d[3][3], -1.0);
    }
}
