//! Oracles and random inputs shared by the integration tests.
#![allow(dead_code)]

use pnp::banded::BandedMatrix;
use pnp::{DimensionlessParameters, Discretization, FieldState, Grid, Profile, SpeciesParameters};
use rand::Rng;

/// Dense Gaussian elimination with partial pivoting.
pub fn dense_solve(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Vec<f64> {
    let n = b.len();
    for k in 0..n {
        let p = (k..n)
            .max_by(|&i, &j| a[i][k].abs().total_cmp(&a[j][k].abs()))
            .unwrap();
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
    b
}

pub fn dense_apply(a: &[Vec<f64>], x: &[f64]) -> Vec<f64> {
    a.iter()
        .map(|row| row.iter().zip(x).map(|(a, b)| a * b).sum())
        .collect()
}

/// Trapezoid weights on `[-1, 1]`, written out independently of `Grid`.
pub fn trapezoid_weights(n: usize) -> Vec<f64> {
    let dx = 2.0 / (n - 1) as f64;
    (0..n)
        .map(|j| if j == 0 || j == n - 1 { 0.5 * dx } else { dx })
        .collect()
}

/// Diagonally dominant banded matrix, with corner extras when `corners`.
pub fn random_banded<R: Rng>(rng: &mut R, n: usize, corners: bool) -> BandedMatrix {
    let mut m = BandedMatrix::zeros(n);
    for i in 0..n {
        if i > 0 {
            m.sub[i] = rng.gen_range(-1.0..1.0);
        }
        if i + 1 < n {
            m.sup[i] = rng.gen_range(-1.0..1.0);
        }
        m.main[i] = rng.gen_range(3.5..6.0) * if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
    }
    if corners {
        m.corner_first = Some(rng.gen_range(-1.0..1.0));
        m.corner_last = Some(rng.gen_range(-1.0..1.0));
    }
    m
}

/// Random physical parameter set with 1 to 3 species, variable
/// permittivity and fixed charge.
pub fn random_params<R: Rng>(rng: &mut R) -> DimensionlessParameters {
    let n_species = rng.gen_range(1..=3);
    let species = (0..n_species)
        .map(|_| SpeciesParameters {
            valence: [-2.0, -1.0, 1.0, 2.0][rng.gen_range(0..4)],
            diffusivity: rng.gen_range(0.2..3.0),
            initial_concentration: rng.gen_range(0.3..2.0),
            reference_concentration: rng.gen_range(0.5..2.0),
        })
        .collect();
    let a = rng.gen_range(0.5..2.0);
    let b = rng.gen_range(-0.4..0.4);
    let q = rng.gen_range(-3.0..3.0);
    DimensionlessParameters {
        chi1: rng.gen_range(0.5..4.0),
        chi2: rng.gen_range(0.0..50.0),
        robin_length: 10f64.powf(rng.gen_range(-4.0..0.0)),
        permittivity: Profile::function(move |x| a + b * x),
        fixed_charge: Profile::function(move |x| q * x * x),
        phi_minus: rng.gen_range(-2.0..2.0),
        phi_plus: rng.gen_range(-2.0..2.0),
        species,
    }
}

/// Positive random concentrations and an arbitrary potential.
pub fn random_state<R: Rng>(rng: &mut R, disc: &Discretization) -> FieldState {
    let n = disc.grid().len();
    FieldState {
        t: 0.0,
        c: (0..disc.n_species())
            .map(|_| (0..n).map(|_| rng.gen_range(0.1..3.0)).collect())
            .collect(),
        phi: (0..n).map(|_| rng.gen_range(-2.0..2.0)).collect(),
    }
}

pub fn disc(params: DimensionlessParameters, intervals: usize) -> Discretization {
    Discretization::new(params, Grid::new(intervals).unwrap()).unwrap()
}

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).fold(0.0f64, |m, (x, y)| m.max((x - y).abs()))
}

pub type Check = std::result::Result<(), String>;

fn ensure(ok: bool, msg: impl FnOnce() -> String) -> Check {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

/// The trapezoid-weighted column sums of the conservative operator vanish,
/// so every conservative TR and BDF2 update changes the trapezoid total only
/// by the weighted residual of its linear solve, for arbitrary potentials.
pub fn check_conservation_identity<R: Rng>(rng: &mut R) -> Check {
    use pnp::banded::BandedSystem;
    use pnp::spatial::{assemble_bdf2_system, assemble_tr_system, nernst_planck_operator};
    use pnp::BoundaryScheme::Conservative;
    let d = disc(random_params(rng), 8);
    let s = random_state(rng, &d);
    let phi_iter: Vec<f64> = (0..d.grid().len()).map(|_| rng.gen_range(-2.0..2.0)).collect();
    let w = trapezoid_weights(d.grid().len());
    let total = |v: &[f64]| v.iter().zip(&w).map(|(a, b)| a * b).sum::<f64>();
    let dt = 10f64.powf(rng.gen_range(-4.0..0.0));
    // total(x) - total(b) = w . (A x - b) when w^T A = w^T.
    let stage = |sys: &BandedSystem, label: &str| -> std::result::Result<Vec<f64>, String> {
        let x = sys.solve().map_err(|e| e.to_string())?;
        let dense = sys.matrix.to_dense();
        let ax = dense_apply(&dense, &x);
        let residual: Vec<f64> = ax.iter().zip(&sys.rhs).map(|(a, b)| a - b).collect();
        let terms: f64 = dense
            .iter()
            .zip(&w)
            .map(|(row, wj)| wj * row.iter().zip(&x).map(|(a, b)| (a * b).abs()).sum::<f64>())
            .sum::<f64>()
            + total(&sys.rhs.iter().map(|v| v.abs()).collect::<Vec<_>>());
        let defect = total(&x) - total(&sys.rhs) - total(&residual);
        ensure(defect.abs() <= 1e-13 * terms, || {
            format!("{label} total moved by {defect} beyond its residual (scale {terms})")
        })?;
        Ok(x)
    };
    for i in 0..d.n_species() {
        let f = nernst_planck_operator(i, &phi_iter, Conservative, &d)
            .unwrap()
            .apply(&s.c[i])
            .unwrap();
        let scale: f64 = f.iter().zip(&w).map(|(a, b)| (a * b).abs()).sum();
        ensure(total(&f).abs() <= 1e-13 * scale.max(1.0), || {
            format!("operator sum {} (scale {scale})", total(&f))
        })?;

        let tr = assemble_tr_system(i, &s.c[i], &s.phi, &phi_iter, Conservative, dt, &d).unwrap();
        let c_gamma = stage(&tr, "TR")?;
        let bdf = assemble_bdf2_system(i, &s.c[i], &c_gamma, &phi_iter, Conservative, dt, 0.6, &d)
            .unwrap();
        stage(&bdf, "BDF2")?;
    }
    Ok(())
}

/// Relative round-off bound for one implicit stage solve: a few ulps times
/// the condition estimate `1 + 4 dt max(D, chi1 |z| D |dphi|) / dx²`.
fn solve_tolerance(d: &Discretization, dt: f64) -> f64 {
    let dx = d.grid().dx();
    let p = d.params();
    let stiff = p
        .species
        .iter()
        .map(|s| s.diffusivity * (1.0 + p.chi1 * s.valence.abs() * 4.0))
        .fold(0.0f64, f64::max);
    64.0 * f64::EPSILON * (1.0 + 4.0 * dt * stiff / (dx * dx))
}

/// Banded solve against dense elimination, with and without corner extras.
pub fn check_banded_solver<R: Rng>(rng: &mut R) -> Check {
    use pnp::banded::{solve_banded, BandedSystem};
    let n = rng.gen_range(3..60);
    let corners = rng.gen_bool(0.5);
    let m = random_banded(rng, n, corners);
    let rhs: Vec<f64> = (0..n).map(|_| rng.gen_range(-10.0..10.0)).collect();
    let x = solve_banded(&BandedSystem {
        matrix: m.clone(),
        rhs: rhs.clone(),
    })
    .map_err(|e| e.to_string())?;
    let oracle = dense_solve(m.to_dense(), rhs.clone());
    let scale = oracle.iter().fold(1.0f64, |s, v| s.max(v.abs()));
    let err = max_abs_diff(&x, &oracle);
    ensure(err <= 1e-12 * scale, || format!("n={n} corners={corners}: error {err}"))
}

/// With no charge the potential is the affine solution of the Robin problem,
/// reproduced to round-off at any resolution.
pub fn check_affine_robin<R: Rng>(rng: &mut R) -> Check {
    let mut p = random_params(rng);
    p.chi2 = 0.0;
    p.fixed_charge = Profile::Constant(0.0);
    p.permittivity = Profile::Constant(rng.gen_range(0.1..5.0));
    let eta = p.robin_length;
    let d = disc(p.clone(), rng.gen_range(4..200));
    let s = random_state(rng, &d);
    let phi = pnp::stepper::solve_poisson(&s.c, &d).map_err(|e| e.to_string())?;
    let a = 0.5 * (p.phi_minus + p.phi_plus);
    let b = (p.phi_plus - p.phi_minus) / (2.0 * (1.0 + eta));
    let exact: Vec<f64> = d.grid().nodes().iter().map(|x| a + b * x).collect();
    let err = max_abs_diff(&phi, &exact);
    ensure(err <= 1e-12, || format!("affine error {err} (eta {eta})"))
}

/// Neutral uniform data with zero boundary potentials is stationary.
pub fn check_equilibrium<R: Rng>(rng: &mut R) -> Check {
    let z = [1.0, 2.0][rng.gen_range(0..2)];
    let c0 = rng.gen_range(0.3..2.0);
    let mut p = random_params(rng);
    p.species = vec![
        SpeciesParameters {
            valence: z,
            diffusivity: rng.gen_range(0.2..3.0),
            initial_concentration: c0,
            reference_concentration: 1.0,
        },
        SpeciesParameters {
            valence: -z,
            diffusivity: rng.gen_range(0.2..3.0),
            initial_concentration: c0,
            reference_concentration: 1.0,
        },
    ];
    p.fixed_charge = Profile::Constant(0.0);
    p.phi_minus = 0.0;
    p.phi_plus = 0.0;
    let chi2 = p.chi2;
    let d = disc(p, rng.gen_range(4..100));
    let s = pnp::stepper::initial_state(&d).map_err(|e| e.to_string())?;
    let scheme = if rng.gen_bool(0.5) {
        pnp::BoundaryScheme::Conservative
    } else {
        pnp::BoundaryScheme::Standard
    };
    // Inner iterations contract only while dt D / debye² stays below one.
    let d_max = d.params().species.iter().map(|s| s.diffusivity).fold(0.0f64, f64::max);
    let dt_max = (0.5 * d.debye_length().powi(2) / d_max).min(1e-1);
    let dt = 10f64.powf(rng.gen_range(-5.0..dt_max.log10().max(-4.0)));
    let cfg = pnp::StepperConfig::new(dt, 1.0).with_scheme(scheme);
    let next = pnp::stepper::advance(&s, &cfg, &d).map_err(|e| e.to_string())?;
    let tol = solve_tolerance(&d, dt) * c0;
    for (a, b) in next.c.iter().zip(&s.c) {
        let err = max_abs_diff(a, b);
        ensure(err <= tol, || format!("concentration moved by {err} (bound {tol})"))?;
    }
    // The potential responds to the charge round-off through a Green's
    // function bounded by 1 / min(eps) <= 10.
    let phi_tol = tol * (1.0 + 10.0 * chi2 * z);
    let phi = next.phi.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    ensure(phi <= phi_tol, || format!("potential moved by {phi} (bound {phi_tol})"))
}

/// Mirror-symmetric data stays mirror-symmetric: `c_1(x) = c_2(-x)` and
/// `phi(x) = -phi(-x)`.
pub fn check_symmetry<R: Rng>(rng: &mut R) -> Check {
    // Resolved regimes only: dx below half the Debye length, moderate
    // boundary enrichment exp(chi1 |phi_±|) and contracting inner iterations.
    let chi1 = rng.gen_range(0.5..4.0);
    let mut p = DimensionlessParameters::symmetric_pair(
        chi1,
        rng.gen_range(1.0..150.0),
        10f64.powf(rng.gen_range(-4.0..-1.0)),
        rng.gen_range(0.1..2.0),
    );
    let v = rng.gen_range(0.1..3.0 / chi1);
    p.phi_minus = v;
    p.phi_plus = -v;
    let debye = disc(p.clone(), 8).debye_length();
    let half_intervals = ((1.0 / debye).ceil() as usize).max(8) + rng.gen_range(0..8);
    let d = disc(p, 2 * half_intervals);
    let scheme = if rng.gen_bool(0.5) {
        pnp::BoundaryScheme::Conservative
    } else {
        pnp::BoundaryScheme::Standard
    };
    let dt_max = (0.5 * debye * debye).min(1e-3);
    let cfg = pnp::StepperConfig::new(10f64.powf(rng.gen_range(-5.0..dt_max.log10().max(-4.5))), 0.0)
        .with_scheme(scheme)
        .with_inner_iterations(rng.gen_range(0..3));
    let mut s = pnp::stepper::initial_state(&d).map_err(|e| e.to_string())?;
    for _ in 0..rng.gen_range(1..20) {
        s = pnp::stepper::advance(&s, &cfg, &d).map_err(|e| e.to_string())?;
    }
    let n = s.phi.len() - 1;
    let mut defect = 0.0f64;
    for j in 0..=n {
        defect = defect
            .max((s.c[0][j] - s.c[1][n - j]).abs())
            .max((s.phi[j] + s.phi[n - j]).abs());
    }
    ensure(defect <= 1e-9, || format!("symmetry defect {defect} (J={n}, {scheme})"))
}

/// `-∫ sum D c |dmu/dx|²` is never positive.
pub fn check_dissipation_sign<R: Rng>(rng: &mut R) -> Check {
    let d = disc(random_params(rng), rng.gen_range(4..100));
    let s = random_state(rng, &d);
    let rate = pnp::diagnostics::dissipation_rate_rhs(&s, &d).map_err(|e| e.to_string())?;
    ensure(rate <= 0.0, || format!("dissipation rate {rate}"))
}

/// `richardson_order` recovers `p` from `v(h) = v* + C h^p` for p = 1, 2, 3.
pub fn check_richardson<R: Rng>(rng: &mut R) -> Check {
    let v_star = rng.gen_range(-10.0..10.0);
    let c = rng.gen_range(0.5..5.0) * if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
    let h = 10f64.powf(rng.gen_range(-2.0..-1.0));
    for p in [1, 2, 3] {
        let v = |k: f64| v_star + c * (k * h).powi(p);
        let order = pnp::harness::richardson_order(v(1.0), v(2.0), v(4.0)).map_err(|e| e.to_string())?;
        ensure((order - p as f64).abs() <= 1e-6, || format!("order {order} for p = {p}"))?;
    }
    Ok(())
}

/// Every property with its name.
pub const PROPERTIES: [(&str, fn(&mut rand_chacha::ChaCha8Rng) -> Check); 7] = [
    ("conservation identity (J=8)", check_conservation_identity),
    ("banded solver vs dense", check_banded_solver),
    ("affine Robin-Laplace", check_affine_robin),
    ("equilibrium fixed point", check_equilibrium),
    ("symmetry preservation", check_symmetry),
    ("dissipation sign", check_dissipation_sign),
    ("richardson exactness", check_richardson),
];
