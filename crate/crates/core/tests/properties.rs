mod common;

use common::*;
use pnp::{DimensionlessParameters, Profile};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn run(check: fn(&mut ChaCha8Rng) -> Check, seed: u64) -> std::result::Result<(), TestCaseError> {
    check(&mut ChaCha8Rng::seed_from_u64(seed)).map_err(TestCaseError::fail)
}

fn config(cases: u32) -> ProptestConfig {
    ProptestConfig {
        cases,
        failure_persistence: None,
        ..ProptestConfig::default()
    }
}

proptest! {
    #![proptest_config(config(64))]

    #[test]
    fn conservation_identity(seed in any::<u64>()) {
        run(check_conservation_identity, seed)?;
    }

    #[test]
    fn banded_solver_matches_dense(seed in any::<u64>()) {
        run(check_banded_solver, seed)?;
    }

    #[test]
    fn affine_robin_laplace(seed in any::<u64>()) {
        run(check_affine_robin, seed)?;
    }

    #[test]
    fn equilibrium_fixed_point(seed in any::<u64>()) {
        run(check_equilibrium, seed)?;
    }

    #[test]
    fn dissipation_never_positive(seed in any::<u64>()) {
        run(check_dissipation_sign, seed)?;
    }

    #[test]
    fn richardson_exact_on_power_laws(seed in any::<u64>()) {
        run(check_richardson, seed)?;
    }

    #[test]
    fn poisson_matches_dense_ghost_system(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let p = random_params(&mut rng);
        let d = disc(p.clone(), rng.gen_range(4..80));
        let s = random_state(&mut rng, &d);
        let phi = pnp::stepper::solve_poisson(&s.c, &d).unwrap();
        let oracle = dense_poisson(&p, &s.c, d.grid().intervals());
        let scale = oracle.iter().fold(1.0f64, |m, v| m.max(v.abs()));
        let err = max_abs_diff(&phi, &oracle);
        prop_assert!(err <= 1e-9 * scale, "error {} (scale {})", err, scale);
    }
}

proptest! {
    #![proptest_config(config(16))]

    #[test]
    fn symmetry_preserved(seed in any::<u64>()) {
        run(check_symmetry, seed)?;
    }
}

/// Poisson problem with the two ghost potentials kept as unknowns and the
/// Robin closures written as their own rows, solved densely.
fn dense_poisson(p: &DimensionlessParameters, c: &[Vec<f64>], intervals: usize) -> Vec<f64> {
    let n = intervals + 3;
    let dx = 2.0 / intervals as f64;
    let x = |k: usize| -1.0 + (k as f64 - 1.0) * dx;
    let eps = |xm: f64| match &p.permittivity {
        Profile::Constant(v) => *v,
        Profile::Function(f) => f(xm),
        Profile::Sampled(_) => unreachable!("generator uses functions"),
    };
    let rho0 = |xk: f64| match &p.fixed_charge {
        Profile::Constant(v) => *v,
        Profile::Function(f) => f(xk),
        Profile::Sampled(_) => unreachable!("generator uses functions"),
    };
    let eta = p.robin_length;
    let mut a = vec![vec![0.0; n]; n];
    let mut b = vec![0.0; n];
    // (phi_0 - phi_-) - eta (phi_1 - phi_{-1}) / (2 dx) = 0
    a[0][1] = 1.0;
    a[0][2] = -eta / (2.0 * dx);
    a[0][0] = eta / (2.0 * dx);
    b[0] = p.phi_minus;
    // (phi_J - phi_+) + eta (phi_{J+1} - phi_{J-1}) / (2 dx) = 0
    a[n - 1][n - 2] = 1.0;
    a[n - 1][n - 1] = eta / (2.0 * dx);
    a[n - 1][n - 3] = -eta / (2.0 * dx);
    b[n - 1] = p.phi_plus;
    for k in 1..n - 1 {
        let (em, ep) = (eps(x(k) - 0.5 * dx), eps(x(k) + 0.5 * dx));
        a[k][k - 1] = em / (dx * dx);
        a[k][k] = -(em + ep) / (dx * dx);
        a[k][k + 1] = ep / (dx * dx);
        let charge: f64 = p.species.iter().zip(c).map(|(s, ci)| s.valence * ci[k - 1]).sum();
        b[k] = -(rho0(x(k)) + p.chi2 * charge);
    }
    let full = dense_solve(a, b);
    full[1..n - 1].to_vec()
}
