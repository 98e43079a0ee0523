//! The channel configuration run to t = 1 with the conservative scheme.

use pnp::harness::{symmetry_defect, StudySpec};
use pnp::stepper::{initial_state, run, RunOptions};
use pnp::{BoundaryScheme, Discretization, Grid};

#[test]
fn channel_run_is_symmetric_and_accumulates_anions_left() {
    let spec = StudySpec::scheme_comparison();
    let disc = Discretization::new(spec.params.clone(), Grid::new(spec.intervals).unwrap()).unwrap();
    let cfg = spec.stepper.with_scheme(BoundaryScheme::Conservative);
    let opts = RunOptions {
        sample_every: 100,
        ..RunOptions::default()
    };
    let out = run(&initial_state(&disc).unwrap(), &cfg, &disc, &opts).unwrap();
    let s = &out.final_state;
    assert!((s.t - 1.0).abs() < 1e-12);

    // c_1(x) = c_2(-x) and phi(x) = -phi(-x).
    let defect = symmetry_defect(s);
    assert!(defect < 1e-8, "symmetry defect {defect}");

    // The anion piles up at x = -1, where the applied potential is positive:
    // c_2 falls monotonically from the wall until it is within 1% of the
    // bulk value, and stays at or below that level across the rest.
    let c2 = &s.c[1];
    let bulk = c2[c2.len() / 2];
    let edge = c2.iter().position(|&c| c <= 1.01 * bulk).unwrap();
    assert!(edge > 0);
    assert!(c2[..=edge].windows(2).all(|w| w[1] < w[0]), "c_2 not monotone in the layer");
    assert!(c2[edge..].iter().all(|&c| c <= 1.01 * bulk));
    assert!(c2[0] > 10.0 * c2[c2.len() - 1]);

    assert!(out.record.max_relative_drift() <= 1e-10);
}
