use pnp::diagnostics::{DiagnosticsRecord, DiagnosticsSample};
use pnp::io::{parse_config, read_snapshot, write_snapshot, write_timeseries};
use pnp::{DimensionlessParameters, Discretization, FieldState, Grid};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const BASELINE: &str = "\
chi1 = 3.1
chi2 = 125.4
etaPrime = 4.63e-5
epsPrime = 1
phiMinus = 1
phiPlus = -1
z.1 = 1
z.2 = -1
J = 1000
dt = 1e-4
tEnd = 1
";

#[test]
fn snapshot_round_trip_is_bit_exact() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let grid = Grid::new(37).unwrap();
    let state = FieldState {
        t: 0.123456789012345678,
        c: (0..3)
            .map(|_| (0..38).map(|_| rng.gen_range(1e-300..1e3) * 10f64.powi(rng.gen_range(-200..200))).collect())
            .collect(),
        phi: (0..38).map(|_| rng.gen_range(-5.0..5.0)).collect(),
    };
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("snap.csv");
    let meta = vec![("J".to_string(), "37".to_string())];
    write_snapshot(&state, &grid, &meta, &path).unwrap();
    let (x, back) = read_snapshot(&path).unwrap();
    assert_eq!(x, grid.nodes());
    assert_eq!(back.t.to_bits(), state.t.to_bits());
    assert_eq!(back.c, state.c);
    assert_eq!(back.phi, state.phi);
}

#[test]
fn single_sample_timeseries_has_one_row() {
    let disc = Discretization::new(DimensionlessParameters::channel(), Grid::new(8).unwrap()).unwrap();
    let state = pnp::stepper::initial_state(&disc).unwrap();
    let mut record = DiagnosticsRecord::default();
    record.push(DiagnosticsSample::measure(&state, &disc).unwrap());
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("ts.csv");
    write_timeseries(&record, &[], &path).unwrap();
    let text = std::fs::read_to_string(&path).unwrap();
    let body: Vec<&str> = text.lines().filter(|l| !l.starts_with('#')).collect();
    assert_eq!(body[0], "t,ctot_1,ctot_2,energy,dissipation_rhs,max_dcdt,min_c");
    assert_eq!(body.len(), 2);
    assert!(!text.contains('\r'));
}

#[test]
fn baseline_config_echo_parses_to_the_same_run() {
    let cfg = parse_config(BASELINE).unwrap();
    let echo: String = cfg.entries().iter().map(|(k, v)| format!("{k} = {v}\n")).collect();
    let again = parse_config(&echo).unwrap();
    assert_eq!(again.entries(), cfg.entries());
    assert_eq!(again.intervals, 1000);
    assert_eq!(again.stepper.inner_iterations, 2);
}
