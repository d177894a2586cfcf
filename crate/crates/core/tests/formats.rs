use boussinesq::dynamics::{initial_state, InitialData, NormSample, NormTrace, Perturbation};
use boussinesq::harness::GapSeries;
use boussinesq::io::csv::{gaps_csv, gaps_from_csv};
use boussinesq::io::{checkpoint_bytes, checkpoint_from_bytes, trace_csv, trace_from_csv};
use boussinesq::torus::Grid;
use boussinesq::Error;
use proptest::prelude::*;

fn finite() -> impl Strategy<Value = f64> {
    prop_oneof![
        any::<f64>().prop_filter("finite", |x| x.is_finite()),
        Just(0.0),
        Just(-0.0),
        Just(f64::MIN_POSITIVE / 4.0),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn trace_csv_is_bit_exact(rows in prop::collection::vec(prop::collection::vec(finite(), 17), 0..12)) {
        let samples: Vec<NormSample> = rows.iter().map(|r| NormSample::from_row(r).unwrap()).collect();
        let trace = NormTrace { nu: 1e-3, kappa: 1e-2, samples };
        let back = trace_from_csv(&trace_csv(&trace).unwrap(), 1e-3, 1e-2).unwrap();
        for (a, b) in trace.samples.iter().zip(&back.samples) {
            let bits = |s: &NormSample| s.row().map(f64::to_bits);
            prop_assert_eq!(bits(a), bits(b));
        }
        prop_assert_eq!(back.samples.len(), trace.samples.len());
    }

    #[test]
    fn gap_csv_is_bit_exact(rows in prop::collection::vec((finite(), finite(), finite(), finite()), 0..12)) {
        let mut s = GapSeries::default();
        for (t, u, th, w) in &rows {
            s.push(*t, *u, *th, *w);
        }
        let back = gaps_from_csv(&gaps_csv(&s).unwrap()).unwrap();
        prop_assert_eq!(format!("{back:?}"), format!("{s:?}"));
    }

    #[test]
    fn checkpoints_round_trip(seed in any::<u64>(), half in 4usize..=12, t in 0.0..10.0f64, nu in 0.0..1e-1f64) {
        let grid = Grid::new(2 * half).unwrap();
        let mut s = initial_state(grid, &InitialData::rough(seed), Perturbation::default(), nu, 1e-2).unwrap();
        s.t = t;
        let bytes = checkpoint_bytes(&s);
        prop_assert_eq!(checkpoint_from_bytes(&bytes).unwrap(), s);
    }

    #[test]
    fn truncated_checkpoints_are_rejected(cut in 1usize..200) {
        let grid = Grid::new(8).unwrap();
        let s = initial_state(grid, &InitialData::smooth(), Perturbation::default(), 0.0, 1e-2).unwrap();
        let bytes = checkpoint_bytes(&s);
        let cut = cut.min(bytes.len());
        prop_assert!(checkpoint_from_bytes(&bytes[..bytes.len() - cut]).is_err());
    }
}

#[test]
fn checkpoint_header_is_checked() {
    let grid = Grid::new(8).unwrap();
    let s = initial_state(grid, &InitialData::smooth(), Perturbation::default(), 0.0, 1e-2).unwrap();
    let mut bytes = checkpoint_bytes(&s);
    assert_eq!(&bytes[..6], b"BQCHK1");
    bytes[0] = b'X';
    assert!(checkpoint_from_bytes(&bytes).is_err());
    let mut extra = checkpoint_bytes(&s);
    extra.push(0);
    assert!(matches!(checkpoint_from_bytes(&extra), Err(Error::Checkpoint(_))));
}

#[test]
fn csv_rejects_foreign_headers() {
    assert!(trace_from_csv(b"a,b\n1,2\n", 0.0, 1.0).is_err());
    let mut bytes = trace_csv(&NormTrace::new(0.0, 1.0)).unwrap();
    bytes.extend_from_slice(b"1,2\n");
    assert!(trace_from_csv(&bytes, 0.0, 1.0).is_err());
}
