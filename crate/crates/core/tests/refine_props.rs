mod common;

use common::{check, Params, Scenario, P_MAX, P_MIN};
use proptest::prelude::*;

fn params() -> impl Strategy<Value = Params> {
    (1usize..=10).prop_flat_map(|k| {
        (
            prop::collection::vec(-5.0f64..0.0, k),
            prop::collection::vec(P_MIN..=P_MAX, k),
            prop::collection::vec(prop::bool::weighted(0.3), k),
            prop::collection::vec(-10.0f64..2.0, k),
            prop::collection::vec((0.0f64..1.0, 1usize..=3, 1.0f64..=2.0), 0..=4),
        )
            .prop_map(|(log_widths, degrees, bracket_starts, log_errors, detections)| Params {
                log_widths,
                degrees,
                bracket_starts,
                log_errors,
                detections,
            })
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn refinement_invariants(p in params()) {
        let s = Scenario::build(&p);
        if let Err(msg) = check(&s) {
            prop_assert!(false, "{msg}\nmesh {:?}\ndetections {:?}", s.mesh, s.detections);
        }
    }
}
