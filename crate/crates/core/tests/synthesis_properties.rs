use proptest::prelude::*;
use switchsynth::certify::{certify_all, GridConfig};
use switchsynth::cycle::{search_contractive, DEFAULT_SELECTION_CAP};
use switchsynth::dataset::{CompanionModel, SwitchSpec};
use switchsynth::lmi::verify_certificate;
use switchsynth::schedule::build_schedule;
use switchsynth::simulate::{contraction_report, gen_dataset, simulate_closed_loop};

/// Scalar families of 2..=4 subsystems with |a| kept off the grid
/// boundaries, and a random edge set.
fn family() -> impl Strategy<Value = (Vec<f64>, Vec<(usize, usize)>, usize, usize, u64)> {
    (2..=4usize).prop_flat_map(|n| {
        (
            prop::collection::vec(prop_oneof![0.05f64..0.9, 1.1f64..3.0], n),
            prop::collection::vec(any::<bool>(), n * n).prop_map(move |mask| {
                (1..=n)
                    .flat_map(|i| (1..=n).map(move |j| (i, j)))
                    .filter(|&(i, j)| i != j && mask[(i - 1) * n + j - 1])
                    .collect()
            }),
            1..=3usize,
            2..=6usize,
            any::<u64>(),
        )
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn synthesized_schedules_are_admissible_and_contract((coeffs, edges, dwell_min, dwell_max, seed) in family()) {
        prop_assume!(dwell_min <= dwell_max);
        let n = coeffs.len();
        let spec = SwitchSpec::new(n, 1, edges, dwell_min, dwell_max).unwrap();
        let models: Vec<CompanionModel> = coeffs.iter().enumerate().map(|(k, &a)| CompanionModel::new(k + 1, vec![-a])).collect();
        let ds = gen_dataset(&models, &spec, seed).unwrap();
        let cert = certify_all(&ds, &GridConfig::default(), None).unwrap();
        for (k, trace) in ds.traces.iter().enumerate() {
            for c in cert.certificates.of(k + 1) {
                prop_assert!(verify_certificate(c, &cert.psis[k], trace).passed());
            }
        }
        let Some(result) = search_contractive(&cert, &spec, DEFAULT_SELECTION_CAP).unwrap() else { return Ok(()) };
        prop_assert!(result.cycle.is_valid_in(&spec));
        prop_assert!(result.weight < 0.0);
        let schedule = build_schedule(&result, &spec).unwrap();
        prop_assert!(schedule.check_admissible(&spec));
        let run = simulate_closed_loop(&models, &schedule, &[1.0], 4 * schedule.period).unwrap();
        let report = contraction_report(&run, &result);
        prop_assert!(report.passed(), "{:?}", report);
    }
}
