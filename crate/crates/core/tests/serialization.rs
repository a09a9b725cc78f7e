use ddebif::*;
use proptest::prelude::*;
use serde::{de::DeserializeOwned, Serialize};

fn round_trip<T: Serialize + DeserializeOwned + PartialEq + std::fmt::Debug>(v: &T) -> T {
    let text = serde_json::to_string(v).unwrap();
    let back: T = serde_json::from_str(&text).unwrap();
    assert_eq!(&back, v, "{text}");
    back
}

#[test]
fn default_methods_round_trip() {
    for kind in [PointKind::Stst, PointKind::Fold, PointKind::Hopf, PointKind::Psol, PointKind::Hcli] {
        let mut c = default_continuation_method();
        c.plot_measure = Some(PlotMeasure { x: Measure::parameter(2), y: Measure::parameter(3) });
        round_trip(&BranchMethod {
            point: default_point_method(kind),
            stability: default_stability_method(kind),
            continuation: c,
        });
    }
}

#[test]
fn measure_text_form() {
    let m: Measure = serde_json::from_str(
        r#"{"field":"stability","subfield":"l1","row":"all","col":1,"func":"real"}"#,
    )
    .unwrap();
    assert_eq!(m.subfield, MeasureSubfield::L1);
    assert_eq!(m.row, Selector::Named(NamedSelector::All));
    assert_eq!(m.col, Selector::Index(1));
    m.validate().unwrap();
    let short: Measure = serde_json::from_str(r#"{"field":"period","row":1,"col":1}"#).unwrap();
    assert_eq!(short.func, MeasureFunc::None);
    round_trip(&m);
    round_trip(&short);
    let bad: Measure = serde_json::from_str(r#"{"field":"x","row":"max","col":"min"}"#).unwrap();
    assert!(matches!(bad.validate(), Err(Error::Measure(_))));
}

#[test]
fn events_omit_null_payload() {
    let e = Event::new(EventKind::NegativeDelay, "delay 3 crossed zero");
    let text = serde_json::to_string(&e).unwrap();
    assert!(!text.contains("payload"));
    assert!(text.contains("negative_delay"));
    round_trip(&e);
    round_trip(&Event::new(EventKind::BoundaryHit, "x").with_payload(serde_json::json!({"index": 4, "value": 5.0})));
}

fn selector() -> impl Strategy<Value = Selector> {
    prop_oneof![
        (1usize..9).prop_map(Selector::Index),
        prop_oneof![
            Just(NamedSelector::Min),
            Just(NamedSelector::Max),
            Just(NamedSelector::Mean),
            Just(NamedSelector::Ampl),
            Just(NamedSelector::All)
        ]
        .prop_map(Selector::Named),
    ]
}

fn bounds() -> impl Strategy<Value = Vec<(usize, f64)>> {
    prop::collection::vec((1usize..20, -1e6f64..1e6), 0..4)
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 64, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn parameter_record_round_trips(
        free in prop::collection::vec(1usize..20, 0..4),
        min_bound in bounds(),
        max_bound in bounds(),
        max_step in bounds(),
    ) {
        round_trip(&ParameterRecord { free, min_bound, max_bound, max_step });
    }

    #[test]
    fn measures_round_trip(row in selector(), col in selector(), f in 0usize..7, s in 0usize..4, g in 0usize..4) {
        let field = [MeasureField::Parameter, MeasureField::X, MeasureField::V, MeasureField::Omega,
            MeasureField::Profile, MeasureField::Period, MeasureField::Stability][f];
        let subfield = [MeasureSubfield::None, MeasureSubfield::L0, MeasureSubfield::L1, MeasureSubfield::Mu][s];
        let func = [MeasureFunc::None, MeasureFunc::Real, MeasureFunc::Imag, MeasureFunc::Abs][g];
        round_trip(&Measure { field, subfield, row, col, func });
    }

    #[test]
    fn point_method_round_trips(
        it in 0usize..50, nmon in 0usize..5, halt in 1e-14f64..1.0, min in 1e-14f64..1.0,
        flags in any::<(bool, bool, bool)>(), adapt in (0usize..3, 0usize..3),
    ) {
        round_trip(&PointMethod {
            newton_max_iterations: it,
            newton_nmon_iterations: nmon,
            halting_accuracy: halt,
            minimal_accuracy: min,
            extra_condition: flags.0,
            print_residual_info: flags.1,
            phase_condition: flags.2,
            collocation_parameters: vec![halt, min],
            adapt_mesh_before_correct: adapt.0,
            adapt_mesh_after_correct: adapt.1,
        });
    }
}
