mod common;

use common::{program_from_choices, Choice};
use mbqc::ir::{from_json, parse_text, print_text, to_json, validate, Constraint};
use mbqc::rewrite::standardize;
use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn json_round_trip(n in 1usize..=5, mask in any::<u8>(), ops in prop::collection::vec(any::<Choice>(), 0..24)) {
        let p = program_from_choices(n, mask, &ops, 16);
        prop_assert_eq!(from_json(&to_json(&p)).unwrap(), p);
    }

    #[test]
    fn text_round_trip(n in 1usize..=5, mask in any::<u8>(), ops in prop::collection::vec(any::<Choice>(), 0..24)) {
        let p = program_from_choices(n, mask, &ops, 16);
        prop_assert_eq!(parse_text(&print_text(&p)).unwrap(), p);
    }

    #[test]
    fn generated_programs_validate(n in 1usize..=5, mask in any::<u8>(), ops in prop::collection::vec(any::<Choice>(), 0..24)) {
        let p = program_from_choices(n, mask, &ops, 16);
        let r = validate(&p);
        prop_assert!(r.ok(), "{}", r);
    }
}

#[test]
fn standard_teleport_json_listing() {
    let (s, _) = standardize(&mbqc::corpus::teleport_program()).unwrap();
    let v: serde_json::Value = serde_json::from_str(&to_json(&s)).unwrap();
    let arr = v.as_array().unwrap();
    assert_eq!(arr.len(), 8);
    assert_eq!(arr[0], serde_json::json!({"Input": {"qubit": 0}}));
    assert_eq!(from_json(&to_json(&s)).unwrap(), s);
}

#[test]
fn text_file_with_violation_reports_constraint() {
    let p = parse_text("Prep 0\nPrep 1\nMeasure 1 0 [0] []\nMeasure 0 0 [] []\n").unwrap();
    let r = validate(&p);
    assert!(r.has(Constraint::SignalNotMeasured));
    assert!(r.to_string().contains("constraint 1"));
}
