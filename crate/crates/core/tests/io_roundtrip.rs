use proptest::prelude::*;

use sicpower::io::{ResultFile, ScenarioFile};
use sicpower::outer::{minpic_solve, BisectionConfig, SearchMode};
use sicpower::reproduce::BenchCase;
use sicpower::scenario::Scenario;

fn scenario() -> impl Strategy<Value = Scenario> {
    (1usize..=3, 1usize..=3)
        .prop_flat_map(|(u, n)| {
            (
                prop::collection::vec(prop::collection::vec(prop::collection::vec(0.0..2.0f64, n), u), u),
                prop::collection::vec(prop::collection::vec(0.1..3.0f64, n), u),
                prop::collection::vec(0.5..2.0f64, u),
                prop::collection::vec(0.0..1.0f64, u),
                prop::bool::ANY,
            )
        })
        .prop_map(|(g, noise, w, b, half)| {
            Scenario::new(&g, &noise, &w, &b, if half { 0.5 } else { 1.0 }).unwrap()
        })
}

proptest! {
    #[test]
    fn scenario_file_round_trips(s in scenario()) {
        let text = ScenarioFile::from_scenario(&s).to_toml().unwrap();
        let back = ScenarioFile::parse(&text).unwrap().scenario().unwrap();
        prop_assert_eq!(s, back);
    }
}

#[test]
fn result_file_round_trips_and_verifies() {
    for case in [BenchCase::Demo2, BenchCase::C] {
        let s = case.scenario(1.0).unwrap();
        let rep = minpic_solve(&s, SearchMode::Exhaustive, &BisectionConfig::default()).unwrap();
        let r = ResultFile::from_report(&s, &rep, SearchMode::Exhaustive).unwrap();
        let back = ResultFile::parse(&r.to_toml().unwrap()).unwrap();
        assert_eq!(r, back);
        assert_eq!(back.decoding_profile().unwrap(), rep.profile);
        let v = back.verify(&s, 1e-12).unwrap();
        assert!(v.feasible, "{case}: {:?}", v.margin);
        assert!((back.total - rep.total).abs() < 1e-5, "{case}: {} vs {}", back.total, rep.total);
    }
}

#[test]
fn rounded_powers_have_six_decimals() {
    let s = BenchCase::Demo2.scenario(1.0).unwrap();
    let rep = minpic_solve(&s, SearchMode::Exhaustive, &BisectionConfig::default()).unwrap();
    let r = ResultFile::from_report(&s, &rep, SearchMode::Exhaustive).unwrap();
    for p in r.powers.iter().flatten().flatten() {
        assert!((p * 1e6 - (p * 1e6).round()).abs() < 1e-6, "{p}");
    }
}
