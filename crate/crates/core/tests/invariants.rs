use proptest::prelude::*;

use sicpower::chain::{sic_rate_chain, stream_rates, verify_feasible};
use sicpower::error::Error;
use sicpower::order::{collapse_dof, enumerate_profiles, AggregationMap};
use sicpower::outer::{bisect_lambda, minpic_solve, BisectionConfig, SearchMode};
use sicpower::relaxation::{build_relaxation, PenaltyWeight};
use sicpower::scenario::{all_streams, AllocationPoint, Scenario};
use sicpower::solver::{solve, SolveStatus, SolverOptions};

fn channel(u: usize) -> impl Strategy<Value = Vec<Vec<f64>>> {
    prop::collection::vec(prop::collection::vec(0.05..1.0f64, u), u)
}

fn powers(u: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(0.0..5.0f64, u * u)
}

fn with_powers(s: &Scenario, p: &[f64]) -> AllocationPoint {
    let mut pt = AllocationPoint::for_scenario(s);
    for (st, v) in all_streams(s.users()).zip(p) {
        pt.set_power(st, 0, *v);
    }
    pt
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn chain_rates_telescope(
        (h, p) in (1usize..=3).prop_flat_map(|u| (channel(u), powers(u))),
        pick in any::<prop::sample::Index>(),
        half in any::<bool>(),
    ) {
        let s = Scenario::single_tone(&h, 0.5, if half { 0.5 } else { 1.0 }).unwrap();
        let profs: Vec<_> = enumerate_profiles(&s, s.users() <= 2).unwrap().collect();
        let prof = &profs[pick.index(profs.len())];
        let pt = with_powers(&s, &p);
        for r in 0..s.users() {
            let ch = sic_rate_chain(&s, prof, &pt, r, 0).unwrap();
            let want = ch.telescoped(s.rate_factor());
            prop_assert!((ch.total() - want).abs() <= 1e-10 * want.abs().max(1e-12));
        }
    }

    #[test]
    fn scaling_powers_up_never_lowers_rates(
        (h, p) in (1usize..=3).prop_flat_map(|u| (channel(u), powers(u))),
        pick in any::<prop::sample::Index>(),
        factor in 1.0..10.0f64,
    ) {
        let s = Scenario::single_tone(&h, 0.5, 1.0).unwrap();
        let profs: Vec<_> = enumerate_profiles(&s, s.users() <= 2).unwrap().collect();
        let prof = &profs[pick.index(profs.len())];
        let pt = with_powers(&s, &p);
        let mut up = pt.clone();
        up.scale_powers(factor);
        let (a, b) = (stream_rates(&s, prof, &pt).unwrap(), stream_rates(&s, prof, &up).unwrap());
        for st in all_streams(s.users()) {
            prop_assert!(b.rate(st, 0) >= a.rate(st, 0) - 1e-12);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn collapsed_relaxation_matches_full(
        h in channel(2),
        pick in any::<prop::sample::Index>(),
        lambda in 0.0..4.0f64,
    ) {
        let s = Scenario::single_tone(&h, 0.5, 1.0).unwrap();
        let profs: Vec<_> = enumerate_profiles(&s, true).unwrap().collect();
        let prof = &profs[pick.index(profs.len())];
        let lam = PenaltyWeight::new(lambda).unwrap();
        let opt = SolverOptions::default();
        let grouped = build_relaxation(&s, prof, &collapse_dof(&s, prof).unwrap(), lam);
        let full = build_relaxation(&s, prof, &AggregationMap::identity(2), lam);
        if let (Ok(g), Ok(f)) = (grouped, full) {
            let (a, b) = (solve(&g.program, &opt).unwrap(), solve(&f.program, &opt).unwrap());
            prop_assume!(a.status == SolveStatus::Optimal && b.status == SolveStatus::Optimal);
            prop_assert!((a.objective - b.objective).abs() <= 1e-4, "{} vs {}", a.objective, b.objective);
        }
    }

    #[test]
    fn bisection_keeps_its_bracket(
        h in channel(2),
        b in prop::collection::vec(0.1..1.0f64, 2),
        pick in any::<prop::sample::Index>(),
    ) {
        let s = Scenario::single_tone(&h, 0.5, 1.0).unwrap().with_rate_min(&b).unwrap();
        let profs: Vec<_> = enumerate_profiles(&s, true).unwrap().collect();
        let prof = &profs[pick.index(profs.len())];
        let cfg = BisectionConfig::default();
        match bisect_lambda(&s, prof, &collapse_dof(&s, prof).unwrap(), &cfg) {
            Ok(out) => {
                for st in &out.steps {
                    prop_assert!(st.low <= st.high);
                    if !st.feasible {
                        prop_assert!(st.lambda <= st.low);
                    }
                }
                for st in out.steps.iter().skip(1).filter(|s| s.feasible) {
                    prop_assert_eq!(st.lambda, st.high);
                }
                let last = out.steps.last().unwrap();
                prop_assert!(out.steps.len() == 1 || last.high - last.low < cfg.epsilon);
                prop_assert!(verify_feasible(&s, prof, &out.point, 1e-9).unwrap().feasible);
            }
            Err(Error::Infeasible(_)) | Err(Error::Build(_)) => {}
            Err(e) => prop_assert!(false, "{e}"),
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(4))]

    #[test]
    fn optimum_grows_with_rate_target(h in channel(2), base in 0.1..0.4f64) {
        let s = Scenario::single_tone(&h, base, 1.0).unwrap();
        let cfg = BisectionConfig::default();
        let mut last = 0.0;
        for level in [base, 1.5 * base, 2.0 * base] {
            let sl = s.with_rate_min(&[level, level]).unwrap();
            let r = minpic_solve(&sl, SearchMode::Exhaustive, &cfg).unwrap();
            prop_assert!(verify_feasible(&sl, &r.profile, &r.point, 1e-5).unwrap().feasible);
            prop_assert!(r.total >= last * (1.0 - 1e-6), "{} after {}", r.total, last);
            last = r.total;
        }
    }
}
