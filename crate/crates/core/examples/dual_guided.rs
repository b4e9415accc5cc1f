//! Dual-guided profile search next to the exhaustive search.

use sicpower::order::{dual_rank_profile, DualVector, TieRule};
use sicpower::outer::{minpic_solve, BisectionConfig, SearchMode};
use sicpower::reproduce::BenchCase;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let cfg = BisectionConfig::default();
    for case in [BenchCase::Demo2, BenchCase::C] {
        let s = case.scenario(1.0)?;
        let dg = minpic_solve(&s, SearchMode::DualGuided, &cfg)?;
        let ex = minpic_solve(&s, SearchMode::Exhaustive, &cfg)?;
        println!("{case}");
        for step in &dg.search {
            println!("  tried {}  total {:?}", step.profile, step.total);
        }
        println!("  duals {:?}", dg.duals);
        let next = dual_rank_profile(&s, &DualVector::new(dg.duals.clone())?, TieRule::LowerIndexFirst)?;
        println!("  ranking from these duals: {next}");
        println!("  dual-guided {:.5}  exhaustive {:.5} over {} profiles", dg.total, ex.total, ex.search.len());
    }
    Ok(())
}
