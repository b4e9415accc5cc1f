//! Compare the solver against the brute-force grid oracle on random
//! two-user channels.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sicpower::outer::{minpic_solve, BisectionConfig, SearchMode};
use sicpower::reference::{brute_force_oracle, GridSpec};
use sicpower::scenario::Scenario;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let cfg = BisectionConfig::default();
    println!("seed,ours,oracle,slack,evaluated");
    for seed in 0..5u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let h: Vec<Vec<f64>> = (0..2).map(|_| (0..2).map(|_| rng.gen_range(0.0..1.0)).collect()).collect();
        let b: Vec<f64> = (0..2).map(|_| rng.gen_range(0.1..1.0)).collect();
        let s = Scenario::single_tone(&h, 0.5, 1.0)?.with_rate_min(&b)?;
        let ours = minpic_solve(&s, SearchMode::Exhaustive, &cfg)?;
        match brute_force_oracle(&s, &GridSpec::for_scenario(&s, 21)?) {
            Ok(o) => println!(
                "{seed},{:.5},{:.5},{:.5},{}",
                ours.total, o.best_total, o.resolution_slack, o.evaluated
            ),
            Err(e) => println!("{seed},{:.5},,,{e}", ours.total),
        }
    }
    Ok(())
}
