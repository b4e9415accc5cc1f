//! Reference allocations on one channel: orthogonal access, treating
//! interference as noise, and interference-free water-filling.

use sicpower::chain::{total_weighted_power, verify_feasible};
use sicpower::reference::{
    oma_total_power, private_allocation, tin_fixed_point, tin_profile, waterfill_min_power, waterfill_total,
    OmaAccounting, TinOutcome,
};
use sicpower::scenario::Scenario;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let s = Scenario::single_tone(&[vec![1.0, 0.3], vec![0.2, 0.8]], 0.5, 1.0)?;

    println!("oma average  {:.6}", oma_total_power(&s, OmaAccounting::Average)?);
    println!("oma peak     {:.6}", oma_total_power(&s, OmaAccounting::Peak)?);

    match tin_fixed_point(&s, 10_000, 1e-12)? {
        TinOutcome::Converged { power, iterations } => {
            let pt = private_allocation(&s, &power);
            let ok = verify_feasible(&s, &tin_profile(2), &pt, 1e-9)?.feasible;
            println!("tin          {:.6} after {iterations} sweeps, verified {ok}", total_weighted_power(&s, &pt));
        }
        TinOutcome::Diverged { iterations } => println!("tin diverged after {iterations} sweeps"),
    }

    let (total, _) = waterfill_total(&s)?;
    println!("water-fill   {total:.6} (ignores interference)");

    // Four parallel blocks of decreasing quality, two bits in total.
    let p = waterfill_min_power(&[1.0, 0.7, 0.4, 0.1], &[1.0; 4], 2.0, 1.0)?;
    println!("multi-block  {p:.4?}");
    Ok(())
}
