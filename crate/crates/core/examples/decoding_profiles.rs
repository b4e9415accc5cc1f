//! Enumerate decoding profiles and the free power groups each one leaves.

use sicpower::order::{block_structured_profiles, collapse_dof, enumerate_profiles};
use sicpower::scenario::Scenario;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let s2 = Scenario::single_tone(&[vec![1.0, 0.5], vec![0.5, 1.0]], 0.5, 1.0)?;
    let all = enumerate_profiles(&s2, true)?;
    println!("U=2: {} profiles", all.total());
    for p in enumerate_profiles(&s2, true)?.step_by(9) {
        println!("  {p}  -> {} power groups", collapse_dof(&s2, &p)?.len());
    }

    let h3 = vec![vec![1.0, 0.2, 0.1], vec![0.3, 1.0, 0.2], vec![0.1, 0.4, 1.0]];
    let s3 = Scenario::single_tone(&h3, 0.5, 1.0)?;
    let block = block_structured_profiles(&s3)?;
    println!("U=3: {} full-decode profiles, first {}", block.len(), block[0]);
    Ok(())
}
