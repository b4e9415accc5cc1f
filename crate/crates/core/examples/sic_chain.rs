//! Incremental rates along one SIC chain and their telescoped sum.

use sicpower::chain::{achieved_user_rates, sic_rate_chain};
use sicpower::profile::DecodingProfile;
use sicpower::scenario::{AllocationPoint, Scenario, SubStreamId};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let s = Scenario::single_tone(&[vec![1.0, 0.6], vec![0.8, 1.0]], 0.5, 1.0)?;
    // User 2 first at both receivers, then user 1.
    let prof = DecodingProfile::block_structured(2, &[1, 0])?;
    println!("profile {prof}");
    let mut pt = AllocationPoint::for_scenario(&s);
    pt.set_power(SubStreamId::new(0, 0), 0, 1.0);
    pt.set_power(SubStreamId::new(1, 0), 0, 2.0);
    pt.set_power(SubStreamId::new(1, 1), 0, 0.5);
    pt.set_power(SubStreamId::new(0, 1), 0, 0.3);

    for r in 0..2 {
        let ch = sic_rate_chain(&s, &prof, &pt, r, 0)?;
        println!(
            "rx{}: floor {:.4}, rates {:?}, sum {:.6}, telescoped {:.6}",
            r + 1,
            ch.floor,
            ch.incremental,
            ch.total(),
            ch.telescoped(s.rate_factor())
        );
    }
    println!("user rates {:?}", achieved_user_rates(&s, &prof, &pt)?);
    Ok(())
}
