//! Least powers for a fixed split of the rates, and the refinement that
//! starts from the cheapest split.

use sicpower::outer::exhaustive_candidates;
use sicpower::polish::{polish, split_starts, PolishConfig};
use sicpower::reproduce::BenchCase;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let s = BenchCase::Demo2.scenario(1.0)?;
    let cfg = PolishConfig::default();
    let mut best: Option<(f64, String)> = None;
    for prof in exhaustive_candidates(&s)? {
        let starts = split_starts(&s, &prof, 10, 1e9);
        let Some(start) = starts.first() else { continue };
        let out = polish(&s, &prof, start, &cfg)?;
        if best.as_ref().map_or(true, |(t, _)| out.total < *t) {
            println!("{prof}: {} splits, refined {:.6} in {} steps", starts.len(), out.total, out.iterations);
            best = Some((out.total, prof.to_string()));
        }
    }
    println!("best {best:?}");
    Ok(())
}
