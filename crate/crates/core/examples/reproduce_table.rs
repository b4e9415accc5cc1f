//! Comparison table of the built-in cases. Pass case names to pick a subset.
//!
//!     cargo run --release --example reproduce_table -- A B C

use sicpower::outer::BisectionConfig;
use sicpower::reproduce::{reproduce_case, BenchCase, CSV_HEADER};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let picked: Vec<BenchCase> = std::env::args().skip(1).map(|a| a.parse()).collect::<Result<_, _>>()?;
    let cases = if picked.is_empty() { vec![BenchCase::A, BenchCase::B, BenchCase::C] } else { picked };
    let cfg = BisectionConfig::default();
    for rho in [1.0, 0.5] {
        println!("# rate factor {rho}\n{CSV_HEADER}");
        for &c in &cases {
            let r = reproduce_case(c, rho, &cfg)?;
            println!("{}", r.csv_row());
            eprintln!("  {c}: OMA is {:.1}% above, profile {}", 100.0 * r.oma_excess(), r.report.profile);
        }
    }
    Ok(())
}
