//! Scenario file in, result file out, and an independent re-check.

use sicpower::io::{ResultFile, ScenarioFile};
use sicpower::outer::SearchMode;

const SCENARIO: &str = r#"
version = 1
U = 2
N = 2
rate_factor = 1.0
noise = 1.0
weights = [1.0, 2.0]
rate_min = [1.0, 0.6]
gains = [[[1.0, 0.5], [0.2, 0.3]], [[0.6, 0.1], [0.9, 0.7]]]

[bisection]
epsilon = 0.01
"#;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let file = ScenarioFile::parse(SCENARIO)?;
    let s = file.scenario()?;
    let rep = sicpower::outer::minpic_solve(&s, SearchMode::DualGuided, &file.bisection_config()?)?;
    let text = ResultFile::from_report(&s, &rep, SearchMode::DualGuided)?.to_toml()?;
    print!("{text}");

    let back = ResultFile::parse(&text)?;
    let check = back.verify(&s, 1e-9)?;
    println!("\nre-verified: feasible {}, margins {:?}", check.feasible, check.margin);
    Ok(())
}
