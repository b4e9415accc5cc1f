//! Solve the two-user demo channel and print the power grid and result file.

use sicpower::io::ResultFile;
use sicpower::outer::{minpic_solve, BisectionConfig, SearchMode};
use sicpower::reproduce::BenchCase;
use sicpower::scenario::SubStreamId;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let s = BenchCase::Demo2.scenario(1.0)?;
    let rep = minpic_solve(&s, SearchMode::Exhaustive, &BisectionConfig::default())?;

    println!("profile  {}", rep.profile);
    println!("lambda*  {:?}", rep.lambda);
    for i in 0..2 {
        let row: Vec<String> =
            (0..2).map(|j| format!("{:8.4}", rep.point.power(SubStreamId::new(i, j), 0))).collect();
        println!("user {}  {}", i + 1, row.join(" "));
    }
    println!("rates    {:?}", rep.achieved);
    println!("total    {:.6}\n", rep.total);

    print!("{}", ResultFile::from_report(&s, &rep, SearchMode::Exhaustive)?.to_toml()?);
    Ok(())
}
