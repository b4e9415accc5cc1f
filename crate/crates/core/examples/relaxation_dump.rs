//! Build the relaxed program for one profile, solve it and report the
//! optimality certificates and the exactness gap.

use sicpower::order::collapse_dof;
use sicpower::profile::DecodingProfile;
use sicpower::relaxation::{build_relaxation, exactness_gap, PenaltyWeight};
use sicpower::reproduce::BenchCase;
use sicpower::solver::{duality_report, solve, SolverOptions};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let s = BenchCase::Demo2.scenario(1.0)?;
    let prof = DecodingProfile::block_structured(2, &[0, 1])?;
    let agg = collapse_dof(&s, &prof)?;
    println!("profile {prof}: {} power groups", agg.len());

    let rel = build_relaxation(&s, &prof, &agg, PenaltyWeight::new(2.0)?)?;
    print!("{}", rel.program.dump());

    let opts = SolverOptions { trace: true, ..Default::default() };
    let res = solve(&rel.program, &opts)?;
    print!("{}", res.trace_text());
    println!("status {:?}, objective {:.6}", res.status, res.objective);

    let d = duality_report(&rel.program, &res)?;
    println!("gap {:.1e}, stationarity {:.1e}, complementarity {:.1e}", d.gap, d.stationarity, d.max_complementary);
    println!("exactness gap {:?}", exactness_gap(&s, &prof, &rel.point(&res.x)?)?);
    Ok(())
}
