//! The barrier solver on a hand-built program: maximise a rate bought with
//! linear cost, `max 2b − p` subject to `b ≤ log2(1 + p)`.

use sicpower::program::{Constraint, ConstraintTag, ConvexProgram, VarRole};
use sicpower::scenario::SubStreamId;
use sicpower::solver::{duality_report, solve, SolverOptions};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut prog = ConvexProgram::new(vec![
        VarRole::Power { group: 0, block: 0 },
        VarRole::Rate { stream: SubStreamId::new(0, 0), block: 0 },
    ]);
    prog.objective = vec![1.0, -2.0];
    prog.constraints.push(Constraint::log_affine(ConstraintTag::Other, vec![(1, 1.0)], 0.0, 1.0, vec![(0, 1.0)], 1.0));
    let res = solve(&prog, &SolverOptions::default())?;
    // Stationarity gives 1 + p = 2/ln 2.
    let p = 2.0 / std::f64::consts::LN_2 - 1.0;
    println!("p = {:.8} (closed form {p:.8}), b = {:.8}", res.x[0], res.x[1]);
    println!("newton steps {}, {:?}", res.newton_steps, duality_report(&prog, &res)?);
    Ok(())
}
