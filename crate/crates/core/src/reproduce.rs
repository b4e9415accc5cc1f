//! Built-in single-tone benchmark cases and the comparison table.

use std::fmt;
use std::str::FromStr;

use crate::chain::verify_feasible;
use crate::error::{Error, Result};
use crate::outer::{minpic_solve, BisectionConfig, SearchMode, SolveReport};
use crate::reference::{
    oma_total_power, private_allocation, tin_fixed_point, tin_profile, waterfill_total,
    OmaAccounting, TinOutcome,
};
use crate::scenario::Scenario;

/// Common target and noise of every built-in case.
pub const CASE_RATE_MIN: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BenchCase {
    Demo2,
    Demo3,
    A,
    B,
    C,
    D,
    E,
}

impl BenchCase {
    pub const ALL: [BenchCase; 7] = [
        BenchCase::Demo2,
        BenchCase::Demo3,
        BenchCase::A,
        BenchCase::B,
        BenchCase::C,
        BenchCase::D,
        BenchCase::E,
    ];

    pub fn name(self) -> &'static str {
        match self {
            BenchCase::Demo2 => "demo2",
            BenchCase::Demo3 => "demo3",
            BenchCase::A => "A",
            BenchCase::B => "B",
            BenchCase::C => "C",
            BenchCase::D => "D",
            BenchCase::E => "E",
        }
    }

    /// Published total transmit power.
    pub fn published_total(self) -> f64 {
        match self {
            BenchCase::Demo2 => 23.02,
            BenchCase::Demo3 => 5.53,
            BenchCase::A => 1.76,
            BenchCase::B => 2.00,
            BenchCase::C => 4.33,
            BenchCase::D => 2.43,
            BenchCase::E => 4.55,
        }
    }

    /// Amplitude matrix `h[r][i]` (transmitter `i` to receiver `r`).
    pub fn channel(self) -> Vec<Vec<f64>> {
        let cross = |u: usize, off: f64| -> Vec<Vec<f64>> {
            (0..u).map(|r| (0..u).map(|i| if r == i { 1.0 } else { off }).collect()).collect()
        };
        match self {
            BenchCase::Demo2 => vec![vec![0.4, 0.0], vec![0.9, 1.0]],
            BenchCase::Demo3 => vec![
                vec![1.0, 0.9, 0.001],
                vec![0.001, 1.0, 0.001],
                vec![0.001, 0.001, 1.0],
            ],
            BenchCase::A => cross(2, 1e-6),
            BenchCase::B => cross(2, 1e-2),
            BenchCase::C => {
                let mut h = cross(2, 0.0);
                h[0][1] = 0.9;
                h[1][0] = 1e-5;
                h
            }
            BenchCase::D => cross(3, 1e-5),
            BenchCase::E => {
                let mut h = cross(3, 1e-3);
                h[0][1] = 0.9;
                h
            }
        }
    }

    pub fn scenario(self, rate_factor: f64) -> Result<Scenario> {
        Scenario::single_tone(&self.channel(), CASE_RATE_MIN, rate_factor)
    }
}

impl fmt::Display for BenchCase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for BenchCase {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        BenchCase::ALL
            .into_iter()
            .find(|c| c.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::Argument(format!("unknown case `{s}`")))
    }
}

/// One row of the comparison table.
#[derive(Debug, Clone)]
pub struct Reproduction {
    pub case: BenchCase,
    pub rate_factor: f64,
    pub report: SolveReport,
    pub oma_total: f64,
    /// `None` when the interference-as-noise iteration diverges.
    pub tin_total: Option<f64>,
    pub waterfill_total: f64,
    /// Whether the water-filling powers meet the targets under interference.
    pub waterfill_feasible: bool,
}

impl Reproduction {
    pub fn our_total(&self) -> f64 {
        self.report.total
    }

    /// Relative excess of the orthogonal-access total over ours.
    pub fn oma_excess(&self) -> f64 {
        self.oma_total / self.report.total - 1.0
    }

    /// Baselines that beat our total by more than a relative `1e-6`.
    pub fn beaten_by(&self) -> Vec<&'static str> {
        let ours = self.report.total;
        let mut v = Vec::new();
        let mut check = |name, total: Option<f64>| {
            if let Some(t) = total {
                if ours > t * (1.0 + 1e-6) {
                    v.push(name);
                }
            }
        };
        check("oma", Some(self.oma_total));
        check("tin", self.tin_total);
        check("waterfill", self.waterfill_feasible.then_some(self.waterfill_total));
        v
    }

    pub fn verdict(&self) -> String {
        let b = self.beaten_by();
        if b.is_empty() {
            "dominates".into()
        } else {
            format!("beaten-by-{}", b.join("+"))
        }
    }

    pub fn csv_row(&self) -> String {
        let tin = self.tin_total.map(|t| format!("{t:.4}")).unwrap_or_default();
        format!(
            "{},{:.2},{:.4},{:.4},{},{:.4},{}",
            self.case,
            self.case.published_total(),
            self.our_total(),
            self.oma_total,
            tin,
            self.waterfill_total,
            self.verdict()
        )
    }
}

pub const CSV_HEADER: &str = "case,paper_total,our_total,oma_total,tin_total,waterfill_total,verdict";

/// Solves one case exhaustively and evaluates every baseline.
pub fn reproduce_case(case: BenchCase, rate_factor: f64, cfg: &BisectionConfig) -> Result<Reproduction> {
    let s = case.scenario(rate_factor)?;
    let report = minpic_solve(&s, SearchMode::Exhaustive, cfg)?;
    let oma_total = oma_total_power(&s, OmaAccounting::Average)?;
    let tin_total = match tin_fixed_point(&s, 10_000, 1e-12)? {
        TinOutcome::Converged { power, .. } => {
            Some(power.iter().enumerate().map(|(u, p)| s.weight(u) * p.iter().sum::<f64>()).sum())
        }
        TinOutcome::Diverged { .. } => None,
    };
    let (waterfill_total, wf_power) = waterfill_total(&s)?;
    let wf_point = private_allocation(&s, &wf_power);
    let waterfill_feasible = verify_feasible(&s, &tin_profile(s.users()), &wf_point, 1e-9)?.feasible;
    Ok(Reproduction { case, rate_factor, report, oma_total, tin_total, waterfill_total, waterfill_feasible })
}
