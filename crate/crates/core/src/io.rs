//! TOML scenario and result files.

use serde::{Deserialize, Serialize};

use crate::chain::{total_weighted_power, verify_feasible, FeasibilityReport};
use crate::error::{Error, Result};
use crate::outer::{BisectionConfig, SearchMode, SolveReport};
use crate::profile::DecodingProfile;
use crate::scenario::{AllocationPoint, Scenario, SubStreamId};
use crate::solver::SolverOptions;

pub const FORMAT_VERSION: u32 = 1;
pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

/// Decimal places of powers and rates in a [`ResultFile`].
pub const RESULT_DECIMALS: i32 = 6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum NoiseSpec {
    Scalar(f64),
    Grid(Vec<Vec<f64>>),
}

/// `[r][i]` when there is one block, `[r][i][n]` otherwise.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum GainSpec {
    Single(Vec<Vec<f64>>),
    Blocks(Vec<Vec<Vec<f64>>>),
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverSection {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub feasibility_tol: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gap_tol: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_outer: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_newton: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t0: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mu: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub newton_tol: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BisectionSection {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda_low: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda_high: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda_cap: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub epsilon: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_doublings: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub predicate_tol: Option<f64>,
}

/// On-disk scenario.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    pub version: u32,
    #[serde(rename = "U")]
    pub users: usize,
    #[serde(rename = "N")]
    pub blocks: usize,
    pub rate_factor: f64,
    pub noise: NoiseSpec,
    pub weights: Vec<f64>,
    pub rate_min: Vec<f64>,
    pub gains: GainSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub solver: Option<SolverSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bisection: Option<BisectionSection>,
}

fn check_version(v: u32) -> Result<()> {
    if v != FORMAT_VERSION {
        return Err(Error::Parse(format!("unsupported version {v}, expected {FORMAT_VERSION}")));
    }
    Ok(())
}

fn parse_toml<T: for<'de> Deserialize<'de>>(text: &str) -> Result<T> {
    toml::from_str(text).map_err(|e| Error::Parse(e.message().to_string()))
}

fn to_toml<T: Serialize>(v: &T) -> Result<String> {
    toml::to_string(v).map_err(|e| Error::Parse(e.to_string()))
}

impl ScenarioFile {
    pub fn parse(text: &str) -> Result<Self> {
        let f: ScenarioFile = parse_toml(text)?;
        check_version(f.version)?;
        Ok(f)
    }

    pub fn to_toml(&self) -> Result<String> {
        to_toml(self)
    }

    /// Single-block file with scalar noise when every block shares it.
    pub fn from_scenario(s: &Scenario) -> Self {
        let noise = s.noise_nested();
        let first = noise[0][0];
        let noise = if noise.iter().flatten().all(|v| *v == first) {
            NoiseSpec::Scalar(first)
        } else {
            NoiseSpec::Grid(noise)
        };
        let g = s.gain_nested();
        let gains = if s.blocks() == 1 {
            GainSpec::Single(g.iter().map(|row| row.iter().map(|v| v[0]).collect()).collect())
        } else {
            GainSpec::Blocks(g)
        };
        ScenarioFile {
            version: FORMAT_VERSION,
            users: s.users(),
            blocks: s.blocks(),
            rate_factor: s.rate_factor(),
            noise,
            weights: s.weights().to_vec(),
            rate_min: s.rate_mins().to_vec(),
            gains,
            solver: None,
            bisection: None,
        }
    }

    pub fn scenario(&self) -> Result<Scenario> {
        let (u, nb) = (self.users, self.blocks);
        let gain = match &self.gains {
            GainSpec::Single(g) if nb == 1 => {
                g.iter().map(|row| row.iter().map(|v| vec![*v]).collect()).collect()
            }
            GainSpec::Single(_) => {
                return Err(Error::Shape(format!("gains need a block dimension when N = {nb}")))
            }
            GainSpec::Blocks(g) => g.clone(),
        };
        let noise = match &self.noise {
            NoiseSpec::Scalar(v) => vec![vec![*v; nb]; u],
            NoiseSpec::Grid(g) => g.clone(),
        };
        let shape_ok = gain.len() == u
            && gain.iter().all(|row: &Vec<Vec<f64>>| row.len() == u && row.iter().all(|v| v.len() == nb));
        if !shape_ok {
            return Err(Error::Shape(format!("gains must be {u}x{u}x{nb}")));
        }
        Scenario::new(&gain, &noise, &self.weights, &self.rate_min, self.rate_factor)
    }

    pub fn solver_options(&self) -> SolverOptions {
        let mut o = SolverOptions::default();
        if let Some(s) = &self.solver {
            o.feasibility_tol = s.feasibility_tol.unwrap_or(o.feasibility_tol);
            o.gap_tol = s.gap_tol.unwrap_or(o.gap_tol);
            o.max_outer = s.max_outer.unwrap_or(o.max_outer);
            o.max_newton = s.max_newton.unwrap_or(o.max_newton);
            o.t0 = s.t0.unwrap_or(o.t0);
            o.mu = s.mu.unwrap_or(o.mu);
            o.newton_tol = s.newton_tol.unwrap_or(o.newton_tol);
        }
        o
    }

    pub fn bisection_config(&self) -> Result<BisectionConfig> {
        let mut c = BisectionConfig { solver: self.solver_options(), ..Default::default() };
        if let Some(b) = &self.bisection {
            c.lambda_low = b.lambda_low.unwrap_or(c.lambda_low);
            c.lambda_high = b.lambda_high.unwrap_or(c.lambda_high);
            c.lambda_cap = b.lambda_cap.unwrap_or(c.lambda_cap);
            c.epsilon = b.epsilon.unwrap_or(c.epsilon);
            c.max_doublings = b.max_doublings.unwrap_or(c.max_doublings);
            c.predicate_tol = b.predicate_tol.unwrap_or(c.predicate_tol);
        }
        c.validate()?;
        Ok(c)
    }
}

/// Scenario fields echoed into a result for a shape check at verification.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioDigest {
    #[serde(rename = "U")]
    pub users: usize,
    #[serde(rename = "N")]
    pub blocks: usize,
    pub rate_factor: f64,
    pub weights: Vec<f64>,
    pub rate_min: Vec<f64>,
}

impl ScenarioDigest {
    pub fn of(s: &Scenario) -> Self {
        ScenarioDigest {
            users: s.users(),
            blocks: s.blocks(),
            rate_factor: s.rate_factor(),
            weights: s.weights().to_vec(),
            rate_min: s.rate_mins().to_vec(),
        }
    }

    pub fn check(&self, s: &Scenario) -> Result<()> {
        if self.users != s.users() || self.blocks != s.blocks() {
            return Err(Error::Shape(format!(
                "result is for U = {}, N = {} but the scenario has U = {}, N = {}",
                self.users,
                self.blocks,
                s.users(),
                s.blocks()
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Diagnostics {
    pub profiles_tried: usize,
    pub profiles_feasible: usize,
    pub bisection_steps: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub relaxed_total: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_exactness_gap: Option<f64>,
    /// Uniform factor applied to the powers so they still meet the targets
    /// after rounding.
    pub rounding_scale: f64,
}

/// On-disk solution.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ResultFile {
    pub version: u32,
    pub tool_version: String,
    pub status: String,
    pub mode: String,
    pub total: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda: Option<f64>,
    pub duals: Vec<f64>,
    pub rates: Vec<f64>,
    /// Per receiver, 1-based `[transmitter, companion]` pairs in decoding order.
    pub profile: Vec<Vec<[usize; 2]>>,
    pub powers: Vec<Vec<Vec<f64>>>,
    pub aux: Vec<Vec<f64>>,
    pub scenario: ScenarioDigest,
    pub diagnostics: Diagnostics,
}

pub fn round_to(v: f64, decimals: i32) -> f64 {
    let k = 10f64.powi(decimals);
    (v * k).round() / k
}

fn round_nested(p: &[Vec<Vec<f64>>]) -> Vec<Vec<Vec<f64>>> {
    p.iter()
        .map(|r| r.iter().map(|v| v.iter().map(|x| round_to(*x, RESULT_DECIMALS)).collect()).collect())
        .collect()
}

fn zero_rates(u: usize, nb: usize) -> Vec<Vec<Vec<f64>>> {
    vec![vec![vec![0.0; nb]; u]; u]
}

/// Rounds the powers of `pt` to [`RESULT_DECIMALS`], scaling them up first by
/// the smallest factor `1 + 1e-9·2^k` that keeps every rate target met.
pub fn quantize_powers(
    s: &Scenario,
    prof: &DecodingProfile,
    pt: &AllocationPoint,
) -> Result<(Vec<Vec<Vec<f64>>>, f64)> {
    let (u, nb) = (s.users(), s.blocks());
    let aux = vec![vec![0.0; nb]; u];
    let mut scale = 1.0;
    for k in 0..60 {
        let mut p = pt.clone();
        p.scale_powers(scale);
        let q = round_nested(&p.power_nested());
        let probe = AllocationPoint::from_nested(&q, &zero_rates(u, nb), &aux)?;
        if verify_feasible(s, prof, &probe, 1e-12)?.min_margin() >= 0.0 {
            return Ok((q, scale));
        }
        scale = 1.0 + 1e-9 * 2f64.powi(k);
    }
    Err(Error::Numeric("rounded powers cannot meet the rate targets".into()))
}

pub fn mode_name(m: SearchMode) -> &'static str {
    match m {
        SearchMode::Exhaustive => "exhaustive",
        SearchMode::DualGuided => "dual-guided",
    }
}

impl ResultFile {
    pub fn from_report(s: &Scenario, rep: &SolveReport, mode: SearchMode) -> Result<Self> {
        let (powers, scale) = quantize_powers(s, &rep.profile, &rep.point)?;
        let (u, nb) = (s.users(), s.blocks());
        let pt = AllocationPoint::from_nested(&powers, &zero_rates(u, nb), &vec![vec![0.0; nb]; u])?;
        let check = verify_feasible(s, &rep.profile, &pt, 1e-12)?;
        let r6 = |v: &[f64]| v.iter().map(|x| round_to(*x, RESULT_DECIMALS)).collect::<Vec<_>>();
        Ok(ResultFile {
            version: FORMAT_VERSION,
            tool_version: TOOL_VERSION.to_string(),
            status: "feasible".into(),
            mode: mode_name(mode).into(),
            total: round_to(total_weighted_power(s, &pt), RESULT_DECIMALS),
            lambda: rep.lambda,
            duals: rep.duals.clone(),
            rates: r6(&check.achieved),
            profile: profile_pairs(&rep.profile),
            powers,
            aux: rep.point.aux_nested().iter().map(|v| r6(v)).collect(),
            scenario: ScenarioDigest::of(s),
            diagnostics: Diagnostics {
                profiles_tried: rep.search.len(),
                profiles_feasible: rep.search.iter().filter(|o| o.total.is_some()).count(),
                bisection_steps: rep.bisection.len(),
                relaxed_total: rep.relaxed_total,
                max_exactness_gap: rep.max_gap(),
                rounding_scale: scale,
            },
        })
    }

    pub fn parse(text: &str) -> Result<Self> {
        let f: ResultFile = parse_toml(text)?;
        check_version(f.version)?;
        Ok(f)
    }

    pub fn to_toml(&self) -> Result<String> {
        to_toml(self)
    }

    pub fn decoding_profile(&self) -> Result<DecodingProfile> {
        let order = self
            .profile
            .iter()
            .map(|rx| {
                rx.iter()
                    .map(|&[i, j]| {
                        if i == 0 || j == 0 {
                            return Err(Error::Parse("profile entries are 1-based".into()));
                        }
                        Ok(SubStreamId::new(i - 1, j - 1))
                    })
                    .collect::<Result<Vec<_>>>()
            })
            .collect::<Result<Vec<_>>>()?;
        DecodingProfile::new(order)
    }

    /// Recomputes feasibility from the stored powers alone.
    pub fn verify(&self, s: &Scenario, tol: f64) -> Result<FeasibilityReport> {
        self.scenario.check(s)?;
        let prof = self.decoding_profile()?;
        if prof.users() != s.users() {
            return Err(Error::Shape("profile size differs from the scenario".into()));
        }
        let (u, nb) = (s.users(), s.blocks());
        let pt = AllocationPoint::from_nested(&self.powers, &zero_rates(u, nb), &vec![vec![0.0; nb]; u])?;
        pt.check_shape(s)?;
        verify_feasible(s, &prof, &pt, tol)
    }
}

pub fn profile_pairs(p: &DecodingProfile) -> Vec<Vec<[usize; 2]>> {
    p.orders()
        .iter()
        .map(|rx| rx.iter().map(|s| [s.tx + 1, s.companion + 1]).collect())
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    const DEMO: &str = r#"
version = 1
U = 2
N = 1
rate_factor = 1.0
noise = 1.0
weights = [1.0, 1.0]
rate_min = [0.5, 0.5]
gains = [[0.4, 0.0], [0.9, 1.0]]
"#;

    #[test]
    fn parses_single_block_gains() {
        let f = ScenarioFile::parse(DEMO).unwrap();
        let s = f.scenario().unwrap();
        assert_eq!(s.users(), 2);
        assert_eq!(s.gain(1, 0, 0), 0.9);
        assert_eq!(s.noise(1, 0), 1.0);
    }

    #[test]
    fn integer_literals_are_accepted() {
        let text = DEMO.replace("noise = 1.0", "noise = 1").replace("rate_factor = 1.0", "rate_factor = 1");
        assert!(ScenarioFile::parse(&text).unwrap().scenario().is_ok());
    }

    #[test]
    fn unknown_key_is_named() {
        let err = ScenarioFile::parse(&format!("{DEMO}bogus_key = 3\n")).unwrap_err();
        assert!(err.to_string().contains("bogus_key"), "{err}");
        let err = ScenarioFile::parse(&format!("{DEMO}[solver]\nmax_steps = 3\n")).unwrap_err();
        assert!(err.to_string().contains("max_steps"), "{err}");
    }

    #[test]
    fn wrong_version_rejected() {
        let err = ScenarioFile::parse(&DEMO.replace("version = 1", "version = 2")).unwrap_err();
        assert!(matches!(err, Error::Parse(_)));
    }

    #[test]
    fn block_dimension_required_for_many_blocks() {
        let f = ScenarioFile::parse(&DEMO.replace("N = 1", "N = 2")).unwrap();
        assert!(matches!(f.scenario(), Err(Error::Shape(_))));
    }

    #[test]
    fn scenario_round_trip() {
        let s = ScenarioFile::parse(DEMO).unwrap().scenario().unwrap();
        let text = ScenarioFile::from_scenario(&s).to_toml().unwrap();
        let back = ScenarioFile::parse(&text).unwrap().scenario().unwrap();
        assert_eq!(s, back);
    }

    #[test]
    fn options_override_defaults() {
        let text = format!("{DEMO}[solver]\nmax_newton = 7\n[bisection]\nepsilon = 0.01\n");
        let c = ScenarioFile::parse(&text).unwrap().bisection_config().unwrap();
        assert_eq!(c.solver.max_newton, 7);
        assert_eq!(c.epsilon, 0.01);
        assert_eq!(c.lambda_high, BisectionConfig::default().lambda_high);
    }

    #[test]
    fn rounding_keeps_targets() {
        let s = ScenarioFile::parse(DEMO).unwrap().scenario().unwrap();
        let prof = crate::reference::tin_profile(2);
        let mut pt = AllocationPoint::for_scenario(&s);
        // TIN fixed point for this channel, to full precision.
        let p1 = (0.5f64.exp2() - 1.0) / 0.16;
        let p2 = (1.0 + 0.81 * p1) * (0.5f64.exp2() - 1.0);
        pt.set_power(SubStreamId::new(0, 0), 0, p1);
        pt.set_power(SubStreamId::new(1, 1), 0, p2);
        let (q, scale) = quantize_powers(&s, &prof, &pt).unwrap();
        assert!(scale >= 1.0 && scale < 1.0 + 1e-5);
        let probe = AllocationPoint::from_nested(&q, &zero_rates(2, 1), &[vec![0.0], vec![0.0]]).unwrap();
        assert!(verify_feasible(&s, &prof, &probe, 1e-12).unwrap().min_margin() >= 0.0);
    }
}
