//! Penalty bisection around the relaxation and the search over profiles.

use log::debug;

use crate::chain::{achieved_user_rates, stream_rates, total_weighted_power, verify_feasible};
use crate::error::{Error, Result};
use crate::order::{
    block_structured_profiles, collapse_dof, dual_rank_profile, enumerate_profiles, AggregationMap,
    DualVector, TieRule,
};
use crate::polish::{polish, split_starts, PolishConfig};
use crate::profile::DecodingProfile;
use crate::program::ConstraintTag;
use crate::relaxation::{build_relaxation, exactness_gap, PenaltyWeight, Relaxation};
use crate::scenario::{AllocationPoint, Scenario};
use crate::solver::{solve, solve_from, SolveStatus, SolverOptions, SolverResult};

/// Bracket and stopping rule for the penalty search.
#[derive(Debug, Clone, PartialEq)]
pub struct BisectionConfig {
    pub lambda_low: f64,
    pub lambda_high: f64,
    pub lambda_cap: f64,
    pub epsilon: f64,
    pub max_doublings: usize,
    /// Rate shortfall (bits) still accepted by the predicate; accepted points
    /// are then scaled up until the shortfall vanishes.
    pub predicate_tol: f64,
    pub solver: SolverOptions,
}

impl Default for BisectionConfig {
    fn default() -> Self {
        BisectionConfig {
            lambda_low: 0.0,
            lambda_high: 64.0,
            lambda_cap: (1u64 << 20) as f64,
            epsilon: 1e-3,
            max_doublings: 25,
            predicate_tol: 1e-6,
            solver: SolverOptions::default(),
        }
    }
}

impl BisectionConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.lambda_low >= 0.0 && self.lambda_low < self.lambda_high) {
            return Err(Error::Argument(format!(
                "need 0 ≤ lambda_low < lambda_high, got {} and {}",
                self.lambda_low, self.lambda_high
            )));
        }
        if !(self.lambda_cap >= self.lambda_high) || !self.lambda_cap.is_finite() {
            return Err(Error::Argument("lambda cap must be finite and at least lambda_high".into()));
        }
        if !(self.epsilon > 0.0) {
            return Err(Error::Argument(format!("epsilon must be positive, got {}", self.epsilon)));
        }
        if !(self.predicate_tol >= 0.0) {
            return Err(Error::Argument("predicate tolerance must be nonnegative".into()));
        }
        self.solver.validate()
    }
}

/// One evaluation of the predicate.
#[derive(Debug, Clone, PartialEq)]
pub struct BisectionStep {
    pub lambda: f64,
    pub feasible: bool,
    /// Bracket after this evaluation.
    pub low: f64,
    pub high: f64,
}

/// Result of [`bisect_lambda`].
#[derive(Debug, Clone)]
pub struct BisectionOutcome {
    pub lambda: f64,
    pub result: SolverResult,
    pub relaxation: Relaxation,
    /// Verified point: relaxation powers (scaled up if needed), exact rates.
    pub point: AllocationPoint,
    pub steps: Vec<BisectionStep>,
}

struct Evaluation {
    feasible: bool,
    result: SolverResult,
    relaxation: Relaxation,
    point: AllocationPoint,
}

fn evaluate(
    s: &Scenario,
    prof: &DecodingProfile,
    agg: &AggregationMap,
    lambda: f64,
    cfg: &BisectionConfig,
    hint: Option<&[f64]>,
) -> Result<Evaluation> {
    let relaxation = build_relaxation(s, prof, agg, PenaltyWeight::new(lambda)?)?;
    let result = match hint {
        Some(h) => solve_from(&relaxation.program, &cfg.solver, h)?,
        None => solve(&relaxation.program, &cfg.solver)?,
    };
    match result.status {
        SolveStatus::Infeasible => {
            return Err(Error::Infeasible(format!("relaxation for {prof} has no feasible point")))
        }
        SolveStatus::NumericFailure => {
            return Err(Error::Solver(format!("numeric failure at λ = {lambda}")))
        }
        SolveStatus::Optimal | SolveStatus::MaxIter => {}
    }
    let recovered = relaxation.point(&result.x)?;
    let point = stream_rates(s, prof, &recovered)?;
    let margin = achieved_user_rates(s, prof, &point)?
        .iter()
        .zip(s.rate_mins())
        .map(|(a, b)| a - b)
        .fold(f64::INFINITY, f64::min);
    Ok(Evaluation { feasible: margin >= -cfg.predicate_tol, result, relaxation, point })
}

/// Smallest `α ≥ 1` (to bisection precision) such that scaling every power
/// by `α` meets every rate target exactly. Scaling all powers up raises every
/// SINR, so achieved rates grow monotonically in `α`.
pub fn scale_to_targets(s: &Scenario, prof: &DecodingProfile, pt: &AllocationPoint) -> Result<AllocationPoint> {
    let short = |a: f64| -> Result<bool> {
        let mut q = pt.clone();
        q.scale_powers(a);
        Ok(achieved_user_rates(s, prof, &q)?
            .iter()
            .zip(s.rate_mins())
            .any(|(got, want)| got < want))
    };
    if !short(1.0)? {
        return stream_rates(s, prof, pt);
    }
    let mut hi = 1.0 + 1e-9;
    while short(hi)? {
        hi = 1.0 + 2.0 * (hi - 1.0);
        if hi > 2.0 {
            return Err(Error::Infeasible("rate shortfall too large to repair by scaling".into()));
        }
    }
    let mut lo = 1.0;
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        if short(mid)? {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let mut q = pt.clone();
    q.scale_powers(hi);
    stream_rates(s, prof, &q)
}

/// Finds the smallest penalty weight whose relaxed solution meets every rate
/// target under the exact SIC model of `prof`.
pub fn bisect_lambda(
    s: &Scenario,
    prof: &DecodingProfile,
    agg: &AggregationMap,
    cfg: &BisectionConfig,
) -> Result<BisectionOutcome> {
    cfg.validate()?;
    let mut steps = Vec::new();
    let mut low = cfg.lambda_low;
    let at_low = evaluate(s, prof, agg, low, cfg, None)?;
    // Neighbouring weights have nearby optima; each solve starts from the last.
    let mut hint = at_low.result.x.clone();
    steps.push(BisectionStep { lambda: low, feasible: at_low.feasible, low, high: cfg.lambda_high });
    if at_low.feasible {
        return finish(s, prof, low, at_low, steps);
    }

    let mut high = cfg.lambda_high;
    let mut doublings = 0;
    let mut best = loop {
        let e = evaluate(s, prof, agg, high, cfg, Some(&hint))?;
        hint.clone_from(&e.result.x);
        if e.feasible {
            steps.push(BisectionStep { lambda: high, feasible: true, low, high });
            break e;
        }
        low = high;
        steps.push(BisectionStep { lambda: high, feasible: false, low, high: high * 2.0 });
        doublings += 1;
        high *= 2.0;
        if doublings > cfg.max_doublings || high > cfg.lambda_cap {
            return Err(Error::Infeasible(format!(
                "no penalty weight up to {} makes {prof} feasible",
                cfg.lambda_cap
            )));
        }
    };
    while high - low >= cfg.epsilon {
        let mid = 0.5 * (low + high);
        let e = evaluate(s, prof, agg, mid, cfg, Some(&hint))?;
        hint.clone_from(&e.result.x);
        let feasible = e.feasible;
        if feasible {
            high = mid;
            best = e;
        } else {
            low = mid;
        }
        steps.push(BisectionStep { lambda: mid, feasible, low, high });
    }
    finish(s, prof, high, best, steps)
}

fn finish(
    s: &Scenario,
    prof: &DecodingProfile,
    lambda: f64,
    e: Evaluation,
    steps: Vec<BisectionStep>,
) -> Result<BisectionOutcome> {
    let mut point = scale_to_targets(s, prof, &e.point)?;
    for n in 0..s.blocks() {
        for r in 0..s.users() {
            point.set_aux(r, n, e.point.aux(r, n));
        }
    }
    Ok(BisectionOutcome { lambda, result: e.result, relaxation: e.relaxation, point, steps })
}

/// Profile search strategy.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SearchMode {
    Exhaustive,
    DualGuided,
}

/// Outcome for one candidate profile.
#[derive(Debug, Clone, PartialEq)]
pub struct ProfileOutcome {
    pub profile: DecodingProfile,
    pub lambda: Option<f64>,
    pub total: Option<f64>,
    pub note: String,
}

/// Final report of [`minpic_solve`].
#[derive(Debug, Clone)]
pub struct SolveReport {
    pub point: AllocationPoint,
    pub profile: DecodingProfile,
    /// Penalty weight found by bisection for the winning profile, if the
    /// search succeeded there.
    pub lambda: Option<f64>,
    /// Rate-target duals per user: from the relaxation at `lambda` when
    /// available, else from the last tangent program.
    pub duals: Vec<f64>,
    pub total: f64,
    /// Total of the bisected point before refinement.
    pub relaxed_total: Option<f64>,
    /// Recomputed from powers under `profile`.
    pub achieved: Vec<f64>,
    /// Exactness gap per receiver and block at the relaxation solution.
    pub gaps: Option<Vec<Vec<f64>>>,
    pub search: Vec<ProfileOutcome>,
    pub bisection: Vec<BisectionStep>,
}

impl SolveReport {
    pub fn max_gap(&self) -> Option<f64> {
        self.gaps
            .as_ref()
            .map(|g| g.iter().flatten().copied().fold(0.0_f64, |a, v| a.max(v.abs())))
    }
}

/// Candidate solution for one profile.
#[derive(Debug, Clone)]
struct Candidate {
    profile: DecodingProfile,
    bisection: Option<BisectionOutcome>,
    point: AllocationPoint,
    total: f64,
    refined_duals: Vec<f64>,
}

impl Candidate {
    fn duals(&self, users: usize) -> Vec<f64> {
        match &self.bisection {
            Some(b) => rate_duals(b, users),
            None => self.refined_duals.clone(),
        }
    }
}

fn rate_duals(out: &BisectionOutcome, users: usize) -> Vec<f64> {
    let mut d = vec![0.0; users];
    for (c, v) in out.relaxation.program.constraints.iter().zip(&out.result.duals) {
        if let ConstraintTag::RateTarget { user } = c.tag {
            d[user] = *v;
        }
    }
    d
}

/// Rate-split lattice resolution by user count.
const SPLIT_STEPS: [usize; 5] = [1, 1, 10, 2, 1];
/// Power above which a rate split counts as unreachable.
const SPLIT_CAP: f64 = 1e9;

fn try_profile(
    s: &Scenario,
    prof: &DecodingProfile,
    cfg: &BisectionConfig,
    log: &mut Vec<ProfileOutcome>,
) -> Result<Option<Candidate>> {
    let agg = collapse_dof(s, prof)?;
    let polish_cfg = PolishConfig { solver: cfg.solver.clone(), ..Default::default() };
    let (bisection, note) = match bisect_lambda(s, prof, &agg, cfg) {
        Ok(out) => (Some(out), String::new()),
        Err(Error::Infeasible(msg)) | Err(Error::Solver(msg)) => {
            debug!("{prof}: {msg}");
            (None, msg)
        }
        Err(e) => return Err(e),
    };
    // Refine the cheaper of the bisected point and the best rate-split point.
    let steps = SPLIT_STEPS[s.users().min(SPLIT_STEPS.len() - 1)];
    let start = bisection
        .iter()
        .map(|b| b.point.clone())
        .chain(split_starts(s, prof, steps, SPLIT_CAP).into_iter().take(1))
        .min_by(|a, b| total_weighted_power(s, a).total_cmp(&total_weighted_power(s, b)));
    let refined = match start {
        Some(start) => {
            let r = polish(s, prof, &start, &polish_cfg)?;
            debug!("{prof}: start {:.6}, refined {:.6}", total_weighted_power(s, &start), r.total);
            Some(r)
        }
        None => None,
    };
    let Some(refined) = refined else {
        log.push(ProfileOutcome { profile: prof.clone(), lambda: None, total: None, note });
        return Ok(None);
    };
    log.push(ProfileOutcome {
        profile: prof.clone(),
        lambda: bisection.as_ref().map(|b| b.lambda),
        total: Some(refined.total),
        note,
    });
    Ok(Some(Candidate {
        profile: prof.clone(),
        bisection,
        point: refined.point,
        total: refined.total,
        refined_duals: refined.duals,
    }))
}

/// Keeps the cheaper candidate; ties go to the lexicographically smaller profile.
fn better(a: Option<Candidate>, b: Candidate) -> Option<Candidate> {
    match a {
        None => Some(b),
        Some(a) => {
            let tol = 1e-9 * (1.0 + a.total.abs());
            if b.total < a.total - tol || ((b.total - a.total).abs() <= tol && b.profile < a.profile) {
                Some(b)
            } else {
                Some(a)
            }
        }
    }
}

/// Largest user count for exhaustive search.
pub const EXHAUSTIVE_MAX_USERS: usize = 3;

/// Candidate profiles of the exhaustive search: every profile for `U ≤ 2`,
/// full-decode profiles with per-receiver user rankings for `U = 3`.
pub fn exhaustive_candidates(s: &Scenario) -> Result<Vec<DecodingProfile>> {
    match s.users() {
        0..=2 => Ok(enumerate_profiles(s, true)?.collect()),
        3 => block_structured_profiles(s),
        u => Err(Error::Capacity { what: "exhaustive search", bound: EXHAUSTIVE_MAX_USERS, got: u }),
    }
}

/// Runs the full minimum-power pipeline.
pub fn minpic_solve(s: &Scenario, mode: SearchMode, cfg: &BisectionConfig) -> Result<SolveReport> {
    cfg.validate()?;
    let mut log = Vec::new();
    let mut best: Option<Candidate> = None;
    match mode {
        SearchMode::Exhaustive => {
            for prof in exhaustive_candidates(s)? {
                if let Some(c) = try_profile(s, &prof, cfg, &mut log)? {
                    best = better(best, c);
                }
            }
        }
        SearchMode::DualGuided => {
            let mut prof = DecodingProfile::block_structured(s.users(), &direct_gain_ranking(s))?;
            let mut seen: Vec<DecodingProfile> = Vec::new();
            for _ in 0..10 {
                if seen.contains(&prof) {
                    break;
                }
                seen.push(prof.clone());
                let Some(c) = try_profile(s, &prof, cfg, &mut log)? else {
                    break;
                };
                let duals = DualVector::new(c.duals(s.users()).iter().map(|d| d.max(0.0)).collect())?;
                let next = dual_rank_profile(s, &duals, TieRule::LowerIndexFirst)?;
                best = better(best, c);
                prof = next;
            }
        }
    }
    let Some(c) = best else {
        return Err(Error::Infeasible("no profile yields a verified feasible point".into()));
    };
    report(s, c, log)
}

/// Users ordered by descending direct gain (summed over blocks), ties by index.
/// The strongest user is decoded first.
pub fn direct_gain_ranking(s: &Scenario) -> Vec<usize> {
    let g: Vec<f64> = (0..s.users())
        .map(|u| (0..s.blocks()).map(|n| s.power_gain(u, u, n)).sum())
        .collect();
    let mut users: Vec<usize> = (0..s.users()).collect();
    users.sort_by(|&a, &b| g[b].total_cmp(&g[a]).then(a.cmp(&b)));
    users
}

fn report(s: &Scenario, c: Candidate, search: Vec<ProfileOutcome>) -> Result<SolveReport> {
    let rep = verify_feasible(s, &c.profile, &c.point, 1e-9)?;
    if rep.min_margin() < 0.0 {
        return Err(Error::Solver("winning point failed exact verification".into()));
    }
    let (gaps, relaxed_total) = match &c.bisection {
        Some(b) => {
            let relaxed = b.relaxation.point(&b.result.x)?;
            (
                Some(exactness_gap(s, &c.profile, &relaxed)?),
                Some(total_weighted_power(s, &b.point)),
            )
        }
        None => (None, None),
    };
    Ok(SolveReport {
        duals: c.duals(s.users()),
        total: c.total,
        relaxed_total,
        achieved: rep.achieved,
        gaps,
        search,
        lambda: c.bisection.as_ref().map(|b| b.lambda),
        bisection: c.bisection.map(|b| b.steps).unwrap_or_default(),
        point: c.point,
        profile: c.profile,
    })
}
