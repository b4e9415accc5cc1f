//! Baselines and a brute-force grid oracle.

use crate::chain::{log2_1p, total_weighted_power};
use crate::error::{Error, Result};
use crate::order::enumerate_profiles;
use crate::profile::DecodingProfile;
use crate::scenario::{all_streams, AllocationPoint, Scenario, SubStreamId};

/// Power accounting for the orthogonal-access baseline.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum OmaAccounting {
    /// Energy averaged over the frame: each user is active `1/U` of the time.
    #[default]
    Average,
    /// Power drawn while the user's slot is active.
    Peak,
}

/// Weighted power of time-division access with equal shares `1/U`.
pub fn oma_total_power(s: &Scenario, accounting: OmaAccounting) -> Result<f64> {
    single_block(s, "orthogonal-access baseline")?;
    let u = s.users() as f64;
    let rho = s.rate_factor();
    let mut total = 0.0;
    for user in 0..s.users() {
        let g2 = s.power_gain(user, user, 0);
        let b = s.rate_min(user);
        if b == 0.0 {
            continue;
        }
        if g2 == 0.0 {
            return Err(Error::Infeasible(format!("user {} has no direct gain", user + 1)));
        }
        let peak = s.noise(user, 0) * ((u * b / rho).exp2() - 1.0) / g2;
        total += s.weight(user)
            * match accounting {
                OmaAccounting::Average => peak / u,
                OmaAccounting::Peak => peak,
            };
    }
    Ok(total)
}

fn single_block(s: &Scenario, what: &str) -> Result<()> {
    if s.blocks() != 1 {
        return Err(Error::Argument(format!("{what} is defined for one block, got {}", s.blocks())));
    }
    Ok(())
}

/// Outcome of the interference-as-noise fixed point.
#[derive(Debug, Clone, PartialEq)]
pub enum TinOutcome {
    /// Per-user powers `[u][n]` and the iterations used.
    Converged { power: Vec<Vec<f64>>, iterations: usize },
    Diverged { iterations: usize },
}

impl TinOutcome {
    pub fn powers(&self) -> Option<&[Vec<f64>]> {
        match self {
            TinOutcome::Converged { power, .. } => Some(power),
            TinOutcome::Diverged { .. } => None,
        }
    }
}

/// Profile in which every receiver decodes only its own streams, private last.
pub fn tin_profile(users: usize) -> DecodingProfile {
    let order = (0..users)
        .map(|r| {
            let mut v: Vec<SubStreamId> =
                (0..users).filter(|&j| j != r).map(|j| SubStreamId::new(r, j)).collect();
            v.push(SubStreamId::new(r, r));
            v
        })
        .collect();
    DecodingProfile::new(order).expect("own-stream orders are valid")
}

/// Every user meets its target on each block (share `b/N`) treating all
/// other users as noise: `p_u ← (σ² + Σ_{v≠u} g²_uv p_v)(2^{b/ρ} − 1)/g²_uu`,
/// iterated from zero.
pub fn tin_fixed_point(s: &Scenario, max_iter: usize, tol: f64) -> Result<TinOutcome> {
    if !(tol > 0.0) {
        return Err(Error::Argument(format!("tolerance must be positive, got {tol}")));
    }
    let (u, nb) = (s.users(), s.blocks());
    let rho = s.rate_factor();
    let mut power = vec![vec![0.0; nb]; u];
    let mut worst = 0;
    for n in 0..nb {
        let mut p = vec![0.0; u];
        let mut converged = false;
        for it in 1..=max_iter {
            let mut next = vec![0.0; u];
            for user in 0..u {
                let b = s.rate_min(user) / nb as f64;
                if b == 0.0 {
                    continue;
                }
                let g2 = s.power_gain(user, user, n);
                if g2 == 0.0 {
                    return Ok(TinOutcome::Diverged { iterations: it });
                }
                let interference: f64 = (0..u)
                    .filter(|&v| v != user)
                    .map(|v| s.power_gain(user, v, n) * p[v])
                    .sum();
                next[user] = (s.noise(user, n) + interference) * ((b / rho).exp2() - 1.0) / g2;
            }
            let change = next.iter().zip(&p).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            p = next;
            if !p.iter().all(|v| v.is_finite() && *v < 1e15) {
                return Ok(TinOutcome::Diverged { iterations: it });
            }
            if change < tol {
                worst = worst.max(it);
                converged = true;
                break;
            }
        }
        if !converged {
            return Ok(TinOutcome::Diverged { iterations: max_iter });
        }
        for user in 0..u {
            power[user][n] = p[user];
        }
    }
    Ok(TinOutcome::Converged { power, iterations: worst })
}

/// Allocation point carrying per-user powers on the private streams.
pub fn private_allocation(s: &Scenario, power: &[Vec<f64>]) -> AllocationPoint {
    let mut pt = AllocationPoint::for_scenario(s);
    for (user, row) in power.iter().enumerate() {
        for (n, &p) in row.iter().enumerate() {
            pt.set_power(SubStreamId::new(user, user), n, p);
        }
    }
    pt
}

/// Minimum total power reaching `target` over parallel tones:
/// `p_n = max(0, μ − σ²_n/g²_n)` with the water level `μ` found by bisection.
/// `gain` holds amplitudes.
pub fn waterfill_min_power(gain: &[f64], noise: &[f64], target: f64, rho: f64) -> Result<Vec<f64>> {
    if gain.len() != noise.len() {
        return Err(Error::Shape("gain and noise lengths differ".into()));
    }
    if !(target >= 0.0) || !(rho > 0.0) {
        return Err(Error::Argument("target must be nonnegative and ρ positive".into()));
    }
    if noise.iter().any(|v| !(*v > 0.0)) {
        return Err(Error::Argument("noise must be positive".into()));
    }
    if target == 0.0 {
        return Ok(vec![0.0; gain.len()]);
    }
    let inv: Vec<f64> = gain
        .iter()
        .zip(noise)
        .map(|(g, s)| if *g == 0.0 { f64::INFINITY } else { s / (g * g) })
        .collect();
    let base = inv.iter().copied().fold(f64::INFINITY, f64::min);
    if !base.is_finite() {
        return Err(Error::Infeasible("every tone has zero gain".into()));
    }
    let rate = |mu: f64| -> f64 {
        inv.iter()
            .filter(|&&v| mu > v)
            .map(|&v| rho * (mu / v).log2())
            .sum()
    };
    let (mut lo, mut hi) = (base, base * 2.0);
    while rate(hi) < target {
        lo = hi;
        hi *= 2.0;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if rate(mid) < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(inv.iter().map(|&v| (hi - v).max(0.0)).collect())
}

/// Weighted total of per-user water-filling over the direct gains, ignoring
/// interference. A lower reference, feasible only on interference-free channels.
pub fn waterfill_total(s: &Scenario) -> Result<(f64, Vec<Vec<f64>>)> {
    let mut total = 0.0;
    let mut power = Vec::with_capacity(s.users());
    for u in 0..s.users() {
        let g: Vec<f64> = (0..s.blocks()).map(|n| s.gain(u, u, n)).collect();
        let sig: Vec<f64> = (0..s.blocks()).map(|n| s.noise(u, n)).collect();
        let p = waterfill_min_power(&g, &sig, s.rate_min(u), s.rate_factor())?;
        total += s.weight(u) * p.iter().sum::<f64>();
        power.push(p);
    }
    Ok((total, power))
}

/// Oracle grid: zero plus `points − 1` log-spaced values ending at `bound`.
#[derive(Debug, Clone, PartialEq)]
pub struct GridSpec {
    pub bound: f64,
    pub points: usize,
    /// Smallest positive grid value as a fraction of `bound`.
    pub floor_ratio: f64,
}

impl GridSpec {
    pub const DEFAULT_POINTS: usize = 25;

    pub fn new(bound: f64, points: usize) -> Result<Self> {
        let g = GridSpec { bound, points, floor_ratio: 1e-3 };
        g.validate()?;
        Ok(g)
    }

    /// Bound from the interference-as-noise point when it exists: at the
    /// optimum no stream can carry more than that total over its weight.
    pub fn for_scenario(s: &Scenario, points: usize) -> Result<Self> {
        let w_min = s.weights().iter().copied().fold(f64::INFINITY, f64::min);
        let bound = match tin_fixed_point(s, 10_000, 1e-12)? {
            TinOutcome::Converged { power, .. } => {
                let total: f64 = power
                    .iter()
                    .enumerate()
                    .map(|(u, row)| s.weight(u) * row.iter().sum::<f64>())
                    .sum();
                total / w_min
            }
            TinOutcome::Diverged { .. } => 1e3,
        };
        Self::new(if bound > 0.0 { bound } else { 1.0 }, points)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.bound > 0.0) || !self.bound.is_finite() {
            return Err(Error::Argument(format!("grid bound must be positive, got {}", self.bound)));
        }
        if self.points < 3 {
            return Err(Error::Argument(format!("grid needs at least 3 points, got {}", self.points)));
        }
        if !(self.floor_ratio > 0.0 && self.floor_ratio < 1.0) {
            return Err(Error::Argument("floor ratio must lie in (0, 1)".into()));
        }
        Ok(())
    }

    pub fn values(&self) -> Vec<f64> {
        let m = self.points - 1;
        let lo = self.bound * self.floor_ratio;
        let mut v = vec![0.0];
        v.extend((0..m).map(|k| {
            if m == 1 {
                self.bound
            } else {
                lo * (self.bound / lo).powf(k as f64 / (m - 1) as f64)
            }
        }));
        v
    }

    /// Ratio between neighbouring positive grid values.
    pub fn step_ratio(&self) -> f64 {
        let m = self.points - 1;
        if m <= 1 {
            1.0 / self.floor_ratio
        } else {
            (1.0 / self.floor_ratio).powf(1.0 / (m - 1) as f64)
        }
    }
}

/// Cheapest feasible grid point over every decoding profile.
#[derive(Debug, Clone, PartialEq)]
pub struct OracleResult {
    pub best_total: f64,
    pub best_profile: DecodingProfile,
    pub best_point: AllocationPoint,
    /// How far the continuous optimum may lie below `best_total` from grid
    /// rounding alone.
    pub resolution_slack: f64,
    pub evaluated: usize,
}

/// One receiver's decoding order compiled to flat index lists.
struct CompiledOrder {
    /// (stream index, power gain) of undecoded streams.
    floor: Vec<(usize, f64)>,
    /// (stream index, power gain) in decoding order.
    chain: Vec<(usize, f64)>,
}

impl CompiledOrder {
    fn new(s: &Scenario, prof: &DecodingProfile, r: usize) -> Self {
        let u = s.users();
        let floor = all_streams(u)
            .filter(|&st| !prof.decodes(r, st))
            .map(|st| (st.index(u), s.power_gain(r, st.tx, 0)))
            .collect();
        let chain = prof.order(r).iter().map(|st| (st.index(u), s.power_gain(r, st.tx, 0))).collect();
        CompiledOrder { floor, chain }
    }

    /// Chain rate of each decoded stream, `+∞` for the rest.
    fn rates(&self, noise: f64, rho: f64, p: &[f64], out: &mut [f64]) {
        out.iter_mut().for_each(|v| *v = f64::INFINITY);
        let mut below = noise + self.floor.iter().map(|&(k, g)| g * p[k]).sum::<f64>();
        for &(k, g) in self.chain.iter().rev() {
            let rx = g * p[k];
            out[k] = log2_1p(rho, rx / below);
            below += rx;
        }
    }
}

/// Profiles factored into per-receiver orders. A stream's rate under a
/// profile is the minimum of its per-receiver chain rates, so each distinct
/// receiver order is evaluated once per grid point.
struct Compiled {
    orders: Vec<Vec<CompiledOrder>>,
    /// Per profile, the order index used at each receiver.
    pick: Vec<Vec<usize>>,
}

impl Compiled {
    fn new(s: &Scenario, profiles: &[DecodingProfile]) -> Self {
        let u = s.users();
        let mut seen: Vec<Vec<Vec<SubStreamId>>> = vec![Vec::new(); u];
        let mut orders: Vec<Vec<CompiledOrder>> = (0..u).map(|_| Vec::new()).collect();
        let mut pick = Vec::with_capacity(profiles.len());
        for prof in profiles {
            let mut row = Vec::with_capacity(u);
            for r in 0..u {
                let key = prof.order(r).to_vec();
                let at = match seen[r].iter().position(|o| *o == key) {
                    Some(at) => at,
                    None => {
                        seen[r].push(key);
                        orders[r].push(CompiledOrder::new(s, prof, r));
                        seen[r].len() - 1
                    }
                };
                row.push(at);
            }
            pick.push(row);
        }
        Compiled { orders, pick }
    }
}

/// Largest user count the oracle accepts.
pub const ORACLE_MAX_USERS: usize = 2;

/// Scans the grid in order of increasing weighted total and returns the first
/// point feasible under any profile (profiles tried in lexicographic order).
pub fn brute_force_oracle(s: &Scenario, grid: &GridSpec) -> Result<OracleResult> {
    grid.validate()?;
    if s.users() > ORACLE_MAX_USERS {
        return Err(Error::Capacity { what: "grid oracle", bound: ORACLE_MAX_USERS, got: s.users() });
    }
    single_block(s, "grid oracle")?;
    let u = s.users();
    let axes = u * u;
    let values = grid.values();
    let profiles: Vec<DecodingProfile> = enumerate_profiles(s, true)?.collect();
    let compiled = Compiled::new(s, &profiles);
    let rho = s.rate_factor();

    let count = values.len().pow(axes as u32);
    let weight: Vec<f64> = (0..axes).map(|k| s.weight(k / u)).collect();
    let decode = |mut idx: usize, p: &mut [f64]| {
        for k in (0..axes).rev() {
            p[k] = values[idx % values.len()];
            idx /= values.len();
        }
    };
    let mut order: Vec<(f64, usize)> = Vec::with_capacity(count);
    let mut p = vec![0.0; axes];
    for idx in 0..count {
        decode(idx, &mut p);
        order.push((p.iter().zip(&weight).map(|(a, w)| a * w).sum(), idx));
    }
    order.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));

    let mut per_order: Vec<Vec<Vec<f64>>> =
        compiled.orders.iter().map(|os| vec![vec![0.0; axes]; os.len()]).collect();
    let mut evaluated = 0;
    for &(total, idx) in &order {
        decode(idx, &mut p);
        for (r, os) in compiled.orders.iter().enumerate() {
            for (o, out) in os.iter().zip(per_order[r].iter_mut()) {
                o.rates(s.noise(r, 0), rho, &p, out);
            }
        }
        for (prof, pick) in profiles.iter().zip(&compiled.pick) {
            evaluated += 1;
            let feasible = (0..u).all(|user| {
                let got: f64 = (0..u)
                    .map(|j| {
                        let k = user * u + j;
                        pick.iter().enumerate().map(|(r, &o)| per_order[r][o][k]).fold(f64::INFINITY, f64::min)
                    })
                    .sum();
                got >= s.rate_min(user) - 1e-12
            });
            if feasible {
                let mut pt = AllocationPoint::for_scenario(s);
                for k in 0..axes {
                    pt.set_power(SubStreamId::from_index(k, u), 0, p[k]);
                }
                debug_assert!((total_weighted_power(s, &pt) - total).abs() < 1e-9 * (1.0 + total));
                let w_max = weight.iter().copied().fold(0.0, f64::max);
                let resolution_slack = total * (1.0 - 1.0 / grid.step_ratio())
                    + axes as f64 * w_max * grid.bound * grid.floor_ratio;
                return Ok(OracleResult {
                    best_total: total,
                    best_profile: prof.clone(),
                    best_point: pt,
                    resolution_slack,
                    evaluated,
                });
            }
        }
    }
    Err(Error::Infeasible(format!(
        "no grid point up to {} is feasible",
        grid.bound
    )))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chain::verify_feasible;

    fn demo2() -> Scenario {
        Scenario::single_tone(&[vec![0.4, 0.0], vec![0.9, 1.0]], 0.5, 1.0).unwrap()
    }

    fn diag2() -> Scenario {
        Scenario::single_tone(&[vec![1.0, 0.0], vec![0.0, 1.0]], 0.5, 1.0).unwrap()
    }

    #[test]
    fn oma_closed_form() {
        assert!((oma_total_power(&diag2(), OmaAccounting::Average).unwrap() - 1.0).abs() < 1e-12);
        assert!((oma_total_power(&diag2(), OmaAccounting::Peak).unwrap() - 2.0).abs() < 1e-12);
        let one = Scenario::single_tone(&[vec![1.0]], 0.5, 1.0).unwrap();
        let p = oma_total_power(&one, OmaAccounting::Average).unwrap();
        assert!((p - (2f64.sqrt() - 1.0)).abs() < 1e-12);
    }

    #[test]
    fn oma_zero_gain_is_infeasible() {
        let s = Scenario::single_tone(&[vec![0.0, 0.1], vec![0.1, 1.0]], 0.5, 1.0).unwrap();
        assert!(matches!(oma_total_power(&s, OmaAccounting::Average), Err(Error::Infeasible(_))));
    }

    #[test]
    fn tin_demo2() {
        let out = tin_fixed_point(&demo2(), 1000, 1e-12).unwrap();
        let p = out.powers().unwrap();
        let q = 2f64.sqrt() - 1.0;
        assert!((p[0][0] - q / 0.16).abs() < 1e-9);
        assert!((p[1][0] - (1.0 + 0.81 * q / 0.16) * q).abs() < 1e-9);
        assert!((p[0][0] + p[1][0] - 3.871).abs() < 1e-3);
        let pt = private_allocation(&demo2(), p);
        let rep = verify_feasible(&demo2(), &tin_profile(2), &pt, 1e-6).unwrap();
        assert!(rep.min_margin() > -1e-9);
    }

    #[test]
    fn tin_divergence_is_reported() {
        let s = Scenario::single_tone(&[vec![1.0, 2.0], vec![2.0, 1.0]], 1.0, 1.0).unwrap();
        assert!(matches!(tin_fixed_point(&s, 500, 1e-9).unwrap(), TinOutcome::Diverged { .. }));
    }

    #[test]
    fn waterfill_examples() {
        let p = waterfill_min_power(&[1.0], &[1.0], 0.5, 1.0).unwrap();
        assert!((p[0] - (2f64.sqrt() - 1.0)).abs() < 1e-12);
        let p = waterfill_min_power(&[1.0, 0.5], &[1.0, 1.0], 2.0, 1.0).unwrap();
        assert!((p[0] - 3.0).abs() < 1e-9 && p[1].abs() < 1e-9);
        assert_eq!(waterfill_min_power(&[1.0, 0.5], &[1.0, 1.0], 0.0, 1.0).unwrap(), vec![0.0, 0.0]);
        assert!(matches!(waterfill_min_power(&[0.0], &[1.0], 1.0, 1.0), Err(Error::Infeasible(_))));
    }

    #[test]
    fn grid_values_are_log_spaced() {
        let g = GridSpec::new(2.0, 25).unwrap();
        let v = g.values();
        assert_eq!(v.len(), 25);
        assert_eq!(v[0], 0.0);
        assert!((v[24] - 2.0).abs() < 1e-12);
        assert!((v[2] / v[1] - g.step_ratio()).abs() < 1e-9);
        assert!(GridSpec::new(2.0, 2).is_err());
    }

    #[test]
    fn oracle_on_diagonal_channel() {
        let out = brute_force_oracle(&diag2(), &GridSpec::new(2.0, 25).unwrap()).unwrap();
        let opt = 2.0 * (2f64.sqrt() - 1.0);
        assert!(out.best_total >= opt - 1e-9);
        assert!(out.best_total <= opt * GridSpec::new(2.0, 25).unwrap().step_ratio() + 1e-9);
    }

    #[test]
    fn oracle_with_zero_targets() {
        let s = diag2().with_rate_min(&[0.0, 0.0]).unwrap();
        let out = brute_force_oracle(&s, &GridSpec::new(1.0, 5).unwrap()).unwrap();
        assert_eq!(out.best_total, 0.0);
    }

    #[test]
    fn oracle_guard() {
        let s = Scenario::single_tone(&vec![vec![1.0; 3]; 3], 0.1, 1.0).unwrap();
        assert!(matches!(
            brute_force_oracle(&s, &GridSpec::new(1.0, 5).unwrap()),
            Err(Error::Capacity { .. })
        ));
    }

    #[test]
    fn oracle_demo2_below_tin() {
        let s = demo2();
        let out = brute_force_oracle(&s, &GridSpec::for_scenario(&s, 25).unwrap()).unwrap();
        assert!(out.best_total <= 3.871 + 1e-3);
        let rep = verify_feasible(&s, &out.best_profile, &out.best_point, 1e-6).unwrap();
        assert!(rep.feasible);
    }
}
