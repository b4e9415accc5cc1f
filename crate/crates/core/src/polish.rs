//! Successive convex refinement on the exact SIC chain of a fixed profile.
//!
//! The chain rate at position `k` is `ρ·log2(Y_k) − ρ·log2(Y_{k+1})`, with
//! `Y_k` the noise plus all received power from position `k` on (plus the
//! undecoded floor). The subtracted term is concave, so replacing it by its
//! tangent at the current point gives a convex inner approximation of the
//! exact feasible set. Every iterate therefore stays exactly feasible and the
//! objective never increases.

use crate::chain::{check_profile, stream_rates, total_weighted_power};
use crate::error::{Error, Result};
use crate::outer::scale_to_targets;
use crate::profile::DecodingProfile;
use crate::program::{Constraint, ConstraintTag, ConvexProgram, VarRole};
use crate::scenario::{all_streams, AllocationPoint, Scenario, SubStreamId};
use crate::solver::{solve_from, SolveStatus, SolverOptions};

const LN2: f64 = std::f64::consts::LN_2;

/// Stopping rule for the refinement.
#[derive(Debug, Clone, PartialEq)]
pub struct PolishConfig {
    pub max_iter: usize,
    /// Stop once an iteration improves the total by less than this fraction.
    pub rel_tol: f64,
    pub solver: SolverOptions,
}

impl Default for PolishConfig {
    fn default() -> Self {
        PolishConfig { max_iter: 60, rel_tol: 1e-7, solver: SolverOptions::default() }
    }
}

/// Refined point and its history.
#[derive(Debug, Clone, PartialEq)]
pub struct PolishOutcome {
    pub point: AllocationPoint,
    pub total: f64,
    pub iterations: usize,
    /// Total weighted power after each accepted iterate, starting point first.
    pub history: Vec<f64>,
    /// Rate-target multipliers of the last tangent program, per user.
    pub duals: Vec<f64>,
}

struct Layout {
    users: usize,
    blocks: usize,
}

impl Layout {
    fn power(&self, st: SubStreamId, n: usize) -> usize {
        st.index(self.users) * self.blocks + n
    }

    fn rate(&self, st: SubStreamId, n: usize) -> usize {
        self.users * self.users * self.blocks + self.power(st, n)
    }
}

/// Convex inner approximation of the exact feasible set of `prof` around `at`.
pub fn linearized_program(s: &Scenario, prof: &DecodingProfile, at: &AllocationPoint) -> Result<ConvexProgram> {
    check_profile(s, prof)?;
    at.check_shape(s)?;
    let (u, nb) = (s.users(), s.blocks());
    let lay = Layout { users: u, blocks: nb };
    let mut vars = Vec::with_capacity(2 * u * u * nb);
    for st in all_streams(u) {
        for n in 0..nb {
            vars.push(VarRole::Power { group: st.index(u), block: n });
        }
    }
    for st in all_streams(u) {
        for n in 0..nb {
            vars.push(VarRole::Rate { stream: st, block: n });
        }
    }
    let mut prog = ConvexProgram::new(vars);
    for st in all_streams(u) {
        for n in 0..nb {
            prog.objective[lay.power(st, n)] = s.weight(st.tx);
        }
    }
    let rho = s.rate_factor();
    for r in 0..u {
        let order = prof.order(r);
        let floor: Vec<SubStreamId> = all_streams(u).filter(|&st| !prof.decodes(r, st)).collect();
        for n in 0..nb {
            let sigma2 = s.noise(r, n);
            let term = |st: SubStreamId| {
                let g = s.power_gain(r, st.tx, n);
                (g > 0.0).then_some((lay.power(st, n), g))
            };
            for k in 0..order.len() {
                let below: Vec<(usize, f64)> =
                    floor.iter().chain(&order[k + 1..]).filter_map(|&st| term(st)).collect();
                let here: Vec<(usize, f64)> =
                    floor.iter().chain(&order[k..]).filter_map(|&st| term(st)).collect();
                let l_hat: f64 = below.iter().map(|&(j, g)| g * power_at(at, &lay, j)).sum();
                let y_hat = sigma2 + l_hat;
                let mut linear: Vec<(usize, f64)> =
                    below.iter().map(|&(j, g)| (j, rho * g / (y_hat * LN2))).collect();
                linear.push((lay.rate(order[k], n), 1.0));
                let offset = rho * ((y_hat / sigma2).log2() - l_hat / (y_hat * LN2));
                prog.constraints.push(Constraint::log_affine(
                    ConstraintTag::Position { receiver: r, block: n, position: k },
                    linear,
                    offset,
                    sigma2,
                    here,
                    rho,
                ));
            }
        }
    }
    for user in 0..u {
        let linear = (0..u)
            .flat_map(|j| (0..nb).map(move |n| (j, n)))
            .map(|(j, n)| (lay.rate(SubStreamId::new(user, j), n), -1.0))
            .collect();
        prog.constraints
            .push(Constraint::linear(ConstraintTag::RateTarget { user }, linear, -s.rate_min(user)));
    }
    prog.audit()?;
    Ok(prog)
}

fn power_at(pt: &AllocationPoint, lay: &Layout, j: usize) -> f64 {
    let st = SubStreamId::from_index(j / lay.blocks, lay.users);
    pt.power(st, j % lay.blocks)
}

/// Refines an exactly feasible `start` for `prof`. Iterates that fail to
/// verify or to improve are discarded, so the result is never worse than
/// `start`.
pub fn polish(
    s: &Scenario,
    prof: &DecodingProfile,
    start: &AllocationPoint,
    cfg: &PolishConfig,
) -> Result<PolishOutcome> {
    if !(cfg.rel_tol >= 0.0) {
        return Err(Error::Argument("relative tolerance must be nonnegative".into()));
    }
    let mut best = stream_rates(s, prof, start)?;
    let mut total = total_weighted_power(s, &best);
    let lay = Layout { users: s.users(), blocks: s.blocks() };
    let mut history = vec![total];
    let mut iterations = 0;
    let mut duals = vec![0.0; s.users()];
    for _ in 0..cfg.max_iter {
        iterations += 1;
        let prog = linearized_program(s, prof, &best)?;
        let mut hint = vec![0.0; prog.num_vars()];
        for st in all_streams(s.users()) {
            for n in 0..s.blocks() {
                hint[lay.power(st, n)] = best.power(st, n);
                hint[lay.rate(st, n)] = best.rate(st, n);
            }
        }
        let res = solve_from(&prog, &cfg.solver, &hint)?;
        if !matches!(res.status, SolveStatus::Optimal | SolveStatus::MaxIter) {
            break;
        }
        for (c, &d) in prog.constraints.iter().zip(&res.duals) {
            if let ConstraintTag::RateTarget { user } = c.tag {
                duals[user] = d;
            }
        }
        let cand = linearized_point(s, &best, &res.x);
        let Ok(cand) = scale_to_targets(s, prof, &cand) else {
            break;
        };
        let next = total_weighted_power(s, &cand);
        if !(next < total) {
            break;
        }
        let gain = total - next;
        best = cand;
        total = next;
        history.push(total);
        if gain <= cfg.rel_tol * total.max(1e-12) {
            break;
        }
    }
    Ok(PolishOutcome { point: best, total, iterations, history, duals })
}

/// Powers of a tangent-program solution `x`, other fields from `like`.
pub fn linearized_point(s: &Scenario, like: &AllocationPoint, x: &[f64]) -> AllocationPoint {
    let lay = Layout { users: s.users(), blocks: s.blocks() };
    let mut pt = like.clone();
    for st in all_streams(s.users()) {
        for n in 0..s.blocks() {
            pt.set_power(st, n, x[lay.power(st, n)].max(0.0));
        }
    }
    pt
}

/// Least powers that carry the stream rates stored in `rates` under `prof`.
///
/// For fixed rates every chain constraint is linear in the powers and the
/// required power of each stream is a monotone affine map of the others, so
/// iterating from zero climbs to the componentwise least solution. Returns
/// `None` when the iteration blows past `cap` or fails to settle.
pub fn least_powers(
    s: &Scenario,
    prof: &DecodingProfile,
    rates: &AllocationPoint,
    cap: f64,
) -> Option<AllocationPoint> {
    let users = s.users();
    let rho = s.rate_factor();
    let mut pt = rates.clone();
    for st in all_streams(users) {
        for n in 0..s.blocks() {
            pt.set_power(st, n, 0.0);
        }
    }
    let decoders: Vec<Vec<usize>> = all_streams(users).map(|st| prof.decoders(st)).collect();
    for n in 0..s.blocks() {
        for _ in 0..5000 {
            let mut moved = 0.0_f64;
            for st in all_streams(users) {
                let snr = (rates.rate(st, n) / rho).exp2() - 1.0;
                if snr <= 0.0 {
                    continue;
                }
                let mut need = 0.0_f64;
                for &r in &decoders[st.index(users)] {
                    let g = s.power_gain(r, st.tx, n);
                    if g <= 0.0 {
                        return None;
                    }
                    let pos = prof.position(r, st)?;
                    let floor = s.noise(r, n)
                        + all_streams(users)
                            .filter(|&o| !prof.decodes(r, o))
                            .map(|o| s.power_gain(r, o.tx, n) * pt.power(o, n))
                            .sum::<f64>()
                        + prof.order(r)[pos + 1..]
                            .iter()
                            .map(|&o| s.power_gain(r, o.tx, n) * pt.power(o, n))
                            .sum::<f64>();
                    need = need.max(snr * floor / g);
                }
                let old = pt.power(st, n);
                if need > old {
                    moved = moved.max((need - old) / need);
                    pt.set_power(st, n, need);
                }
                if need > cap {
                    return None;
                }
            }
            if moved <= 1e-13 {
                break;
            }
        }
    }
    stream_rates(s, prof, &pt).ok()
}

/// Splits of each user's target over its streams with step `1/steps`,
/// spread evenly over blocks, and the least powers that carry them.
/// Returns the feasible points cheapest first.
pub fn split_starts(s: &Scenario, prof: &DecodingProfile, steps: usize, cap: f64) -> Vec<AllocationPoint> {
    let users = s.users();
    let compositions = compositions(users, steps.max(1));
    let total = compositions.len().pow(users as u32);
    let mut out = Vec::new();
    for mut k in 0..total {
        let mut rates = AllocationPoint::for_scenario(s);
        for u in 0..users {
            let c = &compositions[k % compositions.len()];
            k /= compositions.len();
            for (j, &part) in c.iter().enumerate() {
                let b = s.rate_min(u) * part as f64 / steps as f64 / s.blocks() as f64;
                for n in 0..s.blocks() {
                    rates.set_rate(SubStreamId { tx: u, companion: j }, n, b);
                }
            }
        }
        if let Some(pt) = least_powers(s, prof, &rates, cap).and_then(|p| scale_to_targets(s, prof, &p).ok()) {
            out.push((total_weighted_power(s, &pt), pt));
        }
    }
    out.sort_by(|a, b| a.0.total_cmp(&b.0));
    out.into_iter().map(|(_, p)| p).collect()
}

/// All ways to write `steps` as an ordered sum of `parts` nonnegative integers.
fn compositions(parts: usize, steps: usize) -> Vec<Vec<usize>> {
    if parts == 1 {
        return vec![vec![steps]];
    }
    let mut out = Vec::new();
    for first in (0..=steps).rev() {
        for mut rest in compositions(parts - 1, steps - first) {
            rest.insert(0, first);
            out.push(rest);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chain::verify_feasible;

    fn sid(i: usize, j: usize) -> SubStreamId {
        SubStreamId::new(i, j)
    }

    #[test]
    fn tangent_program_is_tight_at_expansion_point() {
        let s = Scenario::single_tone(&[vec![0.4, 0.0], vec![0.9, 1.0]], 0.5, 1.0).unwrap();
        let prof = DecodingProfile::new(vec![
            vec![sid(0, 1), sid(0, 0)],
            vec![sid(0, 1), sid(1, 0), sid(1, 1)],
        ])
        .unwrap();
        let mut pt = AllocationPoint::for_scenario(&s);
        pt.set_power(sid(0, 1), 0, 2.0);
        pt.set_power(sid(0, 0), 0, 0.5);
        pt.set_power(sid(1, 1), 0, 0.7);
        let exact = stream_rates(&s, &prof, &pt).unwrap();
        let prog = linearized_program(&s, &prof, &pt).unwrap();
        let lay = Layout { users: 2, blocks: 1 };
        let mut x = vec![0.0; prog.num_vars()];
        for st in all_streams(2) {
            x[lay.power(st, 0)] = pt.power(st, 0);
        }
        for (c, r) in prog.constraints.iter().zip(0..) {
            if let ConstraintTag::Position { receiver, position, .. } = c.tag {
                let st = prof.order(receiver)[position];
                let chain = crate::chain::sic_rate_chain(&s, &prof, &pt, receiver, 0).unwrap();
                x[lay.rate(st, 0)] = chain.incremental[position];
                assert!(c.value(&x).abs() < 1e-12, "row {r}");
                x[lay.rate(st, 0)] = 0.0;
            }
        }
        assert!(exact.rate(sid(0, 1), 0) > 0.0);
    }

    #[test]
    fn polish_never_increases_and_stays_feasible() {
        let s = Scenario::single_tone(&[vec![0.4, 0.0], vec![0.9, 1.0]], 0.5, 1.0).unwrap();
        let prof = DecodingProfile::new(vec![
            vec![sid(0, 0), sid(0, 1)],
            vec![sid(0, 1), sid(1, 0), sid(1, 1)],
        ])
        .unwrap();
        let mut pt = AllocationPoint::for_scenario(&s);
        pt.set_power(sid(0, 0), 0, 3.0);
        pt.set_power(sid(0, 1), 0, 3.0);
        pt.set_power(sid(1, 1), 0, 3.0);
        assert!(verify_feasible(&s, &prof, &stream_rates(&s, &prof, &pt).unwrap(), 1e-9).unwrap().feasible);
        let out = polish(&s, &prof, &pt, &PolishConfig::default()).unwrap();
        assert!(out.history.windows(2).all(|w| w[1] <= w[0]));
        let rep = verify_feasible(&s, &prof, &out.point, 1e-9).unwrap();
        assert!(rep.min_margin() >= 0.0);
        // Common stream of user 1 decoded first at receiver 2, then the
        // private stream of user 2 on a clean floor.
        let q = 2f64.sqrt() - 1.0;
        assert!((out.total - (q / 0.16 + q)).abs() < 1e-4, "{}", out.total);
    }
}
