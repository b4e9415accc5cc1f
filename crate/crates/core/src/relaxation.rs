//! Convex relaxation of the minimum-power problem for a fixed profile.
//!
//! For every receiver `r`, block `n` and chain position `k` the sum of the
//! rates decoded at positions `≥ k` plus an auxiliary rate `c[r][n]` is
//! bounded by the capacity of the received power of those positions plus the
//! undecoded interference. `c[r][n]` itself is bounded by the capacity of the
//! undecoded interference alone, and the objective rewards large `c` with a
//! penalty weight `λ`, pushing it toward that bound.

use crate::chain::{check_profile, log2_1p, undecoded_unchecked};
use crate::error::{Error, Result};
use crate::order::AggregationMap;
use crate::profile::DecodingProfile;
use crate::program::{Constraint, ConstraintTag, ConvexProgram, VarRole};
use crate::scenario::{all_streams, AllocationPoint, Scenario, SubStreamId};

/// Penalty weight `λ ≥ 0` on the auxiliary rates.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct PenaltyWeight(f64);

impl PenaltyWeight {
    pub fn new(lambda: f64) -> Result<Self> {
        if !lambda.is_finite() || lambda < 0.0 {
            return Err(Error::Argument(format!(
                "penalty weight must be finite and nonnegative, got {lambda}"
            )));
        }
        Ok(PenaltyWeight(lambda))
    }

    pub fn value(self) -> f64 {
        self.0
    }
}

/// A relaxation program together with the map back to allocation points.
#[derive(Debug, Clone)]
pub struct Relaxation {
    pub program: ConvexProgram,
    pub lambda: PenaltyWeight,
    agg: AggregationMap,
    users: usize,
    blocks: usize,
    power_var: Vec<usize>,
    rate_var: Vec<usize>,
    aux_var: Vec<usize>,
}

impl Relaxation {
    pub fn aggregation(&self) -> &AggregationMap {
        &self.agg
    }

    pub fn power_var(&self, group: usize, n: usize) -> usize {
        self.power_var[group * self.blocks + n]
    }

    pub fn rate_var(&self, s: SubStreamId, n: usize) -> usize {
        self.rate_var[s.index(self.users) * self.blocks + n]
    }

    pub fn aux_var(&self, r: usize, n: usize) -> usize {
        self.aux_var[r * self.blocks + n]
    }

    /// Allocation point for a program solution. Each group's power goes to
    /// its representative stream.
    pub fn point(&self, x: &[f64]) -> Result<AllocationPoint> {
        if x.len() != self.program.num_vars() {
            return Err(Error::Shape(format!(
                "expected {} program values, got {}",
                self.program.num_vars(),
                x.len()
            )));
        }
        let mut pt = AllocationPoint::zeros(self.users, self.blocks);
        for n in 0..self.blocks {
            for g in 0..self.agg.len() {
                pt.set_power(self.agg.representative(g), n, x[self.power_var(g, n)].max(0.0));
            }
            for st in all_streams(self.users) {
                pt.set_rate(st, n, x[self.rate_var(st, n)].max(0.0));
            }
            for r in 0..self.users {
                pt.set_aux(r, n, x[self.aux_var(r, n)].max(0.0));
            }
        }
        Ok(pt)
    }

    /// Program vector for an allocation point; group power is the sum over
    /// its members.
    pub fn encode(&self, pt: &AllocationPoint) -> Vec<f64> {
        let mut x = vec![0.0; self.program.num_vars()];
        for n in 0..self.blocks {
            for (g, members) in self.agg.groups().iter().enumerate() {
                x[self.power_var(g, n)] = members.iter().map(|&s| pt.power(s, n)).sum();
            }
            for st in all_streams(self.users) {
                x[self.rate_var(st, n)] = pt.rate(st, n);
            }
            for r in 0..self.users {
                x[self.aux_var(r, n)] = pt.aux(r, n);
            }
        }
        x
    }
}

/// Groups in decoding order at receiver `r`, one entry per run of members.
fn group_positions(prof: &DecodingProfile, agg: &AggregationMap, r: usize) -> Vec<usize> {
    let mut out: Vec<usize> = Vec::new();
    for &st in prof.order(r) {
        let g = agg.group_of(st);
        if out.last() != Some(&g) {
            out.push(g);
        }
    }
    out
}

/// Builds the relaxation for `prof` with group powers from `agg`.
pub fn build_relaxation(
    s: &Scenario,
    prof: &DecodingProfile,
    agg: &AggregationMap,
    lambda: PenaltyWeight,
) -> Result<Relaxation> {
    check_profile(s, prof)?;
    agg.check_against(prof).map_err(|e| Error::Build(e.to_string()))?;
    let (u, nb) = (s.users(), s.blocks());
    for r in 0..u {
        if prof.order(r).is_empty() && s.rate_min(r) > 0.0 {
            return Err(Error::Build(format!(
                "receiver {} decodes nothing but needs rate {}",
                r + 1,
                s.rate_min(r)
            )));
        }
    }

    let mut vars = Vec::new();
    let mut power_var = vec![0; agg.len() * nb];
    for g in 0..agg.len() {
        for n in 0..nb {
            power_var[g * nb + n] = vars.len();
            vars.push(VarRole::Power { group: g, block: n });
        }
    }
    let mut rate_var = vec![0; u * u * nb];
    for st in all_streams(u) {
        for n in 0..nb {
            rate_var[st.index(u) * nb + n] = vars.len();
            vars.push(VarRole::Rate { stream: st, block: n });
        }
    }
    let mut aux_var = vec![0; u * nb];
    for r in 0..u {
        for n in 0..nb {
            aux_var[r * nb + n] = vars.len();
            vars.push(VarRole::Aux { receiver: r, block: n });
        }
    }

    let mut program = ConvexProgram::new(vars);
    for g in 0..agg.len() {
        for n in 0..nb {
            program.objective[power_var[g * nb + n]] = s.weight(agg.transmitter(g));
        }
    }
    for &j in &aux_var {
        program.objective[j] = -lambda.value();
    }

    let rho = s.rate_factor();
    for r in 0..u {
        let positions = group_positions(prof, agg, r);
        let undecoded: Vec<usize> = (0..agg.len()).filter(|g| !positions.contains(g)).collect();
        for n in 0..nb {
            let sigma2 = s.noise(r, n);
            let c = aux_var[r * nb + n];
            let gain_term = |g: usize| {
                let gp = s.power_gain(r, agg.transmitter(g), n);
                (gp > 0.0).then_some((power_var[g * nb + n], gp))
            };
            let floor_slope: Vec<(usize, f64)> = undecoded.iter().filter_map(|&g| gain_term(g)).collect();
            for k in 0..positions.len() {
                let mut linear: Vec<(usize, f64)> = positions[k..]
                    .iter()
                    .flat_map(|&g| agg.groups()[g].iter())
                    .map(|&st| (rate_var[st.index(u) * nb + n], 1.0))
                    .collect();
                linear.push((c, 1.0));
                let mut slope = floor_slope.clone();
                slope.extend(positions[k..].iter().filter_map(|&g| gain_term(g)));
                program.constraints.push(Constraint::log_affine(
                    ConstraintTag::Suffix { receiver: r, block: n, position: k },
                    linear,
                    0.0,
                    sigma2,
                    slope,
                    rho,
                ));
            }
            program.constraints.push(Constraint::log_affine(
                ConstraintTag::Floor { receiver: r, block: n },
                vec![(c, 1.0)],
                0.0,
                sigma2,
                floor_slope,
                rho,
            ));
        }
    }
    for user in 0..u {
        let linear = (0..u)
            .flat_map(|j| (0..nb).map(move |n| (j, n)))
            .map(|(j, n)| (rate_var[SubStreamId::new(user, j).index(u) * nb + n], -1.0))
            .collect();
        program
            .constraints
            .push(Constraint::linear(ConstraintTag::RateTarget { user }, linear, -s.rate_min(user)));
    }
    program.audit()?;
    Ok(Relaxation {
        program,
        lambda,
        agg: agg.clone(),
        users: u,
        blocks: nb,
        power_var,
        rate_var,
        aux_var,
    })
}

/// Slack of the auxiliary bound per receiver and block:
/// `ρ·log2(1 + I_unc/σ²) − c[r][n]`, indexed `[r][n]`.
pub fn exactness_gap(s: &Scenario, prof: &DecodingProfile, pt: &AllocationPoint) -> Result<Vec<Vec<f64>>> {
    check_profile(s, prof)?;
    pt.check_shape(s)?;
    Ok((0..s.users())
        .map(|r| {
            (0..s.blocks())
                .map(|n| {
                    let iu = undecoded_unchecked(s, prof, pt, r, n);
                    log2_1p(s.rate_factor(), iu / s.noise(r, n)) - pt.aux(r, n)
                })
                .collect()
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::order::collapse_dof;
    use crate::solver::{solve, SolveStatus, SolverOptions};

    fn sid(i: usize, j: usize) -> SubStreamId {
        SubStreamId::new(i, j)
    }

    fn two_user() -> Scenario {
        Scenario::single_tone(&[vec![1.0, 0.4], vec![0.4, 1.0]], 0.5, 1.0).unwrap()
    }

    #[test]
    fn structure_counts() {
        let s = two_user();
        let p = DecodingProfile::block_structured(2, &[0, 1]).unwrap();
        let agg = collapse_dof(&s, &p).unwrap();
        let rel = build_relaxation(&s, &p, &agg, PenaltyWeight::new(1.0).unwrap()).unwrap();
        let prog = &rel.program;
        assert_eq!(prog.num_vars(), 4 + 4 + 2);
        assert_eq!(prog.count_tagged(|t| matches!(t, ConstraintTag::Suffix { .. })), 6);
        assert_eq!(prog.count_tagged(|t| matches!(t, ConstraintTag::Floor { .. })), 2);
        assert_eq!(prog.count_tagged(|t| matches!(t, ConstraintTag::RateTarget { .. })), 2);
        for j in 0..4 {
            assert_eq!(prog.objective[j], 1.0);
        }
        assert_eq!(prog.objective[9], -1.0);
    }

    #[test]
    fn negative_penalty_rejected() {
        assert!(PenaltyWeight::new(-1.0).is_err());
        assert!(PenaltyWeight::new(f64::NAN).is_err());
    }

    #[test]
    fn inconsistent_aggregation_is_a_build_error() {
        let s = two_user();
        let p = DecodingProfile::block_structured(2, &[0, 1]).unwrap();
        let agg = AggregationMap::from_groups(
            2,
            vec![vec![sid(0, 1), sid(0, 0)], vec![sid(1, 0)], vec![sid(1, 1)]],
        )
        .unwrap();
        let err = build_relaxation(&s, &p, &agg, PenaltyWeight::new(0.0).unwrap());
        assert!(matches!(err, Err(Error::Build(_))));
    }

    #[test]
    fn single_user_relaxation_is_exact() {
        let s = Scenario::single_tone(&[vec![1.0]], 0.5, 1.0).unwrap();
        let p = DecodingProfile::new(vec![vec![sid(0, 0)]]).unwrap();
        let agg = collapse_dof(&s, &p).unwrap();
        let rel = build_relaxation(&s, &p, &agg, PenaltyWeight::new(0.0).unwrap()).unwrap();
        let res = solve(&rel.program, &SolverOptions::default()).unwrap();
        assert_eq!(res.status, SolveStatus::Optimal);
        let pt = rel.point(&res.x).unwrap();
        assert!((pt.power(sid(0, 0), 0) - (2f64.sqrt() - 1.0)).abs() < 1e-6);
        let gap = exactness_gap(&s, &p, &pt).unwrap();
        assert!(gap[0][0].abs() < 1e-6);
    }

    #[test]
    fn grouped_and_ungrouped_agree() {
        let s = two_user();
        let p = DecodingProfile::new(vec![
            vec![sid(0, 1), sid(0, 0)],
            vec![sid(1, 0), sid(1, 1)],
        ])
        .unwrap();
        let lam = PenaltyWeight::new(0.0).unwrap();
        let opt = SolverOptions::default();
        let grouped = build_relaxation(&s, &p, &collapse_dof(&s, &p).unwrap(), lam).unwrap();
        let plain = build_relaxation(&s, &p, &AggregationMap::identity(2), lam).unwrap();
        let a = solve(&grouped.program, &opt).unwrap();
        let b = solve(&plain.program, &opt).unwrap();
        assert!((a.objective - b.objective).abs() < 1e-5, "{} vs {}", a.objective, b.objective);
    }

    #[test]
    fn encode_inverts_point() {
        let s = two_user();
        let p = DecodingProfile::block_structured(2, &[1, 0]).unwrap();
        let rel = build_relaxation(&s, &p, &collapse_dof(&s, &p).unwrap(), PenaltyWeight::new(2.0).unwrap())
            .unwrap();
        let x: Vec<f64> = (0..rel.program.num_vars()).map(|j| 0.1 * (j + 1) as f64).collect();
        let pt = rel.point(&x).unwrap();
        assert_eq!(rel.encode(&pt), x);
    }
}
