//! Candidate decoding profiles: dual-guided ranking, exhaustive enumeration,
//! and aggregation of interchangeable sub-streams.

use std::collections::BTreeSet;

use crate::error::{Error, Result};
use crate::profile::DecodingProfile;
use crate::scenario::{all_streams, Scenario, SubStreamId};

/// Largest user count accepted by [`enumerate_profiles`].
pub const MAX_ENUMERATION_USERS: usize = 4;

/// Per-user sensitivity of total power to the user's rate target.
#[derive(Debug, Clone, PartialEq)]
pub struct DualVector(Vec<f64>);

impl DualVector {
    pub fn new(lambda: Vec<f64>) -> Result<Self> {
        if lambda.iter().any(|l| !l.is_finite() || *l < 0.0) {
            return Err(Error::Argument("dual entries must be finite and nonnegative".into()));
        }
        Ok(DualVector(lambda))
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// How equal duals are ordered.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum TieRule {
    #[default]
    LowerIndexFirst,
    HigherIndexFirst,
}

/// User ranking, first decoded first: ascending dual, ties by `tie`.
pub fn dual_ranking(d: &DualVector, tie: TieRule) -> Vec<usize> {
    let mut users: Vec<usize> = (0..d.len()).collect();
    users.sort_by(|&a, &b| {
        d.0[a].total_cmp(&d.0[b]).then_with(|| match tie {
            TieRule::LowerIndexFirst => a.cmp(&b),
            TieRule::HigherIndexFirst => b.cmp(&a),
        })
    });
    users
}

/// Full-decode profile whose user blocks follow ascending duals at every
/// receiver, so the user with the largest dual is decoded last against the
/// cleanest floor.
pub fn dual_rank_profile(s: &Scenario, d: &DualVector, tie: TieRule) -> Result<DecodingProfile> {
    if d.len() != s.users() {
        return Err(Error::Shape(format!(
            "dual vector has {} entries, scenario has {} users",
            d.len(),
            s.users()
        )));
    }
    DecodingProfile::block_structured(s.users(), &dual_ranking(d, tie))
}

/// All orders of `items` in lexicographic order.
fn permutations(items: &[SubStreamId]) -> Vec<Vec<SubStreamId>> {
    let mut sorted = items.to_vec();
    sorted.sort();
    let mut out = vec![sorted.clone()];
    // Next lexicographic permutation.
    loop {
        let Some(i) = (0..sorted.len().saturating_sub(1))
            .rev()
            .find(|&i| sorted[i] < sorted[i + 1])
        else {
            break;
        };
        let j = (i + 1..sorted.len()).rev().find(|&j| sorted[j] > sorted[i]).unwrap();
        sorted.swap(i, j);
        sorted[i + 1..].reverse();
        out.push(sorted.clone());
    }
    out
}

/// Every admissible order at receiver `r`, sorted lexicographically.
fn receiver_orders(users: usize, r: usize, include_cross_subsets: bool) -> Vec<Vec<SubStreamId>> {
    let own: Vec<SubStreamId> = (0..users).map(|j| SubStreamId::new(r, j)).collect();
    let cross: Vec<SubStreamId> = (0..users)
        .filter(|&i| i != r)
        .map(|i| SubStreamId::new(i, r))
        .collect();
    let subsets: Vec<Vec<SubStreamId>> = if include_cross_subsets {
        (0..1usize << cross.len())
            .map(|mask| {
                cross
                    .iter()
                    .enumerate()
                    .filter(|(k, _)| mask >> k & 1 == 1)
                    .map(|(_, s)| *s)
                    .collect()
            })
            .collect()
    } else {
        vec![cross]
    };
    let mut out: Vec<Vec<SubStreamId>> = subsets
        .into_iter()
        .flat_map(|extra| {
            let mut items = own.clone();
            items.extend(extra);
            permutations(&items)
        })
        .collect();
    out.sort();
    out.dedup();
    out
}

/// Lazy, deterministic iterator over decoding profiles.
#[derive(Debug, Clone)]
pub struct ProfileEnumerator {
    per_receiver: Vec<Vec<Vec<SubStreamId>>>,
    cursor: Vec<usize>,
    done: bool,
}

impl ProfileEnumerator {
    /// Number of profiles the iterator yields in total.
    pub fn total(&self) -> usize {
        self.per_receiver.iter().map(Vec::len).product()
    }
}

impl Iterator for ProfileEnumerator {
    type Item = DecodingProfile;

    fn next(&mut self) -> Option<DecodingProfile> {
        if self.done {
            return None;
        }
        let order = self
            .cursor
            .iter()
            .enumerate()
            .map(|(r, &k)| self.per_receiver[r][k].clone())
            .collect();
        // Odometer with receiver 0 most significant.
        let mut r = self.cursor.len();
        loop {
            if r == 0 {
                self.done = true;
                break;
            }
            r -= 1;
            self.cursor[r] += 1;
            if self.cursor[r] < self.per_receiver[r].len() {
                break;
            }
            self.cursor[r] = 0;
        }
        Some(DecodingProfile::new(order).expect("enumerated orders are valid"))
    }
}

/// Every profile in which receiver `r` orders its own streams plus cross
/// streams aimed at it (all of them, or any subset).
pub fn enumerate_profiles(s: &Scenario, include_cross_subsets: bool) -> Result<ProfileEnumerator> {
    let u = s.users();
    if u > MAX_ENUMERATION_USERS {
        return Err(Error::Capacity {
            what: "profile enumeration",
            bound: MAX_ENUMERATION_USERS,
            got: u,
        });
    }
    let per_receiver: Vec<_> = (0..u).map(|r| receiver_orders(u, r, include_cross_subsets)).collect();
    Ok(ProfileEnumerator { cursor: vec![0; u], per_receiver, done: false })
}

/// Full-decode profiles with per-receiver user-block rankings: `(U!)^U`
/// candidates in canonical within-block order.
pub fn block_structured_profiles(s: &Scenario) -> Result<Vec<DecodingProfile>> {
    let u = s.users();
    if u > MAX_ENUMERATION_USERS {
        return Err(Error::Capacity {
            what: "block-structured enumeration",
            bound: MAX_ENUMERATION_USERS,
            got: u,
        });
    }
    let rankings = user_rankings(u);
    let mut out = Vec::new();
    let mut cursor = vec![0usize; u];
    loop {
        let per_rx: Vec<Vec<usize>> = cursor.iter().map(|&k| rankings[k].clone()).collect();
        out.push(DecodingProfile::block_structured_per_receiver(u, &per_rx)?);
        let mut r = u;
        loop {
            if r == 0 {
                return Ok(out);
            }
            r -= 1;
            cursor[r] += 1;
            if cursor[r] < rankings.len() {
                break;
            }
            cursor[r] = 0;
        }
    }
}

/// All permutations of `0..users`, lexicographic.
pub fn user_rankings(users: usize) -> Vec<Vec<usize>> {
    let ids: Vec<SubStreamId> = (0..users).map(|u| SubStreamId::new(u, u)).collect();
    permutations(&ids)
        .into_iter()
        .map(|p| p.into_iter().map(|s| s.tx).collect())
        .collect()
}

/// Partition of the sub-streams into groups sharing one power variable per
/// block. The group power is carried by its first member (the one decoded
/// first at the transmitter's receiver).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AggregationMap {
    users: usize,
    groups: Vec<Vec<SubStreamId>>,
    group_of: Vec<usize>,
}

impl AggregationMap {
    /// Each stream in its own group.
    pub fn identity(users: usize) -> Self {
        let groups: Vec<Vec<SubStreamId>> = all_streams(users).map(|s| vec![s]).collect();
        Self::from_groups(users, groups).expect("identity partition is valid")
    }

    pub fn from_groups(users: usize, groups: Vec<Vec<SubStreamId>>) -> Result<Self> {
        let mut group_of = vec![usize::MAX; users * users];
        for (g, members) in groups.iter().enumerate() {
            if members.is_empty() {
                return Err(Error::Argument(format!("group {g} is empty")));
            }
            let tx = members[0].tx;
            for s in members {
                if s.tx != tx {
                    return Err(Error::Argument(format!("group {g} mixes transmitters")));
                }
                let k = s.index(users);
                if group_of[k] != usize::MAX {
                    return Err(Error::Argument(format!("stream {s} in two groups")));
                }
                group_of[k] = g;
            }
        }
        if group_of.iter().any(|&g| g == usize::MAX) {
            return Err(Error::Argument("some stream belongs to no group".into()));
        }
        Ok(AggregationMap { users, groups, group_of })
    }

    pub fn len(&self) -> usize {
        self.groups.len()
    }

    pub fn is_empty(&self) -> bool {
        self.groups.is_empty()
    }

    pub fn groups(&self) -> &[Vec<SubStreamId>] {
        &self.groups
    }

    pub fn group_of(&self, s: SubStreamId) -> usize {
        self.group_of[s.index(self.users)]
    }

    pub fn transmitter(&self, g: usize) -> usize {
        self.groups[g][0].tx
    }

    pub fn representative(&self, g: usize) -> SubStreamId {
        self.groups[g][0]
    }

    /// Checks that every group is decoded by one receiver set and sits
    /// contiguously in every chain that decodes it.
    pub fn check_against(&self, prof: &DecodingProfile) -> Result<()> {
        if prof.users() != self.users {
            return Err(Error::Shape("aggregation and profile disagree on user count".into()));
        }
        for (g, members) in self.groups.iter().enumerate() {
            let decoders: BTreeSet<usize> = prof.decoders(members[0]).into_iter().collect();
            for s in members {
                let d: BTreeSet<usize> = prof.decoders(*s).into_iter().collect();
                if d != decoders {
                    return Err(Error::Argument(format!(
                        "group {} mixes receiver sets",
                        g + 1
                    )));
                }
            }
            for &r in &decoders {
                let mut pos: Vec<usize> =
                    members.iter().map(|s| prof.position(r, *s).unwrap()).collect();
                pos.sort_unstable();
                if pos.windows(2).any(|w| w[1] != w[0] + 1) {
                    return Err(Error::Argument(format!(
                        "group {} is not contiguous at receiver {}",
                        g + 1,
                        r + 1
                    )));
                }
                if prof.position(r, members[0]) != pos.first().copied() && r == members[0].tx {
                    return Err(Error::Argument(format!(
                        "group {} representative is not decoded first",
                        g + 1
                    )));
                }
            }
        }
        Ok(())
    }
}

/// Merges, per transmitter, runs of sub-streams that are decoded by the same
/// receiver set and occupy adjacent positions in every chain decoding them.
/// Such streams are indistinguishable to every receiver, so only their total
/// power matters.
pub fn collapse_dof(s: &Scenario, prof: &DecodingProfile) -> Result<AggregationMap> {
    let u = s.users();
    if prof.users() != u {
        return Err(Error::Shape("profile and scenario disagree on user count".into()));
    }
    let mut groups: Vec<Vec<SubStreamId>> = Vec::new();
    for tx in 0..u {
        let mut current: Vec<SubStreamId> = Vec::new();
        for &st in prof.order(tx).iter().filter(|st| st.tx == tx) {
            let mergeable = current.last().map_or(false, |&last| {
                let same_set = prof.decoders(last) == prof.decoders(st);
                same_set
                    && prof.decoders(st).iter().all(|&r| {
                        let a = prof.position(r, last).unwrap();
                        let b = prof.position(r, st).unwrap();
                        b == a + 1
                    })
            });
            if !mergeable && !current.is_empty() {
                groups.push(std::mem::take(&mut current));
            }
            current.push(st);
        }
        if !current.is_empty() {
            groups.push(current);
        }
    }
    AggregationMap::from_groups(u, groups)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scenario(u: usize) -> Scenario {
        let h: Vec<Vec<f64>> = (0..u)
            .map(|r| (0..u).map(|i| if r == i { 1.0 } else { 0.3 }).collect())
            .collect();
        Scenario::single_tone(&h, 0.5, 1.0).unwrap()
    }

    fn sid(i: usize, j: usize) -> SubStreamId {
        SubStreamId::new(i, j)
    }

    #[test]
    fn three_user_dual_example_block_order() {
        // λ3 > λ1 > λ2: user 2 first, then user 1, then user 3.
        let d = DualVector::new(vec![2.0, 1.0, 3.0]).unwrap();
        assert_eq!(dual_ranking(&d, TieRule::default()), vec![1, 0, 2]);
        let p = dual_rank_profile(&scenario(3), &d, TieRule::default()).unwrap();
        assert_eq!(
            p.order(2),
            &[sid(1, 2), sid(0, 2), sid(2, 0), sid(2, 1), sid(2, 2)]
        );
    }

    #[test]
    fn equal_duals_follow_index_order() {
        let d = DualVector::new(vec![1.0; 3]).unwrap();
        assert_eq!(dual_ranking(&d, TieRule::LowerIndexFirst), vec![0, 1, 2]);
        assert_eq!(dual_ranking(&d, TieRule::HigherIndexFirst), vec![2, 1, 0]);
    }

    #[test]
    fn ranking_invariant_to_scaling() {
        let d = DualVector::new(vec![5.0, 1.0]).unwrap();
        let d10 = DualVector::new(vec![50.0, 10.0]).unwrap();
        let s = scenario(2);
        assert_eq!(
            dual_rank_profile(&s, &d, TieRule::default()).unwrap(),
            dual_rank_profile(&s, &d10, TieRule::default()).unwrap()
        );
        // User 2 is decoded before user 1 everywhere.
        let p = dual_rank_profile(&s, &d, TieRule::default()).unwrap();
        assert_eq!(p.order(0)[0], sid(1, 0));
        assert_eq!(p.order(1)[0..2], [sid(1, 0), sid(1, 1)]);
    }

    #[test]
    fn negative_dual_rejected() {
        assert!(DualVector::new(vec![1.0, -0.1]).is_err());
    }

    #[test]
    fn enumeration_counts() {
        assert_eq!(enumerate_profiles(&scenario(1), true).unwrap().count(), 1);
        let e = enumerate_profiles(&scenario(2), false).unwrap();
        assert_eq!(e.total(), 36);
        assert_eq!(e.count(), 36);
        let all: Vec<_> = enumerate_profiles(&scenario(2), true).unwrap().collect();
        assert_eq!(all.len(), 64);
        let distinct: BTreeSet<_> = all.iter().cloned().collect();
        assert_eq!(distinct.len(), 64);
        let mut sorted = all.clone();
        sorted.sort();
        assert_eq!(sorted, all, "generation is lexicographic");
    }

    #[test]
    fn enumeration_guard() {
        let err = enumerate_profiles(&scenario(5), false).unwrap_err();
        assert!(matches!(err, Error::Capacity { bound: 4, got: 5, .. }));
    }

    #[test]
    fn block_structured_count() {
        assert_eq!(block_structured_profiles(&scenario(2)).unwrap().len(), 4);
        assert_eq!(block_structured_profiles(&scenario(3)).unwrap().len(), 216);
    }

    #[test]
    fn collapse_single_user() {
        let s = scenario(1);
        let p = DecodingProfile::new(vec![vec![sid(0, 0)]]).unwrap();
        assert_eq!(collapse_dof(&s, &p).unwrap().len(), 1);
    }

    #[test]
    fn collapse_without_cross_decoding_merges_per_user() {
        let s = scenario(2);
        let p = DecodingProfile::new(vec![
            vec![sid(0, 1), sid(0, 0)],
            vec![sid(1, 0), sid(1, 1)],
        ])
        .unwrap();
        let agg = collapse_dof(&s, &p).unwrap();
        assert_eq!(agg.len(), 2);
        agg.check_against(&p).unwrap();
    }

    #[test]
    fn collapse_with_one_cross_stream_hits_dof_count() {
        let s = scenario(2);
        let p = DecodingProfile::new(vec![
            vec![sid(0, 1), sid(0, 0)],
            vec![sid(0, 1), sid(1, 0), sid(1, 1)],
        ])
        .unwrap();
        let agg = collapse_dof(&s, &p).unwrap();
        assert_eq!(agg.len(), 3);
        assert_eq!(agg.group_of(sid(1, 0)), agg.group_of(sid(1, 1)));
    }

    #[test]
    fn collapse_full_decode_keeps_every_stream() {
        let s = scenario(2);
        let p = DecodingProfile::block_structured(2, &[0, 1]).unwrap();
        let agg = collapse_dof(&s, &p).unwrap();
        assert_eq!(agg.len(), 4);
        agg.check_against(&p).unwrap();
    }

    #[test]
    fn collapse_never_exceeds_stream_count() {
        let s = scenario(2);
        for p in enumerate_profiles(&s, true).unwrap() {
            let agg = collapse_dof(&s, &p).unwrap();
            assert!(agg.len() <= 4);
            agg.check_against(&p).unwrap();
        }
    }

    #[test]
    fn non_adjacent_group_rejected() {
        let p = DecodingProfile::new(vec![
            vec![sid(0, 1), sid(1, 0), sid(0, 0)],
            vec![sid(1, 0), sid(1, 1)],
        ])
        .unwrap();
        let bad = AggregationMap::from_groups(
            2,
            vec![vec![sid(0, 1), sid(0, 0)], vec![sid(1, 0)], vec![sid(1, 1)]],
        )
        .unwrap();
        assert!(bad.check_against(&p).is_err());
    }
}
