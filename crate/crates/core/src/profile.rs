//! Per-receiver SIC decoding orders.

use std::fmt;

use crate::error::{Error, Result};
use crate::scenario::SubStreamId;

/// Ordered list of decoded sub-streams at each receiver.
///
/// Position 0 is decoded first and sees every later stream (plus all
/// undecoded streams) as interference; the last position is decoded against
/// the bare interference floor. The same order applies on every block.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct DecodingProfile {
    order: Vec<Vec<SubStreamId>>,
}

impl DecodingProfile {
    /// Validates and wraps per-receiver orders.
    pub fn new(order: Vec<Vec<SubStreamId>>) -> Result<Self> {
        let users = order.len();
        if users == 0 {
            return Err(Error::Profile("no receivers".into()));
        }
        for (r, seq) in order.iter().enumerate() {
            let mut seen = vec![false; users * users];
            for s in seq {
                if s.tx >= users || s.companion >= users {
                    return Err(Error::Profile(format!(
                        "stream {s} out of range at receiver {}",
                        r + 1
                    )));
                }
                if s.tx != r && s.companion != r {
                    return Err(Error::Profile(format!(
                        "receiver {} cannot decode stream {s}",
                        r + 1
                    )));
                }
                let k = s.index(users);
                if seen[k] {
                    return Err(Error::Profile(format!(
                        "stream {s} listed twice at receiver {}",
                        r + 1
                    )));
                }
                seen[k] = true;
            }
            for j in 0..users {
                if !seen[SubStreamId::new(r, j).index(users)] {
                    return Err(Error::Profile(format!(
                        "receiver {} does not decode its own stream {}",
                        r + 1,
                        SubStreamId::new(r, j)
                    )));
                }
            }
        }
        Ok(DecodingProfile { order })
    }

    /// Every receiver decodes all cross streams aimed at it; user blocks in
    /// `user_order` (first decoded first), within a block the cross stream
    /// before own streams, own commons by companion index, private last.
    pub fn block_structured(users: usize, user_order: &[usize]) -> Result<Self> {
        let per_rx = vec![user_order.to_vec(); users];
        Self::block_structured_per_receiver(users, &per_rx)
    }

    /// As [`block_structured`](Self::block_structured) with a separate user
    /// ranking at every receiver.
    pub fn block_structured_per_receiver(users: usize, user_orders: &[Vec<usize>]) -> Result<Self> {
        if user_orders.len() != users {
            return Err(Error::Profile(format!(
                "expected {users} user rankings, got {}",
                user_orders.len()
            )));
        }
        let order = user_orders
            .iter()
            .enumerate()
            .map(|(r, ranking)| {
                ranking
                    .iter()
                    .flat_map(|&u| user_block(users, r, u))
                    .collect()
            })
            .collect();
        Self::new(order)
    }

    pub fn users(&self) -> usize {
        self.order.len()
    }

    pub fn order(&self, r: usize) -> &[SubStreamId] {
        &self.order[r]
    }

    pub fn orders(&self) -> &[Vec<SubStreamId>] {
        &self.order
    }

    pub fn position(&self, r: usize, s: SubStreamId) -> Option<usize> {
        self.order[r].iter().position(|&x| x == s)
    }

    pub fn decodes(&self, r: usize, s: SubStreamId) -> bool {
        self.position(r, s).is_some()
    }

    /// Receivers that decode `s`: always its transmitter, plus its companion
    /// when the companion's order lists it.
    pub fn decoders(&self, s: SubStreamId) -> Vec<usize> {
        let mut out = vec![s.tx];
        if !s.is_private() && self.decodes(s.companion, s) {
            out.push(s.companion);
        }
        out
    }

    /// True when every cross stream is decoded at its companion receiver.
    pub fn is_full_decode(&self) -> bool {
        let u = self.users();
        self.order.iter().all(|seq| seq.len() == 2 * u - 1)
    }
}

/// Streams of user `u` decoded at receiver `r` in canonical within-block order.
fn user_block(users: usize, r: usize, u: usize) -> Vec<SubStreamId> {
    if u == r {
        let mut v: Vec<SubStreamId> = (0..users)
            .filter(|&j| j != r)
            .map(|j| SubStreamId::new(r, j))
            .collect();
        v.push(SubStreamId::new(r, r));
        v
    } else {
        vec![SubStreamId::new(u, r)]
    }
}

impl fmt::Display for DecodingProfile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (r, seq) in self.order.iter().enumerate() {
            if r > 0 {
                write!(f, "; ")?;
            }
            write!(f, "rx{}:", r + 1)?;
            for s in seq {
                write!(f, " {s}")?;
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sid(i: usize, j: usize) -> SubStreamId {
        SubStreamId::new(i, j)
    }

    #[test]
    fn rejects_missing_own_stream() {
        let err = DecodingProfile::new(vec![vec![sid(0, 0)], vec![sid(1, 0), sid(1, 1)]]);
        assert!(matches!(err, Err(Error::Profile(_))));
    }

    #[test]
    fn rejects_foreign_stream() {
        let err = DecodingProfile::new(vec![
            vec![sid(0, 0), sid(0, 1), sid(0, 2), sid(1, 2)],
            vec![sid(1, 0), sid(1, 1), sid(1, 2)],
            vec![sid(2, 0), sid(2, 1), sid(2, 2)],
        ]);
        assert!(matches!(err, Err(Error::Profile(_))));
    }

    #[test]
    fn rejects_duplicates() {
        let err = DecodingProfile::new(vec![vec![sid(0, 0), sid(0, 0)]]);
        assert!(matches!(err, Err(Error::Profile(_))));
    }

    #[test]
    fn block_structured_layout() {
        let p = DecodingProfile::block_structured(2, &[1, 0]).unwrap();
        assert_eq!(p.order(0), &[sid(1, 0), sid(0, 1), sid(0, 0)]);
        assert_eq!(p.order(1), &[sid(1, 0), sid(1, 1), sid(0, 1)]);
        assert!(p.is_full_decode());
        assert_eq!(p.decoders(sid(0, 1)), vec![0, 1]);
        assert_eq!(p.decoders(sid(0, 0)), vec![0]);
    }
}
