//! Problem instances and allocation points.
//!
//! All indices are zero-based. A channel amplitude `gain(r, i, n)` is the
//! real magnitude from transmitter `i` to receiver `r` on block `n`; only its
//! square enters any rate formula.

use std::fmt;

use crate::error::{Error, Result};

/// A `users`-user interference channel over `blocks` parallel resource blocks.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    users: usize,
    blocks: usize,
    /// Flattened `[r][i][n]`.
    gain: Vec<f64>,
    /// Flattened `[r][n]`.
    noise: Vec<f64>,
    weight: Vec<f64>,
    rate_min: Vec<f64>,
    rate_factor: f64,
}

impl Scenario {
    /// Builds a scenario from nested arrays, checking every invariant.
    ///
    /// `gain[r][i][n]`, `noise[r][n]`.
    pub fn new(
        gain: &[Vec<Vec<f64>>],
        noise: &[Vec<f64>],
        weight: &[f64],
        rate_min: &[f64],
        rate_factor: f64,
    ) -> Result<Self> {
        let users = gain.len();
        if users == 0 {
            return Err(Error::Argument("user count must be at least 1".into()));
        }
        let blocks = gain[0].first().map(Vec::len).unwrap_or(0);
        if blocks == 0 {
            return Err(Error::Argument("block count must be at least 1".into()));
        }
        let mut flat = Vec::with_capacity(users * users * blocks);
        for (r, row) in gain.iter().enumerate() {
            if row.len() != users {
                return Err(Error::Shape(format!(
                    "gain[{r}] has {} transmitters, expected {users}",
                    row.len()
                )));
            }
            for (i, per_block) in row.iter().enumerate() {
                if per_block.len() != blocks {
                    return Err(Error::Shape(format!(
                        "gain[{r}][{i}] has {} blocks, expected {blocks}",
                        per_block.len()
                    )));
                }
                flat.extend_from_slice(per_block);
            }
        }
        if noise.len() != users || noise.iter().any(|v| v.len() != blocks) {
            return Err(Error::Shape(format!(
                "noise must be {users}x{blocks}"
            )));
        }
        let s = Scenario {
            users,
            blocks,
            gain: flat,
            noise: noise.concat(),
            weight: weight.to_vec(),
            rate_min: rate_min.to_vec(),
            rate_factor,
        };
        s.validate()?;
        Ok(s)
    }

    /// Single-block scenario from a channel matrix `h[r][i]`, unit noise and
    /// weights, and a common rate target.
    pub fn single_tone(h: &[Vec<f64>], rate_min: f64, rate_factor: f64) -> Result<Self> {
        let u = h.len();
        let gain: Vec<Vec<Vec<f64>>> = h
            .iter()
            .map(|row| row.iter().map(|&g| vec![g]).collect())
            .collect();
        Scenario::new(
            &gain,
            &vec![vec![1.0]; u],
            &vec![1.0; u],
            &vec![rate_min; u],
            rate_factor,
        )
    }

    fn validate(&self) -> Result<()> {
        let u = self.users;
        if self.weight.len() != u {
            return Err(Error::Shape(format!("weights must have {u} entries")));
        }
        if self.rate_min.len() != u {
            return Err(Error::Shape(format!("rate_min must have {u} entries")));
        }
        if self.gain.iter().any(|g| !g.is_finite() || *g < 0.0) {
            return Err(Error::Argument("gains must be finite and nonnegative".into()));
        }
        if self.noise.iter().any(|v| !v.is_finite() || *v <= 0.0) {
            return Err(Error::Argument("noise variances must be positive".into()));
        }
        if self.weight.iter().any(|w| !w.is_finite() || *w <= 0.0) {
            return Err(Error::Argument("weights must be positive".into()));
        }
        if self.rate_min.iter().any(|b| !b.is_finite() || *b < 0.0) {
            return Err(Error::Argument("rate targets must be nonnegative".into()));
        }
        if !self.rate_factor.is_finite() || self.rate_factor <= 0.0 {
            return Err(Error::Argument("rate_factor must be positive".into()));
        }
        Ok(())
    }

    pub fn users(&self) -> usize {
        self.users
    }

    pub fn blocks(&self) -> usize {
        self.blocks
    }

    pub fn rate_factor(&self) -> f64 {
        self.rate_factor
    }

    pub fn gain(&self, r: usize, i: usize, n: usize) -> f64 {
        self.gain[(r * self.users + i) * self.blocks + n]
    }

    /// Squared amplitude, the power gain seen by receiver `r` from `i`.
    pub fn power_gain(&self, r: usize, i: usize, n: usize) -> f64 {
        let g = self.gain(r, i, n);
        g * g
    }

    pub fn noise(&self, r: usize, n: usize) -> f64 {
        self.noise[r * self.blocks + n]
    }

    pub fn weight(&self, u: usize) -> f64 {
        self.weight[u]
    }

    pub fn weights(&self) -> &[f64] {
        &self.weight
    }

    pub fn rate_min(&self, u: usize) -> f64 {
        self.rate_min[u]
    }

    pub fn rate_mins(&self) -> &[f64] {
        &self.rate_min
    }

    /// Returns a copy with a different rate convention.
    pub fn with_rate_factor(&self, rate_factor: f64) -> Result<Self> {
        let mut s = self.clone();
        s.rate_factor = rate_factor;
        s.validate()?;
        Ok(s)
    }

    /// Returns a copy with different rate targets.
    pub fn with_rate_min(&self, rate_min: &[f64]) -> Result<Self> {
        let mut s = self.clone();
        s.rate_min = rate_min.to_vec();
        s.validate()?;
        Ok(s)
    }

    /// Returns a copy with different user weights.
    pub fn with_weights(&self, weight: &[f64]) -> Result<Self> {
        let mut s = self.clone();
        s.weight = weight.to_vec();
        s.validate()?;
        Ok(s)
    }

    /// Multiplies every noise variance by `factor`.
    pub fn with_noise_scaled(&self, factor: f64) -> Result<Self> {
        let mut s = self.clone();
        s.noise.iter_mut().for_each(|v| *v *= factor);
        s.validate()?;
        Ok(s)
    }

    /// Nested `gain[r][i][n]`.
    pub fn gain_nested(&self) -> Vec<Vec<Vec<f64>>> {
        (0..self.users)
            .map(|r| {
                (0..self.users)
                    .map(|i| (0..self.blocks).map(|n| self.gain(r, i, n)).collect())
                    .collect()
            })
            .collect()
    }

    /// Nested `noise[r][n]`.
    pub fn noise_nested(&self) -> Vec<Vec<f64>> {
        self.noise.chunks(self.blocks).map(<[f64]>::to_vec).collect()
    }

    pub(crate) fn check_receiver(&self, r: usize, n: usize) -> Result<()> {
        if r >= self.users {
            return Err(Error::Argument(format!(
                "receiver {r} out of range (U = {})",
                self.users
            )));
        }
        if n >= self.blocks {
            return Err(Error::Argument(format!(
                "block {n} out of range (N = {})",
                self.blocks
            )));
        }
        Ok(())
    }
}

/// Sub-stream `(tx, companion)`: sent by `tx`, decodable at receivers `tx`
/// and `companion`. `tx == companion` is the private stream.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct SubStreamId {
    pub tx: usize,
    pub companion: usize,
}

impl SubStreamId {
    pub const fn new(tx: usize, companion: usize) -> Self {
        SubStreamId { tx, companion }
    }

    pub fn is_private(&self) -> bool {
        self.tx == self.companion
    }

    /// Dense index in `0..users*users`.
    pub fn index(&self, users: usize) -> usize {
        self.tx * users + self.companion
    }

    pub fn from_index(idx: usize, users: usize) -> Self {
        SubStreamId::new(idx / users, idx % users)
    }
}

impl fmt::Display for SubStreamId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({},{})", self.tx + 1, self.companion + 1)
    }
}

/// Continuous variables: per-stream powers and rates, per-receiver auxiliary
/// interference bounds.
#[derive(Debug, Clone, PartialEq)]
pub struct AllocationPoint {
    users: usize,
    blocks: usize,
    /// Flattened `[i][j][n]`.
    power: Vec<f64>,
    /// Flattened `[i][j][n]`.
    rate: Vec<f64>,
    /// Flattened `[r][n]`.
    aux: Vec<f64>,
}

impl AllocationPoint {
    pub fn zeros(users: usize, blocks: usize) -> Self {
        AllocationPoint {
            users,
            blocks,
            power: vec![0.0; users * users * blocks],
            rate: vec![0.0; users * users * blocks],
            aux: vec![0.0; users * blocks],
        }
    }

    pub fn for_scenario(s: &Scenario) -> Self {
        Self::zeros(s.users(), s.blocks())
    }

    /// Builds from nested `power[i][j][n]`, `rate[i][j][n]`, `aux[r][n]`.
    pub fn from_nested(
        power: &[Vec<Vec<f64>>],
        rate: &[Vec<Vec<f64>>],
        aux: &[Vec<f64>],
    ) -> Result<Self> {
        let users = power.len();
        let blocks = power
            .first()
            .and_then(|r| r.first())
            .map(Vec::len)
            .unwrap_or(0);
        let flatten = |a: &[Vec<Vec<f64>>], what: &str| -> Result<Vec<f64>> {
            if a.len() != users
                || a.iter()
                    .any(|r| r.len() != users || r.iter().any(|v| v.len() != blocks))
            {
                return Err(Error::Shape(format!("{what} must be {users}x{users}x{blocks}")));
            }
            Ok(a.iter().flatten().flatten().copied().collect())
        };
        let power = flatten(power, "power")?;
        let rate = flatten(rate, "rate")?;
        if aux.len() != users || aux.iter().any(|v| v.len() != blocks) {
            return Err(Error::Shape(format!("aux must be {users}x{blocks}")));
        }
        let pt = AllocationPoint {
            users,
            blocks,
            power,
            rate,
            aux: aux.concat(),
        };
        if pt
            .power
            .iter()
            .chain(&pt.rate)
            .chain(&pt.aux)
            .any(|v| !v.is_finite() || *v < 0.0)
        {
            return Err(Error::Argument(
                "allocation entries must be finite and nonnegative".into(),
            ));
        }
        Ok(pt)
    }

    pub fn users(&self) -> usize {
        self.users
    }

    pub fn blocks(&self) -> usize {
        self.blocks
    }

    fn stream_offset(&self, s: SubStreamId, n: usize) -> usize {
        (s.tx * self.users + s.companion) * self.blocks + n
    }

    pub fn power(&self, s: SubStreamId, n: usize) -> f64 {
        self.power[self.stream_offset(s, n)]
    }

    pub fn set_power(&mut self, s: SubStreamId, n: usize, p: f64) {
        let k = self.stream_offset(s, n);
        self.power[k] = p;
    }

    pub fn rate(&self, s: SubStreamId, n: usize) -> f64 {
        self.rate[self.stream_offset(s, n)]
    }

    pub fn set_rate(&mut self, s: SubStreamId, n: usize, b: f64) {
        let k = self.stream_offset(s, n);
        self.rate[k] = b;
    }

    pub fn aux(&self, r: usize, n: usize) -> f64 {
        self.aux[r * self.blocks + n]
    }

    pub fn set_aux(&mut self, r: usize, n: usize, c: f64) {
        self.aux[r * self.blocks + n] = c;
    }

    /// Total transmit power of user `u` summed over its streams and blocks.
    pub fn user_power(&self, u: usize) -> f64 {
        let span = self.users * self.blocks;
        self.power[u * span..(u + 1) * span].iter().sum()
    }

    pub fn power_nested(&self) -> Vec<Vec<Vec<f64>>> {
        nest3(&self.power, self.users, self.blocks)
    }

    pub fn rate_nested(&self) -> Vec<Vec<Vec<f64>>> {
        nest3(&self.rate, self.users, self.blocks)
    }

    pub fn aux_nested(&self) -> Vec<Vec<f64>> {
        self.aux.chunks(self.blocks).map(<[f64]>::to_vec).collect()
    }

    /// Multiplies every power by `factor`.
    pub fn scale_powers(&mut self, factor: f64) {
        self.power.iter_mut().for_each(|p| *p *= factor);
    }

    pub(crate) fn check_shape(&self, s: &Scenario) -> Result<()> {
        if self.users != s.users() || self.blocks != s.blocks() {
            return Err(Error::Shape(format!(
                "allocation is {}x{} (users x blocks), scenario is {}x{}",
                self.users,
                self.blocks,
                s.users(),
                s.blocks()
            )));
        }
        Ok(())
    }

    pub(crate) fn powers_finite(&self) -> bool {
        self.power.iter().all(|p| p.is_finite())
    }
}

fn nest3(flat: &[f64], users: usize, blocks: usize) -> Vec<Vec<Vec<f64>>> {
    flat.chunks(users * blocks)
        .map(|row| row.chunks(blocks).map(<[f64]>::to_vec).collect())
        .collect()
}

/// Every sub-stream id for `users` users, in dense index order.
pub fn all_streams(users: usize) -> impl Iterator<Item = SubStreamId> {
    (0..users * users).map(move |k| SubStreamId::from_index(k, users))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_negative_gain() {
        let err = Scenario::single_tone(&[vec![1.0, -0.1], vec![0.0, 1.0]], 0.5, 1.0);
        assert!(matches!(err, Err(Error::Argument(_))));
    }

    #[test]
    fn rejects_ragged_gain() {
        let err = Scenario::single_tone(&[vec![1.0], vec![0.0, 1.0]], 0.5, 1.0);
        assert!(matches!(err, Err(Error::Shape(_))));
    }

    #[test]
    fn rejects_zero_noise() {
        let gain = vec![vec![vec![1.0]]];
        let err = Scenario::new(&gain, &[vec![0.0]], &[1.0], &[0.5], 1.0);
        assert!(matches!(err, Err(Error::Argument(_))));
    }

    #[test]
    fn stream_index_roundtrip() {
        for k in 0..9 {
            assert_eq!(SubStreamId::from_index(k, 3).index(3), k);
        }
        assert_eq!(SubStreamId::new(1, 0).to_string(), "(2,1)");
    }

    #[test]
    fn allocation_accessors() {
        let mut pt = AllocationPoint::zeros(2, 2);
        pt.set_power(SubStreamId::new(1, 0), 1, 3.0);
        pt.set_power(SubStreamId::new(1, 1), 0, 2.0);
        assert_eq!(pt.user_power(1), 5.0);
        assert_eq!(pt.user_power(0), 0.0);
        assert_eq!(pt.power_nested()[1][0], vec![0.0, 3.0]);
        let back =
            AllocationPoint::from_nested(&pt.power_nested(), &pt.rate_nested(), &pt.aux_nested())
                .unwrap();
        assert_eq!(back, pt);
    }
}
