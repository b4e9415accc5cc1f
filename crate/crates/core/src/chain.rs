//! Exact SIC rate evaluation for a fixed decoding profile.
//!
//! These functions are the referee for everything the solver produces:
//! achieved rates are always recomputed here from powers alone.

use crate::error::{Error, Result};
use crate::profile::DecodingProfile;
use crate::scenario::{all_streams, AllocationPoint, Scenario, SubStreamId};

/// `ρ·log2(1 + x)` with `ln_1p` precision.
#[inline]
pub fn log2_1p(rate_factor: f64, x: f64) -> f64 {
    rate_factor * x.ln_1p() / std::f64::consts::LN_2
}

/// Incremental rates along one receiver's SIC chain on one block.
#[derive(Debug, Clone, PartialEq)]
pub struct RateChain {
    pub receiver: usize,
    pub block: usize,
    pub streams: Vec<SubStreamId>,
    /// Rate of `streams[k]` decoded against everything after it plus the floor.
    pub incremental: Vec<f64>,
    /// Noise plus undecoded interference.
    pub floor: f64,
    /// Total received power of the decoded streams.
    pub decoded_power: f64,
}

impl RateChain {
    /// Sum of incremental rates.
    pub fn total(&self) -> f64 {
        self.incremental.iter().sum()
    }

    /// Closed form of the telescoped sum, `ρ·log2((floor + decoded)/floor)`.
    pub fn telescoped(&self, rate_factor: f64) -> f64 {
        log2_1p(rate_factor, self.decoded_power / self.floor)
    }
}

/// Received power at `r` on block `n` of every stream missing from `order[r]`.
pub fn undecoded_interference(
    s: &Scenario,
    prof: &DecodingProfile,
    pt: &AllocationPoint,
    r: usize,
    n: usize,
) -> Result<f64> {
    s.check_receiver(r, n)?;
    pt.check_shape(s)?;
    check_profile(s, prof)?;
    Ok(undecoded_unchecked(s, prof, pt, r, n))
}

pub(crate) fn undecoded_unchecked(
    s: &Scenario,
    prof: &DecodingProfile,
    pt: &AllocationPoint,
    r: usize,
    n: usize,
) -> f64 {
    all_streams(s.users())
        .filter(|&st| !prof.decodes(r, st))
        .map(|st| s.power_gain(r, st.tx, n) * pt.power(st, n))
        .sum()
}

pub(crate) fn check_profile(s: &Scenario, prof: &DecodingProfile) -> Result<()> {
    if prof.users() != s.users() {
        return Err(Error::Shape(format!(
            "profile has {} receivers, scenario has {} users",
            prof.users(),
            s.users()
        )));
    }
    Ok(())
}

/// Incremental SIC rates at receiver `r` on block `n`.
pub fn sic_rate_chain(
    s: &Scenario,
    prof: &DecodingProfile,
    pt: &AllocationPoint,
    r: usize,
    n: usize,
) -> Result<RateChain> {
    s.check_receiver(r, n)?;
    pt.check_shape(s)?;
    check_profile(s, prof)?;
    if !pt.powers_finite() {
        return Err(Error::Numeric("allocation powers".into()));
    }
    Ok(chain_unchecked(s, prof, pt, r, n))
}

pub(crate) fn chain_unchecked(
    s: &Scenario,
    prof: &DecodingProfile,
    pt: &AllocationPoint,
    r: usize,
    n: usize,
) -> RateChain {
    let rho = s.rate_factor();
    let floor = s.noise(r, n) + undecoded_unchecked(s, prof, pt, r, n);
    let streams = prof.order(r).to_vec();
    let received: Vec<f64> = streams
        .iter()
        .map(|st| s.power_gain(r, st.tx, n) * pt.power(*st, n))
        .collect();
    let mut incremental = vec![0.0; streams.len()];
    let mut below = floor;
    for k in (0..streams.len()).rev() {
        incremental[k] = log2_1p(rho, received[k] / below);
        below += received[k];
    }
    RateChain {
        receiver: r,
        block: n,
        streams,
        incremental,
        floor,
        decoded_power: received.iter().sum(),
    }
}

/// Supportable rate of every stream on every block, flattened `[i][j][n]`
/// like [`AllocationPoint`]: the chain rate at the transmitter's receiver,
/// or the smaller of the two chain rates when the companion also decodes it.
pub fn stream_rates(
    s: &Scenario,
    prof: &DecodingProfile,
    pt: &AllocationPoint,
) -> Result<AllocationPoint> {
    pt.check_shape(s)?;
    check_profile(s, prof)?;
    if !pt.powers_finite() {
        return Err(Error::Numeric("allocation powers".into()));
    }
    let u = s.users();
    let mut out = pt.clone();
    for n in 0..s.blocks() {
        let chains: Vec<RateChain> = (0..u).map(|r| chain_unchecked(s, prof, pt, r, n)).collect();
        let mut best = vec![f64::INFINITY; u * u];
        for ch in &chains {
            for (st, &b) in ch.streams.iter().zip(&ch.incremental) {
                let k = st.index(u);
                best[k] = best[k].min(b);
            }
        }
        for st in all_streams(u) {
            out.set_rate(st, n, best[st.index(u)]);
        }
    }
    Ok(out)
}

/// Per-user achieved rate summed over streams and blocks.
pub fn achieved_user_rates(
    s: &Scenario,
    prof: &DecodingProfile,
    pt: &AllocationPoint,
) -> Result<Vec<f64>> {
    let rates = stream_rates(s, prof, pt)?;
    Ok((0..s.users())
        .map(|u| {
            (0..s.users())
                .flat_map(|j| (0..s.blocks()).map(move |n| (j, n)))
                .map(|(j, n)| rates.rate(SubStreamId::new(u, j), n))
                .sum()
        })
        .collect())
}

/// Outcome of [`verify_feasible`].
#[derive(Debug, Clone, PartialEq)]
pub struct FeasibilityReport {
    pub feasible: bool,
    /// Achieved rate minus target, per user.
    pub margin: Vec<f64>,
    pub achieved: Vec<f64>,
    /// Largest excess of a rate-variable suffix sum over its exact capacity.
    pub max_suffix_excess: f64,
}

impl FeasibilityReport {
    pub fn min_margin(&self) -> f64 {
        self.margin.iter().copied().fold(f64::INFINITY, f64::min)
    }
}

/// Checks the rate variables of `pt` against every exact suffix capacity and
/// the powers of `pt` against the rate targets.
pub fn verify_feasible(
    s: &Scenario,
    prof: &DecodingProfile,
    pt: &AllocationPoint,
    tol: f64,
) -> Result<FeasibilityReport> {
    if !(tol > 0.0) {
        return Err(Error::Argument(format!("tolerance must be positive, got {tol}")));
    }
    let achieved = achieved_user_rates(s, prof, pt)?;
    let rho = s.rate_factor();
    let mut max_excess = f64::NEG_INFINITY;
    for n in 0..s.blocks() {
        for r in 0..s.users() {
            let ch = chain_unchecked(s, prof, pt, r, n);
            let mut received_suffix = 0.0;
            let mut rate_suffix = 0.0;
            for st in ch.streams.iter().rev() {
                received_suffix += s.power_gain(r, st.tx, n) * pt.power(*st, n);
                rate_suffix += pt.rate(*st, n);
                let cap = log2_1p(rho, received_suffix / ch.floor);
                max_excess = max_excess.max(rate_suffix - cap);
            }
        }
    }
    let margin: Vec<f64> = achieved
        .iter()
        .zip(s.rate_mins())
        .map(|(a, b)| a - b)
        .collect();
    let feasible = max_excess <= tol && margin.iter().all(|m| *m >= -tol);
    Ok(FeasibilityReport {
        feasible,
        margin,
        achieved,
        max_suffix_excess: max_excess.max(0.0),
    })
}

/// Objective `Σ_n Σ_u w_u Σ_j p[u][j][n]`.
pub fn total_weighted_power(s: &Scenario, pt: &AllocationPoint) -> f64 {
    (0..s.users()).map(|u| s.weight(u) * pt.user_power(u)).sum()
}

/// Copies the exact supportable rates into the rate variables of `pt`.
pub fn with_achieved_rates(
    s: &Scenario,
    prof: &DecodingProfile,
    pt: &AllocationPoint,
) -> Result<AllocationPoint> {
    let mut out = stream_rates(s, prof, pt)?;
    for n in 0..s.blocks() {
        for r in 0..s.users() {
            out.set_aux(r, n, pt.aux(r, n));
        }
    }
    Ok(out)
}
