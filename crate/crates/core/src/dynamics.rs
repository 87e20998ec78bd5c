//! Replicator dynamics for a homogeneous population playing a symmetric
//! normal-form game.
//!
//! A strategy's share grows in proportion to how far its expected payoff
//! exceeds the population average: `ẋ_i = x_i ((A x)_i − xᵀ A x)`.
//! [`replicator_rates`] works for any number of strategies; the closed-form
//! equilibrium and stability helpers are two-strategy only.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tolerance on `Σ x_i = 1` accepted when constructing a [`SharesState`].
pub const SIMPLEX_TOLERANCE: f64 = 1e-9;

/// Magnitude below which the mixed-equilibrium denominator counts as zero.
pub const DENOMINATOR_EPSILON: f64 = 1e-12;

/// Interior points closer than this to a vertex are not reported.
pub const INTERIOR_MARGIN: f64 = 1e-9;

/// Offset used to probe the rate field on each side of a mixed equilibrium.
pub const STABILITY_PROBE: f64 = 1e-4;

/// Square payoff matrix; entry `(i, j)` is the payoff to an `i`-player that
/// meets a `j`-player. Stored row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PayoffMatrix {
    n: usize,
    entries: Vec<f64>,
    normalized: bool,
}

impl PayoffMatrix {
    pub fn new(n: usize, entries: Vec<f64>) -> Result<Self> {
        Self::with_flag(n, entries, false)
    }

    /// Builds a matrix flagged as normalized; every entry must lie in `[0, 1]`.
    pub fn new_normalized(n: usize, entries: Vec<f64>) -> Result<Self> {
        Self::with_flag(n, entries, true)
    }

    fn with_flag(n: usize, entries: Vec<f64>, normalized: bool) -> Result<Self> {
        if n < 2 {
            return Err(Error::argument(format!(
                "payoff matrix needs at least 2 strategies, got {n}"
            )));
        }
        if entries.len() != n * n {
            return Err(Error::argument(format!(
                "payoff matrix with n = {n} needs {} entries, got {}",
                n * n,
                entries.len()
            )));
        }
        if let Some(k) = entries.iter().position(|a| !a.is_finite()) {
            return Err(Error::argument(format!("payoff entry {k} is not finite")));
        }
        if normalized {
            if let Some(k) = entries.iter().position(|a| !(0.0..=1.0).contains(a)) {
                return Err(Error::argument(format!(
                    "normalized payoff entry {k} = {} outside [0, 1]",
                    entries[k]
                )));
            }
        }
        Ok(Self {
            n,
            entries,
            normalized,
        })
    }

    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        let n = rows.len();
        let mut entries = Vec::with_capacity(n * n);
        for (i, row) in rows.iter().enumerate() {
            let row = row.as_ref();
            if row.len() != n {
                return Err(Error::argument(format!(
                    "row {i} has {} entries, expected {n}",
                    row.len()
                )));
            }
            entries.extend_from_slice(row);
        }
        Self::new(n, entries)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[i * self.n + j]
    }

    pub fn entries(&self) -> &[f64] {
        &self.entries
    }

    pub fn is_normalized(&self) -> bool {
        self.normalized
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.entries.chunks(self.n)
    }

    /// True when every row is identical, so all strategies earn the same
    /// payoff in every state and the rate field vanishes.
    pub fn is_inert(&self) -> bool {
        rows_identical(&self.entries, self.n)
    }

    /// True when all entries are equal.
    pub fn is_uniform(&self) -> bool {
        self.entries.iter().all(|&a| a == self.entries[0])
    }
}

/// Market shares: a point on the probability simplex.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct SharesState(Vec<f64>);

impl SharesState {
    /// Validates `shares` against the simplex and rescales away the residual
    /// (at most [`SIMPLEX_TOLERANCE`]) so that the stored sum is 1 to
    /// rounding.
    pub fn new(shares: Vec<f64>) -> Result<Self> {
        if shares.len() < 2 {
            return Err(Error::argument(format!(
                "shares need at least 2 strategies, got {}",
                shares.len()
            )));
        }
        if let Some(i) = shares
            .iter()
            .position(|s| !s.is_finite() || !(0.0..=1.0).contains(s))
        {
            return Err(Error::argument(format!(
                "share {i} = {} outside [0, 1]",
                shares[i]
            )));
        }
        let sum: f64 = shares.iter().sum();
        if (sum - 1.0).abs() > SIMPLEX_TOLERANCE {
            return Err(Error::argument(format!(
                "shares sum to {sum}, not 1 (tolerance {SIMPLEX_TOLERANCE:e})"
            )));
        }
        Ok(Self::from_normalized(shares, sum))
    }

    fn from_normalized(mut shares: Vec<f64>, sum: f64) -> Self {
        if sum != 1.0 {
            shares.iter_mut().for_each(|s| *s /= sum);
        }
        Self(shares)
    }

    /// Two-strategy state `(x1, 1 − x1)`.
    pub fn pair(x1: f64) -> Result<Self> {
        Self::new(vec![x1, 1.0 - x1])
    }

    /// Pure state where `strategy` holds the whole market.
    pub fn vertex(n: usize, strategy: usize) -> Result<Self> {
        if strategy >= n {
            return Err(Error::argument(format!(
                "vertex strategy {strategy} out of range for n = {n}"
            )));
        }
        let mut v = vec![0.0; n];
        v[strategy] = 1.0;
        Self::new(v)
    }

    pub(crate) fn from_raw_unchecked(shares: Vec<f64>) -> Self {
        Self(shares)
    }

    pub fn n(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }
}

impl std::ops::Deref for SharesState {
    type Target = [f64];

    fn deref(&self) -> &[f64] {
        &self.0
    }
}

/// Stability of an interior equilibrium, read off the rate field around it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Stability {
    Stable,
    Unstable,
    Degenerate,
}

impl std::fmt::Display for Stability {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Stability::Stable => "stable",
            Stability::Unstable => "unstable",
            Stability::Degenerate => "degenerate",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MixedEquilibrium {
    pub point: SharesState,
    pub stability: Stability,
}

/// Fixed points of a two-strategy game.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EquilibriumSet {
    pub vertices: Vec<SharesState>,
    pub mixed: Option<MixedEquilibrium>,
}

/// Expected payoffs `(A x)_i` written into `fitness`; returns the population
/// average `xᵀ A x`.
#[inline]
pub(crate) fn fitness_into(payoff: &[f64], n: usize, x: &[f64], fitness: &mut [f64]) -> f64 {
    let mut average = 0.0;
    for i in 0..n {
        let row = &payoff[i * n..(i + 1) * n];
        let f: f64 = row.iter().zip(x).map(|(a, xj)| a * xj).sum();
        fitness[i] = f;
        average += x[i] * f;
    }
    average
}

/// Replicator rates written into `rates`; `fitness` is scratch of length n.
#[inline]
pub(crate) fn rates_into(
    payoff: &[f64],
    n: usize,
    x: &[f64],
    fitness: &mut [f64],
    rates: &mut [f64],
) {
    let average = fitness_into(payoff, n, x, fitness);
    for i in 0..n {
        rates[i] = x[i] * (fitness[i] - average);
    }
}

#[inline]
pub(crate) fn rows_identical(payoff: &[f64], n: usize) -> bool {
    let first = &payoff[..n];
    payoff[n..].chunks(n).all(|row| row == first)
}

/// Replicator growth rates `ẋ_i = x_i((A x)_i − xᵀ A x)`.
pub fn replicator_rates(payoff: &PayoffMatrix, x: &SharesState) -> Result<Vec<f64>> {
    let n = payoff.n();
    if x.n() != n {
        return Err(Error::argument(format!(
            "shares have {} strategies but the payoff matrix has {n}",
            x.n()
        )));
    }
    let mut fitness = vec![0.0; n];
    let mut rates = vec![0.0; n];
    rates_into(payoff.entries(), n, x, &mut fitness, &mut rates);
    Ok(rates)
}

fn require_two(operation: &'static str, payoff: &PayoffMatrix) -> Result<()> {
    if payoff.n() != 2 {
        return Err(Error::UnsupportedDimension {
            operation,
            required: 2,
            actual: payoff.n(),
        });
    }
    Ok(())
}

/// Share of strategy 1 at the interior fixed point of a 2×2 game, if the
/// fixed point exists strictly inside the simplex.
fn interior_share(payoff: &PayoffMatrix) -> Option<f64> {
    let (a11, a12, a21, a22) = (
        payoff.get(0, 0),
        payoff.get(0, 1),
        payoff.get(1, 0),
        payoff.get(1, 1),
    );
    let denominator = (a11 + a22) - (a21 + a12);
    if denominator.abs() <= DENOMINATOR_EPSILON {
        return None;
    }
    let x1 = (a22 - a12) / denominator;
    (x1 > INTERIOR_MARGIN && x1 < 1.0 - INTERIOR_MARGIN).then_some(x1)
}

/// Interior equilibrium of a two-strategy game, or `None` when the payoff
/// differences never balance inside the open simplex.
pub fn mixed_equilibrium(payoff: &PayoffMatrix) -> Result<Option<SharesState>> {
    require_two("mixed_equilibrium", payoff)?;
    Ok(interior_share(payoff).map(|x1| SharesState::from_raw_unchecked(vec![x1, 1.0 - x1])))
}

/// Strict payoff advantage of strategy 1 at `x`:
/// `A11 x1 + A12 x2 > A21 x1 + A22 x2`.
pub fn growth_condition(payoff: &PayoffMatrix, x: &SharesState) -> Result<bool> {
    require_two("growth_condition", payoff)?;
    if x.n() != 2 {
        return Err(Error::argument(format!(
            "shares have {} strategies, expected 2",
            x.n()
        )));
    }
    let (x1, x2) = (x[0], x[1]);
    let own = payoff.get(0, 0) * x1 + payoff.get(0, 1) * x2;
    let rival = payoff.get(1, 0) * x1 + payoff.get(1, 1) * x2;
    Ok(own > rival)
}

/// Both pure-strategy fixed points plus the interior one, labeled by the
/// direction of the rate field on either side of it.
pub fn classify_equilibria(payoff: &PayoffMatrix) -> Result<EquilibriumSet> {
    require_two("classify_equilibria", payoff)?;
    let vertices = vec![SharesState::vertex(2, 0)?, SharesState::vertex(2, 1)?];
    let mixed = interior_share(payoff).map(|x1| {
        // Shrink the probe for points closer to a vertex than the offset.
        let h = STABILITY_PROBE.min(x1 / 2.0).min((1.0 - x1) / 2.0);
        let below = rate_of_first(payoff, x1 - h);
        let above = rate_of_first(payoff, x1 + h);
        let stability = if below < 0.0 && above > 0.0 {
            Stability::Unstable
        } else if below > 0.0 && above < 0.0 {
            Stability::Stable
        } else {
            Stability::Degenerate
        };
        MixedEquilibrium {
            point: SharesState::from_raw_unchecked(vec![x1, 1.0 - x1]),
            stability,
        }
    });
    Ok(EquilibriumSet { vertices, mixed })
}

fn rate_of_first(payoff: &PayoffMatrix, x1: f64) -> f64 {
    let x = [x1, 1.0 - x1];
    let mut fitness = [0.0; 2];
    let mut rates = [0.0; 2];
    rates_into(payoff.entries(), 2, &x, &mut fitness, &mut rates);
    rates[0]
}
