//! Learning influence coefficients from an observed market.
//!
//! The search is exhaustive: every free coefficient ranges over the integers
//! `-r..=r`, each candidate is rolled forward from the first observed shares
//! through the training window, and candidates are scored by the mean
//! squared error of strategy 1's share. Min-max normalization makes `α` and
//! `2α` indistinguishable, and with two strategies so is any `α` whose payoff
//! matrix is `g(y) − A` with the rows of `A` swapped (same payoff differences,
//! same range). Ties are therefore routine. The winner is the
//! lexicographically smallest parameter tuple among candidates whose error
//! lies within [`FitOptions::tie_tolerance`] of the minimum, which does not
//! depend on evaluation order.

use std::fmt::Write as _;
use std::ops::Range;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use crate::dataset::{MarketDataset, NormalizationRecord};
use crate::dynamics::{rows_identical, SharesState};
use crate::error::{Error, Result};
use crate::influence::{
    free_parameter_layout, ConstraintMode, ConstraintSpec, FreeLayout, InfluenceMatrix,
    InputVector, Position,
};
use crate::par::{self, Execution};
use crate::simulate::{self, format_number, ScenarioSpec, Stepper};

/// Version string written into fit reports.
pub const REPORT_FORMAT_VERSION: &str = "1";

/// Default training-error target for [`fit_escalating`].
pub const DEFAULT_ESCALATION_TARGET: f64 = 4e-5;

/// Integer lattice `[-r, r]^K` over the free coefficients.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct GridSpec {
    radius: u32,
}

impl GridSpec {
    pub fn new(radius: u32) -> Self {
        Self { radius }
    }

    pub fn radius(&self) -> u32 {
        self.radius
    }

    /// Number of values each free coefficient takes.
    pub fn width(&self) -> usize {
        2 * self.radius as usize + 1
    }

    /// `(2r + 1)^free`, or a configuration error if it does not fit in
    /// memory-addressable range.
    pub fn candidate_count(&self, free: usize) -> Result<usize> {
        u32::try_from(free)
            .ok()
            .and_then(|k| self.width().checked_pow(k))
            .ok_or_else(|| {
                Error::config(format!(
                    "grid of radius {} over {free} free parameters is too large",
                    self.radius
                ))
            })
    }

    /// Parameter tuple of candidate `index`. Index order is lexicographic
    /// order of tuples, first parameter most significant.
    pub fn params_of(&self, mut index: usize, out: &mut [f64]) {
        let width = self.width();
        let r = self.radius as i64;
        for slot in out.iter_mut().rev() {
            *slot = ((index % width) as i64 - r) as f64;
            index /= width;
        }
    }
}

/// Mean squared error between predicted and observed share series.
pub fn mse(predicted: &[f64], observed: &[f64]) -> Result<f64> {
    if predicted.len() != observed.len() {
        return Err(Error::argument(format!(
            "series lengths differ: {} predicted vs {} observed",
            predicted.len(),
            observed.len()
        )));
    }
    if predicted.is_empty() {
        return Err(Error::argument("error metric needs at least one sample"));
    }
    let sum: f64 = predicted
        .iter()
        .zip(observed)
        .map(|(p, o)| (p - o) * (p - o))
        .sum();
    Ok(sum / predicted.len() as f64)
}

/// Chronological train/validation windows.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Split {
    pub train: Range<usize>,
    pub validation: Range<usize>,
}

/// Smallest dataset [`split`] accepts.
pub const MIN_SPLIT_LEN: usize = 5;

/// Holds out the last `ceil(fraction · len)` samples for validation.
pub fn split_len(len: usize, holdout_fraction: f64) -> Result<Split> {
    if !(holdout_fraction > 0.0 && holdout_fraction < 1.0) {
        return Err(Error::config(format!(
            "holdout fraction must lie in (0, 1), got {holdout_fraction}"
        )));
    }
    if len < MIN_SPLIT_LEN {
        return Err(Error::data(format!(
            "dataset too short to split: {len} samples, need at least {MIN_SPLIT_LEN}"
        )));
    }
    // Guard against products like 0.2 * 10 landing a hair above an integer.
    let held = ((holdout_fraction * len as f64) - 1e-9).ceil().max(1.0) as usize;
    if held + 2 > len {
        return Err(Error::data(format!(
            "holding out {held} of {len} samples leaves fewer than 2 for training"
        )));
    }
    Ok(Split {
        train: 0..len - held,
        validation: len - held..len,
    })
}

pub fn split(dataset: &MarketDataset, holdout_fraction: f64) -> Result<Split> {
    split_len(dataset.len(), holdout_fraction)
}

/// Treatment of candidates whose payoff rows coincide at every training
/// step. Such candidates have zero rates everywhere, so they reproduce any
/// frozen market exactly while saying nothing about it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InertPolicy {
    Keep,
    Exclude,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FitTarget {
    ObservedShares,
    ConstantMarket,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitOptions {
    pub holdout_fraction: f64,
    pub dt: f64,
    /// Min-max scale inputs with training-window statistics before use.
    pub normalize_inputs: bool,
    pub execution: Execution,
    /// Candidates within this absolute distance of the minimum error tie.
    pub tie_tolerance: f64,
    /// Keep every candidate's training error for auditing.
    pub record_candidates: bool,
    /// `None` keeps inert candidates for observed-share fits and excludes
    /// them for constant-market fits.
    pub inert: Option<InertPolicy>,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            holdout_fraction: 0.2,
            dt: 1.0,
            normalize_inputs: true,
            execution: Execution::default(),
            tie_tolerance: 1e-12,
            record_candidates: false,
            inert: None,
        }
    }
}

/// Outcome of a grid search.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitReport {
    pub format_version: String,
    pub target: FitTarget,
    pub constraint_mode: ConstraintMode,
    pub radius: u32,
    pub free_positions: Vec<Position>,
    pub best_params: Vec<i32>,
    pub best_alpha: InfluenceMatrix,
    pub train_error: f64,
    pub validation_error: f64,
    pub tie_class_size: usize,
    pub candidates_evaluated: usize,
    pub inert_excluded: usize,
    pub train_len: usize,
    pub validation_len: usize,
    pub dt: f64,
    pub labels: Vec<String>,
    /// Strategy-1 share predicted over the whole dataset.
    pub predicted_share: Vec<f64>,
    /// Strategy-1 share the search was scored against.
    pub target_share: Vec<f64>,
    pub normalization: Option<NormalizationRecord>,
    #[serde(skip)]
    pub candidate_errors: Option<Vec<f64>>,
    #[serde(skip)]
    pub elapsed: Duration,
}

impl FitReport {
    pub fn to_json(&self) -> Result<String> {
        let mut text = serde_json::to_string_pretty(self)?;
        text.push('\n');
        Ok(text)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    /// `candidate_index,param_1..param_K,train_error`, if errors were kept.
    pub fn candidates_csv(&self) -> Option<String> {
        let errors = self.candidate_errors.as_ref()?;
        let grid = GridSpec::new(self.radius);
        let k = self.free_positions.len();
        let mut out = String::from("candidate_index");
        for p in 1..=k {
            write!(out, ",param_{p}").unwrap();
        }
        out.push_str(",train_error\n");
        let mut params = vec![0.0; k];
        for (i, e) in errors.iter().enumerate() {
            grid.params_of(i, &mut params);
            write!(out, "{i}").unwrap();
            for p in &params {
                write!(out, ",{p}").unwrap();
            }
            writeln!(out, ",{}", format_number(*e)).unwrap();
        }
        Some(out)
    }

    /// Index of the first sample at which the predicted strategy-1 share
    /// reaches 0.5 from below.
    pub fn crossing_index(&self) -> Option<usize> {
        self.predicted_share
            .windows(2)
            .position(|w| w[0] < 0.5 && w[1] >= 0.5)
            .map(|t| t + 1)
    }
}

/// Inputs, target series and windows shared by every candidate.
struct Problem {
    layout: FreeLayout,
    inputs: Vec<InputVector>,
    target: Vec<f64>,
    initial: Vec<f64>,
    train_len: usize,
    dt: f64,
}

struct Scratch {
    params: Vec<f64>,
    coeffs: Vec<f64>,
    stepper: Stepper,
    x: Vec<f64>,
}

impl Problem {
    fn scratch(&self) -> Scratch {
        Scratch {
            params: vec![0.0; self.layout.len()],
            coeffs: self.layout.template().coeffs().to_vec(),
            stepper: Stepper::new(self.layout.n(), self.layout.n_y()),
            x: self.initial.clone(),
        }
    }

    /// Training error of candidate `index`, and whether it is inert.
    #[inline]
    fn evaluate(&self, grid: &GridSpec, s: &mut Scratch, index: usize) -> (f64, bool) {
        grid.params_of(index, &mut s.params);
        self.layout.fill(&s.params, &mut s.coeffs);
        s.x.copy_from_slice(&self.initial);
        let n = self.layout.n();
        let d0 = s.x[0] - self.target[0];
        let mut sum = d0 * d0;
        let mut inert = true;
        for t in 0..self.train_len - 1 {
            s.stepper.evaluate(&s.coeffs, &self.inputs[t], &s.x);
            inert &= rows_identical(&s.stepper.payoff, n);
            s.stepper.advance(&mut s.x, self.dt);
            let d = s.x[0] - self.target[t + 1];
            sum += d * d;
        }
        (sum / self.train_len as f64, inert)
    }
}

/// Candidates within tolerance of the smallest error seen so far.
#[derive(Debug, Clone)]
struct NearMin {
    best: f64,
    members: Vec<(usize, f64)>,
    excluded: usize,
}

impl NearMin {
    fn new() -> Self {
        Self {
            best: f64::INFINITY,
            members: Vec::new(),
            excluded: 0,
        }
    }

    fn push(&mut self, index: usize, error: f64, tol: f64) {
        if error < self.best {
            self.best = error;
            self.members.retain(|&(_, e)| e <= error + tol);
        }
        if error <= self.best + tol {
            self.members.push((index, error));
        }
    }

    fn merge(mut self, other: Self, tol: f64) -> Self {
        self.best = self.best.min(other.best);
        self.excluded += other.excluded;
        self.members.extend(other.members);
        let cut = self.best + tol;
        self.members.retain(|&(_, e)| e <= cut);
        self
    }

    /// Lexicographically smallest member.
    fn winner(&self) -> Option<(usize, f64)> {
        self.members.iter().copied().min_by_key(|&(i, _)| i)
    }
}

fn resolve_policy(options: &FitOptions, target: FitTarget) -> InertPolicy {
    options.inert.unwrap_or(match target {
        FitTarget::ObservedShares => InertPolicy::Keep,
        FitTarget::ConstantMarket => InertPolicy::Exclude,
    })
}

/// Learns `α` from the observed share series of `dataset`.
pub fn fit(
    dataset: &MarketDataset,
    grid: &GridSpec,
    constraints: &ConstraintSpec,
    options: &FitOptions,
) -> Result<FitReport> {
    search(
        dataset,
        grid,
        constraints,
        options,
        FitTarget::ObservedShares,
    )
}

/// Learns the `α` that best keeps the market frozen at its initial shares
/// while the observed inputs still drive it.
pub fn fit_constant_market(
    dataset: &MarketDataset,
    grid: &GridSpec,
    constraints: &ConstraintSpec,
    options: &FitOptions,
) -> Result<FitReport> {
    let frozen = dataset.with_constant_shares(dataset.initial_shares().clone())?;
    search(
        &frozen,
        grid,
        constraints,
        options,
        FitTarget::ConstantMarket,
    )
}

/// Widens the grid from `r = 1` until the training error falls below
/// `target` or `max_radius` is reached. Returns every report in order; the
/// last one is the answer.
pub fn fit_escalating(
    dataset: &MarketDataset,
    constraints: &ConstraintSpec,
    options: &FitOptions,
    target: f64,
    max_radius: u32,
) -> Result<Vec<FitReport>> {
    if max_radius == 0 {
        return Err(Error::config(
            "escalation needs a maximum radius of at least 1",
        ));
    }
    let mut reports = Vec::new();
    for radius in 1..=max_radius {
        let report = fit(dataset, &GridSpec::new(radius), constraints, options)?;
        let done = report.train_error < target;
        reports.push(report);
        if done {
            break;
        }
    }
    Ok(reports)
}

/// Inputs as the model sees them: scaled with training-window statistics
/// when `normalize` is set.
pub fn prepare_inputs(
    dataset: &MarketDataset,
    split: &Split,
    normalize: bool,
) -> Result<(Vec<InputVector>, Option<NormalizationRecord>)> {
    if !normalize {
        return Ok((dataset.inputs().to_vec(), None));
    }
    let record = NormalizationRecord::fit(dataset.inputs(), split.train.clone())?;
    Ok((record.apply_all(dataset.inputs())?, Some(record)))
}

fn search(
    dataset: &MarketDataset,
    grid: &GridSpec,
    constraints: &ConstraintSpec,
    options: &FitOptions,
    target_kind: FitTarget,
) -> Result<FitReport> {
    let started = Instant::now();
    if !(options.dt > 0.0 && options.dt.is_finite()) {
        return Err(Error::config(format!(
            "dt must be positive, got {}",
            options.dt
        )));
    }
    if options.tie_tolerance.is_nan() || options.tie_tolerance < 0.0 {
        return Err(Error::config("tie tolerance must be non-negative"));
    }
    let (n, n_y) = (dataset.n(), dataset.n_y());
    let template = InfluenceMatrix::template(constraints, n, n_y)?;
    let layout = free_parameter_layout(&template);
    if layout.is_empty() {
        return Err(Error::config(
            "grid is empty: the constraints leave no free coefficient",
        ));
    }
    let count = grid.candidate_count(layout.len())?;
    let split = split(dataset, options.holdout_fraction)?;
    let (inputs, normalization) = prepare_inputs(dataset, &split, options.normalize_inputs)?;
    let policy = resolve_policy(options, target_kind);
    let problem = Problem {
        layout,
        inputs,
        target: dataset.share_series(0),
        initial: dataset.initial_shares().to_vec(),
        train_len: split.train.len(),
        dt: options.dt,
    };
    let tol = options.tie_tolerance;
    // Excluded candidates score +inf and never enter the tie class.
    let admissible = |(error, inert): (f64, bool)| {
        if policy == InertPolicy::Exclude && inert {
            f64::INFINITY
        } else {
            error
        }
    };

    let (near, candidate_errors) = if options.record_candidates {
        let errors = par::map_range(
            options.execution,
            count,
            || problem.scratch(),
            |s, i| admissible(problem.evaluate(grid, s, i)),
        );
        let mut near = NearMin::new();
        for (i, &e) in errors.iter().enumerate() {
            if e.is_finite() {
                near.push(i, e, tol);
            } else {
                near.excluded += 1;
            }
        }
        (near, Some(errors))
    } else {
        let near = par::fold_range(
            options.execution,
            count,
            || problem.scratch(),
            NearMin::new,
            |s, mut acc, i| {
                let e = admissible(problem.evaluate(grid, s, i));
                if e.is_finite() {
                    acc.push(i, e, tol);
                } else {
                    acc.excluded += 1;
                }
                acc
            },
            |a, b| a.merge(b, tol),
        );
        (near, None)
    };

    let (winner, winner_error) = near.winner().ok_or_else(|| {
        Error::config(format!(
            "no admissible candidate: all {count} candidates were excluded as inert"
        ))
    })?;
    let mut params = vec![0.0; problem.layout.len()];
    grid.params_of(winner, &mut params);
    let best_alpha = problem.layout.materialize(&params)?;

    let scenario = ScenarioSpec::observed(
        problem.inputs.clone(),
        SharesState::new(problem.initial.clone())?,
        options.dt,
    )?;
    let trajectory = simulate::run(&scenario, &best_alpha)?;
    let predicted = trajectory.share_series(0);
    let train_error = mse(
        &predicted[split.train.clone()],
        &problem.target[split.train.clone()],
    )?;
    debug_assert_eq!(train_error, winner_error);
    let validation_error = mse(
        &predicted[split.validation.clone()],
        &problem.target[split.validation.clone()],
    )?;

    Ok(FitReport {
        format_version: REPORT_FORMAT_VERSION.to_string(),
        target: target_kind,
        constraint_mode: constraints.mode,
        radius: grid.radius(),
        free_positions: problem.layout.representatives().to_vec(),
        best_params: params.iter().map(|&p| p as i32).collect(),
        best_alpha,
        train_error,
        validation_error,
        tie_class_size: near.members.len(),
        candidates_evaluated: count,
        inert_excluded: near.excluded,
        train_len: split.train.len(),
        validation_len: split.validation.len(),
        dt: options.dt,
        labels: dataset.labels().to_vec(),
        predicted_share: predicted,
        target_share: problem.target,
        normalization,
        candidate_errors,
        elapsed: started.elapsed(),
    })
}
