//! Market-share evolution under a fixed influence matrix.
//!
//! Each step synthesizes the payoff matrix from the current inputs,
//! normalizes it, evaluates the replicator rates at the current shares and
//! takes one explicit Euler step. Components pushed off the simplex are
//! clamped to `[0, 1]` and the state is rescaled to sum 1.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::dynamics::{self, PayoffMatrix, SharesState};
use crate::error::{Error, Result};
use crate::influence::{normalize_in_place, synthesize_into, InfluenceMatrix, InputVector};

/// Reusable buffers for stepping one trajectory.
#[derive(Debug, Clone)]
pub(crate) struct Stepper {
    n: usize,
    n_y: usize,
    pub(crate) payoff: Vec<f64>,
    fitness: Vec<f64>,
    pub(crate) rates: Vec<f64>,
}

impl Stepper {
    pub(crate) fn new(n: usize, n_y: usize) -> Self {
        Self {
            n,
            n_y,
            payoff: vec![0.0; n * n],
            fitness: vec![0.0; n],
            rates: vec![0.0; n],
        }
    }

    /// Fills `payoff` and `rates` for state `x` under inputs `y`.
    #[inline]
    pub(crate) fn evaluate(&mut self, coeffs: &[f64], y: &[f64], x: &[f64]) {
        synthesize_into(coeffs, self.n_y, y, &mut self.payoff);
        normalize_in_place(&mut self.payoff);
        dynamics::rates_into(&self.payoff, self.n, x, &mut self.fitness, &mut self.rates);
    }

    /// Euler update of `x` using the rates from the last `evaluate`.
    #[inline]
    pub(crate) fn advance(&self, x: &mut [f64], dt: f64) {
        let mut sum = 0.0;
        for (xi, r) in x.iter_mut().zip(&self.rates) {
            *xi = (*xi + dt * r).clamp(0.0, 1.0);
            sum += *xi;
        }
        x.iter_mut().for_each(|xi| *xi /= sum);
    }
}

/// Result of one simulation step.
#[derive(Debug, Clone, PartialEq)]
pub struct StepOutcome {
    pub next: SharesState,
    /// Normalized payoff matrix in force during the step.
    pub payoff: PayoffMatrix,
    pub rates: Vec<f64>,
}

fn check_dims(alpha: &InfluenceMatrix, x: &SharesState, y: &InputVector) -> Result<()> {
    if x.n() != alpha.n() {
        return Err(Error::argument(format!(
            "shares have {} strategies, the influence matrix describes {}",
            x.n(),
            alpha.n()
        )));
    }
    if y.len() != alpha.n_y() {
        return Err(Error::argument(format!(
            "input vector has {} values, the influence matrix expects {}",
            y.len(),
            alpha.n_y()
        )));
    }
    Ok(())
}

fn check_dt(dt: f64) -> Result<()> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::argument(format!(
            "step size must be positive, got {dt}"
        )));
    }
    Ok(())
}

/// One Euler step of the input-driven replicator system.
pub fn step(
    x: &SharesState,
    y: &InputVector,
    alpha: &InfluenceMatrix,
    dt: f64,
) -> Result<StepOutcome> {
    check_dims(alpha, x, y)?;
    check_dt(dt)?;
    let mut stepper = Stepper::new(alpha.n(), alpha.n_y());
    stepper.evaluate(alpha.coeffs(), y, x);
    let mut next = x.to_vec();
    stepper.advance(&mut next, dt);
    Ok(StepOutcome {
        next: SharesState::from_raw_unchecked(next),
        payoff: PayoffMatrix::new_normalized(alpha.n(), stepper.payoff.clone())?,
        rates: stepper.rates.clone(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ScenarioKind {
    ObservedInputs,
    ConstantInputs,
    CustomInputs,
}

/// What to simulate: inputs, starting shares, number of steps and step size.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioSpec {
    kind: ScenarioKind,
    inputs: Vec<InputVector>,
    initial: SharesState,
    horizon: usize,
    dt: f64,
}

impl ScenarioSpec {
    /// Replays an observed input series; one step per consecutive pair of
    /// samples.
    pub fn observed(inputs: Vec<InputVector>, initial: SharesState, dt: f64) -> Result<Self> {
        let horizon = inputs.len().saturating_sub(1);
        Self::build(ScenarioKind::ObservedInputs, inputs, initial, horizon, dt)
    }

    /// Holds every input at `pinned` (normally the first observed sample).
    pub fn constant(
        pinned: InputVector,
        initial: SharesState,
        horizon: usize,
        dt: f64,
    ) -> Result<Self> {
        Self::build(
            ScenarioKind::ConstantInputs,
            vec![pinned],
            initial,
            horizon,
            dt,
        )
    }

    /// Arbitrary user-provided input series; it must cover `horizon + 1`
    /// samples (the last one prices the final state).
    pub fn custom(
        inputs: Vec<InputVector>,
        initial: SharesState,
        horizon: usize,
        dt: f64,
    ) -> Result<Self> {
        Self::build(ScenarioKind::CustomInputs, inputs, initial, horizon, dt)
    }

    fn build(
        kind: ScenarioKind,
        inputs: Vec<InputVector>,
        initial: SharesState,
        horizon: usize,
        dt: f64,
    ) -> Result<Self> {
        if horizon == 0 {
            return Err(Error::argument("scenario horizon must be at least 1 step"));
        }
        check_dt(dt)?;
        if let Some(first) = inputs.first() {
            if let Some(t) = inputs.iter().position(|y| y.len() != first.len()) {
                return Err(Error::data(format!(
                    "input sample {t} has {} values, expected {}",
                    inputs[t].len(),
                    first.len()
                )));
            }
        }
        Ok(Self {
            kind,
            inputs,
            initial,
            horizon,
            dt,
        })
    }

    pub fn kind(&self) -> ScenarioKind {
        self.kind
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn initial(&self) -> &SharesState {
        &self.initial
    }

    fn input_at(&self, t: usize) -> Option<&InputVector> {
        match self.kind {
            ScenarioKind::ConstantInputs => self.inputs.first(),
            _ => self.inputs.get(t),
        }
    }
}

/// Full record of a simulation: state, normalized payoff and rates at every
/// sample time.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub times: Vec<usize>,
    pub states: Vec<SharesState>,
    pub payoffs: Vec<PayoffMatrix>,
    pub rates: Vec<Vec<f64>>,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn n(&self) -> usize {
        self.states.first().map_or(0, SharesState::n)
    }

    /// Share of `strategy` over time.
    pub fn share_series(&self, strategy: usize) -> Vec<f64> {
        self.states.iter().map(|s| s[strategy]).collect()
    }

    pub fn final_state(&self) -> &SharesState {
        self.states
            .last()
            .expect("trajectories hold at least two states")
    }

    /// CSV with header `t,share_1..share_n,A_11..A_nn,rate_1..rate_n`.
    pub fn to_csv(&self) -> String {
        let n = self.n();
        let mut out = String::from("t");
        for i in 1..=n {
            write!(out, ",share_{i}").unwrap();
        }
        for i in 1..=n {
            for j in 1..=n {
                write!(out, ",A_{i}{j}").unwrap();
            }
        }
        for i in 1..=n {
            write!(out, ",rate_{i}").unwrap();
        }
        out.push('\n');
        for (k, t) in self.times.iter().enumerate() {
            write!(out, "{t}").unwrap();
            let values = self.states[k]
                .iter()
                .chain(self.payoffs[k].entries())
                .chain(&self.rates[k]);
            for v in values {
                write!(out, ",{}", format_number(*v)).unwrap();
            }
            out.push('\n');
        }
        out
    }
}

/// Seventeen significant digits: enough to round-trip any `f64`.
pub fn format_number(v: f64) -> String {
    format!("{v:.16e}")
}

/// Simulates `spec` under `alpha`.
pub fn run(spec: &ScenarioSpec, alpha: &InfluenceMatrix) -> Result<Trajectory> {
    let (n, n_y) = (alpha.n(), alpha.n_y());
    if spec.initial.n() != n {
        return Err(Error::argument(format!(
            "initial shares have {} strategies, the influence matrix describes {n}",
            spec.initial.n()
        )));
    }
    let mut stepper = Stepper::new(n, n_y);
    let mut x = spec.initial.to_vec();
    let len = spec.horizon + 1;
    let mut traj = Trajectory {
        times: Vec::with_capacity(len),
        states: Vec::with_capacity(len),
        payoffs: Vec::with_capacity(len),
        rates: Vec::with_capacity(len),
    };
    for t in 0..len {
        let y = spec.input_at(t).ok_or_else(|| {
            Error::data(format!(
                "missing input sample at step {t} (scenario needs {len} samples, got {})",
                spec.inputs.len()
            ))
        })?;
        if y.len() != n_y {
            return Err(Error::argument(format!(
                "input sample {t} has {} values, the influence matrix expects {n_y}",
                y.len()
            )));
        }
        stepper.evaluate(alpha.coeffs(), y, &x);
        traj.times.push(t);
        traj.states.push(SharesState::from_raw_unchecked(x.clone()));
        traj.payoffs
            .push(PayoffMatrix::new_normalized(n, stepper.payoff.clone())?);
        traj.rates.push(stepper.rates.clone());
        if t < spec.horizon {
            stepper.advance(&mut x, spec.dt);
        }
    }
    Ok(traj)
}

/// Equilibrium the market would settle toward if `y` stayed fixed.
pub fn target_equilibrium(alpha: &InfluenceMatrix, y: &InputVector) -> Result<Option<SharesState>> {
    if alpha.n() != 2 {
        return Err(Error::UnsupportedDimension {
            operation: "target_equilibrium",
            required: 2,
            actual: alpha.n(),
        });
    }
    let payoff =
        crate::influence::normalize_payoff(&crate::influence::synthesize_payoff(alpha, y)?);
    dynamics::mixed_equilibrium(&payoff)
}
