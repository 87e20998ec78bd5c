//! Input-driven payoff matrices.
//!
//! Every payoff entry is a linear combination of the external input factors
//! `y`: entry `A_k = α_k · y`, where `k = n·i + j` walks the matrix row by
//! row (zero-based here) and `α_k` is row `k` of the `n² × n_y` influence
//! matrix. Inputs belong to exactly one strategy (the company that controls
//! them), which drives two kinds of constraints on `α`:
//!
//! * a zero mask: an input owned by strategy `i` never moves the
//!   self-interaction payoff `A_jj` of a rival `j ≠ i`;
//! * symmetry pairs: swapping products together with their corresponding
//!   inputs leaves the coefficients unchanged.
//!
//! The payoff matrix fed to the replicator equation is the min-max
//! normalized synthesis, so `α` and `c·α` (`c > 0`) describe the same market.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::dynamics::PayoffMatrix;
use crate::error::{Error, Result};

/// Version string written into persisted influence documents.
pub const FORMAT_VERSION: &str = "1";

/// Range below which a synthesized payoff matrix counts as constant.
pub const NORMALIZATION_EPSILON: f64 = 1e-12;

/// Row-major linear index of payoff entry `(i, j)`.
pub fn linear_index(n: usize, i: usize, j: usize) -> usize {
    n * i + j
}

/// Inverse of [`linear_index`].
pub fn matrix_index(n: usize, k: usize) -> (usize, usize) {
    (k / n, k % n)
}

/// One coefficient of `α`: payoff row `k` and input column.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Position {
    pub row: usize,
    pub input: usize,
}

impl Position {
    pub fn new(row: usize, input: usize) -> Self {
        Self { row, input }
    }

    /// Position of the coefficient linking input `input` to payoff `(i, j)`.
    pub fn entry(n: usize, i: usize, j: usize, input: usize) -> Self {
        Self::new(linear_index(n, i, j), input)
    }

    fn flat(self, n_y: usize) -> usize {
        self.row * n_y + self.input
    }
}

impl std::fmt::Display for Position {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "(row {}, y_{})", self.row + 1, self.input + 1)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ConstraintMode {
    /// Every coefficient equals its image under the simultaneous swap of
    /// products and corresponding inputs.
    #[default]
    FullSymmetry,
    /// Only the cross-payoff derivatives are tied: `∂A_ij/∂y_i = ∂A_ji/∂y_j`
    /// for `i ≠ j`, where `y_i` and `y_j` are corresponding inputs.
    CrossPairs,
    /// No zero mask and no ties.
    Unconstrained,
}

impl std::str::FromStr for ConstraintMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "full" | "full-symmetry" => Ok(Self::FullSymmetry),
            "cross" | "cross-pairs" => Ok(Self::CrossPairs),
            "none" | "unconstrained" => Ok(Self::Unconstrained),
            other => Err(Error::config(format!(
                "unknown constraint mode `{other}` (expected full, cross or none)"
            ))),
        }
    }
}

impl std::fmt::Display for ConstraintMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::FullSymmetry => "full-symmetry",
            Self::CrossPairs => "cross-pairs",
            Self::Unconstrained => "unconstrained",
        })
    }
}

/// How products and inputs correspond, and which constraints to derive.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConstraintSpec {
    pub mode: ConstraintMode,
    /// Product-swap permutation on strategies; must be an involution.
    pub swap: Vec<usize>,
    /// Input `m` corresponds to input `pairing[m]` under the swap.
    pub pairing: Vec<usize>,
    /// Owning strategy of every input.
    pub ownership: Vec<usize>,
}

impl ConstraintSpec {
    /// Two products whose inputs alternate: `y_1, y_3, …` belong to strategy
    /// 1, `y_2, y_4, …` to strategy 2, and `y_{2m-1} ↔ y_{2m}` correspond.
    pub fn two_product(mode: ConstraintMode, n_y: usize) -> Result<Self> {
        if n_y == 0 || !n_y.is_multiple_of(2) {
            return Err(Error::config(format!(
                "the alternating two-product layout needs an even, nonzero input count, got {n_y}"
            )));
        }
        Ok(Self {
            mode,
            swap: vec![1, 0],
            pairing: (0..n_y).map(|m| m ^ 1).collect(),
            ownership: (0..n_y).map(|m| m % 2).collect(),
        })
    }

    pub fn validate(&self, n: usize, n_y: usize) -> Result<()> {
        if self.swap.len() != n {
            return Err(Error::config(format!(
                "swap permutation has {} entries for {n} strategies",
                self.swap.len()
            )));
        }
        if self.ownership.len() != n_y || self.pairing.len() != n_y {
            return Err(Error::config(format!(
                "ownership ({}) and pairing ({}) must both cover {n_y} inputs",
                self.ownership.len(),
                self.pairing.len()
            )));
        }
        for (i, &s) in self.swap.iter().enumerate() {
            if s >= n || self.swap[s] != i {
                return Err(Error::config(format!(
                    "swap permutation is not an involution at strategy {}",
                    i + 1
                )));
            }
        }
        for (m, &owner) in self.ownership.iter().enumerate() {
            if owner >= n {
                return Err(Error::config(format!(
                    "input y_{} is owned by strategy {} but only {n} exist",
                    m + 1,
                    owner + 1
                )));
            }
        }
        for (m, &p) in self.pairing.iter().enumerate() {
            if p >= n_y || self.pairing[p] != m {
                return Err(Error::config(format!(
                    "input pairing is not a bijective involution at y_{}",
                    m + 1
                )));
            }
            if self.ownership[p] != self.swap[self.ownership[m]] {
                return Err(Error::config(format!(
                    "pairing y_{} <-> y_{} is inconsistent with ownership: owners {} and {} are not swapped",
                    m + 1,
                    p + 1,
                    self.ownership[m] + 1,
                    self.ownership[p] + 1
                )));
            }
        }
        Ok(())
    }
}

/// Zero mask and equality ties on the coefficients of `α`.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Constraints {
    pub zero_mask: BTreeSet<Position>,
    /// Unordered pairs stored with the smaller position first.
    pub symmetry_pairs: BTreeSet<(Position, Position)>,
}

impl Constraints {
    pub fn none() -> Self {
        Self::default()
    }

    /// Verifies `coeffs` (row-major `n² × n_y`) against the mask and ties.
    pub fn check(&self, n_y: usize, coeffs: &[f64]) -> Result<()> {
        for p in &self.zero_mask {
            let v = coeffs[p.flat(n_y)];
            if v != 0.0 {
                return Err(Error::argument(format!(
                    "masked coefficient {p} holds {v}, expected 0"
                )));
            }
        }
        for (a, b) in &self.symmetry_pairs {
            let (va, vb) = (coeffs[a.flat(n_y)], coeffs[b.flat(n_y)]);
            if va != vb {
                return Err(Error::argument(format!(
                    "tied coefficients {a} = {va} and {b} = {vb} differ"
                )));
            }
        }
        Ok(())
    }

    fn check_bounds(&self, n: usize, n_y: usize) -> Result<()> {
        let in_range = |p: &Position| p.row < n * n && p.input < n_y;
        if let Some(p) = self.zero_mask.iter().find(|p| !in_range(p)) {
            return Err(Error::argument(format!("mask position {p} out of range")));
        }
        if let Some((a, b)) = self
            .symmetry_pairs
            .iter()
            .find(|(a, b)| !in_range(a) || !in_range(b) || a == b)
        {
            return Err(Error::argument(format!(
                "invalid symmetry pair {a} <-> {b}"
            )));
        }
        Ok(())
    }

    /// Orbit representative (smallest flat index) of every position.
    fn orbit_roots(&self, n: usize, n_y: usize) -> Vec<usize> {
        let mut parent: Vec<usize> = (0..n * n * n_y).collect();
        fn find(parent: &mut [usize], mut v: usize) -> usize {
            while parent[v] != v {
                parent[v] = parent[parent[v]];
                v = parent[v];
            }
            v
        }
        for (a, b) in &self.symmetry_pairs {
            let ra = find(&mut parent, a.flat(n_y));
            let rb = find(&mut parent, b.flat(n_y));
            let (lo, hi) = if ra < rb { (ra, rb) } else { (rb, ra) };
            parent[hi] = lo;
        }
        (0..parent.len()).map(|v| find(&mut parent, v)).collect()
    }
}

/// Derives the zero mask and symmetry pairs implied by `spec`.
pub fn build_constraints(spec: &ConstraintSpec, n: usize, n_y: usize) -> Result<Constraints> {
    spec.validate(n, n_y)?;
    if spec.mode == ConstraintMode::Unconstrained {
        return Ok(Constraints::none());
    }
    let mut constraints = Constraints::none();
    for (m, &owner) in spec.ownership.iter().enumerate() {
        for j in (0..n).filter(|&j| j != owner) {
            constraints.zero_mask.insert(Position::entry(n, j, j, m));
        }
    }
    let mut tie = |a: Position, b: Position| {
        if a != b {
            constraints.symmetry_pairs.insert((a.min(b), a.max(b)));
        }
    };
    match spec.mode {
        ConstraintMode::FullSymmetry => {
            for i in 0..n {
                for j in 0..n {
                    for m in 0..n_y {
                        tie(
                            Position::entry(n, i, j, m),
                            Position::entry(n, spec.swap[i], spec.swap[j], spec.pairing[m]),
                        );
                    }
                }
            }
        }
        ConstraintMode::CrossPairs => {
            for (m, &i) in spec.ownership.iter().enumerate() {
                let j = spec.swap[i];
                if i != j {
                    tie(
                        Position::entry(n, i, j, m),
                        Position::entry(n, j, i, spec.pairing[m]),
                    );
                }
            }
        }
        ConstraintMode::Unconstrained => unreachable!(),
    }
    // A tie touching a masked coefficient pins its whole orbit to zero.
    let roots = constraints.orbit_roots(n, n_y);
    let masked_roots: BTreeSet<usize> = constraints
        .zero_mask
        .iter()
        .map(|p| roots[p.flat(n_y)])
        .collect();
    for (flat, root) in roots.iter().enumerate() {
        if masked_roots.contains(root) {
            constraints
                .zero_mask
                .insert(Position::new(flat / n_y, flat % n_y));
        }
    }
    Ok(constraints)
}

/// Number of candidates an unreduced search would face:
/// `(2r + 1)^(n_y · n² / 2)`. `None` on overflow.
pub fn search_complexity_bound(radius: u32, n: usize, n_y: usize) -> Option<u128> {
    let exponent = u32::try_from(n_y * n * n / 2).ok()?;
    (2 * radius as u128 + 1).checked_pow(exponent)
}

/// The `n² × n_y` influence matrix together with its constraint metadata.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "InfluenceDocument", into = "InfluenceDocument")]
pub struct InfluenceMatrix {
    n: usize,
    n_y: usize,
    coeffs: Vec<f64>,
    constraints: Constraints,
    ownership: Vec<usize>,
}

impl InfluenceMatrix {
    pub fn new(
        n: usize,
        n_y: usize,
        coeffs: Vec<f64>,
        constraints: Constraints,
        ownership: Vec<usize>,
    ) -> Result<Self> {
        if n < 2 || n_y == 0 {
            return Err(Error::argument(format!(
                "influence matrix needs n >= 2 and n_y >= 1, got n = {n}, n_y = {n_y}"
            )));
        }
        if coeffs.len() != n * n * n_y {
            return Err(Error::argument(format!(
                "influence matrix with n = {n}, n_y = {n_y} needs {} coefficients, got {}",
                n * n * n_y,
                coeffs.len()
            )));
        }
        if let Some(k) = coeffs.iter().position(|c| !c.is_finite()) {
            return Err(Error::argument(format!("coefficient {k} is not finite")));
        }
        if ownership.len() != n_y || ownership.iter().any(|&o| o >= n) {
            return Err(Error::argument(format!(
                "ownership must assign each of the {n_y} inputs to one of {n} strategies"
            )));
        }
        constraints.check_bounds(n, n_y)?;
        constraints.check(n_y, &coeffs)?;
        Ok(Self {
            n,
            n_y,
            coeffs,
            constraints,
            ownership,
        })
    }

    /// Builds from `n²` rows of `n_y` coefficients under the constraints
    /// derived from `spec`.
    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R], spec: &ConstraintSpec) -> Result<Self> {
        let n = (rows.len() as f64).sqrt().round() as usize;
        if n * n != rows.len() {
            return Err(Error::argument(format!(
                "{} rows is not a square number of payoff entries",
                rows.len()
            )));
        }
        let n_y = rows.first().map_or(0, |r| r.as_ref().len());
        let mut coeffs = Vec::with_capacity(rows.len() * n_y);
        for (k, row) in rows.iter().enumerate() {
            let row = row.as_ref();
            if row.len() != n_y {
                return Err(Error::argument(format!(
                    "row {k} has {} coefficients, expected {n_y}",
                    row.len()
                )));
            }
            coeffs.extend_from_slice(row);
        }
        let constraints = build_constraints(spec, n, n_y)?;
        Self::new(n, n_y, coeffs, constraints, spec.ownership.clone())
    }

    /// All-zero matrix carrying the constraints of `spec`.
    pub fn template(spec: &ConstraintSpec, n: usize, n_y: usize) -> Result<Self> {
        let constraints = build_constraints(spec, n, n_y)?;
        Self::new(
            n,
            n_y,
            vec![0.0; n * n * n_y],
            constraints,
            spec.ownership.clone(),
        )
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn n_y(&self) -> usize {
        self.n_y
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn row(&self, k: usize) -> &[f64] {
        &self.coeffs[k * self.n_y..(k + 1) * self.n_y]
    }

    pub fn get(&self, p: Position) -> f64 {
        self.coeffs[p.flat(self.n_y)]
    }

    pub fn constraints(&self) -> &Constraints {
        &self.constraints
    }

    pub fn ownership(&self) -> &[usize] {
        &self.ownership
    }

    /// `c · α`; constraints survive any scaling.
    pub fn scaled(&self, c: f64) -> Result<Self> {
        let coeffs = self.coeffs.iter().map(|v| v * c).collect();
        Self::new(
            self.n,
            self.n_y,
            coeffs,
            self.constraints.clone(),
            self.ownership.clone(),
        )
    }

    /// Some `c > 0` with `other = c · self`, if one exists (relative
    /// tolerance `tol`).
    pub fn positive_scale_to(&self, other: &Self, tol: f64) -> Option<f64> {
        if self.n != other.n || self.n_y != other.n_y {
            return None;
        }
        let (k, &pivot) = self
            .coeffs
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.abs().total_cmp(&b.1.abs()))?;
        if pivot == 0.0 {
            return None;
        }
        let c = other.coeffs[k] / pivot;
        if c <= 0.0 {
            return None;
        }
        let scale = other.coeffs.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        self.coeffs
            .iter()
            .zip(&other.coeffs)
            .all(|(a, b)| (a * c - b).abs() <= tol * scale)
            .then_some(c)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }
}

/// Persisted form of [`InfluenceMatrix`]. Indices are zero-based.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct InfluenceDocument {
    pub format_version: String,
    pub n: usize,
    pub n_y: usize,
    pub coeffs: Vec<Vec<f64>>,
    pub zero_mask: Vec<[usize; 2]>,
    pub symmetry_pairs: Vec<[[usize; 2]; 2]>,
    pub ownership: Vec<usize>,
}

impl From<InfluenceMatrix> for InfluenceDocument {
    fn from(m: InfluenceMatrix) -> Self {
        Self {
            format_version: FORMAT_VERSION.to_string(),
            n: m.n,
            n_y: m.n_y,
            coeffs: m.coeffs.chunks(m.n_y).map(<[f64]>::to_vec).collect(),
            zero_mask: m
                .constraints
                .zero_mask
                .iter()
                .map(|p| [p.row, p.input])
                .collect(),
            symmetry_pairs: m
                .constraints
                .symmetry_pairs
                .iter()
                .map(|(a, b)| [[a.row, a.input], [b.row, b.input]])
                .collect(),
            ownership: m.ownership,
        }
    }
}

impl TryFrom<InfluenceDocument> for InfluenceMatrix {
    type Error = Error;

    fn try_from(doc: InfluenceDocument) -> Result<Self> {
        if doc.format_version != FORMAT_VERSION {
            return Err(Error::data(format!(
                "unsupported influence format version `{}` (expected `{FORMAT_VERSION}`)",
                doc.format_version
            )));
        }
        if doc.coeffs.len() != doc.n * doc.n {
            return Err(Error::data(format!(
                "coeffs has {} rows, expected n² = {}",
                doc.coeffs.len(),
                doc.n * doc.n
            )));
        }
        if let Some(k) = doc.coeffs.iter().position(|r| r.len() != doc.n_y) {
            return Err(Error::data(format!(
                "coeffs row {k} does not have n_y = {} entries",
                doc.n_y
            )));
        }
        let pos = |p: [usize; 2]| Position::new(p[0], p[1]);
        let constraints = Constraints {
            zero_mask: doc.zero_mask.iter().copied().map(pos).collect(),
            symmetry_pairs: doc
                .symmetry_pairs
                .iter()
                .map(|[a, b]| {
                    let (a, b) = (pos(*a), pos(*b));
                    (a.min(b), a.max(b))
                })
                .collect(),
        };
        let coeffs = doc.coeffs.concat();
        Self::new(doc.n, doc.n_y, coeffs, constraints, doc.ownership)
    }
}

/// One period's input factors `y`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct InputVector(Vec<f64>);

impl InputVector {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if let Some(m) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::argument(format!("input y_{} is not finite", m + 1)));
        }
        Ok(Self(values))
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }
}

impl std::ops::Deref for InputVector {
    type Target = [f64];

    fn deref(&self) -> &[f64] {
        &self.0
    }
}

#[inline]
pub(crate) fn synthesize_into(coeffs: &[f64], n_y: usize, y: &[f64], out: &mut [f64]) {
    for (a, row) in out.iter_mut().zip(coeffs.chunks_exact(n_y)) {
        *a = row.iter().zip(y).map(|(c, v)| c * v).sum();
    }
}

#[inline]
pub(crate) fn normalize_in_place(entries: &mut [f64]) {
    let (lo, hi) = entries
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &a| {
            (lo.min(a), hi.max(a))
        });
    let range = hi - lo;
    if range < NORMALIZATION_EPSILON {
        entries.iter_mut().for_each(|a| *a = 0.5);
    } else {
        entries.iter_mut().for_each(|a| *a = (*a - lo) / range);
    }
}

/// Raw payoff matrix `A_k = α_k · y`.
pub fn synthesize_payoff(alpha: &InfluenceMatrix, y: &InputVector) -> Result<PayoffMatrix> {
    if y.len() != alpha.n_y {
        return Err(Error::argument(format!(
            "input vector has {} values, the influence matrix expects {}",
            y.len(),
            alpha.n_y
        )));
    }
    let mut entries = vec![0.0; alpha.n * alpha.n];
    synthesize_into(&alpha.coeffs, alpha.n_y, y, &mut entries);
    PayoffMatrix::new(alpha.n, entries)
}

/// Entrywise min-max map onto `[0, 1]`; a constant matrix maps to 0.5.
pub fn normalize_payoff(raw: &PayoffMatrix) -> PayoffMatrix {
    let mut entries = raw.entries().to_vec();
    normalize_in_place(&mut entries);
    PayoffMatrix::new_normalized(raw.n(), entries).expect("min-max output lies in [0, 1]")
}

/// Independent coefficients of a constrained influence matrix.
///
/// Each free parameter stands for one symmetry orbit with no masked member;
/// parameters are ordered by their orbit's first position in row-major
/// order.
#[derive(Debug, Clone)]
pub struct FreeLayout {
    template: InfluenceMatrix,
    representatives: Vec<Position>,
    members: Vec<Vec<usize>>,
}

/// Free-parameter layout of a constrained template.
pub fn free_parameter_layout(template: &InfluenceMatrix) -> FreeLayout {
    let (n, n_y) = (template.n, template.n_y);
    let roots = template.constraints.orbit_roots(n, n_y);
    let masked: BTreeSet<usize> = template
        .constraints
        .zero_mask
        .iter()
        .map(|p| roots[p.flat(n_y)])
        .collect();
    let mut representatives = Vec::new();
    let mut members: Vec<Vec<usize>> = Vec::new();
    for (flat, &root) in roots.iter().enumerate() {
        if masked.contains(&root) {
            continue;
        }
        if root == flat {
            representatives.push(Position::new(flat / n_y, flat % n_y));
            members.push(vec![flat]);
        } else {
            let slot = representatives
                .iter()
                .position(|p| p.flat(n_y) == root)
                .expect("orbit root precedes its members");
            members[slot].push(flat);
        }
    }
    let mut template = template.clone();
    template.coeffs.iter_mut().for_each(|c| *c = 0.0);
    FreeLayout {
        template,
        representatives,
        members,
    }
}

impl FreeLayout {
    pub fn len(&self) -> usize {
        self.representatives.len()
    }

    pub fn is_empty(&self) -> bool {
        self.representatives.is_empty()
    }

    pub fn representatives(&self) -> &[Position] {
        &self.representatives
    }

    pub fn n(&self) -> usize {
        self.template.n
    }

    pub fn n_y(&self) -> usize {
        self.template.n_y
    }

    pub fn template(&self) -> &InfluenceMatrix {
        &self.template
    }

    /// Writes the coefficients determined by `params` into `coeffs`, which
    /// must start as the template (zeros at every masked position).
    #[inline]
    pub(crate) fn fill(&self, params: &[f64], coeffs: &mut [f64]) {
        for (value, flats) in params.iter().zip(&self.members) {
            for &f in flats {
                coeffs[f] = *value;
            }
        }
    }

    /// Influence matrix determined by one value per free parameter.
    pub fn materialize(&self, params: &[f64]) -> Result<InfluenceMatrix> {
        if params.len() != self.len() {
            return Err(Error::argument(format!(
                "layout has {} free parameters, got {} values",
                self.len(),
                params.len()
            )));
        }
        let mut m = self.template.clone();
        self.fill(params, &mut m.coeffs);
        InfluenceMatrix::new(m.n, m.n_y, m.coeffs, m.constraints, m.ownership)
    }

    /// Free-parameter values of `alpha`, read at the representatives.
    pub fn extract(&self, alpha: &InfluenceMatrix) -> Vec<f64> {
        self.representatives.iter().map(|&p| alpha.get(p)).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::reference;
    use proptest::prelude::*;

    fn spec(mode: ConstraintMode) -> ConstraintSpec {
        ConstraintSpec::two_product(mode, 4).unwrap()
    }

    const A11: usize = 0;
    const A12: usize = 1;
    const A21: usize = 2;
    const A22: usize = 3;

    #[test]
    fn full_symmetry_structure() {
        let c = build_constraints(&spec(ConstraintMode::FullSymmetry), 2, 4).unwrap();
        let mask: BTreeSet<Position> = [(A11, 1), (A11, 3), (A22, 0), (A22, 2)]
            .into_iter()
            .map(|(r, i)| Position::new(r, i))
            .collect();
        assert_eq!(c.zero_mask, mask);
        assert_eq!(c.symmetry_pairs.len(), 8);
        assert!(c
            .symmetry_pairs
            .contains(&(Position::new(A11, 0), Position::new(A22, 1))));
        assert!(c
            .symmetry_pairs
            .contains(&(Position::new(A12, 2), Position::new(A21, 3))));
    }

    #[test]
    fn cross_pairs_structure() {
        let c = build_constraints(&spec(ConstraintMode::CrossPairs), 2, 4).unwrap();
        let pairs: BTreeSet<_> = [
            (Position::new(A12, 0), Position::new(A21, 1)),
            (Position::new(A12, 2), Position::new(A21, 3)),
        ]
        .into_iter()
        .collect();
        assert_eq!(c.symmetry_pairs, pairs);
        assert_eq!(c.zero_mask.len(), 4);
    }

    #[test]
    fn unconstrained_is_empty() {
        let c = build_constraints(&spec(ConstraintMode::Unconstrained), 2, 4).unwrap();
        assert!(c.zero_mask.is_empty());
        assert!(c.symmetry_pairs.is_empty());
    }

    #[test]
    fn inconsistent_pairing_is_rejected() {
        let mut s = spec(ConstraintMode::FullSymmetry);
        s.pairing = vec![2, 3, 0, 1]; // y1 <-> y3: same owner
        assert!(matches!(build_constraints(&s, 2, 4), Err(Error::Config(_))));
        let mut s = spec(ConstraintMode::FullSymmetry);
        s.swap = vec![0, 0];
        assert!(build_constraints(&s, 2, 4).is_err());
        assert!(ConstraintSpec::two_product(ConstraintMode::FullSymmetry, 3).is_err());
    }

    #[test]
    fn free_parameter_counts() {
        for (mode, expected) in [
            (ConstraintMode::FullSymmetry, 6),
            (ConstraintMode::Unconstrained, 16),
            (ConstraintMode::CrossPairs, 10),
        ] {
            let t = InfluenceMatrix::template(&spec(mode), 2, 4).unwrap();
            assert_eq!(free_parameter_layout(&t).len(), expected, "{mode}");
        }
    }

    #[test]
    fn full_layout_order_is_row_major() {
        let t = InfluenceMatrix::template(&spec(ConstraintMode::FullSymmetry), 2, 4).unwrap();
        let reps: Vec<(usize, usize)> = free_parameter_layout(&t)
            .representatives()
            .iter()
            .map(|p| (p.row, p.input))
            .collect();
        assert_eq!(reps, vec![(0, 0), (0, 2), (1, 0), (1, 1), (1, 2), (1, 3)]);
    }

    #[test]
    fn reference_tables_round_trip_through_layout() {
        for alpha in [
            reference::observed_market_alpha(),
            reference::static_market_alpha(),
        ] {
            let layout = free_parameter_layout(&alpha);
            let params = layout.extract(&alpha);
            assert_eq!(layout.materialize(&params).unwrap(), alpha);
        }
        let layout = free_parameter_layout(&reference::observed_market_alpha());
        assert_eq!(
            layout.extract(&reference::observed_market_alpha()),
            vec![4.0, -1.0, 0.0, 3.0, 1.0, 3.0]
        );
    }

    #[test]
    fn synthesis_examples() {
        let alpha = reference::observed_market_alpha();
        let y = InputVector::new(vec![0.5, 0.2, 0.3, 0.7]).unwrap();
        let a = synthesize_payoff(&alpha, &y).unwrap();
        assert!(!a.is_normalized());
        let expected = [1.7, 3.0, 3.1, 0.1];
        for (got, want) in a.entries().iter().zip(expected) {
            assert!((got - want).abs() < 1e-12, "{got} vs {want}");
        }
        let zero = InfluenceMatrix::template(&spec(ConstraintMode::FullSymmetry), 2, 4).unwrap();
        assert!(synthesize_payoff(&zero, &y)
            .unwrap()
            .entries()
            .iter()
            .all(|&v| v == 0.0));
        let short = InputVector::new(vec![1.0]).unwrap();
        assert!(synthesize_payoff(&alpha, &short).is_err());
    }

    #[test]
    fn normalization_examples() {
        let raw = PayoffMatrix::from_rows(&[[1.7, 3.0], [3.1, 0.1]]).unwrap();
        let a = normalize_payoff(&raw);
        assert!(a.is_normalized());
        let expected = [1.6 / 3.0, 2.9 / 3.0, 1.0, 0.0];
        for (got, want) in a.entries().iter().zip(expected) {
            assert!((got - want).abs() < 1e-12);
        }
        let flat = PayoffMatrix::new(2, vec![7.7; 4]).unwrap();
        assert_eq!(normalize_payoff(&flat).entries(), &[0.5; 4]);
        let unit = PayoffMatrix::from_rows(&[[0.0, 1.0], [0.25, 0.75]]).unwrap();
        assert_eq!(normalize_payoff(&unit).entries(), unit.entries());
    }

    #[test]
    fn complexity_bound() {
        assert_eq!(search_complexity_bound(4, 2, 4), Some(43_046_721));
        assert_eq!(search_complexity_bound(1, 2, 4), Some(6561));
    }

    #[test]
    fn json_round_trip_and_rejection() {
        let alpha = reference::observed_market_alpha();
        let text = alpha.to_json().unwrap();
        assert!(text.contains("\"format_version\": \"1\""));
        assert_eq!(InfluenceMatrix::from_json(&text).unwrap(), alpha);
        let broken = text.replacen("-1.0", "-2.0", 1);
        assert!(InfluenceMatrix::from_json(&broken).is_err());
    }

    #[test]
    fn constructor_enforces_constraints() {
        let c = build_constraints(&spec(ConstraintMode::FullSymmetry), 2, 4).unwrap();
        let mut coeffs = reference::observed_market_alpha().coeffs().to_vec();
        coeffs[1] = 1.0; // (A11, y2) is masked
        assert!(InfluenceMatrix::new(2, 4, coeffs, c, vec![0, 1, 0, 1]).is_err());
    }

    #[test]
    fn index_round_trip() {
        for n in 2..6 {
            for i in 0..n {
                for j in 0..n {
                    assert_eq!(matrix_index(n, linear_index(n, i, j)), (i, j));
                }
            }
        }
    }

    proptest! {
        #[test]
        fn scaling_quotients_out(
            params in prop::collection::vec(-4i32..=4, 6),
            y in prop::collection::vec(0.0f64..1.0, 4),
            c in 0.01f64..50.0,
        ) {
            let t = InfluenceMatrix::template(&spec(ConstraintMode::FullSymmetry), 2, 4).unwrap();
            let layout = free_parameter_layout(&t);
            let alpha = layout.materialize(&params.iter().map(|&p| p as f64).collect::<Vec<_>>()).unwrap();
            let y = InputVector::new(y).unwrap();
            let a = normalize_payoff(&synthesize_payoff(&alpha, &y).unwrap());
            let b = normalize_payoff(&synthesize_payoff(&alpha.scaled(c).unwrap(), &y).unwrap());
            // Raw ranges near the degeneracy cut-off can flip under scaling.
            let raw = synthesize_payoff(&alpha, &y).unwrap();
            let range = raw.entries().iter().cloned().fold(f64::MIN, f64::max)
                - raw.entries().iter().cloned().fold(f64::MAX, f64::min);
            prop_assume!(range > 1e-9);
            for (u, v) in a.entries().iter().zip(b.entries()) {
                prop_assert!((u - v).abs() < 1e-12);
            }
        }

        #[test]
        fn materialized_alpha_satisfies_constraints(
            mode in prop::sample::select(vec![
                ConstraintMode::FullSymmetry,
                ConstraintMode::CrossPairs,
                ConstraintMode::Unconstrained,
            ]),
            seed in prop::collection::vec(-10.0f64..10.0, 16),
        ) {
            let t = InfluenceMatrix::template(&spec(mode), 2, 4).unwrap();
            let layout = free_parameter_layout(&t);
            let alpha = layout.materialize(&seed[..layout.len()]).unwrap();
            prop_assert!(alpha.constraints().check(4, alpha.coeffs()).is_ok());
        }

        #[test]
        fn rival_inputs_never_move_own_diagonal(
            params in prop::collection::vec(-4.0f64..4.0, 6),
            y in prop::collection::vec(0.0f64..1.0, 4),
            which in 0usize..4,
            bump in -5.0f64..5.0,
        ) {
            let t = InfluenceMatrix::template(&spec(ConstraintMode::FullSymmetry), 2, 4).unwrap();
            let alpha = free_parameter_layout(&t).materialize(&params).unwrap();
            let before = synthesize_payoff(&alpha, &InputVector::new(y.clone()).unwrap()).unwrap();
            let mut y2 = y;
            y2[which] += bump;
            let after = synthesize_payoff(&alpha, &InputVector::new(y2).unwrap()).unwrap();
            let rival = 1 - alpha.ownership()[which];
            prop_assert_eq!(before.get(rival, rival), after.get(rival, rival));
        }
    }

    #[test]
    fn general_n_full_symmetry_has_fixed_points() {
        // three strategies, 3 swaps 0 <-> 1 and fixes 2
        let s = ConstraintSpec {
            mode: ConstraintMode::FullSymmetry,
            swap: vec![1, 0, 2],
            pairing: vec![1, 0, 2],
            ownership: vec![0, 1, 2],
        };
        let c = build_constraints(&s, 3, 3).unwrap();
        c.check_bounds(3, 3).unwrap();
        // (A33, y3) is its own image and is never tied.
        let p = Position::entry(3, 2, 2, 2);
        assert!(!c.symmetry_pairs.iter().any(|(a, b)| *a == p || *b == p));
        let t = InfluenceMatrix::template(&s, 3, 3).unwrap();
        assert!(!free_parameter_layout(&t).is_empty());
    }
}
