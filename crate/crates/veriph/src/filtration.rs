//! Threshold schedules and the intersected cellular filtration.
//!
//! Thresholds live on a decimal grid `anchor + j·delta` with `delta` kept as
//! an exact decimal (units over a power of ten). Working in decimal is what
//! makes the reported error bound come out as the exact decimal the spacing
//! implies — `0.05` with a worst failure run of two must report `0.15`, and
//! repeated binary-float multiplication misses that by an ulp.
//!
//! The filtration itself is built from the top threshold downward: each
//! level is the cellular approximation at its threshold intersected with the
//! level above, both re-expressed in the common refinement of their grids.
//! Thresholds whose grids failed to verify are skipped; they only widen the
//! a-posteriori bound.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::sync::Arc;

use thiserror::Error;

use crate::cw::{boundary, cell_geom, CellComplex, CellIndex};
use crate::expr::{ExprError, FunctionExpr};
use crate::grid::GridFailure;
use crate::grid::GridTree;
use crate::interval::IntervalBox;
use crate::persistence::BoundaryMatrix;

/// An exact decimal step `units · 10^-pow10`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DecimalStep {
    units: i64,
    pow10: u32,
}

#[derive(Debug, Error, PartialEq)]
pub enum DecimalError {
    #[error("cannot parse `{0}` as a decimal number")]
    Malformed(String),
    #[error("`{0}` has too many digits for exact decimal arithmetic")]
    TooPrecise(String),
}

impl DecimalStep {
    pub fn new(units: i64, pow10: u32) -> Self {
        assert!(pow10 <= 18);
        DecimalStep { units, pow10 }
    }

    /// Parse decimal text like `0.05`, `1`, `2.5`.
    pub fn parse(text: &str) -> Result<Self, DecimalError> {
        let s = text.trim();
        let (sign, digits) = match s.strip_prefix('-') {
            Some(rest) => (-1i64, rest),
            None => (1i64, s.strip_prefix('+').unwrap_or(s)),
        };
        let mut units: i64 = 0;
        let mut pow10: u32 = 0;
        let mut seen_dot = false;
        let mut seen_digit = false;
        for c in digits.chars() {
            match c {
                '0'..='9' => {
                    seen_digit = true;
                    units = units
                        .checked_mul(10)
                        .and_then(|u| u.checked_add((c as u8 - b'0') as i64))
                        .ok_or_else(|| DecimalError::TooPrecise(text.into()))?;
                    if seen_dot {
                        pow10 += 1;
                    }
                }
                '.' if !seen_dot => seen_dot = true,
                _ => return Err(DecimalError::Malformed(text.into())),
            }
        }
        if !seen_digit || pow10 > 18 {
            return Err(DecimalError::Malformed(text.into()));
        }
        Ok(DecimalStep {
            units: sign * units,
            pow10,
        })
    }

    pub fn is_positive(&self) -> bool {
        self.units > 0
    }

    /// `k` times the step, correctly rounded from the exact decimal.
    pub fn times(&self, k: i64) -> f64 {
        let exact = self.units as i128 * k as i128;
        exact as f64 / 10f64.powi(self.pow10 as i32)
    }

    /// The step itself as f64.
    pub fn value(&self) -> f64 {
        self.times(1)
    }
}

impl fmt::Display for DecimalStep {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.pow10 == 0 {
            return write!(f, "{}", self.units);
        }
        let sign = if self.units < 0 { "-" } else { "" };
        let mag = self.units.unsigned_abs();
        let base = 10u64.pow(self.pow10);
        write!(f, "{sign}{}.{:0width$}", mag / base, mag % base, width = self.pow10 as usize)
    }
}

/// A uniform grid of thresholds covering a certified enclosure of the range
/// of `f`, extended strictly beyond each end. The implicit `-∞`/`+∞`
/// sentinels are never materialized.
#[derive(Debug, Clone)]
pub struct ThresholdSchedule {
    pub delta: DecimalStep,
    pub anchor: f64,
    first_index: i64,
    thresholds: Vec<f64>,
}

#[derive(Debug, Error)]
pub enum ScheduleError {
    #[error("threshold spacing must be positive")]
    NonPositiveDelta,
    #[error("range override [{lo}, {hi}] does not strictly contain the certified range [{certified_lo}, {certified_hi}]")]
    OverrideTooNarrow {
        lo: f64,
        hi: f64,
        certified_lo: f64,
        certified_hi: f64,
    },
    #[error(transparent)]
    Expr(#[from] ExprError),
}

impl ThresholdSchedule {
    pub fn len(&self) -> usize {
        self.thresholds.len()
    }

    pub fn is_empty(&self) -> bool {
        self.thresholds.is_empty()
    }

    pub fn thresholds(&self) -> &[f64] {
        &self.thresholds
    }

    pub fn value(&self, i: usize) -> f64 {
        self.thresholds[i]
    }

    /// Schedule position of threshold `i` on the decimal grid.
    pub fn grid_index(&self, i: usize) -> i64 {
        self.first_index + i as i64
    }
}

fn grid_value(anchor: f64, delta: &DecimalStep, j: i64) -> f64 {
    if anchor == 0.0 {
        delta.times(j)
    } else {
        anchor + delta.times(j)
    }
}

/// Build a uniform threshold schedule for `f` on `[0,1]^dims`.
///
/// The range of `f` is certified with `refined_eval` at refinement `k`; the
/// schedule starts at the largest grid point strictly below the certified
/// minimum and ends at the smallest strictly above the certified maximum.
/// An explicit `range` override pins the schedule to `[lo, hi]` instead
/// (still validated against the certified enclosure).
pub fn build_schedule(
    f: &FunctionExpr,
    dims: usize,
    delta: &DecimalStep,
    anchor: f64,
    range: Option<(f64, f64)>,
    k: usize,
) -> Result<ThresholdSchedule, ScheduleError> {
    if !delta.is_positive() {
        return Err(ScheduleError::NonPositiveDelta);
    }
    let enclosure = f.refined_eval(&IntervalBox::unit(dims), k)?;
    let step = delta.value();
    let (first_index, last_index) = match range {
        None => {
            // largest j with value < enclosure.lo
            let mut j = ((enclosure.lo - anchor) / step).floor() as i64 - 2;
            while grid_value(anchor, delta, j + 1) < enclosure.lo {
                j += 1;
            }
            let lo_j = j;
            let mut j = ((enclosure.hi - anchor) / step).ceil() as i64 + 2;
            while grid_value(anchor, delta, j - 1) > enclosure.hi {
                j -= 1;
            }
            (lo_j, j)
        }
        Some((lo, hi)) => {
            // smallest j with value >= lo, largest with value <= hi
            let mut j = ((lo - anchor) / step).floor() as i64 - 2;
            while grid_value(anchor, delta, j) < lo {
                j += 1;
            }
            let lo_j = j;
            let mut j = ((hi - anchor) / step).ceil() as i64 + 2;
            while grid_value(anchor, delta, j) > hi {
                j -= 1;
            }
            let first = grid_value(anchor, delta, lo_j);
            let last = grid_value(anchor, delta, j);
            if first >= enclosure.lo || last <= enclosure.hi {
                return Err(ScheduleError::OverrideTooNarrow {
                    lo,
                    hi,
                    certified_lo: enclosure.lo,
                    certified_hi: enclosure.hi,
                });
            }
            (lo_j, j)
        }
    };
    let thresholds = (first_index..=last_index)
        .map(|j| grid_value(anchor, delta, j))
        .collect();
    Ok(ThresholdSchedule {
        delta: delta.clone(),
        anchor,
        first_index,
        thresholds,
    })
}

/// Per-threshold result of grid construction.
#[derive(Debug, Clone)]
pub enum LevelOutcome {
    Verified {
        tree: Arc<GridTree>,
        complex: CellComplex,
    },
    Failed(GridFailure),
}

impl LevelOutcome {
    pub fn is_verified(&self) -> bool {
        matches!(self, LevelOutcome::Verified { .. })
    }
}

/// Longest run of consecutive failures and the resulting certified bound
/// `epsilon = delta · (F + 1)` on the bottleneck distance to the exact
/// diagram.
pub fn a_posteriori_bound(delta: &DecimalStep, verified: &[bool]) -> (f64, usize) {
    let mut longest = 0usize;
    let mut run = 0usize;
    for &ok in verified {
        if ok {
            run = 0;
        } else {
            run += 1;
            longest = longest.max(run);
        }
    }
    (delta.times(longest as i64 + 1), longest)
}

/// The filtered complex on the common refinement of all verified grids.
/// Each cell carries the index of the first verified threshold whose level
/// contains it.
#[derive(Debug, Clone)]
pub struct FilteredComplex {
    tree: Arc<GridTree>,
    births: BTreeMap<CellIndex, usize>,
    thresholds: Vec<f64>,
}

impl FilteredComplex {
    pub fn tree(&self) -> &Arc<GridTree> {
        &self.tree
    }

    pub fn cell_count(&self) -> usize {
        self.births.len()
    }

    pub fn births(&self) -> &BTreeMap<CellIndex, usize> {
        &self.births
    }

    pub fn thresholds(&self) -> &[f64] {
        &self.thresholds
    }

    /// The level `X̄_{s_i}`: cells born at or before threshold `i`.
    pub fn level_complex(&self, i: usize) -> CellComplex {
        let mut complex = CellComplex::empty(self.tree.clone());
        for (cell, &b) in &self.births {
            if b <= i {
                complex.insert(cell.clone());
            }
        }
        complex
    }

    /// The boundary matrix of the filtration, columns ordered by
    /// (birth, dimension, cell index), entries labeled with threshold values.
    pub fn boundary_matrix(&self) -> BoundaryMatrix {
        let mut order: Vec<(&CellIndex, usize)> =
            self.births.iter().map(|(c, &b)| (c, b)).collect();
        order.sort_by(|(c1, b1), (c2, b2)| {
            b1.cmp(b2)
                .then_with(|| c1.dimension().cmp(&c2.dimension()))
                .then_with(|| c1.cmp(c2))
        });
        let index_of: BTreeMap<&CellIndex, usize> = order
            .iter()
            .enumerate()
            .map(|(i, (c, _))| (*c, i))
            .collect();
        let cells = order
            .iter()
            .map(|(c, b)| {
                let rows: Vec<usize> = boundary(c, &self.tree)
                    .support_mod2()
                    .iter()
                    .map(|face| {
                        *index_of
                            .get(face)
                            .expect("filtration levels must be closed complexes")
                    })
                    .collect();
                (c.dimension(), self.thresholds[*b], rows)
            })
            .collect();
        BoundaryMatrix::new(cells)
    }
}

/// Decompose a cell set into the canonical cells of `tree` it contains,
/// remembering a payload per piece.
fn refine_with_payload<T: Copy>(
    cells: &BTreeMap<CellIndex, T>,
    dims: usize,
    tree: &Arc<GridTree>,
) -> BTreeMap<CellIndex, T> {
    let mut out = BTreeMap::new();
    for (cell, &payload) in cells {
        let geom = cell_geom(cell, dims);
        let pieces = crate::cw::refine_cells(std::iter::once(cell), dims, tree);
        debug_assert!(pieces.iter().all(|p| geom.contains(&cell_geom(p, dims))));
        for piece in pieces {
            let prev = out.insert(piece, payload);
            debug_assert!(prev.is_none(), "decompositions of distinct cells overlap");
        }
    }
    out
}

/// Build the filtered complex from per-threshold outcomes.
///
/// Working from the top threshold down, each verified level is intersected
/// with the running level after both are re-expressed in the merged grid.
/// Failed thresholds contribute nothing. The first and last thresholds are
/// required to be verified (they bound the range of `f`, so their grids are
/// trivially the empty and full complexes).
pub fn intersect_into_filtration(
    levels: &[LevelOutcome],
    thresholds: &[f64],
) -> FilteredComplex {
    assert_eq!(levels.len(), thresholds.len());
    let verified: Vec<usize> = levels
        .iter()
        .enumerate()
        .filter(|(_, l)| l.is_verified())
        .map(|(i, _)| i)
        .collect();
    assert!(
        !verified.is_empty(),
        "a filtration needs at least one verified threshold"
    );
    let top = *verified.last().unwrap();
    let LevelOutcome::Verified { tree, complex } = &levels[top] else {
        unreachable!()
    };
    let dims = tree.dims();
    let mut merged: Arc<GridTree> = tree.clone();
    let mut births: BTreeMap<CellIndex, usize> =
        complex.all_cells().map(|c| (c.clone(), top)).collect();
    let mut current: BTreeSet<CellIndex> = births.keys().cloned().collect();

    for &i in verified.iter().rev().skip(1) {
        let LevelOutcome::Verified { tree, complex } = &levels[i] else {
            unreachable!()
        };
        let next_merged = Arc::new(merged.merge(tree));
        if *next_merged != *merged {
            births = refine_with_payload(&births, dims, &next_merged);
            current = current
                .iter()
                .flat_map(|c| crate::cw::refine_cells(std::iter::once(c), dims, &next_merged))
                .collect();
            merged = next_merged;
        }
        let level_cells: BTreeSet<CellIndex> =
            crate::cw::refine_cells(complex.all_cells(), dims, &merged);
        current = current.intersection(&level_cells).cloned().collect();
        for cell in &current {
            births.insert(cell.clone(), i);
        }
    }
    FilteredComplex {
        tree: merged,
        births,
        thresholds: thresholds.to_vec(),
    }
}
