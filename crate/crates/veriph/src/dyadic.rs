//! Exact dyadic rationals and the cell geometry built from them.
//!
//! All geometric predicates behind the neighbor search and canonicalization
//! must be exact: a one-ulp slip in an intersection test silently corrupts
//! the boundary operator. Values are `num / 2^exp` with `num: i64`, which is
//! exact for every quantity this crate produces (depths stay far below 60).

use std::cmp::Ordering;
use std::fmt;

/// `num / 2^exp`. Not normalized; comparison cross-scales exactly.
#[derive(Debug, Clone, Copy)]
pub struct Dyadic {
    pub num: i64,
    pub exp: u32,
}

impl Dyadic {
    pub fn new(num: i64, exp: u32) -> Self {
        debug_assert!(exp <= 60, "dyadic scale {exp} too deep for i64 math");
        Dyadic { num, exp }
    }

    pub fn zero() -> Self {
        Dyadic { num: 0, exp: 0 }
    }

    pub fn one() -> Self {
        Dyadic { num: 1, exp: 0 }
    }

    /// Exact f64 value (mantissas here are far below 2^53).
    pub fn to_f64(self) -> f64 {
        self.num as f64 / (1u64 << self.exp) as f64
    }

    fn cross(self, other: Dyadic) -> (i64, i64) {
        let e = self.exp.max(other.exp);
        (self.num << (e - self.exp), other.num << (e - other.exp))
    }
}

impl PartialEq for Dyadic {
    fn eq(&self, other: &Self) -> bool {
        let (a, b) = self.cross(*other);
        a == b
    }
}

impl Eq for Dyadic {}

impl PartialOrd for Dyadic {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Dyadic {
    fn cmp(&self, other: &Self) -> Ordering {
        let (a, b) = self.cross(*other);
        a.cmp(&b)
    }
}

impl fmt::Display for Dyadic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/2^{}", self.num, self.exp)
    }
}

/// One axis of a cell: either a grid point or an open dyadic interval.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum AxisGeom {
    Point(Dyadic),
    /// Open interval `(lo, hi)`.
    Open(Dyadic, Dyadic),
}

impl AxisGeom {
    pub fn is_point(&self) -> bool {
        matches!(self, AxisGeom::Point(_))
    }

    pub fn lo(&self) -> Dyadic {
        match *self {
            AxisGeom::Point(p) => p,
            AxisGeom::Open(l, _) => l,
        }
    }

    pub fn hi(&self) -> Dyadic {
        match *self {
            AxisGeom::Point(p) => p,
            AxisGeom::Open(_, h) => h,
        }
    }

    /// Nonempty intersection of the (relatively open) axis sets.
    pub fn intersects(&self, other: &AxisGeom) -> bool {
        match (*self, *other) {
            (AxisGeom::Point(p), AxisGeom::Point(q)) => p == q,
            (AxisGeom::Point(p), AxisGeom::Open(l, h)) | (AxisGeom::Open(l, h), AxisGeom::Point(p)) => {
                l < p && p < h
            }
            (AxisGeom::Open(l1, h1), AxisGeom::Open(l2, h2)) => l1.max(l2) < h1.min(h2),
        }
    }

    /// `other ⊆ self` as subsets of the line.
    pub fn contains(&self, other: &AxisGeom) -> bool {
        match (*self, *other) {
            (AxisGeom::Point(p), AxisGeom::Point(q)) => p == q,
            (AxisGeom::Point(_), AxisGeom::Open(..)) => false,
            (AxisGeom::Open(l, h), AxisGeom::Point(q)) => l < q && q < h,
            (AxisGeom::Open(l1, h1), AxisGeom::Open(l2, h2)) => l1 <= l2 && h2 <= h1,
        }
    }
}

/// The geometry of one cell: a product of points and open intervals.
#[derive(Debug, Clone, PartialEq)]
pub struct CellGeom {
    pub axes: Vec<AxisGeom>,
}

impl CellGeom {
    pub fn dims(&self) -> usize {
        self.axes.len()
    }

    pub fn dimension(&self) -> usize {
        self.axes.iter().filter(|a| !a.is_point()).count()
    }

    pub fn intersects(&self, other: &CellGeom) -> bool {
        self.axes
            .iter()
            .zip(&other.axes)
            .all(|(a, b)| a.intersects(b))
    }

    pub fn contains(&self, other: &CellGeom) -> bool {
        self.axes.iter().zip(&other.axes).all(|(a, b)| a.contains(b))
    }
}

/// A closed dyadic box, used for cube geometry and closed cells.
#[derive(Debug, Clone, PartialEq)]
pub struct ClosedBox {
    /// Per axis `[lo, hi]` with `lo <= hi` (equality for degenerate axes).
    pub axes: Vec<(Dyadic, Dyadic)>,
}

impl ClosedBox {
    pub fn dims(&self) -> usize {
        self.axes.len()
    }

    /// Does the closed box meet the (relatively open) cell?
    pub fn meets_cell(&self, cell: &CellGeom) -> bool {
        self.axes.iter().zip(&cell.axes).all(|(&(lo, hi), c)| match *c {
            AxisGeom::Point(p) => lo <= p && p <= hi,
            AxisGeom::Open(l, h) => lo < h && l < hi,
        })
    }

    /// Does the open interior of the box contain the cell?
    pub fn interior_contains_cell(&self, cell: &CellGeom) -> bool {
        self.axes.iter().zip(&cell.axes).all(|(&(lo, hi), c)| match *c {
            AxisGeom::Point(p) => lo < p && p < hi,
            AxisGeom::Open(l, h) => lo <= l && h <= hi,
        })
    }

    /// `other ⊆ self` for closed boxes.
    pub fn contains_closed(&self, other: &ClosedBox) -> bool {
        self.axes
            .iter()
            .zip(&other.axes)
            .all(|(&(lo, hi), &(lo2, hi2))| lo <= lo2 && hi2 <= hi)
    }
}
