//! Persistence over Z₂ by standard column reduction, Betti numbers, and the
//! bottleneck distance between diagrams.
//!
//! The reducer is deliberately the plain left-to-right algorithm: columns are
//! ordered by (birth level, dimension, cell order), each column is added into
//! from earlier columns until its pivot row is unclaimed or it empties, and
//! the claimed pivots are exactly the (birth, death) pairs.

use std::fmt;

use crate::cw::{boundary, CellComplex, CellIndex};

/// A persistence diagram: per dimension, a multiset of (birth, death) points
/// with `death = +∞` for classes that never die. The diagonal is implicit.
#[derive(Debug, Clone, PartialEq)]
pub struct PersistenceDiagram {
    points: Vec<Vec<(f64, f64)>>,
}

impl PersistenceDiagram {
    pub fn new(dims: usize) -> Self {
        PersistenceDiagram {
            points: vec![Vec::new(); dims],
        }
    }

    /// Build from explicit per-dimension points (testing convenience).
    pub fn from_points(points: Vec<Vec<(f64, f64)>>) -> Self {
        let mut d = PersistenceDiagram { points };
        d.normalize();
        d
    }

    pub fn push(&mut self, dim: usize, birth: f64, death: f64) {
        assert!(birth < death, "diagonal points are implicit: ({birth}, {death})");
        if dim >= self.points.len() {
            self.points.resize(dim + 1, Vec::new());
        }
        self.points[dim].push((birth, death));
    }

    fn normalize(&mut self) {
        for pts in &mut self.points {
            pts.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
        }
        while self.points.last().is_some_and(|p| p.is_empty()) {
            self.points.pop();
        }
    }

    /// Points of one dimension, sorted by (birth, death).
    pub fn points_in_dim(&self, dim: usize) -> &[(f64, f64)] {
        self.points.get(dim).map_or(&[], |v| v.as_slice())
    }

    /// One past the largest dimension with points.
    pub fn dim_count(&self) -> usize {
        self.points.len()
    }

    pub fn total_points(&self) -> usize {
        self.points.iter().map(|p| p.len()).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.total_points() == 0
    }

    pub fn iter_all(&self) -> impl Iterator<Item = (usize, f64, f64)> + '_ {
        self.points
            .iter()
            .enumerate()
            .flat_map(|(d, pts)| pts.iter().map(move |&(b, dt)| (d, b, dt)))
    }

    /// Every coordinate shifted by `c` (infinite deaths stay infinite).
    pub fn shifted(&self, c: f64) -> PersistenceDiagram {
        PersistenceDiagram::from_points(
            self.points
                .iter()
                .map(|pts| pts.iter().map(|&(b, d)| (b + c, d + c)).collect())
                .collect(),
        )
    }
}

impl fmt::Display for PersistenceDiagram {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (d, b, dt) in self.iter_all() {
            if dt.is_infinite() {
                writeln!(f, "{d},{b},inf")?;
            } else {
                writeln!(f, "{d},{b},{dt}")?;
            }
        }
        Ok(())
    }
}

/// A Z₂ boundary matrix whose columns are ordered compatibly with a
/// filtration: every row index of a column is smaller than the column index,
/// and birth levels are non-decreasing along the order.
#[derive(Debug, Clone)]
pub struct BoundaryMatrix {
    cell_dims: Vec<usize>,
    births: Vec<f64>,
    columns: Vec<Vec<usize>>,
}

impl BoundaryMatrix {
    /// `cells[j] = (dimension, birth level, boundary row indices)`.
    /// Panics if the ordering contract is violated.
    pub fn new(cells: Vec<(usize, f64, Vec<usize>)>) -> Self {
        let mut cell_dims = Vec::with_capacity(cells.len());
        let mut births = Vec::with_capacity(cells.len());
        let mut columns = Vec::with_capacity(cells.len());
        for (j, (dim, birth, mut rows)) in cells.into_iter().enumerate() {
            rows.sort_unstable();
            rows.dedup();
            for &r in &rows {
                assert!(r < j, "column {j} references row {r} at or after itself");
                assert!(
                    births[r] <= birth,
                    "face of column {j} is born later than the column"
                );
            }
            cell_dims.push(dim);
            births.push(birth);
            columns.push(rows);
        }
        BoundaryMatrix {
            cell_dims,
            births,
            columns,
        }
    }

    pub fn len(&self) -> usize {
        self.columns.len()
    }

    pub fn is_empty(&self) -> bool {
        self.columns.is_empty()
    }

    pub fn cell_dim(&self, j: usize) -> usize {
        self.cell_dims[j]
    }

    pub fn birth(&self, j: usize) -> f64 {
        self.births[j]
    }
}

fn sym_diff(a: &[usize], b: &[usize]) -> Vec<usize> {
    let mut out = Vec::with_capacity(a.len() + b.len());
    let (mut i, mut j) = (0, 0);
    while i < a.len() && j < b.len() {
        match a[i].cmp(&b[j]) {
            std::cmp::Ordering::Less => {
                out.push(a[i]);
                i += 1;
            }
            std::cmp::Ordering::Greater => {
                out.push(b[j]);
                j += 1;
            }
            std::cmp::Ordering::Equal => {
                i += 1;
                j += 1;
            }
        }
    }
    out.extend_from_slice(&a[i..]);
    out.extend_from_slice(&b[j..]);
    out
}

/// The raw pairing produced by column reduction: every cell is either a
/// creator paired with its killer, or unpaired (an immortal class).
#[derive(Debug, Clone)]
pub struct ReducedPairing {
    /// `(creator column, killer column)`, including diagonal pairs.
    pub pairs: Vec<(usize, usize)>,
    /// Creator columns never killed.
    pub unpaired: Vec<usize>,
}

/// Column-reduce the matrix and return the raw pairing.
pub fn reduce_pairs(matrix: &BoundaryMatrix) -> ReducedPairing {
    let n = matrix.len();
    let mut cols = matrix.columns.clone();
    let mut pivot_owner: Vec<Option<usize>> = vec![None; n];
    for j in 0..n {
        while let Some(&low) = cols[j].last() {
            match pivot_owner[low] {
                None => {
                    pivot_owner[low] = Some(j);
                    break;
                }
                Some(k) => {
                    let other = std::mem::take(&mut cols[k]);
                    cols[j] = sym_diff(&cols[j], &other);
                    cols[k] = other;
                }
            }
        }
    }
    let mut pairs = Vec::new();
    let mut killed = vec![false; n];
    for j in 0..n {
        if let Some(&low) = cols[j].last() {
            killed[low] = true;
            pairs.push((low, j));
        }
    }
    let unpaired = (0..n)
        .filter(|&j| cols[j].is_empty() && !killed[j])
        .collect();
    ReducedPairing { pairs, unpaired }
}

/// Column-reduce the matrix and read off the persistence diagram. Pairs with
/// equal birth and death levels are diagonal and dropped.
pub fn reduce(matrix: &BoundaryMatrix) -> PersistenceDiagram {
    let pairing = reduce_pairs(matrix);
    let max_dim = matrix.cell_dims.iter().copied().max().map_or(0, |d| d + 1);
    let mut diagram = PersistenceDiagram::new(max_dim);
    for &(creator, killer) in &pairing.pairs {
        let birth = matrix.births[creator];
        let death = matrix.births[killer];
        if birth != death {
            diagram.push(matrix.cell_dims[creator], birth, death);
        }
    }
    for &j in &pairing.unpaired {
        diagram.push(matrix.cell_dims[j], matrix.births[j], f64::INFINITY);
    }
    diagram.normalize();
    diagram
}

/// Assemble the boundary matrix of a single complex (every cell born at 0).
fn complex_matrix(complex: &CellComplex) -> BoundaryMatrix {
    let tree = complex.tree();
    let mut order: Vec<&CellIndex> = complex.all_cells().collect();
    order.sort_by(|a, b| a.dimension().cmp(&b.dimension()).then_with(|| a.cmp(b)));
    let index_of: std::collections::BTreeMap<&CellIndex, usize> =
        order.iter().enumerate().map(|(i, c)| (*c, i)).collect();
    let cells = order
        .iter()
        .map(|c| {
            let rows = boundary(c, tree)
                .support_mod2()
                .iter()
                .map(|f| *index_of.get(f).expect("complex must be closed"))
                .collect();
            (c.dimension(), 0.0, rows)
        })
        .collect();
    BoundaryMatrix::new(cells)
}

/// Z₂ Betti numbers of a closed complex, one entry per dimension `0..=N`.
pub fn betti(complex: &CellComplex) -> Vec<usize> {
    let mut out = vec![0usize; complex.dims() + 1];
    if complex.is_empty() {
        return out;
    }
    let diagram = reduce(&complex_matrix(complex));
    for (d, _, death) in diagram.iter_all() {
        if death.is_infinite() {
            out[d] += 1;
        }
    }
    out
}

fn linf(p: (f64, f64), q: (f64, f64)) -> f64 {
    (p.0 - q.0).abs().max((p.1 - q.1).abs())
}

fn diag_gap(p: (f64, f64)) -> f64 {
    (p.1 - p.0) / 2.0
}

/// Maximum-cardinality bipartite matching (Kuhn's augmenting paths).
struct Matching {
    adj: Vec<Vec<usize>>,
    right_of_left: Vec<Option<usize>>,
    left_of_right: Vec<Option<usize>>,
}

impl Matching {
    fn new(left: usize, right: usize) -> Self {
        Matching {
            adj: vec![Vec::new(); left],
            right_of_left: vec![None; left],
            left_of_right: vec![None; right],
        }
    }

    fn add_edge(&mut self, l: usize, r: usize) {
        self.adj[l].push(r);
    }

    fn try_augment(&mut self, l: usize, seen: &mut [bool]) -> bool {
        for idx in 0..self.adj[l].len() {
            let r = self.adj[l][idx];
            if seen[r] {
                continue;
            }
            seen[r] = true;
            if self.left_of_right[r].is_none()
                || self.try_augment(self.left_of_right[r].unwrap(), seen)
            {
                self.right_of_left[l] = Some(r);
                self.left_of_right[r] = Some(l);
                return true;
            }
        }
        false
    }

    fn max_matching(&mut self) -> usize {
        let mut size = 0;
        for l in 0..self.adj.len() {
            let mut seen = vec![false; self.left_of_right.len()];
            if self.try_augment(l, &mut seen) {
                size += 1;
            }
        }
        size
    }
}

/// Can the finite points of two diagrams be matched (diagonal allowed) with
/// every displacement at most `r`?
fn finite_matchable(a: &[(f64, f64)], b: &[(f64, f64)], r: f64) -> bool {
    let (n, m) = (a.len(), b.len());
    // left = a-points then m diagonal slots; right = b-points then n slots
    let mut matching = Matching::new(n + m, m + n);
    for (i, &p) in a.iter().enumerate() {
        for (j, &q) in b.iter().enumerate() {
            if linf(p, q) <= r {
                matching.add_edge(i, j);
            }
        }
        if diag_gap(p) <= r {
            matching.add_edge(i, m + i);
        }
    }
    for (j, &q) in b.iter().enumerate() {
        if diag_gap(q) <= r {
            matching.add_edge(n + j, j);
        }
    }
    // diagonal slots pair with each other freely
    for j in 0..m {
        for i in 0..n {
            matching.add_edge(n + j, m + i);
        }
    }
    matching.max_matching() == n + m
}

/// Bottleneck distance for points with infinite death: these must match each
/// other, and on a line the sorted pairing minimizes the maximum gap.
fn infinite_part(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let mut sa = a.to_vec();
    let mut sb = b.to_vec();
    sa.sort_by(f64::total_cmp);
    sb.sort_by(f64::total_cmp);
    sa.iter()
        .zip(&sb)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

/// Exact bottleneck distance between two diagrams.
///
/// Per dimension the distance is the smallest value in the candidate set
/// (pairwise L∞ distances and half persistence gaps) for which a perfect
/// matching with diagonal completion exists; mismatched infinite-death
/// counts make the distance `+∞`. The overall distance is the maximum over
/// dimensions.
pub fn bottleneck(a: &PersistenceDiagram, b: &PersistenceDiagram) -> f64 {
    let dims = a.dim_count().max(b.dim_count());
    let mut worst = 0.0f64;
    for d in 0..dims {
        let pa = a.points_in_dim(d);
        let pb = b.points_in_dim(d);
        let (fa, inf_a): (Vec<(f64, f64)>, Vec<(f64, f64)>) =
            pa.iter().partition(|p| p.1.is_finite());
        let (fb, inf_b): (Vec<(f64, f64)>, Vec<(f64, f64)>) =
            pb.iter().partition(|p| p.1.is_finite());
        if inf_a.len() != inf_b.len() {
            return f64::INFINITY;
        }
        let births_a: Vec<f64> = inf_a.iter().map(|p| p.0).collect();
        let births_b: Vec<f64> = inf_b.iter().map(|p| p.0).collect();
        worst = worst.max(infinite_part(&births_a, &births_b));
        if fa.is_empty() && fb.is_empty() {
            continue;
        }
        let mut candidates: Vec<f64> = vec![0.0];
        candidates.extend(fa.iter().map(|&p| diag_gap(p)));
        candidates.extend(fb.iter().map(|&q| diag_gap(q)));
        for &p in &fa {
            for &q in &fb {
                candidates.push(linf(p, q));
            }
        }
        candidates.sort_by(f64::total_cmp);
        candidates.dedup();
        // binary search for the smallest feasible candidate
        let (mut lo, mut hi) = (0usize, candidates.len() - 1);
        debug_assert!(finite_matchable(&fa, &fb, candidates[hi]));
        while lo < hi {
            let mid = (lo + hi) / 2;
            if finite_matchable(&fa, &fb, candidates[mid]) {
                hi = mid;
            } else {
                lo = mid + 1;
            }
        }
        worst = worst.max(candidates[lo]);
    }
    worst
}
