//! The CW structure induced by a dyadic grid.
//!
//! Every leaf cube carries the standard cell decomposition of a cube: each
//! cell is named by a word in `{0,1,2}^N` (`0` = lower endpoint, `1` = upper
//! endpoint, `2` = open interior on that axis, all in the cube's local
//! frame). The cells of the whole grid are the leaf cells that are not
//! subdivided by a finer neighboring leaf; each such cell is stored under a
//! canonical representative, the one indexed from the smallest cube in the
//! (depth, digits) order. All geometric predicates are exact dyadic
//! arithmetic — never floating point.

use std::collections::BTreeMap;
use std::collections::BTreeSet;
use std::fmt;
use std::sync::Arc;

use thiserror::Error;

use crate::dyadic::{AxisGeom, CellGeom, Dyadic};
use crate::expr::FunctionExpr;
use crate::grid::{
    cube_closed, cube_geometry, decide_side, CubeIndex, GridConfig, GridNode, GridTree, Side,
    Sign, VerificationOutcome,
};
use crate::interval::{Interval, IntervalBox};

#[derive(Debug, Error, PartialEq)]
pub enum CwError {
    #[error("cube {0} is not a node of the grid tree")]
    NotCovered(CubeIndex),
    #[error("invalid cell index: {0}")]
    Invalid(String),
}

/// A cell of the grid CW structure: a cube address plus a local cell word.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct CellIndex {
    pub cube: CubeIndex,
    pub lambda: Vec<u8>,
}

impl CellIndex {
    pub fn new(cube: CubeIndex, lambda: Vec<u8>) -> Self {
        CellIndex { cube, lambda }
    }

    /// Number of open axes.
    pub fn dimension(&self) -> usize {
        self.lambda.iter().filter(|&&d| d == 2).count()
    }
}

impl fmt::Display for CellIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}[", self.cube)?;
        for d in &self.lambda {
            write!(f, "{d}")?;
        }
        write!(f, "]")
    }
}

/// Enumerate all `3^dims` cell words of one cube.
pub fn all_lambdas(dims: usize) -> Vec<Vec<u8>> {
    let mut out = vec![Vec::new()];
    for _ in 0..dims {
        let mut next = Vec::with_capacity(out.len() * 3);
        for word in &out {
            for d in 0..3u8 {
                let mut w = word.clone();
                w.push(d);
                next.push(w);
            }
        }
        out = next;
    }
    out
}

/// Exact geometry of the (relatively open) cell.
pub fn cell_geom(c: &CellIndex, dims: usize) -> CellGeom {
    debug_assert_eq!(c.lambda.len(), dims);
    let n = c.cube.depth() as u32;
    let axes = (0..dims)
        .map(|a| {
            let m = c.cube.axis_base(a);
            match c.lambda[a] {
                0 => AxisGeom::Point(Dyadic::new(m, n)),
                1 => AxisGeom::Point(Dyadic::new(m + 1, n)),
                2 => AxisGeom::Open(Dyadic::new(m, n), Dyadic::new(m + 1, n)),
                other => panic!("invalid cell digit {other}"),
            }
        })
        .collect();
    CellGeom { axes }
}

/// Closed-cell geometry as exact f64 intervals (degenerate on point axes).
/// Dyadic bounds at supported depths are exact in f64.
pub fn cell_geometry(c: &CellIndex, dims: usize) -> IntervalBox {
    let g = cell_geom(c, dims);
    IntervalBox::new(
        g.axes
            .iter()
            .map(|axis| Interval::new(axis.lo().to_f64(), axis.hi().to_f64()))
            .collect(),
    )
}

/// Is there a leaf strictly deeper than `limit` whose closed cube meets the
/// cell? If so, the cell is subdivided and cannot be canonical.
fn refined_below(tree: &GridTree, geom: &CellGeom, limit: usize) -> bool {
    fn walk(node: &GridNode, idx: &CubeIndex, dims: usize, geom: &CellGeom, limit: usize) -> bool {
        if !cube_closed(idx, dims).meets_cell(geom) {
            return false;
        }
        match node {
            GridNode::Leaf(_) => idx.depth() > limit,
            GridNode::Branch(children) => {
                if idx.depth() >= limit {
                    // every descendant leaf here is deeper than `limit`, and
                    // at least one of them meets the cell (their closures
                    // cover this cube)
                    return true;
                }
                children
                    .iter()
                    .enumerate()
                    .any(|(s, child)| walk(child, &idx.child(s as u32), dims, geom, limit))
            }
        }
    }
    walk(tree.root(), &CubeIndex::root(), tree.dims(), geom, limit)
}

/// Is this cell in the CW structure of the grid (i.e. not subdivided by any
/// finer leaf)? Vertices are never subdivided.
pub fn is_canonical(c: &CellIndex, tree: &GridTree) -> bool {
    if c.dimension() == 0 {
        return true;
    }
    let geom = cell_geom(c, tree.dims());
    !refined_below(tree, &geom, c.cube.depth())
}

/// The canonical representative of the cell's geometry: the same geometric
/// cell indexed from the smallest holding cube in (depth, digits) order.
pub fn representative(c: &CellIndex, tree: &GridTree) -> CellIndex {
    let dims = tree.dims();
    let geom = cell_geom(c, dims);
    let mut best: Option<CellIndex> = None;
    let target_depth = c.cube.depth();
    let dim0 = c.dimension() == 0;
    fn walk(
        node: &GridNode,
        idx: &CubeIndex,
        dims: usize,
        geom: &CellGeom,
        dim0: bool,
        target_depth: usize,
        best: &mut Option<CellIndex>,
    ) {
        let closed = cube_closed(idx, dims);
        if !closed.meets_cell(geom) {
            return;
        }
        match node {
            GridNode::Leaf(_) => {
                // positive-dimensional cells only match leaves at their own
                // scale; vertices can be corners of any leaf
                if !dim0 && idx.depth() != target_depth {
                    return;
                }
                let mut lambda = Vec::with_capacity(dims);
                for (axis, &(lo, hi)) in closed.axes.iter().enumerate() {
                    let digit = match geom.axes[axis] {
                        AxisGeom::Point(p) => {
                            if p == lo {
                                0
                            } else if p == hi {
                                1
                            } else {
                                return; // interior point: not a cell of this leaf
                            }
                        }
                        AxisGeom::Open(l, h) => {
                            if l == lo && h == hi {
                                2
                            } else {
                                return;
                            }
                        }
                    };
                    lambda.push(digit);
                }
                let candidate = CellIndex::new(idx.clone(), lambda);
                if best.as_ref().map_or(true, |b| candidate < *b) {
                    *best = Some(candidate);
                }
            }
            GridNode::Branch(children) => {
                for (s, child) in children.iter().enumerate() {
                    walk(child, &idx.child(s as u32), dims, geom, dim0, target_depth, best);
                }
            }
        }
    }
    walk(
        tree.root(),
        &CubeIndex::root(),
        dims,
        &geom,
        dim0,
        target_depth,
        &mut best,
    );
    best.unwrap_or_else(|| c.clone())
}

/// All canonical cells whose representative lives in this leaf. This is the
/// cell set stored at the leaf; it partitions the CW structure across leaves.
pub fn leaf_basis_cells(leaf: &CubeIndex, tree: &GridTree) -> Vec<CellIndex> {
    let dims = tree.dims();
    let mut out = Vec::new();
    for lambda in all_lambdas(dims) {
        let c = CellIndex::new(leaf.clone(), lambda);
        if is_canonical(&c, tree) && representative(&c, tree) == c {
            out.push(c);
        }
    }
    out
}

/// Resolve a cell to its index in the grid CW structure. If the cell's
/// geometry is itself a cell of the structure, this is its canonical
/// representative; if finer leaves subdivide it, the smallest same-dimension
/// canonical piece contained in it is returned instead. Idempotent.
pub fn canonicalize(c: &CellIndex, tree: &GridTree) -> Result<CellIndex, CwError> {
    let dims = tree.dims();
    if c.lambda.len() != dims || c.lambda.iter().any(|&d| d > 2) {
        return Err(CwError::Invalid(format!("{c}")));
    }
    if tree.node(&c.cube).is_none() {
        return Err(CwError::NotCovered(c.cube.clone()));
    }
    if is_canonical(c, tree) {
        return Ok(representative(c, tree));
    }
    let geom = cell_geom(c, dims);
    let dim = c.dimension();
    let mut pieces = BTreeSet::new();
    decompose_into(tree, &geom, Some(dim), &mut pieces);
    pieces
        .into_iter()
        .next()
        .ok_or_else(|| CwError::NotCovered(c.cube.clone()))
}

/// Collect the canonical cells of `tree` contained in `target`, optionally
/// restricted to one dimension. The collected set partitions `target`
/// (together with its lower-dimensional pieces when unrestricted).
fn decompose_into(
    tree: &GridTree,
    target: &CellGeom,
    only_dim: Option<usize>,
    out: &mut BTreeSet<CellIndex>,
) {
    fn walk(
        node: &GridNode,
        idx: &CubeIndex,
        tree: &GridTree,
        target: &CellGeom,
        only_dim: Option<usize>,
        out: &mut BTreeSet<CellIndex>,
    ) {
        let dims = tree.dims();
        if !cube_closed(idx, dims).meets_cell(target) {
            return;
        }
        match node {
            GridNode::Leaf(_) => {
                for lambda in all_lambdas(dims) {
                    let c = CellIndex::new(idx.clone(), lambda);
                    if let Some(d) = only_dim {
                        if c.dimension() != d {
                            continue;
                        }
                    }
                    let g = cell_geom(&c, dims);
                    if target.contains(&g)
                        && is_canonical(&c, tree)
                        && representative(&c, tree) == c
                    {
                        out.insert(c);
                    }
                }
            }
            GridNode::Branch(children) => {
                for (s, child) in children.iter().enumerate() {
                    walk(child, &idx.child(s as u32), tree, target, only_dim, out);
                }
            }
        }
    }
    walk(tree.root(), &CubeIndex::root(), tree, target, only_dim, out);
}

/// Re-express a set of cells (from a coarser commensurable structure) as the
/// canonical cells of `tree` they contain.
pub fn refine_cells<'a>(
    cells: impl IntoIterator<Item = &'a CellIndex>,
    source_dims: usize,
    tree: &GridTree,
) -> BTreeSet<CellIndex> {
    let mut out = BTreeSet::new();
    for c in cells {
        let geom = cell_geom(c, source_dims);
        decompose_into(tree, &geom, None, &mut out);
    }
    out
}

/// The set `N(c)`: canonical cells of the same dimension whose geometry
/// meets the geometry of `c`. Implemented as the tree traversal: ascend
/// until the cell is interior to the current cube (or the root), then
/// descend only into cubes meeting the cell.
pub fn construct_n(c: &CellIndex, tree: &GridTree) -> BTreeSet<CellIndex> {
    let dims = tree.dims();
    let geom = cell_geom(c, dims);
    let dim = c.dimension();
    let mut anchor = c.cube.clone();
    while !anchor.is_root() && !cube_closed(&anchor, dims).interior_contains_cell(&geom) {
        anchor = anchor.parent().unwrap();
    }
    let mut out = BTreeSet::new();
    let node = tree
        .node(&anchor)
        .unwrap_or_else(|| panic!("cube {anchor} is not a node of the grid"));
    let mut stack = vec![(anchor, node)];
    while let Some((idx, node)) = stack.pop() {
        if !cube_closed(&idx, dims).meets_cell(&geom) {
            continue;
        }
        match node {
            GridNode::Leaf(_) => {
                for lambda in all_lambdas(dims) {
                    let cand = CellIndex::new(idx.clone(), lambda);
                    if cand.dimension() != dim {
                        continue;
                    }
                    let g = cell_geom(&cand, dims);
                    if g.intersects(&geom)
                        && is_canonical(&cand, tree)
                        && representative(&cand, tree) == cand
                    {
                        out.insert(cand);
                    }
                }
            }
            GridNode::Branch(children) => {
                for (s, child) in children.iter().enumerate() {
                    stack.push((idx.child(s as u32), child));
                }
            }
        }
    }
    out
}

/// Incidence number of a cube cell and a candidate face in the same local
/// frame: zero unless `mu` replaces exactly one open digit of `lambda` by an
/// endpoint; otherwise the standard cubical sign.
pub fn incidence(lambda: &[u8], mu: &[u8]) -> i64 {
    if lambda.len() != mu.len() {
        return 0;
    }
    let mut replaced: Option<usize> = None;
    for (i, (&l, &m)) in lambda.iter().zip(mu).enumerate() {
        if l == m {
            continue;
        }
        if l == 2 && (m == 0 || m == 1) && replaced.is_none() {
            replaced = Some(i);
        } else {
            return 0;
        }
    }
    let Some(pos) = replaced else { return 0 };
    let twos_before = lambda[..pos].iter().filter(|&&d| d == 2).count();
    let sign = if twos_before % 2 == 0 { 1 } else { -1 };
    if mu[pos] == 0 {
        -sign
    } else {
        sign
    }
}

/// A formal integer combination of canonical cells.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Chain {
    terms: BTreeMap<CellIndex, i64>,
}

impl Chain {
    pub fn new() -> Self {
        Chain::default()
    }

    pub fn add(&mut self, cell: CellIndex, coeff: i64) {
        use std::collections::btree_map::Entry;
        if coeff == 0 {
            return;
        }
        match self.terms.entry(cell) {
            Entry::Occupied(mut e) => {
                *e.get_mut() += coeff;
                if *e.get() == 0 {
                    e.remove();
                }
            }
            Entry::Vacant(v) => {
                v.insert(coeff);
            }
        }
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn terms(&self) -> impl Iterator<Item = (&CellIndex, i64)> {
        self.terms.iter().map(|(c, &v)| (c, v))
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    /// Cells with odd coefficient: the Z₂ image of the chain.
    pub fn support_mod2(&self) -> Vec<CellIndex> {
        self.terms
            .iter()
            .filter(|(_, &v)| v % 2 != 0)
            .map(|(c, _)| c.clone())
            .collect()
    }
}

/// Boundary of a canonical cell over the integers. With the fixed
/// translation-scaling frames all orientation units are `+1`, so each face
/// is simply replaced by the canonical cells covering it, with the cubical
/// incidence sign.
pub fn boundary(c: &CellIndex, tree: &GridTree) -> Chain {
    let mut chain = Chain::new();
    for pos in 0..c.lambda.len() {
        if c.lambda[pos] != 2 {
            continue;
        }
        for endpoint in [0u8, 1u8] {
            let mut mu = c.lambda.clone();
            mu[pos] = endpoint;
            let coeff = incidence(&c.lambda, &mu);
            let face = CellIndex::new(c.cube.clone(), mu);
            for piece in construct_n(&face, tree) {
                chain.add(piece, coeff);
            }
        }
    }
    chain
}

/// Boundary extended linearly to chains.
pub fn chain_boundary(chain: &Chain, tree: &GridTree) -> Chain {
    let mut out = Chain::new();
    for (cell, coeff) in chain.terms() {
        for (face, face_coeff) in boundary(cell, tree).terms() {
            out.add(face.clone(), coeff * face_coeff);
        }
    }
    out
}

/// A finite set of canonical cells grouped by dimension, together with the
/// grid that generated them.
#[derive(Debug, Clone)]
pub struct CellComplex {
    tree: Arc<GridTree>,
    cells: Vec<BTreeSet<CellIndex>>,
}

impl CellComplex {
    pub fn empty(tree: Arc<GridTree>) -> Self {
        let dims = tree.dims();
        CellComplex {
            tree,
            cells: vec![BTreeSet::new(); dims + 1],
        }
    }

    /// The full CW structure of the grid: every canonical cell.
    pub fn full(tree: Arc<GridTree>) -> Self {
        let mut complex = CellComplex::empty(tree.clone());
        tree.for_each_leaf(|leaf, _| {
            for c in leaf_basis_cells(leaf, &tree) {
                complex.insert(c);
            }
        });
        complex
    }

    pub fn tree(&self) -> &Arc<GridTree> {
        &self.tree
    }

    pub fn dims(&self) -> usize {
        self.tree.dims()
    }

    pub fn insert(&mut self, c: CellIndex) {
        let d = c.dimension();
        self.cells[d].insert(c);
    }

    pub fn remove(&mut self, c: &CellIndex) {
        self.cells[c.dimension()].remove(c);
    }

    pub fn contains(&self, c: &CellIndex) -> bool {
        self.cells[c.dimension()].contains(c)
    }

    pub fn cells_of_dim(&self, d: usize) -> &BTreeSet<CellIndex> {
        &self.cells[d]
    }

    pub fn all_cells(&self) -> impl Iterator<Item = &CellIndex> {
        self.cells.iter().flatten()
    }

    pub fn cell_count(&self) -> usize {
        self.cells.iter().map(|s| s.len()).sum()
    }

    pub fn counts(&self) -> Vec<usize> {
        self.cells.iter().map(|s| s.len()).collect()
    }

    pub fn is_empty(&self) -> bool {
        self.cell_count() == 0
    }

    /// Is every face of every cell present? (Boundary-closedness.)
    pub fn is_closed(&self) -> bool {
        for c in self.all_cells() {
            for (face, _) in boundary(c, &self.tree).terms() {
                if !self.contains(face) {
                    return false;
                }
            }
        }
        true
    }
}

/// The cellular approximation of the sub-level set at `t` on a verified
/// grid: the canonical cells whose closures map at-or-below `t`.
///
/// Membership of a cell in a monotone-certified leaf is decided by sliding
/// the cell along the certified-sign axes to the face where the maximum is
/// attained; that face's one-sided image was certified when the cube
/// verified, so every cell is decidable and the result is exactly the set
/// `{ e : f(cl(e)) <= t }`.
pub fn cellular_approximation(
    f: &FunctionExpr,
    t: f64,
    tree: &Arc<GridTree>,
    cfg: &GridConfig,
) -> CellComplex {
    let dims = tree.dims();
    let mut complex = CellComplex::empty(tree.clone());
    tree.for_each_leaf(|leaf, outcome| {
        let outcome = outcome.expect("cellular approximation requires a verified grid");
        match outcome {
            VerificationOutcome::Above => {}
            VerificationOutcome::Below => {
                for c in leaf_basis_cells(leaf, tree) {
                    complex.insert(c);
                }
            }
            VerificationOutcome::Mixed(axes) => {
                let cube = cube_geometry(leaf, dims);
                let mut side_cache: BTreeMap<Vec<u8>, Side> = BTreeMap::new();
                for c in leaf_basis_cells(leaf, tree) {
                    // slide open digits on certified axes to the max face
                    let mut proj = c.lambda.clone();
                    for &(axis, sign) in axes {
                        if proj[axis] == 2 {
                            proj[axis] = match sign {
                                Sign::Positive => 1,
                                Sign::Negative => 0,
                            };
                        }
                    }
                    let side = *side_cache.entry(proj.clone()).or_insert_with(|| {
                        let mut bx = cube.clone();
                        for a in 0..dims {
                            let iv = *cube.axis(a);
                            match proj[a] {
                                0 => bx.axes_mut()[a] = Interval::point(iv.lo),
                                1 => bx.axes_mut()[a] = Interval::point(iv.hi),
                                _ => {}
                            }
                        }
                        decide_side(f, &bx, t, cfg.eval_subdiv)
                            .expect("verified cube guarantees decidable cell images")
                    });
                    if side == Side::Below {
                        complex.insert(c);
                    }
                }
            }
            VerificationOutcome::NotVerified | VerificationOutcome::UndecidableVertex => {
                panic!("cellular approximation requires a verified grid")
            }
        }
    });
    debug_assert!(complex.is_closed(), "cellular approximation must be closed");
    complex
}
