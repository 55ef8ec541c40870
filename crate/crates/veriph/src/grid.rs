//! Adaptive dyadic grids on `[0,1]^N`.
//!
//! A grid is a 2^N-ary tree: internal nodes are cubes that were refined,
//! leaves are the grid elements. Each leaf carries the outcome of the
//! interval verification test that let it stop subdividing: its image is
//! entirely above the threshold, entirely at-or-below it, or the function is
//! certified monotone along some axes and the faces orthogonal to those axes
//! have one-sided images. Grid construction either terminates with every leaf
//! verified or reports which cube made it give up and why.

use std::collections::BTreeMap;
use std::fmt;

use crate::dyadic::{ClosedBox, Dyadic};
use crate::expr::{FunctionExpr, MAX_EVAL_SUBDIV};
use crate::interval::{Interval, IntervalBox};

/// Maximum subdivision depth mirroring the reference experiments.
pub const DEFAULT_MAX_DEPTH: usize = 25;
/// Default per-evaluation bisection count.
pub const DEFAULT_EVAL_SUBDIV: usize = 7;
/// Depths beyond this would overflow the exact dyadic arithmetic.
pub const MAX_DEPTH_LIMIT: usize = 40;

/// The dyadic address of a cube: a sequence of digits in `[0, 2^N)`, one per
/// subdivision. The empty sequence is the whole cube. Digit `s` selects the
/// child whose `i`-th coordinate half is the `i`-th bit of `s`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct CubeIndex {
    digits: Vec<u32>,
}

impl CubeIndex {
    pub fn root() -> Self {
        CubeIndex { digits: Vec::new() }
    }

    pub fn from_digits(digits: Vec<u32>) -> Self {
        CubeIndex { digits }
    }

    pub fn digits(&self) -> &[u32] {
        &self.digits
    }

    pub fn depth(&self) -> usize {
        self.digits.len()
    }

    pub fn is_root(&self) -> bool {
        self.digits.is_empty()
    }

    pub fn child(&self, s: u32) -> CubeIndex {
        let mut digits = self.digits.clone();
        digits.push(s);
        CubeIndex { digits }
    }

    pub fn parent(&self) -> Option<CubeIndex> {
        if self.is_root() {
            return None;
        }
        Some(CubeIndex {
            digits: self.digits[..self.digits.len() - 1].to_vec(),
        })
    }

    /// The 2^N half-edge-length sub-cubes tiling this cube.
    pub fn offspring(&self, dims: usize) -> Vec<CubeIndex> {
        (0..(1u32 << dims)).map(|s| self.child(s)).collect()
    }

    pub fn is_prefix_of(&self, other: &CubeIndex) -> bool {
        other.digits.len() >= self.digits.len()
            && other.digits[..self.digits.len()] == self.digits[..]
    }

    /// Integer lower corner of the cube on `axis`, at scale `2^-depth`.
    pub fn axis_base(&self, axis: usize) -> i64 {
        let n = self.depth();
        let mut m: i64 = 0;
        for (j, &digit) in self.digits.iter().enumerate() {
            let bit = ((digit >> axis) & 1) as i64;
            m += bit << (n - 1 - j);
        }
        m
    }
}

impl PartialOrd for CubeIndex {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

/// Shallower cubes sort first; ties break by digit sequence. This is the
/// fixed rule used to pick canonical cell representatives.
impl Ord for CubeIndex {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.depth()
            .cmp(&other.depth())
            .then_with(|| self.digits.cmp(&other.digits))
    }
}

impl fmt::Display for CubeIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for (i, d) in self.digits.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{d}")?;
        }
        write!(f, ")")
    }
}

/// Exact geometry of a dyadic cube as closed f64 intervals. Dyadic bounds at
/// the supported depths are exactly representable, so no rounding occurs.
pub fn cube_geometry(idx: &CubeIndex, dims: usize) -> IntervalBox {
    let n = idx.depth() as u32;
    let scale = (1u64 << n) as f64;
    let axes = (0..dims)
        .map(|i| {
            let m = idx.axis_base(i) as f64;
            Interval::new(m / scale, (m + 1.0) / scale)
        })
        .collect();
    IntervalBox::new(axes)
}

/// Same geometry in exact dyadic arithmetic.
pub fn cube_closed(idx: &CubeIndex, dims: usize) -> ClosedBox {
    let n = idx.depth() as u32;
    ClosedBox {
        axes: (0..dims)
            .map(|i| {
                let m = idx.axis_base(i);
                (Dyadic::new(m, n), Dyadic::new(m + 1, n))
            })
            .collect(),
    }
}

/// Certified sign of a derivative over a cube.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sign {
    Positive,
    Negative,
}

/// What the verification test certified about one cube.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum VerificationOutcome {
    /// `f > t` on the closed cube.
    Above,
    /// `f <= t` on the closed cube.
    Below,
    /// `∂f/∂x_i` has certified sign for each listed axis, and every face
    /// orthogonal to the listed axes has a one-sided image.
    Mixed(Vec<(usize, Sign)>),
    /// No certificate at the attempted resolution; the cube must be refined.
    NotVerified,
    /// Some vertex image straddles the threshold. Refinement can never fix
    /// this, so grid construction aborts.
    UndecidableVertex,
}

impl VerificationOutcome {
    pub fn is_verified(&self) -> bool {
        matches!(
            self,
            VerificationOutcome::Above | VerificationOutcome::Below | VerificationOutcome::Mixed(_)
        )
    }
}

/// Knobs for grid construction.
#[derive(Debug, Clone)]
pub struct GridConfig {
    pub max_depth: usize,
    /// Bisections per axis applied inside every interval evaluation.
    pub eval_subdiv: usize,
}

impl Default for GridConfig {
    fn default() -> Self {
        GridConfig {
            max_depth: DEFAULT_MAX_DEPTH,
            eval_subdiv: DEFAULT_EVAL_SUBDIV,
        }
    }
}

impl GridConfig {
    pub fn validate(&self) -> Result<(), String> {
        if self.max_depth > MAX_DEPTH_LIMIT {
            return Err(format!(
                "max depth {} exceeds the supported limit {MAX_DEPTH_LIMIT}",
                self.max_depth
            ));
        }
        if self.eval_subdiv > MAX_EVAL_SUBDIV {
            return Err(format!(
                "evaluation refinement {} exceeds the supported limit {MAX_EVAL_SUBDIV}",
                self.eval_subdiv
            ));
        }
        Ok(())
    }
}

/// Why grid construction stopped without a verified grid.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GridFailure {
    pub kind: FailureKind,
    pub cube: CubeIndex,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FailureKind {
    /// A cube at the maximum depth still failed verification.
    MaxDepth,
    /// A vertex value straddles the threshold irreducibly.
    UndecidableVertex,
}

impl fmt::Display for GridFailure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.kind {
            FailureKind::MaxDepth => write!(f, "maximum depth reached at cube {}", self.cube),
            FailureKind::UndecidableVertex => {
                write!(f, "undecidable vertex image at cube {}", self.cube)
            }
        }
    }
}

/// A node of the grid tree.
#[derive(Debug, Clone, PartialEq)]
pub enum GridNode {
    /// A grid element. Verified grids carry the outcome; synthetic or merged
    /// trees carry `None`.
    Leaf(Option<VerificationOutcome>),
    /// A refined cube with its 2^N offspring in digit order.
    Branch(Vec<GridNode>),
}

/// A dyadic grid: the leaves tile `[0,1]^N` with disjoint interiors.
#[derive(Debug, Clone, PartialEq)]
pub struct GridTree {
    dims: usize,
    root: GridNode,
}

impl GridTree {
    pub fn dims(&self) -> usize {
        self.dims
    }

    pub fn root(&self) -> &GridNode {
        &self.root
    }

    /// Node at a cube address, if that cube is a node of this tree.
    pub fn node(&self, idx: &CubeIndex) -> Option<&GridNode> {
        let mut cur = &self.root;
        for &d in idx.digits() {
            match cur {
                GridNode::Leaf(_) => return None,
                GridNode::Branch(children) => cur = children.get(d as usize)?,
            }
        }
        Some(cur)
    }

    pub fn is_leaf(&self, idx: &CubeIndex) -> bool {
        matches!(self.node(idx), Some(GridNode::Leaf(_)))
    }

    pub fn for_each_leaf(&self, mut f: impl FnMut(&CubeIndex, Option<&VerificationOutcome>)) {
        fn walk(
            node: &GridNode,
            idx: &CubeIndex,
            f: &mut impl FnMut(&CubeIndex, Option<&VerificationOutcome>),
        ) {
            match node {
                GridNode::Leaf(outcome) => f(idx, outcome.as_ref()),
                GridNode::Branch(children) => {
                    for (s, child) in children.iter().enumerate() {
                        walk(child, &idx.child(s as u32), f);
                    }
                }
            }
        }
        walk(&self.root, &CubeIndex::root(), &mut f);
    }

    pub fn leaves(&self) -> Vec<(CubeIndex, Option<VerificationOutcome>)> {
        let mut out = Vec::new();
        self.for_each_leaf(|idx, o| out.push((idx.clone(), o.cloned())));
        out
    }

    pub fn leaf_count(&self) -> usize {
        let mut n = 0;
        self.for_each_leaf(|_, _| n += 1);
        n
    }

    pub fn max_depth(&self) -> usize {
        let mut d = 0;
        self.for_each_leaf(|idx, _| d = d.max(idx.depth()));
        d
    }

    /// Single-leaf grid (the whole cube).
    pub fn trivial(dims: usize) -> GridTree {
        GridTree {
            dims,
            root: GridNode::Leaf(None),
        }
    }

    /// Uniform grid with every leaf at `depth`.
    pub fn uniform(dims: usize, depth: usize) -> GridTree {
        fn build(dims: usize, depth: usize) -> GridNode {
            if depth == 0 {
                GridNode::Leaf(None)
            } else {
                GridNode::Branch((0..(1usize << dims)).map(|_| build(dims, depth - 1)).collect())
            }
        }
        GridTree {
            dims,
            root: build(dims, depth),
        }
    }

    /// Grid shaped by a splitting predicate, for synthetic test grids.
    pub fn from_split_fn(
        dims: usize,
        max_depth: usize,
        mut split: impl FnMut(&CubeIndex) -> bool,
    ) -> GridTree {
        fn build(
            dims: usize,
            max_depth: usize,
            idx: &CubeIndex,
            split: &mut impl FnMut(&CubeIndex) -> bool,
        ) -> GridNode {
            if idx.depth() < max_depth && split(idx) {
                GridNode::Branch(
                    (0..(1u32 << dims))
                        .map(|s| build(dims, max_depth, &idx.child(s), split))
                        .collect(),
                )
            } else {
                GridNode::Leaf(None)
            }
        }
        let root = build(dims, max_depth, &CubeIndex::root(), &mut split);
        GridTree { dims, root }
    }

    /// Attach verification outcomes to leaves by cube address. Leaves not in
    /// the map keep `None`. Intended for tests that assemble grids directly.
    pub fn with_outcomes(self, outcomes: &BTreeMap<CubeIndex, VerificationOutcome>) -> GridTree {
        fn set(node: GridNode, idx: &CubeIndex, outcomes: &BTreeMap<CubeIndex, VerificationOutcome>) -> GridNode {
            match node {
                GridNode::Leaf(_) => GridNode::Leaf(outcomes.get(idx).cloned()),
                GridNode::Branch(children) => GridNode::Branch(
                    children
                        .into_iter()
                        .enumerate()
                        .map(|(s, c)| set(c, &idx.child(s as u32), outcomes))
                        .collect(),
                ),
            }
        }
        GridTree {
            dims: self.dims,
            root: set(self.root, &CubeIndex::root(), outcomes),
        }
    }

    /// Structural union: a cube is refined in the result iff it is refined
    /// in either operand. Verification outcomes do not survive (they are
    /// threshold-specific).
    pub fn merge(&self, other: &GridTree) -> GridTree {
        assert_eq!(self.dims, other.dims, "cannot merge grids of different dimension");
        fn merge_nodes(a: &GridNode, b: &GridNode) -> GridNode {
            match (a, b) {
                (GridNode::Leaf(_), GridNode::Leaf(_)) => GridNode::Leaf(None),
                (GridNode::Leaf(_), GridNode::Branch(ch)) | (GridNode::Branch(ch), GridNode::Leaf(_)) => {
                    GridNode::Branch(ch.iter().map(|c| merge_nodes(c, &GridNode::Leaf(None))).collect())
                }
                (GridNode::Branch(ca), GridNode::Branch(cb)) => GridNode::Branch(
                    ca.iter().zip(cb.iter()).map(|(x, y)| merge_nodes(x, y)).collect(),
                ),
            }
        }
        GridTree {
            dims: self.dims,
            root: merge_nodes(&self.root, &other.root),
        }
    }
}

/// One-sided position of a function's image relative to a threshold.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Side {
    /// `f > t` strictly on the box.
    Above,
    /// `f <= t` on the box.
    Below,
}

/// Decide how the image of `f` over `bx`, refined by `k` bisections per axis,
/// sits relative to `t`. Equivalent to comparing `refined_eval(f, bx, k)`
/// against `t`, but prunes: a sub-box whose plain evaluation already decides
/// never gets subdivided (interval evaluation is inclusion-isotone, so the
/// refined hull can only be tighter).
pub(crate) fn decide_side(f: &FunctionExpr, bx: &IntervalBox, t: f64, k: usize) -> Option<Side> {
    let e = f.eval(bx).expect("dimension checked by caller");
    if e.lo > t {
        return Some(Side::Above);
    }
    if e.hi <= t {
        return Some(Side::Below);
    }
    if k == 0 || bx.split_axes().is_empty() {
        return None;
    }
    let mut agreed: Option<Side> = None;
    for part in bx.bisect_all() {
        match decide_side(f, &part, t, k - 1) {
            None => return None,
            Some(s) => match agreed {
                None => agreed = Some(s),
                Some(prev) if prev == s => {}
                Some(_) => return None,
            },
        }
    }
    agreed
}

/// Certified sign of `f` over `bx` at refinement `k`, i.e. whether zero is
/// excluded from the refined enclosure.
pub(crate) fn decide_sign(f: &FunctionExpr, bx: &IntervalBox, k: usize) -> Option<Sign> {
    let e = f.eval(bx).expect("dimension checked by caller");
    if e.lo > 0.0 {
        return Some(Sign::Positive);
    }
    if e.hi < 0.0 {
        return Some(Sign::Negative);
    }
    if k == 0 || bx.split_axes().is_empty() {
        return None;
    }
    let mut agreed: Option<Sign> = None;
    for part in bx.bisect_all() {
        match decide_sign(f, &part, k - 1) {
            None => return None,
            Some(s) => match agreed {
                None => agreed = Some(s),
                Some(prev) if prev == s => {}
                Some(_) => return None,
            },
        }
    }
    agreed
}

fn decide_sign_k(f: &FunctionExpr, bx: &IntervalBox, k: usize) -> Option<Sign> {
    decide_sign(f, bx, k)
}

/// Closed sub-box of `cube` with the axes in `fixed` pinned to an endpoint
/// (`false` = lower, `true` = upper) and the remaining axes left full.
fn face_box(cube: &IntervalBox, fixed: &[(usize, bool)]) -> IntervalBox {
    let mut bx = cube.clone();
    for &(axis, upper) in fixed {
        let iv = *cube.axis(axis);
        let v = if upper { iv.hi } else { iv.lo };
        bx.axes_mut()[axis] = Interval::point(v);
    }
    bx
}

/// Do all `2^|axes|` closed cells of `cube` orthogonal to `axes` have
/// one-sided images at refinement `k`?
fn orthogonal_cells_one_sided(
    f: &FunctionExpr,
    cube: &IntervalBox,
    axes: &[usize],
    t: f64,
    k: usize,
) -> bool {
    let m = axes.len();
    for mask in 0..(1u32 << m) {
        let fixed: Vec<(usize, bool)> = axes
            .iter()
            .enumerate()
            .map(|(j, &a)| (a, (mask >> j) & 1 == 1))
            .collect();
        let bx = face_box(cube, &fixed);
        if decide_side(f, &bx, t, k).is_none() {
            return false;
        }
    }
    true
}

/// Does the cube verify using exactly the axis set `axes`? `verify_cube`
/// always uses the maximal certified-sign set, which subset choices can
/// never beat; this explicit variant exists so tests can prove that.
#[cfg_attr(not(test), allow(dead_code))]
pub(crate) fn verified_with_axes(
    f: &FunctionExpr,
    partials: &[FunctionExpr],
    t: f64,
    idx: &CubeIndex,
    dims: usize,
    axes: &[usize],
    cfg: &GridConfig,
) -> bool {
    let bx = cube_geometry(idx, dims);
    if axes.is_empty() {
        return decide_side(f, &bx, t, cfg.eval_subdiv).is_some();
    }
    for &a in axes {
        if decide_sign_k(&partials[a], &bx, cfg.eval_subdiv).is_none() {
            return false;
        }
    }
    orthogonal_cells_one_sided(f, &bx, axes, t, cfg.eval_subdiv)
}

/// Run the verification test on one cube.
///
/// `partials` must hold the symbolic partial of `f` for every axis, in axis
/// order; computing them once per threshold and reusing them here is the
/// expected calling pattern.
pub fn verify_cube(
    f: &FunctionExpr,
    partials: &[FunctionExpr],
    t: f64,
    idx: &CubeIndex,
    dims: usize,
    cfg: &GridConfig,
) -> VerificationOutcome {
    debug_assert_eq!(partials.len(), dims);
    let bx = cube_geometry(idx, dims);
    match decide_side(f, &bx, t, cfg.eval_subdiv) {
        Some(Side::Above) => return VerificationOutcome::Above,
        Some(Side::Below) => return VerificationOutcome::Below,
        None => {}
    }
    let mut signed: Vec<(usize, Sign)> = Vec::new();
    for (axis, df) in partials.iter().enumerate() {
        if let Some(sign) = decide_sign_k(df, &bx, cfg.eval_subdiv) {
            signed.push((axis, sign));
        }
    }
    if !signed.is_empty() {
        let axes: Vec<usize> = signed.iter().map(|&(a, _)| a).collect();
        if orthogonal_cells_one_sided(f, &bx, &axes, t, cfg.eval_subdiv) {
            return VerificationOutcome::Mixed(signed);
        }
    }
    // A vertex whose image straddles t can never be fixed by refinement:
    // every descendant containing it inherits the straddle.
    for mask in 0..(1u32 << dims) {
        let fixed: Vec<(usize, bool)> = (0..dims).map(|a| (a, (mask >> a) & 1 == 1)).collect();
        let vertex = face_box(&bx, &fixed);
        if decide_side(f, &vertex, t, 0).is_none() {
            return VerificationOutcome::UndecidableVertex;
        }
    }
    VerificationOutcome::NotVerified
}

/// Build a verified grid for threshold `t`, refining depth-first until every
/// leaf verifies or a failure condition is hit.
pub fn construct_verified_grid(
    f: &FunctionExpr,
    t: f64,
    dims: usize,
    cfg: &GridConfig,
) -> Result<GridTree, GridFailure> {
    construct_verified_grid_with(f, &partials_of(f, dims), t, dims, cfg)
}

/// As [`construct_verified_grid`] but with caller-cached partials.
pub fn construct_verified_grid_with(
    f: &FunctionExpr,
    partials: &[FunctionExpr],
    t: f64,
    dims: usize,
    cfg: &GridConfig,
) -> Result<GridTree, GridFailure> {
    fn build(
        f: &FunctionExpr,
        partials: &[FunctionExpr],
        t: f64,
        dims: usize,
        cfg: &GridConfig,
        idx: &CubeIndex,
    ) -> Result<GridNode, GridFailure> {
        match verify_cube(f, partials, t, idx, dims, cfg) {
            VerificationOutcome::UndecidableVertex => Err(GridFailure {
                kind: FailureKind::UndecidableVertex,
                cube: idx.clone(),
            }),
            VerificationOutcome::NotVerified => {
                if idx.depth() >= cfg.max_depth {
                    return Err(GridFailure {
                        kind: FailureKind::MaxDepth,
                        cube: idx.clone(),
                    });
                }
                let mut children = Vec::with_capacity(1 << dims);
                for s in 0..(1u32 << dims) {
                    children.push(build(f, partials, t, dims, cfg, &idx.child(s))?);
                }
                Ok(GridNode::Branch(children))
            }
            outcome => Ok(GridNode::Leaf(Some(outcome))),
        }
    }
    assert!(
        f.dims() <= dims,
        "function reads coordinate {} but the domain has {dims} axes",
        f.dims().saturating_sub(1)
    );
    if let Err(msg) = cfg.validate() {
        panic!("invalid grid configuration: {msg}");
    }
    let root = build(f, partials, t, dims, cfg, &CubeIndex::root())?;
    Ok(GridTree { dims, root })
}

/// Symbolic partials of `f` for all axes of the domain.
pub fn partials_of(f: &FunctionExpr, dims: usize) -> Vec<FunctionExpr> {
    (0..dims).map(|a| f.partial(a)).collect()
}
