//! Shared oracle machinery for the integration suites: a dense cubical
//! approximation with union-find homology, GF(2) rank computations for the
//! rank-difference persistence oracle, and a brute-force bottleneck matcher.
//!
//! Everything here is deliberately independent of the code paths it checks:
//! Betti numbers come from component counting plus the Euler formula, ranks
//! from Gaussian elimination, and matchings from exhaustive enumeration.

#![allow(dead_code)]

use veriph::expr::FunctionExpr;
use veriph::persistence::{BoundaryMatrix, PersistenceDiagram};
use veriph::rng::SplitMix64;

// ---------------------------------------------------------------------------
// Union-find
// ---------------------------------------------------------------------------

pub struct UnionFind {
    parent: Vec<usize>,
}

impl UnionFind {
    pub fn new(n: usize) -> Self {
        UnionFind {
            parent: (0..n).collect(),
        }
    }

    pub fn find(&mut self, x: usize) -> usize {
        if self.parent[x] != x {
            let root = self.find(self.parent[x]);
            self.parent[x] = root;
        }
        self.parent[x]
    }

    pub fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            self.parent[ra] = rb;
        }
    }
}

// ---------------------------------------------------------------------------
// Dense cubical approximation on a uniform vertex grid
// ---------------------------------------------------------------------------

/// `f` sampled on the `(n+1) x (n+1)` vertex grid of `[0,1]^2`. Cells enter
/// the sub-level complex when every vertex of their closure is at or below
/// the threshold (equivalently at the maximum of their vertex values), which
/// is the standard lower-star filtration of the sampled function.
pub struct DenseGrid {
    pub n: usize,
    pub values: Vec<f64>, // (n+1)² vertex samples, row-major
}

impl DenseGrid {
    pub fn sample(f: &FunctionExpr, n: usize) -> Self {
        let mut values = Vec::with_capacity((n + 1) * (n + 1));
        for j in 0..=n {
            for i in 0..=n {
                let v = f
                    .eval_point(&[i as f64 / n as f64, j as f64 / n as f64])
                    .unwrap();
                // normalize -0.0: the filtration order sorts with total_cmp,
                // which would otherwise split the two zeros
                values.push(if v == 0.0 { 0.0 } else { v });
            }
        }
        DenseGrid { n, values }
    }

    fn vid(&self, i: usize, j: usize) -> usize {
        j * (self.n + 1) + i
    }

    pub fn value(&self, i: usize, j: usize) -> f64 {
        self.values[self.vid(i, j)]
    }

    /// Betti numbers `(β0, β1)` of the sub-level complex at `t`, computed by
    /// union-find over the 1-skeleton and the Euler formula (no H2 in the
    /// plane, so `β1 = β0 - χ`).
    pub fn betti_sublevel(&self, t: f64) -> (usize, usize) {
        let n = self.n;
        let mut uf = UnionFind::new((n + 1) * (n + 1));
        let mut nv = 0usize;
        let mut ne = 0usize;
        let mut nf = 0usize;
        for j in 0..=n {
            for i in 0..=n {
                if self.value(i, j) <= t {
                    nv += 1;
                }
            }
        }
        for j in 0..=n {
            for i in 0..n {
                if self.value(i, j) <= t && self.value(i + 1, j) <= t {
                    ne += 1;
                    uf.union(self.vid(i, j), self.vid(i + 1, j));
                }
            }
        }
        for j in 0..n {
            for i in 0..=n {
                if self.value(i, j) <= t && self.value(i, j + 1) <= t {
                    ne += 1;
                    uf.union(self.vid(i, j), self.vid(i, j + 1));
                }
            }
        }
        for j in 0..n {
            for i in 0..n {
                let m = self
                    .value(i, j)
                    .max(self.value(i + 1, j))
                    .max(self.value(i, j + 1))
                    .max(self.value(i + 1, j + 1));
                if m <= t {
                    nf += 1;
                }
            }
        }
        let mut roots = std::collections::BTreeSet::new();
        for j in 0..=n {
            for i in 0..=n {
                if self.value(i, j) <= t {
                    let v = self.vid(i, j);
                    let r = uf.find(v);
                    roots.insert(r);
                }
            }
        }
        let b0 = roots.len();
        let chi = nv as i64 - ne as i64 + nf as i64;
        let b1 = (b0 as i64 - chi) as usize;
        (b0, b1)
    }

    /// Lower-star persistence diagram of the sampled function: every cell is
    /// born at the maximum of its vertex values.
    pub fn lower_star_diagram(&self) -> PersistenceDiagram {
        let n = self.n;
        // cell table: (dim, birth, vertex ids of the closure corners)
        struct Cell {
            dim: usize,
            birth: f64,
            key: (usize, usize, usize), // (kind, i, j) for boundary lookup
        }
        let mut cells: Vec<Cell> = Vec::new();
        for j in 0..=n {
            for i in 0..=n {
                cells.push(Cell {
                    dim: 0,
                    birth: self.value(i, j),
                    key: (0, i, j),
                });
            }
        }
        for j in 0..=n {
            for i in 0..n {
                cells.push(Cell {
                    dim: 1,
                    birth: self.value(i, j).max(self.value(i + 1, j)),
                    key: (1, i, j), // horizontal edge
                });
            }
        }
        for j in 0..n {
            for i in 0..=n {
                cells.push(Cell {
                    dim: 1,
                    birth: self.value(i, j).max(self.value(i, j + 1)),
                    key: (2, i, j), // vertical edge
                });
            }
        }
        for j in 0..n {
            for i in 0..n {
                let birth = self
                    .value(i, j)
                    .max(self.value(i + 1, j))
                    .max(self.value(i, j + 1))
                    .max(self.value(i + 1, j + 1));
                cells.push(Cell {
                    dim: 2,
                    birth,
                    key: (3, i, j),
                });
            }
        }
        let mut order: Vec<usize> = (0..cells.len()).collect();
        order.sort_by(|&a, &b| {
            cells[a]
                .birth
                .total_cmp(&cells[b].birth)
                .then(cells[a].dim.cmp(&cells[b].dim))
                .then(cells[a].key.cmp(&cells[b].key))
        });
        let mut position = vec![0usize; cells.len()];
        for (pos, &c) in order.iter().enumerate() {
            position[c] = pos;
        }
        let vid = |i: usize, j: usize| j * (n + 1) + i;
        let h_edge = |i: usize, j: usize| (n + 1) * (n + 1) + j * n + i;
        let v_edge = |i: usize, j: usize| (n + 1) * (n + 1) + (n + 1) * n + j * (n + 1) + i;
        let matrix_cells: Vec<(usize, f64, Vec<usize>)> = order
            .iter()
            .map(|&c| {
                let cell = &cells[c];
                let rows: Vec<usize> = match cell.key {
                    (0, ..) => Vec::new(),
                    (1, i, j) => vec![position[vid(i, j)], position[vid(i + 1, j)]],
                    (2, i, j) => vec![position[vid(i, j)], position[vid(i, j + 1)]],
                    (3, i, j) => vec![
                        position[h_edge(i, j)],
                        position[h_edge(i, j + 1)],
                        position[v_edge(i, j)],
                        position[v_edge(i + 1, j)],
                    ],
                    _ => unreachable!(),
                };
                (cell.dim, cell.birth, rows)
            })
            .collect();
        veriph::persistence::reduce(&BoundaryMatrix::new(matrix_cells))
    }
}

// ---------------------------------------------------------------------------
// GF(2) linear algebra for the rank-difference oracle
// ---------------------------------------------------------------------------

/// Dense GF(2) row vectors as u64 blocks.
#[derive(Clone, PartialEq)]
pub struct Gf2Vec {
    blocks: Vec<u64>,
}

impl Gf2Vec {
    pub fn zero(width: usize) -> Self {
        Gf2Vec {
            blocks: vec![0; width.div_ceil(64)],
        }
    }

    pub fn set(&mut self, i: usize) {
        self.blocks[i / 64] ^= 1 << (i % 64);
    }

    pub fn get(&self, i: usize) -> bool {
        (self.blocks[i / 64] >> (i % 64)) & 1 == 1
    }

    pub fn xor_in(&mut self, other: &Gf2Vec) {
        for (a, b) in self.blocks.iter_mut().zip(&other.blocks) {
            *a ^= b;
        }
    }

    pub fn is_zero(&self) -> bool {
        self.blocks.iter().all(|&b| b == 0)
    }

    fn leading(&self) -> Option<usize> {
        for (k, &b) in self.blocks.iter().enumerate() {
            if b != 0 {
                return Some(k * 64 + b.trailing_zeros() as usize);
            }
        }
        None
    }
}

/// Rank of a set of GF(2) vectors by Gaussian elimination.
pub fn gf2_rank(vectors: &[Gf2Vec]) -> usize {
    let mut basis: Vec<Gf2Vec> = Vec::new();
    for v in vectors {
        let mut v = v.clone();
        loop {
            let Some(lead) = v.leading() else { break };
            match basis.iter().find(|b| b.leading() == Some(lead)) {
                Some(b) => {
                    let b = b.clone();
                    v.xor_in(&b);
                }
                None => {
                    basis.push(v);
                    break;
                }
            }
        }
    }
    basis.len()
}

/// Basis of the kernel of a GF(2) matrix given by columns, expressed as
/// combinations over the column index space.
pub fn gf2_kernel(columns: &[Gf2Vec]) -> Vec<Gf2Vec> {
    let m = columns.len();
    let mut work: Vec<(Gf2Vec, Gf2Vec)> = columns
        .iter()
        .enumerate()
        .map(|(j, c)| {
            let mut tag = Gf2Vec::zero(m);
            tag.set(j);
            (c.clone(), tag)
        })
        .collect();
    let mut kernel = Vec::new();
    let mut basis: Vec<(usize, usize)> = Vec::new(); // (leading row, work index)
    for j in 0..m {
        loop {
            let lead = work[j].0.leading();
            let Some(lead) = lead else {
                kernel.push(work[j].1.clone());
                break;
            };
            if let Some(&(_, k)) = basis.iter().find(|&&(l, _)| l == lead) {
                let (col, tag) = (work[k].0.clone(), work[k].1.clone());
                work[j].0.xor_in(&col);
                work[j].1.xor_in(&tag);
            } else {
                basis.push((lead, j));
                break;
            }
        }
    }
    kernel
}

// ---------------------------------------------------------------------------
// Brute-force bottleneck distance
// ---------------------------------------------------------------------------

fn linf(p: (f64, f64), q: (f64, f64)) -> f64 {
    let db = (p.0 - q.0).abs();
    let dd = if p.1.is_infinite() && q.1.is_infinite() {
        0.0
    } else {
        (p.1 - q.1).abs()
    };
    db.max(dd)
}

fn diag_cost(p: (f64, f64)) -> f64 {
    if p.1.is_infinite() {
        f64::INFINITY
    } else {
        (p.1 - p.0) / 2.0
    }
}

/// Exhaustive min-max matching of one dimension's points (diagonal allowed,
/// infinite-death points must pair with each other).
fn brute_force_dim(a: &[(f64, f64)], b: &[(f64, f64)]) -> f64 {
    fn recurse(i: usize, a: &[(f64, f64)], b: &[(f64, f64)], used: &mut [bool]) -> f64 {
        if i == a.len() {
            // unmatched b-points go to the diagonal
            let mut worst = 0.0f64;
            for (j, q) in b.iter().enumerate() {
                if !used[j] {
                    worst = worst.max(diag_cost(*q));
                }
            }
            return worst;
        }
        let p = a[i];
        // option: diagonal
        let mut best = diag_cost(p).max(recurse(i + 1, a, b, used));
        // option: each free b-point
        for j in 0..b.len() {
            if used[j] {
                continue;
            }
            // infinite must pair with infinite
            if p.1.is_infinite() != b[j].1.is_infinite() {
                continue;
            }
            used[j] = true;
            let cost = linf(p, b[j]).max(recurse(i + 1, a, b, used));
            used[j] = false;
            best = best.min(cost);
        }
        best
    }
    let mut used = vec![false; b.len()];
    recurse(0, a, b, &mut used)
}

/// Brute-force bottleneck distance over all dimensions.
pub fn brute_force_bottleneck(a: &PersistenceDiagram, b: &PersistenceDiagram) -> f64 {
    let dims = a.dim_count().max(b.dim_count());
    let mut worst = 0.0f64;
    for d in 0..dims {
        let pa = a.points_in_dim(d);
        let pb = b.points_in_dim(d);
        let inf_a = pa.iter().filter(|p| p.1.is_infinite()).count();
        let inf_b = pb.iter().filter(|p| p.1.is_infinite()).count();
        if inf_a != inf_b {
            return f64::INFINITY;
        }
        worst = worst.max(brute_force_dim(pa, pb));
    }
    worst
}

/// Random small diagram for metric tests.
pub fn random_diagram(rng: &mut SplitMix64, max_points: usize, allow_infinite: bool) -> PersistenceDiagram {
    let mut d = PersistenceDiagram::new(2);
    let count = (rng.next_u64() % (max_points as u64 + 1)) as usize;
    for _ in 0..count {
        let dim = (rng.next_u64() % 2) as usize;
        let birth = rng.next_f64() * 2.0 - 1.0;
        let death = if allow_infinite && rng.next_f64() < 0.2 {
            f64::INFINITY
        } else {
            birth + 0.01 + rng.next_f64()
        };
        d.push(dim, birth, death);
    }
    PersistenceDiagram::from_points(
        (0..d.dim_count())
            .map(|k| d.points_in_dim(k).to_vec())
            .collect(),
    )
}

/// Random expression over the supported node set, for soundness sweeps.
pub fn random_expr(rng: &mut SplitMix64, dims: usize, depth: usize) -> FunctionExpr {
    if depth == 0 {
        return match rng.next_u64() % 3 {
            0 => FunctionExpr::constant(rng.next_f64() * 4.0 - 2.0),
            _ => FunctionExpr::coord((rng.next_u64() % dims as u64) as usize),
        };
    }
    match rng.next_u64() % 6 {
        0 => random_expr(rng, dims, depth - 1).neg(),
        1 | 2 => random_expr(rng, dims, depth - 1).add(&random_expr(rng, dims, depth - 1)),
        3 => random_expr(rng, dims, depth - 1).mul(&random_expr(rng, dims, depth - 1)),
        4 => random_expr(rng, dims, depth - 1).sin(),
        _ => random_expr(rng, dims, depth - 1).cos(),
    }
}
