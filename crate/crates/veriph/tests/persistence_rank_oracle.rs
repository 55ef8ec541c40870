//! The column-reduction diagram must equal the diagram computed from rank
//! differences of the inclusion-induced maps, evaluated by GF(2) Gaussian
//! elimination over all index pairs. Filtered complexes are generated as
//! lower-star filtrations of random vertex values on random dyadic grids.

mod common;

use std::collections::BTreeMap;
use std::sync::Arc;

use common::{gf2_kernel, gf2_rank, Gf2Vec};
use veriph::cw::{boundary, cell_geom, CellComplex, CellIndex};
use veriph::grid::GridTree;
use veriph::persistence::{reduce, BoundaryMatrix, PersistenceDiagram};
use veriph::rng::SplitMix64;

/// Lower-star births: each cell is born at the max value over the canonical
/// vertices inside its closure. Vertex containment is exact dyadic geometry.
fn lower_star_births(
    complex: &CellComplex,
    vertex_values: &BTreeMap<CellIndex, f64>,
    dims: usize,
) -> BTreeMap<CellIndex, f64> {
    let mut births = BTreeMap::new();
    for cell in complex.all_cells() {
        let geom = cell_geom(cell, dims);
        let mut birth = f64::NEG_INFINITY;
        for (v, &val) in vertex_values {
            let vg = cell_geom(v, dims);
            let inside = vg.axes.iter().zip(&geom.axes).all(|(p, a)| {
                let p = p.lo();
                a.lo() <= p && p <= a.hi()
            });
            if inside {
                birth = birth.max(val);
            }
        }
        assert!(birth.is_finite());
        births.insert(cell.clone(), birth);
    }
    births
}

struct RankOracle {
    /// per dimension: global cells of that dimension in fixed order
    cells: Vec<Vec<CellIndex>>,
    /// boundary vector of each cell over the (dim-1)-cell index space
    bnd: Vec<Vec<Gf2Vec>>,
    /// birth level index of each cell, aligned with `cells`
    level: Vec<Vec<usize>>,
    levels: Vec<f64>,
}

impl RankOracle {
    fn new(complex: &CellComplex, births: &BTreeMap<CellIndex, f64>, dims: usize) -> Self {
        let mut levels: Vec<f64> = births.values().copied().collect();
        levels.sort_by(f64::total_cmp);
        levels.dedup();
        let mut cells: Vec<Vec<CellIndex>> = vec![Vec::new(); dims + 1];
        for c in complex.all_cells() {
            cells[c.dimension()].push(c.clone());
        }
        let index: Vec<BTreeMap<&CellIndex, usize>> = cells
            .iter()
            .map(|v| v.iter().enumerate().map(|(i, c)| (c, i)).collect())
            .collect();
        let tree = complex.tree();
        let mut bnd: Vec<Vec<Gf2Vec>> = Vec::new();
        let mut level: Vec<Vec<usize>> = Vec::new();
        for d in 0..=dims {
            let width = if d == 0 { 1 } else { cells[d - 1].len().max(1) };
            let mut vecs = Vec::new();
            let mut lvl = Vec::new();
            for c in &cells[d] {
                let mut v = Gf2Vec::zero(width);
                if d > 0 {
                    for face in boundary(c, tree).support_mod2() {
                        v.set(index[d - 1][&face]);
                    }
                }
                vecs.push(v);
                let b = births[c];
                lvl.push(levels.iter().position(|&x| x == b).unwrap());
            }
            bnd.push(vecs);
            level.push(lvl);
        }
        RankOracle {
            cells,
            bnd,
            level,
            levels,
        }
    }

    /// rank of H_n(X_i) -> H_n(X_j) induced by inclusion, i <= j.
    fn rank(&self, n: usize, i: isize, j: isize) -> usize {
        if i < 0 {
            return 0;
        }
        let (i, j) = (i as usize, j as usize);
        let n_cells = self.cells[n].len();
        if n_cells == 0 {
            return 0;
        }
        // cycles of X_i in dimension n
        let cols: Vec<Gf2Vec> = (0..n_cells)
            .filter(|&c| self.level[n][c] <= i)
            .map(|c| self.bnd[n][c].clone())
            .collect();
        let members: Vec<usize> = (0..n_cells).filter(|&c| self.level[n][c] <= i).collect();
        let kernel_local = gf2_kernel(&cols);
        let cycles: Vec<Gf2Vec> = kernel_local
            .iter()
            .map(|tag| {
                let mut v = Gf2Vec::zero(n_cells);
                for (slot, &cell) in members.iter().enumerate() {
                    if tag.get(slot) {
                        v.set(cell);
                    }
                }
                v
            })
            .collect();
        // boundaries of X_j in dimension n
        let boundaries: Vec<Gf2Vec> = if n + 1 <= self.cells.len() - 1 {
            (0..self.cells[n + 1].len())
                .filter(|&c| self.level[n + 1][c] <= j)
                .map(|c| self.bnd[n + 1][c].clone())
                .collect()
        } else {
            Vec::new()
        };
        let dim_b = gf2_rank(&boundaries);
        let mut stacked = cycles.clone();
        stacked.extend(boundaries);
        gf2_rank(&stacked) - dim_b
    }

    fn diagram(&self, dims: usize) -> PersistenceDiagram {
        let k = self.levels.len() as isize - 1;
        let mut d = PersistenceDiagram::new(dims + 1);
        for n in 0..=dims {
            for i in 0..=k {
                for j in (i + 1)..=k {
                    let mult = self.rank(n, i, j - 1) as isize - self.rank(n, i, j) as isize
                        - self.rank(n, i - 1, j - 1) as isize
                        + self.rank(n, i - 1, j) as isize;
                    assert!(mult >= 0);
                    for _ in 0..mult {
                        d.push(n, self.levels[i as usize], self.levels[j as usize]);
                    }
                }
                let inf = self.rank(n, i, k) as isize - self.rank(n, i - 1, k) as isize;
                assert!(inf >= 0);
                for _ in 0..inf {
                    d.push(n, self.levels[i as usize], f64::INFINITY);
                }
            }
        }
        PersistenceDiagram::from_points(
            (0..d.dim_count())
                .map(|n| d.points_in_dim(n).to_vec())
                .collect(),
        )
    }
}

fn filtered_matrix(
    complex: &CellComplex,
    births: &BTreeMap<CellIndex, f64>,
) -> BoundaryMatrix {
    let mut order: Vec<&CellIndex> = complex.all_cells().collect();
    order.sort_by(|a, b| {
        births[*a]
            .total_cmp(&births[*b])
            .then(a.dimension().cmp(&b.dimension()))
            .then(a.cmp(b))
    });
    let pos: BTreeMap<&CellIndex, usize> = order.iter().enumerate().map(|(i, c)| (*c, i)).collect();
    BoundaryMatrix::new(
        order
            .iter()
            .map(|c| {
                let rows = boundary(c, complex.tree())
                    .support_mod2()
                    .iter()
                    .map(|f| pos[f])
                    .collect();
                (c.dimension(), births[*c], rows)
            })
            .collect(),
    )
}

#[test]
fn reduction_matches_rank_difference_oracle() {
    let mut rng = SplitMix64::new(2024);
    let mut tested = 0;
    for round in 0..10 {
        let tree = Arc::new(GridTree::from_split_fn(2, 2, |idx| {
            idx.is_root() || (rng.next_u64() % 100) < 40
        }));
        let complex = CellComplex::full(tree.clone());
        if complex.cell_count() > 200 {
            continue;
        }
        // random vertex values snapped to a handful of levels to force ties
        let vertex_values: BTreeMap<CellIndex, f64> = complex
            .cells_of_dim(0)
            .iter()
            .map(|v| (v.clone(), (rng.next_u64() % 5) as f64))
            .collect();
        let births = lower_star_births(&complex, &vertex_values, 2);
        let matrix = filtered_matrix(&complex, &births);
        let fast = reduce(&matrix);
        let oracle = RankOracle::new(&complex, &births, 2).diagram(2);
        assert_eq!(
            fast, oracle,
            "round {round}: reduction disagrees with the rank oracle"
        );
        tested += 1;
    }
    assert!(tested >= 5, "not enough small complexes generated");
}

#[test]
fn pairing_partition_accounts_for_every_cell() {
    // every k-cell is exactly one of: a creator paired with a killer
    // (possibly diagonally), a killer of a (k-1)-class, or unpaired
    let mut rng = SplitMix64::new(77);
    let tree = Arc::new(GridTree::from_split_fn(2, 2, |idx| {
        idx.is_root() || (rng.next_u64() % 100) < 50
    }));
    let complex = CellComplex::full(tree.clone());
    let vertex_values: BTreeMap<CellIndex, f64> = complex
        .cells_of_dim(0)
        .iter()
        .map(|v| (v.clone(), (rng.next_u64() % 4) as f64))
        .collect();
    let births = lower_star_births(&complex, &vertex_values, 2);
    let matrix = filtered_matrix(&complex, &births);
    let pairing = veriph::persistence::reduce_pairs(&matrix);
    let counts: Vec<usize> = (0..=2).map(|d| complex.cells_of_dim(d).len()).collect();
    for k in 0..=2usize {
        let creators = pairing
            .pairs
            .iter()
            .filter(|&&(c, _)| matrix.cell_dim(c) == k)
            .count();
        let killers = pairing
            .pairs
            .iter()
            .filter(|&&(_, c)| matrix.cell_dim(c) == k)
            .count();
        let unpaired = pairing
            .unpaired
            .iter()
            .filter(|&&c| matrix.cell_dim(c) == k)
            .count();
        assert_eq!(
            creators + killers + unpaired,
            counts[k],
            "pairing partition broken in dimension {k}"
        );
    }
    // Euler characteristic matches the alternating Betti sum of the final
    // complex
    let final_betti = veriph::persistence::betti(&complex);
    let chi_cells: i64 = counts
        .iter()
        .enumerate()
        .map(|(d, &c)| if d % 2 == 0 { c as i64 } else { -(c as i64) })
        .sum();
    let chi_betti: i64 = final_betti
        .iter()
        .enumerate()
        .map(|(d, &b)| if d % 2 == 0 { b as i64 } else { -(b as i64) })
        .sum();
    assert_eq!(chi_cells, chi_betti);
    // a diagram never reports more points in a dimension than creator cells
    let diagram = reduce(&matrix);
    for d in 0..=2usize {
        assert!(diagram.points_in_dim(d).len() <= counts[d]);
    }
}
