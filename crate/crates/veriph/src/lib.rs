//! Rigorous sub-level set persistence on the unit cube.
//!
//! Given a C¹ function `f : [0,1]^N -> R` built from constants, coordinates,
//! sums, products, negation and sine/cosine, this crate computes a persistence
//! diagram for the sub-level filtration of `f` together with a certified
//! bottleneck-distance error bound. Every decision that feeds the diagram is
//! made with outward-rounded interval arithmetic, so the bound is a theorem
//! about the exact function, not about a sampled surrogate.
//!
//! The pipeline:
//!
//! 1. [`expr`] — expression trees with interval evaluation and symbolic
//!    partial derivatives.
//! 2. [`grid`] — adaptive dyadic grids whose cubes certify, per threshold,
//!    how the function sits relative to the level.
//! 3. [`cw`] — the CW structure induced by a grid, canonical cells, the
//!    neighbor search, and the boundary operator.
//! 4. [`filtration`] — threshold schedules, the intersected cellular
//!    filtration on the common refinement, and the a-posteriori error bound.
//! 5. [`persistence`] — Z₂ column reduction, Betti numbers, persistence
//!    diagrams and the bottleneck distance.
//! 6. [`pipeline`] — the end-to-end driver plus report/diagram writers used
//!    by the CLI.

pub mod cw;
pub mod dyadic;
pub mod expr;
pub mod filtration;
pub mod fourier;
pub mod grid;
pub mod interval;
pub mod persistence;
pub mod pipeline;
pub mod rng;

pub use expr::FunctionExpr;
pub use grid::{CubeIndex, GridConfig, GridTree, VerificationOutcome};
pub use interval::{Interval, IntervalBox};
pub use persistence::PersistenceDiagram;
