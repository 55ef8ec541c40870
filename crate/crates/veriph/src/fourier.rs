//! Random trigonometric polynomials on the unit square.
//!
//! The function family is
//!
//! ```text
//! f(x,y) = Σ_{i=1}^{M} Σ_{j=1}^{M}  a_{i,j,1} sin(2πix) sin(2πjy)
//!                                 + a_{i,j,2} sin(2πix) cos(2πjy)
//!                                 + a_{i,j,3} cos(2πix) sin(2πjy)
//!                                 + a_{i,j,4} cos(2πix) cos(2πjy)
//! ```
//!
//! with coefficients drawn i.i.d. from N(0,1). Draw order is documented and
//! fixed — `(i, j, k)` lexicographic with `k` fastest — so a seed pins the
//! function exactly.

use std::f64::consts::TAU;

use crate::expr::FunctionExpr;
use crate::rng::SplitMix64;

/// One term: `(i, j, k, value)` with `i, j >= 1` and `k` in `1..=4`
/// selecting sin·sin, sin·cos, cos·sin, cos·cos in that order.
pub type Coefficient = (u32, u32, u32, f64);

/// Build the expression for an explicit coefficient table. Zero coefficients
/// are skipped, so sparse tables stay small.
pub fn fourier_expr(coeffs: &[Coefficient]) -> FunctionExpr {
    let mut acc: Option<FunctionExpr> = None;
    for &(i, j, k, a) in coeffs {
        assert!(i >= 1 && j >= 1, "mode indices start at 1");
        assert!((1..=4).contains(&k), "trig selector must be 1..=4");
        if a == 0.0 {
            continue;
        }
        let wave_x = FunctionExpr::constant(TAU * f64::from(i)).mul(&FunctionExpr::coord(0));
        let wave_y = FunctionExpr::constant(TAU * f64::from(j)).mul(&FunctionExpr::coord(1));
        let fx = if k <= 2 { wave_x.sin() } else { wave_x.cos() };
        let fy = if k % 2 == 1 { wave_y.sin() } else { wave_y.cos() };
        let term = FunctionExpr::constant(a).mul(&fx).mul(&fy);
        acc = Some(match acc {
            None => term,
            Some(s) => s.add(&term),
        });
    }
    acc.unwrap_or_else(|| FunctionExpr::constant(0.0))
}

/// Draw the full `4·modes²` coefficient table for a seeded random series.
pub fn generate_coefficients(modes: u32, seed: u64) -> Vec<Coefficient> {
    assert!(modes >= 1, "need at least one mode");
    let mut rng = SplitMix64::new(seed);
    let mut out = Vec::with_capacity((4 * modes * modes) as usize);
    for i in 1..=modes {
        for j in 1..=modes {
            for k in 1..=4 {
                out.push((i, j, k, rng.next_normal()));
            }
        }
    }
    out
}

/// Seeded random Fourier series as an expression tree.
pub fn generate_fourier(modes: u32, seed: u64) -> FunctionExpr {
    fourier_expr(&generate_coefficients(modes, seed))
}
