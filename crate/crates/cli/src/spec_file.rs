//! The on-disk function description consumed by `--function`.
//!
//! Two kinds are accepted:
//!
//! ```json
//! {"kind": "fourier", "n": 2, "coeffs": [[1, 1, 1, 1.0], [2, 1, 4, -0.3]]}
//! {"kind": "expr", "text": "(* (sin (* tau x0)) (sin (* tau x1)))"}
//! ```
//!
//! `fourier` entries are `(i, j, k, value)` with modes `i, j` in `1..=n` and
//! `k` in `1..=4` selecting sin·sin, sin·cos, cos·sin, cos·cos; omitted
//! coefficients are zero. `expr` is prefix notation over `+ * - sin cos`,
//! coordinates `x0..`, numbers, and the constants `pi`/`tau`.

use serde::Deserialize;
use veriph::expr::FunctionExpr;
use veriph::fourier::fourier_expr;

#[derive(Debug, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum FunctionSpec {
    Fourier {
        n: u32,
        coeffs: Vec<(u32, u32, u32, f64)>,
    },
    Expr {
        text: String,
    },
}

impl FunctionSpec {
    pub fn parse(text: &str) -> Result<Self, String> {
        serde_json::from_str(text).map_err(|e| format!("bad function spec: {e}"))
    }

    pub fn build(&self) -> Result<(FunctionExpr, String), String> {
        match self {
            FunctionSpec::Fourier { n, coeffs } => {
                for &(i, j, k, _) in coeffs {
                    if i < 1 || i > *n || j < 1 || j > *n {
                        return Err(format!(
                            "coefficient ({i},{j},{k}) is outside the declared mode count {n}"
                        ));
                    }
                    if !(1..=4).contains(&k) {
                        return Err(format!("trig selector {k} must be 1..=4"));
                    }
                }
                let expr = fourier_expr(coeffs);
                Ok((expr, format!("fourier n={n} ({} coefficients)", coeffs.len())))
            }
            FunctionSpec::Expr { text } => {
                let expr = FunctionExpr::parse(text).map_err(|e| e.to_string())?;
                Ok((expr, text.clone()))
            }
        }
    }
}
