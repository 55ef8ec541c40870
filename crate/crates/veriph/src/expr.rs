//! Expression trees for the supported function class: finite combinations of
//! constants, coordinates, sums, products, negation, sine and cosine.
//!
//! Expressions are immutable after construction. Interval evaluation nudges
//! the result of every node — including constants and coordinate reads — one
//! ulp outward, so even an exact hit of a threshold by a vertex value shows up
//! as an undecidable straddle rather than a silent tie-break.

use std::fmt;
use std::sync::Arc;

use thiserror::Error;

use crate::interval::{Interval, IntervalBox};

/// Hard cap on the per-axis bisection count of [`FunctionExpr::refined_eval`].
pub const MAX_EVAL_SUBDIV: usize = 12;

#[derive(Debug, Error, PartialEq)]
pub enum ExprError {
    #[error("expression reads coordinate {coord} but the box has {dims} axes")]
    DimensionMismatch { coord: usize, dims: usize },
    #[error("refinement level {0} exceeds the maximum {MAX_EVAL_SUBDIV}")]
    RefinementTooDeep(usize),
    #[error("parse error: {0}")]
    Parse(String),
}

#[derive(Debug, PartialEq)]
enum Node {
    Const(f64),
    Coord(usize),
    Neg(Arc<Node>),
    Add(Arc<Node>, Arc<Node>),
    Mul(Arc<Node>, Arc<Node>),
    Sin(Arc<Node>),
    Cos(Arc<Node>),
}

/// A function `[0,1]^N -> R` as an immutable expression tree.
///
/// `dims()` is the smallest box dimension the expression can be evaluated on
/// (one past the highest coordinate index; constants report 0).
#[derive(Debug, Clone)]
pub struct FunctionExpr {
    node: Arc<Node>,
    dims: usize,
}

fn node_dims(node: &Node) -> usize {
    match node {
        Node::Const(_) => 0,
        Node::Coord(i) => i + 1,
        Node::Neg(a) | Node::Sin(a) | Node::Cos(a) => node_dims(a),
        Node::Add(a, b) | Node::Mul(a, b) => node_dims(a).max(node_dims(b)),
    }
}

impl FunctionExpr {
    fn from_node(node: Arc<Node>) -> Self {
        let dims = node_dims(&node);
        FunctionExpr { node, dims }
    }

    pub fn constant(c: f64) -> Self {
        Self::from_node(Arc::new(Node::Const(c)))
    }

    pub fn coord(i: usize) -> Self {
        Self::from_node(Arc::new(Node::Coord(i)))
    }

    pub fn neg(&self) -> Self {
        Self::from_node(neg_node(self.node.clone()))
    }

    pub fn add(&self, other: &FunctionExpr) -> Self {
        Self::from_node(add_node(self.node.clone(), other.node.clone()))
    }

    pub fn sub(&self, other: &FunctionExpr) -> Self {
        self.add(&other.neg())
    }

    pub fn mul(&self, other: &FunctionExpr) -> Self {
        Self::from_node(mul_node(self.node.clone(), other.node.clone()))
    }

    pub fn sin(&self) -> Self {
        Self::from_node(Arc::new(Node::Sin(self.node.clone())))
    }

    pub fn cos(&self) -> Self {
        Self::from_node(Arc::new(Node::Cos(self.node.clone())))
    }

    /// Smallest usable box dimension.
    pub fn dims(&self) -> usize {
        self.dims
    }

    pub fn node_count(&self) -> usize {
        fn count(n: &Node) -> usize {
            match n {
                Node::Const(_) | Node::Coord(_) => 1,
                Node::Neg(a) | Node::Sin(a) | Node::Cos(a) => 1 + count(a),
                Node::Add(a, b) | Node::Mul(a, b) => 1 + count(a) + count(b),
            }
        }
        count(&self.node)
    }

    fn check_dims(&self, dims: usize) -> Result<(), ExprError> {
        if self.dims > dims {
            Err(ExprError::DimensionMismatch {
                coord: self.dims - 1,
                dims,
            })
        } else {
            Ok(())
        }
    }

    /// Interval enclosure of `{ f(x) : x in box }`.
    pub fn eval(&self, bx: &IntervalBox) -> Result<Interval, ExprError> {
        self.check_dims(bx.dims())?;
        Ok(eval_node(&self.node, bx))
    }

    /// Plain f64 evaluation at a point (no rounding control).
    pub fn eval_point(&self, p: &[f64]) -> Result<f64, ExprError> {
        self.check_dims(p.len())?;
        Ok(eval_point_node(&self.node, p))
    }

    /// Enclosure after bisecting every non-degenerate axis `k` times and
    /// taking the hull of the sub-results. Tighter than [`eval`] because
    /// the dependency problem of interval arithmetic shrinks with the box.
    ///
    /// [`eval`]: FunctionExpr::eval
    pub fn refined_eval(&self, bx: &IntervalBox, k: usize) -> Result<Interval, ExprError> {
        self.check_dims(bx.dims())?;
        if k > MAX_EVAL_SUBDIV {
            return Err(ExprError::RefinementTooDeep(k));
        }
        Ok(refined_hull(&self.node, bx, k))
    }

    /// Exact symbolic partial derivative with respect to `axis`.
    ///
    /// The result is lightly simplified (zero summands and unit factors are
    /// folded away) but never numerically rewritten.
    pub fn partial(&self, axis: usize) -> FunctionExpr {
        Self::from_node(diff_node(&self.node, axis))
    }

    /// Parse a prefix-notation expression, e.g. `(* (sin (* 6.2831 x0)) x1)`.
    /// Operators: `+` (n-ary), `*` (n-ary), `-` (unary negation, or binary
    /// subtraction), `sin`, `cos`; atoms: `x<k>` coordinates and numeric
    /// literals.
    pub fn parse(text: &str) -> Result<FunctionExpr, ExprError> {
        parse_expression(text)
    }
}

impl fmt::Display for FunctionExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fn wr(n: &Node, f: &mut fmt::Formatter<'_>) -> fmt::Result {
            match n {
                Node::Const(c) => write!(f, "{c}"),
                Node::Coord(i) => write!(f, "x{i}"),
                Node::Neg(a) => {
                    write!(f, "(- ")?;
                    wr(a, f)?;
                    write!(f, ")")
                }
                Node::Add(a, b) => {
                    write!(f, "(+ ")?;
                    wr(a, f)?;
                    write!(f, " ")?;
                    wr(b, f)?;
                    write!(f, ")")
                }
                Node::Mul(a, b) => {
                    write!(f, "(* ")?;
                    wr(a, f)?;
                    write!(f, " ")?;
                    wr(b, f)?;
                    write!(f, ")")
                }
                Node::Sin(a) => {
                    write!(f, "(sin ")?;
                    wr(a, f)?;
                    write!(f, ")")
                }
                Node::Cos(a) => {
                    write!(f, "(cos ")?;
                    wr(a, f)?;
                    write!(f, ")")
                }
            }
        }
        wr(&self.node, f)
    }
}

fn is_const(node: &Node, v: f64) -> bool {
    matches!(node, Node::Const(c) if *c == v)
}

fn neg_node(a: Arc<Node>) -> Arc<Node> {
    match &*a {
        Node::Const(c) => Arc::new(Node::Const(-c)),
        Node::Neg(inner) => inner.clone(),
        _ => Arc::new(Node::Neg(a)),
    }
}

fn add_node(a: Arc<Node>, b: Arc<Node>) -> Arc<Node> {
    if is_const(&a, 0.0) {
        return b;
    }
    if is_const(&b, 0.0) {
        return a;
    }
    Arc::new(Node::Add(a, b))
}

fn mul_node(a: Arc<Node>, b: Arc<Node>) -> Arc<Node> {
    if is_const(&a, 0.0) || is_const(&b, 0.0) {
        return Arc::new(Node::Const(0.0));
    }
    if is_const(&a, 1.0) {
        return b;
    }
    if is_const(&b, 1.0) {
        return a;
    }
    Arc::new(Node::Mul(a, b))
}

fn eval_node(node: &Node, bx: &IntervalBox) -> Interval {
    match node {
        Node::Const(c) => Interval::point(*c).inflated(),
        Node::Coord(i) => bx.axis(*i).inflated(),
        Node::Neg(a) => eval_node(a, bx).neg(),
        Node::Add(a, b) => eval_node(a, bx).add(&eval_node(b, bx)),
        Node::Mul(a, b) => eval_node(a, bx).mul(&eval_node(b, bx)),
        Node::Sin(a) => eval_node(a, bx).sin().inflated(),
        Node::Cos(a) => eval_node(a, bx).cos().inflated(),
    }
}

fn eval_point_node(node: &Node, p: &[f64]) -> f64 {
    match node {
        Node::Const(c) => *c,
        Node::Coord(i) => p[*i],
        Node::Neg(a) => -eval_point_node(a, p),
        Node::Add(a, b) => eval_point_node(a, p) + eval_point_node(b, p),
        Node::Mul(a, b) => eval_point_node(a, p) * eval_point_node(b, p),
        Node::Sin(a) => eval_point_node(a, p).sin(),
        Node::Cos(a) => eval_point_node(a, p).cos(),
    }
}

fn refined_hull(node: &Node, bx: &IntervalBox, k: usize) -> Interval {
    if k == 0 {
        return eval_node(node, bx);
    }
    let mut hull: Option<Interval> = None;
    for part in bx.bisect_all() {
        let sub = refined_hull(node, &part, k - 1);
        hull = Some(match hull {
            None => sub,
            Some(h) => h.hull(&sub),
        });
    }
    hull.expect("bisect_all never returns an empty cover")
}

fn diff_node(node: &Node, axis: usize) -> Arc<Node> {
    match node {
        Node::Const(_) => Arc::new(Node::Const(0.0)),
        Node::Coord(i) => Arc::new(Node::Const(if *i == axis { 1.0 } else { 0.0 })),
        Node::Neg(a) => neg_node(diff_node(a, axis)),
        Node::Add(a, b) => add_node(diff_node(a, axis), diff_node(b, axis)),
        Node::Mul(a, b) => add_node(
            mul_node(diff_node(a, axis), b.clone()),
            mul_node(a.clone(), diff_node(b, axis)),
        ),
        Node::Sin(a) => mul_node(Arc::new(Node::Cos(a.clone())), diff_node(a, axis)),
        Node::Cos(a) => neg_node(mul_node(Arc::new(Node::Sin(a.clone())), diff_node(a, axis))),
    }
}

// ---------------------------------------------------------------------------
// Prefix-notation parser
// ---------------------------------------------------------------------------

#[derive(Debug, PartialEq)]
enum Token {
    Open,
    Close,
    Symbol(String),
    Number(f64),
}

fn tokenize(text: &str) -> Result<Vec<Token>, ExprError> {
    let mut out = Vec::new();
    let mut chars = text.chars().peekable();
    while let Some(&c) = chars.peek() {
        match c {
            '(' => {
                chars.next();
                out.push(Token::Open);
            }
            ')' => {
                chars.next();
                out.push(Token::Close);
            }
            c if c.is_whitespace() => {
                chars.next();
            }
            _ => {
                let mut word = String::new();
                while let Some(&c) = chars.peek() {
                    if c.is_whitespace() || c == '(' || c == ')' {
                        break;
                    }
                    word.push(c);
                    chars.next();
                }
                // `-` alone is an operator; `-0.5` is a number.
                let first = word.chars().next().unwrap();
                if first.is_ascii_digit()
                    || (word.len() > 1 && (first == '-' || first == '+') && word[1..2].chars().all(|c| c.is_ascii_digit() || c == '.'))
                {
                    let v: f64 = word
                        .parse()
                        .map_err(|_| ExprError::Parse(format!("bad number `{word}`")))?;
                    out.push(Token::Number(v));
                } else {
                    out.push(Token::Symbol(word));
                }
            }
        }
    }
    Ok(out)
}

fn parse_expression(text: &str) -> Result<FunctionExpr, ExprError> {
    let tokens = tokenize(text)?;
    let mut pos = 0usize;
    let expr = parse_one(&tokens, &mut pos)?;
    if pos != tokens.len() {
        return Err(ExprError::Parse("trailing input after expression".into()));
    }
    Ok(expr)
}

fn parse_one(tokens: &[Token], pos: &mut usize) -> Result<FunctionExpr, ExprError> {
    let tok = tokens
        .get(*pos)
        .ok_or_else(|| ExprError::Parse("unexpected end of input".into()))?;
    *pos += 1;
    match tok {
        Token::Number(v) => Ok(FunctionExpr::constant(*v)),
        Token::Symbol(s) => parse_atom(s),
        Token::Close => Err(ExprError::Parse("unexpected `)`".into())),
        Token::Open => {
            let head = match tokens.get(*pos) {
                Some(Token::Symbol(s)) => s.clone(),
                _ => return Err(ExprError::Parse("expected operator after `(`".into())),
            };
            *pos += 1;
            let mut args = Vec::new();
            while !matches!(tokens.get(*pos), Some(Token::Close)) {
                if tokens.get(*pos).is_none() {
                    return Err(ExprError::Parse("missing `)`".into()));
                }
                args.push(parse_one(tokens, pos)?);
            }
            *pos += 1; // consume `)`
            apply(&head, args)
        }
    }
}

fn parse_atom(word: &str) -> Result<FunctionExpr, ExprError> {
    if let Some(rest) = word.strip_prefix('x') {
        if let Ok(i) = rest.parse::<usize>() {
            return Ok(FunctionExpr::coord(i));
        }
    }
    match word {
        "pi" => Ok(FunctionExpr::constant(std::f64::consts::PI)),
        "tau" => Ok(FunctionExpr::constant(std::f64::consts::TAU)),
        _ => Err(ExprError::Parse(format!("unknown atom `{word}`"))),
    }
}

fn apply(head: &str, args: Vec<FunctionExpr>) -> Result<FunctionExpr, ExprError> {
    let arity = args.len();
    let need = |n: usize| -> Result<(), ExprError> {
        if arity == n {
            Ok(())
        } else {
            Err(ExprError::Parse(format!(
                "`{head}` expects {n} argument(s), got {arity}"
            )))
        }
    };
    match head {
        "+" => {
            if args.is_empty() {
                return Err(ExprError::Parse("`+` needs at least one argument".into()));
            }
            let mut it = args.into_iter();
            let first = it.next().unwrap();
            Ok(it.fold(first, |acc, e| acc.add(&e)))
        }
        "*" => {
            if args.is_empty() {
                return Err(ExprError::Parse("`*` needs at least one argument".into()));
            }
            let mut it = args.into_iter();
            let first = it.next().unwrap();
            Ok(it.fold(first, |acc, e| acc.mul(&e)))
        }
        "-" => match arity {
            1 => Ok(args[0].neg()),
            2 => Ok(args[0].sub(&args[1])),
            _ => Err(ExprError::Parse("`-` expects 1 or 2 arguments".into())),
        },
        "sin" => {
            need(1)?;
            Ok(args[0].sin())
        }
        "cos" => {
            need(1)?;
            Ok(args[0].cos())
        }
        _ => Err(ExprError::Parse(format!("unknown operator `{head}`"))),
    }
}
