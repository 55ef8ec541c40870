//! Outward-rounded interval arithmetic.
//!
//! Every operation returns an interval that contains the exact real-arithmetic
//! image of its inputs. Rounding is handled portably: after each primitive
//! operation both bounds are nudged one unit in the last place outward, which
//! over-approximates whatever the hardware rounding mode did. Trigonometric
//! enclosures reduce the argument against a two-float enclosure of π and fall
//! back to monotone-branch analysis between critical points.

use std::fmt;

/// Enclosure of π: `PI_LO < π < PI_HI`. The f64 nearest π is below π.
const PI_LO: f64 = std::f64::consts::PI;

/// Number of ulps of slack applied around libm trig results. The platform
/// `sin`/`cos` are faithful to well under 2 ulps; 4 is comfortably safe.
const TRIG_SLACK: u32 = 4;

fn next_down_n(mut x: f64, n: u32) -> f64 {
    for _ in 0..n {
        x = x.next_down();
    }
    x
}

fn next_up_n(mut x: f64, n: u32) -> f64 {
    for _ in 0..n {
        x = x.next_up();
    }
    x
}

/// A closed interval `[lo, hi]` of extended reals with `lo <= hi`.
///
/// Arithmetic is outward-rounded: the result of an operation contains the set
/// `{ x op y : x in a, y in b }` of exact real results.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    /// Interval from explicit bounds. Panics if `lo > hi` or a bound is NaN.
    pub fn new(lo: f64, hi: f64) -> Self {
        assert!(lo <= hi, "invalid interval [{lo}, {hi}]");
        Interval { lo, hi }
    }

    /// Degenerate interval `[x, x]`.
    pub fn point(x: f64) -> Self {
        Interval { lo: x, hi: x }
    }

    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }

    pub fn contains(&self, x: f64) -> bool {
        self.lo <= x && x <= self.hi
    }

    pub fn contains_zero(&self) -> bool {
        self.contains(0.0)
    }

    /// `other` is a subset of `self`.
    pub fn encloses(&self, other: &Interval) -> bool {
        self.lo <= other.lo && other.hi <= self.hi
    }

    /// Smallest interval containing both operands.
    pub fn hull(&self, other: &Interval) -> Interval {
        Interval {
            lo: self.lo.min(other.lo),
            hi: self.hi.max(other.hi),
        }
    }

    fn outward(lo: f64, hi: f64) -> Interval {
        Interval {
            lo: lo.next_down(),
            hi: hi.next_up(),
        }
    }

    /// One-ulp outward inflation of an existing interval.
    pub fn inflated(&self) -> Interval {
        Interval::outward(self.lo, self.hi)
    }

    pub fn neg(&self) -> Interval {
        // Negation is exact in binary floating point; no nudge required.
        Interval {
            lo: -self.hi,
            hi: -self.lo,
        }
    }

    pub fn add(&self, other: &Interval) -> Interval {
        Interval::outward(self.lo + other.lo, self.hi + other.hi)
    }

    pub fn sub(&self, other: &Interval) -> Interval {
        Interval::outward(self.lo - other.hi, self.hi - other.lo)
    }

    pub fn mul(&self, other: &Interval) -> Interval {
        let (a, b, c, d) = (self.lo, self.hi, other.lo, other.hi);
        let products = [a * c, a * d, b * c, b * d];
        let mut lo = products[0];
        let mut hi = products[0];
        for &p in &products[1..] {
            lo = lo.min(p);
            hi = hi.max(p);
        }
        Interval::outward(lo, hi)
    }

    /// Division by a strictly positive divisor interval (`0 < c <= d`).
    /// Only needed internally for trig argument reduction.
    pub(crate) fn div_pos(&self, other: &Interval) -> Interval {
        debug_assert!(other.lo > 0.0);
        let (a, b, c, d) = (self.lo, self.hi, other.lo, other.hi);
        let lo = if a >= 0.0 { a / d } else { a / c };
        let hi = if b >= 0.0 { b / c } else { b / d };
        Interval::outward(lo, hi)
    }

    /// Rigorous enclosure of `{ sin x : x in self }`.
    pub fn sin(&self) -> Interval {
        trig_enclosure(self, TrigKind::Sin)
    }

    /// Rigorous enclosure of `{ cos x : x in self }`.
    pub fn cos(&self) -> Interval {
        trig_enclosure(self, TrigKind::Cos)
    }
}

impl fmt::Display for Interval {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{}, {}]", self.lo, self.hi)
    }
}

enum TrigKind {
    Sin,
    Cos,
}

/// Does `q` contain an integer congruent to `r` modulo 4?
///
/// `q` is an outward enclosure of `x / (π/2)`, so a "yes" is conservative: it
/// may flag a critical point that is just outside the true quotient range,
/// which only widens the result.
fn contains_quarter(q: &Interval, r: i64) -> bool {
    if q.width() >= 4.0 {
        return true;
    }
    // Quotients stay tiny for the supported function class; if they do not,
    // integer extraction is unreliable and we conservatively report true.
    if q.lo.abs() >= 4.5e15 || q.hi.abs() >= 4.5e15 {
        return true;
    }
    // Smallest integer >= q.lo congruent to r mod 4.
    let lo_ceil = q.lo.ceil() as i64;
    let mut m = lo_ceil + (r - lo_ceil).rem_euclid(4);
    // Guard against ceil landing one off after the cast.
    while (m - 4) as f64 >= q.lo {
        m -= 4;
    }
    while (m as f64) < q.lo {
        m += 4;
    }
    (m as f64) <= q.hi
}

fn trig_enclosure(x: &Interval, kind: TrigKind) -> Interval {
    // Enclosure of π/2 (halving is exact in binary).
    let half_pi = Interval {
        lo: PI_LO / 2.0,
        hi: (PI_LO.next_up()) / 2.0,
    };
    if !x.lo.is_finite() || !x.hi.is_finite() || x.width() >= 7.0 {
        return Interval::new(-1.0, 1.0);
    }
    let q = x.div_pos(&half_pi);
    // sin has maxima at (1 mod 4)·π/2 and minima at (3 mod 4)·π/2;
    // cos at (0 mod 4) and (2 mod 4).
    let (max_res, min_res) = match kind {
        TrigKind::Sin => (1, 3),
        TrigKind::Cos => (0, 2),
    };
    let eval = |v: f64| -> f64 {
        match kind {
            TrigKind::Sin => v.sin(),
            TrigKind::Cos => v.cos(),
        }
    };
    let (ea, eb) = (eval(x.lo), eval(x.hi));
    let hi = if contains_quarter(&q, max_res) {
        1.0
    } else {
        next_up_n(ea.max(eb), TRIG_SLACK).min(1.0)
    };
    let lo = if contains_quarter(&q, min_res) {
        -1.0
    } else {
        next_down_n(ea.min(eb), TRIG_SLACK).max(-1.0)
    };
    Interval::new(lo, hi)
}

/// An axis-aligned box: the N-fold product of closed intervals.
#[derive(Debug, Clone, PartialEq)]
pub struct IntervalBox {
    axes: Vec<Interval>,
}

impl IntervalBox {
    pub fn new(axes: Vec<Interval>) -> Self {
        assert!(!axes.is_empty(), "a box needs at least one axis");
        IntervalBox { axes }
    }

    /// The unit cube `[0,1]^dims`.
    pub fn unit(dims: usize) -> Self {
        IntervalBox::new(vec![Interval::new(0.0, 1.0); dims])
    }

    /// Degenerate box around a point.
    pub fn point(coords: &[f64]) -> Self {
        IntervalBox::new(coords.iter().map(|&c| Interval::point(c)).collect())
    }

    pub fn dims(&self) -> usize {
        self.axes.len()
    }

    pub fn axis(&self, i: usize) -> &Interval {
        &self.axes[i]
    }

    pub fn axes(&self) -> &[Interval] {
        &self.axes
    }

    pub fn axes_mut(&mut self) -> &mut [Interval] {
        &mut self.axes
    }

    pub fn contains_point(&self, p: &[f64]) -> bool {
        p.len() == self.dims() && self.axes.iter().zip(p).all(|(a, &x)| a.contains(x))
    }

    /// Axes with positive width, the only ones worth bisecting.
    pub fn split_axes(&self) -> Vec<usize> {
        (0..self.dims())
            .filter(|&i| self.axes[i].width() > 0.0)
            .collect()
    }

    /// Bisect every non-degenerate axis once, yielding up to 2^dims sub-boxes.
    /// Midpoints of dyadic boxes are exact, so the children tile the parent.
    pub fn bisect_all(&self) -> Vec<IntervalBox> {
        let split = self.split_axes();
        if split.is_empty() {
            return vec![self.clone()];
        }
        let mut out = Vec::with_capacity(1 << split.len());
        let mut current = self.clone();
        fill_bisections(&split, 0, &mut current, self, &mut out);
        out
    }
}

fn fill_bisections(
    split: &[usize],
    k: usize,
    current: &mut IntervalBox,
    original: &IntervalBox,
    out: &mut Vec<IntervalBox>,
) {
    if k == split.len() {
        out.push(current.clone());
        return;
    }
    let axis = split[k];
    let iv = *original.axis(axis);
    let mid = 0.5 * (iv.lo + iv.hi);
    current.axes_mut()[axis] = Interval::new(iv.lo, mid);
    fill_bisections(split, k + 1, current, original, out);
    current.axes_mut()[axis] = Interval::new(mid, iv.hi);
    fill_bisections(split, k + 1, current, original, out);
    current.axes_mut()[axis] = iv;
}
