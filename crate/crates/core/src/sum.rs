//! Reproducible floating-point reductions.
//!
//! Two flavours are provided. [`ExactSum`] returns the correctly rounded sum
//! of its inputs, so the result does not depend on the order in which terms
//! arrive; every field norm and the energy double sum go through it.
//! [`pairwise_sum`] is a fixed-order tree reduction used in the hot
//! per-target velocity loops where order is fixed by the element list.

/// Below this many terms the tree reduction falls back to a plain loop.
pub const PAIRWISE_BLOCK: usize = 64;

/// Correctly rounded accumulator (Shewchuk's non-overlapping partials with the
/// final half-way correction used by Python's `math.fsum`).
#[derive(Debug, Clone, Default)]
pub struct ExactSum {
    partials: Vec<f64>,
    special: f64,
}

impl ExactSum {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, value: f64) {
        if !value.is_finite() {
            self.special += value;
            return;
        }
        let mut x = value;
        let mut i = 0;
        for j in 0..self.partials.len() {
            let mut y = self.partials[j];
            if x.abs() < y.abs() {
                std::mem::swap(&mut x, &mut y);
            }
            let hi = x + y;
            let lo = y - (hi - x);
            if lo != 0.0 {
                self.partials[i] = lo;
                i += 1;
            }
            x = hi;
        }
        self.partials.truncate(i);
        self.partials.push(x);
    }

    pub fn total(&self) -> f64 {
        if self.special != 0.0 || self.special.is_nan() {
            return self.special;
        }
        let p = &self.partials;
        let mut n = p.len();
        if n == 0 {
            return 0.0;
        }
        n -= 1;
        let mut hi = p[n];
        let mut lo = 0.0;
        while n > 0 {
            let x = hi;
            n -= 1;
            let y = p[n];
            hi = x + y;
            let yr = hi - x;
            lo = y - yr;
            if lo != 0.0 {
                break;
            }
        }
        if n > 0 && ((lo < 0.0 && p[n - 1] < 0.0) || (lo > 0.0 && p[n - 1] > 0.0)) {
            let y = lo * 2.0;
            let x = hi + y;
            let yr = x - hi;
            if y == yr {
                hi = x;
            }
        }
        hi
    }
}

impl Extend<f64> for ExactSum {
    fn extend<I: IntoIterator<Item = f64>>(&mut self, iter: I) {
        for v in iter {
            self.add(v);
        }
    }
}

/// Correctly rounded sum of an iterator.
pub fn exact_sum<I: IntoIterator<Item = f64>>(values: I) -> f64 {
    let mut acc = ExactSum::new();
    acc.extend(values);
    acc.total()
}

/// Fixed-order pairwise summation of a slice.
pub fn pairwise_sum(values: &[f64]) -> f64 {
    if values.len() <= PAIRWISE_BLOCK {
        values.iter().fold(0.0, |a, &b| a + b)
    } else {
        let (lo, hi) = values.split_at(values.len() / 2);
        pairwise_sum(lo) + pairwise_sum(hi)
    }
}

/// Pairwise reduction of `N` simultaneous accumulators over the index range
/// `0..len`, where `term(i)` yields the contribution of item `i`.
pub fn pairwise_reduce<const N: usize, F>(len: usize, term: &F) -> [f64; N]
where
    F: Fn(usize) -> [f64; N],
{
    fn go<const N: usize, F: Fn(usize) -> [f64; N]>(lo: usize, hi: usize, term: &F) -> [f64; N] {
        if hi - lo <= PAIRWISE_BLOCK {
            let mut acc = [0.0; N];
            for i in lo..hi {
                let t = term(i);
                for k in 0..N {
                    acc[k] += t[k];
                }
            }
            acc
        } else {
            let mid = lo + (hi - lo) / 2;
            let a = go(lo, mid, term);
            let b = go(mid, hi, term);
            let mut out = [0.0; N];
            for k in 0..N {
                out[k] = a[k] + b[k];
            }
            out
        }
    }
    go(0, len, term)
}
