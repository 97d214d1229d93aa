//! Deterministic pairwise (cascade) summation.
//!
//! All quadratures and objective sums in this crate reduce per-node
//! contributions in row-major order through this routine, so results are
//! reproducible bit-for-bit regardless of how the contributions were produced,
//! and the rounding error grows like O(log n) rather than O(n).

const LEAF: usize = 32;

pub(crate) fn pairwise_sum(xs: &[f64]) -> f64 {
    if xs.len() <= LEAF {
        let mut acc = 0.0;
        for &x in xs {
            acc += x;
        }
        acc
    } else {
        let mid = xs.len() / 2;
        pairwise_sum(&xs[..mid]) + pairwise_sum(&xs[mid..])
    }
}
