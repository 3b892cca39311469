//! Compensated summation with order-stable chunking.
//!
//! Genome-wide statistics are ratios of sums over up to millions of loci.
//! Plain accumulation loses digits and, worse, parallel reduction orders
//! would make results depend on the worker count. Sums here use Neumaier
//! compensation; callers split work into fixed [`SUM_CHUNK`]-sized chunks
//! and merge chunk results in index order, so a statistic is bit-identical
//! no matter how many threads ran.

/// Loci per summation chunk. Fixed so that serial and parallel evaluation
/// produce bit-identical totals.
pub const SUM_CHUNK: usize = 8192;

/// A Neumaier-compensated accumulator.
#[derive(Debug, Clone, Copy, Default)]
pub struct CompensatedSum {
    sum: f64,
    comp: f64,
}

impl CompensatedSum {
    /// Adds one term.
    #[inline]
    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    /// Folds another accumulator into this one. Merging must follow chunk
    /// index order for reproducibility.
    #[inline]
    pub fn merge(&mut self, other: CompensatedSum) {
        self.add(other.sum);
        self.comp += other.comp;
    }

    /// The compensated total.
    #[inline]
    pub fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn compensation_beats_naive_accumulation() {
        // 1 followed by many tiny terms: naive f64 addition drops them all.
        let n = 1_000_000usize;
        let tiny = 1e-18f64;
        let mut naive = 1.0f64;
        let mut comp = CompensatedSum::default();
        comp.add(1.0);
        for _ in 0..n {
            naive += tiny;
            comp.add(tiny);
        }
        assert_eq!(naive, 1.0);
        let expected = 1.0 + n as f64 * tiny;
        assert!((comp.value() - expected).abs() < 1e-13 * expected);
    }

    #[test]
    fn chunked_merge_matches_flat_accumulation() {
        let f = |i: usize| ((i * 2654435761) % 1000) as f64 * 1e-3 - 0.3;
        let n = 3 * SUM_CHUNK + 17;
        let mut flat = CompensatedSum::default();
        for i in 0..n {
            flat.add(f(i));
        }
        let mut merged = CompensatedSum::default();
        for start in (0..n).step_by(SUM_CHUNK) {
            let mut chunk = CompensatedSum::default();
            for i in start..(start + SUM_CHUNK).min(n) {
                chunk.add(f(i));
            }
            merged.merge(chunk);
        }
        assert!((merged.value() - flat.value()).abs() < 1e-12);
        assert_eq!(CompensatedSum::default().value(), 0.0);
    }
}
