//! Biallelic entropy kernels of tunable order `q`.
//!
//! A single parameter `q > 0` interpolates between diversity notions: small
//! `q` weighs rare alleles heavily, `q = 1` recovers the Shannon entropy,
//! and `q = 2` recovers heterozygosity. All logarithms are natural.

use crate::error::{Error, Result};

/// Orders closer to 1 than this are evaluated as the Shannon limit.
pub const LIMIT_EPS: f64 = 1e-9;

/// Default grid of orders used by spectrum-style sweeps.
pub const DEFAULT_Q_GRID: [f64; 9] = [0.25, 0.5, 0.75, 1.0, 1.25, 1.5, 2.0, 3.0, 4.0];

/// An entropy order `q`: finite and strictly positive.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct QOrder(f64);

impl QOrder {
    /// Validates an order. Rejects non-finite values and `q <= 0`.
    pub fn new(q: f64) -> Result<Self> {
        if !q.is_finite() || q <= 0.0 {
            return Err(Error::Domain(format!(
                "entropy order must be finite and > 0, got {q}"
            )));
        }
        Ok(QOrder(q))
    }

    /// The raw order.
    #[inline]
    pub fn get(self) -> f64 {
        self.0
    }

    /// True when the order is within [`LIMIT_EPS`] of 1 and is therefore
    /// evaluated as the Shannon limit.
    #[inline]
    pub fn is_shannon_limit(self) -> bool {
        (self.0 - 1.0).abs() < LIMIT_EPS
    }
}

impl From<QOrder> for f64 {
    fn from(q: QOrder) -> f64 {
        q.0
    }
}

/// A biallelic allele frequency: finite and inside `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct AlleleFreq(f64);

impl AlleleFreq {
    /// Validates a frequency. Rejects non-finite values and values outside
    /// `[0, 1]`.
    pub fn new(p: f64) -> Result<Self> {
        if !p.is_finite() || !(0.0..=1.0).contains(&p) {
            return Err(Error::Domain(format!(
                "allele frequency must lie in [0, 1], got {p}"
            )));
        }
        Ok(AlleleFreq(p))
    }

    /// The raw frequency.
    #[inline]
    pub fn get(self) -> f64 {
        self.0
    }
}

impl From<AlleleFreq> for f64 {
    fn from(p: AlleleFreq) -> f64 {
        p.0
    }
}

/// Entropy of order `q` for a biallelic locus with alternate-allele
/// frequency `p`.
///
/// For `q` away from 1 this is `(1 - (p^q + (1-p)^q)) / (q - 1)`; within
/// [`LIMIT_EPS`] of 1 it is the Shannon entropy, the continuous limit.
/// Monomorphic frequencies yield exactly 0.
///
/// ```
/// use fqlens_core::entropy::{tsallis_bern, AlleleFreq, QOrder};
/// let p = AlleleFreq::new(0.2).unwrap();
/// let q = QOrder::new(2.0).unwrap();
/// assert!((tsallis_bern(p, q) - 0.32).abs() < 1e-15);
/// ```
#[inline]
#[must_use]
pub fn tsallis_bern(p: AlleleFreq, q: QOrder) -> f64 {
    QKernel::new(q).eval(p.get())
}

/// Shannon entropy of a biallelic locus, `-p ln p - (1-p) ln(1-p)`,
/// with the convention `0 ln 0 = 0`.
#[inline]
#[must_use]
pub fn shannon_bern(p: AlleleFreq) -> f64 {
    shannon_raw(p.get())
}

/// Expected heterozygosity `2 p (1 - p)`, the order-2 entropy.
#[inline]
#[must_use]
pub fn heterozygosity(p: AlleleFreq) -> f64 {
    quadratic_raw(p.get())
}

#[inline]
fn shannon_raw(p: f64) -> f64 {
    if p <= 0.0 || p >= 1.0 {
        return 0.0;
    }
    let r = 1.0 - p;
    -(p * p.ln()) - (r * r.ln())
}

#[inline]
fn quadratic_raw(p: f64) -> f64 {
    2.0 * p * (1.0 - p)
}

/// Evaluated for `q` away from both 1 and 2. Uses the algebraically
/// equivalent form `-(p expm1(d ln p) + (1-p) expm1(d ln(1-p))) / d` with
/// `d = q - 1`, which stays accurate as `d` approaches 0.
#[inline]
fn general_raw(p: f64, d: f64) -> f64 {
    if p <= 0.0 || p >= 1.0 {
        return 0.0;
    }
    let r = 1.0 - p;
    -(p * f64::exp_m1(d * p.ln()) + r * f64::exp_m1(d * r.ln())) / d
}

/// A per-order evaluator dispatching once instead of per call.
///
/// Statistics that sweep millions of loci at a fixed order use this to keep
/// the branch on `q` out of the inner loop. `eval` assumes its argument is a
/// valid frequency; validated entry points are [`tsallis_bern`] and friends.
#[derive(Debug, Clone, Copy)]
pub struct QKernel {
    form: Form,
}

#[derive(Debug, Clone, Copy)]
enum Form {
    Shannon,
    Quadratic,
    General { d: f64 },
}

impl QKernel {
    /// Builds the evaluator for one order.
    #[must_use]
    pub fn new(q: QOrder) -> Self {
        let form = if q.is_shannon_limit() {
            Form::Shannon
        } else if q.get() == 2.0 {
            Form::Quadratic
        } else {
            Form::General { d: q.get() - 1.0 }
        };
        QKernel { form }
    }

    /// Entropy of a frequency already known to lie in `[0, 1]`.
    #[inline]
    #[must_use]
    pub fn eval(&self, p: f64) -> f64 {
        debug_assert!((0.0..=1.0).contains(&p));
        match self.form {
            Form::Shannon => shannon_raw(p),
            Form::Quadratic => quadratic_raw(p),
            Form::General { d } => general_raw(p, d),
        }
    }

    /// The maximum the entropy attains, at `p = 1/2`.
    #[must_use]
    pub fn max_value(&self) -> f64 {
        self.eval(0.5)
    }
}

// ───────────────────────────────────────────────────────────────────────────

#[cfg(test)]
mod tests {
    use super::*;

    fn freq(p: f64) -> AlleleFreq {
        AlleleFreq::new(p).unwrap()
    }

    fn order(q: f64) -> QOrder {
        QOrder::new(q).unwrap()
    }

    #[test]
    fn rejects_invalid_orders() {
        assert!(QOrder::new(0.0).is_err());
        assert!(QOrder::new(-1.0).is_err());
        assert!(QOrder::new(f64::NAN).is_err());
        assert!(QOrder::new(f64::INFINITY).is_err());
        assert!(QOrder::new(0.25).is_ok());
    }

    #[test]
    fn rejects_invalid_frequencies() {
        assert!(AlleleFreq::new(-1e-12).is_err());
        assert!(AlleleFreq::new(1.0 + 1e-12).is_err());
        assert!(AlleleFreq::new(f64::NAN).is_err());
        assert!(AlleleFreq::new(0.0).is_ok());
        assert!(AlleleFreq::new(1.0).is_ok());
    }

    #[test]
    fn quadratic_order_is_heterozygosity() {
        assert!((tsallis_bern(freq(0.2), order(2.0)) - 0.32).abs() < 1e-15);
        assert!((heterozygosity(freq(0.3)) - 0.42).abs() < 1e-15);
        assert_eq!(
            tsallis_bern(freq(0.37), order(2.0)),
            heterozygosity(freq(0.37))
        );
    }

    #[test]
    fn shannon_values() {
        let expected = -(0.1f64 * 0.1f64.ln()) - 0.9 * 0.9f64.ln();
        assert!((shannon_bern(freq(0.1)) - expected).abs() < 1e-15);
        assert!((expected - 0.325_082_973_391_448_25).abs() < 1e-15);
        assert!((shannon_bern(freq(0.5)) - std::f64::consts::LN_2).abs() < 1e-15);
        assert_eq!(tsallis_bern(freq(0.1), order(1.0)), shannon_bern(freq(0.1)));
    }

    #[test]
    fn balanced_frequency_general_orders() {
        // At p = 1/2 the entropy is (1 - 2^(1-q)) / (q - 1).
        for q in [0.25, 0.5, 0.75, 1.25, 1.5, 3.0, 4.0] {
            let expected = (1.0 - 2f64.powf(1.0 - q)) / (q - 1.0);
            let got = tsallis_bern(freq(0.5), order(q));
            assert!(
                (got - expected).abs() < 1e-12,
                "q={q}: got {got}, expected {expected}"
            );
        }
        assert!((tsallis_bern(freq(0.5), order(3.0)) - 0.375).abs() < 1e-15);
    }

    #[test]
    fn monomorphic_is_exactly_zero() {
        for q in DEFAULT_Q_GRID {
            assert_eq!(tsallis_bern(freq(0.0), order(q)), 0.0);
            assert_eq!(tsallis_bern(freq(1.0), order(q)), 0.0);
        }
        assert_eq!(tsallis_bern(freq(0.5), order(2.0)), 0.5);
    }

    #[test]
    fn strictly_positive_inside_open_interval() {
        for p in [f64::MIN_POSITIVE, 1e-300, 2f64.powi(-53), 1.0 - 2f64.powi(-53)] {
            for q in DEFAULT_Q_GRID {
                assert!(
                    tsallis_bern(freq(p), order(q)) > 0.0,
                    "p={p:e} q={q} not positive"
                );
            }
        }
    }

    #[test]
    fn symmetry_is_bitwise_on_exact_complements() {
        // Dyadic frequencies have exactly representable complements, so the
        // two evaluations see the same unordered pair and must agree bitwise.
        for k in 0..=1024u32 {
            let p = f64::from(k) / 1024.0;
            for q in DEFAULT_Q_GRID {
                let s = tsallis_bern(freq(p), order(q));
                let s_flip = tsallis_bern(freq(1.0 - p), order(q));
                assert_eq!(s.to_bits(), s_flip.to_bits(), "p={p} q={q}");
            }
        }
    }

    #[test]
    fn concave_on_grid() {
        // Finite concavity check: mixtures never fall below the chord.
        let grid: Vec<f64> = (0..=20).map(|i| f64::from(i) / 20.0).collect();
        for q in DEFAULT_Q_GRID {
            let kernel = QKernel::new(order(q));
            for &p1 in &grid {
                for &p2 in &grid {
                    for lam in [0.0, 0.25, 0.5, 0.75, 1.0] {
                        let mix = kernel.eval(lam * p1 + (1.0 - lam) * p2);
                        let chord = lam * kernel.eval(p1) + (1.0 - lam) * kernel.eval(p2);
                        assert!(mix >= chord - 1e-12, "q={q} p1={p1} p2={p2} lam={lam}");
                    }
                }
            }
        }
    }

    #[test]
    fn shannon_limit_is_continuous() {
        // Inside the limit window the Shannon branch is taken; just outside
        // it, the general form must still be numerically indistinguishable.
        for p in [0.01, 0.2, 0.5, 0.73] {
            let s = shannon_bern(freq(p));
            for dq in [1e-12, 1e-10, 5e-10] {
                assert_eq!(tsallis_bern(freq(p), order(1.0 + dq)), s);
                assert_eq!(tsallis_bern(freq(p), order(1.0 - dq)), s);
            }
            for dq in [2e-9, 1e-8, 1e-7] {
                assert!((tsallis_bern(freq(p), order(1.0 + dq)) - s).abs() < 1e-6);
                assert!((tsallis_bern(freq(p), order(1.0 - dq)) - s).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn kernel_matches_validated_entry_points() {
        for q in DEFAULT_Q_GRID {
            let kernel = QKernel::new(order(q));
            for p in [0.0, 0.001, 0.25, 0.5, 0.999, 1.0] {
                assert_eq!(kernel.eval(p), tsallis_bern(freq(p), order(q)));
            }
        }
    }

    mod properties {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn symmetric_nonnegative_and_bounded(
                p in 0.0f64..=1.0,
                q in prop_oneof![Just(1.0), 0.01f64..6.0],
            ) {
                let q = order(q);
                let s = tsallis_bern(freq(p), q);
                let s_flip = tsallis_bern(freq(1.0 - p), q);
                prop_assert!(s >= 0.0);
                prop_assert!((s - s_flip).abs() <= 1e-12 * s.abs().max(1.0));
                // The maximum over p is attained at 1/2.
                prop_assert!(s <= QKernel::new(q).max_value() + 1e-12);
            }
        }
    }
}
