//! Per-locus and genome-wide differentiation statistics.
//!
//! For a locus with group frequencies `p_k` and group weights `w_k`, the
//! order-q diversity splits as
//!
//! ```text
//! s_total  = S_q(Σ_k w_k p_k)        entropy of the pooled frequency
//! s_within = Σ_k w_k S_q(p_k)        average within-group entropy
//! delta    = s_total − s_within      between-group excess (≥ 0 by concavity)
//! fq       = delta / s_total         relative differentiation, in [0, 1]
//! ```
//!
//! `fq` at order 2 is the classical variance-ratio fixation index; at order
//! 1 `delta` is the mutual information (nats) between allele and group
//! label. Genome-wide values are micro-averages: the ratio of the two sums
//! over loci, not the mean of per-locus ratios.
//!
//! Statistics come in three groupings over a panel:
//!
//! * **one-vs-rest**: one focal population against the pooled haplotypes of
//!   the remaining populations of a region, weights (½, ½);
//! * **regional**: every population of a region as its own group with equal
//!   weights 1/K;
//! * **leave-one-out influence**: the change in the regional value when one
//!   population is removed.

use std::cell::OnceCell;

use crate::entropy::{AlleleFreq, QKernel, QOrder, LIMIT_EPS};
use crate::error::{Error, Result};
use crate::panel::HaplotypePanel;
use crate::sum::{CompensatedSum, SUM_CHUNK};

// ── Per-locus frequency tables ─────────────────────────────────────────────

/// Group frequencies and weights at one locus.
///
/// Canonicalized at construction: groups are stored sorted by id, so every
/// statistic is invariant, bit for bit, to the order groups were supplied
/// in. Weights must be strictly positive and sum to 1 within 1e-12.
#[derive(Debug, Clone, PartialEq)]
pub struct LocusFreqTable {
    group_ids: Vec<String>,
    weights: Vec<f64>,
    freqs: Vec<f64>,
}

impl LocusFreqTable {
    /// Builds a table from parallel sequences of ids, weights, and
    /// frequencies.
    pub fn new(
        group_ids: Vec<String>,
        weights: Vec<f64>,
        freqs: Vec<AlleleFreq>,
    ) -> Result<Self> {
        if group_ids.is_empty() {
            return Err(Error::Config("frequency table needs at least one group".into()));
        }
        if group_ids.len() != weights.len() || group_ids.len() != freqs.len() {
            return Err(Error::Config(format!(
                "frequency table fields disagree on group count: {} ids, {} weights, {} freqs",
                group_ids.len(),
                weights.len(),
                freqs.len()
            )));
        }
        if weights.iter().any(|&w| !w.is_finite() || w <= 0.0) {
            return Err(Error::Config("group weights must be finite and > 0".into()));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::Config(format!(
                "group weights must sum to 1 within 1e-12, got {total}"
            )));
        }
        let mut order: Vec<usize> = (0..group_ids.len()).collect();
        order.sort_by(|&a, &b| group_ids[a].cmp(&group_ids[b]));
        if order.windows(2).any(|w| group_ids[w[0]] == group_ids[w[1]]) {
            return Err(Error::Config("duplicate group id in frequency table".into()));
        }
        Ok(LocusFreqTable {
            group_ids: order.iter().map(|&i| group_ids[i].clone()).collect(),
            weights: order.iter().map(|&i| weights[i]).collect(),
            freqs: order.iter().map(|&i| freqs[i].get()).collect(),
        })
    }

    /// Builds a table with equal weights 1/K.
    pub fn equal_weights(group_ids: Vec<String>, freqs: Vec<AlleleFreq>) -> Result<Self> {
        let k = group_ids.len();
        if k == 0 {
            return Err(Error::Config("frequency table needs at least one group".into()));
        }
        Self::new(group_ids, vec![1.0 / k as f64; k], freqs)
    }

    /// Number of groups.
    #[inline]
    pub fn k(&self) -> usize {
        self.group_ids.len()
    }

    /// Group ids in canonical (sorted) order.
    #[inline]
    pub fn group_ids(&self) -> &[String] {
        &self.group_ids
    }

    /// Weights, parallel to [`group_ids`](Self::group_ids).
    #[inline]
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Frequencies, parallel to [`group_ids`](Self::group_ids).
    #[inline]
    pub fn freqs(&self) -> &[f64] {
        &self.freqs
    }

    /// The weighted pooled frequency `Σ_k w_k p_k`.
    #[must_use]
    pub fn pooled(&self) -> AlleleFreq {
        let mut sum = 0.0;
        for (w, p) in self.weights.iter().zip(&self.freqs) {
            sum += w * p;
        }
        AlleleFreq::new(sum.clamp(0.0, 1.0)).expect("pooled frequency in range")
    }
}

// ── Per-locus statistics ───────────────────────────────────────────────────

/// The order-q diversity split at one locus.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LocusDiff {
    /// Entropy of the pooled frequency.
    pub s_total: f64,
    /// Weighted mean within-group entropy.
    pub s_within: f64,
    /// `s_total − s_within`.
    pub delta: f64,
    /// `delta / s_total`; `None` when `s_total` is 0 (monomorphic pool).
    pub fq: Option<f64>,
}

#[inline]
fn diff_from_parts(kernel: &QKernel, pooled: f64, s_within: f64) -> LocusDiff {
    let s_total = kernel.eval(pooled);
    let delta = s_total - s_within;
    let fq = (s_total > 0.0).then(|| delta / s_total);
    LocusDiff {
        s_total,
        s_within,
        delta,
        fq,
    }
}

/// Splits one locus's diversity at order `q`.
///
/// ```
/// use fqlens_core::entropy::{AlleleFreq, QOrder};
/// use fqlens_core::freq::{locus_diff, LocusFreqTable};
/// let t = LocusFreqTable::equal_weights(
///     vec!["a".into(), "b".into()],
///     vec![AlleleFreq::new(0.2).unwrap(), AlleleFreq::new(0.4).unwrap()],
/// )
/// .unwrap();
/// let d = locus_diff(&t, QOrder::new(2.0).unwrap());
/// assert!((d.delta - 0.02).abs() < 1e-12);
/// ```
#[must_use]
pub fn locus_diff(table: &LocusFreqTable, q: QOrder) -> LocusDiff {
    let kernel = QKernel::new(q);
    let mut s_within = 0.0;
    for (w, p) in table.weights.iter().zip(&table.freqs) {
        s_within += w * kernel.eval(*p);
    }
    diff_from_parts(&kernel, table.pooled().get(), s_within)
}

/// The classical variance-ratio fixation index
/// `Var_w(p) / (p̄ (1 − p̄))`, an independent formulation of the order-2
/// relative statistic.
///
/// Errors when the pooled frequency is 0 or 1.
pub fn fst_classic(table: &LocusFreqTable) -> Result<f64> {
    let p_bar = table.pooled().get();
    let denom = p_bar * (1.0 - p_bar);
    if denom <= 0.0 {
        return Err(Error::UndefinedStatistic(
            "variance-ratio index needs a polymorphic pooled locus".into(),
        ));
    }
    let mut var = 0.0;
    for (w, p) in table.weights.iter().zip(&table.freqs) {
        let d = p - p_bar;
        var += w * d * d;
    }
    Ok(var / denom)
}

/// Mutual information (nats) between the allele and the group label:
/// `H(X) − Σ_k w_k H(X | group k)`, an independent formulation of the
/// order-1 absolute statistic.
#[must_use]
pub fn mutual_information(table: &LocusFreqTable) -> f64 {
    let shannon = QKernel::new(QOrder::new(1.0).expect("valid order"));
    let mut s_within = 0.0;
    for (w, p) in table.weights.iter().zip(&table.freqs) {
        s_within += w * shannon.eval(*p);
    }
    shannon.eval(table.pooled().get()) - s_within
}

// ── Micro-averaged aggregates ──────────────────────────────────────────────

/// A genome-wide micro-average together with its locus bookkeeping.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MicroAverage {
    /// `Σ_ℓ delta / Σ_ℓ s_total` over usable loci.
    pub value: f64,
    /// Loci with a polymorphic pool (`s_total > 0`).
    pub loci_used: usize,
    /// Loci skipped as monomorphic in the pool; they contribute 0 to both
    /// sums.
    pub loci_skipped: usize,
}

/// Accumulated sums for a micro-average, merged in fixed chunk order.
#[derive(Debug, Clone, Copy, Default)]
struct MicroSums {
    delta: CompensatedSum,
    total: CompensatedSum,
    used: usize,
    skipped: usize,
}

impl MicroSums {
    fn add(&mut self, term: (f64, f64)) {
        let (delta, s_total) = term;
        if s_total > 0.0 {
            self.delta.add(delta);
            self.total.add(s_total);
            self.used += 1;
        } else {
            self.skipped += 1;
        }
    }

    fn merge(&mut self, other: MicroSums) {
        self.delta.merge(other.delta);
        self.total.merge(other.total);
        self.used += other.used;
        self.skipped += other.skipped;
    }

    fn finish(self, what: &str) -> Result<MicroAverage> {
        if self.used == 0 {
            return Err(Error::UndefinedStatistic(format!(
                "{what}: every locus is monomorphic in the pool"
            )));
        }
        Ok(MicroAverage {
            value: self.delta.value() / self.total.value(),
            loci_used: self.used,
            loci_skipped: self.skipped,
        })
    }
}

/// Evaluates `term(locus) -> (delta, s_total)` over all loci and reduces in
/// fixed-size chunks. With the `parallel` feature the chunks run on worker
/// threads; merge order is chunk order either way, so the result is
/// bit-identical no matter how many workers ran.
fn micro_accumulate(n_loci: usize, term: impl Fn(usize) -> (f64, f64) + Sync) -> MicroSums {
    let chunk_sums = |c: usize| {
        let start = c * SUM_CHUNK;
        let end = (start + SUM_CHUNK).min(n_loci);
        let mut sums = MicroSums::default();
        for l in start..end {
            sums.add(term(l));
        }
        sums
    };
    let n_chunks = n_loci.div_ceil(SUM_CHUNK);
    let mut total = MicroSums::default();
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        let chunks: Vec<MicroSums> = (0..n_chunks).into_par_iter().map(chunk_sums).collect();
        for sums in chunks {
            total.merge(sums);
        }
    }
    #[cfg(not(feature = "parallel"))]
    for c in 0..n_chunks {
        total.merge(chunk_sums(c));
    }
    total
}

/// Micro-average over already-computed locus splits: ratio of the delta sum
/// to the total-entropy sum, taken in sequence order with the same chunked
/// compensated accumulation the panel-level statistics use.
///
/// Errors when every locus has `s_total = 0`.
pub fn micro_average(diffs: &[LocusDiff]) -> Result<f64> {
    let sums = micro_accumulate(diffs.len(), |l| (diffs[l].delta, diffs[l].s_total));
    Ok(sums.finish("micro-average")?.value)
}

// ── Population row sets over a panel ───────────────────────────────────────

/// Per-population haplotype-row multisets drawn from one panel: the unit
/// every panel-level statistic is evaluated on.
///
/// Populations are held in sorted label order; rows may repeat (bootstrap
/// replicates are row multisets). Allele counts are computed once on first
/// use and shared by all statistics evaluated on the same selection.
pub struct PopRows<'p> {
    panel: &'p HaplotypePanel,
    pops: Vec<String>,
    rows: Vec<Vec<u32>>,
    counts: OnceCell<RegionCounts>,
}

/// Alternate-allele counts per population per locus.
#[derive(Debug, Clone)]
struct RegionCounts {
    /// Haplotypes per population.
    n: Vec<u32>,
    /// `alt[k][l]`: alternate alleles in population `k` at locus `l`.
    alt: Vec<Vec<u32>>,
}

impl<'p> PopRows<'p> {
    /// Selects the full membership of each population in `region`.
    ///
    /// The region must be non-empty, free of duplicates, and every label
    /// must exist in the panel.
    pub fn full(panel: &'p HaplotypePanel, region: &[String]) -> Result<Self> {
        let pops = validate_region(panel, region)?;
        let rows = pops
            .iter()
            .map(|p| panel.population_rows(p).expect("validated").to_vec())
            .collect();
        Ok(PopRows {
            panel,
            pops,
            rows,
            counts: OnceCell::new(),
        })
    }

    /// Wraps explicit row multisets, one per population label.
    ///
    /// `pops` must be sorted, unique, and present in the panel; `rows` is
    /// parallel to `pops` and each multiset must be non-empty.
    pub fn with_rows(
        panel: &'p HaplotypePanel,
        pops: Vec<String>,
        rows: Vec<Vec<u32>>,
    ) -> Result<Self> {
        if pops.is_empty() {
            return Err(Error::Config("row selection needs at least one population".into()));
        }
        if pops.len() != rows.len() {
            return Err(Error::Config(format!(
                "{} populations but {} row sets",
                pops.len(),
                rows.len()
            )));
        }
        if pops.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Config(
                "row selection populations must be sorted and unique".into(),
            ));
        }
        for (pop, rows) in pops.iter().zip(&rows) {
            if panel.population_rows(pop).is_none() {
                return Err(Error::Config(format!("population {pop} not in panel")));
            }
            if rows.is_empty() {
                return Err(Error::Config(format!("population {pop} has no rows selected")));
            }
            if let Some(&bad) = rows.iter().find(|&&r| r as usize >= panel.n_haplotypes()) {
                return Err(Error::Config(format!(
                    "row {bad} out of range for panel with {} haplotypes",
                    panel.n_haplotypes()
                )));
            }
        }
        Ok(PopRows {
            panel,
            pops,
            rows,
            counts: OnceCell::new(),
        })
    }

    /// The underlying panel.
    #[inline]
    pub fn panel(&self) -> &'p HaplotypePanel {
        self.panel
    }

    /// Sorted population labels of the selection.
    #[inline]
    pub fn populations(&self) -> &[String] {
        &self.pops
    }

    /// Number of populations.
    #[inline]
    pub fn k(&self) -> usize {
        self.pops.len()
    }

    /// Number of selected rows per population, parallel to `populations()`.
    pub fn selection_sizes(&self) -> Vec<usize> {
        self.rows.iter().map(Vec::len).collect()
    }

    fn counts(&self) -> &RegionCounts {
        self.counts.get_or_init(|| RegionCounts {
            n: self.rows.iter().map(|r| r.len() as u32).collect(),
            alt: self
                .rows
                .iter()
                .map(|r| self.panel.alt_counts(r))
                .collect(),
        })
    }

    fn pop_index(&self, label: &str) -> Result<usize> {
        self.pops
            .binary_search_by(|p| p.as_str().cmp(label))
            .map_err(|_| Error::Config(format!("population {label} not in the selection")))
    }

    /// A selection narrowed to the named populations, keeping each one's
    /// current row multiset. The subset may come in any order but must be
    /// duplicate-free and drawn from this selection. Already-computed
    /// counts carry over.
    pub fn restrict(&self, subset: &[String]) -> Result<PopRows<'p>> {
        let mut keep: Vec<usize> = subset
            .iter()
            .map(|p| self.pop_index(p))
            .collect::<Result<_>>()?;
        keep.sort_unstable();
        if keep.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::Config("subset lists a population twice".into()));
        }
        let sub = PopRows {
            panel: self.panel,
            pops: keep.iter().map(|&i| self.pops[i].clone()).collect(),
            rows: keep.iter().map(|&i| self.rows[i].clone()).collect(),
            counts: OnceCell::new(),
        };
        if let Some(c) = self.counts.get() {
            let reduced = RegionCounts {
                n: keep.iter().map(|&i| c.n[i]).collect(),
                alt: keep.iter().map(|&i| c.alt[i].clone()).collect(),
            };
            sub.counts.set(reduced).ok();
        }
        Ok(sub)
    }

    /// A selection over the same rows minus one population. Counts are not
    /// recomputed; the reduced selection shares this one's count arrays.
    fn without(&self, drop: usize) -> PopRows<'p> {
        let keep = |i: &usize| *i != drop;
        let sub = PopRows {
            panel: self.panel,
            pops: (0..self.k()).filter(keep).map(|i| self.pops[i].clone()).collect(),
            rows: (0..self.k()).filter(keep).map(|i| self.rows[i].clone()).collect(),
            counts: OnceCell::new(),
        };
        if let Some(c) = self.counts.get() {
            let reduced = RegionCounts {
                n: (0..self.k()).filter(keep).map(|i| c.n[i]).collect(),
                alt: (0..self.k()).filter(keep).map(|i| c.alt[i].clone()).collect(),
            };
            sub.counts.set(reduced).ok();
        }
        sub
    }
}

fn validate_region(panel: &HaplotypePanel, region: &[String]) -> Result<Vec<String>> {
    if region.is_empty() {
        return Err(Error::Config("region has no populations".into()));
    }
    let mut pops: Vec<String> = region.to_vec();
    pops.sort();
    if pops.windows(2).any(|w| w[0] == w[1]) {
        return Err(Error::Config("region lists a population twice".into()));
    }
    for pop in &pops {
        if panel.population_rows(pop).is_none() {
            return Err(Error::Config(format!("population {pop} not in panel")));
        }
    }
    Ok(pops)
}

// ── One-vs-rest ────────────────────────────────────────────────────────────

/// Per-locus two-group tables for one population against the pooled rest of
/// its region.
///
/// Group A is the focal population's haplotypes; group B pools the
/// haplotypes of every other population in the region (allele-count ratio,
/// not a mean of population frequencies). Weights are (½, ½). The B-side
/// group id is `rest(<focal>)`.
pub fn ovr_tables(
    panel: &HaplotypePanel,
    focal: &str,
    region: &[String],
) -> Result<Vec<LocusFreqTable>> {
    let rows = PopRows::full(panel, region)?;
    let split = OvrSplit::new(&rows, focal)?;
    let rest_id = format!("rest({focal})");
    (0..panel.n_loci())
        .map(|l| {
            let (p_a, p_b) = split.freqs_at(l);
            LocusFreqTable::new(
                vec![focal.to_string(), rest_id.clone()],
                vec![0.5, 0.5],
                vec![
                    AlleleFreq::new(p_a).expect("count ratio in range"),
                    AlleleFreq::new(p_b).expect("count ratio in range"),
                ],
            )
        })
        .collect()
}

/// Focal-vs-pooled-rest counts derived from a selection.
struct OvrSplit<'a> {
    focal_alt: &'a [u32],
    rest_alt: Vec<u32>,
    n_focal: f64,
    n_rest: f64,
}

impl<'a> OvrSplit<'a> {
    fn new(rows: &'a PopRows<'_>, focal: &str) -> Result<Self> {
        if rows.k() < 2 {
            return Err(Error::Config(
                "one-vs-rest needs a region with at least 2 populations".into(),
            ));
        }
        let f = rows.pop_index(focal)?;
        let counts = rows.counts();
        let n_loci = rows.panel.n_loci();
        let mut rest_alt = vec![0u32; n_loci];
        let mut n_rest = 0u64;
        for k in 0..rows.k() {
            if k == f {
                continue;
            }
            n_rest += u64::from(counts.n[k]);
            for (r, a) in rest_alt.iter_mut().zip(&counts.alt[k]) {
                *r += a;
            }
        }
        Ok(OvrSplit {
            focal_alt: &counts.alt[f],
            rest_alt,
            n_focal: f64::from(counts.n[f]),
            n_rest: n_rest as f64,
        })
    }

    #[inline]
    fn freqs_at(&self, l: usize) -> (f64, f64) {
        (
            f64::from(self.focal_alt[l]) / self.n_focal,
            f64::from(self.rest_alt[l]) / self.n_rest,
        )
    }
}

/// Genome-wide micro-averaged one-vs-rest statistic at order `q` on a
/// selection.
pub fn ovr_micro_fq(rows: &PopRows<'_>, focal: &str, q: QOrder) -> Result<MicroAverage> {
    let split = OvrSplit::new(rows, focal)?;
    let kernel = QKernel::new(q);
    micro_accumulate(rows.panel.n_loci(), |l| {
        let (p_a, p_b) = split.freqs_at(l);
        let s_within = 0.5 * kernel.eval(p_a) + 0.5 * kernel.eval(p_b);
        let d = diff_from_parts(&kernel, 0.5 * (p_a + p_b), s_within);
        (d.delta, d.s_total)
    })
    .finish("one-vs-rest micro-average")
}

// ── Regional and leave-one-out ─────────────────────────────────────────────

/// Genome-wide regional statistic at order `q`: every population of the
/// selection is one group with weight 1/K, micro-averaged over loci.
///
/// A single-population selection returns exactly 0 (within-group equals
/// total by construction); its locus tallies still report how many loci had
/// a polymorphic pool.
pub fn regional_fq(rows: &PopRows<'_>, q: QOrder) -> Result<MicroAverage> {
    let counts = rows.counts();
    let k = rows.k();
    let kernel = QKernel::new(q);
    let inv_n: Vec<f64> = counts.n.iter().map(|&n| 1.0 / f64::from(n)).collect();
    let k_inv = 1.0 / k as f64;
    let sums = micro_accumulate(rows.panel.n_loci(), |l| {
        let mut freq_sum = 0.0;
        let mut within_sum = 0.0;
        for (alt, inv) in counts.alt.iter().zip(&inv_n) {
            let p = f64::from(alt[l]) * inv;
            freq_sum += p;
            within_sum += kernel.eval(p);
        }
        let pooled = (freq_sum * k_inv).clamp(0.0, 1.0);
        let d = diff_from_parts(&kernel, pooled, within_sum * k_inv);
        (d.delta, d.s_total)
    });
    if k == 1 {
        // Within equals total; the ratio is identically 0 wherever defined.
        return Ok(MicroAverage {
            value: 0.0,
            loci_used: sums.used,
            loci_skipped: sums.skipped,
        });
    }
    sums.finish("regional micro-average")
}

/// Leave-one-out influence of `candidate` at order `q`: the regional value
/// of the full selection minus the regional value with `candidate` removed
/// (equal weights 1/K and 1/(K−1) respectively).
///
/// Positive values mark the candidate as a driver of regional structure;
/// negative values mean it homogenizes the region. The selection must have
/// at least 2 populations; a reduced singleton contributes 0.
pub fn loo_influence(rows: &PopRows<'_>, candidate: &str, q: QOrder) -> Result<f64> {
    if rows.k() < 2 {
        return Err(Error::Config(
            "leave-one-out needs a region with at least 2 populations".into(),
        ));
    }
    let c = rows.pop_index(candidate)?;
    let full = regional_fq(rows, q)?;
    let reduced = regional_fq(&rows.without(c), q)?;
    Ok(full.value - reduced.value)
}

// ── Spectra over a grid of orders ──────────────────────────────────────────

/// Which statistic a spectrum sweeps.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SpectrumMode<'a> {
    /// One-vs-rest micro-average for a focal population.
    Ovr { focal: &'a str },
    /// Regional micro-average over the whole selection.
    Regional,
    /// Leave-one-out influence of a candidate population.
    Loo { candidate: &'a str },
}

/// A statistic evaluated over a grid of orders, with optional bootstrap
/// bands.
#[derive(Debug, Clone, PartialEq)]
pub struct FqSpectrum {
    /// Population, candidate, or region label the spectrum belongs to.
    pub label: String,
    /// Strictly increasing grid of orders.
    pub q_grid: Vec<f64>,
    /// Statistic value per grid order.
    pub values: Vec<f64>,
    /// Lower confidence bound per order, when resampled.
    pub ci_low: Option<Vec<f64>>,
    /// Upper confidence bound per order, when resampled.
    pub ci_high: Option<Vec<f64>>,
}

impl FqSpectrum {
    /// Builds a point-estimate spectrum, validating the grid.
    pub fn new(label: impl Into<String>, q_grid: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        validate_grid(&q_grid)?;
        if values.len() != q_grid.len() {
            return Err(Error::Config(format!(
                "spectrum has {} values for {} grid orders",
                values.len(),
                q_grid.len()
            )));
        }
        Ok(FqSpectrum {
            label: label.into(),
            q_grid,
            values,
            ci_low: None,
            ci_high: None,
        })
    }

    /// Attaches confidence bands, validating lengths.
    pub fn with_bands(mut self, ci_low: Vec<f64>, ci_high: Vec<f64>) -> Result<Self> {
        if ci_low.len() != self.q_grid.len() || ci_high.len() != self.q_grid.len() {
            return Err(Error::Config("confidence bands must match the grid length".into()));
        }
        self.ci_low = Some(ci_low);
        self.ci_high = Some(ci_high);
        Ok(self)
    }
}

/// Validates a grid of orders: non-empty, all valid, strictly increasing.
pub fn validate_grid(q_grid: &[f64]) -> Result<()> {
    if q_grid.is_empty() {
        return Err(Error::Config("order grid is empty".into()));
    }
    for &q in q_grid {
        QOrder::new(q)?;
    }
    if q_grid.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::Config("order grid must be strictly increasing".into()));
    }
    Ok(())
}

/// Evaluates one statistic over a grid of orders on the same selection.
pub fn fq_spectrum(
    rows: &PopRows<'_>,
    mode: SpectrumMode<'_>,
    q_grid: &[f64],
    label: impl Into<String>,
) -> Result<FqSpectrum> {
    validate_grid(q_grid)?;
    let values = q_grid
        .iter()
        .map(|&q| {
            let q = QOrder::new(q).expect("validated grid");
            match mode {
                SpectrumMode::Ovr { focal } => Ok(ovr_micro_fq(rows, focal, q)?.value),
                SpectrumMode::Regional => Ok(regional_fq(rows, q)?.value),
                SpectrumMode::Loo { candidate } => loo_influence(rows, candidate, q),
            }
        })
        .collect::<Result<Vec<f64>>>()?;
    FqSpectrum::new(label, q_grid.to_vec(), values)
}

/// The drop of a spectrum across the diagnostic interval: the value at
/// order 1 minus the value at order 2.
///
/// Errors when the grid lacks either order.
pub fn slope_diagnostic(spectrum: &FqSpectrum) -> Result<f64> {
    let find = |target: f64| {
        spectrum
            .q_grid
            .iter()
            .position(|&q| (q - target).abs() < LIMIT_EPS)
            .ok_or_else(|| {
                Error::Config(format!("spectrum grid lacks order {target}, cannot take the drop"))
            })
    };
    let i1 = find(1.0)?;
    let i2 = find(2.0)?;
    Ok(spectrum.values[i1] - spectrum.values[i2])
}

// ───────────────────────────────────────────────────────────────────────────
