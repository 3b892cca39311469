//! Bit-packed haplotype panels.
//!
//! A panel is a dense biallelic matrix: one row per haplotype, one column
//! per locus, one bit per allele (1 = alternate). Rows are packed into `u64`
//! words, least-significant bit first, with a fixed per-row word stride so
//! that row access is a contiguous slice.

use std::collections::HashMap;

use crate::error::{Error, Result};

/// Identity of one haplotype row.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HaplotypeMeta {
    /// Sample the haplotype belongs to.
    pub sample_id: String,
    /// 0 or 1: which of the sample's two haplotypes this row is.
    pub hap_index: u8,
    /// Population label the sample is assigned to.
    pub population: String,
}

/// Identity of one locus column.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LocusMeta {
    /// Chromosome name.
    pub chrom: String,
    /// 1-based base-pair position.
    pub position: u64,
    /// Locus identifier; may be empty.
    pub id: String,
}

/// A validated haplotype panel.
///
/// Invariants enforced at construction:
/// * at least one haplotype row;
/// * `(sample_id, hap_index)` pairs are unique and `hap_index` is 0 or 1;
/// * chromosome blocks are contiguous and positions strictly increase
///   within each block;
/// * padding bits beyond `n_loci` in each row are zero.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HaplotypePanel {
    n_loci: usize,
    words_per_row: usize,
    bits: Vec<u64>,
    haplotypes: Vec<HaplotypeMeta>,
    loci: Vec<LocusMeta>,
    /// Sorted unique population labels.
    pops: Vec<String>,
    /// Ascending row indices per population, parallel to `pops`.
    pop_rows: Vec<Vec<u32>>,
}

/// Number of `u64` words needed for `n_loci` bits.
#[inline]
pub fn words_for(n_loci: usize) -> usize {
    n_loci.div_ceil(64)
}

impl HaplotypePanel {
    /// Number of haplotype rows.
    #[inline]
    pub fn n_haplotypes(&self) -> usize {
        self.haplotypes.len()
    }

    /// Number of locus columns.
    #[inline]
    pub fn n_loci(&self) -> usize {
        self.n_loci
    }

    /// Words per packed row.
    #[inline]
    pub fn words_per_row(&self) -> usize {
        self.words_per_row
    }

    /// Row metadata in row order.
    #[inline]
    pub fn haplotypes(&self) -> &[HaplotypeMeta] {
        &self.haplotypes
    }

    /// Locus metadata in column order.
    #[inline]
    pub fn loci(&self) -> &[LocusMeta] {
        &self.loci
    }

    /// Sorted unique population labels present in the panel.
    #[inline]
    pub fn populations(&self) -> &[String] {
        &self.pops
    }

    /// Ascending row indices of one population, or `None` if absent.
    pub fn population_rows(&self, population: &str) -> Option<&[u32]> {
        let i = self.pops.binary_search_by(|p| p.as_str().cmp(population)).ok()?;
        Some(&self.pop_rows[i])
    }

    /// The packed words of one row.
    #[inline]
    pub fn row_words(&self, row: usize) -> &[u64] {
        let start = row * self.words_per_row;
        &self.bits[start..start + self.words_per_row]
    }

    /// The allele of `row` at `locus`.
    #[inline]
    pub fn allele(&self, row: usize, locus: usize) -> bool {
        debug_assert!(locus < self.n_loci);
        let word = self.row_words(row)[locus / 64];
        (word >> (locus % 64)) & 1 == 1
    }

    /// Adds 1 to `counts[l]` for every alternate allele at locus `l` over
    /// the given rows. Rows may repeat (resampled row multisets).
    ///
    /// `counts` must have length `n_loci`.
    pub fn accumulate_alt_counts(&self, rows: &[u32], counts: &mut [u32]) {
        assert_eq!(counts.len(), self.n_loci);
        for &row in rows {
            let words = self.row_words(row as usize);
            for (w, &word) in words.iter().enumerate() {
                let mut bits = word;
                let base = w * 64;
                while bits != 0 {
                    let b = bits.trailing_zeros() as usize;
                    counts[base + b] += 1;
                    bits &= bits - 1;
                }
            }
        }
    }

    /// Alternate-allele counts per locus for the given rows.
    pub fn alt_counts(&self, rows: &[u32]) -> Vec<u32> {
        let mut counts = vec![0u32; self.n_loci];
        self.accumulate_alt_counts(rows, &mut counts);
        counts
    }

    /// A copy keeping only the loci where `keep` is true.
    ///
    /// `keep` must have length `n_loci`.
    pub fn retain_loci(&self, keep: &[bool]) -> Result<HaplotypePanel> {
        assert_eq!(keep.len(), self.n_loci);
        let kept: Vec<usize> = (0..self.n_loci).filter(|&l| keep[l]).collect();
        let loci: Vec<LocusMeta> = kept.iter().map(|&l| self.loci[l].clone()).collect();
        let mut builder = PanelBuilder::new(loci)?;
        for (row, meta) in self.haplotypes.iter().enumerate() {
            builder.push_row(
                meta.clone(),
                kept.iter().map(|&l| self.allele(row, l)),
            )?;
        }
        builder.finish()
    }
}

/// Incremental panel constructor.
#[derive(Debug)]
pub struct PanelBuilder {
    n_loci: usize,
    words_per_row: usize,
    bits: Vec<u64>,
    haplotypes: Vec<HaplotypeMeta>,
    loci: Vec<LocusMeta>,
    seen: HashMap<(String, u8), ()>,
}

impl PanelBuilder {
    /// Starts a panel over the given loci. Validates locus ordering.
    pub fn new(loci: Vec<LocusMeta>) -> Result<Self> {
        let mut seen_chroms: Vec<&str> = Vec::new();
        for pair in loci.windows(2) {
            let (a, b) = (&pair[0], &pair[1]);
            if a.chrom == b.chrom && b.position <= a.position {
                return Err(Error::Config(format!(
                    "locus positions must strictly increase within a chromosome: \
                     {}:{} followed by {}:{}",
                    a.chrom, a.position, b.chrom, b.position
                )));
            }
        }
        for locus in &loci {
            match seen_chroms.last() {
                Some(&last) if last == locus.chrom => {}
                _ => {
                    if seen_chroms.iter().any(|&c| c == locus.chrom) {
                        return Err(Error::Config(format!(
                            "chromosome {} appears in two separate blocks",
                            locus.chrom
                        )));
                    }
                    seen_chroms.push(&locus.chrom);
                }
            }
        }
        let n_loci = loci.len();
        Ok(PanelBuilder {
            n_loci,
            words_per_row: words_for(n_loci),
            bits: Vec::new(),
            haplotypes: Vec::new(),
            loci,
            seen: HashMap::new(),
        })
    }

    fn check_meta(&mut self, meta: &HaplotypeMeta) -> Result<()> {
        if meta.hap_index > 1 {
            return Err(Error::Config(format!(
                "haplotype index must be 0 or 1, got {} for sample {}",
                meta.hap_index, meta.sample_id
            )));
        }
        let key = (meta.sample_id.clone(), meta.hap_index);
        if self.seen.insert(key, ()).is_some() {
            return Err(Error::Config(format!(
                "duplicate haplotype: sample {} index {}",
                meta.sample_id, meta.hap_index
            )));
        }
        Ok(())
    }

    /// Appends a row from per-locus alleles. The iterator must yield exactly
    /// one allele per locus.
    pub fn push_row(
        &mut self,
        meta: HaplotypeMeta,
        alleles: impl IntoIterator<Item = bool>,
    ) -> Result<()> {
        self.check_meta(&meta)?;
        let start = self.bits.len();
        self.bits.resize(start + self.words_per_row, 0);
        let mut count = 0usize;
        for (l, allele) in alleles.into_iter().enumerate() {
            if l >= self.n_loci {
                return Err(Error::Config(format!(
                    "row for sample {} has more alleles than the {} loci",
                    meta.sample_id, self.n_loci
                )));
            }
            if allele {
                self.bits[start + l / 64] |= 1u64 << (l % 64);
            }
            count += 1;
        }
        if count != self.n_loci {
            return Err(Error::Config(format!(
                "row for sample {} has {} alleles, panel has {} loci",
                meta.sample_id, count, self.n_loci
            )));
        }
        self.haplotypes.push(meta);
        Ok(())
    }

    /// Appends a row already packed as words (LSB-first). Padding bits past
    /// `n_loci` must be zero.
    pub fn push_packed_row(&mut self, meta: HaplotypeMeta, words: &[u64]) -> Result<()> {
        self.check_meta(&meta)?;
        if words.len() != self.words_per_row {
            return Err(Error::Config(format!(
                "packed row has {} words, expected {}",
                words.len(),
                self.words_per_row
            )));
        }
        if !self.n_loci.is_multiple_of(64) {
            if let Some(&last) = words.last() {
                if last >> (self.n_loci % 64) != 0 {
                    return Err(Error::Config(
                        "packed row has nonzero padding bits".into(),
                    ));
                }
            }
        }
        self.bits.extend_from_slice(words);
        self.haplotypes.push(meta);
        Ok(())
    }

    /// Validates and freezes the panel.
    pub fn finish(self) -> Result<HaplotypePanel> {
        if self.haplotypes.is_empty() {
            return Err(Error::Config("panel has no haplotypes".into()));
        }
        let mut by_pop: HashMap<&str, Vec<u32>> = HashMap::new();
        for (row, meta) in self.haplotypes.iter().enumerate() {
            by_pop.entry(&meta.population).or_default().push(row as u32);
        }
        let mut pops: Vec<String> = by_pop.keys().map(|p| p.to_string()).collect();
        pops.sort();
        let pop_rows: Vec<Vec<u32>> = pops.iter().map(|p| by_pop[p.as_str()].clone()).collect();
        Ok(HaplotypePanel {
            n_loci: self.n_loci,
            words_per_row: self.words_per_row,
            bits: self.bits,
            haplotypes: self.haplotypes,
            loci: self.loci,
            pops,
            pop_rows,
        })
    }
}

// ───────────────────────────────────────────────────────────────────────────
