//! Gamete formation: sex-specific crossover placement over a genetic map,
//! plus the packed per-generation genome store.

use rand::Rng;
use rand_distr::{Distribution, Poisson};

use crate::error::{Error, Result};
use crate::io::genmap::GeneticMap;
use crate::panel::{words_for, LocusMeta};

use super::pedigree::{IndivId, Sex};

/// Per-locus genetic-map positions for one chromosome block of the locus
/// list, one array per sex.
#[derive(Debug)]
struct ChromBlock {
    /// Index of the block's first locus in the locus list.
    start: usize,
    /// `cm[sex][i]` is the map position of locus `start + i`.
    cm: [Vec<f64>; 2],
}

impl ChromBlock {
    fn cm(&self, sex: Sex) -> &[f64] {
        match sex {
            Sex::Female => &self.cm[0],
            Sex::Male => &self.cm[1],
        }
    }
}

/// Precomputed recombination layout for a fixed locus list: map positions of
/// every locus under the female and male maps, grouped by chromosome.
#[derive(Debug)]
pub struct RecombEngine {
    blocks: Vec<ChromBlock>,
    words_per_row: usize,
    n_loci: usize,
}

impl RecombEngine {
    /// Resolves every locus against the map. Loci must be ordered in
    /// contiguous chromosome blocks with increasing positions (the panel
    /// ordering); a locus on a chromosome the map does not cover is a
    /// configuration error.
    pub fn new(loci: &[LocusMeta], map: &GeneticMap) -> Result<Self> {
        if loci.is_empty() {
            return Err(Error::Config("recombination needs at least one locus".into()));
        }
        let mut blocks: Vec<ChromBlock> = Vec::new();
        let mut start = 0usize;
        while start < loci.len() {
            let chrom = &loci[start].chrom;
            let mut end = start + 1;
            while end < loci.len() && loci[end].chrom == *chrom {
                end += 1;
            }
            let mut cm = [Vec::with_capacity(end - start), Vec::with_capacity(end - start)];
            for locus in &loci[start..end] {
                for (slot, sex) in [(0, Sex::Female), (1, Sex::Male)] {
                    cm[slot].push(map.cm_at(chrom, locus.position, sex)?);
                }
            }
            blocks.push(ChromBlock { start, cm });
            start = end;
        }
        Ok(RecombEngine {
            blocks,
            words_per_row: words_for(loci.len()),
            n_loci: loci.len(),
        })
    }

    /// Number of packed words per haplotype row.
    pub fn words_per_row(&self) -> usize {
        self.words_per_row
    }

    /// Writes one gamete of a parent into `out` (which must hold
    /// [`words_per_row`](Self::words_per_row) words; trailing padding is
    /// cleared). The gamete starts from one uniformly chosen parental
    /// haplotype and switches haplotypes at each crossover. Each chromosome
    /// receives a Poisson-distributed crossover count with mean equal to its
    /// map length in Morgans under `parent_sex`'s map, with positions placed
    /// uniformly on the map-distance axis.
    pub fn make_gamete<R: Rng + ?Sized>(
        &self,
        hap0: &[u64],
        hap1: &[u64],
        parent_sex: Sex,
        rng: &mut R,
        out: &mut [u64],
    ) {
        debug_assert_eq!(hap0.len(), self.words_per_row);
        debug_assert_eq!(hap1.len(), self.words_per_row);
        debug_assert_eq!(out.len(), self.words_per_row);

        let mut current: usize = rng.random_range(0..2);
        // Locus indices at which the source haplotype flips.
        let mut switches: Vec<usize> = Vec::new();
        let mut positions: Vec<f64> = Vec::new();
        for block in &self.blocks {
            let cm = block.cm(parent_sex);
            let (lo, hi) = (cm[0], cm[cm.len() - 1]);
            let span = hi - lo;
            if span <= 0.0 {
                continue;
            }
            let n = Poisson::new(span / 100.0)
                .expect("span is positive and finite")
                .sample(rng) as u64;
            positions.clear();
            positions.extend((0..n).map(|_| rng.random_range(lo..hi)));
            positions.sort_unstable_by(f64::total_cmp);
            // A crossover at map position x separates the loci at or before
            // x from those strictly after it.
            let mut from = 0usize;
            for &x in &positions {
                let rel = from + cm[from..].partition_point(|&c| c <= x);
                switches.push(block.start + rel);
                from = rel;
            }
        }

        let sources = [hap0, hap1];
        let mut seg_start = 0usize;
        for &s in &switches {
            copy_bit_range(sources[current], out, seg_start, s);
            current ^= 1;
            seg_start = s;
        }
        copy_bit_range(sources[current], out, seg_start, self.n_loci);
        // Clear padding bits so packed rows stay canonical.
        if self.n_loci % 64 != 0 && !out.is_empty() {
            let last = out.len() - 1;
            out[last] &= (1u64 << (self.n_loci % 64)) - 1;
        }
    }
}

/// Copies bits `[start, end)` from `src` into `dst`, leaving other bits of
/// `dst` untouched. Rows are LSB-first packed.
fn copy_bit_range(src: &[u64], dst: &mut [u64], start: usize, end: usize) {
    if start >= end {
        return;
    }
    let (first_word, first_bit) = (start / 64, start % 64);
    let (last_word, last_bit) = ((end - 1) / 64, (end - 1) % 64 + 1);
    if first_word == last_word {
        let mask = range_mask(first_bit, last_bit);
        dst[first_word] = (dst[first_word] & !mask) | (src[first_word] & mask);
        return;
    }
    let head = range_mask(first_bit, 64);
    dst[first_word] = (dst[first_word] & !head) | (src[first_word] & head);
    dst[(first_word + 1)..last_word].copy_from_slice(&src[(first_word + 1)..last_word]);
    let tail = range_mask(0, last_bit);
    dst[last_word] = (dst[last_word] & !tail) | (src[last_word] & tail);
}

/// Mask with bits `[lo, hi)` set, `0 <= lo < hi <= 64`.
fn range_mask(lo: usize, hi: usize) -> u64 {
    let upper = if hi == 64 { u64::MAX } else { (1u64 << hi) - 1 };
    upper & !((1u64 << lo) - 1)
}

/// Packed haplotypes for the individuals of one generation: two rows per
/// individual, indexed by their pedigree ids (which are contiguous within a
/// generation).
pub struct GenomePool {
    words_per_row: usize,
    first_index: usize,
    bits: Vec<u64>,
}

impl GenomePool {
    /// An empty pool whose first individual will be the one with pedigree
    /// storage index `first_index`.
    pub fn new(words_per_row: usize, first_index: usize) -> Self {
        GenomePool {
            words_per_row,
            first_index,
            bits: Vec::new(),
        }
    }

    pub fn words_per_row(&self) -> usize {
        self.words_per_row
    }

    /// Number of individuals stored.
    pub fn len(&self) -> usize {
        if self.words_per_row == 0 {
            0
        } else {
            self.bits.len() / (2 * self.words_per_row)
        }
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }

    /// Appends zeroed rows for the next individual, which must have been
    /// assigned pedigree index `first_index + len()`. Returns mutable views
    /// of its two haplotype rows for filling.
    pub fn push_individual(&mut self) -> (&mut [u64], &mut [u64]) {
        let at = self.bits.len();
        self.bits.resize(at + 2 * self.words_per_row, 0);
        let (a, b) = self.bits[at..].split_at_mut(self.words_per_row);
        (a, b)
    }

    fn offset(&self, id: IndivId) -> usize {
        let rel = id
            .index()
            .checked_sub(self.first_index)
            .expect("id precedes this pool's generation");
        assert!(rel < self.len(), "id beyond this pool's generation");
        rel * 2 * self.words_per_row
    }

    /// The two haplotype rows of `id`.
    pub fn haplotypes(&self, id: IndivId) -> (&[u64], &[u64]) {
        let at = self.offset(id);
        (
            &self.bits[at..at + self.words_per_row],
            &self.bits[at + self.words_per_row..at + 2 * self.words_per_row],
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::io::genmap::GeneticMap;
    use crate::rng::{stream_rng, StreamPurpose};

    fn loci(chrom: &str, positions: &[u64]) -> Vec<LocusMeta> {
        positions
            .iter()
            .map(|&p| LocusMeta {
                chrom: chrom.to_string(),
                position: p,
                id: String::new(),
            })
            .collect()
    }

    fn rng(ix: u64) -> rand_chacha::ChaCha8Rng {
        stream_rng(7, StreamPurpose::Reproduction, 0, ix)
    }

    #[test]
    fn copy_bit_range_matches_per_bit_reference() {
        let mut r = rng(0);
        for case in 0..200u64 {
            let n_words = 1 + (case as usize % 4);
            let src: Vec<u64> = (0..n_words).map(|_| r.random()).collect();
            let mut dst: Vec<u64> = (0..n_words).map(|_| r.random()).collect();
            let n_bits = n_words * 64;
            let a = r.random_range(0..n_bits);
            let b = r.random_range(0..=n_bits);
            let (start, end) = (a.min(b), a.max(b));
            let mut expect = dst.clone();
            for i in start..end {
                let bit = (src[i / 64] >> (i % 64)) & 1;
                expect[i / 64] = (expect[i / 64] & !(1 << (i % 64))) | (bit << (i % 64));
            }
            copy_bit_range(&src, &mut dst, start, end);
            assert_eq!(dst, expect, "range {start}..{end} over {n_words} words");
        }
    }

    #[test]
    fn engine_rejects_unmapped_chromosome() {
        let map = GeneticMap::uniform(&[("1".to_string(), 1_000_000)], 1.0).unwrap();
        let err = RecombEngine::new(&loci("2", &[100, 200]), &map).unwrap_err();
        assert!(matches!(err, Error::Config(_)), "{err}");
    }

    #[test]
    fn zero_length_map_transmits_one_haplotype_intact() {
        // A flat map: every locus sits at the same map position, so no
        // crossovers can fall between loci.
        let map = GeneticMap::uniform(&[("1".to_string(), 4_000_000)], 0.0).unwrap();
        let positions: Vec<u64> = (0..130).map(|i| 1000 + i * 10_000).collect();
        let ls = loci("1", &positions);
        let engine = RecombEngine::new(&ls, &map).unwrap();
        let mut r = rng(1);
        let hap0: Vec<u64> = (0..engine.words_per_row()).map(|_| r.random()).collect();
        let hap1: Vec<u64> = (0..engine.words_per_row()).map(|_| r.random()).collect();
        let mask = (1u64 << (130 % 64)) - 1;
        let trim = |h: &[u64]| {
            let mut t = h.to_vec();
            *t.last_mut().unwrap() &= mask;
            t
        };
        let (mut saw0, mut saw1) = (false, false);
        for _ in 0..64 {
            let mut out = vec![0u64; engine.words_per_row()];
            engine.make_gamete(&hap0, &hap1, Sex::Female, &mut r, &mut out);
            if out == trim(&hap0) {
                saw0 = true;
            } else if out == trim(&hap1) {
                saw1 = true;
            } else {
                panic!("gamete is not a whole parental haplotype");
            }
        }
        assert!(saw0 && saw1, "both starting haplotypes should occur");
    }

    #[test]
    fn homozygous_parent_transmits_its_haplotype() {
        let map = GeneticMap::uniform(&[("1".to_string(), 10_000_000)], 2.0).unwrap();
        let positions: Vec<u64> = (0..200).map(|i| 1 + i * 50_000).collect();
        let ls = loci("1", &positions);
        let engine = RecombEngine::new(&ls, &map).unwrap();
        let mut r = rng(2);
        let mut hap: Vec<u64> = (0..engine.words_per_row()).map(|_| r.random()).collect();
        *hap.last_mut().unwrap() &= (1u64 << (200 % 64)) - 1;
        for _ in 0..16 {
            let mut out = vec![0u64; engine.words_per_row()];
            engine.make_gamete(&hap, &hap, Sex::Male, &mut r, &mut out);
            assert_eq!(out, hap);
        }
    }

    #[test]
    fn crossover_count_tracks_map_length() {
        // 100 cM chromosome: one crossover per gamete on average. Parents
        // carry all-zero vs all-one haplotypes so each odd-parity interval
        // shows up as a bit flip between adjacent loci.
        let n_loci = 101usize;
        let map = GeneticMap::uniform(&[("1".to_string(), 100_000_000)], 1.0).unwrap();
        let positions: Vec<u64> = (0..n_loci as u64).map(|i| i * 1_000_000 + 1).collect();
        let ls = loci("1", &positions);
        let engine = RecombEngine::new(&ls, &map).unwrap();
        let hap0 = vec![0u64; engine.words_per_row()];
        let mut hap1 = vec![u64::MAX; engine.words_per_row()];
        *hap1.last_mut().unwrap() = (1u64 << (n_loci % 64)) - 1;
        let mut r = rng(3);
        let reps = 4000;
        let mut flips = 0usize;
        let mut starts_one = 0usize;
        for _ in 0..reps {
            let mut out = vec![0u64; engine.words_per_row()];
            engine.make_gamete(&hap0, &hap1, Sex::Female, &mut r, &mut out);
            let bit = |i: usize| (out[i / 64] >> (i % 64)) & 1;
            starts_one += bit(0) as usize;
            flips += (1..n_loci).filter(|&i| bit(i) != bit(i - 1)).count();
        }
        let mean_flips = flips as f64 / reps as f64;
        // Observable flips slightly undercount crossovers (even numbers in
        // one interval cancel), so allow a band around the Poisson mean 1.
        assert!(
            (0.85..=1.1).contains(&mean_flips),
            "mean observed crossovers {mean_flips}"
        );
        let frac = starts_one as f64 / reps as f64;
        assert!((0.45..=0.55).contains(&frac), "starting haplotype fraction {frac}");
    }

    #[test]
    fn gametes_are_deterministic_for_a_fixed_stream() {
        let map = GeneticMap::uniform(&[("1".to_string(), 50_000_000), ("2".to_string(), 30_000_000)], 1.5)
            .unwrap();
        let mut ls = loci("1", &(0..80).map(|i| 1 + i * 600_000).collect::<Vec<_>>());
        ls.extend(loci("2", &(0..50).map(|i| 1 + i * 500_000).collect::<Vec<_>>()));
        let engine = RecombEngine::new(&ls, &map).unwrap();
        let mut r1 = rng(9);
        let mut r2 = rng(9);
        let mut hr = rng(10);
        let hap0: Vec<u64> = (0..engine.words_per_row()).map(|_| hr.random()).collect();
        let hap1: Vec<u64> = (0..engine.words_per_row()).map(|_| hr.random()).collect();
        for _ in 0..8 {
            let mut a = vec![0u64; engine.words_per_row()];
            let mut b = vec![0u64; engine.words_per_row()];
            engine.make_gamete(&hap0, &hap1, Sex::Male, &mut r1, &mut a);
            engine.make_gamete(&hap0, &hap1, Sex::Male, &mut r2, &mut b);
            assert_eq!(a, b);
        }
    }

    #[test]
    fn pool_round_trips_rows() {
        let mut pool = GenomePool::new(3, 100);
        assert!(pool.is_empty());
        {
            let (a, b) = pool.push_individual();
            a.copy_from_slice(&[1, 2, 3]);
            b.copy_from_slice(&[4, 5, 6]);
        }
        {
            let (a, _b) = pool.push_individual();
            a.copy_from_slice(&[7, 8, 9]);
        }
        assert_eq!(pool.len(), 2);
        let first = crate::sim::pedigree::test_id(100);
        let second = crate::sim::pedigree::test_id(101);
        assert_eq!(pool.haplotypes(first), (&[1u64, 2, 3][..], &[4u64, 5, 6][..]));
        assert_eq!(pool.haplotypes(second), (&[7u64, 8, 9][..], &[0u64, 0, 0][..]));
    }
}
