//! Founding generation construction: synthetic Beta-profile founders, or
//! founders imported from an existing haplotype panel.

use rand::Rng;
use rand_distr::{Beta, Distribution};

use crate::error::{Error, Result};
use crate::io::genmap::GeneticMap;
use crate::panel::{words_for, HaplotypePanel, LocusMeta};
use crate::rng::{stream_rng, StreamPurpose};

use super::gamete::GenomePool;
use super::pedigree::{Pedigree, Sex};

/// One deme's synthetic founder recipe.
#[derive(Clone, Debug, PartialEq)]
pub struct SyntheticDeme {
    pub name: String,
    /// Number of founders; at least 2 so each deme has both sexes.
    pub count: u32,
    /// Shape parameters of the Beta distribution the deme's ancestral
    /// allele frequencies are drawn from.
    pub alpha: f64,
    pub beta: f64,
}

/// The founding state of a run: generation 0 of the pedigree, its genomes,
/// and the locus layout shared by all later generations.
pub struct FoundingState {
    pub pedigree: Pedigree,
    pub genomes: GenomePool,
    pub loci: Vec<LocusMeta>,
}

/// Alternating sexes, starting with a female, so any count of two or more
/// yields at least one founder of each sex.
fn alternating_sex(i: u32) -> Sex {
    if i % 2 == 0 {
        Sex::Female
    } else {
        Sex::Male
    }
}

/// Spreads `n_loci` loci across the map's chromosomes, proportionally to
/// their knot spans, evenly spaced within each chromosome's interior.
fn place_loci(map: &GeneticMap, n_loci: usize) -> Result<Vec<LocusMeta>> {
    let spans: Vec<(String, u64, u64)> = map
        .chromosomes()
        .map(|name| {
            let (lo, hi) = map.bp_span(name).expect("known chromosome");
            (name.to_string(), lo, hi)
        })
        .collect();
    let total_width: u64 = spans.iter().map(|(_, lo, hi)| hi - lo).sum();
    if total_width == 0 {
        return Err(Error::Config(
            "the genetic map spans no physical distance to place loci on".into(),
        ));
    }
    let mut loci = Vec::with_capacity(n_loci);
    let mut cumulative_width = 0u64;
    let mut placed = 0usize;
    for (name, lo, hi) in &spans {
        cumulative_width += hi - lo;
        // Largest-cumulative rounding keeps the total exactly n_loci.
        let want_total =
            ((n_loci as u128 * cumulative_width as u128) / total_width as u128) as usize;
        let here = want_total - placed;
        placed = want_total;
        if here == 0 {
            continue;
        }
        let width = hi - lo;
        if (here as u64) > width {
            return Err(Error::Config(format!(
                "chromosome {name} is too short for {here} distinct loci"
            )));
        }
        for i in 0..here {
            // Interior points: (i+1)/(here+1) of the way across the span.
            let offset = (width as u128 * (i as u128 + 1) / (here as u128 + 1)) as u64;
            loci.push(LocusMeta {
                chrom: name.clone(),
                position: lo + offset.max(i as u64 + 1),
                id: String::new(),
            });
        }
        // Even spacing can collide only when here approaches width; the
        // guard above plus max() keeps positions strictly increasing.
        for w in loci.len() - here + 1..loci.len() {
            if loci[w].position <= loci[w - 1].position {
                loci[w].position = loci[w - 1].position + 1;
            }
        }
        if let Some(last) = loci.last() {
            if last.position > *hi {
                return Err(Error::Config(format!(
                    "chromosome {name} is too short for {here} distinct loci"
                )));
            }
        }
    }
    debug_assert_eq!(loci.len(), n_loci);
    Ok(loci)
}

/// Builds generation 0 from per-deme Beta allele-frequency profiles.
///
/// Each deme draws a frequency per locus from its Beta distribution, then
/// every founder haplotype samples alleles independently at those
/// frequencies. With `shared_frequencies` all demes reuse one common draw
/// (taken from the first deme's profile), which makes the demes exchangeable
/// at time zero. Founder sexes alternate within each deme.
pub fn synth_founders(
    demes: &[SyntheticDeme],
    n_loci: usize,
    shared_frequencies: bool,
    map: &GeneticMap,
    seed: u64,
) -> Result<FoundingState> {
    if demes.is_empty() {
        return Err(Error::Config("at least one founder deme is required".into()));
    }
    if n_loci == 0 {
        return Err(Error::Config("founders need at least one locus".into()));
    }
    for d in demes {
        if d.count < 2 {
            return Err(Error::Config(format!(
                "deme {:?} has {} founders; at least 2 are needed for one of each sex",
                d.name, d.count
            )));
        }
        for (label, v) in [("alpha", d.alpha), ("beta", d.beta)] {
            if !v.is_finite() || v <= 0.0 {
                return Err(Error::Config(format!(
                    "Beta {label} for deme {:?} must be positive and finite, got {v}",
                    d.name
                )));
            }
        }
    }

    let loci = place_loci(map, n_loci)?;
    let mut pedigree = Pedigree::new(demes.iter().map(|d| d.name.clone()).collect())?;
    let words = words_for(n_loci);
    let mut genomes = GenomePool::new(words, 0);

    let shared: Option<Vec<f64>> = if shared_frequencies {
        let dist = beta_dist(&demes[0])?;
        let mut rng = stream_rng(seed, StreamPurpose::Founders, 0, 2 * demes.len() as u64);
        Some((0..n_loci).map(|_| dist.sample(&mut rng)).collect())
    } else {
        None
    };

    for (d, deme) in demes.iter().enumerate() {
        let freqs: Vec<f64> = match &shared {
            Some(f) => f.clone(),
            None => {
                let dist = beta_dist(deme)?;
                let mut rng = stream_rng(seed, StreamPurpose::Founders, 0, 2 * d as u64);
                (0..n_loci).map(|_| dist.sample(&mut rng)).collect()
            }
        };
        let mut hap_rng = stream_rng(seed, StreamPurpose::Founders, 0, 2 * d as u64 + 1);
        for i in 0..deme.count {
            pedigree.push_founder(alternating_sex(i), d as u16)?;
            let (h0, h1) = genomes.push_individual();
            for row in [h0, h1] {
                for (l, &p) in freqs.iter().enumerate() {
                    if hap_rng.random_bool(p) {
                        row[l / 64] |= 1u64 << (l % 64);
                    }
                }
            }
        }
    }
    Ok(FoundingState {
        pedigree,
        genomes,
        loci,
    })
}

fn beta_dist(deme: &SyntheticDeme) -> Result<Beta<f64>> {
    Beta::new(deme.alpha, deme.beta).map_err(|e| {
        Error::Config(format!(
            "invalid Beta profile for deme {:?}: {e}",
            deme.name
        ))
    })
}

/// Builds generation 0 from an existing panel: populations become demes,
/// each sample becomes one founder carrying its two panel haplotypes, and
/// sexes alternate within each deme in panel row order.
pub fn founders_from_panel(panel: &HaplotypePanel) -> Result<FoundingState> {
    let demes: Vec<String> = panel.populations().to_vec();
    let mut pedigree = Pedigree::new(demes.clone())?;
    let mut genomes = GenomePool::new(panel.words_per_row(), 0);

    for (d, deme) in demes.iter().enumerate() {
        let rows = panel.population_rows(deme).expect("listed population");
        // Samples must appear as adjacent row pairs (haplotypes 0 and 1).
        if rows.len() % 2 != 0 {
            return Err(Error::Config(format!(
                "population {deme:?} has {} haplotype rows; founders need two per sample",
                rows.len()
            )));
        }
        if rows.len() < 4 {
            return Err(Error::Config(format!(
                "population {deme:?} has {} samples; at least 2 are needed for one of each sex",
                rows.len() / 2
            )));
        }
        for (i, pair) in rows.chunks_exact(2).enumerate() {
            let (a, b) = (pair[0] as usize, pair[1] as usize);
            let ma = &panel.haplotypes()[a];
            let mb = &panel.haplotypes()[b];
            if ma.sample_id != mb.sample_id || ma.hap_index == mb.hap_index {
                return Err(Error::Config(format!(
                    "population {deme:?} rows are not paired by sample: {:?}/{} next to {:?}/{}",
                    ma.sample_id, ma.hap_index, mb.sample_id, mb.hap_index
                )));
            }
            pedigree.push_founder(alternating_sex(i as u32), d as u16)?;
            let (h0, h1) = genomes.push_individual();
            let (r0, r1) = if ma.hap_index == 0 { (a, b) } else { (b, a) };
            h0.copy_from_slice(panel.row_words(r0));
            h1.copy_from_slice(panel.row_words(r1));
        }
    }
    Ok(FoundingState {
        pedigree,
        genomes,
        loci: panel.loci().to_vec(),
    })
}
