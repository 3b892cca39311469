//! The generation loop: pairing, reproduction, and per-generation
//! statistics.

use rand::Rng;
use rand_distr::{Distribution, Poisson};

use crate::error::{Error, Result};
use crate::freq::{fq_spectrum, FqSpectrum, PopRows, SpectrumMode};
use crate::io::native::read_native;
use crate::panel::{HaplotypeMeta, HaplotypePanel, LocusMeta, PanelBuilder};
use crate::rng::{stream_rng, StreamPurpose};

use super::config::{FounderSpec, SimConfig};
use super::founders::{founders_from_panel, synth_founders, FoundingState};
use super::gamete::{GenomePool, RecombEngine};
use super::mating::{pair_generation, Couple};
use super::pedigree::{Pedigree, Sex};

/// How a run ended.
#[derive(Copy, Clone, Debug, PartialEq, Eq)]
pub enum SimStatus {
    /// All requested reproduction rounds completed.
    Completed,
    /// No children were produced; `at_generation` is the first empty cohort.
    Extinct { at_generation: u16 },
}

/// Census and diversity statistics for one cohort.
#[derive(Clone, Debug)]
pub struct GenerationRecord {
    pub generation: u16,
    /// Individuals per deme, in deme order.
    pub census: Vec<u32>,
    /// Per-deme one-vs-rest fixation spectra over the configured order
    /// grid. Demes with no members this generation are absent, as is any
    /// deme whose statistic is undefined (no polymorphic locus); fewer than
    /// two surviving demes leave the whole vector empty.
    pub ovr: Vec<FqSpectrum>,
    /// Per-deme leave-one-out influence spectra, same conventions.
    pub loo: Vec<FqSpectrum>,
}

/// Everything a finished run reports.
#[derive(Clone, Debug)]
pub struct ExperimentOutput {
    /// Deme names in deme-index order.
    pub demes: Vec<String>,
    pub q_grid: Vec<f64>,
    /// One record per materialized cohort, starting with the founders.
    pub generations: Vec<GenerationRecord>,
    /// `couples[g]` lists the unions formed among generation-`g` parents.
    pub couples: Vec<Vec<Couple>>,
    pub pedigree: Pedigree,
    pub status: SimStatus,
}

/// Runs the configured experiment: `n_generations` rounds of pairing and
/// reproduction starting from the founders, recording census, one-vs-rest,
/// and leave-one-out spectra for every cohort.
pub fn run_experiment(config: &SimConfig) -> Result<ExperimentOutput> {
    run_experiment_with(config, |_, _| Ok(()))
}

/// As [`run_experiment`], additionally handing every cohort's haplotype
/// panel to `on_panel(generation, panel)` for export.
pub fn run_experiment_with(
    config: &SimConfig,
    mut on_panel: impl FnMut(u16, &HaplotypePanel) -> Result<()>,
) -> Result<ExperimentOutput> {
    config.validate()?;
    let map = config.map.load()?;
    let FoundingState {
        mut pedigree,
        genomes,
        loci,
    } = match &config.founders {
        FounderSpec::Synthetic {
            demes,
            n_loci,
            shared_frequencies,
        } => synth_founders(demes, *n_loci, *shared_frequencies, &map, config.seed)?,
        FounderSpec::Panel(path) => founders_from_panel(&read_native(path)?)?,
    };
    let demes = pedigree.demes().to_vec();
    if demes.len() < 2 {
        return Err(Error::Config(
            "one-vs-rest statistics need at least two demes".into(),
        ));
    }
    config.schedule.validate_demes(&demes)?;
    let engine = RecombEngine::new(&loci, &map)?;
    let poisson = Poisson::new(config.offspring_lambda)
        .map_err(|e| Error::Config(format!("invalid offspring rate: {e}")))?;

    let mut generations = Vec::with_capacity(config.n_generations as usize + 1);
    let mut couples_log = Vec::with_capacity(config.n_generations as usize);
    let mut current = genomes;
    generations.push(record_cohort(
        &pedigree,
        0,
        &current,
        &loci,
        &config.q_grid,
        &mut on_panel,
    )?);

    let mut status = SimStatus::Completed;
    for g in 0..config.n_generations {
        let rho = config.schedule.rho_at(g, &demes);
        let mut pair_rng = stream_rng(config.seed, StreamPurpose::Pairing, g.into(), 0);
        let couples = pair_generation(&pedigree, g, &rho, &mut pair_rng)?;
        pedigree.next_generation()?;
        let mut next = GenomePool::new(engine.words_per_row(), pedigree.len());
        for (i, couple) in couples.iter().enumerate() {
            let mut rng = stream_rng(config.seed, StreamPurpose::Reproduction, g.into(), i as u64);
            let n_children = poisson.sample(&mut rng) as u64;
            let (m0, m1) = current.haplotypes(couple.female);
            let (f0, f1) = current.haplotypes(couple.male);
            for _ in 0..n_children {
                let sex = if rng.random_bool(0.5) {
                    Sex::Female
                } else {
                    Sex::Male
                };
                pedigree.push_child(sex, couple.female, couple.male)?;
                let (h0, h1) = next.push_individual();
                engine.make_gamete(m0, m1, Sex::Female, &mut rng, h0);
                engine.make_gamete(f0, f1, Sex::Male, &mut rng, h1);
            }
        }
        couples_log.push(couples);
        if next.is_empty() {
            status = SimStatus::Extinct { at_generation: g + 1 };
            break;
        }
        current = next;
        generations.push(record_cohort(
            &pedigree,
            g + 1,
            &current,
            &loci,
            &config.q_grid,
            &mut on_panel,
        )?);
    }

    Ok(ExperimentOutput {
        demes,
        q_grid: config.q_grid.clone(),
        generations,
        couples: couples_log,
        pedigree,
        status,
    })
}

/// Packs one cohort's haplotypes into a panel, demes as populations.
pub fn cohort_panel(
    pedigree: &Pedigree,
    generation: u16,
    genomes: &GenomePool,
    loci: &[LocusMeta],
) -> Result<HaplotypePanel> {
    let mut builder = PanelBuilder::new(loci.to_vec())?;
    for id in pedigree.generation_members(generation) {
        let ind = pedigree.get(id);
        let (h0, h1) = genomes.haplotypes(id);
        for (hap_index, words) in [(0u8, h0), (1u8, h1)] {
            builder.push_packed_row(
                HaplotypeMeta {
                    sample_id: id.to_string(),
                    hap_index,
                    population: pedigree.deme_name(ind.deme).to_string(),
                },
                words,
            )?;
        }
    }
    builder.finish()
}

fn record_cohort(
    pedigree: &Pedigree,
    generation: u16,
    genomes: &GenomePool,
    loci: &[LocusMeta],
    q_grid: &[f64],
    on_panel: &mut impl FnMut(u16, &HaplotypePanel) -> Result<()>,
) -> Result<GenerationRecord> {
    let census = pedigree.census(generation);
    let panel = cohort_panel(pedigree, generation, genomes, loci)?;
    let mut ovr = Vec::new();
    let mut loo = Vec::new();
    let present: Vec<String> = pedigree
        .demes()
        .iter()
        .zip(&census)
        .filter(|&(_, &n)| n > 0)
        .map(|(d, _)| d.clone())
        .collect();
    if present.len() >= 2 {
        let rows = PopRows::full(&panel, &present)?;
        for deme in &present {
            for (mode, out) in [
                (SpectrumMode::Ovr { focal: deme }, &mut ovr),
                (SpectrumMode::Loo { candidate: deme }, &mut loo),
            ] {
                match fq_spectrum(&rows, mode, q_grid, deme.clone()) {
                    Ok(s) => out.push(s),
                    // A deme can have no polymorphic locus against the rest
                    // (e.g. everything drifted to fixation); that cohort
                    // simply has no defined value for it.
                    Err(Error::UndefinedStatistic(_)) => {}
                    Err(e) => return Err(e),
                }
            }
        }
    }
    on_panel(generation, &panel)?;
    Ok(GenerationRecord {
        generation,
        census,
        ovr,
        loo,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::config::{MapSpec, PanmixiaSchedule, ScheduleEntry};
    use crate::sim::founders::SyntheticDeme;
    use std::collections::BTreeMap;

    fn flat_schedule(demes: &[&str], rho: f64) -> PanmixiaSchedule {
        PanmixiaSchedule::new(vec![ScheduleEntry {
            from_generation: 0,
            rho: demes.iter().map(|d| (d.to_string(), rho)).collect::<BTreeMap<_, _>>(),
        }])
        .unwrap()
    }

    fn small_config(seed: u64, rho: f64, lambda: f64, n_generations: u16) -> SimConfig {
        let demes = ["EA", "WA"];
        SimConfig {
            seed,
            n_generations,
            offspring_lambda: lambda,
            q_grid: vec![1.0, 2.0],
            founders: FounderSpec::Synthetic {
                demes: demes
                    .iter()
                    .map(|n| SyntheticDeme {
                        name: n.to_string(),
                        count: 14,
                        alpha: 0.6,
                        beta: 0.6,
                    })
                    .collect(),
                n_loci: 300,
                shared_frequencies: false,
            },
            map: MapSpec::Uniform {
                cm_per_mb: 1.0,
                chromosomes: 2,
                chromosome_length_bp: 50_000_000,
            },
            schedule: flat_schedule(&demes, rho),
        }
    }

    #[test]
    fn healthy_run_completes_with_growing_census() {
        let cfg = small_config(31, 0.3, 3.0, 6);
        let out = run_experiment(&cfg).unwrap();
        assert_eq!(out.status, SimStatus::Completed);
        assert_eq!(out.generations.len(), 7, "founders plus six cohorts");
        assert_eq!(out.couples.len(), 6);
        out.pedigree.validate().unwrap();
        // Census multiplies by roughly lambda / 2 = 1.5 per generation.
        let totals: Vec<u32> = out
            .generations
            .iter()
            .map(|r| r.census.iter().sum())
            .collect();
        assert_eq!(totals[0], 28);
        let growth = totals.last().copied().unwrap() as f64 / totals[0] as f64;
        let expect = 1.5f64.powi(6);
        assert!(
            growth > expect * 0.45 && growth < expect * 2.2,
            "observed growth {growth}, expected about {expect}"
        );
        // Every cohort carries both demes' spectra on a healthy run.
        for rec in &out.generations {
            assert_eq!(rec.ovr.len(), 2, "generation {}", rec.generation);
            assert_eq!(rec.loo.len(), 2);
            for s in rec.ovr.iter().chain(&rec.loo) {
                assert_eq!(s.q_grid, vec![1.0, 2.0]);
                assert!(s.values.iter().all(|v| v.is_finite()));
            }
        }
    }

    #[test]
    fn runs_are_reproducible_and_seed_sensitive() {
        let a = run_experiment(&small_config(77, 0.3, 3.0, 4)).unwrap();
        let b = run_experiment(&small_config(77, 0.3, 3.0, 4)).unwrap();
        assert_eq!(a.pedigree.len(), b.pedigree.len());
        assert_eq!(a.couples, b.couples);
        for (ra, rb) in a.generations.iter().zip(&b.generations) {
            assert_eq!(ra.census, rb.census);
            for (sa, sb) in ra.ovr.iter().zip(&rb.ovr) {
                let bits =
                    |v: &[f64]| v.iter().map(|x| x.to_bits()).collect::<Vec<_>>();
                assert_eq!(bits(&sa.values), bits(&sb.values));
            }
        }
        let c = run_experiment(&small_config(78, 0.3, 3.0, 4)).unwrap();
        assert_ne!(
            a.pedigree.len(),
            c.pedigree.len(),
            "different seeds should give different trajectories (sizes almost surely differ)"
        );
    }

    #[test]
    fn tiny_fertility_reports_extinction() {
        let out = run_experiment(&small_config(5, 0.3, 0.01, 10)).unwrap();
        match out.status {
            SimStatus::Extinct { at_generation } => {
                assert!(at_generation >= 1 && at_generation <= 10);
                assert_eq!(
                    out.generations.len() as u16,
                    at_generation,
                    "records stop at the last living cohort"
                );
            }
            SimStatus::Completed => panic!("lambda = 0.01 all but guarantees extinction"),
        }
    }

    #[test]
    fn single_deme_config_is_rejected() {
        let mut cfg = small_config(1, 0.0, 3.0, 3);
        cfg.founders = FounderSpec::Synthetic {
            demes: vec![SyntheticDeme {
                name: "EA".into(),
                count: 10,
                alpha: 0.5,
                beta: 0.5,
            }],
            n_loci: 50,
            shared_frequencies: false,
        };
        cfg.schedule = flat_schedule(&["EA"], 0.0);
        let err = run_experiment(&cfg).unwrap_err();
        assert!(matches!(err, Error::Config(_)), "{err}");
    }

    #[test]
    fn every_union_respects_eligibility_post_hoc() {
        let out = run_experiment(&small_config(13, 0.5, 3.0, 5)).unwrap();
        for couples in &out.couples {
            for c in couples {
                assert!(
                    crate::sim::pedigree::mate_eligibility(&out.pedigree, c.female, c.male)
                        .is_eligible()
                );
            }
        }
    }

    #[test]
    fn alleles_are_conserved_across_generations() {
        // No mutation: a generation can only carry alleles its parents had.
        let cfg = small_config(41, 0.4, 3.0, 5);
        let mut panels: Vec<HaplotypePanel> = Vec::new();
        run_experiment_with(&cfg, |_, panel| {
            panels.push(panel.clone());
            Ok(())
        })
        .unwrap();
        assert_eq!(panels.len(), 6);
        let n_loci = panels[0].n_loci();
        for w in panels.windows(2) {
            let (parents, children) = (&w[0], &w[1]);
            let totals = |p: &HaplotypePanel| {
                let rows: Vec<u32> = (0..p.n_haplotypes() as u32).collect();
                let mut alt = vec![0u32; n_loci];
                p.accumulate_alt_counts(&rows, &mut alt);
                alt
            };
            let pa = totals(parents);
            let ca = totals(children);
            let n_parents = parents.n_haplotypes() as u32;
            let n_children = children.n_haplotypes() as u32;
            for l in 0..n_loci {
                if pa[l] == 0 {
                    assert_eq!(ca[l], 0, "alternate allele appeared from nowhere at locus {l}");
                }
                if pa[l] == n_parents {
                    assert_eq!(
                        ca[l], n_children,
                        "reference allele appeared from nowhere at locus {l}"
                    );
                }
            }
        }
    }

    #[test]
    fn isolated_demes_with_disjoint_fixed_alleles_stay_fixed() {
        // Two demes, each fixed for a different allele at every locus, and
        // rho = 0 throughout: the fixed difference must persist, so the
        // one-vs-rest statistic stays exactly 1 at every order.
        use crate::io::native::write_native;
        let n_loci = 40usize;
        let loci: Vec<LocusMeta> = (0..n_loci)
            .map(|i| LocusMeta {
                chrom: "1".into(),
                position: 1000 + 1000 * i as u64,
                id: String::new(),
            })
            .collect();
        let mut b = PanelBuilder::new(loci).unwrap();
        for deme in ["EA", "WA"] {
            let bit = deme == "WA";
            for s in 0..20 {
                for hap in [0u8, 1] {
                    b.push_row(
                        HaplotypeMeta {
                            sample_id: format!("{deme}{s}"),
                            hap_index: hap,
                            population: deme.to_string(),
                        },
                        std::iter::repeat_n(bit, n_loci),
                    )
                    .unwrap();
                }
            }
        }
        let dir = tempfile::tempdir().unwrap();
        let founders_path = dir.path().join("founders.fql");
        write_native(&b.finish().unwrap(), &founders_path).unwrap();

        let mut cfg = small_config(19, 0.0, 3.0, 6);
        cfg.founders = FounderSpec::Panel(founders_path);
        cfg.schedule = flat_schedule(&["EA", "WA"], 0.0);

        let mut panels: Vec<HaplotypePanel> = Vec::new();
        let out = run_experiment_with(&cfg, |_, panel| {
            panels.push(panel.clone());
            Ok(())
        })
        .unwrap();
        assert_eq!(out.status, SimStatus::Completed);
        for rec in &out.generations {
            assert_eq!(rec.ovr.len(), 2, "generation {}", rec.generation);
            for s in rec.ovr.iter().chain(&rec.loo) {
                for &v in &s.values {
                    assert_eq!(v, 1.0, "{} at generation {}", s.label, rec.generation);
                }
            }
        }
        for panel in &panels {
            for deme in ["EA", "WA"] {
                let rows = panel.population_rows(deme).unwrap().to_vec();
                let mut alt = vec![0u32; n_loci];
                panel.accumulate_alt_counts(&rows, &mut alt);
                let expect = if deme == "WA" { rows.len() as u32 } else { 0 };
                assert!(
                    alt.iter().all(|&a| a == expect),
                    "{deme} lost its fixed allele"
                );
            }
        }
    }
}
