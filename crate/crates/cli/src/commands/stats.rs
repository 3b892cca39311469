//! `fqlens compute` / `ovr` / `loo`: differentiation tables over a panel.

use std::collections::BTreeMap;
use std::path::Path;

use fqlens_core::entropy::{AlleleFreq, QOrder};
use fqlens_core::error::{Error, Result};
use fqlens_core::freq::{
    locus_diff, loo_influence, ovr_micro_fq, regional_fq, validate_grid, LocusFreqTable,
    MicroAverage, PopRows,
};
use fqlens_core::io::native::read_native;
use fqlens_core::io::regions::RegionSpec;
use fqlens_core::panel::HaplotypePanel;
use fqlens_core::resample::{bootstrap_vector, BootstrapConfig, BootstrapSummary};

use crate::manifest::{manifest_path, sha256_file, FileDigest, ManifestBuilder};
use crate::output::{Cell, Table};
use crate::{CommonArgs, ComputeArgs, LooArgs, OvrArgs};

/// Panel, regions, and manifest state shared by the three table commands.
struct Loaded {
    panel: HaplotypePanel,
    regions: RegionSpec,
    manifest: ManifestBuilder,
}

fn bootstrap_config(common: &CommonArgs) -> BootstrapConfig {
    BootstrapConfig {
        n_replicates: common.replicates,
        per_pop_cap: common.cap,
        ci_level: common.ci,
        seed: common.seed.unwrap_or(0),
    }
}

/// The flag set every table command records in its manifest.
fn common_config(common: &CommonArgs, panel: &Path, regions: Option<&Path>) -> serde_json::Value {
    serde_json::json!({
        "panel": panel.display().to_string(),
        "regions": regions.map(|p| p.display().to_string()),
        "q_grid": common.q_grid,
        "min_maf": common.min_maf,
        "format": match common.format {
            crate::output::OutputFormat::Csv => "csv",
            crate::output::OutputFormat::Json => "json",
        },
        "bootstrap": common.bootstrap.then(|| {
            let b = bootstrap_config(common);
            serde_json::json!({
                "replicates": b.n_replicates,
                "cap": b.per_pop_cap,
                "ci": b.ci_level,
                "seed": b.seed,
            })
        }),
    })
}

/// Drops loci below the panel-wide minor-allele-frequency floor.
fn apply_maf(panel: HaplotypePanel, min_maf: f64) -> Result<(HaplotypePanel, usize)> {
    if !(0.0..=0.5).contains(&min_maf) {
        return Err(Error::Config(format!(
            "--min-maf must lie in [0, 0.5], got {min_maf}"
        )));
    }
    if min_maf == 0.0 {
        return Ok((panel, 0));
    }
    let everyone: Vec<u32> = (0..panel.n_haplotypes() as u32).collect();
    let counts = panel.alt_counts(&everyone);
    let n = panel.n_haplotypes() as f64;
    let keep: Vec<bool> = counts
        .iter()
        .map(|&c| {
            let p = f64::from(c) / n;
            p.min(1.0 - p) >= min_maf
        })
        .collect();
    let dropped = keep.iter().filter(|k| !**k).count();
    if dropped == panel.n_loci() {
        return Err(Error::UndefinedStatistic(format!(
            "the --min-maf {min_maf} filter removed every locus"
        )));
    }
    let filtered = panel.retain_loci(&keep)?;
    Ok((filtered, dropped))
}

fn load(
    command: &'static str,
    common: &CommonArgs,
    panel_path: &Path,
    regions_path: Option<&Path>,
    extra: &[(&str, serde_json::Value)],
) -> Result<Loaded> {
    validate_grid(&common.q_grid)?;
    let mut manifest = ManifestBuilder::new(command);
    manifest.add_input(panel_path)?;
    let panel = read_native(panel_path)?;
    let regions = match regions_path {
        Some(p) => {
            manifest.add_input(p)?;
            RegionSpec::from_path(p)?
        }
        None => RegionSpec::from_map(BTreeMap::from([(
            "all".to_string(),
            panel.populations().to_vec(),
        )]))?,
    };
    let (panel, dropped) = apply_maf(panel, common.min_maf)?;
    log::info!(
        "panel: {} haplotypes, {} loci after the MAF filter ({dropped} dropped), populations: {}",
        panel.n_haplotypes(),
        panel.n_loci(),
        panel.populations().join(", ")
    );
    let mut config = common_config(common, panel_path, regions_path);
    for (key, value) in extra {
        config[*key] = value.clone();
    }
    manifest.set_config(config);
    manifest.set_skipped_loci(serde_json::json!({ "maf_filtered": dropped }));
    if common.bootstrap {
        manifest.set_seed(common.seed.unwrap_or(0));
    }
    Ok(Loaded {
        panel,
        regions,
        manifest,
    })
}

/// Evaluates the grid of orders with `stat` on a selection restricted to
/// `pops`; used both for point estimates and inside bootstrap replicates.
fn grid_values(
    rows: &PopRows<'_>,
    pops: &[String],
    q_grid: &[f64],
    stat: impl Fn(&PopRows<'_>, QOrder) -> Result<f64>,
) -> Result<Vec<f64>> {
    let sub = rows.restrict(pops)?;
    q_grid
        .iter()
        .map(|&q| stat(&sub, QOrder::new(q)?))
        .collect()
}

/// Bootstrap bands for one row group, as `(ci_low, ci_high)` per order.
fn bands(
    panel: &HaplotypePanel,
    common: &CommonArgs,
    pops: &[String],
    label: &str,
    stat: impl Fn(&PopRows<'_>, QOrder) -> Result<f64> + Sync,
) -> Result<Option<Vec<(f64, f64)>>> {
    if !common.bootstrap {
        return Ok(None);
    }
    let cfg = bootstrap_config(common);
    let summaries: Vec<BootstrapSummary> = bootstrap_vector(panel, &cfg, |rows| {
        grid_values(rows, pops, &common.q_grid, &stat)
    })?;
    for s in &summaries {
        if s.unreliable {
            log::warn!(
                "{label}: {} of {} bootstrap replicates were undefined; the band rests on a minority of draws",
                s.n_missing,
                cfg.n_replicates
            );
            break;
        }
    }
    Ok(Some(summaries.iter().map(|s| (s.ci_low, s.ci_high)).collect()))
}

fn band_cells(bands: &Option<Vec<(f64, f64)>>, j: usize) -> (Cell, Cell) {
    match bands {
        Some(b) => (Cell::Float(b[j].0), Cell::Float(b[j].1)),
        None => (Cell::Empty, Cell::Empty),
    }
}

/// Writes `table` to stdout or `--out`, with a manifest beside file output.
fn finish(common: &CommonArgs, table: &Table, manifest: &ManifestBuilder) -> Result<u8> {
    table.write(common.format, common.out.as_deref())?;
    if let Some(out) = &common.out {
        manifest.write(
            &manifest_path(out),
            vec![FileDigest {
                path: out.display().to_string(),
                sha256: sha256_file(out)?,
            }],
        )?;
    }
    Ok(0)
}

fn sorted(pops: &[String]) -> Vec<String> {
    let mut v = pops.to_vec();
    v.sort();
    v
}

// ── compute ────────────────────────────────────────────────────────────────

pub fn compute(common: &CommonArgs, args: &ComputeArgs) -> Result<u8> {
    let extra = [(
        "per_locus",
        serde_json::json!(args.per_locus.as_ref().map(|p| p.display().to_string())),
    )];
    let loaded = load(
        "compute",
        common,
        &args.panel,
        args.regions.as_deref(),
        &extra,
    )?;
    let run_id = loaded.manifest.run_id();

    let mut table = Table::new(&[
        "region",
        "q",
        "f_q",
        "ci_low",
        "ci_high",
        "n_loci_used",
        "n_loci_skipped",
        "run_id",
    ]);
    for (region, pops) in loaded.regions.iter() {
        let pops = sorted(pops);
        let rows = PopRows::full(&loaded.panel, &pops)?;
        let point: Vec<MicroAverage> = common
            .q_grid
            .iter()
            .map(|&q| regional_fq(&rows, QOrder::new(q)?))
            .collect::<Result<_>>()?;
        let bands = bands(&loaded.panel, common, &pops, region, |sub, q| {
            Ok(regional_fq(sub, q)?.value)
        })?;
        for (j, (&q, m)) in common.q_grid.iter().zip(&point).enumerate() {
            let (lo, hi) = band_cells(&bands, j);
            table.push(vec![
                Cell::Str(region.to_string()),
                Cell::Float(q),
                Cell::Float(m.value),
                lo,
                hi,
                Cell::Int(m.loci_used as u64),
                Cell::Int(m.loci_skipped as u64),
                Cell::Str(run_id.clone()),
            ]);
        }
    }

    if let Some(path) = &args.per_locus {
        let per_locus = per_locus_table(&loaded.panel, &loaded.regions, &common.q_grid, &run_id)?;
        per_locus.write(common.format, Some(path))?;
        log::info!("wrote per-locus table to {}", path.display());
    }
    table.write(common.format, common.out.as_deref())?;
    if let Some(out) = &common.out {
        let mut outputs = vec![FileDigest {
            path: out.display().to_string(),
            sha256: sha256_file(out)?,
        }];
        if let Some(path) = &args.per_locus {
            outputs.push(FileDigest {
                path: path.display().to_string(),
                sha256: sha256_file(path)?,
            });
        }
        loaded.manifest.write(&manifest_path(out), outputs)?;
    }
    Ok(0)
}

/// Per-locus splits for every region: one row per (region, locus, order).
fn per_locus_table(
    panel: &HaplotypePanel,
    regions: &RegionSpec,
    q_grid: &[f64],
    run_id: &str,
) -> Result<Table> {
    let mut table = Table::new(&[
        "region", "chrom", "position", "id", "q", "delta", "s_total", "f_q", "run_id",
    ]);
    for (region, pops) in regions.iter() {
        let pops = sorted(pops);
        let rows = PopRows::full(panel, &pops)?;
        let sizes = rows.selection_sizes();
        let counts: Vec<Vec<u32>> = pops
            .iter()
            .map(|p| panel.alt_counts(panel.population_rows(p).expect("validated")))
            .collect();
        for (l, locus) in panel.loci().iter().enumerate() {
            let freqs: Vec<AlleleFreq> = counts
                .iter()
                .zip(&sizes)
                .map(|(alt, &n)| AlleleFreq::new(f64::from(alt[l]) / n as f64))
                .collect::<Result<_>>()?;
            let locus_table = LocusFreqTable::equal_weights(pops.clone(), freqs)?;
            for &q in q_grid {
                let d = locus_diff(&locus_table, QOrder::new(q)?);
                table.push(vec![
                    Cell::Str(region.to_string()),
                    Cell::Str(locus.chrom.clone()),
                    Cell::Int(locus.position),
                    Cell::Str(locus.id.clone()),
                    Cell::Float(q),
                    Cell::Float(d.delta),
                    Cell::Float(d.s_total),
                    d.fq.map_or(Cell::Empty, Cell::Float),
                    Cell::Str(run_id.to_string()),
                ]);
            }
        }
    }
    Ok(table)
}

// ── ovr ────────────────────────────────────────────────────────────────────

pub fn ovr(common: &CommonArgs, args: &OvrArgs) -> Result<u8> {
    let extra = [
        ("focal", serde_json::json!(args.focal)),
        ("all", serde_json::json!(args.all)),
    ];
    let loaded = load("ovr", common, &args.panel, args.regions.as_deref(), &extra)?;
    let run_id = loaded.manifest.run_id();

    if let Some(focal) = &args.focal {
        if loaded.regions.region_of(focal).is_none() {
            return Err(Error::Config(format!(
                "focal population {focal} is not in any region"
            )));
        }
    }

    let mut table = Table::new(&[
        "region",
        "focal",
        "q",
        "f_q",
        "ci_low",
        "ci_high",
        "n_loci_used",
        "n_loci_skipped",
        "run_id",
    ]);
    for (region, pops) in loaded.regions.iter() {
        let pops = sorted(pops);
        let focals: Vec<&String> = match &args.focal {
            Some(f) => pops.iter().filter(|p| *p == f).collect(),
            None => pops.iter().collect(),
        };
        if focals.is_empty() {
            continue;
        }
        let rows = PopRows::full(&loaded.panel, &pops)?;
        for focal in focals {
            let point: Vec<MicroAverage> = common
                .q_grid
                .iter()
                .map(|&q| ovr_micro_fq(&rows, focal, QOrder::new(q)?))
                .collect::<Result<_>>()?;
            let label = format!("{region}/{focal}");
            let bands = bands(&loaded.panel, common, &pops, &label, |sub, q| {
                Ok(ovr_micro_fq(sub, focal, q)?.value)
            })?;
            for (j, (&q, m)) in common.q_grid.iter().zip(&point).enumerate() {
                let (lo, hi) = band_cells(&bands, j);
                table.push(vec![
                    Cell::Str(region.to_string()),
                    Cell::Str(focal.clone()),
                    Cell::Float(q),
                    Cell::Float(m.value),
                    lo,
                    hi,
                    Cell::Int(m.loci_used as u64),
                    Cell::Int(m.loci_skipped as u64),
                    Cell::Str(run_id.clone()),
                ]);
            }
        }
    }
    finish(common, &table, &loaded.manifest)
}

// ── loo ────────────────────────────────────────────────────────────────────

pub fn loo(common: &CommonArgs, args: &LooArgs) -> Result<u8> {
    let loaded = load("loo", common, &args.panel, args.regions.as_deref(), &[])?;
    let run_id = loaded.manifest.run_id();

    let mut table = Table::new(&[
        "region",
        "population",
        "q",
        "dfq",
        "ci_low",
        "ci_high",
        "run_id",
    ]);
    table.note = Some(
        "dfq = regional value minus the value with the population left out; \
         positive marks a population that adds regional structure"
            .to_string(),
    );
    for (region, pops) in loaded.regions.iter() {
        let pops = sorted(pops);
        let rows = PopRows::full(&loaded.panel, &pops)?;
        for pop in &pops {
            let point: Vec<f64> = common
                .q_grid
                .iter()
                .map(|&q| loo_influence(&rows, pop, QOrder::new(q)?))
                .collect::<Result<_>>()?;
            let label = format!("{region}/{pop}");
            let bands = bands(&loaded.panel, common, &pops, &label, |sub, q| {
                loo_influence(sub, pop, q)
            })?;
            for (j, (&q, &v)) in common.q_grid.iter().zip(&point).enumerate() {
                let (lo, hi) = band_cells(&bands, j);
                table.push(vec![
                    Cell::Str(region.to_string()),
                    Cell::Str(pop.clone()),
                    Cell::Float(q),
                    Cell::Float(v),
                    lo,
                    hi,
                    Cell::Str(run_id.clone()),
                ]);
            }
        }
    }
    finish(common, &table, &loaded.manifest)
}
