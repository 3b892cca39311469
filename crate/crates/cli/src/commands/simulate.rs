//! `fqlens simulate`: run a forward-time experiment from a config file.

use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use fqlens_core::error::{Error, Result};
use fqlens_core::io::native::write_native;
use fqlens_core::sim::{
    run_experiment, run_experiment_with, ExperimentOutput, FounderSpec, MapSpec, SimConfig,
    SimStatus,
};

use crate::manifest::{sha256_file, FileDigest, ManifestBuilder};
use crate::output::{Cell, OutputFormat, Table};
use crate::{CommonArgs, SimArgs, EXIT_EXTINCT};

pub fn run(common: &CommonArgs, args: &SimArgs) -> Result<u8> {
    let out_dir = common
        .out
        .as_deref()
        .ok_or_else(|| Error::Config("simulate needs --out <directory>".into()))?;
    let mut config = SimConfig::from_path(&args.config)?;
    if let Some(seed) = common.seed {
        config.seed = seed;
    }

    let mut manifest = ManifestBuilder::new("simulate");
    manifest.add_input(&args.config)?;
    manifest.set_seed(config.seed);
    let mut recorded = config_json(&config);
    recorded["export_panels"] = serde_json::json!(args.export_panels);
    recorded["export_pedigree"] = serde_json::json!(args.export_pedigree);
    manifest.set_config(recorded);
    let run_id = manifest.run_id();

    fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let mut panel_files: Vec<PathBuf> = Vec::new();
    let output = if args.export_panels {
        let panels_dir = out_dir.join("panels");
        fs::create_dir_all(&panels_dir).map_err(|e| Error::io(&panels_dir, e))?;
        run_experiment_with(&config, |g, panel| {
            let path = panels_dir.join(format!("gen_{g:04}.fql"));
            write_native(panel, &path)?;
            panel_files.push(path);
            Ok(())
        })?
    } else {
        run_experiment(&config)?
    };

    let timeseries = out_dir.join(match common.format {
        OutputFormat::Csv => "timeseries.csv",
        OutputFormat::Json => "timeseries.json",
    });
    timeseries_table(&output, &run_id).write(common.format, Some(&timeseries))?;

    let mut outputs = vec![digest(&timeseries)?];
    if args.export_pedigree {
        let path = out_dir.join("pedigree.tsv");
        write_pedigree(&output, &path)?;
        outputs.push(digest(&path)?);
    }
    for path in &panel_files {
        outputs.push(digest(path)?);
    }
    manifest.write(&out_dir.join("manifest.json"), outputs)?;

    let last = output.generations.last().expect("founders always recorded");
    println!(
        "run {run_id}: {} demes ({}), {} of {} reproduction rounds, final census {}",
        output.demes.len(),
        output.demes.join(", "),
        output.generations.len() - 1,
        config.n_generations,
        last.census.iter().sum::<u32>()
    );
    match output.status {
        SimStatus::Completed => Ok(0),
        SimStatus::Extinct { at_generation } => {
            eprintln!(
                "fqlens: every couple was childless entering generation {at_generation}; \
                 outputs in {} cover the generations that existed",
                out_dir.display()
            );
            Ok(EXIT_EXTINCT)
        }
    }
}

fn digest(path: &Path) -> Result<FileDigest> {
    Ok(FileDigest {
        path: path.display().to_string(),
        sha256: sha256_file(path)?,
    })
}

/// One row per (generation, deme, statistic, order): census sizes plus the
/// one-vs-rest and leave-one-out spectra recorded for every cohort.
fn timeseries_table(output: &ExperimentOutput, run_id: &str) -> Table {
    let mut table = Table::new(&["generation", "deme", "statistic", "q", "value", "run_id"]);
    for rec in &output.generations {
        for (deme, &n) in output.demes.iter().zip(&rec.census) {
            table.push(vec![
                Cell::Int(u64::from(rec.generation)),
                Cell::Str(deme.clone()),
                Cell::Str("census".to_string()),
                Cell::Empty,
                Cell::Int(u64::from(n)),
                Cell::Str(run_id.to_string()),
            ]);
        }
        for (statistic, spectra) in [("ovr_fq", &rec.ovr), ("loo_dfq", &rec.loo)] {
            for spectrum in spectra {
                for (&q, &value) in spectrum.q_grid.iter().zip(&spectrum.values) {
                    table.push(vec![
                        Cell::Int(u64::from(rec.generation)),
                        Cell::Str(spectrum.label.clone()),
                        Cell::Str(statistic.to_string()),
                        Cell::Float(q),
                        Cell::Float(value),
                        Cell::Str(run_id.to_string()),
                    ]);
                }
            }
        }
    }
    table
}

/// Tab-separated pedigree dump: founders carry `NA` parents.
fn write_pedigree(output: &ExperimentOutput, path: &Path) -> Result<()> {
    let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = std::io::BufWriter::new(file);
    let io_err = |e| Error::io(path, e);
    writeln!(w, "id\tsex\tdeme\tgeneration\tmother\tfather").map_err(io_err)?;
    for ind in output.pedigree.individuals() {
        let (mother, father) = match ind.parents {
            Some((m, f)) => (m.to_string(), f.to_string()),
            None => ("NA".to_string(), "NA".to_string()),
        };
        writeln!(
            w,
            "{}\t{}\t{}\t{}\t{mother}\t{father}",
            ind.id,
            match ind.sex {
                fqlens_core::sim::Sex::Female => 'F',
                fqlens_core::sim::Sex::Male => 'M',
            },
            output.pedigree.deme_name(ind.deme),
            ind.generation,
        )
        .map_err(io_err)?;
    }
    w.flush().map_err(io_err)
}

/// The fully resolved run configuration, for the manifest.
fn config_json(c: &SimConfig) -> serde_json::Value {
    serde_json::json!({
        "seed": c.seed,
        "n_generations": c.n_generations,
        "offspring_lambda": c.offspring_lambda,
        "q_grid": c.q_grid,
        "founders": match &c.founders {
            FounderSpec::Synthetic { demes, n_loci, shared_frequencies } => serde_json::json!({
                "n_loci": n_loci,
                "shared_frequencies": shared_frequencies,
                "demes": demes.iter().map(|d| serde_json::json!({
                    "name": d.name,
                    "count": d.count,
                    "alpha": d.alpha,
                    "beta": d.beta,
                })).collect::<Vec<_>>(),
            }),
            FounderSpec::Panel(path) => serde_json::json!({
                "panel": path.display().to_string(),
            }),
        },
        "map": match &c.map {
            MapSpec::Path(p) => serde_json::json!({ "path": p.display().to_string() }),
            MapSpec::Uniform { cm_per_mb, chromosomes, chromosome_length_bp } => {
                serde_json::json!({ "uniform": {
                    "cm_per_mb": cm_per_mb,
                    "chromosomes": chromosomes,
                    "chromosome_length_bp": chromosome_length_bp,
                }})
            }
        },
        "schedule": c.schedule.entries().iter().map(|e| serde_json::json!({
            "from_generation": e.from_generation,
            "rho": e.rho,
        })).collect::<Vec<_>>(),
    })
}
