//! Simulator run configuration: TOML/JSON parsing, validation, and the
//! cross-deme mating schedule.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::Deserialize;

use crate::error::{Error, Result};
use crate::freq::validate_grid;
use crate::io::genmap::GeneticMap;

use super::founders::SyntheticDeme;

/// Where generation 0 comes from.
#[derive(Clone, Debug, PartialEq)]
pub enum FounderSpec {
    /// Draw founders from per-deme Beta allele-frequency profiles.
    Synthetic {
        demes: Vec<SyntheticDeme>,
        n_loci: usize,
        shared_frequencies: bool,
    },
    /// Import founders from a haplotype container on disk; its populations
    /// become the demes.
    Panel(PathBuf),
}

/// Where the genetic map comes from.
#[derive(Clone, Debug, PartialEq)]
pub enum MapSpec {
    /// Four-column TSV map file.
    Path(PathBuf),
    /// Synthetic uniform-rate map over equally long chromosomes named
    /// `"1"`, `"2"`, ….
    Uniform {
        cm_per_mb: f64,
        chromosomes: u32,
        chromosome_length_bp: u64,
    },
}

impl MapSpec {
    /// Materializes the map.
    pub fn load(&self) -> Result<GeneticMap> {
        match self {
            MapSpec::Path(p) => GeneticMap::read(p),
            MapSpec::Uniform {
                cm_per_mb,
                chromosomes,
                chromosome_length_bp,
            } => {
                if *chromosomes == 0 {
                    return Err(Error::Config("a uniform map needs at least one chromosome".into()));
                }
                let lengths: Vec<(String, u64)> = (1..=*chromosomes)
                    .map(|i| (i.to_string(), *chromosome_length_bp))
                    .collect();
                GeneticMap::uniform(&lengths, *cm_per_mb)
            }
        }
    }
}

/// One step of the cross-deme mating schedule: from `from_generation`
/// onward, a visiting member of deme `d` courts outside its deme with
/// probability `rho[d]`.
#[derive(Clone, Debug, PartialEq)]
pub struct ScheduleEntry {
    pub from_generation: u16,
    pub rho: BTreeMap<String, f64>,
}

/// Validated, piecewise-constant cross-deme mating schedule.
#[derive(Clone, Debug, PartialEq)]
pub struct PanmixiaSchedule {
    entries: Vec<ScheduleEntry>,
}

impl PanmixiaSchedule {
    /// Entries must start at generation 0 and strictly increase.
    pub fn new(entries: Vec<ScheduleEntry>) -> Result<Self> {
        let first = entries
            .first()
            .ok_or_else(|| Error::Config("the mating schedule is empty".into()))?;
        if first.from_generation != 0 {
            return Err(Error::Config(format!(
                "the mating schedule must start at generation 0, not {}",
                first.from_generation
            )));
        }
        for w in entries.windows(2) {
            if w[1].from_generation <= w[0].from_generation {
                return Err(Error::Config(format!(
                    "schedule entries must strictly increase: generation {} then {}",
                    w[0].from_generation, w[1].from_generation
                )));
            }
        }
        Ok(PanmixiaSchedule { entries })
    }

    pub fn entries(&self) -> &[ScheduleEntry] {
        &self.entries
    }

    /// Checks that every entry covers exactly the given demes with
    /// probabilities in `[0, 1]`.
    pub fn validate_demes(&self, demes: &[String]) -> Result<()> {
        for entry in &self.entries {
            for d in demes {
                match entry.rho.get(d) {
                    None => {
                        return Err(Error::Config(format!(
                            "schedule entry at generation {} is missing deme {d:?}",
                            entry.from_generation
                        )))
                    }
                    Some(&p) if !(0.0..=1.0).contains(&p) => {
                        return Err(Error::Config(format!(
                            "schedule entry at generation {} has probability {p} for deme {d:?}, outside [0, 1]",
                            entry.from_generation
                        )))
                    }
                    Some(_) => {}
                }
            }
            if entry.rho.len() != demes.len() {
                let stray = entry
                    .rho
                    .keys()
                    .find(|k| !demes.contains(k))
                    .expect("length mismatch implies a stray key");
                return Err(Error::Config(format!(
                    "schedule entry at generation {} names unknown deme {stray:?}",
                    entry.from_generation
                )));
            }
        }
        Ok(())
    }

    /// Per-deme cross-mating probabilities governing the pairing of
    /// generation `g`, in deme order. The active entry is the last one with
    /// `from_generation <= g`.
    pub fn rho_at(&self, g: u16, demes: &[String]) -> Vec<f64> {
        let entry = self
            .entries
            .iter()
            .rev()
            .find(|e| e.from_generation <= g)
            .expect("validated schedules start at generation 0");
        demes
            .iter()
            .map(|d| *entry.rho.get(d).expect("validated against the deme set"))
            .collect()
    }
}

/// A full simulator run recipe.
#[derive(Clone, Debug, PartialEq)]
pub struct SimConfig {
    pub seed: u64,
    pub n_generations: u16,
    /// Mean offspring per couple (Poisson).
    pub offspring_lambda: f64,
    /// Diversity orders evaluated each generation.
    pub q_grid: Vec<f64>,
    pub founders: FounderSpec,
    pub map: MapSpec,
    pub schedule: PanmixiaSchedule,
}

fn default_q_grid() -> Vec<f64> {
    vec![1.0, 2.0]
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    seed: u64,
    n_generations: u16,
    offspring_lambda: f64,
    #[serde(default = "default_q_grid")]
    q_grid: Vec<f64>,
    founders: RawFounders,
    map: RawMap,
    schedule: Vec<RawScheduleEntry>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawFounders {
    #[serde(default)]
    n_loci: Option<usize>,
    #[serde(default)]
    shared_frequencies: bool,
    #[serde(default)]
    demes: Vec<RawDeme>,
    #[serde(default)]
    panel: Option<PathBuf>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawDeme {
    name: String,
    count: u32,
    alpha: f64,
    beta: f64,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawMap {
    #[serde(default)]
    path: Option<PathBuf>,
    #[serde(default)]
    uniform: Option<RawUniform>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawUniform {
    cm_per_mb: f64,
    chromosomes: u32,
    chromosome_length_bp: u64,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawScheduleEntry {
    from_generation: u16,
    rho: BTreeMap<String, f64>,
}

impl SimConfig {
    /// Reads a `.toml` or `.json` configuration. Relative founder-panel and
    /// map paths are resolved against the configuration file's directory.
    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let raw: RawConfig = match path.extension().and_then(|e| e.to_str()) {
            Some("toml") => toml::from_str(&text)
                .map_err(|e| Error::Format(format!("{}: {e}", path.display())))?,
            Some("json") => serde_json::from_str(&text)
                .map_err(|e| Error::Format(format!("{}: {e}", path.display())))?,
            _ => {
                return Err(Error::Config(format!(
                    "configuration {} must end in .toml or .json",
                    path.display()
                )))
            }
        };
        let base = path.parent().unwrap_or(Path::new("."));
        Self::from_raw(raw, base)
    }

    fn from_raw(raw: RawConfig, base: &Path) -> Result<Self> {
        let resolve = |p: PathBuf| if p.is_relative() { base.join(p) } else { p };

        let founders = match (raw.founders.panel, raw.founders.demes.is_empty()) {
            (Some(panel), true) => {
                if raw.founders.n_loci.is_some() || raw.founders.shared_frequencies {
                    return Err(Error::Config(
                        "panel founders take no n_loci or shared_frequencies settings".into(),
                    ));
                }
                FounderSpec::Panel(resolve(panel))
            }
            (None, false) => FounderSpec::Synthetic {
                demes: raw
                    .founders
                    .demes
                    .into_iter()
                    .map(|d| SyntheticDeme {
                        name: d.name,
                        count: d.count,
                        alpha: d.alpha,
                        beta: d.beta,
                    })
                    .collect(),
                n_loci: raw.founders.n_loci.ok_or_else(|| {
                    Error::Config("synthetic founders need an n_loci setting".into())
                })?,
                shared_frequencies: raw.founders.shared_frequencies,
            },
            (Some(_), false) => {
                return Err(Error::Config(
                    "give either a founder panel or synthetic demes, not both".into(),
                ))
            }
            (None, true) => {
                return Err(Error::Config(
                    "founders need either a panel path or synthetic demes".into(),
                ))
            }
        };

        let map = match (raw.map.path, raw.map.uniform) {
            (Some(p), None) => MapSpec::Path(resolve(p)),
            (None, Some(u)) => MapSpec::Uniform {
                cm_per_mb: u.cm_per_mb,
                chromosomes: u.chromosomes,
                chromosome_length_bp: u.chromosome_length_bp,
            },
            _ => {
                return Err(Error::Config(
                    "the map needs either a path or a uniform recipe, exactly one".into(),
                ))
            }
        };

        let schedule = PanmixiaSchedule::new(
            raw.schedule
                .into_iter()
                .map(|e| ScheduleEntry {
                    from_generation: e.from_generation,
                    rho: e.rho,
                })
                .collect(),
        )?;

        let config = SimConfig {
            seed: raw.seed,
            n_generations: raw.n_generations,
            offspring_lambda: raw.offspring_lambda,
            q_grid: raw.q_grid,
            founders,
            map,
            schedule,
        };
        config.validate()?;
        Ok(config)
    }

    /// Checks the settings that do not require touching the filesystem.
    pub fn validate(&self) -> Result<()> {
        if self.n_generations == 0 {
            return Err(Error::Config("n_generations must be at least 1".into()));
        }
        if !self.offspring_lambda.is_finite() || self.offspring_lambda <= 0.0 {
            return Err(Error::Config(format!(
                "offspring_lambda must be positive and finite, got {}",
                self.offspring_lambda
            )));
        }
        validate_grid(&self.q_grid)?;
        if let Some(last) = self.schedule.entries().last() {
            if last.from_generation >= self.n_generations {
                log::warn!(
                    "schedule entry at generation {} is beyond the final parental generation {}",
                    last.from_generation,
                    self.n_generations - 1
                );
            }
        }
        Ok(())
    }
}
