//! Equal-weight bootstrap over haplotypes.
//!
//! Resampling draws haplotypes with replacement independently within each
//! population; populations larger than a per-population cap are drawn at
//! the cap instead of their own size, which is what gives every population
//! comparable influence on the bands regardless of how unevenly the panel
//! samples them. Loci are never resampled.
//!
//! Replicate `i` always consumes RNG child stream `i` of the configured
//! seed, so results are bit-identical no matter how replicates are
//! scheduled, and two statistics bootstrapped under the same seed see the
//! same resampled panels replicate-for-replicate.

use rand::Rng;

use crate::error::{Error, Result};
use crate::freq::PopRows;
use crate::panel::HaplotypePanel;
use crate::rng::{stream_rng, StreamPurpose};

/// Bootstrap protocol parameters.
#[derive(Clone, Debug, PartialEq)]
pub struct BootstrapConfig {
    /// Number of resampled panels to evaluate.
    pub n_replicates: usize,
    /// Per-replicate draw size for populations larger than this.
    pub per_pop_cap: usize,
    /// Central confidence mass, e.g. `0.95` for a 95% band.
    pub ci_level: f64,
    /// Root seed; replicate `i` uses child stream `i`.
    pub seed: u64,
}

impl Default for BootstrapConfig {
    fn default() -> Self {
        BootstrapConfig {
            n_replicates: 100,
            per_pop_cap: 40,
            ci_level: 0.95,
            seed: 0,
        }
    }
}

impl BootstrapConfig {
    /// Checks the protocol parameters.
    pub fn validate(&self) -> Result<()> {
        if self.n_replicates < 2 {
            return Err(Error::Config(format!(
                "bootstrap needs at least 2 replicates, got {}",
                self.n_replicates
            )));
        }
        if self.per_pop_cap == 0 {
            return Err(Error::Config("per-population cap must be at least 1".into()));
        }
        if !(self.ci_level > 0.0 && self.ci_level < 1.0) {
            return Err(Error::Config(format!(
                "confidence level must lie strictly between 0 and 1, got {}",
                self.ci_level
            )));
        }
        Ok(())
    }
}

/// Point estimate plus percentile band for one bootstrapped statistic.
#[derive(Clone, Debug, PartialEq)]
pub struct BootstrapSummary {
    /// The statistic on the full, unresampled panel.
    pub point: f64,
    /// Lower percentile endpoint of the replicate values.
    pub ci_low: f64,
    /// Upper percentile endpoint of the replicate values.
    pub ci_high: f64,
    /// Values from replicates where the statistic was defined, in
    /// replicate order.
    pub replicate_values: Vec<f64>,
    /// Replicates where the statistic was undefined (e.g. a resample left
    /// every locus monomorphic).
    pub n_missing: usize,
    /// Set when more than half the replicates went missing; the band is
    /// then based on a minority of the draws.
    pub unreliable: bool,
}

/// Nearest-rank percentile interval at `(1±level)/2` on the sorted values.
///
/// NaN entries are treated as missing and excluded before ranking; an
/// input that is empty after exclusion is an error.
pub fn percentile_interval(values: &[f64], level: f64) -> Result<(f64, f64)> {
    if !(level > 0.0 && level < 1.0) {
        return Err(Error::Config(format!(
            "percentile level must lie strictly between 0 and 1, got {level}"
        )));
    }
    let mut sorted: Vec<f64> = values.iter().copied().filter(|v| !v.is_nan()).collect();
    if sorted.is_empty() {
        return Err(Error::UndefinedStatistic(
            "percentile interval of an empty value set".into(),
        ));
    }
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len();
    let at = |p: f64| sorted[((p * n as f64).ceil() as usize).clamp(1, n) - 1];
    Ok((at((1.0 - level) / 2.0), at((1.0 + level) / 2.0)))
}

/// Draws one replicate's row selection: independently per population,
/// `min(population size, cap)` rows uniformly with replacement.
fn draw_rows(panel: &HaplotypePanel, cap: usize, rng: &mut impl Rng) -> Vec<Vec<u32>> {
    panel
        .populations()
        .iter()
        .map(|pop| {
            let members = panel.population_rows(pop).expect("panel lists it");
            let m = members.len().min(cap);
            (0..m)
                .map(|_| members[rng.random_range(0..members.len())])
                .collect()
        })
        .collect()
}

/// Bootstraps a vector-valued statistic (for example a spectrum over a
/// grid of orders) so that every component shares the same resampled panel
/// within each replicate.
///
/// `stat` is evaluated once on the full panel for the point estimates and
/// once per replicate on a capped resample; it must return one value per
/// component every time. A replicate where `stat` reports an undefined
/// statistic is recorded as missing for all components; any other error
/// aborts the bootstrap.
pub fn bootstrap_vector<F>(
    panel: &HaplotypePanel,
    cfg: &BootstrapConfig,
    stat: F,
) -> Result<Vec<BootstrapSummary>>
where
    F: Fn(&PopRows<'_>) -> Result<Vec<f64>> + Sync,
{
    cfg.validate()?;
    if panel.populations().is_empty() {
        return Err(Error::Config("panel has no populations".into()));
    }
    let pops: Vec<String> = panel.populations().to_vec();
    let point = stat(&PopRows::full(panel, &pops)?)?;
    let width = point.len();
    if width == 0 {
        return Err(Error::Config("statistic produced no components".into()));
    }

    let one_replicate = |r: usize| -> Result<Option<Vec<f64>>> {
        let mut rng = stream_rng(cfg.seed, StreamPurpose::Bootstrap, 0, r as u64);
        let rows = draw_rows(panel, cfg.per_pop_cap, &mut rng);
        let view = PopRows::with_rows(panel, pops.clone(), rows)?;
        match stat(&view) {
            Ok(values) => {
                if values.len() != width {
                    return Err(Error::Config(format!(
                        "statistic produced {} components on a replicate but {} on the panel",
                        values.len(),
                        width
                    )));
                }
                Ok(Some(values))
            }
            Err(Error::UndefinedStatistic(_)) => Ok(None),
            Err(e) => Err(e),
        }
    };

    #[cfg(feature = "parallel")]
    let replicates: Vec<Option<Vec<f64>>> = {
        use rayon::prelude::*;
        (0..cfg.n_replicates)
            .into_par_iter()
            .map(one_replicate)
            .collect::<Result<_>>()?
    };
    #[cfg(not(feature = "parallel"))]
    let replicates: Vec<Option<Vec<f64>>> = (0..cfg.n_replicates)
        .map(one_replicate)
        .collect::<Result<_>>()?;

    let n_missing = replicates.iter().filter(|r| r.is_none()).count();
    let unreliable = 2 * n_missing > cfg.n_replicates;
    (0..width)
        .map(|j| {
            let values: Vec<f64> = replicates
                .iter()
                .filter_map(|r| r.as_ref().map(|v| v[j]))
                .collect();
            let (ci_low, ci_high) = percentile_interval(&values, cfg.ci_level)?;
            Ok(BootstrapSummary {
                point: point[j],
                ci_low,
                ci_high,
                replicate_values: values,
                n_missing,
                unreliable,
            })
        })
        .collect()
}

/// Bootstraps a scalar statistic over the panel's populations.
pub fn bootstrap_statistic<F>(
    panel: &HaplotypePanel,
    cfg: &BootstrapConfig,
    stat: F,
) -> Result<BootstrapSummary>
where
    F: Fn(&PopRows<'_>) -> Result<f64> + Sync,
{
    let mut summaries = bootstrap_vector(panel, cfg, |rows| stat(rows).map(|v| vec![v]))?;
    Ok(summaries.pop().expect("one component in, one out"))
}
