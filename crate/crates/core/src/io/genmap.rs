//! Sex-specific genetic maps: piecewise-linear base-pair to centimorgan
//! interpolation.

use std::io::{BufRead, BufReader};
use std::path::Path;

use crate::error::{Error, Result};
use crate::sim::Sex;

/// Per-chromosome, per-sex cumulative recombination maps.
///
/// Each chromosome holds knots `(position_bp, cM_male, cM_female)` with
/// strictly increasing positions and non-decreasing cumulative distances.
/// Queries interpolate linearly between knots and extrapolate as a constant
/// beyond the first and last knot.
#[derive(Debug, Clone, PartialEq)]
pub struct GeneticMap {
    chroms: Vec<ChromMap>,
}

#[derive(Debug, Clone, PartialEq)]
struct ChromMap {
    name: String,
    bp: Vec<u64>,
    /// Indexed by [`sex_index`]: 0 = female, 1 = male.
    cm: [Vec<f64>; 2],
}

#[inline]
fn sex_index(sex: Sex) -> usize {
    match sex {
        Sex::Female => 0,
        Sex::Male => 1,
    }
}

impl GeneticMap {
    /// Reads a four-column TSV: chromosome, position_bp, cM_male,
    /// cM_female. Lines starting with `#` and blank lines are skipped.
    /// Rows must be grouped by chromosome with strictly increasing
    /// positions and non-decreasing cumulative distances.
    pub fn read(path: &Path) -> Result<Self> {
        let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        let mut chroms: Vec<ChromMap> = Vec::new();
        for (i, line) in BufReader::new(file).lines().enumerate() {
            let line_no = (i + 1) as u64;
            let line = line.map_err(|e| Error::io(path, e))?;
            let text = line.trim_end_matches(['\r', '\n']);
            if text.is_empty() || text.starts_with('#') {
                continue;
            }
            let fields: Vec<&str> = text.split('\t').collect();
            if fields.len() != 4 {
                return Err(Error::parse(
                    path,
                    line_no,
                    format!("expected 4 tab-separated columns, found {}", fields.len()),
                ));
            }
            let pos: u64 = fields[1].parse().map_err(|_| {
                Error::parse(path, line_no, format!("position {:?} is not an integer", fields[1]))
            })?;
            let parse_cm = |s: &str| -> Result<f64> {
                let v: f64 = s.parse().map_err(|_| {
                    Error::parse(path, line_no, format!("centimorgan value {s:?} is not a number"))
                })?;
                if !v.is_finite() || v < 0.0 {
                    return Err(Error::parse(
                        path,
                        line_no,
                        format!("centimorgan value {v} must be finite and non-negative"),
                    ));
                }
                Ok(v)
            };
            let cm_male = parse_cm(fields[2])?;
            let cm_female = parse_cm(fields[3])?;

            let chrom = fields[0];
            let current = match chroms.last_mut() {
                Some(c) if c.name == chrom => c,
                _ => {
                    if chroms.iter().any(|c| c.name == chrom) {
                        return Err(Error::parse(
                            path,
                            line_no,
                            format!("chromosome {chrom} appears in two separate blocks"),
                        ));
                    }
                    chroms.push(ChromMap {
                        name: chrom.to_string(),
                        bp: Vec::new(),
                        cm: [Vec::new(), Vec::new()],
                    });
                    chroms.last_mut().expect("just pushed")
                }
            };
            if let Some(&last) = current.bp.last() {
                if pos <= last {
                    return Err(Error::parse(
                        path,
                        line_no,
                        format!("positions must strictly increase within {chrom}: {last} then {pos}"),
                    ));
                }
            }
            for (column, value) in [(&current.cm[1], cm_male), (&current.cm[0], cm_female)] {
                if let Some(&last) = column.last() {
                    if value < last {
                        return Err(Error::parse(
                            path,
                            line_no,
                            format!("decreasing cumulative distance in {chrom}: {last} then {value}"),
                        ));
                    }
                }
            }
            current.bp.push(pos);
            current.cm[1].push(cm_male);
            current.cm[0].push(cm_female);
        }
        if chroms.is_empty() {
            return Err(Error::Format(format!("genetic map {} is empty", path.display())));
        }
        Ok(GeneticMap { chroms })
    }

    /// A uniform synthetic map: `cm_per_mb` centimorgans per megabase,
    /// identical for both sexes, two knots per chromosome at position 0 and
    /// at the chromosome length.
    pub fn uniform(chrom_lengths: &[(String, u64)], cm_per_mb: f64) -> Result<Self> {
        if chrom_lengths.is_empty() {
            return Err(Error::Config("uniform map needs at least one chromosome".into()));
        }
        if !cm_per_mb.is_finite() || cm_per_mb < 0.0 {
            return Err(Error::Config(format!(
                "centimorgans per megabase must be finite and non-negative, got {cm_per_mb}"
            )));
        }
        let mut chroms = Vec::new();
        for (name, length) in chrom_lengths {
            if *length == 0 {
                return Err(Error::Config(format!("chromosome {name} has zero length")));
            }
            if chroms.iter().any(|c: &ChromMap| &c.name == name) {
                return Err(Error::Config(format!("duplicate chromosome {name}")));
            }
            let end_cm = *length as f64 / 1_000_000.0 * cm_per_mb;
            chroms.push(ChromMap {
                name: name.clone(),
                bp: vec![0, *length],
                cm: [vec![0.0, end_cm], vec![0.0, end_cm]],
            });
        }
        Ok(GeneticMap { chroms })
    }

    /// Chromosome names in map order.
    pub fn chromosomes(&self) -> impl Iterator<Item = &str> {
        self.chroms.iter().map(|c| c.name.as_str())
    }

    /// First and last knot positions of a chromosome.
    pub fn bp_span(&self, chrom: &str) -> Result<(u64, u64)> {
        let c = self.chrom(chrom)?;
        Ok((c.bp[0], *c.bp.last().expect("non-empty")))
    }

    fn chrom(&self, name: &str) -> Result<&ChromMap> {
        self.chroms
            .iter()
            .find(|c| c.name == name)
            .ok_or_else(|| Error::Config(format!("chromosome {name} not in the genetic map")))
    }

    /// Cumulative distance at a position: linear between knots, constant
    /// beyond the ends.
    pub fn cm_at(&self, chrom: &str, bp: u64, sex: Sex) -> Result<f64> {
        let c = self.chrom(chrom)?;
        let ys = &c.cm[sex_index(sex)];
        let xs = &c.bp;
        if bp <= xs[0] {
            return Ok(ys[0]);
        }
        if bp >= *xs.last().expect("non-empty") {
            return Ok(*ys.last().expect("non-empty"));
        }
        let i = xs.partition_point(|&x| x <= bp);
        let (x0, x1) = (xs[i - 1] as f64, xs[i] as f64);
        let t = (bp as f64 - x0) / (x1 - x0);
        Ok(ys[i - 1] + t * (ys[i] - ys[i - 1]))
    }

    /// Inverse lookup: the position whose cumulative distance is `cm`,
    /// clamped to the knot range. Plateaus (zero-recombination stretches)
    /// resolve to their left edge.
    pub fn bp_at(&self, chrom: &str, cm: f64, sex: Sex) -> Result<u64> {
        let c = self.chrom(chrom)?;
        let ys = &c.cm[sex_index(sex)];
        let xs = &c.bp;
        if cm <= ys[0] {
            return Ok(xs[0]);
        }
        if cm >= *ys.last().expect("non-empty") {
            let i = ys.partition_point(|&y| y < *ys.last().expect("non-empty"));
            return Ok(xs[i]);
        }
        let i = ys.partition_point(|&y| y < cm);
        let (y0, y1) = (ys[i - 1], ys[i]);
        let t = (cm - y0) / (y1 - y0);
        let bp = xs[i - 1] as f64 + t * (xs[i] - xs[i - 1]) as f64;
        Ok(bp.round() as u64)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn map_from(content: &str) -> Result<GeneticMap> {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(content.as_bytes()).unwrap();
        GeneticMap::read(f.path())
    }

    #[test]
    fn interpolates_midpoints_linearly() {
        let m = map_from("1\t100\t0.0\t0.0\n1\t300\t2.0\t4.0\n").unwrap();
        assert_eq!(m.cm_at("1", 200, Sex::Male).unwrap(), 1.0);
        assert_eq!(m.cm_at("1", 200, Sex::Female).unwrap(), 2.0);
        assert_eq!(m.cm_at("1", 150, Sex::Male).unwrap(), 0.5);
    }

    #[test]
    fn extrapolates_constant_beyond_knots() {
        let m = map_from("1\t100\t1.0\t1.5\n1\t300\t2.0\t4.0\n").unwrap();
        assert_eq!(m.cm_at("1", 1000, Sex::Male).unwrap(), 2.0);
        assert_eq!(m.cm_at("1", 1000, Sex::Female).unwrap(), 4.0);
        assert_eq!(m.cm_at("1", 10, Sex::Male).unwrap(), 1.0);
        assert_eq!(m.cm_at("1", 10, Sex::Female).unwrap(), 1.5);
    }

    #[test]
    fn uniform_map_rate_example() {
        let m = GeneticMap::uniform(&[("1".into(), 10_000_000)], 1.0).unwrap();
        for sex in [Sex::Male, Sex::Female] {
            assert!((m.cm_at("1", 3_000_000, sex).unwrap() - 3.0).abs() < 1e-12);
        }
        assert_eq!(m.bp_at("1", 3.0, Sex::Male).unwrap(), 3_000_000);
    }

    #[test]
    fn rejects_malformed_maps() {
        assert!(map_from("").is_err());
        assert!(map_from("1\t100\t0.0\n").is_err());
        assert!(map_from("1\t100\t0.0\t0.0\n1\t100\t1.0\t1.0\n").is_err());
        assert!(map_from("1\t200\t0.0\t0.0\n1\t100\t1.0\t1.0\n").is_err());
        assert!(map_from("1\t100\t2.0\t0.0\n1\t200\t1.0\t1.0\n").is_err());
        assert!(map_from("1\t100\t0.0\t2.0\n1\t200\t1.0\t1.0\n").is_err());
        assert!(map_from("1\t100\t0.0\t0.0\n2\t50\t0.0\t0.0\n1\t200\t1.0\t1.0\n").is_err());
        assert!(map_from("1\t100\t-1.0\t0.0\n").is_err());
        // Plateaus (non-decreasing) are fine.
        assert!(map_from("1\t100\t1.0\t1.0\n1\t200\t1.0\t1.0\n").is_ok());
    }

    #[test]
    fn unknown_chromosome_is_an_error() {
        let m = map_from("1\t100\t0.0\t0.0\n1\t300\t2.0\t4.0\n").unwrap();
        assert!(m.cm_at("7", 100, Sex::Male).is_err());
    }

    #[test]
    fn monotone_through_parse_interpolate_inverse_cycles() {
        let m = map_from(
            "1\t100\t0.0\t0.0\n1\t200\t1.0\t2.0\n1\t400\t1.0\t2.5\n1\t500\t3.0\t6.0\n",
        )
        .unwrap();
        let mut last_cm = -1.0;
        for bp in (90..=510).step_by(5) {
            let cm = m.cm_at("1", bp, Sex::Male).unwrap();
            assert!(cm >= last_cm, "cm not monotone at {bp}");
            last_cm = cm;
            let back_bp = m.bp_at("1", cm, Sex::Male).unwrap();
            let cm2 = m.cm_at("1", back_bp, Sex::Male).unwrap();
            assert!((cm2 - cm).abs() < 1e-9, "cycle drift at {bp}: {cm} vs {cm2}");
        }
        // Plateau inverse resolves to the left edge.
        assert_eq!(m.bp_at("1", 1.0, Sex::Male).unwrap(), 200);
    }
}
