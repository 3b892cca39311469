//! Region specifications: named groups of population ids.

use std::collections::BTreeMap;
use std::path::Path;

use crate::error::{Error, Result};

/// Named, disjoint population groupings.
///
/// Regions are held sorted by id. Every region is non-empty, populations
/// are unique within a region, and no population belongs to two regions.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RegionSpec {
    regions: Vec<(String, Vec<String>)>,
}

#[derive(serde::Deserialize)]
struct RawSpec {
    regions: BTreeMap<String, Vec<String>>,
}

impl RegionSpec {
    /// Reads a region file; the format is chosen by extension
    /// (`.toml` or `.json`).
    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let raw: RawSpec = match path.extension().and_then(|e| e.to_str()) {
            Some("toml") => toml::from_str(&text)
                .map_err(|e| Error::Format(format!("{}: {e}", path.display())))?,
            Some("json") => serde_json::from_str(&text)
                .map_err(|e| Error::Format(format!("{}: {e}", path.display())))?,
            other => {
                return Err(Error::Config(format!(
                    "region file {} has unsupported extension {other:?}; use .toml or .json",
                    path.display()
                )))
            }
        };
        Self::from_map(raw.regions)
    }

    /// Builds a spec from already-parsed groups.
    pub fn from_map(regions: BTreeMap<String, Vec<String>>) -> Result<Self> {
        if regions.is_empty() {
            return Err(Error::Config("region spec defines no regions".into()));
        }
        let mut seen: BTreeMap<&str, &str> = BTreeMap::new();
        for (id, pops) in &regions {
            if pops.is_empty() {
                return Err(Error::Config(format!("region {id} has no populations")));
            }
            let mut sorted = pops.clone();
            sorted.sort();
            if sorted.windows(2).any(|w| w[0] == w[1]) {
                return Err(Error::Config(format!("region {id} lists a population twice")));
            }
            for pop in pops {
                if let Some(prev) = seen.insert(pop, id) {
                    return Err(Error::Config(format!(
                        "population {pop} appears in regions {prev} and {id}"
                    )));
                }
            }
        }
        Ok(RegionSpec {
            regions: regions.into_iter().collect(),
        })
    }

    /// The populations of one region, in file order.
    pub fn get(&self, region: &str) -> Option<&[String]> {
        self.regions
            .binary_search_by(|(id, _)| id.as_str().cmp(region))
            .ok()
            .map(|i| self.regions[i].1.as_slice())
    }

    /// All regions, sorted by id.
    pub fn iter(&self) -> impl Iterator<Item = (&str, &[String])> {
        self.regions.iter().map(|(id, pops)| (id.as_str(), pops.as_slice()))
    }

    /// The region a population belongs to, if any.
    pub fn region_of(&self, pop: &str) -> Option<&str> {
        self.regions
            .iter()
            .find(|(_, pops)| pops.iter().any(|p| p == pop))
            .map(|(id, _)| id.as_str())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn from_file(name: &str, content: &str) -> Result<RegionSpec> {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join(name);
        let mut f = std::fs::File::create(&path).unwrap();
        f.write_all(content.as_bytes()).unwrap();
        RegionSpec::from_path(&path)
    }

    #[test]
    fn reads_toml_and_json() {
        let toml = from_file(
            "r.toml",
            "[regions]\nnorth = [\"WA\", \"EA\"]\nsouth = [\"CSN\"]\n",
        )
        .unwrap();
        let json = from_file(
            "r.json",
            r#"{"regions": {"north": ["WA", "EA"], "south": ["CSN"]}}"#,
        )
        .unwrap();
        assert_eq!(toml, json);
        assert_eq!(toml.get("north").unwrap(), ["WA".to_string(), "EA".to_string()]);
        assert_eq!(toml.region_of("CSN"), Some("south"));
        assert_eq!(toml.region_of("XX"), None);
        assert_eq!(toml.iter().count(), 2);
    }

    #[test]
    fn rejects_invalid_groupings() {
        assert!(from_file("r.toml", "[regions]\n").is_err());
        assert!(from_file("r.toml", "[regions]\nnorth = []\n").is_err());
        assert!(from_file("r.toml", "[regions]\nnorth = [\"WA\", \"WA\"]\n").is_err());
        assert!(from_file(
            "r.toml",
            "[regions]\nnorth = [\"WA\"]\nsouth = [\"WA\"]\n"
        )
        .is_err());
        assert!(from_file("r.txt", "regions:\n").is_err());
        assert!(from_file("r.toml", "not toml [").is_err());
    }
}
