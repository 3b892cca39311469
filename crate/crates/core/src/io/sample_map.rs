//! Sample-to-population map: a two-column TSV.

use std::collections::HashMap;
use std::io::{BufRead, BufReader};
use std::path::Path;

use crate::error::{Error, Result};

/// Reads a two-column TSV mapping sample id to population id.
///
/// Lines starting with `#` and blank lines are skipped. Duplicate sample
/// ids are rejected.
pub fn read_sample_map(path: &Path) -> Result<HashMap<String, String>> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut map = HashMap::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line_no = (i + 1) as u64;
        let line = line.map_err(|e| Error::io(path, e))?;
        let trimmed = line.trim_end_matches(['\r', '\n']);
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let mut fields = trimmed.split('\t');
        let (sample, pop) = match (fields.next(), fields.next(), fields.next()) {
            (Some(s), Some(p), None) if !s.is_empty() && !p.is_empty() => (s, p),
            _ => {
                return Err(Error::parse(
                    path,
                    line_no,
                    "expected exactly two tab-separated columns: sample, population",
                ))
            }
        };
        if map.insert(sample.to_string(), pop.to_string()).is_some() {
            return Err(Error::parse(
                path,
                line_no,
                format!("duplicate sample id {sample}"),
            ));
        }
    }
    if map.is_empty() {
        return Err(Error::Format(format!(
            "sample map {} has no entries",
            path.display()
        )));
    }
    Ok(map)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn write_tmp(content: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(content.as_bytes()).unwrap();
        f
    }

    #[test]
    fn parses_two_columns_skipping_comments() {
        let f = write_tmp("# comment\ns1\tWA\n\ns2\tEA\n");
        let m = read_sample_map(f.path()).unwrap();
        assert_eq!(m.len(), 2);
        assert_eq!(m["s1"], "WA");
        assert_eq!(m["s2"], "EA");
    }

    #[test]
    fn rejects_bad_shapes() {
        for bad in ["s1\n", "s1\tWA\textra\n", "s1\tWA\ns1\tEA\n", "\tWA\n"] {
            let f = write_tmp(bad);
            assert!(read_sample_map(f.path()).is_err(), "{bad:?}");
        }
        let f = write_tmp("# only comments\n");
        assert!(read_sample_map(f.path()).is_err());
    }

    #[test]
    fn errors_carry_line_numbers() {
        let f = write_tmp("s1\tWA\nbroken line\n");
        match read_sample_map(f.path()) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("expected parse error, got {other:?}"),
        }
    }
}
