//! Phased biallelic VCF ingestion.
//!
//! A deliberately narrow reader: diploid GT fields, `|`-phased, alleles 0
//! and 1 only, no missing data. Anything else is rejected with the line
//! number and locus coordinates. Parsing is single-pass with memory bounded
//! by the packed matrix itself.

use std::io::{BufRead, BufReader};
use std::path::Path;

use crate::error::{Error, Result};
use crate::panel::{HaplotypeMeta, HaplotypePanel, LocusMeta, PanelBuilder};

use super::sample_map::read_sample_map;

/// Reads a phased biallelic VCF into a panel, two haplotype rows per
/// sample (haplotype index 0 is the allele left of the `|`).
///
/// `sample_map` is a two-column TSV assigning every sample in the VCF
/// header to a population.
pub fn read_vcf_subset(path: &Path, sample_map: &Path) -> Result<HaplotypePanel> {
    let pops = read_sample_map(sample_map)?;
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = BufReader::new(file);

    let mut samples: Vec<String> = Vec::new();
    let mut loci: Vec<LocusMeta> = Vec::new();
    // Packed row bits, two rows per sample, grown one word-column at a time.
    let mut rows: Vec<Vec<u64>> = Vec::new();
    let mut line = String::new();
    let mut line_no = 0u64;
    let mut saw_header = false;
    let mut last_seen: Option<(String, u64)> = None;
    let mut seen_chroms: Vec<String> = Vec::new();

    loop {
        line.clear();
        let n = reader.read_line(&mut line).map_err(|e| Error::io(path, e))?;
        if n == 0 {
            break;
        }
        line_no += 1;
        let text = line.trim_end_matches(['\r', '\n']);
        if text.is_empty() || text.starts_with("##") {
            continue;
        }
        if let Some(header) = text.strip_prefix("#CHROM") {
            let fields: Vec<&str> = header.split('\t').collect();
            // Expect the 8 remaining fixed columns, then samples.
            if fields.len() < 9 || fields[1..9] != ["POS", "ID", "REF", "ALT", "QUAL", "FILTER", "INFO", "FORMAT"]
            {
                return Err(Error::parse(path, line_no, "malformed #CHROM header line"));
            }
            samples = fields[9..].iter().map(|s| s.to_string()).collect();
            if samples.is_empty() {
                return Err(Error::parse(path, line_no, "no sample columns"));
            }
            for s in &samples {
                if !pops.contains_key(s) {
                    return Err(Error::parse(
                        path,
                        line_no,
                        format!("sample {s} missing from the sample map"),
                    ));
                }
            }
            rows = vec![Vec::new(); samples.len() * 2];
            saw_header = true;
            continue;
        }
        if !saw_header {
            return Err(Error::parse(path, line_no, "data line before #CHROM header"));
        }
        parse_record(
            path,
            line_no,
            text,
            samples.len(),
            &mut loci,
            &mut rows,
            &mut last_seen,
            &mut seen_chroms,
        )?;
    }
    if !saw_header {
        return Err(Error::Format(format!("{}: no #CHROM header", path.display())));
    }

    let mut builder = PanelBuilder::new(loci)?;
    for (s, sample) in samples.iter().enumerate() {
        for hap in 0..2u8 {
            builder.push_packed_row(
                HaplotypeMeta {
                    sample_id: sample.clone(),
                    hap_index: hap,
                    population: pops[sample].clone(),
                },
                &rows[s * 2 + hap as usize],
            )?;
        }
    }
    builder.finish()
}

#[allow(clippy::too_many_arguments)]
fn parse_record(
    path: &Path,
    line_no: u64,
    text: &str,
    n_samples: usize,
    loci: &mut Vec<LocusMeta>,
    rows: &mut [Vec<u64>],
    last_seen: &mut Option<(String, u64)>,
    seen_chroms: &mut Vec<String>,
) -> Result<()> {
    let fields: Vec<&str> = text.split('\t').collect();
    if fields.len() != 9 + n_samples {
        return Err(Error::parse(
            path,
            line_no,
            format!("expected {} columns, found {}", 9 + n_samples, fields.len()),
        ));
    }
    let chrom = fields[0];
    let pos: u64 = fields[1].parse().map_err(|_| {
        Error::parse(path, line_no, format!("position {:?} is not an integer", fields[1]))
    })?;
    let at = |what: &str| format!("{what} at {chrom}:{pos}");

    let alt = fields[4];
    if alt.contains(',') {
        return Err(Error::parse(path, line_no, at("multi-allelic ALT")));
    }
    if alt == "." || alt.is_empty() {
        return Err(Error::parse(path, line_no, at("missing ALT allele")));
    }

    // Ordering and chromosome-block checks, reported with coordinates.
    match last_seen {
        Some((last_chrom, last_pos)) if last_chrom == chrom => {
            if pos <= *last_pos {
                return Err(Error::parse(
                    path,
                    line_no,
                    at("records not strictly position-sorted"),
                ));
            }
            *last_pos = pos;
        }
        _ => {
            if seen_chroms.iter().any(|c| c == chrom) {
                return Err(Error::parse(
                    path,
                    line_no,
                    at("chromosome appears in two separate blocks"),
                ));
            }
            seen_chroms.push(chrom.to_string());
            *last_seen = Some((chrom.to_string(), pos));
        }
    }

    let format = fields[8];
    let gt_index = format
        .split(':')
        .position(|f| f == "GT")
        .ok_or_else(|| Error::parse(path, line_no, at("FORMAT without GT")))?;

    let locus_index = loci.len();
    let word = locus_index / 64;
    let bit = locus_index % 64;
    for row in rows.iter_mut() {
        if row.len() <= word {
            row.push(0);
        }
    }
    for (s, sample_field) in fields[9..].iter().enumerate() {
        let gt = sample_field.split(':').nth(gt_index).ok_or_else(|| {
            Error::parse(path, line_no, at("sample field shorter than FORMAT"))
        })?;
        if gt.contains('/') {
            return Err(Error::parse(path, line_no, at("unphased genotype")));
        }
        let (a, b) = gt.split_once('|').ok_or_else(|| {
            Error::parse(path, line_no, at("genotype is not a phased diploid pair"))
        })?;
        for (hap, allele) in [(0, a), (1, b)] {
            let value = match allele {
                "0" => false,
                "1" => true,
                "." => return Err(Error::parse(path, line_no, at("missing genotype call"))),
                other => {
                    return Err(Error::parse(
                        path,
                        line_no,
                        at(&format!("allele {other:?} is not biallelic")),
                    ))
                }
            };
            if value {
                rows[s * 2 + hap][word] |= 1u64 << bit;
            }
        }
    }
    loci.push(LocusMeta {
        chrom: chrom.to_string(),
        position: pos,
        id: if fields[2] == "." { String::new() } else { fields[2].to_string() },
    });
    Ok(())
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

    const MAP: &str = "s1\tWA\ns2\tWA\ns3\tEA\n";

    fn header(samples: &[&str]) -> String {
        format!(
            "##fileformat=VCFv4.2\n#CHROM\tPOS\tID\tREF\tALT\tQUAL\tFILTER\tINFO\tFORMAT\t{}\n",
            samples.join("\t")
        )
    }

    fn read(vcf_body: &str, map: &str) -> Result<HaplotypePanel> {
        let vcf = write_tmp(vcf_body);
        let map = write_tmp(map);
        read_vcf_subset(vcf.path(), map.path())
    }

    #[test]
    fn single_sample_single_locus() {
        let body = header(&["s1"]) + "1\t100\trs1\tA\tT\t.\tPASS\t.\tGT\t0|1\n";
        let panel = read(&body, "s1\tWA\n").unwrap();
        assert_eq!((panel.n_haplotypes(), panel.n_loci()), (2, 1));
        assert!(!panel.allele(0, 0));
        assert!(panel.allele(1, 0));
        assert_eq!(panel.haplotypes()[0].hap_index, 0);
        assert_eq!(panel.haplotypes()[0].population, "WA");
        assert_eq!(panel.loci()[0].id, "rs1");
    }

    #[test]
    fn golden_three_samples_two_loci() {
        let body = header(&["s1", "s2", "s3"])
            + "1\t100\t.\tA\tG\t.\tPASS\t.\tGT\t0|1\t1|1\t0|0\n\
               1\t250\t.\tC\tT\t.\tPASS\t.\tGT:DP\t1|0:12\t0|0:9\t1|1:30\n";
        let panel = read(&body, MAP).unwrap();
        assert_eq!((panel.n_haplotypes(), panel.n_loci()), (6, 2));
        // Hand-transcribed matrix, rows in sample-pair order.
        let expected = [
            [false, true],
            [true, false],
            [true, false],
            [true, false],
            [false, true],
            [false, true],
        ];
        for (r, want) in expected.iter().enumerate() {
            for (l, &bit) in want.iter().enumerate() {
                assert_eq!(panel.allele(r, l), bit, "row {r} locus {l}");
            }
        }
        // Per-population counts: WA rows 0..4, EA rows 4..6.
        assert_eq!(panel.alt_counts(panel.population_rows("WA").unwrap()), [3, 1]);
        assert_eq!(panel.alt_counts(panel.population_rows("EA").unwrap()), [0, 2]);
    }

    #[test]
    fn rejects_unphased_with_line_and_locus() {
        let body = header(&["s1"]) + "1\t100\t.\tA\tT\t.\tPASS\t.\tGT\t0/1\n";
        match read(&body, "s1\tWA\n") {
            Err(Error::Parse { line, msg, .. }) => {
                assert_eq!(line, 3);
                assert!(msg.contains("unphased"), "{msg}");
                assert!(msg.contains("1:100"), "{msg}");
            }
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn rejects_contract_violations() {
        let cases = [
            ("1\t100\t.\tA\tT,G\t.\t.\t.\tGT\t0|1\n", "multi-allelic"),
            ("1\t100\t.\tA\tT\t.\t.\t.\tGT\t.|1\n", "missing genotype"),
            ("1\t100\t.\tA\tT\t.\t.\t.\tGT\t2|0\n", "not biallelic"),
            ("1\t100\t.\tA\tT\t.\t.\t.\tDP\t12\n", "FORMAT without GT"),
            ("1\t100\t.\tA\tT\t.\t.\t.\tGT\t0|1\textra\n", "columns"),
            (
                "1\t100\t.\tA\tT\t.\t.\t.\tGT\t0|1\n1\t100\t.\tA\tG\t.\t.\t.\tGT\t0|1\n",
                "sorted",
            ),
            (
                "1\t100\t.\tA\tT\t.\t.\t.\tGT\t0|1\n2\t5\t.\tA\tG\t.\t.\t.\tGT\t0|1\n1\t200\t.\tA\tG\t.\t.\t.\tGT\t0|1\n",
                "two separate blocks",
            ),
        ];
        for (records, needle) in cases {
            let body = header(&["s1"]) + records;
            match read(&body, "s1\tWA\n") {
                Err(Error::Parse { msg, .. }) => {
                    assert!(msg.contains(needle), "wanted {needle:?} in {msg:?}")
                }
                other => panic!("expected parse error for {needle}, got {other:?}"),
            }
        }
    }

    #[test]
    fn rejects_sample_absent_from_map() {
        let body = header(&["s1", "sX"]) + "1\t100\t.\tA\tT\t.\t.\t.\tGT\t0|1\t0|0\n";
        match read(&body, MAP) {
            Err(Error::Parse { line, msg, .. }) => {
                assert_eq!(line, 2);
                assert!(msg.contains("sX"), "{msg}");
            }
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn positions_may_restart_on_new_chromosome() {
        let body = header(&["s1"])
            + "1\t100\t.\tA\tT\t.\t.\t.\tGT\t0|1\n\
               1\t101\t.\tA\tT\t.\t.\t.\tGT\t1|1\n\
               2\t7\t.\tA\tT\t.\t.\t.\tGT\t0|0\n";
        let panel = read(&body, "s1\tWA\n").unwrap();
        assert_eq!(panel.n_loci(), 3);
        assert_eq!(panel.loci()[2].chrom, "2");
    }
}
