//! The FQL1 native container: a lossless, bit-exact panel codec.
//!
//! Layout, all integers little-endian:
//!
//! ```text
//! magic      4 bytes  "FQL1"
//! n_hap      u64
//! n_loci     u64
//! matrix     n_hap rows of ceil(n_loci / 8) bytes, 8 loci per byte,
//!            least-significant bit first, per-row zero padding
//! hap table  n_hap entries: sample_id (u32 length + UTF-8),
//!            hap_index (u8), population (u32 length + UTF-8)
//! locus tbl  n_loci entries: chrom (u32 length + UTF-8),
//!            position (u64), id (u32 length + UTF-8)
//! ```
//!
//! Readers reject bad magic, truncation, oversized counts, nonzero padding
//! bits, and trailing bytes.

use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::panel::{HaplotypeMeta, HaplotypePanel, LocusMeta, PanelBuilder};

const MAGIC: &[u8; 4] = b"FQL1";

/// Writes a panel to `path` in the FQL1 layout.
pub fn write_native(panel: &HaplotypePanel, path: &Path) -> Result<()> {
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    let io_err = |e| Error::io(path, e);

    w.write_all(MAGIC).map_err(io_err)?;
    w.write_all(&(panel.n_haplotypes() as u64).to_le_bytes()).map_err(io_err)?;
    w.write_all(&(panel.n_loci() as u64).to_le_bytes()).map_err(io_err)?;

    let stride = panel.n_loci().div_ceil(8);
    for row in 0..panel.n_haplotypes() {
        let words = panel.row_words(row);
        for byte_idx in 0..stride {
            let word = words[byte_idx / 8];
            let byte = (word >> (8 * (byte_idx % 8))) as u8;
            w.write_all(&[byte]).map_err(io_err)?;
        }
    }
    for hap in panel.haplotypes() {
        write_str(&mut w, &hap.sample_id).map_err(io_err)?;
        w.write_all(&[hap.hap_index]).map_err(io_err)?;
        write_str(&mut w, &hap.population).map_err(io_err)?;
    }
    for locus in panel.loci() {
        write_str(&mut w, &locus.chrom).map_err(io_err)?;
        w.write_all(&locus.position.to_le_bytes()).map_err(io_err)?;
        write_str(&mut w, &locus.id).map_err(io_err)?;
    }
    w.flush().map_err(io_err)
}

fn write_str(w: &mut impl Write, s: &str) -> std::io::Result<()> {
    w.write_all(&(s.len() as u32).to_le_bytes())?;
    w.write_all(s.as_bytes())
}

/// Reads a panel written by [`write_native`].
pub fn read_native(path: &Path) -> Result<HaplotypePanel> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let file_len = file.metadata().map_err(|e| Error::io(path, e))?.len();
    let mut r = Reader {
        inner: BufReader::new(file),
        path,
    };

    let magic = r.bytes::<4>()?;
    if &magic != MAGIC {
        return Err(Error::Format(format!(
            "{}: bad magic {magic:?}, not an FQL1 container",
            path.display()
        )));
    }
    let n_hap = r.u64()?;
    let n_loci = r.u64()?;
    let n_hap = usize::try_from(n_hap)
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| Error::Format(format!("{}: bad haplotype count {n_hap}", path.display())))?;
    let n_loci = usize::try_from(n_loci)
        .map_err(|_| Error::Format(format!("{}: locus count overflow", path.display())))?;
    let stride = n_loci.div_ceil(8);
    // The matrix alone must fit in the remaining bytes; this also guards
    // the multiplication against overflow on absurd counts.
    let matrix_bytes = (n_hap as u64)
        .checked_mul(stride as u64)
        .filter(|&b| 20 + b <= file_len)
        .ok_or_else(|| {
            Error::Format(format!(
                "{}: counts {n_hap}x{n_loci} exceed the file size",
                path.display()
            ))
        })?;
    let _ = matrix_bytes;

    let words_per_row = n_loci.div_ceil(64);
    let mut matrix: Vec<Vec<u64>> = Vec::with_capacity(n_hap);
    let mut row_bytes = vec![0u8; stride];
    for row_idx in 0..n_hap {
        r.fill(&mut row_bytes)?;
        let mut words = vec![0u64; words_per_row];
        for (byte_idx, &b) in row_bytes.iter().enumerate() {
            words[byte_idx / 8] |= u64::from(b) << (8 * (byte_idx % 8));
        }
        if !n_loci.is_multiple_of(8) {
            let last = row_bytes[stride - 1];
            if last >> (n_loci % 8) != 0 {
                return Err(Error::Format(format!(
                    "{}: nonzero padding bits in row {row_idx}",
                    path.display()
                )));
            }
        }
        matrix.push(words);
    }

    let mut haps = Vec::with_capacity(n_hap);
    for _ in 0..n_hap {
        let sample_id = r.string()?;
        let hap_index = r.bytes::<1>()?[0];
        let population = r.string()?;
        haps.push(HaplotypeMeta {
            sample_id,
            hap_index,
            population,
        });
    }
    let mut loci = Vec::with_capacity(n_loci);
    for _ in 0..n_loci {
        let chrom = r.string()?;
        let position = r.u64()?;
        let id = r.string()?;
        loci.push(LocusMeta {
            chrom,
            position,
            id,
        });
    }
    let mut trailing = [0u8; 1];
    match r.inner.read(&mut trailing) {
        Ok(0) => {}
        Ok(_) => {
            return Err(Error::Format(format!(
                "{}: trailing bytes after the locus table",
                path.display()
            )))
        }
        Err(e) => return Err(Error::io(path, e)),
    }

    let mut builder = PanelBuilder::new(loci)?;
    for (meta, words) in haps.into_iter().zip(&matrix) {
        builder.push_packed_row(meta, words).map_err(|e| match e {
            Error::Config(msg) => Error::Format(format!("{}: {msg}", path.display())),
            other => other,
        })?;
    }
    builder.finish().map_err(|e| match e {
        Error::Config(msg) => Error::Format(format!("{}: {msg}", path.display())),
        other => other,
    })
}

struct Reader<'p, R> {
    inner: R,
    path: &'p Path,
}

impl<R: Read> Reader<'_, R> {
    fn fill(&mut self, buf: &mut [u8]) -> Result<()> {
        self.inner.read_exact(buf).map_err(|e|

            if e.kind() == std::io::ErrorKind::UnexpectedEof {
                Error::Format(format!("{}: truncated container", self.path.display()))
            } else {
                Error::io(self.path, e)
            })
    }

    fn bytes<const N: usize>(&mut self) -> Result<[u8; N]> {
        let mut buf = [0u8; N];
        self.fill(&mut buf)?;
        Ok(buf)
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.bytes::<8>()?))
    }

    fn string(&mut self) -> Result<String> {
        let len = u32::from_le_bytes(self.bytes::<4>()?) as usize;
        if len > (1 << 24) {
            return Err(Error::Format(format!(
                "{}: implausible string length {len}",
                self.path.display()
            )));
        }
        let mut buf = vec![0u8; len];
        self.fill(&mut buf)?;
        String::from_utf8(buf).map_err(|_| {
            Error::Format(format!("{}: metadata string is not UTF-8", self.path.display()))
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn tmp() -> (tempfile::TempDir, std::path::PathBuf) {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("panel.fql");
        (dir, path)
    }

    fn random_panel(seed: u64, n_samples: usize, n_loci: usize, n_pops: usize) -> HaplotypePanel {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let loci: Vec<LocusMeta> = (0..n_loci)
            .map(|l| LocusMeta {
                chrom: format!("chr{}", 1 + l / (n_loci / 2 + 1)),
                position: 10 + 3 * (l % (n_loci / 2 + 1)) as u64,
                id: if l % 3 == 0 { format!("v{l}") } else { String::new() },
            })
            .collect();
        let mut b = PanelBuilder::new(loci).unwrap();
        for s in 0..n_samples {
            for hap in 0..2u8 {
                b.push_row(
                    HaplotypeMeta {
                        sample_id: format!("s{s}"),
                        hap_index: hap,
                        population: format!("pop{}", s % n_pops),
                    },
                    (0..n_loci).map(|_| rng.random_bool(0.3)),
                )
                .unwrap();
            }
        }
        b.finish().unwrap()
    }

    fn assert_panels_equal(a: &HaplotypePanel, b: &HaplotypePanel) {
        assert_eq!(a.n_haplotypes(), b.n_haplotypes());
        assert_eq!(a.n_loci(), b.n_loci());
        assert_eq!(a.haplotypes(), b.haplotypes());
        assert_eq!(a.loci(), b.loci());
        for row in 0..a.n_haplotypes() {
            assert_eq!(a.row_words(row), b.row_words(row), "row {row}");
        }
    }

    #[test]
    fn round_trips_small_and_empty_locus_panels() {
        for n_loci in [0usize, 1, 7, 8, 9, 63, 64, 65, 130] {
            let (dir, path) = tmp();
            let panel = random_panel(n_loci as u64, 3, n_loci, 2);
            write_native(&panel, &path).unwrap();
            let back = read_native(&path).unwrap();
            assert_panels_equal(&panel, &back);
            drop(dir);
        }
    }

    #[test]
    fn round_trips_large_random_panel() {
        // 1,000 haplotypes x 100,000 loci, seeded.
        let (_dir, path) = tmp();
        let panel = random_panel(42, 500, 100_000, 5);
        write_native(&panel, &path).unwrap();
        let back = read_native(&path).unwrap();
        assert_panels_equal(&panel, &back);
    }

    #[test]
    fn rejects_bad_magic_truncation_and_trailing() {
        let (dir, path) = tmp();
        let panel = random_panel(7, 2, 10, 2);
        write_native(&panel, &path).unwrap();
        let good = std::fs::read(&path).unwrap();

        let mut bad = good.clone();
        bad[0] = b'X';
        std::fs::write(&path, &bad).unwrap();
        assert!(matches!(read_native(&path), Err(Error::Format(m)) if m.contains("magic")));

        std::fs::write(&path, &good[..good.len() - 3]).unwrap();
        assert!(matches!(read_native(&path), Err(Error::Format(m)) if m.contains("truncated")));

        let mut extra = good.clone();
        extra.push(0);
        std::fs::write(&path, &extra).unwrap();
        assert!(matches!(read_native(&path), Err(Error::Format(m)) if m.contains("trailing")));

        // Counts larger than the payload.
        let mut huge = good;
        huge[4..12].copy_from_slice(&u64::MAX.to_le_bytes());
        std::fs::write(&path, &huge).unwrap();
        assert!(matches!(read_native(&path), Err(Error::Format(m)) if m.contains("exceed")));
        drop(dir);
    }

    #[test]
    fn rejects_nonzero_padding() {
        let (dir, path) = tmp();
        let panel = random_panel(7, 1, 3, 1); // stride 1, 5 padding bits
        write_native(&panel, &path).unwrap();
        let mut bytes = std::fs::read(&path).unwrap();
        bytes[20] |= 0b1000_0000;
        std::fs::write(&path, &bytes).unwrap();
        assert!(matches!(read_native(&path), Err(Error::Format(m)) if m.contains("padding")));
        drop(dir);
    }

    mod properties {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(32))]
            #[test]
            fn round_trip_is_lossless(
                seed in any::<u64>(),
                n_samples in 1usize..6,
                n_loci in 0usize..80,
                n_pops in 1usize..4,
            ) {
                let (dir, path) = tmp();
                let panel = random_panel(seed, n_samples, n_loci, n_pops);
                write_native(&panel, &path).unwrap();
                let back = read_native(&path).unwrap();
                assert_panels_equal(&panel, &back);
                drop(dir);
            }
        }
    }
}
