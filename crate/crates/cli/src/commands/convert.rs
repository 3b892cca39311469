//! `fqlens convert`: VCF + sample map → native panel container.

use fqlens_core::error::{Error, Result};
use fqlens_core::io::native::write_native;
use fqlens_core::io::vcf::read_vcf_subset;

use crate::manifest::{manifest_path, sha256_file, FileDigest, ManifestBuilder};
use crate::{CommonArgs, ConvertArgs};

pub fn run(common: &CommonArgs, args: &ConvertArgs) -> Result<u8> {
    let out = common
        .out
        .as_ref()
        .ok_or_else(|| Error::Config("convert needs --out <panel file>".into()))?;

    let mut manifest = ManifestBuilder::new("convert");
    manifest.add_input(&args.vcf)?;
    manifest.add_input(&args.samples)?;
    manifest.set_config(serde_json::json!({
        "vcf": args.vcf.display().to_string(),
        "samples": args.samples.display().to_string(),
        "out": out.display().to_string(),
    }));

    let panel = read_vcf_subset(&args.vcf, &args.samples)?;
    log::info!(
        "parsed {} into {} haplotypes over {} loci",
        args.vcf.display(),
        panel.n_haplotypes(),
        panel.n_loci()
    );
    write_native(&panel, out)?;
    let digest = sha256_file(out)?;

    manifest.write(
        &manifest_path(out),
        vec![FileDigest {
            path: out.display().to_string(),
            sha256: digest.clone(),
        }],
    )?;

    println!(
        "wrote {}: {} haplotypes, {} loci, {} populations ({})",
        out.display(),
        panel.n_haplotypes(),
        panel.n_loci(),
        panel.populations().len(),
        panel.populations().join(", ")
    );
    println!("sha256: {digest}");
    Ok(0)
}
