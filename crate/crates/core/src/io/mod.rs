//! File formats: phased VCF subset ingestion, the FQL1 native container,
//! sample maps, genetic maps, and region specifications.

pub mod genmap;
pub mod native;
pub mod regions;
pub mod sample_map;
pub mod vcf;
