//! Forward-time diploid simulator with deme structure, pedigree-aware mate
//! choice, sex-specific recombination, and Poisson fertility.

mod config;
mod founders;
mod gamete;
mod mating;
mod pedigree;
mod run;

pub use config::{FounderSpec, MapSpec, PanmixiaSchedule, ScheduleEntry, SimConfig};
pub use founders::{founders_from_panel, synth_founders, FoundingState, SyntheticDeme};
pub use gamete::{GenomePool, RecombEngine};
pub use mating::{pair_generation, Couple};
pub use pedigree::{
    mate_eligibility, Eligibility, IndivId, Individual, Pedigree, RefusalReason, Sex,
    ELIGIBILITY_WINDOW,
};
pub use run::{
    cohort_panel, run_experiment, run_experiment_with, ExperimentOutput, GenerationRecord,
    SimStatus,
};
