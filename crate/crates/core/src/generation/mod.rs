//! Candidate pools: genome encodings, static pool files, a genetic proposer
//! seeded from labeled data, and known-constraint filtering.

mod constraints;
mod ga;
mod genome;
mod pool;

pub use constraints::{filter_constraints, Constraint, KnownConstraint};
pub use ga::{propose_pool, Crossover, GenerationStats, GeneratorConfig, ParentSelection, ParentSet, Proposal};
pub(crate) use ga::random_genome;
pub use genome::{id_for_key, Candidate, Encoding, Featurizer, Genome, GenomeSpace};
pub use pool::{load_pool, read_pool, write_pool, LoadedPool};
