//! Word-level vocabulary construction over character token sequences.
//!
//! Candidate words are frequent n-grams of the preprocessed corpus. For each
//! vocabulary size the joint distribution of words and characters is found
//! by entropic optimal transport, the vocabulary entropy is read off the
//! plan, and the size with the largest entropy drop is kept.

mod candidates;
mod segment;
mod select;
mod transport;

pub use candidates::{char_frequencies, collect_candidates, CandidateWord};
pub use segment::{segment, sign_token_ids, SignToken};
pub use select::{
    compose_word_embeddings, select_vocab, EntropyCurve, EntropyPoint, SolverConfig, VocabConfig, WordCodebook,
    WordToken, FULL_SCALE_INCREMENT,
};
pub use transport::{
    build_problem, codebook_entropy, sinkhorn_solve, transport_objective, TransportPlan, TransportProblem,
};
