//! Core library for route-as-string retrosynthesis modeling.
//!
//! A synthesis route is a tree of molecule strings: the root is the target
//! compound, leaves are starting materials, and each parent/child edge set is
//! one reaction. Routes serialize to a compact string grammar, a conditional
//! encoder-decoder transformer is trained to emit whole route strings, beam
//! search plus a chemical-validity filter turns model output into ranked
//! candidate routes, and evaluation scores predictions with
//! permutation-invariant Top-K accuracy.

pub mod decoding;
pub mod model;
pub mod pipeline;
pub mod route;
pub mod smiles;
pub mod tensor;
pub mod tokenizer;

pub use decoding::{beam_search, filter_candidates, BeamCandidate, BeamScorer, FilteredRoute};
pub use model::{Checkpoint, ModelConfig, Transformer};
pub use route::{RouteError, RouteNode, RouteString, StockSet};
pub use smiles::{lint, lint_route, LintReport};
pub use tensor::{AdamState, LrSchedule, Tensor, TensorError};
pub use tokenizer::{TokenSeq, Vocab, VocabError};
