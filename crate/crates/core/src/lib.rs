//! Embedding-space safety toolkit for text-to-image prompts.
//!
//! Token embeddings are compared against two user-supplied concept subspaces,
//! a toxic one spanned by the columns of `C` and a clean one spanned by the
//! columns of `R`. A token whose residual outside `Range(C)` is no larger than
//! its residual outside `Range(R)` is labeled risky. Risky tokens are replaced
//! by `(I - V) p + P_R p`, where `V` projects onto `Range(C)` and `P_R` onto
//! `Range(R)`; every other token passes through untouched.
//!
//! Module map:
//!
//! * [`subspace`]: SVD, numerical rank, orthogonal projectors, pseudoinverse
//!   and a Gram-Schmidt oracle.
//! * [`concepts`]: concept lists and the `EMB1` / `EMB1-JSON` embedding files.
//! * [`risk`]: projector bundles, complementary distances and verdicts.
//! * [`purify`]: the dual-space transform and token-wise substitution.
//! * [`toyembed`]: a deterministic whitespace embedder for desk-scale runs.
//! * [`bundle_file`]: the `PGB1` on-disk bundle.
//! * [`report`]: the canonical JSON risk report.
//! * `cli` (feature `cli`): the `purify` command-line tool.

pub mod bundle_file;
pub mod concepts;
mod error;
pub mod matrix;
pub mod purify;
pub mod report;
pub mod risk;
pub mod subspace;
pub mod toyembed;

#[cfg(feature = "cli")]
pub mod cli;

pub use concepts::{Concept, ConceptList, EmbeddingFile, EmbeddingFormat, Role, Token, TokenizedPrompt};
pub use error::{Error, Result};
pub use matrix::Matrix;
pub use purify::{PurifiedPrompt, PurifyConfig, PurifyMode, ZeroFallback};
pub use risk::{PromptVerdict, ProjectorBundle, TiePolicy, TieRule, TokenLabel, TokenRisk, Verdict};
pub use subspace::{Projector, SvdResult, DEFAULT_REL_TOL};
pub use toyembed::ToyLexicon;
