//! Constrained text generation with block inverse prompting.
//!
//! The crate is organised around the pieces of the generation pipeline:
//!
//! * [`model`]: the block (infilling) language-model interface, with a
//!   deterministic mock and an HTTP client.
//! * [`pingshui`]: rhyme dictionary and the eight-rule Pingshui verifier,
//!   including prefix feasibility checks used to prune beams.
//! * [`scorer`]: masked-target prompts and the mean log-probability score.
//! * [`beam`]: beam-based generation of one sentence with replacement of
//!   infeasible beams.
//! * [`generate`]: sentence-by-sentence poem generation with revise and
//!   rewrite passes, plus token-cost estimates.
//! * [`evaluation`]: review ingestion, Answer-Ranking scores and summary tables.

pub mod beam;
pub mod evaluation;
pub mod generate;
pub mod model;
pub mod pingshui;
pub mod scorer;
pub mod seed;

pub use beam::{generate_constrained_sentence, BeamConfig, BeamError, Selection, SentenceResult};
pub use generate::{estimate_token_cost, generate_poem, CostMode, CostParams, GenerationConfig, GenerationTrace};
pub use model::{BlockContext, BlockModel, LogProbSeries, MockModel, RemoteModel, SamplingParams};
pub use pingshui::{Poem, PoemFormat, RhymeDictionary, Verdict, Verifier, VerifyOptions, Violation};
pub use scorer::{BiproScore, Phase, PromptTemplates, ScoreWeights};
