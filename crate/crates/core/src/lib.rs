//! Fact-based legal judgment prediction.
//!
//! Documents are segmented and tokenized ([`corpus`]), labelled with
//! rhetorical roles ([`roles`]), reduced to a prediction input by role-aware
//! selection or budgeted summarization ([`pipeline`], [`summarizer`]), split
//! into chunks ([`chunker`]), encoded ([`encoder`]) and classified by an
//! attention model over chunk vectors ([`predictor`]). [`explainer`] ranks
//! sentences by occlusion and [`harness`] runs evaluation grids.

pub mod chunker;
pub mod corpus;
pub mod encoder;
pub mod explainer;
pub mod harness;
pub mod pipeline;
pub mod predictor;
pub mod roles;
pub mod summarizer;

pub use corpus::{DocView, Document, RhetoricalRole, Sentence, Split};
pub use roles::RoleSequence;
