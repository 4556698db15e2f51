//! Topic segmentation and labeling for asynchronous conversations.
//!
//! Email and blog threads interleave topics instead of switching
//! sequentially. This crate parses threaded conversations, recovers their
//! fine-grained structure as a fragment quotation graph, segments sentences
//! into topical clusters (lexical-chain, LDA, normalized-cut and supervised
//! models), generates keyphrase labels per topic with biased/co-ranked
//! random walks, and scores annotations against gold standards.

pub mod corpus;
pub mod error;
pub mod fqg;
pub mod graphcut;
pub mod labeler;
pub mod lexchain;
pub mod metrics;
pub mod pipeline;
pub mod segmentation;
pub mod supervised;
pub mod topicmodel;

pub use error::{Error, Result};
pub use segmentation::Segmentation;
