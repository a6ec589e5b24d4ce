//! Document mining over local record containers.
//!
//! A JSON-lines corpus is imported into a binary [`store`] container and
//! turned into weighted term vectors by [`text`] and [`weighting`]. Analysis
//! stages build on those vectors: [`similarity`] scores document pairs,
//! [`citation`] resolves free-text references against the corpus, and
//! [`classify`] assigns subject codes by nearest neighbours.
//!
//! The [`workflow`] runner chains stages through sealed containers. Every
//! stage gives byte-identical output for any partition count.
//!
//! Runnable walkthroughs live in `examples/`:
//!
//! ```text
//! cargo run --example record_store
//! cargo run --example workflow
//! ```

pub mod citation;
pub mod classify;
pub mod corpus;
pub mod error;
pub mod hash;
pub mod json;
pub mod params;
pub mod partition;
pub mod pipeline;
pub mod porter;
pub mod similarity;
pub mod store;
pub mod text;
pub mod weighting;
pub mod workflow;

pub use corpus::DocumentRecord;
pub use error::{Error, Result};
pub use params::Params;
pub use store::{RecordContainer, SortedContainer};
pub use weighting::WeightVector;
