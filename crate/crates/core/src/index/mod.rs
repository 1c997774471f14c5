//! Full-text and vector indexes backing search and entity resolution.

mod bm25;
mod vector;

pub use bm25::{Bm25Params, InvertedIndex};
pub use vector::VectorIndex;
