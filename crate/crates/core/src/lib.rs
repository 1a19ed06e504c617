//! Vector-set search over table repositories: quantization, partition
//! indexing, clustered matching bounds and pruned top-k retrieval.

pub mod bundle;
pub mod centroid_ann;
pub mod error;
pub mod eval;
pub mod exact_matching;
pub mod mwmto;
pub mod partition_index;
pub mod pipeline;
pub mod pruning;
pub mod quantizer;
pub mod refinement;
pub mod repository;

pub use error::{Error, ErrorKind, Result};
