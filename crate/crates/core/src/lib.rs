//! Semantic text delivery over a resource-constrained OFDMA downlink.
//!
//! Documents arrive annotated with entity–relation–entity triples. A bilinear
//! attention scorer ranks the triples, the base station sends the most
//! important ones that fit the delay-limited token budget of each user's
//! resource block, and the receiver rebuilds text from them. Recovery quality
//! is measured with MSS (a brevity-penalized blend of clipped-count precision
//! and recall). The resource-block allocation is learned with a KL-penalized
//! importance-sampled policy gradient (APPO) and checked against an exact
//! assignment solver.

pub mod appo;
pub mod attention;
pub mod channel;
pub mod config;
pub mod corpus;
pub mod error;
pub mod experiment;
pub mod mss;
pub mod oracle;
pub mod rng;
pub mod scenario;
pub mod semantics;
pub mod synth;

pub use error::{Error, Result};
