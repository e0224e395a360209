//! Anaphora resolution toolkit for conversational English: the
//! universal-anaphora corpus format, per-document embedding stores,
//! a workspace coreference resolver, discourse-deixis and bridging
//! resolvers, a coreference combiner, and coreference metrics.

pub mod bridging;
pub mod corpus;
pub mod dd;
pub mod embeddings;
pub mod lexicon;
pub mod nn;
pub mod checkpoint;
pub mod combiner;
pub mod metrics;
pub mod wcs;
pub mod toy;
