//! Simulation of the multi-tenant noise-then-select retrieval service and
//! the scalar two-world mechanism.

mod embedding_file;
mod index;
mod noise;
mod world;

pub use embedding_file::{load_index, read_embeddings, write_embeddings};
pub use index::{
    dot, norm, normalize, select_then_noise, select_topk, topk_retrieve, topk_retrieve_instrumented,
    InstrumentedOutput, RetrievalOutput, TenantIndex,
};
pub use noise::{derive_noise, NoiseSeedRecord};
pub(crate) use noise::hex_bytes32;
pub use world::{
    make_world_pair, make_world_pair_with, random_orthogonal, random_unit, scalar_mechanism, score_gap,
    WorldBit, WorldPair,
};
