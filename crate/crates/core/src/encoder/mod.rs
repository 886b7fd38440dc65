//! GCN encoder with a Hadamard pair decoder.
//!
//! Node layer: `H_l = ReLU(Â H_{l-1} W_l)` for hidden layers and
//! `H_L = Â H_{L-1} W_L` at the output, with `Â = D̃^{-1/2}(A+I)D̃^{-1/2}`.
//! Pair layer: `z = h_u ⊙ h_v`, `p = σ(w·z + b)` clamped to `[1e-7, 1-1e-7]`.

mod adam;
mod adjacency;
mod features;
mod model;

pub use adam::{Adam, AdamConfig};
pub use adjacency::NormalizedAdjacency;
pub use features::Features;
pub use model::{
    backward, forward, pair_forward, Decoder, EncoderConfig, Forward, ModelParams, PairEmbedding,
    ParamGrads, UpstreamGrads, PROB_CLAMP,
    score_pairs,
};
