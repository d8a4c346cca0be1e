//! Recurrent Q-networks for every compared agent, plus their extra losses
//! and the checkpoint container.
//!
//! All variants share one skeleton: a convolutional encoder of the regular
//! input `x`, a GRU, and a two-layer Q-head. They differ only in what
//! happens between the encoder and the GRU, or on top of the GRU:
//!
//! | variant | between encoder and GRU | extra |
//! |---|---|---|
//! | DRQN / oracle | nothing | |
//! | PI-D | `z * exp(alpha(x*) n)` in training | `beta * mean(-log alpha)` |
//! | I-D | `z * exp(alpha(x) n)` in training | `beta * mean(-log alpha)` |
//! | ND | concat with masked `x*` features, linear back to width | |
//! | AUX | nothing | decoder on `h` reconstructs the full state |
//! | DIS | nothing | MSE to a frozen oracle's Q-values |
//!
//! Evaluation-mode forwards never touch `x*` or the branch weights.

mod checkpoint;
mod losses;
mod network;
mod variant;

pub use checkpoint::{decode_checkpoint, encode_checkpoint, load_checkpoint, save_checkpoint, Checkpoint};
pub use losses::{aux_reconstruction_loss, distillation_loss, masked_reconstruction_loss};
pub use network::{
    greedy_action, AgentNetwork, AuxDecoder, ConvEncoder, ForwardCtx, ForwardDiagnostics, NetworkDims, SeqGrads,
    SeqInput, SeqOutput, SeqTape, StepOutput, VariantParams,
};
pub use variant::{AgentVariant, VariantTag};
