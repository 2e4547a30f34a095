//! Hybrid CTC/attention encoder-decoder.
//!
//! Encoder: four 3×3 convolutions (ReLU) with 2×2 max pooling after the
//! second and fourth, so the time axis shrinks by four, followed by a stack
//! of bidirectional LSTMs. Decoder: a single LSTM driven by location-aware
//! attention. A linear CTC head on the encoder shares the training
//! objective `λ·CTC + (1-λ)·CE`.

mod checkpoint;
mod config;
mod ctc;
mod decode;
mod network;
mod train;

pub use checkpoint::{Checkpoint, CheckpointMeta, CHECKPOINT_FORMAT};
pub use config::{encoder_len, ModelConfig};
pub use ctc::{ctc_loss, ctc_min_frames, CtcOutcome, CtcPrefixScorer, CtcPrefixState};
pub use decode::{beam_decode, AttentionTrace, DecodeOptions, Decoded};
pub use network::{DecoderState, EncoderOutput, LossBreakdown, Model};
pub use train::{batch_gradients, train, write_metrics, EpochMetrics, TrainConfig, TrainItem, TrainOutcome};
