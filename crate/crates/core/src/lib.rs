//! Streaming out-of-distribution detection over precomputed embeddings.
//!
//! Test embeddings are scored one at a time against a textual proxy cache (ID
//! class anchors plus mined negative words) and a visual proxy cache (test
//! exemplars admitted by confidence). Confident samples grow both caches, and
//! an adaptive histogram threshold decides which samples count as confident.

pub mod config;
pub mod engine;
pub mod error;
pub mod io;
pub mod metrics;
pub mod numeric;
pub mod synth;
pub mod textual;
pub mod threshold;
pub mod visual;

pub use config::{Ablation, EngineConfig};
pub use engine::{fuse_post, fuse_pre, run_stream, run_stream_with_state, Engine, RunOutput, ScoreRecord, SkippedSample, StreamInputs};
pub use error::{Error, Result};
pub use metrics::{auroc, fpr95, id_acc, EvalSummary, GroundTruth, IdAccMode};
pub use numeric::{cosine, Embedding, Score};
pub use textual::{LabeledEmbedding, NegativeInit};
pub use threshold::{gate, Decision, MarginForm, ScoreWindow};
pub use visual::{VisualCache, VisualQueue, VisualSlot};
