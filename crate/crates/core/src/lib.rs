//! Quantization-aware training of small dense networks and their compilation
//! to integer-only, multiplication-free lookup-table models.

pub mod activation;
pub mod clustering;
pub mod data;
pub mod error;
pub mod format;
pub mod gradcheck;
pub mod huffman;
pub mod infer;
pub mod lut;
pub mod net;
pub mod optim;
pub mod reference;
pub mod storage;
pub mod tasks;
pub mod train;

pub use activation::{Activation, ActivationGrid, ActivationKind, ActivationSpec};
pub use clustering::{ClusterMethod, WeightCodebook};
pub use error::{Error, Result};
pub use format::{load_model, save_model, Checkpoint, IndexEncoding, ModelFile};
pub use infer::{forward_int, forward_int_trace, LutOutput};
pub use lut::{compile_model, CompileOptions, LutHead, LutModel};
pub use net::{DenseNet, Head, InputQuantizer};
pub use reference::{conformance, reference_forward, ConformanceReport};
pub use storage::{estimate_storage, StorageReport};
pub use tasks::Task;
pub use train::{ClusterConfig, LrSchedule, Metrics, TrainConfig};
