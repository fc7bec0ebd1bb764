//! Transformer encoder classifier: BPE tokenizer, pre-LN encoder with
//! hand-written gradients, AdamW training.

pub mod bpe;
pub mod model;
pub mod train;

pub use bpe::{normalize, train_tokenizer, SubwordTokenizer, CLS, PAD, SEP, UNK};
pub use model::{EncoderConfig, EncoderModel, ALLOWED_MAX_LEN};
pub use train::{train, AdamW, EncodedSet, LossCurve, TrainConfig};
