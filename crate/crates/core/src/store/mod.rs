//! Embedding and logit matrices, their file formats, and dataset manifests.

mod format;
mod manifest;
mod matrix;

pub use format::{decode, encode, read_embeddings, read_logits, read_matrix, write_matrix, HEADER_LEN, MAGIC, VERSION};
pub use manifest::{DatasetEntry, DatasetManifest, DatasetRole};
pub use matrix::{AnyMatrix, EmbeddingMatrix, LogitMatrix, MatrixKind, StoredMatrix, NORM_TOLERANCE};
pub(crate) use matrix::row_norm;
