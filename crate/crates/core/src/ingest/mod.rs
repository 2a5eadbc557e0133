//! On-disk formats: line-delimited datasets and reward records, and
//! single-document model files.

pub mod dataset_file;
pub mod model_file;
pub mod records;

pub use dataset_file::{load_dataset, read_dataset, save_dataset, write_dataset};
pub use model_file::{load_model, model_id, save_model};
pub use records::{load_records, read_records, records_to_dataset, save_records, write_records};

use crate::error::Error;

/// Wraps a JSON parse failure on one line with its position in the file.
pub(crate) fn malformed(line: usize, line_start: u64, e: &serde_json::Error) -> Error {
    Error::Malformed {
        line,
        offset: line_start + e.column().saturating_sub(1) as u64,
        reason: e.to_string(),
    }
}
