//! The two stores behind the pipeline.
//!
//! `raw` is a key-addressed cell store that keeps data exactly as it arrived,
//! backed by an append-only segment log per table with an in-memory index
//! rebuilt on open. `frame` is an immutable columnar file format for the
//! analytics side, with footer-indexed chunks so reads can project columns
//! without touching the rest of the file. `sizing` holds the replication-aware
//! capacity estimator.

mod frame;
mod raw;
mod sizing;

pub use frame::{
    inspect_frame, read_frame, read_frame_full, write_frame, Column, ColumnTable, ColumnValues,
    FooterInfo, FrameReadStats, FrameValue,
};
pub use raw::{CellWrite, RawRow, RawStore, RowPut};
pub use sizing::{estimate_storage, StoragePlan};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum StorageError {
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("unknown table {0:?}")]
    UnknownTable(String),
    #[error("table {0:?} already exists")]
    TableExists(String),
    #[error("empty row key")]
    EmptyRowKey,
    #[error("timestamp regression on {table}/{row_key}/{qualifier}: {attempted} < {current}")]
    TimestampRegression {
        table: String,
        row_key: String,
        qualifier: String,
        attempted: u64,
        current: u64,
    },
    #[error("scan range start {start:?} exceeds end {end:?}")]
    BadRange { start: String, end: String },
    #[error("corrupt file {path}: {reason}")]
    Corrupt { path: String, reason: String },
    #[error("unknown column {requested:?}; available: {available:?}")]
    UnknownColumn {
        requested: String,
        available: Vec<String>,
    },
    #[error("column {column:?} has {len} rows, expected {expected}")]
    RaggedColumn {
        column: String,
        len: usize,
        expected: usize,
    },
    #[error("replication factor must be at least 1")]
    ZeroReplication,
    #[error("storage plan overflows 64 bits")]
    PlanOverflow,
}

impl StorageError {
    pub(crate) fn io(path: &std::path::Path, source: std::io::Error) -> Self {
        StorageError::Io {
            path: path.display().to_string(),
            source,
        }
    }
}
