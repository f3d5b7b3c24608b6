//! Columnar frame files.
//!
//! A frame is an immutable table laid out column-by-column, so a projection
//! read touches only the footer and the requested column chunks. The layout
//! is normative and bit-exact; all integers are little-endian.
//!
//! ```text
//! "LAF1"
//! chunk per column, in table order:
//!     name_len u32 | name utf-8
//!     kind u8            0=f64 1=i64 2=text 3=bool
//!     row_count u64
//!     null bitmap        ceil(rows/8) bytes, LSB-first, bit set = present
//!     values             f64/i64: 8 bytes each; bool: 1 byte each;
//!                        text: u32 length + utf-8 bytes each
//! footer:
//!     chunk_count u64
//!     per chunk: name_len u32 | name | kind u8 | offset u64 | length u64
//!                | chunk checksum u64
//!     total_rows u64
//!     file checksum u64  fnv1a-64 over every chunk byte
//! trailer:
//!     footer_offset u64 | "LAF1"
//! ```
//!
//! Null slots still occupy their fixed width (zero bits / empty string) so
//! offsets stay deterministic. Values are stored uncompressed.

use super::StorageError;
use crate::hash::fnv1a_64;
use std::fs;
use std::io::{Read, Seek, SeekFrom};
use std::path::Path;

const FRAME_MAGIC: &[u8; 4] = b"LAF1";

/// Column payloads.
#[derive(Debug, Clone, PartialEq)]
pub enum ColumnValues {
    Float(Vec<f64>),
    Int(Vec<i64>),
    Text(Vec<String>),
    Bool(Vec<bool>),
}

impl ColumnValues {
    pub fn len(&self) -> usize {
        match self {
            ColumnValues::Float(v) => v.len(),
            ColumnValues::Int(v) => v.len(),
            ColumnValues::Text(v) => v.len(),
            ColumnValues::Bool(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn kind_byte(&self) -> u8 {
        match self {
            ColumnValues::Float(_) => 0,
            ColumnValues::Int(_) => 1,
            ColumnValues::Text(_) => 2,
            ColumnValues::Bool(_) => 3,
        }
    }
}

/// Kind names used in footer dumps and error messages.
pub fn kind_name(kind: u8) -> &'static str {
    match kind {
        0 => "f64",
        1 => "i64",
        2 => "text",
        3 => "bool",
        _ => "unknown",
    }
}

/// One cell when a frame is viewed row-wise.
#[derive(Debug, Clone, PartialEq)]
pub enum FrameValue {
    Float(f64),
    Int(i64),
    Text(String),
    Bool(bool),
    Null,
}

/// A named column with an optional per-row null mask.
#[derive(Debug, Clone, PartialEq)]
pub struct Column {
    pub name: String,
    pub values: ColumnValues,
    /// true = null; always the same length as `values`.
    pub nulls: Vec<bool>,
}

impl Column {
    pub fn floats(name: &str, values: Vec<f64>) -> Column {
        let nulls = vec![false; values.len()];
        Column {
            name: name.to_string(),
            values: ColumnValues::Float(values),
            nulls,
        }
    }

    pub fn ints(name: &str, values: Vec<i64>) -> Column {
        let nulls = vec![false; values.len()];
        Column {
            name: name.to_string(),
            values: ColumnValues::Int(values),
            nulls,
        }
    }

    pub fn text(name: &str, values: Vec<String>) -> Column {
        let nulls = vec![false; values.len()];
        Column {
            name: name.to_string(),
            values: ColumnValues::Text(values),
            nulls,
        }
    }

    pub fn bools(name: &str, values: Vec<bool>) -> Column {
        let nulls = vec![false; values.len()];
        Column {
            name: name.to_string(),
            values: ColumnValues::Bool(values),
            nulls,
        }
    }

    pub fn value(&self, row: usize) -> FrameValue {
        if self.nulls[row] {
            return FrameValue::Null;
        }
        match &self.values {
            ColumnValues::Float(v) => FrameValue::Float(v[row]),
            ColumnValues::Int(v) => FrameValue::Int(v[row]),
            ColumnValues::Text(v) => FrameValue::Text(v[row].clone()),
            ColumnValues::Bool(v) => FrameValue::Bool(v[row]),
        }
    }
}

/// An in-memory column table; every column has the same row count.
#[derive(Debug, Clone, PartialEq)]
pub struct ColumnTable {
    pub columns: Vec<Column>,
}

impl ColumnTable {
    pub fn new(columns: Vec<Column>) -> Result<ColumnTable, StorageError> {
        let rows = columns.first().map_or(0, |c| c.values.len());
        for col in &columns {
            if col.values.len() != rows || col.nulls.len() != rows {
                return Err(StorageError::RaggedColumn {
                    column: col.name.clone(),
                    len: col.values.len(),
                    expected: rows,
                });
            }
        }
        Ok(ColumnTable { columns })
    }

    pub fn rows(&self) -> usize {
        self.columns.first().map_or(0, |c| c.values.len())
    }

    pub fn column(&self, name: &str) -> Option<&Column> {
        self.columns.iter().find(|c| c.name == name)
    }

    pub fn column_names(&self) -> Vec<String> {
        self.columns.iter().map(|c| c.name.clone()).collect()
    }
}

/// Bytes touched by a read, for projection accounting.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FrameReadStats {
    pub bytes_read: u64,
    pub file_size: u64,
}

#[derive(Debug, Clone)]
struct ChunkEntry {
    name: String,
    kind: u8,
    offset: u64,
    length: u64,
    checksum: u64,
}

/// Footer metadata, as dumped by `store inspect`.
#[derive(Debug, Clone)]
pub struct FooterInfo {
    pub total_rows: u64,
    pub file_checksum: u64,
    pub columns: Vec<(String, &'static str, u64, u64)>,
}

fn encode_chunk(col: &Column) -> Vec<u8> {
    let rows = col.values.len();
    let mut buf = Vec::new();
    buf.extend_from_slice(&(col.name.len() as u32).to_le_bytes());
    buf.extend_from_slice(col.name.as_bytes());
    buf.push(col.values.kind_byte());
    buf.extend_from_slice(&(rows as u64).to_le_bytes());
    let mut bitmap = vec![0u8; rows.div_ceil(8)];
    for (i, &null) in col.nulls.iter().enumerate() {
        if !null {
            bitmap[i / 8] |= 1 << (i % 8);
        }
    }
    buf.extend_from_slice(&bitmap);
    match &col.values {
        ColumnValues::Float(v) => {
            for (i, x) in v.iter().enumerate() {
                let bits = if col.nulls[i] { 0 } else { x.to_bits() };
                buf.extend_from_slice(&bits.to_le_bytes());
            }
        }
        ColumnValues::Int(v) => {
            for (i, x) in v.iter().enumerate() {
                let val = if col.nulls[i] { 0 } else { *x };
                buf.extend_from_slice(&val.to_le_bytes());
            }
        }
        ColumnValues::Text(v) => {
            for (i, s) in v.iter().enumerate() {
                let s: &str = if col.nulls[i] { "" } else { s };
                buf.extend_from_slice(&(s.len() as u32).to_le_bytes());
                buf.extend_from_slice(s.as_bytes());
            }
        }
        ColumnValues::Bool(v) => {
            for (i, b) in v.iter().enumerate() {
                buf.push(if col.nulls[i] { 0 } else { *b as u8 });
            }
        }
    }
    buf
}

/// Write a column table to `path`. The output is a deterministic function of
/// the table contents.
pub fn write_frame(table: &ColumnTable, path: &Path) -> Result<(), StorageError> {
    let total_rows = table.rows() as u64;
    let mut buf = Vec::new();
    buf.extend_from_slice(FRAME_MAGIC);
    let mut entries = Vec::with_capacity(table.columns.len());
    for col in &table.columns {
        if col.values.len() as u64 != total_rows {
            return Err(StorageError::RaggedColumn {
                column: col.name.clone(),
                len: col.values.len(),
                expected: total_rows as usize,
            });
        }
        let chunk = encode_chunk(col);
        entries.push(ChunkEntry {
            name: col.name.clone(),
            kind: col.values.kind_byte(),
            offset: buf.len() as u64,
            length: chunk.len() as u64,
            checksum: fnv1a_64(&chunk),
        });
        buf.extend_from_slice(&chunk);
    }
    let file_checksum = fnv1a_64(&buf[FRAME_MAGIC.len()..]);
    let footer_offset = buf.len() as u64;
    buf.extend_from_slice(&(entries.len() as u64).to_le_bytes());
    for e in &entries {
        buf.extend_from_slice(&(e.name.len() as u32).to_le_bytes());
        buf.extend_from_slice(e.name.as_bytes());
        buf.push(e.kind);
        buf.extend_from_slice(&e.offset.to_le_bytes());
        buf.extend_from_slice(&e.length.to_le_bytes());
        buf.extend_from_slice(&e.checksum.to_le_bytes());
    }
    buf.extend_from_slice(&total_rows.to_le_bytes());
    buf.extend_from_slice(&file_checksum.to_le_bytes());
    buf.extend_from_slice(&footer_offset.to_le_bytes());
    buf.extend_from_slice(FRAME_MAGIC);
    fs::write(path, &buf).map_err(|e| StorageError::io(path, e))?;
    Ok(())
}

struct FrameReader {
    file: fs::File,
    path: String,
    file_size: u64,
    bytes_read: u64,
}

impl FrameReader {
    fn open(path: &Path) -> Result<FrameReader, StorageError> {
        let file = fs::File::open(path).map_err(|e| StorageError::io(path, e))?;
        let file_size = file
            .metadata()
            .map_err(|e| StorageError::io(path, e))?
            .len();
        Ok(FrameReader {
            file,
            path: path.display().to_string(),
            file_size,
            bytes_read: 0,
        })
    }

    fn corrupt(&self, reason: &str) -> StorageError {
        StorageError::Corrupt {
            path: self.path.clone(),
            reason: reason.to_string(),
        }
    }

    fn read_at(&mut self, offset: u64, len: usize) -> Result<Vec<u8>, StorageError> {
        let mut buf = vec![0u8; len];
        self.file
            .seek(SeekFrom::Start(offset))
            .and_then(|_| self.file.read_exact(&mut buf))
            .map_err(|e| StorageError::Io {
                path: self.path.clone(),
                source: e,
            })?;
        self.bytes_read += len as u64;
        Ok(buf)
    }

    fn footer(&mut self) -> Result<(Vec<ChunkEntry>, u64, u64), StorageError> {
        if self.file_size < 16 {
            return Err(self.corrupt("file too small"));
        }
        let trailer = self.read_at(self.file_size - 12, 12)?;
        if &trailer[8..12] != FRAME_MAGIC {
            return Err(self.corrupt("bad trailing magic"));
        }
        let footer_offset = u64::from_le_bytes(trailer[0..8].try_into().unwrap());
        if footer_offset < 4 || footer_offset > self.file_size - 12 {
            return Err(self.corrupt("footer offset out of bounds"));
        }
        let footer_len = (self.file_size - 12 - footer_offset) as usize;
        let footer = self.read_at(footer_offset, footer_len)?;
        let mut cur = FooterCursor {
            data: &footer,
            pos: 0,
        };
        let count = cur.u64().ok_or_else(|| self.corrupt("bad footer"))?;
        let mut entries = Vec::with_capacity(count as usize);
        for _ in 0..count {
            let name = cur.string().ok_or_else(|| self.corrupt("bad footer"))?;
            let kind = cur.u8().ok_or_else(|| self.corrupt("bad footer"))?;
            let offset = cur.u64().ok_or_else(|| self.corrupt("bad footer"))?;
            let length = cur.u64().ok_or_else(|| self.corrupt("bad footer"))?;
            let checksum = cur.u64().ok_or_else(|| self.corrupt("bad footer"))?;
            if offset < 4 || offset + length > footer_offset {
                return Err(self.corrupt("chunk entry out of bounds"));
            }
            entries.push(ChunkEntry {
                name,
                kind,
                offset,
                length,
                checksum,
            });
        }
        let total_rows = cur.u64().ok_or_else(|| self.corrupt("bad footer"))?;
        let file_checksum = cur.u64().ok_or_else(|| self.corrupt("bad footer"))?;
        if cur.pos != footer.len() {
            return Err(self.corrupt("footer has trailing bytes"));
        }
        Ok((entries, total_rows, file_checksum))
    }
}

struct FooterCursor<'a> {
    data: &'a [u8],
    pos: usize,
}

impl<'a> FooterCursor<'a> {
    fn take(&mut self, n: usize) -> Option<&'a [u8]> {
        if self.pos + n > self.data.len() {
            return None;
        }
        let s = &self.data[self.pos..self.pos + n];
        self.pos += n;
        Some(s)
    }

    fn u8(&mut self) -> Option<u8> {
        self.take(1).map(|b| b[0])
    }

    fn u32(&mut self) -> Option<u32> {
        self.take(4).map(|b| u32::from_le_bytes(b.try_into().unwrap()))
    }

    fn u64(&mut self) -> Option<u64> {
        self.take(8).map(|b| u64::from_le_bytes(b.try_into().unwrap()))
    }

    fn string(&mut self) -> Option<String> {
        let len = self.u32()? as usize;
        String::from_utf8(self.take(len)?.to_vec()).ok()
    }
}

fn decode_chunk(
    bytes: &[u8],
    entry: &ChunkEntry,
    expect_rows: u64,
    path: &str,
) -> Result<Column, StorageError> {
    let corrupt = |reason: String| StorageError::Corrupt {
        path: path.to_string(),
        reason,
    };
    if fnv1a_64(bytes) != entry.checksum {
        return Err(corrupt(format!(
            "chunk checksum mismatch for column {:?}",
            entry.name
        )));
    }
    let mut cur = FooterCursor {
        data: bytes,
        pos: 0,
    };
    let name = cur
        .string()
        .ok_or_else(|| corrupt("bad chunk header".to_string()))?;
    let kind = cur
        .u8()
        .ok_or_else(|| corrupt("bad chunk header".to_string()))?;
    let rows = cur
        .u64()
        .ok_or_else(|| corrupt("bad chunk header".to_string()))?;
    if name != entry.name || kind != entry.kind || rows != expect_rows {
        return Err(corrupt(format!(
            "chunk header disagrees with footer for column {:?}",
            entry.name
        )));
    }
    let rows = rows as usize;
    let bitmap = cur
        .take(rows.div_ceil(8))
        .ok_or_else(|| corrupt("truncated null bitmap".to_string()))?
        .to_vec();
    let nulls: Vec<bool> = (0..rows)
        .map(|i| bitmap[i / 8] & (1 << (i % 8)) == 0)
        .collect();
    let values = match kind {
        0 => {
            let mut v = Vec::with_capacity(rows);
            for _ in 0..rows {
                let bits = cur
                    .u64()
                    .ok_or_else(|| corrupt("truncated f64 column".to_string()))?;
                v.push(f64::from_bits(bits));
            }
            ColumnValues::Float(v)
        }
        1 => {
            let mut v = Vec::with_capacity(rows);
            for _ in 0..rows {
                let bits = cur
                    .u64()
                    .ok_or_else(|| corrupt("truncated i64 column".to_string()))?;
                v.push(bits as i64);
            }
            ColumnValues::Int(v)
        }
        2 => {
            let mut v = Vec::with_capacity(rows);
            for _ in 0..rows {
                let s = cur
                    .string()
                    .ok_or_else(|| corrupt("truncated text column".to_string()))?;
                v.push(s);
            }
            ColumnValues::Text(v)
        }
        3 => {
            let mut v = Vec::with_capacity(rows);
            for _ in 0..rows {
                let b = cur
                    .u8()
                    .ok_or_else(|| corrupt("truncated bool column".to_string()))?;
                v.push(b != 0);
            }
            ColumnValues::Bool(v)
        }
        other => return Err(corrupt(format!("unknown column kind {other}"))),
    };
    if cur.pos != bytes.len() {
        return Err(corrupt(format!(
            "chunk for column {:?} has trailing bytes",
            entry.name
        )));
    }
    Ok(Column {
        name,
        values,
        nulls,
    })
}

/// Read a frame. With a projection, only the footer and the requested chunks
/// are fetched and each chunk is verified by its own checksum; a full read
/// additionally verifies the whole-file checksum.
pub fn read_frame(
    path: &Path,
    projection: Option<&[&str]>,
) -> Result<(ColumnTable, FrameReadStats), StorageError> {
    let mut reader = FrameReader::open(path)?;
    let (entries, total_rows, file_checksum) = reader.footer()?;
    let columns = match projection {
        None => {
            // One contiguous read of every chunk, then the global checksum.
            let chunks_len = entries
                .iter()
                .map(|e| e.length)
                .sum::<u64>();
            let body = reader.read_at(4, chunks_len as usize)?;
            if fnv1a_64(&body) != file_checksum {
                return Err(reader.corrupt("file checksum mismatch"));
            }
            let mut cols = Vec::with_capacity(entries.len());
            for e in &entries {
                let start = (e.offset - 4) as usize;
                let bytes = &body[start..start + e.length as usize];
                cols.push(decode_chunk(bytes, e, total_rows, &reader.path)?);
            }
            cols
        }
        Some(names) => {
            let mut cols = Vec::with_capacity(names.len());
            for name in names {
                let entry = entries.iter().find(|e| e.name == *name).ok_or_else(|| {
                    StorageError::UnknownColumn {
                        requested: name.to_string(),
                        available: entries.iter().map(|e| e.name.clone()).collect(),
                    }
                })?;
                let bytes = reader.read_at(entry.offset, entry.length as usize)?;
                cols.push(decode_chunk(&bytes, entry, total_rows, &reader.path)?);
            }
            cols
        }
    };
    let table = ColumnTable::new(columns)?;
    Ok((
        table,
        FrameReadStats {
            bytes_read: reader.bytes_read,
            file_size: reader.file_size,
        },
    ))
}

/// Read every column of a frame.
pub fn read_frame_full(path: &Path) -> Result<ColumnTable, StorageError> {
    read_frame(path, None).map(|(t, _)| t)
}

/// Footer metadata only; reads no chunk bytes.
pub fn inspect_frame(path: &Path) -> Result<FooterInfo, StorageError> {
    let mut reader = FrameReader::open(path)?;
    let (entries, total_rows, file_checksum) = reader.footer()?;
    Ok(FooterInfo {
        total_rows,
        file_checksum,
        columns: entries
            .into_iter()
            .map(|e| (e.name, kind_name(e.kind), e.offset, e.length))
            .collect(),
    })
}
