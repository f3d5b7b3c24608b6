//! Raw row store: an append-only segment log per table with an in-memory
//! index rebuilt on open.
//!
//! Layout on disk, inside the store directory:
//!
//! ```text
//! tables                  one table name per line, appended on create
//! <table>.<seq>.seg       one segment per committed batch
//! ```
//!
//! A segment is written to a `.tmp` file and renamed into place, so a batch
//! is either fully visible or absent; there are no partial commits. Every
//! cell write carries a caller-supplied logical timestamp, and all versions
//! are retained. Timestamps must be non-decreasing per qualifier.
//!
//! Segment format (all integers little-endian):
//!
//! ```text
//! "RSEG" | seq u64 | row_count u64
//! rows:   key_len u32 | key | cell_count u32
//!         cells: qual_len u32 | qual | ts u64 | val_len u32 | val
//! trailer: fnv1a-64 over everything before the trailer
//! ```

use super::StorageError;
use crate::hash::{fnv1a_64, Fnv64};
use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

const SEGMENT_MAGIC: &[u8; 4] = b"RSEG";
const TABLES_FILE: &str = "tables";

/// One cell write: qualifier -> (value, logical timestamp).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CellWrite {
    pub qualifier: String,
    pub value: Vec<u8>,
    pub ts: u64,
}

impl CellWrite {
    pub fn new(qualifier: &str, value: impl Into<Vec<u8>>, ts: u64) -> Self {
        CellWrite {
            qualifier: qualifier.to_string(),
            value: value.into(),
            ts,
        }
    }
}

/// One row in a batch commit.
#[derive(Debug, Clone)]
pub struct RowPut {
    pub row_key: String,
    pub cells: Vec<CellWrite>,
}

impl RowPut {
    pub fn new(row_key: impl Into<String>, cells: Vec<CellWrite>) -> Self {
        RowPut {
            row_key: row_key.into(),
            cells,
        }
    }
}

/// A materialized row: latest value per qualifier as of some read point.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RawRow {
    pub row_key: String,
    /// qualifier -> (value, timestamp of that value)
    pub cells: BTreeMap<String, (Vec<u8>, u64)>,
}

impl RawRow {
    pub fn cell_str(&self, qualifier: &str) -> Option<&str> {
        self.cells
            .get(qualifier)
            .and_then(|(v, _)| std::str::from_utf8(v).ok())
    }
}

/// All versions of all qualifiers of one row, oldest first per qualifier.
type VersionedRow = BTreeMap<String, Vec<(u64, Vec<u8>)>>;

#[derive(Debug, Default)]
struct TableData {
    rows: BTreeMap<String, VersionedRow>,
    next_seq: u64,
}

/// The raw store. Single writer per store; reads snapshot the in-memory
/// index, so a scan never observes writes made after it started.
#[derive(Debug)]
pub struct RawStore {
    dir: PathBuf,
    tables: BTreeMap<String, TableData>,
}

impl RawStore {
    /// Open a store directory, creating it if missing, and rebuild the
    /// in-memory index from the segment log.
    pub fn open(dir: impl Into<PathBuf>) -> Result<RawStore, StorageError> {
        let dir = dir.into();
        fs::create_dir_all(&dir).map_err(|e| StorageError::io(&dir, e))?;
        let mut store = RawStore {
            dir: dir.clone(),
            tables: BTreeMap::new(),
        };
        let tables_path = dir.join(TABLES_FILE);
        if tables_path.exists() {
            let text =
                fs::read_to_string(&tables_path).map_err(|e| StorageError::io(&tables_path, e))?;
            for name in text.lines().filter(|l| !l.is_empty()) {
                store.tables.insert(name.to_string(), TableData::default());
            }
        }
        // Replay segments in (table, seq) order.
        let mut segments: Vec<(String, u64, PathBuf)> = Vec::new();
        for entry in fs::read_dir(&dir).map_err(|e| StorageError::io(&dir, e))? {
            let entry = entry.map_err(|e| StorageError::io(&dir, e))?;
            let name = entry.file_name().to_string_lossy().into_owned();
            if let Some((table, seq)) = parse_segment_name(&name) {
                segments.push((table, seq, entry.path()));
            }
        }
        segments.sort();
        for (table, seq, path) in segments {
            let rows = read_segment(&path, seq)?;
            let data = store
                .tables
                .get_mut(&table)
                .ok_or_else(|| StorageError::UnknownTable(table.clone()))?;
            for put in rows {
                apply_put(data, &put)?;
            }
            data.next_seq = data.next_seq.max(seq + 1);
        }
        Ok(store)
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn table_names(&self) -> Vec<String> {
        self.tables.keys().cloned().collect()
    }

    pub fn has_table(&self, table: &str) -> bool {
        self.tables.contains_key(table)
    }

    /// Create a table. A no-op when the table already exists.
    pub fn create_table(&mut self, table: &str) -> Result<(), StorageError> {
        if self.tables.contains_key(table) {
            return Ok(());
        }
        let tables_path = self.dir.join(TABLES_FILE);
        let mut current = if tables_path.exists() {
            fs::read_to_string(&tables_path).map_err(|e| StorageError::io(&tables_path, e))?
        } else {
            String::new()
        };
        current.push_str(table);
        current.push('\n');
        write_atomic(&tables_path, current.as_bytes())?;
        self.tables.insert(table.to_string(), TableData::default());
        Ok(())
    }

    /// Commit a batch of row puts to one table as a single segment. The
    /// batch becomes visible atomically; a failure leaves the store as it
    /// was.
    pub fn commit_batch(&mut self, table: &str, puts: &[RowPut]) -> Result<(), StorageError> {
        let data = self
            .tables
            .get(table)
            .ok_or_else(|| StorageError::UnknownTable(table.to_string()))?;
        for put in puts {
            if put.row_key.is_empty() {
                return Err(StorageError::EmptyRowKey);
            }
        }
        // Validate timestamp monotonicity against the current index before
        // touching disk, so a rejected batch leaves no partial state.
        validate_batch(table, data, puts)?;
        let seq = data.next_seq;
        let path = self.dir.join(format!("{table}.{seq:06}.seg"));
        write_segment(&path, seq, puts)?;
        let data = self.tables.get_mut(table).expect("table checked above");
        for put in puts {
            apply_put(data, put).expect("batch validated before write");
        }
        data.next_seq = seq + 1;
        Ok(())
    }

    /// Write one row.
    pub fn put_row(
        &mut self,
        table: &str,
        row_key: &str,
        cells: Vec<CellWrite>,
    ) -> Result<(), StorageError> {
        self.commit_batch(table, &[RowPut::new(row_key, cells)])
    }

    /// Latest value per qualifier, or `None` when the row was never written.
    pub fn get_row(&self, table: &str, row_key: &str) -> Result<Option<RawRow>, StorageError> {
        self.get_row_at(table, row_key, u64::MAX)
    }

    /// Timestamped read: latest value per qualifier with ts <= `as_of`.
    pub fn get_row_at(
        &self,
        table: &str,
        row_key: &str,
        as_of: u64,
    ) -> Result<Option<RawRow>, StorageError> {
        let data = self
            .tables
            .get(table)
            .ok_or_else(|| StorageError::UnknownTable(table.to_string()))?;
        Ok(data.rows.get(row_key).and_then(|row| {
            let cells: BTreeMap<String, (Vec<u8>, u64)> = row
                .iter()
                .filter_map(|(qual, versions)| {
                    versions
                        .iter()
                        .rev()
                        .find(|(ts, _)| *ts <= as_of)
                        .map(|(ts, v)| (qual.clone(), (v.clone(), *ts)))
                })
                .collect();
            if cells.is_empty() {
                None
            } else {
                Some(RawRow {
                    row_key: row_key.to_string(),
                    cells,
                })
            }
        }))
    }

    /// All versions of one cell, oldest first.
    pub fn cell_versions(
        &self,
        table: &str,
        row_key: &str,
        qualifier: &str,
    ) -> Result<Vec<(u64, Vec<u8>)>, StorageError> {
        let data = self
            .tables
            .get(table)
            .ok_or_else(|| StorageError::UnknownTable(table.to_string()))?;
        Ok(data
            .rows
            .get(row_key)
            .and_then(|row| row.get(qualifier))
            .cloned()
            .unwrap_or_default())
    }

    /// Rows with `start <= row_key < end`, in lexicographic key order. The
    /// result is a snapshot taken at call time.
    pub fn scan_range(
        &self,
        table: &str,
        start: &str,
        end: &str,
    ) -> Result<Vec<RawRow>, StorageError> {
        if start > end {
            return Err(StorageError::BadRange {
                start: start.to_string(),
                end: end.to_string(),
            });
        }
        let data = self
            .tables
            .get(table)
            .ok_or_else(|| StorageError::UnknownTable(table.to_string()))?;
        Ok(data
            .rows
            .range(start.to_string()..end.to_string())
            .map(|(key, row)| materialize(key, row))
            .collect())
    }

    /// Every row of a table, in key order.
    pub fn scan_all(&self, table: &str) -> Result<Vec<RawRow>, StorageError> {
        let data = self
            .tables
            .get(table)
            .ok_or_else(|| StorageError::UnknownTable(table.to_string()))?;
        Ok(data
            .rows
            .iter()
            .map(|(key, row)| materialize(key, row))
            .collect())
    }

    pub fn row_count(&self, table: &str) -> Result<usize, StorageError> {
        let data = self
            .tables
            .get(table)
            .ok_or_else(|| StorageError::UnknownTable(table.to_string()))?;
        Ok(data.rows.len())
    }
}

fn materialize(key: &str, row: &VersionedRow) -> RawRow {
    RawRow {
        row_key: key.to_string(),
        cells: row
            .iter()
            .filter_map(|(qual, versions)| {
                versions
                    .last()
                    .map(|(ts, v)| (qual.clone(), (v.clone(), *ts)))
            })
            .collect(),
    }
}

fn validate_batch(table: &str, data: &TableData, puts: &[RowPut]) -> Result<(), StorageError> {
    // Latest timestamp per (row, qualifier), including earlier rows of this
    // same batch (later entries in a batch may overwrite earlier ones).
    let mut latest: BTreeMap<(&str, &str), u64> = BTreeMap::new();
    for put in puts {
        for cell in &put.cells {
            let current = latest
                .get(&(put.row_key.as_str(), cell.qualifier.as_str()))
                .copied()
                .or_else(|| {
                    data.rows
                        .get(&put.row_key)
                        .and_then(|row| row.get(&cell.qualifier))
                        .and_then(|versions| versions.last())
                        .map(|(ts, _)| *ts)
                });
            if let Some(current) = current {
                if cell.ts < current {
                    return Err(StorageError::TimestampRegression {
                        table: table.to_string(),
                        row_key: put.row_key.clone(),
                        qualifier: cell.qualifier.clone(),
                        attempted: cell.ts,
                        current,
                    });
                }
            }
            latest.insert((put.row_key.as_str(), cell.qualifier.as_str()), cell.ts);
        }
    }
    Ok(())
}

fn apply_put(data: &mut TableData, put: &RowPut) -> Result<(), StorageError> {
    let row = data.rows.entry(put.row_key.clone()).or_default();
    for cell in &put.cells {
        let versions = row.entry(cell.qualifier.clone()).or_default();
        if let Some((last_ts, _)) = versions.last() {
            if cell.ts < *last_ts {
                return Err(StorageError::TimestampRegression {
                    table: String::new(),
                    row_key: put.row_key.clone(),
                    qualifier: cell.qualifier.clone(),
                    attempted: cell.ts,
                    current: *last_ts,
                });
            }
            if cell.ts == *last_ts {
                versions.pop();
            }
        }
        versions.push((cell.ts, cell.value.clone()));
    }
    Ok(())
}

fn parse_segment_name(name: &str) -> Option<(String, u64)> {
    let rest = name.strip_suffix(".seg")?;
    let (table, seq) = rest.rsplit_once('.')?;
    let seq: u64 = seq.parse().ok()?;
    Some((table.to_string(), seq))
}

fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), StorageError> {
    let tmp = path.with_extension("tmp");
    let mut f = fs::File::create(&tmp).map_err(|e| StorageError::io(&tmp, e))?;
    f.write_all(bytes).map_err(|e| StorageError::io(&tmp, e))?;
    f.sync_all().map_err(|e| StorageError::io(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| StorageError::io(path, e))?;
    Ok(())
}

fn write_segment(path: &Path, seq: u64, puts: &[RowPut]) -> Result<(), StorageError> {
    let mut buf = Vec::new();
    buf.extend_from_slice(SEGMENT_MAGIC);
    buf.extend_from_slice(&seq.to_le_bytes());
    buf.extend_from_slice(&(puts.len() as u64).to_le_bytes());
    for put in puts {
        buf.extend_from_slice(&(put.row_key.len() as u32).to_le_bytes());
        buf.extend_from_slice(put.row_key.as_bytes());
        buf.extend_from_slice(&(put.cells.len() as u32).to_le_bytes());
        for cell in &put.cells {
            buf.extend_from_slice(&(cell.qualifier.len() as u32).to_le_bytes());
            buf.extend_from_slice(cell.qualifier.as_bytes());
            buf.extend_from_slice(&cell.ts.to_le_bytes());
            buf.extend_from_slice(&(cell.value.len() as u32).to_le_bytes());
            buf.extend_from_slice(&cell.value);
        }
    }
    let checksum = fnv1a_64(&buf);
    buf.extend_from_slice(&checksum.to_le_bytes());
    write_atomic(path, &buf)
}

fn read_segment(path: &Path, expect_seq: u64) -> Result<Vec<RowPut>, StorageError> {
    let bytes = fs::read(path).map_err(|e| StorageError::io(path, e))?;
    let corrupt = |reason: &str| StorageError::Corrupt {
        path: path.display().to_string(),
        reason: reason.to_string(),
    };
    if bytes.len() < SEGMENT_MAGIC.len() + 8 + 8 + 8 {
        return Err(corrupt("truncated segment"));
    }
    let (body, trailer) = bytes.split_at(bytes.len() - 8);
    let stored = u64::from_le_bytes(trailer.try_into().expect("8 bytes"));
    let mut hasher = Fnv64::new();
    hasher.update(body);
    if hasher.finish() != stored {
        return Err(corrupt("segment checksum mismatch"));
    }
    let mut cur = Cursor::new(body);
    let magic = cur.take(4).ok_or_else(|| corrupt("missing magic"))?;
    if magic != SEGMENT_MAGIC {
        return Err(corrupt("bad magic"));
    }
    let seq = cur.u64().ok_or_else(|| corrupt("missing seq"))?;
    if seq != expect_seq {
        return Err(corrupt("segment sequence does not match its file name"));
    }
    let row_count = cur.u64().ok_or_else(|| corrupt("missing row count"))?;
    let mut puts = Vec::with_capacity(row_count as usize);
    for _ in 0..row_count {
        let key = cur.string().ok_or_else(|| corrupt("bad row key"))?;
        let cell_count = cur.u32().ok_or_else(|| corrupt("missing cell count"))?;
        let mut cells = Vec::with_capacity(cell_count as usize);
        for _ in 0..cell_count {
            let qual = cur.string().ok_or_else(|| corrupt("bad qualifier"))?;
            let ts = cur.u64().ok_or_else(|| corrupt("missing ts"))?;
            let len = cur.u32().ok_or_else(|| corrupt("missing value len"))? as usize;
            let value = cur.take(len).ok_or_else(|| corrupt("bad value"))?.to_vec();
            cells.push(CellWrite {
                qualifier: qual,
                value,
                ts,
            });
        }
        puts.push(RowPut::new(key, cells));
    }
    if !cur.at_end() {
        return Err(corrupt("trailing bytes"));
    }
    Ok(puts)
}

struct Cursor<'a> {
    data: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn new(data: &'a [u8]) -> Self {
        Cursor { data, pos: 0 }
    }

    fn take(&mut self, n: usize) -> Option<&'a [u8]> {
        if self.pos + n > self.data.len() {
            return None;
        }
        let s = &self.data[self.pos..self.pos + n];
        self.pos += n;
        Some(s)
    }

    fn u32(&mut self) -> Option<u32> {
        self.take(4).map(|b| u32::from_le_bytes(b.try_into().unwrap()))
    }

    fn u64(&mut self) -> Option<u64> {
        self.take(8).map(|b| u64::from_le_bytes(b.try_into().unwrap()))
    }

    fn string(&mut self) -> Option<String> {
        let len = self.u32()? as usize;
        let bytes = self.take(len)?;
        String::from_utf8(bytes.to_vec()).ok()
    }

    fn at_end(&self) -> bool {
        self.pos == self.data.len()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use tempfile::tempdir;

    fn cells(pairs: &[(&str, &str, u64)]) -> Vec<CellWrite> {
        pairs
            .iter()
            .map(|(q, v, ts)| CellWrite::new(q, v.as_bytes().to_vec(), *ts))
            .collect()
    }

    #[test]
    fn puts_merge_across_qualifiers() {
        let dir = tempdir().unwrap();
        let mut store = RawStore::open(dir.path()).unwrap();
        store.create_table("marks").unwrap();
        store
            .put_row("marks", "s1", cells(&[("m:quiz", "4.5", 1)]))
            .unwrap();
        store
            .put_row("marks", "s1", cells(&[("m:mid1", "12", 2)]))
            .unwrap();
        let row = store.get_row("marks", "s1").unwrap().unwrap();
        assert_eq!(row.cell_str("m:quiz"), Some("4.5"));
        assert_eq!(row.cell_str("m:mid1"), Some("12"));
    }

    #[test]
    fn scan_respects_half_open_range() {
        let dir = tempdir().unwrap();
        let mut store = RawStore::open(dir.path()).unwrap();
        store.create_table("marks").unwrap();
        store
            .put_row("marks", "s150", cells(&[("d:x", "1", 1)]))
            .unwrap();
        store
            .put_row("marks", "s250", cells(&[("d:x", "2", 1)]))
            .unwrap();
        let rows = store.scan_range("marks", "s100", "s200").unwrap();
        assert_eq!(rows.len(), 1);
        assert_eq!(rows[0].row_key, "s150");
        // Empty range is empty, not an error.
        assert!(store.scan_range("marks", "a", "b").unwrap().is_empty());
    }

    #[test]
    fn versions_kept_and_readable_by_timestamp() {
        let dir = tempdir().unwrap();
        let mut store = RawStore::open(dir.path()).unwrap();
        store.create_table("t").unwrap();
        store.put_row("t", "k", cells(&[("d:v", "old", 5)])).unwrap();
        store.put_row("t", "k", cells(&[("d:v", "new", 9)])).unwrap();
        let latest = store.get_row("t", "k").unwrap().unwrap();
        assert_eq!(latest.cell_str("d:v"), Some("new"));
        let old = store.get_row_at("t", "k", 7).unwrap().unwrap();
        assert_eq!(old.cell_str("d:v"), Some("old"));
        assert_eq!(store.cell_versions("t", "k", "d:v").unwrap().len(), 2);
    }

    #[test]
    fn timestamp_regression_rejected() {
        let dir = tempdir().unwrap();
        let mut store = RawStore::open(dir.path()).unwrap();
        store.create_table("t").unwrap();
        store.put_row("t", "k", cells(&[("d:v", "a", 9)])).unwrap();
        let err = store
            .put_row("t", "k", cells(&[("d:v", "b", 3)]))
            .unwrap_err();
        assert!(matches!(err, StorageError::TimestampRegression { .. }));
        // The failed batch wrote nothing.
        let row = store.get_row("t", "k").unwrap().unwrap();
        assert_eq!(row.cell_str("d:v"), Some("a"));
    }

    #[test]
    fn unknown_table_is_an_error() {
        let dir = tempdir().unwrap();
        let mut store = RawStore::open(dir.path()).unwrap();
        assert!(matches!(
            store.get_row("nope", "k"),
            Err(StorageError::UnknownTable(_))
        ));
        assert!(matches!(
            store.put_row("nope", "k", vec![]),
            Err(StorageError::UnknownTable(_))
        ));
    }

    #[test]
    fn index_rebuilds_on_reopen() {
        let dir = tempdir().unwrap();
        {
            let mut store = RawStore::open(dir.path()).unwrap();
            store.create_table("t").unwrap();
            store
                .commit_batch(
                    "t",
                    &[
                        RowPut::new("a", cells(&[("d:x", "1", 1)])),
                        RowPut::new("b", cells(&[("d:x", "2", 1)])),
                    ],
                )
                .unwrap();
            store.put_row("t", "a", cells(&[("d:x", "3", 2)])).unwrap();
        }
        let store = RawStore::open(dir.path()).unwrap();
        let row = store.get_row("t", "a").unwrap().unwrap();
        assert_eq!(row.cell_str("d:x"), Some("3"));
        assert_eq!(store.row_count("t").unwrap(), 2);
    }

    #[test]
    fn corrupt_segment_detected_on_open() {
        let dir = tempdir().unwrap();
        {
            let mut store = RawStore::open(dir.path()).unwrap();
            store.create_table("t").unwrap();
            store.put_row("t", "k", cells(&[("d:v", "x", 1)])).unwrap();
        }
        let seg = dir.path().join("t.000000.seg");
        let mut bytes = fs::read(&seg).unwrap();
        let mid = bytes.len() / 2;
        bytes[mid] ^= 0xff;
        fs::write(&seg, bytes).unwrap();
        assert!(matches!(
            RawStore::open(dir.path()),
            Err(StorageError::Corrupt { .. })
        ));
    }

    #[test]
    fn scan_is_snapshot_consistent() {
        let dir = tempdir().unwrap();
        let mut store = RawStore::open(dir.path()).unwrap();
        store.create_table("t").unwrap();
        store.put_row("t", "a", cells(&[("d:x", "1", 1)])).unwrap();
        let snapshot = store.scan_all("t").unwrap();
        store.put_row("t", "b", cells(&[("d:x", "2", 1)])).unwrap();
        assert_eq!(snapshot.len(), 1);
        assert_eq!(store.scan_all("t").unwrap().len(), 2);
    }
}
