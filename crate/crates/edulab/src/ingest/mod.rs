//! Drop-folder ingestion into the raw store.
//!
//! Every import is a *snapshot*: one input file, digested with FNV-1a and
//! recorded in the [`MANIFEST_TABLE`], its rows committed to a target table
//! in one atomic batch. Rows that fail structural validation are routed to
//! a `<table>__quarantine` table together with the reason instead of being
//! dropped, so every data row in the input is accounted for:
//!
//! ```text
//! valid rows + quarantined rows + deduplicated lines = input rows
//! ```
//!
//! Re-importing a byte-identical file is a no-op — the digest is already in
//! the manifest table and the store is left untouched — which is what makes
//! the folder scheduler in [`schedule`] safe to run over the same files
//! again and again. Reusing a snapshot id for *different* bytes is refused
//! outright; a snapshot, once committed, never changes meaning.
//!
//! Cell timestamps are the snapshot id, so the latest snapshot always wins
//! on read while older versions stay queryable through
//! [`RawStore::cell_versions`].

mod schedule;

pub use schedule::{run_schedule, ScheduleConfig, ScheduledImport, SourceKind, SourceSpec};

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::fs;
use std::path::{Path, PathBuf};

use chrono::{DateTime, SecondsFormat, Utc};
use serde::{Deserialize, Serialize};

use crate::catalog::{CatalogError, TableSchema, ValueKind};
use crate::hash::fnv1a_64;
use crate::storage::{CellWrite, RawStore, RowPut, StorageError};

/// Table holding one provenance row per committed snapshot, keyed
/// `<source>/<snapshot>`. The leading underscore keeps it out of the way of
/// ordinary data tables.
pub const MANIFEST_TABLE: &str = "_manifest";

/// Suffix appended to a target table's name to form its quarantine table.
pub const QUARANTINE_SUFFIX: &str = "__quarantine";

/// Source and table name used for application-event imports.
pub const EVENTS_TABLE: &str = "events";

/// Source and table name used for feedback-form imports.
pub const FEEDBACK_TABLE: &str = "feedback";

#[derive(Debug, thiserror::Error)]
pub enum IngestError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: no header row")]
    MissingHeader { path: PathBuf },
    #[error(
        "{path}: header does not match schema (missing: [{}]; unexpected: [{}])",
        missing.join(", "),
        unexpected.join(", ")
    )]
    HeaderMismatch {
        path: PathBuf,
        missing: Vec<String>,
        unexpected: Vec<String>,
    },
    #[error("schema for table {table:?} has no student_id field to key rows by")]
    KeyColumnMissing { table: String },
    #[error(
        "snapshot {snapshot_id} of source {source_id:?} is already committed with digest \
         {existing:016x}; refusing to overwrite it with digest {attempted:016x}"
    )]
    SnapshotConflict {
        source_id: String,
        snapshot_id: u64,
        existing: u64,
        attempted: u64,
    },
    #[error("manifest row {key:?} is unreadable: {reason}")]
    ManifestCorrupt { key: String, reason: String },
    #[error("schedule config line {line}: {message}")]
    Config { line: usize, message: String },
    #[error(transparent)]
    Storage(#[from] StorageError),
    #[error(transparent)]
    Catalog(#[from] CatalogError),
}

impl IngestError {
    fn io(path: &Path, source: std::io::Error) -> Self {
        IngestError::Io {
            path: path.to_path_buf(),
            source,
        }
    }
}

/// Provenance record for one committed snapshot.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SnapshotManifest {
    pub source_id: String,
    pub snapshot_id: u64,
    /// Valid data rows committed to the target table.
    pub row_count: u64,
    /// Logical ingest time; equals the snapshot id, which is the only clock
    /// the store trusts.
    pub ingested_at: u64,
    /// FNV-1a digest of the raw input file bytes.
    pub content_digest: u64,
}

/// Outcome of one import call. All counts describe the work done by *this*
/// call: a no-op re-import reports zero rows handled and carries the
/// manifest of the snapshot that already holds the data.
#[derive(Debug, Clone)]
pub struct ImportReport {
    pub manifest: SnapshotManifest,
    /// Rows routed to the quarantine table.
    pub quarantined: u64,
    /// Byte-identical duplicate lines skipped within this snapshot.
    pub deduplicated: u64,
    pub warnings: Vec<String>,
    /// True when the file's digest was already committed for this source
    /// and nothing was written.
    pub no_op: bool,
}

impl ImportReport {
    /// Data rows seen in the input file: valid + quarantined + deduplicated.
    pub fn input_rows(&self) -> u64 {
        self.manifest.row_count + self.quarantined + self.deduplicated
    }
}

fn manifest_key(source_id: &str, snapshot_id: u64) -> String {
    format!("{source_id}/{snapshot_id:06}")
}

/// All committed manifests for one source, in snapshot order.
pub fn manifests_for_source(
    store: &RawStore,
    source_id: &str,
) -> Result<Vec<SnapshotManifest>, IngestError> {
    if !store.has_table(MANIFEST_TABLE) {
        return Ok(Vec::new());
    }
    // '0' is the first byte after '/', so this half-open range covers
    // exactly the keys prefixed `<source>/`.
    let start = format!("{source_id}/");
    let end = format!("{source_id}0");
    let rows = store.scan_range(MANIFEST_TABLE, &start, &end)?;
    rows.iter()
        .map(|row| {
            let cell = row.cell_str("manifest").ok_or_else(|| IngestError::ManifestCorrupt {
                key: row.row_key.clone(),
                reason: "missing manifest cell".into(),
            })?;
            serde_json::from_str(cell).map_err(|e| IngestError::ManifestCorrupt {
                key: row.row_key.clone(),
                reason: e.to_string(),
            })
        })
        .collect()
}

/// Next unused snapshot id for a source (ids start at 1).
pub fn next_snapshot_id(store: &RawStore, source_id: &str) -> Result<u64, IngestError> {
    let manifests = manifests_for_source(store, source_id)?;
    Ok(manifests.iter().map(|m| m.snapshot_id).max().unwrap_or(0) + 1)
}

/// Decide what to do with an incoming file: `Ok(Some(_))` means the digest
/// is already committed (no-op), `Err` means the snapshot id is taken by
/// different bytes, `Ok(None)` means go ahead.
fn check_snapshot(
    store: &RawStore,
    source_id: &str,
    snapshot_id: u64,
    digest: u64,
) -> Result<Option<SnapshotManifest>, IngestError> {
    let existing = manifests_for_source(store, source_id)?;
    if let Some(m) = existing.iter().find(|m| m.content_digest == digest) {
        return Ok(Some(m.clone()));
    }
    if let Some(m) = existing.iter().find(|m| m.snapshot_id == snapshot_id) {
        return Err(IngestError::SnapshotConflict {
            source_id: source_id.to_string(),
            snapshot_id,
            existing: m.content_digest,
            attempted: digest,
        });
    }
    Ok(None)
}

fn no_op_report(manifest: SnapshotManifest) -> ImportReport {
    let note = format!(
        "digest {:016x} already committed as snapshot {}; nothing written",
        manifest.content_digest, manifest.snapshot_id
    );
    ImportReport {
        manifest,
        quarantined: 0,
        deduplicated: 0,
        warnings: vec![note],
        no_op: true,
    }
}

/// Commit a fully validated snapshot: data batch, quarantine batch, then
/// the manifest row. Parsing happens before this is called, so a failure
/// in the first batch leaves the store untouched.
fn commit_snapshot(
    store: &mut RawStore,
    table: &str,
    puts: &[RowPut],
    quarantine: &[RowPut],
    manifest: &SnapshotManifest,
) -> Result<(), IngestError> {
    store.create_table(table)?;
    let quarantine_table = format!("{table}{QUARANTINE_SUFFIX}");
    store.create_table(&quarantine_table)?;
    store.create_table(MANIFEST_TABLE)?;
    if !puts.is_empty() {
        store.commit_batch(table, puts)?;
    }
    if !quarantine.is_empty() {
        store.commit_batch(&quarantine_table, quarantine)?;
    }
    let body = serde_json::to_string(manifest).expect("manifest serializes");
    let cell = CellWrite::new("manifest", body, manifest.snapshot_id);
    store.put_row(
        MANIFEST_TABLE,
        &manifest_key(&manifest.source_id, manifest.snapshot_id),
        vec![cell],
    )?;
    Ok(())
}

fn quarantine_row(snapshot_id: u64, row_no: usize, reason: &str, raw: &str) -> RowPut {
    RowPut::new(
        &format!("{snapshot_id:06}/{row_no:06}"),
        vec![
            CellWrite::new("reason", reason, snapshot_id),
            CellWrite::new("raw", raw, snapshot_id),
        ],
    )
}

/// Check a CSV header against the schema's field names, order-insensitively,
/// and return the record index of each schema field.
fn header_indices(
    path: &Path,
    headers: &csv::StringRecord,
    schema: &TableSchema,
) -> Result<Vec<usize>, IngestError> {
    let names: Vec<String> = headers.iter().map(|h| h.trim().to_string()).collect();
    let wanted: BTreeSet<&str> = schema.fields.iter().map(|f| f.name.as_str()).collect();
    let seen: BTreeSet<&str> = names.iter().map(|n| n.as_str()).collect();
    let missing: Vec<String> = wanted
        .iter()
        .filter(|n| !seen.contains(**n))
        .map(|n| n.to_string())
        .collect();
    let unexpected: Vec<String> = seen
        .iter()
        .filter(|n| !wanted.contains(**n))
        .map(|n| n.to_string())
        .collect();
    // A duplicated header column collapses in the set comparison, so catch
    // it through the length check.
    if !missing.is_empty() || !unexpected.is_empty() || names.len() != schema.fields.len() {
        return Err(IngestError::HeaderMismatch {
            path: path.to_path_buf(),
            missing,
            unexpected,
        });
    }
    Ok(schema
        .fields
        .iter()
        .map(|f| names.iter().position(|n| n == &f.name).expect("checked above"))
        .collect())
}

/// Structural validation of one CSV record against the schema. Returns the
/// values in schema field order, or the reason the row must be quarantined.
/// Range bounds are deliberately not enforced here; they belong to feature
/// encoding, not ingestion.
fn validate_record(
    schema: &TableSchema,
    indices: &[usize],
    record: &csv::StringRecord,
) -> Result<Vec<String>, String> {
    let mut values = Vec::with_capacity(schema.fields.len());
    for (field, &idx) in schema.fields.iter().zip(indices) {
        let value = record.get(idx).unwrap_or("").trim();
        match field.kind {
            ValueKind::Numeric => {
                let parsed: Result<f64, _> = value.parse();
                if !parsed.map(f64::is_finite).unwrap_or(false) {
                    return Err(format!("field {}: {value:?} is not numeric", field.name));
                }
            }
            ValueKind::Boolean => {
                if !matches!(value, "true" | "false" | "0" | "1") {
                    return Err(format!("field {}: {value:?} is not a boolean", field.name));
                }
            }
            ValueKind::Timestamp => {
                if value.parse::<u64>().is_err() {
                    return Err(format!("field {}: {value:?} is not a timestamp", field.name));
                }
            }
            ValueKind::Categorical => {
                if value.is_empty() {
                    return Err(format!("field {}: empty categorical value", field.name));
                }
            }
            ValueKind::Text => {}
        }
        if field.name == "student_id" && value.is_empty() {
            return Err("student_id is empty".into());
        }
        values.push(value.to_string());
    }
    Ok(values)
}

/// Import one CSV snapshot into `table`, validating each row against
/// `schema`. Valid rows are keyed by their `student_id`; invalid rows land
/// in the quarantine table with a reason. A duplicated `student_id` within
/// the file keeps the later row and records a warning.
pub fn import_table(
    store: &mut RawStore,
    path: &Path,
    schema: &TableSchema,
    table: &str,
    snapshot_id: u64,
) -> Result<ImportReport, IngestError> {
    let bytes = fs::read(path).map_err(|e| IngestError::io(path, e))?;
    let digest = fnv1a_64(&bytes);
    if let Some(prior) = check_snapshot(store, table, snapshot_id, digest)? {
        return Ok(no_op_report(prior));
    }
    schema
        .field("student_id")
        .ok_or_else(|| IngestError::KeyColumnMissing { table: table.to_string() })?;

    let mut reader = csv::ReaderBuilder::new()
        .flexible(true)
        .from_reader(bytes.as_slice());
    let headers = reader
        .headers()
        .map_err(|_| IngestError::MissingHeader { path: path.to_path_buf() })?
        .clone();
    if headers.is_empty() || (headers.len() == 1 && headers[0].trim().is_empty()) {
        return Err(IngestError::MissingHeader { path: path.to_path_buf() });
    }
    let indices = header_indices(path, &headers, schema)?;

    let mut puts: Vec<RowPut> = Vec::new();
    let mut quarantine: Vec<RowPut> = Vec::new();
    let mut warnings: Vec<String> = Vec::new();
    let mut first_row_of: HashMap<String, usize> = HashMap::new();
    let mut valid: u64 = 0;
    for (i, result) in reader.records().enumerate() {
        let row_no = i + 1;
        let record = match result {
            Ok(r) => r,
            Err(e) => {
                quarantine.push(quarantine_row(
                    snapshot_id,
                    row_no,
                    &format!("unreadable row: {e}"),
                    "",
                ));
                continue;
            }
        };
        let raw = record.iter().collect::<Vec<_>>().join(",");
        if record.len() != headers.len() {
            let reason = format!("{} fields, expected {}", record.len(), headers.len());
            quarantine.push(quarantine_row(snapshot_id, row_no, &reason, &raw));
            continue;
        }
        match validate_record(schema, &indices, &record) {
            Ok(values) => {
                let key_pos = schema
                    .fields
                    .iter()
                    .position(|f| f.name == "student_id")
                    .expect("checked above");
                let key = values[key_pos].clone();
                if let Some(prev) = first_row_of.insert(key.clone(), row_no) {
                    warnings.push(format!(
                        "row {row_no}: duplicate student_id {key:?}; row {prev} is overwritten"
                    ));
                }
                let cells = schema
                    .fields
                    .iter()
                    .zip(values)
                    .map(|(f, v)| CellWrite::new(&f.name, v, snapshot_id))
                    .collect();
                puts.push(RowPut::new(&key, cells));
                valid += 1;
            }
            Err(reason) => {
                quarantine.push(quarantine_row(snapshot_id, row_no, &reason, &raw));
            }
        }
    }

    let manifest = SnapshotManifest {
        source_id: table.to_string(),
        snapshot_id,
        row_count: valid,
        ingested_at: snapshot_id,
        content_digest: digest,
    };
    let quarantined = quarantine.len() as u64;
    commit_snapshot(store, table, &puts, &quarantine, &manifest)?;
    Ok(ImportReport {
        manifest,
        quarantined,
        deduplicated: 0,
        warnings,
        no_op: false,
    })
}

/// One application event parsed from a JSONL snapshot line.
#[derive(Debug, Clone, Deserialize)]
pub struct AppEvent {
    pub student_id: String,
    /// ISO-8601 timestamp as it appeared in the input.
    pub ts: String,
    pub kind: String,
    #[serde(default)]
    pub payload: BTreeMap<String, serde_json::Value>,
}

/// Parse one JSONL event line, normalising the timestamp to a fixed-width
/// UTC form whose lexicographic order is chronological order.
fn parse_event_line(line: &str) -> Result<(AppEvent, String), String> {
    let event: AppEvent = serde_json::from_str(line).map_err(|e| format!("invalid JSON: {e}"))?;
    if event.student_id.is_empty() {
        return Err("student_id is empty".into());
    }
    if event.kind.is_empty() {
        return Err("kind is empty".into());
    }
    let ts = DateTime::parse_from_rfc3339(&event.ts)
        .map_err(|e| format!("ts {:?} is not ISO-8601: {e}", event.ts))?;
    let normalized = ts
        .with_timezone(&Utc)
        .to_rfc3339_opts(SecondsFormat::Micros, true);
    Ok((event, normalized))
}

/// Import one JSONL snapshot of application events. Events are keyed
/// `<student>/<utc ts>/<seq>`, so a range scan over one student's prefix
/// returns their history in time order. Byte-identical duplicate lines are
/// stored once; malformed lines are quarantined.
pub fn import_events(
    store: &mut RawStore,
    path: &Path,
    snapshot_id: u64,
) -> Result<ImportReport, IngestError> {
    let bytes = fs::read(path).map_err(|e| IngestError::io(path, e))?;
    let digest = fnv1a_64(&bytes);
    if let Some(prior) = check_snapshot(store, EVENTS_TABLE, snapshot_id, digest)? {
        return Ok(no_op_report(prior));
    }

    let text = String::from_utf8_lossy(&bytes);
    let mut puts: Vec<RowPut> = Vec::new();
    let mut quarantine: Vec<RowPut> = Vec::new();
    let mut seen_lines: HashSet<u64> = HashSet::new();
    let mut seq: BTreeMap<(String, String), u32> = BTreeMap::new();
    let mut valid: u64 = 0;
    let mut deduplicated: u64 = 0;
    for (i, raw_line) in text.lines().enumerate() {
        let line_no = i + 1;
        let line = raw_line.trim_end_matches('\r');
        if line.trim().is_empty() {
            continue;
        }
        if !seen_lines.insert(fnv1a_64(line.as_bytes())) {
            deduplicated += 1;
            continue;
        }
        match parse_event_line(line) {
            Ok((event, ts)) => {
                let n = seq.entry((event.student_id.clone(), ts.clone())).or_insert(0);
                let key = format!("{}/{}/{:04}", event.student_id, ts, n);
                *n += 1;
                let payload =
                    serde_json::to_string(&event.payload).expect("payload round-trips");
                puts.push(RowPut::new(
                    &key,
                    vec![
                        CellWrite::new("ts", ts, snapshot_id),
                        CellWrite::new("kind", event.kind, snapshot_id),
                        CellWrite::new("payload", payload, snapshot_id),
                    ],
                ));
                valid += 1;
            }
            Err(reason) => {
                quarantine.push(quarantine_row(snapshot_id, line_no, &reason, line));
            }
        }
    }

    let manifest = SnapshotManifest {
        source_id: EVENTS_TABLE.to_string(),
        snapshot_id,
        row_count: valid,
        ingested_at: snapshot_id,
        content_digest: digest,
    };
    let quarantined = quarantine.len() as u64;
    commit_snapshot(store, EVENTS_TABLE, &puts, &quarantine, &manifest)?;
    Ok(ImportReport {
        manifest,
        quarantined,
        deduplicated,
        warnings: Vec::new(),
        no_op: false,
    })
}

/// Import one CSV snapshot of feedback-form responses
/// (`student_id,q1,q2,q3`). Each stored row carries two extra flag cells:
/// `zero_length` when all three answers are empty, and `orphan` when the
/// respondent has no row in `marks_table`. Respondents with an empty
/// `student_id` are quarantined.
pub fn import_feedback(
    store: &mut RawStore,
    path: &Path,
    marks_table: &str,
    snapshot_id: u64,
) -> Result<ImportReport, IngestError> {
    let bytes = fs::read(path).map_err(|e| IngestError::io(path, e))?;
    let digest = fnv1a_64(&bytes);
    if let Some(prior) = check_snapshot(store, FEEDBACK_TABLE, snapshot_id, digest)? {
        return Ok(no_op_report(prior));
    }

    let schema = crate::catalog::feedback_schema();
    let mut reader = csv::ReaderBuilder::new()
        .flexible(true)
        .from_reader(bytes.as_slice());
    let headers = reader
        .headers()
        .map_err(|_| IngestError::MissingHeader { path: path.to_path_buf() })?
        .clone();
    if headers.is_empty() || (headers.len() == 1 && headers[0].trim().is_empty()) {
        return Err(IngestError::MissingHeader { path: path.to_path_buf() });
    }
    let indices = header_indices(path, &headers, &schema)?;

    let mut warnings: Vec<String> = Vec::new();
    let marks_present = store.has_table(marks_table);
    if !marks_present {
        warnings.push(format!(
            "marks table {marks_table:?} not found; all respondents flagged orphan"
        ));
    }

    let mut puts: Vec<RowPut> = Vec::new();
    let mut quarantine: Vec<RowPut> = Vec::new();
    let mut first_row_of: HashMap<String, usize> = HashMap::new();
    let mut valid: u64 = 0;
    for (i, result) in reader.records().enumerate() {
        let row_no = i + 1;
        let record = match result {
            Ok(r) => r,
            Err(e) => {
                quarantine.push(quarantine_row(
                    snapshot_id,
                    row_no,
                    &format!("unreadable row: {e}"),
                    "",
                ));
                continue;
            }
        };
        let raw = record.iter().collect::<Vec<_>>().join(",");
        if record.len() != headers.len() {
            let reason = format!("{} fields, expected {}", record.len(), headers.len());
            quarantine.push(quarantine_row(snapshot_id, row_no, &reason, &raw));
            continue;
        }
        let values = match validate_record(&schema, &indices, &record) {
            Ok(v) => v,
            Err(reason) => {
                quarantine.push(quarantine_row(snapshot_id, row_no, &reason, &raw));
                continue;
            }
        };
        let student_id = values[0].clone();
        let answers = &values[1..4];
        if let Some(prev) = first_row_of.insert(student_id.clone(), row_no) {
            warnings.push(format!(
                "row {row_no}: duplicate student_id {student_id:?}; row {prev} is overwritten"
            ));
        }
        let zero_length = answers.iter().all(|a| a.is_empty());
        let orphan = if marks_present {
            store.get_row(marks_table, &student_id)?.is_none()
        } else {
            true
        };
        let flag = |b: bool| if b { "1" } else { "0" };
        puts.push(RowPut::new(
            &student_id,
            vec![
                CellWrite::new("q1", answers[0].clone(), snapshot_id),
                CellWrite::new("q2", answers[1].clone(), snapshot_id),
                CellWrite::new("q3", answers[2].clone(), snapshot_id),
                CellWrite::new("zero_length", flag(zero_length), snapshot_id),
                CellWrite::new("orphan", flag(orphan), snapshot_id),
            ],
        ));
        valid += 1;
    }

    let manifest = SnapshotManifest {
        source_id: FEEDBACK_TABLE.to_string(),
        snapshot_id,
        row_count: valid,
        ingested_at: snapshot_id,
        content_digest: digest,
    };
    let quarantined = quarantine.len() as u64;
    commit_snapshot(store, FEEDBACK_TABLE, &puts, &quarantine, &manifest)?;
    Ok(ImportReport {
        manifest,
        quarantined,
        deduplicated: 0,
        warnings,
        no_op: false,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog::student_record_schema;
    use std::fmt::Write as _;

    fn sample_row(id: &str) -> Vec<String> {
        [
            id, "3.2", "cs", "45", "0.08", "4.5", "12", "15", "1.8", "2.5", "38.8", "8.5",
            "4.2", "30", "85.5", "B+", "0", "F16",
        ]
        .iter()
        .map(|s| s.to_string())
        .collect()
    }

    fn marks_csv(rows: &[Vec<String>]) -> String {
        let schema = student_record_schema();
        let mut text = schema
            .fields
            .iter()
            .map(|f| f.name.as_str())
            .collect::<Vec<_>>()
            .join(",");
        text.push('\n');
        for row in rows {
            writeln!(text, "{}", row.join(",")).unwrap();
        }
        text
    }

    fn write_file(dir: &Path, name: &str, contents: &str) -> PathBuf {
        let path = dir.join(name);
        fs::write(&path, contents).unwrap();
        path
    }

    /// Sorted (file name, content digest) pairs for every file under a
    /// store directory — a byte-level fingerprint of the whole store.
    fn store_fingerprint(dir: &Path) -> Vec<(String, u64)> {
        let mut entries: Vec<(String, u64)> = fs::read_dir(dir)
            .unwrap()
            .map(|e| {
                let e = e.unwrap();
                let bytes = fs::read(e.path()).unwrap();
                (e.file_name().to_string_lossy().into_owned(), fnv1a_64(&bytes))
            })
            .collect();
        entries.sort();
        entries
    }

    #[test]
    fn table_import_commits_rows_and_manifest() {
        let dir = tempfile::tempdir().unwrap();
        let mut store = RawStore::open(dir.path().join("store")).unwrap();
        let path = write_file(
            dir.path(),
            "marks.csv",
            &marks_csv(&[sample_row("s01"), sample_row("s02"), sample_row("s03")]),
        );

        let report =
            import_table(&mut store, &path, &student_record_schema(), "marks", 1).unwrap();
        assert!(!report.no_op);
        assert_eq!(report.manifest.row_count, 3);
        assert_eq!(report.quarantined, 0);
        assert_eq!(store.row_count("marks").unwrap(), 3);

        let row = store.get_row("marks", "s02").unwrap().unwrap();
        assert_eq!(row.cell_str("gpa"), Some("3.2"));
        assert_eq!(row.cell_str("semester"), Some("F16"));

        let manifests = manifests_for_source(&store, "marks").unwrap();
        assert_eq!(manifests, vec![report.manifest]);
    }

    #[test]
    fn reimport_is_a_no_op_and_leaves_bytes_unchanged() {
        let dir = tempfile::tempdir().unwrap();
        let store_dir = dir.path().join("store");
        let mut store = RawStore::open(&store_dir).unwrap();
        let path = write_file(dir.path(), "marks.csv", &marks_csv(&[sample_row("s01")]));
        let schema = student_record_schema();

        let first = import_table(&mut store, &path, &schema, "marks", 1).unwrap();
        let fingerprint = store_fingerprint(&store_dir);

        // Same snapshot id and a later one: both must recognise the digest.
        for snapshot in [1, 2] {
            let again = import_table(&mut store, &path, &schema, "marks", snapshot).unwrap();
            assert!(again.no_op);
            assert_eq!(again.manifest, first.manifest);
        }
        assert_eq!(store_fingerprint(&store_dir), fingerprint);
        assert_eq!(next_snapshot_id(&store, "marks").unwrap(), 2);
    }

    #[test]
    fn header_mismatch_is_fatal_and_writes_nothing() {
        let dir = tempfile::tempdir().unwrap();
        let mut store = RawStore::open(dir.path().join("store")).unwrap();
        let path = write_file(dir.path(), "bad.csv", "student_id,gpa\ns01,3.2\n");

        let err = import_table(&mut store, &path, &student_record_schema(), "marks", 1)
            .unwrap_err();
        match err {
            IngestError::HeaderMismatch { missing, unexpected, .. } => {
                assert!(missing.contains(&"final_exam".to_string()));
                assert!(unexpected.is_empty());
            }
            other => panic!("expected HeaderMismatch, got {other:?}"),
        }
        assert!(!store.has_table("marks"));
        assert!(!store.has_table(MANIFEST_TABLE));
    }

    #[test]
    fn malformed_rows_are_quarantined_with_reasons() {
        let dir = tempfile::tempdir().unwrap();
        let mut store = RawStore::open(dir.path().join("store")).unwrap();
        let mut bad_gpa = sample_row("s02");
        bad_gpa[1] = "abc".into();
        let mut no_id = sample_row("");
        no_id[1] = "2.8".into();
        let rows = vec![sample_row("s01"), bad_gpa, no_id, vec!["s04".into(); 3]];
        let path = write_file(dir.path(), "marks.csv", &marks_csv(&rows));

        let report =
            import_table(&mut store, &path, &student_record_schema(), "marks", 1).unwrap();
        assert_eq!(report.manifest.row_count, 1);
        assert_eq!(report.quarantined, 3);
        assert_eq!(report.input_rows(), 4);
        assert_eq!(store.row_count("marks").unwrap(), 1);

        let quarantined = store.scan_all("marks__quarantine").unwrap();
        assert_eq!(quarantined.len(), 3);
        let reasons: Vec<&str> = quarantined
            .iter()
            .map(|r| r.cell_str("reason").unwrap())
            .collect();
        assert!(reasons.iter().any(|r| r.contains("not numeric")));
        assert!(reasons.iter().any(|r| r.contains("student_id is empty")));
        assert!(reasons.iter().any(|r| r.contains("expected 18")));
    }

    #[test]
    fn duplicate_student_id_keeps_the_later_row() {
        let dir = tempfile::tempdir().unwrap();
        let mut store = RawStore::open(dir.path().join("store")).unwrap();
        let mut second = sample_row("s01");
        second[1] = "3.9".into();
        let path = write_file(
            dir.path(),
            "marks.csv",
            &marks_csv(&[sample_row("s01"), second]),
        );

        let report =
            import_table(&mut store, &path, &student_record_schema(), "marks", 1).unwrap();
        assert_eq!(report.manifest.row_count, 2);
        assert_eq!(report.warnings.len(), 1);
        assert!(report.warnings[0].contains("duplicate student_id"));
        let row = store.get_row("marks", "s01").unwrap().unwrap();
        assert_eq!(row.cell_str("gpa"), Some("3.9"));
    }

    #[test]
    fn changed_bytes_under_the_same_snapshot_id_are_refused() {
        let dir = tempfile::tempdir().unwrap();
        let mut store = RawStore::open(dir.path().join("store")).unwrap();
        let schema = student_record_schema();
        let v1 = write_file(dir.path(), "a.csv", &marks_csv(&[sample_row("s01")]));
        let v2 = write_file(dir.path(), "b.csv", &marks_csv(&[sample_row("s02")]));

        import_table(&mut store, &v1, &schema, "marks", 1).unwrap();
        let err = import_table(&mut store, &v2, &schema, "marks", 1).unwrap_err();
        assert!(matches!(err, IngestError::SnapshotConflict { snapshot_id: 1, .. }));
    }

    #[test]
    fn newer_snapshot_wins_and_history_is_kept() {
        let dir = tempfile::tempdir().unwrap();
        let mut store = RawStore::open(dir.path().join("store")).unwrap();
        let schema = student_record_schema();
        let mut updated = sample_row("s01");
        updated[1] = "3.7".into();
        let v1 = write_file(dir.path(), "a.csv", &marks_csv(&[sample_row("s01")]));
        let v2 = write_file(dir.path(), "b.csv", &marks_csv(&[updated]));

        import_table(&mut store, &v1, &schema, "marks", 1).unwrap();
        import_table(&mut store, &v2, &schema, "marks", 2).unwrap();

        let row = store.get_row("marks", "s01").unwrap().unwrap();
        assert_eq!(row.cell_str("gpa"), Some("3.7"));
        let versions = store.cell_versions("marks", "s01", "gpa").unwrap();
        assert_eq!(versions.len(), 2);
        assert_eq!(next_snapshot_id(&store, "marks").unwrap(), 3);
    }

    #[test]
    fn events_are_ordered_deduplicated_and_quarantined() {
        let dir = tempfile::tempdir().unwrap();
        let mut store = RawStore::open(dir.path().join("store")).unwrap();
        let lines = concat!(
            // Offset timestamp: normalises to 06:00 UTC, after the 05:00 line.
            "{\"student_id\":\"s1\",\"ts\":\"2016-10-03T08:00:00+02:00\",\"kind\":\"quiz_open\",\"payload\":{\"quiz\":\"5\"}}\n",
            "{\"student_id\":\"s1\",\"ts\":\"2016-10-03T05:00:00Z\",\"kind\":\"lms_login\"}\n",
            "{\"student_id\":\"s1\",\"ts\":\"2016-10-03T08:00:00+02:00\",\"kind\":\"quiz_open\",\"payload\":{\"quiz\":\"5\"}}\n",
            "{\"student_id\":\"s1\",\"ts\":\"yesterday\",\"kind\":\"lms_login\"}\n",
            "{\"ts\":\"2016-10-03T09:00:00Z\",\"kind\":\"lms_login\"}\n",
            "{\"student_id\":\"s2\",\"ts\":\"2016-10-03T05:30:00Z\",\"kind\":\"lms_login\"}\n",
        );
        let path = write_file(dir.path(), "events.jsonl", lines);

        let report = import_events(&mut store, &path, 1).unwrap();
        assert_eq!(report.manifest.row_count, 3);
        assert_eq!(report.deduplicated, 1);
        assert_eq!(report.quarantined, 2);
        assert_eq!(report.input_rows(), 6);

        let s1 = store.scan_range("events", "s1/", "s10").unwrap();
        let kinds: Vec<&str> = s1.iter().map(|r| r.cell_str("kind").unwrap()).collect();
        assert_eq!(kinds, vec!["lms_login", "quiz_open"]);
        assert_eq!(
            s1[1].cell_str("ts"),
            Some("2016-10-03T06:00:00.000000Z"),
            "offset timestamps normalise to UTC"
        );
        assert_eq!(s1[1].cell_str("payload"), Some("{\"quiz\":\"5\"}"));

        let reasons: Vec<String> = store
            .scan_all("events__quarantine")
            .unwrap()
            .iter()
            .map(|r| r.cell_str("reason").unwrap().to_string())
            .collect();
        assert!(reasons.iter().any(|r| r.contains("not ISO-8601")));
        assert!(reasons.iter().any(|r| r.contains("invalid JSON")));
    }

    #[test]
    fn same_second_events_keep_file_order_via_seq() {
        let dir = tempfile::tempdir().unwrap();
        let mut store = RawStore::open(dir.path().join("store")).unwrap();
        let lines = concat!(
            "{\"student_id\":\"s1\",\"ts\":\"2016-10-03T05:00:00Z\",\"kind\":\"first\"}\n",
            "{\"student_id\":\"s1\",\"ts\":\"2016-10-03T05:00:00Z\",\"kind\":\"second\"}\n",
        );
        let path = write_file(dir.path(), "events.jsonl", lines);

        import_events(&mut store, &path, 1).unwrap();
        let rows = store.scan_range("events", "s1/", "s10").unwrap();
        let kinds: Vec<&str> = rows.iter().map(|r| r.cell_str("kind").unwrap()).collect();
        assert_eq!(kinds, vec!["first", "second"]);
    }

    #[test]
    fn feedback_flags_orphans_and_empty_answers() {
        let dir = tempfile::tempdir().unwrap();
        let mut store = RawStore::open(dir.path().join("store")).unwrap();
        let marks = write_file(
            dir.path(),
            "marks.csv",
            &marks_csv(&[sample_row("s01"), sample_row("s02")]),
        );
        import_table(&mut store, &marks, &student_record_schema(), "marks", 1).unwrap();

        let feedback = write_file(
            dir.path(),
            "feedback.csv",
            "student_id,q1,q2,q3\n\
             s01,liked the labs,more examples please,good pace\n\
             s02,,,\n\
             s99,fine,fine,fine\n\
             ,lost my id,,\n",
        );
        let report = import_feedback(&mut store, &feedback, "marks", 1).unwrap();
        assert_eq!(report.manifest.row_count, 3);
        assert_eq!(report.quarantined, 1);
        assert_eq!(report.input_rows(), 4);

        let flags = |id: &str| {
            let row = store.get_row("feedback", id).unwrap().unwrap();
            (
                row.cell_str("zero_length").unwrap().to_string(),
                row.cell_str("orphan").unwrap().to_string(),
            )
        };
        assert_eq!(flags("s01"), ("0".into(), "0".into()));
        assert_eq!(flags("s02"), ("1".into(), "0".into()));
        assert_eq!(flags("s99"), ("0".into(), "1".into()));
    }

    #[test]
    fn feedback_without_marks_table_warns_once() {
        let dir = tempfile::tempdir().unwrap();
        let mut store = RawStore::open(dir.path().join("store")).unwrap();
        let feedback = write_file(
            dir.path(),
            "feedback.csv",
            "student_id,q1,q2,q3\ns01,a,b,c\n",
        );
        let report = import_feedback(&mut store, &feedback, "marks", 1).unwrap();
        assert_eq!(report.warnings.len(), 1);
        assert!(report.warnings[0].contains("flagged orphan"));
        let row = store.get_row("feedback", "s01").unwrap().unwrap();
        assert_eq!(row.cell_str("orphan"), Some("1"));
    }

    #[test]
    fn feedback_header_order_does_not_matter() {
        let dir = tempfile::tempdir().unwrap();
        let mut store = RawStore::open(dir.path().join("store")).unwrap();
        let feedback = write_file(
            dir.path(),
            "feedback.csv",
            "q3,student_id,q1,q2\nthird,s01,first,second\n",
        );
        import_feedback(&mut store, &feedback, "marks", 1).unwrap();
        let row = store.get_row("feedback", "s01").unwrap().unwrap();
        assert_eq!(row.cell_str("q1"), Some("first"));
        assert_eq!(row.cell_str("q3"), Some("third"));
    }
}
