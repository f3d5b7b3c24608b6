//! Scheduled imports from drop folders.
//!
//! A schedule config names one source per section — a file pattern, an
//! import kind, and a tick interval. [`run_schedule`] drives a virtual
//! clock: at each tick it expands every due source's pattern (sorted, so
//! runs are deterministic) and imports each matching file. Files whose
//! digest is already committed come back as no-ops, so running the
//! schedule twice over an unchanged folder changes nothing, and the
//! scheduler itself keeps no state — the manifest table is the state.
//!
//! Sources run strictly one after another; imports for one source can
//! never interleave.
//!
//! ```text
//! [marks]
//! kind = table
//! pattern = drops/marks*.csv
//! table = marks
//! interval = 1
//!
//! [events]
//! kind = events
//! pattern = drops/events*.jsonl
//! interval = 2
//! ```

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use crate::catalog::{student_record_schema, TableSchema};
use crate::storage::RawStore;

use super::{
    import_events, import_feedback, import_table, next_snapshot_id, ImportReport, IngestError,
    EVENTS_TABLE, FEEDBACK_TABLE,
};

/// What to do with the files a source's pattern matches.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SourceKind {
    /// CSV rows validated against a schema file (built-in marks schema when
    /// `schema` is omitted from the config).
    Table {
        table: String,
        schema_path: Option<String>,
    },
    /// JSONL application events.
    Events,
    /// Feedback-form responses; `marks_table` is consulted for orphan flags.
    Feedback { marks_table: String },
}

impl SourceKind {
    /// The source id the import functions record manifests under.
    fn manifest_source(&self) -> &str {
        match self {
            SourceKind::Table { table, .. } => table,
            SourceKind::Events => EVENTS_TABLE,
            SourceKind::Feedback { .. } => FEEDBACK_TABLE,
        }
    }
}

/// One configured drop-folder source.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SourceSpec {
    /// Section name from the config file; a human label for reports.
    pub source_id: String,
    pub kind: SourceKind,
    /// Relative path pattern; only the file-name segment may contain `*`.
    pub pattern: String,
    /// The source runs at every tick divisible by this (≥ 1).
    pub interval: u64,
}

/// Parsed schedule config: sources in file order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ScheduleConfig {
    pub sources: Vec<SourceSpec>,
}

impl ScheduleConfig {
    pub fn load(path: &Path) -> Result<Self, IngestError> {
        let text = fs::read_to_string(path).map_err(|e| IngestError::io(path, e))?;
        Self::parse(&text)
    }

    /// Parse the INI-like config format shown in the module docs.
    pub fn parse(text: &str) -> Result<Self, IngestError> {
        let fail = |line: usize, message: String| IngestError::Config { line, message };
        let mut sources: Vec<SourceSpec> = Vec::new();
        // (header line, section name, key -> (line, value))
        let mut section: Option<(usize, String, BTreeMap<String, (usize, String)>)> = None;

        let finish = |section: Option<(usize, String, BTreeMap<String, (usize, String)>)>|
         -> Result<Option<SourceSpec>, IngestError> {
            let Some((header_line, name, mut keys)) = section else {
                return Ok(None);
            };
            let mut take = |key: &str| keys.remove(key).map(|(_, v)| v);
            let pattern = take("pattern")
                .ok_or_else(|| fail(header_line, format!("source {name:?} has no pattern")))?;
            validate_pattern(header_line, &pattern)?;
            let interval: u64 = match take("interval") {
                None => 1,
                Some(v) => v
                    .parse()
                    .ok()
                    .filter(|n| *n >= 1)
                    .ok_or_else(|| fail(header_line, format!("bad interval {v:?} (want ≥ 1)")))?,
            };
            let kind_name = take("kind")
                .ok_or_else(|| fail(header_line, format!("source {name:?} has no kind")))?;
            let kind = match kind_name.as_str() {
                "table" => SourceKind::Table {
                    table: take("table").unwrap_or_else(|| name.clone()),
                    schema_path: take("schema"),
                },
                "events" => SourceKind::Events,
                "feedback" => SourceKind::Feedback {
                    marks_table: take("marks_table").unwrap_or_else(|| "marks".into()),
                },
                other => {
                    return Err(fail(
                        header_line,
                        format!("unknown kind {other:?} (want table, events or feedback)"),
                    ))
                }
            };
            if let Some((line, _)) = keys.values().next() {
                let names: Vec<&str> = keys.keys().map(|k| k.as_str()).collect();
                return Err(fail(*line, format!("unknown keys: {}", names.join(", "))));
            }
            Ok(Some(SourceSpec {
                source_id: name,
                kind,
                pattern,
                interval,
            }))
        };

        for (i, raw) in text.lines().enumerate() {
            let line_no = i + 1;
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            if let Some(name) = line.strip_prefix('[').and_then(|l| l.strip_suffix(']')) {
                let name = name.trim();
                if name.is_empty() {
                    return Err(fail(line_no, "empty section name".into()));
                }
                if let Some(spec) = finish(section.take())? {
                    sources.push(spec);
                }
                section = Some((line_no, name.to_string(), BTreeMap::new()));
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(fail(line_no, format!("expected `key = value`, got {line:?}")));
            };
            let Some((_, _, keys)) = section.as_mut() else {
                return Err(fail(line_no, "key before any [section]".into()));
            };
            let key = key.trim().to_string();
            if keys
                .insert(key.clone(), (line_no, value.trim().to_string()))
                .is_some()
            {
                return Err(fail(line_no, format!("duplicate key {key:?}")));
            }
        }
        if let Some(spec) = finish(section.take())? {
            sources.push(spec);
        }

        for (i, a) in sources.iter().enumerate() {
            if sources[..i].iter().any(|b| b.source_id == a.source_id) {
                return Err(fail(0, format!("duplicate source {:?}", a.source_id)));
            }
        }
        Ok(ScheduleConfig { sources })
    }
}

/// Reject patterns whose directory part contains a wildcard; only file
/// names are matched.
fn validate_pattern(line: usize, pattern: &str) -> Result<(), IngestError> {
    if let Some(dir) = pattern.rsplit_once('/').map(|(d, _)| d) {
        if dir.contains('*') {
            return Err(IngestError::Config {
                line,
                message: format!("pattern {pattern:?} has a wildcard outside the file name"),
            });
        }
    }
    Ok(())
}

/// Multi-`*` wildcard match over a file name (no `/` crossing: callers
/// match names, not paths). Greedy left-to-right placement of the literal
/// parts between stars.
fn wildcard_match(pattern: &str, name: &str) -> bool {
    let parts: Vec<&str> = pattern.split('*').collect();
    if parts.len() == 1 {
        return pattern == name;
    }
    let first = parts[0];
    let last = parts[parts.len() - 1];
    let Some(mut rest) = name.strip_prefix(first) else {
        return false;
    };
    for middle in &parts[1..parts.len() - 1] {
        if middle.is_empty() {
            continue;
        }
        match rest.find(middle) {
            Some(at) => rest = &rest[at + middle.len()..],
            None => return false,
        }
    }
    rest.ends_with(last)
}

/// Files under `base` matching `pattern`, sorted by name. A missing drop
/// directory simply matches nothing — the folder may not exist yet.
fn expand_pattern(base: &Path, pattern: &str) -> Result<Vec<PathBuf>, IngestError> {
    let (dir, name_pattern) = match pattern.rsplit_once('/') {
        Some((dir, name)) => (base.join(dir), name),
        None => (base.to_path_buf(), pattern),
    };
    if !dir.is_dir() {
        return Ok(Vec::new());
    }
    let mut names: Vec<String> = fs::read_dir(&dir)
        .map_err(|e| IngestError::io(&dir, e))?
        .filter_map(|entry| {
            let entry = entry.ok()?;
            let name = entry.file_name().to_string_lossy().into_owned();
            (entry.path().is_file() && wildcard_match(name_pattern, &name)).then_some(name)
        })
        .collect();
    names.sort();
    Ok(names.into_iter().map(|n| dir.join(n)).collect())
}

/// One import performed (or skipped as a no-op) by [`run_schedule`].
#[derive(Debug, Clone)]
pub struct ScheduledImport {
    pub tick: u64,
    pub source_id: String,
    pub path: PathBuf,
    pub report: ImportReport,
}

/// Run `ticks` ticks of the schedule against drop folders under `base`.
///
/// Each due source re-scans its pattern and imports every match; already
/// committed digests surface as no-op reports. Snapshot ids are assigned
/// from the manifest table (`max + 1`), so interleaved manual imports and
/// scheduler runs never collide.
pub fn run_schedule(
    store: &mut RawStore,
    config: &ScheduleConfig,
    base: &Path,
    ticks: u64,
) -> Result<Vec<ScheduledImport>, IngestError> {
    // Load table schemas once up front so a bad schema file fails the run
    // before anything is imported.
    let mut schemas: BTreeMap<String, TableSchema> = BTreeMap::new();
    for source in &config.sources {
        if let SourceKind::Table { schema_path, .. } = &source.kind {
            let schema = match schema_path {
                None => student_record_schema(),
                Some(rel) => {
                    let path = base.join(rel);
                    let text =
                        fs::read_to_string(&path).map_err(|e| IngestError::io(&path, e))?;
                    TableSchema::parse(&text)?
                }
            };
            schemas.insert(source.source_id.clone(), schema);
        }
    }

    let mut out = Vec::new();
    for tick in 1..=ticks {
        for source in &config.sources {
            if tick % source.interval != 0 {
                continue;
            }
            for path in expand_pattern(base, &source.pattern)? {
                let snapshot = next_snapshot_id(store, source.kind.manifest_source())?;
                let report = match &source.kind {
                    SourceKind::Table { table, .. } => {
                        let schema = &schemas[&source.source_id];
                        import_table(store, &path, schema, table, snapshot)?
                    }
                    SourceKind::Events => import_events(store, &path, snapshot)?,
                    SourceKind::Feedback { marks_table } => {
                        import_feedback(store, &path, marks_table, snapshot)?
                    }
                };
                out.push(ScheduledImport {
                    tick,
                    source_id: source.source_id.clone(),
                    path,
                    report,
                });
            }
        }
    }
    Ok(out)
}
