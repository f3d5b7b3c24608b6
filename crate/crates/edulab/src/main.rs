//! Command-line front end: ingest files into the raw store, inspect frame
//! files, score feedback, and run the synthetic model comparison.

use std::error::Error;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use edulab::catalog::{feedback_schema, student_record_schema, FeedbackDocument, TableSchema};
use edulab::ingest::{
    import_events, import_feedback, import_table, run_schedule, ImportReport, ScheduleConfig,
};
use edulab::sentiment::{score_document, Lexicon, SentimentBand};
use edulab::storage::{inspect_frame, write_frame, Column, ColumnTable, RawStore};
use edulab::experiment::{
    generate_cohort, run_experiment, write_cohort, ExperimentConfig, GeneratorConfig,
};

#[derive(Parser)]
#[command(name = "edulab", version, about = "student-performance lab pipeline")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Import delimited files, event logs, and feedback into the raw store.
    #[command(subcommand)]
    Ingest(IngestCommand),
    /// Inspect storage artifacts.
    #[command(subcommand)]
    Store(StoreCommand),
    /// Score free-text feedback against a lexicon.
    #[command(subcommand)]
    Sentiment(SentimentCommand),
    /// Generate synthetic cohorts and run the model comparison.
    #[command(subcommand)]
    Lab(LabCommand),
    /// Compare predictions against ground truth.
    Evaluate {
        /// Predictions file, one value per line.
        #[arg(long)]
        pred: PathBuf,
        /// Ground-truth file, one value per line.
        #[arg(long)]
        truth: PathBuf,
        /// Task: regression or classification.
        #[arg(long, default_value = "regression")]
        task: String,
        /// Emit machine-readable output instead of the text table.
        #[arg(long)]
        json: bool,
    },
}

#[derive(Args)]
struct StoreDir {
    /// Raw store directory (created if missing).
    #[arg(long, default_value = "store")]
    store: PathBuf,
}

#[derive(Subcommand)]
enum IngestCommand {
    /// Import one delimited table export as a snapshot.
    Table {
        /// Delimited file to import.
        #[arg(long)]
        path: PathBuf,
        /// Snapshot id; re-importing the same bytes under it is a no-op.
        #[arg(long)]
        snapshot: u64,
        #[command(flatten)]
        store: StoreDir,
        /// Destination table.
        #[arg(long, default_value = "marks")]
        table: String,
        /// Schema file; defaults to the built-in student-record schema.
        #[arg(long)]
        schema: Option<PathBuf>,
    },
    /// Import an app-event log (one object per line).
    Events {
        #[arg(long)]
        path: PathBuf,
        #[arg(long)]
        snapshot: u64,
        #[command(flatten)]
        store: StoreDir,
    },
    /// Import a feedback export, flagging rows without a marks record.
    Feedback {
        #[arg(long)]
        path: PathBuf,
        #[arg(long)]
        snapshot: u64,
        #[command(flatten)]
        store: StoreDir,
        /// Marks table used for the orphan check.
        #[arg(long, default_value = "marks")]
        marks_table: String,
    },
    /// Run a drop-folder schedule for a number of ticks.
    Schedule {
        /// Schedule config (INI-style sections, one per source).
        #[arg(long)]
        config: PathBuf,
        #[command(flatten)]
        store: StoreDir,
        /// Directory the config's file patterns resolve against.
        #[arg(long, default_value = ".")]
        base: PathBuf,
        /// Virtual-clock ticks to run.
        #[arg(long, default_value_t = 1)]
        ticks: u64,
    },
}

#[derive(Subcommand)]
enum StoreCommand {
    /// Dump a frame file's footer metadata.
    Inspect {
        /// Frame file to inspect.
        file: PathBuf,
    },
}

#[derive(Subcommand)]
enum SentimentCommand {
    /// Score a feedback export and write the results as a frame file.
    Score {
        /// Feedback file (student_id,q1,q2,q3 with header).
        #[arg(long)]
        feedback: PathBuf,
        /// Lexicon file; defaults to the built-in lexicon.
        #[arg(long)]
        lexicon: Option<PathBuf>,
        /// Output frame path.
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Subcommand)]
enum LabCommand {
    /// Write one synthetic cohort (marks, feedback, ground truth).
    Gen {
        /// Experiment config; defaults used when omitted.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Output directory.
        #[arg(long, default_value = "cohort")]
        out: PathBuf,
    },
    /// Run the paired model comparison over several seeds.
    Run {
        /// Experiment config; defaults used when omitted.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Models to compare; the paired protocol runs all of 1,2,3.
        #[arg(long, default_value = "1,2,3")]
        models: String,
        /// Join policy: respondents_only or impute_neutral.
        #[arg(long)]
        join: Option<String>,
        /// Number of seeds.
        #[arg(long)]
        seeds: Option<u64>,
        /// Output directory for per-seed artifacts and the report.
        #[arg(long, default_value = "report")]
        out: PathBuf,
        /// Dataflow partitions per stage.
        #[arg(long)]
        partitions: Option<usize>,
        /// Worker threads per stage.
        #[arg(long)]
        workers: Option<usize>,
    },
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprint!("error: {err}");
            let mut cause = err.source();
            while let Some(c) = cause {
                eprint!(": {c}");
                cause = c.source();
            }
            eprintln!();
            ExitCode::FAILURE
        }
    }
}

fn run(cli: Cli) -> Result<(), Box<dyn Error>> {
    match cli.command {
        Command::Ingest(cmd) => ingest(cmd),
        Command::Store(StoreCommand::Inspect { file }) => inspect(&file),
        Command::Sentiment(SentimentCommand::Score { feedback, lexicon, out }) => {
            score(&feedback, lexicon.as_deref(), &out)
        }
        Command::Lab(cmd) => lab(cmd),
        Command::Evaluate { pred, truth, task, json } => evaluate(&pred, &truth, &task, json),
    }
}

fn read_lines<T: std::str::FromStr>(path: &Path, what: &str) -> Result<Vec<T>, Box<dyn Error>> {
    let text = std::fs::read_to_string(path)?;
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let value = line.parse().map_err(|_| {
            format!("{} line {}: expected {what}, got {line:?}", path.display(), i + 1)
        })?;
        out.push(value);
    }
    Ok(out)
}

fn evaluate(pred: &Path, truth: &Path, task: &str, json: bool) -> Result<(), Box<dyn Error>> {
    match task {
        "regression" => {
            let truth: Vec<f64> = read_lines(truth, "a number")?;
            let pred: Vec<f64> = read_lines(pred, "a number")?;
            let report = edulab::evalx::regression_metrics(&truth, &pred)?;
            if json {
                println!("{}", serde_json::to_string_pretty(&report)?);
            } else {
                print!("{}", report.render());
            }
        }
        "classification" => {
            let truth: Vec<u8> = read_lines(truth, "a 0/1 label")?;
            let pred: Vec<u8> = read_lines(pred, "a 0/1 label")?;
            let report = edulab::evalx::classification_metrics(&truth, &pred)?;
            if json {
                println!("{}", serde_json::to_string_pretty(&report)?);
            } else {
                print!("{}", report.render());
            }
        }
        other => return Err(format!("unknown task {other:?} (want regression or classification)").into()),
    }
    Ok(())
}

fn print_report(report: &ImportReport) {
    let m = &report.manifest;
    if report.no_op {
        println!(
            "{}/{}: already ingested (digest {:016x}); nothing written",
            m.source_id, m.snapshot_id, m.content_digest
        );
        return;
    }
    println!(
        "{}/{}: {} rows ({} quarantined, {} duplicates skipped), digest {:016x}",
        m.source_id, m.snapshot_id, m.row_count, report.quarantined, report.deduplicated,
        m.content_digest
    );
    for warning in &report.warnings {
        eprintln!("warning: {warning}");
    }
}

fn ingest(cmd: IngestCommand) -> Result<(), Box<dyn Error>> {
    match cmd {
        IngestCommand::Table { path, snapshot, store, table, schema } => {
            let schema = match schema {
                None => student_record_schema(),
                Some(p) => TableSchema::parse(&std::fs::read_to_string(&p)?)?,
            };
            let mut store = RawStore::open(&store.store)?;
            let report = import_table(&mut store, &path, &schema, &table, snapshot)?;
            print_report(&report);
        }
        IngestCommand::Events { path, snapshot, store } => {
            let mut store = RawStore::open(&store.store)?;
            let report = import_events(&mut store, &path, snapshot)?;
            print_report(&report);
        }
        IngestCommand::Feedback { path, snapshot, store, marks_table } => {
            let mut store = RawStore::open(&store.store)?;
            let report = import_feedback(&mut store, &path, &marks_table, snapshot)?;
            print_report(&report);
        }
        IngestCommand::Schedule { config, store, base, ticks } => {
            let config = ScheduleConfig::load(&config)?;
            let mut store = RawStore::open(&store.store)?;
            let runs = run_schedule(&mut store, &config, &base, ticks)?;
            if runs.is_empty() {
                println!("no sources matched in {ticks} tick(s)");
            }
            for run in &runs {
                print!("tick {} {} [{}]: ", run.tick, run.source_id, run.path.display());
                print_report(&run.report);
            }
        }
    }
    Ok(())
}

fn inspect(file: &Path) -> Result<(), Box<dyn Error>> {
    let info = inspect_frame(file)?;
    println!("frame: {}", file.display());
    println!("rows: {}", info.total_rows);
    println!("checksum: {:016x}", info.file_checksum);
    println!("columns:");
    let width = info.columns.iter().map(|(n, ..)| n.len()).max().unwrap_or(0);
    for (name, kind, offset, length) in &info.columns {
        println!("  {name:width$}  {kind:6}  offset {offset:>8}  bytes {length:>8}");
    }
    Ok(())
}

fn score(feedback: &Path, lexicon: Option<&Path>, out: &Path) -> Result<(), Box<dyn Error>> {
    let lexicon = match lexicon {
        None => Lexicon::fixture(),
        Some(p) => Lexicon::load(p)?,
    };

    let mut reader = csv::Reader::from_path(feedback)?;
    let schema = feedback_schema();
    let header: Vec<String> = reader.headers()?.iter().map(str::to_string).collect();
    let mut positions = Vec::with_capacity(schema.fields.len());
    for field in &schema.fields {
        let at = header.iter().position(|h| h == &field.name).ok_or_else(|| {
            format!("{}: header is missing column {:?}", feedback.display(), field.name)
        })?;
        positions.push(at);
    }

    let mut ids = Vec::new();
    let mut scores = Vec::new();
    let mut bands = Vec::new();
    let mut counts = [0usize; 3];
    for (line, record) in reader.records().enumerate() {
        let record = record?;
        let cell = |i: usize| record.get(positions[i]).unwrap_or("").to_string();
        let student_id = cell(0);
        if student_id.is_empty() {
            return Err(format!("{}: row {} has an empty student_id", feedback.display(), line + 1).into());
        }
        let doc = FeedbackDocument::new(student_id.clone(), [cell(1), cell(2), cell(3)], 0);
        let result = score_document(&doc, &lexicon);
        counts[match result.category {
            SentimentBand::Negative => 0,
            SentimentBand::Neutral => 1,
            SentimentBand::Positive => 2,
        }] += 1;
        ids.push(student_id);
        scores.push(result.average);
        bands.push(result.category.as_str().to_string());
    }

    let table = ColumnTable::new(vec![
        Column::text("student_id", ids),
        Column::floats("sentiment_score", scores),
        Column::text("sentiment", bands),
    ])?;
    write_frame(&table, out)?;
    println!(
        "scored {} documents: {} negative, {} neutral, {} positive",
        counts.iter().sum::<usize>(),
        counts[0], counts[1], counts[2]
    );
    println!("wrote {}", out.display());
    Ok(())
}

fn load_experiment_config(path: Option<&Path>) -> Result<ExperimentConfig, Box<dyn Error>> {
    match path {
        None => Ok(ExperimentConfig::default()),
        Some(p) => Ok(ExperimentConfig::parse(&std::fs::read_to_string(p)?)?),
    }
}

fn lab(cmd: LabCommand) -> Result<(), Box<dyn Error>> {
    match cmd {
        LabCommand::Gen { config, out } => {
            let generator: GeneratorConfig = load_experiment_config(config.as_deref())?.generator;
            generator.validate()?;
            let cohort = generate_cohort(&generator)?;
            let files = write_cohort(&cohort, &out)?;
            let respondents = cohort.truth.iter().filter(|t| t.respondent).count();
            println!(
                "wrote {} students ({} respondents) under {}",
                cohort.records.len(), respondents, out.display()
            );
            for path in [&files.marks, &files.feedback, &files.truth] {
                println!("  {}", path.display());
            }
        }
        LabCommand::Run { config, models, join, seeds, out, partitions, workers } => {
            let mut selected: Vec<u8> = models
                .split(',')
                .map(|m| m.trim().parse::<u8>().map_err(|_| format!("bad model id {m:?}")))
                .collect::<Result<_, _>>()?;
            selected.sort_unstable();
            selected.dedup();
            if selected != [1, 2, 3] {
                return Err("the comparison is paired (models 1 and 3 share one split, \
                            model 2 feeds model 3); run with --models 1,2,3"
                    .into());
            }

            let mut config = load_experiment_config(config.as_deref())?;
            if let Some(join) = join {
                config.join = join.parse().map_err(|m: String| m)?;
            }
            if let Some(seeds) = seeds {
                config.seeds = seeds;
            }
            if let Some(partitions) = partitions {
                config.partitions = partitions;
            }
            if let Some(workers) = workers {
                config.workers = workers;
            }

            std::fs::create_dir_all(&out)?;
            let report = run_experiment(&config, &out)?;
            print!("{}", report.render());
            std::fs::write(out.join("report.txt"), report.render())?;
            std::fs::write(out.join("report.json"), report.to_json())?;
            println!("wrote {} and report.json", out.join("report.txt").display());
        }
    }
    Ok(())
}
