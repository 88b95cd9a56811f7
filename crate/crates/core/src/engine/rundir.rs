use std::fs::{self, File, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{
    read_records, render_report_csv, EngineError, Individual, Provenance, RunConfig, RunSummary,
    Termination,
};
use crate::llm_ops::{StatsSnapshot, TranscriptEntry};
use crate::oracle::CallRecord;

pub const CONFIG: &str = "config.toml";
pub const RECORD: &str = "record.jsonl";
pub const TRANSCRIPT: &str = "transcript.jsonl";
pub const SUMMARY: &str = "summary.json";
pub const REPORT: &str = "report.csv";
pub const CHECKPOINT: &str = "checkpoint.json";

/// Engine state at the end of a generation, plus how many record and
/// transcript lines belong to it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub generation: u32,
    pub population: Vec<Individual>,
    pub history: Vec<f64>,
    pub provenance: Provenance,
    pub stalled: u32,
    pub termination: Option<Termination>,
    pub llm_stats: Option<StatsSnapshot>,
    pub records: u64,
    pub transcript: u64,
}

/// Files of one run, written generation by generation.
#[derive(Debug)]
pub struct RunDir {
    path: PathBuf,
    records: u64,
    transcript: u64,
}

fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), EngineError> {
    let tmp = path.with_extension("tmp");
    let mut f = File::create(&tmp).map_err(|e| EngineError::io(&tmp, e))?;
    f.write_all(bytes)
        .and_then(|_| f.sync_all())
        .map_err(|e| EngineError::io(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| EngineError::io(path, e))
}

fn append_lines<T: Serialize>(path: &Path, items: &[T]) -> Result<(), EngineError> {
    if items.is_empty() {
        return Ok(());
    }
    let mut buf = String::new();
    for item in items {
        buf.push_str(&serde_json::to_string(item).expect("serializable"));
        buf.push('\n');
    }
    let mut f = OpenOptions::new()
        .append(true)
        .open(path)
        .map_err(|e| EngineError::io(path, e))?;
    f.write_all(buf.as_bytes())
        .and_then(|_| f.sync_data())
        .map_err(|e| EngineError::io(path, e))
}

/// Cuts a line-oriented file down to its first `lines` lines.
fn truncate_lines(path: &Path, lines: u64) -> Result<(), EngineError> {
    let bytes = fs::read(path).map_err(|e| EngineError::io(path, e))?;
    let mut seen = 0;
    let mut end = 0;
    for (i, b) in bytes.iter().enumerate() {
        if seen == lines {
            break;
        }
        if *b == b'\n' {
            seen += 1;
            end = i + 1;
        }
    }
    if seen < lines {
        return Err(EngineError::Resume(format!(
            "{} has {seen} complete lines, checkpoint expects {lines}",
            path.display()
        )));
    }
    if end < bytes.len() {
        log::warn!("discarding {} bytes of unfinished generation in {}", bytes.len() - end, path.display());
        let f = OpenOptions::new().write(true).open(path).map_err(|e| EngineError::io(path, e))?;
        f.set_len(end as u64).map_err(|e| EngineError::io(path, e))?;
    }
    Ok(())
}

impl RunDir {
    /// Creates the directory layout; refuses a directory that already
    /// holds a run.
    pub fn create(dir: &Path, config: &RunConfig) -> Result<RunDir, EngineError> {
        fs::create_dir_all(dir).map_err(|e| EngineError::io(dir, e))?;
        if dir.join(RECORD).exists() {
            return Err(EngineError::Io {
                path: dir.display().to_string(),
                message: "already contains a run; use resume".into(),
            });
        }
        write_atomic(&dir.join(CONFIG), config.to_toml_string().as_bytes())?;
        for name in [RECORD, TRANSCRIPT] {
            let p = dir.join(name);
            File::create(&p).map_err(|e| EngineError::io(&p, e))?;
        }
        Ok(RunDir {
            path: dir.to_path_buf(),
            records: 0,
            transcript: 0,
        })
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    pub fn records_written(&self) -> u64 {
        self.records
    }

    /// Appends one generation's records and transcript, then commits the
    /// checkpoint that refers to them.
    pub fn append_generation(
        &mut self,
        records: &[CallRecord],
        transcript: &[TranscriptEntry],
        mut checkpoint: Checkpoint,
    ) -> Result<(), EngineError> {
        append_lines(&self.path.join(RECORD), records)?;
        append_lines(&self.path.join(TRANSCRIPT), transcript)?;
        self.records += records.len() as u64;
        self.transcript += transcript.len() as u64;
        checkpoint.records = self.records;
        checkpoint.transcript = self.transcript;
        let json = serde_json::to_vec(&checkpoint).expect("serializable");
        write_atomic(&self.path.join(CHECKPOINT), &json)
    }

    /// Writes the summary and the CSV report.
    pub fn finish(&self, summary: &RunSummary, records: &[CallRecord]) -> Result<(), EngineError> {
        let mut json = serde_json::to_string_pretty(summary).expect("serializable");
        json.push('\n');
        write_atomic(&self.path.join(SUMMARY), json.as_bytes())?;
        write_atomic(
            &self.path.join(REPORT),
            render_report_csv(records, &summary.metrics).as_bytes(),
        )
    }

    pub fn has_summary(&self) -> bool {
        self.path.join(SUMMARY).exists()
    }

    /// Opens a run for resumption, dropping any partial generation.
    pub fn reopen(dir: &Path) -> Result<(RunConfig, RunDir, Checkpoint, Vec<CallRecord>), EngineError> {
        let config_path = dir.join(CONFIG);
        let text = fs::read_to_string(&config_path).map_err(|e| EngineError::io(&config_path, e))?;
        let config = RunConfig::from_toml_str(&text)?;
        let cp_path = dir.join(CHECKPOINT);
        let cp_text = fs::read(&cp_path)
            .map_err(|_| EngineError::Resume("no completed generation to resume from".into()))?;
        let checkpoint: Checkpoint = serde_json::from_slice(&cp_text)
            .map_err(|e| EngineError::Resume(format!("{}: {e}", cp_path.display())))?;
        truncate_lines(&dir.join(RECORD), checkpoint.records)?;
        truncate_lines(&dir.join(TRANSCRIPT), checkpoint.transcript)?;
        let records = read_records(&dir.join(RECORD))?;
        let run_dir = RunDir {
            path: dir.to_path_buf(),
            records: checkpoint.records,
            transcript: checkpoint.transcript,
        };
        Ok((config, run_dir, checkpoint, records))
    }
}
