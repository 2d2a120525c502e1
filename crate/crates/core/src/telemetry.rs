//! Per-session usage counters and transcripts.
//!
//! CSV columns, in order:
//!
//! | column | meaning |
//! |---|---|
//! | `session` | session id |
//! | `utterances_voice`, `utterances_text` | utterances by modality |
//! | `not_understood` | turns parsed as not understood |
//! | `resets` | reset commands and reset messages |
//! | `help_requests` | help commands and help messages |
//! | `goals_completed` | programs finished with "done" |
//! | `goal_elapsed_ms` | time from session start (or the previous finished program) to each "done", summed |
//! | `total_chars`, `total_words` | over all utterances, after normalization |
//! | `mean_chars`, `mean_words` | per utterance, three decimals |
//! | `mean_chars_voice`, `mean_words_voice`, `mean_chars_text`, `mean_words_text` | the same split by modality |
//!
//! Transcripts are JSON lines, one object per line with a `kind` of
//! `utterance`, `exec_input`, `response` or `event`.

use std::fs::{File, OpenOptions};
use std::io::{self, BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicU64, Ordering};
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::dialog::AgentStateKind;
use crate::grammar::{normalize, IntentKind, Modality};
use crate::interpreter::ExecutionEvent;

/// Milliseconds since some fixed origin.
pub trait Clock: Send + Sync {
    fn now_ms(&self) -> u64;
}

#[derive(Debug)]
pub struct SystemClock(Instant);

impl Default for SystemClock {
    fn default() -> Self {
        SystemClock(Instant::now())
    }
}

impl Clock for SystemClock {
    fn now_ms(&self) -> u64 {
        self.0.elapsed().as_millis() as u64
    }
}

/// A clock that only moves when told to; used for replays and tests.
#[derive(Debug, Default)]
pub struct ManualClock(AtomicU64);

impl ManualClock {
    pub fn advance(&self, ms: u64) {
        self.0.fetch_add(ms, Ordering::SeqCst);
    }
}

impl Clock for ManualClock {
    fn now_ms(&self) -> u64 {
        self.0.load(Ordering::SeqCst)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct UtteranceLength {
    pub modality: Modality,
    pub chars: usize,
    pub words: usize,
}

impl UtteranceLength {
    pub fn measure(modality: Modality, text: &str) -> Self {
        let n = normalize(text);
        Self {
            modality,
            chars: n.chars().count(),
            words: n.split_whitespace().count(),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct TelemetryCounters {
    pub utterances_voice: u64,
    pub utterances_text: u64,
    pub not_understood: u64,
    pub resets: u64,
    pub help_requests: u64,
    pub goals_completed: u64,
    pub goal_elapsed_ms: u64,
    pub lengths: Vec<UtteranceLength>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TelemetryEvent {
    Utterance { modality: Modality, text: String },
    NotUnderstood,
    Reset,
    HelpRequest,
    GoalCompleted { elapsed_ms: u64 },
}

impl TelemetryCounters {
    pub fn record(&mut self, event: &TelemetryEvent) {
        match event {
            TelemetryEvent::Utterance { modality, text } => {
                match modality {
                    Modality::Voice => self.utterances_voice += 1,
                    Modality::Text => self.utterances_text += 1,
                }
                self.lengths.push(UtteranceLength::measure(*modality, text));
            }
            TelemetryEvent::NotUnderstood => self.not_understood += 1,
            TelemetryEvent::Reset => self.resets += 1,
            TelemetryEvent::HelpRequest => self.help_requests += 1,
            TelemetryEvent::GoalCompleted { elapsed_ms } => {
                self.goals_completed += 1;
                self.goal_elapsed_ms += elapsed_ms;
            }
        }
    }

    pub fn utterances(&self) -> u64 {
        self.utterances_voice + self.utterances_text
    }

    /// Mean (chars, words) per utterance, optionally for one modality.
    pub fn mean_lengths(&self, modality: Option<Modality>) -> (f64, f64) {
        let picked: Vec<_> = self
            .lengths
            .iter()
            .filter(|l| modality.is_none_or(|m| l.modality == m))
            .collect();
        if picked.is_empty() {
            return (0.0, 0.0);
        }
        let n = picked.len() as f64;
        let chars: usize = picked.iter().map(|l| l.chars).sum();
        let words: usize = picked.iter().map(|l| l.words).sum();
        (chars as f64 / n, words as f64 / n)
    }
}

pub const CSV_COLUMNS: [&str; 16] = [
    "session",
    "utterances_voice",
    "utterances_text",
    "not_understood",
    "resets",
    "help_requests",
    "goals_completed",
    "goal_elapsed_ms",
    "total_chars",
    "total_words",
    "mean_chars",
    "mean_words",
    "mean_chars_voice",
    "mean_words_voice",
    "mean_chars_text",
    "mean_words_text",
];

fn csv_row(session: &str, c: &TelemetryCounters) -> Vec<String> {
    let (mc, mw) = c.mean_lengths(None);
    let (vc, vw) = c.mean_lengths(Some(Modality::Voice));
    let (tc, tw) = c.mean_lengths(Some(Modality::Text));
    let total_chars: usize = c.lengths.iter().map(|l| l.chars).sum();
    let total_words: usize = c.lengths.iter().map(|l| l.words).sum();
    let mut row = vec![
        session.to_string(),
        c.utterances_voice.to_string(),
        c.utterances_text.to_string(),
        c.not_understood.to_string(),
        c.resets.to_string(),
        c.help_requests.to_string(),
        c.goals_completed.to_string(),
        c.goal_elapsed_ms.to_string(),
        total_chars.to_string(),
        total_words.to_string(),
    ];
    row.extend([mc, mw, vc, vw, tc, tw].iter().map(|v| format!("{v:.3}")));
    row
}

fn write_rows<W: Write>(out: W, header: bool, rows: &[(&str, &TelemetryCounters)]) -> io::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    if header {
        w.write_record(CSV_COLUMNS)?;
    }
    for (session, counters) in rows {
        w.write_record(csv_row(session, counters))?;
    }
    w.flush()
}

/// One header row and one data row.
pub fn export_csv(counters: &TelemetryCounters, session: &str) -> Vec<u8> {
    export_csv_rows(&[(session, counters)])
}

pub fn export_csv_rows(rows: &[(&str, &TelemetryCounters)]) -> Vec<u8> {
    let mut out = Vec::new();
    write_rows(&mut out, true, rows).expect("writing to memory cannot fail");
    out
}

/// Appends data rows to a CSV file, writing the header only if the file
/// is new or empty.
pub fn append_csv(path: &Path, rows: &[(&str, &TelemetryCounters)]) -> io::Result<()> {
    let fresh = std::fs::metadata(path).map_or(true, |m| m.len() == 0);
    let file = OpenOptions::new().create(true).append(true).open(path)?;
    write_rows(file, fresh, rows)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TranscriptEntry {
    Utterance {
        seq: u64,
        t_ms: u64,
        modality: Modality,
        text: String,
        intent: IntentKind,
    },
    ExecInput {
        seq: u64,
        t_ms: u64,
        text: String,
    },
    Response {
        seq: u64,
        t_ms: u64,
        text: String,
        state: AgentStateKind,
    },
    Event {
        seq: u64,
        t_ms: u64,
        event: ExecutionEvent,
    },
}

/// Append-only transcript, kept in memory and optionally mirrored to a
/// JSON-lines file that is flushed after every entry.
#[derive(Debug, Default)]
pub struct TranscriptLog {
    entries: Vec<TranscriptEntry>,
    file: Option<(PathBuf, File)>,
}

impl TranscriptLog {
    pub fn in_memory() -> Self {
        Self::default()
    }

    pub fn to_file(path: &Path) -> io::Result<Self> {
        if let Some(parent) = path.parent() {
            std::fs::create_dir_all(parent)?;
        }
        let file = OpenOptions::new().create(true).append(true).open(path)?;
        Ok(Self {
            entries: Vec::new(),
            file: Some((path.to_path_buf(), file)),
        })
    }

    pub fn path(&self) -> Option<&Path> {
        self.file.as_ref().map(|(p, _)| p.as_path())
    }

    pub fn next_seq(&self) -> u64 {
        self.entries.len() as u64
    }

    pub fn append(&mut self, entry: TranscriptEntry) {
        if let Some((path, file)) = &mut self.file {
            let mut line = serde_json::to_vec(&entry).expect("entries serialize");
            line.push(b'\n');
            if let Err(err) = file.write_all(&line).and_then(|()| file.flush()) {
                log::warn!("transcript {}: {err}", path.display());
            }
        }
        self.entries.push(entry);
    }

    pub fn entries(&self) -> &[TranscriptEntry] {
        &self.entries
    }
}

pub fn read_transcript(path: &Path) -> io::Result<Vec<TranscriptEntry>> {
    BufReader::new(File::open(path)?)
        .lines()
        .filter(|l| l.as_ref().map_or(true, |l| !l.trim().is_empty()))
        .map(|line| serde_json::from_str(&line?).map_err(io::Error::other))
        .collect()
}

/// Mean (chars, words) over the utterance entries of a transcript.
pub fn transcript_means(entries: &[TranscriptEntry]) -> (f64, f64) {
    let mut counters = TelemetryCounters::default();
    for entry in entries {
        if let TranscriptEntry::Utterance { modality, text, .. } = entry {
            counters.record(&TelemetryEvent::Utterance {
                modality: *modality,
                text: text.clone(),
            });
        }
    }
    counters.mean_lengths(None)
}
