//! JSON Lines results log.
//!
//! Line 1 is a header `{"schema":"embedprobe/results","version":1}`; every
//! further line is one [`ExperimentRecord`]. Stage timings go to a sidecar
//! `<log>.timing.jsonl` so the log itself is a pure function of the seed.

use std::fs::{self, File};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{ExperimentRecord, StageTimes};
use crate::error::{Error, Result};

pub const LOG_SCHEMA: &str = "embedprobe/results";
pub const LOG_VERSION: u32 = 1;

#[derive(Debug, Serialize, Deserialize)]
struct Header {
    schema: String,
    version: u32,
}

#[derive(Debug, Serialize, Deserialize)]
struct TimingLine {
    experiment_index: u64,
    wall_time_ms: StageTimes,
}

pub fn timing_path(log: &Path) -> PathBuf {
    let mut name = log.file_name().map(|n| n.to_os_string()).unwrap_or_default();
    name.push(".timing.jsonl");
    log.with_file_name(name)
}

fn header_line() -> String {
    serde_json::to_string(&Header { schema: LOG_SCHEMA.into(), version: LOG_VERSION }).expect("header serializes")
}

/// Append-only writer for a results log and its timing sidecar.
pub struct LogWriter {
    log: BufWriter<File>,
    timing: BufWriter<File>,
}

impl LogWriter {
    /// Create (truncate) the log and sidecar and write the header.
    pub fn create(path: &Path) -> Result<Self> {
        let log = File::create(path).map_err(|e| Error::file(path, e))?;
        let tpath = timing_path(path);
        let timing = File::create(&tpath).map_err(|e| Error::file(&tpath, e))?;
        let mut w = LogWriter { log: BufWriter::new(log), timing: BufWriter::new(timing) };
        writeln!(w.log, "{}", header_line())?;
        Ok(w)
    }

    pub fn append(&mut self, record: &ExperimentRecord) -> Result<()> {
        serde_json::to_writer(&mut self.log, record)?;
        self.log.write_all(b"\n")?;
        serde_json::to_writer(
            &mut self.timing,
            &TimingLine { experiment_index: record.experiment_index, wall_time_ms: record.wall_time_ms },
        )?;
        self.timing.write_all(b"\n")?;
        Ok(())
    }

    pub fn finish(mut self) -> Result<()> {
        self.log.flush()?;
        self.timing.flush()?;
        Ok(())
    }
}

/// Write `records` as a complete log in the order given.
pub fn write_log(path: &Path, records: &[ExperimentRecord]) -> Result<()> {
    let mut w = LogWriter::create(path)?;
    for r in records {
        w.append(r)?;
    }
    w.finish()
}

fn parse_lines<T: for<'de> Deserialize<'de>>(path: &Path, skip_header: bool) -> Result<Vec<(usize, T)>> {
    let file = File::open(path).map_err(|e| Error::file(path, e))?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line?;
        let lineno = i + 1;
        if line.trim().is_empty() {
            continue;
        }
        if skip_header && lineno == 1 {
            let header: Header = serde_json::from_str(&line)
                .map_err(|e| Error::Parse { row: lineno, message: format!("bad header: {e}") })?;
            if header.schema != LOG_SCHEMA || header.version != LOG_VERSION {
                return Err(Error::Parse {
                    row: lineno,
                    message: format!("unsupported log {} v{}", header.schema, header.version),
                });
            }
            continue;
        }
        let value = serde_json::from_str(&line).map_err(|e| Error::Parse { row: lineno, message: e.to_string() })?;
        out.push((lineno, value));
    }
    Ok(out)
}

/// Load every record; timings are attached from the sidecar when present.
pub fn read_log(path: &Path) -> Result<Vec<ExperimentRecord>> {
    let mut records: Vec<ExperimentRecord> = parse_lines(path, true)?.into_iter().map(|(_, r)| r).collect();
    let tpath = timing_path(path);
    if tpath.exists() {
        let timings: Vec<(usize, TimingLine)> = parse_lines(&tpath, false)?;
        let by_index: std::collections::HashMap<u64, StageTimes> =
            timings.into_iter().map(|(_, t)| (t.experiment_index, t.wall_time_ms)).collect();
        for r in &mut records {
            if let Some(t) = by_index.get(&r.experiment_index) {
                r.wall_time_ms = *t;
            }
        }
    }
    Ok(records)
}

/// Rewrite a log (and its sidecar) sorted by experiment index.
pub fn canonicalize_log(path: &Path) -> Result<()> {
    let mut records = read_log(path)?;
    records.sort_by_key(|r| r.experiment_index);
    let tmp = path.with_extension("jsonl.tmp");
    write_log(&tmp, &records)?;
    fs::rename(&tmp, path).map_err(|e| Error::file(path, e))?;
    fs::rename(timing_path(&tmp), timing_path(path)).map_err(|e| Error::file(path, e))?;
    Ok(())
}
