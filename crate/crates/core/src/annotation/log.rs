use std::fs::{File, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::Response;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "snake_case")]
pub enum LogEvent {
    Assign { task_id: String, worker_id: String },
    Response { response: Response },
}

/// One line of the response log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogEntry {
    pub seq: u64,
    /// Wall-clock milliseconds at append; informational only.
    pub logged_at: u64,
    #[serde(flatten)]
    pub event: LogEvent,
}

/// Append-only line-delimited event log. Every append is flushed to stable
/// storage before it returns, and sequence numbers strictly increase.
#[derive(Debug)]
pub struct ResponseLog {
    path: PathBuf,
    file: File,
    next_seq: u64,
}

/// Parses a log. A final line with no terminating newline is a write cut
/// short before acknowledgment; it is ignored and its byte offset returned.
fn parse_log(path: &Path, text: &str) -> Result<(Vec<LogEntry>, Option<usize>)> {
    let mut entries: Vec<LogEntry> = Vec::new();
    let mut offset = 0;
    let mut torn = None;
    for (i, line) in text.split_inclusive('\n').enumerate() {
        let start = offset;
        offset += line.len();
        let terminated = line.ends_with('\n');
        let body = line.trim_end_matches(['\n', '\r']);
        if body.trim().is_empty() {
            continue;
        }
        let after = entries.last().map_or("start of log".to_string(), |e| format!("seq {}", e.seq));
        match serde_json::from_str::<LogEntry>(body) {
            Ok(e) => {
                if let Some(prev) = entries.last() {
                    if e.seq <= prev.seq {
                        return Err(Error::Parse {
                            path: path.to_path_buf(),
                            line: i + 1,
                            message: format!("seq {} does not increase after {after}", e.seq),
                        });
                    }
                }
                entries.push(e);
            }
            Err(_) if !terminated => torn = Some(start),
            Err(err) => {
                return Err(Error::Parse {
                    path: path.to_path_buf(),
                    line: i + 1,
                    message: format!("corrupt record after {after}: {err}"),
                })
            }
        }
    }
    Ok((entries, torn))
}

pub fn read_log(path: &Path) -> Result<Vec<LogEntry>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Ok(parse_log(path, &text)?.0)
}

fn now_ms() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map_or(0, |d| d.as_millis() as u64)
}

impl ResponseLog {
    /// Opens (creating if needed) the log at `path` and returns the entries
    /// already in it. A torn trailing line is truncated away.
    pub fn open(path: &Path) -> Result<(ResponseLog, Vec<LogEntry>)> {
        let text = match std::fs::read_to_string(path) {
            Ok(t) => t,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => String::new(),
            Err(e) => return Err(Error::io(path, e)),
        };
        let (entries, torn) = parse_log(path, &text)?;
        let file = OpenOptions::new()
            .create(true)
            .append(true)
            .open(path)
            .map_err(|e| Error::io(path, e))?;
        if let Some(at) = torn {
            file.set_len(at as u64).map_err(|e| Error::io(path, e))?;
        }
        let next_seq = entries.last().map_or(1, |e| e.seq + 1);
        Ok((
            ResponseLog {
                path: path.to_path_buf(),
                file,
                next_seq,
            },
            entries,
        ))
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    /// Writes and syncs one event; returns it with its sequence number.
    pub fn append(&mut self, event: LogEvent) -> Result<LogEntry> {
        let entry = LogEntry {
            seq: self.next_seq,
            logged_at: now_ms(),
            event,
        };
        let mut line = serde_json::to_string(&entry).map_err(|e| Error::invalid(e.to_string()))?;
        line.push('\n');
        self.file
            .write_all(line.as_bytes())
            .and_then(|_| self.file.sync_data())
            .map_err(|e| Error::io(&self.path, e))?;
        self.next_seq += 1;
        Ok(entry)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::crowd::AnchorResponse;
    use crate::model::LuxuryLevel;

    fn resp(task: &str) -> LogEvent {
        LogEvent::Response {
            response: Response::Anchor(AnchorResponse {
                task_id: task.into(),
                worker_id: "w".into(),
                level: LuxuryLevel::new(3).unwrap(),
                timestamp: 0,
            }),
        }
    }

    #[test]
    fn reopen_continues_sequence() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("log.jsonl");
        let (mut log, old) = ResponseLog::open(&path).unwrap();
        assert!(old.is_empty());
        assert_eq!(log.append(resp("a")).unwrap().seq, 1);
        assert_eq!(log.append(resp("b")).unwrap().seq, 2);
        drop(log);
        let (mut log, old) = ResponseLog::open(&path).unwrap();
        assert_eq!(old.len(), 2);
        assert_eq!(log.append(resp("c")).unwrap().seq, 3);
    }

    #[test]
    fn torn_tail_is_dropped_and_corrupt_line_reported() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("log.jsonl");
        let (mut log, _) = ResponseLog::open(&path).unwrap();
        log.append(resp("a")).unwrap();
        drop(log);
        let mut f = OpenOptions::new().append(true).open(&path).unwrap();
        f.write_all(b"{\"seq\":2,\"logg").unwrap();
        drop(f);
        let (mut log, old) = ResponseLog::open(&path).unwrap();
        assert_eq!(old.len(), 1);
        assert_eq!(log.append(resp("b")).unwrap().seq, 2);
        assert_eq!(read_log(&path).unwrap().len(), 2);

        let mut f = OpenOptions::new().append(true).open(&path).unwrap();
        f.write_all(b"not json\n").unwrap();
        drop(f);
        let err = read_log(&path).unwrap_err().to_string();
        assert!(err.contains("after seq 2"), "{err}");
    }
}
