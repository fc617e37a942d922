//! Append-only JSONL log of reader verdicts.

use std::fs::OpenOptions;
use std::io::{Read, Seek, SeekFrom, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeedbackRecord {
    /// RFC 3339, UTC, assigned by the server.
    pub timestamp: String,
    pub url: Option<String>,
    /// SHA-256 of the headline string, lowercase hex.
    pub headline_hash: String,
    pub label: String,
    pub score_shown: f64,
    pub model_version: String,
}

pub const FEEDBACK_LABELS: [&str; 2] = ["congruent", "incongruent"];

/// A record as submitted, before the server stamps it.
#[derive(Debug, Clone, PartialEq)]
pub struct FeedbackSubmission {
    pub url: Option<String>,
    pub headline_hash: String,
    pub label: String,
    pub score_shown: f64,
    pub model_version: String,
}

impl FeedbackSubmission {
    /// Validates a request body. Errors are client mistakes.
    pub fn parse(body: &[u8]) -> Result<Self, String> {
        let value: Value = serde_json::from_slice(body).map_err(|e| format!("malformed JSON: {e}"))?;
        let Value::Object(obj) = value else {
            return Err("expected a JSON object".into());
        };
        const KEYS: [&str; 5] = ["url", "headline_hash", "label", "score_shown", "model_version"];
        if let Some(k) = obj.keys().find(|k| !KEYS.contains(&k.as_str())) {
            return Err(if k == "timestamp" {
                "timestamp is assigned by the server".into()
            } else {
                format!("unknown field {k:?}")
            });
        }
        let string = |obj: &Map<String, Value>, k: &str| -> Result<String, String> {
            match obj.get(k) {
                Some(Value::String(s)) => Ok(s.clone()),
                Some(_) => Err(format!("{k} must be a string")),
                None => Err(format!("missing field {k:?}")),
            }
        };
        let url = match obj.get("url") {
            None | Some(Value::Null) => None,
            Some(Value::String(s)) => Some(s.clone()),
            Some(_) => return Err("url must be a string".into()),
        };
        let headline_hash = string(&obj, "headline_hash")?.to_ascii_lowercase();
        if headline_hash.len() != 64 || !headline_hash.bytes().all(|b| b.is_ascii_hexdigit()) {
            return Err("headline_hash must be 64 hex characters".into());
        }
        let label = string(&obj, "label")?;
        if !FEEDBACK_LABELS.contains(&label.as_str()) {
            return Err(format!("label must be congruent or incongruent, got {label:?}"));
        }
        let score_shown = obj
            .get("score_shown")
            .ok_or("missing field \"score_shown\"")?
            .as_f64()
            .filter(|s| (0.0..=1.0).contains(s))
            .ok_or("score_shown must be a number in [0, 1]")?;
        let model_version = string(&obj, "model_version")?;
        Ok(FeedbackSubmission {
            url,
            headline_hash,
            label,
            score_shown,
            model_version,
        })
    }

    pub fn stamp(self, timestamp: String) -> FeedbackRecord {
        FeedbackRecord {
            timestamp,
            url: self.url,
            headline_hash: self.headline_hash,
            label: self.label,
            score_shown: self.score_shown,
            model_version: self.model_version,
        }
    }
}

/// Single writer over the log file. Ids are 1-based line numbers.
#[derive(Debug)]
pub struct FeedbackLog {
    path: PathBuf,
    lines: u64,
    /// The existing file lacks a final newline.
    needs_newline: bool,
}

impl FeedbackLog {
    /// Opens the log for appending, creating it if needed, and counts its lines.
    pub fn open(path: impl AsRef<Path>) -> std::io::Result<Self> {
        let path = path.as_ref().to_path_buf();
        let mut f = OpenOptions::new().create(true).read(true).append(true).open(&path)?;
        let mut bytes = Vec::new();
        f.read_to_end(&mut bytes)?;
        let newlines = bytes.iter().filter(|&&b| b == b'\n').count() as u64;
        let partial = bytes.last().is_some_and(|&b| b != b'\n');
        let (lines, needs_newline) = (newlines + partial as u64, partial);
        Ok(FeedbackLog {
            path,
            lines,
            needs_newline,
        })
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    pub fn len(&self) -> u64 {
        self.lines
    }

    pub fn is_empty(&self) -> bool {
        self.lines == 0
    }

    /// Appends one line and syncs it to disk; returns its id.
    pub fn append(&mut self, record: &FeedbackRecord) -> std::io::Result<u64> {
        let mut line = serde_json::to_string(record).map_err(std::io::Error::other)?;
        line.push('\n');
        if self.needs_newline {
            line.insert(0, '\n');
        }
        let mut f = OpenOptions::new().create(true).append(true).open(&self.path)?;
        f.seek(SeekFrom::End(0))?;
        f.write_all(line.as_bytes())?;
        f.sync_data()?;
        self.needs_newline = false;
        self.lines += 1;
        Ok(self.lines)
    }
}

/// Parses every line of a log.
pub fn read_feedback_log(path: impl AsRef<Path>) -> std::io::Result<Vec<FeedbackRecord>> {
    let text = std::fs::read_to_string(path)?;
    text.lines()
        .map(|l| serde_json::from_str(l).map_err(std::io::Error::other))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn valid() -> Value {
        serde_json::json!({
            "url": "https://example.org/a",
            "headline_hash": "AB".repeat(32),
            "label": "incongruent",
            "score_shown": 0.87,
            "model_version": "v1",
        })
    }

    #[test]
    fn parse_accepts_and_normalizes() {
        let s = FeedbackSubmission::parse(valid().to_string().as_bytes()).unwrap();
        assert_eq!(s.headline_hash, "ab".repeat(32));
        let mut v = valid();
        v["url"] = Value::Null;
        assert_eq!(FeedbackSubmission::parse(v.to_string().as_bytes()).unwrap().url, None);
    }

    #[test]
    fn parse_rejects() {
        let cases: Vec<(&str, Value)> = vec![
            ("label", Value::from("maybe")),
            ("headline_hash", Value::from("abc")),
            ("headline_hash", Value::from("zz".repeat(32))),
            ("score_shown", Value::from(1.5)),
            ("score_shown", Value::from("high")),
            ("model_version", Value::from(3)),
            ("timestamp", Value::from("2020-01-01T00:00:00Z")),
            ("extra", Value::from(1)),
        ];
        for (k, val) in cases {
            let mut v = valid();
            v[k] = val;
            assert!(FeedbackSubmission::parse(v.to_string().as_bytes()).is_err(), "{k}");
        }
        let mut v = valid();
        v.as_object_mut().unwrap().remove("label");
        assert!(FeedbackSubmission::parse(v.to_string().as_bytes()).is_err());
        assert!(FeedbackSubmission::parse(b"{not json").is_err());
        assert!(FeedbackSubmission::parse(b"[1]").is_err());
    }

    #[test]
    fn append_round_trips_and_continues_ids() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("fb.jsonl");
        let mut log = FeedbackLog::open(&path).unwrap();
        assert!(log.is_empty());
        let rec = FeedbackSubmission::parse(valid().to_string().as_bytes())
            .unwrap()
            .stamp("2026-01-02T03:04:05Z".into());
        assert_eq!(log.append(&rec).unwrap(), 1);
        assert_eq!(log.append(&rec).unwrap(), 2);
        // a torn last line is completed by a newline, never rewritten
        std::fs::OpenOptions::new().append(true).open(&path).unwrap().write_all(b"{\"torn\"").unwrap();
        let mut log = FeedbackLog::open(&path).unwrap();
        assert_eq!(log.len(), 3);
        assert_eq!(log.append(&rec).unwrap(), 4);
        let text = std::fs::read_to_string(&path).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 4);
        assert_eq!(lines[2], "{\"torn\"");
        let back: FeedbackRecord = serde_json::from_str(lines[3]).unwrap();
        assert_eq!(back, rec);
    }
}
