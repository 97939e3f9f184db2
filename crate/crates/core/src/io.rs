//! Line-oriented file formats.
//!
//! * Observation streams: one JSON object per line,
//!   `{"frame": 0, "probs": [..]}`, probabilities in alphabet order. A
//!   column-text form is accepted too: a header row of class names
//!   (optionally led by a `frame` column), then one row of numbers per frame,
//!   separated by commas or whitespace. Header columns may come in any order;
//!   they are mapped onto the alphabet. Without a `frame` column, frames are
//!   numbered from 0.
//! * Label files (ground truth, `smooth` output): `{"frame": 0, "label": "mixing"}`.
//! * Traces: [`TraceRecord`] per line.
//!
//! Blank lines and lines starting with `#` are ignored everywhere.

use std::io::BufRead;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::plan_library::ActivityAlphabet;
use crate::recognizer::TraceRecord;
use crate::smoothing::FrameObservation;

#[derive(Debug, Error)]
pub enum FormatError {
    #[error("line {line}: {message}")]
    Line { line: usize, message: String },
    #[error("read error: {0}")]
    Io(#[from] std::io::Error),
}

fn at(line: usize, message: impl Into<String>) -> FormatError {
    FormatError::Line {
        line,
        message: message.into(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct ObservationLine {
    frame: u64,
    probs: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LabelRecord {
    pub frame: u64,
    pub label: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SegmentRecord {
    pub label: String,
    pub start_frame: u64,
    pub end_frame: u64,
}

#[derive(Debug, Clone)]
enum Layout {
    Json,
    Columns {
        frame_column: Option<usize>,
        /// Alphabet index for each probability column.
        targets: Vec<usize>,
        next_frame: u64,
    },
}

/// Incremental observation-stream reader; feed it one line at a time.
#[derive(Debug, Clone)]
pub struct StreamParser<'a> {
    alphabet: &'a ActivityAlphabet,
    layout: Option<Layout>,
    line: usize,
}

fn split_columns(line: &str) -> Vec<&str> {
    line.split(|c: char| c == ',' || c.is_whitespace())
        .filter(|s| !s.is_empty())
        .collect()
}

impl<'a> StreamParser<'a> {
    pub fn new(alphabet: &'a ActivityAlphabet) -> Self {
        Self {
            alphabet,
            layout: None,
            line: 0,
        }
    }

    /// Parses the next line; `Ok(None)` for blank, comment and header lines.
    pub fn push_line(&mut self, raw: &str) -> Result<Option<FrameObservation>, FormatError> {
        self.line += 1;
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            return Ok(None);
        }
        match &mut self.layout {
            None if line.starts_with('{') => {
                self.layout = Some(Layout::Json);
                self.parse_json(line).map(Some)
            }
            None => {
                self.layout = Some(self.parse_header(line)?);
                Ok(None)
            }
            Some(Layout::Json) => self.parse_json(line).map(Some),
            Some(Layout::Columns {
                frame_column,
                targets,
                next_frame,
            }) => {
                let cells = split_columns(line);
                let expected = targets.len() + usize::from(frame_column.is_some());
                if cells.len() != expected {
                    return Err(at(
                        self.line,
                        format!("expected {expected} columns, found {}", cells.len()),
                    ));
                }
                let mut probs = vec![0.0; self.alphabet.len()];
                let mut frame = *next_frame;
                let mut targets_iter = targets.iter();
                for (i, cell) in cells.iter().enumerate() {
                    if Some(i) == *frame_column {
                        frame = cell
                            .parse()
                            .map_err(|e| at(self.line, format!("bad frame id {cell:?}: {e}")))?;
                    } else {
                        let target = *targets_iter.next().expect("column count checked");
                        probs[target] = cell
                            .parse()
                            .map_err(|e| at(self.line, format!("bad probability {cell:?}: {e}")))?;
                    }
                }
                *next_frame = frame + 1;
                Ok(Some(FrameObservation::new(frame, probs)))
            }
        }
    }

    fn parse_json(&self, line: &str) -> Result<FrameObservation, FormatError> {
        let rec: ObservationLine =
            serde_json::from_str(line).map_err(|e| at(self.line, e.to_string()))?;
        Ok(FrameObservation::new(rec.frame, rec.probs))
    }

    fn parse_header(&self, line: &str) -> Result<Layout, FormatError> {
        let cells = split_columns(line);
        let mut frame_column = None;
        let mut targets = Vec::new();
        for (i, name) in cells.iter().enumerate() {
            if *name == "frame" && self.alphabet.lookup("frame").is_none() {
                if frame_column.replace(i).is_some() {
                    return Err(at(self.line, "duplicate frame column"));
                }
                continue;
            }
            let class = self
                .alphabet
                .lookup(name)
                .ok_or_else(|| at(self.line, format!("unknown class {name:?} in header")))?;
            if targets.contains(&class.0) {
                return Err(at(self.line, format!("class {name:?} repeated in header")));
            }
            targets.push(class.0);
        }
        if targets.len() != self.alphabet.len() {
            return Err(at(
                self.line,
                format!(
                    "header names {} of {} classes",
                    targets.len(),
                    self.alphabet.len()
                ),
            ));
        }
        Ok(Layout::Columns {
            frame_column,
            targets,
            next_frame: 0,
        })
    }
}

pub fn read_stream<R: BufRead>(
    reader: R,
    alphabet: &ActivityAlphabet,
) -> Result<Vec<FrameObservation>, FormatError> {
    let mut parser = StreamParser::new(alphabet);
    let mut out = Vec::new();
    for line in reader.lines() {
        if let Some(obs) = parser.push_line(&line?)? {
            out.push(obs);
        }
    }
    Ok(out)
}

pub fn observation_line(obs: &FrameObservation) -> String {
    serde_json::to_string(&ObservationLine {
        frame: obs.frame_id,
        probs: obs.probs.clone(),
    })
    .expect("observation serializes")
}

/// Reads a file of one JSON record per line.
pub fn read_records<T: DeserializeOwned, R: BufRead>(reader: R) -> Result<Vec<T>, FormatError> {
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        out.push(serde_json::from_str(trimmed).map_err(|e| at(i + 1, e.to_string()))?);
    }
    Ok(out)
}

pub fn read_trace<R: BufRead>(reader: R) -> Result<Vec<TraceRecord>, FormatError> {
    read_records(reader)
}

pub fn read_labels<R: BufRead>(reader: R) -> Result<Vec<LabelRecord>, FormatError> {
    read_records(reader)
}

pub fn to_line<T: Serialize>(value: &T) -> String {
    serde_json::to_string(value).expect("record serializes")
}
