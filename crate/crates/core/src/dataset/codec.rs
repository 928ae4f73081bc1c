//! Input-string encoding and JSONL persistence.

use std::io::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{Clarification, DatasetError, DatasetSample, ErrorCategory};
use crate::command::OperationKind;

const SELECTION: &str = "selection:";
const QUESTION: &str = "CLARIFICATION QUESTION:";
const ANSWER: &str = "CLARIFICATION:";
const SEP: &str = " | ";

/// Decoded form of a model input line.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DecodedInput {
    pub utterance: String,
    pub selection: Option<String>,
    pub clarification: Option<Clarification>,
}

/// `utt | selection: X`, with an optional clarification turn appended as
/// `| CLARIFICATION QUESTION: q | CLARIFICATION: a`.
pub fn encode_input(
    utterance: &str,
    selection: Option<&str>,
    clarification: Option<&Clarification>,
) -> String {
    let mut out = format!("{utterance}{SEP}{SELECTION}");
    if let Some(s) = selection {
        out.push(' ');
        out.push_str(s);
    }
    if let Some(c) = clarification {
        out.push_str(&format!(
            "{SEP}{QUESTION} {}{SEP}{ANSWER} {}",
            c.question, c.answer
        ));
    }
    out
}

pub fn decode_input(input: &str) -> Result<DecodedInput, String> {
    let parts: Vec<&str> = input.split(" | ").collect();
    let (utterance, selection) = match parts.as_slice() {
        [utt, sel, ..] => (utt.trim(), sel.trim()),
        _ => return Err(format!("missing `{SEP}{SELECTION}` field")),
    };
    if utterance.is_empty() {
        return Err("empty utterance".into());
    }
    let selection = selection
        .strip_prefix(SELECTION)
        .ok_or_else(|| format!("second field must start with `{SELECTION}`"))?
        .trim();
    let clarification = match parts.as_slice() {
        [_, _] => None,
        [_, _, q, a] => {
            let question = q
                .trim()
                .strip_prefix(QUESTION)
                .ok_or_else(|| format!("third field must start with `{QUESTION}`"))?;
            let answer = a
                .trim()
                .strip_prefix(ANSWER)
                .ok_or_else(|| format!("fourth field must start with `{ANSWER}`"))?;
            Some(Clarification {
                question: question.trim().to_string(),
                answer: answer.trim().to_string(),
            })
        }
        _ => return Err(format!("expected 2 or 4 fields, found {}", parts.len())),
    };
    Ok(DecodedInput {
        utterance: utterance.to_string(),
        selection: (!selection.is_empty()).then(|| selection.to_string()),
        clarification,
    })
}

/// One JSONL line.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Record {
    pub input: String,
    pub output: String,
    pub op: String,
    pub error_category: ErrorCategory,
    pub has_selection: bool,
}

impl From<&DatasetSample> for Record {
    fn from(s: &DatasetSample) -> Record {
        Record {
            input: s.input(),
            output: s.expected.clone(),
            op: s.op.keyword().to_lowercase(),
            error_category: s.error_category,
            has_selection: s.selection.is_some(),
        }
    }
}

impl TryFrom<Record> for DatasetSample {
    type Error = String;

    fn try_from(r: Record) -> Result<DatasetSample, String> {
        let decoded = decode_input(&r.input)?;
        let op =
            OperationKind::from_keyword(&r.op).ok_or_else(|| format!("unknown op {:?}", r.op))?;
        if decoded.selection.is_some() != r.has_selection {
            return Err("has_selection disagrees with the input".into());
        }
        if r.output.trim().is_empty() {
            return Err("empty output".into());
        }
        Ok(DatasetSample {
            utterance: decoded.utterance,
            selection: decoded.selection,
            clarification: decoded.clarification,
            expected: r.output,
            op,
            error_category: r.error_category,
        })
    }
}

pub fn to_jsonl(samples: &[DatasetSample]) -> String {
    let mut out = String::new();
    for s in samples {
        out.push_str(&serde_json::to_string(&Record::from(s)).expect("records serialize"));
        out.push('\n');
    }
    out
}

pub fn from_jsonl(text: &str) -> Result<Vec<DatasetSample>, DatasetError> {
    let mut samples = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let malformed = |message: String| DatasetError::Malformed {
            line: i + 1,
            message,
        };
        let record: Record = serde_json::from_str(line).map_err(|e| malformed(e.to_string()))?;
        samples.push(DatasetSample::try_from(record).map_err(malformed)?);
    }
    Ok(samples)
}

/// Writes atomically: a temp file in the target directory is renamed over
/// `path`, so readers never observe a partial file.
pub fn write_jsonl(path: &Path, samples: &[DatasetSample]) -> Result<(), DatasetError> {
    write_atomic(path, to_jsonl(samples).as_bytes())
}

pub fn read_jsonl(path: &Path) -> Result<Vec<DatasetSample>, DatasetError> {
    let text = std::fs::read_to_string(path).map_err(|e| DatasetError::io(path, e))?;
    from_jsonl(&text)
}

pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), DatasetError> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| DatasetError::io(dir, e))?;
    tmp.write_all(bytes)
        .map_err(|e| DatasetError::io(path, e))?;
    tmp.persist(path)
        .map_err(|e| DatasetError::io(path, e.error))?;
    Ok(())
}
