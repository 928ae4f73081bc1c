//! A desk-scale stand-in for a legacy, fixed-syntax voice interface.
//!
//! The simulator owns a word buffer and accepts only canonical command
//! strings. Anything else is rejected without side effects. Ambiguous
//! targets are numbered from 1, left to right, and resolved by `CHOOSE n`.
//! A selection lives only until the next command: deictic `THAT` consumes
//! it, and commands naming an explicit phrase ignore it.

use std::collections::BTreeMap;
use std::fmt;
use std::num::NonZeroU32;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::command::{parse_canonical, ArgValue, Command, ContextKeyword, OperationKind, Relative};

/// Half-open range of word indices.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct WordRange {
    pub start: usize,
    pub end: usize,
}

impl WordRange {
    pub fn new(start: usize, end: usize) -> Self {
        debug_assert!(start <= end);
        WordRange { start, end }
    }

    pub fn len(&self) -> usize {
        self.end - self.start
    }

    pub fn is_empty(&self) -> bool {
        self.start == self.end
    }
}

impl fmt::Display for WordRange {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}..{}", self.start, self.end)
    }
}

impl std::str::FromStr for WordRange {
    type Err = SnapshotError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || SnapshotError::BadRange(s.to_string());
        let (a, b) = s.split_once("..").ok_or_else(bad)?;
        let start: usize = a.trim().parse().map_err(|_| bad())?;
        let end: usize = b.trim().parse().map_err(|_| bad())?;
        if start > end {
            return Err(bad());
        }
        Ok(WordRange { start, end })
    }
}

/// Matching key for a buffer word: lowercase, surrounding punctuation removed.
pub fn match_key(word: &str) -> String {
    word.trim_matches(|c: char| !c.is_alphanumeric())
        .to_lowercase()
}

/// Typo → candidate replacements used by `CORRECT`.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CorrectionLexicon {
    entries: BTreeMap<String, Vec<Vec<String>>>,
}

impl CorrectionLexicon {
    pub fn new() -> Self {
        Self::default()
    }

    /// Adds candidates for a (possibly multi-word) typo.
    pub fn with_entry<S: AsRef<str>>(mut self, typo: &str, candidates: &[S]) -> Self {
        self.insert(typo, candidates);
        self
    }

    pub fn insert<S: AsRef<str>>(&mut self, typo: &str, candidates: &[S]) {
        let key = typo
            .split_whitespace()
            .map(match_key)
            .collect::<Vec<_>>()
            .join(" ");
        let values = candidates
            .iter()
            .map(|c| c.as_ref().split_whitespace().map(str::to_string).collect())
            .collect();
        self.entries.insert(key, values);
    }

    pub fn candidates(&self, words: &[String]) -> &[Vec<String>] {
        let key = words
            .iter()
            .map(|w| match_key(w))
            .collect::<Vec<_>>()
            .join(" ");
        self.entries.get(&key).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FailureReason {
    Unrecognized,
    TargetNotFound,
    NoSelection,
    NothingToUndo,
    NothingToRedo,
    /// `CHOOSE` with no numbered candidates on screen.
    NothingToChoose,
    /// `CORRECT` on a word the correction lexicon has no alternatives for.
    NoAlternatives,
}

impl fmt::Display for FailureReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            FailureReason::Unrecognized => "command not recognized",
            FailureReason::TargetNotFound => "target not found",
            FailureReason::NoSelection => "nothing is selected",
            FailureReason::NothingToUndo => "nothing to undo",
            FailureReason::NothingToRedo => "nothing to redo",
            FailureReason::NothingToChoose => "no numbered choices are shown",
            FailureReason::NoAlternatives => "no alternatives for this word",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Candidate {
    pub number: u32,
    /// Target location in the buffer.
    pub range: WordRange,
    /// Text shown next to the number (target words or a replacement).
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum Outcome {
    Applied {
        buffer: String,
        selection: Option<WordRange>,
    },
    PendingDisambiguation {
        candidates: Vec<Candidate>,
    },
    Failed {
        reason: FailureReason,
    },
}

impl Outcome {
    pub fn is_failure(&self) -> bool {
        matches!(self, Outcome::Failed { .. })
    }

    pub fn failure(&self) -> Option<FailureReason> {
        match self {
            Outcome::Failed { reason } => Some(*reason),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Pending {
    /// A command whose target phrase matched several places.
    Target {
        command: Command,
        candidates: Vec<WordRange>,
    },
    /// A correction with several replacement words to pick from.
    Correction {
        target: WordRange,
        options: Vec<Vec<String>>,
    },
}

impl Pending {
    pub fn len(&self) -> usize {
        match self {
            Pending::Target { candidates, .. } => candidates.len(),
            Pending::Correction { options, .. } => options.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
struct Snapshot {
    buffer: Vec<String>,
    cursor: usize,
    selection: Option<WordRange>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SimState {
    buffer: Vec<String>,
    cursor: usize,
    selection: Option<WordRange>,
    pending: Option<Pending>,
    undo_stack: Vec<Snapshot>,
    redo_stack: Vec<Snapshot>,
    lexicon: Arc<CorrectionLexicon>,
}

type Step = Result<Outcome, FailureReason>;

impl SimState {
    pub fn init(text: &str, lexicon: CorrectionLexicon) -> SimState {
        SimState::with_shared_lexicon(text, Arc::new(lexicon))
    }

    pub fn with_shared_lexicon(text: &str, lexicon: Arc<CorrectionLexicon>) -> SimState {
        let buffer: Vec<String> = text.split_whitespace().map(str::to_string).collect();
        SimState {
            cursor: buffer.len(),
            buffer,
            selection: None,
            pending: None,
            undo_stack: Vec::new(),
            redo_stack: Vec::new(),
            lexicon,
        }
    }

    pub fn buffer(&self) -> &[String] {
        &self.buffer
    }

    pub fn buffer_text(&self) -> String {
        self.buffer.join(" ")
    }

    pub fn cursor(&self) -> usize {
        self.cursor
    }

    pub fn selection(&self) -> Option<WordRange> {
        self.selection
    }

    /// The selected words as they appear in the buffer.
    pub fn selected_words(&self) -> Option<&[String]> {
        self.selection.map(|r| &self.buffer[r.start..r.end])
    }

    pub fn pending(&self) -> Option<&Pending> {
        self.pending.as_ref()
    }

    pub fn lexicon(&self) -> &CorrectionLexicon {
        &self.lexicon
    }

    pub fn undo_depth(&self) -> usize {
        self.undo_stack.len()
    }

    pub fn redo_depth(&self) -> usize {
        self.redo_stack.len()
    }

    /// Runs one command string. Failures leave the state untouched.
    pub fn execute(&mut self, text: &str) -> Outcome {
        let Ok(cmd) = parse_canonical(text) else {
            return Outcome::Failed {
                reason: FailureReason::Unrecognized,
            };
        };
        self.execute_command(&cmd)
    }

    pub fn execute_command(&mut self, cmd: &Command) -> Outcome {
        let mut work = self.clone();
        match work.step(cmd) {
            Ok(outcome) => {
                *self = work;
                outcome
            }
            Err(reason) => Outcome::Failed { reason },
        }
    }

    /// Value-style variant of [`SimState::execute`].
    pub fn executed(mut self, text: &str) -> (SimState, Outcome) {
        let outcome = self.execute(text);
        (self, outcome)
    }

    fn snapshot(&self) -> Snapshot {
        Snapshot {
            buffer: self.buffer.clone(),
            cursor: self.cursor,
            selection: self.selection,
        }
    }

    fn restore(&mut self, snap: Snapshot) {
        self.buffer = snap.buffer;
        self.cursor = snap.cursor;
        self.selection = snap.selection;
    }

    fn applied(&self) -> Outcome {
        Outcome::Applied {
            buffer: self.buffer_text(),
            selection: self.selection,
        }
    }

    fn step(&mut self, cmd: &Command) -> Step {
        use OperationKind as O;

        if self.buffer.is_empty() && !matches!(cmd.op(), O::Undo | O::Redo) {
            return Err(FailureReason::TargetNotFound);
        }
        let prior_selection = self.selection.take();
        let prior_pending = self.pending.take();

        match (cmd.op(), cmd.cmd_arg()) {
            (O::Undo, _) => {
                let snap = self.undo_stack.pop().ok_or(FailureReason::NothingToUndo)?;
                self.selection = prior_selection;
                self.redo_stack.push(self.snapshot());
                self.restore(snap);
                Ok(self.applied())
            }
            (O::Redo, _) => {
                let snap = self.redo_stack.pop().ok_or(FailureReason::NothingToRedo)?;
                self.selection = prior_selection;
                self.undo_stack.push(self.snapshot());
                self.restore(snap);
                Ok(self.applied())
            }
            (O::Choose, Some(ArgValue::Number(n))) => {
                let pending = prior_pending.ok_or(FailureReason::NothingToChoose)?;
                self.choose(pending, *n, prior_selection)
            }
            (O::Select, Some(ArgValue::RelativeWord(rel))) => {
                let range = self.relative_word(*rel, prior_selection)?;
                self.apply_at(cmd, range, prior_selection)
            }
            (O::Delete | O::Correct, Some(ArgValue::Deictic)) => {
                let range = prior_selection.ok_or(FailureReason::NoSelection)?;
                self.apply_at(cmd, range, prior_selection)
            }
            _ => {
                let target = match cmd.op() {
                    O::Insert | O::Move => cmd.ctx_arg(),
                    _ => cmd.cmd_arg(),
                }
                .and_then(ArgValue::phrase)
                .expect("validated command carries a target phrase");
                let hits = self.find(target.words());
                match hits.len() {
                    0 => Err(FailureReason::TargetNotFound),
                    1 => self.apply_at(cmd, hits[0], prior_selection),
                    _ => {
                        let candidates = self.numbered(&hits);
                        self.pending = Some(Pending::Target {
                            command: cmd.clone(),
                            candidates: hits,
                        });
                        Ok(Outcome::PendingDisambiguation { candidates })
                    }
                }
            }
        }
    }

    fn choose(
        &mut self,
        pending: Pending,
        n: NonZeroU32,
        prior_selection: Option<WordRange>,
    ) -> Step {
        let idx = n.get() as usize - 1;
        match pending {
            Pending::Target {
                command,
                candidates,
            } => {
                let range = *candidates.get(idx).ok_or(FailureReason::TargetNotFound)?;
                self.apply_at(&command, range, prior_selection)
            }
            Pending::Correction { target, options } => {
                let words = options
                    .get(idx)
                    .ok_or(FailureReason::TargetNotFound)?
                    .clone();
                self.edit(prior_selection, |buf| {
                    buf.splice(target.start..target.end, words.iter().cloned());
                    target.start + words.len()
                });
                Ok(self.applied())
            }
        }
    }

    fn relative_word(
        &self,
        rel: Relative,
        selection: Option<WordRange>,
    ) -> Result<WordRange, FailureReason> {
        let idx = match (rel, selection) {
            (Relative::Previous, Some(sel)) => sel.start.checked_sub(1),
            (Relative::Previous, None) => self.cursor.checked_sub(1),
            (Relative::Next, Some(sel)) => Some(sel.end),
            (Relative::Next, None) => Some(self.cursor),
        };
        match idx {
            Some(i) if i < self.buffer.len() => Ok(WordRange::new(i, i + 1)),
            _ => Err(FailureReason::TargetNotFound),
        }
    }

    /// Records an undo point, applies `f`, and places the cursor where it says.
    fn edit(
        &mut self,
        prior_selection: Option<WordRange>,
        f: impl FnOnce(&mut Vec<String>) -> usize,
    ) {
        self.undo_stack.push(Snapshot {
            buffer: self.buffer.clone(),
            cursor: self.cursor,
            selection: prior_selection,
        });
        self.redo_stack.clear();
        self.cursor = f(&mut self.buffer);
        self.selection = None;
    }

    fn apply_at(
        &mut self,
        cmd: &Command,
        range: WordRange,
        prior_selection: Option<WordRange>,
    ) -> Step {
        use OperationKind as O;

        let words = |arg: Option<&ArgValue>| -> Vec<String> {
            arg.and_then(ArgValue::phrase)
                .map(|p| p.words().to_vec())
                .unwrap_or_default()
        };
        match cmd.op() {
            O::Select => {
                self.selection = Some(range);
                self.cursor = range.end;
            }
            O::Move => {
                self.cursor = match cmd.ctx() {
                    Some(ContextKeyword::Before) => range.start,
                    _ => range.end,
                };
            }
            O::Delete => self.edit(prior_selection, |buf| {
                buf.drain(range.start..range.end);
                range.start
            }),
            O::Insert => {
                let text = words(cmd.cmd_arg());
                let at = match cmd.ctx() {
                    Some(ContextKeyword::Before) => range.start,
                    _ => range.end,
                };
                self.edit(prior_selection, |buf| {
                    buf.splice(at..at, text.iter().cloned());
                    at + text.len()
                });
            }
            O::Replace => {
                let text = words(cmd.ctx_arg());
                self.edit(prior_selection, |buf| {
                    buf.splice(range.start..range.end, text.iter().cloned());
                    range.start + text.len()
                });
            }
            O::Correct => {
                let options = self
                    .lexicon
                    .candidates(&self.buffer[range.start..range.end])
                    .to_vec();
                match options.len() {
                    0 => return Err(FailureReason::NoAlternatives),
                    1 => {
                        let text = options[0].clone();
                        self.edit(prior_selection, |buf| {
                            buf.splice(range.start..range.end, text.iter().cloned());
                            range.start + text.len()
                        });
                    }
                    _ => {
                        let candidates = options
                            .iter()
                            .zip(1u32..)
                            .map(|(words, number)| Candidate {
                                number,
                                range,
                                text: words.join(" "),
                            })
                            .collect();
                        self.pending = Some(Pending::Correction {
                            target: range,
                            options,
                        });
                        return Ok(Outcome::PendingDisambiguation { candidates });
                    }
                }
            }
            O::Choose | O::Undo | O::Redo => unreachable!("handled before target resolution"),
        }
        Ok(self.applied())
    }

    /// Non-overlapping, left-to-right, whole-word, case-insensitive matches.
    pub fn find(&self, phrase: &[String]) -> Vec<WordRange> {
        let keys: Vec<String> = self.buffer.iter().map(|w| match_key(w)).collect();
        let needle: Vec<String> = phrase.iter().map(|w| match_key(w)).collect();
        let mut hits = Vec::new();
        if needle.is_empty() || needle.len() > keys.len() {
            return hits;
        }
        let mut i = 0;
        while i + needle.len() <= keys.len() {
            if keys[i..i + needle.len()] == needle[..] {
                hits.push(WordRange::new(i, i + needle.len()));
                i += needle.len();
            } else {
                i += 1;
            }
        }
        hits
    }

    fn numbered(&self, ranges: &[WordRange]) -> Vec<Candidate> {
        ranges
            .iter()
            .zip(1u32..)
            .map(|(r, number)| Candidate {
                number,
                range: *r,
                text: self.buffer[r.start..r.end].join(" "),
            })
            .collect()
    }

    /// Line-oriented snapshot of the visible state (not the undo history).
    pub fn export(&self) -> String {
        let selection = self
            .selection
            .map_or_else(|| "none".to_string(), |r| r.to_string());
        let pending = match &self.pending {
            None => "none".to_string(),
            Some(Pending::Target {
                command,
                candidates,
            }) => format!(
                "target | {} | {}",
                command,
                candidates
                    .iter()
                    .map(ToString::to_string)
                    .collect::<Vec<_>>()
                    .join(" ")
            ),
            Some(Pending::Correction { target, options }) => {
                let mut parts = vec!["correction".to_string(), target.to_string()];
                parts.extend(options.iter().map(|o| o.join(" ")));
                parts.join(" | ")
            }
        };
        format!(
            "buffer: {}\ncursor: {}\nselection: {}\npending: {}\n",
            self.buffer_text(),
            self.cursor,
            selection,
            pending
        )
    }

    pub fn import(text: &str, lexicon: CorrectionLexicon) -> Result<SimState, SnapshotError> {
        let mut lines = text.lines();
        let mut field = |name: &'static str| -> Result<String, SnapshotError> {
            let line = lines.next().ok_or(SnapshotError::MissingLine(name))?;
            let prefix = format!("{name}:");
            line.strip_prefix(&prefix)
                .map(|rest| rest.trim().to_string())
                .ok_or(SnapshotError::MissingLine(name))
        };
        let mut state = SimState::init(&field("buffer")?, lexicon);
        let n = state.buffer.len();
        let in_bounds = |r: WordRange| -> Result<WordRange, SnapshotError> {
            if r.end <= n {
                Ok(r)
            } else {
                Err(SnapshotError::OutOfBounds(r))
            }
        };

        let cursor = field("cursor")?;
        state.cursor = cursor
            .parse()
            .ok()
            .filter(|c| *c <= n)
            .ok_or(SnapshotError::BadCursor(cursor))?;

        let selection = field("selection")?;
        state.selection = match selection.as_str() {
            "none" => None,
            s => Some(in_bounds(s.parse()?)?),
        };

        let pending = field("pending")?;
        state.pending = if pending == "none" {
            None
        } else {
            let parts: Vec<&str> = pending.split(" | ").collect();
            match parts.as_slice() {
                ["target", command, ranges] => {
                    let command = parse_canonical(command)
                        .map_err(|e| SnapshotError::BadPending(e.to_string()))?;
                    let candidates = ranges
                        .split_whitespace()
                        .map(|r| r.parse().and_then(in_bounds))
                        .collect::<Result<Vec<_>, _>>()?;
                    Some(Pending::Target {
                        command,
                        candidates,
                    })
                }
                ["correction", target, options @ ..] if !options.is_empty() => {
                    Some(Pending::Correction {
                        target: in_bounds(target.parse()?)?,
                        options: options
                            .iter()
                            .map(|o| o.split_whitespace().map(str::to_string).collect())
                            .collect(),
                    })
                }
                _ => return Err(SnapshotError::BadPending(pending)),
            }
        };
        Ok(state)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SnapshotError {
    #[error("missing `{0}:` line")]
    MissingLine(&'static str),
    #[error("bad range {0:?}")]
    BadRange(String),
    #[error("range {0} is out of bounds")]
    OutOfBounds(WordRange),
    #[error("bad cursor {0:?}")]
    BadCursor(String),
    #[error("bad pending line: {0}")]
    BadPending(String),
}
