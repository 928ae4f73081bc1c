//! Utterance segmentation over a timestamped token stream.
//!
//! A single silence window bounds every gap between tokens, both between
//! and inside command components. What happens when the window expires
//! depends on the mode: the legacy interface throws the partial command
//! away, the shim treats the pause as the end of the utterance.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Milliseconds since an arbitrary session epoch.
pub type Millis = u64;

pub const LEGACY_DEFAULT_WINDOW_MS: Millis = 1500;
pub const SHIM_DEFAULT_WINDOW_MS: Millis = 3000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SegmenterMode {
    Legacy,
    Shim,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SegmenterError {
    #[error("window must be positive")]
    ZeroWindow,
    #[error("terminator phrase {0:?} must be a single token")]
    MultiTokenTerminator(String),
    #[error("timestamp {at} precedes last arrival {last}")]
    NonMonotonicTimestamp { at: Millis, last: Millis },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SegmenterConfig {
    pub mode: SegmenterMode,
    pub window_ms: Millis,
    pub terminator_phrases: Vec<String>,
}

impl SegmenterConfig {
    pub fn legacy() -> Self {
        SegmenterConfig {
            mode: SegmenterMode::Legacy,
            window_ms: LEGACY_DEFAULT_WINDOW_MS,
            terminator_phrases: Vec::new(),
        }
    }

    /// Shim defaults: 3 s window, "over" and "end" as completion phrases.
    pub fn shim() -> Self {
        SegmenterConfig {
            mode: SegmenterMode::Shim,
            window_ms: SHIM_DEFAULT_WINDOW_MS,
            terminator_phrases: vec!["over".into(), "end".into()],
        }
    }

    pub fn with_window(mut self, window_ms: Millis) -> Self {
        self.window_ms = window_ms;
        self
    }

    pub fn with_terminators<I, S>(mut self, words: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        self.terminator_phrases = words.into_iter().map(Into::into).collect();
        self
    }

    pub fn validate(&self) -> Result<(), SegmenterError> {
        if self.window_ms == 0 {
            return Err(SegmenterError::ZeroWindow);
        }
        for t in &self.terminator_phrases {
            if t.split_whitespace().count() != 1 {
                return Err(SegmenterError::MultiTokenTerminator(t.clone()));
            }
        }
        Ok(())
    }

    fn is_terminator(&self, token: &str) -> bool {
        self.terminator_phrases
            .iter()
            .any(|t| t.eq_ignore_ascii_case(token))
    }
}

impl Default for SegmenterConfig {
    fn default() -> Self {
        SegmenterConfig::shim()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "tokens", rename_all = "snake_case")]
pub enum SegmentEvent {
    UtteranceComplete(Vec<String>),
    Discarded(Vec<String>),
}

impl SegmentEvent {
    pub fn tokens(&self) -> &[String] {
        match self {
            SegmentEvent::UtteranceComplete(t) | SegmentEvent::Discarded(t) => t,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Segmenter {
    config: SegmenterConfig,
    pending: Vec<(String, Millis)>,
    last_arrival: Option<Millis>,
    log: Vec<SegmentEvent>,
}

impl Segmenter {
    pub fn new(config: SegmenterConfig) -> Result<Segmenter, SegmenterError> {
        config.validate()?;
        Ok(Segmenter {
            config,
            pending: Vec::new(),
            last_arrival: None,
            log: Vec::new(),
        })
    }

    pub fn config(&self) -> &SegmenterConfig {
        &self.config
    }

    pub fn pending(&self) -> impl Iterator<Item = &str> {
        self.pending.iter().map(|(t, _)| t.as_str())
    }

    /// Every event emitted so far, oldest first.
    pub fn log(&self) -> &[SegmentEvent] {
        &self.log
    }

    fn check_time(&self, at: Millis) -> Result<(), SegmenterError> {
        match self.last_arrival {
            Some(last) if at < last => Err(SegmenterError::NonMonotonicTimestamp { at, last }),
            _ => Ok(()),
        }
    }

    fn emit(&mut self, event: SegmentEvent, out: &mut Vec<SegmentEvent>) {
        self.log.push(event.clone());
        out.push(event);
    }

    fn expire(&mut self, now: Millis, out: &mut Vec<SegmentEvent>) {
        let Some(last) = self.last_arrival else {
            return;
        };
        if self.pending.is_empty() || now - last <= self.config.window_ms {
            return;
        }
        let tokens = self.take_pending();
        let event = match self.config.mode {
            SegmenterMode::Legacy => SegmentEvent::Discarded(tokens),
            SegmenterMode::Shim => SegmentEvent::UtteranceComplete(tokens),
        };
        self.emit(event, out);
    }

    fn take_pending(&mut self) -> Vec<String> {
        self.pending.drain(..).map(|(t, _)| t).collect()
    }

    /// Feeds one recognized token.
    ///
    /// An expired window is resolved first, so a late token starts a new
    /// utterance. A terminator completes the pending utterance and is not
    /// itself part of it.
    pub fn push_token(
        &mut self,
        token: &str,
        at: Millis,
    ) -> Result<Vec<SegmentEvent>, SegmenterError> {
        self.check_time(at)?;
        let mut out = Vec::new();
        self.expire(at, &mut out);
        self.last_arrival = Some(at);
        if self.config.is_terminator(token) {
            if !self.pending.is_empty() {
                let tokens = self.take_pending();
                self.emit(SegmentEvent::UtteranceComplete(tokens), &mut out);
            }
        } else {
            self.pending.push((token.to_string(), at));
        }
        Ok(out)
    }

    /// Advances the clock without input.
    pub fn tick(&mut self, now: Millis) -> Result<Vec<SegmentEvent>, SegmenterError> {
        self.check_time(now)?;
        let mut out = Vec::new();
        self.expire(now, &mut out);
        Ok(out)
    }

    /// End of speech: whatever is pending is a complete utterance.
    pub fn flush(&mut self) -> Vec<SegmentEvent> {
        let mut out = Vec::new();
        if !self.pending.is_empty() {
            let tokens = self.take_pending();
            self.emit(SegmentEvent::UtteranceComplete(tokens), &mut out);
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn complete(words: &[&str]) -> SegmentEvent {
        SegmentEvent::UtteranceComplete(words.iter().map(|s| s.to_string()).collect())
    }

    fn discarded(words: &[&str]) -> SegmentEvent {
        SegmentEvent::Discarded(words.iter().map(|s| s.to_string()).collect())
    }

    #[test]
    fn shim_completes_on_silence() {
        let mut seg = Segmenter::new(SegmenterConfig::shim()).unwrap();
        assert!(seg.push_token("select", 0).unwrap().is_empty());
        assert!(seg.push_token("apple", 500).unwrap().is_empty());
        assert_eq!(
            seg.tick(5000).unwrap(),
            vec![complete(&["select", "apple"])]
        );
    }

    #[test]
    fn legacy_discards_partial_and_restarts() {
        let mut seg = Segmenter::new(SegmenterConfig::legacy()).unwrap();
        seg.push_token("insert", 0).unwrap();
        let events = seg.push_token("word", 2500).unwrap();
        assert_eq!(events, vec![discarded(&["insert"])]);
        assert_eq!(seg.pending().collect::<Vec<_>>(), ["word"]);
    }

    #[test]
    fn terminator_completes_without_itself() {
        let cfg = SegmenterConfig::legacy().with_terminators(["over"]);
        let mut seg = Segmenter::new(cfg).unwrap();
        seg.push_token("delete", 0).unwrap();
        seg.push_token("that", 400).unwrap();
        assert_eq!(
            seg.push_token("over", 900).unwrap(),
            vec![complete(&["delete", "that"])]
        );
        assert_eq!(seg.pending().count(), 0);
    }

    #[test]
    fn tick_boundaries() {
        let mut legacy = Segmenter::new(SegmenterConfig::legacy()).unwrap();
        legacy.push_token("insert", 0).unwrap();
        legacy.push_token("law", 100).unwrap();
        assert!(
            legacy.tick(1600).unwrap().is_empty(),
            "gap of exactly the window is kept"
        );
        assert_eq!(
            legacy.tick(1700).unwrap(),
            vec![discarded(&["insert", "law"])]
        );

        let mut shim = Segmenter::new(SegmenterConfig::shim()).unwrap();
        shim.push_token("insert", 0).unwrap();
        shim.push_token("law", 100).unwrap();
        assert_eq!(shim.tick(3200).unwrap(), vec![complete(&["insert", "law"])]);
    }

    #[test]
    fn empty_pending_never_emits() {
        let mut seg = Segmenter::new(SegmenterConfig::legacy()).unwrap();
        assert!(seg.tick(0).unwrap().is_empty());
        assert!(seg.tick(1_000_000).unwrap().is_empty());
        assert!(seg.flush().is_empty());
    }

    #[test]
    fn rejects_time_travel_and_bad_config() {
        let mut seg = Segmenter::new(SegmenterConfig::shim()).unwrap();
        seg.push_token("a", 100).unwrap();
        assert_eq!(
            seg.push_token("b", 50),
            Err(SegmenterError::NonMonotonicTimestamp { at: 50, last: 100 })
        );
        assert!(seg.tick(99).is_err());
        assert_eq!(
            Segmenter::new(SegmenterConfig::shim().with_window(0)).unwrap_err(),
            SegmenterError::ZeroWindow
        );
        assert!(
            Segmenter::new(SegmenterConfig::shim().with_terminators(["over and out"])).is_err()
        );
    }

    #[test]
    fn log_records_every_event() {
        let mut seg = Segmenter::new(SegmenterConfig::legacy()).unwrap();
        seg.push_token("a", 0).unwrap();
        seg.push_token("b", 2000).unwrap();
        seg.flush();
        assert_eq!(seg.log(), &[discarded(&["a"]), complete(&["b"])]);
    }
}
