//! One user's shim: segmenter → normalizer → transport → legacy interface.
//!
//! A session keeps the selection cache and a short command history for the
//! normalizer, holds at most one open clarification question, and reports
//! everything it does as an ordered list of [`SessionEvent`]s.

use std::collections::VecDeque;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::command::Phrase;
use crate::normalizer::{
    NormalizationResult, NormalizeRequest, NormalizerBackend, PartialCommand, RuleNormalizer,
    SelectionContext, Suggestion, HISTORY_LEN,
};
use crate::segmenter::{Millis, SegmentEvent, Segmenter, SegmenterConfig, SegmenterError};
use crate::sim::{match_key, CorrectionLexicon, Outcome, SimState};
use crate::transport::{IdentityTransport, Transport};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum SessionEvent {
    ListeningState {
        on: bool,
    },
    Transcript {
        text: String,
    },
    Normalized {
        result: NormalizationResult,
    },
    Relayed {
        command: String,
    },
    VuiOutcome {
        outcome: Outcome,
    },
    ClarificationAsked {
        question: String,
    },
    SuggestionShown {
        suggestions: Vec<Suggestion>,
    },
    /// Speech the segmenter threw away before it became an utterance.
    Discarded {
        tokens: Vec<String>,
    },
}

impl SessionEvent {
    /// Whether this event ends the handling of an utterance.
    pub fn is_terminal(&self) -> bool {
        matches!(
            self,
            SessionEvent::VuiOutcome { .. }
                | SessionEvent::ClarificationAsked { .. }
                | SessionEvent::SuggestionShown { .. }
        )
    }
}

/// One JSON object per line.
pub fn to_ndjson(events: &[SessionEvent]) -> String {
    let mut out = String::new();
    for e in events {
        out.push_str(&serde_json::to_string(e).expect("events serialize"));
        out.push('\n');
    }
    out
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SessionConfig {
    pub segmenter: SegmenterConfig,
    pub corrections: CorrectionLexicon,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SessionError {
    #[error("utterance is empty")]
    EmptyUtterance,
    #[error(transparent)]
    Segmenter(#[from] SegmenterError),
}

pub struct Session {
    sim: SimState,
    segmenter: Segmenter,
    cache: SelectionContext,
    history: VecDeque<String>,
    pending: Option<PartialCommand>,
    backend: Arc<dyn NormalizerBackend>,
    transport: Box<dyn Transport>,
}

impl std::fmt::Debug for Session {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Session")
            .field("sim", &self.sim)
            .field("cache", &self.cache)
            .field("history", &self.history)
            .field("pending", &self.pending)
            .field("backend", &self.backend.name())
            .finish_non_exhaustive()
    }
}

impl Session {
    /// Fresh session with the rule backend and the identity transport.
    pub fn open(initial_text: &str, config: SessionConfig) -> Result<Session, SessionError> {
        Session::open_with(initial_text, config, Arc::new(RuleNormalizer::default()))
    }

    pub fn open_with(
        initial_text: &str,
        config: SessionConfig,
        backend: Arc<dyn NormalizerBackend>,
    ) -> Result<Session, SessionError> {
        Ok(Session {
            sim: SimState::init(initial_text, config.corrections),
            segmenter: Segmenter::new(config.segmenter)?,
            cache: SelectionContext::none(),
            history: VecDeque::with_capacity(HISTORY_LEN + 1),
            pending: None,
            backend,
            transport: Box::new(IdentityTransport),
        })
    }

    pub fn with_transport(mut self, transport: Box<dyn Transport>) -> Self {
        self.transport = transport;
        self
    }

    pub fn sim(&self) -> &SimState {
        &self.sim
    }

    pub fn buffer_text(&self) -> String {
        self.sim.buffer_text()
    }

    pub fn cache(&self) -> &SelectionContext {
        &self.cache
    }

    /// Relayed commands, most recent first, at most five.
    pub fn history(&self) -> Vec<String> {
        self.history.iter().cloned().collect()
    }

    pub fn pending_clarification(&self) -> Option<&PartialCommand> {
        self.pending.as_ref()
    }

    /// Handles one complete utterance (typed text, or speech already segmented).
    pub fn utter(&mut self, text: &str) -> Result<Vec<SessionEvent>, SessionError> {
        if text.trim().is_empty() {
            return Err(SessionError::EmptyUtterance);
        }
        let mut events = vec![
            SessionEvent::ListeningState { on: true },
            SessionEvent::Transcript {
                text: text.trim().to_string(),
            },
        ];
        let result = match self.pending.take() {
            Some(partial) => self.backend.apply_clarification(&partial, text),
            None => {
                let request = NormalizeRequest {
                    utterance: text.to_string(),
                    selection: self.cache.clone(),
                    history: self.history(),
                };
                self.backend.normalize(&request)
            }
        };
        let result = result.unwrap_or_else(|e| NormalizationResult::Suggest {
            suggestions: vec![Suggestion {
                text: String::new(),
                reason: e.to_string(),
            }],
        });
        events.push(SessionEvent::Normalized {
            result: result.clone(),
        });
        match result {
            NormalizationResult::Corrected { command, .. }
            | NormalizationResult::PassThrough { command } => {
                self.relay(&command.to_string(), &mut events);
            }
            NormalizationResult::Clarify { question, partial } => {
                self.pending = Some(partial);
                events.push(SessionEvent::ClarificationAsked { question });
            }
            NormalizationResult::Suggest { suggestions } => {
                events.push(SessionEvent::SuggestionShown { suggestions });
            }
        }
        events.push(SessionEvent::ListeningState { on: false });
        Ok(events)
    }

    fn relay(&mut self, canonical: &str, events: &mut Vec<SessionEvent>) {
        let heard = self.transport.deliver(canonical).join(" ");
        events.push(SessionEvent::Relayed {
            command: canonical.to_string(),
        });
        let outcome = self.sim.execute(&heard);
        events.push(SessionEvent::VuiOutcome { outcome });
        self.history.push_front(canonical.to_string());
        self.history.truncate(HISTORY_LEN);
        self.cache = self.projected_cache();
    }

    /// The selection as the normalizer should see it.
    fn projected_cache(&self) -> SelectionContext {
        let selected = self
            .sim
            .selected_words()
            .and_then(|words| Phrase::new(words.iter().map(|w| match_key(w))).ok());
        SelectionContext { selected }
    }

    /// Whether the cache agrees with the simulator's selection.
    pub fn cache_consistent(&self) -> bool {
        self.cache == self.projected_cache()
    }

    /// Feeds one timed speech token.
    pub fn hear(&mut self, token: &str, at: Millis) -> Result<Vec<SessionEvent>, SessionError> {
        let segments = self.segmenter.push_token(token, at)?;
        Ok(self.on_segments(segments))
    }

    pub fn tick(&mut self, now: Millis) -> Result<Vec<SessionEvent>, SessionError> {
        let segments = self.segmenter.tick(now)?;
        Ok(self.on_segments(segments))
    }

    pub fn end_of_speech(&mut self) -> Vec<SessionEvent> {
        let segments = self.segmenter.flush();
        self.on_segments(segments)
    }

    fn on_segments(&mut self, segments: Vec<SegmentEvent>) -> Vec<SessionEvent> {
        let mut events = Vec::new();
        for seg in segments {
            match seg {
                SegmentEvent::UtteranceComplete(tokens) => {
                    let text = tokens.join(" ");
                    if let Ok(batch) = self.utter(&text) {
                        events.extend(batch);
                    }
                }
                SegmentEvent::Discarded(tokens) => events.push(SessionEvent::Discarded { tokens }),
            }
        }
        events
    }
}
