//! Independent reference models and random case generators.

use rand::seq::IndexedRandom;
use rand::Rng;
use vuishim::command::{Command, ContextKeyword, Phrase};
use vuishim::dataset::NOUNS;
use vuishim::segmenter::{Millis, SegmentEvent, Segmenter, SegmenterConfig};
use vuishim::sim::WordRange;

/// Small vocabulary so random buffers repeat words and targets collide.
pub fn vocab() -> &'static [&'static str] {
    &NOUNS[..12]
}

pub fn random_words<R: Rng>(rng: &mut R, min: usize, max: usize) -> Vec<String> {
    let n = rng.random_range(min..=max);
    (0..n)
        .map(|_| vocab().choose(rng).unwrap().to_string())
        .collect()
}

fn wrap(words: &[String]) -> String {
    words.iter().map(|w| format!("<{w}>")).collect()
}

fn unwrap(text: &str) -> String {
    text.trim_start_matches('<')
        .trim_end_matches('>')
        .split("><")
        .filter(|w| !w.is_empty())
        .collect::<Vec<_>>()
        .join(" ")
}

/// What a single unique-target command does, computed by splicing delimited
/// strings rather than word vectors.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Expected {
    pub buffer: String,
    pub selection: Option<WordRange>,
}

/// `None` when the target does not occur exactly once.
pub fn splice_oracle(buffer: &[String], cmd: &Command) -> Option<Expected> {
    let text = wrap(buffer);
    let phrase_words = |p: Option<&vuishim::command::ArgValue>| {
        p.and_then(|a| a.phrase()).map(|p| p.words().to_vec())
    };
    let (target, insert_text) = match cmd.ctx() {
        Some(ContextKeyword::Before | ContextKeyword::After) => {
            (phrase_words(cmd.ctx_arg())?, phrase_words(cmd.cmd_arg()))
        }
        _ => (phrase_words(cmd.cmd_arg())?, None),
    };
    let needle = wrap(&target);
    let hits: Vec<usize> = text.match_indices(&needle).map(|(i, _)| i).collect();
    let [at] = hits[..] else { return None };
    let end = at + needle.len();
    let word_index = |byte: usize| text[..byte].matches('<').count();
    let (head, tail) = (&text[..at], &text[end..]);
    let out = match (cmd.op().keyword(), cmd.ctx()) {
        ("SELECT", _) => {
            return Some(Expected {
                buffer: unwrap(&text),
                selection: Some(WordRange::new(word_index(at), word_index(end))),
            })
        }
        ("DELETE", _) => format!("{head}{tail}"),
        ("INSERT", Some(ContextKeyword::Before)) => {
            format!("{head}{}{needle}{tail}", wrap(&insert_text?))
        }
        ("INSERT", Some(ContextKeyword::After)) => {
            format!("{head}{needle}{}{tail}", wrap(&insert_text?))
        }
        ("REPLACE", _) => format!("{head}{}{tail}", wrap(&phrase_words(cmd.ctx_arg())?)),
        _ => return None,
    };
    Some(Expected {
        buffer: unwrap(&out),
        selection: None,
    })
}

/// A random SELECT / DELETE / INSERT / REPLACE whose target is a span of
/// `buffer`, so it exists at least once.
pub fn random_targeted_command<R: Rng>(rng: &mut R, buffer: &[String]) -> Command {
    let len = rng.random_range(1..=3.min(buffer.len()));
    let start = rng.random_range(0..=buffer.len() - len);
    let target = Phrase::new(&buffer[start..start + len]).unwrap();
    let text = Phrase::new(random_words(rng, 1, 3)).unwrap();
    match rng.random_range(0..5) {
        0 => Command::select(target),
        1 => Command::on_phrase(vuishim::command::OperationKind::Delete, target).unwrap(),
        2 => Command::insert(text, ContextKeyword::Before, target).unwrap(),
        3 => Command::insert(text, ContextKeyword::After, target).unwrap(),
        _ => Command::replace(target, text),
    }
}

/// One timed token stream.
#[derive(Debug, Clone)]
pub struct Stream {
    pub tokens: Vec<String>,
    /// `gaps[i]` separates token `i` from token `i + 1`.
    pub gaps: Vec<Millis>,
}

impl Stream {
    pub fn random<R: Rng>(rng: &mut R, terminators: &[&str], max_gap: Millis) -> Stream {
        let n = rng.random_range(1..=20);
        let tokens = (0..n)
            .map(|_| {
                if !terminators.is_empty() && rng.random_bool(0.1) {
                    terminators.choose(rng).unwrap().to_string()
                } else {
                    vocab().choose(rng).unwrap().to_string()
                }
            })
            .collect();
        let gaps = (1..n).map(|_| rng.random_range(0..=max_gap)).collect();
        Stream { tokens, gaps }
    }

    /// Pushes every token then flushes; returns every event.
    pub fn run(&self, config: SegmenterConfig) -> Vec<SegmentEvent> {
        let mut seg = Segmenter::new(config).unwrap();
        let mut events = Vec::new();
        let mut t = 0;
        for (i, token) in self.tokens.iter().enumerate() {
            if i > 0 {
                t += self.gaps[i - 1];
            }
            events.extend(seg.push_token(token, t).unwrap());
        }
        events.extend(seg.flush());
        events
    }
}

/// Checks the segmenter invariants for one stream. `Err` names the first
/// violated property.
pub fn check_stream(stream: &Stream, window: Millis) -> Result<(), String> {
    let terminators = ["over", "end"];
    let legacy = SegmenterConfig::legacy().with_window(window);
    let shim = SegmenterConfig::shim().with_window(window);

    for (name, config) in [("legacy", legacy.clone()), ("shim", shim.clone())] {
        let spoken: Vec<&String> = stream
            .tokens
            .iter()
            .filter(|t| {
                !config
                    .terminator_phrases
                    .iter()
                    .any(|x| x.eq_ignore_ascii_case(t))
            })
            .collect();
        let events = stream.run(config);
        let emitted: Vec<&String> = events.iter().flat_map(|e| e.tokens()).collect();
        if emitted != spoken {
            return Err(format!(
                "{name}: tokens lost or duplicated: {spoken:?} vs {emitted:?}"
            ));
        }
        if name == "shim"
            && events
                .iter()
                .any(|e| matches!(e, SegmentEvent::Discarded(_)))
        {
            return Err("shim discarded speech".into());
        }
        if name == "legacy" {
            let discarded = events
                .iter()
                .any(|e| matches!(e, SegmentEvent::Discarded(_)));
            let long_gap = stream.gaps.iter().any(|g| *g > window);
            if discarded != long_gap {
                return Err(format!(
                    "legacy discarded={discarded} but long gap={long_gap}"
                ));
            }
        }
    }

    let ends_with_terminator = stream
        .tokens
        .last()
        .is_some_and(|t| terminators.contains(&t.as_str()));
    if ends_with_terminator && stream.gaps.iter().all(|g| *g <= window) {
        let complete = |events: Vec<SegmentEvent>| -> Vec<SegmentEvent> {
            events
                .into_iter()
                .filter(|e| matches!(e, SegmentEvent::UtteranceComplete(_)))
                .collect()
        };
        let a = complete(stream.run(legacy.with_terminators(terminators)));
        let b = complete(stream.run(shim));
        if a != b {
            return Err(format!("legacy and shim disagree: {a:?} vs {b:?}"));
        }
    }
    Ok(())
}
