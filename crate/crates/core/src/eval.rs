//! Offline scoring of normalizer backends and the timing replay.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::command::{parse_canonical, ArgValue, OperationKind};
use crate::dataset::{typo_corrections, DatasetSample, Record};
use crate::normalizer::{
    NormalizationResult, NormalizeRequest, NormalizerBackend, RuleNormalizer, SelectionContext,
};
use crate::segmenter::{Millis, SegmentEvent, Segmenter, SegmenterConfig, SegmenterError};
use crate::session::{Session, SessionConfig, SessionError, SessionEvent};
use crate::sim::{CorrectionLexicon, FailureReason, Outcome, SimState};

fn words(text: &str) -> Vec<String> {
    text.split_whitespace().map(str::to_lowercase).collect()
}

/// Token-level equality, ignoring case and spacing.
pub fn exact_match(predicted: &str, gold: &str) -> bool {
    words(predicted) == words(gold)
}

fn lcs_len(a: &[String], b: &[String]) -> usize {
    let mut row = vec![0usize; b.len() + 1];
    for x in a {
        let mut diag = 0;
        for (j, y) in b.iter().enumerate() {
            let up = row[j + 1];
            row[j + 1] = if x == y { diag + 1 } else { up.max(row[j]) };
            diag = up;
        }
    }
    row[b.len()]
}

/// ROUGE-L F-measure over lowercase whitespace tokens, with equal weight
/// on precision and recall. Two empty strings score 1.
pub fn rouge_l(predicted: &str, gold: &str) -> f64 {
    let (p, g) = (words(predicted), words(gold));
    if p.is_empty() && g.is_empty() {
        return 1.0;
    }
    let lcs = lcs_len(&p, &g) as f64;
    if lcs == 0.0 {
        return 0.0;
    }
    let precision = lcs / p.len() as f64;
    let recall = lcs / g.len() as f64;
    2.0 * precision * recall / (precision + recall)
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Score {
    pub total: usize,
    pub exact: usize,
    pub exact_match: f64,
    pub rouge_l: f64,
}

#[derive(Debug, Default, Clone)]
struct Tally {
    total: usize,
    exact: usize,
    rouge: f64,
}

impl Tally {
    fn add(&mut self, exact: bool, rouge: f64) {
        self.total += 1;
        self.exact += usize::from(exact);
        self.rouge += rouge;
    }

    fn score(&self) -> Score {
        let n = self.total.max(1) as f64;
        Score {
            total: self.total,
            exact: self.exact,
            exact_match: self.exact as f64 / n,
            rouge_l: self.rouge / n,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Miss {
    pub input: String,
    pub expected: String,
    pub predicted: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub backend: String,
    pub overall: Score,
    pub per_op: BTreeMap<String, Score>,
    pub per_category: BTreeMap<String, Score>,
    /// First-turn question accuracy on two-turn samples.
    pub clarification_questions: Score,
    pub misses: Vec<Miss>,
}

impl EvalReport {
    pub fn to_table(&self) -> String {
        let mut out = String::new();
        let line = |out: &mut String, name: &str, s: &Score| {
            let _ = writeln!(
                out,
                "{name:<22} {:>5} {:>7.3} {:>8.3}",
                s.total, s.exact_match, s.rouge_l
            );
        };
        let _ = writeln!(out, "backend: {}", self.backend);
        let _ = writeln!(out, "{:<22} {:>5} {:>7} {:>8}", "", "n", "EM", "ROUGE-L");
        line(&mut out, "overall", &self.overall);
        let _ = writeln!(out, "by operation");
        for (k, s) in &self.per_op {
            line(&mut out, &format!("  {k}"), s);
        }
        let _ = writeln!(out, "by error category");
        for (k, s) in &self.per_category {
            line(&mut out, &format!("  {k}"), s);
        }
        if self.clarification_questions.total > 0 {
            line(
                &mut out,
                "clarification question",
                &self.clarification_questions,
            );
        }
        out
    }
}

/// One sample through a backend: the rendered output and, for two-turn
/// samples, whether the first turn asked the expected question.
pub fn predict(backend: &dyn NormalizerBackend, sample: &DatasetSample) -> (String, Option<bool>) {
    let selection = SelectionContext::from_text(sample.selection.as_deref().unwrap_or(""));
    let request = NormalizeRequest::new(sample.utterance.clone()).with_selection(selection);
    let first = match backend.normalize(&request) {
        Ok(r) => r,
        Err(e) => {
            return (
                format!("ERROR: {e}"),
                sample.clarification.as_ref().map(|_| false),
            )
        }
    };
    let Some(turn) = &sample.clarification else {
        return (first.render(), None);
    };
    match &first {
        NormalizationResult::Clarify { question, partial } => {
            let asked_right = exact_match(question, &turn.question);
            let out = match backend.apply_clarification(partial, &turn.answer) {
                Ok(r) => r.render(),
                Err(e) => format!("ERROR: {e}"),
            };
            (out, Some(asked_right))
        }
        other => (other.render(), Some(false)),
    }
}

pub fn evaluate(backend: &dyn NormalizerBackend, samples: &[DatasetSample]) -> EvalReport {
    let mut overall = Tally::default();
    let mut per_op: BTreeMap<String, Tally> = BTreeMap::new();
    let mut per_category: BTreeMap<String, Tally> = BTreeMap::new();
    let mut questions = Tally::default();
    let mut misses = Vec::new();
    for s in samples {
        let (predicted, asked_right) = predict(backend, s);
        let em = exact_match(&predicted, &s.expected);
        let rouge = rouge_l(&predicted, &s.expected);
        overall.add(em, rouge);
        per_op
            .entry(s.op.keyword().to_lowercase())
            .or_default()
            .add(em, rouge);
        per_category
            .entry(s.error_category.as_str().into())
            .or_default()
            .add(em, rouge);
        if let Some(ok) = asked_right {
            questions.add(ok, if ok { 1.0 } else { 0.0 });
        }
        if !em {
            misses.push(Miss {
                input: s.input(),
                expected: s.expected.clone(),
                predicted,
            });
        }
    }
    EvalReport {
        backend: backend.name().to_string(),
        overall: overall.score(),
        per_op: per_op.into_iter().map(|(k, t)| (k, t.score())).collect(),
        per_category: per_category
            .into_iter()
            .map(|(k, t)| (k, t.score()))
            .collect(),
        clarification_questions: questions.score(),
        misses,
    }
}

// ---------------------------------------------------------------------------
// Replay: the same spoken commands, with pauses, against the bare legacy
// interface and through the shim.

#[derive(Debug, Error)]
pub enum ReplayError {
    #[error("replay corpus is empty")]
    EmptyCorpus,
    #[error("case {case}: {expected} gaps needed, {found} given")]
    GapCount {
        case: usize,
        expected: usize,
        found: usize,
    },
    #[error("line {line}: {message}")]
    Malformed { line: usize, message: String },
    #[error(transparent)]
    Segmenter(#[from] SegmenterError),
    #[error(transparent)]
    Session(#[from] SessionError),
}

/// One spoken command with the editor state it is spoken into.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReplayCase {
    pub utterance: String,
    pub buffer: String,
    /// Canonical commands run first, uncounted (e.g. to make a selection).
    #[serde(default)]
    pub setup: Vec<String>,
    /// Pauses between consecutive words; drawn from the jitter range if absent.
    #[serde(default)]
    pub gaps_ms: Option<Vec<Millis>>,
}

const MARKER: &str = "marker";

impl ReplayCase {
    pub fn new(utterance: &str, buffer: &str) -> ReplayCase {
        ReplayCase {
            utterance: utterance.into(),
            buffer: buffer.into(),
            setup: Vec::new(),
            gaps_ms: None,
        }
    }

    pub fn with_setup(mut self, setup: &[&str]) -> ReplayCase {
        self.setup = setup.iter().map(|s| s.to_string()).collect();
        self
    }

    /// Builds a buffer in which the sample's expected command can succeed:
    /// the selection and targets appear in it, earlier edits exist for
    /// UNDO/REDO, and a candidate list is open for CHOOSE.
    pub fn from_sample(sample: &DatasetSample) -> ReplayCase {
        let mut pieces: Vec<String> = Vec::new();
        let mut setup = Vec::new();
        let push = |p: String, pieces: &mut Vec<String>| {
            if !pieces.contains(&p) {
                pieces.push(p);
            }
        };
        if let Some(sel) = &sample.selection {
            push(sel.clone(), &mut pieces);
        }
        let mut choose = None;
        if let Ok(cmd) = parse_canonical(&sample.expected) {
            let target = match cmd.op() {
                OperationKind::Insert => cmd.ctx_arg(),
                _ => cmd.cmd_arg(),
            };
            if let Some(ArgValue::Phrase(p)) = target {
                push(p.to_string(), &mut pieces);
            }
            match cmd.op() {
                OperationKind::Undo => setup.push(format!("DELETE {MARKER}")),
                OperationKind::Redo => {
                    setup.push(format!("DELETE {MARKER}"));
                    setup.push("UNDO THAT".into());
                }
                OperationKind::Choose => {
                    if let Some(ArgValue::Number(n)) = cmd.cmd_arg() {
                        choose = Some(n.get().max(2));
                    }
                }
                _ => {}
            }
        }
        if matches!(sample.op, OperationKind::Undo | OperationKind::Redo) {
            push(MARKER.into(), &mut pieces);
        }
        if let Some(n) = choose {
            pieces.push(vec![MARKER; n as usize].join(" and "));
        }
        if pieces.is_empty() {
            pieces.push("some text".into());
        }
        let buffer = pieces.join(" and ");
        if let Some(sel) = &sample.selection {
            setup.push(format!("SELECT {sel}"));
            // the selection is the first piece, so candidate 1 when ambiguous
            let sim = SimState::init(&buffer, CorrectionLexicon::new());
            if sim.find(&words(sel)).len() > 1 {
                setup.push("CHOOSE 1".into());
            }
        }
        if choose.is_some() {
            setup.push(format!("SELECT {MARKER}"));
        }
        ReplayCase {
            utterance: sample.utterance.clone(),
            buffer,
            setup,
            gaps_ms: None,
        }
    }
}

/// Repair examples (one or more per error pattern) with buffers in which
/// the intended command succeeds.
pub fn repair_corpus() -> Vec<ReplayCase> {
    let apples = "apple pie and apple tart and apple juice";
    let sel = |p: &str| format!("SELECT {p}");
    let s_apple = sel("apple");
    let s_pie = sel("pie");
    let s_typo = sel("meetign");
    vec![
        ReplayCase::new("select 3", apples).with_setup(&[&s_apple]),
        ReplayCase::new("choose apple", "an apple pie"),
        ReplayCase::new("add at home before tonight", "dinner tonight"),
        ReplayCase::new("fix meetign", "the meetign starts"),
        ReplayCase::new("remove apple", "an apple pie"),
        ReplayCase::new("select left word", "fresh apple pie").with_setup(&[&s_apple]),
        ReplayCase::new("select word before", "fresh apple pie").with_setup(&[&s_apple]),
        ReplayCase::new("select right word", "fresh apple pie").with_setup(&[&s_apple]),
        ReplayCase::new("select word after", "fresh apple pie").with_setup(&[&s_apple]),
        ReplayCase::new("replace apple to orange", "an apple pie"),
        ReplayCase::new("replace apple using orange", "an apple pie"),
        ReplayCase::new("insert apple", "a pie").with_setup(&[&s_pie]),
        ReplayCase::new("delete apple before pie", "apple pie"),
        ReplayCase::new("delete", "an apple pie").with_setup(&[&s_apple]),
        ReplayCase::new("undo", "an apple pie").with_setup(&["DELETE apple"]),
        ReplayCase::new("redo", "an apple pie").with_setup(&["DELETE apple", "UNDO THAT"]),
        ReplayCase::new("insert apple before that", "a pie").with_setup(&[&s_pie]),
        ReplayCase::new("replace that with orange", "an apple").with_setup(&[&s_apple]),
        ReplayCase::new("insert apple before", "a pie").with_setup(&[&s_pie]),
        ReplayCase::new("replace with orange", "an apple").with_setup(&[&s_apple]),
        ReplayCase::new("choose number 3", apples).with_setup(&[&s_apple]),
        ReplayCase::new("correct the selected word", "the meetign starts").with_setup(&[&s_typo]),
    ]
}

/// Replay corpus lines: either a [`ReplayCase`] object or a dataset record,
/// optionally with `gaps_ms`.
pub fn parse_corpus(text: &str) -> Result<Vec<ReplayCase>, ReplayError> {
    #[derive(Deserialize)]
    struct RecordLine {
        #[serde(flatten)]
        record: Record,
        #[serde(default)]
        gaps_ms: Option<Vec<Millis>>,
    }
    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Line {
        Case(ReplayCase),
        Record(Box<RecordLine>),
    }
    let mut cases = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let malformed = |message: String| ReplayError::Malformed {
            line: i + 1,
            message,
        };
        let parsed: Line = serde_json::from_str(line)
            .map_err(|_| malformed("neither a replay case nor a dataset record".into()))?;
        cases.push(match parsed {
            Line::Case(c) => c,
            Line::Record(r) => {
                let sample = DatasetSample::try_from(r.record).map_err(malformed)?;
                ReplayCase {
                    gaps_ms: r.gaps_ms,
                    ..ReplayCase::from_sample(&sample)
                }
            }
        });
    }
    Ok(cases)
}

#[derive(Debug, Clone)]
pub struct ReplayConfig {
    pub seed: u64,
    pub jitter_min_ms: Millis,
    pub jitter_max_ms: Millis,
    pub legacy: SegmenterConfig,
    pub shim: SegmenterConfig,
    pub corrections: CorrectionLexicon,
}

impl Default for ReplayConfig {
    fn default() -> Self {
        ReplayConfig {
            seed: 0,
            jitter_min_ms: 200,
            jitter_max_ms: 2500,
            legacy: SegmenterConfig::legacy(),
            shim: SegmenterConfig::shim(),
            corrections: typo_corrections(),
        }
    }
}

/// How one attempt ended.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AttemptOutcome {
    Success,
    /// The shim asked a question instead of guessing. Not a failure.
    Clarified,
    Timeout,
    Syntax,
    Target,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConditionReport {
    pub attempts: usize,
    pub successes: usize,
    pub clarifications: usize,
    pub timeouts: usize,
    pub syntax: usize,
    pub target: usize,
}

impl ConditionReport {
    fn add(&mut self, o: AttemptOutcome) {
        self.attempts += 1;
        match o {
            AttemptOutcome::Success => self.successes += 1,
            AttemptOutcome::Clarified => self.clarifications += 1,
            AttemptOutcome::Timeout => self.timeouts += 1,
            AttemptOutcome::Syntax => self.syntax += 1,
            AttemptOutcome::Target => self.target += 1,
        }
    }

    pub fn failures(&self) -> usize {
        self.timeouts + self.syntax + self.target
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CaseResult {
    pub utterance: String,
    pub gaps_ms: Vec<Millis>,
    pub legacy: AttemptOutcome,
    pub shimmed: AttemptOutcome,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FailureReport {
    pub seed: u64,
    pub jitter_ms: (Millis, Millis),
    pub legacy: ConditionReport,
    pub shimmed: ConditionReport,
    pub cases: Vec<CaseResult>,
}

impl FailureReport {
    pub fn to_table(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(
            out,
            "{} cases, seed {}, pauses {}..{} ms",
            self.cases.len(),
            self.seed,
            self.jitter_ms.0,
            self.jitter_ms.1
        );
        let _ = writeln!(
            out,
            "{:<10} {:>8} {:>7} {:>7} {:>7} {:>9} {:>8}",
            "", "success", "asked", "timeout", "syntax", "target", "failures"
        );
        for (name, c) in [("legacy", &self.legacy), ("shimmed", &self.shimmed)] {
            let _ = writeln!(
                out,
                "{name:<10} {:>8} {:>7} {:>7} {:>7} {:>9} {:>8}",
                c.successes,
                c.clarifications,
                c.timeouts,
                c.syntax,
                c.target,
                c.failures()
            );
        }
        out
    }
}

fn classify(outcome: &Outcome) -> AttemptOutcome {
    match outcome.failure() {
        None => AttemptOutcome::Success,
        Some(FailureReason::Unrecognized) => AttemptOutcome::Syntax,
        Some(_) => AttemptOutcome::Target,
    }
}

fn worst(a: AttemptOutcome, b: AttemptOutcome) -> AttemptOutcome {
    let rank = |o| match o {
        AttemptOutcome::Success => 0,
        AttemptOutcome::Clarified => 1,
        AttemptOutcome::Target => 2,
        AttemptOutcome::Syntax => 3,
        AttemptOutcome::Timeout => 4,
    };
    if rank(b) > rank(a) {
        b
    } else {
        a
    }
}

fn run_setup(sim: &mut SimState, setup: &[String]) {
    for cmd in setup {
        sim.execute(cmd);
    }
}

fn replay_legacy(
    case: &ReplayCase,
    gaps: &[Millis],
    config: &ReplayConfig,
) -> Result<AttemptOutcome, ReplayError> {
    let mut sim = SimState::init(&case.buffer, config.corrections.clone());
    run_setup(&mut sim, &case.setup);
    let mut segmenter = Segmenter::new(config.legacy.clone())?;
    let mut events = Vec::new();
    let mut t: Millis = 0;
    for (i, token) in case.utterance.split_whitespace().enumerate() {
        if i > 0 {
            t += gaps[i - 1];
        }
        events.extend(segmenter.push_token(token, t)?);
    }
    events.extend(segmenter.flush());
    let mut result = AttemptOutcome::Success;
    for event in events {
        result = worst(
            result,
            match event {
                SegmentEvent::Discarded(_) => AttemptOutcome::Timeout,
                SegmentEvent::UtteranceComplete(tokens) => {
                    classify(&sim.execute(&tokens.join(" ")))
                }
            },
        );
    }
    Ok(result)
}

fn replay_shimmed(
    case: &ReplayCase,
    gaps: &[Millis],
    config: &ReplayConfig,
    backend: &Arc<dyn NormalizerBackend>,
) -> Result<AttemptOutcome, ReplayError> {
    let session_config = SessionConfig {
        segmenter: config.shim.clone(),
        corrections: config.corrections.clone(),
    };
    let mut session = Session::open_with(&case.buffer, session_config, backend.clone())?;
    for cmd in &case.setup {
        session.utter(cmd)?;
    }
    let mut events = Vec::new();
    let mut t: Millis = 0;
    for (i, token) in case.utterance.split_whitespace().enumerate() {
        if i > 0 {
            t += gaps[i - 1];
        }
        events.extend(session.hear(token, t)?);
    }
    events.extend(session.end_of_speech());
    let mut result = AttemptOutcome::Success;
    for event in &events {
        let o = match event {
            SessionEvent::Discarded { .. } => AttemptOutcome::Timeout,
            SessionEvent::ClarificationAsked { .. } => AttemptOutcome::Clarified,
            SessionEvent::SuggestionShown { .. } => AttemptOutcome::Syntax,
            SessionEvent::VuiOutcome { outcome } => classify(outcome),
            _ => continue,
        };
        result = worst(result, o);
    }
    Ok(result)
}

/// Speaks every case into the legacy segmenter and simulator directly, and
/// into a shimmed session, with identical pauses.
pub fn replay_compare(
    corpus: &[ReplayCase],
    config: &ReplayConfig,
) -> Result<FailureReport, ReplayError> {
    let backend: Arc<dyn NormalizerBackend> = Arc::new(RuleNormalizer::default());
    replay_compare_with(corpus, config, backend)
}

pub fn replay_compare_with(
    corpus: &[ReplayCase],
    config: &ReplayConfig,
    backend: Arc<dyn NormalizerBackend>,
) -> Result<FailureReport, ReplayError> {
    if corpus.is_empty() {
        return Err(ReplayError::EmptyCorpus);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let (lo, hi) = (
        config.jitter_min_ms.min(config.jitter_max_ms),
        config.jitter_min_ms.max(config.jitter_max_ms),
    );
    let mut report = FailureReport {
        seed: config.seed,
        jitter_ms: (lo, hi),
        legacy: ConditionReport::default(),
        shimmed: ConditionReport::default(),
        cases: Vec::with_capacity(corpus.len()),
    };
    for (i, case) in corpus.iter().enumerate() {
        let needed = case.utterance.split_whitespace().count().saturating_sub(1);
        let gaps = match &case.gaps_ms {
            Some(g) if g.len() == needed => g.clone(),
            Some(g) => {
                return Err(ReplayError::GapCount {
                    case: i,
                    expected: needed,
                    found: g.len(),
                })
            }
            None => (0..needed).map(|_| rng.random_range(lo..=hi)).collect(),
        };
        let legacy = replay_legacy(case, &gaps, config)?;
        let shimmed = replay_shimmed(case, &gaps, config, &backend)?;
        report.legacy.add(legacy);
        report.shimmed.add(shimmed);
        report.cases.push(CaseResult {
            utterance: case.utterance.clone(),
            gaps_ms: gaps,
            legacy,
            shimmed,
        });
    }
    Ok(report)
}
