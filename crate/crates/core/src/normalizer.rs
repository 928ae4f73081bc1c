//! Maps natural utterances onto the fixed command grammar.
//!
//! The default backend is a deterministic rule pipeline driven by a
//! [`Lexicon`]. It strips fillers, resolves command and context synonyms,
//! swaps select/choose by argument type, drops spoken noise, resolves
//! deictic references against the selection, and fits the result to one of
//! the six templates. Arguments are always spans of the user's own words or
//! the selected phrase; nothing is invented. When a required piece is
//! missing it asks; when it cannot tell, it suggests.

use std::collections::BTreeSet;
use std::fmt;
use std::num::NonZeroU32;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::command::{
    parse_canonical, parse_number_token, ArgValue, Command, ComponentKind, ContextKeyword,
    OperationKind, Phrase, Relative,
};
use crate::lexicon::{Lexicon, Penalties};

/// Number of recent commands passed to a backend.
pub const HISTORY_LEN: usize = 5;

#[derive(Debug, Clone, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SelectionContext {
    pub selected: Option<Phrase>,
}

impl SelectionContext {
    pub fn none() -> Self {
        Self::default()
    }

    pub fn of(phrase: Phrase) -> Self {
        SelectionContext {
            selected: Some(phrase),
        }
    }

    /// Builds a context from free text; empty or invalid text means no selection.
    pub fn from_text(text: &str) -> Self {
        SelectionContext {
            selected: Phrase::parse(text).ok(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum RepairCategory {
    SwapCmd,
    SubstituteCmd,
    SubstituteCtx,
    SubstituteTemplate,
    IgnoreDeictic,
    AddDeictic,
    MissingArgs,
    NaturalUtterance,
}

impl RepairCategory {
    pub const ALL: [RepairCategory; 8] = [
        RepairCategory::SwapCmd,
        RepairCategory::SubstituteCmd,
        RepairCategory::SubstituteCtx,
        RepairCategory::SubstituteTemplate,
        RepairCategory::IgnoreDeictic,
        RepairCategory::AddDeictic,
        RepairCategory::MissingArgs,
        RepairCategory::NaturalUtterance,
    ];

    pub fn penalty(self, p: &Penalties) -> u32 {
        match self {
            RepairCategory::SwapCmd => p.swap_cmd,
            RepairCategory::SubstituteCmd => p.substitute_cmd,
            RepairCategory::SubstituteCtx => p.substitute_ctx,
            RepairCategory::SubstituteTemplate => p.substitute_template,
            RepairCategory::IgnoreDeictic => p.ignore_deictic,
            RepairCategory::AddDeictic => p.add_deictic,
            RepairCategory::MissingArgs => p.missing_args,
            RepairCategory::NaturalUtterance => p.natural_utterance,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            RepairCategory::SwapCmd => "SWAP_CMD",
            RepairCategory::SubstituteCmd => "SUBSTITUTE_CMD",
            RepairCategory::SubstituteCtx => "SUBSTITUTE_CTX",
            RepairCategory::SubstituteTemplate => "SUBSTITUTE_TEMPLATE",
            RepairCategory::IgnoreDeictic => "IGNORE_DEICTIC",
            RepairCategory::AddDeictic => "ADD_DEICTIC",
            RepairCategory::MissingArgs => "MISSING_ARGS",
            RepairCategory::NaturalUtterance => "NATURAL_UTTERANCE",
        }
    }
}

impl fmt::Display for RepairCategory {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Repair {
    pub category: RepairCategory,
    /// Utterance tokens the repair acted on (may be empty for insertions).
    pub tokens: Vec<String>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct RepairTrace(pub Vec<Repair>);

impl RepairTrace {
    pub fn push(&mut self, category: RepairCategory, tokens: &[String]) {
        self.0.push(Repair {
            category,
            tokens: tokens.to_vec(),
        });
    }

    pub fn categories(&self) -> BTreeSet<RepairCategory> {
        self.0.iter().map(|r| r.category).collect()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// 100 minus one penalty per distinct repair category, floored at 0.
pub fn confidence(trace: &RepairTrace, penalties: &Penalties) -> u8 {
    let total: u32 = trace
        .categories()
        .iter()
        .map(|c| c.penalty(penalties))
        .sum();
    100u32.saturating_sub(total) as u8
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Suggestion {
    /// A canonical command, possibly with `<phrase>` placeholders to fill in.
    pub text: String,
    pub reason: String,
}

/// A command with exactly one missing component, waiting on a clarification.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct PartialCommand {
    pub op: OperationKind,
    pub cmd_arg: Option<Phrase>,
    pub ctx: Option<ContextKeyword>,
    pub ctx_arg: Option<Phrase>,
    pub missing: ComponentKind,
    pub question: String,
}

impl PartialCommand {
    /// Completes the command with `answer` in the missing slot.
    pub fn fill(&self, answer: Phrase) -> Option<Command> {
        let phrase = |p: &Option<Phrase>| p.clone().map(ArgValue::Phrase);
        let (cmd_arg, ctx_arg) = match self.missing {
            ComponentKind::CmdArg => (Some(ArgValue::Phrase(answer)), phrase(&self.ctx_arg)),
            ComponentKind::CtxArg => (phrase(&self.cmd_arg), Some(ArgValue::Phrase(answer))),
            ComponentKind::Cmd | ComponentKind::Ctx => return None,
        };
        Command::new(self.op, cmd_arg, self.ctx, ctx_arg).ok()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum NormalizationResult {
    Corrected {
        command: Command,
        confidence: u8,
        trace: RepairTrace,
    },
    Clarify {
        question: String,
        partial: PartialCommand,
    },
    Suggest {
        suggestions: Vec<Suggestion>,
    },
    PassThrough {
        command: Command,
    },
}

impl NormalizationResult {
    /// The command to relay, if any.
    pub fn command(&self) -> Option<&Command> {
        match self {
            NormalizationResult::Corrected { command, .. }
            | NormalizationResult::PassThrough { command } => Some(command),
            _ => None,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            NormalizationResult::Corrected { .. } => "corrected",
            NormalizationResult::Clarify { .. } => "clarify",
            NormalizationResult::Suggest { .. } => "suggest",
            NormalizationResult::PassThrough { .. } => "pass_through",
        }
    }

    /// Single-line output in dataset form: a command, `ASK: <question>`, or
    /// the first suggestion.
    pub fn render(&self) -> String {
        match self {
            NormalizationResult::Corrected { command, .. }
            | NormalizationResult::PassThrough { command } => command.to_string(),
            NormalizationResult::Clarify { question, .. } => format!("ASK: {question}"),
            NormalizationResult::Suggest { suggestions } => suggestions
                .first()
                .map(|s| s.text.clone())
                .unwrap_or_default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum NormalizeError {
    #[error("utterance is empty")]
    EmptyUtterance,
    #[error("clarification answer is empty")]
    EmptyAnswer,
    #[error("backend unavailable: {0}")]
    Backend(String),
}

/// Backend request: utterance, selection and recent commands.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct NormalizeRequest {
    pub utterance: String,
    pub selection: SelectionContext,
    /// Most recent first, at most [`HISTORY_LEN`].
    pub history: Vec<String>,
}

impl NormalizeRequest {
    pub fn new(utterance: impl Into<String>) -> Self {
        NormalizeRequest {
            utterance: utterance.into(),
            ..Default::default()
        }
    }

    pub fn with_selection(mut self, selection: SelectionContext) -> Self {
        self.selection = selection;
        self
    }

    pub fn with_history(mut self, history: Vec<String>) -> Self {
        self.history = history;
        self.history.truncate(HISTORY_LEN);
        self
    }
}

/// Anything that can turn an utterance into a [`NormalizationResult`].
///
/// A model-backed adapter plugs in here with the same contract.
pub trait NormalizerBackend: Send + Sync {
    fn name(&self) -> &str;

    fn normalize(&self, request: &NormalizeRequest) -> Result<NormalizationResult, NormalizeError>;

    fn apply_clarification(
        &self,
        partial: &PartialCommand,
        answer: &str,
    ) -> Result<NormalizationResult, NormalizeError>;
}

/// Lowercases, splits on whitespace and trims surrounding punctuation.
pub fn tokenize(text: &str) -> Vec<String> {
    text.split_whitespace()
        .map(|w| {
            w.trim_matches(|c: char| !c.is_alphanumeric())
                .to_lowercase()
        })
        .filter(|w| !w.is_empty())
        .collect()
}

fn split_entries(entries: &[String]) -> Vec<Vec<String>> {
    let mut out: Vec<Vec<String>> = entries
        .iter()
        .map(|e| tokenize(e))
        .filter(|t| !t.is_empty())
        .collect();
    // longest first so multiword entries win
    out.sort_by_key(|t| std::cmp::Reverse(t.len()));
    out
}

fn tagged<T: Copy>(groups: &[(T, &[String])]) -> Vec<(Vec<String>, T)> {
    let mut out: Vec<(Vec<String>, T)> = groups
        .iter()
        .flat_map(|(tag, entries)| split_entries(entries).into_iter().map(move |t| (t, *tag)))
        .collect();
    out.sort_by_key(|(t, _)| std::cmp::Reverse(t.len()));
    out
}

fn starts_with(tokens: &[String], pattern: &[String]) -> bool {
    tokens.len() >= pattern.len() && tokens[..pattern.len()] == *pattern
}

fn ends_with(tokens: &[String], pattern: &[String]) -> bool {
    tokens.len() >= pattern.len() && tokens[tokens.len() - pattern.len()..] == *pattern
}

/// Token-level view of a lexicon.
#[derive(Debug)]
struct Compiled {
    prefix: Vec<Vec<String>>,
    suffix: Vec<Vec<String>>,
    anywhere: Vec<String>,
    commands: Vec<(Vec<String>, OperationKind)>,
    contexts: Vec<(Vec<String>, ContextKeyword)>,
    relatives: Vec<(Vec<String>, Relative)>,
    deictic: Vec<Vec<String>>,
    argument_leads: Vec<Vec<String>>,
    number_leads: Vec<Vec<String>>,
    move_leads: Vec<Vec<String>>,
}

impl Compiled {
    fn new(lex: &Lexicon) -> Compiled {
        let commands: Vec<(OperationKind, &[String])> = OperationKind::ALL
            .iter()
            .map(|op| (*op, lex.command_synonyms(*op)))
            .collect();
        let contexts: Vec<(ContextKeyword, &[String])> = [
            ContextKeyword::Before,
            ContextKeyword::After,
            ContextKeyword::With,
        ]
        .iter()
        .map(|c| (*c, lex.context_synonyms(*c)))
        .collect();
        let relatives: Vec<(Relative, &[String])> = [Relative::Previous, Relative::Next]
            .iter()
            .map(|r| (*r, lex.relative_synonyms(*r)))
            .collect();
        Compiled {
            prefix: split_entries(&lex.fillers.prefix),
            suffix: split_entries(&lex.fillers.suffix),
            anywhere: lex
                .fillers
                .anywhere
                .iter()
                .map(|w| w.to_lowercase())
                .collect(),
            commands: tagged(&commands),
            contexts: tagged(&contexts),
            relatives: tagged(&relatives),
            deictic: split_entries(&lex.deictic.phrases),
            argument_leads: split_entries(&lex.noise.argument_leads),
            number_leads: split_entries(&lex.noise.number_leads),
            move_leads: split_entries(&lex.noise.move_leads),
        }
    }

    /// Operation named at the start of `tokens`, with the number of tokens
    /// used and whether a synonym was needed.
    fn operation(&self, tokens: &[String]) -> Option<(OperationKind, usize, bool)> {
        let first = tokens.first()?;
        if let Some(op) = OperationKind::from_keyword(first) {
            return Some((op, 1, false));
        }
        self.commands
            .iter()
            .find(|(pat, _)| starts_with(tokens, pat))
            .map(|(pat, op)| (*op, pat.len(), true))
    }

    /// First context keyword (canonical or synonym) among `allowed`.
    /// Canonical spellings take priority over synonyms.
    fn find_context(
        &self,
        tokens: &[String],
        allowed: &[ContextKeyword],
    ) -> Option<(usize, usize, ContextKeyword, bool)> {
        let canonical = tokens.iter().enumerate().find_map(|(i, t)| {
            ContextKeyword::from_keyword(t)
                .filter(|c| allowed.contains(c))
                .map(|c| (i, 1, c, false))
        });
        canonical.or_else(|| {
            (0..tokens.len()).find_map(|i| {
                self.contexts
                    .iter()
                    .find(|(pat, c)| allowed.contains(c) && starts_with(&tokens[i..], pat))
                    .map(|(pat, c)| (i, pat.len(), *c, true))
            })
        })
    }

    fn is_deictic(&self, tokens: &[String]) -> bool {
        self.deictic.iter().any(|d| d.as_slice() == tokens)
    }
}

/// Classified argument span.
#[derive(Debug, Clone, PartialEq)]
enum Arg {
    Empty,
    Deictic,
    Number(NonZeroU32),
    Phrase(Phrase),
    Invalid,
}

enum Draft {
    Command(Command),
    Clarify(PartialCommand),
    Suggest(Vec<Suggestion>),
}

struct Run<'a> {
    lex: &'a Lexicon,
    c: &'a Compiled,
    selection: Option<&'a Phrase>,
    trace: RepairTrace,
}

fn suggestion(text: impl Into<String>, reason: impl Into<String>) -> Suggestion {
    Suggestion {
        text: text.into(),
        reason: reason.into(),
    }
}

pub(crate) fn fill_template(template: &str, pairs: &[(&str, String)]) -> String {
    let mut out = template.to_string();
    for (key, value) in pairs {
        out = out.replace(&format!("{{{key}}}"), value);
    }
    out
}

pub(crate) fn ctx_word(ctx: ContextKeyword) -> String {
    ctx.keyword().to_ascii_lowercase()
}

impl<'a> Run<'a> {
    fn note(&mut self, category: RepairCategory, tokens: &[String]) {
        self.trace.push(category, tokens);
    }

    fn strip_fillers(&mut self, mut tokens: Vec<String>) -> Vec<String> {
        let mut removed = Vec::new();
        tokens.retain(|t| {
            let filler = self.c.anywhere.contains(t);
            if filler {
                removed.push(t.clone());
            }
            !filler
        });
        while let Some(pat) = self
            .c
            .prefix
            .iter()
            .find(|p| starts_with(&tokens, p) && tokens.len() > p.len())
        {
            removed.extend(tokens.drain(..pat.len()));
        }
        while let Some(pat) = self
            .c
            .suffix
            .iter()
            .find(|p| ends_with(&tokens, p) && tokens.len() > p.len())
        {
            let at = tokens.len() - pat.len();
            removed.extend(tokens.drain(at..));
        }
        if !removed.is_empty() {
            self.note(RepairCategory::NaturalUtterance, &removed);
        }
        tokens
    }

    fn relative(&mut self, tokens: &[String]) -> Option<Relative> {
        let (body, the) = match tokens.first() {
            Some(t) if t == "the" => (&tokens[1..], true),
            _ => (tokens, false),
        };
        let canonical = match body {
            [a, b] if b == "word" && a == "previous" => Some(Relative::Previous),
            [a, b] if b == "word" && a == "next" => Some(Relative::Next),
            _ => None,
        };
        let rel = match canonical {
            Some(rel) => rel,
            None => {
                let (_, rel) = self
                    .c
                    .relatives
                    .iter()
                    .find(|(pat, _)| pat.as_slice() == body)?;
                self.note(RepairCategory::SubstituteCtx, body);
                *rel
            }
        };
        if the {
            self.note(RepairCategory::NaturalUtterance, &tokens[..1]);
        }
        Some(rel)
    }

    fn classify(&mut self, tokens: &[String]) -> Arg {
        if tokens.is_empty() {
            return Arg::Empty;
        }
        if self.c.is_deictic(tokens) {
            return Arg::Deictic;
        }
        let mut body = tokens;
        if let Some(lead) = self.c.argument_leads.iter().find(|l| starts_with(body, l)) {
            self.trace
                .push(RepairCategory::NaturalUtterance, &body[..lead.len()]);
            body = &body[lead.len()..];
            if body.is_empty() {
                return Arg::Empty;
            }
        }
        let number_body = match self.c.number_leads.iter().find(|l| starts_with(body, l)) {
            Some(lead) if body.len() == lead.len() + 1 => Some((&body[lead.len()..], lead.len())),
            _ if body.len() == 1 => Some((body, 0)),
            _ => None,
        };
        if let Some((num, lead_len)) = number_body {
            if let Some(n) = parse_number_token(&num[0]) {
                if lead_len > 0 {
                    self.note(RepairCategory::NaturalUtterance, &body[..lead_len]);
                }
                return NonZeroU32::new(n).map_or(Arg::Invalid, Arg::Number);
            }
        }
        Phrase::new(body).map_or(Arg::Invalid, Arg::Phrase)
    }

    fn selection_or_suggest(&self, template: String) -> Result<Phrase, Draft> {
        match self.selection {
            Some(sel) => Ok(sel.clone()),
            None => Err(Draft::Suggest(vec![
                suggestion(
                    "SELECT <phrase>",
                    "nothing is selected; select the target first",
                ),
                suggestion(template, "or name the target explicitly"),
            ])),
        }
    }

    fn run(&mut self, tokens: Vec<String>) -> Draft {
        let tokens = self.strip_fillers(tokens);
        if tokens.is_empty() {
            return Draft::Suggest(generic_guidance("no command words were recognized"));
        }
        let Some((op, used, synonym)) = self.c.operation(&tokens) else {
            return Draft::Suggest(unknown_command_guidance(&tokens));
        };
        if synonym {
            self.note(RepairCategory::SubstituteCmd, &tokens[..used]);
        }
        let rest = &tokens[used..];
        let result = match op {
            OperationKind::Select | OperationKind::Choose => self.select_or_choose(op, rest),
            OperationKind::Delete | OperationKind::Correct => self.on_target(op, rest),
            OperationKind::Undo | OperationKind::Redo => self.history_op(op, rest),
            OperationKind::Insert => self.insert(rest),
            OperationKind::Replace => self.replace(rest),
            OperationKind::Move => self.move_cursor(rest),
        };
        result.unwrap_or_else(|d| d)
    }

    /// Drops a trailing context clause from a two-component command.
    fn truncate_template<'t>(&mut self, rest: &'t [String]) -> &'t [String] {
        let all = [
            ContextKeyword::Before,
            ContextKeyword::After,
            ContextKeyword::With,
        ];
        match self.c.find_context(rest, &all) {
            Some((i, _, _, false)) if i > 0 => {
                self.note(RepairCategory::SubstituteTemplate, &rest[i..]);
                &rest[..i]
            }
            _ => rest,
        }
    }

    fn select_or_choose(&mut self, op: OperationKind, rest: &[String]) -> Result<Draft, Draft> {
        if let Some(rel) = self.relative(rest) {
            if op == OperationKind::Choose {
                self.note(RepairCategory::SwapCmd, &[]);
            }
            return Ok(Draft::Command(Command::select_relative(rel)));
        }
        let rest = self.truncate_template(rest);
        match (op, self.classify(rest)) {
            (OperationKind::Select, Arg::Number(n)) => {
                self.note(RepairCategory::SwapCmd, rest);
                Ok(Draft::Command(Command::choose(n)))
            }
            (OperationKind::Choose, Arg::Number(n)) => Ok(Draft::Command(Command::choose(n))),
            (OperationKind::Choose, Arg::Phrase(p)) => {
                self.note(RepairCategory::SwapCmd, rest);
                Ok(Draft::Command(Command::select(p)))
            }
            (_, Arg::Phrase(p)) => Ok(Draft::Command(Command::select(p))),
            (OperationKind::Select, Arg::Empty) => Ok(Draft::Clarify(PartialCommand {
                op: OperationKind::Select,
                cmd_arg: None,
                ctx: None,
                ctx_arg: None,
                missing: ComponentKind::CmdArg,
                question: self.lex.questions.select_target.clone(),
            })),
            _ => Err(Draft::Suggest(vec![
                suggestion("SELECT <phrase>", "select needs a phrase from the text"),
                suggestion("CHOOSE <number>", "choose needs a candidate number"),
            ])),
        }
    }

    fn on_target(&mut self, op: OperationKind, rest: &[String]) -> Result<Draft, Draft> {
        let rest = self.truncate_template(rest);
        let cmd = match self.classify(rest) {
            Arg::Empty => {
                self.note(RepairCategory::IgnoreDeictic, &[]);
                Command::deictic(op)
            }
            Arg::Deictic => {
                if rest != ["that"] {
                    self.note(RepairCategory::NaturalUtterance, rest);
                }
                Command::deictic(op)
            }
            Arg::Phrase(p) => Command::on_phrase(op, p),
            Arg::Number(_) | Arg::Invalid => {
                return Err(Draft::Suggest(vec![
                    suggestion(
                        format!("{op} <phrase>"),
                        format!(
                            "{} needs a phrase from the text",
                            op.keyword().to_lowercase()
                        ),
                    ),
                    suggestion(format!("{op} THAT"), "or select the target first"),
                ]))
            }
        };
        Ok(Draft::Command(
            cmd.expect("delete/correct take phrase or THAT"),
        ))
    }

    fn history_op(&mut self, op: OperationKind, rest: &[String]) -> Result<Draft, Draft> {
        match self.classify(rest) {
            Arg::Empty => self.note(RepairCategory::IgnoreDeictic, &[]),
            Arg::Deictic if rest == ["that"] => {}
            Arg::Deictic => self.note(RepairCategory::NaturalUtterance, rest),
            _ => {
                return Err(Draft::Suggest(vec![suggestion(
                    format!("{op} THAT"),
                    format!(
                        "{} takes no argument besides THAT",
                        op.keyword().to_lowercase()
                    ),
                )]))
            }
        }
        Ok(Draft::Command(
            Command::deictic(op).expect("undo/redo THAT"),
        ))
    }

    fn insert(&mut self, rest: &[String]) -> Result<Draft, Draft> {
        let allowed = [ContextKeyword::Before, ContextKeyword::After];
        let Some((i, len, ctx, synonym)) = self.c.find_context(rest, &allowed) else {
            return match self.classify(rest) {
                Arg::Phrase(text) => {
                    let anchor =
                        self.selection_or_suggest(format!("INSERT {text} BEFORE <phrase>"))?;
                    self.note(RepairCategory::SubstituteTemplate, &[]);
                    Ok(Draft::Command(
                        Command::insert(text, ContextKeyword::Before, anchor)
                            .expect("insert phrases"),
                    ))
                }
                Arg::Empty => Err(Draft::Suggest(vec![suggestion(
                    "INSERT <phrase> BEFORE <phrase>",
                    "insert needs text and a position",
                )])),
                _ => Err(Draft::Suggest(generic_guidance(
                    "insert needs text and a position",
                ))),
            };
        };
        if synonym {
            self.note(RepairCategory::SubstituteCtx, &rest[i..i + len]);
        }
        let text_tokens = &rest[..i];
        let anchor_tokens = &rest[i + len..];
        let text = self.classify(text_tokens);
        let anchor = self.classify(anchor_tokens);

        let anchor = match anchor {
            Arg::Phrase(p) => Some(p),
            Arg::Deictic => {
                let sel = self.selection_or_suggest(format!("INSERT <phrase> {ctx} <phrase>"))?;
                self.note(RepairCategory::AddDeictic, anchor_tokens);
                Some(sel)
            }
            Arg::Empty => match self.selection {
                Some(sel) if matches!(text, Arg::Phrase(_)) => {
                    self.note(RepairCategory::MissingArgs, &[]);
                    Some(sel.clone())
                }
                _ => None,
            },
            Arg::Number(_) | Arg::Invalid => {
                return Err(Draft::Suggest(vec![suggestion(
                    format!("INSERT <phrase> {ctx} <phrase>"),
                    "the position must be a phrase from the text",
                )]))
            }
        };
        match (text, anchor) {
            (Arg::Phrase(text), Some(anchor)) => Ok(Draft::Command(
                Command::insert(text, ctx, anchor).expect("insert phrases"),
            )),
            (Arg::Empty, Some(anchor)) => {
                let question = fill_template(
                    &self.lex.questions.insert_text,
                    &[("ctx", ctx_word(ctx)), ("anchor", anchor.to_string())],
                );
                Ok(Draft::Clarify(PartialCommand {
                    op: OperationKind::Insert,
                    cmd_arg: None,
                    ctx: Some(ctx),
                    ctx_arg: Some(anchor),
                    missing: ComponentKind::CmdArg,
                    question,
                }))
            }
            (Arg::Phrase(text), None) => {
                let question = fill_template(
                    &self.lex.questions.insert_anchor,
                    &[("ctx", ctx_word(ctx)), ("text", text.to_string())],
                );
                Ok(Draft::Clarify(PartialCommand {
                    op: OperationKind::Insert,
                    cmd_arg: Some(text),
                    ctx: Some(ctx),
                    ctx_arg: None,
                    missing: ComponentKind::CtxArg,
                    question,
                }))
            }
            _ => Err(Draft::Suggest(vec![suggestion(
                format!("INSERT <phrase> {ctx} <phrase>"),
                "insert needs the text to add and where to add it",
            )])),
        }
    }

    fn replace(&mut self, rest: &[String]) -> Result<Draft, Draft> {
        let Some((i, len, _, synonym)) = self.c.find_context(rest, &[ContextKeyword::With]) else {
            let target = match self.classify(rest) {
                Arg::Phrase(p) => p,
                Arg::Deictic | Arg::Empty if self.selection.is_some() => {
                    if !rest.is_empty() {
                        self.note(RepairCategory::AddDeictic, rest);
                    }
                    self.selection.cloned().expect("checked")
                }
                _ => {
                    return Err(Draft::Suggest(vec![suggestion(
                        "REPLACE <phrase> WITH <phrase>",
                        "replace needs a target and a replacement",
                    )]))
                }
            };
            return Ok(self.ask_replacement(target));
        };
        if synonym {
            self.note(RepairCategory::SubstituteCtx, &rest[i..i + len]);
        }
        let target_tokens = &rest[..i];
        let target = match self.classify(target_tokens) {
            Arg::Phrase(p) => Some(p),
            Arg::Deictic => {
                let sel = self.selection_or_suggest("REPLACE <phrase> WITH <phrase>".into())?;
                self.note(RepairCategory::AddDeictic, target_tokens);
                Some(sel)
            }
            Arg::Empty => self.selection.cloned().inspect(|_| {
                self.trace.push(RepairCategory::MissingArgs, &[]);
            }),
            Arg::Number(_) | Arg::Invalid => {
                return Err(Draft::Suggest(vec![suggestion(
                    "REPLACE <phrase> WITH <phrase>",
                    "the target must be a phrase from the text",
                )]))
            }
        };
        let replacement = match self.classify(&rest[i + len..]) {
            Arg::Phrase(p) => Some(p),
            Arg::Empty => None,
            _ => {
                return Err(Draft::Suggest(vec![suggestion(
                    "REPLACE <phrase> WITH <phrase>",
                    "the replacement must be a phrase",
                )]))
            }
        };
        match (target, replacement) {
            (Some(t), Some(r)) => Ok(Draft::Command(Command::replace(t, r))),
            (Some(t), None) => Ok(self.ask_replacement(t)),
            (None, Some(r)) => {
                let question = fill_template(
                    &self.lex.questions.replace_target,
                    &[("replacement", r.to_string())],
                );
                Ok(Draft::Clarify(PartialCommand {
                    op: OperationKind::Replace,
                    cmd_arg: None,
                    ctx: Some(ContextKeyword::With),
                    ctx_arg: Some(r),
                    missing: ComponentKind::CmdArg,
                    question,
                }))
            }
            (None, None) => Err(Draft::Suggest(vec![suggestion(
                "REPLACE <phrase> WITH <phrase>",
                "replace needs a target and a replacement",
            )])),
        }
    }

    fn ask_replacement(&self, target: Phrase) -> Draft {
        let question = fill_template(
            &self.lex.questions.replace_replacement,
            &[("target", target.to_string())],
        );
        Draft::Clarify(PartialCommand {
            op: OperationKind::Replace,
            cmd_arg: Some(target),
            ctx: Some(ContextKeyword::With),
            ctx_arg: None,
            missing: ComponentKind::CtxArg,
            question,
        })
    }

    fn move_cursor(&mut self, rest: &[String]) -> Result<Draft, Draft> {
        let mut rest = rest;
        if let Some(lead) = self.c.move_leads.iter().find(|l| starts_with(rest, l)) {
            self.trace
                .push(RepairCategory::NaturalUtterance, &rest[..lead.len()]);
            rest = &rest[lead.len()..];
        }
        let guidance = || {
            Draft::Suggest(vec![
                suggestion("MOVE BEFORE <phrase>", "move needs a position"),
                suggestion("MOVE AFTER <phrase>", "move needs a position"),
            ])
        };
        let allowed = [ContextKeyword::Before, ContextKeyword::After];
        let Some((0, len, ctx, synonym)) = self.c.find_context(rest, &allowed) else {
            return Err(guidance());
        };
        if synonym {
            self.note(RepairCategory::SubstituteCtx, &rest[..len]);
        }
        let anchor_tokens = &rest[len..];
        let anchor = match self.classify(anchor_tokens) {
            Arg::Phrase(p) => p,
            Arg::Deictic => {
                let sel = self.selection_or_suggest(format!("MOVE {ctx} <phrase>"))?;
                self.note(RepairCategory::AddDeictic, anchor_tokens);
                sel
            }
            Arg::Empty if self.selection.is_some() => {
                self.note(RepairCategory::MissingArgs, &[]);
                self.selection.cloned().expect("checked")
            }
            _ => return Err(guidance()),
        };
        Ok(Draft::Command(
            Command::move_cursor(ctx, anchor).expect("move phrase"),
        ))
    }
}

fn generic_guidance(reason: &str) -> Vec<Suggestion> {
    [
        "SELECT <phrase>",
        "DELETE <phrase>",
        "CORRECT <phrase>",
        "INSERT <phrase> BEFORE <phrase>",
        "REPLACE <phrase> WITH <phrase>",
        "CHOOSE <number>",
        "UNDO THAT",
    ]
    .into_iter()
    .map(|t| suggestion(t, reason))
    .collect()
}

fn unknown_command_guidance(tokens: &[String]) -> Vec<Suggestion> {
    let reason = format!("{:?} is not a known command", tokens[0]);
    match Phrase::new(&tokens[1..]) {
        Ok(p) => [
            format!("SELECT {p}"),
            format!("DELETE {p}"),
            format!("CORRECT {p}"),
            format!("REPLACE {p} WITH <phrase>"),
            format!("INSERT <phrase> BEFORE {p}"),
        ]
        .into_iter()
        .map(|t| suggestion(t, reason.clone()))
        .collect(),
        Err(_) => generic_guidance(&reason),
    }
}

/// Deterministic, lexicon-driven normalizer. Cheap to clone and share.
#[derive(Debug, Clone)]
pub struct RuleNormalizer {
    lexicon: Arc<Lexicon>,
    compiled: Arc<Compiled>,
    threshold: u32,
}

impl Default for RuleNormalizer {
    fn default() -> Self {
        RuleNormalizer::new(Lexicon::default())
    }
}

impl RuleNormalizer {
    pub fn new(lexicon: Lexicon) -> Self {
        let compiled = Arc::new(Compiled::new(&lexicon));
        RuleNormalizer {
            threshold: lexicon.confidence.threshold,
            lexicon: Arc::new(lexicon),
            compiled,
        }
    }

    /// Overrides the auto-apply threshold from the lexicon.
    pub fn with_threshold(mut self, threshold: u32) -> Self {
        self.threshold = threshold;
        self
    }

    pub fn threshold(&self) -> u32 {
        self.threshold
    }

    pub fn lexicon(&self) -> &Lexicon {
        &self.lexicon
    }

    /// Normalizes one utterance. `_history` is accepted for contract parity
    /// with model backends; the rules do not consult it.
    pub fn normalize(
        &self,
        utterance: &str,
        ctx: &SelectionContext,
        _history: &[String],
    ) -> Result<NormalizationResult, NormalizeError> {
        if utterance.trim().is_empty() {
            return Err(NormalizeError::EmptyUtterance);
        }
        if let Ok(command) = parse_canonical(utterance) {
            return Ok(NormalizationResult::PassThrough { command });
        }
        let mut run = Run {
            lex: &self.lexicon,
            c: &self.compiled,
            selection: ctx.selected.as_ref(),
            trace: RepairTrace::default(),
        };
        let draft = run.run(tokenize(utterance));
        Ok(self.finish(draft, run.trace))
    }

    fn finish(&self, draft: Draft, trace: RepairTrace) -> NormalizationResult {
        match draft {
            Draft::Command(command) => {
                let confidence = confidence(&trace, &self.lexicon.penalties);
                if u32::from(confidence) >= self.threshold {
                    NormalizationResult::Corrected {
                        command,
                        confidence,
                        trace,
                    }
                } else {
                    NormalizationResult::Suggest {
                        suggestions: vec![suggestion(
                            command.to_string(),
                            format!("low confidence ({confidence})"),
                        )],
                    }
                }
            }
            Draft::Clarify(partial) => NormalizationResult::Clarify {
                question: partial.question.clone(),
                partial,
            },
            Draft::Suggest(suggestions) => NormalizationResult::Suggest { suggestions },
        }
    }

    /// Fills the missing component of `partial` with `answer`.
    ///
    /// An answer that starts with a command word is treated as the user
    /// starting over and yields a `Suggest` explaining that.
    pub fn apply_clarification(
        &self,
        partial: &PartialCommand,
        answer: &str,
    ) -> Result<NormalizationResult, NormalizeError> {
        let mut run = Run {
            lex: &self.lexicon,
            c: &self.compiled,
            selection: None,
            trace: RepairTrace::default(),
        };
        let tokens = run.strip_fillers(tokenize(answer));
        if tokens.is_empty() {
            return Err(NormalizeError::EmptyAnswer);
        }
        if self.compiled.operation(&tokens).is_some() {
            return Ok(NormalizationResult::Suggest {
                suggestions: vec![suggestion(
                    answer.trim(),
                    format!(
                        "that sounds like a new command, not an answer to: {}",
                        partial.question
                    ),
                )],
            });
        }
        let command = match run.classify(&tokens) {
            Arg::Phrase(p) => partial.fill(p),
            _ => None,
        };
        let Some(command) = command else {
            return Ok(NormalizationResult::Suggest {
                suggestions: vec![suggestion(
                    partial.question.clone(),
                    "the answer must be a phrase",
                )],
            });
        };
        run.note(RepairCategory::MissingArgs, &tokens);
        Ok(self.finish(Draft::Command(command), run.trace))
    }
}

impl NormalizerBackend for RuleNormalizer {
    fn name(&self) -> &str {
        "rule"
    }

    fn normalize(&self, request: &NormalizeRequest) -> Result<NormalizationResult, NormalizeError> {
        RuleNormalizer::normalize(
            self,
            &request.utterance,
            &request.selection,
            &request.history,
        )
    }

    fn apply_clarification(
        &self,
        partial: &PartialCommand,
        answer: &str,
    ) -> Result<NormalizationResult, NormalizeError> {
        RuleNormalizer::apply_clarification(self, partial, answer)
    }
}

/// Baseline backend that relays the utterance verbatim.
///
/// Canonical input passes through; anything else comes back as a single
/// suggestion holding the raw text.
#[derive(Debug, Clone, Copy, Default)]
pub struct EchoBackend;

impl NormalizerBackend for EchoBackend {
    fn name(&self) -> &str {
        "stub"
    }

    fn normalize(&self, request: &NormalizeRequest) -> Result<NormalizationResult, NormalizeError> {
        if request.utterance.trim().is_empty() {
            return Err(NormalizeError::EmptyUtterance);
        }
        Ok(match parse_canonical(&request.utterance) {
            Ok(command) => NormalizationResult::PassThrough { command },
            Err(e) => NormalizationResult::Suggest {
                suggestions: vec![suggestion(request.utterance.trim(), e.to_string())],
            },
        })
    }

    fn apply_clarification(
        &self,
        _partial: &PartialCommand,
        answer: &str,
    ) -> Result<NormalizationResult, NormalizeError> {
        self.normalize(&NormalizeRequest::new(answer))
    }
}
