//! Fixed-format command grammar.
//!
//! A command is built from up to four components:
//!
//! ```text
//! [cmd] <cmd-arg> [ctx] <ctx-arg>
//! ```
//!
//! Only six of the sixteen component-presence subsets are valid templates.
//! The canonical surface form uses uppercase keywords and lowercase argument
//! words, e.g. `INSERT at home BEFORE tonight`.

use std::fmt;
use std::num::NonZeroU32;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Words that may never appear inside a phrase argument.
pub const CONTEXT_KEYWORDS: [&str; 3] = ["before", "after", "with"];

/// Grammar terminals other than context keywords (`THAT`, `WORD`).
const RESERVED_TERMINALS: [&str; 2] = ["that", "word"];

/// Phrase prefixes that are natural-speech noise, never part of a target.
const NOISE_LEADS: [[&str; 2]; 3] = [["the", "word"], ["the", "words"], ["the", "phrase"]];

const NUMBER_WORDS: [&str; 21] = [
    "zero",
    "one",
    "two",
    "three",
    "four",
    "five",
    "six",
    "seven",
    "eight",
    "nine",
    "ten",
    "eleven",
    "twelve",
    "thirteen",
    "fourteen",
    "fifteen",
    "sixteen",
    "seventeen",
    "eighteen",
    "nineteen",
    "twenty",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum ComponentKind {
    Cmd,
    CmdArg,
    Ctx,
    CtxArg,
}

impl ComponentKind {
    pub const ALL: [ComponentKind; 4] = [
        ComponentKind::Cmd,
        ComponentKind::CmdArg,
        ComponentKind::Ctx,
        ComponentKind::CtxArg,
    ];
}

impl fmt::Display for ComponentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ComponentKind::Cmd => "cmd",
            ComponentKind::CmdArg => "cmd-arg",
            ComponentKind::Ctx => "ctx",
            ComponentKind::CtxArg => "ctx-arg",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum OperationKind {
    Select,
    Choose,
    Delete,
    Insert,
    Replace,
    Correct,
    Undo,
    Redo,
    Move,
}

impl OperationKind {
    pub const ALL: [OperationKind; 9] = [
        OperationKind::Select,
        OperationKind::Choose,
        OperationKind::Delete,
        OperationKind::Insert,
        OperationKind::Replace,
        OperationKind::Correct,
        OperationKind::Undo,
        OperationKind::Redo,
        OperationKind::Move,
    ];

    pub fn keyword(self) -> &'static str {
        match self {
            OperationKind::Select => "SELECT",
            OperationKind::Choose => "CHOOSE",
            OperationKind::Delete => "DELETE",
            OperationKind::Insert => "INSERT",
            OperationKind::Replace => "REPLACE",
            OperationKind::Correct => "CORRECT",
            OperationKind::Undo => "UNDO",
            OperationKind::Redo => "REDO",
            OperationKind::Move => "MOVE",
        }
    }

    /// Case-insensitive keyword lookup.
    pub fn from_keyword(word: &str) -> Option<OperationKind> {
        OperationKind::ALL
            .into_iter()
            .find(|op| op.keyword().eq_ignore_ascii_case(word))
    }

    /// Whether the operation modifies the buffer.
    pub fn is_edit(self) -> bool {
        matches!(
            self,
            OperationKind::Delete
                | OperationKind::Insert
                | OperationKind::Replace
                | OperationKind::Correct
        )
    }
}

impl fmt::Display for OperationKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.keyword())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Relative {
    Previous,
    Next,
}

impl Relative {
    pub fn keyword(self) -> &'static str {
        match self {
            Relative::Previous => "PREVIOUS",
            Relative::Next => "NEXT",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum ContextKeyword {
    Before,
    After,
    With,
}

impl ContextKeyword {
    pub fn keyword(self) -> &'static str {
        match self {
            ContextKeyword::Before => "BEFORE",
            ContextKeyword::After => "AFTER",
            ContextKeyword::With => "WITH",
        }
    }

    pub fn from_keyword(word: &str) -> Option<ContextKeyword> {
        [
            ContextKeyword::Before,
            ContextKeyword::After,
            ContextKeyword::With,
        ]
        .into_iter()
        .find(|c| c.keyword().eq_ignore_ascii_case(word))
    }
}

impl fmt::Display for ContextKeyword {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.keyword())
    }
}

/// Why a word sequence cannot be a phrase argument.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PhraseError {
    #[error("phrase is empty")]
    Empty,
    #[error("word {index} is empty or contains whitespace or '|'")]
    Malformed { index: usize },
    #[error("word {index} ({word:?}) is a context keyword")]
    ContextKeyword { index: usize, word: String },
    #[error("word {index} ({word:?}) is a reserved grammar terminal")]
    Reserved { index: usize, word: String },
    #[error("phrase starts with filler {0:?}")]
    NoiseLead(String),
    #[error("a bare number is not a phrase")]
    BareNumber,
}

/// A non-empty sequence of lowercase argument words.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Phrase(Vec<String>);

impl Phrase {
    pub fn new<I, S>(words: I) -> Result<Phrase, PhraseError>
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        let words: Vec<String> = words
            .into_iter()
            .map(|w| w.as_ref().to_lowercase())
            .collect();
        if words.is_empty() {
            return Err(PhraseError::Empty);
        }
        for lead in NOISE_LEADS {
            if words.len() >= 2 && words[0] == lead[0] && words[1] == lead[1] {
                return Err(PhraseError::NoiseLead(lead.join(" ")));
            }
        }
        for (index, word) in words.iter().enumerate() {
            if word.is_empty() || word.contains(|c: char| c.is_whitespace() || c == '|') {
                return Err(PhraseError::Malformed { index });
            }
            if CONTEXT_KEYWORDS.contains(&word.as_str()) {
                return Err(PhraseError::ContextKeyword {
                    index,
                    word: word.clone(),
                });
            }
            if RESERVED_TERMINALS.contains(&word.as_str()) {
                return Err(PhraseError::Reserved {
                    index,
                    word: word.clone(),
                });
            }
        }
        if words.len() == 1 && words[0].bytes().all(|b| b.is_ascii_digit()) {
            return Err(PhraseError::BareNumber);
        }
        Ok(Phrase(words))
    }

    /// Parses a whitespace-separated phrase.
    pub fn parse(text: &str) -> Result<Phrase, PhraseError> {
        Phrase::new(text.split_whitespace())
    }

    pub fn words(&self) -> &[String] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

impl fmt::Display for Phrase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0.join(" "))
    }
}

impl FromStr for Phrase {
    type Err = PhraseError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Phrase::parse(s)
    }
}

impl Serialize for Phrase {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Phrase {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let text = String::deserialize(deserializer)?;
        Phrase::parse(&text).map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum ArgValue {
    Phrase(Phrase),
    Number(NonZeroU32),
    /// `THAT`, resolved against the current selection by the receiver.
    Deictic,
    RelativeWord(Relative),
}

impl ArgValue {
    pub fn phrase(&self) -> Option<&Phrase> {
        match self {
            ArgValue::Phrase(p) => Some(p),
            _ => None,
        }
    }
}

impl fmt::Display for ArgValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ArgValue::Phrase(p) => p.fmt(f),
            ArgValue::Number(n) => n.fmt(f),
            ArgValue::Deictic => f.write_str("THAT"),
            ArgValue::RelativeWord(r) => write!(f, "{} WORD", r.keyword()),
        }
    }
}

/// The six valid component combinations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TemplateId {
    /// `[cmd]`, e.g. `command mode`.
    CmdOnly,
    /// `<cmd-arg>`, e.g. a bare `<number>`.
    ArgOnly,
    /// `[cmd] <cmd-arg>`, e.g. `select apple`, `undo that`.
    CmdArg,
    /// `[cmd] [ctx]`, e.g. `scroll down`.
    CmdCtx,
    /// `[cmd] [ctx] <ctx-arg>`, e.g. `move before apple`.
    CmdCtxArg,
    /// `[cmd] <cmd-arg> [ctx] <ctx-arg>`, e.g. `insert law before enforcement`.
    Full,
}

impl TemplateId {
    pub const ALL: [TemplateId; 6] = [
        TemplateId::CmdOnly,
        TemplateId::ArgOnly,
        TemplateId::CmdArg,
        TemplateId::CmdCtx,
        TemplateId::CmdCtxArg,
        TemplateId::Full,
    ];

    /// Presence flags in `[cmd, cmd-arg, ctx, ctx-arg]` order.
    pub fn presence(self) -> [bool; 4] {
        match self {
            TemplateId::CmdOnly => [true, false, false, false],
            TemplateId::ArgOnly => [false, true, false, false],
            TemplateId::CmdArg => [true, true, false, false],
            TemplateId::CmdCtx => [true, false, true, false],
            TemplateId::CmdCtxArg => [true, false, true, true],
            TemplateId::Full => [true, true, true, true],
        }
    }

    pub fn from_presence(presence: [bool; 4]) -> Option<TemplateId> {
        TemplateId::ALL
            .into_iter()
            .find(|t| t.presence() == presence)
    }

    pub fn component_count(self) -> usize {
        self.presence().iter().filter(|p| **p).count()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CommandError {
    #[error("{op} does not accept this combination of components")]
    InvalidCombination { op: OperationKind },
    #[error("{op} does not accept {value} as its {component}")]
    InvalidArgument {
        op: OperationKind,
        component: ComponentKind,
        value: String,
    },
}

/// A validated fixed-format command.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Command {
    op: OperationKind,
    cmd_arg: Option<ArgValue>,
    ctx: Option<ContextKeyword>,
    ctx_arg: Option<ArgValue>,
}

impl Command {
    /// Validating constructor; the only way to build a `Command`.
    pub fn new(
        op: OperationKind,
        cmd_arg: Option<ArgValue>,
        ctx: Option<ContextKeyword>,
        ctx_arg: Option<ArgValue>,
    ) -> Result<Command, CommandError> {
        use ArgValue as A;
        use ContextKeyword as C;
        use OperationKind as O;

        let bad_arg = |component, value: &ArgValue| CommandError::InvalidArgument {
            op,
            component,
            value: value.to_string(),
        };
        let combo = CommandError::InvalidCombination { op };

        match (op, &cmd_arg, ctx, &ctx_arg) {
            (O::Select, Some(arg), None, None) => match arg {
                A::Phrase(_) | A::RelativeWord(_) => {}
                other => return Err(bad_arg(ComponentKind::CmdArg, other)),
            },
            (O::Choose, Some(arg), None, None) => {
                if !matches!(arg, A::Number(_)) {
                    return Err(bad_arg(ComponentKind::CmdArg, arg));
                }
            }
            (O::Delete | O::Correct, Some(arg), None, None) => {
                if !matches!(arg, A::Phrase(_) | A::Deictic) {
                    return Err(bad_arg(ComponentKind::CmdArg, arg));
                }
            }
            (O::Undo | O::Redo, Some(arg), None, None) => {
                if !matches!(arg, A::Deictic) {
                    return Err(bad_arg(ComponentKind::CmdArg, arg));
                }
            }
            (O::Insert, Some(arg), Some(C::Before | C::After), Some(anchor))
            | (O::Replace, Some(arg), Some(C::With), Some(anchor)) => {
                if !matches!(arg, A::Phrase(_)) {
                    return Err(bad_arg(ComponentKind::CmdArg, arg));
                }
                if !matches!(anchor, A::Phrase(_)) {
                    return Err(bad_arg(ComponentKind::CtxArg, anchor));
                }
            }
            (O::Move, None, Some(C::Before | C::After), Some(anchor)) => {
                if !matches!(anchor, A::Phrase(_)) {
                    return Err(bad_arg(ComponentKind::CtxArg, anchor));
                }
            }
            _ => return Err(combo),
        }
        Ok(Command {
            op,
            cmd_arg,
            ctx,
            ctx_arg,
        })
    }

    pub fn select(target: Phrase) -> Command {
        Command::new(
            OperationKind::Select,
            Some(ArgValue::Phrase(target)),
            None,
            None,
        )
        .expect("select phrase is valid")
    }

    pub fn select_relative(rel: Relative) -> Command {
        Command::new(
            OperationKind::Select,
            Some(ArgValue::RelativeWord(rel)),
            None,
            None,
        )
        .expect("select relative is valid")
    }

    pub fn choose(n: NonZeroU32) -> Command {
        Command::new(OperationKind::Choose, Some(ArgValue::Number(n)), None, None)
            .expect("choose number is valid")
    }

    /// `DELETE`, `CORRECT`, `UNDO` or `REDO` applied to the current selection.
    pub fn deictic(op: OperationKind) -> Result<Command, CommandError> {
        Command::new(op, Some(ArgValue::Deictic), None, None)
    }

    pub fn on_phrase(op: OperationKind, target: Phrase) -> Result<Command, CommandError> {
        Command::new(op, Some(ArgValue::Phrase(target)), None, None)
    }

    pub fn insert(
        text: Phrase,
        position: ContextKeyword,
        anchor: Phrase,
    ) -> Result<Command, CommandError> {
        Command::new(
            OperationKind::Insert,
            Some(ArgValue::Phrase(text)),
            Some(position),
            Some(ArgValue::Phrase(anchor)),
        )
    }

    pub fn replace(target: Phrase, replacement: Phrase) -> Command {
        Command::new(
            OperationKind::Replace,
            Some(ArgValue::Phrase(target)),
            Some(ContextKeyword::With),
            Some(ArgValue::Phrase(replacement)),
        )
        .expect("replace with phrases is valid")
    }

    pub fn move_cursor(position: ContextKeyword, anchor: Phrase) -> Result<Command, CommandError> {
        Command::new(
            OperationKind::Move,
            None,
            Some(position),
            Some(ArgValue::Phrase(anchor)),
        )
    }

    pub fn op(&self) -> OperationKind {
        self.op
    }

    pub fn cmd_arg(&self) -> Option<&ArgValue> {
        self.cmd_arg.as_ref()
    }

    pub fn ctx(&self) -> Option<ContextKeyword> {
        self.ctx
    }

    pub fn ctx_arg(&self) -> Option<&ArgValue> {
        self.ctx_arg.as_ref()
    }

    pub fn template(&self) -> TemplateId {
        TemplateId::from_presence([
            true,
            self.cmd_arg.is_some(),
            self.ctx.is_some(),
            self.ctx_arg.is_some(),
        ])
        .expect("validated commands always match a template")
    }

    /// Every phrase word carried by the command, in order.
    pub fn argument_words(&self) -> impl Iterator<Item = &str> {
        self.cmd_arg
            .iter()
            .chain(self.ctx_arg.iter())
            .filter_map(ArgValue::phrase)
            .flat_map(|p| p.words().iter().map(String::as_str))
    }

    pub fn to_canonical(&self) -> String {
        self.to_string()
    }
}

/// Unique template of a valid command.
pub fn template_of(cmd: &Command) -> TemplateId {
    cmd.template()
}

impl fmt::Display for Command {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.op.keyword())?;
        if let Some(arg) = &self.cmd_arg {
            write!(f, " {arg}")?;
        }
        if let Some(ctx) = self.ctx {
            write!(f, " {ctx}")?;
        }
        if let Some(arg) = &self.ctx_arg {
            write!(f, " {arg}")?;
        }
        Ok(())
    }
}

impl Serialize for Command {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Command {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let text = String::deserialize(deserializer)?;
        parse_canonical(&text).map_err(serde::de::Error::custom)
    }
}

/// Parse failure; positions are zero-based token indices.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ParseError {
    #[error("empty command")]
    Empty,
    #[error("unknown keyword {token:?} at token {position}")]
    UnknownKeyword { position: usize, token: String },
    #[error("missing {component} at token {position}")]
    MissingComponent {
        position: usize,
        component: ComponentKind,
    },
    #[error("unexpected {token:?} at token {position}")]
    ExtraTokens { position: usize, token: String },
    #[error("invalid number {token:?} at token {position}")]
    InvalidNumber { position: usize, token: String },
    #[error("{token:?} is not a valid argument at token {position}")]
    InvalidArgument { position: usize, token: String },
}

impl ParseError {
    pub fn position(&self) -> usize {
        match self {
            ParseError::Empty => 0,
            ParseError::UnknownKeyword { position, .. }
            | ParseError::MissingComponent { position, .. }
            | ParseError::ExtraTokens { position, .. }
            | ParseError::InvalidNumber { position, .. }
            | ParseError::InvalidArgument { position, .. } => *position,
        }
    }
}

/// Parses a number token: digits or an English number word up to twenty.
/// Returns `Some(0)` for zero so callers can report it as invalid.
pub fn parse_number_token(token: &str) -> Option<u32> {
    let lower = token.to_ascii_lowercase();
    if !lower.is_empty() && lower.bytes().all(|b| b.is_ascii_digit()) {
        return lower.parse().ok();
    }
    NUMBER_WORDS
        .iter()
        .position(|w| *w == lower)
        .map(|i| i as u32)
}

fn phrase_at(
    tokens: &[&str],
    offset: usize,
    component: ComponentKind,
) -> Result<Phrase, ParseError> {
    if tokens.is_empty() {
        return Err(ParseError::MissingComponent {
            position: offset,
            component,
        });
    }
    Phrase::new(tokens).map_err(|e| match e {
        PhraseError::Empty => ParseError::MissingComponent {
            position: offset,
            component,
        },
        PhraseError::NoiseLead(_) => ParseError::ExtraTokens {
            position: offset,
            token: tokens[0].to_string(),
        },
        PhraseError::ContextKeyword { index, .. } => ParseError::ExtraTokens {
            position: offset + index,
            token: tokens[index].to_string(),
        },
        PhraseError::Reserved { index, .. } | PhraseError::Malformed { index } => {
            ParseError::InvalidArgument {
                position: offset + index,
                token: tokens[index].to_string(),
            }
        }
        PhraseError::BareNumber => ParseError::InvalidArgument {
            position: offset,
            token: tokens[0].to_string(),
        },
    })
}

fn expect_end(tokens: &[&str], position: usize) -> Result<(), ParseError> {
    match tokens.get(position) {
        Some(tok) => Err(ParseError::ExtraTokens {
            position,
            token: tok.to_string(),
        }),
        None => Ok(()),
    }
}

fn is_word(token: &str, word: &str) -> bool {
    token.eq_ignore_ascii_case(word)
}

/// Parses text that matches a canonical template exactly.
///
/// Keywords match case-insensitively; argument words are lowercased.
pub fn parse_canonical(text: &str) -> Result<Command, ParseError> {
    let tokens: Vec<&str> = text.split_whitespace().collect();
    parse_tokens(&tokens)
}

pub fn parse_tokens(tokens: &[&str]) -> Result<Command, ParseError> {
    use OperationKind as O;

    let first = *tokens.first().ok_or(ParseError::Empty)?;
    let op = O::from_keyword(first).ok_or_else(|| ParseError::UnknownKeyword {
        position: 0,
        token: first.to_string(),
    })?;
    let rest = &tokens[1..];
    let missing = |position, component| ParseError::MissingComponent {
        position,
        component,
    };

    let cmd = match op {
        O::Select => {
            if rest.len() == 2 && is_word(rest[1], "word") {
                let rel = if is_word(rest[0], "previous") {
                    Some(Relative::Previous)
                } else if is_word(rest[0], "next") {
                    Some(Relative::Next)
                } else {
                    None
                };
                if let Some(rel) = rel {
                    return Ok(Command::select_relative(rel));
                }
            }
            Command::select(phrase_at(rest, 1, ComponentKind::CmdArg)?)
        }
        O::Choose => {
            let tok = *rest.first().ok_or(missing(1, ComponentKind::CmdArg))?;
            let n = parse_number_token(tok)
                .and_then(NonZeroU32::new)
                .ok_or_else(|| ParseError::InvalidNumber {
                    position: 1,
                    token: tok.to_string(),
                })?;
            expect_end(tokens, 2)?;
            Command::choose(n)
        }
        O::Delete | O::Correct => {
            if rest.len() == 1 && is_word(rest[0], "that") {
                Command::deictic(op).expect("deictic delete/correct")
            } else {
                Command::on_phrase(op, phrase_at(rest, 1, ComponentKind::CmdArg)?)
                    .expect("phrase delete/correct")
            }
        }
        O::Undo | O::Redo => {
            let tok = *rest.first().ok_or(missing(1, ComponentKind::CmdArg))?;
            if !is_word(tok, "that") {
                return Err(ParseError::InvalidArgument {
                    position: 1,
                    token: tok.to_string(),
                });
            }
            expect_end(tokens, 2)?;
            Command::deictic(op).expect("deictic undo/redo")
        }
        O::Insert | O::Replace => {
            let allowed: &[ContextKeyword] = if op == O::Insert {
                &[ContextKeyword::Before, ContextKeyword::After]
            } else {
                &[ContextKeyword::With]
            };
            let split = rest.iter().position(|t| {
                ContextKeyword::from_keyword(t).is_some_and(|c| allowed.contains(&c))
            });
            let Some(split) = split else {
                if rest.is_empty() {
                    return Err(missing(1, ComponentKind::CmdArg));
                }
                // a context keyword of the wrong kind shows up as an extra token
                if let Some(i) = rest
                    .iter()
                    .position(|t| ContextKeyword::from_keyword(t).is_some())
                {
                    return Err(ParseError::ExtraTokens {
                        position: 1 + i,
                        token: rest[i].to_string(),
                    });
                }
                return Err(missing(tokens.len(), ComponentKind::Ctx));
            };
            let ctx = ContextKeyword::from_keyword(rest[split]).expect("split on keyword");
            if split == 0 {
                return Err(missing(1, ComponentKind::CmdArg));
            }
            let arg = phrase_at(&rest[..split], 1, ComponentKind::CmdArg)?;
            let anchor = phrase_at(&rest[split + 1..], split + 2, ComponentKind::CtxArg)?;
            Command::new(
                op,
                Some(ArgValue::Phrase(arg)),
                Some(ctx),
                Some(ArgValue::Phrase(anchor)),
            )
            .expect("insert/replace with valid phrases")
        }
        O::Move => {
            let tok = *rest.first().ok_or(missing(1, ComponentKind::Ctx))?;
            let ctx = match ContextKeyword::from_keyword(tok) {
                Some(c @ (ContextKeyword::Before | ContextKeyword::After)) => c,
                _ => {
                    return Err(ParseError::ExtraTokens {
                        position: 1,
                        token: tok.to_string(),
                    })
                }
            };
            let anchor = phrase_at(&rest[1..], 2, ComponentKind::CtxArg)?;
            Command::move_cursor(ctx, anchor).expect("move with phrase anchor")
        }
    };
    Ok(cmd)
}

/// Canonical string form: uppercase keywords, lowercase argument words.
pub fn serialize_canonical(cmd: &Command) -> String {
    cmd.to_string()
}

impl FromStr for Command {
    type Err = ParseError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        parse_canonical(s)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn phrase(s: &str) -> Phrase {
        Phrase::parse(s).unwrap()
    }

    #[test]
    fn parses_select_phrase() {
        let cmd = parse_canonical("select apple").unwrap();
        assert_eq!(cmd, Command::select(phrase("apple")));
        assert_eq!(cmd.template(), TemplateId::CmdArg);
    }

    #[test]
    fn parses_insert_four_components() {
        let cmd = parse_canonical("insert at home before tonight").unwrap();
        assert_eq!(
            cmd,
            Command::insert(phrase("at home"), ContextKeyword::Before, phrase("tonight")).unwrap()
        );
        assert_eq!(cmd.to_string(), "INSERT at home BEFORE tonight");
        assert_eq!(template_of(&cmd), TemplateId::Full);
    }

    #[test]
    fn choose_zero_is_invalid_number() {
        assert_eq!(
            parse_canonical("choose zero"),
            Err(ParseError::InvalidNumber {
                position: 1,
                token: "zero".into()
            })
        );
        assert!(matches!(
            parse_canonical("choose 0"),
            Err(ParseError::InvalidNumber { position: 1, .. })
        ));
    }

    #[test]
    fn natural_filler_is_extra_tokens() {
        assert_eq!(
            parse_canonical("select the word apple"),
            Err(ParseError::ExtraTokens {
                position: 1,
                token: "the".into()
            })
        );
    }

    #[test]
    fn serializes_relative_and_correct() {
        assert_eq!(
            Command::select_relative(Relative::Next).to_string(),
            "SELECT NEXT WORD"
        );
        assert_eq!(
            Command::on_phrase(OperationKind::Correct, phrase("meeting"))
                .unwrap()
                .to_string(),
            "CORRECT meeting"
        );
        assert_eq!(
            parse_canonical("SELECT NEXT WORD").unwrap(),
            Command::select_relative(Relative::Next)
        );
    }

    #[test]
    fn keywords_are_case_insensitive() {
        let a = parse_canonical("Replace Internet WITH internal").unwrap();
        assert_eq!(a.to_string(), "REPLACE internet WITH internal");
    }

    #[test]
    fn undo_redo_are_two_component_deictic() {
        let undo = parse_canonical("undo that").unwrap();
        assert_eq!(undo.template(), TemplateId::CmdArg);
        assert_eq!(undo.cmd_arg(), Some(&ArgValue::Deictic));
        assert_eq!(undo.to_string(), "UNDO THAT");
        assert!(matches!(
            parse_canonical("undo"),
            Err(ParseError::MissingComponent {
                position: 1,
                component: ComponentKind::CmdArg
            })
        ));
    }

    #[test]
    fn error_positions() {
        assert_eq!(
            parse_canonical("remove apple"),
            Err(ParseError::UnknownKeyword {
                position: 0,
                token: "remove".into()
            })
        );
        assert!(matches!(
            parse_canonical("insert apple before"),
            Err(ParseError::MissingComponent {
                position: 3,
                component: ComponentKind::CtxArg
            })
        ));
        assert!(matches!(
            parse_canonical("insert apple"),
            Err(ParseError::MissingComponent {
                position: 2,
                component: ComponentKind::Ctx
            })
        ));
        assert!(matches!(
            parse_canonical("replace apple to orange"),
            Err(ParseError::MissingComponent {
                component: ComponentKind::Ctx,
                ..
            })
        ));
        assert!(matches!(
            parse_canonical("delete apple before pie"),
            Err(ParseError::ExtraTokens { position: 2, .. })
        ));
        assert!(matches!(
            parse_canonical("choose 3 please"),
            Err(ParseError::ExtraTokens { position: 2, .. })
        ));
        assert!(matches!(
            parse_canonical("insert x before that"),
            Err(ParseError::InvalidArgument { position: 3, .. })
        ));
        assert!(matches!(
            parse_canonical("select 3"),
            Err(ParseError::InvalidArgument { position: 1, .. })
        ));
        assert_eq!(parse_canonical("   "), Err(ParseError::Empty));
    }

    #[test]
    fn constructor_rejects_invalid_combinations() {
        use OperationKind as O;
        assert!(Command::new(O::Insert, Some(ArgValue::Phrase(phrase("a"))), None, None).is_err());
        assert!(Command::new(O::Select, Some(ArgValue::Deictic), None, None).is_err());
        assert!(Command::new(O::Undo, Some(ArgValue::Phrase(phrase("a"))), None, None).is_err());
        assert!(Command::new(
            O::Replace,
            Some(ArgValue::Phrase(phrase("a"))),
            Some(ContextKeyword::Before),
            Some(ArgValue::Phrase(phrase("b")))
        )
        .is_err());
        assert!(Command::new(O::Choose, None, None, None).is_err());
    }

    #[test]
    fn phrase_rules() {
        assert!(Phrase::parse("apple pie").is_ok());
        assert_eq!(Phrase::parse(""), Err(PhraseError::Empty));
        assert!(matches!(
            Phrase::parse("bread with butter"),
            Err(PhraseError::ContextKeyword { index: 1, .. })
        ));
        assert!(matches!(
            Phrase::parse("that"),
            Err(PhraseError::Reserved { .. })
        ));
        assert_eq!(Phrase::parse("42"), Err(PhraseError::BareNumber));
        assert!(Phrase::parse("chapter 42").is_ok());
        assert_eq!(Phrase::parse("Apple").unwrap().words(), ["apple"]);
    }

    #[test]
    fn exactly_six_of_sixteen_presence_subsets_are_valid() {
        let mut valid = 0;
        for mask in 0u8..16 {
            let presence = [mask & 1 != 0, mask & 2 != 0, mask & 4 != 0, mask & 8 != 0];
            if let Some(t) = TemplateId::from_presence(presence) {
                assert_eq!(t.presence(), presence);
                valid += 1;
            }
        }
        assert_eq!(valid, 6);
    }

    #[test]
    fn number_words() {
        assert_eq!(parse_number_token("three"), Some(3));
        assert_eq!(parse_number_token("12"), Some(12));
        assert_eq!(parse_number_token("zero"), Some(0));
        assert_eq!(parse_number_token("apple"), None);
        assert_eq!(
            parse_canonical("choose three").unwrap().to_string(),
            "CHOOSE 3"
        );
    }
}
