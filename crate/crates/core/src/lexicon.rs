//! Normalizer vocabulary: fillers, synonyms, deictic phrases, penalties and
//! clarification templates, loaded from TOML.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::command::{ContextKeyword, OperationKind, Relative};

/// The lexicon compiled into the binary.
pub const DEFAULT_LEXICON_TOML: &str = include_str!("../data/lexicon.toml");

#[derive(Debug, Error)]
pub enum LexiconError {
    #[error("cannot read lexicon {path}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("invalid lexicon: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("unknown operation {0:?} in [commands]")]
    UnknownOperation(String),
    #[error("empty entry in [{0}]")]
    EmptyEntry(&'static str),
    #[error("confidence threshold {0} is above 100")]
    Threshold(u32),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Fillers {
    pub prefix: Vec<String>,
    pub suffix: Vec<String>,
    pub anywhere: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ContextSynonyms {
    pub before: Vec<String>,
    pub after: Vec<String>,
    pub with: Vec<String>,
    pub previous: Vec<String>,
    pub next: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Deictic {
    pub phrases: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Noise {
    pub argument_leads: Vec<String>,
    pub number_leads: Vec<String>,
    pub move_leads: Vec<String>,
}

/// Confidence deduction per repair category, applied once per category.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Penalties {
    pub natural_utterance: u32,
    pub swap_cmd: u32,
    pub substitute_cmd: u32,
    pub substitute_ctx: u32,
    pub ignore_deictic: u32,
    pub add_deictic: u32,
    pub substitute_template: u32,
    pub missing_args: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Confidence {
    pub threshold: u32,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Questions {
    pub insert_text: String,
    pub insert_anchor: String,
    pub replace_target: String,
    pub replace_replacement: String,
    pub select_target: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Lexicon {
    pub fillers: Fillers,
    /// Keyed by lowercase operation keyword.
    pub commands: BTreeMap<String, Vec<String>>,
    pub context: ContextSynonyms,
    pub deictic: Deictic,
    pub noise: Noise,
    pub penalties: Penalties,
    pub confidence: Confidence,
    pub questions: Questions,
}

impl Default for Lexicon {
    fn default() -> Self {
        Lexicon::from_toml_str(DEFAULT_LEXICON_TOML).expect("bundled lexicon is valid")
    }
}

impl Lexicon {
    pub fn from_toml_str(text: &str) -> Result<Lexicon, LexiconError> {
        let lex: Lexicon = toml::from_str(text)?;
        lex.validate()?;
        Ok(lex)
    }

    pub fn from_path(path: &Path) -> Result<Lexicon, LexiconError> {
        let text = std::fs::read_to_string(path).map_err(|source| LexiconError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Lexicon::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("lexicon serializes")
    }

    fn validate(&self) -> Result<(), LexiconError> {
        for key in self.commands.keys() {
            if OperationKind::from_keyword(key).is_none() {
                return Err(LexiconError::UnknownOperation(key.clone()));
            }
        }
        let lists: [(&'static str, &[String]); 4] = [
            ("fillers", &self.fillers.prefix),
            ("fillers", &self.fillers.suffix),
            ("deictic", &self.deictic.phrases),
            ("noise", &self.noise.argument_leads),
        ];
        for (section, list) in lists {
            if list.iter().any(|e| e.split_whitespace().next().is_none()) {
                return Err(LexiconError::EmptyEntry(section));
            }
        }
        if self
            .commands
            .values()
            .flatten()
            .any(|e| e.trim().is_empty())
        {
            return Err(LexiconError::EmptyEntry("commands"));
        }
        if self.confidence.threshold > 100 {
            return Err(LexiconError::Threshold(self.confidence.threshold));
        }
        Ok(())
    }

    /// Synonyms registered for `op`, excluding its canonical keyword.
    pub fn command_synonyms(&self, op: OperationKind) -> &[String] {
        self.commands
            .get(&op.keyword().to_ascii_lowercase())
            .map(Vec::as_slice)
            .unwrap_or(&[])
    }

    pub fn context_synonyms(&self, ctx: ContextKeyword) -> &[String] {
        match ctx {
            ContextKeyword::Before => &self.context.before,
            ContextKeyword::After => &self.context.after,
            ContextKeyword::With => &self.context.with,
        }
    }

    pub fn relative_synonyms(&self, rel: Relative) -> &[String] {
        match rel {
            Relative::Previous => &self.context.previous,
            Relative::Next => &self.context.next,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bundled_lexicon_loads() {
        let lex = Lexicon::default();
        assert_eq!(lex.confidence.threshold, 70);
        assert_eq!(lex.penalties.substitute_template, 15);
        assert!(lex
            .command_synonyms(OperationKind::Correct)
            .contains(&"fix".to_string()));
        assert!(!lex.commands.values().flatten().any(|s| s == "transform"));
    }

    #[test]
    fn toml_round_trip() {
        let lex = Lexicon::default();
        assert_eq!(Lexicon::from_toml_str(&lex.to_toml_string()).unwrap(), lex);
    }

    #[test]
    fn rejects_unknown_operation() {
        let text = DEFAULT_LEXICON_TOML.replace("move = [", "teleport = [");
        assert!(matches!(
            Lexicon::from_toml_str(&text),
            Err(LexiconError::UnknownOperation(op)) if op == "teleport"
        ));
    }
}
