//! Phrase vocabulary and the bank of correct commands samples are drawn from.

use std::collections::HashSet;
use std::num::NonZeroU32;

use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::command::{ArgValue, Command, ContextKeyword, OperationKind, Phrase, Relative};
use crate::sim::CorrectionLexicon;

/// Single-word targets. None of these is a command, context, filler,
/// number or noise word, so they survive normalization untouched.
pub const NOUNS: &[&str] = &[
    "apple",
    "meeting",
    "budget",
    "report",
    "garden",
    "window",
    "coffee",
    "pencil",
    "river",
    "planet",
    "ticket",
    "jacket",
    "camera",
    "doctor",
    "teacher",
    "market",
    "station",
    "letter",
    "summer",
    "winter",
    "kitchen",
    "bottle",
    "pocket",
    "engine",
    "forest",
    "island",
    "museum",
    "orange",
    "banana",
    "pasta",
    "salad",
    "butter",
    "cheese",
    "tomato",
    "office",
    "printer",
    "folder",
    "schedule",
    "deadline",
    "invoice",
    "project",
    "manager",
    "contract",
    "village",
    "harbor",
    "lantern",
    "mirror",
    "candle",
    "tonight",
    "yesterday",
    "weekend",
    "morning",
    "evening",
    "monday",
    "friday",
    "blanket",
    "carpet",
    "pillow",
    "guitar",
    "violin",
    "piano",
    "rocket",
    "tunnel",
    "bridge",
    "castle",
    "desert",
    "valley",
    "meadow",
    "canyon",
    "glacier",
];

/// Multi-word targets.
pub const PAIRS: &[&str] = &[
    "apple pie",
    "at home",
    "in the morning",
    "law enforcement",
    "green tea",
    "blue sky",
    "fresh bread",
    "quarterly report",
    "team meeting",
    "late tonight",
    "at noon",
    "on friday",
    "very soon",
    "red car",
    "old friend",
    "ice cream",
    "hot soup",
    "dark chocolate",
    "public library",
    "garden gate",
    "coffee shop",
    "train station",
    "summer camp",
    "birthday party",
    "weekly update",
    "sales figures",
    "project plan",
    "family dinner",
    "city hall",
    "rain jacket",
];

/// Misspellings used as correction targets, with their fixes.
pub const TYPOS: &[(&str, &str)] = &[
    ("freqwuent", "frequent"),
    ("recieve", "receive"),
    ("adress", "address"),
    ("calender", "calendar"),
    ("definately", "definitely"),
    ("seperate", "separate"),
    ("goverment", "government"),
    ("enviroment", "environment"),
    ("occured", "occurred"),
    ("wierd", "weird"),
    ("beleive", "believe"),
    ("tommorow", "tomorrow"),
    ("acheive", "achieve"),
    ("untill", "until"),
    ("begining", "beginning"),
    ("accomodate", "accommodate"),
    ("arguement", "argument"),
    ("basicly", "basically"),
    ("concious", "conscious"),
    ("existance", "existence"),
    ("foriegn", "foreign"),
    ("grammer", "grammar"),
    ("happend", "happened"),
    ("independant", "independent"),
    ("knowlege", "knowledge"),
    ("neccessary", "necessary"),
    ("noticable", "noticeable"),
    ("occassion", "occasion"),
    ("persue", "pursue"),
    ("publically", "publicly"),
    ("recomend", "recommend"),
    ("refered", "referred"),
    ("relevent", "relevant"),
    ("succesful", "successful"),
    ("truely", "truly"),
    ("wich", "which"),
    ("writting", "writing"),
    ("freind", "friend"),
    ("buisness", "business"),
    ("libary", "library"),
    ("meetign", "meeting"),
];

/// Verbs outside the synonym lexicon, used for the out-of-lexicon quota.
pub const UNLISTED_VERBS: &[(OperationKind, &str)] = &[
    (OperationKind::Replace, "transform"),
    (OperationKind::Replace, "alter"),
    (OperationKind::Delete, "eliminate"),
    (OperationKind::Delete, "omit"),
    (OperationKind::Correct, "rectify"),
    (OperationKind::Correct, "amend"),
    (OperationKind::Insert, "append"),
];

const BANK_SEED: u64 = 0x5eed_ba4c;

/// How many bank commands of each phrase-bearing kind.
const SELECT_PHRASES: usize = 38;
const CORRECT_PHRASES: usize = 41;
const DELETE_PHRASES: usize = 26;
const INSERTS: usize = 31;
const REPLACES: usize = 39;
const CHOOSE_MAX: u32 = 9;

/// Structural kinds of bank command, finer than the operation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Shape {
    SelectPhrase,
    SelectRelative,
    Choose,
    DeletePhrase,
    DeleteThat,
    CorrectPhrase,
    CorrectThat,
    InsertBefore,
    InsertAfter,
    Replace,
    Undo,
    Redo,
}

impl Shape {
    pub fn of(command: &Command) -> Option<Shape> {
        use OperationKind as O;
        let deictic = matches!(command.cmd_arg(), Some(ArgValue::Deictic));
        Some(match command.op() {
            O::Select if matches!(command.cmd_arg(), Some(ArgValue::RelativeWord(_))) => {
                Shape::SelectRelative
            }
            O::Select => Shape::SelectPhrase,
            O::Choose => Shape::Choose,
            O::Delete if deictic => Shape::DeleteThat,
            O::Delete => Shape::DeletePhrase,
            O::Correct if deictic => Shape::CorrectThat,
            O::Correct => Shape::CorrectPhrase,
            O::Insert if command.ctx() == Some(ContextKeyword::Before) => Shape::InsertBefore,
            O::Insert => Shape::InsertAfter,
            O::Replace => Shape::Replace,
            O::Undo => Shape::Undo,
            O::Redo => Shape::Redo,
            O::Move => return None,
        })
    }
}

/// All single and multi-word phrases.
pub fn phrase_pool() -> Vec<Phrase> {
    NOUNS
        .iter()
        .chain(PAIRS)
        .map(|p| Phrase::parse(p).expect("vocabulary phrases are valid"))
        .collect()
}

/// Simulator corrections for every typo in the vocabulary.
pub fn typo_corrections() -> CorrectionLexicon {
    let mut lex = CorrectionLexicon::new();
    for (typo, fix) in TYPOS {
        lex.insert(typo, &[*fix]);
    }
    lex
}

/// A random pool phrase different from every phrase in `avoid`.
pub fn random_phrase(rng: &mut impl Rng, avoid: &[&Phrase]) -> Phrase {
    loop {
        let text = if rng.random_bool(0.7) {
            NOUNS.choose(rng)
        } else {
            PAIRS.choose(rng)
        }
        .expect("non-empty vocabulary");
        let p = Phrase::parse(text).expect("vocabulary phrases are valid");
        if !avoid.contains(&&p) {
            return p;
        }
    }
}

/// The fixed set of correct commands. Identical for every seed so that
/// each command recurs across many samples.
#[derive(Debug, Clone)]
pub struct CommandBank {
    commands: Vec<Command>,
}

impl CommandBank {
    pub fn standard() -> CommandBank {
        let mut rng = ChaCha8Rng::seed_from_u64(BANK_SEED);
        let pool = phrase_pool();
        let mut seen = HashSet::new();
        let mut commands = Vec::new();
        let mut push = |c: Command, commands: &mut Vec<Command>| {
            if seen.insert(c.to_string()) {
                commands.push(c);
                true
            } else {
                false
            }
        };

        let mut shuffled = pool.clone();
        shuffled.shuffle(&mut rng);
        for p in shuffled.iter().take(SELECT_PHRASES) {
            push(Command::select(p.clone()), &mut commands);
        }
        push(Command::select_relative(Relative::Previous), &mut commands);
        push(Command::select_relative(Relative::Next), &mut commands);

        for n in 1..=CHOOSE_MAX {
            push(
                Command::choose(NonZeroU32::new(n).expect("n >= 1")),
                &mut commands,
            );
        }

        for (t, _) in TYPOS.iter().take(CORRECT_PHRASES) {
            let p = Phrase::parse(t).expect("typos are valid phrases");
            push(
                Command::on_phrase(OperationKind::Correct, p).expect("correct takes a phrase"),
                &mut commands,
            );
        }
        push(
            Command::deictic(OperationKind::Correct).expect("correct takes THAT"),
            &mut commands,
        );

        shuffled.shuffle(&mut rng);
        for p in shuffled.iter().take(DELETE_PHRASES) {
            push(
                Command::on_phrase(OperationKind::Delete, p.clone())
                    .expect("delete takes a phrase"),
                &mut commands,
            );
        }
        push(
            Command::deictic(OperationKind::Delete).expect("delete takes THAT"),
            &mut commands,
        );

        let mut made = 0;
        while made < INSERTS {
            let text = pool.choose(&mut rng).expect("pool");
            let anchor = random_phrase(&mut rng, &[text]);
            // two in three inserts go before the anchor
            let ctx = if made % 3 == 2 {
                ContextKeyword::After
            } else {
                ContextKeyword::Before
            };
            let c = Command::insert(text.clone(), ctx, anchor).expect("insert takes phrases");
            if push(c, &mut commands) {
                made += 1;
            }
        }

        let mut made = 0;
        while made < REPLACES {
            let target = pool.choose(&mut rng).expect("pool");
            let replacement = random_phrase(&mut rng, &[target]);
            if push(Command::replace(target.clone(), replacement), &mut commands) {
                made += 1;
            }
        }

        push(
            Command::deictic(OperationKind::Undo).expect("undo takes THAT"),
            &mut commands,
        );
        push(
            Command::deictic(OperationKind::Redo).expect("redo takes THAT"),
            &mut commands,
        );
        CommandBank { commands }
    }

    pub fn len(&self) -> usize {
        self.commands.len()
    }

    pub fn is_empty(&self) -> bool {
        self.commands.is_empty()
    }

    pub fn commands(&self) -> &[Command] {
        &self.commands
    }

    /// Uniform pick among commands of one of `shapes`.
    pub fn pick(&self, rng: &mut impl Rng, shapes: &[Shape]) -> &Command {
        let matching: Vec<&Command> = self
            .commands
            .iter()
            .filter(|c| Shape::of(c).is_some_and(|s| shapes.contains(&s)))
            .collect();
        matching.choose(rng).expect("the bank covers every shape")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::command::parse_canonical;
    use crate::lexicon::Lexicon;
    use crate::normalizer::tokenize;

    #[test]
    fn bank_is_stable_and_distinct() {
        let a = CommandBank::standard();
        let b = CommandBank::standard();
        assert_eq!(a.commands(), b.commands());
        let distinct: HashSet<String> = a.commands().iter().map(|c| c.to_string()).collect();
        assert_eq!(distinct.len(), a.len());
        assert!((180..=200).contains(&a.len()), "{}", a.len());
        for c in a.commands() {
            assert_eq!(parse_canonical(&c.to_string()).as_ref(), Ok(c));
        }
    }

    #[test]
    fn every_shape_is_present() {
        let bank = CommandBank::standard();
        let shapes: HashSet<Shape> = bank.commands().iter().filter_map(Shape::of).collect();
        assert_eq!(shapes.len(), 12);
    }

    #[test]
    fn vocabulary_avoids_lexicon_words() {
        let lex = Lexicon::default();
        let mut reserved: HashSet<String> = HashSet::new();
        let mut add = |entries: &[String]| {
            for e in entries {
                reserved.extend(tokenize(e));
            }
        };
        add(&lex.fillers.prefix);
        add(&lex.fillers.suffix);
        add(&lex.fillers.anywhere);
        for syns in lex.commands.values() {
            add(syns);
        }
        add(&lex.context.before);
        add(&lex.context.after);
        add(&lex.context.with);
        add(&lex.context.previous);
        add(&lex.context.next);
        add(&lex.deictic.phrases);
        add(&lex.noise.argument_leads);
        add(&lex.noise.number_leads);
        add(&lex.noise.move_leads);
        // articles and prepositions inside a phrase are harmless
        for harmless in ["the", "of", "in", "at", "on"] {
            reserved.remove(harmless);
        }
        let unlisted: HashSet<&str> = UNLISTED_VERBS.iter().map(|(_, v)| *v).collect();
        let typos = TYPOS.iter().map(|(t, _)| t);
        for text in NOUNS.iter().chain(PAIRS).chain(typos) {
            for w in tokenize(text) {
                assert!(!reserved.contains(&w), "{text:?} uses lexicon word {w:?}");
                assert!(!unlisted.contains(w.as_str()), "{text:?}");
                assert!(OperationKind::from_keyword(&w).is_none(), "{text:?}");
                assert!(crate::command::parse_number_token(&w).is_none(), "{text:?}");
            }
            assert!(Phrase::parse(text).is_ok(), "{text:?}");
        }
    }
}
