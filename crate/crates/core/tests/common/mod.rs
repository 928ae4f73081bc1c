//! Fixtures shared by the integration test targets.
#![allow(dead_code)]

pub mod oracle;

use vuishim::normalizer::RepairCategory;

pub struct RepairRow {
    /// Row of the repair-category table (1-based); slash variants share a row.
    pub row: usize,
    pub category: RepairCategory,
    pub utterance: &'static str,
    pub selection: &'static str,
    pub expected: &'static str,
}

const fn r(
    row: usize,
    category: RepairCategory,
    utterance: &'static str,
    selection: &'static str,
    expected: &'static str,
) -> RepairRow {
    RepairRow {
        row,
        category,
        utterance,
        selection,
        expected,
    }
}

use RepairCategory as C;

/// Every incorrect → correct pair of the repair-category table, instantiated
/// with concrete phrases. Deictic and missing-argument rows carry a selection.
pub const REPAIR_ROWS: [RepairRow; 22] = [
    r(1, C::SwapCmd, "select 3", "", "CHOOSE 3"),
    r(2, C::SwapCmd, "choose apple", "", "SELECT apple"),
    r(
        3,
        C::SubstituteCmd,
        "add at home before tonight",
        "",
        "INSERT at home BEFORE tonight",
    ),
    r(4, C::SubstituteCmd, "fix meeting", "", "CORRECT meeting"),
    r(5, C::SubstituteCmd, "remove apple", "", "DELETE apple"),
    r(
        6,
        C::SubstituteCtx,
        "select left word",
        "apple",
        "SELECT PREVIOUS WORD",
    ),
    r(
        6,
        C::SubstituteCtx,
        "select word before",
        "apple",
        "SELECT PREVIOUS WORD",
    ),
    r(
        7,
        C::SubstituteCtx,
        "select right word",
        "apple",
        "SELECT NEXT WORD",
    ),
    r(
        7,
        C::SubstituteCtx,
        "select word after",
        "apple",
        "SELECT NEXT WORD",
    ),
    r(
        8,
        C::SubstituteCtx,
        "replace apple to orange",
        "",
        "REPLACE apple WITH orange",
    ),
    r(
        8,
        C::SubstituteCtx,
        "replace apple using orange",
        "",
        "REPLACE apple WITH orange",
    ),
    r(
        9,
        C::SubstituteTemplate,
        "insert apple",
        "pie",
        "INSERT apple BEFORE pie",
    ),
    r(
        10,
        C::SubstituteTemplate,
        "delete apple before pie",
        "",
        "DELETE apple",
    ),
    r(11, C::IgnoreDeictic, "delete", "apple", "DELETE THAT"),
    r(12, C::IgnoreDeictic, "undo", "", "UNDO THAT"),
    r(12, C::IgnoreDeictic, "redo", "", "REDO THAT"),
    r(
        13,
        C::AddDeictic,
        "insert apple before that",
        "pie",
        "INSERT apple BEFORE pie",
    ),
    r(
        14,
        C::AddDeictic,
        "replace that with orange",
        "apple",
        "REPLACE apple WITH orange",
    ),
    r(
        15,
        C::MissingArgs,
        "insert apple before",
        "pie",
        "INSERT apple BEFORE pie",
    ),
    r(
        16,
        C::MissingArgs,
        "replace with orange",
        "apple",
        "REPLACE apple WITH orange",
    ),
    r(17, C::NaturalUtterance, "choose number 3", "", "CHOOSE 3"),
    r(
        18,
        C::NaturalUtterance,
        "correct the selected word",
        "meeting",
        "CORRECT THAT",
    ),
];

pub const REPAIR_TABLE_ROWS: usize = 18;

/// Dataset sample table: (input line, expected output).
pub const DATASET_ROWS: [(&str, &str); 7] = [
    ("select previous word | selection: apple", "SELECT PREVIOUS WORD"),
    ("can you please select the next word | selection: apple", "SELECT NEXT WORD"),
    ("choose the word meeting | selection:", "SELECT meeting"),
    ("fix meeting | selection:", "CORRECT meeting"),
    ("please add at home before that | selection: tonight", "INSERT at home BEFORE tonight"),
    ("insert before apple pie | selection:", "ASK: What should I insert before apple pie?"),
    (
        "insert before apple pie | selection: | CLARIFICATION QUESTION: What should I insert before apple pie? | CLARIFICATION: in the morning",
        "INSERT in the morning BEFORE apple pie",
    ),
];

/// Disambiguation walkthrough: insert "law" before the one "enforcement"
/// that lacks it, among distractor copies that already have it.
pub const WALKTHROUGH_START: &str =
    "the law enforcement has responsibility and the enforcement has responsibility and the law enforcement has responsibility";
pub const WALKTHROUGH_TARGET: &str =
    "the law enforcement has responsibility and the law enforcement has responsibility and the law enforcement has responsibility";
pub const WALKTHROUGH_STEPS: [&str; 2] = ["INSERT law BEFORE enforcement", "CHOOSE 2"];
