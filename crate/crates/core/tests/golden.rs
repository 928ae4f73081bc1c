//! Golden repair and dataset examples.

mod common;

use common::{DATASET_ROWS, REPAIR_ROWS, REPAIR_TABLE_ROWS};
use vuishim::dataset::decode_input;
use vuishim::normalizer::{NormalizationResult, RuleNormalizer, SelectionContext};

fn normalize(utterance: &str, selection: &str) -> NormalizationResult {
    RuleNormalizer::default()
        .normalize(utterance, &SelectionContext::from_text(selection), &[])
        .expect("non-empty utterance")
}

#[test]
fn every_repair_row_normalizes_to_its_correct_form() {
    let mut rows = std::collections::BTreeSet::new();
    for row in &REPAIR_ROWS {
        let (category, utterance, expected) = (&row.category, row.utterance, row.expected);
        rows.insert(row.row);
        let result = normalize(utterance, row.selection);
        let NormalizationResult::Corrected { command, trace, .. } = &result else {
            panic!("{utterance:?} gave {result:?}");
        };
        assert_eq!(command.to_string(), *expected, "{utterance:?}");
        assert!(
            trace.categories().contains(category),
            "{utterance:?} should be tagged {category}, got {:?}",
            trace.categories()
        );
    }
    assert_eq!(rows.len(), REPAIR_TABLE_ROWS);
}

#[test]
fn dataset_rows_reproduce_expected_outputs() {
    let n = RuleNormalizer::default();
    for (input, expected) in DATASET_ROWS {
        let row = decode_input(input).unwrap();
        let first = normalize(&row.utterance, row.selection.as_deref().unwrap_or(""));
        let got = match (&first, &row.clarification) {
            (NormalizationResult::Clarify { question, partial }, Some(c)) => {
                assert_eq!(question, &c.question, "{input:?}");
                n.apply_clarification(partial, &c.answer).unwrap().render()
            }
            _ => first.render(),
        };
        assert_eq!(got, expected, "{input:?}");
    }
}

#[test]
fn unlisted_synonym_is_not_guessed() {
    assert!(matches!(
        normalize("transform work", ""),
        NormalizationResult::Suggest { .. }
    ));
}

#[test]
fn bare_insert_without_selection_gets_guidance() {
    let NormalizationResult::Suggest { suggestions } = normalize("Insert the word Apple", "")
    else {
        panic!("expected suggestions");
    };
    assert!(suggestions
        .iter()
        .any(|s| s.text == "INSERT apple BEFORE <phrase>"));
}
