//! Acceptance run: one PASS/FAIL line per criterion, nonzero exit on any FAIL.

mod common;

use std::collections::BTreeSet;
use std::time::{Duration, Instant};

use common::oracle::{check_stream, random_targeted_command, random_words, splice_oracle, Stream};
use common::{
    DATASET_ROWS, REPAIR_ROWS, REPAIR_TABLE_ROWS, WALKTHROUGH_START, WALKTHROUGH_STEPS,
    WALKTHROUGH_TARGET,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use vuishim::command::OperationKind;
use vuishim::dataset::{self, decode_input, DistributionSpec, ErrorCategory, Split, SplitStats};
use vuishim::eval::{self, ReplayConfig};
use vuishim::lexicon::Lexicon;
use vuishim::normalizer::{NormalizationResult, RuleNormalizer, SelectionContext};
use vuishim::sim::{CorrectionLexicon, Outcome, SimState};

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: impl Into<String>) -> Verdict {
    Verdict {
        pass,
        detail: detail.into(),
    }
}

fn normalize(n: &RuleNormalizer, utterance: &str, selection: &str) -> NormalizationResult {
    n.normalize(utterance, &SelectionContext::from_text(selection), &[])
        .expect("non-empty utterance")
}

fn repair_table() -> Verdict {
    let n = RuleNormalizer::default();
    let mut rows_ok: BTreeSet<usize> = (1..=REPAIR_TABLE_ROWS).collect();
    let mut wrong = Vec::new();
    for row in &REPAIR_ROWS {
        let got = match normalize(&n, row.utterance, row.selection) {
            NormalizationResult::Corrected { command, .. } => command.to_string(),
            other => format!("{other:?}"),
        };
        if got != row.expected {
            rows_ok.remove(&row.row);
            wrong.push(format!("{:?} -> {got}", row.utterance));
        }
    }
    verdict(
        wrong.is_empty(),
        format!(
            "{}/{} rows ({} incorrect/correct pairs){}",
            rows_ok.len(),
            REPAIR_TABLE_ROWS,
            REPAIR_ROWS.len(),
            if wrong.is_empty() {
                String::new()
            } else {
                format!("; wrong: {}", wrong.join(", "))
            }
        ),
    )
}

fn sample_table() -> Verdict {
    let n = RuleNormalizer::default();
    let mut ok = 0;
    let mut wrong = Vec::new();
    for (input, expected) in DATASET_ROWS {
        let row = decode_input(input).unwrap();
        let first = normalize(&n, &row.utterance, row.selection.as_deref().unwrap_or(""));
        let got = match (&first, &row.clarification) {
            (NormalizationResult::Clarify { question, partial }, Some(turn))
                if *question == turn.question =>
            {
                n.apply_clarification(partial, &turn.answer)
                    .unwrap()
                    .render()
            }
            (_, Some(_)) => format!("wrong question: {}", first.render()),
            _ => first.render(),
        };
        if got == expected {
            ok += 1;
        } else {
            wrong.push(format!("{input:?} -> {got}"));
        }
    }
    verdict(
        wrong.is_empty(),
        format!(
            "{ok}/{} rows{}",
            DATASET_ROWS.len(),
            if wrong.is_empty() {
                String::new()
            } else {
                format!("; {}", wrong.join(", "))
            }
        ),
    )
}

fn dataset_fidelity() -> Verdict {
    let spec = DistributionSpec::default();
    let lexicon = Lexicon::default();
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let started = Instant::now();
    let manifest = dataset::write_dataset(a.path(), &spec, &lexicon).unwrap();
    let elapsed = started.elapsed();
    dataset::write_dataset(b.path(), &spec, &lexicon).unwrap();
    let identical = ["train.jsonl", "val.jsonl", "test.jsonl", "manifest.json"]
        .iter()
        .all(|f| {
            std::fs::read(a.path().join(f)).unwrap() == std::fs::read(b.path().join(f)).unwrap()
        });

    let mut problems = Vec::new();
    let error_share = 1.0 - spec.exact_share;
    for split in Split::ALL {
        let size = spec.size(split);
        let stats: &SplitStats = &manifest.splits[split.name()];
        if stats.size != size {
            problems.push(format!("{} has {} samples", split.name(), stats.size));
        }
        for w in &spec.op_weights {
            let key = w.op.keyword().to_lowercase();
            let got = stats.per_op.get(&key).copied().unwrap_or(0) as f64;
            let want = w.weight * size as f64;
            if (got - want).abs() > 1.0 {
                problems.push(format!("{} {key}: {got} vs {want:.2}", split.name()));
            }
        }
        let mut category_weights = vec![(ErrorCategory::Exact, spec.exact_share)];
        for bucket in &spec.error_buckets {
            let total: f64 = bucket.parts.iter().map(|p| p.weight).sum();
            for part in &bucket.parts {
                category_weights.push((
                    part.category,
                    error_share * bucket.weight * part.weight / total,
                ));
            }
        }
        for (category, weight) in category_weights {
            let got = stats
                .per_category
                .get(category.as_str())
                .copied()
                .unwrap_or(0) as f64;
            let want = weight * size as f64;
            if (got - want).abs() > 1.0 {
                problems.push(format!(
                    "{} {}: {got} vs {want:.2}",
                    split.name(),
                    category.as_str()
                ));
            }
        }
    }
    let sizes = format!(
        "{}/{}/{}",
        manifest.splits["train"].size, manifest.splits["val"].size, manifest.splits["test"].size
    );
    let fast = elapsed < Duration::from_secs(10);
    verdict(
        problems.is_empty() && identical && fast,
        format!(
            "sizes {sizes}, proportions within 1 sample: {}, byte-identical rerun: {identical}, {:.2} s{}",
            problems.is_empty(),
            elapsed.as_secs_f64(),
            if problems.is_empty() { String::new() } else { format!("; off: {}", problems.join(", ")) }
        ),
    )
}

fn accuracy_floor() -> Verdict {
    let spec = DistributionSpec::default();
    let started = Instant::now();
    let test = dataset::generate(&spec).unwrap().test;
    let report = eval::evaluate(&RuleNormalizer::default(), &test);
    let elapsed = started.elapsed();
    let unlisted: BTreeSet<String> = test
        .iter()
        .filter(|s| s.is_out_of_lexicon())
        .map(|s| s.input())
        .collect();
    let stray: Vec<&str> = report
        .misses
        .iter()
        .filter(|m| !unlisted.contains(&m.input))
        .map(|m| m.input.as_str())
        .collect();
    let (em, rouge) = (report.overall.exact_match, report.overall.rouge_l);
    verdict(
        em >= 0.90 && rouge >= 0.95 && stray.is_empty() && elapsed < Duration::from_secs(5),
        format!(
            "exact match {em:.4}, ROUGE-L {rouge:.4} on {} samples, {} misses all out-of-lexicon: {}, {:.2} s",
            test.len(),
            report.misses.len(),
            stray.is_empty(),
            elapsed.as_secs_f64()
        ),
    )
}

fn rouge_oracle() -> Verdict {
    let cases: [(&str, &str, f64); 5] = [
        ("SELECT apple", "SELECT apple", 1.0),
        ("DELETE apple", "SELECT apple", 0.5),
        ("", "SELECT apple", 0.0),
        // LCS 4, P = 4/5, R = 1.
        (
            "INSERT at home BEFORE tonight",
            "INSERT home BEFORE tonight",
            8.0 / 9.0,
        ),
        // LCS 1, P = 1/2, R = 1/3.
        ("CORRECT THAT", "CORRECT meeting now", 0.4),
    ];
    let off: Vec<String> = cases
        .iter()
        .filter(|(p, g, want)| (eval::rouge_l(p, g) - want).abs() > 1e-9)
        .map(|(p, g, want)| format!("{p:?}/{g:?}: {} vs {want}", eval::rouge_l(p, g)))
        .collect();
    verdict(
        off.is_empty(),
        format!("{}/5 within 1e-9{}", 5 - off.len(), off.join("; ")),
    )
}

fn segmenter_streams() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut failures = Vec::new();
    let (mut with_long_gap, mut terminated) = (0, 0);
    for _ in 0..10_000 {
        let window = rng.random_range(500..=3000);
        let stream = Stream::random(&mut rng, &["over", "end"], 4000);
        with_long_gap += usize::from(stream.gaps.iter().any(|g| *g > window));
        terminated += usize::from(stream.tokens.iter().any(|t| t == "over" || t == "end"));
        if let Err(e) = check_stream(&stream, window) {
            failures.push(e);
        }
    }
    verdict(
        failures.is_empty(),
        format!(
            "10000 streams ({with_long_gap} with a gap over the window, {terminated} with terminators), {} violations{}",
            failures.len(),
            failures.first().map(|f| format!(": {f}")).unwrap_or_default()
        ),
    )
}

fn sim_oracle() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let (mut checked, mut disagreements) = (0, Vec::new());
    while checked < 1000 {
        let buffer = random_words(&mut rng, 1, 30);
        let cmd = random_targeted_command(&mut rng, &buffer);
        let Some(expected) = splice_oracle(&buffer, &cmd) else {
            continue;
        };
        checked += 1;
        let mut sim = SimState::init(&buffer.join(" "), CorrectionLexicon::new());
        let got = sim.execute_command(&cmd);
        let want = Outcome::Applied {
            buffer: expected.buffer,
            selection: expected.selection,
        };
        if got != want {
            disagreements.push(format!("{cmd} on {:?}", buffer.join(" ")));
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(13);
    let (mut edits, mut broken) = (0, 0);
    for _ in 0..1000 {
        let mut sim = SimState::init(
            &random_words(&mut rng, 1, 30).join(" "),
            CorrectionLexicon::new(),
        );
        for _ in 0..rng.random_range(1..=8) {
            let buffer = sim.buffer().to_vec();
            if buffer.is_empty() {
                break;
            }
            let cmd = random_targeted_command(&mut rng, &buffer);
            // The edit is whichever command applies it: the command itself,
            // or the CHOOSE that resolves its numbered choices.
            let mut before = sim.clone();
            let outcome = sim.execute_command(&cmd);
            if let Outcome::PendingDisambiguation { candidates } = &outcome {
                let n = rng.random_range(1..=candidates.len());
                before = sim.clone();
                sim.execute(&format!("CHOOSE {n}"));
            }
            if cmd.op() == OperationKind::Select
                || sim.buffer() == before.buffer() && sim.undo_depth() == before.undo_depth()
            {
                continue;
            }
            edits += 1;
            let after = sim.clone();
            let undone = sim.execute("UNDO THAT");
            let restored = !undone.is_failure()
                && sim.buffer() == before.buffer()
                && sim.selection() == before.selection();
            let redone = sim.execute("REDO THAT");
            let reapplied = !redone.is_failure()
                && sim.buffer() == after.buffer()
                && sim.selection() == after.selection();
            if !(restored && reapplied) {
                broken += 1;
            }
        }
    }

    let mut sim = SimState::init(WALKTHROUGH_START, CorrectionLexicon::new());
    for step in WALKTHROUGH_STEPS {
        sim.execute(step);
    }
    let walkthrough = sim.buffer_text() == WALKTHROUGH_TARGET;

    verdict(
        disagreements.is_empty() && broken == 0 && walkthrough,
        format!(
            "oracle {}/1000 agree, undo/redo {}/{edits} edits over 1000 sequences, insertion walkthrough reproduces target: {walkthrough}{}",
            1000 - disagreements.len(),
            edits - broken,
            disagreements.first().map(|d| format!("; first disagreement: {d}")).unwrap_or_default()
        ),
    )
}

fn replay_direction() -> Verdict {
    let corpus = eval::repair_corpus();
    let config = ReplayConfig {
        seed: 42,
        ..ReplayConfig::default()
    };
    let a = eval::replay_compare(&corpus, &config).unwrap();
    let b = eval::replay_compare(&corpus, &config).unwrap();
    let (legacy, shim) = (a.legacy.failures(), a.shimmed.failures());
    verdict(
        shim < legacy && a.shimmed.timeouts == 0 && a == b,
        format!(
            "{} cases, seed 42, pauses {}..{} ms: legacy {legacy} failures ({} timeouts), shimmed {shim} ({} timeouts), deterministic: {}",
            corpus.len(),
            a.jitter_ms.0,
            a.jitter_ms.1,
            a.legacy.timeouts,
            a.shimmed.timeouts,
            a == b
        ),
    )
}

fn latency_budget() -> Verdict {
    let spec = DistributionSpec::default();
    let samples = dataset::generate(&spec).unwrap().test;
    let n = RuleNormalizer::default();
    let mut times = Vec::with_capacity(10_000);
    for i in 0..10_000 {
        let s = &samples[i % samples.len()];
        let ctx = SelectionContext::from_text(s.selection.as_deref().unwrap_or(""));
        let started = Instant::now();
        let _ = std::hint::black_box(n.normalize(&s.utterance, &ctx, &[]));
        times.push(started.elapsed());
    }
    times.sort();
    let p99 = times[times.len() * 99 / 100];
    verdict(
        p99 < Duration::from_millis(10),
        format!(
            "p99 {:.1} us, max {:.1} us over 10000 calls",
            p99.as_secs_f64() * 1e6,
            times[times.len() - 1].as_secs_f64() * 1e6
        ),
    )
}

type Criterion = (&'static str, fn() -> Verdict);

fn main() {
    let criteria: [Criterion; 9] = [
        ("repair-category golden suite", repair_table),
        ("dataset sample golden suite", sample_table),
        ("dataset fidelity", dataset_fidelity),
        ("normalizer accuracy floor", accuracy_floor),
        ("ROUGE-L oracle", rouge_oracle),
        ("segmenter properties", segmenter_streams),
        ("editor simulator oracle", sim_oracle),
        ("replay direction", replay_direction),
        ("latency budget", latency_budget),
    ];
    let mut failed = 0;
    for (name, check) in criteria {
        let v = check();
        failed += usize::from(!v.pass);
        println!(
            "{} {name}: {}",
            if v.pass { "PASS" } else { "FAIL" },
            v.detail
        );
    }
    println!(
        "{}/{} criteria passed",
        criteria.len() - failed,
        criteria.len()
    );
    if failed > 0 {
        std::process::exit(1);
    }
}
