//! Synthetic (utterance, correct command) pairs.
//!
//! Every split is sized and balanced exactly: operation counts and error
//! category counts are apportioned by largest remainder, then matched to
//! each other under compatibility constraints (not every error can occur
//! with every operation). Samples are drawn from a fixed bank of correct
//! commands, so each command recurs with several spoken variations.

mod alloc;
mod bank;
mod codec;

use std::collections::{BTreeMap, BTreeSet};
use std::io;
use std::path::{Path, PathBuf};

use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::command::{parse_canonical, ArgValue, Command, OperationKind, Phrase};
use crate::lexicon::Lexicon;
use crate::normalizer::{ctx_word, fill_template, RepairCategory};

pub use alloc::{allocate, apportion};
pub use bank::{typo_corrections, CommandBank, Shape, NOUNS, PAIRS, TYPOS, UNLISTED_VERBS};
pub use codec::{
    decode_input, encode_input, from_jsonl, read_jsonl, to_jsonl, write_atomic, write_jsonl,
    DecodedInput, Record,
};

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("infeasible distribution: {0}")]
    InfeasibleSpec(String),
    #[error("cannot access {}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("line {line}: {message}")]
    Malformed { line: usize, message: String },
}

impl DatasetError {
    pub(crate) fn io(path: &Path, source: io::Error) -> DatasetError {
        DatasetError::Io {
            path: path.to_path_buf(),
            source,
        }
    }
}

/// What kind of mistake a sample's utterance contains, or `EXACT` if none.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum ErrorCategory {
    Exact,
    NaturalUtterance,
    SwapCmd,
    SubstituteCmd,
    SubstituteCtx,
    IgnoreDeictic,
    AddDeictic,
    SubstituteTemplate,
    MissingArgs,
}

impl ErrorCategory {
    pub const ALL: [ErrorCategory; 9] = [
        ErrorCategory::Exact,
        ErrorCategory::NaturalUtterance,
        ErrorCategory::SwapCmd,
        ErrorCategory::SubstituteCmd,
        ErrorCategory::SubstituteCtx,
        ErrorCategory::IgnoreDeictic,
        ErrorCategory::AddDeictic,
        ErrorCategory::SubstituteTemplate,
        ErrorCategory::MissingArgs,
    ];

    pub fn as_str(self) -> &'static str {
        match self.repair() {
            Some(r) => r.as_str(),
            None => "EXACT",
        }
    }

    pub fn repair(self) -> Option<RepairCategory> {
        Some(match self {
            ErrorCategory::Exact => return None,
            ErrorCategory::NaturalUtterance => RepairCategory::NaturalUtterance,
            ErrorCategory::SwapCmd => RepairCategory::SwapCmd,
            ErrorCategory::SubstituteCmd => RepairCategory::SubstituteCmd,
            ErrorCategory::SubstituteCtx => RepairCategory::SubstituteCtx,
            ErrorCategory::IgnoreDeictic => RepairCategory::IgnoreDeictic,
            ErrorCategory::AddDeictic => RepairCategory::AddDeictic,
            ErrorCategory::SubstituteTemplate => RepairCategory::SubstituteTemplate,
            ErrorCategory::MissingArgs => RepairCategory::MissingArgs,
        })
    }
}

impl std::fmt::Display for ErrorCategory {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Whether an utterance with error `cat` can express a command of kind `op`.
pub fn compatible(cat: ErrorCategory, op: OperationKind) -> bool {
    use ErrorCategory as E;
    use OperationKind as O;
    if op == O::Move {
        return false;
    }
    match cat {
        E::Exact | E::NaturalUtterance | E::SubstituteCmd => true,
        E::SwapCmd => matches!(op, O::Select | O::Choose),
        E::SubstituteCtx => matches!(op, O::Select | O::Replace | O::Insert),
        E::SubstituteTemplate => matches!(op, O::Insert | O::Delete | O::Correct | O::Select),
        E::IgnoreDeictic => matches!(op, O::Delete | O::Correct | O::Undo | O::Redo),
        E::AddDeictic => matches!(op, O::Insert | O::Replace),
        E::MissingArgs => matches!(op, O::Insert | O::Replace | O::Select),
    }
}

/// A clarification turn attached to a two-turn sample.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Clarification {
    pub question: String,
    pub answer: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DatasetSample {
    pub utterance: String,
    pub selection: Option<String>,
    pub clarification: Option<Clarification>,
    /// A canonical command or `ASK: <question>`.
    pub expected: String,
    pub op: OperationKind,
    pub error_category: ErrorCategory,
}

impl DatasetSample {
    pub fn input(&self) -> String {
        encode_input(
            &self.utterance,
            self.selection.as_deref(),
            self.clarification.as_ref(),
        )
    }

    pub fn has_selection(&self) -> bool {
        self.selection.is_some()
    }

    /// Whether the utterance uses a verb the lexicon does not list.
    pub fn is_out_of_lexicon(&self) -> bool {
        let first = self.utterance.split_whitespace().next().unwrap_or("");
        UNLISTED_VERBS.iter().any(|(_, v)| *v == first)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightedOp {
    pub op: OperationKind,
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightedCategory {
    pub category: ErrorCategory,
    pub weight: f64,
}

/// A top-level error bucket, split evenly or by weight into categories.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorBucket {
    pub label: String,
    pub weight: f64,
    pub parts: Vec<WeightedCategory>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitSizes {
    pub train: usize,
    pub val: usize,
    pub test: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Val,
    Test,
}

impl Split {
    pub const ALL: [Split; 3] = [Split::Train, Split::Val, Split::Test];

    pub fn name(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Val => "val",
            Split::Test => "test",
        }
    }

    fn stream(self) -> u64 {
        self as u64
    }
}

/// Target composition of the generated data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistributionSpec {
    /// Share of each operation over the whole split, in tie-break order.
    pub op_weights: Vec<WeightedOp>,
    /// Shares over the samples that contain an error.
    pub error_buckets: Vec<ErrorBucket>,
    /// Share of samples that are already canonical.
    pub exact_share: f64,
    pub selection_ratio: f64,
    /// Share of samples whose command verb is missing from the lexicon.
    pub out_of_lexicon_share: f64,
    pub sizes: SplitSizes,
    pub seed: u64,
}

fn even(label: &str, weight: f64, cats: &[(ErrorCategory, f64)]) -> ErrorBucket {
    ErrorBucket {
        label: label.into(),
        weight,
        parts: cats
            .iter()
            .map(|&(category, weight)| WeightedCategory { category, weight })
            .collect(),
    }
}

impl Default for DistributionSpec {
    fn default() -> Self {
        use ErrorCategory as E;
        use OperationKind as O;
        let ops = [
            (O::Correct, 0.185),
            (O::Select, 0.176),
            (O::Replace, 0.169),
            (O::Insert, 0.137),
            (O::Delete, 0.116),
            (O::Choose, 0.098),
            (O::Undo, 0.062),
            (O::Redo, 0.058),
        ];
        let third = 1.0 / 3.0;
        DistributionSpec {
            // the published shares total 1.001; rescale so they sum to 1
            op_weights: ops
                .iter()
                .map(|&(op, weight)| WeightedOp {
                    op,
                    weight: weight / ops.iter().map(|o| o.1).sum::<f64>(),
                })
                .collect(),
            error_buckets: vec![
                even(
                    "substitute template",
                    0.385,
                    &[(E::SubstituteTemplate, 1.0)],
                ),
                even("natural utterance", 0.213, &[(E::NaturalUtterance, 1.0)]),
                even(
                    "substitute command",
                    0.177,
                    &[(E::SubstituteCmd, 2.0 * third), (E::SwapCmd, third)],
                ),
                even(
                    "missing or deictic arguments",
                    0.154,
                    &[
                        (E::MissingArgs, third),
                        (E::AddDeictic, third),
                        (E::IgnoreDeictic, third),
                    ],
                ),
                even("substitute context", 0.071, &[(E::SubstituteCtx, 1.0)]),
            ],
            exact_share: 0.15,
            selection_ratio: 0.292,
            out_of_lexicon_share: 0.02,
            sizes: SplitSizes {
                train: 1000,
                val: 400,
                test: 150,
            },
            seed: 42,
        }
    }
}

const WEIGHT_TOLERANCE: f64 = 1e-9;

impl DistributionSpec {
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn size(&self, split: Split) -> usize {
        match split {
            Split::Train => self.sizes.train,
            Split::Val => self.sizes.val,
            Split::Test => self.sizes.test,
        }
    }

    pub fn validate(&self) -> Result<(), DatasetError> {
        let bad = |m: String| Err(DatasetError::InfeasibleSpec(m));
        let check_weights = |what: &str, ws: &[f64]| -> Result<(), DatasetError> {
            if let Some(w) = ws.iter().find(|w| !w.is_finite() || **w < 0.0) {
                return bad(format!(
                    "{what} has weight {w}, which would mean a negative sample count"
                ));
            }
            let sum: f64 = ws.iter().sum();
            if (sum - 1.0).abs() > WEIGHT_TOLERANCE {
                return bad(format!("{what} weights sum to {sum}, not 1"));
            }
            Ok(())
        };
        if self.op_weights.is_empty() || self.error_buckets.is_empty() {
            return bad("weights must not be empty".into());
        }
        check_weights(
            "operation",
            &self.op_weights.iter().map(|w| w.weight).collect::<Vec<_>>(),
        )?;
        check_weights(
            "error bucket",
            &self
                .error_buckets
                .iter()
                .map(|b| b.weight)
                .collect::<Vec<_>>(),
        )?;
        for b in &self.error_buckets {
            check_weights(
                &b.label,
                &b.parts.iter().map(|p| p.weight).collect::<Vec<_>>(),
            )?;
            if b.parts.iter().any(|p| p.category == ErrorCategory::Exact) {
                return bad(format!(
                    "bucket {:?} lists EXACT, which is not an error",
                    b.label
                ));
            }
        }
        for (name, share) in [
            ("exact share", self.exact_share),
            ("selection ratio", self.selection_ratio),
            ("out-of-lexicon share", self.out_of_lexicon_share),
        ] {
            if !(0.0..=1.0).contains(&share) {
                return bad(format!("{name} {share} is outside [0, 1]"));
            }
        }
        if self.sizes.train == 0 || self.sizes.val == 0 || self.sizes.test == 0 {
            return bad("split sizes must be positive".into());
        }
        Ok(())
    }

    /// Exact per-split counts and the category × operation matrix.
    pub fn plan(&self, size: usize) -> Result<SplitPlan, DatasetError> {
        self.validate()?;
        let infeasible = |m: &str| DatasetError::InfeasibleSpec(m.to_string());
        let exact = apportion(size, &[self.exact_share, 1.0 - self.exact_share])
            .ok_or_else(|| infeasible("exact share"))?[0];
        let bucket_counts = apportion(
            size - exact,
            &self
                .error_buckets
                .iter()
                .map(|b| b.weight)
                .collect::<Vec<_>>(),
        )
        .ok_or_else(|| infeasible("error buckets"))?;

        let mut categories: Vec<(ErrorCategory, usize)> = vec![(ErrorCategory::Exact, exact)];
        for (bucket, n) in self.error_buckets.iter().zip(bucket_counts) {
            let parts = apportion(
                n,
                &bucket.parts.iter().map(|p| p.weight).collect::<Vec<_>>(),
            )
            .ok_or_else(|| infeasible(&bucket.label))?;
            for (p, k) in bucket.parts.iter().zip(parts) {
                match categories.iter_mut().find(|(c, _)| *c == p.category) {
                    Some((_, total)) => *total += k,
                    None => categories.push((p.category, k)),
                }
            }
        }
        let op_counts: Vec<(OperationKind, usize)> = self
            .op_weights
            .iter()
            .zip(
                apportion(
                    size,
                    &self.op_weights.iter().map(|w| w.weight).collect::<Vec<_>>(),
                )
                .ok_or_else(|| infeasible("operations"))?,
            )
            .map(|(w, n)| (w.op, n))
            .collect();

        let supply: Vec<usize> = categories.iter().map(|c| c.1).collect();
        let demand: Vec<usize> = op_counts.iter().map(|o| o.1).collect();
        let allocation = allocate(&supply, &demand, |r, c| {
            compatible(categories[r].0, op_counts[c].0)
        })
        .ok_or_else(|| {
            infeasible("no assignment of error categories to operations meets both distributions")
        })?;

        Ok(SplitPlan {
            size,
            categories,
            ops: op_counts,
            allocation,
            selection_target: (self.selection_ratio * size as f64).round() as usize,
            out_of_lexicon: (self.out_of_lexicon_share * size as f64).round() as usize,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SplitPlan {
    pub size: usize,
    pub categories: Vec<(ErrorCategory, usize)>,
    pub ops: Vec<(OperationKind, usize)>,
    /// `allocation[category][op]`, indexed like the two lists above.
    pub allocation: Vec<Vec<usize>>,
    pub selection_target: usize,
    pub out_of_lexicon: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Dataset {
    pub train: Vec<DatasetSample>,
    pub val: Vec<DatasetSample>,
    pub test: Vec<DatasetSample>,
}

impl Dataset {
    pub fn split(&self, split: Split) -> &[DatasetSample] {
        match split {
            Split::Train => &self.train,
            Split::Val => &self.val,
            Split::Test => &self.test,
        }
    }
}

pub fn generate(spec: &DistributionSpec) -> Result<Dataset, DatasetError> {
    generate_with(spec, &Lexicon::default())
}

/// Generates all splits. `lexicon` must be the one the normalizer uses for
/// the samples to be reproducible by it.
pub fn generate_with(spec: &DistributionSpec, lexicon: &Lexicon) -> Result<Dataset, DatasetError> {
    let bank = CommandBank::standard();
    Ok(Dataset {
        train: generate_split(spec, Split::Train, lexicon, &bank)?,
        val: generate_split(spec, Split::Val, lexicon, &bank)?,
        test: generate_split(spec, Split::Test, lexicon, &bank)?,
    })
}

pub fn generate_split(
    spec: &DistributionSpec,
    split: Split,
    lexicon: &Lexicon,
    bank: &CommandBank,
) -> Result<Vec<DatasetSample>, DatasetError> {
    let plan = spec.plan(spec.size(split))?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    rng.set_stream(split.stream());

    // out-of-lexicon verbs replace ordinary synonyms in evenly spaced slots
    let ool_ops = [
        OperationKind::Replace,
        OperationKind::Delete,
        OperationKind::Correct,
        OperationKind::Insert,
    ];
    let mut slots = Vec::new();
    for (ci, (cat, _)) in plan.categories.iter().enumerate() {
        for (oi, (op, _)) in plan.ops.iter().enumerate() {
            for k in 0..plan.allocation[ci][oi] {
                slots.push((*cat, *op, k));
            }
        }
    }
    let eligible: Vec<usize> = (0..slots.len())
        .filter(|&i| slots[i].0 == ErrorCategory::SubstituteCmd && ool_ops.contains(&slots[i].1))
        .collect();
    let quota = plan.out_of_lexicon.min(eligible.len());
    let ool: BTreeSet<usize> = (0..quota)
        .map(|j| eligible[j * eligible.len() / quota])
        .collect();

    let mut gen = Gen {
        rng: &mut rng,
        bank,
        lex: lexicon,
    };
    let mut drafts: Vec<Draft> = slots
        .iter()
        .enumerate()
        .map(|(i, &(cat, op, k))| gen.build(cat, op, k, ool.contains(&i)))
        .collect();
    drafts.shuffle(&mut rng);

    let required = drafts
        .iter()
        .filter(|d| matches!(d.selection, Need::Required(_)))
        .count();
    let optional: Vec<usize> = (0..drafts.len())
        .filter(|&i| matches!(drafts[i].selection, Need::Optional))
        .collect();
    let extra = plan
        .selection_target
        .saturating_sub(required)
        .min(optional.len());
    for i in rand::seq::index::sample(&mut rng, optional.len(), extra) {
        drafts[optional[i]].selection = Need::Required(bank::random_phrase(&mut rng, &[]));
    }

    Ok(drafts.into_iter().map(Draft::finish).collect())
}

/// Per-split counts recorded in the manifest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitStats {
    pub size: usize,
    pub per_op: BTreeMap<String, usize>,
    pub per_category: BTreeMap<String, usize>,
    pub with_selection: usize,
    pub two_turn: usize,
    pub out_of_lexicon: usize,
    pub distinct_commands: usize,
    /// Command-output samples per distinct command.
    pub variations_per_command: f64,
}

impl SplitStats {
    pub fn of(samples: &[DatasetSample]) -> SplitStats {
        let mut per_op = BTreeMap::new();
        let mut per_category = BTreeMap::new();
        let mut commands = BTreeSet::new();
        let mut command_samples = 0usize;
        for s in samples {
            *per_op.entry(s.op.keyword().to_lowercase()).or_insert(0) += 1;
            *per_category
                .entry(s.error_category.as_str().to_string())
                .or_insert(0) += 1;
            if !s.expected.starts_with("ASK:") {
                commands.insert(s.expected.as_str());
                command_samples += 1;
            }
        }
        SplitStats {
            size: samples.len(),
            per_op,
            per_category,
            with_selection: samples.iter().filter(|s| s.has_selection()).count(),
            two_turn: samples.iter().filter(|s| s.clarification.is_some()).count(),
            out_of_lexicon: samples.iter().filter(|s| s.is_out_of_lexicon()).count(),
            distinct_commands: commands.len(),
            variations_per_command: if commands.is_empty() {
                0.0
            } else {
                command_samples as f64 / commands.len() as f64
            },
        }
    }
}

/// Written next to the JSONL files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub seed: u64,
    pub spec: DistributionSpec,
    pub splits: BTreeMap<String, SplitStats>,
    pub files: BTreeMap<String, String>,
}

impl Manifest {
    pub fn of(spec: &DistributionSpec, dataset: &Dataset) -> Manifest {
        let mut splits = BTreeMap::new();
        let mut files = BTreeMap::new();
        for split in Split::ALL {
            splits.insert(
                split.name().to_string(),
                SplitStats::of(dataset.split(split)),
            );
            files.insert(split.name().to_string(), format!("{}.jsonl", split.name()));
        }
        Manifest {
            seed: spec.seed,
            spec: spec.clone(),
            splits,
            files,
        }
    }
}

/// Generates and writes `train.jsonl`, `val.jsonl`, `test.jsonl` and
/// `manifest.json` into `dir`, each atomically.
pub fn write_dataset(
    dir: &Path,
    spec: &DistributionSpec,
    lexicon: &Lexicon,
) -> Result<Manifest, DatasetError> {
    let dataset = generate_with(spec, lexicon)?;
    std::fs::create_dir_all(dir).map_err(|e| DatasetError::io(dir, e))?;
    let manifest = Manifest::of(spec, &dataset);
    for split in Split::ALL {
        write_jsonl(
            &dir.join(&manifest.files[split.name()]),
            dataset.split(split),
        )?;
    }
    let mut json = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    json.push('\n');
    write_atomic(&dir.join("manifest.json"), json.as_bytes())?;
    Ok(manifest)
}

// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Eq)]
enum Need {
    Required(Phrase),
    Optional,
    Forbidden,
}

#[derive(Debug, Clone)]
struct Draft {
    utterance: String,
    selection: Need,
    clarification: Option<Clarification>,
    expected: String,
    op: OperationKind,
    category: ErrorCategory,
}

impl Draft {
    fn finish(self) -> DatasetSample {
        DatasetSample {
            utterance: self.utterance,
            selection: match self.selection {
                Need::Required(p) => Some(p.to_string()),
                Need::Optional | Need::Forbidden => None,
            },
            clarification: self.clarification,
            expected: self.expected,
            op: self.op,
            error_category: self.category,
        }
    }
}

/// Spoken, lowercase components of a command.
#[derive(Debug, Clone)]
struct Parts {
    verb: Vec<String>,
    arg: Vec<String>,
    ctx: Vec<String>,
    ctx_arg: Vec<String>,
}

fn words(text: &str) -> Vec<String> {
    text.split_whitespace().map(str::to_lowercase).collect()
}

impl Parts {
    fn of(cmd: &Command) -> Parts {
        let arg = |a: Option<&ArgValue>| a.map(|a| words(&a.to_string())).unwrap_or_default();
        Parts {
            verb: words(cmd.op().keyword()),
            arg: arg(cmd.cmd_arg()),
            ctx: cmd.ctx().map(|c| vec![ctx_word(c)]).unwrap_or_default(),
            ctx_arg: arg(cmd.ctx_arg()),
        }
    }

    fn tokens(&self) -> Vec<String> {
        [&self.verb, &self.arg, &self.ctx, &self.ctx_arg]
            .into_iter()
            .flatten()
            .cloned()
            .collect()
    }

    fn text(&self) -> String {
        self.tokens().join(" ")
    }
}

const NUMBER_WORDS: [&str; 9] = [
    "one", "two", "three", "four", "five", "six", "seven", "eight", "nine",
];

fn shapes_for(op: OperationKind) -> &'static [Shape] {
    use OperationKind as O;
    match op {
        O::Select => &[Shape::SelectPhrase, Shape::SelectRelative],
        O::Choose => &[Shape::Choose],
        O::Delete => &[Shape::DeletePhrase, Shape::DeleteThat],
        O::Correct => &[Shape::CorrectPhrase, Shape::CorrectThat],
        O::Insert => &[Shape::InsertBefore, Shape::InsertAfter],
        O::Replace => &[Shape::Replace],
        O::Undo => &[Shape::Undo],
        O::Redo => &[Shape::Redo],
        O::Move => &[],
    }
}

fn phrase_shape(op: OperationKind) -> Shape {
    match op {
        OperationKind::Delete => Shape::DeletePhrase,
        OperationKind::Correct => Shape::CorrectPhrase,
        _ => Shape::SelectPhrase,
    }
}

fn phrase_of(arg: Option<&ArgValue>) -> Phrase {
    arg.and_then(ArgValue::phrase)
        .cloned()
        .expect("bank shape guarantees a phrase")
}

struct Gen<'a> {
    rng: &'a mut ChaCha8Rng,
    bank: &'a CommandBank,
    lex: &'a Lexicon,
}

impl Gen<'_> {
    fn pick(&mut self, shapes: &[Shape]) -> Command {
        self.bank.pick(self.rng, shapes).clone()
    }

    fn one_of(&mut self, options: &[String]) -> Vec<String> {
        words(
            options
                .choose(self.rng)
                .expect("lexicon lists are non-empty"),
        )
    }

    fn ask(&self, template: &str, pairs: &[(&str, String)]) -> String {
        format!("ASK: {}", fill_template(template, pairs))
    }

    fn build(&mut self, cat: ErrorCategory, op: OperationKind, k: usize, ool: bool) -> Draft {
        let (utterance, selection, clarification, expected) = match cat {
            ErrorCategory::Exact => {
                let cmd = self.pick(shapes_for(op));
                (
                    Parts::of(&cmd).text(),
                    Need::Optional,
                    None,
                    cmd.to_string(),
                )
            }
            ErrorCategory::NaturalUtterance => {
                let cmd = self.pick(shapes_for(op));
                (self.naturalize(&cmd), Need::Optional, None, cmd.to_string())
            }
            ErrorCategory::SubstituteCmd if ool => self.unlisted_verb(op),
            ErrorCategory::SubstituteCmd => {
                let cmd = self.pick(shapes_for(op));
                let mut parts = Parts::of(&cmd);
                parts.verb = self.one_of(self.lex.command_synonyms(op));
                (parts.text(), Need::Optional, None, cmd.to_string())
            }
            ErrorCategory::SwapCmd => self.swap(op),
            ErrorCategory::SubstituteCtx => self.substitute_ctx(op),
            ErrorCategory::SubstituteTemplate => self.template(op),
            ErrorCategory::IgnoreDeictic => self.ignore_deictic(op),
            ErrorCategory::AddDeictic => self.add_deictic(op),
            ErrorCategory::MissingArgs => self.missing(op, k),
        };
        Draft {
            utterance,
            selection,
            clarification,
            expected,
            op,
            category: cat,
        }
    }

    fn naturalize(&mut self, cmd: &Command) -> String {
        let mut p = Parts::of(cmd);
        let mut changed = false;
        let lead_prob = 0.5;
        match Shape::of(cmd).expect("bank has no MOVE") {
            Shape::SelectPhrase
            | Shape::DeletePhrase
            | Shape::CorrectPhrase
            | Shape::InsertBefore
            | Shape::InsertAfter
            | Shape::Replace => {
                if self.rng.random_bool(lead_prob) {
                    let lead = self.one_of(&self.lex.noise.argument_leads);
                    p.arg.splice(0..0, lead);
                    changed = true;
                }
                if !p.ctx.is_empty() && self.rng.random_bool(0.3) {
                    let lead = self.one_of(&self.lex.noise.argument_leads);
                    p.ctx_arg.splice(0..0, lead);
                    changed = true;
                }
            }
            Shape::Choose => {
                if self.rng.random_bool(0.6) {
                    let lead = self.one_of(&self.lex.noise.number_leads);
                    p.arg.splice(0..0, lead);
                    changed = true;
                }
            }
            Shape::SelectRelative => {
                if self.rng.random_bool(0.6) {
                    p.arg.insert(0, "the".into());
                    changed = true;
                }
            }
            Shape::DeleteThat | Shape::CorrectThat => {
                if self.rng.random_bool(0.6) {
                    let options: Vec<String> = self
                        .lex
                        .deictic
                        .phrases
                        .iter()
                        .filter(|d| d.as_str() != "that")
                        .cloned()
                        .collect();
                    p.arg = self.one_of(&options);
                    changed = true;
                }
            }
            Shape::Undo | Shape::Redo => {}
        }
        let mut tokens = p.tokens();
        let prefix = self.rng.random_bool(0.6);
        let suffix = self.rng.random_bool(0.3);
        if prefix || !(changed || suffix) {
            let f = self.one_of(&self.lex.fillers.prefix);
            tokens.splice(0..0, f);
        }
        if suffix {
            let f = self.one_of(&self.lex.fillers.suffix);
            tokens.extend(f);
        }
        if self.rng.random_bool(0.15) {
            let f = self.one_of(&self.lex.fillers.anywhere);
            let at = self.rng.random_range(1..=tokens.len());
            tokens.splice(at..at, f);
        }
        // a trailing filler after a phrase still parses as canonical and
        // would be relayed literally; a leading filler rules that out
        if !prefix && parse_canonical(&tokens.join(" ")).is_ok() {
            let f = self.one_of(&self.lex.fillers.prefix);
            tokens.splice(0..0, f);
        }
        tokens.join(" ")
    }

    fn unlisted_verb(
        &mut self,
        op: OperationKind,
    ) -> (String, Need, Option<Clarification>, String) {
        let verbs: Vec<&str> = UNLISTED_VERBS
            .iter()
            .filter(|(o, _)| *o == op)
            .map(|(_, v)| *v)
            .collect();
        let verb = verbs
            .choose(self.rng)
            .expect("every eligible op has an unlisted verb")
            .to_string();
        if op == OperationKind::Replace {
            let cmd = self.pick(&[Shape::Replace]);
            let target = phrase_of(cmd.cmd_arg());
            let expected = self.ask(
                &self.lex.questions.replace_replacement,
                &[("target", target.to_string())],
            );
            return (format!("{verb} {target}"), Need::Optional, None, expected);
        }
        let shapes: &[Shape] = match op {
            OperationKind::Insert => &[Shape::InsertBefore, Shape::InsertAfter],
            _ => &[phrase_shape(op)],
        };
        let cmd = self.pick(shapes);
        let mut parts = Parts::of(&cmd);
        parts.verb = vec![verb];
        (parts.text(), Need::Optional, None, cmd.to_string())
    }

    fn swap(&mut self, op: OperationKind) -> (String, Need, Option<Clarification>, String) {
        let (verb, cmd) = match op {
            OperationKind::Choose => ("select", self.pick(&[Shape::Choose])),
            _ => (
                "choose",
                self.pick(&[Shape::SelectPhrase, Shape::SelectRelative]),
            ),
        };
        let mut parts = Parts::of(&cmd);
        parts.verb = vec![verb.into()];
        if let Some(ArgValue::Number(n)) = cmd.cmd_arg() {
            if self.rng.random_bool(0.4) {
                parts.arg = vec![NUMBER_WORDS[n.get() as usize - 1].into()];
            }
        }
        (parts.text(), Need::Optional, None, cmd.to_string())
    }

    fn substitute_ctx(
        &mut self,
        op: OperationKind,
    ) -> (String, Need, Option<Clarification>, String) {
        let cmd = match op {
            OperationKind::Select => self.pick(&[Shape::SelectRelative]),
            OperationKind::Insert => self.pick(&[Shape::InsertBefore, Shape::InsertAfter]),
            _ => self.pick(&[Shape::Replace]),
        };
        let mut parts = Parts::of(&cmd);
        match cmd.cmd_arg() {
            Some(ArgValue::RelativeWord(rel)) => {
                parts.arg = self.one_of(self.lex.relative_synonyms(*rel));
            }
            _ => {
                let ctx = cmd.ctx().expect("insert and replace have a context");
                parts.ctx = self.one_of(self.lex.context_synonyms(ctx));
            }
        }
        (parts.text(), Need::Optional, None, cmd.to_string())
    }

    fn template(&mut self, op: OperationKind) -> (String, Need, Option<Clarification>, String) {
        if op == OperationKind::Insert {
            // two components where four are needed; the selection is the anchor
            let cmd = self.pick(&[Shape::InsertBefore]);
            let text = phrase_of(cmd.cmd_arg());
            let anchor = phrase_of(cmd.ctx_arg());
            return (
                format!("insert {text}"),
                Need::Required(anchor),
                None,
                cmd.to_string(),
            );
        }
        let cmd = self.pick(&[phrase_shape(op)]);
        let target = phrase_of(cmd.cmd_arg());
        let extra = bank::random_phrase(self.rng, &[&target]);
        let ctx = if self.rng.random_bool(0.5) {
            "before"
        } else {
            "after"
        };
        let verb = op.keyword().to_lowercase();
        (
            format!("{verb} {target} {ctx} {extra}"),
            Need::Optional,
            None,
            cmd.to_string(),
        )
    }

    fn ignore_deictic(
        &mut self,
        op: OperationKind,
    ) -> (String, Need, Option<Clarification>, String) {
        let verb = op.keyword().to_lowercase();
        let cmd = Command::deictic(op).expect("ignore-deictic ops take THAT");
        let selection = match op {
            OperationKind::Delete | OperationKind::Correct => {
                Need::Required(bank::random_phrase(self.rng, &[]))
            }
            _ => Need::Optional,
        };
        (verb, selection, None, cmd.to_string())
    }

    fn add_deictic(&mut self, op: OperationKind) -> (String, Need, Option<Clarification>, String) {
        if op == OperationKind::Insert {
            let cmd = self.pick(&[Shape::InsertBefore, Shape::InsertAfter]);
            let mut parts = Parts::of(&cmd);
            parts.ctx_arg = vec!["that".into()];
            return (
                parts.text(),
                Need::Required(phrase_of(cmd.ctx_arg())),
                None,
                cmd.to_string(),
            );
        }
        let cmd = self.pick(&[Shape::Replace]);
        let mut parts = Parts::of(&cmd);
        parts.arg = vec!["that".into()];
        (
            parts.text(),
            Need::Required(phrase_of(cmd.cmd_arg())),
            None,
            cmd.to_string(),
        )
    }

    /// Variants rotate ask-only, follow-up, and filled-from-selection so
    /// every op with enough samples has each.
    fn missing(
        &mut self,
        op: OperationKind,
        k: usize,
    ) -> (String, Need, Option<Clarification>, String) {
        #[derive(PartialEq)]
        enum Variant {
            Ask,
            FollowUp,
            FromSelection,
        }
        let variant = match (op, k % 3) {
            (OperationKind::Select, _) if k.is_multiple_of(2) => Variant::Ask,
            (OperationKind::Select, _) => Variant::FollowUp,
            (_, 0) => Variant::Ask,
            (_, 1) => Variant::FollowUp,
            _ => Variant::FromSelection,
        };
        let q = &self.lex.questions;

        // (utterance, selection need, question, answer, command)
        let (utterance, need, question, answer, cmd) = match op {
            OperationKind::Select => {
                let cmd = self.pick(&[Shape::SelectPhrase]);
                let answer = phrase_of(cmd.cmd_arg());
                (
                    "select".to_string(),
                    Need::Optional,
                    q.select_target.clone(),
                    answer,
                    cmd,
                )
            }
            OperationKind::Insert => {
                let cmd = self.pick(&[Shape::InsertBefore, Shape::InsertAfter]);
                let text = phrase_of(cmd.cmd_arg());
                let anchor = phrase_of(cmd.ctx_arg());
                let ctx = ctx_word(cmd.ctx().expect("insert has a context"));
                if variant == Variant::FromSelection {
                    let utt = format!("insert {text} {ctx}");
                    return (utt, Need::Required(anchor), None, cmd.to_string());
                }
                if self.rng.random_bool(0.5) {
                    let question = fill_template(
                        &q.insert_text,
                        &[("ctx", ctx.clone()), ("anchor", anchor.to_string())],
                    );
                    (
                        format!("insert {ctx} {anchor}"),
                        Need::Optional,
                        question,
                        text,
                        cmd,
                    )
                } else {
                    let question = fill_template(
                        &q.insert_anchor,
                        &[("ctx", ctx.clone()), ("text", text.to_string())],
                    );
                    (
                        format!("insert {text} {ctx}"),
                        Need::Forbidden,
                        question,
                        anchor,
                        cmd,
                    )
                }
            }
            _ => {
                let cmd = self.pick(&[Shape::Replace]);
                let target = phrase_of(cmd.cmd_arg());
                let replacement = phrase_of(cmd.ctx_arg());
                if variant == Variant::FromSelection {
                    let utt = format!("replace with {replacement}");
                    return (utt, Need::Required(target), None, cmd.to_string());
                }
                if self.rng.random_bool(0.5) {
                    let question =
                        fill_template(&q.replace_replacement, &[("target", target.to_string())]);
                    (
                        format!("replace {target}"),
                        Need::Optional,
                        question,
                        replacement,
                        cmd,
                    )
                } else {
                    let question = fill_template(
                        &q.replace_target,
                        &[("replacement", replacement.to_string())],
                    );
                    (
                        format!("replace with {replacement}"),
                        Need::Forbidden,
                        question,
                        target,
                        cmd,
                    )
                }
            }
        };
        match variant {
            Variant::Ask => (utterance, need, None, format!("ASK: {question}")),
            _ => {
                let clarification = Clarification {
                    question,
                    answer: answer.to_string(),
                };
                (utterance, need, Some(clarification), cmd.to_string())
            }
        }
    }
}
