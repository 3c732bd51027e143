//! Documents, canonical labels, datasets and stratified splitting.

use alloc::collections::BTreeMap;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::math;

/// The three ESG impact types. The integer codes are part of every on-disk
/// format and decide argmax tie-breaking (lowest code wins).
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[repr(u8)]
pub enum CanonicalLabel {
    #[serde(rename = "Opportunity")]
    Opportunity = 0,
    #[serde(rename = "Risk")]
    Risk = 1,
    #[serde(rename = "Cannot Distinguish")]
    CannotDistinguish = 2,
}

impl CanonicalLabel {
    pub const COUNT: usize = 3;
    pub const ALL: [CanonicalLabel; 3] = [
        CanonicalLabel::Opportunity,
        CanonicalLabel::Risk,
        CanonicalLabel::CannotDistinguish,
    ];

    pub fn code(self) -> usize {
        self as usize
    }

    pub fn from_code(code: usize) -> Option<Self> {
        Self::ALL.get(code).copied()
    }

    pub fn name(self) -> &'static str {
        match self {
            CanonicalLabel::Opportunity => "Opportunity",
            CanonicalLabel::Risk => "Risk",
            CanonicalLabel::CannotDistinguish => "Cannot Distinguish",
        }
    }

    /// Argmax over a logit row. Ties go to the lowest class code.
    ///
    /// Returns `None` for an empty row, a row longer than the label set, or a
    /// row holding a non-finite value.
    pub fn argmax(logits: &[f64]) -> Option<Self> {
        if logits.is_empty() || logits.len() > Self::COUNT {
            return None;
        }
        let mut best = 0;
        for (i, &v) in logits.iter().enumerate() {
            if !v.is_finite() {
                return None;
            }
            if v > logits[best] {
                best = i;
            }
        }
        Self::from_code(best)
    }
}

impl fmt::Display for CanonicalLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Supported document languages, in the fixed report order.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Lang {
    En,
    Fr,
    Ja,
    Zh,
}

impl Lang {
    pub const ALL: [Lang; 4] = [Lang::En, Lang::Fr, Lang::Ja, Lang::Zh];

    pub fn code(self) -> &'static str {
        match self {
            Lang::En => "en",
            Lang::Fr => "fr",
            Lang::Ja => "ja",
            Lang::Zh => "zh",
        }
    }

    /// English name used in rendered tables.
    pub fn display_name(self) -> &'static str {
        match self {
            Lang::En => "English",
            Lang::Fr => "French",
            Lang::Ja => "Japanese",
            Lang::Zh => "Chinese",
        }
    }

    pub fn is_cjk(self) -> bool {
        matches!(self, Lang::Ja | Lang::Zh)
    }
}

impl fmt::Display for Lang {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.code())
    }
}

impl FromStr for Lang {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Lang::ALL
            .into_iter()
            .find(|l| l.code() == s)
            .ok_or_else(|| s.to_string())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Dev,
    Test,
}

impl Split {
    pub const ALL: [Split; 3] = [Split::Train, Split::Dev, Split::Test];

    pub fn name(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Dev => "dev",
            Split::Test => "test",
        }
    }
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Split {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Split::ALL
            .into_iter()
            .find(|sp| sp.name() == s)
            .ok_or_else(|| s.to_string())
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Document {
    pub id: String,
    pub text: String,
    pub lang: Lang,
    pub label: Option<CanonicalLabel>,
}

/// Maps raw label strings (optionally scoped to one language) onto canonical labels.
#[derive(Clone, Debug)]
pub struct LabelAliasMap {
    entries: BTreeMap<(String, Option<Lang>), CanonicalLabel>,
}

impl Default for LabelAliasMap {
    fn default() -> Self {
        let mut map = LabelAliasMap::empty();
        map.insert("Opportunity", None, CanonicalLabel::Opportunity);
        map.insert("Risk", None, CanonicalLabel::Risk);
        map.insert("Cannot Distinguish", None, CanonicalLabel::CannotDistinguish);
        // The Japanese data uses sentiment-style names.
        map.insert("Positive", Some(Lang::Ja), CanonicalLabel::Opportunity);
        map.insert("Negative", Some(Lang::Ja), CanonicalLabel::Risk);
        map.insert("N/A", Some(Lang::Ja), CanonicalLabel::CannotDistinguish);
        map
    }
}

impl LabelAliasMap {
    pub fn empty() -> Self {
        LabelAliasMap {
            entries: BTreeMap::new(),
        }
    }

    /// `lang = None` registers the alias for every language.
    pub fn insert(&mut self, raw: &str, lang: Option<Lang>, label: CanonicalLabel) {
        self.entries.insert((raw.to_string(), lang), label);
    }

    pub fn resolve(&self, raw: &str, lang: Lang) -> Option<CanonicalLabel> {
        let key = raw.to_string();
        self.entries
            .get(&(key.clone(), Some(lang)))
            .or_else(|| self.entries.get(&(key, None)))
            .copied()
    }
}

/// A record as it appears in a dataset file, before validation.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct RawRecord {
    pub id: String,
    pub text: String,
    pub lang: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub split: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CorpusError {
    #[error("record {index}: empty id")]
    EmptyId { index: usize },
    #[error("record {index}: empty text for id {id:?}")]
    EmptyText { index: usize, id: String },
    #[error("record {index}: duplicate id {id:?}")]
    DuplicateId { index: usize, id: String },
    #[error("record {index}: unknown language {lang:?} (expected en, fr, ja or zh)")]
    UnknownLang { index: usize, lang: String },
    #[error("record {index}: unmappable label {label:?}")]
    UnmappableLabel { index: usize, label: String },
    #[error("record {index}: unknown split {split:?}")]
    UnknownSplit { index: usize, split: String },
    #[error("record {index}: split assigned to unlabeled document {id:?}")]
    SplitOnUnlabeled { index: usize, id: String },
    #[error("split assignment names unknown document id {0:?}")]
    UnknownSplitId(String),
    #[error("split ratios must be positive and finite")]
    NonPositiveRatio,
    #[error("split ratios sum to {0}, expected 1")]
    RatioSum(f64),
    #[error("need at least 3 labeled documents to split, found {0}")]
    TooFewLabeled(usize),
    #[error("n_per_class must be at least 1")]
    EmptyClass,
    #[error("vocab_size must be at least 30, got {0}")]
    VocabTooSmall(usize),
}

/// An ordered collection of documents plus an optional train/dev/test assignment.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Dataset {
    docs: Vec<Document>,
    splits: BTreeMap<String, Split>,
}

impl Dataset {
    /// Validates ids and texts. Documents keep the given order.
    pub fn new(docs: Vec<Document>) -> Result<Self, CorpusError> {
        let mut seen = BTreeMap::new();
        for (index, doc) in docs.iter().enumerate() {
            if doc.id.is_empty() {
                return Err(CorpusError::EmptyId { index });
            }
            if doc.text.is_empty() {
                return Err(CorpusError::EmptyText {
                    index,
                    id: doc.id.clone(),
                });
            }
            if seen.insert(doc.id.as_str(), index).is_some() {
                return Err(CorpusError::DuplicateId {
                    index,
                    id: doc.id.clone(),
                });
            }
        }
        Ok(Dataset {
            docs,
            splits: BTreeMap::new(),
        })
    }

    /// Builds a dataset from raw file records, mapping labels through `aliases`.
    pub fn from_records(records: Vec<RawRecord>, aliases: &LabelAliasMap) -> Result<Self, CorpusError> {
        let mut docs = Vec::with_capacity(records.len());
        let mut splits = BTreeMap::new();
        for (index, rec) in records.into_iter().enumerate() {
            let lang: Lang = rec.lang.parse().map_err(|lang| CorpusError::UnknownLang { index, lang })?;
            let label = match rec.label.as_deref() {
                None | Some("") => None,
                Some(raw) => Some(aliases.resolve(raw, lang).ok_or_else(|| CorpusError::UnmappableLabel {
                    index,
                    label: raw.to_string(),
                })?),
            };
            if let Some(raw) = rec.split.as_deref() {
                let split: Split = raw.parse().map_err(|split| CorpusError::UnknownSplit { index, split })?;
                if label.is_none() {
                    return Err(CorpusError::SplitOnUnlabeled { index, id: rec.id });
                }
                splits.insert(rec.id.clone(), split);
            }
            docs.push(Document {
                id: rec.id,
                text: rec.text,
                lang,
                label,
            });
        }
        let mut ds = Dataset::new(docs)?;
        ds.splits = splits;
        Ok(ds)
    }

    /// Inverse of [`Dataset::from_records`] using canonical label names.
    pub fn to_records(&self) -> Vec<RawRecord> {
        self.docs
            .iter()
            .map(|d| RawRecord {
                id: d.id.clone(),
                text: d.text.clone(),
                lang: d.lang.code().to_string(),
                label: d.label.map(|l| l.name().to_string()),
                split: self.splits.get(&d.id).map(|s| s.name().to_string()),
            })
            .collect()
    }

    pub fn docs(&self) -> &[Document] {
        &self.docs
    }

    pub fn len(&self) -> usize {
        self.docs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.docs.is_empty()
    }

    pub fn split_of(&self, id: &str) -> Option<Split> {
        self.splits.get(id).copied()
    }

    pub fn split_assignment(&self) -> &BTreeMap<String, Split> {
        &self.splits
    }

    pub fn has_splits(&self) -> bool {
        !self.splits.is_empty()
    }

    /// Replaces the split assignment. Every id must name a labeled document.
    pub fn with_splits(mut self, splits: BTreeMap<String, Split>) -> Result<Self, CorpusError> {
        for id in splits.keys() {
            match self.docs.iter().position(|d| &d.id == id) {
                Some(index) if self.docs[index].label.is_none() => {
                    return Err(CorpusError::SplitOnUnlabeled { index, id: id.clone() })
                }
                Some(_) => {}
                None => return Err(CorpusError::UnknownSplitId(id.clone())),
            }
        }
        self.splits = splits;
        Ok(self)
    }

    /// Documents of one split, in dataset order.
    pub fn split_docs(&self, split: Split) -> Vec<&Document> {
        self.docs
            .iter()
            .filter(|d| self.splits.get(&d.id) == Some(&split))
            .collect()
    }

    /// Keeps documents whose language is in `langs`; split assignments follow.
    pub fn filter_langs(&self, langs: &[Lang]) -> Dataset {
        let docs: Vec<Document> = self.docs.iter().filter(|d| langs.contains(&d.lang)).cloned().collect();
        let splits = self
            .splits
            .iter()
            .filter(|(id, _)| docs.iter().any(|d| &d.id == *id))
            .map(|(id, s)| (id.clone(), *s))
            .collect();
        Dataset { docs, splits }
    }

    /// Languages present, in the fixed report order.
    pub fn langs(&self) -> Vec<Lang> {
        Lang::ALL
            .into_iter()
            .filter(|l| self.docs.iter().any(|d| d.lang == *l))
            .collect()
    }

    pub fn labeled_count(&self) -> usize {
        self.docs.iter().filter(|d| d.label.is_some()).count()
    }

    /// Mutable text access for tests that corrupt data after fitting.
    pub fn docs_mut(&mut self) -> impl Iterator<Item = &mut Document> {
        self.docs.iter_mut()
    }
}

/// Train/dev/test fractions.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SplitRatios {
    pub train: f64,
    pub dev: f64,
    pub test: f64,
}

impl Default for SplitRatios {
    fn default() -> Self {
        SplitRatios {
            train: 0.8,
            dev: 0.1,
            test: 0.1,
        }
    }
}

impl SplitRatios {
    pub fn validate(&self) -> Result<(), CorpusError> {
        let all = [self.train, self.dev, self.test];
        if all.iter().any(|r| !r.is_finite() || *r <= 0.0) {
            return Err(CorpusError::NonPositiveRatio);
        }
        let sum: f64 = all.iter().sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(CorpusError::RatioSum(sum));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum SplitWarning {
    /// A label class with no documents.
    EmptyClass(CanonicalLabel),
    /// Unlabeled documents left out of every split.
    UnlabeledExcluded(usize),
}

impl fmt::Display for SplitWarning {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SplitWarning::EmptyClass(l) => write!(f, "label class {l:?} has no documents"),
            SplitWarning::UnlabeledExcluded(n) => write!(f, "{n} unlabeled documents excluded from all splits"),
        }
    }
}

#[derive(Clone, Debug)]
pub struct SplitOutcome {
    pub dataset: Dataset,
    pub warnings: Vec<SplitWarning>,
}

/// Seeded stratified split.
///
/// Each label's documents are shuffled independently; the dev and test parts
/// take `floor(n_label * ratio)` documents and the remainder goes to train.
pub fn split_dataset(ds: &Dataset, ratios: SplitRatios, seed: u64) -> Result<SplitOutcome, CorpusError> {
    ratios.validate()?;
    let labeled = ds.labeled_count();
    if labeled < 3 {
        return Err(CorpusError::TooFewLabeled(labeled));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut warnings = Vec::new();
    let mut splits = BTreeMap::new();
    for label in CanonicalLabel::ALL {
        let mut ids: Vec<&str> = ds
            .docs
            .iter()
            .filter(|d| d.label == Some(label))
            .map(|d| d.id.as_str())
            .collect();
        if ids.is_empty() {
            warnings.push(SplitWarning::EmptyClass(label));
            continue;
        }
        ids.shuffle(&mut rng);
        let n = ids.len() as f64;
        // The epsilon keeps products such as 10 * 0.1 from flooring one short.
        let n_dev = math::floor(n * ratios.dev + 1e-9) as usize;
        let n_test = math::floor(n * ratios.test + 1e-9) as usize;
        for (i, id) in ids.into_iter().enumerate() {
            let split = if i < n_dev {
                Split::Dev
            } else if i < n_dev + n_test {
                Split::Test
            } else {
                Split::Train
            };
            splits.insert(id.to_string(), split);
        }
    }
    let unlabeled = ds.len() - labeled;
    if unlabeled > 0 {
        warnings.push(SplitWarning::UnlabeledExcluded(unlabeled));
    }
    let dataset = Dataset {
        docs: ds.docs.clone(),
        splits,
    };
    Ok(SplitOutcome { dataset, warnings })
}
