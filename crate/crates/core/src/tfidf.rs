//! Smoothed TF-IDF over a fitted vocabulary.
//!
//! Weights follow `idf(t) = ln((1 + n_docs) / (1 + df(t))) + 1`, raw term
//! values are `count * idf`, and every non-empty document vector is
//! L2-normalized.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::Document;
use crate::math;
use crate::text::{tokenize, TokenizerConfig};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TfidfError {
    #[error("no training document produced a token")]
    NoTokens,
    #[error("no term reaches min_df = {min_df}")]
    EmptyVocabulary { min_df: usize },
    #[error("min_df must be at least 1")]
    ZeroMinDf,
    #[error("serialized vocabulary is inconsistent: {0}")]
    Corrupt(&'static str),
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct TfidfConfig {
    #[serde(flatten)]
    pub tokenizer: TokenizerConfig,
    pub min_df: usize,
    pub max_features: Option<usize>,
}

impl Default for TfidfConfig {
    fn default() -> Self {
        TfidfConfig {
            tokenizer: TokenizerConfig::default(),
            min_df: 2,
            max_features: Some(20_000),
        }
    }
}

/// Terms in lexicographic order; a term's index is its position.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Vocabulary {
    terms: Vec<String>,
    df: Vec<u32>,
    n_docs: u32,
}

impl Vocabulary {
    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn index_of(&self, term: &str) -> Option<usize> {
        self.terms.binary_search_by(|t| t.as_str().cmp(term)).ok()
    }

    pub fn terms(&self) -> &[String] {
        &self.terms
    }

    pub fn document_frequency(&self) -> &[u32] {
        &self.df
    }

    pub fn n_docs(&self) -> u32 {
        self.n_docs
    }
}

/// Sparse vector with strictly increasing indices and nonzero values.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SparseVector {
    dim: usize,
    entries: Vec<(usize, f64)>,
}

impl SparseVector {
    pub fn empty(dim: usize) -> Self {
        SparseVector {
            dim,
            entries: Vec::new(),
        }
    }

    /// Sorts by index, sums duplicates and drops zeros. Panics on an index `>= dim`.
    pub fn from_pairs(dim: usize, mut pairs: Vec<(usize, f64)>) -> Self {
        pairs.sort_by_key(|p| p.0);
        let mut entries: Vec<(usize, f64)> = Vec::with_capacity(pairs.len());
        for (i, v) in pairs {
            assert!(i < dim, "index {i} out of range for dimension {dim}");
            match entries.last_mut() {
                Some(last) if last.0 == i => last.1 += v,
                _ => entries.push((i, v)),
            }
        }
        entries.retain(|e| e.1 != 0.0);
        SparseVector { dim, entries }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn entries(&self) -> &[(usize, f64)] {
        &self.entries
    }

    pub fn nnz(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn norm(&self) -> f64 {
        math::sqrt(self.entries.iter().map(|e| e.1 * e.1).sum())
    }

    pub fn to_dense(&self) -> Vec<f64> {
        let mut out = alloc::vec![0.0; self.dim];
        for &(i, v) in &self.entries {
            out[i] = v;
        }
        out
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "TfidfRepr", into = "TfidfRepr")]
pub struct TfidfModel {
    config: TfidfConfig,
    vocab: Vocabulary,
    idf: Vec<f64>,
}

/// On-disk shape: the idf vector is recomputed from df and n_docs.
#[derive(Clone, Serialize, Deserialize)]
struct TfidfRepr {
    config: TfidfConfig,
    n_docs: u32,
    terms: Vec<String>,
    df: Vec<u32>,
}

impl From<TfidfModel> for TfidfRepr {
    fn from(m: TfidfModel) -> Self {
        TfidfRepr {
            config: m.config,
            n_docs: m.vocab.n_docs,
            terms: m.vocab.terms,
            df: m.vocab.df,
        }
    }
}

impl TryFrom<TfidfRepr> for TfidfModel {
    type Error = TfidfError;

    fn try_from(r: TfidfRepr) -> Result<Self, Self::Error> {
        if r.terms.len() != r.df.len() {
            return Err(TfidfError::Corrupt("terms and df lengths differ"));
        }
        if r.terms.windows(2).any(|w| w[0] >= w[1]) {
            return Err(TfidfError::Corrupt("terms not strictly sorted"));
        }
        if r.df.iter().any(|&d| d == 0 || d > r.n_docs) {
            return Err(TfidfError::Corrupt("document frequency out of range"));
        }
        Ok(TfidfModel::from_vocab(
            r.config,
            Vocabulary {
                terms: r.terms,
                df: r.df,
                n_docs: r.n_docs,
            },
        ))
    }
}

impl TfidfModel {
    fn from_vocab(config: TfidfConfig, vocab: Vocabulary) -> Self {
        let n = vocab.n_docs as f64;
        let idf = vocab
            .df
            .iter()
            .map(|&df| math::ln((1.0 + n) / (1.0 + df as f64)) + 1.0)
            .collect();
        TfidfModel { config, vocab, idf }
    }

    pub fn vocab(&self) -> &Vocabulary {
        &self.vocab
    }

    pub fn idf(&self) -> &[f64] {
        &self.idf
    }

    pub fn config(&self) -> &TfidfConfig {
        &self.config
    }

    pub fn dim(&self) -> usize {
        self.vocab.len()
    }

    pub fn idf_of(&self, term: &str) -> Option<f64> {
        self.vocab.index_of(term).map(|i| self.idf[i])
    }

    /// L2-normalized TF-IDF vector; out-of-vocabulary tokens are ignored.
    pub fn transform(&self, doc: &Document) -> SparseVector {
        let mut counts: BTreeMap<usize, u32> = BTreeMap::new();
        for tok in tokenize(&doc.text, doc.lang, &self.config.tokenizer) {
            if let Some(i) = self.vocab.index_of(&tok) {
                *counts.entry(i).or_insert(0) += 1;
            }
        }
        let mut entries: Vec<(usize, f64)> = counts
            .into_iter()
            .map(|(i, c)| (i, c as f64 * self.idf[i]))
            .collect();
        let norm = math::sqrt(entries.iter().map(|e| e.1 * e.1).sum());
        if norm > 0.0 {
            for e in &mut entries {
                e.1 /= norm;
            }
        }
        SparseVector {
            dim: self.dim(),
            entries,
        }
    }

    pub fn transform_all<'a, I>(&self, docs: I) -> Vec<SparseVector>
    where
        I: IntoIterator<Item = &'a Document>,
    {
        docs.into_iter().map(|d| self.transform(d)).collect()
    }
}

/// Fits vocabulary and idf weights on the given (training) documents.
pub fn fit_tfidf<'a, I>(train_docs: I, config: &TfidfConfig) -> Result<TfidfModel, TfidfError>
where
    I: IntoIterator<Item = &'a Document>,
{
    if config.min_df == 0 {
        return Err(TfidfError::ZeroMinDf);
    }
    let mut df: BTreeMap<String, u32> = BTreeMap::new();
    let mut n_docs = 0u32;
    let mut any_token = false;
    for doc in train_docs {
        n_docs += 1;
        let uniq: BTreeSet<String> = tokenize(&doc.text, doc.lang, &config.tokenizer).into_iter().collect();
        any_token |= !uniq.is_empty();
        for t in uniq {
            *df.entry(t).or_insert(0) += 1;
        }
    }
    if !any_token {
        return Err(TfidfError::NoTokens);
    }
    let mut kept: Vec<(String, u32)> = df
        .into_iter()
        .filter(|(_, d)| *d as usize >= config.min_df)
        .collect();
    if kept.is_empty() {
        return Err(TfidfError::EmptyVocabulary { min_df: config.min_df });
    }
    if let Some(cap) = config.max_features {
        if kept.len() > cap {
            // Highest df first, ties lexicographic (the map order is already lexicographic).
            kept.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
            kept.truncate(cap);
            kept.sort_by(|a, b| a.0.cmp(&b.0));
        }
    }
    let (terms, df) = kept.into_iter().unzip();
    Ok(TfidfModel::from_vocab(
        config.clone(),
        Vocabulary { terms, df, n_docs },
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::Lang;
    use alloc::string::ToString;
    use alloc::vec;

    fn doc(text: &str) -> Document {
        Document {
            id: text.to_string(),
            text: text.to_string(),
            lang: Lang::En,
            label: None,
        }
    }

    fn cfg(min_df: usize) -> TfidfConfig {
        TfidfConfig {
            min_df,
            ..TfidfConfig::default()
        }
    }

    #[test]
    fn two_doc_idf_by_hand() {
        let docs = [doc("a b"), doc("a c")];
        let m = fit_tfidf(&docs, &cfg(1)).unwrap();
        assert_eq!(m.vocab().terms(), &["a", "b", "c"]);
        assert_eq!(m.vocab().document_frequency(), &[2, 1, 1]);
        // ln(3/3) + 1 and ln(3/2) + 1
        assert!((m.idf_of("a").unwrap() - 1.0).abs() < 1e-15);
        assert!((m.idf_of("b").unwrap() - 1.405_465_108_108_164_4).abs() < 1e-12);
        assert!((m.idf_of("c").unwrap() - 1.405_465_108_108_164_4).abs() < 1e-12);
    }

    #[test]
    fn transform_matches_hand_computation() {
        let docs = [doc("a b"), doc("a c")];
        let m = fit_tfidf(&docs, &cfg(1)).unwrap();
        let v = m.transform(&doc("a a b"));
        let (a, b): (f64, f64) = (2.0, 1.405_465_108_108_164_4);
        let n = crate::math::sqrt(a * a + b * b);
        assert_eq!(v.entries().len(), 2);
        assert_eq!(v.entries()[0].0, 0);
        assert_eq!(v.entries()[1].0, 1);
        assert!((v.entries()[0].1 - a / n).abs() < 1e-12);
        assert!((v.entries()[1].1 - b / n).abs() < 1e-12);
        assert!((v.norm() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn identical_docs_give_unit_idf() {
        let docs = [doc("x y z"), doc("x y z"), doc("x y z")];
        let m = fit_tfidf(&docs, &cfg(1)).unwrap();
        assert!(m.idf().iter().all(|&w| (w - 1.0).abs() < 1e-15));
    }

    #[test]
    fn min_df_can_empty_the_vocabulary() {
        let docs = [doc("a b"), doc("a c")];
        assert_eq!(
            fit_tfidf(&docs, &cfg(3)).unwrap_err(),
            TfidfError::EmptyVocabulary { min_df: 3 }
        );
        assert_eq!(fit_tfidf(&[doc("!!")], &cfg(1)).unwrap_err(), TfidfError::NoTokens);
    }

    #[test]
    fn oov_only_doc_is_empty() {
        let m = fit_tfidf(&[doc("a b"), doc("a c")], &cfg(1)).unwrap();
        let v = m.transform(&doc("zzz qqq"));
        assert!(v.is_empty());
        assert_eq!(v.dim(), 3);
    }

    #[test]
    fn max_features_keeps_highest_df_with_lexicographic_ties() {
        let docs = [doc("a b c d"), doc("a c d"), doc("a d e")];
        let m = fit_tfidf(
            &docs,
            &TfidfConfig {
                min_df: 1,
                max_features: Some(3),
                ..TfidfConfig::default()
            },
        )
        .unwrap();
        // df: a=3, d=3, c=2, b=1, e=1
        assert_eq!(m.vocab().terms(), &["a", "c", "d"]);
        let m = fit_tfidf(
            &docs,
            &TfidfConfig {
                min_df: 1,
                max_features: Some(4),
                ..TfidfConfig::default()
            },
        )
        .unwrap();
        assert_eq!(m.vocab().terms(), &["a", "b", "c", "d"]);
    }

    #[test]
    fn sparse_from_pairs_canonicalizes() {
        let v = SparseVector::from_pairs(5, vec![(3, 1.0), (1, 2.0), (3, 0.5), (4, 0.0)]);
        assert_eq!(v.entries(), &[(1, 2.0), (3, 1.5)]);
        assert_eq!(v.to_dense(), vec![0.0, 2.0, 0.0, 1.5, 0.0]);
    }
}
