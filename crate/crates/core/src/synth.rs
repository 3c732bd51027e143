//! Seeded synthetic data: a class-conditional unigram corpus and
//! class-conditional Gaussian embedding / logits tables.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::corpus::{CanonicalLabel, CorpusError, Dataset, Document, Lang};
use crate::emb::{EmbError, EmbeddingTable, TableKind};
use crate::math;

/// Signal terms per class. Class `c` owns term indices `c*10 .. c*10+10`.
pub const SIGNAL_TERMS_PER_CLASS: usize = 10;
/// Probability that a token is drawn from its class's signal terms.
pub const SIGNAL_RATE: f64 = 0.25;
pub const MIN_DOC_TOKENS: usize = 20;
pub const MAX_DOC_TOKENS: usize = 60;

const CONSONANTS: &[u8] = b"bcdfghjklmnprstvz";
const VOWELS: &[u8] = b"aeiou";
const CJK_BASE: u32 = 0x4E00;
const CJK_SPAN: u32 = 128;

/// Signal term indices of a class.
pub fn signal_terms(label: CanonicalLabel) -> core::ops::Range<usize> {
    let start = label.code() * SIGNAL_TERMS_PER_CLASS;
    start..start + SIGNAL_TERMS_PER_CLASS
}

/// Surface form of vocabulary term `index` in `lang`. Latin terms are
/// consonant-vowel syllables; CJK terms are two ideographs.
pub fn term(index: usize, lang: Lang) -> String {
    if lang.is_cjk() {
        let i = index as u32;
        let first = char::from_u32(CJK_BASE + i % CJK_SPAN).unwrap_or('\u{4E00}');
        let second = char::from_u32(CJK_BASE + CJK_SPAN + i / CJK_SPAN).unwrap_or('\u{4E00}');
        let mut s = String::new();
        s.push(first);
        s.push(second);
        s
    } else {
        let syllables = CONSONANTS.len() * VOWELS.len();
        let syl = |k: usize| {
            let mut s = String::new();
            s.push(CONSONANTS[k / VOWELS.len()] as char);
            s.push(VOWELS[k % VOWELS.len()] as char);
            s
        };
        let mut out = syl(index % syllables);
        let mut rest = index / syllables;
        loop {
            out.push_str(&syl(rest % syllables));
            rest /= syllables;
            if rest == 0 {
                break;
            }
        }
        out
    }
}

/// `n_per_class` documents per label, interleaved by label, 20-60 tokens each.
///
/// With probability [`SIGNAL_RATE`] a token is one of the class's own signal
/// terms; otherwise it is uniform over the whole vocabulary.
pub fn synth_corpus(n_per_class: usize, lang: Lang, vocab_size: usize, seed: u64) -> Result<Dataset, CorpusError> {
    if n_per_class == 0 {
        return Err(CorpusError::EmptyClass);
    }
    if vocab_size < CanonicalLabel::COUNT * SIGNAL_TERMS_PER_CLASS {
        return Err(CorpusError::VocabTooSmall(vocab_size));
    }
    let vocab: Vec<String> = (0..vocab_size).map(|i| term(i, lang)).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut docs = Vec::with_capacity(n_per_class * CanonicalLabel::COUNT);
    for i in 0..n_per_class {
        for label in CanonicalLabel::ALL {
            let len = rng.random_range(MIN_DOC_TOKENS..=MAX_DOC_TOKENS);
            let signal = signal_terms(label);
            let mut text = String::new();
            for t in 0..len {
                let idx = if rng.random_bool(SIGNAL_RATE) {
                    rng.random_range(signal.clone())
                } else {
                    rng.random_range(0..vocab_size)
                };
                if t > 0 && !lang.is_cjk() {
                    text.push(' ');
                }
                text.push_str(&vocab[idx]);
            }
            text.push(if lang.is_cjk() { '。' } else { '.' });
            docs.push(Document {
                id: format!("{}-{:06}", lang.code(), i * CanonicalLabel::COUNT + label.code()),
                text,
                lang,
                label: Some(label),
            });
        }
    }
    Dataset::new(docs)
}

/// Class mean on a regular simplex in the first two coordinates, so every
/// pair of class means is `signal_strength` apart.
fn class_mean(label: CanonicalLabel, dim: usize, signal_strength: f64) -> Vec<f64> {
    let mut mean = alloc::vec![0.0; dim];
    let radius = signal_strength / math::sqrt(3.0);
    let angle = 2.0 * core::f64::consts::PI * label.code() as f64 / 3.0;
    mean[0] = radius * math::cos(angle);
    if dim > 1 {
        mean[1] = radius * math::sin(angle);
    }
    mean
}

/// Test double for an external representation provider: one row per
/// document, drawn from `N(mean(label), I)`. Unlabeled documents get mean 0.
///
/// `kind = Logits` forces three dimensions and puts the class mean on the
/// class's own coordinate instead, so argmax recovers the label.
pub fn fake_table(
    ds: &Dataset,
    model_name: &str,
    kind: TableKind,
    dim: usize,
    signal_strength: f64,
    seed: u64,
) -> Result<EmbeddingTable, EmbError> {
    let dim = if kind == TableKind::Logits { CanonicalLabel::COUNT } else { dim };
    if dim < 2 {
        return Err(EmbError::ZeroDimension);
    }
    let mut table = EmbeddingTable::new(model_name, kind, dim as u32)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for doc in ds.docs() {
        let mean = match (doc.label, kind) {
            (Some(l), TableKind::Logits) => {
                let mut m = alloc::vec![0.0; dim];
                m[l.code()] = signal_strength;
                m
            }
            (Some(l), _) => class_mean(l, dim, signal_strength),
            (None, _) => alloc::vec![0.0; dim],
        };
        let row = mean
            .iter()
            .map(|mu| {
                let z: f64 = StandardNormal.sample(&mut rng);
                (mu + z) as f32
            })
            .collect();
        table.push(&doc.id, row)?;
    }
    Ok(table)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::text::{tokenize, TokenizerConfig};
    use alloc::collections::BTreeSet;

    #[test]
    fn terms_are_unique_and_tokenize_to_themselves() {
        for lang in [Lang::En, Lang::Ja] {
            let terms: BTreeSet<String> = (0..3000).map(|i| term(i, lang)).collect();
            assert_eq!(terms.len(), 3000);
        }
        let cfg = TokenizerConfig::default();
        for i in [0, 1, 84, 85, 9999] {
            let t = term(i, Lang::En);
            assert_eq!(tokenize(&t, Lang::En, &cfg), alloc::vec![t.clone()]);
        }
    }

    #[test]
    fn counts_and_labels() {
        let ds = synth_corpus(5, Lang::En, 50, 1).unwrap();
        assert_eq!(ds.len(), 15);
        for l in CanonicalLabel::ALL {
            assert_eq!(ds.docs().iter().filter(|d| d.label == Some(l)).count(), 5);
        }
        for d in ds.docs() {
            let n = d.text.split(' ').count();
            assert!((MIN_DOC_TOKENS..=MAX_DOC_TOKENS).contains(&n));
        }
    }

    #[test]
    fn deterministic() {
        assert_eq!(synth_corpus(4, Lang::Zh, 40, 9).unwrap(), synth_corpus(4, Lang::Zh, 40, 9).unwrap());
        assert_ne!(synth_corpus(4, Lang::En, 40, 9).unwrap(), synth_corpus(4, Lang::En, 40, 10).unwrap());
    }

    #[test]
    fn cjk_text_has_no_separators() {
        let ds = synth_corpus(2, Lang::Ja, 40, 3).unwrap();
        for d in ds.docs() {
            assert!(!d.text.contains(' '));
            assert!(d.text.ends_with('。'));
        }
    }

    #[test]
    fn preconditions() {
        assert_eq!(synth_corpus(0, Lang::En, 50, 0).unwrap_err(), CorpusError::EmptyClass);
        assert_eq!(synth_corpus(1, Lang::En, 29, 0).unwrap_err(), CorpusError::VocabTooSmall(29));
    }

    #[test]
    fn signal_terms_are_enriched_in_own_class() {
        // Count occurrences over 100 generated documents per class.
        let ds = synth_corpus(100, Lang::En, 200, 11).unwrap();
        let vocab: Vec<String> = (0..200).map(|i| term(i, Lang::En)).collect();
        for owner in CanonicalLabel::ALL {
            let signal: BTreeSet<&str> = signal_terms(owner).map(|i| vocab[i].as_str()).collect();
            let rate = |label: CanonicalLabel| {
                let (mut hits, mut total) = (0usize, 0usize);
                for d in ds.docs().iter().filter(|d| d.label == Some(label)) {
                    for tok in d.text.trim_end_matches('.').split(' ') {
                        total += 1;
                        hits += signal.contains(tok) as usize;
                    }
                }
                hits as f64 / total as f64
            };
            let own = rate(owner);
            for other in CanonicalLabel::ALL.into_iter().filter(|l| *l != owner) {
                assert!(own > 3.0 * rate(other), "{owner:?} {own} vs {other:?} {}", rate(other));
            }
        }
    }

    #[test]
    fn fake_tables_are_deterministic_and_complete() {
        let ds = synth_corpus(3, Lang::En, 40, 0).unwrap();
        let a = fake_table(&ds, "fake", TableKind::Embedding, 8, 5.0, 2).unwrap();
        let b = fake_table(&ds, "fake", TableKind::Embedding, 8, 5.0, 2).unwrap();
        assert_eq!(a.encode(), b.encode());
        assert_eq!(a.len(), ds.len());
        let l = fake_table(&ds, "fake-logits", TableKind::Logits, 99, 5.0, 2).unwrap();
        assert_eq!(l.dim(), 3);
        assert!(fake_table(&ds, "x", TableKind::Embedding, 1, 5.0, 2).is_err());
    }

    #[test]
    fn class_means_are_signal_strength_apart() {
        for (a, b) in [(0, 1), (0, 2), (1, 2)] {
            let ma = class_mean(CanonicalLabel::ALL[a], 4, 5.0);
            let mb = class_mean(CanonicalLabel::ALL[b], 4, 5.0);
            let d: f64 = ma.iter().zip(&mb).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt();
            assert!((d - 5.0).abs() < 1e-12);
        }
    }
}
