//! Tokenization for Latin-script (en, fr) and CJK (ja, zh) text.

use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::corpus::Lang;

/// How ja/zh text is cut into terms.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CjkMode {
    /// Overlapping character bigrams over the punctuation-stripped stream.
    #[default]
    CharBigram,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct TokenizerConfig {
    pub lowercase: bool,
    pub cjk_mode: CjkMode,
    /// Minimum length in characters for Latin-script tokens.
    pub min_token_len: usize,
}

impl Default for TokenizerConfig {
    fn default() -> Self {
        TokenizerConfig {
            lowercase: true,
            cjk_mode: CjkMode::CharBigram,
            min_token_len: 1,
        }
    }
}

fn push_lower(out: &mut String, c: char, lowercase: bool) {
    if lowercase {
        out.extend(c.to_lowercase());
    } else {
        out.push(c);
    }
}

pub fn tokenize(text: &str, lang: Lang, cfg: &TokenizerConfig) -> Vec<String> {
    if lang.is_cjk() {
        tokenize_cjk(text, cfg)
    } else {
        tokenize_latin(text, cfg)
    }
}

fn tokenize_latin(text: &str, cfg: &TokenizerConfig) -> Vec<String> {
    let min_len = cfg.min_token_len.max(1);
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|t| t.chars().count() >= min_len)
        .map(|t| {
            let mut s = String::with_capacity(t.len());
            for c in t.chars() {
                push_lower(&mut s, c, cfg.lowercase);
            }
            s
        })
        .collect()
}

fn tokenize_cjk(text: &str, cfg: &TokenizerConfig) -> Vec<String> {
    let stream: Vec<char> = text.chars().filter(|c| c.is_alphanumeric()).collect();
    let gram = |chars: &[char]| {
        let mut s = String::new();
        for &c in chars {
            push_lower(&mut s, c, cfg.lowercase);
        }
        s
    };
    match cfg.cjk_mode {
        CjkMode::CharBigram => match stream.len() {
            0 => Vec::new(),
            1 => alloc::vec![gram(&stream)],
            _ => stream.windows(2).map(gram).collect(),
        },
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn cfg() -> TokenizerConfig {
        TokenizerConfig::default()
    }

    #[test]
    fn latin_lowercases_and_drops_punctuation() {
        assert_eq!(tokenize("ESG Risk!", Lang::En, &cfg()), vec!["esg", "risk"]);
        assert_eq!(
            tokenize("L'entreprise  réduit\tses émissions.", Lang::Fr, &cfg()),
            vec!["l", "entreprise", "réduit", "ses", "émissions"]
        );
        assert!(tokenize("", Lang::En, &cfg()).is_empty());
        assert!(tokenize(" ... !", Lang::En, &cfg()).is_empty());
    }

    #[test]
    fn min_token_len_filters_short_tokens() {
        let c = TokenizerConfig {
            min_token_len: 2,
            ..cfg()
        };
        assert_eq!(tokenize("a bc d efg", Lang::En, &c), vec!["bc", "efg"]);
    }

    #[test]
    fn cjk_emits_overlapping_bigrams() {
        assert_eq!(tokenize("abc", Lang::Ja, &cfg()), vec!["ab", "bc"]);
        assert_eq!(tokenize("環境。リスク", Lang::Ja, &cfg()), vec!["環境", "境リ", "リス", "スク"]);
        assert_eq!(tokenize("风", Lang::Zh, &cfg()), vec!["风"]);
        assert!(tokenize("", Lang::Zh, &cfg()).is_empty());
        assert!(tokenize("、。 ", Lang::Zh, &cfg()).is_empty());
    }
}
