//! Word-level tokenization, vocabularies and the offset map back to raw text.

use alloc::collections::BTreeMap;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use crate::{Error, Result};

pub type TokenId = u32;

pub const CLS: TokenId = 0;
pub const SEP: TokenId = 1;
pub const MASK: TokenId = 2;
pub const PAD: TokenId = 3;
pub const UNK: TokenId = 4;

/// Special tokens in id order. Every vocabulary starts with these.
pub const SPECIAL_TOKENS: [&str; 5] = ["[CLS]", "[SEP]", "[MASK]", "[PAD]", "[UNK]"];

/// Closed word vocabulary with contiguous ids.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocabulary {
    token_to_id: BTreeMap<String, TokenId>,
    id_to_token: Vec<String>,
}

impl Vocabulary {
    /// Counts normalized tokens over `corpus` and keeps those seen at least
    /// `min_count` times. Ids: specials, then descending count, ties broken
    /// lexicographically.
    pub fn build<S: AsRef<str>>(corpus: &[S], min_count: usize) -> Result<Self> {
        if corpus.is_empty() {
            return Err(Error::EmptyCorpus);
        }
        let min_count = min_count.max(1);
        let mut counts: BTreeMap<String, usize> = BTreeMap::new();
        for doc in corpus {
            for (start, end) in split_offsets(doc.as_ref()) {
                *counts.entry(doc.as_ref()[start..end].to_lowercase()).or_default() += 1;
            }
        }
        let mut kept: Vec<(String, usize)> = counts
            .into_iter()
            .filter(|(tok, c)| *c >= min_count && !SPECIAL_TOKENS.contains(&tok.as_str()))
            .collect();
        // BTreeMap iteration already orders ties lexicographically; the sort is stable.
        kept.sort_by_key(|k| core::cmp::Reverse(k.1));
        Self::from_tokens(
            SPECIAL_TOKENS
                .iter()
                .map(|s| s.to_string())
                .chain(kept.into_iter().map(|(t, _)| t)),
        )
    }

    /// Rebuilds a vocabulary from its id-ordered token list, e.g. a vocabulary
    /// file read line by line.
    pub fn from_tokens<I: IntoIterator<Item = String>>(tokens: I) -> Result<Self> {
        let id_to_token: Vec<String> = tokens.into_iter().collect();
        for (i, special) in SPECIAL_TOKENS.iter().enumerate() {
            if id_to_token.get(i).map(String::as_str) != Some(*special) {
                return Err(Error::InvalidVocabulary(alloc::format!(
                    "line {} must be {special}",
                    i + 1
                )));
            }
        }
        let mut token_to_id = BTreeMap::new();
        for (id, tok) in id_to_token.iter().enumerate() {
            if tok.is_empty() || tok.chars().any(char::is_whitespace) {
                return Err(Error::InvalidVocabulary(alloc::format!(
                    "token {id} is empty or contains whitespace"
                )));
            }
            if token_to_id.insert(tok.clone(), id as TokenId).is_some() {
                return Err(Error::InvalidVocabulary(alloc::format!("duplicate token {tok:?}")));
            }
        }
        Ok(Vocabulary {
            token_to_id,
            id_to_token,
        })
    }

    pub fn len(&self) -> usize {
        self.id_to_token.len()
    }

    pub fn is_empty(&self) -> bool {
        self.id_to_token.is_empty()
    }

    /// Id of a (normalized) token, `UNK` when absent.
    pub fn id(&self, token: &str) -> TokenId {
        self.token_to_id.get(token).copied().unwrap_or(UNK)
    }

    pub fn token(&self, id: TokenId) -> Option<&str> {
        self.id_to_token.get(id as usize).map(String::as_str)
    }

    /// Tokens in id order.
    pub fn tokens(&self) -> &[String] {
        &self.id_to_token
    }
}

/// A raw string, its token ids and the byte ranges each token came from.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TokenizedText {
    pub raw: String,
    pub token_ids: Vec<TokenId>,
    /// `(start, end)` byte offsets into `raw`, strictly increasing.
    pub offsets: Vec<(usize, usize)>,
    tokens: Vec<String>,
}

impl TokenizedText {
    pub fn len(&self) -> usize {
        self.token_ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.token_ids.is_empty()
    }

    /// Normalized text of token `i`. Unknown tokens keep their text here.
    pub fn token(&self, i: usize) -> &str {
        &self.tokens[i]
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    /// Normalized text of tokens `[start, end)`, with a single space wherever
    /// the raw text had whitespace between two tokens.
    pub fn span_text(&self, start: usize, end: usize) -> String {
        let mut out = String::new();
        for i in start..end {
            if i > start && self.offsets[i - 1].1 < self.offsets[i].0 {
                out.push(' ');
            }
            out.push_str(&self.tokens[i]);
        }
        out
    }

    /// Raw (case-preserving) text covering tokens `[start, end)`.
    pub fn raw_slice(&self, start: usize, end: usize) -> &str {
        if start >= end {
            return "";
        }
        &self.raw[self.offsets[start].0..self.offsets[end - 1].1]
    }

    /// Byte range of tokens `[start, end)` in `raw`.
    pub fn byte_range(&self, start: usize, end: usize) -> (usize, usize) {
        (self.offsets[start].0, self.offsets[end - 1].1)
    }

    pub fn detokenize(&self) -> String {
        self.span_text(0, self.len())
    }

    /// Token ranges of sentences, split after `.`, `!` and `?` tokens.
    pub fn sentences(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        let mut start = 0;
        for (i, tok) in self.tokens.iter().enumerate() {
            if matches!(tok.as_str(), "." | "!" | "?") {
                out.push((start, i + 1));
                start = i + 1;
            }
        }
        if start < self.len() {
            out.push((start, self.len()));
        }
        out
    }

    /// Sentence range containing token `i`.
    pub fn sentence_of(&self, i: usize) -> (usize, usize) {
        self.sentences()
            .into_iter()
            .find(|&(s, e)| s <= i && i < e)
            .unwrap_or((0, self.len()))
    }
}

/// Lowercases and collapses whitespace runs into one space, trimming both ends.
pub fn normalize(raw: &str) -> String {
    let lower = raw.to_lowercase();
    let mut out = String::with_capacity(lower.len());
    for word in lower.split_whitespace() {
        if !out.is_empty() {
            out.push(' ');
        }
        out.push_str(word);
    }
    out
}

/// Splits on whitespace and makes every ASCII punctuation character its own
/// token. Returns byte ranges.
pub fn split_offsets(raw: &str) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    let mut word_start: Option<usize> = None;
    for (i, c) in raw.char_indices() {
        if c.is_whitespace() || c.is_ascii_punctuation() {
            if let Some(s) = word_start.take() {
                out.push((s, i));
            }
            if c.is_ascii_punctuation() {
                out.push((i, i + 1));
            }
        } else if word_start.is_none() {
            word_start = Some(i);
        }
    }
    if let Some(s) = word_start {
        out.push((s, raw.len()));
    }
    out
}

/// Tokenizes `raw` against `vocab`. Total and deterministic.
pub fn tokenize(raw: &str, vocab: &Vocabulary) -> TokenizedText {
    let offsets = split_offsets(raw);
    let tokens: Vec<String> = offsets.iter().map(|&(s, e)| raw[s..e].to_lowercase()).collect();
    let token_ids = tokens.iter().map(|t| vocab.id(t)).collect();
    TokenizedText {
        raw: raw.to_string(),
        token_ids,
        offsets,
        tokens,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn specials_then_frequency_order() {
        let v = Vocabulary::build(&["a b", "b c"], 2).unwrap();
        assert_eq!(v.len(), 6);
        assert_eq!(v.id("b"), 5);
        assert_eq!(v.id("a"), UNK);

        let v = Vocabulary::build(&["x"], 1).unwrap();
        assert_eq!(v.id("x"), 5);
        for (i, s) in SPECIAL_TOKENS.iter().enumerate() {
            assert_eq!(v.id(s), i as TokenId);
            assert_eq!(v.token(i as TokenId), Some(*s));
        }
    }

    #[test]
    fn ties_are_lexicographic() {
        let v = Vocabulary::build(&["b a c c"], 1).unwrap();
        assert_eq!(&v.tokens()[5..], &["c", "a", "b"]);
    }

    #[test]
    fn empty_corpus_is_rejected() {
        let empty: [&str; 0] = [];
        assert_eq!(Vocabulary::build(&empty, 1), Err(Error::EmptyCorpus));
    }

    #[test]
    fn from_tokens_checks_specials() {
        let bad = vec!["[SEP]".to_string(), "[CLS]".to_string()];
        assert!(Vocabulary::from_tokens(bad).is_err());
    }

    #[test]
    fn splits_words_and_punctuation() {
        let v = Vocabulary::build(&["about 8 killed ."], 1).unwrap();
        let t = tokenize("About 8 killed.", &v);
        assert_eq!(t.tokens(), &["about", "8", "killed", "."]);
        assert_eq!(t.offsets, vec![(0, 5), (6, 7), (8, 14), (14, 15)]);
        assert!(t.token_ids.iter().all(|&id| id != UNK));
        assert_eq!(t.detokenize(), "about 8 killed.");
    }

    #[test]
    fn empty_string_has_no_tokens() {
        let v = Vocabulary::build(&["x"], 1).unwrap();
        assert!(tokenize("", &v).is_empty());
        assert!(tokenize("   \n", &v).is_empty());
    }

    #[test]
    fn unknown_tokens_keep_offsets() {
        let v = Vocabulary::build(&["known"], 1).unwrap();
        let t = tokenize("known Mystery", &v);
        assert_eq!(t.token_ids, vec![5, UNK]);
        assert_eq!(t.raw_slice(1, 2), "Mystery");
        assert_eq!(t.token(1), "mystery");
    }

    #[test]
    fn sentences_split_on_terminal_punctuation() {
        let v = Vocabulary::build(&["x"], 1).unwrap();
        let t = tokenize("a b. c! d e? f", &v);
        assert_eq!(t.sentences(), vec![(0, 3), (3, 5), (5, 8), (8, 9)]);
        assert_eq!(t.sentence_of(4), (3, 5));
    }

    #[test]
    fn normalize_collapses_whitespace() {
        assert_eq!(normalize("  A\t\tB \n c "), "a b c");
    }
}
