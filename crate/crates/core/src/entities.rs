//! Entity detection and fuzzy ranking of source occurrences.

use alloc::collections::BTreeSet;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::cmp::Ordering;

use crate::textcore::TokenizedText;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum EntityKind {
    Number,
    Date,
    Proper,
    Quantity,
}

impl EntityKind {
    pub fn as_str(self) -> &'static str {
        match self {
            EntityKind::Number => "NUMBER",
            EntityKind::Date => "DATE",
            EntityKind::Proper => "PROPER",
            EntityKind::Quantity => "QUANTITY",
        }
    }
}

/// Entity occupying tokens `[token_start, token_end)` of some text.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EntitySpan {
    pub token_start: usize,
    pub token_end: usize,
    /// Normalized text of the covered tokens.
    pub surface: String,
    pub kind: EntityKind,
}

impl EntitySpan {
    pub fn new(text: &TokenizedText, token_start: usize, token_end: usize, kind: EntityKind) -> Self {
        EntitySpan {
            token_start,
            token_end,
            surface: text.span_text(token_start, token_end),
            kind,
        }
    }

    pub fn len(&self) -> usize {
        self.token_end - self.token_start
    }

    pub fn is_empty(&self) -> bool {
        self.token_end == self.token_start
    }
}

/// Anything that can find entities in tokenized text.
///
/// Implementations must return non-overlapping spans sorted by `token_start`.
pub trait EntityTagger {
    fn tag(&self, text: &TokenizedText) -> Vec<EntitySpan>;
}

/// Lowercase proper-noun tokens.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Lexicon {
    words: BTreeSet<String>,
}

impl Lexicon {
    pub fn new<I, S>(words: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        Lexicon {
            words: words
                .into_iter()
                .map(|w| w.as_ref().trim().to_lowercase())
                .filter(|w| !w.is_empty())
                .collect(),
        }
    }

    pub fn contains(&self, token: &str) -> bool {
        self.words.contains(token)
    }

    pub fn words(&self) -> impl Iterator<Item = &str> {
        self.words.iter().map(String::as_str)
    }
}

const MONTHS: [&str; 12] = [
    "january", "february", "march", "april", "may", "june", "july", "august", "september",
    "october", "november", "december",
];

const NUMBER_WORDS: [&str; 32] = [
    "zero", "one", "two", "three", "four", "five", "six", "seven", "eight", "nine", "ten",
    "eleven", "twelve", "thirteen", "fourteen", "fifteen", "sixteen", "seventeen", "eighteen",
    "nineteen", "twenty", "thirty", "forty", "fifty", "sixty", "seventy", "eighty", "ninety",
    "hundred", "thousand", "million", "billion",
];

const UNITS: [&str; 22] = [
    "percent", "km", "kilometres", "kilometers", "miles", "mph", "kg", "kilograms", "tonnes",
    "tons", "metres", "meters", "feet", "dollars", "euros", "pounds", "degrees", "hours",
    "minutes", "days", "weeks", "years",
];

fn is_digit_token(tok: &str) -> bool {
    !tok.is_empty() && tok.bytes().all(|b| b.is_ascii_digit())
}

fn is_number_token(tok: &str) -> bool {
    is_digit_token(tok) || NUMBER_WORDS.contains(&tok)
}

fn is_month(tok: &str) -> bool {
    MONTHS.contains(&tok)
}

fn is_unit(tok: &str) -> bool {
    UNITS.contains(&tok)
}

/// Deterministic rule tagger.
///
/// Rules, tried in order at each position: a month name with an optional
/// leading day and trailing day/year digits is a DATE; a number run followed by
/// a unit word is a QUANTITY; a maximal run of digit or number-word tokens is a
/// NUMBER; a maximal run of lexicon tokens is PROPER.
#[derive(Debug, Clone, Default)]
pub struct RuleTagger {
    lexicon: Lexicon,
}

impl RuleTagger {
    pub fn new(lexicon: Lexicon) -> Self {
        RuleTagger { lexicon }
    }

    pub fn lexicon(&self) -> &Lexicon {
        &self.lexicon
    }

    fn date_at(&self, toks: &[String], i: usize) -> Option<usize> {
        let (lead, month_at) = if is_digit_token(&toks[i]) && toks.get(i + 1).is_some_and(|t| is_month(t)) {
            (true, i + 1)
        } else if is_month(&toks[i]) {
            (false, i)
        } else {
            return None;
        };
        let mut end = month_at + 1;
        let max_trailing = if lead { 1 } else { 2 };
        while end - month_at - 1 < max_trailing && toks.get(end).is_some_and(|t| is_digit_token(t)) {
            end += 1;
        }
        Some(end)
    }

    fn number_run(toks: &[String], i: usize) -> usize {
        let mut end = i;
        while end < toks.len() && is_number_token(&toks[end]) {
            end += 1;
        }
        end
    }
}

impl EntityTagger for RuleTagger {
    fn tag(&self, text: &TokenizedText) -> Vec<EntitySpan> {
        let toks = text.tokens();
        let mut out = Vec::new();
        let mut i = 0;
        while i < toks.len() {
            if let Some(end) = self.date_at(toks, i) {
                out.push(EntitySpan::new(text, i, end, EntityKind::Date));
                i = end;
                continue;
            }
            let num_end = Self::number_run(toks, i);
            if num_end > i {
                // A month right after the run starts a date instead.
                let num_end = if num_end > i + 1 && toks.get(num_end).is_some_and(|t| is_month(t)) {
                    num_end - 1
                } else {
                    num_end
                };
                if toks.get(num_end).is_some_and(|t| is_unit(t)) {
                    out.push(EntitySpan::new(text, i, num_end + 1, EntityKind::Quantity));
                    i = num_end + 1;
                } else {
                    out.push(EntitySpan::new(text, i, num_end, EntityKind::Number));
                    i = num_end;
                }
                continue;
            }
            if self.lexicon.contains(&toks[i]) {
                let mut end = i + 1;
                while end < toks.len() && self.lexicon.contains(&toks[end]) {
                    end += 1;
                }
                out.push(EntitySpan::new(text, i, end, EntityKind::Proper));
                i = end;
                continue;
            }
            i += 1;
        }
        out
    }
}

/// Character-level Levenshtein distance with unit costs.
pub fn edit_distance(a: &str, b: &str) -> usize {
    let a: Vec<char> = a.chars().collect();
    let b: Vec<char> = b.chars().collect();
    if a.is_empty() {
        return b.len();
    }
    let mut prev: Vec<usize> = (0..=b.len()).collect();
    let mut cur = alloc::vec![0usize; b.len() + 1];
    for (i, ca) in a.iter().enumerate() {
        cur[0] = i + 1;
        for (j, cb) in b.iter().enumerate() {
            let sub = prev[j] + usize::from(ca != cb);
            cur[j + 1] = sub.min(prev[j + 1] + 1).min(cur[j] + 1);
        }
        core::mem::swap(&mut prev, &mut cur);
    }
    prev[b.len()]
}

/// `1 - distance / max(|a|, |b|, 1)`, lengths in chars.
pub fn fuzzy_similarity(a: &str, b: &str) -> f64 {
    let longest = a.chars().count().max(b.chars().count()).max(1);
    1.0 - edit_distance(a, b) as f64 / longest as f64
}

/// Source occurrences of an entity, best match first.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct OccurrenceRanking {
    pub candidates: Vec<(EntitySpan, f64)>,
}

impl OccurrenceRanking {
    pub fn best(&self) -> Option<&EntitySpan> {
        self.candidates.first().map(|(span, _)| span)
    }

    pub fn is_empty(&self) -> bool {
        self.candidates.is_empty()
    }
}

/// Finds every token window of `source` whose text equals `entity.surface`
/// and scores it by the similarity between `query_sentence` and the source
/// sentence holding it. Ties go to the earlier position.
pub fn rank_occurrences(entity: &EntitySpan, query_sentence: &str, source: &TokenizedText) -> OccurrenceRanking {
    let width = entity.len();
    if width == 0 || width > source.len() {
        return OccurrenceRanking::default();
    }
    let target = entity.surface.to_lowercase();
    let sentences = source.sentences();
    let mut candidates = Vec::new();
    for start in 0..=source.len() - width {
        if !target.starts_with(source.token(start)) {
            continue;
        }
        if source.span_text(start, start + width) != target {
            continue;
        }
        let (s0, s1) = sentences
            .iter()
            .copied()
            .find(|&(s, e)| s <= start && start < e)
            .unwrap_or((0, source.len()));
        let score = fuzzy_similarity(query_sentence, &source.span_text(s0, s1));
        candidates.push((
            EntitySpan {
                token_start: start,
                token_end: start + width,
                surface: entity.surface.to_string(),
                kind: entity.kind,
            },
            score,
        ));
    }
    candidates.sort_by(|a, b| {
        b.1.partial_cmp(&a.1)
            .unwrap_or(Ordering::Equal)
            .then(a.0.token_start.cmp(&b.0.token_start))
    });
    OccurrenceRanking { candidates }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::textcore::{tokenize, Vocabulary};
    use alloc::vec;

    fn text(s: &str) -> TokenizedText {
        tokenize(s, &Vocabulary::build(&["x"], 1).unwrap())
    }

    fn tagger() -> RuleTagger {
        RuleTagger::new(Lexicon::new(["central", "china", "smith", "alice"]))
    }

    #[test]
    fn numbers_in_casualty_report() {
        let t = text("8 killed , 4 injured");
        let spans = tagger().tag(&t);
        assert_eq!(spans.len(), 2);
        assert_eq!((spans[0].token_start, spans[0].token_end), (0, 1));
        assert_eq!((spans[1].token_start, spans[1].token_end), (3, 4));
        assert!(spans.iter().all(|s| s.kind == EntityKind::Number));
    }

    #[test]
    fn no_entities_in_plain_text() {
        assert!(tagger().tag(&text("the cat sat on the mat .")).is_empty());
    }

    #[test]
    fn full_date_is_one_span() {
        let spans = tagger().tag(&text("25 april 2015"));
        assert_eq!(spans.len(), 1);
        assert_eq!(spans[0].kind, EntityKind::Date);
        assert_eq!((spans[0].token_start, spans[0].token_end), (0, 3));
        assert_eq!(spans[0].surface, "25 april 2015");
    }

    #[test]
    fn quantities_and_proper_runs() {
        let t = text("Alice Smith drove 12 km to central China on may 3.");
        let spans = tagger().tag(&t);
        let kinds: Vec<_> = spans.iter().map(|s| (s.kind, s.surface.as_str())).collect();
        assert_eq!(
            kinds,
            vec![
                (EntityKind::Proper, "alice smith"),
                (EntityKind::Quantity, "12 km"),
                (EntityKind::Proper, "central china"),
                (EntityKind::Date, "may 3"),
            ]
        );
    }

    #[test]
    fn number_words_form_runs() {
        let spans = tagger().tag(&text("twenty five people"));
        assert_eq!(spans.len(), 1);
        assert_eq!(spans[0].surface, "twenty five");
    }

    #[test]
    fn similarity_edge_cases() {
        assert_eq!(fuzzy_similarity("storm", "storm"), 1.0);
        assert_eq!(fuzzy_similarity("abc", ""), 0.0);
        assert_eq!(fuzzy_similarity("", ""), 1.0);
        assert!((fuzzy_similarity("kitten", "sitting") - (1.0 - 3.0 / 7.0)).abs() < 1e-15);
    }

    #[test]
    fn ranking_prefers_matching_sentence() {
        let src = text("rain fell on 8 roads . 8 people were killed in the storm .");
        let entity = EntitySpan {
            token_start: 0,
            token_end: 1,
            surface: "8".into(),
            kind: EntityKind::Number,
        };
        let r = rank_occurrences(&entity, "8 people were killed in the storm .", &src);
        assert_eq!(r.candidates.len(), 2);
        assert_eq!(r.candidates[0].0.token_start, 6);
        assert_eq!(r.candidates[0].1, 1.0);
        assert!(r.candidates[1].1 < 1.0);
    }

    #[test]
    fn ranking_ties_keep_source_order() {
        let src = text("8 a . 8 a .");
        let entity = EntitySpan {
            token_start: 0,
            token_end: 1,
            surface: "8".into(),
            kind: EntityKind::Number,
        };
        let r = rank_occurrences(&entity, "zzz", &src);
        assert_eq!(r.candidates[0].0.token_start, 0);
        assert_eq!(r.candidates[1].0.token_start, 3);
    }

    #[test]
    fn absent_entity_has_empty_ranking() {
        let entity = EntitySpan {
            token_start: 0,
            token_end: 1,
            surface: "9".into(),
            kind: EntityKind::Number,
        };
        assert!(rank_occurrences(&entity, "q", &text("8 people")).is_empty());
    }
}
