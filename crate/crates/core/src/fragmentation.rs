//! Subwords-per-word fragmentation of a tokenizer over a corpus.
//!
//! Any tokenizer can be plugged in through [`SubwordCounter`]. Two are
//! provided: a greedy longest-match subword tokenizer over a vocabulary, and
//! a lookup over precomputed `word,subword_count` rows.

use std::collections::{BTreeMap, HashSet};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec::{self, ExecMode};
use crate::round_to;

pub const DEFAULT_CONTINUATION_PREFIX: &str = "##";

/// Counts the subword tokens a tokenizer produces for one word.
pub trait SubwordCounter: Sync {
    fn tokenizer_id(&self) -> &str;
    fn count(&self, word: &str) -> Result<usize>;
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SubwordVocabulary {
    tokens: HashSet<String>,
    continuation_prefix: String,
    unknown_token_cost: usize,
    max_token_chars: usize,
}

impl SubwordVocabulary {
    pub fn new<I, S>(tokens: I) -> Result<Self>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        Self::with_options(tokens, DEFAULT_CONTINUATION_PREFIX, 1)
    }

    pub fn with_options<I, S>(
        tokens: I,
        continuation_prefix: &str,
        unknown_token_cost: usize,
    ) -> Result<Self>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let tokens: HashSet<String> = tokens
            .into_iter()
            .map(Into::into)
            .filter(|t| !t.is_empty())
            .collect();
        if tokens.is_empty() {
            return Err(Error::EmptyVocabulary);
        }
        if unknown_token_cost == 0 {
            return Err(Error::InvalidRecord("unknown_token_cost must be positive".into()));
        }
        let max_token_chars = tokens.iter().map(|t| t.chars().count()).max().unwrap_or(0);
        Ok(Self {
            tokens,
            continuation_prefix: continuation_prefix.to_string(),
            unknown_token_cost,
            max_token_chars,
        })
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn contains(&self, token: &str) -> bool {
        self.tokens.contains(token)
    }

    pub fn continuation_prefix(&self) -> &str {
        &self.continuation_prefix
    }

    pub fn unknown_token_cost(&self) -> usize {
        self.unknown_token_cost
    }
}

fn check_word(word: &str) -> Result<()> {
    if word.is_empty() {
        return Err(Error::EmptyWord);
    }
    if word.chars().any(char::is_whitespace) {
        return Err(Error::WhitespaceInWord(word.to_string()));
    }
    Ok(())
}

/// Greedy longest-prefix subword count. A word with any unmatched position
/// costs `unknown_token_cost` as a whole.
pub fn tokenize_word(vocab: &SubwordVocabulary, word: &str) -> Result<usize> {
    check_word(word)?;
    // char boundaries, so slicing never splits a code point
    let bounds: Vec<usize> = word
        .char_indices()
        .map(|(i, _)| i)
        .chain(std::iter::once(word.len()))
        .collect();
    let n_chars = bounds.len() - 1;
    let mut start = 0;
    let mut pieces = 0;
    let mut candidate = String::new();
    while start < n_chars {
        let longest = (start + 1..=n_chars.min(start + vocab.max_token_chars))
            .rev()
            .find(|&end| {
                let piece = &word[bounds[start]..bounds[end]];
                if start == 0 {
                    vocab.contains(piece)
                } else {
                    candidate.clear();
                    candidate.push_str(&vocab.continuation_prefix);
                    candidate.push_str(piece);
                    vocab.contains(&candidate)
                }
            });
        match longest {
            Some(end) => {
                pieces += 1;
                start = end;
            }
            None => return Ok(vocab.unknown_token_cost),
        }
    }
    Ok(pieces)
}

pub struct GreedyTokenizer {
    id: String,
    vocab: SubwordVocabulary,
}

impl GreedyTokenizer {
    pub fn new(id: impl Into<String>, vocab: SubwordVocabulary) -> Self {
        Self {
            id: id.into(),
            vocab,
        }
    }

    pub fn vocab(&self) -> &SubwordVocabulary {
        &self.vocab
    }
}

impl SubwordCounter for GreedyTokenizer {
    fn tokenizer_id(&self) -> &str {
        &self.id
    }

    fn count(&self, word: &str) -> Result<usize> {
        tokenize_word(&self.vocab, word)
    }
}

/// `word,subword_count` rows as produced by an external tokenizer.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CountsTable {
    pub tokenizer_id: String,
    pub rows: Vec<(String, usize)>,
}

impl CountsTable {
    pub fn new(tokenizer_id: impl Into<String>, rows: Vec<(String, usize)>) -> Self {
        Self {
            tokenizer_id: tokenizer_id.into(),
            rows,
        }
    }

    /// Report over the rows themselves; each row is one corpus word.
    pub fn report(&self, corpus_id: &str) -> Result<FragmentationReport> {
        let words = self.rows.len();
        let subwords = self.rows.iter().map(|(_, c)| *c).sum();
        FragmentationReport::new(&self.tokenizer_id, corpus_id, words, subwords)
    }

    /// Word → count lookup, for tokenizing a separate corpus. Conflicting
    /// counts for the same word are an error.
    pub fn lookup(&self) -> Result<CountsLookup> {
        let mut map = BTreeMap::new();
        for (word, count) in &self.rows {
            if let Some(prev) = map.insert(word.clone(), *count) {
                if prev != *count {
                    return Err(Error::InvalidRecord(format!(
                        "word `{word}` has counts {prev} and {count}"
                    )));
                }
            }
        }
        Ok(CountsLookup {
            id: self.tokenizer_id.clone(),
            counts: map,
        })
    }
}

pub struct CountsLookup {
    id: String,
    counts: BTreeMap<String, usize>,
}

impl SubwordCounter for CountsLookup {
    fn tokenizer_id(&self) -> &str {
        &self.id
    }

    fn count(&self, word: &str) -> Result<usize> {
        self.counts
            .get(word)
            .copied()
            .ok_or_else(|| Error::UnknownWord(word.to_string()))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FragmentationReport {
    pub tokenizer_id: String,
    pub corpus_id: String,
    pub word_count: usize,
    pub subword_count: usize,
    pub ratio: f64,
}

impl FragmentationReport {
    pub fn new(
        tokenizer_id: &str,
        corpus_id: &str,
        word_count: usize,
        subword_count: usize,
    ) -> Result<Self> {
        if word_count == 0 {
            return Err(Error::EmptyCorpus);
        }
        Ok(Self {
            tokenizer_id: tokenizer_id.to_string(),
            corpus_id: corpus_id.to_string(),
            word_count,
            subword_count,
            ratio: subword_count as f64 / word_count as f64,
        })
    }
}

/// Whitespace word segmentation; no punctuation handling.
pub fn split_words(text: &str) -> Vec<&str> {
    text.split_whitespace().collect()
}

const CHUNK: usize = 4096;

/// Total subwords over total words (micro average).
pub fn fragmentation_ratio<S, T>(
    corpus_id: &str,
    corpus: &[S],
    tokenizer: &T,
    mode: ExecMode,
) -> Result<FragmentationReport>
where
    S: AsRef<str> + Sync,
    T: SubwordCounter + ?Sized,
{
    if corpus.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    let partial = exec::map_chunks(mode, corpus, CHUNK, |chunk| {
        chunk
            .iter()
            .map(|w| tokenizer.count(w.as_ref()))
            .sum::<Result<usize>>()
    });
    let subwords = partial.into_iter().sum::<Result<usize>>()?;
    FragmentationReport::new(tokenizer.tokenizer_id(), corpus_id, corpus.len(), subwords)
}

/// Percent fewer subwords per word for `spec_ratio` relative to
/// `base_ratio`, to one decimal.
pub fn reduction(base_ratio: f64, spec_ratio: f64) -> Result<f64> {
    Ok(round_to(reduction_raw(base_ratio, spec_ratio)?, 1))
}

/// Unrounded `(base - spec) / base * 100`.
pub fn reduction_raw(base_ratio: f64, spec_ratio: f64) -> Result<f64> {
    for (field, v) in [("base_ratio", base_ratio), ("spec_ratio", spec_ratio)] {
        if !(v.is_finite() && v > 0.0) {
            return Err(Error::NonPositiveRatio {
                field: field.into(),
                value: v,
            });
        }
    }
    Ok((base_ratio - spec_ratio) / base_ratio * 100.0)
}

/// One row of a generalist-vs-specialist fragmentation table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FragmentationRow {
    pub language: String,
    pub base_tokenizer: String,
    pub base_ratio: f64,
    pub spec_tokenizer: String,
    pub spec_ratio: f64,
    pub reduction_pct: f64,
}

impl FragmentationRow {
    pub fn from_reports(
        language: &str,
        base: &FragmentationReport,
        spec: &FragmentationReport,
    ) -> Result<Self> {
        Ok(Self {
            language: language.to_string(),
            base_tokenizer: base.tokenizer_id.clone(),
            base_ratio: base.ratio,
            spec_tokenizer: spec.tokenizer_id.clone(),
            spec_ratio: spec.ratio,
            reduction_pct: reduction(base.ratio, spec.ratio)?,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    struct Fixed(usize);

    impl SubwordCounter for Fixed {
        fn tokenizer_id(&self) -> &str {
            "fixed"
        }
        fn count(&self, _: &str) -> Result<usize> {
            Ok(self.0)
        }
    }

    fn vocab(tokens: &[&str]) -> SubwordVocabulary {
        SubwordVocabulary::new(tokens.iter().copied()).unwrap()
    }

    #[test]
    fn greedy_trace() {
        let v = vocab(&["un", "##happi", "##ness"]);
        assert_eq!(tokenize_word(&v, "unhappiness").unwrap(), 3);
    }

    #[test]
    fn greedy_prefers_longest() {
        let v = vocab(&["un", "unh", "##appi", "##happi", "##ness", "##a"]);
        // "unh" + "##appi" + "##ness"
        assert_eq!(tokenize_word(&v, "unhappiness").unwrap(), 3);
        let v = vocab(&["a", "##b", "##bc", "##c"]);
        assert_eq!(tokenize_word(&v, "abc").unwrap(), 2);
    }

    #[test]
    fn whole_word_and_unknown() {
        let v = vocab(&["hello", "##s"]);
        assert_eq!(tokenize_word(&v, "hello").unwrap(), 1);
        assert_eq!(tokenize_word(&v, "hellos").unwrap(), 2);
        assert_eq!(tokenize_word(&v, "xyz").unwrap(), 1);
        // first piece matches, continuation does not
        assert_eq!(tokenize_word(&v, "hellox").unwrap(), 1);
        let v3 = SubwordVocabulary::with_options(["a"], "##", 3).unwrap();
        assert_eq!(tokenize_word(&v3, "zz").unwrap(), 3);
    }

    #[test]
    fn continuation_forms_are_distinct() {
        let v = vocab(&["ab", "c"]);
        // "c" is only a word-initial piece, so "abc" is unknown
        assert_eq!(tokenize_word(&v, "abc").unwrap(), 1);
        let v = vocab(&["ab", "##c"]);
        assert_eq!(tokenize_word(&v, "abc").unwrap(), 2);
        assert_eq!(tokenize_word(&v, "c").unwrap(), 1);
    }

    #[test]
    fn multibyte_words() {
        let v = vocab(&["বাং", "##লা", "ক"]);
        assert_eq!(tokenize_word(&v, "বাংলা").unwrap(), 2);
    }

    #[test]
    fn word_errors() {
        let v = vocab(&["a"]);
        assert!(matches!(tokenize_word(&v, ""), Err(Error::EmptyWord)));
        assert!(matches!(
            tokenize_word(&v, "a b"),
            Err(Error::WhitespaceInWord(_))
        ));
        assert!(SubwordVocabulary::new(Vec::<String>::new()).is_err());
    }

    #[test]
    fn ratio_examples() {
        let words = ["a", "b", "c", "d"];
        let r = fragmentation_ratio("c", &words, &Fixed(1), ExecMode::Serial).unwrap();
        assert_eq!(r.ratio, 1.0);

        let table = CountsTable::new(
            "t",
            vec![
                ("w1".into(), 1),
                ("w2".into(), 2),
                ("w3".into(), 2),
                ("w4".into(), 3),
            ],
        );
        assert_eq!(table.report("c").unwrap().ratio, 2.0);
        let lookup = table.lookup().unwrap();
        let r = fragmentation_ratio("c", &["w1", "w2", "w3", "w4"], &lookup, ExecMode::Parallel)
            .unwrap();
        assert_eq!((r.word_count, r.subword_count), (4, 8));
        assert!(matches!(
            fragmentation_ratio("c", &["nope"], &lookup, ExecMode::Serial),
            Err(Error::UnknownWord(_))
        ));
        let empty: [&str; 0] = [];
        assert!(matches!(
            fragmentation_ratio("c", &empty, &Fixed(1), ExecMode::Serial),
            Err(Error::EmptyCorpus)
        ));
    }

    #[test]
    fn conflicting_counts_rejected() {
        let table = CountsTable::new("t", vec![("w".into(), 1), ("w".into(), 2)]);
        assert!(table.lookup().is_err());
    }

    #[test]
    fn reduction_examples() {
        assert_eq!(reduction(1.84, 1.14).unwrap(), 38.0);
        assert_eq!(reduction(1.60, 1.46).unwrap(), 8.8);
        assert_eq!(reduction(1.5, 1.5).unwrap(), 0.0);
        assert!(reduction(0.0, 1.0).is_err());
        assert!(reduction(1.0, -1.0).is_err());
    }

    #[test]
    fn split_on_unicode_whitespace() {
        assert_eq!(split_words(" a\tb\u{00a0}c\nd "), ["a", "b", "c", "d"]);
    }
}
