//! Sentence-level transforms. Words are ASCII-whitespace tokens; characters
//! are Unicode scalar values. No transform returns an empty string for a
//! non-empty input.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::rng::{round_count, Rng};

fn words(sentence: &str) -> Result<Vec<&str>> {
    let w: Vec<&str> = sentence.split_ascii_whitespace().collect();
    if w.is_empty() {
        return Err(Error::precondition("cannot augment an empty sentence"));
    }
    Ok(w)
}

fn check_fraction(p: f64, name: &str) -> Result<()> {
    if (0.0..1.0).contains(&p) {
        Ok(())
    } else {
        Err(Error::precondition(format!("{name} must lie in [0, 1), got {p}")))
    }
}

fn remove_positions<T: Copy>(items: &[T], positions: &[usize]) -> Vec<T> {
    let mut drop = vec![false; items.len()];
    for &p in positions {
        drop[p] = true;
    }
    items
        .iter()
        .zip(drop)
        .filter(|(_, d)| !d)
        .map(|(x, _)| *x)
        .collect()
}

/// Removes `round(p·W)` distinct words, never all of them.
pub fn delete_words(sentence: &str, p: f64, rng: &mut Rng) -> Result<String> {
    check_fraction(p, "word deletion rate")?;
    let w = words(sentence)?;
    let n = round_count(p, w.len()).min(w.len() - 1);
    let positions = rng.sample_indices(w.len(), n);
    Ok(remove_positions(&w, &positions).join(" "))
}

/// Removes one uniformly placed run of `min(d, W-1)` consecutive words.
pub fn delete_word_span(sentence: &str, d: usize, rng: &mut Rng) -> Result<String> {
    let w = words(sentence)?;
    let len = d.min(w.len() - 1);
    if len == 0 {
        return Ok(w.join(" "));
    }
    let start = rng.below(w.len() - len + 1);
    let kept: Vec<&str> = w[..start].iter().chain(&w[start + len..]).copied().collect();
    Ok(kept.join(" "))
}

/// Removes `round(p·len)` characters, never all, and always keeps at least
/// one non-whitespace character.
pub fn delete_chars(sentence: &str, p: f64, rng: &mut Rng) -> Result<String> {
    check_fraction(p, "character deletion rate")?;
    let chars: Vec<char> = sentence.chars().collect();
    if sentence.trim().is_empty() {
        return Err(Error::precondition("cannot augment an empty sentence"));
    }
    let n = round_count(p, chars.len()).min(chars.len() - 1);
    let mut positions = rng.sample_indices(chars.len(), n);
    let survivor = (0..chars.len()).any(|i| !chars[i].is_whitespace() && !positions.contains(&i));
    if !survivor {
        let keep = chars.iter().position(|c| !c.is_whitespace()).expect("non-blank input");
        positions.retain(|&i| i != keep);
    }
    Ok(remove_positions(&chars, &positions).into_iter().collect())
}

/// Start offsets of `2·pairs` disjoint blocks of `block` items within `len`
/// items, in draw order. Uniform over all placements.
fn disjoint_blocks(len: usize, block: usize, pairs: usize, rng: &mut Rng) -> Vec<usize> {
    let n_blocks = 2 * pairs;
    let free = len - n_blocks * block;
    let slots = free + n_blocks;
    let drawn = rng.sample_indices(slots, n_blocks);
    let mut sorted = drawn.clone();
    sorted.sort_unstable();
    drawn
        .iter()
        .map(|q| {
            let rank = sorted.binary_search(q).expect("drawn slot");
            q + rank * (block - 1)
        })
        .collect()
}

/// Exchanges two equal-length, non-overlapping blocks in place.
pub fn swap_blocks<T>(items: &mut [T], a: usize, b: usize, len: usize) {
    for i in 0..len {
        items.swap(a + i, b + i);
    }
}

fn swap_random_blocks<T>(items: &mut [T], block: usize, n_pairs: usize, rng: &mut Rng) {
    if block == 0 || items.is_empty() {
        return;
    }
    let feasible = items.len() / (2 * block);
    let pairs = n_pairs.min(feasible);
    if pairs == 0 {
        return;
    }
    let starts = disjoint_blocks(items.len(), block, pairs, rng);
    for pair in starts.chunks(2) {
        swap_blocks(items, pair[0], pair[1], block);
    }
}

/// Swaps `n_pairs` pairs of character spans of length
/// `max(1, round(frac·len))`, reducing the pair count to what fits.
pub fn reorder_spans(sentence: &str, frac: f64, n_pairs: usize, rng: &mut Rng) -> String {
    let mut chars: Vec<char> = sentence.chars().collect();
    if frac <= 0.0 || n_pairs == 0 || chars.is_empty() {
        return sentence.to_string();
    }
    let span = round_count(frac.min(1.0), chars.len()).max(1);
    swap_random_blocks(&mut chars, span, n_pairs, rng);
    chars.into_iter().collect()
}

/// Swaps `n_pairs` pairs of single words.
pub fn reorder_words(sentence: &str, n_pairs: usize, rng: &mut Rng) -> Result<String> {
    reorder_word_spans(sentence, n_pairs, 1, rng)
}

/// Swaps `n_pairs` pairs of `span_len`-word spans, reducing the pair count to
/// what fits.
pub fn reorder_word_spans(sentence: &str, n_pairs: usize, span_len: usize, rng: &mut Rng) -> Result<String> {
    let mut w = words(sentence)?;
    swap_random_blocks(&mut w, span_len.max(1), n_pairs, rng);
    Ok(w.join(" "))
}

/// Word → synonyms table.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Lexicon {
    entries: BTreeMap<String, Vec<String>>,
}

impl Lexicon {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, word: impl Into<String>, synonyms: Vec<String>) {
        let synonyms: Vec<String> = synonyms.into_iter().filter(|s| !s.is_empty()).collect();
        if !synonyms.is_empty() {
            self.entries.insert(word.into(), synonyms);
        }
    }

    pub fn get(&self, word: &str) -> Option<&[String]> {
        self.entries.get(word).map(Vec::as_slice)
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Parses `word<TAB>syn1,syn2,...` lines.
    pub fn parse_tsv(text: &str) -> Result<Self> {
        let mut lex = Self::new();
        for (i, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let (word, syns) = line.split_once('\t').ok_or_else(|| Error::MalformedLine {
                line: i + 1,
                message: "expected word<TAB>synonyms".into(),
            })?;
            lex.insert(
                word.trim(),
                syns.split(',').map(|s| s.trim().to_string()).collect(),
            );
        }
        Ok(lex)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse_tsv(&text)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Substitution {
    pub text: String,
    /// Set when the lexicon was empty and the input came back unchanged.
    pub empty_lexicon: bool,
}

/// Replaces up to `d` lexicon-covered words with a uniformly drawn synonym.
pub fn substitute_synonyms(sentence: &str, d: usize, lexicon: &Lexicon, rng: &mut Rng) -> Result<Substitution> {
    let mut w: Vec<&str> = words(sentence)?;
    if lexicon.is_empty() {
        return Ok(Substitution {
            text: w.join(" "),
            empty_lexicon: true,
        });
    }
    let covered: Vec<usize> = (0..w.len()).filter(|&i| lexicon.get(w[i]).is_some()).collect();
    let n = d.min(covered.len());
    for pick in rng.sample_indices(covered.len(), n) {
        let pos = covered[pick];
        let syns = lexicon.get(w[pos]).expect("covered word");
        w[pos] = syns[rng.below(syns.len())].as_str();
    }
    Ok(Substitution {
        text: w.join(" "),
        empty_lexicon: false,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    const TWENTY: &str = "one two three four five six seven eight nine ten eleven twelve \
                          thirteen fourteen fifteen sixteen seventeen eighteen nineteen twenty";

    #[test]
    fn word_deletion_count() {
        let out = delete_words(TWENTY, 0.15, &mut Rng::new(1)).unwrap();
        assert_eq!(out.split(' ').count(), 17);
    }

    #[test]
    fn word_deletion_zero_is_identity() {
        assert_eq!(delete_words(TWENTY, 0.0, &mut Rng::new(1)).unwrap(), TWENTY.split_whitespace().collect::<Vec<_>>().join(" "));
    }

    #[test]
    fn word_deletion_keeps_order_and_a_word() {
        let out = delete_words("a b", 0.9, &mut Rng::new(3)).unwrap();
        assert_eq!(out.split(' ').count(), 1);
        let out = delete_words(TWENTY, 0.5, &mut Rng::new(5)).unwrap();
        let idx: Vec<usize> = out
            .split(' ')
            .map(|w| TWENTY.split_whitespace().position(|x| x == w).unwrap())
            .collect();
        assert!(idx.windows(2).all(|p| p[0] < p[1]));
        assert!(delete_words("", 0.1, &mut Rng::new(1)).is_err());
        assert!(delete_words("a", 1.0, &mut Rng::new(1)).is_err());
    }

    #[test]
    fn span_deletion() {
        assert_eq!(delete_word_span("a b c d e", 2, &mut Rng::new(1)).unwrap().split(' ').count(), 3);
        assert_eq!(delete_word_span("a b c d e", 9, &mut Rng::new(1)).unwrap().split(' ').count(), 1);
        assert_eq!(delete_word_span("solo", 2, &mut Rng::new(1)).unwrap(), "solo");
        assert_eq!(delete_word_span("a b c", 0, &mut Rng::new(1)).unwrap(), "a b c");
    }

    #[test]
    fn char_deletion() {
        assert_eq!(delete_chars("abcdefghij", 0.40, &mut Rng::new(1)).unwrap().chars().count(), 6);
        assert_eq!(delete_chars("abcdefghij", 0.0, &mut Rng::new(1)).unwrap(), "abcdefghij");
        for seed in 0..200 {
            let out = delete_chars("a      ", 0.99, &mut Rng::new(seed)).unwrap();
            assert!(out.contains('a'), "{out:?}");
        }
    }

    #[test]
    fn span_reorder_full_fraction_is_identity() {
        assert_eq!(reorder_spans("abcdefgh", 1.0, 3, &mut Rng::new(1)), "abcdefgh");
        assert_eq!(reorder_spans("abcdefgh", 0.0, 3, &mut Rng::new(1)), "abcdefgh");
        assert_eq!(reorder_spans("abcdefgh", 0.2, 0, &mut Rng::new(1)), "abcdefgh");
    }

    #[test]
    fn span_reorder_is_a_permutation_of_spans() {
        let s: String = (0..100).map(|i| char::from(b'a' + (i % 26) as u8)).collect();
        let out = reorder_spans(&s, 0.05, 3, &mut Rng::new(42));
        assert_eq!(out.chars().count(), 100);
        let mut a: Vec<char> = s.chars().collect();
        let mut b: Vec<char> = out.chars().collect();
        assert_ne!(a, b);
        a.sort_unstable();
        b.sort_unstable();
        assert_eq!(a, b);
        let diff = s.chars().zip(out.chars()).filter(|(x, y)| x != y).count();
        assert!(diff <= 30, "at most 6 spans of 5 chars move, {diff} differ");
    }

    #[test]
    fn swapping_twice_restores() {
        let mut v: Vec<char> = "abcdefghij".chars().collect();
        swap_blocks(&mut v, 1, 6, 3);
        assert_eq!(v.iter().collect::<String>(), "aghiefbcdj");
        swap_blocks(&mut v, 1, 6, 3);
        assert_eq!(v.iter().collect::<String>(), "abcdefghij");
    }

    #[test]
    fn disjoint_blocks_never_overlap() {
        let mut rng = Rng::new(8);
        for _ in 0..500 {
            let len = 6 + rng.below(40);
            let block = 1 + rng.below(3);
            let pairs = 1 + rng.below(len / (2 * block));
            let mut starts = disjoint_blocks(len, block, pairs, &mut rng);
            starts.sort_unstable();
            assert!(starts.windows(2).all(|w| w[0] + block <= w[1]));
            assert!(starts.last().unwrap() + block <= len);
        }
    }

    #[test]
    fn word_reorder() {
        assert_eq!(reorder_words("a b c d", 0, &mut Rng::new(1)).unwrap(), "a b c d");
        let out = reorder_words("a b c d e f", 2, &mut Rng::new(3)).unwrap();
        let mut sorted: Vec<&str> = out.split(' ').collect();
        sorted.sort_unstable();
        assert_eq!(sorted, vec!["a", "b", "c", "d", "e", "f"]);
        assert_eq!(reorder_words("solo", 2, &mut Rng::new(3)).unwrap(), "solo");
    }

    #[test]
    fn synonyms() {
        let mut lex = Lexicon::new();
        lex.insert("great", vec!["fantastic".into()]);
        let out = substitute_synonyms("a great movie", 1, &lex, &mut Rng::new(1)).unwrap();
        assert_eq!(out.text, "a fantastic movie");
        assert!(!out.empty_lexicon);
        let none = substitute_synonyms("a fine movie", 1, &lex, &mut Rng::new(1)).unwrap();
        assert_eq!(none.text, "a fine movie");
        let empty = substitute_synonyms("a great movie", 1, &Lexicon::new(), &mut Rng::new(1)).unwrap();
        assert!(empty.empty_lexicon);
        assert_eq!(empty.text, "a great movie");
    }

    #[test]
    fn synonyms_d2_over_two_covered_words_replaces_both() {
        let mut lex = Lexicon::new();
        lex.insert("great", vec!["fantastic".into()]);
        lex.insert("movie", vec!["film".into()]);
        for seed in 0..20 {
            let out = substitute_synonyms("a great movie", 2, &lex, &mut Rng::new(seed)).unwrap();
            assert_eq!(out.text, "a fantastic film");
        }
    }

    #[test]
    fn lexicon_tsv() {
        let lex = Lexicon::parse_tsv("great\tfantastic, superb\nbad\tpoor\n").unwrap();
        assert_eq!(lex.get("great").unwrap(), ["fantastic", "superb"]);
        assert!(Lexicon::parse_tsv("nosep\n").is_err());
    }
}
