use std::collections::HashMap;
use std::path::Path;

use unicode_general_category::{get_general_category, GeneralCategory};

use super::{data_lines, is_punctuation, read_file};
use crate::error::{Error, Result};
use crate::tags::PosTagSet;

/// Word → POS tag lexicon with a per-character fallback rule.
#[derive(Clone, Debug)]
pub struct PosLexicon {
    tagset: PosTagSet,
    words: HashMap<String, usize>,
    max_word_chars: usize,
}

impl PosLexicon {
    pub fn new(tagset: PosTagSet) -> Self {
        PosLexicon {
            tagset,
            words: HashMap::new(),
            max_word_chars: 0,
        }
    }

    /// Parses `word<TAB>tag` lines. The first tag listed for a word wins.
    pub fn parse(text: &str, tagset: PosTagSet, origin: &str) -> Result<Self> {
        let mut lex = PosLexicon::new(tagset);
        for (n, line) in data_lines(text) {
            let (word, tag) = line
                .split_once('\t')
                .ok_or_else(|| Error::parse(origin, n, "expected `word<TAB>tag`"))?;
            let word = word.trim();
            if word.is_empty() {
                return Err(Error::parse(origin, n, "empty word"));
            }
            let id = lex
                .tagset
                .id(tag.trim())
                .ok_or_else(|| Error::parse(origin, n, format!("unknown POS tag `{}`", tag.trim())))?;
            lex.insert(word, id);
        }
        Ok(lex)
    }

    pub fn load(path: &Path, tagset: PosTagSet) -> Result<Self> {
        Self::parse(&read_file(path)?, tagset, &path.display().to_string())
    }

    pub fn insert(&mut self, word: &str, tag: usize) {
        if !self.words.contains_key(word) {
            self.max_word_chars = self.max_word_chars.max(word.chars().count());
            self.words.insert(word.to_string(), tag);
        }
    }

    pub fn tagset(&self) -> &PosTagSet {
        &self.tagset
    }

    pub fn tag_of(&self, word: &str) -> Option<usize> {
        self.words.get(word).copied()
    }

    pub fn contains(&self, word: &str) -> bool {
        self.words.contains_key(word)
    }

    pub fn max_word_chars(&self) -> usize {
        self.max_word_chars
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    /// Words sorted by their text.
    pub fn words(&self) -> Vec<(&str, usize)> {
        let mut v: Vec<(&str, usize)> = self.words.iter().map(|(w, &t)| (w.as_str(), t)).collect();
        v.sort();
        v
    }

    /// Fallback tag for a character outside the lexicon: a single-character
    /// lexicon entry if any, else punctuation or numeral by Unicode category.
    pub fn char_fallback(&self, c: char) -> Option<usize> {
        let mut buf = [0u8; 4];
        if let Some(&t) = self.words.get(&*c.encode_utf8(&mut buf)) {
            return Some(t);
        }
        if is_punctuation(c) {
            return self.tagset.punctuation();
        }
        if matches!(get_general_category(c), GeneralCategory::DecimalNumber) {
            return self.tagset.id("numeral");
        }
        None
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_and_rejects_unknown_tags() {
        let lex = PosLexicon::parse("学校\tnoun\n去\tverb\n", PosTagSet::default(), "t").unwrap();
        assert_eq!(lex.tag_of("学校"), lex.tagset().id("noun"));
        assert_eq!(lex.max_word_chars(), 2);
        let err = PosLexicon::parse("学校\tthing\n", PosTagSet::default(), "t").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 1, .. }));
    }

    #[test]
    fn fallback_by_category() {
        let lex = PosLexicon::parse("好\tadjective\n", PosTagSet::default(), "t").unwrap();
        let ts = lex.tagset().clone();
        assert_eq!(lex.char_fallback('。'), ts.id("punctuation"));
        assert_eq!(lex.char_fallback('7'), ts.id("numeral"));
        assert_eq!(lex.char_fallback('好'), ts.id("adjective"));
        assert_eq!(lex.char_fallback('龘'), None);
    }
}
