//! Deterministic segmentation, POS tagging and semantic-class annotation,
//! broadcast from words to characters.

use crate::lexicons::{lookup_semclass, PosLexicon, SemClassDict};
use crate::tags::{ClassAlphabet, PosTagSet, SemClassPath};
use crate::vocab::CharSeq;

/// Greedy forward maximum matching. Characters that start no lexicon word
/// become single-character words.
pub fn segment_maxmatch(seq: &CharSeq, lex: &PosLexicon) -> Vec<String> {
    segment_chars(&seq.chars(), lex)
}

pub fn segment_chars(chars: &[char], lex: &PosLexicon) -> Vec<String> {
    let mut words = Vec::new();
    let mut i = 0;
    let mut buf = String::new();
    while i < chars.len() {
        let longest = lex.max_word_chars().min(chars.len() - i);
        let mut take = 1;
        for len in (2..=longest).rev() {
            buf.clear();
            buf.extend(&chars[i..i + len]);
            if lex.contains(&buf) {
                take = len;
                break;
            }
        }
        words.push(chars[i..i + take].iter().collect());
        i += take;
    }
    words
}

/// Tag of each word: lexicon entry, else the first character's fallback,
/// else `other`.
pub fn pos_tag<S: AsRef<str>>(words: &[S], lex: &PosLexicon) -> Vec<usize> {
    words
        .iter()
        .map(|w| {
            let w = w.as_ref();
            lex.tag_of(w)
                .or_else(|| w.chars().next().and_then(|c| lex.char_fallback(c)))
                .unwrap_or_else(|| lex.tagset().other())
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TaggedWord {
    pub text: String,
    pub tag: usize,
}

/// Anything that splits a sentence into tagged words.
pub trait Tagger {
    fn tag_sentence(&self, seq: &CharSeq) -> Vec<TaggedWord>;
    fn tagset(&self) -> &PosTagSet;
}

impl Tagger for PosLexicon {
    fn tag_sentence(&self, seq: &CharSeq) -> Vec<TaggedWord> {
        let words = segment_maxmatch(seq, self);
        let tags = pos_tag(&words, self);
        words
            .into_iter()
            .zip(tags)
            .map(|(text, tag)| TaggedWord { text, tag })
            .collect()
    }

    fn tagset(&self) -> &PosTagSet {
        PosLexicon::tagset(self)
    }
}

/// Per-character features: POS id, one class id per level, word layout.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct SemanticFeatureSeq {
    pub pos: Vec<usize>,
    /// `classes[i][l]` is the level-`l` class id of character `i`.
    pub classes: Vec<Vec<usize>>,
    pub word_start: Vec<bool>,
    pub word_index: Vec<usize>,
}

impl SemanticFeatureSeq {
    pub fn len(&self) -> usize {
        self.pos.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pos.is_empty()
    }

    /// Class ids of level `l` for every character.
    pub fn level(&self, l: usize) -> Vec<usize> {
        self.classes.iter().map(|c| c[l]).collect()
    }
}

/// Bundles the lexicons that produce [`SemanticFeatureSeq`]s.
#[derive(Clone, Debug)]
pub struct FeatureExtractor {
    pub pos_lexicon: PosLexicon,
    pub semclass: SemClassDict,
    pub alphabets: Vec<ClassAlphabet>,
}

impl FeatureExtractor {
    pub fn new(pos_lexicon: PosLexicon, semclass: SemClassDict, class_levels: usize) -> Self {
        let alphabets = semclass.alphabets(class_levels);
        FeatureExtractor {
            pos_lexicon,
            semclass,
            alphabets,
        }
    }

    pub fn class_levels(&self) -> usize {
        self.alphabets.len()
    }

    pub fn tagset(&self) -> &PosTagSet {
        self.pos_lexicon.tagset()
    }

    /// Word-level POS and class paths, with the words themselves.
    pub fn annotate_words(&self, seq: &CharSeq) -> Vec<(String, usize, SemClassPath)> {
        let k = self.class_levels();
        let words = segment_maxmatch(seq, &self.pos_lexicon);
        let tags = pos_tag(&words, &self.pos_lexicon);
        words
            .into_iter()
            .zip(tags)
            .map(|(w, t)| {
                let path = lookup_semclass(&self.semclass, &w, k);
                (w, t, path)
            })
            .collect()
    }

    /// Segments, tags and classifies `seq`, then copies each word's features
    /// onto every character of the word.
    pub fn feature_sequence(&self, seq: &CharSeq) -> SemanticFeatureSeq {
        let mut out = SemanticFeatureSeq::default();
        for (wi, (word, tag, path)) in self.annotate_words(seq).into_iter().enumerate() {
            let ids: Vec<usize> = self
                .alphabets
                .iter()
                .enumerate()
                .map(|(l, a)| a.id(path.level(l)))
                .collect();
            for (ci, _) in word.chars().enumerate() {
                out.pos.push(tag);
                out.classes.push(ids.clone());
                out.word_start.push(ci == 0);
                out.word_index.push(wi);
            }
        }
        out
    }
}
