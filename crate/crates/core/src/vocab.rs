//! Character tokens, character sequences and the id vocabulary.

use std::collections::{BTreeMap, HashMap};
use std::fmt;

use unicode_normalization::UnicodeNormalization;

use crate::error::{Error, Result};

/// A single position in a character sequence.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Token {
    Char(char),
    Pad,
    Unk,
    Bos,
    Eos,
    Mask,
}

impl Token {
    pub fn is_reserved(self) -> bool {
        !matches!(self, Token::Char(_))
    }

    pub fn as_char(self) -> Option<char> {
        match self {
            Token::Char(c) => Some(c),
            _ => None,
        }
    }
}

impl fmt::Display for Token {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Token::Char(c) => write!(f, "{c}"),
            Token::Pad => f.write_str("[PAD]"),
            Token::Unk => f.write_str("[UNK]"),
            Token::Bos => f.write_str("[BOS]"),
            Token::Eos => f.write_str("[EOS]"),
            Token::Mask => f.write_str("[MASK]"),
        }
    }
}

/// An ordered list of character tokens.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash)]
pub struct CharSeq(Vec<Token>);

impl CharSeq {
    /// NFC-normalises `text` and splits it into characters. Text never produces
    /// reserved tokens, so corpus input cannot smuggle in `[MASK]` and friends.
    pub fn from_text(text: &str) -> Self {
        CharSeq(text.nfc().map(Token::Char).collect())
    }

    pub fn from_chars(chars: &[char]) -> Self {
        CharSeq(chars.iter().copied().map(Token::Char).collect())
    }

    pub fn from_tokens(tokens: Vec<Token>) -> Self {
        CharSeq(tokens)
    }

    pub fn tokens(&self) -> &[Token] {
        &self.0
    }

    pub fn tokens_mut(&mut self) -> &mut [Token] {
        &mut self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn get(&self, i: usize) -> Option<Token> {
        self.0.get(i).copied()
    }

    pub fn has_reserved(&self) -> bool {
        self.0.iter().any(|t| t.is_reserved())
    }

    /// Characters only; reserved tokens are dropped.
    pub fn chars(&self) -> Vec<char> {
        self.0.iter().filter_map(|t| t.as_char()).collect()
    }

    pub fn to_text(&self) -> String {
        self.0.iter().filter_map(|t| t.as_char()).collect()
    }
}

impl fmt::Display for CharSeq {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for t in &self.0 {
            write!(f, "{t}")?;
        }
        Ok(())
    }
}

impl From<&str> for CharSeq {
    fn from(s: &str) -> Self {
        CharSeq::from_text(s)
    }
}

pub const PAD_ID: usize = 0;
pub const UNK_ID: usize = 1;
pub const BOS_ID: usize = 2;
pub const EOS_ID: usize = 3;
pub const MASK_ID: usize = 4;
pub const NUM_RESERVED: usize = 5;

/// Bijection between tokens and dense integer ids. Ids 0..4 are fixed for
/// PAD, UNK, BOS, EOS and MASK; characters follow in codepoint order.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Vocab {
    chars: Vec<char>,
    index: HashMap<char, usize>,
}

impl Vocab {
    pub fn from_chars(mut chars: Vec<char>) -> Self {
        chars.sort_unstable();
        chars.dedup();
        let index = chars
            .iter()
            .enumerate()
            .map(|(i, &c)| (c, i + NUM_RESERVED))
            .collect();
        Vocab { chars, index }
    }

    pub fn len(&self) -> usize {
        self.chars.len() + NUM_RESERVED
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Non-reserved characters in id order.
    pub fn chars(&self) -> &[char] {
        &self.chars
    }

    pub fn contains(&self, c: char) -> bool {
        self.index.contains_key(&c)
    }

    pub fn id(&self, token: Token) -> usize {
        match token {
            Token::Pad => PAD_ID,
            Token::Unk => UNK_ID,
            Token::Bos => BOS_ID,
            Token::Eos => EOS_ID,
            Token::Mask => MASK_ID,
            Token::Char(c) => self.index.get(&c).copied().unwrap_or(UNK_ID),
        }
    }

    pub fn token(&self, id: usize) -> Option<Token> {
        match id {
            PAD_ID => Some(Token::Pad),
            UNK_ID => Some(Token::Unk),
            BOS_ID => Some(Token::Bos),
            EOS_ID => Some(Token::Eos),
            MASK_ID => Some(Token::Mask),
            _ => self.chars.get(id - NUM_RESERVED).map(|&c| Token::Char(c)),
        }
    }

    pub fn encode(&self, seq: &CharSeq) -> Vec<usize> {
        seq.tokens().iter().map(|&t| self.id(t)).collect()
    }

    pub fn decode(&self, ids: &[usize]) -> CharSeq {
        CharSeq::from_tokens(
            ids.iter()
                .map(|&i| self.token(i).unwrap_or(Token::Unk))
                .collect(),
        )
    }
}

/// Builds a vocabulary holding every character seen at least `min_count` times.
pub fn build_vocab(corpus: &[CharSeq], min_count: usize) -> Result<Vocab> {
    if corpus.is_empty() {
        return Err(Error::Config("cannot build a vocabulary from an empty corpus".into()));
    }
    let mut counts: BTreeMap<char, usize> = BTreeMap::new();
    for seq in corpus {
        for c in seq.chars() {
            *counts.entry(c).or_default() += 1;
        }
    }
    let chars = counts
        .into_iter()
        .filter(|&(_, n)| n >= min_count)
        .map(|(c, _)| c)
        .collect();
    Ok(Vocab::from_chars(chars))
}
