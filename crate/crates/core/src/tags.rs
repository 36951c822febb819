//! POS tag alphabet and hierarchical semantic-class paths.

use std::collections::HashMap;

use crate::error::{Error, Result};

pub const DEFAULT_POS_TAGS: [&str; 12] = [
    "noun",
    "verb",
    "adjective",
    "adverb",
    "pronoun",
    "preposition",
    "conjunction",
    "particle",
    "numeral",
    "measure",
    "punctuation",
    "other",
];

/// Closed, ordered set of POS tag names. The index of a tag is its id.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PosTagSet {
    names: Vec<String>,
    index: HashMap<String, usize>,
}

impl Default for PosTagSet {
    fn default() -> Self {
        PosTagSet::new(DEFAULT_POS_TAGS.iter().map(|s| s.to_string()).collect())
            .expect("default tag set is valid")
    }
}

impl PosTagSet {
    /// Builds a tag set; the set must contain `other`, used as the fallback.
    pub fn new(names: Vec<String>) -> Result<Self> {
        let mut index = HashMap::new();
        for (i, n) in names.iter().enumerate() {
            if n.is_empty() {
                return Err(Error::Config("empty POS tag name".into()));
            }
            if index.insert(n.clone(), i).is_some() {
                return Err(Error::Config(format!("duplicate POS tag `{n}`")));
            }
        }
        if !index.contains_key("other") {
            return Err(Error::Config("POS tag set must contain `other`".into()));
        }
        Ok(PosTagSet { names, index })
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn id(&self, name: &str) -> Option<usize> {
        self.index.get(name).copied()
    }

    pub fn name(&self, id: usize) -> Option<&str> {
        self.names.get(id).map(String::as_str)
    }

    pub fn other(&self) -> usize {
        self.index["other"]
    }

    pub fn punctuation(&self) -> Option<usize> {
        self.id("punctuation")
    }
}

/// Semantic-class identifiers for levels 1..k; `None` is the NONE class.
/// A NONE level forces NONE at every deeper level.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct SemClassPath {
    levels: Vec<Option<String>>,
}

impl SemClassPath {
    pub fn none(k: usize) -> Self {
        SemClassPath {
            levels: vec![None; k],
        }
    }

    /// Builds a path from level codes, truncated or NONE-padded to `k` levels.
    pub fn from_codes<S: AsRef<str>>(codes: &[S], k: usize) -> Self {
        let mut levels = Vec::with_capacity(k);
        let mut ended = false;
        for l in 0..k {
            let code = codes.get(l).map(|c| c.as_ref().trim()).filter(|c| !c.is_empty());
            match code {
                Some(c) if !ended => levels.push(Some(c.to_string())),
                _ => {
                    ended = true;
                    levels.push(None)
                }
            }
        }
        SemClassPath { levels }
    }

    pub fn depth(&self) -> usize {
        self.levels.len()
    }

    pub fn level(&self, l: usize) -> Option<&str> {
        self.levels.get(l).and_then(|c| c.as_deref())
    }

    pub fn levels(&self) -> &[Option<String>] {
        &self.levels
    }

    pub fn is_none(&self) -> bool {
        self.levels.iter().all(Option::is_none)
    }

    pub fn truncated(&self, k: usize) -> SemClassPath {
        let codes: Vec<&str> = self.levels.iter().map_while(|c| c.as_deref()).collect();
        SemClassPath::from_codes(&codes, k)
    }

    /// `L1/L2/L3` rendering with `-` for NONE.
    pub fn render(&self) -> String {
        self.levels
            .iter()
            .map(|c| c.as_deref().unwrap_or("-"))
            .collect::<Vec<_>>()
            .join("/")
    }
}

/// Class identifiers of one level, with NONE at index 0.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ClassAlphabet {
    codes: Vec<String>,
    index: HashMap<String, usize>,
}

impl ClassAlphabet {
    pub const NONE: usize = 0;

    pub fn new(mut codes: Vec<String>) -> Self {
        codes.sort();
        codes.dedup();
        let index = codes
            .iter()
            .enumerate()
            .map(|(i, c)| (c.clone(), i + 1))
            .collect();
        ClassAlphabet { codes, index }
    }

    /// Number of rows including NONE.
    pub fn len(&self) -> usize {
        self.codes.len() + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn codes(&self) -> &[String] {
        &self.codes
    }

    pub fn id(&self, code: Option<&str>) -> usize {
        code.and_then(|c| self.index.get(c).copied())
            .unwrap_or(Self::NONE)
    }

    pub fn code(&self, id: usize) -> Option<&str> {
        if id == Self::NONE {
            None
        } else {
            self.codes.get(id - 1).map(String::as_str)
        }
    }
}
