use std::collections::{BTreeSet, HashMap};
use std::path::Path;

use super::{data_lines, read_file};
use crate::error::{Error, Result};
use crate::tags::{ClassAlphabet, SemClassPath};

/// Word → semantic-class path dictionary (thesaurus style, tree shaped).
#[derive(Clone, Debug, Default)]
pub struct SemClassDict {
    words: HashMap<String, SemClassPath>,
    depth: usize,
}

impl SemClassDict {
    /// Parses `word<TAB>L1/L2/L3` lines and checks that every class code has a
    /// single parent across the whole file.
    pub fn parse(text: &str, origin: &str) -> Result<Self> {
        let mut words = HashMap::new();
        let mut parents: Vec<HashMap<String, String>> = Vec::new();
        let mut depth = 0;
        for (n, line) in data_lines(text) {
            let (word, path) = line
                .split_once('\t')
                .ok_or_else(|| Error::parse(origin, n, "expected `word<TAB>L1/L2/...`"))?;
            let word = word.trim();
            let codes: Vec<&str> = path.trim().split('/').map(str::trim).collect();
            if word.is_empty() || codes.iter().any(|c| c.is_empty()) {
                return Err(Error::parse(origin, n, "empty word or class code"));
            }
            for l in 1..codes.len() {
                if parents.len() < l {
                    parents.resize_with(l, HashMap::new);
                }
                let map = &mut parents[l - 1];
                match map.get(codes[l]) {
                    Some(p) if p != codes[l - 1] => {
                        return Err(Error::parse(
                            origin,
                            n,
                            format!("class `{}` has two parents: `{p}` and `{}`", codes[l], codes[l - 1]),
                        ))
                    }
                    Some(_) => {}
                    None => {
                        map.insert(codes[l].to_string(), codes[l - 1].to_string());
                    }
                }
            }
            depth = depth.max(codes.len());
            words
                .entry(word.to_string())
                .or_insert_with(|| SemClassPath::from_codes(&codes, codes.len()));
        }
        Ok(SemClassDict { words, depth })
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::parse(&read_file(path)?, &path.display().to_string())
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    pub fn depth(&self) -> usize {
        self.depth
    }

    pub fn get(&self, word: &str) -> Option<&SemClassPath> {
        self.words.get(word)
    }

    /// One alphabet per level 1..=k, NONE included.
    pub fn alphabets(&self, k: usize) -> Vec<ClassAlphabet> {
        (0..k)
            .map(|l| {
                let codes: BTreeSet<String> = self
                    .words
                    .values()
                    .filter_map(|p| p.level(l).map(str::to_string))
                    .collect();
                ClassAlphabet::new(codes.into_iter().collect())
            })
            .collect()
    }
}

/// Class path of `word` truncated or NONE-padded to `k` levels; unknown words
/// get the all-NONE path.
pub fn lookup_semclass(d: &SemClassDict, word: &str, k: usize) -> SemClassPath {
    match d.get(word) {
        Some(p) => p.truncated(k),
        None => SemClassPath::none(k),
    }
}
