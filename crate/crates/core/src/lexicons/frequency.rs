use std::collections::HashMap;
use std::fmt::Write as _;
use std::path::Path;

use unicode_general_category::{get_general_category, GeneralCategory};

use super::{data_lines, read_file};
use crate::error::{Error, Result};
use crate::vocab::CharSeq;

/// True for characters in any Unicode punctuation category (Pc, Pd, Ps, Pe, Pi, Pf, Po).
pub fn is_punctuation(c: char) -> bool {
    use GeneralCategory::*;
    matches!(
        get_general_category(c),
        ConnectorPunctuation
            | DashPunctuation
            | OpenPunctuation
            | ClosePunctuation
            | InitialPunctuation
            | FinalPunctuation
            | OtherPunctuation
    )
}

/// Per-character occurrence counts over a training corpus.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct FrequencyTable {
    counts: HashMap<char, u64>,
}

impl FrequencyTable {
    pub fn count(&self, c: char) -> u64 {
        self.counts.get(&c).copied().unwrap_or(0)
    }

    pub fn total(&self) -> u64 {
        self.counts.values().sum()
    }

    pub fn len(&self) -> usize {
        self.counts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.counts.is_empty()
    }

    pub fn is_punctuation(&self, c: char) -> bool {
        is_punctuation(c)
    }

    /// Entries sorted by descending count, then codepoint.
    pub fn sorted(&self) -> Vec<(char, u64)> {
        let mut v: Vec<(char, u64)> = self.counts.iter().map(|(&c, &n)| (c, n)).collect();
        v.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(&b.0)));
        v
    }

    /// Distinct counts in ascending order; handy as a threshold grid.
    pub fn distinct_counts(&self) -> Vec<u64> {
        let mut v: Vec<u64> = self.counts.values().copied().collect();
        v.sort_unstable();
        v.dedup();
        v
    }

    /// `char<TAB>count` lines. Tab, CR and LF cannot be represented and are skipped.
    pub fn to_tsv(&self) -> String {
        let mut out = String::new();
        for (c, n) in self.sorted() {
            if matches!(c, '\t' | '\n' | '\r') {
                continue;
            }
            let _ = writeln!(out, "{c}\t{n}");
        }
        out
    }

    pub fn parse(text: &str, origin: &str) -> Result<Self> {
        let mut counts = HashMap::new();
        for (n, line) in data_lines(text) {
            let (head, count) = line
                .split_once('\t')
                .ok_or_else(|| Error::parse(origin, n, "expected `char<TAB>count`"))?;
            let mut it = head.chars();
            let c = match (it.next(), it.next()) {
                (Some(c), None) => c,
                _ => return Err(Error::parse(origin, n, format!("`{head}` is not a single character"))),
            };
            let count: u64 = count
                .trim()
                .parse()
                .map_err(|_| Error::parse(origin, n, format!("bad count `{}`", count.trim())))?;
            *counts.entry(c).or_default() += count;
        }
        Ok(FrequencyTable { counts })
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::parse(&read_file(path)?, &path.display().to_string())
    }
}

pub fn build_frequency_table(corpus: &[CharSeq]) -> FrequencyTable {
    let mut counts = HashMap::new();
    for seq in corpus {
        for c in seq.chars() {
            *counts.entry(c).or_default() += 1;
        }
    }
    FrequencyTable { counts }
}

/// Whether `c` may be masked for spelling correction: punctuation and
/// characters seen more than `k_c` times stay fixed.
pub fn is_maskable(ft: &FrequencyTable, c: char, k_c: u64) -> bool {
    !(is_punctuation(c) || ft.count(c) > k_c)
}
