//! Knowledge resources: pronunciations, character frequencies, a word→POS
//! lexicon and a hierarchical semantic-class dictionary.

mod frequency;
mod phonetic;
mod poslex;
mod semclass;

pub use frequency::{build_frequency_table, is_maskable, is_punctuation, FrequencyTable};
pub use phonetic::{sim_set, PhoneticLexicon, Syllable};
pub use poslex::PosLexicon;
pub use semclass::{lookup_semclass, SemClassDict};

use std::path::Path;

use crate::error::{Error, Result};

pub(crate) fn read_file(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

/// Non-empty, non-comment lines with their 1-based line numbers.
pub(crate) fn data_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim_end_matches('\r')))
        .filter(|(_, l)| !l.trim().is_empty() && !l.starts_with('#'))
}
