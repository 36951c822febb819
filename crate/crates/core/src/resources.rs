//! Small built-in lexicons and sentence templates for desk-scale runs.

use crate::lexicons::{PhoneticLexicon, PosLexicon, SemClassDict};
use crate::tags::PosTagSet;

pub const PINYIN_TSV: &str = include_str!("../resources/pinyin.tsv");
pub const POS_LEXICON_TSV: &str = include_str!("../resources/pos_lexicon.tsv");
pub const SEMCLASS_TSV: &str = include_str!("../resources/semclass.tsv");
pub const TEMPLATES_TXT: &str = include_str!("../resources/templates.txt");

pub fn phonetic_lexicon() -> PhoneticLexicon {
    PhoneticLexicon::parse(PINYIN_TSV, "builtin:pinyin.tsv").expect("built-in pinyin table parses")
}

pub fn pos_lexicon() -> PosLexicon {
    PosLexicon::parse(POS_LEXICON_TSV, PosTagSet::default(), "builtin:pos_lexicon.tsv")
        .expect("built-in POS lexicon parses")
}

pub fn semclass_dict() -> SemClassDict {
    SemClassDict::parse(SEMCLASS_TSV, "builtin:semclass.tsv").expect("built-in class dictionary parses")
}

/// Non-empty, non-comment lines of a template file.
pub fn parse_templates(text: &str) -> Vec<String> {
    text.lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .map(str::to_string)
        .collect()
}

pub fn templates() -> Vec<String> {
    parse_templates(TEMPLATES_TXT)
}
