//! Template-driven parallel corpus with injected errors and exact gold edits.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::eval::{Edit, EditSet, M2Sentence};
use crate::lexicons::{is_punctuation, sim_set, PhoneticLexicon, PosLexicon};
use crate::vocab::CharSeq;

#[derive(Clone, Debug, PartialEq)]
pub struct SyntheticSpec {
    /// Space-separated items: a lexicon word, or `{tag}` for a random word
    /// with that POS tag.
    pub templates: Vec<String>,
    /// Per character with a non-empty homophone set.
    pub substitution_rate: f64,
    /// Per word.
    pub deletion_rate: f64,
    /// Per word: a random word is inserted before it.
    pub insertion_rate: f64,
    /// Per sentence: two adjacent words are swapped.
    pub word_order_rate: f64,
    pub size: usize,
    pub seed: u64,
    pub tone_sensitive: bool,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        SyntheticSpec {
            templates: Vec::new(),
            substitution_rate: 0.0,
            deletion_rate: 0.0,
            insertion_rate: 0.0,
            word_order_rate: 0.0,
            size: 0,
            seed: 1,
            tone_sensitive: false,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SyntheticPair {
    pub erroneous: CharSeq,
    pub correct: CharSeq,
    /// Edits over `erroneous` that produce `correct`.
    pub edits: EditSet,
}

enum Item {
    Word(String),
    Slot(usize),
}

#[derive(Clone, Debug)]
struct Piece {
    err: String,
    cor: String,
}

impl Piece {
    fn same(w: &str) -> Self {
        Piece {
            err: w.to_string(),
            cor: w.to_string(),
        }
    }

    fn changed(&self) -> bool {
        self.err != self.cor
    }
}

fn is_punct_word(w: &str) -> bool {
    w.chars().all(is_punctuation)
}

fn parse_templates(spec: &SyntheticSpec, pos: &PosLexicon) -> Result<Vec<Vec<Item>>> {
    if spec.templates.is_empty() {
        return Err(Error::Config("no sentence templates".into()));
    }
    spec.templates
        .iter()
        .map(|t| {
            let items: Vec<Item> = t
                .split_whitespace()
                .map(|tok| {
                    if let Some(tag) = tok.strip_prefix('{').and_then(|s| s.strip_suffix('}')) {
                        let id = pos
                            .tagset()
                            .id(tag)
                            .ok_or_else(|| Error::Data(format!("template `{t}`: unknown tag {{{tag}}}")))?;
                        Ok(Item::Slot(id))
                    } else if pos.contains(tok) {
                        Ok(Item::Word(tok.to_string()))
                    } else {
                        Err(Error::Data(format!("template `{t}`: word `{tok}` is not in the POS lexicon")))
                    }
                })
                .collect::<Result<_>>()?;
            if items.is_empty() {
                return Err(Error::Data("empty template".into()));
            }
            Ok(items)
        })
        .collect()
}

/// Generates `spec.size` pairs. Deterministic for a given seed.
pub fn make_synthetic_corpus(
    spec: &SyntheticSpec,
    phonetic: &PhoneticLexicon,
    pos: &PosLexicon,
) -> Result<Vec<SyntheticPair>> {
    for (name, r) in [
        ("substitution_rate", spec.substitution_rate),
        ("deletion_rate", spec.deletion_rate),
        ("insertion_rate", spec.insertion_rate),
        ("word_order_rate", spec.word_order_rate),
    ] {
        if !(0.0..=1.0).contains(&r) {
            return Err(Error::Config(format!("{name} must lie in [0, 1], got {r}")));
        }
    }
    let templates = parse_templates(spec, pos)?;
    let mut by_tag: BTreeMap<usize, Vec<String>> = BTreeMap::new();
    for (w, t) in pos.words() {
        by_tag.entry(t).or_default().push(w.to_string());
    }
    for items in &templates {
        for it in items {
            if let Item::Slot(t) = it {
                if !by_tag.contains_key(t) {
                    let name = pos.tagset().name(*t).unwrap_or("?");
                    return Err(Error::Data(format!("no lexicon words with tag {{{name}}}")));
                }
            }
        }
    }
    let fillers: Vec<String> = pos
        .words()
        .into_iter()
        .map(|(w, _)| w.to_string())
        .filter(|w| !is_punct_word(w))
        .collect();
    let sims: BTreeMap<char, Vec<char>> = phonetic
        .chars()
        .map(|c| (c, sim_set(phonetic, c, spec.tone_sensitive).into_iter().collect()))
        .collect();

    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut out = Vec::with_capacity(spec.size);
    while out.len() < spec.size {
        let items = templates.choose(&mut rng).expect("templates are non-empty");
        let words: Vec<String> = items
            .iter()
            .map(|it| match it {
                Item::Word(w) => w.clone(),
                Item::Slot(t) => by_tag[t].choose(&mut rng).expect("checked non-empty").clone(),
            })
            .collect();
        let mut pieces: Vec<Piece> = words.iter().map(|w| Piece::same(w)).collect();

        if spec.word_order_rate > 0.0 && rng.gen_bool(spec.word_order_rate) {
            let swappable: Vec<usize> = (0..pieces.len().saturating_sub(1))
                .filter(|&i| {
                    let (a, b) = (&pieces[i].cor, &pieces[i + 1].cor);
                    a != b && !is_punct_word(a) && !is_punct_word(b)
                })
                .collect();
            if let Some(&i) = swappable.choose(&mut rng) {
                let (a, b) = (pieces[i].cor.clone(), pieces[i + 1].cor.clone());
                pieces[i] = Piece {
                    err: format!("{b}{a}"),
                    cor: format!("{a}{b}"),
                };
                pieces.remove(i + 1);
            }
        }

        let mut staged = Vec::with_capacity(pieces.len() + 2);
        for p in pieces {
            if p.changed() || is_punct_word(&p.cor) {
                staged.push(p);
                continue;
            }
            if spec.deletion_rate > 0.0 && rng.gen_bool(spec.deletion_rate) {
                staged.push(Piece {
                    err: String::new(),
                    cor: p.cor,
                });
                continue;
            }
            if spec.insertion_rate > 0.0 && rng.gen_bool(spec.insertion_rate) && !fillers.is_empty() {
                let w = fillers.choose(&mut rng).expect("non-empty").clone();
                staged.push(Piece {
                    err: w,
                    cor: String::new(),
                });
            }
            staged.push(p);
        }

        let mut pieces = Vec::with_capacity(staged.len() * 2);
        for p in staged {
            if p.changed() {
                pieces.push(p);
                continue;
            }
            for c in p.cor.chars() {
                let mut piece = Piece::same(&c.to_string());
                if !is_punctuation(c) && spec.substitution_rate > 0.0 {
                    if let Some(alts) = sims.get(&c).filter(|s| !s.is_empty()) {
                        if rng.gen_bool(spec.substitution_rate) {
                            piece.err = alts.choose(&mut rng).expect("non-empty").to_string();
                        }
                    }
                }
                pieces.push(piece);
            }
        }

        let erroneous: String = pieces.iter().map(|p| p.err.as_str()).collect();
        if erroneous.is_empty() {
            continue;
        }
        let correct: String = pieces.iter().map(|p| p.cor.as_str()).collect();
        let mut edits = Vec::new();
        let mut at = 0;
        let mut open: Option<Edit> = None;
        for p in &pieces {
            let n = p.err.chars().count();
            if p.changed() {
                let e = open.get_or_insert_with(|| Edit::new(at, at, ""));
                e.end = at + n;
                e.replacement.push_str(&p.cor);
            } else {
                edits.extend(open.take());
            }
            at += n;
        }
        edits.extend(open);
        out.push(SyntheticPair {
            erroneous: CharSeq::from_chars(&erroneous.chars().collect::<Vec<_>>()),
            correct: CharSeq::from_chars(&correct.chars().collect::<Vec<_>>()),
            edits: EditSet::new(edits)?,
        });
    }
    Ok(out)
}

/// Gold annotations of a synthetic corpus in M² form.
pub fn to_m2(pairs: &[SyntheticPair]) -> Vec<M2Sentence> {
    pairs
        .iter()
        .map(|p| M2Sentence {
            source: p.erroneous.clone(),
            annotations: vec![p.edits.clone()],
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tags::PosTagSet;
    use proptest::prelude::*;

    fn lexicons() -> (PhoneticLexicon, PosLexicon) {
        let ph = PhoneticLexicon::parse("今\tjin1\n金\tjin1\n年\tnian2\n我\two3\n去\tqu4\n", "t").unwrap();
        let pos = PosLexicon::parse(
            "今年\tnoun\n我\tpronoun\n去\tverb\n学校\tnoun\n。\tpunctuation\n",
            PosTagSet::default(),
            "t",
        )
        .unwrap();
        (ph, pos)
    }

    fn spec(rates: [f64; 4], size: usize, seed: u64) -> SyntheticSpec {
        SyntheticSpec {
            templates: vec!["今年 {pronoun} {verb} {noun} 。".into(), "我 去 学校 。".into()],
            substitution_rate: rates[0],
            deletion_rate: rates[1],
            insertion_rate: rates[2],
            word_order_rate: rates[3],
            size,
            seed,
            tone_sensitive: false,
        }
    }

    #[test]
    fn zero_rates_are_identity() {
        let (ph, pos) = lexicons();
        for p in make_synthetic_corpus(&spec([0.0; 4], 20, 3), &ph, &pos).unwrap() {
            assert_eq!(p.erroneous, p.correct);
            assert!(p.edits.is_empty());
        }
    }

    #[test]
    fn full_substitution_hits_every_homophone_position() {
        let (ph, pos) = lexicons();
        for p in make_synthetic_corpus(&spec([1.0, 0.0, 0.0, 0.0], 20, 3), &ph, &pos).unwrap() {
            for (e, c) in p.erroneous.chars().iter().zip(p.correct.chars()) {
                let sims = sim_set(&ph, c, false);
                if sims.is_empty() {
                    assert_eq!(*e, c);
                } else {
                    assert!(sims.contains(e), "{e} is not a homophone of {c}");
                }
            }
        }
    }

    #[test]
    fn unknown_template_word_is_an_error() {
        let (ph, pos) = lexicons();
        let mut s = spec([0.0; 4], 1, 1);
        s.templates = vec!["我 吃 。".into()];
        assert!(matches!(make_synthetic_corpus(&s, &ph, &pos), Err(Error::Data(_))));
        s.templates = vec!["{nosuchtag}".into()];
        assert!(make_synthetic_corpus(&s, &ph, &pos).is_err());
    }

    #[test]
    fn deterministic_per_seed() {
        let (ph, pos) = lexicons();
        let s = spec([0.3, 0.2, 0.2, 0.3], 30, 9);
        assert_eq!(
            make_synthetic_corpus(&s, &ph, &pos).unwrap(),
            make_synthetic_corpus(&s, &ph, &pos).unwrap()
        );
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(16))]
        #[test]
        fn gold_edits_round_trip(seed in 0u64..1000, r in prop::array::uniform4(0.0f64..=1.0)) {
            let (ph, pos) = lexicons();
            for p in make_synthetic_corpus(&spec(r, 60, seed), &ph, &pos).unwrap() {
                prop_assert_eq!(p.edits.apply(&p.erroneous.chars()).unwrap(), p.correct.chars());
            }
        }
    }
}
