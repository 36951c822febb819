use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::path::Path;

use super::{data_lines, read_file};
use crate::error::{Error, Result};

/// A pronunciation syllable: lowercase letters plus an optional tone 1–5.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Syllable {
    pub base: String,
    pub tone: Option<u8>,
}

impl Syllable {
    pub fn parse(s: &str) -> Option<Syllable> {
        let s = s.trim();
        let (base, tone) = match s.chars().last()? {
            d @ '1'..='5' => (&s[..s.len() - 1], Some(d as u8 - b'0')),
            _ => (s, None),
        };
        if base.is_empty() || !base.chars().all(char::is_alphabetic) {
            return None;
        }
        Some(Syllable {
            base: base.to_lowercase(),
            tone,
        })
    }
}

impl fmt::Display for Syllable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.tone {
            Some(t) => write!(f, "{}{}", self.base, t),
            None => f.write_str(&self.base),
        }
    }
}

/// Character → pronunciation syllables, indexed both ways.
#[derive(Clone, Debug, Default)]
pub struct PhoneticLexicon {
    readings: BTreeMap<char, BTreeSet<Syllable>>,
    by_base: HashMap<String, BTreeSet<char>>,
    by_syllable: HashMap<Syllable, BTreeSet<char>>,
}

impl PhoneticLexicon {
    pub fn load(path: &Path) -> Result<Self> {
        Self::parse(&read_file(path)?, &path.display().to_string())
    }

    /// Parses `char<TAB>syll1,syll2,...` lines. Repeated characters merge.
    pub fn parse(text: &str, origin: &str) -> Result<Self> {
        let mut lex = PhoneticLexicon::default();
        for (n, line) in data_lines(text) {
            let (head, sylls) = line
                .split_once('\t')
                .ok_or_else(|| Error::parse(origin, n, "expected `char<TAB>syllables`"))?;
            let mut chars = head.chars();
            let c = match (chars.next(), chars.next()) {
                (Some(c), None) => c,
                _ => return Err(Error::parse(origin, n, format!("`{head}` is not a single character"))),
            };
            let mut any = false;
            for raw in sylls.split(',') {
                let syl = Syllable::parse(raw)
                    .ok_or_else(|| Error::parse(origin, n, format!("bad syllable `{}`", raw.trim())))?;
                lex.insert(c, syl);
                any = true;
            }
            if !any {
                return Err(Error::parse(origin, n, "no syllables"));
            }
        }
        Ok(lex)
    }

    pub fn insert(&mut self, c: char, syl: Syllable) {
        self.by_base.entry(syl.base.clone()).or_default().insert(c);
        self.by_syllable.entry(syl.clone()).or_default().insert(c);
        self.readings.entry(c).or_default().insert(syl);
    }

    pub fn readings(&self, c: char) -> Option<&BTreeSet<Syllable>> {
        self.readings.get(&c)
    }

    pub fn contains(&self, c: char) -> bool {
        self.readings.contains_key(&c)
    }

    pub fn len(&self) -> usize {
        self.readings.len()
    }

    pub fn is_empty(&self) -> bool {
        self.readings.is_empty()
    }

    pub fn chars(&self) -> impl Iterator<Item = char> + '_ {
        self.readings.keys().copied()
    }
}

/// Homophones of `c`: every other character sharing at least one reading.
/// Matching ignores tone unless `tone_sensitive`. Polyphonic characters use
/// the union over all readings; `c` itself is never included.
pub fn sim_set(lex: &PhoneticLexicon, c: char, tone_sensitive: bool) -> BTreeSet<char> {
    let mut out = BTreeSet::new();
    let Some(readings) = lex.readings.get(&c) else {
        return out;
    };
    for syl in readings {
        let sharers = if tone_sensitive {
            lex.by_syllable.get(syl)
        } else {
            lex.by_base.get(&syl.base)
        };
        if let Some(set) = sharers {
            out.extend(set.iter().copied());
        }
    }
    out.remove(&c);
    out
}
