use std::fmt;
use std::io::{BufRead, Read, Write};
use std::path::{Path, PathBuf};

use zhgec::lexicons::{FrequencyTable, PhoneticLexicon, PosLexicon, SemClassDict};
use zhgec::mlm::NGramMlm;
use zhgec::model::ModelState;
use zhgec::resources;
use zhgec::tags::PosTagSet;
use zhgec::vocab::CharSeq;

/// A failed command with its process exit code.
#[derive(Debug)]
pub struct Failure {
    pub code: i32,
    pub message: String,
}

impl Failure {
    pub fn data(message: impl Into<String>) -> Self {
        Failure { code: 1, message: message.into() }
    }

    pub fn env(message: impl Into<String>) -> Self {
        Failure { code: 2, message: message.into() }
    }

    pub fn io(path: &Path, e: std::io::Error) -> Self {
        Failure::env(format!("{}: {e}", path.display()))
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

impl From<zhgec::Error> for Failure {
    fn from(e: zhgec::Error) -> Self {
        Failure {
            code: if e.is_io() { 2 } else { 1 },
            message: e.to_string(),
        }
    }
}

pub type CliResult<T = ()> = Result<T, Failure>;

fn stdio(e: std::io::Error) -> Failure {
    Failure::env(format!("standard stream: {e}"))
}

/// Whole text of `path`, or of stdin when `path` is absent or `-`.
pub fn read_text(path: Option<&Path>) -> CliResult<String> {
    match path {
        Some(p) if p != Path::new("-") => std::fs::read_to_string(p).map_err(|e| Failure::io(p, e)),
        _ => {
            let mut s = String::new();
            std::io::stdin().read_to_string(&mut s).map_err(stdio)?;
            Ok(s)
        }
    }
}

pub fn read_lines(path: Option<&Path>) -> CliResult<Vec<String>> {
    Ok(read_text(path)?.lines().map(str::to_string).collect())
}

/// Concatenated lines of several files, or stdin when the list is empty.
pub fn read_corpus(paths: &[PathBuf]) -> CliResult<Vec<CharSeq>> {
    let mut out = Vec::new();
    if paths.is_empty() {
        out.extend(read_lines(None)?.iter().map(|l| CharSeq::from_text(l)));
    }
    for p in paths {
        out.extend(read_lines(Some(p))?.iter().map(|l| CharSeq::from_text(l)));
    }
    Ok(out)
}

/// `erroneous<TAB>correct` lines.
pub fn read_pairs(path: &Path) -> CliResult<Vec<(CharSeq, CharSeq)>> {
    let text = read_text(Some(path))?;
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.is_empty())
        .map(|(n, l)| {
            let (a, b) = l
                .split_once('\t')
                .ok_or_else(|| Failure::data(format!("{}:{}: expected `source<TAB>target`", path.display(), n + 1)))?;
            Ok((CharSeq::from_text(a), CharSeq::from_text(b)))
        })
        .collect()
}

pub fn write_file(path: &Path, contents: &str) -> CliResult {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| Failure::io(dir, e))?;
    }
    std::fs::write(path, contents).map_err(|e| Failure::io(path, e))
}

pub fn write_stdout(text: &str) -> CliResult {
    let mut out = std::io::stdout().lock();
    out.write_all(text.as_bytes()).and_then(|_| out.flush()).map_err(stdio)
}

/// Calls `f` for every stdin line as it arrives.
pub fn stream_lines(mut f: impl FnMut(&str) -> CliResult<String>) -> CliResult {
    let stdin = std::io::stdin();
    let mut out = std::io::BufWriter::new(std::io::stdout().lock());
    for line in stdin.lock().lines() {
        let line = line.map_err(stdio)?;
        let done = f(&line)?;
        writeln!(out, "{done}").map_err(stdio)?;
    }
    out.flush().map_err(stdio)
}

pub fn phonetic(path: Option<&Path>) -> CliResult<PhoneticLexicon> {
    Ok(match path {
        Some(p) => PhoneticLexicon::load(p)?,
        None => resources::phonetic_lexicon(),
    })
}

pub fn pos_lexicon(path: Option<&Path>) -> CliResult<PosLexicon> {
    Ok(match path {
        Some(p) => PosLexicon::load(p, PosTagSet::default())?,
        None => resources::pos_lexicon(),
    })
}

pub fn semclass(path: Option<&Path>) -> CliResult<SemClassDict> {
    Ok(match path {
        Some(p) => SemClassDict::load(p)?,
        None => resources::semclass_dict(),
    })
}

pub fn freq(path: Option<&Path>) -> CliResult<FrequencyTable> {
    let p = path.ok_or_else(|| Failure::data("--freq is required"))?;
    Ok(FrequencyTable::load(p)?)
}

pub fn mlm(path: Option<&Path>) -> CliResult<NGramMlm> {
    let p = path.ok_or_else(|| Failure::data("--mlm is required"))?;
    NGramMlm::load(p).map_err(|e| Failure::env(format!("cannot load masked LM: {e}")))
}

/// Any failure to load a checkpoint is reported as an environment error.
pub fn model(path: Option<&Path>) -> CliResult<ModelState> {
    let p = path.ok_or_else(|| Failure::data("--model is required"))?;
    ModelState::load(p).map_err(|e| Failure::env(format!("cannot load model: {e}")))
}
