use std::fmt;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::vocab::CharSeq;

/// Replace source characters `[start, end)` with `replacement`. An insertion
/// has `start == end`; a deletion has an empty replacement.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub struct Edit {
    pub start: usize,
    pub end: usize,
    pub replacement: String,
}

impl Edit {
    pub fn new(start: usize, end: usize, replacement: impl Into<String>) -> Self {
        Edit {
            start,
            end,
            replacement: replacement.into(),
        }
    }

    pub fn is_insertion(&self) -> bool {
        self.start == self.end
    }
}

impl fmt::Display for Edit {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({},{},{:?})", self.start, self.end, self.replacement)
    }
}

/// Sorted, non-overlapping edits over one source sentence.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash, Serialize)]
pub struct EditSet {
    edits: Vec<Edit>,
}

impl EditSet {
    /// Sorts and validates. Spans may touch but not overlap; at most one
    /// insertion per point; no insertion strictly inside another edit's span.
    pub fn new(mut edits: Vec<Edit>) -> Result<Self> {
        edits.sort();
        for e in &edits {
            if e.start > e.end {
                return Err(Error::Data(format!("edit {e} has start after end")));
            }
        }
        for w in edits.windows(2) {
            let (a, b) = (&w[0], &w[1]);
            if a.is_insertion() && b.is_insertion() && a.start == b.start {
                return Err(Error::Data(format!("two insertions at {}: {a} and {b}", a.start)));
            }
            if a.end > b.start {
                return Err(Error::Data(format!("overlapping edits {a} and {b}")));
            }
        }
        Ok(EditSet { edits })
    }

    pub fn empty() -> Self {
        EditSet::default()
    }

    pub fn edits(&self) -> &[Edit] {
        &self.edits
    }

    pub fn len(&self) -> usize {
        self.edits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.edits.is_empty()
    }

    pub fn contains(&self, e: &Edit) -> bool {
        self.edits.binary_search(e).is_ok()
    }

    /// Applies every edit to `src`.
    pub fn apply(&self, src: &[char]) -> Result<Vec<char>> {
        let mut out = Vec::with_capacity(src.len());
        let mut at = 0;
        for e in &self.edits {
            if e.end > src.len() {
                return Err(Error::Data(format!("edit {e} beyond source length {}", src.len())));
            }
            out.extend_from_slice(&src[at..e.start]);
            out.extend(e.replacement.chars());
            at = e.end;
        }
        out.extend_from_slice(&src[at..]);
        Ok(out)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub(crate) enum Op {
    Match,
    Sub,
    Del,
    Ins,
}

/// Levenshtein distance table `d[i][j]` between prefixes.
pub(crate) fn distance_table(a: &[char], b: &[char]) -> Vec<Vec<usize>> {
    let (n, m) = (a.len(), b.len());
    let mut d = vec![vec![0usize; m + 1]; n + 1];
    for (i, row) in d.iter_mut().enumerate() {
        row[0] = i;
    }
    for j in 0..=m {
        d[0][j] = j;
    }
    for i in 1..=n {
        for j in 1..=m {
            let diag = d[i - 1][j - 1] + usize::from(a[i - 1] != b[j - 1]);
            d[i][j] = diag.min(d[i - 1][j] + 1).min(d[i][j - 1] + 1);
        }
    }
    d
}

/// One optimal alignment, backtracking from the end and preferring match,
/// then substitution, deletion and insertion.
pub(crate) fn align(a: &[char], b: &[char]) -> Vec<Op> {
    let d = distance_table(a, b);
    let (mut i, mut j) = (a.len(), b.len());
    let mut ops = Vec::new();
    while i > 0 || j > 0 {
        if i > 0 && j > 0 && a[i - 1] == b[j - 1] && d[i][j] == d[i - 1][j - 1] {
            ops.push(Op::Match);
            i -= 1;
            j -= 1;
        } else if i > 0 && j > 0 && d[i][j] == d[i - 1][j - 1] + 1 {
            ops.push(Op::Sub);
            i -= 1;
            j -= 1;
        } else if i > 0 && d[i][j] == d[i - 1][j] + 1 {
            ops.push(Op::Del);
            i -= 1;
        } else {
            ops.push(Op::Ins);
            j -= 1;
        }
    }
    ops.reverse();
    ops
}

/// Character-level edits turning `src` into `hyp`; runs of adjacent
/// non-matching alignment operations become one edit.
pub fn extract_edits(src: &CharSeq, hyp: &CharSeq) -> EditSet {
    let (a, b) = (src.chars(), hyp.chars());
    let mut edits = Vec::new();
    let (mut i, mut j) = (0, 0);
    let mut open: Option<Edit> = None;
    for op in align(&a, &b) {
        if op == Op::Match {
            edits.extend(open.take());
            i += 1;
            j += 1;
            continue;
        }
        let e = open.get_or_insert_with(|| Edit::new(i, i, ""));
        match op {
            Op::Sub => {
                e.replacement.push(b[j]);
                i += 1;
                j += 1;
            }
            Op::Del => i += 1,
            Op::Ins => {
                e.replacement.push(b[j]);
                j += 1;
            }
            Op::Match => unreachable!(),
        }
        e.end = i;
    }
    edits.extend(open);
    EditSet::new(edits).expect("alignment edits are disjoint")
}
