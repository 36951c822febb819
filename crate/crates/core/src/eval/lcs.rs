use serde::Serialize;

use crate::vocab::CharSeq;

/// Matched index pairs of a longest common subsequence. Among all maximum
/// matchings the one with the lexicographically smallest `(a, b)` index
/// pairs is returned.
pub fn lcs<T: PartialEq>(a: &[T], b: &[T]) -> Vec<(usize, usize)> {
    let (n, m) = (a.len(), b.len());
    // suffix[i][j] = LCS length of a[i..], b[j..]
    let mut suffix = vec![vec![0usize; m + 1]; n + 1];
    for i in (0..n).rev() {
        for j in (0..m).rev() {
            suffix[i][j] = if a[i] == b[j] {
                1 + suffix[i + 1][j + 1]
            } else {
                suffix[i + 1][j].max(suffix[i][j + 1])
            };
        }
    }
    let mut pairs = Vec::with_capacity(suffix[0][0]);
    let (mut i, mut j) = (0, 0);
    while suffix[i][j] > 0 {
        let need = suffix[i][j];
        let next = (i..n)
            .find_map(|ii| {
                (j..m)
                    .find(|&jj| a[ii] == b[jj] && 1 + suffix[ii + 1][jj + 1] == need)
                    .map(|jj| (ii, jj))
            })
            .expect("an LCS continuation exists");
        pairs.push(next);
        i = next.0 + 1;
        j = next.1 + 1;
    }
    pairs
}

pub fn lcs_len<T: PartialEq>(a: &[T], b: &[T]) -> usize {
    lcs(a, b).len()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum TokenLabel {
    Corr,
    Err,
}

/// Labels each element of `a`: `Corr` if it lies on the chosen LCS with `b`.
pub fn label_tokens<T: PartialEq>(a: &[T], b: &[T]) -> Vec<TokenLabel> {
    let mut labels = vec![TokenLabel::Err; a.len()];
    for (i, _) in lcs(a, b) {
        labels[i] = TokenLabel::Corr;
    }
    labels
}

pub fn classify_corr_err_tokens(src: &CharSeq, tgt: &CharSeq) -> Vec<TokenLabel> {
    label_tokens(src.tokens(), tgt.tokens())
}
