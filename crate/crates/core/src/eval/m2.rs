//! MaxMatch scoring: the system edit sequence is chosen from the lattice of
//! all minimum-cost alignments so as to agree best with the gold edits.

use std::collections::BTreeMap;

use super::edits::{distance_table, Edit, EditSet};
use super::fscore::{f_beta, PrfScore};
use crate::error::{contract, Error, Result};
use crate::vocab::CharSeq;

/// Unchanged characters allowed inside one merged system edit.
pub const MAX_UNCHANGED: usize = 2;

type Vertex = (usize, usize);

struct Lattice {
    /// On-path vertices in topological order.
    order: Vec<Vertex>,
    /// Single-operation arcs `(to, is_match)` per on-path vertex.
    arcs: BTreeMap<Vertex, Vec<(Vertex, bool)>>,
}

fn build_lattice(a: &[char], b: &[char]) -> Lattice {
    let (n, m) = (a.len(), b.len());
    let fwd = distance_table(a, b);
    let ra: Vec<char> = a.iter().rev().copied().collect();
    let rb: Vec<char> = b.iter().rev().copied().collect();
    let rev = distance_table(&ra, &rb);
    let bwd = |i: usize, j: usize| rev[n - i][m - j];
    let total = fwd[n][m];
    let on = |i: usize, j: usize| fwd[i][j] + bwd(i, j) == total;

    let mut order = Vec::new();
    let mut arcs = BTreeMap::new();
    for s in 0..=(n + m) {
        for i in s.saturating_sub(m)..=s.min(n) {
            let j = s - i;
            if !on(i, j) {
                continue;
            }
            order.push((i, j));
            let mut out = Vec::new();
            let base = fwd[i][j];
            if i < n && j < m {
                let same = a[i] == b[j];
                if base + usize::from(!same) + bwd(i + 1, j + 1) == total {
                    out.push(((i + 1, j + 1), same));
                }
            }
            if i < n && base + 1 + bwd(i + 1, j) == total {
                out.push(((i + 1, j), false));
            }
            if j < m && base + 1 + bwd(i, j + 1) == total {
                out.push(((i, j + 1), false));
            }
            arcs.insert((i, j), out);
        }
    }
    Lattice { order, arcs }
}

/// Targets reachable from `u` along lattice paths with at most
/// [`MAX_UNCHANGED`] matches.
fn merged_targets(lat: &Lattice, u: Vertex) -> Vec<Vertex> {
    let mut best: BTreeMap<Vertex, usize> = BTreeMap::new();
    best.insert(u, 0);
    let start = lat.order.iter().position(|&v| v == u).expect("on-path vertex");
    for &v in &lat.order[start..] {
        let Some(&k) = best.get(&v) else { continue };
        for &(w, is_match) in &lat.arcs[&v] {
            let k2 = k + usize::from(is_match);
            if k2 <= MAX_UNCHANGED {
                let e = best.entry(w).or_insert(usize::MAX);
                *e = (*e).min(k2);
            }
        }
    }
    best.into_keys().filter(|&v| v != u).collect()
}

/// `(tp, sys)` of the lattice path with the most true positives, and among
/// those the fewest false positives.
pub fn best_counts(src: &[char], hyp: &[char], gold: &EditSet) -> (usize, usize) {
    let lat = build_lattice(src, hyp);
    // (vertex, last edge was an insertion) -> (tp, fp)
    let mut best: BTreeMap<(Vertex, bool), (usize, usize)> = BTreeMap::new();
    best.insert(((0, 0), false), (0, 0));
    let better = |new: (usize, usize), old: Option<&(usize, usize)>| match old {
        None => true,
        Some(&(tp, fp)) => new.0 > tp || (new.0 == tp && new.1 < fp),
    };
    for &u in &lat.order {
        for flag in [false, true] {
            let Some(&(tp, fp)) = best.get(&(u, flag)) else { continue };
            for v in merged_targets(&lat, u) {
                let src_span = &src[u.0..v.0];
                let hyp_span = &hyp[u.1..v.1];
                let (next, insertion) = if src_span == hyp_span {
                    ((tp, fp), false)
                } else {
                    let insertion = u.0 == v.0;
                    if insertion && flag {
                        continue;
                    }
                    let e = Edit::new(u.0, v.0, hyp_span.iter().collect::<String>());
                    if gold.contains(&e) {
                        ((tp + 1, fp), insertion)
                    } else {
                        ((tp, fp + 1), insertion)
                    }
                };
                if better(next, best.get(&(v, insertion))) {
                    best.insert((v, insertion), next);
                }
            }
        }
    }
    let end = (src.len(), hyp.len());
    let mut out: Option<(usize, usize)> = None;
    for flag in [false, true] {
        if let Some(&c) = best.get(&(end, flag)) {
            if better(c, out.as_ref()) {
                out = Some(c);
            }
        }
    }
    let (tp, fp) = out.expect("the end vertex is always reachable");
    (tp, tp + fp)
}

/// Per-sentence `(tp, sys, gold)` counts against each annotator.
fn annotator_counts(src: &CharSeq, hyp: &CharSeq, golds: &[EditSet]) -> Result<Vec<(usize, usize, usize)>> {
    contract!(!golds.is_empty(), "at least one gold annotation is required");
    let (a, b) = (src.chars(), hyp.chars());
    golds
        .iter()
        .map(|g| {
            if let Some(e) = g.edits().iter().find(|e| e.end > a.len()) {
                return Err(Error::Data(format!("gold edit {e} beyond source length {}", a.len())));
            }
            let (tp, sys) = best_counts(&a, &b, g);
            Ok((tp, sys, g.len()))
        })
        .collect()
}

/// Scores one sentence.
pub fn max_match_prf(src: &CharSeq, hyp: &CharSeq, golds: &[EditSet], beta: f64) -> Result<PrfScore> {
    max_match_corpus(&[(src.clone(), hyp.clone(), golds.to_vec())], beta)
}

/// Corpus-level scoring. For each sentence the annotator that maximises the
/// running corpus F-score is used; ties prefer more true positives, then
/// fewer gold edits, then the earlier annotator.
pub fn max_match_corpus(items: &[(CharSeq, CharSeq, Vec<EditSet>)], beta: f64) -> Result<PrfScore> {
    let (mut tp, mut sys, mut gold) = (0, 0, 0);
    for (src, hyp, golds) in items {
        let counts = annotator_counts(src, hyp, golds)?;
        let f = |c: &(usize, usize, usize)| {
            let s = PrfScore::from_counts(tp + c.0, sys + c.1, gold + c.2, beta);
            f_beta(s.precision, s.recall, beta)
        };
        let mut pick = 0;
        for (k, c) in counts.iter().enumerate().skip(1) {
            let p = &counts[pick];
            let (fc, fp) = (f(c), f(p));
            if fc > fp || (fc == fp && (c.0 > p.0 || (c.0 == p.0 && c.2 < p.2))) {
                pick = k;
            }
        }
        let c = counts[pick];
        tp += c.0;
        sys += c.1;
        gold += c.2;
    }
    Ok(PrfScore::from_counts(tp, sys, gold, beta))
}

/// One sentence of an M²-style annotation file, in character offsets.
#[derive(Clone, Debug, PartialEq)]
pub struct M2Sentence {
    pub source: CharSeq,
    pub annotations: Vec<EditSet>,
}

/// Parses `S` / `A` blocks. Token offsets are converted to character
/// offsets, so multi-character tokens are allowed.
pub fn parse_m2(text: &str, origin: &str) -> Result<Vec<M2Sentence>> {
    let mut out = Vec::new();
    let mut cur: Option<(Vec<usize>, CharSeq, BTreeMap<usize, Vec<Edit>>)> = None;
    let flush = |cur: &mut Option<(Vec<usize>, CharSeq, BTreeMap<usize, Vec<Edit>>)>,
                 out: &mut Vec<M2Sentence>,
                 line: usize|
     -> Result<()> {
        if let Some((_, source, by_annotator)) = cur.take() {
            let mut annotations = by_annotator
                .into_values()
                .map(|edits| EditSet::new(edits).map_err(|e| Error::parse(origin, line, e.to_string())))
                .collect::<Result<Vec<_>>>()?;
            if annotations.is_empty() {
                annotations.push(EditSet::empty());
            }
            out.push(M2Sentence { source, annotations });
        }
        Ok(())
    };
    let lines: Vec<&str> = text.lines().collect();
    for (n, raw) in lines.iter().enumerate() {
        let line_no = n + 1;
        let line = raw.trim_end_matches('\r');
        if let Some(rest) = line.strip_prefix("S ").or(if line == "S" { Some("") } else { None }) {
            flush(&mut cur, &mut out, line_no)?;
            let tokens: Vec<&str> = rest.split_whitespace().collect();
            let mut offsets = vec![0];
            for t in &tokens {
                offsets.push(offsets.last().unwrap() + t.chars().count());
            }
            cur = Some((offsets, CharSeq::from_text(&tokens.concat()), BTreeMap::new()));
        } else if let Some(rest) = line.strip_prefix("A ") {
            let Some((offsets, _, by_annotator)) = cur.as_mut() else {
                return Err(Error::parse(origin, line_no, "annotation before any S line"));
            };
            let fields: Vec<&str> = rest.split("|||").collect();
            if fields.len() < 3 {
                return Err(Error::parse(origin, line_no, "expected `start end|||type|||replacement|||...`"));
            }
            let annotator = match fields.get(5) {
                Some(a) => a
                    .trim()
                    .parse::<usize>()
                    .map_err(|_| Error::parse(origin, line_no, "bad annotator id"))?,
                None => 0,
            };
            let span: Vec<&str> = fields[0].split_whitespace().collect();
            let edits = by_annotator.entry(annotator).or_default();
            let kind = fields[1].trim();
            if span == ["-1", "-1"] || kind.eq_ignore_ascii_case("noop") {
                continue;
            }
            let parse_idx = |s: &str| {
                s.parse::<usize>()
                    .ok()
                    .filter(|&k| k < offsets.len())
                    .ok_or_else(|| Error::parse(origin, line_no, format!("bad token offset `{s}`")))
            };
            if span.len() != 2 {
                return Err(Error::parse(origin, line_no, "expected two offsets"));
            }
            let (s, e) = (parse_idx(span[0])?, parse_idx(span[1])?);
            if s > e {
                return Err(Error::parse(origin, line_no, "start offset after end offset"));
            }
            let rep = fields[2].trim();
            let rep = if rep == "-NONE-" { String::new() } else { rep.split_whitespace().collect() };
            edits.push(Edit::new(offsets[s], offsets[e], rep));
        } else if line.trim().is_empty() {
            flush(&mut cur, &mut out, line_no)?;
        } else {
            return Err(Error::parse(origin, line_no, "expected an S or A line"));
        }
    }
    flush(&mut cur, &mut out, lines.len())?;
    Ok(out)
}

fn spaced(s: &str) -> String {
    let chars: Vec<String> = s.chars().map(String::from).collect();
    chars.join(" ")
}

/// Writes character-tokenised M² text.
pub fn write_m2(sentences: &[M2Sentence]) -> String {
    let mut out = String::new();
    for s in sentences {
        out.push_str("S ");
        out.push_str(&spaced(&s.source.to_text()));
        out.push('\n');
        for (k, ann) in s.annotations.iter().enumerate() {
            if ann.is_empty() {
                out.push_str(&format!("A -1 -1|||noop|||-NONE-|||REQUIRED|||-NONE-|||{k}\n"));
            }
            for e in ann.edits() {
                let rep = if e.replacement.is_empty() { "-NONE-".to_string() } else { spaced(&e.replacement) };
                let kind = match (e.start == e.end, e.replacement.is_empty()) {
                    (true, _) => "M",
                    (false, true) => "R",
                    (false, false) => "S",
                };
                out.push_str(&format!("A {} {}|||{kind}|||{rep}|||REQUIRED|||-NONE-|||{k}\n", e.start, e.end));
            }
        }
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn set(edits: &[(usize, usize, &str)]) -> EditSet {
        EditSet::new(edits.iter().map(|&(s, e, r)| Edit::new(s, e, r)).collect()).unwrap()
    }

    #[test]
    fn perfect_system() {
        let s = max_match_prf(&"金年我去".into(), &"今年我去了".into(), &[set(&[(0, 1, "今"), (4, 4, "了")])], 0.5).unwrap();
        assert_eq!((s.tp, s.sys_count, s.gold_count), (2, 2, 2));
        assert_eq!((s.precision, s.recall, s.f_beta), (1.0, 1.0, 1.0));
    }

    #[test]
    fn empty_system() {
        let s = max_match_prf(&"金年".into(), &"金年".into(), &[set(&[(0, 1, "今")])], 0.5).unwrap();
        assert_eq!((s.tp, s.sys_count, s.gold_count), (0, 0, 1));
        assert_eq!((s.precision, s.recall), (0.0, 0.0));
    }

    #[test]
    fn merges_across_unchanged_characters() {
        // the system changes a and c; gold rewrites the whole span
        let s = max_match_prf(&"abc".into(), &"xby".into(), &[set(&[(0, 3, "xby")])], 0.5).unwrap();
        assert_eq!((s.tp, s.sys_count), (1, 1));
        let s = max_match_prf(&"abc".into(), &"xby".into(), &[set(&[(0, 1, "x")])], 0.5).unwrap();
        assert_eq!((s.tp, s.sys_count), (1, 2));
    }

    #[test]
    fn best_annotator_is_used() {
        let golds = [set(&[(0, 1, "y")]), set(&[(0, 1, "x")])];
        let s = max_match_prf(&"ab".into(), &"xb".into(), &golds, 0.5).unwrap();
        assert_eq!((s.tp, s.sys_count, s.gold_count), (1, 1, 1));
    }

    #[test]
    fn gold_beyond_source_is_rejected() {
        assert!(max_match_prf(&"ab".into(), &"ab".into(), &[set(&[(2, 3, "x")])], 0.5).is_err());
        assert!(max_match_prf(&"ab".into(), &"ab".into(), &[], 0.5).is_err());
    }

    #[test]
    fn m2_round_trip() {
        let text = "S 金 年 我 去\nA 0 1|||S|||今|||REQUIRED|||-NONE-|||0\nA 4 4|||M|||了|||REQUIRED|||-NONE-|||0\n\nS 好\nA -1 -1|||noop|||-NONE-|||REQUIRED|||-NONE-|||0\n\n";
        let parsed = parse_m2(text, "t").unwrap();
        assert_eq!(parsed.len(), 2);
        assert_eq!(parsed[0].annotations[0].edits(), &[Edit::new(0, 1, "今"), Edit::new(4, 4, "了")]);
        assert!(parsed[1].annotations[0].is_empty());
        assert_eq!(parse_m2(&write_m2(&parsed), "t").unwrap(), parsed);
    }

    #[test]
    fn m2_token_offsets_become_char_offsets() {
        let parsed = parse_m2("S 今年 我 去\nA 1 2|||S|||你|||REQUIRED|||-NONE-|||0\n", "t").unwrap();
        assert_eq!(parsed[0].annotations[0].edits(), &[Edit::new(2, 3, "你")]);
    }

    #[test]
    fn m2_overlap_is_a_parse_error() {
        let err = parse_m2("S a b c\nA 0 2|||S|||x|||REQUIRED|||-NONE-|||0\nA 1 3|||S|||y|||REQUIRED|||-NONE-|||0\n", "g.m2")
            .unwrap_err();
        assert!(err.to_string().contains("g.m2"));
    }
}
