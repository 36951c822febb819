//! Masked character language models: the candidate generator for spelling
//! correction. Any scorer implementing [`MaskedLm`] can be plugged in; the
//! crate ships a smoothed context-count model.

use std::collections::{BTreeMap, HashMap};
use std::path::Path;

use crate::error::{contract, Error, Result};
use crate::model::Tensor;
use crate::train::checkpoint::TensorFile;
use crate::vocab::{CharSeq, Token};

/// Ranked candidates for one masked position, best first.
#[derive(Clone, Debug, PartialEq)]
pub struct MaskedPrediction {
    pub candidates: Vec<(char, f64)>,
}

impl MaskedPrediction {
    pub fn chars(&self) -> Vec<char> {
        self.candidates.iter().map(|&(c, _)| c).collect()
    }
}

pub trait MaskedLm: Sync {
    /// Scores for every candidate character at `pos`, which holds `[MASK]`.
    /// Order is irrelevant; ranking happens in [`top_k_candidates`].
    fn candidate_scores(&self, seq: &CharSeq, pos: usize) -> Vec<(char, f64)>;
}

/// Top-`k` candidates by score; ties go to the smaller codepoint.
pub fn top_k_candidates(
    model: &dyn MaskedLm,
    seq: &CharSeq,
    pos: usize,
    k: usize,
) -> Result<MaskedPrediction> {
    contract!(k >= 1, "k must be at least 1");
    contract!(pos < seq.len(), "mask position {pos} out of range for length {}", seq.len());
    contract!(
        seq.get(pos) == Some(Token::Mask),
        "position {pos} does not hold [MASK]"
    );
    let mut candidates = model.candidate_scores(seq, pos);
    candidates.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    candidates.truncate(k);
    Ok(MaskedPrediction { candidates })
}

const BOS_CODE: u32 = 0x11_0000;
const EOS_CODE: u32 = 0x11_0001;
const OTHER_CODE: u32 = 0x11_0002;
/// Largest count an `f32` holds exactly.
const MAX_EXACT_COUNT: u64 = 1 << 24;

type Context = Vec<u32>;

#[derive(Clone, Debug, Default, PartialEq)]
struct ContextTable {
    counts: HashMap<Context, BTreeMap<char, u64>>,
}

impl ContextTable {
    fn add(&mut self, ctx: Context, c: char, n: u64) {
        *self.counts.entry(ctx).or_default().entry(c).or_default() += n;
    }
}

/// Context-window count model: P(c | r chars left, r chars right), smoothed
/// towards smaller radii.
#[derive(Clone, Debug, PartialEq)]
pub struct NGramMlm {
    window: usize,
    alpha: f64,
    vocab: Vec<char>,
    /// `tables[r]` is keyed by the radius-`r` context.
    tables: Vec<ContextTable>,
}

fn code(t: Option<Token>, before: bool) -> u32 {
    match t {
        Some(Token::Char(c)) => c as u32,
        None if before => BOS_CODE,
        None => EOS_CODE,
        Some(Token::Bos) => BOS_CODE,
        Some(Token::Eos) => EOS_CODE,
        Some(_) => OTHER_CODE,
    }
}

fn context(tokens: &[Token], pos: usize, r: usize) -> Context {
    let mut ctx = Vec::with_capacity(2 * r);
    for d in (1..=r).rev() {
        let t = pos.checked_sub(d).map(|i| tokens[i]);
        ctx.push(code(t, true));
    }
    for d in 1..=r {
        ctx.push(code(tokens.get(pos + d).copied(), false));
    }
    ctx
}

impl NGramMlm {
    pub fn window(&self) -> usize {
        self.window
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn vocab(&self) -> &[char] {
        &self.vocab
    }

    /// Raw count of `c` in the context (`left`, `right`), both of length `r`;
    /// `None` entries stand for sentence boundaries.
    pub fn count(&self, left: &[Option<char>], right: &[Option<char>], c: char) -> u64 {
        let r = left.len();
        if right.len() != r || r > self.window {
            return 0;
        }
        let mut ctx: Context = left.iter().map(|o| o.map_or(BOS_CODE, |c| c as u32)).collect();
        ctx.extend(right.iter().map(|o| o.map_or(EOS_CODE, |c| c as u32)));
        self.tables[r]
            .counts
            .get(&ctx)
            .and_then(|m| m.get(&c))
            .copied()
            .unwrap_or(0)
    }

    /// Conditional distribution over the vocabulary at `pos`; sums to one.
    ///
    /// Interpolated smoothing from a uniform base upwards: at each radius
    /// whose context was seen, `P_r(c) = (n_r(c) + α·P_{r-1}(c)) / (N_r + α)`.
    /// Unseen characters are therefore ranked by lower-order evidence, and for
    /// `α ≤ 1` a higher full-context count always means a higher probability.
    pub fn distribution(&self, seq: &CharSeq, pos: usize) -> Vec<(char, f64)> {
        let tokens = seq.tokens();
        let mut p = vec![1.0 / self.vocab.len().max(1) as f64; self.vocab.len()];
        for r in 0..=self.window {
            let ctx = context(tokens, pos, r);
            let Some(counts) = self.tables[r].counts.get(&ctx) else { continue };
            let total: u64 = counts.values().sum();
            if total == 0 {
                continue;
            }
            let denom = total as f64 + self.alpha;
            for (pi, c) in p.iter_mut().zip(&self.vocab) {
                let n = counts.get(c).copied().unwrap_or(0) as f64;
                *pi = (n + self.alpha * *pi) / denom;
            }
        }
        self.vocab.iter().copied().zip(p).collect()
    }

    /// Adds the counts of `other`, which must share window and α.
    pub fn merge(&mut self, other: &NGramMlm) -> Result<()> {
        contract!(
            self.window == other.window && self.alpha == other.alpha,
            "cannot merge models with different window or smoothing"
        );
        for (mine, theirs) in self.tables.iter_mut().zip(&other.tables) {
            for (ctx, counts) in &theirs.counts {
                for (&c, &n) in counts {
                    mine.add(ctx.clone(), c, n);
                }
            }
        }
        let mut vocab = self.vocab.clone();
        vocab.extend_from_slice(&other.vocab);
        vocab.sort_unstable();
        vocab.dedup();
        self.vocab = vocab;
        Ok(())
    }

    pub fn to_tensor_file(&self) -> Result<TensorFile> {
        let mut f = TensorFile::default();
        f.push("mlm.meta", Tensor::vector(vec![self.window as f64, self.alpha]));
        f.push(
            "mlm.vocab",
            Tensor::vector(self.vocab.iter().map(|&c| c as u32 as f64).collect()),
        );
        for (r, table) in self.tables.iter().enumerate() {
            let mut rows: Vec<(&Context, char, u64)> = table
                .counts
                .iter()
                .flat_map(|(ctx, m)| m.iter().map(move |(&c, &n)| (ctx, c, n)))
                .collect();
            rows.sort();
            let width = 2 * r + 2;
            let mut data = Vec::with_capacity(rows.len() * width);
            for (ctx, c, n) in rows {
                if n >= MAX_EXACT_COUNT {
                    return Err(Error::Data(format!("count {n} too large to serialise exactly")));
                }
                data.extend(ctx.iter().map(|&x| x as f64));
                data.push(c as u32 as f64);
                data.push(n as f64);
            }
            let n_rows = data.len() / width;
            f.push(format!("mlm.r{r}"), Tensor::new(vec![n_rows, width], data)?);
        }
        Ok(f)
    }

    pub fn from_tensor_file(f: &TensorFile) -> Result<Self> {
        let meta = f.require("mlm.meta")?.data().to_vec();
        if meta.len() != 2 {
            return Err(Error::Data("mlm.meta must hold window and alpha".into()));
        }
        let window = meta[0] as usize;
        let alpha = meta[1];
        let as_char = |v: f64| {
            char::from_u32(v as u32).ok_or_else(|| Error::Data(format!("bad codepoint {v}")))
        };
        let vocab = f
            .require("mlm.vocab")?
            .data()
            .iter()
            .map(|&v| as_char(v))
            .collect::<Result<Vec<_>>>()?;
        let mut tables = Vec::with_capacity(window + 1);
        for r in 0..=window {
            let t = f.require(&format!("mlm.r{r}"))?;
            let width = 2 * r + 2;
            if t.numel() > 0 && t.cols() != width {
                return Err(Error::Data(format!("mlm.r{r} has width {}, want {width}", t.cols())));
            }
            let mut table = ContextTable::default();
            for row in t.data().chunks_exact(width) {
                let ctx = row[..2 * r].iter().map(|&x| x as u32).collect();
                table.add(ctx, as_char(row[2 * r])?, row[2 * r + 1] as u64);
            }
            tables.push(table);
        }
        Ok(NGramMlm {
            window,
            alpha,
            vocab,
            tables,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        self.to_tensor_file()?.save(path)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_tensor_file(&TensorFile::load(path)?)
    }
}

impl MaskedLm for NGramMlm {
    fn candidate_scores(&self, seq: &CharSeq, pos: usize) -> Vec<(char, f64)> {
        self.distribution(seq, pos)
    }
}

/// Counts every corpus position under context radii `0..=window`.
pub fn train_ngram_mlm(corpus: &[CharSeq], window: usize, alpha: f64) -> Result<NGramMlm> {
    if corpus.is_empty() {
        return Err(Error::Config("masked LM needs a non-empty corpus".into()));
    }
    if window < 1 {
        return Err(Error::Config("context window must be at least 1".into()));
    }
    if !(alpha > 0.0 && alpha.is_finite()) {
        return Err(Error::Config("smoothing constant must be positive".into()));
    }
    let mut tables = vec![ContextTable::default(); window + 1];
    let mut vocab = Vec::new();
    for seq in corpus {
        let tokens = seq.tokens();
        for (pos, t) in tokens.iter().enumerate() {
            let Token::Char(c) = *t else { continue };
            vocab.push(c);
            for (r, table) in tables.iter_mut().enumerate() {
                table.add(context(tokens, pos, r), c, 1);
            }
        }
    }
    vocab.sort_unstable();
    vocab.dedup();
    Ok(NGramMlm {
        window,
        alpha,
        vocab,
        tables,
    })
}

/// Copy of `seq` with `[MASK]` at `pos`.
pub fn masked(seq: &CharSeq, pos: usize) -> CharSeq {
    let mut out = seq.clone();
    out.tokens_mut()[pos] = Token::Mask;
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn years() -> Vec<CharSeq> {
        let mut c = Vec::new();
        for (s, n) in [("今年", 5), ("去年", 3), ("每年", 1)] {
            for _ in 0..n {
                c.push(CharSeq::from(s));
            }
        }
        c
    }

    #[test]
    fn direct_context_count() {
        let corpus = vec![CharSeq::from("今年"); 5];
        let m = train_ngram_mlm(&corpus, 1, 1.0).unwrap();
        assert_eq!(m.count(&[None], &[Some('年')], '今'), 5);
    }

    #[test]
    fn ranking_follows_counts() {
        let m = train_ngram_mlm(&years(), 1, 1.0).unwrap();
        let q = masked(&CharSeq::from("今年"), 0);
        let p = top_k_candidates(&m, &q, 0, 3).unwrap();
        assert_eq!(p.chars(), vec!['今', '去', '每']);
        // unigram (5 + 1/4) / 19, then the radius-1 context: (5 + that) / 10
        assert!((p.candidates[0].1 - (5.0 + 5.25 / 19.0) / 10.0).abs() < 1e-12);
    }

    #[test]
    fn k_beyond_vocab_returns_everything_sorted() {
        let m = train_ngram_mlm(&years(), 1, 1.0).unwrap();
        let q = masked(&CharSeq::from("今年"), 0);
        let p = top_k_candidates(&m, &q, 0, 50).unwrap();
        assert_eq!(p.candidates.len(), m.vocab().len());
        assert!(p.candidates.windows(2).all(|w| w[0].1 >= w[1].1));
        // 年 never precedes 年, so it ranks last
        assert_eq!(p.chars()[3], '年');
    }

    #[test]
    fn contract_violations() {
        let m = train_ngram_mlm(&years(), 1, 1.0).unwrap();
        let s = CharSeq::from("今年");
        assert!(matches!(top_k_candidates(&m, &s, 0, 3), Err(Error::Contract(_))));
        assert!(matches!(top_k_candidates(&m, &masked(&s, 0), 5, 3), Err(Error::Contract(_))));
        assert!(matches!(top_k_candidates(&m, &masked(&s, 0), 0, 0), Err(Error::Contract(_))));
    }

    #[test]
    fn unseen_context_backs_off_to_unigram() {
        let m = train_ngram_mlm(&years(), 2, 1.0).unwrap();
        let q = masked(&CharSeq::from("明天"), 1);
        let p = top_k_candidates(&m, &q, 1, 1).unwrap();
        assert_eq!(p.chars(), vec!['年']);
    }

    #[test]
    fn merge_equals_training_on_concatenation() {
        let a = vec![CharSeq::from("今年好"), CharSeq::from("去年")];
        let b = vec![CharSeq::from("每年"), CharSeq::from("今天")];
        let mut ma = train_ngram_mlm(&a, 2, 0.5).unwrap();
        let mb = train_ngram_mlm(&b, 2, 0.5).unwrap();
        ma.merge(&mb).unwrap();
        let both: Vec<CharSeq> = a.into_iter().chain(b).collect();
        assert_eq!(ma, train_ngram_mlm(&both, 2, 0.5).unwrap());
    }

    #[test]
    fn serialises_through_tensor_container() {
        let m = train_ngram_mlm(&years(), 2, 1.0).unwrap();
        let bytes = m.to_tensor_file().unwrap().to_bytes();
        let back = NGramMlm::from_tensor_file(&TensorFile::from_bytes(&bytes).unwrap()).unwrap();
        assert_eq!(back, m);
    }

    proptest! {
        #[test]
        fn distribution_sums_to_one(
            lines in proptest::collection::vec("[a-f]{1,8}", 1..6),
            query in "[a-g]{1,6}",
            pos_seed in 0usize..100,
            alpha in 0.01f64..3.0,
        ) {
            let corpus: Vec<CharSeq> = lines.iter().map(|l| CharSeq::from(l.as_str())).collect();
            let m = train_ngram_mlm(&corpus, 2, alpha).unwrap();
            let q = CharSeq::from(query.as_str());
            let pos = pos_seed % q.len();
            let d = m.distribution(&masked(&q, pos), pos);
            let s: f64 = d.iter().map(|x| x.1).sum();
            prop_assert!((s - 1.0).abs() < 1e-9);
        }

        #[test]
        fn smoothing_preserves_count_order(lines in proptest::collection::vec("[a-d]{2,5}", 1..8), alpha in 0.01f64..=1.0) {
            let corpus: Vec<CharSeq> = lines.iter().map(|l| CharSeq::from(l.as_str())).collect();
            let m = train_ngram_mlm(&corpus, 1, alpha).unwrap();
            let q = masked(&corpus[0], 0);
            let right = corpus[0].chars().get(1).copied();
            let d = m.distribution(&q, 0);
            for &(a, pa) in &d {
                for &(b, pb) in &d {
                    if m.count(&[None], &[right], a) > m.count(&[None], &[right], b) {
                        prop_assert!(pa > pb);
                    }
                }
            }
        }
    }
}
