use serde::Serialize;

/// `(1 + β²)·p·r / (β²·p + r)`, or 0 when the denominator vanishes.
pub fn f_beta(p: f64, r: f64, beta: f64) -> f64 {
    let b2 = beta * beta;
    let den = b2 * p + r;
    if den == 0.0 {
        0.0
    } else {
        (1.0 + b2) * p * r / den
    }
}

/// Precision, recall and F-score with the counts they came from. Precision is
/// 0 when there are no system edits; recall is 0 when there are no gold edits.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct PrfScore {
    pub precision: f64,
    pub recall: f64,
    pub f_beta: f64,
    pub tp: usize,
    pub sys_count: usize,
    pub gold_count: usize,
}

impl PrfScore {
    pub fn from_counts(tp: usize, sys_count: usize, gold_count: usize, beta: f64) -> Self {
        let ratio = |a: usize, b: usize| if b == 0 { 0.0 } else { a as f64 / b as f64 };
        let precision = ratio(tp, sys_count);
        let recall = ratio(tp, gold_count);
        PrfScore {
            precision,
            recall,
            f_beta: f_beta(precision, recall, beta),
            tp,
            sys_count,
            gold_count,
        }
    }

    pub const TSV_HEADER: &'static str = "tp\tsys\tgold\tP\tR\tF0.5";

    pub fn tsv_row(&self) -> String {
        format!(
            "{}\t{}\t{}\t{:.4}\t{:.4}\t{:.4}",
            self.tp, self.sys_count, self.gold_count, self.precision, self.recall, self.f_beta
        )
    }
}
