//! Scoring and corpus diagnostics.

mod analysis;
mod edits;
mod fscore;
mod inspect;
mod lcs;
mod m2;

pub use analysis::{analyze_corpus, analyze_pair, err_distance_stats, pos_divergence_rate, AnalysisReport, SentenceAnalysis};
pub use edits::{extract_edits, Edit, EditSet};
pub use fscore::{f_beta, PrfScore};
pub use inspect::{export_transition_matrix, pos_embedding_neighbors, PosNeighbors, TransitionExport};
pub use lcs::{classify_corr_err_tokens, label_tokens, lcs, lcs_len, TokenLabel};
pub use m2::{best_counts, max_match_corpus, max_match_prf, parse_m2, write_m2, M2Sentence, MAX_UNCHANGED};
