//! Command-line front end: data generation, training, correction, scoring
//! and diagnostics over UTF-8 text with one sentence per line.

mod io;

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;

use io::{CliResult, Failure};
use zhgec::eval::{
    analyze_corpus, export_transition_matrix, max_match_corpus, parse_m2, pos_embedding_neighbors, write_m2,
    PrfScore,
};
use zhgec::lexicons::build_frequency_table;
use zhgec::mlm::train_ngram_mlm;
use zhgec::model::ModelState;
use zhgec::pipeline::{Corrector, GecStage, SpellingStage};
use zhgec::resources;
use zhgec::sec::{best_by_f, sweep_threshold, SecSettings};
use zhgec::tagger::FeatureExtractor;
use zhgec::train::{make_synthetic_corpus, to_m2, train_loop, Example, SyntheticSpec};
use zhgec::vocab::{build_vocab, CharSeq};
use zhgec::Config;

#[derive(Parser)]
#[command(name = "zhgec", version, about = "Chinese grammatical error correction toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone, Default)]
struct Common {
    /// `key = value` configuration file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Overrides the seed from the configuration.
    #[arg(long)]
    seed: Option<u64>,
    /// Pinyin table (`char<TAB>syllables`); the bundled one by default.
    #[arg(long)]
    pinyin: Option<PathBuf>,
    /// POS lexicon (`word<TAB>tag`); the bundled one by default.
    #[arg(long = "pos-lex")]
    pos_lex: Option<PathBuf>,
    /// Semantic class dictionary; the bundled one by default.
    #[arg(long)]
    semclass: Option<PathBuf>,
}

#[derive(Args, Clone, Default)]
struct SecArgs {
    /// Masked LM written by `mlm-train`.
    #[arg(long)]
    mlm: Option<PathBuf>,
    /// Character frequency table written by `freq`.
    #[arg(long)]
    freq: Option<PathBuf>,
    /// Characters seen more than this many times are never masked.
    #[arg(long)]
    kc: Option<u64>,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic parallel corpus as `source<TAB>target` lines.
    Gen {
        #[arg(long, default_value_t = 1000)]
        size: usize,
        #[arg(long, default_value_t = 0.0)]
        sub: f64,
        #[arg(long, default_value_t = 0.0)]
        del: f64,
        #[arg(long, default_value_t = 0.0)]
        ins: f64,
        #[arg(long, default_value_t = 0.0)]
        order: f64,
        /// Sentence templates, one per line; the bundled set by default.
        #[arg(long)]
        templates: Option<PathBuf>,
        /// Also write the gold edits in M2 form.
        #[arg(long)]
        m2: Option<PathBuf>,
        #[command(flatten)]
        common: Common,
    },
    /// Count characters of a corpus (files or stdin).
    Freq {
        files: Vec<PathBuf>,
    },
    /// Train the n-gram masked LM on a clean corpus.
    MlmTrain {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 2)]
        window: usize,
        #[arg(long, default_value_t = 1.0)]
        alpha: f64,
        files: Vec<PathBuf>,
    },
    /// Spelling correction of stdin lines.
    Sec {
        #[command(flatten)]
        sec: SecArgs,
        /// Write one JSON trace record per sentence to this file.
        #[arg(long)]
        trace: Option<PathBuf>,
        #[command(flatten)]
        common: Common,
    },
    /// Per-character TSV: char, word index, POS, class path.
    Tag {
        #[command(flatten)]
        common: Common,
    },
    /// Train the correction model on `source<TAB>target` pairs.
    Train {
        #[arg(long)]
        train: PathBuf,
        #[arg(long)]
        dev: Option<PathBuf>,
        /// Directory for checkpoints, the log and the averaged model.
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Full correction of stdin lines.
    Correct {
        #[arg(long)]
        model: Option<PathBuf>,
        #[command(flatten)]
        sec: SecArgs,
        #[arg(long)]
        beam: Option<usize>,
        #[arg(long, default_value_t = 1)]
        jobs: usize,
        #[arg(long = "sec-only", conflicts_with = "gec_only")]
        sec_only: bool,
        #[arg(long = "gec-only")]
        gec_only: bool,
        #[command(flatten)]
        common: Common,
    },
    /// Score hypotheses against an M2 gold file.
    Score {
        #[arg(long)]
        gold: PathBuf,
        /// One hypothesis per gold sentence; stdin by default.
        #[arg(long)]
        hyp: Option<PathBuf>,
        #[arg(long, default_value_t = 0.5)]
        beta: f64,
    },
    /// POS-divergence and error-distance statistics of a parallel corpus.
    Analyze {
        pairs: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Spelling-correction scores over a grid of frequency thresholds.
    SweepKc {
        /// Equal-length `erroneous<TAB>correct` pairs.
        pairs: PathBuf,
        #[command(flatten)]
        sec: SecArgs,
        /// Comma-separated thresholds; every distinct count by default.
        #[arg(long, value_delimiter = ',')]
        values: Vec<u64>,
        #[command(flatten)]
        common: Common,
    },
    /// Export the tag transition matrix and POS embedding neighbours.
    Inspect {
        #[arg(long)]
        model: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 10)]
        top: usize,
    },
}

fn load_config(common: &Common) -> CliResult<Config> {
    let mut cfg = match &common.config {
        Some(p) => Config::load(p)?,
        None => Config::default(),
    };
    if let Some(s) = common.seed {
        cfg.pipeline.seed = s;
        cfg.train.seed = s;
    }
    Ok(cfg)
}

fn sec_settings(cfg: &Config, sec: &SecArgs) -> SecSettings {
    let mut s = SecSettings::from(&cfg.pipeline);
    if let Some(k) = sec.kc {
        s.k_c = k;
    }
    s
}

fn spelling_stage(cfg: &Config, sec: &SecArgs, common: &Common) -> CliResult<SpellingStage> {
    Ok(SpellingStage {
        lm: Box::new(io::mlm(sec.mlm.as_deref())?),
        phonetic: io::phonetic(common.pinyin.as_deref())?,
        freq: io::freq(sec.freq.as_deref())?,
        settings: sec_settings(cfg, sec),
    })
}

/// A feature extractor whose class ids agree with the model's.
fn model_features(model: &ModelState, common: &Common) -> CliResult<FeatureExtractor> {
    let mut fx = FeatureExtractor::new(
        io::pos_lexicon(common.pos_lex.as_deref())?,
        io::semclass(common.semclass.as_deref())?,
        model.config.class_levels,
    );
    fx.alphabets = model.alphabets.clone();
    Ok(fx)
}

fn gen(spec: SyntheticSpec, m2: Option<&Path>, common: &Common) -> CliResult {
    let pairs = make_synthetic_corpus(
        &spec,
        &io::phonetic(common.pinyin.as_deref())?,
        &io::pos_lexicon(common.pos_lex.as_deref())?,
    )?;
    let mut out = String::new();
    for p in &pairs {
        let _ = writeln!(out, "{}\t{}", p.erroneous, p.correct);
    }
    if let Some(path) = m2 {
        io::write_file(path, &write_m2(&to_m2(&pairs)))?;
    }
    io::write_stdout(&out)
}

fn sec(sec: &SecArgs, trace: Option<&Path>, common: &Common) -> CliResult {
    let cfg = load_config(common)?;
    let stage = spelling_stage(&cfg, sec, common)?;
    let mut records = String::new();
    io::stream_lines(|line| {
        let (out, t) = stage.run(&CharSeq::from_text(line))?;
        if trace.is_some() {
            records.push_str(&serde_json::to_string(&t).map_err(|e| Failure::data(e.to_string()))?);
            records.push('\n');
        }
        Ok(out.to_text())
    })?;
    match trace {
        Some(p) => io::write_file(p, &records),
        None => Ok(()),
    }
}

fn tag(common: &Common) -> CliResult {
    let cfg = load_config(common)?;
    let fx = FeatureExtractor::new(
        io::pos_lexicon(common.pos_lex.as_deref())?,
        io::semclass(common.semclass.as_deref())?,
        cfg.pipeline.class_levels,
    );
    let tagset = fx.tagset().clone();
    io::stream_lines(|line| {
        let mut block = String::new();
        for (wi, (word, t, path)) in fx.annotate_words(&CharSeq::from_text(line)).iter().enumerate() {
            let pos = tagset.name(*t).unwrap_or("other");
            for c in word.chars() {
                let _ = writeln!(block, "{c}\t{wi}\t{pos}\t{}", path.render());
            }
        }
        Ok(block)
    })
}

fn train(train_path: &Path, dev_path: Option<&Path>, out: &Path, common: &Common) -> CliResult {
    let cfg = load_config(common)?;
    let pairs = io::read_pairs(train_path)?;
    let dev_pairs = match dev_path {
        Some(p) => io::read_pairs(p)?,
        None => Vec::new(),
    };
    let text: Vec<CharSeq> = pairs.iter().flat_map(|(a, b)| [a.clone(), b.clone()]).collect();
    let fx = FeatureExtractor::new(
        io::pos_lexicon(common.pos_lex.as_deref())?,
        io::semclass(common.semclass.as_deref())?,
        cfg.pipeline.class_levels,
    );
    let state = ModelState::new(&cfg.pipeline, build_vocab(&text, 1)?, fx.tagset().clone(), fx.alphabets.clone())?;
    let examples = |ps: &[(CharSeq, CharSeq)]| -> CliResult<Vec<Example>> {
        ps.iter()
            .map(|(s, t)| Ok(Example::new(&state, &fx, s, t)?))
            .collect()
    };
    let (tr, dv) = (examples(&pairs)?, examples(&dev_pairs)?);
    let result = train_loop(state, &tr, &dv, &cfg.train, Some(out))?;
    let last = result.log.last().map(|l| l.epoch).unwrap_or(0);
    let model = result.averaged.unwrap_or_else(|| out.join("averaged.sqmd"));
    io::write_stdout(&format!("{}\n", model.display()))?;
    log::info!("trained {last} epochs into {}", out.display());
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn correct(
    model: Option<&Path>,
    sec: &SecArgs,
    beam: Option<usize>,
    jobs: usize,
    sec_only: bool,
    gec_only: bool,
    common: &Common,
) -> CliResult {
    let cfg = load_config(common)?;
    let mut corrector = Corrector::default();
    if !gec_only {
        corrector.spelling = Some(spelling_stage(&cfg, sec, common)?);
    }
    if !sec_only {
        let state = io::model(model)?;
        let fx = model_features(&state, common)?;
        let mut pc = cfg.pipeline.clone();
        if let Some(b) = beam {
            pc.beam_size = b;
        }
        corrector.gec = Some(GecStage::new(state, fx, &pc));
    }
    let lines = io::read_lines(None)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| Failure::env(e.to_string()))?;
    let out: Vec<String> = pool.install(|| {
        lines
            .par_iter()
            .map(|l| corrector.correct_line(l))
            .collect::<zhgec::Result<_>>()
    })?;
    let mut text = out.join("\n");
    if !out.is_empty() {
        text.push('\n');
    }
    io::write_stdout(&text)
}

fn score(gold: &Path, hyp: Option<&Path>, beta: f64) -> CliResult {
    let sentences = parse_m2(&io::read_text(Some(gold))?, &gold.display().to_string())?;
    let hyps = io::read_lines(hyp)?;
    if hyps.len() != sentences.len() {
        return Err(Failure::data(format!(
            "{} hypotheses for {} gold sentences",
            hyps.len(),
            sentences.len()
        )));
    }
    let items: Vec<_> = sentences
        .into_iter()
        .zip(&hyps)
        .map(|(s, h)| (s.source, CharSeq::from_text(h), s.annotations))
        .collect();
    let s = max_match_corpus(&items, beta)?;
    io::write_stdout(&format!("{}\n{}\n", PrfScore::TSV_HEADER, s.tsv_row()))
}

fn analyze(pairs: &Path, common: &Common) -> CliResult {
    let corpus = io::read_pairs(pairs)?;
    let lex = io::pos_lexicon(common.pos_lex.as_deref())?;
    let r = analyze_corpus(&corpus, &lex);
    let opt = |v: Option<f64>| v.map_or("-".to_string(), |x| format!("{x:.4}"));
    let mut out = String::new();
    let _ = writeln!(out, "pairs\t{}", r.pairs);
    let _ = writeln!(out, "erroneous_pairs\t{}", r.erroneous_pairs);
    let _ = writeln!(out, "pos_divergence_rate\t{:.4}", r.divergence_rate);
    let _ = writeln!(out, "corr_words\t{}", r.corr_words);
    let _ = writeln!(out, "corr_correct_pos\t{}", r.corr_correct_pos);
    let _ = writeln!(out, "mean_dist_wrong_pos\t{}", opt(r.mean_dist_wrong_pos));
    let _ = writeln!(out, "mean_dist_correct_pos\t{}", opt(r.mean_dist_correct_pos));
    io::write_stdout(&out)
}

fn sweep_kc(pairs: &Path, sec: &SecArgs, values: &[u64], common: &Common) -> CliResult {
    let cfg = load_config(common)?;
    let stage = spelling_stage(&cfg, sec, common)?;
    let data = io::read_pairs(pairs)?;
    let grid = if values.is_empty() {
        let mut g = vec![0];
        g.extend(stage.freq.distinct_counts());
        g.dedup();
        g
    } else {
        values.to_vec()
    };
    let points = sweep_threshold(&data, stage.lm.as_ref(), &stage.phonetic, &stage.freq, &grid, stage.settings)?;
    let mut out = format!("k_c\t{}\n", PrfScore::TSV_HEADER);
    for p in &points {
        let _ = writeln!(out, "{}\t{}", p.k_c, p.score.tsv_row());
    }
    if let Some(b) = best_by_f(&points) {
        eprintln!("best k_c {} (P {:.4}, F0.5 {:.4})", b.k_c, b.score.precision, b.score.f_beta);
    }
    io::write_stdout(&out)
}

fn inspect(model: Option<&Path>, out: &Path, top: usize) -> CliResult {
    let state = io::model(model)?;
    let ex = export_transition_matrix(&state)?;
    io::write_file(&out.join("transitions_raw.tsv"), &ex.raw_tsv())?;
    io::write_file(&out.join("transitions_probs.tsv"), &ex.probs_tsv())?;
    io::write_file(&out.join("transitions.svg"), &ex.heatmap_svg())?;
    let mut nb = String::from("tag\trank\tchar\tcosine\n");
    for n in pos_embedding_neighbors(&state, top) {
        for (i, (c, s)) in n.neighbors.iter().enumerate() {
            let _ = writeln!(nb, "{}\t{}\t{c}\t{s:.4}", n.tag, i + 1);
        }
    }
    io::write_file(&out.join("pos_neighbors.tsv"), &nb)
}

fn run(cli: Cli) -> CliResult {
    match cli.command {
        Command::Gen {
            size,
            sub,
            del,
            ins,
            order,
            templates,
            m2,
            common,
        } => {
            let cfg = load_config(&common)?;
            let templates = match &templates {
                Some(p) => resources::parse_templates(&io::read_text(Some(p))?),
                None => resources::templates(),
            };
            let spec = SyntheticSpec {
                templates,
                substitution_rate: sub,
                deletion_rate: del,
                insertion_rate: ins,
                word_order_rate: order,
                size,
                seed: cfg.pipeline.seed,
                tone_sensitive: cfg.pipeline.tone_sensitive,
            };
            gen(spec, m2.as_deref(), &common)
        }
        Command::Freq { files } => {
            let corpus = io::read_corpus(&files)?;
            io::write_stdout(&build_frequency_table(&corpus).to_tsv())
        }
        Command::MlmTrain {
            out,
            window,
            alpha,
            files,
        } => {
            let corpus = io::read_corpus(&files)?;
            Ok(train_ngram_mlm(&corpus, window, alpha)?.save(&out)?)
        }
        Command::Sec { sec: s, trace, common } => sec(&s, trace.as_deref(), &common),
        Command::Tag { common } => tag(&common),
        Command::Train {
            train: t,
            dev,
            out,
            common,
        } => train(&t, dev.as_deref(), &out, &common),
        Command::Correct {
            model,
            sec,
            beam,
            jobs,
            sec_only,
            gec_only,
            common,
        } => correct(model.as_deref(), &sec, beam, jobs, sec_only, gec_only, &common),
        Command::Score { gold, hyp, beta } => score(&gold, hyp.as_deref(), beta),
        Command::Analyze { pairs, common } => analyze(&pairs, &common),
        Command::SweepKc {
            pairs,
            sec,
            values,
            common,
        } => sweep_kc(&pairs, &sec, &values, &common),
        Command::Inspect { model, out, top } => inspect(model.as_deref(), &out, top),
    }
}

fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            std::process::exit(code);
        }
    };
    if let Err(f) = run(cli) {
        eprintln!("zhgec: {f}");
        std::process::exit(f.code);
    }
}
