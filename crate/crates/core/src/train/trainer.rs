use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::average::average_checkpoints;
use super::loss::{joint_loss, Example};
use super::optim::Adam;
use crate::config::TrainConfig;
use crate::error::{Error, Result};
use crate::model::{greedy_decode, ModelState};

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EpochLog {
    pub epoch: usize,
    /// Mean loss per training pair over the epoch.
    pub loss: f64,
    pub dev_exact: Option<f64>,
    pub lr: f64,
    pub steps: usize,
}

#[derive(Debug)]
pub struct TrainOutput {
    pub state: ModelState,
    pub log: Vec<EpochLog>,
    /// The last `avg_window` per-epoch checkpoints, oldest first.
    pub checkpoints: Vec<PathBuf>,
    pub averaged: Option<PathBuf>,
}

/// Packs examples, in the given order, into batches of at most
/// `budget` tokens (a single larger example gets its own batch).
fn pack(order: &[usize], examples: &[Example], budget: usize) -> Vec<Vec<usize>> {
    let mut out: Vec<Vec<usize>> = Vec::new();
    let mut cur = Vec::new();
    let mut size = 0;
    for &i in order {
        let s = examples[i].size();
        if !cur.is_empty() && size + s > budget {
            out.push(std::mem::take(&mut cur));
            size = 0;
        }
        cur.push(i);
        size += s;
    }
    if !cur.is_empty() {
        out.push(cur);
    }
    out
}

/// Share of `dev` pairs whose greedy decode reproduces the target exactly.
pub fn exact_match(state: &ModelState, dev: &[Example]) -> Result<f64> {
    if dev.is_empty() {
        return Ok(0.0);
    }
    let mut hits = 0;
    for ex in dev {
        let max_len = ex.src.len() + state.config.max_len_extra;
        let out = greedy_decode(state, &ex.src, &ex.features, max_len)?;
        hits += usize::from(state.vocab.encode(&out) == ex.tgt);
    }
    Ok(hits as f64 / dev.len() as f64)
}

fn log_tsv(log: &[EpochLog]) -> String {
    let mut s = String::from("epoch\tloss\tdev_exact\tlr\tsteps\n");
    for e in log {
        let dev = e.dev_exact.map_or("-".to_string(), |d| format!("{d:.4}"));
        let _ = writeln!(s, "{}\t{:.6}\t{dev}\t{:.3e}\t{}", e.epoch, e.loss, e.lr, e.steps);
    }
    s
}

/// Trains `state` on `train`. With `out_dir`, every epoch writes a
/// checkpoint (only the last `avg_window` are kept), the TSV log is
/// refreshed, and the kept checkpoints are averaged at the end.
pub fn train_loop(
    mut state: ModelState,
    train: &[Example],
    dev: &[Example],
    cfg: &TrainConfig,
    out_dir: Option<&Path>,
) -> Result<TrainOutput> {
    cfg.validate()?;
    if train.is_empty() {
        return Err(Error::Data("training corpus is empty".into()));
    }
    if let Some(dir) = out_dir {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut order: Vec<usize> = (0..train.len()).collect();
    let per_epoch = pack(&order, train, cfg.batch_tokens).len();
    let mut adam = Adam::new(cfg, &state, per_epoch * cfg.max_epochs);
    let mut log = Vec::new();
    let mut kept: Vec<PathBuf> = Vec::new();

    for epoch in 1..=cfg.max_epochs {
        order.shuffle(&mut rng);
        let mut total = 0.0;
        let mut lr = 0.0;
        for (b, batch) in pack(&order, train, cfg.batch_tokens).into_iter().enumerate() {
            let exs: Vec<Example> = batch.iter().map(|&i| train[i].clone()).collect();
            let (loss, grads) = joint_loss(&state, &exs)?;
            if !loss.is_finite() || !grads.global_norm().is_finite() {
                return Err(Error::Diverged(format!(
                    "epoch {epoch}, batch {}: loss {loss}",
                    b + 1
                )));
            }
            total += loss;
            lr = adam.update(&mut state, &grads);
        }
        let dev_exact = if dev.is_empty() { None } else { Some(exact_match(&state, dev)?) };
        let entry = EpochLog {
            epoch,
            loss: total / train.len() as f64,
            dev_exact,
            lr,
            steps: adam.steps(),
        };
        log::info!(
            "epoch {epoch}: loss {:.4} dev exact {}",
            entry.loss,
            dev_exact.map_or("-".into(), |d| format!("{d:.3}"))
        );
        log.push(entry);

        if let Some(dir) = out_dir {
            let path = dir.join(format!("checkpoint_{epoch:04}.sqmd"));
            state.save(&path)?;
            kept.push(path);
            while kept.len() > cfg.avg_window {
                let old = kept.remove(0);
                std::fs::remove_file(&old).map_err(|e| Error::io(&old, e))?;
            }
            let log_path = dir.join("train_log.tsv");
            std::fs::write(&log_path, log_tsv(&log)).map_err(|e| Error::io(&log_path, e))?;
        }
        if let (Some(t), Some(d)) = (cfg.early_stop_exact, dev_exact) {
            if d >= t {
                break;
            }
        }
    }

    let averaged = match out_dir {
        Some(dir) => {
            let avg = average_checkpoints(&kept)?;
            let path = dir.join("averaged.sqmd");
            avg.save(&path)?;
            Some(path)
        }
        None => None,
    };
    Ok(TrainOutput {
        state,
        log,
        checkpoints: kept,
        averaged,
    })
}
