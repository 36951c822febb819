use crate::config::TrainConfig;
use crate::model::{Gradients, ModelState};

/// Learning rate at 1-based `step`: linear warmup, then linear (power-1
/// polynomial) decay to `lr · end_lr_ratio` at `total_steps`.
pub fn learning_rate(cfg: &TrainConfig, step: usize, total_steps: usize) -> f64 {
    let base = cfg.learning_rate;
    let warm = cfg.warmup_steps;
    if warm > 0 && step <= warm {
        return base * step as f64 / warm as f64;
    }
    let end = base * cfg.end_lr_ratio;
    let span = total_steps.saturating_sub(warm).max(1);
    let done = (step.saturating_sub(warm)).min(span);
    end + (base - end) * (1.0 - done as f64 / span as f64)
}

/// Adam with full-precision master weights. The model only ever sees the
/// masters rounded to `f32`, so saved checkpoints reload exactly.
#[derive(Clone, Debug)]
pub struct Adam {
    cfg: TrainConfig,
    total_steps: usize,
    step: usize,
    master: Vec<Vec<f64>>,
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
}

impl Adam {
    pub fn new(cfg: &TrainConfig, state: &ModelState, total_steps: usize) -> Self {
        let master: Vec<Vec<f64>> = state.params.iter().map(|(_, t)| t.data().to_vec()).collect();
        let zeros: Vec<Vec<f64>> = master.iter().map(|p| vec![0.0; p.len()]).collect();
        Adam {
            cfg: cfg.clone(),
            total_steps,
            step: 0,
            master,
            m: zeros.clone(),
            v: zeros,
        }
    }

    pub fn steps(&self) -> usize {
        self.step
    }

    /// Clips `grads` to the configured global norm, applies one update and
    /// returns the learning rate used.
    pub fn update(&mut self, state: &mut ModelState, grads: &Gradients) -> f64 {
        self.step += 1;
        let lr = learning_rate(&self.cfg, self.step, self.total_steps);
        let norm = grads.global_norm();
        let clip = if self.cfg.clip_norm > 0.0 && norm > self.cfg.clip_norm {
            self.cfg.clip_norm / norm
        } else {
            1.0
        };
        let (b1, b2, eps) = (self.cfg.beta1, self.cfg.beta2, self.cfg.adam_eps);
        let c1 = 1.0 - b1.powi(self.step as i32);
        let c2 = 1.0 - b2.powi(self.step as i32);
        for (i, g) in grads.tensors.iter().enumerate() {
            let (w, m, v) = (&mut self.master[i], &mut self.m[i], &mut self.v[i]);
            for k in 0..w.len() {
                let gk = g.data()[k] * clip;
                m[k] = b1 * m[k] + (1.0 - b1) * gk;
                v[k] = b2 * v[k] + (1.0 - b2) * gk * gk;
                w[k] -= lr * (m[k] / c1) / ((v[k] / c2).sqrt() + eps);
            }
            let dst = state.params.get_mut(i).data_mut();
            for (d, &s) in dst.iter_mut().zip(w.iter()) {
                *d = s as f32 as f64;
            }
        }
        lr
    }
}
