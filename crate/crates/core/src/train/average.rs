use std::path::Path;

use super::checkpoint::TensorFile;
use crate::error::{Error, Result};
use crate::model::{ModelState, Tensor};

/// Element-wise mean of parameter tensors. Metadata tensors (`meta.*`) must
/// be identical. Each element's values are summed in sorted order, so the
/// result does not depend on the order of the inputs.
pub fn average_tensor_files(files: &[TensorFile]) -> Result<TensorFile> {
    let first = files
        .first()
        .ok_or_else(|| Error::Data("no checkpoints to average".into()))?;
    let mut out = TensorFile::default();
    for (name, t0) in &first.tensors {
        let ts = files
            .iter()
            .map(|f| {
                f.get(name)
                    .ok_or_else(|| Error::Data(format!("tensor {name} missing from a checkpoint")))
            })
            .collect::<Result<Vec<_>>>()?;
        if let Some(bad) = ts.iter().find(|t| t.shape() != t0.shape()) {
            return Err(Error::Data(format!(
                "tensor {name}: shape {:?} does not match {:?}",
                bad.shape(),
                t0.shape()
            )));
        }
        if name.starts_with("meta.") {
            if ts.iter().any(|t| t.data() != t0.data()) {
                return Err(Error::Data(format!("tensor {name}: checkpoints disagree")));
            }
            out.push(name.clone(), (*t0).clone());
            continue;
        }
        let n = ts.len() as f64;
        let mut col = vec![0.0; ts.len()];
        let data = (0..t0.numel())
            .map(|k| {
                for (c, t) in col.iter_mut().zip(&ts) {
                    *c = t.data()[k];
                }
                col.sort_by(f64::total_cmp);
                col.iter().sum::<f64>() / n
            })
            .collect();
        out.push(name.clone(), Tensor::new(t0.shape().to_vec(), data)?);
    }
    for f in &files[1..] {
        if f.tensors.len() != first.tensors.len() {
            return Err(Error::Data("checkpoints hold different tensor sets".into()));
        }
    }
    Ok(out)
}

pub fn average_checkpoints<P: AsRef<Path>>(paths: &[P]) -> Result<ModelState> {
    let files = paths
        .iter()
        .map(|p| TensorFile::load(p.as_ref()))
        .collect::<Result<Vec<_>>>()?;
    ModelState::from_tensor_file(&average_tensor_files(&files)?)
}

pub fn average_states(states: &[ModelState]) -> Result<ModelState> {
    let files: Vec<TensorFile> = states.iter().map(ModelState::to_tensor_file).collect();
    ModelState::from_tensor_file(&average_tensor_files(&files)?)
}
