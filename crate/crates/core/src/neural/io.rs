use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::model::{Model, ModelConfig};
use super::tensor::Tensor;
use crate::error::{Error, Result};

const FORMAT: &str = "uritwin-model";
const VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ParamEntry {
    name: String,
    shape: Vec<usize>,
    data: Value,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ModelFile {
    format: String,
    version: u32,
    config: ModelConfig,
    params: Vec<ParamEntry>,
}

fn nest(shape: &[usize], data: &[f64]) -> Value {
    match shape {
        [] => Value::from(data[0]),
        [_] => Value::Array(data.iter().map(|&v| Value::from(v)).collect()),
        [n, rest @ ..] => {
            let inner: usize = rest.iter().product();
            Value::Array((0..*n).map(|i| nest(rest, &data[i * inner..(i + 1) * inner])).collect())
        }
    }
}

fn flatten(name: &str, shape: &[usize], v: &Value, out: &mut Vec<f64>) -> Result<()> {
    let bad = |msg: String| Error::ModelLoad(format!("{name}: {msg}"));
    match shape {
        [] => out.push(v.as_f64().ok_or_else(|| bad("expected a number".into()))?),
        [n, rest @ ..] => {
            let arr = v.as_array().ok_or_else(|| bad("expected an array".into()))?;
            if arr.len() != *n {
                return Err(bad(format!("expected {n} entries, found {}", arr.len())));
            }
            for item in arr {
                flatten(name, rest, item, out)?;
            }
        }
    }
    Ok(())
}

pub fn model_to_json(model: &Model) -> String {
    let file = ModelFile {
        format: FORMAT.into(),
        version: VERSION,
        config: model.config.clone(),
        params: model
            .params
            .named()
            .into_iter()
            .map(|(name, t)| ParamEntry {
                name,
                shape: t.shape().to_vec(),
                data: nest(t.shape(), t.data()),
            })
            .collect(),
    };
    serde_json::to_string(&file).expect("model serializes")
}

pub fn model_from_json(text: &str) -> Result<Model> {
    let file: ModelFile = serde_json::from_str(text).map_err(|e| Error::ModelLoad(e.to_string()))?;
    if file.format != FORMAT || file.version != VERSION {
        return Err(Error::ModelLoad(format!(
            "unsupported model file {} v{}",
            file.format, file.version
        )));
    }
    let mut model = Model::new(file.config.clone()).map_err(|e| Error::ModelLoad(e.to_string()))?;
    let names: Vec<String> = model.params.named().into_iter().map(|(n, _)| n).collect();
    if names.len() != file.params.len() {
        return Err(Error::ModelLoad(format!(
            "expected {} parameter tensors, found {}",
            names.len(),
            file.params.len()
        )));
    }
    for ((slot, want), entry) in model.params.tensors_mut().into_iter().zip(&names).zip(&file.params) {
        if &entry.name != want {
            return Err(Error::ModelLoad(format!("expected {want}, found {}", entry.name)));
        }
        if entry.shape != slot.shape() {
            return Err(Error::ModelLoad(format!(
                "{want}: config implies shape {:?}, file has {:?}",
                slot.shape(),
                entry.shape
            )));
        }
        let mut data = Vec::with_capacity(slot.len());
        flatten(want, &entry.shape, &entry.data, &mut data)?;
        *slot = Tensor::new(entry.shape.clone(), data)?;
    }
    if !model.params.is_finite() {
        return Err(Error::ModelLoad("non-finite parameter".into()));
    }
    Ok(model)
}

pub fn save_model(model: &Model, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, model_to_json(model)).map_err(|e| Error::io(path, e))
}

pub fn load_model(path: impl AsRef<Path>) -> Result<Model> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    model_from_json(&text)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::neural::ConvSpec;

    fn small() -> Model {
        Model::new(ModelConfig {
            input_len: 20,
            conv: vec![ConvSpec {
                out_channels: 3,
                kernel: 3,
                stride: 2,
            }],
            lstm_hidden: 4,
            dense: vec![],
            init_seed: 9,
            ..Default::default()
        })
        .unwrap()
    }

    #[test]
    fn round_trip_bit_identical() {
        let m = small();
        let back = model_from_json(&model_to_json(&m)).unwrap();
        assert_eq!(back, m);
    }

    #[test]
    fn truncated_is_error() {
        let text = model_to_json(&small());
        let cut = &text[..text.len() / 2];
        assert!(matches!(model_from_json(cut), Err(Error::ModelLoad(_))));
    }

    #[test]
    fn shape_mismatch_is_error() {
        let text = model_to_json(&small());
        let altered = text.replace("\"lstm_hidden\":4", "\"lstm_hidden\":5");
        assert!(matches!(model_from_json(&altered), Err(Error::ModelLoad(_))));
    }
}
