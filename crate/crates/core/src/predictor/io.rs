//! Model file: JSON with a `format`/`version` header and every tensor stored
//! row-major with explicit dims.
//!
//! ```json
//! {"format": "factlex-predictor", "version": 1,
//!  "encoder": {...}, "pipeline": {...}, "train_meta": {...},
//!  "tensors": {"attn_proj": {"dims": [A, D], "data": [...]},
//!              "attn_vec": {"dims": [A]}, "attn_bias": {"dims": [A]},
//!              "readout": {"dims": [D]}, "readout_bias": {"dims": []}}}
//! ```

use std::collections::BTreeMap;
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{Params, PredictError, PredictorModel, TrainMeta};
use crate::encoder::EncoderConfig;
use crate::pipeline::PipelineConfig;

pub const MODEL_FORMAT: &str = "factlex-predictor";
pub const MODEL_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Serialize, Deserialize)]
struct Tensor {
    dims: Vec<usize>,
    data: Vec<f64>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ModelFile {
    format: String,
    version: u32,
    encoder: EncoderConfig,
    pipeline: PipelineConfig,
    train_meta: TrainMeta,
    tensors: BTreeMap<String, Tensor>,
}

impl PredictorModel {
    pub fn write_json(&self, writer: impl Write) -> Result<(), PredictError> {
        let p = &self.params;
        let (a, d) = (p.attn, p.dim);
        let tensors = BTreeMap::from([
            ("attn_proj".to_string(), Tensor { dims: vec![a, d], data: p.proj_row_major() }),
            ("attn_vec".to_string(), Tensor { dims: vec![a], data: p.attn_vec.clone() }),
            ("attn_bias".to_string(), Tensor { dims: vec![a], data: p.attn_bias.clone() }),
            ("readout".to_string(), Tensor { dims: vec![d], data: p.readout.clone() }),
            ("readout_bias".to_string(), Tensor { dims: vec![], data: vec![p.readout_bias] }),
        ]);
        let file = ModelFile {
            format: MODEL_FORMAT.into(),
            version: MODEL_FORMAT_VERSION,
            encoder: self.encoder,
            pipeline: self.pipeline.clone(),
            train_meta: self.train_meta.clone(),
            tensors,
        };
        serde_json::to_writer(writer, &file)?;
        Ok(())
    }

    pub fn read_json(reader: impl Read) -> Result<Self, PredictError> {
        let mut file: ModelFile = serde_json::from_reader(reader)?;
        let invalid = |m: String| PredictError::InvalidModel(m);
        if file.format != MODEL_FORMAT {
            return Err(invalid(format!("format {:?}, expected {MODEL_FORMAT:?}", file.format)));
        }
        if file.version != MODEL_FORMAT_VERSION {
            return Err(invalid(format!("unsupported version {}", file.version)));
        }
        file.encoder.validate()?;
        let mut take = |name: &str| {
            file.tensors
                .remove(name)
                .ok_or_else(|| invalid(format!("missing tensor {name}")))
        };
        let proj = take("attn_proj")?;
        let [a, d] = proj.dims[..] else {
            return Err(invalid(format!("attn_proj must be 2-d, got dims {:?}", proj.dims)));
        };
        if d != file.encoder.dim {
            return Err(invalid(format!("attn_proj width {d} but encoder dim {}", file.encoder.dim)));
        }
        let mut params = Params::zeros(d, a);
        let fill = |name: &str, dims: Vec<usize>, tensor: Tensor| -> Result<Vec<f64>, PredictError> {
            let len: usize = dims.iter().product();
            if tensor.dims != dims || tensor.data.len() != len {
                return Err(invalid(format!(
                    "tensor {name}: dims {:?} with {} values, expected dims {dims:?}",
                    tensor.dims,
                    tensor.data.len()
                )));
            }
            Ok(tensor.data)
        };
        params.from_row_major_proj(&fill("attn_proj", vec![a, d], proj)?);
        params.attn_vec = fill("attn_vec", vec![a], take("attn_vec")?)?;
        params.attn_bias = fill("attn_bias", vec![a], take("attn_bias")?)?;
        params.readout = fill("readout", vec![d], take("readout")?)?;
        params.readout_bias = fill("readout_bias", vec![], take("readout_bias")?)?[0];
        if let Some(extra) = file.tensors.keys().next() {
            return Err(invalid(format!("unexpected tensor {extra}")));
        }
        if !params.is_finite() {
            return Err(invalid("non-finite parameter".into()));
        }
        Ok(Self {
            encoder: file.encoder,
            params,
            pipeline: file.pipeline,
            train_meta: file.train_meta,
        })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), PredictError> {
        let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
        self.write_json(&mut w)?;
        w.flush()?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, PredictError> {
        Self::read_json(std::io::BufReader::new(std::fs::File::open(path)?))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chunker::ChunkingConfig;
    use crate::pipeline::InputSelection;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn model() -> PredictorModel {
        PredictorModel {
            encoder: EncoderConfig {
                dim: 8,
                ..EncoderConfig::default()
            },
            params: Params::random(8, 3, 0.5, &mut ChaCha8Rng::seed_from_u64(9)),
            pipeline: PipelineConfig::new(InputSelection::Var2, ChunkingConfig::default()),
            train_meta: TrainMeta {
                seed: 9,
                epochs: 3,
                learning_rate: 0.1,
                momentum: 0.9,
            },
        }
    }

    #[test]
    fn round_trip_is_exact() {
        let m = model();
        let mut buf = Vec::new();
        m.write_json(&mut buf).unwrap();
        assert_eq!(PredictorModel::read_json(&buf[..]).unwrap(), m);
        let v: serde_json::Value = serde_json::from_slice(&buf).unwrap();
        assert_eq!(v["format"], MODEL_FORMAT);
        assert_eq!(v["tensors"]["attn_proj"]["dims"], serde_json::json!([3, 8]));
        assert_eq!(v["tensors"]["attn_proj"]["data"][1], m.params.proj(0, 1));
    }

    #[test]
    fn rejects_bad_headers_and_shapes() {
        let mut buf = Vec::new();
        model().write_json(&mut buf).unwrap();
        let mut v: serde_json::Value = serde_json::from_slice(&buf).unwrap();
        let mut wrong = v.clone();
        wrong["version"] = 2.into();
        assert!(PredictorModel::read_json(wrong.to_string().as_bytes()).is_err());
        v["tensors"]["readout"]["dims"] = serde_json::json!([7]);
        assert!(matches!(
            PredictorModel::read_json(v.to_string().as_bytes()),
            Err(PredictError::InvalidModel(_))
        ));
    }
}
