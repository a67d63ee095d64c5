//! Single-file binary checkpoint.
//!
//! Layout, all integers and floats little-endian:
//!
//! ```text
//! magic            8 bytes  "SURVCORN"
//! format_version   u32
//! crc32            u32      over every byte after this field
//! d                u32      input features
//! num_bins         u32      K
//! n_hidden         u32
//! hidden_dims      u32 * n_hidden
//! activation       u8       0 = relu, 1 = tanh
//! head             u8       0 = survcorn, 1 = hazard
//! adam             f64 * 3  beta1, beta2, eps
//! config_len       u32
//! config           config_len bytes of UTF-8 JSON (TrainConfig)
//! edges            f64 * (K - 1)
//! feature mean     f64 * d
//! feature std      f64 * d
//! per layer        weights f64 * (in * out) row-major, then biases f64 * out
//! ```
//!
//! A JSON sidecar (`<path>.json`) mirrors the header for inspection; it is
//! never read back.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{
    Activation, AdamConfig, Head, Layer, ModelParams, Standardizer, SurvModel, TrainConfig,
};
use crate::timegrid::TimeGrid;
use crate::{Error, Result};

pub const MAGIC: &[u8; 8] = b"SURVCORN";
pub const FORMAT_VERSION: u32 = 1;

const MAX_DIM: usize = 1 << 20;
const MAX_HIDDEN_LAYERS: usize = 64;

/// Human-readable mirror of the binary header.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckpointHeader {
    pub format_version: u32,
    pub d: usize,
    #[serde(rename = "K")]
    pub num_bins: usize,
    pub hidden_dims: Vec<usize>,
    pub activation: Activation,
    pub head: Head,
    pub adam: AdamConfig,
    pub grid: TimeGrid,
    pub standardizer: Standardizer,
    pub config: TrainConfig,
}

/// Encoder/decoder for [`SurvModel`].
pub struct Checkpoint;

impl Checkpoint {
    pub fn header(model: &SurvModel) -> CheckpointHeader {
        CheckpointHeader {
            format_version: FORMAT_VERSION,
            d: model.params.input_dim(),
            num_bins: model.grid.num_bins(),
            hidden_dims: model.params.hidden_dims(),
            activation: model.params.activation,
            head: model.head,
            adam: model.config.adam,
            grid: model.grid.clone(),
            standardizer: model.standardizer.clone(),
            config: model.config.clone(),
        }
    }

    pub fn to_bytes(model: &SurvModel) -> Result<Vec<u8>> {
        model.params.validate()?;
        let d = model.params.input_dim();
        let k = model.grid.num_bins();
        if model.params.output_dim() != k - 1 || model.standardizer.dim() != d {
            return Err(Error::shape(
                "model, grid and standardizer disagree on shapes",
            ));
        }
        let mut body = Vec::new();
        let put_u32 = |buf: &mut Vec<u8>, v: usize| -> Result<()> {
            let v = u32::try_from(v).map_err(|_| Error::shape("dimension exceeds u32"))?;
            buf.extend_from_slice(&v.to_le_bytes());
            Ok(())
        };
        let put_f64s = |buf: &mut Vec<u8>, vs: &mut dyn Iterator<Item = f64>| {
            for v in vs {
                buf.extend_from_slice(&v.to_le_bytes());
            }
        };
        put_u32(&mut body, d)?;
        put_u32(&mut body, k)?;
        let hidden = model.params.hidden_dims();
        put_u32(&mut body, hidden.len())?;
        for h in &hidden {
            put_u32(&mut body, *h)?;
        }
        body.push(match model.params.activation {
            Activation::Relu => 0,
            Activation::Tanh => 1,
        });
        body.push(match model.head {
            Head::Survcorn => 0,
            Head::Hazard => 1,
        });
        let adam = model.config.adam;
        put_f64s(
            &mut body,
            &mut [adam.beta1, adam.beta2, adam.eps].into_iter(),
        );
        let config = serde_json::to_vec(&model.config)?;
        put_u32(&mut body, config.len())?;
        body.extend_from_slice(&config);
        put_f64s(&mut body, &mut model.grid.edges().iter().copied());
        put_f64s(&mut body, &mut model.standardizer.mean.iter().copied());
        put_f64s(&mut body, &mut model.standardizer.std.iter().copied());
        for layer in &model.params.layers {
            put_f64s(&mut body, &mut layer.weights.iter().copied());
            put_f64s(&mut body, &mut layer.biases.iter().copied());
        }

        let mut out = Vec::with_capacity(16 + body.len());
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
        out.extend_from_slice(&crc32fast::hash(&body).to_le_bytes());
        out.extend_from_slice(&body);
        Ok(out)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<SurvModel> {
        let corrupt = |m: &str| Error::CorruptCheckpoint(m.to_string());
        if bytes.len() < 16 || &bytes[..8] != MAGIC {
            return Err(corrupt("missing SURVCORN magic"));
        }
        let version = u32::from_le_bytes(bytes[8..12].try_into().unwrap());
        if version != FORMAT_VERSION {
            return Err(Error::VersionMismatch {
                found: version,
                expected: FORMAT_VERSION,
            });
        }
        let crc = u32::from_le_bytes(bytes[12..16].try_into().unwrap());
        let body = &bytes[16..];
        if crc32fast::hash(body) != crc {
            return Err(corrupt("checksum mismatch"));
        }

        let mut r = Reader { buf: body };
        let d = r.dim()?;
        let k = r.dim()?;
        if k < 2 {
            return Err(corrupt("K must be >= 2"));
        }
        let n_hidden = r.dim()?;
        if n_hidden > MAX_HIDDEN_LAYERS {
            return Err(corrupt("too many hidden layers"));
        }
        let hidden = (0..n_hidden).map(|_| r.dim()).collect::<Result<Vec<_>>>()?;
        if hidden.contains(&0) {
            return Err(corrupt("zero-width hidden layer"));
        }
        let activation = match r.u8()? {
            0 => Activation::Relu,
            1 => Activation::Tanh,
            _ => return Err(corrupt("unknown activation tag")),
        };
        let head = match r.u8()? {
            0 => Head::Survcorn,
            1 => Head::Hazard,
            _ => return Err(corrupt("unknown head tag")),
        };
        let adam_vals = r.f64s(3)?;
        let config_len = r.dim()?;
        let mut config: TrainConfig = serde_json::from_slice(r.take(config_len)?)
            .map_err(|e| Error::CorruptCheckpoint(format!("config: {e}")))?;
        config.adam = AdamConfig {
            beta1: adam_vals[0],
            beta2: adam_vals[1],
            eps: adam_vals[2],
        };
        config.hidden_dims = hidden.clone();
        config.activation = activation;
        config.head = head;
        let grid = TimeGrid::from_edges(r.f64s(k - 1)?)
            .map_err(|e| Error::CorruptCheckpoint(format!("grid: {e}")))?;
        let standardizer = Standardizer {
            mean: r.f64s(d)?,
            std: r.f64s(d)?,
        };
        if standardizer.std.iter().any(|s| !s.is_finite() || *s <= 0.0)
            || standardizer.mean.iter().any(|m| !m.is_finite())
        {
            return Err(corrupt("invalid feature scaling"));
        }

        let mut widths = vec![d];
        widths.extend_from_slice(&hidden);
        widths.push(k - 1);
        let mut layers = Vec::with_capacity(widths.len() - 1);
        for w in widths.windows(2) {
            let count = w[0]
                .checked_mul(w[1])
                .ok_or_else(|| corrupt("layer size overflow"))?;
            let weights = ndarray::Array2::from_shape_vec((w[0], w[1]), r.f64s(count)?)
                .map_err(|e| Error::CorruptCheckpoint(e.to_string()))?;
            let biases = ndarray::Array1::from(r.f64s(w[1])?);
            layers.push(Layer { weights, biases });
        }
        if !r.buf.is_empty() {
            return Err(corrupt("trailing bytes"));
        }
        let params = ModelParams { layers, activation };
        params
            .validate()
            .map_err(|e| Error::CorruptCheckpoint(e.to_string()))?;
        Ok(SurvModel {
            params,
            grid,
            standardizer,
            head,
            config,
        })
    }
}

struct Reader<'a> {
    buf: &'a [u8],
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if n > self.buf.len() {
            return Err(Error::CorruptCheckpoint("unexpected end of file".into()));
        }
        let (head, rest) = self.buf.split_at(n);
        self.buf = rest;
        Ok(head)
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    fn dim(&mut self) -> Result<usize> {
        let v = u32::from_le_bytes(self.take(4)?.try_into().unwrap()) as usize;
        if v > MAX_DIM {
            return Err(Error::CorruptCheckpoint(format!("dimension {v} too large")));
        }
        Ok(v)
    }

    fn f64s(&mut self, n: usize) -> Result<Vec<f64>> {
        let bytes = n
            .checked_mul(8)
            .ok_or_else(|| Error::CorruptCheckpoint("length overflow".into()))?;
        Ok(self
            .take(bytes)?
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect())
    }
}

fn sidecar_path(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".json");
    PathBuf::from(s)
}

/// Writes the binary checkpoint to `path` and its JSON header to `path.json`.
pub fn save_checkpoint(model: &SurvModel, path: &Path) -> Result<()> {
    fs::write(path, Checkpoint::to_bytes(model)?)?;
    let header = serde_json::to_string_pretty(&Checkpoint::header(model))?;
    fs::write(sidecar_path(path), header + "\n")?;
    Ok(())
}

pub fn load_checkpoint(path: &Path) -> Result<SurvModel> {
    Checkpoint::from_bytes(&fs::read(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::encoding::Sample;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn model(seed: u64) -> SurvModel {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let config = TrainConfig {
            hidden_dims: vec![5, 4],
            activation: Activation::Tanh,
            ..TrainConfig::default()
        };
        SurvModel {
            params: ModelParams::init(3, &[5, 4], 4, Activation::Tanh, &mut rng),
            grid: TimeGrid::from_edges(vec![2.0, 4.5, 9.0, 12.0]).unwrap(),
            standardizer: Standardizer {
                mean: vec![0.1, -0.2, 3.0],
                std: vec![1.5, 0.7, 2.0],
            },
            head: Head::Survcorn,
            config,
        }
    }

    #[test]
    fn round_trip_is_bit_identical() {
        let m = model(1);
        let back = Checkpoint::from_bytes(&Checkpoint::to_bytes(&m).unwrap()).unwrap();
        assert_eq!(back, m);
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let samples: Vec<Sample> = (0..10)
            .map(|_| {
                Sample::new(
                    (0..3).map(|_| rng.random_range(-5.0..5.0)).collect(),
                    1.0,
                    true,
                )
                .unwrap()
            })
            .collect();
        let a = m.logits(&samples).unwrap();
        let b = back.logits(&samples).unwrap();
        assert!(a
            .iter()
            .zip(b.iter())
            .all(|(x, y)| x.to_bits() == y.to_bits()));
    }

    #[test]
    fn rejects_corruption() {
        let bytes = Checkpoint::to_bytes(&model(2)).unwrap();
        let mut flipped = bytes.clone();
        let last = flipped.len() - 1;
        flipped[last] ^= 0x40;
        assert!(matches!(
            Checkpoint::from_bytes(&flipped),
            Err(Error::CorruptCheckpoint(_))
        ));
        assert!(Checkpoint::from_bytes(&bytes[..bytes.len() - 8]).is_err());
        assert!(Checkpoint::from_bytes(b"not a checkpoint").is_err());
        assert!(Checkpoint::from_bytes(&[]).is_err());
    }

    #[test]
    fn rejects_other_versions() {
        let mut bytes = Checkpoint::to_bytes(&model(3)).unwrap();
        bytes[8..12].copy_from_slice(&7u32.to_le_bytes());
        assert!(matches!(
            Checkpoint::from_bytes(&bytes),
            Err(Error::VersionMismatch {
                found: 7,
                expected: 1
            })
        ));
    }

    #[test]
    fn loaded_model_checks_feature_width() {
        let m = model(4);
        let back = Checkpoint::from_bytes(&Checkpoint::to_bytes(&m).unwrap()).unwrap();
        let wrong = [Sample::new(vec![0.0; 2], 1.0, true).unwrap()];
        assert!(matches!(back.logits(&wrong), Err(Error::Shape(_))));
    }

    #[test]
    fn sidecar_mirrors_header() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.ckpt");
        let m = model(5);
        save_checkpoint(&m, &path).unwrap();
        let json: serde_json::Value =
            serde_json::from_str(&fs::read_to_string(sidecar_path(&path)).unwrap()).unwrap();
        assert_eq!(json["format_version"], 1);
        assert_eq!(json["d"], 3);
        assert_eq!(json["K"], 5);
        assert_eq!(json["hidden_dims"], serde_json::json!([5, 4]));
        assert_eq!(json["activation"], "tanh");
        assert_eq!(json["adam"]["beta2"], 0.999);
        assert_eq!(load_checkpoint(&path).unwrap(), m);
    }
}
