//! Binary container for trained models.
//!
//! Layout, all integers little-endian:
//!
//! ```text
//! "SLNM"                 magic
//! u32                    schema version
//! u8                     kind tag (1 lsq, 2 svr, 3 nn)
//! u32                    header length in bytes
//! [u8; header length]    JSON header
//! u64                    payload length in f64 values
//! [f64; payload length]  IEEE-754 parameters
//! u32                    CRC-32 of every preceding byte
//! ```
//!
//! Payload order: lsq stores θ; svr stores bias, gamma, C, ε, the support
//! vectors row by row, then the dual coefficients; nn stores the flat
//! parameter vector.

use std::path::Path;

use crate::error::{ModelFileError, Result};
use crate::features::{FeatureStats, FEATURE_COUNT};
use crate::fsutil;
use crate::recon::IdwParams;

use super::linear::LinearModel;
use super::mlp::{param_count, Activation, MlpModel};
use super::svr::SvrModel;
use super::{ErdModel, ModelKind, ModelMeta, Regressor};

pub const MAGIC: &[u8; 4] = b"SLNM";
pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(tag = "regressor", rename_all = "lowercase")]
enum Shape {
    Lsq { features: usize },
    Svr { features: usize, support_vectors: usize },
    Nn { layers: Vec<usize>, activation: Activation },
}

impl Shape {
    fn kind(&self) -> ModelKind {
        match self {
            Shape::Lsq { .. } => ModelKind::Lsq,
            Shape::Svr { .. } => ModelKind::Svr,
            Shape::Nn { .. } => ModelKind::Nn,
        }
    }

    fn payload_len(&self) -> usize {
        match self {
            Shape::Lsq { features } => *features,
            Shape::Svr {
                features,
                support_vectors,
            } => 4 + support_vectors * (features + 1),
            Shape::Nn { layers, .. } => param_count(layers),
        }
    }
}

#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
struct Header {
    shape: Shape,
    stats: FeatureStats,
    idw: IdwParams,
    #[serde(flatten)]
    meta: ModelMeta,
}

/// Serializes a model to bytes.
pub fn encode(model: &ErdModel) -> Vec<u8> {
    let (shape, payload): (Shape, Vec<f64>) = match &model.regressor {
        Regressor::Lsq(m) => (
            Shape::Lsq {
                features: FEATURE_COUNT,
            },
            m.theta.to_vec(),
        ),
        Regressor::Svr(m) => {
            let mut p = vec![m.bias, m.gamma, m.c, m.epsilon];
            p.extend_from_slice(&m.support_vectors);
            p.extend_from_slice(&m.dual_coeffs);
            (
                Shape::Svr {
                    features: m.dim,
                    support_vectors: m.support_count(),
                },
                p,
            )
        }
        Regressor::Nn(m) => (
            Shape::Nn {
                layers: m.sizes.clone(),
                activation: m.activation,
            },
            m.params.clone(),
        ),
    };
    let header = Header {
        shape,
        stats: model.stats,
        idw: model.idw,
        meta: model.meta.clone(),
    };
    let json = serde_json::to_vec(&header).expect("model header serializes");
    let mut out = Vec::with_capacity(4 + 4 + 1 + 4 + json.len() + 8 + payload.len() * 8 + 4);
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&SCHEMA_VERSION.to_le_bytes());
    out.push(model.kind().tag());
    out.extend_from_slice(&(json.len() as u32).to_le_bytes());
    out.extend_from_slice(&json);
    out.extend_from_slice(&(payload.len() as u64).to_le_bytes());
    for v in &payload {
        out.extend_from_slice(&v.to_le_bytes());
    }
    let crc = crc32fast::hash(&out);
    out.extend_from_slice(&crc.to_le_bytes());
    out
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8], ModelFileError> {
        if self.bytes.len() - self.pos < n {
            return Err(ModelFileError::Truncated(format!(
                "{what} needs {n} bytes at offset {}, {} remain",
                self.pos,
                self.bytes.len() - self.pos
            )));
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u32(&mut self, what: &str) -> Result<u32, ModelFileError> {
        Ok(u32::from_le_bytes(self.take(4, what)?.try_into().unwrap()))
    }

    fn u64(&mut self, what: &str) -> Result<u64, ModelFileError> {
        Ok(u64::from_le_bytes(self.take(8, what)?.try_into().unwrap()))
    }
}

/// Parses and validates a model file image.
pub fn decode(bytes: &[u8]) -> Result<ErdModel, ModelFileError> {
    if bytes.len() < 4 || &bytes[..4] != MAGIC {
        return Err(ModelFileError::BadMagic);
    }
    let mut cur = Cursor { bytes, pos: 4 };
    let version = cur.u32("schema version")?;
    if version != SCHEMA_VERSION {
        return Err(ModelFileError::VersionMismatch {
            expected: SCHEMA_VERSION,
            found: version,
        });
    }
    if bytes.len() < 4 + 4 + 1 + 4 + 8 + 4 {
        return Err(ModelFileError::Truncated(format!(
            "{} bytes is shorter than the fixed layout",
            bytes.len()
        )));
    }
    let (body, tail) = bytes.split_at(bytes.len() - 4);
    let stored = u32::from_le_bytes(tail.try_into().unwrap());
    let computed = crc32fast::hash(body);
    if stored != computed {
        return Err(ModelFileError::Checksum { stored, computed });
    }
    let mut cur = Cursor {
        bytes: body,
        pos: 8,
    };
    let tag = cur.take(1, "kind tag")?[0];
    let kind = ModelKind::from_tag(tag)
        .ok_or_else(|| ModelFileError::KindMismatch(format!("unknown kind tag {tag}")))?;
    let header_len = cur.u32("header length")? as usize;
    let header: Header = serde_json::from_slice(cur.take(header_len, "header")?)
        .map_err(|e| ModelFileError::Header(e.to_string()))?;
    if header.shape.kind() != kind {
        return Err(ModelFileError::KindMismatch(format!(
            "kind byte says {kind} but the header describes {}",
            header.shape.kind()
        )));
    }
    let count = cur.u64("payload length")? as usize;
    let expected = header.shape.payload_len();
    if count != expected {
        return Err(ModelFileError::KindMismatch(format!(
            "{kind} header implies {expected} payload values, file declares {count}"
        )));
    }
    let raw = cur.take(
        count
            .checked_mul(8)
            .ok_or_else(|| ModelFileError::Truncated("payload length overflows".into()))?,
        "payload",
    )?;
    if cur.pos != body.len() {
        return Err(ModelFileError::Header(format!(
            "{} trailing bytes before the checksum",
            body.len() - cur.pos
        )));
    }
    let payload: Vec<f64> = raw
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();

    let regressor = match header.shape {
        Shape::Lsq { features } => {
            if features != FEATURE_COUNT {
                return Err(ModelFileError::KindMismatch(format!(
                    "lsq model has {features} coefficients, expected {FEATURE_COUNT}"
                )));
            }
            Regressor::Lsq(LinearModel {
                theta: payload.try_into().unwrap(),
            })
        }
        Shape::Svr {
            features,
            support_vectors,
        } => {
            if features != FEATURE_COUNT || support_vectors == 0 {
                return Err(ModelFileError::KindMismatch(format!(
                    "svr model with {support_vectors} support vectors of width {features}"
                )));
            }
            let sv_end = 4 + support_vectors * features;
            Regressor::Svr(SvrModel {
                dim: features,
                bias: payload[0],
                gamma: payload[1],
                c: payload[2],
                epsilon: payload[3],
                support_vectors: payload[4..sv_end].to_vec(),
                dual_coeffs: payload[sv_end..].to_vec(),
            })
        }
        Shape::Nn { layers, activation } => {
            if layers.len() < 2 || layers[0] != FEATURE_COUNT || *layers.last().unwrap() != 1 {
                return Err(ModelFileError::KindMismatch(format!(
                    "nn layer widths {layers:?} do not map {FEATURE_COUNT} features to one output"
                )));
            }
            Regressor::Nn(MlpModel {
                sizes: layers,
                params: payload,
                activation,
            })
        }
    };
    Ok(ErdModel {
        regressor,
        stats: header.stats,
        idw: header.idw,
        meta: header.meta,
    })
}

pub fn save_model(model: &ErdModel, path: impl AsRef<Path>) -> Result<()> {
    fsutil::write_atomic(path.as_ref(), &encode(model))
}

pub fn load_model(path: impl AsRef<Path>) -> Result<ErdModel> {
    let bytes = fsutil::read(path.as_ref())?;
    Ok(decode(&bytes)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::regress::ImageRecord;

    fn sample_models() -> Vec<ErdModel> {
        let stats = FeatureStats {
            means: [0.1, 0.2, 0.3, 0.4, 0.5, 0.6],
            stddevs: [1.0 / 3.0, 2.0, 1e-8, 7.5, 0.1, 1.0],
        };
        let meta = ModelMeta {
            pretrained: true,
            training_rows: 42,
            images: vec![ImageRecord {
                id: "a".into(),
                width: 4,
                height: 2,
                sha256: "00".into(),
            }],
            hyperparameters: Default::default(),
        };
        let regs = vec![
            Regressor::Lsq(LinearModel {
                theta: [0.1, -2.0, std::f64::consts::PI, 0.0, -0.0, 1e-300],
            }),
            Regressor::Svr(SvrModel {
                dim: 6,
                support_vectors: (0..12).map(|i| i as f64 / 7.0).collect(),
                dual_coeffs: vec![0.5, -1.0],
                bias: 0.3,
                gamma: 1.0 / 6.0,
                c: 1.0,
                epsilon: 0.1,
            }),
            Regressor::Nn(MlpModel::init(vec![6, 5, 3, 1], Activation::Relu, 9)),
        ];
        regs.into_iter()
            .map(|regressor| ErdModel {
                regressor,
                stats: stats.clone(),
                idw: IdwParams::default(),
                meta: meta.clone(),
            })
            .collect()
    }

    #[test]
    fn round_trip_is_bit_exact() {
        for m in sample_models() {
            let bytes = encode(&m);
            let back = decode(&bytes).unwrap();
            assert_eq!(back, m);
            assert_eq!(encode(&back), bytes);
        }
    }

    #[test]
    fn corrupt_payload_byte_fails_checksum() {
        let m = &sample_models()[2];
        let mut bytes = encode(m);
        let k = bytes.len() - 20;
        bytes[k] ^= 0x40;
        assert!(matches!(decode(&bytes), Err(ModelFileError::Checksum { .. })));
    }

    #[test]
    fn newer_version_is_rejected_with_both_numbers() {
        let mut bytes = encode(&sample_models()[0]);
        bytes[4..8].copy_from_slice(&(SCHEMA_VERSION + 1).to_le_bytes());
        let err = decode(&bytes).unwrap_err();
        assert_eq!(
            err,
            ModelFileError::VersionMismatch {
                expected: SCHEMA_VERSION,
                found: SCHEMA_VERSION + 1
            }
        );
        let msg = err.to_string();
        assert!(msg.contains('1') && msg.contains('2'), "{msg}");
    }

    #[test]
    fn kind_byte_must_match_header() {
        let mut bytes = encode(&sample_models()[0]);
        bytes[8] = ModelKind::Nn.tag();
        let n = bytes.len();
        let crc = crc32fast::hash(&bytes[..n - 4]);
        bytes[n - 4..].copy_from_slice(&crc.to_le_bytes());
        assert!(matches!(decode(&bytes), Err(ModelFileError::KindMismatch(_))));
    }

    #[test]
    fn bad_magic_and_truncation() {
        assert_eq!(decode(b"SLNX\x01\0\0\0"), Err(ModelFileError::BadMagic));
        let bytes = encode(&sample_models()[0]);
        assert!(decode(&bytes[..10]).is_err());
    }
}
