//! ERD regressors behind one contract, plus the model file.
//!
//! Every regressor consumes standardized descriptors; [`ErdModel`] carries
//! the frozen [`FeatureStats`] and applies them to raw descriptors before
//! predicting.

mod linalg;
pub mod linear;
pub mod mlp;
pub mod model_file;
pub mod svr;

use std::path::Path;

use crate::error::{Error, Result};
use crate::features::{FeatureStats, FeatureVector, FEATURE_COUNT};
use crate::recon::IdwParams;

pub use linalg::{lstsq, LstsqSolution};
pub use linear::{fit_linear, LinearFit, LinearModel};
pub use mlp::{fit_mlp, Activation, Adam, MlpConfig, MlpFit, MlpModel};
pub use model_file::{load_model, save_model, SCHEMA_VERSION};
pub use svr::{fit_svr, Gamma, SvrConfig, SvrFit, SvrModel};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Lsq,
    Svr,
    Nn,
}

impl ModelKind {
    pub const ALL: [ModelKind; 3] = [ModelKind::Lsq, ModelKind::Svr, ModelKind::Nn];

    pub fn name(self) -> &'static str {
        match self {
            ModelKind::Lsq => "lsq",
            ModelKind::Svr => "svr",
            ModelKind::Nn => "nn",
        }
    }

    pub(crate) fn tag(self) -> u8 {
        match self {
            ModelKind::Lsq => 1,
            ModelKind::Svr => 2,
            ModelKind::Nn => 3,
        }
    }

    pub(crate) fn from_tag(tag: u8) -> Option<Self> {
        ModelKind::ALL.into_iter().find(|k| k.tag() == tag)
    }
}

impl std::fmt::Display for ModelKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ModelKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| {
                Error::InvalidParameter(format!(
                    "unknown regressor {s:?} (expected lsq, svr or nn)"
                ))
            })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Regressor {
    Lsq(LinearModel),
    Svr(SvrModel),
    Nn(MlpModel),
}

impl Regressor {
    pub fn kind(&self) -> ModelKind {
        match self {
            Regressor::Lsq(_) => ModelKind::Lsq,
            Regressor::Svr(_) => ModelKind::Svr,
            Regressor::Nn(_) => ModelKind::Nn,
        }
    }

    /// Prediction for standardized rows.
    pub fn predict_standardized(&self, rows: &[[f64; FEATURE_COUNT]], out: &mut [f64]) {
        assert_eq!(rows.len(), out.len());
        match self {
            Regressor::Lsq(m) => {
                for (o, r) in out.iter_mut().zip(rows) {
                    *o = m.predict(r);
                }
            }
            Regressor::Svr(m) => {
                for (o, r) in out.iter_mut().zip(rows) {
                    *o = m.predict(r);
                }
            }
            Regressor::Nn(m) => m.predict_batch(rows.as_flattened(), rows.len(), out),
        }
    }
}

/// Provenance of one training image.
#[derive(Debug, Clone, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct ImageRecord {
    pub id: String,
    pub width: usize,
    pub height: usize,
    pub sha256: String,
}

/// Descriptive header data stored alongside the parameters.
#[derive(Debug, Clone, PartialEq, Default, serde::Serialize, serde::Deserialize)]
pub struct ModelMeta {
    pub pretrained: bool,
    pub training_rows: usize,
    pub images: Vec<ImageRecord>,
    /// Regressor-specific training configuration.
    pub hyperparameters: serde_json::Map<String, serde_json::Value>,
}

/// A trained ERD regressor with its standardization and interpolation state.
#[derive(Debug, Clone, PartialEq)]
pub struct ErdModel {
    pub regressor: Regressor,
    pub stats: FeatureStats,
    pub idw: IdwParams,
    pub meta: ModelMeta,
}

/// Anything that turns raw descriptors into ERD scores.
pub trait ErdPredictor: Sync {
    fn predict_batch(&self, raw: &[[f64; FEATURE_COUNT]], out: &mut [f64]);
}

impl ErdPredictor for ErdModel {
    fn predict_batch(&self, raw: &[[f64; FEATURE_COUNT]], out: &mut [f64]) {
        let std: Vec<[f64; FEATURE_COUNT]> = raw.iter().map(|r| self.stats.apply(r)).collect();
        self.regressor.predict_standardized(&std, out);
    }
}

impl<P: ErdPredictor + ?Sized> ErdPredictor for &P {
    fn predict_batch(&self, raw: &[[f64; FEATURE_COUNT]], out: &mut [f64]) {
        (**self).predict_batch(raw, out)
    }
}

impl ErdModel {
    pub fn kind(&self) -> ModelKind {
        self.regressor.kind()
    }

    /// ERD estimate for a raw descriptor; not clamped.
    pub fn predict(&self, v: &FeatureVector) -> f64 {
        self.predict_raw(&v.values)
    }

    /// Like [`ErdModel::predict`] for a bare slice, rejecting the wrong width.
    pub fn predict_slice(&self, v: &[f64]) -> Result<f64> {
        let arr: [f64; FEATURE_COUNT] = v.try_into().map_err(|_| Error::FeatureLength {
            expected: FEATURE_COUNT,
            found: v.len(),
        })?;
        Ok(self.predict_raw(&arr))
    }

    pub fn predict_raw(&self, v: &[f64; FEATURE_COUNT]) -> f64 {
        let mut out = [0.0];
        self.predict_batch(std::slice::from_ref(v), &mut out);
        out[0]
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        save_model(self, path)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        load_model(path)
    }
}

/// Regressor choice and its training configuration.
#[derive(Debug, Clone, PartialEq)]
pub enum RegressorSpec {
    Lsq,
    Svr(SvrConfig),
    Nn(MlpConfig),
}

impl RegressorSpec {
    pub fn kind(&self) -> ModelKind {
        match self {
            RegressorSpec::Lsq => ModelKind::Lsq,
            RegressorSpec::Svr(_) => ModelKind::Svr,
            RegressorSpec::Nn(_) => ModelKind::Nn,
        }
    }

    /// Default configuration for `kind` with the given seed.
    pub fn with_defaults(kind: ModelKind, seed: u64) -> Self {
        match kind {
            ModelKind::Lsq => RegressorSpec::Lsq,
            ModelKind::Svr => RegressorSpec::Svr(SvrConfig {
                seed,
                ..SvrConfig::default()
            }),
            ModelKind::Nn => RegressorSpec::Nn(MlpConfig {
                seed,
                ..MlpConfig::default()
            }),
        }
    }
}

/// Fit diagnostics reported by [`train_model`].
#[derive(Debug, Clone, PartialEq)]
pub struct TrainSummary {
    pub rows: usize,
    /// Residual norm for lsq, dual objective for svr, final loss for nn.
    pub final_loss: f64,
    pub rank_deficient: bool,
    pub converged: bool,
}

/// Fits the standardization and the regressor on raw descriptors and targets.
pub fn train_model(
    features: &[[f64; FEATURE_COUNT]],
    targets: &[f64],
    spec: &RegressorSpec,
    idw: IdwParams,
) -> Result<(ErdModel, TrainSummary)> {
    if features.is_empty() {
        return Err(Error::EmptyDatabase);
    }
    if features.len() != targets.len() {
        return Err(Error::InvalidParameter(format!(
            "{} feature rows but {} targets",
            features.len(),
            targets.len()
        )));
    }
    let stats = FeatureStats::fit(features)?;
    let std: Vec<[f64; FEATURE_COUNT]> = features.iter().map(|r| stats.apply(r)).collect();
    let mut hyper = serde_json::Map::new();
    let (regressor, summary) = match spec {
        RegressorSpec::Lsq => {
            let fit = fit_linear(&std, targets)?;
            (
                Regressor::Lsq(fit.model),
                TrainSummary {
                    rows: std.len(),
                    final_loss: fit.residual_norm,
                    rank_deficient: fit.rank_deficient,
                    converged: true,
                },
            )
        }
        RegressorSpec::Svr(cfg) => {
            hyper = to_map(cfg);
            let fit = fit_svr(&std, targets, cfg)?;
            (
                Regressor::Svr(fit.model),
                TrainSummary {
                    rows: std.len(),
                    final_loss: fit.objective,
                    rank_deficient: false,
                    converged: fit.converged,
                },
            )
        }
        RegressorSpec::Nn(cfg) => {
            hyper = to_map(cfg);
            let fit = fit_mlp(std.as_flattened(), FEATURE_COUNT, targets, cfg)?;
            (
                Regressor::Nn(fit.model),
                TrainSummary {
                    rows: std.len(),
                    final_loss: fit.final_loss,
                    rank_deficient: false,
                    converged: true,
                },
            )
        }
    };
    let model = ErdModel {
        regressor,
        stats,
        idw,
        meta: ModelMeta {
            pretrained: false,
            training_rows: std.len(),
            images: Vec::new(),
            hyperparameters: hyper,
        },
    };
    Ok((model, summary))
}

fn to_map<T: serde::Serialize>(v: &T) -> serde_json::Map<String, serde_json::Value> {
    match serde_json::to_value(v) {
        Ok(serde_json::Value::Object(m)) => m,
        _ => serde_json::Map::new(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::image::PixelLocation;

    fn model_with(regressor: Regressor, stats: FeatureStats) -> ErdModel {
        ErdModel {
            regressor,
            stats,
            idw: IdwParams::default(),
            meta: ModelMeta::default(),
        }
    }

    #[test]
    fn lsq_unit_theta_returns_standardized_feature() {
        let stats = FeatureStats {
            means: [2.0, 0.0, 0.0, 0.0, 0.0, 0.0],
            stddevs: [4.0, 1.0, 1.0, 1.0, 1.0, 1.0],
        };
        let m = model_with(
            Regressor::Lsq(LinearModel {
                theta: [1.0, 0.0, 0.0, 0.0, 0.0, 0.0],
            }),
            stats,
        );
        let v = FeatureVector::new([10.0, 5.0, 1.0, 2.0, 3.0, 0.5], PixelLocation::new(0, 0));
        assert_eq!(m.predict(&v), 2.0);
    }

    #[test]
    fn schema_mismatch_is_rejected() {
        let m = model_with(Regressor::Lsq(LinearModel { theta: [0.0; 6] }), FeatureStats::identity());
        assert!(matches!(
            m.predict_slice(&[1.0; 5]),
            Err(Error::FeatureLength { expected: 6, found: 5 })
        ));
        assert_eq!(m.predict_slice(&[1.0; 6]).unwrap(), 0.0);
    }

    #[test]
    fn kind_names_parse() {
        for k in ModelKind::ALL {
            assert_eq!(k.name().parse::<ModelKind>().unwrap(), k);
            assert_eq!(ModelKind::from_tag(k.tag()), Some(k));
        }
        let err = "bogus".parse::<ModelKind>().unwrap_err().to_string();
        assert!(err.contains("lsq") && err.contains("svr") && err.contains("nn"));
    }
}
