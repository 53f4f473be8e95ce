//! Versioned serialization container for trained models.
//!
//! Schema (serde, JSON by default): `{schema_version, kind, ...}` with
//! per-kind hyperparameters and flat parameter arrays. The same structure
//! round-trips through any serde format.

use std::io::{Read, Write};

use crate::classify::{LogRegModel, MlpModel, SvmRbfModel};
use crate::Result;

pub const MODEL_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(tag = "kind")]
pub enum ModelKind {
    LogReg(LogRegModel),
    SvmRbf(SvmRbfModel),
    Mlp(MlpModel),
}

#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct TrainedModel {
    pub schema_version: u32,
    #[serde(flatten)]
    pub model: ModelKind,
}

impl TrainedModel {
    pub fn logreg(model: LogRegModel) -> Self {
        Self { schema_version: MODEL_SCHEMA_VERSION, model: ModelKind::LogReg(model) }
    }

    pub fn svm(model: SvmRbfModel) -> Self {
        Self { schema_version: MODEL_SCHEMA_VERSION, model: ModelKind::SvmRbf(model) }
    }

    pub fn mlp(model: MlpModel) -> Self {
        Self { schema_version: MODEL_SCHEMA_VERSION, model: ModelKind::Mlp(model) }
    }

    /// Real-valued classification score for one feature vector.
    pub fn score(&self, features: &[f64]) -> f64 {
        match &self.model {
            ModelKind::LogReg(m) => m.score(features),
            ModelKind::SvmRbf(m) => m.score(features),
            ModelKind::Mlp(m) => m.score(features),
        }
    }

    pub fn kind_name(&self) -> &'static str {
        match &self.model {
            ModelKind::LogReg(_) => "logreg",
            ModelKind::SvmRbf(_) => "svm",
            ModelKind::Mlp(_) => "mlp",
        }
    }

    pub fn write_json<W: Write>(&self, w: W) -> Result<()> {
        serde_json::to_writer(w, self).map_err(std::io::Error::other)?;
        Ok(())
    }

    pub fn read_json<R: Read>(r: R) -> Result<Self> {
        Ok(serde_json::from_reader(r).map_err(std::io::Error::other)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::classify::train_logreg;

    #[test]
    fn json_round_trip_preserves_scores() {
        let x = vec![vec![0.0, 1.0], vec![1.0, 0.0], vec![0.2, 0.9], vec![0.9, 0.1]];
        let y = vec![0u8, 1, 0, 1];
        let model = TrainedModel::logreg(train_logreg(&x, &y, 1.0).unwrap());
        let mut buf = Vec::new();
        model.write_json(&mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.contains("\"kind\":\"LogReg\""));
        assert!(text.contains("\"schema_version\":1"));
        let back = TrainedModel::read_json(buf.as_slice()).unwrap();
        assert_eq!(back, model);
        for row in &x {
            assert_eq!(model.score(row), back.score(row));
        }
    }
}
