//! Trained models on disk, one directory per disease:
//! `lstm.txt` (network text format with scaler), `arima.txt` (key/value record) and
//! `classifier.json` (selected model plus every evaluation report).

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use epiwatch_core::arima::{self, ArimaModel};
use epiwatch_core::classify::{ClassifierKind, EvalReport, TrainedClassifier};
use epiwatch_core::lstm::{self, LstmNetwork};
use epiwatch_core::timeseries::{Disease, ScalerParams};
use serde::{Deserialize, Serialize};

use crate::ServiceError;

pub const LSTM_FILE: &str = "lstm.txt";
pub const ARIMA_FILE: &str = "arima.txt";
pub const CLASSIFIER_FILE: &str = "classifier.json";

#[derive(Debug, Clone, PartialEq)]
pub struct LstmArtifact {
    pub network: LstmNetwork,
    pub scaler: ScalerParams,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassifierArtifact {
    pub disease: Disease,
    pub selected: ClassifierKind,
    pub model: TrainedClassifier,
    pub reports: Vec<EvalReport>,
}

/// Whatever has been trained for one disease.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ModelBundle {
    pub lstm: Option<LstmArtifact>,
    pub arima: Option<ArimaModel>,
    pub classifier: Option<ClassifierArtifact>,
}

pub fn disease_dir(models_dir: &Path, disease: Disease) -> PathBuf {
    models_dir.join(disease.as_str())
}

fn artifact_err(path: &Path, e: impl std::fmt::Display) -> ServiceError {
    ServiceError::Artifact(format!("{}: {e}", path.display()))
}

fn write_file(path: &Path, text: &str) -> Result<(), ServiceError> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent).map_err(|e| artifact_err(parent, e))?;
    }
    std::fs::write(path, text).map_err(|e| artifact_err(path, e))
}

fn read_optional(path: &Path) -> Result<Option<String>, ServiceError> {
    match std::fs::read_to_string(path) {
        Ok(t) => Ok(Some(t)),
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => Ok(None),
        Err(e) => Err(artifact_err(path, e)),
    }
}

pub fn save_lstm(models_dir: &Path, disease: Disease, art: &LstmArtifact) -> Result<PathBuf, ServiceError> {
    let path = disease_dir(models_dir, disease).join(LSTM_FILE);
    write_file(&path, &lstm::write_network(&art.network, Some(&art.scaler)))?;
    Ok(path)
}

pub fn save_arima(models_dir: &Path, disease: Disease, model: &ArimaModel) -> Result<PathBuf, ServiceError> {
    let path = disease_dir(models_dir, disease).join(ARIMA_FILE);
    write_file(&path, &arima::write_model(model))?;
    Ok(path)
}

pub fn save_classifier(models_dir: &Path, art: &ClassifierArtifact) -> Result<PathBuf, ServiceError> {
    let path = disease_dir(models_dir, art.disease).join(CLASSIFIER_FILE);
    let text = serde_json::to_string_pretty(art).map_err(|e| artifact_err(&path, e))?;
    write_file(&path, &text)?;
    Ok(path)
}

/// Loads every artifact present for `disease`; absent files leave the slot empty.
pub fn load_bundle(models_dir: &Path, disease: Disease) -> Result<ModelBundle, ServiceError> {
    let dir = disease_dir(models_dir, disease);
    let mut bundle = ModelBundle::default();

    let path = dir.join(LSTM_FILE);
    if let Some(text) = read_optional(&path)? {
        let (network, scaler) = lstm::read_network(&text).map_err(|e| artifact_err(&path, e))?;
        let scaler = scaler.ok_or_else(|| artifact_err(&path, "missing scaler"))?;
        bundle.lstm = Some(LstmArtifact { network, scaler });
    }
    let path = dir.join(ARIMA_FILE);
    if let Some(text) = read_optional(&path)? {
        bundle.arima = Some(arima::read_model(&text).map_err(|e| artifact_err(&path, e))?);
    }
    let path = dir.join(CLASSIFIER_FILE);
    if let Some(text) = read_optional(&path)? {
        let art: ClassifierArtifact = serde_json::from_str(&text).map_err(|e| artifact_err(&path, e))?;
        if art.disease != disease {
            return Err(artifact_err(&path, format!("trained for {}", art.disease)));
        }
        bundle.classifier = Some(art);
    }
    Ok(bundle)
}

pub fn load_all(models_dir: &Path) -> Result<BTreeMap<Disease, ModelBundle>, ServiceError> {
    Disease::ALL
        .into_iter()
        .map(|d| Ok((d, load_bundle(models_dir, d)?)))
        .collect()
}
