//! Episode labeling, eligibility, scaling, feature selection, and the nested
//! leave-one-speaker-out evaluation protocol.

use std::collections::{BTreeMap, BTreeSet};
use std::io::Write;
use std::path::Path;

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::classify::{
    auroc, train_logreg, train_mlp, train_svm_rbf, MlpTrainConfig, TrainedModel,
};
use crate::csvfmt::fmt_g6;
use crate::dialogue::{CallMeta, DIALOGUE_FEATURE_NAMES};
use crate::rhythm::{rhythm_feature_names, N_RHYTHM_FEATURES};
use crate::stats::{
    fit_lmem_with, likelihood_ratio_test, AnalysisDataset, AnalysisRow, DataRow, EpisodePair,
    FeatureTable, Gender, LmemOptions, ModelSpec,
};
use crate::{Error, Result};

/// Mood-episode label from the two clinical scales (each 0–35).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
pub enum EpisodeLabel {
    Euthymic,
    Depressed,
    Manic,
    Excluded,
}

impl EpisodeLabel {
    pub fn as_str(self) -> &'static str {
        match self {
            EpisodeLabel::Euthymic => "euthymic",
            EpisodeLabel::Depressed => "depressed",
            EpisodeLabel::Manic => "manic",
            EpisodeLabel::Excluded => "excluded",
        }
    }
}

/// Threshold rule: euthymic (YMRS ≤ 6 and HAMD ≤ 6), depressed (YMRS ≤ 6 and
/// HAMD ≥ 10), manic (YMRS ≥ 10 and HAMD ≤ 6); everything else excluded.
pub fn label_episode(hamd: u32, ymrs: u32) -> Result<EpisodeLabel> {
    if hamd > 35 {
        return Err(Error::ScoreOutOfRange(hamd));
    }
    if ymrs > 35 {
        return Err(Error::ScoreOutOfRange(ymrs));
    }
    Ok(if ymrs <= 6 && hamd <= 6 {
        EpisodeLabel::Euthymic
    } else if ymrs <= 6 && hamd >= 10 {
        EpisodeLabel::Depressed
    } else if ymrs >= 10 && hamd <= 6 {
        EpisodeLabel::Manic
    } else {
        EpisodeLabel::Excluded
    })
}

/// One call's metadata and feature vectors, joined on call id.
#[derive(Debug, Clone)]
pub struct CallRecord {
    pub call_id: String,
    pub patient_id: String,
    pub clinician_id: String,
    pub patient_gender: Gender,
    pub clinician_gender: Option<Gender>,
    pub hamd: u32,
    pub ymrs: u32,
    /// The 20 dialogue features in canonical order.
    pub dialogue: Vec<f64>,
    /// The 70 rhythm statistics; may be empty when only dialogue data exists.
    pub rhythm: Vec<f64>,
}

impl CallRecord {
    pub fn episode(&self) -> Result<EpisodeLabel> {
        label_episode(self.hamd, self.ymrs)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum FeatureSet {
    Dialogue,
    Rhythm,
    Both,
}

impl FeatureSet {
    pub fn as_str(self) -> &'static str {
        match self {
            FeatureSet::Dialogue => "dialogue",
            FeatureSet::Rhythm => "rhythm",
            FeatureSet::Both => "both",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "dialogue" => Ok(FeatureSet::Dialogue),
            "rhythm" => Ok(FeatureSet::Rhythm),
            "both" => Ok(FeatureSet::Both),
            other => Err(Error::InvalidConfig(format!("unknown feature set {other:?}"))),
        }
    }

    /// Column names; `both` is dialogue followed by rhythm.
    pub fn feature_names(self) -> Vec<String> {
        let dialogue = || DIALOGUE_FEATURE_NAMES.iter().map(|s| s.to_string());
        match self {
            FeatureSet::Dialogue => dialogue().collect(),
            FeatureSet::Rhythm => rhythm_feature_names(),
            FeatureSet::Both => dialogue().chain(rhythm_feature_names()).collect(),
        }
    }

    pub fn extract(self, record: &CallRecord) -> Result<Vec<f64>> {
        let need_rhythm = self != FeatureSet::Dialogue;
        if need_rhythm && record.rhythm.len() != N_RHYTHM_FEATURES {
            return Err(Error::BadDataset(format!(
                "call {} lacks rhythm features",
                record.call_id
            )));
        }
        Ok(match self {
            FeatureSet::Dialogue => record.dialogue.clone(),
            FeatureSet::Rhythm => record.rhythm.clone(),
            FeatureSet::Both => {
                let mut v = record.dialogue.clone();
                v.extend_from_slice(&record.rhythm);
                v
            }
        })
    }

    /// Indices that are never offered to the classifiers (call duration).
    pub fn forced_out(self) -> Vec<usize> {
        match self {
            FeatureSet::Dialogue | FeatureSet::Both => {
                vec![crate::dialogue::CALL_DURATION_INDEX]
            }
            FeatureSet::Rhythm => Vec::new(),
        }
    }
}

/// Patients with at least two euthymic and two task-episode calls.
pub fn eligible_speakers(records: &[CallRecord], task: EpisodePair) -> Vec<String> {
    let episode = task.episode();
    let mut counts: BTreeMap<&str, (usize, usize)> = BTreeMap::new();
    for record in records {
        let label = match record.episode() {
            Ok(l) => l,
            Err(_) => continue,
        };
        let entry = counts.entry(record.patient_id.as_str()).or_default();
        if label == EpisodeLabel::Euthymic {
            entry.0 += 1;
        } else if label == episode {
            entry.1 += 1;
        }
    }
    counts
        .into_iter()
        .filter(|(_, (euth, epi))| *euth >= 2 && *epi >= 2)
        .map(|(id, _)| id.to_string())
        .collect()
}

/// Per-feature division by the maximum absolute value over training rows.
/// Zero-max columns pass through unchanged and are flagged.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct MaxScaler {
    pub divisors: Vec<f64>,
    pub zero_columns: Vec<usize>,
}

pub fn fit_max_scaler(x: &[Vec<f64>]) -> MaxScaler {
    assert!(!x.is_empty(), "training matrix must be non-empty");
    let dim = x[0].len();
    let mut divisors = vec![0.0f64; dim];
    for row in x {
        for (d, &v) in divisors.iter_mut().zip(row) {
            *d = d.max(v.abs());
        }
    }
    let zero_columns: Vec<usize> =
        divisors.iter().enumerate().filter(|(_, &d)| d == 0.0).map(|(i, _)| i).collect();
    for d in &mut divisors {
        if *d == 0.0 {
            *d = 1.0;
        }
    }
    MaxScaler { divisors, zero_columns }
}

impl MaxScaler {
    pub fn apply_row(&self, row: &[f64]) -> Vec<f64> {
        row.iter().zip(&self.divisors).map(|(v, d)| v / d).collect()
    }

    pub fn apply(&self, x: &[Vec<f64>]) -> Vec<Vec<f64>> {
        x.iter().map(|r| self.apply_row(r)).collect()
    }
}

/// Feature selection on training speakers: per feature, a mood-vs-null LMEM
/// likelihood-ratio test; keep p < alpha. The call-duration column is always
/// forced out. An empty mask falls back to all (unforced) features.
///
/// Returns the mask and whether the fallback fired.
pub fn select_features(
    records: &[CallRecord],
    feature_set: FeatureSet,
    task: EpisodePair,
    alpha: f64,
) -> Result<(Vec<bool>, bool)> {
    let episode = task.episode();
    let mut rows: Vec<(&CallRecord, u8)> = Vec::new();
    for record in records {
        match record.episode()? {
            EpisodeLabel::Euthymic => rows.push((record, 0)),
            label if label == episode => rows.push((record, 1)),
            _ => {}
        }
    }
    if rows.iter().all(|(_, y)| *y == 0) || rows.iter().all(|(_, y)| *y == 1) {
        return Err(Error::SingleClass);
    }

    let features: Vec<Vec<f64>> =
        rows.iter().map(|(r, _)| feature_set.extract(r)).collect::<Result<_>>()?;
    let n_features = features[0].len();
    let forced_out = feature_set.forced_out();

    let base_rows: Vec<DataRow> = rows
        .iter()
        .map(|(r, y)| DataRow {
            response: 0.0,
            mood: *y,
            gender: r.patient_gender,
            patient_id: r.patient_id.clone(),
            clinician_id: r.clinician_id.clone(),
        })
        .collect();

    let mut mask: Vec<bool> = (0..n_features)
        .into_par_iter()
        .map(|j| {
            if forced_out.contains(&j) {
                return false;
            }
            let mut data = AnalysisDataset { rows: base_rows.clone() };
            for (dst, feat) in data.rows.iter_mut().zip(&features) {
                dst.response = feat[j];
            }
            let p_value = (|| -> Result<f64> {
                let null = fit_lmem_with(&data, &ModelSpec::NULL, &LmemOptions::default())?;
                let opts =
                    LmemOptions { extra_starts: vec![null.ratios], ..LmemOptions::default() };
                let main = fit_lmem_with(&data, &ModelSpec::MOOD, &opts)?;
                Ok(likelihood_ratio_test(&main, &null, 1)?.p_value)
            })();
            matches!(p_value, Ok(p) if p < alpha)
        })
        .collect();

    let fallback = !mask.iter().any(|&m| m);
    if fallback {
        for (j, flag) in mask.iter_mut().enumerate() {
            *flag = !forced_out.contains(&j);
        }
    }
    Ok((mask, fallback))
}

fn apply_mask(features: &[f64], mask: &[bool]) -> Vec<f64> {
    features
        .iter()
        .zip(mask)
        .filter_map(|(&v, &keep)| keep.then_some(v))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum ClassifierKind {
    LogReg,
    SvmRbf,
    Mlp,
}

impl ClassifierKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ClassifierKind::LogReg => "logreg",
            ClassifierKind::SvmRbf => "svm",
            ClassifierKind::Mlp => "mlp",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "logreg" | "lr" => Ok(ClassifierKind::LogReg),
            "svm" => Ok(ClassifierKind::SvmRbf),
            "mlp" | "dnn" => Ok(ClassifierKind::Mlp),
            other => Err(Error::InvalidConfig(format!("unknown classifier {other:?}"))),
        }
    }
}

/// Hyperparameter grids and training constants.
#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct ClassifierConfig {
    pub kind: ClassifierKind,
    /// Powers of ten, 1e-3..=1e3.
    pub c_grid: Vec<f64>,
    /// Powers of ten, 1e-4..=1e2 (SVM only).
    pub gamma_grid: Vec<f64>,
    pub layer_grid: Vec<usize>,
    pub width_grid: Vec<usize>,
    pub mlp_train: MlpTrainConfig,
    /// Seeds averaged for reported MLP scores.
    pub mlp_seeds: Vec<u64>,
}

impl ClassifierConfig {
    pub fn for_kind(kind: ClassifierKind) -> Self {
        Self {
            kind,
            c_grid: (-3..=3).map(|e| 10f64.powi(e)).collect(),
            gamma_grid: (-4..=2).map(|e| 10f64.powi(e)).collect(),
            layer_grid: vec![2, 3],
            width_grid: vec![32, 64],
            mlp_train: MlpTrainConfig::default(),
            mlp_seeds: (0..10).collect(),
        }
    }

    /// Candidates in tie-break order: C ascending, then gamma, then layers,
    /// then width. The inner CV keeps the first best, which realizes the
    /// smallest-first tie-break.
    fn candidates(&self) -> Vec<HyperParams> {
        match self.kind {
            ClassifierKind::LogReg => {
                self.c_grid.iter().map(|&c| HyperParams::LogReg { c }).collect()
            }
            ClassifierKind::SvmRbf => self
                .c_grid
                .iter()
                .flat_map(|&c| {
                    self.gamma_grid.iter().map(move |&gamma| HyperParams::SvmRbf { c, gamma })
                })
                .collect(),
            ClassifierKind::Mlp => self
                .layer_grid
                .iter()
                .flat_map(|&layers| {
                    self.width_grid.iter().map(move |&width| HyperParams::Mlp { layers, width })
                })
                .collect(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub enum HyperParams {
    LogReg { c: f64 },
    SvmRbf { c: f64, gamma: f64 },
    Mlp { layers: usize, width: usize },
}

impl std::fmt::Display for HyperParams {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            HyperParams::LogReg { c } => write!(f, "C={c}"),
            HyperParams::SvmRbf { c, gamma } => write!(f, "C={c} gamma={gamma}"),
            HyperParams::Mlp { layers, width } => write!(f, "layers={layers} width={width}"),
        }
    }
}

#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
#[serde(default)]
pub struct HarnessConfig {
    pub inner_folds: usize,
    pub selection_alpha: f64,
    pub seed: u64,
}

impl Default for HarnessConfig {
    fn default() -> Self {
        Self { inner_folds: 5, selection_alpha: 0.05, seed: 0 }
    }
}

/// Everything logged per outer fold; enough to recompute the fold from
/// scratch and verify no information leaked from the test speaker.
#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct FoldLog {
    pub test_speaker: String,
    pub train_speakers: Vec<String>,
    pub selected: Vec<bool>,
    pub selection_fallback: bool,
    pub scaler: MaxScaler,
    pub hyperparams: HyperParams,
    pub auroc: f64,
}

#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct EvaluationReport {
    pub task: EpisodePair,
    pub classifier: ClassifierKind,
    pub feature_set: FeatureSet,
    pub per_speaker: Vec<(String, f64)>,
    pub mean_auroc: f64,
    pub folds: Vec<FoldLog>,
    pub skipped: Vec<(String, String)>,
    pub warnings: Vec<String>,
    pub seed: u64,
}

/// Leave-one-speaker-out evaluation with speaker-partitioned inner CV for
/// hyperparameter selection.
///
/// Per eligible test speaker: select features and fit the max-scaler on the
/// training speakers only, pick hyperparameters by mean inner AUROC over
/// `inner_folds` speaker groups, train on all training speakers, and score
/// the held-out speaker's calls. MLP folds average the per-seed AUROCs.
pub fn loso_evaluate(
    records: &[CallRecord],
    task: EpisodePair,
    classifier: &ClassifierConfig,
    feature_set: FeatureSet,
    cfg: &HarnessConfig,
) -> Result<EvaluationReport> {
    let eligible = eligible_speakers(records, task);
    if eligible.len() < 3 {
        return Err(Error::TooFewSpeakers { got: eligible.len(), need: 3 });
    }
    let episode = task.episode();
    let eligible_set: BTreeSet<&str> = eligible.iter().map(String::as_str).collect();

    // Working set: eligible speakers' euthymic/episode calls, labeled.
    let mut working: Vec<(&CallRecord, u8)> = Vec::new();
    for record in records {
        if !eligible_set.contains(record.patient_id.as_str()) {
            continue;
        }
        match record.episode()? {
            EpisodeLabel::Euthymic => working.push((record, 0)),
            label if label == episode => working.push((record, 1)),
            _ => {}
        }
    }

    let fold_results: Vec<Result<std::result::Result<FoldLog, (String, String)>>> = eligible
        .par_iter()
        .map(|test_speaker| {
            evaluate_fold(test_speaker, &working, task, classifier, feature_set, cfg)
        })
        .collect();

    let mut folds = Vec::new();
    let mut skipped = Vec::new();
    let mut warnings = Vec::new();
    if eligible.len() > 1 && eligible.len() - 1 < cfg.inner_folds {
        warnings.push(format!(
            "only {} training speakers; inner CV shrinks below {} folds",
            eligible.len() - 1,
            cfg.inner_folds
        ));
    }
    for result in fold_results {
        match result? {
            Ok(fold) => {
                if fold.selection_fallback {
                    warnings.push(format!(
                        "fold {}: empty selection, fell back to all features",
                        fold.test_speaker
                    ));
                }
                folds.push(fold);
            }
            Err(skip) => skipped.push(skip),
        }
    }
    if folds.is_empty() {
        return Err(Error::TooFewSpeakers { got: 0, need: 1 });
    }
    let per_speaker: Vec<(String, f64)> =
        folds.iter().map(|f| (f.test_speaker.clone(), f.auroc)).collect();
    let mean_auroc =
        per_speaker.iter().map(|(_, a)| a).sum::<f64>() / per_speaker.len() as f64;

    Ok(EvaluationReport {
        task,
        classifier: classifier.kind,
        feature_set,
        per_speaker,
        mean_auroc,
        folds,
        skipped,
        warnings,
        seed: cfg.seed,
    })
}

type FoldOutcome = std::result::Result<FoldLog, (String, String)>;

/// Label the euthymic/episode calls among `records` for a task (other
/// episodes drop out).
fn task_labeled(records: &[CallRecord], task: EpisodePair) -> Result<Vec<(&CallRecord, u8)>> {
    let episode = task.episode();
    let mut out = Vec::new();
    for record in records {
        match record.episode()? {
            EpisodeLabel::Euthymic => out.push((record, 0u8)),
            label if label == episode => out.push((record, 1u8)),
            _ => {}
        }
    }
    Ok(out)
}

/// Pick hyperparameters by speaker-partitioned inner cross-validation over
/// the training records only. Deterministic given the run seed and
/// `fold_key` (the held-out speaker's id); ties resolve to the smallest C,
/// then gamma, then layers, then width. Exposed so leak audits can recompute
/// the choice from a fold's logged training subset.
pub fn select_hyperparams(
    train_records: &[CallRecord],
    task: EpisodePair,
    feature_set: FeatureSet,
    mask: &[bool],
    classifier: &ClassifierConfig,
    cfg: &HarnessConfig,
    fold_key: &str,
) -> Result<HyperParams> {
    let rows = task_labeled(train_records, task)?;
    let train_x: Vec<Vec<f64>> = rows
        .iter()
        .map(|(r, _)| Ok(apply_mask(&feature_set.extract(r)?, mask)))
        .collect::<Result<_>>()?;
    let train_y: Vec<u8> = rows.iter().map(|(_, y)| *y).collect();
    let speakers_of_row: Vec<&str> = rows.iter().map(|(r, _)| r.patient_id.as_str()).collect();

    // Speaker-partitioned inner folds, shuffled deterministically per outer
    // fold from the run seed.
    let mut train_speakers: Vec<&str> = {
        let set: BTreeSet<&str> = speakers_of_row.iter().copied().collect();
        set.into_iter().collect()
    };
    let n_inner = cfg.inner_folds.min(train_speakers.len()).max(2);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ fnv1a(fold_key.as_bytes()));
    train_speakers.shuffle(&mut rng);
    let fold_of: BTreeMap<&str, usize> = train_speakers
        .iter()
        .enumerate()
        .map(|(i, &s)| (s, i % n_inner))
        .collect();

    let candidates = classifier.candidates();
    let mut best: Option<(f64, HyperParams)> = None;
    for &candidate in &candidates {
        let mut fold_scores = Vec::new();
        for fold in 0..n_inner {
            let mut ix_train = Vec::new();
            let mut ix_val = Vec::new();
            for (i, speaker) in speakers_of_row.iter().enumerate() {
                if fold_of[speaker] == fold {
                    ix_val.push(i);
                } else {
                    ix_train.push(i);
                }
            }
            let val_y: Vec<u8> = ix_val.iter().map(|&i| train_y[i]).collect();
            let fit_y: Vec<u8> = ix_train.iter().map(|&i| train_y[i]).collect();
            if ix_val.is_empty()
                || val_y.iter().all(|&y| y == 0)
                || val_y.iter().all(|&y| y == 1)
                || fit_y.iter().all(|&y| y == 0)
                || fit_y.iter().all(|&y| y == 1)
            {
                continue;
            }
            let fit_x: Vec<Vec<f64>> = ix_train.iter().map(|&i| train_x[i].clone()).collect();
            let scaler = fit_max_scaler(&fit_x);
            let fit_x = scaler.apply(&fit_x);
            let val_x: Vec<Vec<f64>> =
                ix_val.iter().map(|&i| scaler.apply_row(&train_x[i])).collect();
            // Hyperparameter selection uses one fixed seed for the MLP; the
            // ten-seed average applies to reported scores.
            let Ok(scores) = train_and_score(classifier, candidate, &fit_x, &fit_y, &val_x, 0)
            else {
                continue;
            };
            if let Ok(a) = auroc(&scores, &val_y) {
                fold_scores.push(a);
            }
        }
        if fold_scores.is_empty() {
            continue;
        }
        let mean = fold_scores.iter().sum::<f64>() / fold_scores.len() as f64;
        // Strictly-greater keeps the earliest candidate on ties.
        if best.map(|(b, _)| mean > b).unwrap_or(true) {
            best = Some((mean, candidate));
        }
    }
    Ok(match best {
        Some((_, hp)) => hp,
        None => candidates[0],
    })
}

fn evaluate_fold(
    test_speaker: &str,
    working: &[(&CallRecord, u8)],
    task: EpisodePair,
    classifier: &ClassifierConfig,
    feature_set: FeatureSet,
    cfg: &HarnessConfig,
) -> Result<FoldOutcome> {
    let (test_rows, train_rows): (Vec<_>, Vec<_>) =
        working.iter().partition(|(r, _)| r.patient_id == test_speaker);
    let test_labels: Vec<u8> = test_rows.iter().map(|(_, y)| *y).collect();
    if test_labels.iter().all(|&y| y == 0) || test_labels.iter().all(|&y| y == 1) {
        return Ok(Err((test_speaker.to_string(), "single-class test calls".into())));
    }

    let train_records: Vec<CallRecord> =
        train_rows.iter().map(|(r, _)| (*r).clone()).collect();
    let (mask, selection_fallback) =
        select_features(&train_records, feature_set, task, cfg.selection_alpha)?;
    let hyperparams = select_hyperparams(
        &train_records,
        task,
        feature_set,
        &mask,
        classifier,
        cfg,
        test_speaker,
    )?;

    let train_x: Vec<Vec<f64>> = train_rows
        .iter()
        .map(|(r, _)| Ok(apply_mask(&feature_set.extract(r)?, &mask)))
        .collect::<Result<_>>()?;
    let train_y: Vec<u8> = train_rows.iter().map(|(_, y)| *y).collect();

    // Final training on all training speakers.
    let scaler = fit_max_scaler(&train_x);
    let scaled_train = scaler.apply(&train_x);
    let test_x: Vec<Vec<f64>> = test_rows
        .iter()
        .map(|(r, _)| Ok(scaler.apply_row(&apply_mask(&feature_set.extract(r)?, &mask))))
        .collect::<Result<_>>()?;

    let fold_auroc = match classifier.kind {
        ClassifierKind::Mlp => {
            let mut seed_aurocs = Vec::new();
            for &seed in &classifier.mlp_seeds {
                let scores = train_and_score(
                    classifier,
                    hyperparams,
                    &scaled_train,
                    &train_y,
                    &test_x,
                    seed,
                )?;
                seed_aurocs.push(auroc(&scores, &test_labels)?);
            }
            seed_aurocs.iter().sum::<f64>() / seed_aurocs.len() as f64
        }
        _ => {
            let scores =
                train_and_score(classifier, hyperparams, &scaled_train, &train_y, &test_x, 0)?;
            auroc(&scores, &test_labels)?
        }
    };

    let train_speaker_list: Vec<String> = {
        let set: BTreeSet<&str> =
            train_rows.iter().map(|(r, _)| r.patient_id.as_str()).collect();
        set.into_iter().map(str::to_string).collect()
    };
    Ok(Ok(FoldLog {
        test_speaker: test_speaker.to_string(),
        train_speakers: train_speaker_list,
        selected: mask,
        selection_fallback,
        scaler,
        hyperparams,
        auroc: fold_auroc,
    }))
}

fn train_and_score(
    classifier: &ClassifierConfig,
    hp: HyperParams,
    x_train: &[Vec<f64>],
    y_train: &[u8],
    x_test: &[Vec<f64>],
    mlp_seed: u64,
) -> Result<Vec<f64>> {
    let model = match hp {
        HyperParams::LogReg { c } => TrainedModel::logreg(train_logreg(x_train, y_train, c)?),
        HyperParams::SvmRbf { c, gamma } => {
            TrainedModel::svm(train_svm_rbf(x_train, y_train, c, gamma)?)
        }
        HyperParams::Mlp { layers, width } => TrainedModel::mlp(train_mlp(
            x_train,
            y_train,
            layers,
            width,
            mlp_seed,
            &classifier.mlp_train,
        )?),
    };
    Ok(x_test.iter().map(|row| model.score(row)).collect())
}

fn fnv1a(bytes: &[u8]) -> u64 {
    let mut hash = 0xcbf2_9ce4_8422_2325u64;
    for &b in bytes {
        hash ^= b as u64;
        hash = hash.wrapping_mul(0x0000_0100_0000_01b3);
    }
    hash
}

/// Convert call records into a feature table over the dialogue features for
/// the §-style statistical analysis.
pub fn dialogue_feature_table(records: &[CallRecord]) -> Result<FeatureTable> {
    let rows = records
        .iter()
        .map(|r| {
            Ok(AnalysisRow {
                call_id: r.call_id.clone(),
                patient_id: r.patient_id.clone(),
                clinician_id: r.clinician_id.clone(),
                patient_gender: r.patient_gender,
                clinician_gender: r.clinician_gender,
                episode: r.episode()?,
                features: r.dialogue.clone(),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    FeatureTable::new(
        DIALOGUE_FEATURE_NAMES.iter().map(|s| s.to_string()).collect(),
        rows,
    )
}

pub const REPORT_CSV_HEADER: &str = "task,classifier,feature_set,speaker_id,auroc";

/// Write evaluation reports; each condition gets per-speaker rows plus a
/// `MEAN` summary row.
pub fn write_report_csv<W: Write>(mut w: W, reports: &[EvaluationReport]) -> Result<()> {
    writeln!(w, "{REPORT_CSV_HEADER}")?;
    for report in reports {
        let prefix = format!(
            "{},{},{}",
            report.task.as_str(),
            report.classifier.as_str(),
            report.feature_set.as_str()
        );
        for (speaker, auc) in &report.per_speaker {
            writeln!(w, "{prefix},{speaker},{}", fmt_g6(*auc))?;
        }
        writeln!(w, "{prefix},MEAN,{}", fmt_g6(report.mean_auroc))?;
    }
    Ok(())
}

pub const META_CSV_HEADER: &str =
    "call_id,patient_id,clinician_id,patient_gender,clinician_gender,hamd,ymrs,duration_ms";

pub fn write_meta_csv<W: Write>(mut w: W, metas: &[CallMeta]) -> Result<()> {
    writeln!(w, "{META_CSV_HEADER}")?;
    for m in metas {
        writeln!(
            w,
            "{},{},{},{},{},{},{},{}",
            m.call_id,
            m.patient_id,
            m.clinician_id,
            m.patient_gender,
            m.clinician_gender,
            m.hamd,
            m.ymrs,
            m.duration_ms
        )?;
    }
    Ok(())
}

pub fn read_meta_csv<P: AsRef<Path>>(path: P) -> Result<Vec<CallMeta>> {
    let path = path.as_ref();
    let mut reader = csv::Reader::from_path(path)?;
    let got = reader.headers()?.iter().collect::<Vec<_>>().join(",");
    if got != META_CSV_HEADER {
        return Err(Error::CsvSchema { path: path.to_path_buf(), detail: "meta header".into() });
    }
    let mut out = Vec::new();
    for record in reader.records() {
        let r = record?;
        out.push(CallMeta {
            call_id: r[0].to_string(),
            patient_id: r[1].to_string(),
            clinician_id: r[2].to_string(),
            patient_gender: r[3].to_string(),
            clinician_gender: r[4].to_string(),
            hamd: parse_u32(path, &r[5])?,
            ymrs: parse_u32(path, &r[6])?,
            duration_ms: parse_u32(path, &r[7])? as u64,
        });
    }
    Ok(out)
}

/// Read the dialogue feature CSV back into metadata + feature vectors.
pub fn read_dialogue_csv<P: AsRef<Path>>(path: P) -> Result<Vec<(CallMeta, Vec<f64>)>> {
    let path = path.as_ref();
    let mut reader = csv::Reader::from_path(path)?;
    let got = reader.headers()?.iter().collect::<Vec<_>>().join(",");
    if got != crate::dialogue::dialogue_csv_header() {
        return Err(Error::CsvSchema {
            path: path.to_path_buf(),
            detail: "dialogue CSV header mismatch".into(),
        });
    }
    let mut out = Vec::new();
    for record in reader.records() {
        let r = record?;
        let mut features = Vec::with_capacity(DIALOGUE_FEATURE_NAMES.len());
        for field in r.iter().skip(6) {
            features.push(field.parse::<f64>().map_err(|_| Error::CsvSchema {
                path: path.to_path_buf(),
                detail: format!("bad number {field:?}"),
            })?);
        }
        if features.len() != DIALOGUE_FEATURE_NAMES.len() {
            return Err(Error::CsvSchema {
                path: path.to_path_buf(),
                detail: format!("expected 20 features, got {}", features.len()),
            });
        }
        out.push((
            CallMeta {
                call_id: r[0].to_string(),
                patient_id: r[1].to_string(),
                clinician_id: r[2].to_string(),
                patient_gender: r[3].to_string(),
                clinician_gender: String::new(),
                hamd: parse_u32(path, &r[4])?,
                ymrs: parse_u32(path, &r[5])?,
                duration_ms: 0,
            },
            features,
        ));
    }
    Ok(out)
}

fn parse_u32(path: &Path, s: &str) -> Result<u32> {
    s.parse::<u32>().map_err(|_| Error::CsvSchema {
        path: path.to_path_buf(),
        detail: format!("bad integer {s:?}"),
    })
}

/// Join the dialogue CSV with an optional rhythm CSV and metadata sidecar
/// into call records.
pub fn load_call_records(
    dialogue_path: &Path,
    rhythm_path: Option<&Path>,
    meta_path: Option<&Path>,
) -> Result<Vec<CallRecord>> {
    let dialogue = read_dialogue_csv(dialogue_path)?;
    let rhythm: BTreeMap<String, Vec<f64>> = match rhythm_path {
        Some(p) => crate::rhythm::read_rhythm_csv(p)?
            .into_iter()
            .map(|r| (r.call_id, r.values))
            .collect(),
        None => BTreeMap::new(),
    };
    let meta: BTreeMap<String, CallMeta> = match meta_path {
        Some(p) => read_meta_csv(p)?.into_iter().map(|m| (m.call_id.clone(), m)).collect(),
        None => BTreeMap::new(),
    };

    dialogue
        .into_iter()
        .map(|(m, features)| {
            let clinician_gender = meta
                .get(&m.call_id)
                .map(|side| Gender::parse(&side.clinician_gender))
                .transpose()?;
            Ok(CallRecord {
                patient_gender: Gender::parse(&m.patient_gender)?,
                clinician_gender,
                rhythm: rhythm.get(&m.call_id).cloned().unwrap_or_default(),
                call_id: m.call_id,
                patient_id: m.patient_id,
                clinician_id: m.clinician_id,
                hamd: m.hamd,
                ymrs: m.ymrs,
                dialogue: features,
            })
        })
        .collect()
}
