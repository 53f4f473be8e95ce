//! Per-feature mixed-model analysis of mood effects.
//!
//! For each feature (as response): fit the gender-only null, the mood
//! main-effects model, and the mood×gender interaction model; test the
//! interaction first and report its effect when significant (uncorrected
//! p < 0.05), otherwise report the mood main effect; correct the reported
//! p-values across the feature family by Benjamini–Hochberg; attach
//! automated residual-normality diagnostics in place of visual inspection.

use std::io::Write;

use rayon::prelude::*;

use crate::csvfmt::fmt_g6;
use crate::harness::EpisodeLabel;
use crate::stats::fdr::benjamini_hochberg;
use crate::stats::lmem::{
    fit_lmem_with, likelihood_ratio_test, AnalysisDataset, DataRow, Gender, LmemOptions,
    MixedModelFit, ModelSpec,
};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum EpisodePair {
    EuthymicVsDepressed,
    EuthymicVsManic,
}

impl EpisodePair {
    pub fn episode(self) -> EpisodeLabel {
        match self {
            EpisodePair::EuthymicVsDepressed => EpisodeLabel::Depressed,
            EpisodePair::EuthymicVsManic => EpisodeLabel::Manic,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            EpisodePair::EuthymicVsDepressed => "euthymic-vs-depressed",
            EpisodePair::EuthymicVsManic => "euthymic-vs-manic",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "euthymic-vs-depressed" | "depression" => Ok(EpisodePair::EuthymicVsDepressed),
            "euthymic-vs-manic" | "mania" => Ok(EpisodePair::EuthymicVsManic),
            other => Err(Error::InvalidConfig(format!("unknown episode pair {other:?}"))),
        }
    }
}

/// One call's metadata plus its feature vector, episode already labeled.
#[derive(Debug, Clone)]
pub struct AnalysisRow {
    pub call_id: String,
    pub patient_id: String,
    pub clinician_id: String,
    pub patient_gender: Gender,
    /// Unknown when the data source carries no clinician metadata.
    pub clinician_gender: Option<Gender>,
    pub episode: EpisodeLabel,
    pub features: Vec<f64>,
}

/// A feature matrix with named columns.
#[derive(Debug, Clone, Default)]
pub struct FeatureTable {
    pub feature_names: Vec<String>,
    pub rows: Vec<AnalysisRow>,
}

impl FeatureTable {
    pub fn new(feature_names: Vec<String>, rows: Vec<AnalysisRow>) -> Result<Self> {
        for row in &rows {
            if row.features.len() != feature_names.len() {
                return Err(Error::BadDataset(format!(
                    "row {} has {} features, expected {}",
                    row.call_id,
                    row.features.len(),
                    feature_names.len()
                )));
            }
        }
        Ok(Self { feature_names, rows })
    }
}

#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
#[serde(default)]
pub struct AnalysisOptions {
    /// FDR level for the BH correction.
    pub alpha: f64,
    /// Uncorrected threshold for the interaction pre-test.
    pub interaction_alpha: f64,
    /// Restrict to female clinicians (reproduction mode). A no-op with a
    /// warning when clinician genders are unknown.
    pub female_clinicians_only: bool,
}

impl Default for AnalysisOptions {
    fn default() -> Self {
        Self { alpha: 0.05, interaction_alpha: 0.05, female_clinicians_only: true }
    }
}

#[derive(Debug, Clone)]
pub struct Diagnostics {
    pub residual_skewness: f64,
    pub residual_kurtosis: f64,
    /// |skewness| > 2 or excess kurtosis > 7.
    pub failed: bool,
}

/// Analysis outcome for one feature.
#[derive(Debug, Clone)]
pub struct FeatureReport {
    pub feature: String,
    /// Mood main effect, or the interaction effect when it is significant.
    pub estimate: f64,
    pub std_error: f64,
    /// The reported p-value (mood LRT, or interaction LRT when significant).
    pub p_value: f64,
    pub fdr_significant: bool,
    pub interaction_p: f64,
    pub interaction_significant: bool,
    pub interaction_estimate: Option<f64>,
    /// Mood main effect from the main-effects model, always available.
    pub mood_estimate: f64,
    pub mood_se: f64,
    pub mood_p: f64,
    pub diagnostics: Option<Diagnostics>,
    pub residuals: Vec<f64>,
    /// Set when the fit failed; all numeric fields are meaningless then.
    pub error: Option<String>,
}

#[derive(Debug, Clone)]
pub struct AnalysisOutcome {
    pub pair: EpisodePair,
    pub reports: Vec<FeatureReport>,
    /// Call ids of the analyzed rows (after filtering), in residual order.
    pub call_ids: Vec<String>,
    pub warnings: Vec<String>,
}

/// Run the per-feature analysis for one episode pair.
pub fn analyze_features(
    table: &FeatureTable,
    pair: EpisodePair,
    opts: &AnalysisOptions,
) -> Result<AnalysisOutcome> {
    let mut warnings = Vec::new();
    let episode = pair.episode();

    let mut rows: Vec<&AnalysisRow> = table
        .rows
        .iter()
        .filter(|r| r.episode == EpisodeLabel::Euthymic || r.episode == episode)
        .collect();
    if opts.female_clinicians_only {
        if rows.iter().any(|r| r.clinician_gender.is_some()) {
            rows.retain(|r| r.clinician_gender == Some(Gender::Female));
        } else {
            warnings.push(
                "female-clinician filter requested but clinician genders unknown; skipped".into(),
            );
        }
    }
    let n_euthymic = rows.iter().filter(|r| r.episode == EpisodeLabel::Euthymic).count();
    let n_episode = rows.len() - n_euthymic;
    if n_euthymic == 0 || n_episode == 0 {
        return Err(Error::BadDataset(format!(
            "need both euthymic and {episode:?} calls, got {n_euthymic} and {n_episode}"
        )));
    }

    let datasets: Vec<DataRow> = rows
        .iter()
        .map(|r| DataRow {
            response: 0.0,
            mood: u8::from(r.episode != EpisodeLabel::Euthymic),
            gender: r.patient_gender,
            patient_id: r.patient_id.clone(),
            clinician_id: r.clinician_id.clone(),
        })
        .collect();

    let mut reports: Vec<FeatureReport> = table
        .feature_names
        .par_iter()
        .enumerate()
        .map(|(j, name)| {
            let mut data = AnalysisDataset { rows: datasets.clone() };
            for (dst, src) in data.rows.iter_mut().zip(&rows) {
                dst.response = src.features[j];
            }
            match analyze_one(&data, opts) {
                Ok(report) => FeatureReport { feature: name.clone(), ..report },
                Err(e) => FeatureReport {
                    feature: name.clone(),
                    estimate: f64::NAN,
                    std_error: f64::NAN,
                    p_value: f64::NAN,
                    fdr_significant: false,
                    interaction_p: f64::NAN,
                    interaction_significant: false,
                    interaction_estimate: None,
                    mood_estimate: f64::NAN,
                    mood_se: f64::NAN,
                    mood_p: f64::NAN,
                    diagnostics: None,
                    residuals: Vec::new(),
                    error: Some(e.to_string()),
                },
            }
        })
        .collect();

    // BH across the feature family (successful fits only).
    let ok_idx: Vec<usize> =
        (0..reports.len()).filter(|&i| reports[i].error.is_none()).collect();
    let ps: Vec<f64> = ok_idx.iter().map(|&i| reports[i].p_value).collect();
    let flags = benjamini_hochberg(&ps, opts.alpha)?;
    for (&i, &flag) in ok_idx.iter().zip(&flags) {
        reports[i].fdr_significant = flag;
    }

    Ok(AnalysisOutcome {
        pair,
        reports,
        call_ids: rows.iter().map(|r| r.call_id.clone()).collect(),
        warnings,
    })
}

fn analyze_one(data: &AnalysisDataset, opts: &AnalysisOptions) -> Result<FeatureReport> {
    let null = fit_lmem_with(data, &ModelSpec::NULL, &LmemOptions::default())?;
    let warm = |fit: &MixedModelFit| LmemOptions {
        extra_starts: vec![fit.ratios],
        ..LmemOptions::default()
    };
    let main = fit_lmem_with(data, &ModelSpec::MOOD, &warm(&null))?;
    let interaction = fit_lmem_with(data, &ModelSpec::INTERACTION, &warm(&main))?;

    let lrt_interaction = likelihood_ratio_test(&interaction, &main, 1)?;
    let interaction_significant = lrt_interaction.p_value < opts.interaction_alpha;

    let lrt_mood = likelihood_ratio_test(&main, &null, 1)?;
    let (mood_estimate, mood_se) =
        main.coefficient("mood").ok_or_else(|| Error::BadLrt("mood term missing".into()))?;

    let (estimate, std_error, p_value, interaction_estimate, chosen) = if interaction_significant
    {
        let (b, se) = interaction
            .coefficient("mood:gender")
            .ok_or_else(|| Error::BadLrt("interaction term missing".into()))?;
        (b, se, lrt_interaction.p_value, Some(b), &interaction)
    } else {
        (mood_estimate, mood_se, lrt_mood.p_value, None, &main)
    };

    let diagnostics = residual_diagnostics(&chosen.residuals);
    Ok(FeatureReport {
        feature: String::new(),
        estimate,
        std_error,
        p_value,
        fdr_significant: false,
        interaction_p: lrt_interaction.p_value,
        interaction_significant,
        interaction_estimate,
        mood_estimate,
        mood_se,
        mood_p: lrt_mood.p_value,
        diagnostics: Some(diagnostics),
        residuals: chosen.residuals.clone(),
        error: None,
    })
}

fn residual_diagnostics(residuals: &[f64]) -> Diagnostics {
    let n = residuals.len() as f64;
    let mean = residuals.iter().sum::<f64>() / n;
    let m2 = residuals.iter().map(|r| (r - mean).powi(2)).sum::<f64>() / n;
    let (skewness, kurtosis) = if m2 > 0.0 {
        let m3 = residuals.iter().map(|r| (r - mean).powi(3)).sum::<f64>() / n;
        let m4 = residuals.iter().map(|r| (r - mean).powi(4)).sum::<f64>() / n;
        (m3 / m2.powf(1.5), m4 / (m2 * m2) - 3.0)
    } else {
        (0.0, 0.0)
    };
    Diagnostics {
        residual_skewness: skewness,
        residual_kurtosis: kurtosis,
        failed: skewness.abs() > 2.0 || kurtosis > 7.0,
    }
}

pub const ANALYSIS_CSV_HEADER: &str =
    "feature,episode_pair,estimate,std_error,p_value,fdr_significant,interaction_p,diagnostics_flag";

/// Write the Table-1-style report CSV.
pub fn write_analysis_csv<W: Write>(mut w: W, outcome: &AnalysisOutcome) -> Result<()> {
    writeln!(w, "{ANALYSIS_CSV_HEADER}")?;
    for r in &outcome.reports {
        if let Some(err) = &r.error {
            let sanitized: String =
                err.chars().map(|c| if c == ',' || c == '\n' { ';' } else { c }).collect();
            writeln!(
                w,
                "{},{},,,,false,,fit_error: {}",
                r.feature,
                outcome.pair.as_str(),
                sanitized
            )?;
            continue;
        }
        let flag = match &r.diagnostics {
            Some(d) if d.failed => "diagnostics_failed",
            _ => "ok",
        };
        writeln!(
            w,
            "{},{},{},{},{},{},{},{}",
            r.feature,
            outcome.pair.as_str(),
            fmt_g6(r.estimate),
            fmt_g6(r.std_error),
            fmt_g6(r.p_value),
            r.fdr_significant,
            fmt_g6(r.interaction_p),
            flag
        )?;
    }
    Ok(())
}

/// Export per-feature residuals (`feature,call_id,residual`) for the
/// diagnostics that the source procedure did by eye.
pub fn write_residuals_csv<W: Write>(mut w: W, outcome: &AnalysisOutcome) -> Result<()> {
    writeln!(w, "feature,call_id,residual")?;
    for r in &outcome.reports {
        for (call_id, res) in outcome.call_ids.iter().zip(&r.residuals) {
            writeln!(w, "{},{},{}", r.feature, call_id, fmt_g6(*res))?;
        }
    }
    Ok(())
}
