//! Mixed-model inference: LMEM fitting, likelihood-ratio tests, chi-square
//! tail probabilities, and false-discovery-rate control.

mod analyze;
mod fdr;
mod gamma;
mod lmem;

pub use analyze::{
    analyze_features, write_analysis_csv, write_residuals_csv, AnalysisOptions, AnalysisOutcome,
    AnalysisRow, EpisodePair, FeatureReport, FeatureTable,
};
pub use fdr::benjamini_hochberg;
pub use gamma::{chi_square_sf, normal_cdf};
pub use lmem::{
    fit_lmem, fit_lmem_with, likelihood_ratio_test, profiled_deviance_at, AnalysisDataset,
    DataRow, Gender, LmemOptions, LrtResult, MixedModelFit, ModelSpec,
};
