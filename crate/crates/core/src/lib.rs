//! Turn-taking analysis of dyadic clinical calls.
//!
//! The pipeline goes from paired single-channel recordings (patient cellphone +
//! clinician landline) to a per-speaker turn timeline, to call-level dialogue and
//! rhythm features, to mixed-effects inference of mood effects and
//! leave-one-speaker-out mood-episode classification. A synthetic-cohort
//! simulator with known ground truth backs every stage's verification.
//!
//! Modules map onto pipeline stages:
//! - [`audio`], [`align`], [`vad`], [`timeline`] — segmentation front end
//! - [`dialogue`], [`rhythm`] — call-level feature extraction
//! - [`stats`] — mixed models, likelihood-ratio tests, FDR control
//! - [`classify`] — logistic regression, RBF-SVM (SMO), MLP, AUROC
//! - [`harness`] — episode labeling, scaling, feature selection, LOSO protocol
//! - [`sim`] — synthetic cohorts, audio rendering, ground-truth metrics

pub mod align;
pub mod audio;
pub mod classify;
pub mod csvfmt;
pub mod dialogue;
pub mod error;
pub mod harness;
pub mod rhythm;
pub mod sim;
pub mod stats;
pub mod timeline;
pub mod vad;

pub use error::{Error, Result};
