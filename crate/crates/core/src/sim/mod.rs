//! Synthetic-cohort simulator.
//!
//! Generates turn timelines from an alternating-run process whose feature
//! expectations are available in closed form, so every downstream stage can
//! be verified against known ground truth: turn durations are log-normal,
//! run lengths geometric, switch offsets truncated normal, hold pauses
//! uniform. Mood shifts are injected at the parameter level so that the
//! *extracted* feature means move by exactly the configured amounts; random
//! intercepts per patient and clinician perturb the duration means to give
//! the mixed models real variance components to find.
//!
//! The distribution choices are this crate's own; only the injected shift
//! magnitudes in the `table1` preset come from published estimates.

mod cohort;
mod metrics;
mod render;

pub use cohort::{
    simulate_cohort, table1_preset, to_call_records, write_ground_truth_csv, Cohort,
    CohortConfig, EpisodeMix, FeatureShifts, GroundTruthCall, RhythmGenConfig, SimulatedCall,
    SpeakerGenParams, GROUND_TRUTH_CSV_HEADER,
};
pub use metrics::{boundary_f1, speaker_frame_accuracy};
pub use render::{render_audio, RenderConfig, RenderedCall};

use crate::stats::{AnalysisDataset, DataRow, Gender};
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

/// Draw a dataset straight from the mixed-model equation
/// `y = β₀ + β₁·mood + β₂·gender + u_patient + u_clinician + ε`.
/// This is the oracle for the model-fitting contracts (the cohort simulator
/// exercises the full pipeline instead).
///
/// Mood alternates within patient and clinicians rotate round-robin over the
/// call index, so with an odd clinician count and an even number of calls per
/// patient the crossed design is exactly balanced (and GLS coincides with
/// OLS whatever the variance ratios).
#[allow(clippy::too_many_arguments)]
pub fn simulate_gaussian_lmem(
    n_patients: usize,
    calls_per_patient: usize,
    n_clinicians: usize,
    beta: (f64, f64, f64),
    sigma_patient: f64,
    sigma_clinician: f64,
    sigma_resid: f64,
    seed: u64,
) -> AnalysisDataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let normal = Normal::new(0.0, 1.0).unwrap();
    let u_p: Vec<f64> =
        (0..n_patients).map(|_| normal.sample(&mut rng) * sigma_patient).collect();
    let u_c: Vec<f64> =
        (0..n_clinicians).map(|_| normal.sample(&mut rng) * sigma_clinician).collect();
    let mut rows = Vec::new();
    for p in 0..n_patients {
        let gender = if p % 2 == 0 { Gender::Female } else { Gender::Male };
        for call in 0..calls_per_patient {
            let mood = (call % 2) as u8;
            let c = call % n_clinicians;
            let response = beta.0
                + beta.1 * f64::from(mood)
                + beta.2 * gender.code()
                + u_p[p]
                + u_c[c]
                + normal.sample(&mut rng) * sigma_resid;
            rows.push(DataRow {
                response,
                mood,
                gender,
                patient_id: format!("p{p:03}"),
                clinician_id: format!("c{c:02}"),
            });
        }
    }
    AnalysisDataset { rows }
}
