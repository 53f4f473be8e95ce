//! Cohort configuration and timeline generation.

use std::io::Write;

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;

use crate::csvfmt::fmt_g6;
use crate::dialogue::CallMeta;
use crate::harness::{CallRecord, EpisodeLabel};
use crate::rhythm::{rhythm_feature_names, RhythmFeatureVector, N_RHYTHM_FEATURES};
use crate::stats::{normal_cdf, Gender};
use crate::timeline::{ConversationTimeline, Speaker, SpeechSegment, Turn};
use crate::{Error, Result};

/// Generative parameters for one speaker's side of the conversation.
#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct SpeakerGenParams {
    /// Mean speech duration per turn (log-normal), ms.
    pub turn_speech_mean_ms: f64,
    /// Coefficient of variation of the turn speech duration.
    pub turn_speech_cv: f64,
    /// Mean run length (geometric), turns per uninterrupted run.
    pub run_length_mean: f64,
    /// Probability of starting each additional held pause (up to 3 per turn).
    pub hold_pause_prob: f64,
    /// Uniform hold-pause duration bounds, ms (kept under the merge gap).
    pub hold_pause_lo_ms: f64,
    pub hold_pause_hi_ms: f64,
    /// Truncated-normal (≥ 0) switch offset when this speaker takes the floor.
    pub switch_offset_mean_ms: f64,
    pub switch_offset_sd_ms: f64,
    /// Extra exponential gap beyond the merge gap between same-run turns.
    pub run_gap_extra_mean_ms: f64,
}

/// Feature-level mood shifts, injected at the parameter level. Floor control
/// is solved last through whichever turn-duration scale is still free, so it
/// cannot be combined with pinning both speakers' turn lengths.
#[derive(Debug, Clone, Default, serde::Serialize, serde::Deserialize)]
pub struct FeatureShifts {
    pub floor_control_pct: Option<f64>,
    pub patient_turn_len_ms: Option<f64>,
    pub clinician_turn_len_ms: Option<f64>,
    pub patient_consecutive_turns: Option<f64>,
    pub clinician_consecutive_turns: Option<f64>,
    pub patient_switch_offset_ms: Option<f64>,
    pub clinician_switch_offset_ms: Option<f64>,
    pub patient_hold_offset_ms: Option<f64>,
    pub clinician_hold_offset_ms: Option<f64>,
}

#[derive(Debug, Clone, Copy, serde::Serialize, serde::Deserialize)]
pub struct EpisodeMix {
    pub euthymic: f64,
    pub depressed: f64,
    pub manic: f64,
}

/// Synthetic rhythm features: Gaussian columns with optional per-episode
/// shifts and a patient intercept; stands in for the audio-derived vector.
#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
#[serde(default)]
pub struct RhythmGenConfig {
    pub noise_sd: f64,
    pub patient_intercept_sd: f64,
    /// (column name, shift) pairs, e.g. ("d2_mean", 0.8).
    pub depressed_shifts: Vec<(String, f64)>,
    pub manic_shifts: Vec<(String, f64)>,
}

impl Default for RhythmGenConfig {
    fn default() -> Self {
        Self {
            noise_sd: 1.0,
            patient_intercept_sd: 0.3,
            depressed_shifts: Vec::new(),
            manic_shifts: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
#[serde(default)]
pub struct CohortConfig {
    pub n_patients: usize,
    pub n_clinicians: usize,
    pub calls_per_patient: usize,
    pub episode_mix: EpisodeMix,
    pub patient: SpeakerGenParams,
    pub clinician: SpeakerGenParams,
    pub depressed_shifts: FeatureShifts,
    pub manic_shifts: FeatureShifts,
    /// SD of the per-patient intercept on the patient turn-duration mean, ms.
    pub patient_intercept_sd_ms: f64,
    /// SD of the per-clinician intercept on the clinician duration mean, ms.
    pub clinician_intercept_sd_ms: f64,
    /// Alternating clinician/patient run pairs per call.
    pub n_run_pairs: usize,
    /// All boundaries land on this grid.
    pub time_quantum_ms: u64,
    pub merge_gap_ms: u64,
    pub female_patient_fraction: f64,
    pub female_clinician_fraction: f64,
    pub rhythm: RhythmGenConfig,
    pub seed: u64,
}

impl Default for CohortConfig {
    fn default() -> Self {
        Self {
            n_patients: 24,
            n_clinicians: 4,
            calls_per_patient: 8,
            episode_mix: EpisodeMix { euthymic: 0.5, depressed: 0.35, manic: 0.15 },
            patient: SpeakerGenParams {
                turn_speech_mean_ms: 2200.0,
                turn_speech_cv: 0.35,
                run_length_mean: 1.3,
                hold_pause_prob: 0.35,
                hold_pause_lo_ms: 80.0,
                hold_pause_hi_ms: 420.0,
                switch_offset_mean_ms: 350.0,
                switch_offset_sd_ms: 180.0,
                run_gap_extra_mean_ms: 200.0,
            },
            clinician: SpeakerGenParams {
                turn_speech_mean_ms: 1400.0,
                turn_speech_cv: 0.30,
                run_length_mean: 1.15,
                hold_pause_prob: 0.25,
                hold_pause_lo_ms: 80.0,
                hold_pause_hi_ms: 380.0,
                switch_offset_mean_ms: 250.0,
                switch_offset_sd_ms: 120.0,
                run_gap_extra_mean_ms: 200.0,
            },
            depressed_shifts: FeatureShifts::default(),
            manic_shifts: FeatureShifts::default(),
            patient_intercept_sd_ms: 120.0,
            clinician_intercept_sd_ms: 60.0,
            n_run_pairs: 20,
            time_quantum_ms: 10,
            merge_gap_ms: 500,
            female_patient_fraction: 0.6,
            female_clinician_fraction: 1.0,
            rhythm: RhythmGenConfig::default(),
            seed: 0,
        }
    }
}

/// The preset whose injected shifts mirror the published mixed-model
/// estimates: patient floor control +2.657 pp under depression and
/// +8.276 pp under mania, clinician turn length −215.3 ms under mania.
/// Baselines and all other parameters are the simulator's own.
pub fn table1_preset(seed: u64) -> CohortConfig {
    let mut cfg = CohortConfig {
        depressed_shifts: FeatureShifts {
            floor_control_pct: Some(2.657),
            ..FeatureShifts::default()
        },
        manic_shifts: FeatureShifts {
            floor_control_pct: Some(8.276),
            clinician_turn_len_ms: Some(-215.300),
            ..FeatureShifts::default()
        },
        seed,
        ..CohortConfig::default()
    };
    cfg.episode_mix = EpisodeMix { euthymic: 0.45, depressed: 0.35, manic: 0.20 };
    cfg.rhythm.depressed_shifts =
        vec![("d2_mean".into(), 0.8), ("d5_mean".into(), -0.6), ("d3_mean".into(), 0.5)];
    cfg.rhythm.manic_shifts = vec![("d2_mean".into(), 0.7), ("d6_mean".into(), 0.6)];
    cfg
}

impl CohortConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::InvalidConfig(msg.to_string()));
        if self.n_patients < 2 || self.n_clinicians == 0 || self.calls_per_patient == 0 {
            return bad("cohort needs >=2 patients, >=1 clinician, >=1 call per patient");
        }
        if self.n_run_pairs == 0 || self.time_quantum_ms == 0 || self.merge_gap_ms == 0 {
            return bad("run pairs, time quantum and merge gap must be positive");
        }
        let mix = &self.episode_mix;
        if mix.euthymic < 0.0 || mix.depressed < 0.0 || mix.manic < 0.0 {
            return bad("episode mix weights must be non-negative");
        }
        if mix.euthymic + mix.depressed + mix.manic <= 0.0 {
            return bad("episode mix must have positive total weight");
        }
        for (name, p) in [("patient", &self.patient), ("clinician", &self.clinician)] {
            if p.turn_speech_mean_ms <= 0.0 || p.turn_speech_cv <= 0.0 {
                return bad(&format!("{name} turn duration parameters must be positive"));
            }
            if p.run_length_mean < 1.0 {
                return bad(&format!("{name} run length mean must be >= 1"));
            }
            if !(0.0..=1.0).contains(&p.hold_pause_prob) {
                return bad(&format!("{name} hold pause probability out of [0,1]"));
            }
            if p.hold_pause_hi_ms >= self.merge_gap_ms as f64 {
                return bad(&format!("{name} hold pauses must stay under the merge gap"));
            }
        }
        for (label, shifts) in
            [("depressed", &self.depressed_shifts), ("manic", &self.manic_shifts)]
        {
            if shifts.floor_control_pct.is_some()
                && shifts.patient_turn_len_ms.is_some()
                && shifts.clinician_turn_len_ms.is_some()
            {
                return bad(&format!(
                    "{label}: floor control plus both turn-length shifts is over-constrained"
                ));
            }
        }
        for (name, _) in self.rhythm.depressed_shifts.iter().chain(&self.rhythm.manic_shifts) {
            if !rhythm_feature_names().contains(name) {
                return bad(&format!("unknown rhythm column {name:?}"));
            }
        }
        Ok(())
    }
}

/// Per-call realized parameters and expectations.
#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct GroundTruthCall {
    pub call_id: String,
    pub patient_id: String,
    pub clinician_id: String,
    pub episode: EpisodeLabel,
    pub patient_intercept_ms: f64,
    pub clinician_intercept_ms: f64,
    pub expected_floor_control_pct: f64,
    pub expected_patient_turn_len_ms: f64,
    pub expected_clinician_turn_len_ms: f64,
    pub expected_patient_run_len: f64,
    pub expected_clinician_run_len: f64,
    pub expected_patient_switch_offset_ms: f64,
    pub expected_clinician_switch_offset_ms: f64,
    pub expected_patient_hold_offset_ms: f64,
    pub expected_clinician_hold_offset_ms: f64,
}

#[derive(Debug, Clone)]
pub struct SimulatedCall {
    pub meta: CallMeta,
    pub timeline: ConversationTimeline,
    pub rhythm: RhythmFeatureVector,
    pub truth: GroundTruthCall,
}

#[derive(Debug, Clone)]
pub struct Cohort {
    pub calls: Vec<SimulatedCall>,
    pub config: CohortConfig,
}

/// Effective per-call distribution parameters after intercepts and shifts.
#[derive(Debug, Clone, Copy)]
struct SideParams {
    speech_mean_ms: f64,
    speech_cv: f64,
    run_mean: f64,
    hold_prob: f64,
    hold_lo: f64,
    hold_hi: f64,
    switch_mean: f64,
    switch_sd: f64,
    run_gap_extra: f64,
}

impl SideParams {
    fn from(base: &SpeakerGenParams, intercept_ms: f64) -> SideParams {
        SideParams {
            speech_mean_ms: (base.turn_speech_mean_ms + intercept_ms).max(150.0),
            speech_cv: base.turn_speech_cv,
            run_mean: base.run_length_mean,
            hold_prob: base.hold_pause_prob,
            hold_lo: base.hold_pause_lo_ms,
            hold_hi: base.hold_pause_hi_ms,
            switch_mean: base.switch_offset_mean_ms,
            switch_sd: base.switch_offset_sd_ms,
            run_gap_extra: base.run_gap_extra_mean_ms,
        }
    }

    /// E[#pauses]·E[pause] added to the speech duration.
    fn expected_pause_total(&self) -> f64 {
        let p = self.hold_prob;
        let expected_n = p + p * p + p * p * p;
        expected_n * 0.5 * (self.hold_lo + self.hold_hi)
    }

    fn expected_turn_span(&self) -> f64 {
        self.speech_mean_ms + self.expected_pause_total()
    }

    /// Mean of the ≥0-truncated normal switch offset.
    fn expected_switch_offset(&self) -> f64 {
        let (mu, sd) = (self.switch_mean, self.switch_sd);
        if sd <= 0.0 {
            return mu.max(0.0);
        }
        let alpha = mu / sd;
        let phi = (-0.5 * alpha * alpha).exp() / (std::f64::consts::TAU).sqrt();
        mu + sd * phi / normal_cdf(alpha)
    }
}

fn apply_shifts(patient: &mut SideParams, clinician: &mut SideParams, shifts: &FeatureShifts) {
    // Independent knobs first.
    if let Some(d) = shifts.patient_turn_len_ms {
        patient.speech_mean_ms = (patient.speech_mean_ms + d).max(150.0);
    }
    if let Some(d) = shifts.clinician_turn_len_ms {
        clinician.speech_mean_ms = (clinician.speech_mean_ms + d).max(150.0);
    }
    if let Some(d) = shifts.patient_consecutive_turns {
        patient.run_mean = (patient.run_mean + d).max(1.0);
    }
    if let Some(d) = shifts.clinician_consecutive_turns {
        clinician.run_mean = (clinician.run_mean + d).max(1.0);
    }
    if let Some(d) = shifts.patient_switch_offset_ms {
        patient.switch_mean += d;
    }
    if let Some(d) = shifts.clinician_switch_offset_ms {
        clinician.switch_mean += d;
    }
    if let Some(d) = shifts.patient_hold_offset_ms {
        patient.hold_lo = (patient.hold_lo + d).max(10.0);
        patient.hold_hi = (patient.hold_hi + d).max(patient.hold_lo + 10.0);
    }
    if let Some(d) = shifts.clinician_hold_offset_ms {
        clinician.hold_lo = (clinician.hold_lo + d).max(10.0);
        clinician.hold_hi = (clinician.hold_hi + d).max(clinician.hold_lo + 10.0);
    }
}

/// Expected speech totals with the given side parameters.
fn speech_totals(patient: &SideParams, clinician: &SideParams, pairs: f64) -> (f64, f64) {
    (
        pairs * patient.run_mean * patient.speech_mean_ms,
        pairs * clinician.run_mean * clinician.speech_mean_ms,
    )
}

/// Solve the floor-control target by scaling whichever duration mean is not
/// pinned by an explicit turn-length shift.
fn solve_floor_control(
    patient: &mut SideParams,
    clinician: &mut SideParams,
    shifts: &FeatureShifts,
    r_reference: f64,
    pairs: f64,
) {
    let Some(dfc) = shifts.floor_control_pct else { return };
    let r_target = (r_reference + dfc / 100.0).clamp(0.02, 0.98);
    let (e_sp, e_sc) = speech_totals(patient, clinician, pairs);
    if shifts.patient_turn_len_ms.is_none() {
        let target_sp = r_target / (1.0 - r_target) * e_sc;
        patient.speech_mean_ms = (target_sp / (pairs * patient.run_mean)).max(150.0);
    } else {
        let target_sc = (1.0 - r_target) / r_target * e_sp;
        clinician.speech_mean_ms = (target_sc / (pairs * clinician.run_mean)).max(150.0);
    }
}

pub fn simulate_cohort(cfg: &CohortConfig) -> Result<Cohort> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let normal = Normal::new(0.0, 1.0).unwrap();

    let patient_intercepts: Vec<f64> = (0..cfg.n_patients)
        .map(|_| normal.sample(&mut rng) * cfg.patient_intercept_sd_ms)
        .collect();
    let clinician_intercepts: Vec<f64> = (0..cfg.n_clinicians)
        .map(|_| normal.sample(&mut rng) * cfg.clinician_intercept_sd_ms)
        .collect();
    let rhythm_intercepts: Vec<f64> = (0..cfg.n_patients)
        .map(|_| normal.sample(&mut rng) * cfg.rhythm.patient_intercept_sd)
        .collect();

    let n_female_patients =
        (cfg.female_patient_fraction * cfg.n_patients as f64).round() as usize;
    let n_female_clinicians =
        (cfg.female_clinician_fraction * cfg.n_clinicians as f64).round() as usize;

    let rhythm_names = rhythm_feature_names();
    let resolve = |shifts: &[(String, f64)]| -> Vec<f64> {
        let mut v = vec![0.0; N_RHYTHM_FEATURES];
        for (name, delta) in shifts {
            let idx = rhythm_names.iter().position(|n| n == name).expect("validated");
            v[idx] = *delta;
        }
        v
    };
    let rhythm_dep = resolve(&cfg.rhythm.depressed_shifts);
    let rhythm_man = resolve(&cfg.rhythm.manic_shifts);

    // Per-call assignments drawn up front so call generation can run in
    // parallel on derived sub-seeds.
    let mut call_plans = Vec::new();
    for p in 0..cfg.n_patients {
        for k in 0..cfg.calls_per_patient {
            let clinician = rng.gen_range(0..cfg.n_clinicians);
            let mix = &cfg.episode_mix;
            let total = mix.euthymic + mix.depressed + mix.manic;
            let u: f64 = rng.gen_range(0.0..total);
            let episode = if u < mix.euthymic {
                EpisodeLabel::Euthymic
            } else if u < mix.euthymic + mix.depressed {
                EpisodeLabel::Depressed
            } else {
                EpisodeLabel::Manic
            };
            let call_seed = rng.gen::<u64>();
            call_plans.push((p, k, clinician, episode, call_seed));
        }
    }

    let calls: Vec<SimulatedCall> = call_plans
        .par_iter()
        .map(|&(p, k, c, episode, call_seed)| {
            generate_call(
                cfg,
                CallPlan {
                    patient: p,
                    call_index: k,
                    clinician: c,
                    episode,
                    seed: call_seed,
                    patient_intercept: patient_intercepts[p],
                    clinician_intercept: clinician_intercepts[c],
                    rhythm_intercept: rhythm_intercepts[p],
                    patient_female: p < n_female_patients,
                    clinician_female: c < n_female_clinicians,
                },
                &rhythm_dep,
                &rhythm_man,
            )
        })
        .collect::<Result<_>>()?;

    Ok(Cohort { calls, config: cfg.clone() })
}

struct CallPlan {
    patient: usize,
    call_index: usize,
    clinician: usize,
    episode: EpisodeLabel,
    seed: u64,
    patient_intercept: f64,
    clinician_intercept: f64,
    rhythm_intercept: f64,
    patient_female: bool,
    clinician_female: bool,
}

fn generate_call(
    cfg: &CohortConfig,
    plan: CallPlan,
    rhythm_dep: &[f64],
    rhythm_man: &[f64],
) -> Result<SimulatedCall> {
    let mut rng = ChaCha8Rng::seed_from_u64(plan.seed);
    let normal = Normal::new(0.0, 1.0).unwrap();
    let pairs = cfg.n_run_pairs as f64;

    // Euthymic reference (same intercepts) anchors the floor-control shift.
    let base_p = SideParams::from(&cfg.patient, plan.patient_intercept);
    let base_c = SideParams::from(&cfg.clinician, plan.clinician_intercept);
    let (ref_sp, ref_sc) = speech_totals(&base_p, &base_c, pairs);
    let r_reference = ref_sp / (ref_sp + ref_sc);

    let empty = FeatureShifts::default();
    let shifts = match plan.episode {
        EpisodeLabel::Euthymic | EpisodeLabel::Excluded => &empty,
        EpisodeLabel::Depressed => &cfg.depressed_shifts,
        EpisodeLabel::Manic => &cfg.manic_shifts,
    };
    let mut eff_p = base_p;
    let mut eff_c = base_c;
    apply_shifts(&mut eff_p, &mut eff_c, shifts);
    solve_floor_control(&mut eff_p, &mut eff_c, shifts, r_reference, pairs);

    let quantum = cfg.time_quantum_ms;
    let quantize = |ms: f64| -> u64 { ((ms / quantum as f64).round() as u64).max(1) * quantum };
    let min_seg_ms = 150.0f64;

    let sample_speech = |rng: &mut ChaCha8Rng, side: &SideParams| -> f64 {
        let sigma2 = (1.0 + side.speech_cv * side.speech_cv).ln();
        let mu = side.speech_mean_ms.ln() - sigma2 / 2.0;
        (mu + sigma2.sqrt() * normal.sample(rng)).exp().max(min_seg_ms)
    };
    let sample_run = |rng: &mut ChaCha8Rng, side: &SideParams| -> usize {
        let q = 1.0 - 1.0 / side.run_mean.max(1.000_001);
        let mut len = 1usize;
        while len < 12 && rng.gen::<f64>() < q {
            len += 1;
        }
        len
    };
    let sample_switch = |rng: &mut ChaCha8Rng, side: &SideParams| -> f64 {
        if side.switch_sd <= 0.0 {
            return side.switch_mean.max(0.0);
        }
        loop {
            let v = side.switch_mean + side.switch_sd * normal.sample(rng);
            if v >= 0.0 {
                return v;
            }
        }
    };

    let mut turns: Vec<Turn> = Vec::new();
    let mut clock_ms: u64 = 0;
    for pair in 0..cfg.n_run_pairs {
        for (speaker, side) in
            [(Speaker::Clinician, &eff_c), (Speaker::Patient, &eff_p)]
        {
            if !(pair == 0 && speaker == Speaker::Clinician) {
                clock_ms += quantize(sample_switch(&mut rng, side));
            }
            let run_len = sample_run(&mut rng, side);
            for turn_idx in 0..run_len {
                if turn_idx > 0 {
                    let extra = -side.run_gap_extra * rng.gen::<f64>().max(1e-12).ln();
                    clock_ms += cfg.merge_gap_ms + quantum + quantize(extra);
                }
                let speech = sample_speech(&mut rng, side);
                let mut n_pauses = 0usize;
                while n_pauses < 3 && rng.gen::<f64>() < side.hold_prob {
                    n_pauses += 1;
                }
                // Keep every resulting piece above the minimum segment size.
                while n_pauses > 0 && speech < (n_pauses + 1) as f64 * min_seg_ms {
                    n_pauses -= 1;
                }
                let mut segments = Vec::with_capacity(n_pauses + 1);
                let mut remaining = speech;
                let mut seg_start = clock_ms;
                for piece in 0..=n_pauses {
                    let len = if piece == n_pauses {
                        remaining
                    } else {
                        let pieces_left = (n_pauses - piece) as f64;
                        let max_here = remaining - pieces_left * min_seg_ms;
                        rng.gen_range(min_seg_ms..=max_here.max(min_seg_ms))
                    };
                    let seg_len = quantize(len);
                    segments.push(SpeechSegment::with_speaker(
                        seg_start,
                        seg_start + seg_len,
                        speaker,
                    ));
                    seg_start += seg_len;
                    remaining -= len;
                    if piece < n_pauses {
                        let pause =
                            quantize(rng.gen_range(side.hold_lo..=side.hold_hi))
                                .min(cfg.merge_gap_ms - quantum);
                        seg_start += pause;
                    }
                }
                clock_ms = segments.last().unwrap().end_ms;
                turns.push(Turn::from_segments(speaker, segments));
            }
        }
    }
    let call_duration_ms = clock_ms + 500;

    let call_id = format!("p{:03}-call{:02}", plan.patient, plan.call_index);
    let timeline = ConversationTimeline {
        call_id: call_id.clone(),
        turns,
        call_duration_ms,
    };
    debug_assert!(timeline.validate(cfg.merge_gap_ms).is_ok());

    let (hamd, ymrs) = sample_scores(&mut rng, plan.episode);
    let meta = CallMeta {
        call_id: call_id.clone(),
        patient_id: format!("p{:03}", plan.patient),
        clinician_id: format!("c{:02}", plan.clinician),
        patient_gender: if plan.patient_female { "F" } else { "M" }.into(),
        clinician_gender: if plan.clinician_female { "F" } else { "M" }.into(),
        hamd,
        ymrs,
        duration_ms: call_duration_ms,
    };

    let rhythm_shift = match plan.episode {
        EpisodeLabel::Depressed => rhythm_dep,
        EpisodeLabel::Manic => rhythm_man,
        _ => &[0.0; N_RHYTHM_FEATURES] as &[f64],
    };
    let rhythm_values: Vec<f64> = (0..N_RHYTHM_FEATURES)
        .map(|j| {
            rhythm_shift[j] + plan.rhythm_intercept + cfg.rhythm.noise_sd * normal.sample(&mut rng)
        })
        .collect();

    let (e_sp, e_sc) = speech_totals(&eff_p, &eff_c, pairs);
    let truth = GroundTruthCall {
        call_id,
        patient_id: meta.patient_id.clone(),
        clinician_id: meta.clinician_id.clone(),
        episode: plan.episode,
        patient_intercept_ms: plan.patient_intercept,
        clinician_intercept_ms: plan.clinician_intercept,
        expected_floor_control_pct: 100.0 * e_sp / (e_sp + e_sc),
        expected_patient_turn_len_ms: eff_p.expected_turn_span(),
        expected_clinician_turn_len_ms: eff_c.expected_turn_span(),
        expected_patient_run_len: eff_p.run_mean,
        expected_clinician_run_len: eff_c.run_mean,
        expected_patient_switch_offset_ms: eff_p.expected_switch_offset(),
        expected_clinician_switch_offset_ms: eff_c.expected_switch_offset(),
        expected_patient_hold_offset_ms: 0.5 * (eff_p.hold_lo + eff_p.hold_hi),
        expected_clinician_hold_offset_ms: 0.5 * (eff_c.hold_lo + eff_c.hold_hi),
    };

    Ok(SimulatedCall {
        meta,
        timeline,
        rhythm: RhythmFeatureVector {
            call_id: truth.call_id.clone(),
            values: rhythm_values,
        },
        truth,
    })
}

fn sample_scores(rng: &mut ChaCha8Rng, episode: EpisodeLabel) -> (u32, u32) {
    match episode {
        EpisodeLabel::Euthymic => (rng.gen_range(0..=6), rng.gen_range(0..=6)),
        EpisodeLabel::Depressed => (rng.gen_range(10..=30), rng.gen_range(0..=6)),
        EpisodeLabel::Manic => (rng.gen_range(0..=6), rng.gen_range(10..=30)),
        EpisodeLabel::Excluded => (8, 8),
    }
}

/// Run the real dialogue-feature extractor over the generated timelines and
/// attach the synthetic rhythm vectors.
pub fn to_call_records(cohort: &Cohort) -> Result<Vec<CallRecord>> {
    cohort
        .calls
        .par_iter()
        .map(|call| {
            let features = crate::dialogue::summarize(&call.timeline)?;
            Ok(CallRecord {
                call_id: call.meta.call_id.clone(),
                patient_id: call.meta.patient_id.clone(),
                clinician_id: call.meta.clinician_id.clone(),
                patient_gender: Gender::parse(&call.meta.patient_gender)?,
                clinician_gender: Some(Gender::parse(&call.meta.clinician_gender)?),
                hamd: call.meta.hamd,
                ymrs: call.meta.ymrs,
                dialogue: features.values().to_vec(),
                rhythm: call.rhythm.values.clone(),
            })
        })
        .collect()
}

pub const GROUND_TRUTH_CSV_HEADER: &str = "call_id,patient_id,clinician_id,episode,\
patient_intercept_ms,clinician_intercept_ms,expected_floor_control_pct,\
expected_patient_turn_len_ms,expected_clinician_turn_len_ms,expected_patient_run_len,\
expected_clinician_run_len,expected_patient_switch_offset_ms,\
expected_clinician_switch_offset_ms,expected_patient_hold_offset_ms,\
expected_clinician_hold_offset_ms";

pub fn write_ground_truth_csv<W: Write>(mut w: W, cohort: &Cohort) -> Result<()> {
    writeln!(w, "{GROUND_TRUTH_CSV_HEADER}")?;
    for call in &cohort.calls {
        let t = &call.truth;
        writeln!(
            w,
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
            t.call_id,
            t.patient_id,
            t.clinician_id,
            t.episode.as_str(),
            fmt_g6(t.patient_intercept_ms),
            fmt_g6(t.clinician_intercept_ms),
            fmt_g6(t.expected_floor_control_pct),
            fmt_g6(t.expected_patient_turn_len_ms),
            fmt_g6(t.expected_clinician_turn_len_ms),
            fmt_g6(t.expected_patient_run_len),
            fmt_g6(t.expected_clinician_run_len),
            fmt_g6(t.expected_patient_switch_offset_ms),
            fmt_g6(t.expected_clinician_switch_offset_ms),
            fmt_g6(t.expected_patient_hold_offset_ms),
            fmt_g6(t.expected_clinician_hold_offset_ms),
        )?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dialogue;

    #[test]
    fn deterministic_given_seed() {
        let cfg = CohortConfig { n_patients: 4, calls_per_patient: 2, ..Default::default() };
        let a = simulate_cohort(&cfg).unwrap();
        let b = simulate_cohort(&cfg).unwrap();
        assert_eq!(a.calls.len(), b.calls.len());
        for (x, y) in a.calls.iter().zip(&b.calls) {
            assert_eq!(x.timeline, y.timeline);
            assert_eq!(x.rhythm.values, y.rhythm.values);
            assert_eq!(x.meta, y.meta);
        }
    }

    #[test]
    fn timelines_satisfy_invariants() {
        let cfg = CohortConfig { n_patients: 6, calls_per_patient: 3, seed: 9, ..Default::default() };
        let cohort = simulate_cohort(&cfg).unwrap();
        for call in &cohort.calls {
            call.timeline.validate(cfg.merge_gap_ms).unwrap();
            assert_eq!(
                label_round_trip(call.meta.hamd, call.meta.ymrs),
                call.truth.episode
            );
        }
    }

    fn label_round_trip(hamd: u32, ymrs: u32) -> EpisodeLabel {
        crate::harness::label_episode(hamd, ymrs).unwrap()
    }

    #[test]
    fn zero_effect_means_match_baselines() {
        // No shifts, no intercepts: empirical means across 200 calls must sit
        // within 3 standard errors of the configured expectations.
        let cfg = CohortConfig {
            n_patients: 25,
            calls_per_patient: 8,
            patient_intercept_sd_ms: 0.0,
            clinician_intercept_sd_ms: 0.0,
            seed: 13,
            ..Default::default()
        };
        let cohort = simulate_cohort(&cfg).unwrap();
        assert_eq!(cohort.calls.len(), 200);

        let mut fc = Vec::new();
        let mut patient_len = Vec::new();
        let mut clin_len = Vec::new();
        let mut patient_runs = Vec::new();
        let mut patient_switch = Vec::new();
        let mut clin_hold = Vec::new();
        for call in &cohort.calls {
            let tl = &call.timeline;
            fc.push(dialogue::floor_control(tl, Speaker::Patient).unwrap());
            patient_len
                .push(dialogue::mean(&dialogue::turn_lengths(tl, Speaker::Patient)));
            clin_len
                .push(dialogue::mean(&dialogue::turn_lengths(tl, Speaker::Clinician)));
            patient_runs.push(dialogue::mean(&dialogue::consecutive_turn_counts(
                tl,
                Speaker::Patient,
            )));
            patient_switch
                .push(dialogue::mean(&dialogue::switch_offsets(tl, Speaker::Patient)));
            let holds = dialogue::hold_offsets(tl, Speaker::Clinician);
            if !holds.is_empty() {
                clin_hold.push(dialogue::mean(&holds));
            }
        }
        let truth = &cohort.calls[0].truth;
        let check = |name: &str, values: &[f64], expected: f64| {
            let m = dialogue::mean(values);
            let se = dialogue::sample_sd(values) / (values.len() as f64).sqrt();
            assert!(
                (m - expected).abs() <= 3.0 * se.max(1e-9),
                "{name}: mean {m} vs expected {expected} (3se = {})",
                3.0 * se
            );
        };
        check("floor control", &fc, truth.expected_floor_control_pct);
        check("patient turn len", &patient_len, truth.expected_patient_turn_len_ms);
        check("clinician turn len", &clin_len, truth.expected_clinician_turn_len_ms);
        // Run-length mean per call is a mean over runs; its expectation is
        // E[L] itself.
        check("patient runs", &patient_runs, truth.expected_patient_run_len);
        check(
            "patient switch offsets",
            &patient_switch,
            truth.expected_patient_switch_offset_ms,
        );
        check("clinician hold offsets", &clin_hold, truth.expected_clinician_hold_offset_ms);
    }

    #[test]
    fn floor_control_shift_moves_extracted_mean() {
        let mut cfg = CohortConfig {
            n_patients: 30,
            calls_per_patient: 10,
            patient_intercept_sd_ms: 0.0,
            clinician_intercept_sd_ms: 0.0,
            seed: 21,
            ..Default::default()
        };
        cfg.episode_mix = EpisodeMix { euthymic: 0.5, depressed: 0.5, manic: 0.0 };
        cfg.depressed_shifts.floor_control_pct = Some(2.657);
        let cohort = simulate_cohort(&cfg).unwrap();
        let mut euth = Vec::new();
        let mut dep = Vec::new();
        for call in &cohort.calls {
            let v = dialogue::floor_control(&call.timeline, Speaker::Patient).unwrap();
            match call.truth.episode {
                EpisodeLabel::Euthymic => euth.push(v),
                EpisodeLabel::Depressed => dep.push(v),
                _ => {}
            }
        }
        let diff = dialogue::mean(&dep) - dialogue::mean(&euth);
        let se = (dialogue::sample_sd(&dep).powi(2) / dep.len() as f64
            + dialogue::sample_sd(&euth).powi(2) / euth.len() as f64)
            .sqrt();
        assert!(
            (diff - 2.657).abs() <= 3.0 * se,
            "extracted shift {diff} vs injected 2.657 (3se = {})",
            3.0 * se
        );
    }

    #[test]
    fn monotone_effect_levels() {
        // Larger injected floor-control shifts push the extracted group mean
        // strictly up.
        let mut means = Vec::new();
        for &shift in &[0.0, 4.0, 8.0] {
            let mut cfg = CohortConfig {
                n_patients: 20,
                calls_per_patient: 6,
                seed: 31,
                ..Default::default()
            };
            cfg.episode_mix = EpisodeMix { euthymic: 0.0, depressed: 1.0, manic: 0.0 };
            cfg.depressed_shifts.floor_control_pct = Some(shift);
            let cohort = simulate_cohort(&cfg).unwrap();
            let fc: Vec<f64> = cohort
                .calls
                .iter()
                .map(|c| dialogue::floor_control(&c.timeline, Speaker::Patient).unwrap())
                .collect();
            means.push(dialogue::mean(&fc));
        }
        assert!(means[0] < means[1] && means[1] < means[2], "{means:?}");
    }

    #[test]
    fn over_constrained_shifts_rejected() {
        let mut cfg = CohortConfig::default();
        cfg.manic_shifts.floor_control_pct = Some(1.0);
        cfg.manic_shifts.patient_turn_len_ms = Some(100.0);
        cfg.manic_shifts.clinician_turn_len_ms = Some(-100.0);
        assert!(matches!(simulate_cohort(&cfg), Err(Error::InvalidConfig(_))));
    }
}
