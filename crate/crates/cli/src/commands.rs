//! Subcommand implementations.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use rayon::prelude::*;

use dyad_core::align::estimate_offset;
use dyad_core::audio::{load_audio, write_wav_i16};
use dyad_core::csvfmt::fmt_g6;
use dyad_core::dialogue::{self, CallMeta, DialogueFeatureVector};
use dyad_core::harness::{
    self, load_call_records, loso_evaluate, write_meta_csv, write_report_csv, CallRecord,
    ClassifierConfig, ClassifierKind, EvaluationReport, FeatureSet,
};
use dyad_core::rhythm::{self, RhythmFeatureVector};
use dyad_core::sim::{self, RenderConfig};
use dyad_core::stats::{analyze_features, EpisodePair};
use dyad_core::timeline::{
    derive_turns, read_timeline_csv, shift_segments, write_timeline_csv, ConversationTimeline,
};
use dyad_core::vad::detect_speech;

use crate::config::RunConfig;
use crate::manifest::write_manifest;
use crate::{
    AlignArgs, AnalyzeArgs, ClassifyArgs, DialogueArgs, PipelineArgs, RhythmArgs, SegmentArgs,
    SimulateArgs,
};

fn create(path: &Path) -> anyhow::Result<BufWriter<File>> {
    Ok(BufWriter::new(
        File::create(path).with_context(|| format!("creating {}", path.display()))?,
    ))
}

pub fn align(config: &RunConfig, args: AlignArgs) -> anyhow::Result<()> {
    let cellphone = load_audio(&args.cellphone)
        .with_context(|| format!("loading {}", args.cellphone.display()))?;
    let landline = load_audio(&args.landline)
        .with_context(|| format!("loading {}", args.landline.display()))?;
    let result = estimate_offset(&cellphone, &landline, &config.segmentation.alignment)?;
    let offset_ms = result.offset_samples * 1000 / cellphone.sample_rate as i64;
    println!(
        "offset_samples={} offset_ms={} peak_ratio={} low_confidence={}",
        result.offset_samples,
        offset_ms,
        fmt_g6(result.peak_ratio),
        result.low_confidence
    );
    if result.low_confidence {
        eprintln!(
            "dyad: warning: alignment peak ratio {} below threshold {}",
            fmt_g6(result.peak_ratio),
            fmt_g6(config.segmentation.alignment.min_peak_ratio)
        );
    }
    if let Some(out) = args.out {
        let mut w = create(&out)?;
        writeln!(w, "offset_samples,offset_ms,peak_ratio,low_confidence")?;
        writeln!(
            w,
            "{},{},{},{}",
            result.offset_samples,
            offset_ms,
            fmt_g6(result.peak_ratio),
            result.low_confidence
        )?;
    }
    Ok(())
}

/// Full segmentation of one recording pair.
fn segment_pair(
    config: &RunConfig,
    cellphone_path: &Path,
    landline_path: &Path,
    call_id: &str,
) -> anyhow::Result<ConversationTimeline> {
    let seg_cfg = &config.segmentation;
    let cellphone = load_audio(cellphone_path)
        .with_context(|| format!("loading {}", cellphone_path.display()))?;
    let landline = load_audio(landline_path)
        .with_context(|| format!("loading {}", landline_path.display()))?;
    let alignment = estimate_offset(&cellphone, &landline, &seg_cfg.alignment)?;
    if alignment.low_confidence {
        eprintln!(
            "dyad: warning: call {call_id}: low-confidence alignment (peak ratio {})",
            fmt_g6(alignment.peak_ratio)
        );
    }
    let offset_ms = (alignment.offset_samples as f64 * 1000.0
        / cellphone.sample_rate as f64)
        .round() as i64;

    let patient_vad = detect_speech(&cellphone, &seg_cfg.vad)?;
    let landline_vad = detect_speech(&landline, &seg_cfg.vad)?;
    let patient_aligned = shift_segments(&patient_vad, offset_ms);
    let timeline = derive_turns(
        call_id,
        &patient_aligned,
        &landline_vad,
        landline.duration_ms(),
        seg_cfg,
    )?;
    Ok(timeline)
}

pub fn segment(config: &RunConfig, args: SegmentArgs) -> anyhow::Result<()> {
    let mut config = config.clone();
    if let Some(gap) = args.merge_gap_ms {
        config.segmentation.merge_gap_ms = gap;
    }
    std::fs::create_dir_all(&args.out_dir)?;
    let timeline = segment_pair(&config, &args.cellphone, &args.landline, &args.call_id)?;
    let mut w = create(&args.out_dir.join("timeline.csv"))?;
    write_timeline_csv(&mut w, std::slice::from_ref(&timeline))?;
    w.flush()?;
    write_manifest(&args.out_dir, "segment", &config, None)?;
    println!(
        "segmented {}: {} turns over {} ms",
        args.call_id,
        timeline.turns.len(),
        timeline.call_duration_ms
    );
    Ok(())
}

fn meta_by_call(metas: &[CallMeta]) -> BTreeMap<&str, &CallMeta> {
    metas.iter().map(|m| (m.call_id.as_str(), m)).collect()
}

fn extract_dialogue_rows(
    timelines: &[ConversationTimeline],
    metas: &[CallMeta],
) -> anyhow::Result<Vec<(CallMeta, DialogueFeatureVector)>> {
    let by_call = meta_by_call(metas);
    timelines
        .iter()
        .map(|tl| {
            let meta = by_call
                .get(tl.call_id.as_str())
                .copied()
                .with_context(|| format!("no metadata for call {}", tl.call_id))?;
            let mut tl = tl.clone();
            if meta.duration_ms > 0 {
                tl.call_duration_ms = tl.call_duration_ms.max(meta.duration_ms);
            }
            let features = dialogue::summarize(&tl)
                .with_context(|| format!("featurizing call {}", tl.call_id))?;
            Ok((meta.clone(), features))
        })
        .collect()
}

pub fn dialogue_features(config: &RunConfig, args: DialogueArgs) -> anyhow::Result<()> {
    let timelines = read_timeline_csv(&args.timeline)?;
    let metas = harness::read_meta_csv(&args.meta)?;
    let rows = extract_dialogue_rows(&timelines, &metas)?;
    let mut w = create(&args.out)?;
    dialogue::write_dialogue_csv(&mut w, &rows)?;
    w.flush()?;
    let _ = config;
    println!("wrote {} feature rows to {}", rows.len(), args.out.display());
    Ok(())
}

fn rhythm_for_file(
    config: &RunConfig,
    path: &Path,
    call_id: &str,
) -> anyhow::Result<RhythmFeatureVector> {
    let signal =
        load_audio(path).with_context(|| format!("loading {}", path.display()))?;
    let envelope = rhythm::amplitude_envelope(&signal, &config.rhythm)?;
    let frames = rhythm::rhythm_frames(&envelope, &config.rhythm)?;
    Ok(rhythm::call_statistics(call_id, &frames)?)
}

pub fn rhythm_features(config: &RunConfig, args: RhythmArgs) -> anyhow::Result<()> {
    let mut jobs: Vec<(PathBuf, String)> = Vec::new();
    if let Some(audio) = &args.audio {
        jobs.push((audio.clone(), args.call_id.clone().unwrap()));
    } else if let Some(dir) = &args.audio_dir {
        let mut paths: Vec<PathBuf> = std::fs::read_dir(dir)
            .with_context(|| format!("reading {}", dir.display()))?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().map(|e| e == "wav").unwrap_or(false))
            .collect();
        paths.sort();
        for path in paths {
            let call_id = path
                .file_stem()
                .and_then(|s| s.to_str())
                .context("non-UTF8 file name")?
                .to_string();
            jobs.push((path, call_id));
        }
    } else {
        bail!("provide --audio with --call-id, or --audio-dir");
    }
    if jobs.is_empty() {
        bail!("no input audio found");
    }
    let rows: Vec<RhythmFeatureVector> = jobs
        .par_iter()
        .map(|(path, call_id)| rhythm_for_file(config, path, call_id))
        .collect::<anyhow::Result<_>>()?;
    let mut w = create(&args.out)?;
    rhythm::write_rhythm_csv(&mut w, &rows)?;
    w.flush()?;
    println!("wrote {} rhythm rows to {}", rows.len(), args.out.display());
    Ok(())
}

fn requested_pairs(spec: &str) -> anyhow::Result<Vec<EpisodePair>> {
    Ok(match spec {
        "both" => vec![EpisodePair::EuthymicVsDepressed, EpisodePair::EuthymicVsManic],
        other => vec![EpisodePair::parse(other)?],
    })
}

pub fn analyze(config: &RunConfig, args: AnalyzeArgs) -> anyhow::Result<()> {
    std::fs::create_dir_all(&args.out_dir)?;
    let records = load_call_records(&args.features, None, args.meta.as_deref())?;
    let table = harness::dialogue_feature_table(&records)?;
    let mut opts = config.analysis.clone();
    if let Some(alpha) = args.alpha {
        opts.alpha = alpha;
    }
    if args.all_clinicians {
        opts.female_clinicians_only = false;
    }

    let explicit = args.pair != "both";
    for pair in requested_pairs(&args.pair)? {
        let outcome = match analyze_features(&table, pair, &opts) {
            Ok(outcome) => outcome,
            Err(e) if !explicit => {
                eprintln!("dyad: skipping {}: {e}", pair.as_str());
                continue;
            }
            Err(e) => return Err(e).context(format!("analyzing {}", pair.as_str())),
        };
        for warning in &outcome.warnings {
            eprintln!("dyad: warning: {warning}");
        }
        let report_path = args.out_dir.join(format!("analysis_{}.csv", pair.as_str()));
        let mut w = create(&report_path)?;
        dyad_core::stats::write_analysis_csv(&mut w, &outcome)?;
        w.flush()?;
        let mut w = create(&args.out_dir.join(format!("residuals_{}.csv", pair.as_str())))?;
        dyad_core::stats::write_residuals_csv(&mut w, &outcome)?;
        w.flush()?;
        let significant =
            outcome.reports.iter().filter(|r| r.fdr_significant).count();
        println!(
            "{}: {} features analyzed, {} FDR-significant -> {}",
            pair.as_str(),
            outcome.reports.len(),
            significant,
            report_path.display()
        );
    }
    write_manifest(&args.out_dir, "analyze", config, None)?;
    Ok(())
}

fn parse_list<T>(spec: &str, parse: impl Fn(&str) -> dyad_core::Result<T>) -> anyhow::Result<Vec<T>> {
    spec.split(',')
        .map(|s| parse(s.trim()).map_err(Into::into))
        .collect()
}

pub fn classify(config: &RunConfig, args: ClassifyArgs) -> anyhow::Result<()> {
    std::fs::create_dir_all(&args.out_dir)?;
    let records =
        load_call_records(&args.features, args.rhythm.as_deref(), args.meta.as_deref())?;
    let tasks = match args.task.as_str() {
        "both" => vec![EpisodePair::EuthymicVsDepressed, EpisodePair::EuthymicVsManic],
        other => vec![EpisodePair::parse(other)?],
    };
    let kinds = parse_list(&args.classifiers, ClassifierKind::parse)?;
    let feature_sets = parse_list(&args.feature_sets, FeatureSet::parse)?;

    let mut harness_cfg = config.harness.clone();
    if let Some(seed) = args.seed {
        harness_cfg.seed = seed;
    }

    let mut reports: Vec<EvaluationReport> = Vec::new();
    for &task in &tasks {
        for &kind in &kinds {
            for &feature_set in &feature_sets {
                let classifier = ClassifierConfig::for_kind(kind);
                let report =
                    loso_evaluate(&records, task, &classifier, feature_set, &harness_cfg)
                        .with_context(|| {
                            format!(
                                "evaluating {} {} {}",
                                task.as_str(),
                                kind.as_str(),
                                feature_set.as_str()
                            )
                        })?;
                for warning in &report.warnings {
                    eprintln!("dyad: warning: {warning}");
                }
                println!(
                    "{} {} {}: mean AUROC {} over {} speakers",
                    task.as_str(),
                    kind.as_str(),
                    feature_set.as_str(),
                    fmt_g6(report.mean_auroc),
                    report.per_speaker.len()
                );
                let folds_path = args.out_dir.join(format!(
                    "folds_{}_{}_{}.json",
                    task.as_str(),
                    kind.as_str(),
                    feature_set.as_str()
                ));
                std::fs::write(&folds_path, serde_json::to_string_pretty(&report.folds)?)?;
                reports.push(report);
            }
        }
    }
    let mut w = create(&args.out_dir.join("report.csv"))?;
    write_report_csv(&mut w, &reports)?;
    w.flush()?;
    write_manifest(&args.out_dir, "classify", config, Some(harness_cfg.seed))?;
    Ok(())
}

pub fn simulate(config: &RunConfig, args: SimulateArgs) -> anyhow::Result<()> {
    std::fs::create_dir_all(&args.out_dir)?;
    let mut cohort_cfg = match args.preset.as_deref() {
        Some("table1") => sim::table1_preset(config.simulator.seed),
        Some(other) => bail!("unknown preset {other:?} (available: table1)"),
        None => config.simulator.clone(),
    };
    if let Some(seed) = args.seed {
        cohort_cfg.seed = seed;
    }
    if let Some(patients) = args.patients {
        cohort_cfg.n_patients = patients;
    }
    if let Some(calls) = args.calls_per_patient {
        cohort_cfg.calls_per_patient = calls;
    }

    let cohort = sim::simulate_cohort(&cohort_cfg)?;
    let timelines: Vec<ConversationTimeline> =
        cohort.calls.iter().map(|c| c.timeline.clone()).collect();
    let metas: Vec<CallMeta> = cohort.calls.iter().map(|c| c.meta.clone()).collect();

    let mut w = create(&args.out_dir.join("timeline.csv"))?;
    write_timeline_csv(&mut w, &timelines)?;
    w.flush()?;
    let mut w = create(&args.out_dir.join("meta.csv"))?;
    write_meta_csv(&mut w, &metas)?;
    w.flush()?;

    let rows = extract_dialogue_rows(&timelines, &metas)?;
    let mut w = create(&args.out_dir.join("dialogue_features.csv"))?;
    dialogue::write_dialogue_csv(&mut w, &rows)?;
    w.flush()?;

    let rhythm_rows: Vec<RhythmFeatureVector> =
        cohort.calls.iter().map(|c| c.rhythm.clone()).collect();
    let mut w = create(&args.out_dir.join("rhythm_features.csv"))?;
    rhythm::write_rhythm_csv(&mut w, &rhythm_rows)?;
    w.flush()?;

    let mut w = create(&args.out_dir.join("ground_truth.csv"))?;
    sim::write_ground_truth_csv(&mut w, &cohort)?;
    w.flush()?;

    if let Some(n_render) = args.render_audio {
        let mut w = create(&args.out_dir.join("render_offsets.csv"))?;
        writeln!(w, "call_id,true_offset_samples")?;
        for call in cohort.calls.iter().take(n_render) {
            let call_seed = cohort_cfg.seed ^ fnv1a(call.meta.call_id.as_bytes());
            // Offsets land on the 10 ms VAD hop grid (80 samples at 8 kHz).
            let render_cfg = RenderConfig {
                offset_samples: ((call_seed % 201) as i64 - 100) * 80,
                seed: call_seed,
                ..RenderConfig::default()
            };
            let rendered = sim::render_audio(&call.timeline, &render_cfg)?;
            write_wav_i16(
                args.out_dir.join(format!("{}_cell.wav", call.meta.call_id)),
                &rendered.patient_channel,
            )?;
            write_wav_i16(
                args.out_dir.join(format!("{}_land.wav", call.meta.call_id)),
                &rendered.landline_channel,
            )?;
            writeln!(w, "{},{}", call.meta.call_id, rendered.true_offset_samples)?;
        }
        w.flush()?;
    }

    write_manifest(&args.out_dir, "simulate", config, Some(cohort_cfg.seed))?;
    println!(
        "simulated {} calls from {} patients into {}",
        cohort.calls.len(),
        cohort_cfg.n_patients,
        args.out_dir.display()
    );
    Ok(())
}

pub fn pipeline(config: &RunConfig, args: PipelineArgs) -> anyhow::Result<()> {
    std::fs::create_dir_all(&args.out_dir)?;
    let metas = harness::read_meta_csv(&args.meta)?;

    // Stage 1: timelines (and rhythm features when audio is available).
    let (timelines, rhythm_rows): (Vec<ConversationTimeline>, Vec<RhythmFeatureVector>) =
        if let Some(dir) = &args.input_dir {
            let mut pairs: Vec<(String, PathBuf, PathBuf)> = Vec::new();
            for meta in &metas {
                let cell = dir.join(format!("{}_cell.wav", meta.call_id));
                let land = dir.join(format!("{}_land.wav", meta.call_id));
                if cell.exists() && land.exists() {
                    pairs.push((meta.call_id.clone(), cell, land));
                } else {
                    eprintln!("dyad: warning: missing audio pair for {}", meta.call_id);
                }
            }
            if pairs.is_empty() {
                bail!("no `<call_id>_cell.wav` / `<call_id>_land.wav` pairs found in {}", dir.display());
            }
            let results: Vec<(ConversationTimeline, RhythmFeatureVector)> = pairs
                .par_iter()
                .map(|(call_id, cell, land)| {
                    let tl = segment_pair(config, cell, land, call_id)
                        .with_context(|| format!("segmenting {call_id}"))?;
                    let rf = rhythm_for_file(config, cell, call_id)
                        .with_context(|| format!("rhythm features for {call_id}"))?;
                    Ok((tl, rf))
                })
                .collect::<anyhow::Result<_>>()?;
            results.into_iter().unzip()
        } else if let Some(timeline_path) = &args.timeline {
            (read_timeline_csv(timeline_path)?, Vec::new())
        } else {
            bail!("provide --input-dir with audio pairs or --timeline");
        };

    let mut w = create(&args.out_dir.join("timeline.csv"))?;
    write_timeline_csv(&mut w, &timelines)?;
    w.flush()?;

    // Stage 2: features.
    let rows = extract_dialogue_rows(&timelines, &metas)?;
    let dialogue_path = args.out_dir.join("dialogue_features.csv");
    let mut w = create(&dialogue_path)?;
    dialogue::write_dialogue_csv(&mut w, &rows)?;
    w.flush()?;
    let rhythm_path = if rhythm_rows.is_empty() {
        None
    } else {
        let path = args.out_dir.join("rhythm_features.csv");
        let mut w = create(&path)?;
        rhythm::write_rhythm_csv(&mut w, &rhythm_rows)?;
        w.flush()?;
        Some(path)
    };

    // Stage 3: analysis over both episode pairs (skipping absent ones).
    let records: Vec<CallRecord> =
        load_call_records(&dialogue_path, rhythm_path.as_deref(), Some(&args.meta))?;
    let table = harness::dialogue_feature_table(&records)?;
    for pair in [EpisodePair::EuthymicVsDepressed, EpisodePair::EuthymicVsManic] {
        match analyze_features(&table, pair, &config.analysis) {
            Ok(outcome) => {
                let mut w =
                    create(&args.out_dir.join(format!("analysis_{}.csv", pair.as_str())))?;
                dyad_core::stats::write_analysis_csv(&mut w, &outcome)?;
                w.flush()?;
            }
            Err(e) => eprintln!("dyad: analyze {}: skipped ({e})", pair.as_str()),
        }
    }

    // Stage 4: classification.
    let tasks = match args.task.as_str() {
        "both" => vec![EpisodePair::EuthymicVsDepressed, EpisodePair::EuthymicVsManic],
        other => vec![EpisodePair::parse(other)?],
    };
    let kinds = parse_list(&args.classifiers, ClassifierKind::parse)?;
    let feature_set =
        if rhythm_path.is_some() { FeatureSet::Both } else { FeatureSet::Dialogue };
    let mut harness_cfg = config.harness.clone();
    if let Some(seed) = args.seed {
        harness_cfg.seed = seed;
    }
    let mut reports = Vec::new();
    for &task in &tasks {
        for &kind in &kinds {
            let classifier = ClassifierConfig::for_kind(kind);
            match loso_evaluate(&records, task, &classifier, feature_set, &harness_cfg) {
                Ok(report) => {
                    println!(
                        "{} {} {}: mean AUROC {}",
                        task.as_str(),
                        kind.as_str(),
                        feature_set.as_str(),
                        fmt_g6(report.mean_auroc)
                    );
                    reports.push(report);
                }
                Err(e) => eprintln!(
                    "dyad: classify {} {}: skipped ({e})",
                    task.as_str(),
                    kind.as_str()
                ),
            }
        }
    }
    if !reports.is_empty() {
        let mut w = create(&args.out_dir.join("report.csv"))?;
        write_report_csv(&mut w, &reports)?;
        w.flush()?;
    }
    write_manifest(&args.out_dir, "pipeline", config, Some(harness_cfg.seed))?;
    Ok(())
}

fn fnv1a(bytes: &[u8]) -> u64 {
    let mut hash = 0xcbf2_9ce4_8422_2325u64;
    for &b in bytes {
        hash ^= b as u64;
        hash = hash.wrapping_mul(0x0000_0100_0000_01b3);
    }
    hash
}
