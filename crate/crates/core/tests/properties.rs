//! Property tests for the spec'd invariants that hold over arbitrary valid
//! inputs.

use proptest::prelude::*;

use dyad_core::align::{estimate_offset, shift_signal, AlignmentConfig};
use dyad_core::audio::AudioSignal;
use dyad_core::classify::{auroc, train_logreg, train_svm_rbf};
use dyad_core::harness::fit_max_scaler;
use dyad_core::stats::{benjamini_hochberg, chi_square_sf};
use dyad_core::timeline::{derive_turns, SegmentationConfig, Speaker, SpeechSegment};

fn noise_signal(seed: u64, len: usize) -> AudioSignal {
    use rand::prelude::*;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    AudioSignal::new((0..len).map(|_| rng.gen_range(-0.5f32..0.5)).collect(), 1000)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    /// estimate_offset(a, shift(a, k)) recovers k for any non-degenerate a.
    #[test]
    fn alignment_recovers_any_shift(seed in 0u64..10_000, len in 300usize..1200, lag_frac in -0.45f64..0.45) {
        let a = noise_signal(seed, len);
        let k = (lag_frac * len as f64) as i64;
        let b = shift_signal(&a, k);
        prop_assume!(!b.is_empty());
        let r = estimate_offset(&a, &b, &AlignmentConfig::default()).unwrap();
        prop_assert_eq!(r.offset_samples, k);
    }

    /// Turn derivation: segments stay inside landline coverage, patient
    /// spans cover the VAD overlap, and all structural invariants hold.
    #[test]
    fn derive_turns_respects_coverage(
        patient_gaps in prop::collection::vec((0u64..120, 1u64..250), 1..8),
        landline_gaps in prop::collection::vec((0u64..120, 1u64..250), 1..8),
    ) {
        let hop = 10u64;
        let build = |gaps: &[(u64, u64)]| -> Vec<SpeechSegment> {
            let mut clock = 0u64;
            let mut out = Vec::new();
            for &(gap, len) in gaps {
                clock += gap * hop;
                out.push(SpeechSegment::new(clock, clock + len * hop));
                clock += len * hop;
            }
            out
        };
        let patient = build(&patient_gaps);
        let landline = build(&landline_gaps);
        let duration = patient.last().unwrap().end_ms.max(landline.last().unwrap().end_ms) + 1000;
        let cfg = SegmentationConfig::default();
        let tl = derive_turns("p", &patient, &landline, duration, &cfg).unwrap();
        tl.validate(cfg.merge_gap_ms).unwrap();

        let n_frames = (duration / hop) as usize;
        let mask = |segs: &[SpeechSegment]| -> Vec<bool> {
            let mut m = vec![false; n_frames];
            for s in segs {
                for f in (s.start_ms / hop)..(s.end_ms / hop) {
                    if (f as usize) < n_frames { m[f as usize] = true; }
                }
            }
            m
        };
        let land_mask = mask(&landline);
        let pat_mask = mask(&patient);

        // Constituent segments never leave landline coverage.
        for turn in &tl.turns {
            for seg in &turn.segments {
                for f in (seg.start_ms / hop)..(seg.end_ms / hop) {
                    prop_assert!(land_mask[f as usize],
                        "segment frame {f} outside landline coverage");
                }
            }
        }
        // Patient turn spans cover every overlap frame.
        for f in 0..n_frames {
            if land_mask[f] && pat_mask[f] {
                let t = f as u64 * hop + hop / 2;
                let covered = tl.turns.iter().any(|turn| {
                    turn.speaker == Speaker::Patient
                        && turn.start_ms <= t
                        && t < turn.end_ms
                });
                prop_assert!(covered, "overlap frame {f} not inside a patient turn");
            }
        }
    }

    /// BH: every rejected p-value is at most alpha, and rejection is
    /// downward closed in p.
    #[test]
    fn bh_rejections_are_sane(
        ps in prop::collection::vec(0.0f64..=1.0, 1..40),
        alpha in 0.01f64..0.5,
    ) {
        let flags = benjamini_hochberg(&ps, alpha).unwrap();
        let max_rejected = ps.iter().zip(&flags).filter(|(_, &f)| f).map(|(p, _)| *p).fold(0.0, f64::max);
        for (p, f) in ps.iter().zip(&flags) {
            if *f {
                prop_assert!(*p <= alpha + 1e-12);
            } else {
                prop_assert!(*p > max_rejected - 1e-15, "smaller p not rejected");
            }
        }
    }

    /// Chi-square survival function is a proper decreasing tail probability.
    #[test]
    fn chi_square_sf_monotone(df in 1u32..10, x in 0.0f64..50.0, dx in 0.01f64..10.0) {
        let a = chi_square_sf(x, df).unwrap();
        let b = chi_square_sf(x + dx, df).unwrap();
        prop_assert!((0.0..=1.0).contains(&a));
        prop_assert!(b <= a + 1e-15);
    }

    /// Flipping labels mirrors AUROC around one half.
    #[test]
    fn auroc_label_flip_symmetry(
        scores in prop::collection::vec(-5.0f64..5.0, 4..40),
        flips in prop::collection::vec(any::<bool>(), 4..40),
    ) {
        let n = scores.len().min(flips.len());
        let scores = &scores[..n];
        let mut labels: Vec<u8> = flips[..n].iter().map(|&b| u8::from(b)).collect();
        labels[0] = 0;
        labels[n - 1] = 1;
        let flipped: Vec<u8> = labels.iter().map(|&l| 1 - l).collect();
        let a = auroc(scores, &labels).unwrap();
        let b = auroc(scores, &flipped).unwrap();
        prop_assert!((a + b - 1.0).abs() < 1e-12);
    }

    /// Max scaling maps training data into [-1, 1].
    #[test]
    fn max_scaler_bounds_training_rows(
        rows in prop::collection::vec(prop::collection::vec(-100.0f64..100.0, 3), 1..20),
    ) {
        let scaler = fit_max_scaler(&rows);
        for row in scaler.apply(&rows) {
            for v in row {
                prop_assert!((-1.0 - 1e-12..=1.0 + 1e-12).contains(&v));
            }
        }
    }

    /// The convex trainers are invariant to a consistent feature permutation
    /// (the seeded MLP is only distributionally so; its init ties weights to
    /// column positions).
    #[test]
    fn convex_trainers_ignore_feature_order(seed in 0u64..500) {
        use rand::prelude::*;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let n = 24;
        let x: Vec<Vec<f64>> = (0..n)
            .map(|i| {
                let shift = if i % 2 == 0 { -1.0 } else { 1.0 };
                (0..4).map(|_| rng.gen_range(-1.0..1.0) + shift).collect()
            })
            .collect();
        let y: Vec<u8> = (0..n).map(|i| (i % 2) as u8).collect();
        let perm = [2usize, 0, 3, 1];
        let permute =
            |rows: &[Vec<f64>]| -> Vec<Vec<f64>> {
                rows.iter().map(|r| perm.iter().map(|&j| r[j]).collect()).collect()
            };
        let xp = permute(&x);
        let probe: Vec<f64> = (0..4).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let probe_p: Vec<f64> = perm.iter().map(|&j| probe[j]).collect();

        let lr = train_logreg(&x, &y, 1.0).unwrap();
        let lr_p = train_logreg(&xp, &y, 1.0).unwrap();
        prop_assert!((lr.score(&probe) - lr_p.score(&probe_p)).abs() < 1e-6);

        let svm = train_svm_rbf(&x, &y, 1.0, 0.5).unwrap();
        let svm_p = train_svm_rbf(&xp, &y, 1.0, 0.5).unwrap();
        prop_assert!((svm.score(&probe) - svm_p.score(&probe_p)).abs() < 1e-6);
    }
}
