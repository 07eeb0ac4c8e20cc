use std::sync::OnceLock;

use fesim::axon::SpikeTrainSet;
use fesim::config::ExperimentConfig;
use fesim::dsp::{correlation, rms};
use fesim::emg::{inject_hf_artifact, inject_lf_artifact, synthesize_emg, DriftConfig, EmgGridRecord, HfArtifactConfig, LfArtifactConfig};
use fesim::removal::{attenuation_db, detect_lf_artifacts, remove_hf, remove_lf, smooth_outliers, HfRemovalParams, LfRemovalParams};
use fesim::trial::{build_subject, voluntary_recording, Subject};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

struct Fixture {
    cfg: ExperimentConfig,
    clean: EmgGridRecord,
    rest: EmgGridRecord,
}

fn fixture() -> &'static Fixture {
    static F: OnceLock<Fixture> = OnceLock::new();
    F.get_or_init(|| {
        let cfg = ExperimentConfig::default();
        let subject: Subject = build_subject(&cfg, 0).unwrap();
        let clean = voluntary_recording(&cfg, &subject, 0.25, 4.0, 77).unwrap();
        let e = &cfg.emg;
        let rest = synthesize_emg(&SpikeTrainSet::empty(subject.units.len()), None, &subject.templates, e.layout, e.sample_rate, 1.0, e.noise, 78).unwrap();
        Fixture { cfg, clean, rest }
    })
}

fn lf_times(duration: f64, phase: f64) -> Vec<f64> {
    (0..).map(|k| phase + k as f64 / 30.0).take_while(|&t| t < duration - 0.01).collect()
}

fn replaced_windows(events: &[usize], len: usize, w: usize) -> Vec<bool> {
    let mut m = vec![false; len];
    for &e in events {
        let lo = e.saturating_sub(w / 2);
        m[lo..(lo + w).min(len)].iter_mut().for_each(|v| *v = true);
    }
    m
}

#[test]
fn lf_removal_recall_locality_and_attenuation() {
    let f = fixture();
    let times = lf_times(f.clean.duration(), 0.0123);
    let (dirty, truth) = inject_lf_artifact(&f.clean, &times, &LfArtifactConfig::default(), 5).unwrap();
    let params = LfRemovalParams::default();
    let (cleaned, report) = remove_lf(&dirty, &params, &f.rest.channels, 9).unwrap();
    let fs = f.clean.sample_rate;
    let truth_idx: Vec<usize> = truth.event_times.iter().map(|t| (t * fs).round() as usize).collect();
    let w = (params.replace_window * fs).round() as usize;
    let (mut ea, mut er) = (0.0, 0.0);
    for c in 0..dirty.channels.len() {
        let found = detect_lf_artifacts(&dirty.channels[c], fs, &params).unwrap();
        for e in &truth_idx {
            assert!(found.contains(e), "channel {c}: event at sample {e} missed");
        }
        assert_eq!(report.channels[c].events_detected, found.len());
        let inside = replaced_windows(&found, dirty.len(), w);
        for i in 0..dirty.len() {
            if !inside[i] {
                assert_eq!(cleaned.channels[c][i].to_bits(), dirty.channels[c][i].to_bits());
            }
        }
        ea += truth.artifact[c].iter().map(|v| v * v).sum::<f64>();
        er += cleaned.channels[c].iter().zip(&f.clean.channels[c]).map(|(y, x)| (y - x) * (y - x)).sum::<f64>();
    }
    let overall = 10.0 * (ea / er).log10();
    assert!(overall >= 20.0, "overall attenuation {overall:.1} dB");
}

#[test]
fn lf_removal_on_clean_record_reports_no_ground_truth() {
    let f = fixture();
    let (cleaned, report) = remove_lf(&f.clean, &LfRemovalParams::default(), &f.rest.channels, 1).unwrap();
    assert_eq!(cleaned.len(), f.clean.len());
    assert!(report.channels.iter().all(|c| c.attenuation_db.is_none()));
    assert!(report.channels.iter().all(|c| c.events_detected > 0));
}

#[test]
fn hf_removal_attenuates_and_preserves_emg() {
    let f = fixture();
    let (dirty, truth) = inject_hf_artifact(&f.clean, &f.cfg.artifacts.hf, 3).unwrap();
    let (cleaned, mut report) = remove_hf(&dirty, &HfRemovalParams::default()).unwrap();
    report.attach_ground_truth(&cleaned, &f.clean, &truth.artifact);
    assert!(cleaned.channels.iter().all(|c| c.len() == dirty.len()));
    let mut good = 0;
    for (c, r) in report.channels.iter().enumerate() {
        let att = r.attenuation_db.unwrap();
        let corr = correlation(&cleaned.channels[c], &f.clean.channels[c]);
        if att >= 20.0 && corr >= 0.9 {
            good += 1;
        }
    }
    let n = report.channels.len();
    assert!(good as f64 >= 0.95 * n as f64, "{good}/{n} channels meet 20 dB and r >= 0.9");
}

#[test]
fn hf_removal_without_drift_is_exact() {
    let f = fixture();
    let cfg = HfArtifactConfig { drift: DriftConfig::none(), ..f.cfg.artifacts.hf };
    let (_, truth) = inject_hf_artifact(&f.clean, &cfg, 3).unwrap();
    let artifact_only = EmgGridRecord { channels: truth.artifact.clone(), ..f.clean.clone() };
    let (cleaned, _) = remove_hf(&artifact_only, &HfRemovalParams::default()).unwrap();
    for (y, a) in cleaned.channels.iter().zip(&truth.artifact) {
        assert!(rms(y) <= 1e-6 * rms(a), "{} vs {}", rms(y), rms(a));
    }
}

#[test]
fn hf_removal_is_near_identity_on_clean_data() {
    // Subtracting the mean of 8 independent segments keeps sqrt(7/8) of
    // the EMG power; outlier smoothing then clips the largest MUAP peaks.
    let f = fixture();
    let (cleaned, _) = remove_hf(&f.clean, &HfRemovalParams::default()).unwrap();
    let floor = 1.0 - (7.0f64 / 8.0).sqrt();
    let mut change: Vec<f64> = cleaned.channels.iter().zip(&f.clean.channels).map(|(y, x)| (rms(x) - rms(y)) / rms(x)).collect();
    assert!(change.iter().all(|c| *c >= 0.9 * floor && *c <= 0.2), "{change:?}");
    change.sort_by(f64::total_cmp);
    assert!(change[change.len() / 2] <= 0.10, "median RMS change {}", change[change.len() / 2]);
}

#[test]
fn attenuation_is_infinite_for_perfect_cleaning() {
    assert!(attenuation_db(&[1.0, -1.0], &[0.5, 0.5], &[0.5, 0.5]).is_infinite());
}

/// Seeded Gaussian noise with its natural tail beyond 2.5 sigma redrawn,
/// plus `k` isolated spikes of 12 sigma.
fn spiked(seed: u64, k: usize, n: usize) -> (Vec<f64>, Vec<usize>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut x: Vec<f64> = (0..n)
        .map(|_| loop {
            let z: f64 = rng.sample(StandardNormal);
            if z.abs() <= 2.5 {
                break z;
            }
        })
        .collect();
    let mut at: Vec<usize> = Vec::new();
    while at.len() < k {
        let i = rng.random_range(0..n);
        if at.iter().all(|&j| i.abs_diff(j) > 1) {
            at.push(i);
        }
    }
    at.sort();
    for &i in &at {
        x[i] = if rng.random::<bool>() { 12.0 } else { -12.0 };
    }
    (x, at)
}

#[test]
fn outlier_smoothing_touches_only_spikes() {
    for k in 0..=20 {
        for seed in 0..5 {
            let (x, at) = spiked(seed * 100 + k as u64, k, 8192);
            let s = smooth_outliers(&x).unwrap();
            assert_eq!(s.replaced, at);
            for i in 0..x.len() {
                if at.contains(&i) {
                    let fill = match (i.checked_sub(1), (i + 1 < x.len()).then_some(i + 1)) {
                        (Some(a), Some(b)) => 0.5 * (x[a] + x[b]),
                        (Some(a), None) => x[a],
                        (None, Some(b)) => x[b],
                        (None, None) => unreachable!(),
                    };
                    assert_eq!(s.values[i], fill);
                } else {
                    assert_eq!(s.values[i].to_bits(), x[i].to_bits());
                }
            }
        }
    }
}

#[test]
fn outlier_smoothing_on_untruncated_noise_matches_rule() {
    // Plain Gaussian noise at n = 8192 has about 22 natural samples past
    // 3 sigma; the rule replaces those as well as the injected spikes.
    for seed in 0..10u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut x: Vec<f64> = (0..8192).map(|_| rng.sample(StandardNormal)).collect();
        x[100] = 15.0;
        x[4000] = -15.0;
        let n = x.len() as f64;
        let m = x.iter().sum::<f64>() / n;
        let sd = (x.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / (n - 1.0)).sqrt();
        let expected: Vec<usize> = (0..x.len()).filter(|&i| (x[i] - m).abs() > 3.0 * sd).collect();
        let s = smooth_outliers(&x).unwrap();
        assert_eq!(s.replaced, expected);
        assert!(s.replaced.contains(&100) && s.replaced.contains(&4000));
    }
}

#[test]
fn outlier_smoothing_identity_and_degenerate() {
    let x: Vec<f64> = (0..100).map(|i| (i as f64 * 0.3).sin()).collect();
    let s = smooth_outliers(&x).unwrap();
    assert!(s.replaced.is_empty());
    assert_eq!(s.values, x);
    assert!(smooth_outliers(&[]).is_err());
    let c = smooth_outliers(&[2.0; 10]).unwrap();
    assert!(c.replaced.is_empty() && !c.all_outliers);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn lf_removal_only_changes_window_samples(phase in 0.0f64..0.033, seed in 0u64..500) {
        let f = fixture();
        let short = f.clean.slice(0.0, 1.0);
        let (dirty, _) = inject_lf_artifact(&short, &lf_times(1.0, phase), &LfArtifactConfig::default(), seed).unwrap();
        let params = LfRemovalParams::default();
        let (cleaned, _) = remove_lf(&dirty, &params, &f.rest.channels, seed).unwrap();
        let w = (params.replace_window * short.sample_rate).round() as usize;
        for c in [0usize, 17, 127] {
            let found = detect_lf_artifacts(&dirty.channels[c], short.sample_rate, &params).unwrap();
            let inside = replaced_windows(&found, dirty.len(), w);
            for i in 0..dirty.len() {
                if !inside[i] {
                    prop_assert_eq!(cleaned.channels[c][i].to_bits(), dirty.channels[c][i].to_bits());
                }
            }
        }
    }
}
