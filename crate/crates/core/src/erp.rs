//! Condition-wise ERPs and FRN quantification.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::preprocess::{EpochSet, RejectReason, Rejection};
use crate::stats::{paired_ttest, ComparisonResult};

pub const DEFAULT_ROI: [&str; 4] = ["Fz", "FCz", "F3", "F4"];

const TIME_EPS: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FrnWindow {
    pub start_ms: f64,
    pub end_ms: f64,
}

impl Default for FrnWindow {
    fn default() -> Self {
        Self {
            start_ms: 120.0,
            end_ms: 220.0,
        }
    }
}

impl FrnWindow {
    /// Indices of `times` inside the closed window, or an error if the window
    /// reaches past the axis.
    pub fn indices(&self, times: &[f64]) -> Result<std::ops::Range<usize>> {
        let (Some(&first), Some(&last)) = (times.first(), times.last()) else {
            return Err(Error::EmptyInput("empty time axis".into()));
        };
        if !(self.start_ms <= self.end_ms)
            || self.start_ms < first - TIME_EPS
            || self.end_ms > last + TIME_EPS
        {
            return Err(Error::InvalidConfig(format!(
                "window [{}, {}] ms outside waveform extent [{first}, {last}] ms",
                self.start_ms, self.end_ms
            )));
        }
        let lo = times
            .iter()
            .position(|&t| t >= self.start_ms - TIME_EPS)
            .unwrap_or(times.len());
        let hi = times
            .iter()
            .rposition(|&t| t <= self.end_ms + TIME_EPS)
            .map_or(0, |i| i + 1);
        if lo >= hi {
            return Err(Error::EmptyInput("window contains no samples".into()));
        }
        Ok(lo..hi)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErpWaveform {
    pub roi_label: String,
    pub channels: Vec<String>,
    pub times_ms: Vec<f64>,
    pub values: Vec<f64>,
    pub n_epochs: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FrnMeasure {
    pub peak_amplitude_uv: f64,
    pub peak_latency_ms: f64,
    pub window: FrnWindow,
    pub area_uv_ms: f64,
}

fn trapezoid(times: &[f64], values: &[f64]) -> f64 {
    times
        .windows(2)
        .zip(values.windows(2))
        .map(|(t, v)| (t[1] - t[0]) * (v[0] + v[1]) * 0.5)
        .sum()
}

/// Subsamples the larger set, uniformly without replacement, down to the
/// size of the smaller one. Dropped epochs are logged as `subsampled`.
pub fn match_trial_counts(a: &EpochSet, b: &EpochSet, seed: u64) -> Result<(EpochSet, EpochSet)> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::EmptyInput("cannot match trial counts with an empty set".into()));
    }
    let target = a.len().min(b.len());
    let shrink = |set: &EpochSet| {
        if set.len() == target {
            return set.clone();
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut keep = rand::seq::index::sample(&mut rng, set.len(), target).into_vec();
        keep.sort_unstable();
        let mut out = set.clone();
        out.epochs = Vec::with_capacity(target);
        let mut next = keep.iter().peekable();
        for (i, e) in set.epochs.iter().enumerate() {
            if next.peek() == Some(&&i) {
                next.next();
                out.epochs.push(e.clone());
            } else {
                out.rejection_log.push(Rejection {
                    session: e.session,
                    marker: e.marker,
                    reason: RejectReason::Subsampled,
                });
            }
        }
        out
    };
    Ok((shrink(a), shrink(b)))
}

/// Mean over ROI channels within each epoch, then over epochs.
pub fn average_erp<S: AsRef<str>>(set: &EpochSet, roi: &[S], roi_label: &str) -> Result<ErpWaveform> {
    if set.is_empty() {
        return Err(Error::EmptyInput("no epochs to average".into()));
    }
    if roi.is_empty() {
        return Err(Error::EmptyInput("empty region of interest".into()));
    }
    let idx: Vec<usize> = roi
        .iter()
        .map(|c| set.channel_index(c.as_ref()))
        .collect::<Result<_>>()?;
    let first = &set.epochs[0];
    let n = first.n_samples;
    let mut values = vec![0.0; n];
    for e in &set.epochs {
        if e.n_samples != n {
            return Err(Error::MismatchedAxes("epochs differ in length".into()));
        }
        for &ch in &idx {
            for (acc, v) in values.iter_mut().zip(e.channel(ch)) {
                *acc += v;
            }
        }
    }
    let norm = 1.0 / (idx.len() * set.len()) as f64;
    for v in &mut values {
        *v *= norm;
    }
    Ok(ErpWaveform {
        roi_label: roi_label.to_string(),
        channels: roi.iter().map(|c| c.as_ref().to_string()).collect(),
        times_ms: first.times_ms(),
        values,
        n_epochs: set.len(),
    })
}

/// Most negative sample in the closed window (earliest on ties) and the
/// trapezoidal signed area over the window.
pub fn frn_peak(w: &ErpWaveform, window: FrnWindow) -> Result<FrnMeasure> {
    let range = window.indices(&w.times_ms)?;
    let mut best = range.start;
    for i in range.clone() {
        if w.values[i] < w.values[best] {
            best = i;
        }
    }
    Ok(FrnMeasure {
        peak_amplitude_uv: w.values[best],
        peak_latency_ms: w.times_ms[best],
        window,
        area_uv_ms: trapezoid(&w.times_ms[range.clone()], &w.values[range]),
    })
}

fn check_axes(wa: &ErpWaveform, wb: &ErpWaveform) -> Result<()> {
    if wa.times_ms.len() != wb.times_ms.len()
        || wa
            .times_ms
            .iter()
            .zip(&wb.times_ms)
            .any(|(a, b)| (a - b).abs() > TIME_EPS)
    {
        return Err(Error::MismatchedAxes(format!(
            "`{}` and `{}` have different time axes",
            wa.roi_label, wb.roi_label
        )));
    }
    Ok(())
}

/// `wa - wb`, labelled `a - b`.
pub fn difference_waveform(wa: &ErpWaveform, wb: &ErpWaveform) -> Result<ErpWaveform> {
    check_axes(wa, wb)?;
    Ok(ErpWaveform {
        roi_label: format!("{} - {}", wa.roi_label, wb.roi_label),
        channels: wa.channels.clone(),
        times_ms: wa.times_ms.clone(),
        values: wa.values.iter().zip(&wb.values).map(|(a, b)| a - b).collect(),
        n_epochs: wa.n_epochs.min(wb.n_epochs),
    })
}

/// Trapezoidal integral of `wa - wb` over the window, in µV·ms.
pub fn area_difference(wa: &ErpWaveform, wb: &ErpWaveform, window: FrnWindow) -> Result<f64> {
    let diff = difference_waveform(wa, wb)?;
    let range = window.indices(&diff.times_ms)?;
    Ok(trapezoid(&diff.times_ms[range.clone()], &diff.values[range]))
}

/// Mean over epochs of each channel's window mean.
fn channel_window_means(set: &EpochSet, window: FrnWindow) -> Result<Vec<f64>> {
    if set.is_empty() {
        return Err(Error::EmptyInput("participant has no epochs".into()));
    }
    let times = set.epochs[0].times_ms();
    let range = window.indices(&times)?;
    let n_ch = set.channel_names.len();
    let mut out = vec![0.0; n_ch];
    for e in &set.epochs {
        for (ch, acc) in out.iter_mut().enumerate() {
            let row = &e.channel(ch)[range.clone()];
            *acc += row.iter().sum::<f64>() / row.len() as f64;
        }
    }
    for v in &mut out {
        *v /= set.len() as f64;
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelComparison {
    pub channel: String,
    pub result: ComparisonResult,
}

/// Paired test across participants of per-channel window-mean amplitude.
///
/// Sorted by p ascending (channel order breaks ties). Channels whose
/// differences have zero variance are reported as non-significant.
pub fn channel_significance_map(
    cond_a: &[EpochSet],
    cond_b: &[EpochSet],
    window: FrnWindow,
) -> Result<Vec<ChannelComparison>> {
    if cond_a.len() != cond_b.len() {
        return Err(Error::InvalidConfig(format!(
            "{} participants in condition A, {} in condition B",
            cond_a.len(),
            cond_b.len()
        )));
    }
    if cond_a.len() < 2 {
        return Err(Error::EmptyInput(format!(
            "channel significance needs at least 2 participants, got {}",
            cond_a.len()
        )));
    }
    let channels = cond_a[0].channel_names.clone();
    if cond_a.iter().chain(cond_b).any(|s| s.channel_names != channels) {
        return Err(Error::InvalidConfig("participants differ in channel layout".into()));
    }
    let a: Vec<Vec<f64>> = cond_a
        .iter()
        .map(|s| channel_window_means(s, window))
        .collect::<Result<_>>()?;
    let b: Vec<Vec<f64>> = cond_b
        .iter()
        .map(|s| channel_window_means(s, window))
        .collect::<Result<_>>()?;
    let mut out = Vec::with_capacity(channels.len());
    for (ch, name) in channels.iter().enumerate() {
        let xs: Vec<f64> = a.iter().map(|p| p[ch]).collect();
        let ys: Vec<f64> = b.iter().map(|p| p[ch]).collect();
        let result = match paired_ttest(&xs, &ys) {
            Ok(r) => r.with_label(name.clone()),
            Err(Error::Degenerate(_)) => {
                let md = xs.iter().zip(&ys).map(|(x, y)| x - y).sum::<f64>() / xs.len() as f64;
                ComparisonResult::degenerate(name.clone(), xs.len(), md)
            }
            Err(e) => return Err(e),
        };
        out.push((ch, ChannelComparison {
            channel: name.clone(),
            result,
        }));
    }
    out.sort_by(|(ia, a), (ib, b)| {
        a.result
            .p_value
            .total_cmp(&b.result.p_value)
            .then(ia.cmp(ib))
    });
    Ok(out.into_iter().map(|(_, c)| c).collect())
}

/// Paired test across participants of the ROI ERP area in `window`.
pub fn roi_area_comparison<S: AsRef<str>>(
    cond_a: &[EpochSet],
    cond_b: &[EpochSet],
    roi: &[S],
    window: FrnWindow,
    label: &str,
) -> Result<ComparisonResult> {
    if cond_a.len() != cond_b.len() {
        return Err(Error::InvalidConfig("unequal participant counts".into()));
    }
    let area = |set: &EpochSet| -> Result<f64> {
        Ok(frn_peak(&average_erp(set, roi, label)?, window)?.area_uv_ms)
    };
    let xs: Vec<f64> = cond_a.iter().map(area).collect::<Result<_>>()?;
    let ys: Vec<f64> = cond_b.iter().map(area).collect::<Result<_>>()?;
    Ok(paired_ttest(&xs, &ys)?.with_label(label))
}

/// Unweighted mean of several waveforms with a shared axis; `n_epochs` is summed.
pub fn grand_average(waves: &[ErpWaveform], label: &str) -> Result<ErpWaveform> {
    let Some(first) = waves.first() else {
        return Err(Error::EmptyInput("no waveforms to average".into()));
    };
    let mut values = vec![0.0; first.values.len()];
    for w in waves {
        check_axes(first, w)?;
        for (acc, v) in values.iter_mut().zip(&w.values) {
            *acc += v;
        }
    }
    for v in &mut values {
        *v /= waves.len() as f64;
    }
    Ok(ErpWaveform {
        roi_label: label.to_string(),
        channels: first.channels.clone(),
        times_ms: first.times_ms.clone(),
        values,
        n_epochs: waves.iter().map(|w| w.n_epochs).sum(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::preprocess::{Epoch, EpochWindow};
    use crate::signal::{Condition, DLevel, EventCode, EventMarker, HandStyle};
    use proptest::prelude::*;
    use rand::Rng;
    use rand_distr::{Distribution, StandardNormal};

    fn waveform(values: Vec<f64>) -> ErpWaveform {
        let n = values.len();
        ErpWaveform {
            roi_label: "roi".into(),
            channels: vec!["Fz".into()],
            times_ms: (0..n).map(|k| k as f64 - 200.0).collect(),
            values,
            n_epochs: 1,
        }
    }

    fn make_set(seed: u64, n_epochs: usize, channels: &[&str], fill: impl Fn(&mut ChaCha8Rng, usize, usize) -> f64) -> EpochSet {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let window = EpochWindow::default();
        let mut set = EpochSet::empty(channels.iter().map(|s| s.to_string()).collect(), 1000.0, window);
        for i in 0..n_epochs {
            let c = Condition { d_level: DLevel::D1, style: Some(HandStyle::S1), block_id: 0, trial_id: i as u32 };
            let mut data = Vec::with_capacity(channels.len() * 700);
            for ch in 0..channels.len() {
                for k in 0..700 {
                    data.push(fill(&mut rng, ch, k));
                }
            }
            set.epochs.push(Epoch {
                condition: c,
                session: 0,
                marker: EventMarker { sample_index: 1000 * (i + 1), code: EventCode::FeedbackOnset, condition: Some(c) },
                sample_rate_hz: 1000.0,
                pre_samples: 200,
                n_channels: channels.len(),
                n_samples: 700,
                data,
            });
        }
        set
    }

    #[test]
    fn matching_subsamples_larger_set() {
        let a = make_set(1, 90, &["Fz"], |r, _, _| r.random());
        let b = make_set(2, 30, &["Fz"], |r, _, _| r.random());
        let (ma, mb) = match_trial_counts(&a, &b, 7).unwrap();
        assert_eq!(ma.len(), 30);
        assert_eq!(mb, b);
        assert_eq!(ma.attempted(), 90);
        let ids: Vec<u32> = ma.epochs.iter().map(|e| e.condition.trial_id).collect();
        assert!(ids.windows(2).all(|w| w[0] < w[1]));
        for e in &ma.epochs {
            assert_eq!(e, &a.epochs[e.condition.trial_id as usize]);
        }
        assert_eq!(match_trial_counts(&a, &b, 7).unwrap().0, ma);
        assert_ne!(match_trial_counts(&a, &b, 8).unwrap().0, ma);
        let (sa, sb) = match_trial_counts(&b, &b, 3).unwrap();
        assert_eq!((sa, sb), (b.clone(), b.clone()));
        let empty = EpochSet::empty(vec!["Fz".into()], 1000.0, EpochWindow::default());
        assert!(match_trial_counts(&empty, &b, 0).is_err());
    }

    #[test]
    fn averaging_identical_epochs_returns_roi_mean() {
        let set = make_set(0, 5, &["Fz", "Cz"], |_, ch, k| if ch == 0 { k as f64 } else { -(k as f64) + 2.0 });
        let w = average_erp(&set, &["Fz", "Cz"], "roi").unwrap();
        assert!(w.values.iter().all(|&v| (v - 1.0).abs() < 1e-12));
        assert_eq!(w.n_epochs, 5);
        assert_eq!(w.times_ms[0], -200.0);
        assert_eq!(w.times_ms[699], 499.0);
        assert!(average_erp(&set, &["Oz"], "roi").is_err());
        assert!(average_erp::<&str>(&set, &[], "roi").is_err());
    }

    #[test]
    fn averaging_matches_double_loop_oracle() {
        let set = make_set(4, 3, &["Fz", "Cz", "Pz"], |r, _, _| r.random_range(-10.0..10.0));
        let w = average_erp(&set, &["Pz", "Fz"], "roi").unwrap();
        for k in 0..700 {
            let mut acc = 0.0;
            for e in &set.epochs {
                acc += (e.channel(2)[k] + e.channel(0)[k]) / 2.0;
            }
            assert!((w.values[k] - acc / 3.0).abs() < 1e-12);
        }
    }

    #[test]
    fn averaging_reduces_noise_by_sqrt_n() {
        let set = make_set(5, 100, &["Fz"], |r, _, _| {
            let z: f64 = StandardNormal.sample(r);
            10.0 * z
        });
        let w = average_erp(&set, &["Fz"], "roi").unwrap();
        let m = w.values.iter().sum::<f64>() / 700.0;
        let sd = (w.values.iter().map(|v| (v - m).powi(2)).sum::<f64>() / 699.0).sqrt();
        assert!((sd - 1.0).abs() < 0.2, "sd {sd}");
    }

    #[test]
    fn peak_of_clean_gaussian() {
        let values = (0..700)
            .map(|k| {
                let t = k as f64 - 200.0;
                -5.0 * (-0.5 * ((t - 170.0) / 25.0).powi(2)).exp()
            })
            .collect();
        let m = frn_peak(&waveform(values), FrnWindow::default()).unwrap();
        assert_eq!(m.peak_amplitude_uv, -5.0);
        assert_eq!(m.peak_latency_ms, 170.0);
    }

    #[test]
    fn flat_waveform_ties_to_window_start() {
        let m = frn_peak(&waveform(vec![0.0; 700]), FrnWindow::default()).unwrap();
        assert_eq!(m.peak_amplitude_uv, 0.0);
        assert_eq!(m.peak_latency_ms, 120.0);
        assert_eq!(m.area_uv_ms, 0.0);
    }

    #[test]
    fn window_outside_extent_is_an_error() {
        let w = waveform(vec![0.0; 300]); // -200..99 ms
        assert!(frn_peak(&w, FrnWindow::default()).is_err());
        assert!(frn_peak(&w, FrnWindow { start_ms: -300.0, end_ms: 0.0 }).is_err());
    }

    #[test]
    fn peak_and_area_match_brute_force() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        for _ in 0..20 {
            let values: Vec<f64> = (0..700).map(|_| rng.random_range(-8.0..8.0)).collect();
            let w = waveform(values.clone());
            let m = frn_peak(&w, FrnWindow::default()).unwrap();
            // window 120..=220 ms is indices 320..=420
            let mut best = 320;
            for i in 320..=420 {
                if values[i] < values[best] {
                    best = i;
                }
            }
            let mut area = 0.0;
            for i in 320..420 {
                area += 0.5 * (values[i] + values[i + 1]);
            }
            assert_eq!(m.peak_latency_ms, best as f64 - 200.0);
            assert_eq!(m.peak_amplitude_uv, values[best]);
            assert!((m.area_uv_ms - area).abs() < 1e-9);
            assert!(values[320..=420].iter().all(|&v| m.peak_amplitude_uv <= v));
        }
    }

    #[test]
    fn area_difference_cases() {
        let w = waveform((0..700).map(|k| (k as f64 * 0.1).sin()).collect());
        assert_eq!(area_difference(&w, &w, FrnWindow::default()).unwrap(), 0.0);
        let shifted = waveform(w.values.iter().map(|v| v + 2.0).collect());
        let a = area_difference(&w, &shifted, FrnWindow::default()).unwrap();
        assert!((a + 200.0).abs() < 1e-9);
        let short = waveform(vec![0.0; 650]);
        assert!(matches!(area_difference(&w, &short, FrnWindow::default()), Err(Error::MismatchedAxes(_))));
    }

    #[test]
    fn area_difference_matches_refined_riemann_sum() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..10 {
            let a = waveform((0..700).map(|_| rng.random_range(-3.0..7.0)).collect());
            let b = waveform((0..700).map(|_| rng.random_range(-3.0..3.0)).collect());
            let got = area_difference(&a, &b, FrnWindow::default()).unwrap();
            // midpoint sum on a 0.1 ms grid of the linearly interpolated difference
            let mut oracle = 0.0;
            for i in 320..420 {
                for j in 0..10 {
                    let frac = (j as f64 + 0.5) / 10.0;
                    let d0 = a.values[i] - b.values[i];
                    let d1 = a.values[i + 1] - b.values[i + 1];
                    oracle += 0.1 * (d0 + frac * (d1 - d0));
                }
            }
            assert!(((got - oracle) / oracle).abs() < 0.005);
        }
    }

    #[test]
    fn channel_map_recovers_frontal_effect() {
        // Fz, FCz strong, F3 weight 0.6, Pz and O1 carry nothing
        let channels = ["Fz", "FCz", "F3", "Pz", "O1"];
        let weights = [1.0, 0.9, 0.6, 0.0, 0.0];
        let bump = |k: usize| -4.0 * (-0.5 * ((k as f64 - 370.0) / 25.0).powi(2)).exp();
        let mut a = Vec::new();
        let mut b = Vec::new();
        for p in 0..10u64 {
            a.push(make_set(100 + p, 20, &channels, |r, ch, k| {
                let z: f64 = StandardNormal.sample(r);
                2.0 * z + weights[ch] * bump(k)
            }));
            b.push(make_set(200 + p, 20, &channels, |r, _, _| {
                let z: f64 = StandardNormal.sample(r);
                2.0 * z
            }));
        }
        let map = channel_significance_map(&a, &b, FrnWindow::default()).unwrap();
        assert_eq!(map.len(), 5);
        assert!(map.windows(2).all(|w| w[0].result.p_value <= w[1].result.p_value));
        for c in &map {
            let w = weights[channels.iter().position(|n| *n == c.channel).unwrap()];
            if w > 0.5 {
                assert!(c.result.significant, "{} p={}", c.channel, c.result.p_value);
            } else {
                assert!(!c.result.significant, "{} p={}", c.channel, c.result.p_value);
            }
        }
        assert_eq!(channel_significance_map(&a, &b, FrnWindow::default()).unwrap(), map);
    }

    #[test]
    fn channel_map_identical_conditions_and_errors() {
        let sets: Vec<EpochSet> = (0..3).map(|p| make_set(p, 4, &["Fz", "Cz"], |r, _, _| r.random())).collect();
        let map = channel_significance_map(&sets, &sets, FrnWindow::default()).unwrap();
        for c in &map {
            assert_eq!(c.result.p_value, 1.0);
            assert!(!c.result.significant);
        }
        assert!(channel_significance_map(&sets[..1], &sets[..1], FrnWindow::default()).is_err());
        // constant nonzero offset: zero variance, reported as non-significant
        let shifted: Vec<EpochSet> = sets
            .iter()
            .map(|s| {
                let mut s = s.clone();
                for e in &mut s.epochs {
                    e.data.iter_mut().for_each(|v| *v = 1.0);
                }
                s
            })
            .collect();
        let zeros: Vec<EpochSet> = sets
            .iter()
            .map(|s| {
                let mut s = s.clone();
                for e in &mut s.epochs {
                    e.data.iter_mut().for_each(|v| *v = 0.0);
                }
                s
            })
            .collect();
        let map = channel_significance_map(&shifted, &zeros, FrnWindow::default()).unwrap();
        assert!(map.iter().all(|c| c.result.degenerate && !c.result.significant));
    }

    proptest! {
        #[test]
        fn area_difference_is_antisymmetric(seed in 0u64..500) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let a = waveform((0..700).map(|_| rng.random_range(-5.0..5.0)).collect());
            let b = waveform((0..700).map(|_| rng.random_range(-5.0..5.0)).collect());
            let ab = area_difference(&a, &b, FrnWindow::default()).unwrap();
            let ba = area_difference(&b, &a, FrnWindow::default()).unwrap();
            prop_assert!((ab + ba).abs() < 1e-9);
        }

        #[test]
        fn average_is_permutation_invariant(seed in 0u64..200, perm in Just((0..6usize).collect::<Vec<_>>()).prop_shuffle()) {
            let set = make_set(seed, 6, &["Fz", "Cz"], |r, _, _| r.random_range(-10.0..10.0));
            let mut shuffled = set.clone();
            shuffled.epochs = perm.iter().map(|&i| set.epochs[i].clone()).collect();
            let a = average_erp(&set, &["Fz", "Cz"], "roi").unwrap();
            let b = average_erp(&shuffled, &["Fz", "Cz"], "roi").unwrap();
            for (x, y) in a.values.iter().zip(&b.values) {
                prop_assert!((x - y).abs() < 1e-12);
            }
        }

        #[test]
        fn matched_sets_are_equal_sized_subsets(na in 1usize..40, nb in 1usize..40, seed in 0u64..100) {
            let a = make_set(1, na, &["Fz"], |_, _, _| 0.0);
            let b = make_set(2, nb, &["Fz"], |_, _, _| 0.0);
            let (ma, mb) = match_trial_counts(&a, &b, seed).unwrap();
            prop_assert_eq!(ma.len(), na.min(nb));
            prop_assert_eq!(mb.len(), na.min(nb));
            for e in &ma.epochs {
                prop_assert!(a.epochs.contains(e));
            }
            for e in &mb.epochs {
                prop_assert!(b.epochs.contains(e));
            }
        }
    }
}
