//! Offline conditioning chain: zero-phase Butterworth band-pass on continuous
//! data, stimulus-locked epoching, baseline correction and threshold rejection.

use std::f64::consts::PI;

use rustfft::num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::signal::{Condition, EegRecording, EventCode, EventMarker};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FilterSpec {
    pub high_pass_hz: f64,
    pub low_pass_hz: f64,
    /// Order of the low-pass prototype; the band-pass has twice as many poles.
    pub order: usize,
    pub zero_phase: bool,
    /// Odd-reflection padding at each end, seconds.
    pub pad_s: f64,
}

impl Default for FilterSpec {
    fn default() -> Self {
        Self {
            high_pass_hz: 1.0,
            low_pass_hz: 40.0,
            order: 4,
            zero_phase: true,
            pad_s: 1.0,
        }
    }
}

impl FilterSpec {
    pub fn validate(&self, sample_rate_hz: f64) -> Result<()> {
        let nyquist = sample_rate_hz / 2.0;
        if !(self.high_pass_hz > 0.0
            && self.high_pass_hz < self.low_pass_hz
            && self.low_pass_hz < nyquist)
        {
            return Err(Error::InvalidConfig(format!(
                "band edges must satisfy 0 < {} < {} < {nyquist}",
                self.high_pass_hz, self.low_pass_hz
            )));
        }
        if self.order < 2 || self.order % 2 != 0 {
            return Err(Error::InvalidConfig(format!(
                "filter order must be even and >= 2, got {}",
                self.order
            )));
        }
        if !(self.pad_s >= 0.0) {
            return Err(Error::InvalidConfig("negative padding".into()));
        }
        Ok(())
    }
}

/// Second-order section in transposed direct form II, `a0 = 1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Biquad {
    pub b: [f64; 3],
    pub a: [f64; 2],
}

impl Biquad {
    fn response(&self, z: Complex64) -> Complex64 {
        let zi = z.inv();
        let zi2 = zi * zi;
        (self.b[0] + self.b[1] * zi + self.b[2] * zi2) / (1.0 + self.a[0] * zi + self.a[1] * zi2)
    }

    fn dc_gain(&self) -> f64 {
        (self.b[0] + self.b[1] + self.b[2]) / (1.0 + self.a[0] + self.a[1])
    }

    /// State that makes a unit step input a steady state.
    fn step_state(&self) -> [f64; 2] {
        let g = self.dc_gain();
        let z2 = self.b[2] - self.a[1] * g;
        let z1 = self.b[1] - self.a[0] * g + z2;
        [z1, z2]
    }

    #[inline(always)]
    fn tick(&self, input: f64, state: &mut [f64; 2]) -> f64 {
        let y = self.b[0] * input + state[0];
        state[0] = self.b[1] * input - self.a[0] * y + state[1];
        state[1] = self.b[2] * input - self.a[1] * y;
        y
    }
}

/// Digital Butterworth band-pass as a cascade of second-order sections.
#[derive(Debug, Clone, PartialEq)]
pub struct BandpassFilter {
    sections: Vec<Biquad>,
    sample_rate_hz: f64,
    spec: FilterSpec,
}

impl BandpassFilter {
    /// Analog prototype, band-pass transform at pre-warped edges, then bilinear transform.
    pub fn design(spec: &FilterSpec, sample_rate_hz: f64) -> Result<Self> {
        spec.validate(sample_rate_hz)?;
        let fs2 = 2.0 * sample_rate_hz;
        let w1 = fs2 * (PI * spec.high_pass_hz / sample_rate_hz).tan();
        let w2 = fs2 * (PI * spec.low_pass_hz / sample_rate_hz).tan();
        let bw = w2 - w1;
        let w0_sq = w1 * w2;
        let n = spec.order;

        let mut poles = Vec::with_capacity(2 * n);
        for k in 0..n {
            let theta = PI * (2 * k + n + 1) as f64 / (2 * n) as f64;
            let p = Complex64::from_polar(1.0, theta);
            let half = p * (bw / 2.0);
            let root = (half * half - w0_sq).sqrt();
            for s in [half + root, half - root] {
                poles.push((fs2 + s) / (fs2 - s));
            }
        }
        let mut upper: Vec<Complex64> = poles.into_iter().filter(|z| z.im > 0.0).collect();
        if upper.len() != n {
            return Err(Error::InvalidConfig(format!(
                "band-pass design produced {} complex pole pairs, expected {n}",
                upper.len()
            )));
        }
        upper.sort_by(|a, b| a.arg().total_cmp(&b.arg()).then(a.norm().total_cmp(&b.norm())));

        let mut sections: Vec<Biquad> = upper
            .iter()
            .map(|z| Biquad {
                b: [1.0, 0.0, -1.0],
                a: [-2.0 * z.re, z.norm_sqr()],
            })
            .collect();

        // Unity gain at the (warped) geometric centre frequency.
        let wc = 2.0 * (w0_sq.sqrt() / fs2).atan();
        let zc = Complex64::from_polar(1.0, wc);
        let mag: f64 = sections.iter().map(|s| s.response(zc).norm()).product();
        let per_section = mag.powf(-1.0 / n as f64);
        for s in &mut sections {
            for b in &mut s.b {
                *b *= per_section;
            }
        }
        Ok(Self {
            sections,
            sample_rate_hz,
            spec: *spec,
        })
    }

    pub fn sections(&self) -> &[Biquad] {
        &self.sections
    }

    /// Single-pass magnitude response at `freq_hz`.
    pub fn magnitude(&self, freq_hz: f64) -> f64 {
        let z = Complex64::from_polar(1.0, 2.0 * PI * freq_hz / self.sample_rate_hz);
        self.sections.iter().map(|s| s.response(z).norm()).product()
    }

    /// Forward pass with steady-state initial conditions scaled to `x[0]`.
    /// All sections run in one sweep so their recurrences overlap.
    pub fn filter_forward(&self, x: &mut [f64]) {
        let mut level = x.first().copied().unwrap_or(0.0);
        let mut states: Vec<[f64; 2]> = self
            .sections
            .iter()
            .map(|s| {
                let zi = s.step_state();
                let st = [zi[0] * level, zi[1] * level];
                level *= s.dc_gain();
                st
            })
            .collect();
        match self.sections.as_slice() {
            [s0, s1, s2, s3] => {
                let (mut z0, mut z1, mut z2, mut z3) = (states[0], states[1], states[2], states[3]);
                for v in x.iter_mut() {
                    let y = s0.tick(*v, &mut z0);
                    let y = s1.tick(y, &mut z1);
                    let y = s2.tick(y, &mut z2);
                    *v = s3.tick(y, &mut z3);
                }
            }
            sections => {
                for v in x.iter_mut() {
                    let mut y = *v;
                    for (s, z) in sections.iter().zip(states.iter_mut()) {
                        y = s.tick(y, z);
                    }
                    *v = y;
                }
            }
        }
    }

    pub fn pad_len(&self) -> usize {
        (self.spec.pad_s * self.sample_rate_hz).round() as usize
    }

    /// Filters one channel in place, zero-phase when the spec asks for it.
    pub fn apply(&self, x: &mut [f64]) -> Result<()> {
        let pad = self.pad_len();
        let n = x.len();
        if n < 2 * pad || n < 2 {
            return Err(Error::TooShort {
                n_samples: n,
                required: (2 * pad).max(2),
            });
        }
        if !self.spec.zero_phase {
            self.filter_forward(x);
            return Ok(());
        }
        let mut ext = Vec::with_capacity(n + 2 * pad);
        let first = x[0];
        let last = x[n - 1];
        ext.extend((1..=pad).rev().map(|i| 2.0 * first - x[i]));
        ext.extend_from_slice(x);
        ext.extend((1..=pad).map(|i| 2.0 * last - x[n - 1 - i]));
        self.filter_forward(&mut ext);
        ext.reverse();
        self.filter_forward(&mut ext);
        ext.reverse();
        x.copy_from_slice(&ext[pad..pad + n]);
        Ok(())
    }

    pub fn apply_recording(&self, rec: &mut EegRecording) -> Result<()> {
        for ch in 0..rec.n_channels() {
            self.apply(rec.channel_mut(ch))?;
        }
        Ok(())
    }
}

pub fn bandpass(rec: &EegRecording, spec: &FilterSpec) -> Result<EegRecording> {
    let filter = BandpassFilter::design(spec, rec.sample_rate_hz())?;
    let mut out = rec.clone();
    filter.apply_recording(&mut out)?;
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EpochWindow {
    pub pre_ms: f64,
    pub post_ms: f64,
}

impl Default for EpochWindow {
    fn default() -> Self {
        Self {
            pre_ms: 200.0,
            post_ms: 500.0,
        }
    }
}

impl EpochWindow {
    pub fn pre_samples(&self, sample_rate_hz: f64) -> usize {
        (self.pre_ms * sample_rate_hz / 1000.0).round() as usize
    }

    pub fn post_samples(&self, sample_rate_hz: f64) -> usize {
        (self.post_ms * sample_rate_hz / 1000.0).round() as usize
    }

    pub fn n_samples(&self, sample_rate_hz: f64) -> usize {
        ((self.pre_ms + self.post_ms) * sample_rate_hz / 1000.0).round() as usize
    }

    /// Pre-stimulus interval `[-pre_ms, 0)`.
    pub fn baseline(&self) -> (f64, f64) {
        (-self.pre_ms, 0.0)
    }

    pub fn validate(&self) -> Result<()> {
        if self.pre_ms > 0.0 && self.post_ms > 0.0 {
            Ok(())
        } else {
            Err(Error::InvalidConfig(format!(
                "epoch window needs positive pre/post, got {}/{}",
                self.pre_ms, self.post_ms
            )))
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Epoch {
    pub condition: Condition,
    pub session: u32,
    pub marker: EventMarker,
    pub sample_rate_hz: f64,
    pub pre_samples: usize,
    pub n_channels: usize,
    pub n_samples: usize,
    /// Channel-major.
    pub data: Vec<f64>,
}

impl Epoch {
    pub fn channel(&self, ch: usize) -> &[f64] {
        &self.data[ch * self.n_samples..(ch + 1) * self.n_samples]
    }

    pub fn channel_mut(&mut self, ch: usize) -> &mut [f64] {
        &mut self.data[ch * self.n_samples..(ch + 1) * self.n_samples]
    }

    pub fn time_ms(&self, k: usize) -> f64 {
        (k as f64 - self.pre_samples as f64) * 1000.0 / self.sample_rate_hz
    }

    pub fn times_ms(&self) -> Vec<f64> {
        (0..self.n_samples).map(|k| self.time_ms(k)).collect()
    }

    /// Sample indices whose time lies in `[start_ms, end_ms)`.
    pub fn index_range(&self, start_ms: f64, end_ms: f64) -> std::ops::Range<usize> {
        let eps = 1e-9;
        let lo = (0..self.n_samples)
            .find(|&k| self.time_ms(k) >= start_ms - eps)
            .unwrap_or(self.n_samples);
        let hi = (lo..self.n_samples)
            .find(|&k| self.time_ms(k) >= end_ms - eps)
            .unwrap_or(self.n_samples);
        lo..hi
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum RejectReason {
    PreBoundary,
    PostBoundary,
    Untagged,
    Artifact { channel: String, peak_uv: f64 },
    Subsampled,
}

impl RejectReason {
    pub fn label(&self) -> &'static str {
        match self {
            RejectReason::PreBoundary => "pre-boundary",
            RejectReason::PostBoundary => "post-boundary",
            RejectReason::Untagged => "untagged",
            RejectReason::Artifact { .. } => "artifact",
            RejectReason::Subsampled => "subsampled",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Rejection {
    pub session: u32,
    pub marker: EventMarker,
    pub reason: RejectReason,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpochSet {
    pub channel_names: Vec<String>,
    pub sample_rate_hz: f64,
    pub window: EpochWindow,
    pub epochs: Vec<Epoch>,
    pub rejection_log: Vec<Rejection>,
}

impl EpochSet {
    pub fn empty(channel_names: Vec<String>, sample_rate_hz: f64, window: EpochWindow) -> Self {
        Self {
            channel_names,
            sample_rate_hz,
            window,
            epochs: Vec::new(),
            rejection_log: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.epochs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.epochs.is_empty()
    }

    pub fn attempted(&self) -> usize {
        self.epochs.len() + self.rejection_log.len()
    }

    pub fn channel_index(&self, label: &str) -> Result<usize> {
        self.channel_names
            .iter()
            .position(|c| c == label)
            .ok_or_else(|| Error::UnknownChannel(label.to_string()))
    }

    /// Epochs (and rejections) whose condition satisfies `pred`.
    pub fn filter(&self, pred: impl Fn(&Condition) -> bool) -> EpochSet {
        EpochSet {
            channel_names: self.channel_names.clone(),
            sample_rate_hz: self.sample_rate_hz,
            window: self.window,
            epochs: self
                .epochs
                .iter()
                .filter(|e| pred(&e.condition))
                .cloned()
                .collect(),
            rejection_log: self
                .rejection_log
                .iter()
                .filter(|r| r.marker.condition.as_ref().is_some_and(&pred))
                .cloned()
                .collect(),
        }
    }

    /// Appends another set with the same channels and window.
    pub fn extend(&mut self, other: EpochSet) -> Result<()> {
        if other.channel_names != self.channel_names
            || other.window != self.window
            || other.sample_rate_hz != self.sample_rate_hz
        {
            return Err(Error::MismatchedAxes(
                "epoch sets differ in channels, window or sample rate".into(),
            ));
        }
        self.epochs.extend(other.epochs);
        self.rejection_log.extend(other.rejection_log);
        Ok(())
    }
}

/// Cuts `[-pre, +post)` around each marker with a code in `codes`.
///
/// Markers whose window does not fit in the recording are logged, not fatal.
pub fn extract_epochs(
    rec: &EegRecording,
    markers: &[EventMarker],
    window: &EpochWindow,
    codes: &[EventCode],
) -> EpochSet {
    extract_session_epochs(rec, markers, window, codes, 0)
}

pub fn extract_session_epochs(
    rec: &EegRecording,
    markers: &[EventMarker],
    window: &EpochWindow,
    codes: &[EventCode],
    session: u32,
) -> EpochSet {
    let fs = rec.sample_rate_hz();
    let pre = window.pre_samples(fs);
    let len = window.n_samples(fs);
    let mut set = EpochSet::empty(rec.layout().names().to_vec(), fs, *window);
    for m in markers.iter().filter(|m| codes.contains(&m.code)) {
        let reject = |reason| Rejection {
            session,
            marker: *m,
            reason,
        };
        let Some(condition) = m.condition else {
            set.rejection_log.push(reject(RejectReason::Untagged));
            continue;
        };
        if m.sample_index < pre {
            set.rejection_log.push(reject(RejectReason::PreBoundary));
            continue;
        }
        let start = m.sample_index - pre;
        if start + len > rec.n_samples() {
            set.rejection_log.push(reject(RejectReason::PostBoundary));
            continue;
        }
        let mut data = Vec::with_capacity(rec.n_channels() * len);
        for row in rec.rows() {
            data.extend_from_slice(&row[start..start + len]);
        }
        set.epochs.push(Epoch {
            condition,
            session,
            marker: *m,
            sample_rate_hz: fs,
            pre_samples: pre,
            n_channels: rec.n_channels(),
            n_samples: len,
            data,
        });
    }
    set
}

/// Subtracts, per channel, the mean over samples with time in `[start_ms, end_ms)`.
pub fn baseline_correct(epoch: &Epoch, baseline: (f64, f64)) -> Result<Epoch> {
    let mut out = epoch.clone();
    baseline_correct_in_place(&mut out, baseline)?;
    Ok(out)
}

pub fn baseline_correct_in_place(epoch: &mut Epoch, baseline: (f64, f64)) -> Result<()> {
    let (start, end) = baseline;
    let t0 = epoch.time_ms(0);
    let t_end = epoch.time_ms(epoch.n_samples);
    if !(start < end && start >= t0 - 1e-9 && end <= t_end + 1e-9) {
        return Err(Error::InvalidConfig(format!(
            "baseline [{start}, {end}) outside epoch [{t0}, {t_end})"
        )));
    }
    let range = epoch.index_range(start, end);
    if range.is_empty() {
        return Err(Error::InvalidConfig("baseline contains no samples".into()));
    }
    let count = range.len() as f64;
    for ch in 0..epoch.n_channels {
        let row = epoch.channel_mut(ch);
        let mean = row[range.clone()].iter().sum::<f64>() / count;
        for v in row.iter_mut() {
            *v -= mean;
        }
    }
    Ok(())
}

pub fn baseline_correct_set(set: &mut EpochSet, baseline: (f64, f64)) -> Result<()> {
    for e in &mut set.epochs {
        baseline_correct_in_place(e, baseline)?;
    }
    Ok(())
}

/// Drops epochs with any `|sample| > threshold_uv`, logging the offending peak.
pub fn reject_artifacts(set: &EpochSet, threshold_uv: f64) -> Result<EpochSet> {
    if !(threshold_uv > 0.0) {
        return Err(Error::InvalidConfig(format!(
            "artifact threshold must be positive, got {threshold_uv}"
        )));
    }
    let mut out = EpochSet {
        epochs: Vec::with_capacity(set.epochs.len()),
        ..EpochSet::empty(set.channel_names.clone(), set.sample_rate_hz, set.window)
    };
    out.rejection_log = set.rejection_log.clone();
    for e in &set.epochs {
        let (pos, peak) = e
            .data
            .iter()
            .enumerate()
            .fold((0, 0.0f64), |(bi, bv), (i, v)| {
                if v.abs() > bv {
                    (i, v.abs())
                } else {
                    (bi, bv)
                }
            });
        if peak > threshold_uv {
            out.rejection_log.push(Rejection {
                session: e.session,
                marker: e.marker,
                reason: RejectReason::Artifact {
                    channel: set.channel_names[pos / e.n_samples].clone(),
                    peak_uv: e.data[pos],
                },
            });
        } else {
            out.epochs.push(e.clone());
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::signal::{ChannelLayout, DLevel, HandStyle};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    const FS: f64 = 1000.0;

    /// Amplitude of the `freq` component of `x` by direct DFT projection.
    fn dft_amplitude(x: &[f64], freq: f64, fs: f64) -> f64 {
        let (mut re, mut im) = (0.0, 0.0);
        for (k, v) in x.iter().enumerate() {
            let ph = 2.0 * PI * freq * k as f64 / fs;
            re += v * ph.cos();
            im -= v * ph.sin();
        }
        2.0 * (re * re + im * im).sqrt() / x.len() as f64
    }

    fn sine(freq: f64, seconds: f64) -> Vec<f64> {
        let n = (seconds * FS) as usize;
        (0..n)
            .map(|k| (2.0 * PI * freq * k as f64 / FS).sin())
            .collect()
    }

    fn filtered(x: &[f64]) -> Vec<f64> {
        let f = BandpassFilter::design(&FilterSpec::default(), FS).unwrap();
        let mut y = x.to_vec();
        f.apply(&mut y).unwrap();
        y
    }

    #[test]
    fn design_is_stable_with_unit_centre_gain() {
        let f = BandpassFilter::design(&FilterSpec::default(), FS).unwrap();
        assert_eq!(f.sections().len(), 4);
        for s in f.sections() {
            // poles inside unit circle
            assert!(s.a[1] < 1.0 && s.a[1] > 0.0);
        }
        let fc = (1.0f64 * 40.0).sqrt();
        assert!((f.magnitude(fc) - 1.0).abs() < 0.05);
        assert!((f.magnitude(10.0) - 1.0).abs() < 0.01);
    }

    #[test]
    fn ten_hz_passes_with_unit_gain() {
        let x = sine(10.0, 10.0);
        let y = filtered(&x);
        let mid = 2000..8000;
        let gain = dft_amplitude(&y[mid.clone()], 10.0, FS) / dft_amplitude(&x[mid], 10.0, FS);
        assert!((gain - 1.0).abs() < 0.05, "gain {gain}");
    }

    #[test]
    fn constant_input_is_removed() {
        let x = vec![10.0; 10_000];
        let y = filtered(&x);
        let max = y[2000..8000].iter().fold(0.0f64, |m, v| m.max(v.abs()));
        assert!(max < 0.01, "residual {max}");
    }

    #[test]
    fn zero_phase_cross_correlation_peaks_at_zero_lag() {
        let x = sine(7.0, 6.0);
        let y = filtered(&x);
        let seg = 2000..4000;
        let best = (-20i64..=20)
            .max_by(|&a, &b| {
                let xc = |lag: i64| -> f64 {
                    seg.clone()
                        .map(|k| x[k] * y[(k as i64 + lag) as usize])
                        .sum()
                };
                xc(a).total_cmp(&xc(b))
            })
            .unwrap();
        assert!(best.abs() <= 1, "lag {best}");
    }

    #[test]
    fn filter_is_linear() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let x: Vec<f64> = (0..5000).map(|_| rng.random_range(-20.0..20.0)).collect();
        let y: Vec<f64> = (0..5000).map(|_| rng.random_range(-20.0..20.0)).collect();
        let (a, b) = (2.5, -0.75);
        let combo: Vec<f64> = x.iter().zip(&y).map(|(p, q)| a * p + b * q).collect();
        let lhs = filtered(&combo);
        let fx = filtered(&x);
        let fy = filtered(&y);
        let scale = lhs.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        for i in 0..lhs.len() {
            let rhs = a * fx[i] + b * fy[i];
            assert!((lhs[i] - rhs).abs() <= 1e-6 * scale);
        }
    }

    #[test]
    fn short_recordings_rejected() {
        let f = BandpassFilter::design(&FilterSpec::default(), FS).unwrap();
        let mut x = vec![0.0; 1999];
        assert!(matches!(f.apply(&mut x), Err(Error::TooShort { .. })));
    }

    #[test]
    fn invalid_specs_rejected() {
        let bad = [
            FilterSpec { order: 3, ..Default::default() },
            FilterSpec { order: 0, ..Default::default() },
            FilterSpec { high_pass_hz: 50.0, ..Default::default() },
            FilterSpec { low_pass_hz: 600.0, ..Default::default() },
            FilterSpec { high_pass_hz: 0.0, ..Default::default() },
        ];
        for spec in bad {
            assert!(BandpassFilter::design(&spec, FS).is_err(), "{spec:?}");
        }
    }

    fn tagged(sample: usize, trial: u32) -> EventMarker {
        EventMarker {
            sample_index: sample,
            code: EventCode::FeedbackOnset,
            condition: Some(Condition {
                d_level: DLevel::D2,
                style: Some(HandStyle::S1),
                block_id: 0,
                trial_id: trial,
            }),
        }
    }

    fn ramp_recording(n: usize) -> EegRecording {
        let layout = ChannelLayout::new(&["Fz", "Cz"], &[]).unwrap();
        let rows = vec![
            (0..n).map(|k| k as f64).collect(),
            (0..n).map(|k| -(k as f64) * 0.5 + 3.0).collect(),
        ];
        EegRecording::from_rows(FS, layout, rows).unwrap()
    }

    #[test]
    fn epochs_have_700_samples_and_match_slices() {
        let rec = ramp_recording(3000);
        let markers = [tagged(100, 0), tagged(1000, 1), tagged(2600, 2), tagged(2500, 3)];
        let set = extract_epochs(&rec, &markers, &EpochWindow::default(), &[EventCode::FeedbackOnset]);
        assert_eq!(set.len(), 2);
        assert_eq!(set.attempted(), 4);
        for e in &set.epochs {
            assert_eq!(e.n_samples, 700);
            let m = e.marker.sample_index;
            let slice = crate::signal::slice_time(&rec, m - 200, m + 500).unwrap();
            assert_eq!(e.data, slice.samples());
            assert_eq!(e.time_ms(200), 0.0);
            assert_eq!(e.time_ms(0), -200.0);
        }
        assert_eq!(set.rejection_log[0].reason, RejectReason::PreBoundary);
        assert_eq!(set.rejection_log[0].marker.sample_index, 100);
        assert_eq!(set.rejection_log[1].reason, RejectReason::PostBoundary);
        assert_eq!(set.rejection_log[0].reason.label(), "pre-boundary");
    }

    #[test]
    fn epoch_boundaries_are_inclusive_exclusive() {
        let rec = ramp_recording(1000);
        // exactly fits: [300 - 200, 300 + 500) = [100, 800)
        let set = extract_epochs(&rec, &[tagged(200, 0), tagged(500, 1), tagged(501, 2)], &EpochWindow::default(), &[EventCode::FeedbackOnset]);
        assert_eq!(set.len(), 2);
        assert_eq!(set.rejection_log.len(), 1);
        assert_eq!(set.rejection_log[0].marker.sample_index, 501);
    }

    #[test]
    fn non_selected_codes_ignored() {
        let rec = ramp_recording(3000);
        let mut m = tagged(1000, 0);
        m.code = EventCode::TrialStart;
        let set = extract_epochs(&rec, &[m], &EpochWindow::default(), &[EventCode::FeedbackOnset]);
        assert_eq!(set.attempted(), 0);
    }

    #[test]
    fn baseline_on_constant_and_ramp() {
        let rec = ramp_recording(3000);
        let set = extract_epochs(&rec, &[tagged(1000, 0)], &EpochWindow::default(), &[EventCode::FeedbackOnset]);
        let e = baseline_correct(&set.epochs[0], EpochWindow::default().baseline()).unwrap();
        // channel 0 is t_sample = 800 + k; baseline mean over k = 0..200 is 800 + 99.5
        for k in 0..700 {
            let expected = (800 + k) as f64 - 899.5;
            assert!((e.channel(0)[k] - expected).abs() < 1e-9);
            let expected1 = (-((800 + k) as f64) * 0.5 + 3.0) - (-899.5 * 0.5 + 3.0);
            assert!((e.channel(1)[k] - expected1).abs() < 1e-9);
        }
        let mean: f64 = e.channel(0)[..200].iter().sum::<f64>() / 200.0;
        assert!(mean.abs() < 1e-9);

        let mut c = set.epochs[0].clone();
        c.data.iter_mut().for_each(|v| *v = 42.0);
        let c = baseline_correct(&c, (-200.0, 0.0)).unwrap();
        assert!(c.data.iter().all(|&v| v == 0.0));
        assert!(baseline_correct(&c, (-300.0, 0.0)).is_err());
    }

    fn random_set(seed: u64, n: usize, amp: f64) -> EpochSet {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut set = EpochSet::empty(vec!["A".into(), "B".into()], FS, EpochWindow { pre_ms: 2.0, post_ms: 3.0 });
        for i in 0..n {
            set.epochs.push(Epoch {
                condition: tagged(0, i as u32).condition.unwrap(),
                session: 0,
                marker: tagged(10 * i, i as u32),
                sample_rate_hz: FS,
                pre_samples: 2,
                n_channels: 2,
                n_samples: 5,
                data: (0..10).map(|_| rng.random_range(-amp..amp)).collect(),
            });
        }
        set
    }

    #[test]
    fn rejection_cases() {
        let mut set = random_set(1, 5, 50.0);
        assert_eq!(reject_artifacts(&set, 100.0).unwrap(), set);
        set.epochs[2].data[7] = 150.0;
        let out = reject_artifacts(&set, 100.0).unwrap();
        assert_eq!(out.len(), 4);
        assert_eq!(out.epochs.iter().map(|e| e.condition.trial_id).collect::<Vec<_>>(), vec![0, 1, 3, 4]);
        assert_eq!(
            out.rejection_log[0].reason,
            RejectReason::Artifact { channel: "B".into(), peak_uv: 150.0 }
        );
        assert!(reject_artifacts(&set, 0.0).is_err());
    }

    #[test]
    fn rejection_count_matches_scan_and_is_idempotent() {
        for seed in 0..10 {
            let set = random_set(seed, 40, 130.0);
            let scan = set
                .epochs
                .iter()
                .filter(|e| e.data.iter().any(|v| v.abs() > 120.0))
                .count();
            let out = reject_artifacts(&set, 120.0).unwrap();
            assert_eq!(out.rejection_log.len(), scan);
            assert_eq!(out.attempted(), set.attempted());
            assert_eq!(reject_artifacts(&out, 120.0).unwrap(), out);
        }
    }

    #[test]
    fn filter_then_epoch_equals_epoch_of_prefiltered() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let layout = ChannelLayout::new(&["Fz"], &[]).unwrap();
        let rec = EegRecording::new(FS, layout, 5000, (0..5000).map(|_| rng.random_range(-5.0..5.0)).collect()).unwrap();
        let markers = [tagged(1500, 0), tagged(3000, 1)];
        let pre = bandpass(&rec, &FilterSpec::default()).unwrap();
        let a = extract_epochs(&pre, &markers, &EpochWindow::default(), &[EventCode::FeedbackOnset]);
        let b = extract_epochs(&bandpass(&rec, &FilterSpec::default()).unwrap(), &markers, &EpochWindow::default(), &[EventCode::FeedbackOnset]);
        assert_eq!(a, b);
    }
}
